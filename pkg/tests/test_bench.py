import json
import math

import numpy as np
import pytest

from popbo.bench import (
    EpisodeTrace,
    aggregate,
    cumulative_regret,
    loglog_slope,
    make_setup,
    run_benchmark,
    run_episode,
    write_episode_csv,
)
from popbo.engine import PopBoConfig, report_index
from popbo.instances import GroundTruth, comfort_synth
from popbo.kernels import KernelSpec


def tiny_config(seed=0, **kw):
    defaults = dict(
        kernel=KernelSpec("se", 1),
        domain=[[0.0, 1.0]],
        x0=[0.4],
        norm_bound=2.0,
        seed=seed,
        outer_budget=15,
    )
    defaults.update(kw)
    return PopBoConfig(**defaults)


def constant_truth():
    return GroundTruth(
        name="flat",
        evaluate=lambda X: np.zeros(np.atleast_2d(X).shape[0]),
        domain=np.array([[0.0, 1.0]]),
        known_max=0.0,
        argmax=np.array([0.0]),
        manifest={"type": "flat"},
    )


def bump_truth():
    def f(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return 3.0 * np.exp(-((X[:, 0] - 0.7) ** 2) / 0.05)

    grid = np.linspace(0, 1, 2001)[:, None]
    vals = f(grid)
    i = int(np.argmax(vals))
    return GroundTruth(
        name="bump",
        evaluate=f,
        domain=np.array([[0.0, 1.0]]),
        known_max=float(vals[i]),
        argmax=grid[i],
        manifest={"type": "bump"},
    )


def test_single_step_episode():
    trace = run_episode(tiny_config(), bump_truth(), 1, np.random.default_rng(0))
    assert trace.horizon == 1
    assert trace.regrets[0] >= 0.0
    assert trace.t_stars[0] == 1


def test_constant_truth_zero_regret():
    trace = run_episode(tiny_config(), constant_truth(), 3, np.random.default_rng(1))
    assert np.allclose(trace.regrets, 0.0)
    assert np.allclose(cumulative_regret(trace), 0.0)


def test_episode_determinism():
    a = run_episode(tiny_config(seed=5), bump_truth(), 4, np.random.default_rng(9))
    b = run_episode(tiny_config(seed=5), bump_truth(), 4, np.random.default_rng(9))
    assert np.array_equal(a.xs, b.xs)
    assert np.array_equal(a.regrets, b.regrets)
    assert np.array_equal(a.radii, b.radii)
    assert np.array_equal(a.max_mle_subopts, b.max_mle_subopts)


def test_rejects_bad_horizon():
    with pytest.raises(ValueError):
        run_episode(tiny_config(), bump_truth(), 0, np.random.default_rng(0))


def test_cumulative_regret_prefix_sums():
    assert cumulative_regret(np.array([1.0, 2.0, 3.0])).tolist() == [1.0, 3.0, 6.0]
    assert cumulative_regret(np.array([0.0, 0.0])).tolist() == [0.0, 0.0]
    with pytest.raises(ValueError):
        cumulative_regret(np.array([]))


def test_cumulative_regret_matches_recomputation():
    truth = bump_truth()
    trace = run_episode(tiny_config(seed=2), truth, 5, np.random.default_rng(3))
    recomputed = np.cumsum([truth.known_max - truth.value(x) for x in trace.xs])
    assert np.allclose(cumulative_regret(trace), recomputed, atol=1e-12)


def test_loglog_slope_power_laws():
    ts = np.arange(1, 201, dtype=float)
    assert loglog_slope(ts, 5) == pytest.approx(1.0, abs=1e-6)
    assert loglog_slope(np.sqrt(ts), 5) == pytest.approx(0.5, abs=1e-6)
    assert loglog_slope(ts**0.75, 5) == pytest.approx(0.75, abs=1e-6)


def test_loglog_slope_rejects_nonpositive():
    with pytest.raises(ValueError):
        loglog_slope(np.array([1.0, -1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 1)
    with pytest.raises(ValueError):
        loglog_slope(np.array([1.0, 2.0]), 5)


def make_trace(regrets, seed=0):
    T = len(regrets)
    return EpisodeTrace(
        seed=seed,
        config_hash="x",
        xs=np.zeros((T, 1)),
        regrets=np.asarray(regrets, dtype=float),
        sigmas=np.ones(T),
        radii=np.ones(T),
        t_stars=np.ones(T, dtype=int),
        t_star_subopts=np.asarray(regrets, dtype=float),
        max_mle_subopts=np.asarray(regrets, dtype=float),
        mle_objectives=np.zeros(T),
        advantages=np.zeros(T),
        prefs=np.ones(T, dtype=int),
    )


def test_aggregate_single_trace():
    tr = make_trace([1.0, 2.0])
    out = aggregate([tr])
    assert out["regret_mean"] == [1.0, 2.0]
    assert out["regret_std"] == [0.0, 0.0]
    assert out["final_cum_regret_mean"] == 3.0


def test_aggregate_two_traces_sample_std():
    out = aggregate([make_trace([1.0, 1.0]), make_trace([3.0, 3.0], seed=1)])
    assert out["regret_mean"] == [2.0, 2.0]
    assert out["regret_std"][0] == pytest.approx(math.sqrt(2.0))
    assert out["std_convention"] == "sample (ddof=1)"


def test_aggregate_rejects_mixed_horizons():
    with pytest.raises(ValueError):
        aggregate([make_trace([1.0]), make_trace([1.0, 2.0], seed=1)])


def test_report_uses_only_prefix_information():
    trace = run_episode(tiny_config(seed=7), bump_truth(), 6, np.random.default_rng(11))
    for tau in range(1, trace.horizon + 1):
        assert trace.t_stars[tau - 1] == report_index(list(trace.radii[:tau]))


def test_cumulative_regret_non_decreasing_non_negative():
    trace = run_episode(tiny_config(seed=8), bump_truth(), 6, np.random.default_rng(13))
    cums = cumulative_regret(trace)
    assert np.all(np.diff(cums) >= -1e-12)
    assert np.all(cums >= -1e-12)


def test_make_setup_instances():
    truth, config, rng = make_setup("beale", 3, {})
    assert truth.name == "beale"
    assert config.norm_bound == 6.0
    assert config.seed == 3
    truth2, config2, _ = make_setup("gp-se", 11, {})
    assert config2.norm_bound == pytest.approx(1.1 * truth2.manifest["rkhs_norm"])
    truth3, config3, _ = make_setup("comfort-synth", 0, {})
    assert truth3.name == "comfort_synth"
    with pytest.raises(ValueError):
        make_setup("nope", 0, {})
    # same seed rebuilds the identical instance and start
    ta, ca, _ = make_setup("gp-se", 4, {})
    tb, cb, _ = make_setup("gp-se", 4, {})
    assert np.array_equal(np.asarray(ta.manifest["values"]), np.asarray(tb.manifest["values"]))
    assert np.array_equal(ca.x0, cb.x0)


def test_write_episode_csv_round_readable(tmp_path):
    trace = run_episode(tiny_config(seed=1), bump_truth(), 3, np.random.default_rng(2))
    path = tmp_path / "episode_1.csv"
    write_episode_csv(str(path), trace)
    import csv as csvmod

    rows = list(csvmod.DictReader(open(path)))
    assert len(rows) == 3
    assert float(rows[2]["cum_regret"]) == pytest.approx(float(cumulative_regret(trace)[-1]))
    assert int(rows[0]["t"]) == 1


def test_run_benchmark_file_layout(tmp_path):
    summary = run_benchmark(
        "comfort-synth",
        seeds=2,
        horizon=3,
        out_dir=str(tmp_path),
        run_id="smoke",
        workers=1,
        overrides={"outer_budget": 9},
    )
    run_dir = tmp_path / "smoke"
    assert (run_dir / "episode_0.csv").exists()
    assert (run_dir / "episode_1.csv").exists()
    assert (run_dir / "summary.json").exists()
    assert (run_dir / "manifest.json").exists()
    loaded = json.load(open(run_dir / "summary.json"))
    assert loaded["n_episodes"] == 2
    assert loaded["final_t_star_subopt_mean"] == summary["final_t_star_subopt_mean"]
    manifest = json.load(open(run_dir / "manifest.json"))
    assert len(manifest["episodes"]) == 2
    assert manifest["episodes"][0]["instance_manifest"]["type"] == "comfort_synth"
