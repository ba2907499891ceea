"""Experiment harness: episodes, regret metrics, and run artifacts.

An episode plays the optimization loop against a simulated comparison
oracle for a fixed horizon and records everything needed for analysis.
A run is a set of episodes over consecutive seeds; it lands on disk as

    <out_dir>/<run_id>/episode_<seed>.csv
    <out_dir>/<run_id>/summary.json
    <out_dir>/<run_id>/manifest.json

Episode i uses seed base_seed + i, with instance, oracle, and starting
point drawn from independent sub-streams so the instance identity stays
stable across algorithm variants.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import PopBoConfig, SessionState, report_index
from .instances import (
    TEST_FUNCTION_NAMES,
    GroundTruth,
    comfort_synth,
    oracle_from_truth,
    sample_gp_instance,
    test_function,
)
from .kernels import KernelSpec

GP_KNOTS_1D = 50
GP_KNOTS_2D = 150
TEST_FUNCTION_NORM_BOUND = 6.0
TEST_FUNCTION_LENGTHSCALES = {
    "beale": 0.9,
    "branin": 2.0,
    "bukin": 1.0,
    "cross_in_tray": 2.0,
    "eggholder": 80.0,
    "holder_table": 1.5,
    "levy13": 2.0,
}

INSTANCE_NAMES = ("gp-se", "gp-se-unit", "gp-se-2d", "comfort-synth") + tuple(
    name.replace("_", "-") for name in TEST_FUNCTION_NAMES
)


@dataclass
class EpisodeTrace:
    """Per-step record of one episode."""

    seed: int
    config_hash: str
    xs: np.ndarray
    regrets: np.ndarray
    sigmas: np.ndarray
    radii: np.ndarray
    t_stars: np.ndarray
    t_star_subopts: np.ndarray
    max_mle_subopts: np.ndarray
    mle_objectives: np.ndarray
    advantages: np.ndarray
    prefs: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.regrets)


def config_hash(config: PopBoConfig) -> str:
    return hashlib.sha256(json.dumps(config.to_json(), sort_keys=True).encode()).hexdigest()[:12]


def run_episode(
    config: PopBoConfig,
    truth: GroundTruth,
    T: int,
    rng: np.random.Generator,
    *,
    compute_max_mle: bool = True,
    max_mle_budget: int | None = None,
) -> EpisodeTrace:
    """Play T steps against the simulated oracle for this ground truth."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    oracle = oracle_from_truth(truth, rng)
    state = SessionState(config=config)
    xs, regrets, t_stars, t_star_subopts, max_mle_subopts = [], [], [], [], []
    for _ in range(T):
        x, x_ref = state.next_query()
        state.observe(oracle(x, x_ref))
        xs.append(x)
        regrets.append(truth.known_max - truth.value(x))
        idx = report_index(state.radius_trace)
        t_stars.append(idx)
        t_star_subopts.append(truth.suboptimality(state.queries[idx - 1]))
        if compute_max_mle:
            max_mle_subopts.append(truth.suboptimality(state.report_max_mle(max_mle_budget)))
        else:
            max_mle_subopts.append(math.nan)
    return EpisodeTrace(
        seed=config.seed,
        config_hash=config_hash(config),
        xs=np.asarray(xs),
        regrets=np.asarray(regrets),
        sigmas=np.asarray(state.sigma_trace),
        radii=np.asarray(state.radius_trace),
        t_stars=np.asarray(t_stars, dtype=int),
        t_star_subopts=np.asarray(t_star_subopts),
        max_mle_subopts=np.asarray(max_mle_subopts),
        mle_objectives=np.asarray(state.mle_trace),
        advantages=np.asarray(state.advantage_trace),
        prefs=np.asarray([r.pref for r in state.history.records], dtype=int),
    )


def cumulative_regret(trace: EpisodeTrace | np.ndarray) -> np.ndarray:
    regrets = trace.regrets if isinstance(trace, EpisodeTrace) else np.asarray(trace, dtype=float)
    if regrets.size == 0:
        raise ValueError("empty trace")
    return np.cumsum(regrets)


def loglog_slope(curve, burn_in: int = 5) -> float:
    """Least-squares slope of log(curve_t) against log(t) for t > burn_in."""
    curve = np.asarray(curve, dtype=float)
    ts = np.arange(1, curve.size + 1)
    mask = ts > burn_in
    if not np.any(mask):
        raise ValueError("burn-in leaves no points to fit")
    if np.any(curve[mask] <= 0):
        raise ValueError("curve must be positive after burn-in")
    return float(np.polyfit(np.log(ts[mask]), np.log(curve[mask]), 1)[0])


def _mean_std(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=0)
    std = rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.zeros(rows.shape[1])
    return mean, std


def aggregate(traces: list[EpisodeTrace]) -> dict:
    """Per-step mean/std across episodes (sample standard deviation)."""
    if not traces:
        raise ValueError("need at least one trace")
    horizons = {tr.horizon for tr in traces}
    if len(horizons) != 1:
        raise ValueError(f"traces have mixed horizons {sorted(horizons)}")
    regs = np.stack([tr.regrets for tr in traces])
    cums = np.stack([cumulative_regret(tr) for tr in traces])
    tsub = np.stack([tr.t_star_subopts for tr in traces])
    msub = np.stack([tr.max_mle_subopts for tr in traces])
    out = {"n_episodes": len(traces), "horizon": traces[0].horizon, "std_convention": "sample (ddof=1)"}
    for key, rows in (
        ("regret", regs),
        ("cum_regret", cums),
        ("t_star_subopt", tsub),
        ("max_mle_subopt", msub),
    ):
        mean, std = _mean_std(rows)
        out[f"{key}_mean"] = mean.tolist()
        out[f"{key}_std"] = std.tolist()
        out[f"final_{key}_mean"] = float(mean[-1])
        out[f"final_{key}_std"] = float(std[-1])
    return out


# -- instance registry -------------------------------------------------------


def _streams(seed: int):
    instance = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    oracle = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    start = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))
    return instance, oracle, start


def make_setup(instance: str, seed: int, overrides: dict | None = None):
    """Ground truth plus engine config for one (instance, seed) episode."""
    overrides = dict(overrides or {})
    inst_rng, oracle_rng, start_rng = _streams(seed)
    if instance == "gp-se":
        kernel = KernelSpec("se", 1, variance=9.0, lengthscale=1.0)
        domain = np.array([[0.0, 10.0]])
        truth = sample_gp_instance(inst_rng, kernel, GP_KNOTS_1D, domain)
        norm_bound = truth.manifest["norm_bound"]
    elif instance == "gp-se-unit":
        # normalized regime k(x,x) <= 1, the setting the confidence-set
        # guarantees actually assume
        kernel = KernelSpec("se", 1, variance=1.0, lengthscale=1.0)
        domain = np.array([[0.0, 10.0]])
        truth = sample_gp_instance(inst_rng, kernel, GP_KNOTS_1D, domain)
        norm_bound = truth.manifest["norm_bound"]
    elif instance == "gp-se-2d":
        kernel = KernelSpec("se", 2, variance=9.0, lengthscale=1.0)
        domain = np.array([[0.0, 10.0], [0.0, 10.0]])
        truth = sample_gp_instance(inst_rng, kernel, GP_KNOTS_2D, domain)
        norm_bound = truth.manifest["norm_bound"]
    elif instance == "comfort-synth":
        truth = comfort_synth()
        domain = truth.domain
        kernel = KernelSpec("se", 2, variance=1.0, lengthscale=1.2)
        norm_bound = TEST_FUNCTION_NORM_BOUND
    else:
        name = instance.replace("-", "_")
        if name not in TEST_FUNCTION_NAMES:
            raise ValueError(f"unknown instance {instance!r}; expected one of {INSTANCE_NAMES}")
        truth = test_function(name)
        domain = truth.domain
        kernel = KernelSpec("se", 2, variance=1.0, lengthscale=TEST_FUNCTION_LENGTHSCALES[name])
        norm_bound = TEST_FUNCTION_NORM_BOUND
    if "kernel" in overrides:
        kernel = overrides.pop("kernel")
        if isinstance(kernel, dict):
            kernel = KernelSpec.from_json(kernel)
    if "norm_bound" in overrides and overrides["norm_bound"] is not None:
        norm_bound = overrides.pop("norm_bound")
    else:
        overrides.pop("norm_bound", None)
    x0 = domain[:, 0] + start_rng.random(domain.shape[0]) * (domain[:, 1] - domain[:, 0])
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        config = PopBoConfig(
            kernel=kernel,
            domain=domain,
            x0=x0,
            norm_bound=norm_bound,
            seed=seed,
            **{k: v for k, v in overrides.items() if v is not None},
        )
    return truth, config, oracle_rng


def _episode_job(args: tuple) -> tuple[int, dict, EpisodeTrace]:
    instance, seed, horizon, overrides, episode_csv, compute_max_mle = args
    truth, config, oracle_rng = make_setup(instance, seed, overrides)
    trace = run_episode(config, truth, horizon, oracle_rng, compute_max_mle=compute_max_mle)
    if episode_csv:
        write_episode_csv(episode_csv, trace)
    return seed, truth.manifest, trace


def write_episode_csv(path: str, trace: EpisodeTrace) -> None:
    cums = cumulative_regret(trace)
    d = trace.xs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t"]
            + [f"x{j}" for j in range(d)]
            + ["regret", "cum_regret", "report_radius", "t_star", "report_subopt", "max_mle_subopt"]
        )
        for i in range(trace.horizon):
            writer.writerow(
                [i + 1]
                + [repr(float(v)) for v in trace.xs[i]]
                + [
                    repr(float(trace.regrets[i])),
                    repr(float(cums[i])),
                    repr(float(trace.radii[i])),
                    int(trace.t_stars[i]),
                    repr(float(trace.t_star_subopts[i])),
                    repr(float(trace.max_mle_subopts[i])),
                ]
            )


def run_benchmark(
    instance: str,
    seeds: int,
    horizon: int,
    out_dir: str,
    *,
    base_seed: int = 0,
    run_id: str | None = None,
    workers: int | None = None,
    overrides: dict | None = None,
    compute_max_mle: bool = True,
    burn_in: int = 5,
) -> dict:
    """Run episodes over consecutive seeds and write the run artifacts."""
    if instance not in INSTANCE_NAMES:
        raise ValueError(f"unknown instance {instance!r}; expected one of {INSTANCE_NAMES}")
    run_id = run_id or f"{instance}-T{horizon}-n{seeds}-s{base_seed}"
    run_dir = os.path.join(out_dir, run_id)
    os.makedirs(run_dir, exist_ok=True)
    jobs = [
        (
            instance,
            base_seed + i,
            horizon,
            overrides or {},
            os.path.join(run_dir, f"episode_{base_seed + i}.csv"),
            compute_max_mle,
        )
        for i in range(seeds)
    ]
    if workers is None:
        workers = min(os.cpu_count() or 1, seeds)
    if workers > 1 and seeds > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_job, jobs))
    else:
        results = [_episode_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    traces = [r[2] for r in results]
    summary = aggregate(traces)
    slopes = []
    for tr in traces:
        cums = cumulative_regret(tr)
        if tr.horizon > burn_in + 1 and np.all(cums[burn_in:] > 0):
            slopes.append(loglog_slope(cums, burn_in))
    summary.update(
        {
            "instance": instance,
            "base_seed": base_seed,
            "seeds": seeds,
            "burn_in": burn_in,
            "loglog_slopes": slopes,
            "mean_loglog_slope": float(np.mean(slopes)) if slopes else None,
            "median_t_star_subopt_by_step": np.median(
                np.stack([tr.t_star_subopts for tr in traces]), axis=0
            ).tolist(),
            "median_max_mle_subopt_by_step": np.median(
                np.stack([tr.max_mle_subopts for tr in traces]), axis=0
            ).tolist()
            if compute_max_mle
            else None,
        }
    )
    with open(os.path.join(run_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
    manifest = {
        "instance": instance,
        "horizon": horizon,
        "base_seed": base_seed,
        "overrides": {k: (v.to_json() if isinstance(v, KernelSpec) else v) for k, v in (overrides or {}).items()},
        "episodes": [
            {"seed": seed, "instance_manifest": m, "config_hash": tr.config_hash}
            for seed, m, tr in results
        ],
    }
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    return summary
