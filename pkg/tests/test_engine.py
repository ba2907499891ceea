import json
import math

import numpy as np
import pytest

from popbo.engine import PendingQuery, PopBoConfig, ProtocolError, SessionState, beta1, report_index
from popbo.kernels import Duel, KernelSpec, duel_sigma
from popbo.preference import link_constants

SE1 = KernelSpec("se", 1)


def make_config(**kw):
    defaults = dict(
        kernel=SE1,
        domain=[[0.0, 1.0]],
        x0=[0.5],
        norm_bound=2.0,
        seed=0,
        outer_budget=41,
    )
    defaults.update(kw)
    return PopBoConfig(**defaults)


def drive(state, prefs):
    for p in prefs:
        state.next_query()
        state.observe(p)
    return state


def test_beta_schedule():
    assert beta1(1, 1.0) == pytest.approx(1.0)
    assert beta1(4, 1.0) == pytest.approx(2.0)
    assert beta1(9, 0.5) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        beta1(0, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        make_config(x0=[1.5])
    with pytest.raises(ValueError):
        make_config(norm_bound=0.0)
    cfg = make_config()
    assert PopBoConfig.from_json(cfg.to_json()).to_json() == cfg.to_json()


def test_first_reference_is_x0():
    state = SessionState(config=make_config())
    x, x_ref = state.next_query()
    assert np.array_equal(x_ref, np.array([0.5]))


def test_first_query_is_farthest_grid_point():
    # with no data the advantage grows with kernel distance from x0, so
    # the argmax sits at a domain endpoint; ties break to the lower index
    state = SessionState(config=make_config())
    x, _ = state.next_query()
    assert x[0] == pytest.approx(0.0)


def test_chaining_invariant_and_traces():
    state = SessionState(config=make_config(seed=3))
    drive(state, [1, 0, 1])
    recs = state.history.records
    assert np.array_equal(recs[0].x_prime, state.history.x0)
    for i in range(1, len(recs)):
        assert np.array_equal(recs[i].x_prime, recs[i - 1].x)
    assert len(state.sigma_trace) == state.t == 3
    assert len(state.radius_trace) == 3
    assert len(state.mle_trace) == 3
    x, ref = state.next_query()
    assert np.array_equal(ref, recs[-1].x)


def test_protocol_errors():
    state = SessionState(config=make_config())
    with pytest.raises(ProtocolError):
        state.observe(1)
    state.next_query()
    with pytest.raises(ProtocolError):
        state.next_query()
    with pytest.raises(ValueError):
        state.observe(2)


def test_observe_records_preference():
    state = SessionState(config=make_config())
    state.next_query()
    state.observe(1)
    assert state.history.records[-1].pref == 1


def test_mle_objective_bounds():
    state = SessionState(config=make_config(seed=5))
    drive(state, [1, 1, 0, 1])
    floor = state.t * math.log(link_constants(2.0 * state.B).sigma_lo)
    assert floor <= state.mle.objective <= 0.0


def test_replay_determinism():
    prefs = [1, 0, 1, 1, 0]
    a = drive(SessionState(config=make_config(seed=11)), prefs)
    b = drive(SessionState(config=make_config(seed=11)), prefs)
    assert np.array_equal(np.array(a.queries), np.array(b.queries))
    assert a.radius_trace == b.radius_trace
    assert a.mle_trace == b.mle_trace


def test_report_index_rules():
    assert report_index([3.0]) == 1
    assert report_index([3.0, 1.2, 2.5]) == 2
    assert report_index([1.0, 1.0]) == 1
    with pytest.raises(ValueError):
        report_index([])


def test_report_t_star_from_state():
    state = SessionState(config=make_config(seed=2))
    drive(state, [1, 1])
    idx, x = state.report_t_star()
    assert idx == report_index(state.radius_trace)
    assert np.array_equal(x, state.queries[idx - 1])
    with pytest.raises(ProtocolError):
        SessionState(config=make_config()).report_t_star()


def test_radius_trace_matches_direct_sigma():
    state = SessionState(config=make_config(seed=7))
    drive(state, [1, 0, 1])
    # entry tau is conditioned on duels strictly before tau
    tau = 3
    past = [Duel(r.x, r.x_prime) for r in state.history.records[: tau - 1]]
    w = Duel(state.history.records[tau - 1].x, state.history.records[tau - 1].x_prime)
    sigma = duel_sigma(SE1, past, state.config.lam, w)
    assert state.sigma_trace[tau - 1] == pytest.approx(sigma, abs=1e-12)
    b1 = beta1(tau, state.config.beta0)
    radius = 2.0 * (2.0 * state.B + math.sqrt(b1 / state.config.lam)) * sigma
    assert state.radius_trace[tau - 1] == pytest.approx(radius, abs=1e-12)


def test_min_radius_non_increasing():
    state = SessionState(config=make_config(seed=13))
    mins = []
    for p in [1, 0, 1, 1, 0, 0, 1]:
        state.next_query()
        state.observe(p)
        mins.append(min(state.radius_trace))
    assert all(mins[i + 1] <= mins[i] + 1e-12 for i in range(len(mins) - 1))


def test_report_max_mle_no_data_returns_start():
    state = SessionState(config=make_config())
    assert np.array_equal(state.report_max_mle(), np.array([0.5]))


def test_report_max_mle_interpolates_fitted_values():
    state = SessionState(config=make_config(seed=17, jitter=1e-8))
    drive(state, [1, 0, 1, 1])
    pts = state.history.points
    from popbo.kernels import cross_kernel
    from scipy.linalg import cho_factor, cho_solve

    K = cross_kernel(SE1, pts, pts) + 1e-8 * np.eye(pts.shape[0])
    alpha = cho_solve(cho_factor(K, lower=True), state.mle.argmax)
    for i in range(pts.shape[0]):
        val = float((cross_kernel(SE1, pts[i][None], pts) @ alpha)[0])
        assert val == pytest.approx(state.mle.argmax[i], abs=1e-6 * (1 + abs(state.mle.argmax[i])))


def test_checkpoint_round_trip_resumes_identically():
    prefs = [1, 0, 1]
    state = drive(SessionState(config=make_config(seed=23)), prefs)
    snap = state.checkpoint_json()
    resumed = SessionState.from_checkpoint(snap)
    assert resumed.t == state.t
    assert resumed.radius_trace == state.radius_trace
    assert resumed.mle_trace == state.mle_trace
    xa, ra = state.next_query()
    xb, rb = resumed.next_query()
    assert np.array_equal(xa, xb)
    assert np.array_equal(ra, rb)
    assert state.pending.radius == resumed.pending.radius
    # checkpoint with a pending duel round-trips too
    snap2 = state.checkpoint_json()
    resumed2 = SessionState.from_checkpoint(json.loads(snap2))
    assert isinstance(resumed2.pending, PendingQuery)
    state.observe(1)
    resumed2.observe(1)
    assert state.mle_trace == resumed2.mle_trace


def test_checkpoint_replay_bit_identical():
    prefs = [1, 0, 1, 1]
    a = drive(SessionState(config=make_config(seed=29)), prefs)
    b = drive(SessionState(config=make_config(seed=29)), prefs)
    assert a.checkpoint_json() == b.checkpoint_json()


def test_adapt_norm_bound_fresh_state_is_identity():
    state = SessionState(config=make_config())
    assert state.adapt_norm_bound() is False
    assert state.B == 2.0


def test_adapt_norm_bound_triggers_on_binding_squeeze():
    # alternating duels between two fixed points with a perfectly
    # consistent winner: the ball caps the fitted gap, so the doubled
    # ball gains likelihood linearly in t and the ratio test fires
    from popbo.likelihood import DuelRecord
    from popbo.solver import solve_mle

    cfg = make_config(norm_bound=1.0, x0=[0.0])
    state = SessionState(config=cfg)
    a, b = np.array([0.0]), np.array([1.0])
    prev = a
    for tau in range(100):
        nxt = b if np.array_equal(prev, a) else a
        state.history.append(DuelRecord(x=nxt, x_prime=prev, pref=1 if nxt[0] == 1.0 else 0))
        state.queries.append(nxt)
        state.sigma_trace.append(1.0)
        state.radius_trace.append(1.0)
        state.advantage_trace.append(0.0)
        prev = nxt
    state.t = 100
    state.mle = solve_mle(state.history, cfg.kernel, state.B, cfg.jitter)
    state.mle_trace = [state.mle.objective]
    assert state.adapt_norm_bound() is True
    assert state.B == pytest.approx(2.0)
    assert state.doublings == 1
    # once B is generous enough the gap falls back under the threshold
    state.mle = solve_mle(state.history, cfg.kernel, state.B, cfg.jitter)


def test_adapt_norm_bound_well_specified_rarely_fires():
    # small-scale version of the calibration run: a generous, honest ball
    # should essentially never double
    fired = 0
    for seed in range(4):
        state = SessionState(config=make_config(seed=seed, norm_bound=3.0, outer_budget=21))
        rng = np.random.default_rng(seed + 100)
        for _ in range(8):
            state.next_query()
            state.observe(int(rng.random() < 0.5))
            if state.adapt_norm_bound():
                fired += 1
                break
    assert fired == 0


def _max_mle_sanity_job(seed):
    import warnings

    warnings.simplefilter("ignore")
    from popbo.bench import make_setup
    from popbo.instances import oracle_from_truth

    truth, config, oracle_rng = make_setup("gp-se-unit", seed, {"outer_budget": 41})
    oracle = oracle_from_truth(truth, oracle_rng)
    state = SessionState(config=config)
    for _ in range(10):
        x, ref = state.next_query()
        state.observe(oracle(x, ref))
    f_rep = truth.value(state.report_max_mle())
    best_obs = max(truth.value(x) for x in state.queries)
    return bool(f_rep >= best_obs - 0.5)


def test_report_max_mle_empirical_sanity():
    # ten preference bits only loosely pin the fitted values, so the
    # interpolant argmax lands within half a unit of the best observed
    # value on most but not all seeds (deterministic run: 20 of 30)
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(_max_mle_sanity_job, range(30)))
    assert sum(results) >= 16


def test_single_point_domain_session():
    cfg = make_config(domain=[[0.5, 0.5]], x0=[0.5])
    state = SessionState(config=cfg)
    x, ref = state.next_query()
    assert x[0] == pytest.approx(0.5)
    state.observe(1)
    assert state.t == 1
