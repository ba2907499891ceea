"""The preference-only optimization loop.

A session alternates two moves: :meth:`SessionState.next_query` proposes
a new point to duel against the previous query (the chained reference),
and :meth:`SessionState.observe` ingests the oracle's preference bit,
refreshing the constrained maximum-likelihood fit.  Two reporting rules
are available at any time:

* ``report_t_star`` returns the past query whose recorded uncertainty
  radius 2*(2B + sqrt(beta_t)/sqrt(lam)) * sigma_t is smallest;
* ``report_max_mle`` returns the domain argmax of the minimum-norm
  interpolant through the fitted values.

Everything is deterministic given the config seed and the preference
bit sequence, so episodes can be checkpointed and replayed bit-for-bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kernels import DEFAULT_JITTER, DEFAULT_LAMBDA, Duel, KernelSpec, cross_kernel, duel_sigma
from .likelihood import DuelRecord, History
from .preference import link_constants
from .solver import SolveReport, StepWorkspace, grid_candidates, maximize_acquisition, solve_mle


class ProtocolError(RuntimeError):
    """A query/observe call arrived out of order."""


def beta1(t: int, beta0: float) -> float:
    """Confidence-slack schedule beta0 * sqrt(t) for step t >= 1."""
    if t < 1:
        raise ValueError("t must be at least 1")
    return beta0 * math.sqrt(t)


@dataclass
class PopBoConfig:
    kernel: KernelSpec
    domain: np.ndarray
    x0: np.ndarray
    norm_bound: float
    beta0: float = 1.0
    lam: float = DEFAULT_LAMBDA
    jitter: float = DEFAULT_JITTER
    outer_budget: int | None = None
    seed: int = 0
    guard_factor: float = 1.5
    labels: list[str] | None = None

    def __post_init__(self):
        self.domain = np.asarray(self.domain, dtype=float).reshape(-1, 2)
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if self.x0.shape[0] != self.domain.shape[0]:
            raise ValueError("x0 dimension does not match the domain box")
        if np.any(self.x0 < self.domain[:, 0]) or np.any(self.x0 > self.domain[:, 1]):
            raise ValueError("x0 must lie inside the domain box")
        for name in ("norm_bound", "beta0", "lam", "jitter"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def to_json(self) -> dict:
        return {
            "kernel": self.kernel.to_json(),
            "domain": self.domain.tolist(),
            "x0": self.x0.tolist(),
            "norm_bound": self.norm_bound,
            "beta0": self.beta0,
            "lambda": self.lam,
            "jitter": self.jitter,
            "outer_budget": self.outer_budget,
            "seed": self.seed,
            "guard_factor": self.guard_factor,
            "labels": self.labels,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PopBoConfig":
        return cls(
            kernel=KernelSpec.from_json(obj["kernel"]),
            domain=obj["domain"],
            x0=obj["x0"],
            norm_bound=float(obj["norm_bound"]),
            beta0=float(obj.get("beta0", 1.0)),
            lam=float(obj.get("lambda", DEFAULT_LAMBDA)),
            jitter=float(obj.get("jitter", DEFAULT_JITTER)),
            outer_budget=obj.get("outer_budget"),
            seed=int(obj.get("seed", 0)),
            guard_factor=float(obj.get("guard_factor", 1.5)),
            labels=obj.get("labels"),
        )


@dataclass
class PendingQuery:
    x: np.ndarray
    x_ref: np.ndarray
    sigma: float
    radius: float
    advantage: float


@dataclass
class SessionState:
    """Single-writer optimization session; see module docstring."""

    config: PopBoConfig
    history: History = field(init=False)
    B: float = field(init=False)
    t: int = field(init=False, default=0)
    pending: PendingQuery | None = field(init=False, default=None)
    mle: SolveReport = field(init=False)
    queries: list[np.ndarray] = field(init=False, default_factory=list)
    sigma_trace: list[float] = field(init=False, default_factory=list)
    radius_trace: list[float] = field(init=False, default_factory=list)
    advantage_trace: list[float] = field(init=False, default_factory=list)
    mle_trace: list[float] = field(init=False, default_factory=list)
    doublings: int = field(init=False, default=0)

    def __post_init__(self):
        self.history = History(x0=self.config.x0)
        self.B = float(self.config.norm_bound)
        self.mle = solve_mle(self.history, self.config.kernel, self.B, self.config.jitter)

    # -- core loop ---------------------------------------------------------

    def _step_rng(self, step: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.config.seed, spawn_key=(step,))
        )

    def next_query(self) -> tuple[np.ndarray, np.ndarray]:
        if self.pending is not None:
            raise ProtocolError("a query is already awaiting a preference")
        cfg = self.config
        step = self.t + 1
        x_ref = self.history.records[-1].x if self.history.records else self.history.x0
        ws = StepWorkspace(self.history, cfg.kernel, self.B, cfg.jitter)
        ws.mle = self.mle
        b1 = beta1(step, cfg.beta0)
        x, advantage = maximize_acquisition(
            cfg.domain, self.history, cfg.kernel, self.B, b1, self.mle.objective,
            cfg.jitter, budget=cfg.outer_budget, rng=self._step_rng(step), workspace=ws,
        )
        past = [Duel(r.x, r.x_prime) for r in self.history.records]
        sigma = duel_sigma(cfg.kernel, past, cfg.lam, Duel(x, x_ref))
        radius = 2.0 * (2.0 * self.B + math.sqrt(b1 / cfg.lam)) * sigma
        self.pending = PendingQuery(x=x, x_ref=x_ref, sigma=sigma, radius=radius, advantage=advantage)
        return x, x_ref

    def observe(self, preference: int) -> "SessionState":
        if self.pending is None:
            raise ProtocolError("no query is awaiting a preference")
        if preference not in (0, 1):
            raise ValueError("preference must be 0 or 1")
        p = self.pending
        self.history.append(DuelRecord(x=p.x, x_prime=p.x_ref, pref=preference))
        self.queries.append(p.x)
        self.sigma_trace.append(p.sigma)
        self.radius_trace.append(p.radius)
        self.advantage_trace.append(p.advantage)
        self.pending = None
        self.t += 1
        self.mle = solve_mle(
            self.history, self.config.kernel, self.B, self.config.jitter,
            warm_start=self.mle.argmax,
        )
        self.mle_trace.append(self.mle.objective)
        return self

    # -- reporting ---------------------------------------------------------

    def report_t_star(self) -> tuple[int, np.ndarray]:
        if self.t < 1:
            raise ProtocolError("no resolved duels to report from")
        idx = report_index(self.radius_trace)
        return idx, self.queries[idx - 1]

    def report_max_mle(self, budget: int | None = None) -> np.ndarray:
        if self.t == 0:
            return self.config.x0.copy()
        cfg = self.config
        pts = self.history.points
        K = cross_kernel(cfg.kernel, pts, pts)
        K[np.diag_indices_from(K)] += cfg.jitter
        alpha = cho_solve(cho_factor(K, lower=True), self.mle.argmax)

        def interp(X):
            return cross_kernel(cfg.kernel, X, pts) @ alpha

        d = cfg.domain.shape[0]
        if d <= 2:
            n = budget if budget is not None else (1001 if d == 1 else 101)
            cands = grid_candidates(cfg.domain, n)
            vals = interp(cands)
            return cands[int(np.argmax(vals))].copy()
        rng = self._step_rng(1_000_000 + self.t)
        n = budget if budget is not None else 256
        cands = cfg.domain[:, 0] + rng.random((n, d)) * (cfg.domain[:, 1] - cfg.domain[:, 0])
        vals = interp(cands)
        x = cands[int(np.argmax(vals))]
        span = cfg.domain[:, 1] - cfg.domain[:, 0]
        best = float(np.max(vals))
        h = 0.25 * span
        for step in range(60):
            j = step % d
            improved = False
            for delta in (h[j], -h[j]):
                xp = x.copy()
                xp[j] = float(np.clip(xp[j] + delta, cfg.domain[j, 0], cfg.domain[j, 1]))
                v = float(interp(xp[None, :])[0])
                if v > best:
                    x, best = xp, v
                    improved = True
                    break
            if not improved:
                h[j] *= 0.5
        return x.copy()

    # -- norm-bound adaptation ---------------------------------------------

    def adapt_norm_bound(self) -> bool:
        """Double B when the current ball cannot explain the data.

        The nested-ball likelihood-ratio check refits with 2B and
        triggers when the gain exceeds guard_factor * beta0 * sqrt(t);
        a well-specified ball leaves almost nothing to gain, while a
        too-small ball concedes likelihood linearly in t.
        """
        if self.t == 0:
            return False
        wide = solve_mle(
            self.history, self.config.kernel, 2.0 * self.B, self.config.jitter,
            warm_start=self.mle.argmax,
        )
        gain = wide.objective - self.mle.objective
        if gain <= self.config.guard_factor * self.config.beta0 * math.sqrt(self.t):
            return False
        self.B *= 2.0
        self.doublings += 1
        self.mle = wide
        if self.mle_trace:
            self.mle_trace[-1] = wide.objective
        return True

    def likelihood_floor(self) -> float:
        """Worst-case log-likelihood bound used as a sanity floor."""
        return self.t * math.log(link_constants(2.0 * self.B).sigma_lo)

    # -- persistence ---------------------------------------------------------

    def checkpoint(self) -> dict:
        return {
            "config": self.config.to_json(),
            "B": self.B,
            "doublings": self.doublings,
            "t": self.t,
            "records": [
                {"x": r.x.tolist(), "x_prime": r.x_prime.tolist(), "pref": r.pref}
                for r in self.history.records
            ],
            "queries": [q.tolist() for q in self.queries],
            "sigma_trace": self.sigma_trace,
            "radius_trace": self.radius_trace,
            "advantage_trace": self.advantage_trace,
            "mle_trace": self.mle_trace,
            "mle": {"Z": self.mle.argmax.tolist(), "objective": self.mle.objective},
            "pending": None
            if self.pending is None
            else {
                "x": self.pending.x.tolist(),
                "x_ref": self.pending.x_ref.tolist(),
                "sigma": self.pending.sigma,
                "radius": self.pending.radius,
                "advantage": self.pending.advantage,
            },
        }

    def checkpoint_json(self) -> str:
        return json.dumps(self.checkpoint())

    @classmethod
    def from_checkpoint(cls, obj: dict | str) -> "SessionState":
        if isinstance(obj, str):
            obj = json.loads(obj)
        state = cls(config=PopBoConfig.from_json(obj["config"]))
        state.B = float(obj["B"])
        state.doublings = int(obj.get("doublings", 0))
        for rec in obj["records"]:
            state.history.append(
                DuelRecord(x=rec["x"], x_prime=rec["x_prime"], pref=int(rec["pref"]))
            )
        state.t = int(obj["t"])
        state.queries = [np.asarray(q, dtype=float) for q in obj["queries"]]
        state.sigma_trace = list(obj["sigma_trace"])
        state.radius_trace = list(obj["radius_trace"])
        state.advantage_trace = list(obj["advantage_trace"])
        state.mle_trace = list(obj["mle_trace"])
        Z = np.asarray(obj["mle"]["Z"], dtype=float)
        if state.t == 0:
            state.mle = solve_mle(state.history, state.config.kernel, state.B, state.config.jitter)
        else:
            ws = StepWorkspace(state.history, state.config.kernel, state.B, state.config.jitter)
            w = ws.whiten(Z)
            state.mle = SolveReport(
                argmax=Z, objective=float(obj["mle"]["objective"]), iterations=0,
                constraint_slack=state.B**2 - float(w @ w), converged=True, w=w,
            )
        if obj.get("pending") is not None:
            p = obj["pending"]
            state.pending = PendingQuery(
                x=np.asarray(p["x"], dtype=float),
                x_ref=np.asarray(p["x_ref"], dtype=float),
                sigma=float(p["sigma"]),
                radius=float(p["radius"]),
                advantage=float(p["advantage"]),
            )
        return state


def report_index(radii: list[float]) -> int:
    """1-based index of the smallest radius, first among ties."""
    if not radii:
        raise ValueError("no radii recorded yet")
    arr = np.asarray(radii)
    return int(np.argmin(arr)) + 1
