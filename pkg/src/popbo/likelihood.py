"""Sequential-duel log-likelihood and its gradient.

With chained references (each duel compares a new point against the
previous one), the log-likelihood of preference bits depends only on the
vector Z = (z_0, ..., z_t) of candidate values at the queried points:

    L(Z) = sum_tau [ 1_tau * d_tau - log(1 + exp(d_tau)) ],
    d_tau = z_tau - z_{tau-1}.

L is concave, invariant under adding a constant to every z, and always
<= 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .kernels import KernelSpec


@dataclass(frozen=True)
class DuelRecord:
    """One resolved comparison: query x, reference x_prime, preference bit."""

    x: np.ndarray
    x_prime: np.ndarray
    pref: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))
        object.__setattr__(self, "x_prime", np.asarray(self.x_prime, dtype=float).reshape(-1))
        if self.pref not in (0, 1):
            raise ValueError("pref must be 0 or 1")


@dataclass
class History:
    """Ordered duel records chained so each reference is the previous query."""

    x0: np.ndarray
    records: list[DuelRecord] = field(default_factory=list)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        prev = self.x0
        for tau, rec in enumerate(self.records, start=1):
            if not np.array_equal(rec.x_prime, prev):
                raise ValueError(f"broken reference chain at duel {tau}: x_prime != previous query")
            prev = rec.x

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: DuelRecord) -> None:
        prev = self.records[-1].x if self.records else self.x0
        if not np.array_equal(record.x_prime, prev):
            raise ValueError("reference must equal the previous query point")
        self.records.append(record)

    @property
    def points(self) -> np.ndarray:
        """Stacked query points (x_0, x_1, ..., x_t), shape (t+1, d)."""
        return np.vstack([self.x0[None, :]] + [r.x[None, :] for r in self.records])

    @property
    def outcomes(self) -> np.ndarray:
        return np.array([r.pref for r in self.records], dtype=float)

    def to_jsonl(self, kernel: KernelSpec | None = None) -> str:
        header = {"x0": self.x0.tolist()}
        if kernel is not None:
            header["kernel"] = kernel.to_json()
        lines = [json.dumps(header)]
        for r in self.records:
            lines.append(
                json.dumps({"x": r.x.tolist(), "x_prime": r.x_prime.tolist(), "pref": r.pref})
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> tuple["History", KernelSpec | None]:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty history document")
        header = json.loads(lines[0])
        kernel = KernelSpec.from_json(header["kernel"]) if "kernel" in header else None
        records = [
            DuelRecord(x=obj["x"], x_prime=obj["x_prime"], pref=int(obj["pref"]))
            for obj in map(json.loads, lines[1:])
        ]
        return cls(x0=np.asarray(header["x0"], dtype=float), records=records), kernel


def _softplus(d: np.ndarray) -> np.ndarray:
    # log(1 + e^d) = max(d, 0) + log1p(e^{-|d|})
    return np.maximum(d, 0.0) + np.log1p(np.exp(-np.abs(d)))


def _check_lengths(Z: np.ndarray, outcomes: np.ndarray) -> None:
    if Z.shape[0] != outcomes.shape[0] + 1:
        raise ValueError(
            f"value vector of length {Z.shape[0]} does not match {outcomes.shape[0]} outcomes"
        )


def log_likelihood(Z, outcomes) -> float:
    """Log-likelihood of the outcome bits under candidate values Z."""
    Z = np.asarray(Z, dtype=float).reshape(-1)
    outcomes = np.asarray(outcomes, dtype=float).reshape(-1)
    _check_lengths(Z, outcomes)
    if outcomes.size == 0:
        return 0.0
    d = np.diff(Z)
    return float(np.sum(outcomes * d - _softplus(d)))


def grad_log_likelihood(Z, outcomes) -> np.ndarray:
    """Gradient of :func:`log_likelihood` with respect to Z."""
    Z = np.asarray(Z, dtype=float).reshape(-1)
    outcomes = np.asarray(outcomes, dtype=float).reshape(-1)
    _check_lengths(Z, outcomes)
    g = np.zeros_like(Z)
    if outcomes.size == 0:
        return g
    r = outcomes - expit(np.diff(Z))
    g[1:] += r
    g[:-1] -= r
    return g


def shift(Z, c: float) -> np.ndarray:
    """Add a constant to every component; the likelihood is unchanged."""
    return np.asarray(Z, dtype=float).reshape(-1) + float(c)
