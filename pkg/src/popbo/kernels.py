"""Kernel evaluation, jittered Gram matrices, and pair-level uncertainty.

Three kernel families are supported on R^d:

    linear   k(x, y) = <x, y>
    se       k(x, y) = variance * exp(-||x - y||^2 / lengthscale^2)
    matern   half-integer nu in {1/2, 3/2, 5/2}, scale rho

A *duel* is an ordered pair of points (x, x_prime).  The additive pair
kernel

    kd((x, x'), (y, y')) = k(x, y) + k(x', y')

carries difference functions f(x) - f(x'), and the regularized
uncertainty of a new pair given past pairs is

    sigma(w)^2 = kd(w, w) - kd(W, w)^T (Kd + lam*I)^{-1} kd(W, w),

with Kd the pair Gram over the past duels W and lam > 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

DEFAULT_JITTER = 1e-6
DEFAULT_LAMBDA = 1.0

_FAMILIES = ("linear", "se", "matern")
_MATERN_NUS = (0.5, 1.5, 2.5)


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond what jitter can absorb."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters for a d-dimensional input space.

    ``variance`` and ``lengthscale`` apply to the squared-exponential
    family; ``nu`` and ``rho`` to the Matern family.  A variance above 1
    breaks the k(x,x) <= 1 normalization some guarantees assume, so it is
    allowed but warned about.
    """

    family: str
    dim: int
    variance: float = 1.0
    lengthscale: float = 1.0
    nu: float = 2.5
    rho: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        for name in ("variance", "lengthscale", "nu", "rho"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.family == "matern" and self.nu not in _MATERN_NUS:
            raise ValueError(f"matern nu must be one of {_MATERN_NUS} (half-integer closed forms)")
        if self.family == "se" and self.variance > 1.0:
            warnings.warn(
                f"se variance {self.variance} > 1 leaves the normalized regime k(x,x) <= 1",
                stacklevel=2,
            )

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "variance": self.variance,
            "lengthscale": self.lengthscale,
            "nu": self.nu,
            "rho": self.rho,
            "dim": self.dim,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KernelSpec":
        return cls(
            family=obj["family"],
            dim=int(obj["dim"]),
            variance=float(obj.get("variance", 1.0)),
            lengthscale=float(obj.get("lengthscale", 1.0)),
            nu=float(obj.get("nu", 2.5)),
            rho=float(obj.get("rho", 1.0)),
        )


@dataclass(frozen=True)
class Duel:
    """An ordered pair of points submitted to the comparison oracle."""

    x: np.ndarray
    x_prime: np.ndarray


def _as_points(pts, dim: int) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(pts, dtype=float))
    if arr.shape[1] != dim:
        raise ValueError(f"points have dimension {arr.shape[1]}, kernel expects {dim}")
    return arr


def cross_kernel(spec: KernelSpec, xs, ys) -> np.ndarray:
    """Kernel matrix k(xs_i, ys_j) for two point sets, shape (n, m)."""
    X = _as_points(xs, spec.dim)
    Y = _as_points(ys, spec.dim)
    if spec.family == "linear":
        return X @ Y.T
    sq = np.sum(X * X, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :] - 2.0 * (X @ Y.T)
    np.maximum(sq, 0.0, out=sq)
    if spec.family == "se":
        return spec.variance * np.exp(-sq / spec.lengthscale**2)
    # Matern, half-integer closed forms
    r = np.sqrt(sq) * (math.sqrt(2.0 * spec.nu) / spec.rho)
    if spec.nu == 0.5:
        return np.exp(-r)
    if spec.nu == 1.5:
        return (1.0 + r) * np.exp(-r)
    return (1.0 + r + r * r / 3.0) * np.exp(-r)


def self_kernel(spec: KernelSpec, xs) -> np.ndarray:
    """Vector of diagonal values k(x_i, x_i)."""
    X = _as_points(xs, spec.dim)
    if spec.family == "linear":
        return np.sum(X * X, axis=1)
    if spec.family == "se":
        return np.full(X.shape[0], spec.variance)
    return np.ones(X.shape[0])


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Scalar kernel value k(x, y)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != spec.dim or y.shape[0] != spec.dim:
        raise ValueError(f"expected points of dimension {spec.dim}, got {x.shape[0]} and {y.shape[0]}")
    return float(cross_kernel(spec, x[None, :], y[None, :])[0, 0])


def gram(spec: KernelSpec, points, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """Gram matrix K + jitter*I over a point sequence.

    The result must admit a Cholesky factorization; if it does not even
    after the jitter, a NumericalError reports the smallest eigenvalue.
    """
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    pts = _as_points(points, spec.dim)
    if pts.shape[0] == 0:
        raise ValueError("point sequence must be nonempty")
    K = cross_kernel(spec, pts, pts)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += jitter
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(K)[0])
        raise NumericalError(
            f"Gram matrix not positive definite after jitter {jitter:g} "
            f"(smallest eigenvalue approx {smallest:.3e})"
        ) from None
    return K


def chol(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, wrapping failures in NumericalError."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(matrix)[0])
        raise NumericalError(
            f"Cholesky failed (smallest eigenvalue approx {smallest:.3e})"
        ) from None


def duel_kernel(spec: KernelSpec, w: Duel, w_bar: Duel) -> float:
    """Additive pair kernel k(x, xbar) + k(x', xbar')."""
    return eval_kernel(spec, w.x, w_bar.x) + eval_kernel(spec, w.x_prime, w_bar.x_prime)


def duel_gram(spec: KernelSpec, duels: list[Duel]) -> np.ndarray:
    """Pair-kernel Gram matrix over a duel sequence (no jitter)."""
    xs = [d.x for d in duels]
    xps = [d.x_prime for d in duels]
    return cross_kernel(spec, xs, xs) + cross_kernel(spec, xps, xps)


def duel_sigma(spec: KernelSpec, past: list[Duel], lam: float, w: Duel) -> float:
    """Regularized uncertainty of a new duel given past duels.

    Returns sigma >= 0 with

        sigma^2 = kd(w,w) - v^T (Kd + lam*I)^{-1} v,   v_i = kd(past_i, w).

    Tiny negative values from round-off are clamped to zero.
    """
    if lam <= 0:
        raise ValueError("lam must be strictly positive")
    self_val = duel_kernel(spec, w, w)
    if not past:
        return math.sqrt(self_val)
    Kd = duel_gram(spec, past)
    Kd[np.diag_indices_from(Kd)] += lam
    v = cross_kernel(spec, [d.x for d in past], [w.x]).ravel() + cross_kernel(
        spec, [d.x_prime for d in past], [w.x_prime]
    ).ravel()
    try:
        factor = cho_factor(Kd, lower=True)
        reduction = float(v @ cho_solve(factor, v))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"duel uncertainty solve failed: {exc}") from None
    return math.sqrt(max(self_val - reduction, 0.0))


def posterior_cross_solve(L: np.ndarray, cross: np.ndarray) -> np.ndarray:
    """Triangular solve L^{-1} C for a batch of cross-kernel columns."""
    return solve_triangular(L, cross, lower=True, check_finite=False)
