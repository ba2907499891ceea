"""Ground-truth problem generators and simulated comparison oracles.

Three instance families:

* functions drawn from a Gaussian process prior, materialized as the
  minimum-norm interpolant through sampled knot values (so their RKHS
  norm is known exactly and the norm bound can be set honestly);
* classic global-optimization test functions, negated for maximization
  and divided by the standard deviation of their values on a grid so
  suboptimality numbers are comparable across problems;
* a smooth synthetic two-bump comfort landscape over a temperature by
  air-speed box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kernels import KernelSpec, chol, cross_kernel
from .preference import btl_prob, sample_preference

TEST_FUNCTION_NAMES = (
    "beale",
    "branin",
    "bukin",
    "cross_in_tray",
    "eggholder",
    "holder_table",
    "levy13",
)

INSTANCE_JITTER = 1e-8
NORMALIZATION_GRID = 100
FINE_GRID_1D = 10_001
FINE_GRID_2D = 401


@dataclass
class GroundTruth:
    """Opaque objective with its domain and grid-certified maximum."""

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    domain: np.ndarray
    known_max: float
    argmax: np.ndarray
    manifest: dict

    def value(self, x) -> float:
        return float(self.evaluate(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def suboptimality(self, x) -> float:
        return self.known_max - self.value(x)


def _fine_grid(domain: np.ndarray) -> np.ndarray:
    d = domain.shape[0]
    if d == 1:
        return np.linspace(domain[0, 0], domain[0, 1], FINE_GRID_1D)[:, None]
    if d == 2:
        gx = np.linspace(domain[0, 0], domain[0, 1], FINE_GRID_2D)
        gy = np.linspace(domain[1, 0], domain[1, 1], FINE_GRID_2D)
        mx, my = np.meshgrid(gx, gy, indexing="ij")
        return np.stack([mx.ravel(), my.ravel()], axis=1)
    raise ValueError("grid-certified maxima are only available for one or two dimensions")


def _certify(name, evaluate, domain, manifest) -> GroundTruth:
    grid = _fine_grid(domain)
    vals = evaluate(grid)
    i = int(np.argmax(vals))
    return GroundTruth(
        name=name,
        evaluate=evaluate,
        domain=domain,
        known_max=float(vals[i]),
        argmax=grid[i].copy(),
        manifest=manifest,
    )


def _interp_weights(K_plain: np.ndarray, jitter: float, values: np.ndarray) -> np.ndarray:
    """Regularized interpolation weights with iterative refinement.

    The jittered solve alone leaves a residual of exactly jitter*alpha at
    the knots; two refinement passes push knot reproduction to working
    precision while keeping every solve on the stabilized matrix.
    """
    K = K_plain.copy()
    K[np.diag_indices_from(K)] += jitter
    factor = cho_factor(K, lower=True)
    alpha = cho_solve(factor, values)
    for _ in range(2):
        alpha = alpha + cho_solve(factor, values - K_plain @ alpha)
    return alpha


def sample_gp_instance(
    rng: np.random.Generator,
    kernel: KernelSpec,
    n_knots: int,
    domain,
    jitter: float = INSTANCE_JITTER,
) -> GroundTruth:
    """Minimum-norm interpolant through knot values drawn from the prior."""
    if n_knots < 1:
        raise ValueError("n_knots must be at least 1")
    dom = np.asarray(domain, dtype=float).reshape(-1, 2)
    knots = dom[:, 0] + rng.random((n_knots, dom.shape[0])) * (dom[:, 1] - dom[:, 0])
    K_plain = cross_kernel(kernel, knots, knots)
    K = K_plain.copy()
    K[np.diag_indices_from(K)] += jitter
    L = chol(K)
    drawn = L @ rng.standard_normal(n_knots)
    alpha = _interp_weights(K_plain, jitter, drawn)
    # the ground truth IS the interpolant; store its own knot values so
    # the manifest stays exactly reproducible (raw draws can carry
    # components outside the range of a nearly singular Gram)
    values = K_plain @ alpha
    norm = math.sqrt(max(float(values @ alpha), 0.0))

    def evaluate(X):
        return cross_kernel(kernel, np.atleast_2d(np.asarray(X, dtype=float)), knots) @ alpha

    manifest = {
        "type": "gp",
        "kernel": kernel.to_json(),
        "domain": dom.tolist(),
        "jitter": jitter,
        "knots": knots.tolist(),
        "values": values.tolist(),
        "weights": alpha.tolist(),
        "rkhs_norm": norm,
        "norm_bound": 1.1 * norm,
    }
    return _certify("gp", evaluate, dom, manifest)


def gp_instance_from_manifest(manifest: dict) -> GroundTruth:
    """Rebuild a sampled instance exactly from its manifest."""
    kernel = KernelSpec.from_json(manifest["kernel"])
    dom = np.asarray(manifest["domain"], dtype=float)
    knots = np.asarray(manifest["knots"], dtype=float)
    values = np.asarray(manifest["values"], dtype=float)
    if "weights" in manifest:
        # exact reconstruction; re-solving from values alone is unstable
        # when the knot Gram is nearly singular
        alpha = np.asarray(manifest["weights"], dtype=float)
    else:
        alpha = _interp_weights(cross_kernel(kernel, knots, knots), manifest["jitter"], values)

    def evaluate(X):
        return cross_kernel(kernel, np.atleast_2d(np.asarray(X, dtype=float)), knots) @ alpha

    return _certify("gp", evaluate, dom, manifest)


# -- classic test functions (minimization closed forms) ---------------------


def _beale(X):
    x, y = X[:, 0], X[:, 1]
    return (
        (1.5 - x + x * y) ** 2
        + (2.25 - x + x * y**2) ** 2
        + (2.625 - x + x * y**3) ** 2
    )


def _branin(X):
    x, y = X[:, 0], X[:, 1]
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    s = 10.0
    t = 1.0 / (8.0 * math.pi)
    return (y - b * x**2 + c * x - 6.0) ** 2 + s * (1.0 - t) * np.cos(x) + s


def _bukin(X):
    x, y = X[:, 0], X[:, 1]
    return 100.0 * np.sqrt(np.abs(y - 0.01 * x**2)) + 0.01 * np.abs(x + 10.0)


def _cross_in_tray(X):
    x, y = X[:, 0], X[:, 1]
    inner = np.abs(100.0 - np.sqrt(x**2 + y**2) / math.pi)
    return -0.0001 * (np.abs(np.sin(x) * np.sin(y) * np.exp(inner)) + 1.0) ** 0.1


def _eggholder(X):
    x, y = X[:, 0], X[:, 1]
    return -(y + 47.0) * np.sin(np.sqrt(np.abs(x / 2.0 + y + 47.0))) - x * np.sin(
        np.sqrt(np.abs(x - (y + 47.0)))
    )


def _holder_table(X):
    x, y = X[:, 0], X[:, 1]
    inner = np.abs(1.0 - np.sqrt(x**2 + y**2) / math.pi)
    return -np.abs(np.sin(x) * np.cos(y) * np.exp(inner))


def _levy13(X):
    x, y = X[:, 0], X[:, 1]
    return (
        np.sin(3.0 * math.pi * x) ** 2
        + (x - 1.0) ** 2 * (1.0 + np.sin(3.0 * math.pi * y) ** 2)
        + (y - 1.0) ** 2 * (1.0 + np.sin(2.0 * math.pi * y) ** 2)
    )


_TEST_FUNCTIONS = {
    "beale": (_beale, [[-4.5, 4.5], [-4.5, 4.5]]),
    "branin": (_branin, [[-5.0, 10.0], [0.0, 15.0]]),
    "bukin": (_bukin, [[-15.0, -5.0], [-3.0, 3.0]]),
    "cross_in_tray": (_cross_in_tray, [[-10.0, 10.0], [-10.0, 10.0]]),
    "eggholder": (_eggholder, [[-512.0, 512.0], [-512.0, 512.0]]),
    "holder_table": (_holder_table, [[-10.0, 10.0], [-10.0, 10.0]]),
    "levy13": (_levy13, [[-10.0, 10.0], [-10.0, 10.0]]),
}


def raw_test_function(name: str):
    """Unnormalized minimization form and its standard domain."""
    if name not in _TEST_FUNCTIONS:
        raise ValueError(f"unknown test function {name!r}; expected one of {TEST_FUNCTION_NAMES}")
    fn, dom = _TEST_FUNCTIONS[name]
    return fn, np.asarray(dom, dtype=float)


def test_function(name: str) -> GroundTruth:
    """Negated test function scaled to unit grid standard deviation."""
    fn, dom = raw_test_function(name)
    gx = np.linspace(dom[0, 0], dom[0, 1], NORMALIZATION_GRID)
    gy = np.linspace(dom[1, 0], dom[1, 1], NORMALIZATION_GRID)
    mx, my = np.meshgrid(gx, gy, indexing="ij")
    grid = np.stack([mx.ravel(), my.ravel()], axis=1)
    std = float(np.std(fn(grid)))

    def evaluate(X):
        return -fn(np.atleast_2d(np.asarray(X, dtype=float))) / std

    manifest = {"type": "test_function", "name": name, "grid_std": std, "domain": dom.tolist()}
    return _certify(name, evaluate, dom, manifest)


def comfort_synth() -> GroundTruth:
    """Smooth two-bump landscape over temperature [C] and air speed [m/s]."""
    dom = np.array([[18.0, 30.0], [0.0, 1.2]])

    def evaluate(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        temp, speed = X[:, 0], X[:, 1]
        main = 2.2 * np.exp(-(((temp - 24.0) / 2.5) ** 2) - ((speed - 0.30) / 0.25) ** 2)
        breeze = 1.2 * np.exp(-(((temp - 27.0) / 1.8) ** 2) - ((speed - 0.85) / 0.35) ** 2)
        return main + breeze

    manifest = {"type": "comfort_synth", "domain": dom.tolist()}
    return _certify("comfort_synth", evaluate, dom, manifest)


def oracle_from_truth(truth: GroundTruth, rng: np.random.Generator):
    """Bernoulli comparison oracle backed by a ground-truth function."""

    dom = truth.domain

    def oracle(x, x_prime) -> int:
        x = np.asarray(x, dtype=float).reshape(-1)
        xp = np.asarray(x_prime, dtype=float).reshape(-1)
        for pt in (x, xp):
            if np.any(pt < dom[:, 0] - 1e-12) or np.any(pt > dom[:, 1] + 1e-12):
                raise ValueError(f"point {pt} lies outside the domain box")
        return sample_preference(rng, btl_prob(truth.value(x), truth.value(xp)))

    return oracle
