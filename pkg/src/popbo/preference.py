"""Bradley-Terry-Luce comparison model and logistic link constants.

The comparison oracle prefers x over x' with probability
sigma(f(x) - f(x')) where sigma is the logistic function.  When the
value difference is confined to [-2B, 2B], the link function and its
derivative are pinned inside known brackets; :func:`link_constants`
evaluates those brackets and the derived constants for a given norm
bound B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def logistic(u: float) -> float:
    """Numerically stable 1 / (1 + exp(-u))."""
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def btl_prob(y: float, y_prime: float) -> float:
    """Probability that the option with value y beats the one with y_prime."""
    return logistic(float(y) - float(y_prime))


def sample_preference(rng: np.random.Generator, p: float) -> int:
    """Draw one Bernoulli(p) preference bit from the caller's generator."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"preference probability must lie in [0, 1], got {p}")
    return int(rng.random() < p)


@dataclass(frozen=True)
class LinkConstants:
    """Logistic-link brackets on value differences in [-2B, 2B].

    sigma_lo/sigma_hi bracket the link value, dsigma_lo/dsigma_hi its
    derivative; B_p, H_sigma and C_L are the derived constants used by
    the confidence-set machinery.
    """

    sigma_lo: float
    sigma_hi: float
    dsigma_lo: float
    dsigma_hi: float
    B_p: float
    H_sigma: float
    C_L: float


def link_constants(B: float) -> LinkConstants:
    """Evaluate the link brackets and derived constants for norm bound B."""
    if B <= 0:
        raise ValueError("B must be strictly positive")
    sigma_lo = logistic(-2.0 * B)
    sigma_hi = logistic(2.0 * B)
    # sigma'(u) = 1 / (2 + e^u + e^-u); extremes at u = +-2B and u = 0
    dsigma_lo = 1.0 / (2.0 + math.exp(2.0 * B) + math.exp(-2.0 * B))
    dsigma_hi = 0.25
    return LinkConstants(
        sigma_lo=sigma_lo,
        sigma_hi=sigma_hi,
        dsigma_lo=dsigma_lo,
        dsigma_hi=dsigma_hi,
        B_p=sigma_hi / sigma_lo - sigma_lo / sigma_hi,
        H_sigma=1.0 / (2.0 * sigma_hi**2),
        C_L=1.0 + 2.0 / (1.0 + math.exp(-2.0 * B)),
    )
