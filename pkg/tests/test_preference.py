import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popbo.preference import LinkConstants, btl_prob, link_constants, sample_preference


def test_tie_is_even():
    assert btl_prob(1.3, 1.3) == pytest.approx(0.5)


def test_unit_gap():
    assert btl_prob(1.0, 0.0) == pytest.approx(1.0 / (1.0 + math.exp(-1.0)), abs=1e-12)


def test_gap_of_two_b_hits_upper_bracket():
    B = 1.0
    assert btl_prob(2 * B, 0.0) == pytest.approx(link_constants(B).sigma_hi, abs=1e-12)


def test_complementarity():
    assert btl_prob(0.4, -1.1) + btl_prob(-1.1, 0.4) == pytest.approx(1.0)


def test_saturation_is_finite():
    assert btl_prob(1e4, -1e4) == pytest.approx(1.0)
    assert btl_prob(-1e4, 1e4) == pytest.approx(0.0)


@settings(max_examples=50, deadline=None)
@given(
    y=st.floats(-30, 30),
    gap=st.floats(min_value=1e-6, max_value=20),
)
def test_btl_strictly_increasing_in_gap(y, gap):
    assert btl_prob(y + gap, y) > btl_prob(y, y)
    assert btl_prob(y, y - gap) > 0.5


def test_sample_preference_degenerate():
    rng = np.random.default_rng(0)
    assert sample_preference(rng, 1.0) == 1
    assert sample_preference(rng, 0.0) == 0


def test_sample_preference_mean():
    rng = np.random.default_rng(42)
    draws = [sample_preference(rng, 0.5) for _ in range(10_000)]
    assert abs(np.mean(draws) - 0.5) < 0.02


def test_sample_preference_rejects_bad_probability():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_preference(rng, 1.2)
    with pytest.raises(ValueError):
        sample_preference(rng, -0.1)


def test_sample_preference_deterministic_given_seed():
    a = [sample_preference(np.random.default_rng(7), p) for p in (0.2, 0.8, 0.5)]
    b = [sample_preference(np.random.default_rng(7), p) for p in (0.2, 0.8, 0.5)]
    assert a == b


def test_link_constants_fixed_values():
    lc = link_constants(1.0)
    assert lc.dsigma_hi == 0.25
    assert lc.sigma_lo == pytest.approx(1.0 / (1.0 + math.exp(2.0)), abs=1e-12)
    assert lc.sigma_hi == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-12)
    assert lc.C_L == pytest.approx(1.0 + 2.0 / (1.0 + math.exp(-2.0)), abs=1e-12)
    assert lc.H_sigma == pytest.approx(1.0 / (2.0 * lc.sigma_hi**2), abs=1e-12)
    assert lc.B_p == pytest.approx(lc.sigma_hi / lc.sigma_lo - lc.sigma_lo / lc.sigma_hi, abs=1e-10)


def test_link_constants_small_b_limit():
    lc = link_constants(1e-12)
    assert lc.sigma_lo == pytest.approx(0.5, abs=1e-9)
    assert lc.sigma_hi == pytest.approx(0.5, abs=1e-9)
    assert lc.B_p == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(B=st.floats(min_value=1e-3, max_value=15.0))
def test_link_constants_invariants(B):
    # beyond B ~ 18 the upper bracket saturates to 1.0 in double precision
    lc = link_constants(B)
    assert lc.sigma_lo + lc.sigma_hi == pytest.approx(1.0)
    assert 0.0 < lc.sigma_lo <= 0.5 <= lc.sigma_hi < 1.0
    assert lc.dsigma_hi == 0.25
    assert 0.0 < lc.dsigma_lo <= 0.25


def test_link_constants_reject_nonpositive():
    with pytest.raises(ValueError):
        link_constants(0.0)


def test_probabilities_inside_brackets():
    B = 1.7
    lc = link_constants(B)
    rng = np.random.default_rng(12)
    for _ in range(200):
        y, yp = rng.uniform(-B, B, size=2)
        p = btl_prob(y, yp)
        assert lc.sigma_lo <= p <= lc.sigma_hi


def test_slope_inside_derivative_brackets():
    B = 1.3
    lc = link_constants(B)
    rng = np.random.default_rng(21)
    h = 1e-6
    for _ in range(100):
        u = rng.uniform(-2 * B + h, 2 * B - h)
        slope = (btl_prob(u + h, 0.0) - btl_prob(u - h, 0.0)) / (2 * h)
        assert lc.dsigma_lo - 1e-9 <= slope <= lc.dsigma_hi + 1e-9


def test_link_constants_is_frozen():
    lc = link_constants(1.0)
    assert isinstance(lc, LinkConstants)
    with pytest.raises(AttributeError):
        lc.sigma_lo = 0.3
