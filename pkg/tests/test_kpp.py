import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epiwave import kpp, tw
from epiwave.errors import AlignmentImpossible, LevelNotCrossed, OutOfRegime, SpeedTooSmall, WindowExceeded
from epiwave.model import validate_params

C_EXACT = 5 / math.sqrt(6)


def exact_profile(x, u0):
    """Closed-form wave at c = 5/sqrt(6), written out independently of the library."""
    return 1.0 / (1.0 + (1.0 / math.sqrt(u0) - 1.0) * np.exp(x / math.sqrt(6))) ** 2


# single waves -----------------------------------------------------------------

@pytest.mark.parametrize("u0", [0.25, 0.5, 0.9])
def test_exact_oracle(u0):
    wave = kpp.kpp_wave(C_EXACT, u0=u0)
    assert np.max(np.abs(wave.u - exact_profile(wave.x, u0))) <= 1e-6
    assert np.max(np.abs(kpp.kpp_exact(wave.x, u0) - exact_profile(wave.x, u0))) <= 1e-15


@pytest.mark.parametrize("c, a, b", [(2.1, 1.0, 1.0), (2.9, 1.0, 1.0), (3.0, 1.5, 2.0), (2.5, 0.8, 1.0)])
def test_shape_and_residual(c, a, b):
    wave = kpp.kpp_wave(c, a, b)
    assert np.all(np.diff(wave.u) < 0)
    assert np.all(wave.u > 0) and np.all(wave.u < a / b)
    assert np.max(np.abs(kpp.ode_residual(wave))) <= 1e-6
    assert wave.at(0.0) == pytest.approx(0.5, abs=1e-10)


def test_left_limit():
    wave = kpp.kpp_wave(2.9, x_window=(-40.0, 20.0))
    assert wave.u[0] >= 1 - 1e-3


def test_translation_invariance():
    w1 = kpp.kpp_wave(2.5, u0=0.5)
    w2 = kpp.kpp_wave(2.5, u0=0.2)
    shift = kpp.level_crossing(w2.x, w2.u, 0.5)
    xs = w1.x[(w1.x >= -40) & (w1.x <= 15)]
    assert np.max(np.abs(w2.at(xs + shift) - w1.at(xs))) <= 1e-8


@given(st.floats(2.05, 4.0), st.floats(0.05, 0.95))
@settings(max_examples=8, deadline=None)
def test_random_waves_are_monotone_and_pinned(c, u0):
    wave = kpp.kpp_wave(c, u0=u0, x_window=(-40.0, 15.0), dx=0.02)
    assert np.all(np.diff(wave.u) < 0)
    assert wave.at(0.0) == pytest.approx(u0, abs=1e-9)


def test_kpp_errors():
    with pytest.raises(SpeedTooSmall):
        kpp.kpp_wave(1.9)
    with pytest.raises(SpeedTooSmall):
        kpp.kpp_wave(2.5, a=2.0)
    with pytest.raises(ValueError):
        kpp.kpp_wave(2.5, u0=1.0)
    with pytest.raises(ValueError):
        kpp.kpp_wave(2.5, x_window=(1.0, 20.0))
    with pytest.raises(WindowExceeded):
        kpp.kpp_wave(2.5, u0=1 - 1e-9, x_window=(-5.0, 5.0))


# modified waves ---------------------------------------------------------------

def test_modified_wave_limits_and_residuals():
    K, c = 0.05, 2.9
    p = validate_params(2, K, 0.001)
    over, under = kpp.modified_waves(p, c)
    root = math.sqrt(1 + 4 * K)
    assert abs(over.u[0] - (1 + root) / 2) <= 1e-3
    assert abs(over.u[-1] + (root - 1) / 2) <= 1e-3
    assert np.max(np.abs(kpp.over_residual(over, K))) <= 1e-6
    assert np.max(np.abs(kpp.ode_residual(under))) <= 1e-6
    assert abs(under.u[0] - (1 - 2 * K)) <= 1e-3


def test_modified_waves_small_K_limit():
    K, c = 1e-4, 2.5
    p = validate_params(2, K, K / 2)
    over, under = kpp.modified_waves(p, c)
    ref = kpp.kpp_wave(c)
    assert np.max(np.abs(over.u - ref.u)) <= 10 * K
    assert np.max(np.abs(under.u - ref.u)) <= 10 * K


def test_modified_waves_speed_hypothesis():
    p = validate_params(2, 0.25, 0.001)
    with pytest.raises(OutOfRegime):
        kpp.modified_waves(p, 2.2)


# beta -------------------------------------------------------------------------

def test_beta_example():
    c = 2 * math.sqrt(2)
    alpha = (c - math.sqrt(c * c - 4)) / 2
    lam = (c - math.sqrt(c * c - 1)) / 2
    assert alpha == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    assert lam == pytest.approx(0.09134, abs=1e-5)
    assert kpp.beta_exponent(1e-12, c) == pytest.approx(0.1807, abs=1e-4)


def test_beta_range_on_grid():
    for c in np.linspace(2.2, 4.0, 10):
        for K in np.linspace(1e-4, 0.1249, 12):
            assert 0 < kpp.beta_exponent(K, c) < 0.5


def test_beta_decreases_in_K():
    # lambda_- shrinks as K grows, so alpha/lambda_- grows and beta falls
    for c in (2.2, 2.83, 4.0):
        betas = [kpp.beta_exponent(K, c) for K in np.linspace(1e-4, 0.124, 40)]
        assert np.all(np.diff(betas) < 0)


def test_beta_regime():
    with pytest.raises(OutOfRegime):
        kpp.beta_exponent(0.125, 3.0)
    with pytest.raises(OutOfRegime):
        kpp.beta_exponent(0.05, 2.0)
    p = validate_params(2, 0.05, 0.001)
    assert kpp.beta_exponent(p, 3.0) == kpp.beta_exponent(0.05, 3.0)


# comparison -------------------------------------------------------------------

def test_comparison_with_itself_is_zero():
    p = validate_params(2, 0.05, 0.001)
    u = kpp.kpp_wave(2 * math.sqrt(2), u0=0.3)
    rep = kpp.compare_to_kpp(u.x, u.u, p)
    assert rep.sup_err_total <= 1e-8
    assert rep.sup_err_total == max(rep.sup_err_left, rep.sup_err_right)


def test_level_not_crossed():
    p = validate_params(2, 0.05, 0.001)
    x = np.linspace(-10, 10, 201)
    with pytest.raises(LevelNotCrossed):
        kpp.compare_to_kpp(x, np.full_like(x, 0.01), p)


def test_comparison_reports(cmp_reports):
    for K, rep in cmp_reports.items():
        assert rep.sup_err_total == max(rep.sup_err_left, rep.sup_err_right)
        assert rep.sup_err_right <= 2 * rep.level
        assert rep.c0 == pytest.approx(2 * math.sqrt(2))
        assert rep.beta_clamped == (K >= 0.125)
    errs = [cmp_reports[K].sup_err_total for K in sorted(cmp_reports)]
    assert errs[0] < errs[1] < errs[2]


@pytest.fixture(scope="module")
def trend_reports():
    out = {}
    for K in (0.01, 0.05, 0.1, 0.25):
        p = validate_params(2, K, min(K / 2, 0.001))
        s = tw.continue_in_domain(p, [40.0, 80.0])[-1]
        out[K] = kpp.compare_to_kpp(s.x, s.w, p, s.c)
    return out


def test_error_bounded_by_constant_times_K_beta(trend_reports):
    ratios = [rep.sup_err_total / rep.level for rep in trend_reports.values()]
    assert max(ratios) <= 1.0


# sandwich ---------------------------------------------------------------------

@pytest.mark.parametrize("K", [0.05, 0.25])
def test_sandwich_on_computed_waves(cmp_waves, cmp_reports, K):
    p, s = cmp_waves[K]
    for level in (None, cmp_reports[K].level):
        rep = kpp.sandwich_check(s.x, s.w, p, s.c, level=level)
        assert rep.holds, (level, rep.worst_violation, rep.x_worst)


def test_sandwich_equality_at_lower_envelope():
    p = validate_params(2, 0.05, 0.001)
    c = 2.9
    _, under = kpp.modified_waves(p, c, levels=(0.5, 0.5))
    rep = kpp.sandwich_check(under.x, under.u, p, c)
    assert rep.holds and not rep.lower_clamped
    assert abs(rep.worst_violation) <= 1e-6


def test_sandwich_width_shrinks_with_K():
    widths = [kpp.sandwich_width(validate_params(2, K, 0.001), 2.9) for K in (0.1, 0.05, 0.01)]
    assert widths[0] > widths[1] > widths[2] > 0


def test_sandwich_alignment_errors():
    p = validate_params(2, 0.05, 0.001)
    x = np.linspace(-10, 10, 201)
    with pytest.raises(AlignmentImpossible):
        kpp.sandwich_check(x, np.full_like(x, 0.2), p, 2.9, level=0.5)
    with pytest.raises(AlignmentImpossible):
        kpp.sandwich_check(np.linspace(1, 10, 50), np.linspace(0.9, 0.1, 50), p, 2.9)
