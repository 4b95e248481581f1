import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersive_control.spectral_core import (
    AliasingError, DispersionSymbol, FourierState, TWO_PI, evolve_free, from_grid,
    grid_points, inner, l2_norm, to_grid,
)

KDV = DispersionSymbol.kdv()


def random_state(rng, nmax):
    return FourierState(rng.normal(size=2 * nmax + 1) + 1j * rng.normal(size=2 * nmax + 1), nmax)


@pytest.mark.parametrize("p, k, t", [
    (KDV, 1, np.pi),
    (DispersionSymbol((1, 0, 0)), 2, np.pi / 4),
])
def test_single_mode_phase_is_minus_one(p, k, t):
    s = FourierState.from_modes({k: 1.0}, 4)
    out = evolve_free(s, p, t)
    assert out.coeff(k) == pytest.approx(-1.0, abs=1e-14)


def test_zero_time_is_identity():
    s = random_state(np.random.default_rng(1), 6)
    np.testing.assert_array_equal(evolve_free(s, KDV, 0.0).coeffs, s.coeffs)


@pytest.mark.parametrize("k", [1000, 12345])
def test_large_symbol_phase_matches_extended_precision(k):
    # p(k) t is formed exactly from the float t; naive float products lose digits here
    t = 0.7
    s = FourierState.from_modes({k: 1.0}, k)
    out = evolve_free(s, KDV, t)
    with mpmath.workdps(60):
        ref = complex(mpmath.expj(mpmath.mpf(k) ** 3 * mpmath.mpf(t)))
    assert abs(out.coeff(k) - ref) < 1e-14


@pytest.mark.parametrize("modes, expected", [
    ({3: 1.0}, np.sqrt(TWO_PI)),
    ({}, 0.0),
    ({0: 1.0, 1: 1.0}, np.sqrt(2 * TWO_PI)),
])
def test_l2_norm_examples(modes, expected):
    assert l2_norm(FourierState.from_modes(modes, 4)) == pytest.approx(expected, abs=1e-15)


def test_grid_constant_and_single_mode():
    np.testing.assert_allclose(to_grid(FourierState.from_modes({0: 1.0}, 2), 8), np.ones(8))
    x = grid_points(8)
    np.testing.assert_allclose(to_grid(FourierState.from_modes({1: 1.0}, 2), 8), np.exp(1j * x),
                               atol=1e-15)


def test_grid_too_small_is_signalled():
    with pytest.raises(AliasingError):
        to_grid(FourierState.zeros(4), 8)


@pytest.mark.parametrize("nmax", [1, 5, 32])
def test_grid_round_trip(nmax):
    s = random_state(np.random.default_rng(nmax), nmax)
    back = from_grid(to_grid(s, 2 * nmax + 1), nmax)
    assert np.max(np.abs(back.coeffs - s.coeffs)) <= 1e-13 * np.max(np.abs(s.coeffs))


@settings(max_examples=40, deadline=None)
@given(t1=st.floats(-50, 50), t2=st.floats(-50, 50), seed=st.integers(0, 2**31))
def test_flow_group_property_and_norm(t1, t2, seed):
    s = random_state(np.random.default_rng(seed), 8)
    a = evolve_free(evolve_free(s, KDV, t1), KDV, t2)
    b = evolve_free(s, KDV, t1 + t2)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-12 * np.max(np.abs(s.coeffs)) * (1 + abs(t1) + abs(t2))
    assert l2_norm(a) == pytest.approx(l2_norm(s), rel=1e-12)


def test_zero_mean_flag_is_preserved():
    s = random_state(np.random.default_rng(3), 5).without_mean()
    out = evolve_free(s, KDV, 1.7)
    assert out.zero_mean and out.coeff(0) == 0


def test_zero_mean_flag_rejects_mean():
    with pytest.raises(ValueError):
        FourierState.from_modes({0: 1.0}, 2, zero_mean=True)


def test_out_of_band_reads_zero():
    s = FourierState.from_modes({1: 2.0}, 3)
    assert s.coeff(7) == 0


def test_inner_matches_norm():
    s = random_state(np.random.default_rng(4), 6)
    assert inner(s, s).real == pytest.approx(l2_norm(s) ** 2, rel=1e-14)


def test_from_function_projects_sine():
    s = FourierState.from_function(np.sin, 4)
    assert s.coeff(1) == pytest.approx(-0.5j, abs=1e-15)
    assert s.coeff(-1) == pytest.approx(0.5j, abs=1e-15)


@pytest.mark.parametrize("text, coeffs", [
    ("1,0,0,0", (1, 0, 0, 0)),
    ("k^4+k^2", (1, 0, 1, 0, 0)),
    ("k^3", (1, 0, 0, 0)),
])
def test_symbol_parse(text, coeffs):
    assert DispersionSymbol.parse(text).coefficients == coeffs


@pytest.mark.parametrize("coeffs", [(2, 0, 0), (1, 0), (0, 1, 0)])
def test_symbol_must_be_monic_degree_two(coeffs):
    with pytest.raises(ValueError):
        DispersionSymbol(coeffs)


def test_symbol_values_are_exact_integers():
    assert KDV(10**6) == 10**18
    assert isinstance(KDV(10**6), int)
