import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersive_control.mass_op import (
    CoercivityError, L_matrix, MassControlOperator, apply_L, apply_L_on_grid, coercivity_delta,
    coercivity_terms, grid_quadrature_L, identity_gap_matrix, inner_identity_check,
    row_identity_check,
)
from dispersive_control.region import IntervalUnion, TWO_PI
from dispersive_control.spectral_core import FourierState, inner

FULL = MassControlOperator(IntervalUnion.full())
HALF = MassControlOperator(IntervalUnion(((0.0, np.pi),)))
TWO = MassControlOperator(IntervalUnion(((0.0, 1.0), (2.0, 3.0))))


def random_state(rng, nmax):
    return FourierState(rng.normal(size=2 * nmax + 1) + 1j * rng.normal(size=2 * nmax + 1), nmax)


def test_table_invariants():
    for op in (FULL, HALF, TWO):
        assert op.ghat(0) == 1 / TWO_PI
        j = np.arange(1, 200)
        np.testing.assert_array_equal(op.ghat(-j), np.conj(op.ghat(j)))
        assert np.all(4 * np.pi ** 2 * np.abs(op.ghat(j)) ** 2 < 1)


def test_table_grows_on_demand():
    op = MassControlOperator(IntervalUnion(((0.5, 2.0),)), kmax=4)
    far = op.ghat(1000)
    ref = IntervalUnion(((0.5, 2.0),)).integral(-1000.0) / (TWO_PI * 1.5)
    assert far == pytest.approx(ref, abs=1e-16)


def test_full_torus_acts_as_scaled_identity_on_zero_mean():
    out = apply_L(FULL, FourierState.from_modes({1: 1.0}, 4))
    np.testing.assert_allclose(out.coeffs, FourierState.from_modes({1: 1 / TWO_PI}, 4).coeffs, atol=1e-16)


def test_full_torus_kills_constants():
    out = apply_L(FULL, FourierState.from_modes({0: 1.0}, 4))
    assert np.max(np.abs(out.coeffs)) == 0


def test_half_torus_matches_grid_quadrature():
    s = FourierState.from_modes({1: 1.0}, 1)
    x, ref = grid_quadrature_L(HALF.F, lambda x: np.exp(1j * x), 2**14)
    vals = apply_L_on_grid(HALF, s, x)
    assert np.max(np.abs(vals - ref)) < 1e-6
    assert abs(np.sum(vals) * TWO_PI / x.size) < 1e-8
    norm_sq = np.sum(np.abs(ref) ** 2) * TWO_PI / x.size
    assert norm_sq == pytest.approx((1 - 4 / np.pi ** 2) / np.pi, rel=1e-6)


def test_band_coefficients_match_quadrature_projection():
    # coefficients of Lop(e^{ix}) on |l| <= 6 against an FFT of the grid oracle
    x, ref = grid_quadrature_L(HALF.F, lambda x: np.exp(1j * x), 2**14)
    l = np.arange(-6, 7)
    proj = np.exp(-1j * np.outer(l, x)) @ ref / x.size
    np.testing.assert_allclose(L_matrix(HALF, [1], l)[0], proj, atol=1e-6)


@pytest.mark.parametrize("k, l, expected", [
    (1, 1, 1 / TWO_PI - 2 / np.pi ** 3),
    (2, 2, 1 / TWO_PI),
    (3, -3, 2 / (9 * np.pi ** 3)),
])
def test_L_matrix_half_torus(k, l, expected):
    assert L_matrix(HALF, [k], [l])[0, 0] == pytest.approx(expected, abs=1e-16)


def test_L_matrix_full_torus_diagonal():
    k = np.r_[-5:0, 1:6]
    np.testing.assert_allclose(L_matrix(FULL, k, k), np.eye(k.size) / TWO_PI, atol=1e-16)


@pytest.mark.parametrize("op", [FULL, HALF, TWO])
def test_L_matrix_is_hermitian(op):
    k = np.arange(-20, 21)
    M = L_matrix(op, k, k)
    assert np.max(np.abs(M - M.conj().T)) <= 1e-13


@pytest.mark.parametrize("op, k, rhs", [
    (FULL, 1, 1 / TWO_PI),
    (HALF, 1, (1 - 4 / np.pi ** 2) / np.pi),
    (HALF, 2, 1 / np.pi),
])
def test_row_identity_examples(op, k, rhs):
    lhs, r, gap = row_identity_check(op, k, lmax=4096)
    assert r == pytest.approx(rhs, rel=1e-14)
    assert abs(lhs - r) <= gap
    if op is FULL:
        assert gap <= 1e-13


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, TWO_PI), min_size=2, max_size=8).filter(lambda c: len(set(c)) == len(c)),
       st.integers(-12, 12).filter(bool), st.integers(-12, 12).filter(bool))
def test_inner_identity_within_tail(cuts, k, m):
    cuts = sorted(cuts)
    F = IntervalUnion(tuple(zip(cuts[::2], cuts[1::2])))
    if F.measure < 1e-3:
        return
    op = MassControlOperator(F)
    lhs, rhs, gap = inner_identity_check(op, k, m, lmax=2048)
    assert abs(lhs - rhs) <= gap + 1e-12


def test_identity_matrix_agrees_with_single_checks():
    ks = np.array([-3, 1, 4])
    lhs, rhs, tail = identity_gap_matrix(TWO, ks, 512)
    a, b, g = inner_identity_check(TWO, 1, 4, lmax=512)
    assert lhs[1, 2] == pytest.approx(a, abs=1e-13)
    assert rhs[1, 2] == pytest.approx(b, abs=1e-15)


def test_tail_bound_shrinks_the_gap():
    gaps = [row_identity_check(TWO, 3, lmax=L)[2] for L in (64, 512, 4096)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("op, K, expected", [
    (HALF, 1, (1 - 4 / np.pi ** 2) / np.pi),
    (FULL, 1, 1 / TWO_PI),
])
def test_coercivity_examples(op, K, expected):
    assert coercivity_delta(op, K_switch=K) == pytest.approx(expected, rel=1e-12)


def test_coercivity_two_intervals_matches_brute_force():
    d = coercivity_delta(TWO)
    brute = float(np.min(coercivity_terms(TWO, 10**4)))
    assert d > 0
    assert abs(d - brute) <= 1e-10


def test_coercivity_signals_small_switch():
    thin = MassControlOperator(IntervalUnion(((0.0, 0.1),)))
    with pytest.raises(CoercivityError):
        coercivity_delta(thin, K_switch=2)


def test_riemann_lebesgue_envelope():
    # |ghat(k)| <= m/(pi |F| |k|) gives a deviation of at most 4 m^2/(|F|^3 k^2)
    m, F = TWO.n_intervals, TWO.measure
    k = np.arange(1, 2000)
    dev = np.abs(coercivity_terms(TWO, k.size) - 1 / F)
    assert np.all(dev <= 4 * m ** 2 / (F ** 3 * k ** 2) * (1 + 1e-12))
    assert dev[-1] < 1e-6 * dev[0]


def test_full_torus_auto_switch_terminates():
    assert coercivity_delta(FULL) == pytest.approx(1 / TWO_PI, rel=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_zero_mean_and_self_adjoint(seed):
    rng = np.random.default_rng(seed)
    s1, s2 = random_state(rng, 24), random_state(rng, 24)
    a, b = apply_L(TWO, s1), apply_L(TWO, s2)
    assert abs(a.coeff(0)) <= 1e-14 * np.linalg.norm(s1.coeffs)
    lhs, rhs = inner(a, s2), inner(s1, b)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_output_supported_on_F():
    rng = np.random.default_rng(7)
    s = random_state(rng, 10)
    x = TWO_PI * (np.arange(4096) + 0.5) / 4096
    vals = apply_L_on_grid(TWO, s, x)
    assert np.all(vals[~TWO.F.contains(x)] == 0)
    assert np.sum(np.abs(vals[TWO.F.contains(x)])) > 0
