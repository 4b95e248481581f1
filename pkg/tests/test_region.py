import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersive_control import region
from dispersive_control.region import IntervalUnion, SpaceTimeRegion, TWO_PI


@pytest.mark.parametrize("r, expected", [
    (IntervalUnion(((0, np.pi), (1.5 * np.pi, TWO_PI))), 1.5 * np.pi),
    (IntervalUnion.empty(), 0.0),
    (SpaceTimeRegion.rectangle((0, 1), (0, np.pi)), np.pi),
])
def test_measure(r, expected):
    assert region.measure(r) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("r, alpha, expected", [
    (IntervalUnion(((0, np.pi),)), 0, 0.5),
    (IntervalUnion(((0, np.pi),)), 1, -1j / np.pi),
    (IntervalUnion.full(), 5, 0.0),
])
def test_indicator_fourier(r, alpha, expected):
    assert region.indicator_fourier(r, alpha) == pytest.approx(expected, abs=1e-15)


def test_indicator_fourier_matches_quadrature():
    F = IntervalUnion(((0.3, 1.1), (2.0, 4.5)))
    x = (np.arange(2**16) + 0.5) * TWO_PI / 2**16
    mask = F.contains(x)
    for a in (-3, 1, 7):
        ref = np.sum(mask * np.exp(-1j * a * x)) / 2**16
        assert abs(F.fourier(a) - ref) < 1e-4


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, TWO_PI), min_size=2, max_size=8), st.integers(-50, 50))
def test_indicator_fourier_conjugate_symmetry(cuts, alpha):
    cuts = sorted(cuts)
    F = IntervalUnion(tuple(zip(cuts[::2], cuts[1::2])))
    assert region.indicator_fourier(F, -alpha) == pytest.approx(np.conj(region.indicator_fourier(F, alpha)), abs=1e-15)


def test_translate_wraps():
    r = region.translate(IntervalUnion(((0, 1),)), 0.5)
    assert r.intervals == ((0.5, 1.5),)
    w = region.translate(IntervalUnion(((6.0, TWO_PI),)), 1.0)
    assert w.measure == pytest.approx(TWO_PI - 6.0)
    assert w.contains(np.array([0.8]))[0] and not w.contains(np.array([0.5]))[0]


def test_intersect_with_zero_translate_is_identity():
    G = SpaceTimeRegion.product(IntervalUnion(((0, 1), (2, 3))), IntervalUnion(((0, np.pi),)))
    assert region.intersect(G, region.translate(G, (0.0, 0.0))) == G


@pytest.mark.parametrize("h", [0.1, 0.01, 0.001])
def test_translate_difference_measure(h):
    G = IntervalUnion(((0, np.pi),))
    d = region.set_difference(G, G.translate(-h))
    assert d.measure == pytest.approx(min(h, np.pi), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_set_algebra_is_additive(ht, hx):
    G = SpaceTimeRegion.from_rectangles([((0, 1), (0, 2)), ((1.5, 3), (1, 4))])
    Gh = G.translate((ht, hx))
    assert G.measure == pytest.approx(G.intersect(Gh).measure + G.set_difference(Gh).measure, abs=1e-12)


def test_parse_accepts_pi_tokens():
    F = IntervalUnion.parse("[0, pi/2), [pi, 3*pi/2)")
    assert F.measure == pytest.approx(np.pi)


@pytest.mark.parametrize("bad", ["[0, )", "[a, 1)", "[0, 1", "[2, 1)"])
def test_parse_rejects_malformed(bad):
    with pytest.raises(ValueError):
        IntervalUnion.parse(bad)


def test_tail_energy_full_cell_is_zero():
    G = SpaceTimeRegion.full()
    for N in (0, 3, 10):
        assert region.tail_energy(G, N) == pytest.approx(0.0, abs=1e-15)


def test_tail_energy_half_cell_matches_direct_sum():
    G = SpaceTimeRegion.rectangle((0, np.pi), (0, TWO_PI))
    total = region.plancherel_total(G)
    assert total == pytest.approx(G.measure / (TWO_PI * G.t_period))
    # only the alpha_x = 0 column survives; |c_j| = 1/(pi j) for odd j
    j = np.arange(1, 10**4 + 1)
    direct = 0.25 + 2 * np.sum(np.where(j % 2 == 1, 1 / (np.pi * j) ** 2, 0.0))
    assert total - region.tail_energy(G, 10**4) == pytest.approx(direct, abs=1e-12)
    assert region.tail_energy(G, 0) == pytest.approx(total - 0.25, abs=1e-15)


@pytest.mark.parametrize("N", [0, 1, 2, 5, 9])
def test_tail_energy_monotone_and_plancherel(N):
    G = SpaceTimeRegion.from_rectangles([((0, 1), (0, 2)), ((1.5, 3), (1, 4))])
    assert region.tail_energy(G, N + 1) <= region.tail_energy(G, N) + 1e-16
    assert region.partial_energy(G, N) + region.tail_energy(G, N) == pytest.approx(region.plancherel_total(G), abs=1e-12)


def test_space_time_fourier_matches_closed_form():
    G = SpaceTimeRegion.rectangle((0, np.pi), (0, np.pi))
    # product of two half-interval coefficients
    assert G.fourier(1, 1) == pytest.approx((-1j / np.pi) ** 2, abs=1e-15)
