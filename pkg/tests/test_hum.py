import numpy as np
import pytest

from dispersive_control import hum
from dispersive_control.hum import HumSystem, ModalForcing
from dispersive_control.region import IntervalUnion, TWO_PI
from dispersive_control.spectral_core import FourierState, l2_norm

E_ACC = IntervalUnion(((0, 1), (1.5, 2)), period=2.0)
F_ACC = IntervalUnion(((0, np.pi), (4, 5)))


def random_zero_mean(rng, nmax):
    c = rng.normal(size=2 * nmax + 1) + 1j * rng.normal(size=2 * nmax + 1)
    c[nmax] = 0
    return FourierState(c, nmax, zero_mean=True)


@pytest.fixture(scope="module")
def acc_system():
    return HumSystem(E_ACC, F_ACC, 2.0, 16)


def gauss_time_kernel(sys, panels=400, nodes=16):
    """int_E exp(i(omega_k - omega_m) t) dt by composite Gauss-Legendre."""
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    dw = sys.omegas[None, :] - sys.omegas[:, None]
    out = np.zeros(dw.shape, dtype=complex)
    for a, b in sys.E.intervals:
        edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            t = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            out += 0.5 * (hi - lo) * np.tensordot(wg, np.exp(1j * dw[None] * t[:, None, None]), 1)
    return out


def test_full_torus_twisted_gram_matches_time_quadrature():
    T = 2.0
    sys = HumSystem(IntervalUnion(((0, T),), period=T), IntervalUnion.full(), T, 4)
    rep = hum.twisted_gram(sys)
    ref = TWO_PI * np.eye(sys.modes.size) / (4 * np.pi ** 2) * gauss_time_kernel(sys)
    assert np.max(np.abs(rep.gram - ref)) <= 1e-10
    np.testing.assert_allclose(np.diag(rep.gram).real, TWO_PI * T / (4 * np.pi ** 2), rtol=1e-14)
    # the weight on the whole torus makes distinct modes orthogonal in space
    off = rep.gram - np.diag(np.diag(rep.gram))
    assert np.max(np.abs(off)) == 0


def test_twisted_gram_matches_time_quadrature(acc_system):
    rep = hum.twisted_gram(acc_system)
    ref = TWO_PI * acc_system.gamma * gauss_time_kernel(acc_system)
    ref = 0.5 * (ref + ref.conj().T)
    assert np.max(np.abs(rep.gram - ref)) <= 1e-10


def test_twisted_gram_lsum_path_within_tail(acc_system):
    a = hum.twisted_gram(acc_system).gram
    b = hum.twisted_gram(acc_system, method="lsum", lmax=4096)
    assert np.max(np.abs(a - b.gram)) <= TWO_PI * b.diagnostics["tail_bound"]


def test_single_mode_system_hand_assembled():
    sys = HumSystem(IntervalUnion(((0, 1),), period=1.0), IntervalUnion(((0, np.pi),)), 1.0, 1)
    g11 = (1 / (2 * np.pi) - 2 / np.pi ** 3) / np.pi
    gm = 2 / np.pi ** 4
    k_off = (np.exp(2j) - 1) / 2j
    expected = np.array([[g11, gm * k_off], [gm * np.conj(k_off), g11]])
    # rows and columns ordered as modes (-1, 1)
    assert list(sys.modes) == [-1, 1]
    np.testing.assert_allclose(sys.phi_matrix, expected, atol=1e-15)
    np.testing.assert_allclose(hum.twisted_gram(sys).gram, TWO_PI * expected, atol=1e-14)


def test_phi_hermitian_positive(acc_system):
    phi = acc_system.phi_matrix
    assert np.max(np.abs(phi - phi.conj().T)) <= 1e-13
    assert np.min(np.linalg.eigvalsh(phi)) > 0


def test_phi_full_torus_gershgorin_and_gram_equality():
    T = 1.5
    sys = HumSystem(IntervalUnion(((0, T),), period=T), IntervalUnion.full(), T, 4)
    ev = np.linalg.eigvalsh(sys.phi_matrix)
    np.testing.assert_allclose(ev, T / (4 * np.pi ** 2), rtol=1e-13)
    assert np.max(np.abs(TWO_PI * sys.phi_matrix - hum.twisted_gram(sys).gram)) <= 1e-12


def test_phi_monotone_in_time_set():
    F = IntervalUnion(((0, np.pi),))
    small = HumSystem(IntervalUnion(((0, 1),), period=2.0), F, 2.0, 6)
    big = HumSystem(IntervalUnion(((0, 1), (1.5, 1.8)), period=2.0), F, 2.0, 6)
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = rng.normal(size=12) + 1j * rng.normal(size=12)
        assert np.vdot(v, big.phi_matrix @ v).real > np.vdot(v, small.phi_matrix @ v).real


def test_lambda_min_decreases_along_nested_time_sets():
    F = IntervalUnion(((0, np.pi),))
    lams = [hum.twisted_gram(HumSystem(IntervalUnion(((0, L),), period=2.0), F, 2.0, 4)).lambda_min
            for L in (2.0, 1.0, 0.5, 0.25)]
    assert all(a > b for a, b in zip(lams, lams[1:]))


def test_phi_is_self_adjoint_form(acc_system):
    rng = np.random.default_rng(3)
    a, b = (rng.normal(size=32) + 1j * rng.normal(size=32) for _ in range(2))
    phi = acc_system.phi_matrix
    lhs, rhs = np.vdot(b, phi @ a), np.vdot(phi @ b, a)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_zero_data_zero_control(acc_system):
    z = FourierState.zeros(16, zero_mean=True)
    sol = hum.synthesize_control(acc_system, z, z)
    assert sol.endpoint_residual == 0 and sol.cost == 0 and sol.cg_iterations == 0


def test_full_torus_single_mode_control():
    T = 2.0
    sys = HumSystem(IntervalUnion(((0, T),), period=T), IntervalUnion.full(), T, 8)
    v0 = FourierState.from_modes({1: 1.0}, 8, zero_mean=True)
    sol = hum.synthesize_control(sys, v0, FourierState.zeros(8, zero_mean=True))
    np.testing.assert_allclose(sol.psi.coeffs, v0.coeffs * 4 * np.pi ** 2 / T, atol=1e-10)
    assert sol.endpoint_residual <= 1e-10


def test_random_data_endpoint(acc_system):
    rng = np.random.default_rng(11)
    v0, v1 = random_zero_mean(rng, 16), random_zero_mean(rng, 16)
    sol = hum.synthesize_control(acc_system, v0, v1, tol=1e-12)
    assert sol.endpoint_residual <= 1e-8
    assert sol.control_constant > 0


@pytest.mark.parametrize("tol", [1e-6, 1e-8, 1e-10])
def test_residual_tracks_solver_tolerance(acc_system, tol):
    rng = np.random.default_rng(5)
    v0, v1 = random_zero_mean(rng, 16), random_zero_mean(rng, 16)
    sol = hum.synthesize_control(acc_system, v0, v1, tol=tol)
    assert sol.endpoint_residual <= 10 * tol


def test_endpoint_matches_pointwise_oracle(acc_system):
    # integrate the control modes by brute-force Gauss-Legendre in time
    rng = np.random.default_rng(8)
    v0, v1 = random_zero_mean(rng, 16), random_zero_mean(rng, 16)
    sol = hum.synthesize_control(acc_system, v0, v1)
    f = sol.forcing
    full = np.zeros(33)
    full[acc_system.modes + 16] = acc_system.omegas
    xg, wg = np.polynomial.legendre.leggauss(16)
    acc = np.zeros(33, dtype=complex)
    for a, b in acc_system.E.intervals:
        edges = np.linspace(a, b, 2001)
        for lo, hi in zip(edges[:-1], edges[1:]):
            t = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            vals = np.array([f.at(s) for s in t])
            acc += 0.5 * (hi - lo) * np.sum(wg[:, None] * vals * np.exp(-1j * np.outer(t, full)), axis=0)
    vT = (v0.coeffs + acc) * np.exp(1j * full * 2.0)
    assert np.max(np.abs(vT - v1.coeffs)) <= 1e-8


def test_forcing_has_zero_mean(acc_system):
    rng = np.random.default_rng(1)
    sol = hum.synthesize_control(acc_system, random_zero_mean(rng, 16), random_zero_mean(rng, 16))
    assert sol.forcing.mean_amplitude == 0
    assert sol.endpoint.coeff(0) == 0


def test_control_values_vanish_off_time_set_and_off_F(acc_system):
    rng = np.random.default_rng(2)
    sol = hum.synthesize_control(acc_system, random_zero_mean(rng, 16), random_zero_mean(rng, 16))
    x = TWO_PI * (np.arange(2**15) + 0.5) / 2**15
    assert np.all(hum.control_values(acc_system, sol.psi, 1.2, x) == 0)
    h = hum.control_values(acc_system, sol.psi, 0.4, x)
    assert np.all(h[~F_ACC.contains(x)] == 0)
    # grid mean of a function with jumps: quadrature error only
    assert abs(np.mean(h)) < 1e-3 * np.max(np.abs(h))


@pytest.mark.parametrize("seed", range(3))
def test_duality_identity(acc_system, seed):
    rng = np.random.default_rng(seed)
    modes = rng.choice(np.r_[-16:0, 1:17], size=3, replace=False)
    amps = rng.normal(size=3) + 1j * rng.normal(size=3)
    freqs = rng.uniform(-30, 30, size=3)
    _, _, gap = hum.duality_gap(acc_system, modes, amps, freqs, random_zero_mean(rng, 16),
                                random_zero_mean(rng, 16))
    assert gap <= 1e-10


def test_reduce_mean_and_mismatch():
    u0 = FourierState.from_modes({0: 0.3, 1: 1.0}, 2)
    u1 = FourierState.from_modes({0: 0.3, 2: 1.0}, 2)
    a, b, M = hum.reduce_mean(u0, u1)
    assert M == 0.3 and a.coeff(0) == 0 and b.coeff(0) == 0
    with pytest.raises(ValueError):
        hum.reduce_mean(u0, FourierState.from_modes({0: 0.1}, 2))


def test_restrict_rejects_mean(acc_system):
    with pytest.raises(ValueError):
        acc_system.restrict(FourierState.from_modes({0: 1.0}, 16))


def test_modal_forcing_interaction_integral_matches_quadrature():
    f = ModalForcing(np.array([[1.0, 0.5j], [0, 0], [2.0, -1.0]]), [3.0, -7.0], 1,
                     IntervalUnion(((0.2, 0.9),), period=1.0))
    om = np.array([1.0, 0.0, -1.0])
    got = f.interaction_integral(om, 0.1, 0.8)
    # only [0.2, 0.8) is active inside [0.1, 0.8)
    s = np.linspace(0.2, 0.8, 4001)
    vals = np.array([f.at(t) for t in s])
    ref = np.trapezoid(vals * np.exp(-1j * np.outer(s - 0.1, om)), s, axis=0)
    np.testing.assert_allclose(got, ref, atol=1e-6)


@pytest.mark.parametrize("F", [F_ACC, IntervalUnion(((0.3, 2.0),)), IntervalUnion.full()])
def test_gamma_is_rescaled_single_operator(F):
    # the mass operator squares to itself over |F|, so the HUM weight
    # L L* equals one copy of L divided by |F|, not L squared
    from dispersive_control.mass_op import L_matrix
    sys_ = HumSystem(E_ACC, F, 2.0, 8)
    L = L_matrix(sys_.op, sys_.modes, sys_.modes)
    np.testing.assert_allclose(sys_.gamma, L.T / F.measure, rtol=0, atol=1e-15)
