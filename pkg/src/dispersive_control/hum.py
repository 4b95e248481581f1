"""Linear mass-conserving control by the Hilbert uniqueness method.

State equation on zero-mean modes 1 <= |k| <= nmax:

    v_t = i P(D) v + Lop(h) 1_E(t),      h = -Lop S(t) psi,

so the effective forcing is -Lop^2 S(t) psi on E.  With
Gamma[m, k] = coefficient of Lop^2 e_k at m, the HUM matrix is

    Phi[m, k] = Gamma[m, k] * int_E exp(i (omega_k - omega_m) t) dt

and psi solves Phi psi = v0 - S(-T) v1.  The forcing is kept on the
same band as the state (Galerkin projection).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import cg

from .mass_op import MassControlOperator, L_matrix, _l_tail, apply_L_on_grid
from .observability import GramReport, hermitian_extremes, make_report
from .region import IntervalUnion, TWO_PI, interval_integral
from .spectral_core import (DispersionSymbol, FourierState, l2_norm, phase_factors,
                            symbol_frequencies)

RESIDUAL_FLOOR = 1e-14


class ControlError(RuntimeError):
    """Linear solve failed; carries the condition number of Phi."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class ModalForcing:
    """f_m(t) = 1_E(t) sum_j A[m, j] exp(i Omega_j t) on modes |m| <= nmax.

    A has one row per mode k = -nmax..nmax.  time_set=None means the
    forcing is active for all t.
    """

    def __init__(self, amplitudes, freqs, nmax, time_set=None):
        self.A = np.asarray(amplitudes, dtype=complex)
        self.freqs = np.asarray(freqs, dtype=float)
        self.nmax = nmax
        self.time_set = time_set
        if self.A.shape != (2 * nmax + 1, self.freqs.size):
            raise ValueError("amplitude matrix shape does not match modes x frequencies")

    @classmethod
    def zero(cls, nmax):
        return cls(np.zeros((2 * nmax + 1, 0)), np.zeros(0), nmax)

    def active(self, t):
        if self.time_set is None:
            return True
        return bool(self.time_set.clip(t, np.nextafter(t, np.inf)))

    def at(self, t):
        if self.freqs.size == 0 or not self.active(t):
            return np.zeros(2 * self.nmax + 1, dtype=complex)
        return self.A @ np.exp(1j * self.freqs * t)

    def pieces(self, t0, t1):
        if self.time_set is None:
            return [(t0, t1)] if t1 > t0 else []
        return self.time_set.clip(t0, t1)

    def interaction_integral(self, omegas, t0, t1):
        """int_{t0}^{t1} exp(-i omega_m (s - t0)) f_m(s) ds per mode, closed form."""
        omegas = np.asarray(omegas, dtype=float)
        out = np.zeros(2 * self.nmax + 1, dtype=complex)
        if self.freqs.size == 0:
            return out
        segs = self.pieces(t0, t1)
        if not segs:
            return out
        dw = self.freqs[None, :] - omegas[:, None]
        I = interval_integral(segs, dw)
        return np.exp(1j * omegas * t0) * np.sum(self.A * I, axis=1)

    @property
    def mean_amplitude(self):
        """Largest |A| on the k=0 row (zero for mass-conserving forcing)."""
        row = self.A[self.nmax]
        return float(np.max(np.abs(row))) if row.size else 0.0


class HumSystem:
    """Control sets, symbol, truncation and the assembled HUM matrix."""

    def __init__(self, E, F, T, nmax, p=None, drift=0.0):
        if not isinstance(E, IntervalUnion):
            E = IntervalUnion(tuple(E), period=T)
        if abs(E.period - T) > 1e-12 * T:
            raise ValueError("time set must use the horizon T as its period")
        if not isinstance(F, IntervalUnion):
            F = IntervalUnion(tuple(F))
        if E.measure <= 0 or F.measure <= 0:
            raise ValueError("control sets must have positive measure")
        self.E, self.F, self.T, self.nmax = E, F, float(T), int(nmax)
        self.p = p or DispersionSymbol.kdv()
        self.drift = float(drift)
        self.op = MassControlOperator(F, kmax=2 * self.nmax + 8)
        self.modes = np.array([k for k in range(-self.nmax, self.nmax + 1) if k != 0])
        self.omegas = np.array(symbol_frequencies(self.p, self.modes, self.drift), dtype=float)
        self.gamma = self._gamma()
        self.phi_matrix = build_phi(self)

    def _gamma(self):
        k = self.modes[None, :]
        m = self.modes[:, None]
        g = self.op.ghat
        return (g(m - k) - TWO_PI * np.conj(g(k)) * g(m)) / self.op.measure

    def time_kernel(self):
        """int_E exp(i (omega_k - omega_m) t) dt as a [m, k] matrix."""
        return self.E.integral(self.omegas[None, :] - self.omegas[:, None])

    def embed(self, vec):
        """Zero-mean FourierState from a vector on the control modes."""
        c = np.zeros(2 * self.nmax + 1, dtype=complex)
        c[self.modes + self.nmax] = vec
        return FourierState(c, self.nmax, zero_mean=True)

    def restrict(self, state):
        if state.mean != 0:
            raise ValueError("control data must be zero-mean")
        return state.with_nmax(self.nmax).coeffs[self.modes + self.nmax]

    def free(self, vec, t):
        return vec * phase_factors(list(self.omegas), t)


def build_phi(sys):
    """Assemble Phi and check it is Hermitian positive definite."""
    phi = sys.gamma * sys.time_kernel()
    U = np.triu(phi, 1)
    phi = U + U.conj().T + np.diag(np.real(np.diag(phi)))
    lo, hi = hermitian_extremes(phi)
    if not lo > 0:
        raise ControlError(f"HUM matrix not positive definite (lambda_min={lo:.3e})",
                           condition_number=None)
    return phi


def twisted_gram(sys, method="identity", lmax=None):
    """Gram of Lop(exp(i(kx + omega_k t))) over E x torus, normalization 2pi.

    method='identity' uses the closed form of the inner products;
    method='lsum' sums L(k, l) conj L(m, l) over |l| <= lmax and records
    the analytic tail bound in the diagnostics.
    """
    kernel = sys.time_kernel()
    diag = {"method": method}
    if method == "identity":
        gamma = sys.gamma
    elif method == "lsum":
        lmax = lmax or 4 * sys.nmax + 64
        l = np.arange(-lmax, lmax + 1)
        R = L_matrix(sys.op, sys.modes, l)
        gamma = (R @ R.conj().T).T
        tails = np.array([_l_tail(sys.op, k, lmax) for k in sys.modes])
        diag["tail_bound"] = float(np.max(tails) * sys.E.measure)
    else:
        raise ValueError(f"unknown method {method!r}")
    gram = TWO_PI * gamma * kernel
    return make_report(gram, TWO_PI, diagnostics=diag,
                       freq_set={"band": f"1<=|k|<={sys.nmax}", "symbol": str(sys.p)},
                       region=f"E={sys.E.intervals} x F={sys.F.intervals}")


@dataclass
class ControlSolution:
    psi: FourierState
    forcing: ModalForcing
    endpoint: FourierState
    endpoint_residual: float
    cost: float
    control_constant: object
    cg_iterations: int
    lambda_min_phi: float
    condition_number: float
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {"lambda_min_phi": self.lambda_min_phi, "condition_number": self.condition_number,
                "cg_iterations": self.cg_iterations, "endpoint_residual": self.endpoint_residual,
                "control_cost": self.cost, "control_constant": self.control_constant}


def control_forcing(sys, psi_vec):
    """Band-projected forcing -Lop^2 S(t) psi on E as a ModalForcing."""
    A = np.zeros((2 * sys.nmax + 1, sys.modes.size), dtype=complex)
    A[sys.modes + sys.nmax, :] = -sys.gamma * psi_vec[None, :]
    return ModalForcing(A, sys.omegas, sys.nmax, sys.E)


def duhamel_endpoint(sys, v0, forcing, T=None):
    """Exact per-mode linear solution at time T driven by forcing."""
    T = sys.T if T is None else T
    full_omegas = np.zeros(2 * sys.nmax + 1)
    full_omegas[sys.modes + sys.nmax] = sys.omegas
    drive = forcing.interaction_integral(full_omegas, 0.0, T)
    c = v0.with_nmax(sys.nmax).coeffs + drive
    return FourierState(c * phase_factors(list(full_omegas), T), sys.nmax)


def _cg_solve(phi, b, tol, maxiter):
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = cg(phi, b, rtol=tol, atol=0.0, maxiter=maxiter, callback=tick)
    return x, info, count[0]


def synthesize_control(sys, v0, v1, tol=1e-12, maxiter=None):
    """HUM control steering v0 to v1 at time T."""
    b = sys.restrict(v0) - sys.free(sys.restrict(v1), -sys.T)
    lo, hi = hermitian_extremes(sys.phi_matrix)
    cond = hi / lo
    if not np.any(b):
        psi = np.zeros_like(b)
        iters = 0
    else:
        maxiter = maxiter or 20 * b.size
        psi, info, iters = _cg_solve(sys.phi_matrix, b, tol, maxiter)
        if info != 0:
            raise ControlError(f"CG stagnated after {iters} iterations (cond={cond:.3e})", cond)
    forcing = control_forcing(sys, psi)
    vT = duhamel_endpoint(sys, v0, forcing)
    scale = max(l2_norm(v0), l2_norm(v1), RESIDUAL_FLOOR)
    residual = l2_norm(vT - v1.with_nmax(sys.nmax)) / scale
    cost = float(np.sqrt(max(TWO_PI * np.real(np.vdot(psi, sys.phi_matrix @ psi)), 0.0)))
    data = l2_norm(v0) + l2_norm(v1)
    return ControlSolution(sys.embed(psi), forcing, vT, float(residual), cost,
                           cost / data if data > 0 else None, iters, lo, cond,
                           {"rhs_norm": float(np.sqrt(TWO_PI) * np.linalg.norm(b))})


def control_values(sys, psi, t, x):
    """h(t, x) = -Lop S(t) psi on E (zero off E), pointwise exact."""
    if not (0.0 <= t < sys.T and sys.E.contains(t)):
        return np.zeros(np.shape(x), dtype=complex)
    vec = sys.restrict(psi)
    state = sys.embed(sys.free(vec, t))
    return -apply_L_on_grid(sys.op, state, x)


def duality_gap(sys, h_modes, h_amps, h_freqs, w0, v0, quad_nodes=64):
    """Compare both sides of the duality identity for a trigonometric h.

    h(t, x) = sum_j h_amps[j] exp(i (h_modes[j] x + h_freqs[j] t)).
    Left side: int_E <Lop^2 h, S(t) w0> dt by Gauss-Legendre in time.
    Right side: <v(T), S(T) w0> - <v0, w0> with v from exact Duhamel.
    """
    h_modes = np.asarray(h_modes)
    h_amps = np.asarray(h_amps, dtype=complex)
    h_freqs = np.asarray(h_freqs, dtype=float)
    ms = np.arange(-sys.nmax, sys.nmax + 1)
    g = sys.op.ghat
    G = (g(ms[:, None] - h_modes[None, :]) - TWO_PI * np.conj(g(h_modes))[None, :] * g(ms)[:, None]) / sys.op.measure
    w = w0.with_nmax(sys.nmax).coeffs
    om = np.array(symbol_frequencies(sys.p, ms, sys.drift), dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(quad_nodes)
    lhs = 0j
    for a, b in sys.E.intervals:
        # split long intervals so each panel resolves the fastest phase
        fastest = np.max(np.abs(om)) + np.max(np.abs(h_freqs)) + 1.0
        panels = max(1, int(np.ceil((b - a) * fastest / (0.5 * quad_nodes))))
        edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            t = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            f = G @ (h_amps[:, None] * np.exp(1j * np.outer(h_freqs, t)))
            sw = w[:, None] * np.exp(1j * np.outer(om, t))
            lhs += 0.5 * (hi - lo) * np.sum(wg * TWO_PI * np.sum(f * np.conj(sw), axis=0))
    A = G * h_amps[None, :]
    forcing = ModalForcing(A, h_freqs, sys.nmax, sys.E)
    vT = duhamel_endpoint(sys, v0.with_nmax(sys.nmax), forcing)
    wT = w * phase_factors(list(om), sys.T)
    rhs = TWO_PI * (np.vdot(wT, vT.coeffs) - np.vdot(w, v0.with_nmax(sys.nmax).coeffs))
    return complex(lhs), complex(rhs), float(abs(lhs - rhs))


def reduce_mean(u0, u1, tol=1e-12):
    """Split off a common spatial mean M; returns (u0 - M, u1 - M, M)."""
    M0, M1 = u0.mean, u1.mean
    if abs(M0 - M1) > tol * max(1.0, abs(M0)):
        raise ValueError(f"initial and target means differ ({M0} vs {M1}); mass is conserved")
    return u0.without_mean(), u1.without_mean(), M0
