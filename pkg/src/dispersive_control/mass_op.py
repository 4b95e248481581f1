"""The mass-conserving control shaping operator.

For a set F of positive measure with g = 1_F / |F|,

    Lop(h) = (1/|F|) 1_F (h - avg_F h),

which is self-adjoint, maps into zero-mean functions and is supported in F.
In Fourier coefficients the output at l is sum_k L(k, l) c_k with

    L(k, l) = ghat(l - k) - 2pi ghat(-k) ghat(l).
"""
import numpy as np

from .region import IntervalUnion, TWO_PI
from .spectral_core import FourierState, grid_points


class CoercivityError(ValueError):
    """Tail bound not yet below one at the requested switch frequency."""


class MassControlOperator:
    """Tabulated ghat(j) for |j| <= kmax and the induced matrix L(k, l).

    The table grows on demand, so reads past the initial range are valid.
    """

    def __init__(self, F, kmax=64):
        if not isinstance(F, IntervalUnion):
            F = IntervalUnion(tuple(F))
        if F.measure <= 0:
            raise ValueError("F must have positive measure")
        if abs(F.period - TWO_PI) > 1e-12:
            raise ValueError("F must live on the 2pi torus")
        self.F = F
        self.measure = F.measure
        self.n_intervals = F.n_intervals
        # the full circle has no endpoints, so ghat vanishes off zero
        self.n_boundary_pairs = 0 if F.is_full else F.n_intervals
        self._kmax = 0
        self._table = np.zeros(1, dtype=complex)
        self._extend(int(kmax))

    def _extend(self, kmax):
        if kmax <= self._kmax and self._table.size > 1:
            return
        j = np.arange(-kmax, kmax + 1)
        g = self.F.integral(-j.astype(float)) / (TWO_PI * self.measure)
        if self.F.is_full:
            g[:] = 0.0
        g[kmax] = 1.0 / TWO_PI
        # exact conjugate symmetry for the real weight
        g[:kmax] = np.conj(g[kmax + 1:][::-1])
        self._table = g
        self._table.setflags(write=False)
        self._kmax = kmax

    @property
    def kmax(self):
        return self._kmax

    def ghat(self, j):
        """Fourier coefficients of g = 1_F/|F| at integer j (array-valued)."""
        j = np.asarray(j, dtype=np.int64)
        need = int(np.max(np.abs(j))) if j.size else 0
        if need > self._kmax:
            self._extend(max(need, 2 * self._kmax))
        return self._table[j + self._kmax]

    def L(self, k, l):
        k = np.asarray(k)
        l = np.asarray(l)
        return self.ghat(l - k) - TWO_PI * self.ghat(-k) * self.ghat(l)

    @property
    def decay_constant(self):
        """c with |ghat(j)| <= c/|j| for j != 0."""
        return self.n_boundary_pairs / (np.pi * self.measure)

    def __repr__(self):
        return f"MassControlOperator(|F|={self.measure:.6g}, m={self.n_intervals}, kmax={self._kmax})"


def L_matrix(op, k_range, l_range):
    """Matrix with entry [i, j] = L(k_i, l_j)."""
    k = np.asarray(k_range)[:, None]
    l = np.asarray(l_range)[None, :]
    return op.L(k, l)


def apply_L(op, state):
    """Coefficients of Lop(u) on the band of the input state."""
    ks = state.ks
    M = L_matrix(op, ks, ks)
    out = state.coeffs @ M
    out[state.nmax] = 0.0
    return FourierState(out, state.nmax, zero_mean=True)


def apply_L_on_grid(op, state, x):
    """Pointwise values of Lop(u) at points x, exact for band-limited u."""
    x = np.asarray(x, dtype=float)
    u = np.exp(1j * np.outer(x, state.ks)) @ state.coeffs
    # F-average of u is 2pi sum_k conj(ghat(k)) c_k
    avg = TWO_PI * np.vdot(op.ghat(state.ks), state.coeffs)
    return op.F.contains(x) * (u - avg) / op.measure


def _l_tail(op, k, L):
    """Bound on 2pi sum_{|l| > L} |L(k, l)|^2, requires L > |k|."""
    c = op.decay_constant
    gk = abs(op.ghat(k))
    first = 2 * c * c * 2.0 / (L - abs(k))
    second = 2 * (TWO_PI * gk * c) ** 2 * 2.0 / L
    return TWO_PI * (first + second)


def row_identity_check(op, k, lmax=None):
    """2pi sum_l |L(k, l)|^2 against (1/|F|)(1 - 4pi^2 |ghat(k)|^2).

    Returns (lhs, rhs, gap) where gap adds the analytic bound on the
    truncated part of the l-sum (|l| > lmax) to |lhs - rhs|.
    """
    lmax = lmax or max(2 * abs(k), 64)
    if lmax <= abs(k):
        raise ValueError("lmax must exceed |k|")
    l = np.arange(-lmax, lmax + 1)
    lhs = float(TWO_PI * np.sum(np.abs(op.L(k, l)) ** 2))
    rhs = float((1.0 - 4 * np.pi ** 2 * abs(op.ghat(k)) ** 2) / op.measure)
    tail = _l_tail(op, k, lmax)
    return lhs, rhs, abs(lhs - rhs) + tail


def inner_identity_check(op, k, m, lmax=None):
    """2pi sum_l L(k,l) conj L(m,l) against (2pi/|F|)(ghat(m-k) - 2pi conj(ghat(k)) ghat(m)).

    The gap includes a Cauchy-Schwarz bound on the truncated tail.
    """
    lmax = lmax or max(2 * max(abs(k), abs(m)), 64)
    l = np.arange(-lmax, lmax + 1)
    lhs = complex(TWO_PI * np.sum(op.L(k, l) * np.conj(op.L(m, l))))
    rhs = complex(TWO_PI / op.measure * (op.ghat(m - k) - TWO_PI * np.conj(op.ghat(k)) * op.ghat(m)))
    tail = np.sqrt(_l_tail(op, k, lmax) * _l_tail(op, m, lmax))
    return lhs, rhs, abs(lhs - rhs) + tail


def identity_gap_matrix(op, ks, lmax, chunk=1024):
    """All inner-product identities for k, m in ks at once.

    Returns (lhs, rhs, tail) matrices indexed [k, m]; the diagonal is the
    row (norm) identity.  tail is the analytic bound on the truncated sum.
    """
    ks = np.asarray(ks)
    if lmax <= np.max(np.abs(ks)):
        raise ValueError("lmax must exceed max |k|")
    op.ghat(lmax + np.max(np.abs(ks)))
    lhs = np.zeros((ks.size, ks.size), dtype=complex)
    # chunked over l to keep the working set small
    for start in range(-lmax, lmax + 1, chunk):
        l = np.arange(start, min(start + chunk, lmax + 1))
        rows = L_matrix(op, ks, l)
        lhs += rows @ rows.conj().T
    lhs *= TWO_PI
    g = op.ghat(ks)
    rhs = TWO_PI / op.measure * (op.ghat(ks[None, :] - ks[:, None]) - TWO_PI * np.conj(g)[:, None] * g[None, :])
    t = np.array([_l_tail(op, k, lmax) for k in ks])
    return lhs, rhs, np.sqrt(np.outer(t, t))


def coercivity_terms(op, kmax):
    """(1/|F|)(1 - 4pi^2 |ghat(k)|^2) for k = 1..kmax (even in k)."""
    k = np.arange(1, kmax + 1)
    return (1.0 - 4 * np.pi ** 2 * np.abs(op.ghat(k)) ** 2) / op.measure


def coercivity_delta(op, K_switch=None):
    """Lower bound delta on ||Lop e_k||^2 over all k != 0.

    Scans 0 < |k| <= K_switch exactly and bounds the rest with
    |ghat(k)| <= m/(pi |F| |k|).  With K_switch=None the switch point is
    doubled until the tail bound no longer undercuts the scanned minimum,
    so the result is the true infimum.
    """
    F_meas, m = op.measure, op.n_boundary_pairs
    if K_switch is None:
        K = max(8, int(np.ceil(4 * m / F_meas)) + 1)
        while True:
            scan = float(np.min(coercivity_terms(op, K)))
            ratio = 2 * m / (F_meas * K)
            bound = (1 - ratio ** 2) / F_meas if ratio < 1 else -np.inf
            if bound >= scan:
                return scan
            K *= 2
    K = int(K_switch)
    if K < 1:
        raise ValueError("K_switch must be at least 1")
    ratio = 2 * m / (F_meas * K)
    if ratio >= 1:
        raise CoercivityError(f"tail bound {ratio:.3g} >= 1 at K_switch={K}; raise K_switch")
    scan = float(np.min(coercivity_terms(op, K)))
    return min(scan, (1 - ratio ** 2) / F_meas)


def grid_quadrature_L(F, func, n_points=2**14):
    """Independent evaluation of Lop(func) by a dense midpoint grid.

    Returns (x, values); the F-average is computed by grid quadrature.
    """
    x = grid_points(n_points) + np.pi / n_points
    u = func(x)
    ind = F.contains(x)
    avg = np.sum(u * ind) / np.sum(ind)
    return x, ind * (u - avg) / F.measure
