"""Damped dispersive flow i u_t + P(D) u + i a(t, x) u = 0 on the torus.

Equivalently u_t = i P(D) u - a u.  States live on a grid of 2*nmax + 1
points, where the coefficient/grid round trip is exact and the discrete
norm equals the L^2 norm.  Strang splitting alternates exact free
half-steps with pointwise multiplication by exp(-int a dt), so the norm
never increases when a >= 0.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .observability import weighted_observability
from .region import IntervalUnion, SpaceTimeRegion
from .spectral_core import FourierState, TWO_PI, phase_factors, symbol_frequencies

KINDS = ("time_independent", "periodic_blocks", "modulated_wave", "block_indicator")


def _abs_sin_antiderivative(theta):
    """F with F' = |sin|: 2 floor(theta/pi) + 1 - cos(theta mod pi)."""
    q = np.floor(theta / np.pi)
    return 2.0 * q + 1.0 - np.cos(theta - np.pi * q)


@lru_cache(maxsize=4096)
def _block_segments(fld, n):
    T = fld.block_T
    xi = fld._phase(n) if fld.kind == "block_indicator" else 0.0
    out = []
    for t0, t1, space in fld.profile.slabs:
        local = IntervalUnion(((t0 - xi, t1 - xi),), period=T)
        for a, b in local.intervals:
            out.append((n * T + a, n * T + b, space))
    return tuple(out)


@dataclass(frozen=True)
class DampingField:
    """Nonnegative damping a(t, x) of one of four kinds.

    time_independent: a0 * g(x), g an IntervalUnion indicator or callable.
    periodic_blocks:  a0 * 1_G0(t mod T, x).
    block_indicator:  a0 * 1_G0((t + xi_n) mod T, x) on block n.
    modulated_wave:   a0 * |sin(2pi t/T + xi_n)| * g(x) on block n.
    """

    kind: str
    a0: float = 1.0
    profile: object = None
    block_T: float = 1.0
    phases: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.a0 < 0:
            raise ValueError("damping amplitude must be nonnegative")
        if self.kind in ("periodic_blocks", "block_indicator"):
            if not isinstance(self.profile, SpaceTimeRegion):
                raise ValueError("block kinds need a SpaceTimeRegion profile")
            if abs(self.profile.t_period - self.block_T) > 1e-12 * self.block_T:
                raise ValueError("profile time period must equal the block length")
        object.__setattr__(self, "phases", tuple(float(x) for x in self.phases))

    @classmethod
    def constant(cls, a0):
        return cls("time_independent", a0, IntervalUnion.full())

    @classmethod
    def time_independent(cls, profile, a0=1.0):
        return cls("time_independent", a0, profile)

    @classmethod
    def periodic_blocks(cls, G0, a0=1.0):
        return cls("periodic_blocks", a0, G0, G0.t_period)

    @classmethod
    def block_indicator(cls, G0, phases, a0=1.0):
        return cls("block_indicator", a0, G0, G0.t_period, tuple(phases))

    @classmethod
    def modulated_wave(cls, profile, block_T, phases, a0=1.0):
        return cls("modulated_wave", a0, profile, block_T, tuple(phases))

    def _phase(self, n):
        if not self.phases:
            return 0.0
        return self.phases[min(n, len(self.phases) - 1)]

    def spatial(self, x):
        """g(x) for the kinds with a separate spatial profile."""
        g = self.profile
        if isinstance(g, IntervalUnion):
            return g.contains(x).astype(float)
        vals = np.asarray(g(x), dtype=float)
        if np.any(vals < 0):
            raise ValueError("damping profile takes negative values")
        return np.broadcast_to(vals, np.shape(x)).astype(float)

    def value(self, t, x):
        t = float(t)
        x = np.asarray(x, dtype=float)
        if self.kind == "time_independent":
            return self.a0 * self.spatial(x)
        n = int(np.floor(t / self.block_T))
        if self.kind == "modulated_wave":
            w = abs(np.sin(TWO_PI * t / self.block_T + self._phase(n)))
            return self.a0 * w * self.spatial(x)
        xi = self._phase(n) if self.kind == "block_indicator" else 0.0
        tau = np.mod(t - n * self.block_T + xi, self.block_T)
        return self.a0 * self.profile.contains(np.full(x.shape, tau), x).astype(float)

    def block_segments(self, n):
        """Absolute-time pieces (s0, s1, space set) where block n is active."""
        return _block_segments(self, n)

    def time_integral(self, t0, t1, x):
        """int_{t0}^{t1} a(s, x) ds, exact for every kind."""
        x = np.asarray(x, dtype=float)
        if self.kind == "time_independent":
            return self.a0 * (t1 - t0) * self.spatial(x)
        T = self.block_T
        out = np.zeros(x.shape)
        n0, n1 = int(np.floor(t0 / T)), int(np.ceil(t1 / T))
        if self.kind == "modulated_wave":
            acc = 0.0
            for n in range(n0, max(n1, n0 + 1)):
                lo, hi = max(t0, n * T), min(t1, (n + 1) * T)
                if hi <= lo:
                    continue
                th = TWO_PI / T
                xi = self._phase(n)
                acc += (_abs_sin_antiderivative(th * hi + xi) - _abs_sin_antiderivative(th * lo + xi)) / th
            return self.a0 * acc * self.spatial(x)
        for overlap, space in self.active_parts(t0, t1):
            out += overlap * space.contains(x)
        return self.a0 * out

    def active_parts(self, t0, t1):
        """(overlap length, space set) pairs of an indicator kind on [t0, t1]."""
        T = self.block_T
        n0, n1 = int(np.floor(t0 / T)), int(np.ceil(t1 / T))
        parts = []
        for n in range(n0, max(n1, n0 + 1)):
            for s0, s1, space in self.block_segments(n):
                overlap = min(s1, t1) - max(s0, t0)
                if overlap > 0:
                    parts.append((overlap, space))
        return parts

    def breakpoints(self, t0, t1):
        """Times in (t0, t1) where a may jump."""
        T = self.block_T
        pts = set()
        if self.kind == "time_independent":
            return []
        n0, n1 = int(np.floor(t0 / T)), int(np.ceil(t1 / T))
        for n in range(n0, n1 + 1):
            pts.add(n * T)
            if self.kind in ("periodic_blocks", "block_indicator"):
                for s0, s1, _ in self.block_segments(n):
                    pts.update((s0, s1))
        return sorted(p for p in pts if t0 < p < t1)

    def block_l1_linf(self, n, n_x=1024, n_t=256):
        """int_T sup_{t in block n} a(t, x) dx, the assumption-(A) quantity."""
        x = (np.arange(n_x) + 0.5) * TWO_PI / n_x
        if self.kind == "time_independent":
            sup = self.value(0.0, x)
        elif self.kind == "modulated_wave":
            sup = self.a0 * self.spatial(x)
        else:
            sup = np.zeros(n_x)
            for s0, s1, space in self.block_segments(n):
                sup = np.maximum(sup, self.a0 * space.contains(x))
        return float(np.sum(sup) * TWO_PI / n_x)

    def describe(self):
        prof = self.profile
        if isinstance(prof, (IntervalUnion, SpaceTimeRegion)):
            prof = str(prof) if isinstance(prof, SpaceTimeRegion) else list(prof.intervals)
        else:
            prof = "callable"
        return {"kind": self.kind, "a0": self.a0, "block_T": self.block_T,
                "profile": prof, "phases": list(self.phases)}


@dataclass
class DampedTrajectory:
    times: np.ndarray
    coeffs: np.ndarray
    nmax: int
    dt: float
    field: DampingField
    save_every: int = 1

    @property
    def norms(self):
        return np.sqrt(TWO_PI * np.sum(np.abs(self.coeffs) ** 2, axis=1))

    def state(self, i):
        return FourierState(self.coeffs[i], self.nmax)


class _Stepper:
    def __init__(self, field, p, nmax, dt):
        self.field, self.nmax, self.dt = field, nmax, dt
        self.M = 2 * nmax + 1
        self.ks = np.arange(-nmax, nmax + 1)
        self.idx = self.ks % self.M
        self.x = TWO_PI * np.arange(self.M) / self.M
        w = symbol_frequencies(p, self.ks)
        half = phase_factors(w, 0.5 * dt)
        # reorder to FFT layout once so each step is two multiplies and two FFTs
        self.half = np.empty(self.M, dtype=complex)
        self.half[self.idx] = half
        self._masks = {}

    def damping_factor(self, t0, t1):
        fld = self.field
        if fld.kind in ("periodic_blocks", "block_indicator"):
            A = np.zeros(self.M)
            for overlap, space in fld.active_parts(t0, t1):
                mask = self._masks.get(space)
                if mask is None:
                    mask = self._masks[space] = space.contains(self.x).astype(float)
                A += overlap * mask
            A *= fld.a0
        else:
            A = fld.time_integral(t0, t1, self.x)
        if np.any(A < 0):
            raise ValueError("negative damping encountered")
        return np.exp(-A)

    def to_fft(self, c):
        buf = np.empty(c.shape, dtype=complex)
        buf[..., self.idx] = c
        return buf

    def from_fft(self, buf):
        return buf[..., self.idx]

    def step(self, buf, t):
        """Advance FFT-ordered coefficients (last axis) by one step."""
        buf = buf * self.half
        g = np.fft.ifft(buf, axis=-1)
        g *= self.damping_factor(t, t + self.dt)
        buf = np.fft.fft(g, axis=-1)
        return buf * self.half


def solve_damped(u0, field, p, T_total, dt, save_every=1):
    """Strang-split damped flow on [0, T_total]; samples every save_every steps."""
    n = int(round(T_total / dt))
    if n < 1 or abs(n * dt - T_total) > 1e-9 * max(T_total, 1.0):
        raise ValueError("T_total must be a whole number of steps")
    st = _Stepper(field, p, u0.nmax, dt)
    buf = st.to_fft(u0.coeffs)
    saved = [u0.coeffs.copy()]
    times = [0.0]
    for i in range(n):
        buf = st.step(buf, i * dt)
        if (i + 1) % save_every == 0 or i + 1 == n:
            saved.append(st.from_fft(buf))
            times.append((i + 1) * dt)
    return DampedTrajectory(np.array(times), np.array(saved), u0.nmax, dt, field, save_every)


def block_contraction(field, p, nmax, block_T, n_blocks, dt):
    """Operator-norm contraction alpha_n = ||M_n||^2 of each block propagator.

    All 2*nmax + 1 basis states are propagated together; alpha_n is the
    squared largest singular value of the block map.
    """
    steps = int(round(block_T / dt))
    if abs(steps * dt - block_T) > 1e-9 * block_T:
        raise ValueError("block length must be a whole number of steps")
    st = _Stepper(field, p, nmax, dt)
    alphas = []
    for b in range(n_blocks):
        buf = st.to_fft(np.eye(2 * nmax + 1, dtype=complex))
        t0 = b * block_T
        for i in range(steps):
            buf = st.step(buf, t0 + i * dt)
        Mb = st.from_fft(buf)
        alphas.append(float(np.linalg.norm(Mb, 2) ** 2))
    return np.array(alphas)


def _one_sided(field, t, x, side, scale):
    return field.value(t + side * 1e-9 * scale, x)


def energy_identity_gap(traj, field, block):
    """|E(start) - E(end) - 2 int int a |u|^2| / E(start) with E = ||u||^2.

    The time integral is composite Simpson, split at the jump times of a
    with one-sided values at each piece's ends.  Needs every step stored.
    """
    if traj.save_every != 1:
        raise ValueError("energy identity needs every step stored")
    t0, t1 = block
    times = traj.times
    dt = traj.dt
    i0, i1 = int(round(t0 / dt)), int(round(t1 / dt))
    M = 2 * traj.nmax + 1
    x = TWO_PI * np.arange(M) / M
    ks = np.arange(-traj.nmax, traj.nmax + 1)
    cuts = [i0] + [int(round(b / dt)) for b in field.breakpoints(times[i0], times[i1])] + [i1]
    cuts = sorted(set(c for c in cuts if i0 <= c <= i1))
    total = 0.0
    scale = max(field.block_T, 1.0)
    for a, b in zip(cuts[:-1], cuts[1:]):
        idx = np.arange(a, b + 1)
        buf = np.zeros((idx.size, M), dtype=complex)
        buf[:, ks % M] = traj.coeffs[idx]
        u2 = np.abs(np.fft.ifft(buf, axis=1) * M) ** 2
        q = np.empty(idx.size)
        for j, i in enumerate(idx):
            side = 1 if j == 0 else (-1 if j == idx.size - 1 else 0)
            av = _one_sided(field, times[i], x, side, scale) if side else field.value(times[i], x)
            q[j] = 2.0 * TWO_PI / M * np.sum(av * u2[j])
        total += simpson(q, x=times[idx]) if idx.size > 2 else 0.5 * (q[0] + q[-1]) * (times[b] - times[a])
    n2 = traj.norms ** 2
    return float(abs(n2[i0] - n2[i1] - total) / n2[i0])


@dataclass
class DecayReport:
    block_norms: np.ndarray
    alphas: np.ndarray
    gamma_fit: float
    energy_identity_gaps: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    operator_alphas: object = None

    def to_dict(self):
        return {"block_norms": list(map(float, self.block_norms)),
                "alphas": list(map(float, self.alphas)),
                "gamma_fit": self.gamma_fit,
                "energy_identity_gaps": list(map(float, self.energy_identity_gaps)),
                "operator_alphas": None if self.operator_alphas is None else list(map(float, self.operator_alphas)),
                "flags": self.flags}

    def csv_rows(self):
        rows = [(0, float(self.block_norms[0]), "")]
        for n, (nrm, a) in enumerate(zip(self.block_norms[1:], self.alphas), start=1):
            rows.append((n, float(nrm), float(a)))
        return ["n", "norm", "alpha"], rows


def decay_rate(traj, block_T, alpha_tol=1e-12, underflow=1e-250):
    """Per-block ratios and the log-linear decay rate of block-end norms."""
    norms = traj.norms
    n_blocks = int(round(traj.times[-1] / block_T))
    if n_blocks < 5:
        raise ValueError("need at least 5 blocks")
    idx = [int(np.argmin(np.abs(traj.times - n * block_T))) for n in range(n_blocks + 1)]
    bn = norms[idx]
    flags = []
    keep = np.flatnonzero(bn > underflow)
    if keep.size < bn.size:
        flags.append(f"norm underflow after block {keep[-1]}")
        bn = bn[: keep[-1] + 1]
    alphas = (bn[1:] / bn[:-1]) ** 2
    for n, a in enumerate(alphas, start=1):
        if a > 1 + alpha_tol:
            flags.append(f"alpha_{n} = {a:.16g} exceeds 1")
    t = block_T * np.arange(bn.size)
    slope = np.polyfit(t, np.log(bn), 1)[0]
    return DecayReport(bn, alphas, float(-slope), [], flags)


def resolvent_ratio(p, z, f, grid_n=None):
    """sup |(P(D) - z)^{-1} f| / ||f||_{L^1}, both on a uniform grid."""
    z = complex(z)
    if abs(z.imag) < 1:
        raise ValueError("|Im z| must be at least 1")
    c = f.coeffs
    if not np.any(c):
        raise ValueError("f must be nonzero")
    n = grid_n or 8 * (2 * f.nmax + 1)
    pk = np.array([float(v) for v in p.values(f.ks)])
    res = c / (pk - z)
    buf = np.zeros(n, dtype=complex)
    buf[f.ks % n] = res
    sup = np.max(np.abs(np.fft.ifft(buf) * n))
    buf[:] = 0
    buf[f.ks % n] = c
    l1 = np.sum(np.abs(np.fft.ifft(buf) * n)) * TWO_PI / n
    return float(sup / l1)


def resolvent_z_grid(p, nmax, tau_max=1e6, per_decade=8, imag=1.0):
    """tau + i*imag over a symmetric log grid plus every resonance p(k)."""
    n_dec = int(np.ceil(np.log10(tau_max)))
    pos = np.logspace(0, np.log10(tau_max), n_dec * per_decade + 1)
    res = [float(p(k)) for k in range(-nmax, nmax + 1) if abs(p(k)) <= tau_max]
    taus = np.unique(np.concatenate([-pos, [0.0], pos, res]))
    return taus + 1j * imag


def resolvent_scan(p, f, z_grid, grid_n=None):
    ratios = np.array([resolvent_ratio(p, z, f, grid_n) for z in z_grid])
    i = int(np.argmax(ratios))
    return {"max_ratio": float(ratios[i]), "argmax_z": [float(z_grid[i].real), float(z_grid[i].imag)],
            "n_points": int(len(z_grid))}


def duhamel_linfty_l2_ratio(f_values, p, T, quad_nodes=8):
    """||int_0^t S(t-s) f(s) ds||_{L^inf_x L^2_t} / ||f||_{L^1_x L^2_t}.

    f_values has shape (n_t, n_x): f on uniform time cells (constant per
    cell) at grid points x_j = 2pi j / n_x.  The Duhamel integral is exact
    per mode; the time L^2 norm uses Gauss-Legendre nodes inside cells and
    the sup is over the x grid.
    """
    f = np.asarray(f_values, dtype=complex)
    if not np.any(f):
        raise ValueError("f must be nonzero")
    n_t, n_x = f.shape
    nm = (n_x - 1) // 2
    ks = np.arange(-nm, nm + 1)
    fh = (np.fft.fft(f, axis=1) / n_x)[:, ks % n_x]
    w = np.array([float(v) for v in p.values(ks)])
    h = T / n_t
    xg, wg = np.polynomial.legendre.leggauss(quad_nodes)
    s = 0.5 * h * (xg + 1.0)

    def phi1(om, tau):
        # (exp(i om tau) - 1)/(i om), with the om = 0 limit tau
        z = om * tau
        out = np.where(np.abs(z) > 1e-8, (np.exp(1j * z) - 1.0) / (1j * np.where(om == 0, 1, om)),
                       tau * (1 + 0.5j * z))
        return out

    Q = np.zeros(n_x)
    state = np.zeros(ks.size, dtype=complex)
    for j in range(n_t):
        # values inside the cell at the Gauss nodes
        vals = np.exp(1j * np.outer(s, w)) * state[None, :] + phi1(w[None, :], s[:, None]) * fh[j][None, :]
        buf = np.zeros((quad_nodes, n_x), dtype=complex)
        buf[:, ks % n_x] = vals
        grid = np.fft.ifft(buf, axis=1) * n_x
        Q += 0.5 * h * np.sum(wg[:, None] * np.abs(grid) ** 2, axis=0)
        state = np.exp(1j * w * h) * state + phi1(w, h) * fh[j]
    lhs = np.sqrt(np.max(Q))
    rhs = np.sum(np.sqrt(np.sum(np.abs(f) ** 2, axis=0) * h)) * TWO_PI / n_x
    return float(lhs / rhs)


def uniform_observability(fields, p, nmax, block=0, quad_n=64):
    """Smallest lambda_min of the weighted Gram over a sample of fields.

    Each field is restricted to one block [nT, (n+1)T) and used as the
    weight of weighted_observability with frequencies |k| <= nmax.
    """
    from .observability import FrequencySet
    freqs = FrequencySet.full(p, nmax)
    out = []
    for fld in fields:
        T = fld.block_T
        tm = block * T + (np.arange(quad_n) + 0.5) * T / quad_n
        xm = (np.arange(quad_n) + 0.5) * TWO_PI / quad_n
        A = np.array([fld.value(t, xm) for t in tm])
        rep = weighted_observability(A, freqs, T=T)
        out.append(rep.lambda_min)
    return {"min_lambda": float(min(out)), "lambdas": out}
