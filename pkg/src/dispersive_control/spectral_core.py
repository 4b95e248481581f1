"""Truncated Fourier states on the torus and the free dispersive flow.

Coefficients follow c_k = (1/2pi) * int u(x) exp(-ikx) dx, so that
||u||^2 = 2pi * sum |c_k|^2.  A state stores c_k for |k| <= nmax in the
order k = -nmax, ..., nmax.
"""
from dataclasses import dataclass
from functools import lru_cache
import re

import mpmath
import numpy as np

TWO_PI = 2.0 * np.pi


class AliasingError(ValueError):
    """Grid too coarse for the requested band."""


@dataclass(frozen=True, eq=False)
class FourierState:
    """Complex coefficients c_k for |k| <= nmax, immutable.

    Reads outside the stored band return exact zero.  With zero_mean=True
    the k=0 coefficient must be exactly zero.
    """

    coeffs: np.ndarray
    nmax: int
    zero_mean: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size != 2 * self.nmax + 1:
            raise ValueError(f"expected {2 * self.nmax + 1} coefficients, got shape {c.shape}")
        if self.nmax < 0:
            raise ValueError("nmax must be nonnegative")
        if self.zero_mean and c[self.nmax] != 0:
            raise ValueError("zero-mean state has a nonzero k=0 coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, nmax, zero_mean=False):
        return cls(np.zeros(2 * nmax + 1, dtype=complex), nmax, zero_mean)

    @classmethod
    def from_modes(cls, modes, nmax, zero_mean=False):
        """Build from a {k: value} mapping."""
        c = np.zeros(2 * nmax + 1, dtype=complex)
        for k, v in modes.items():
            if abs(k) > nmax:
                raise ValueError(f"mode {k} outside |k| <= {nmax}")
            c[k + nmax] += v
        return cls(c, nmax, zero_mean)

    @classmethod
    def from_function(cls, func, nmax, n_points=None, zero_mean=False):
        """Sample a real or complex function on a grid and project."""
        n = n_points or 4 * nmax + 4
        x = TWO_PI * np.arange(n) / n
        s = from_grid(np.asarray(func(x), dtype=complex), nmax)
        if zero_mean:
            s = s.without_mean()
        return s

    @property
    def ks(self):
        return np.arange(-self.nmax, self.nmax + 1)

    def coeff(self, k):
        if abs(k) > self.nmax:
            return 0j
        return complex(self.coeffs[k + self.nmax])

    @property
    def mean(self):
        """Spatial average (1/2pi) int u dx, i.e. the k=0 coefficient."""
        return complex(self.coeffs[self.nmax])

    def without_mean(self):
        c = self.coeffs.copy()
        c[self.nmax] = 0.0
        return FourierState(c, self.nmax, zero_mean=True)

    def with_nmax(self, nmax):
        """Zero-pad or truncate to a new band."""
        c = np.zeros(2 * nmax + 1, dtype=complex)
        m = min(nmax, self.nmax)
        c[nmax - m:nmax + m + 1] = self.coeffs[self.nmax - m:self.nmax + m + 1]
        return FourierState(c, nmax, self.zero_mean)

    def replace(self, coeffs):
        return FourierState(coeffs, self.nmax, self.zero_mean)

    def __add__(self, other):
        n = max(self.nmax, other.nmax)
        a, b = self.with_nmax(n), other.with_nmax(n)
        return FourierState(a.coeffs + b.coeffs, n, self.zero_mean and other.zero_mean)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, factor):
        return FourierState(self.coeffs * factor, self.nmax, self.zero_mean)

    def __repr__(self):
        return f"FourierState(nmax={self.nmax}, zero_mean={self.zero_mean}, norm={l2_norm(self):.6g})"


_TERM = re.compile(r"^([+-]?\d*)\*?(k(?:\^(\d+))?)?$")


@dataclass(frozen=True)
class DispersionSymbol:
    """Monic integer polynomial p, coefficients from highest degree down.

    DispersionSymbol((1, 0, 0, 0)) is p(k) = k^3, the KdV symbol for
    u_t + u_xxx = 0 written as u_t = i p(D) u.
    """

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coefficients)
        if any(int(c) != c for c in self.coefficients):
            raise ValueError("coefficients must be integers")
        if len(coeffs) < 3:
            raise ValueError("degree must be at least 2")
        if coeffs[0] != 1:
            raise ValueError("leading coefficient must be 1")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def kdv(cls):
        return cls((1, 0, 0, 0))

    @classmethod
    def parse(cls, text):
        """Parse '1,0,0,0' or 'k^4 + k^2' style input."""
        text = text.strip()
        if "k" not in text:
            return cls(tuple(int(t) for t in text.split(",")))
        terms = {}
        for tok in re.findall(r"[+-]?[^+-]+", text.replace(" ", "")):
            m = _TERM.match(tok)
            if not m:
                raise ValueError(f"cannot parse term {tok!r}")
            coef, kpart, power = m.groups()
            c = int(coef + "1") if coef in ("", "+", "-") else int(coef)
            if kpart is None:
                if coef in ("", "+", "-"):
                    raise ValueError(f"cannot parse term {tok!r}")
                deg = 0
            else:
                deg = int(power) if power else 1
            terms[deg] = terms.get(deg, 0) + c
        d = max(terms)
        return cls(tuple(terms.get(j, 0) for j in range(d, -1, -1)))

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def __call__(self, k):
        """Exact integer value at an integer k."""
        k = int(k)
        acc = 0
        for c in self.coefficients:
            acc = acc * k + c
        return acc

    def values(self, ks):
        """Exact values as a list of Python ints."""
        return [self(k) for k in ks]

    def as_float(self, ks):
        return np.array([float(v) for v in self.values(ks)])

    def as_int_array(self, ks):
        """int64 values; raises if any value would overflow."""
        vals = self.values(ks)
        if vals and max(abs(v) for v in vals) >= 2**62:
            raise OverflowError("symbol values exceed int64 range")
        return np.array(vals, dtype=np.int64)

    def __str__(self):
        d = self.degree
        parts = []
        for j, c in enumerate(self.coefficients):
            power = d - j
            if c == 0:
                continue
            mono = "" if power == 0 else ("k" if power == 1 else f"k^{power}")
            mag = abs(c)
            body = (str(mag) if mono == "" or mag != 1 else "") + mono
            parts.append(("-" if c < 0 else "+") + body)
        s = "".join(parts)
        return s[1:] if s.startswith("+") else s


@lru_cache(maxsize=65536)
def _reduced_phase(omega, t):
    # omega * t mod 2pi evaluated with enough bits that the integer part
    # of a large omega does not eat the fractional digits
    bits = 80 + max(int(abs(omega)).bit_length(), 1) + 64
    with mpmath.workprec(bits):
        x = mpmath.mpf(omega) * mpmath.mpf(t)
        return float(mpmath.fmod(x, 2 * mpmath.pi))


def phase_factors(omegas, t):
    """exp(i * omega * t) with the angle reduced mod 2pi in extended precision.

    omegas may be Python ints (exact symbol values) or floats.
    """
    t = float(t)
    if t == 0.0:
        return np.ones(len(omegas), dtype=complex)
    angles = np.array([_reduced_phase(w if isinstance(w, int) else float(w), t) for w in omegas])
    return np.exp(1j * angles)


def symbol_frequencies(p, ks, drift=0.0):
    """Temporal frequencies p(k) + drift*k; exact ints when drift is zero."""
    if drift == 0.0:
        return p.values(ks)
    return [float(p(k)) + float(drift) * int(k) for k in ks]


def evolve_free(state, p, t, drift=0.0):
    """Free flow u_t = i p(D) u (plus drift*d/dx): c_k -> c_k exp(i omega_k t)."""
    ph = phase_factors(symbol_frequencies(p, state.ks, drift), t)
    return state.replace(state.coeffs * ph)


def l2_norm(state):
    """||u||_{L^2(T)} = sqrt(2pi sum |c_k|^2)."""
    return float(np.sqrt(TWO_PI * np.sum(np.abs(state.coeffs) ** 2)))


def inner(a, b):
    """L^2 inner product <a, b> = 2pi sum a_k conj(b_k)."""
    n = max(a.nmax, b.nmax)
    return complex(TWO_PI * np.vdot(b.with_nmax(n).coeffs, a.with_nmax(n).coeffs))


def to_grid(state, n_points):
    """Values u(x_j), x_j = 2pi j / n_points."""
    if n_points < 2 * state.nmax + 1:
        raise AliasingError(f"{n_points} points cannot resolve |k| <= {state.nmax}")
    buf = np.zeros(n_points, dtype=complex)
    buf[state.ks % n_points] = state.coeffs
    return np.fft.ifft(buf) * n_points


def from_grid(values, nmax):
    """Coefficients |k| <= nmax from samples at x_j = 2pi j / n."""
    values = np.asarray(values)
    n = values.shape[-1]
    if n < 2 * nmax + 1:
        raise AliasingError(f"{n} points cannot resolve |k| <= {nmax}")
    c = np.fft.fft(values) / n
    return FourierState(c[np.arange(-nmax, nmax + 1) % n], nmax)


def grid_points(n_points):
    return TWO_PI * np.arange(n_points) / n_points
