"""Finite unions of intervals and rectangles with closed-form Fourier data.

Geometric objects are ordered (time, space): a SpaceTimeRegion is a union
of slabs [t0, t1) x (space set), and a translation is h = (h_t, h_x).
Frequency pairs are ordered (space, time), matching lambda_k = (k, p(k)).

The indicator transform of a region in the cell [0, T) x [0, 2pi) is

    1hat(a_x, a_t) = 1/(2pi T) * int int 1_G exp(-i(a_x x + a_t (2pi/T) t)) dx dt

so that sum |1hat|^2 = |G| / (2pi T).
"""
import ast
from dataclasses import dataclass
import operator
import re

import numpy as np

TWO_PI = 2.0 * np.pi
_SNAP = 1e-13


def interval_integral(intervals, omega):
    """int over the union of exp(i omega s) ds, vectorized over omega.

    Uses exp(i omega m) * len * sinc(omega len / 2) around each midpoint,
    which is exact in closed form and has no cancellation near omega = 0.
    """
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape, dtype=complex)
    for a, b in intervals:
        length = b - a
        mid = 0.5 * (a + b)
        out += np.exp(1j * omega * mid) * length * np.sinc(omega * length / TWO_PI)
    return out


# ---------------------------------------------------------------- parsing

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return np.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval_node(node.operand))
    raise ValueError("unsupported token")


def parse_endpoint(token):
    """Evaluate '3*pi/2', '2pi', '1.5', '-pi/4' and similar."""
    text = token.strip()
    if not text:
        raise ValueError("empty endpoint")
    text = re.sub(r"(\d)\s*pi", r"\1*pi", text)
    try:
        tree = ast.parse(text, mode="eval")
        return float(_eval_node(tree))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad endpoint {token!r}") from exc


def parse_intervals(text):
    """Parse '[0, pi), [4, 5)' into a list of (a, b) float pairs."""
    text = text.strip()
    if not text:
        raise ValueError("empty interval list")
    pairs = []
    pos = 0
    pattern = re.compile(r"\s*\[([^\[\],)]*),([^\[\],)]*)\)\s*(,|$)")
    while pos < len(text):
        m = pattern.match(text, pos)
        if not m:
            raise ValueError(f"malformed interval near {text[pos:]!r}; expected '[a, b)'")
        a, b = parse_endpoint(m.group(1)), parse_endpoint(m.group(2))
        if not b > a:
            raise ValueError(f"interval [{m.group(1).strip()}, {m.group(2).strip()}) is empty")
        pairs.append((a, b))
        pos = m.end()
        if m.group(3) == "" and pos < len(text):
            raise ValueError(f"trailing text {text[pos:]!r}")
    return pairs


# ---------------------------------------------------------------- 1-D sets

def _normalize(pairs, period):
    """Wrap into [0, period), merge overlaps and adjacency."""
    pieces = []
    for a, b in pairs:
        a, b = float(a), float(b)
        if b <= a:
            continue
        if b - a >= period * (1 - _SNAP):
            pieces.append((0.0, period))
            continue
        a0 = a % period
        if a0 > period * (1 - _SNAP):
            a0 = 0.0
        b0 = a0 + (b - a)
        if abs(b0 - period) <= _SNAP * period:
            b0 = period
        if b0 > period:
            pieces.append((a0, period))
            pieces.append((0.0, b0 - period))
        else:
            pieces.append((a0, b0))
    pieces.sort()
    merged = []
    for a, b in pieces:
        if b - a <= _SNAP * period:
            continue
        if merged and a <= merged[-1][1] + _SNAP * period:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return tuple(merged)


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted disjoint half-open intervals inside [0, period)."""

    intervals: tuple
    period: float = TWO_PI

    def __post_init__(self):
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "intervals", _normalize(self.intervals, self.period))

    @classmethod
    def parse(cls, text, period=TWO_PI):
        return cls(tuple(parse_intervals(text)), period)

    @classmethod
    def full(cls, period=TWO_PI):
        return cls(((0.0, period),), period)

    @classmethod
    def empty(cls, period=TWO_PI):
        return cls((), period)

    @property
    def measure(self):
        return float(sum(b - a for a, b in self.intervals))

    @property
    def n_intervals(self):
        return len(self.intervals)

    @property
    def is_full(self):
        return self.intervals == ((0.0, self.period),)

    def contains(self, x):
        """Vectorized membership of points reduced into the cell."""
        x = np.mod(np.asarray(x, dtype=float), self.period)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (x >= a) & (x < b)
        return out

    def fourier(self, alpha):
        """(1/period) int_set exp(-i (2pi/period) alpha s) ds."""
        omega = -TWO_PI * np.asarray(alpha, dtype=float) / self.period
        return interval_integral(self.intervals, omega) / self.period

    def integral(self, omega):
        """int_set exp(i omega s) ds for real omega."""
        return interval_integral(self.intervals, omega)

    def translate(self, h):
        return IntervalUnion(tuple((a + h, b + h) for a, b in self.intervals), self.period)

    def _check(self, other):
        if abs(self.period - other.period) > _SNAP * self.period:
            raise ValueError("period mismatch")

    def union(self, other):
        self._check(other)
        return IntervalUnion(self.intervals + other.intervals, self.period)

    def intersect(self, other):
        self._check(other)
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if hi > lo:
                    out.append((lo, hi))
        return IntervalUnion(tuple(out), self.period)

    def complement(self):
        out, last = [], 0.0
        for a, b in self.intervals:
            if a > last:
                out.append((last, a))
            last = b
        if last < self.period:
            out.append((last, self.period))
        return IntervalUnion(tuple(out), self.period)

    def set_difference(self, other):
        return self.intersect(other.complement())

    def clip(self, lo, hi):
        """Intervals of the set intersected with [lo, hi), without wrapping."""
        out = []
        for a, b in self.intervals:
            x, y = max(a, lo), min(b, hi)
            if y > x:
                out.append((x, y))
        return out


# ---------------------------------------------------------------- 2-D sets

def _canonical_slabs(slabs, t_period):
    """Split at every time breakpoint, union overlapping space sets, re-merge."""
    space_period = None
    pieces = []
    for t0, t1, space in slabs:
        space_period = space.period
        if not space.intervals:
            continue
        for a, b in _normalize([(t0, t1)], t_period):
            pieces.append((a, b, space))
    if space_period is None:
        space_period = TWO_PI
    cuts = sorted({v for a, b, _ in pieces for v in (a, b)})
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        acc = IntervalUnion((), space_period)
        for a, b, s in pieces:
            if a <= lo and b >= hi:
                acc = acc.union(s)
        if not acc.intervals:
            continue
        if out and out[-1][1] == lo and out[-1][2] == acc:
            out[-1] = (out[-1][0], hi, acc)
        else:
            out.append((lo, hi, acc))
    return tuple(out)


@dataclass(frozen=True)
class SpaceTimeRegion:
    """Disjoint slabs [t0, t1) x space-set in the cell [0, T) x [0, 2pi)."""

    slabs: tuple
    t_period: float = TWO_PI
    x_period: float = TWO_PI

    def __post_init__(self):
        object.__setattr__(self, "t_period", float(self.t_period))
        object.__setattr__(self, "slabs", _canonical_slabs(self.slabs, self.t_period))

    @classmethod
    def product(cls, time_set, space_set, t_period=None):
        """E x F for a time IntervalUnion E and space IntervalUnion F."""
        tp = time_set.period if t_period is None else t_period
        slabs = tuple((a, b, space_set) for a, b in time_set.intervals)
        return cls(slabs, tp, space_set.period)

    @classmethod
    def rectangle(cls, t_interval, x_interval, t_period=TWO_PI):
        space = IntervalUnion((tuple(x_interval),))
        return cls(((t_interval[0], t_interval[1], space),), t_period)

    @classmethod
    def from_rectangles(cls, rects, t_period=TWO_PI):
        """Union of ((t0, t1), (x0, x1)) rectangles, overlaps allowed."""
        slabs = tuple((t[0], t[1], IntervalUnion((tuple(x),))) for t, x in rects)
        return cls(slabs, t_period)

    @classmethod
    def full(cls, t_period=TWO_PI):
        return cls(((0.0, t_period, IntervalUnion.full()),), t_period)

    @property
    def measure(self):
        return float(sum((t1 - t0) * s.measure for t0, t1, s in self.slabs))

    @property
    def rectangles(self):
        """Disjoint rectangles as (t0, t1, x0, x1) tuples."""
        return [(t0, t1, a, b) for t0, t1, s in self.slabs for a, b in s.intervals]

    def contains(self, t, x):
        t = np.mod(np.asarray(t, dtype=float), self.t_period)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(t, x).shape, dtype=bool)
        for t0, t1, s in self.slabs:
            out |= (t >= t0) & (t < t1) & s.contains(x)
        return out

    def _check(self, other):
        if abs(self.t_period - other.t_period) > _SNAP * self.t_period:
            raise ValueError("period mismatch")

    def _combine(self, other, op):
        self._check(other)
        cuts = sorted({v for t0, t1, _ in self.slabs + other.slabs for v in (t0, t1)})
        empty = IntervalUnion((), self.x_period)

        def space_at(region, lo, hi):
            for t0, t1, s in region.slabs:
                if t0 <= lo and t1 >= hi:
                    return s
            return empty

        slabs = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            s = op(space_at(self, lo, hi), space_at(other, lo, hi))
            if s.intervals:
                slabs.append((lo, hi, s))
        return SpaceTimeRegion(tuple(slabs), self.t_period, self.x_period)

    def intersect(self, other):
        return self._combine(other, IntervalUnion.intersect)

    def union(self, other):
        return self._combine(other, IntervalUnion.union)

    def set_difference(self, other):
        return self._combine(other, IntervalUnion.set_difference)

    def translate(self, h):
        """Shift by h = (h_t, h_x) with wrap-around in both directions."""
        ht, hx = h
        slabs = tuple((t0 + ht, t1 + ht, s.translate(hx)) for t0, t1, s in self.slabs)
        return SpaceTimeRegion(slabs, self.t_period, self.x_period)

    def _factors(self, ax, at):
        """Per-slab space and time transforms, unnormalized."""
        ax = np.asarray(ax, dtype=float)
        at = np.asarray(at, dtype=float)
        wt = -TWO_PI * at / self.t_period
        fx = np.stack([s.integral(-ax) for _, _, s in self.slabs], axis=-1)
        ft = np.stack([interval_integral([(t0, t1)], wt) for t0, t1, _ in self.slabs], axis=-1)
        return fx, ft

    def fourier(self, ax, at):
        """Normalized indicator transform at (space, time) frequency pairs."""
        if not self.slabs:
            return np.zeros(np.broadcast(np.asarray(ax), np.asarray(at)).shape, dtype=complex)
        fx, ft = self._factors(ax, at)
        return np.sum(fx * ft, axis=-1) / (TWO_PI * self.t_period)

    def raw_integral(self, wx, wt):
        """int int_G exp(i (wx x + wt t)) dx dt for real angular frequencies."""
        wx = np.asarray(wx, dtype=float)
        wt = np.asarray(wt, dtype=float)
        out = np.zeros(np.broadcast(wx, wt).shape, dtype=complex)
        for t0, t1, s in self.slabs:
            out += s.integral(wx) * interval_integral([(t0, t1)], wt)
        return out

    def __str__(self):
        parts = []
        for t0, t1, s in self.slabs:
            sp = " u ".join(f"[{a:.6g},{b:.6g})" for a, b in s.intervals)
            parts.append(f"[{t0:.6g},{t1:.6g})x({sp})")
        return " u ".join(parts) if parts else "empty"


def measure(r):
    return r.measure


def indicator_fourier(r, alpha):
    """Normalized indicator transform; alpha is an int for 1-D sets and
    a (space, time) pair for space-time regions."""
    if isinstance(r, IntervalUnion):
        return complex(r.fourier(alpha))
    ax, at = alpha
    return complex(r.fourier(ax, at))


def translate(r, h):
    return r.translate(h)


def intersect(r1, r2):
    return r1.intersect(r2)


def set_difference(r1, r2):
    return r1.set_difference(r2)


def plancherel_total(G):
    return G.measure / (TWO_PI * G.t_period)


def partial_energy(G, N, chunk=256):
    """sum of |1hat_G(alpha)|^2 over the Euclidean disc |alpha| <= N."""
    if not G.slabs:
        return 0.0
    a_t = np.arange(-N, N + 1, dtype=float)
    ft = np.stack([interval_integral([(t0, t1)], -TWO_PI * a_t / G.t_period)
                   for t0, t1, _ in G.slabs], axis=0)
    norm = TWO_PI * G.t_period
    total = 0.0
    for start in range(-N, N + 1, chunk):
        a_x = np.arange(start, min(start + chunk, N + 1), dtype=float)
        fx = np.stack([s.integral(-a_x) for _, _, s in G.slabs], axis=1)
        vals = (fx @ ft) / norm
        disc = a_x[:, None] ** 2 + a_t[None, :] ** 2 <= N * N
        total += float(np.sum(np.abs(vals[disc]) ** 2))
    return total


def tail_energy(G, N):
    """sum_{|alpha| > N} |1hat_G(alpha)|^2 via Plancherel minus the disc."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    return max(plancherel_total(G) - partial_energy(G, N), 0.0)
