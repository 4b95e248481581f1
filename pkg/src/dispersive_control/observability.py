"""Exponential-sum diagnostics and Gram observability constants.

A frequency set is a finite collection of lattice points (k, p(k)).  For a
region G the Gram matrix has entries

    gram[i, j] = int int_G exp(i (lambda_i - lambda_j) . (x, t)) dx dt,

so the observed energy int int_G |sum_k a_k exp(i(kx + p(k)t))|^2 is the
quadratic form sum_ij a_i gram[i, j] conj(a_j).  The observability
constant is normalization / lambda_min, with normalization = 1 for the
coefficient convention sum |a_k|^2 <= C * observed energy.
"""
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import eigsh

from .region import SpaceTimeRegion, TWO_PI, interval_integral, tail_energy
from .spectral_core import AliasingError, DispersionSymbol, FourierState

DENSE_LIMIT = 513
EIG_RTOL = 1e-12


@dataclass(frozen=True)
class FrequencySet:
    """Distinct lattice points (k, omega), one per spatial frequency k."""

    points: tuple
    p: DispersionSymbol
    band: str = ""

    def __post_init__(self):
        pts = tuple((int(k), int(w)) for k, w in self.points)
        ks = [k for k, _ in pts]
        if len(set(ks)) != len(ks):
            raise ValueError("each spatial frequency may appear at most once")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_ks(cls, p, ks, band=""):
        return cls(tuple((int(k), p(k)) for k in ks), p, band)

    @classmethod
    def full(cls, p, nmax):
        return cls.from_ks(p, range(-nmax, nmax + 1), f"|k|<={nmax}")

    @classmethod
    def band_between(cls, p, n_low, nmax):
        """Points with n_low < |k| <= nmax."""
        ks = [k for k in range(-nmax, nmax + 1) if abs(k) > n_low]
        return cls.from_ks(p, ks, f"{n_low}<|k|<={nmax}")

    def with_point(self, k0):
        if any(k == k0 for k, _ in self.points):
            raise ValueError(f"point ({k0}, {self.p(k0)}) already in the set")
        return FrequencySet(self.points + ((int(k0), self.p(k0)),), self.p, self.band + f"+{{{k0}}}")

    @property
    def ks(self):
        return np.array([k for k, _ in self.points], dtype=np.int64)

    @property
    def omegas(self):
        return np.array([w for _, w in self.points], dtype=float)

    def __len__(self):
        return len(self.points)

    def describe(self):
        return {"band": self.band, "symbol": str(self.p), "size": len(self.points)}


@dataclass
class GramReport:
    gram: np.ndarray
    lambda_min: float
    lambda_max: float
    observability_constant: object
    normalization: float = 1.0
    N_threshold: object = None
    theta: object = None
    diagnostics: dict = field(default_factory=dict)
    freq_set: dict = field(default_factory=dict)
    region: str = ""

    @property
    def available(self):
        return self.observability_constant is not None

    def to_dict(self):
        return {
            "freq_set": self.freq_set,
            "region": self.region,
            "normalization": self.normalization,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "constant": self.observability_constant,
            "N": self.N_threshold,
            "theta": self.theta,
            "tail_energy": self.diagnostics.get("tail_energy"),
            "condition_number": self.diagnostics.get("condition_number"),
        }


def hermitian_extremes(M):
    """(lambda_min, lambda_max) of a Hermitian matrix."""
    n = M.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if n <= DENSE_LIMIT:
        ev = np.linalg.eigvalsh(M)
        return float(ev[0]), float(ev[-1])
    lo = eigsh(M, k=1, which="SA", tol=EIG_RTOL, return_eigenvectors=False)
    hi = eigsh(M, k=1, which="LA", tol=EIG_RTOL, return_eigenvectors=False)
    return float(lo[0]), float(hi[0])


def symmetrize(M):
    """Mirror the upper triangle so the matrix is exactly Hermitian."""
    U = np.triu(M, 1)
    return U + U.conj().T + np.diag(np.real(np.diag(M)))


def make_report(gram, normalization=1.0, **kw):
    gram = symmetrize(gram)
    lo, hi = hermitian_extremes(gram)
    ok = hi > 0 and lo > EIG_RTOL * hi
    diag = kw.pop("diagnostics", {})
    diag.setdefault("condition_number", hi / lo if ok else None)
    return GramReport(gram, lo, hi, normalization / lo if ok else None,
                      normalization, diagnostics=diag, **kw)


def raw_gram(freqs, G):
    """Closed-form Gram entries on a space-time region."""
    ks, ws = freqs.ks.astype(float), freqs.omegas
    return G.raw_integral(ks[:, None] - ks[None, :], ws[:, None] - ws[None, :])


def frequency_set_theta(freqs):
    """Largest number of pairs in the set sharing one nonzero difference."""
    pts = freqs.points
    diffs = Counter((a[0] - b[0], a[1] - b[1]) for a in pts for b in pts if a != b)
    return max(diffs.values()) if diffs else 0


def min_pair_distance(freqs):
    pts = np.array(freqs.points, dtype=float)
    if len(pts) < 2:
        return np.inf
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def gram_matrix(freqs, G, N_threshold=None):
    """GramReport for the region G; theta is the set's coincidence count."""
    gram = raw_gram(freqs, G)
    diag = {"region_measure": G.measure, "t_period": G.t_period}
    if N_threshold is not None:
        diag["tail_energy"] = tail_energy(G, N_threshold)
    return make_report(gram, 1.0, N_threshold=N_threshold, theta=frequency_set_theta(freqs),
                       diagnostics=diag, freq_set=freqs.describe(), region=str(G))


# ------------------------------------------------------------- lattice counts

def _symbol_array(p, ks):
    kmax = max(abs(int(ks.min())), abs(int(ks.max())), 1)
    bound = sum(abs(c) for c in p.coefficients) * kmax ** p.degree
    if bound * 4 < 2**62:
        k = ks.astype(np.int64)
        acc = np.zeros_like(k)
        for c in p.coefficients:
            acc = acc * k + c
        return acc
    return np.array(p.values(ks), dtype=object)


def count_coincidences(p, alpha, k_box):
    """Number of (k1, k2) with |k1|, |k2| <= k_box and lambda_k1 - lambda_k2 = alpha."""
    if k_box < 1:
        raise ValueError("k_box must be at least 1")
    a1, a2 = int(alpha[0]), int(alpha[1])
    k1 = np.arange(-k_box, k_box + 1)
    k2 = k1 - a1
    keep = np.abs(k2) <= k_box
    k1, k2 = k1[keep], k2[keep]
    if k1.size == 0:
        return 0
    diff = _symbol_array(p, k1) - _symbol_array(p, k2)
    return int(np.sum(diff == a2))


def theta_scan(p, k_box, n_draws, rng):
    """Max coincidence count over random nonzero alpha.

    Half the draws are differences of actual lattice points, where
    coincidences live; the rest are uniform in the difference box.
    """
    ks = np.arange(-k_box, k_box + 1)
    pv = _symbol_array(p, ks)
    w_lo, w_hi = int(np.min(pv)), int(np.max(pv))
    counts = []
    alphas = []
    while len(alphas) < n_draws:
        if len(alphas) % 2 == 0:
            i, j = rng.integers(0, ks.size, size=2)
            a = (int(ks[i] - ks[j]), int(pv[i] - pv[j]))
        else:
            a = (int(rng.integers(-2 * k_box, 2 * k_box + 1)),
                 int(rng.integers(w_lo - w_hi, w_hi - w_lo + 1)))
        if a == (0, 0):
            continue
        alphas.append(a)
    for a in alphas:
        counts.append(count_coincidences(p, a, k_box))
    return {"max": max(counts), "counts": counts, "alphas": alphas}


# ------------------------------------------------------------- Strichartz

def _as_modes(coeffs):
    if isinstance(coeffs, FourierState):
        return {int(k): complex(c) for k, c in zip(coeffs.ks, coeffs.coeffs) if c != 0}
    return {int(k): complex(v) for k, v in dict(coeffs).items() if v != 0}


def lattice_autocorrelation(coeffs, p):
    """c_alpha with |f|^2 = sum_alpha c_alpha exp(i alpha.(x,t))."""
    modes = _as_modes(coeffs)
    c = {}
    for k, a in modes.items():
        for l, b in modes.items():
            key = (k - l, p(k) - p(l))
            c[key] = c.get(key, 0j) + a * np.conj(b)
    return c


def _l4_fourth_power(coeffs, p, grid_n=None, method="lattice"):
    modes = _as_modes(coeffs)
    if not modes:
        raise ValueError("zero coefficients")
    if method == "lattice":
        c = lattice_autocorrelation(modes, p)
        return 4 * np.pi ** 2 * float(sum(abs(v) ** 2 for v in c.values()))
    nmax = max(abs(k) for k in modes)
    nx = grid_n if grid_n is not None else 4 * nmax + 1
    if nx < 4 * nmax + 1:
        raise AliasingError(f"grid_n={nx} < 4*N+1={4 * nmax + 1}")
    w = {k: p(k) for k in modes}
    span = max(w.values()) - min(w.values())
    nt = 2 * span + 1
    buf = np.zeros((nx, nt), dtype=complex)
    for k, a in modes.items():
        buf[k % nx, w[k] % nt] += a
    f = np.fft.ifft2(buf) * (nx * nt)
    return float(np.sum(np.abs(f) ** 4) * (TWO_PI ** 2) / (nx * nt))


def strichartz_l4_ratio(coeffs, p, grid_n=None, method="lattice"):
    """||f||_{L^4(T^2)} / (sum |a_k|^2)^{1/2} for f = sum a_k exp(i(kx + p(k)t)).

    method='lattice' is exact; method='grid' evaluates on a tensor grid
    fine enough that |f|^4 is integrated exactly.
    """
    modes = _as_modes(coeffs)
    s = sum(abs(a) ** 2 for a in modes.values())
    return _l4_fourth_power(modes, p, grid_n, method) ** 0.25 / np.sqrt(s)


def l4_bound_report(coeffs, p):
    """||f||_{L^4}^2 against the (2pi + theta^{1/2}) sum|a|^2 bound.

    Also reports the bound 2pi (1 + theta)^{1/2} sum|a|^2, which follows
    from int int |f|^4 = 4pi^2 sum_alpha |c_alpha|^2 and Cauchy-Schwarz.
    """
    modes = _as_modes(coeffs)
    s = sum(abs(a) ** 2 for a in modes.values())
    norm_sq = np.sqrt(_l4_fourth_power(modes, p))
    theta = p.degree - 1
    stated = (TWO_PI + np.sqrt(theta)) * s
    corrected = TWO_PI * np.sqrt(1 + theta) * s
    return {"l4_norm_sq": norm_sq, "coeff_energy": s, "theta": theta,
            "bound": stated, "slack": stated - norm_sq,
            "corrected_bound": corrected, "corrected_slack": corrected - norm_sq}


def _pair_time_integrals(w, T):
    dw = w[:, None] - w[None, :]
    return interval_integral([(0.0, T)], dw)


def linfty_l2_ratio(coeffs, p, T, grid_n=256):
    """sup_x (int_0^T |u(t,x)|^2 dt)^{1/2} / ||u0||_{L^2}, sup over a grid.

    The time integral is exact: sum_{k,l} b_k conj(b_l) int_0^T exp(i(p(k)-p(l))t) dt.
    """
    modes = _as_modes(coeffs)
    if not modes:
        raise ValueError("zero state has no defined ratio")
    ks = np.array(sorted(modes))
    a = np.array([modes[k] for k in ks])
    w = p.as_float(ks)
    W = _pair_time_integrals(w, T)
    x = TWO_PI * np.arange(grid_n) / grid_n
    B = np.exp(1j * np.outer(x, ks)) * a[None, :]
    Q = np.real(np.sum((B @ W) * np.conj(B), axis=1))
    norm0 = np.sqrt(TWO_PI * np.sum(np.abs(a) ** 2))
    return float(np.sqrt(max(Q.max(), 0.0)) / norm0)


def linfty_l2_proof_bound(coeffs, p, T):
    """Ratio bound from d*T*sum|a|^2 + sum_{p(k)!=p(l)} 2|a_k||a_l|/|p(k)-p(l)|."""
    modes = _as_modes(coeffs)
    ks = sorted(modes)
    s = sum(abs(modes[k]) ** 2 for k in ks)
    total = p.degree * T * s
    for k in ks:
        for l in ks:
            dp = p(k) - p(l)
            if dp != 0:
                total += 2 * abs(modes[k]) * abs(modes[l]) / abs(dp)
    return float(np.sqrt(total / (TWO_PI * s)))


# ------------------------------------------------------------- thresholds

def threshold_condition(G, p, N):
    """(lhs, rhs, holds) for 2pi T sqrt((d-1) tail(N)) < |G|/2.

    This is the tail rule written in raw measure units; dividing both sides
    by 2pi T gives the normalized-indicator form.
    """
    tail = tail_energy(G, N)
    lhs = TWO_PI * G.t_period * np.sqrt((p.degree - 1) * tail)
    rhs = G.measure / 2
    return float(lhs), float(rhs), bool(lhs < rhs)


def highfreq_threshold(G, p, cap=4096):
    """Smallest N satisfying the tail rule, by doubling then bisection."""
    if G.measure <= 0:
        raise ValueError("region must have positive measure")
    if threshold_condition(G, p, 0)[2]:
        return 0
    lo, hi = 0, 1
    while not threshold_condition(G, p, hi)[2]:
        lo, hi = hi, 2 * hi
        if hi > cap:
            raise RuntimeError(f"threshold search exceeded cap {cap}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if threshold_condition(G, p, mid)[2]:
            hi = mid
        else:
            lo = mid
    return hi


def band_certificate(G, p, N, nmax):
    """Gram on N < |k| <= nmax with the certified lower bound.

    The bound |G| - 2pi T sqrt((d-1) tail(N)) holds when every pair
    difference in the band has Euclidean length above N and the time
    frequencies are integers in units of 2pi / T.
    """
    freqs = FrequencySet.band_between(p, N, nmax)
    rep = gram_matrix(freqs, G, N_threshold=N)
    tail = rep.diagnostics["tail_energy"]
    lower = G.measure - TWO_PI * G.t_period * np.sqrt((p.degree - 1) * tail)
    sep = min_pair_distance(freqs)
    rep.diagnostics.update({"certified_lower": float(lower), "min_pair_distance": sep,
                            "separation_ok": bool(sep > N),
                            "slack": EIG_RTOL * rep.lambda_max})
    return rep


# ------------------------------------------------------------- translations

def translation_stability(freqs, G, h_list):
    """lambda_min on G intersected with G - h, for each h = (h_t, h_x)."""
    results = []
    for h in h_list:
        Gh = G.intersect(G.translate((-h[0], -h[1])))
        if Gh.measure == 0:
            results.append({"h": tuple(h), "measure": 0.0, "lambda_min": 0.0, "constant": None})
            continue
        rep = gram_matrix(freqs, Gh)
        results.append({"h": tuple(h), "measure": Gh.measure, "lambda_min": rep.lambda_min,
                        "constant": rep.observability_constant})
    worst = min(results, key=lambda r: r["lambda_min"])
    return {"min_lambda": worst["lambda_min"], "argmin_h": worst["h"], "results": results}


def delta0_scan(freqs, G, direction=(1.0, 0.0), j_max=12):
    """Largest h = 2^-j * cell along direction keeping lambda_min >= half its h=0 value.

    Only h values for which every smaller scanned h also passes count.
    """
    base = gram_matrix(freqs, G).lambda_min
    cell = np.array([G.t_period, G.x_period])
    hs = [tuple(2.0 ** -j * cell * np.asarray(direction)) for j in range(1, j_max + 1)]
    scan = translation_stability(freqs, G, hs)["results"]
    delta0 = 0.0
    for r in reversed(scan):
        if r["lambda_min"] >= 0.5 * base:
            delta0 = float(np.hypot(*r["h"]))
        else:
            break
    return {"delta0": delta0, "base_lambda_min": base, "scan": scan}


def augmented_sweep(p, G, N, N_max, order=None):
    """Add low points |k0| <= N one at a time to the band N < |k| <= N_max."""
    freqs = FrequencySet.band_between(p, N, N_max)
    if order is None:
        order = [0] + [s * k for k in range(1, N + 1) for s in (1, -1)]
    reports = [gram_matrix(freqs, G)]
    reports[0].diagnostics["added_point"] = None
    for k0 in order:
        if abs(k0) > N:
            raise ValueError(f"augmentation point {k0} is not a low frequency")
        freqs = freqs.with_point(k0)
        rep = gram_matrix(freqs, G)
        rep.diagnostics["added_point"] = (int(k0), p(k0))
        rep.diagnostics["collapsed"] = not rep.available
        reports.append(rep)
    return reports


# ------------------------------------------------------------- weights

def _cell_integrals(edges, dw):
    """int over each cell of exp(i dw s) ds, shape (n_cells,) + dw.shape."""
    return np.stack([interval_integral([(a, b)], dw) for a, b in zip(edges[:-1], edges[1:])])


def weighted_observability(weight, freqs, quad_n=64, T=TWO_PI):
    """Gram of |a|^2 exp(i(lambda_i - lambda_j).z) over [0,T) x [0,2pi).

    weight is an array of cell values (n_t, n_x) on uniform cells, or a
    callable a(t, x) sampled at the midpoints of quad_n x quad_n cells.
    The weight is treated as piecewise constant on cells, and each cell
    integral of the exponential is exact.
    """
    if callable(weight):
        tm = (np.arange(quad_n) + 0.5) * T / quad_n
        xm = (np.arange(quad_n) + 0.5) * TWO_PI / quad_n
        A = np.asarray(weight(tm[:, None], xm[None, :]), dtype=float)
        A = np.broadcast_to(A, (quad_n, quad_n))
    else:
        A = np.asarray(weight, dtype=float)
    if np.any(A < 0):
        raise ValueError("weight must be nonnegative")
    nt, nx = A.shape
    t_edges = np.linspace(0.0, T, nt + 1)
    x_edges = np.linspace(0.0, TWO_PI, nx + 1)
    ks, ws = freqs.ks.astype(float), freqs.omegas
    Tt = _cell_integrals(t_edges, ws[:, None] - ws[None, :])
    Tx = _cell_integrals(x_edges, ks[:, None] - ks[None, :])
    gram = np.einsum("ab,aij,bij->ij", A ** 2, Tt, Tx)
    diag = {"weight_cells": [nt, nx], "weight_l2_sq": float(np.sum(A ** 2) * T * TWO_PI / (nt * nx))}
    if not np.any(A):
        return GramReport(gram, 0.0, 0.0, None, 1.0, diagnostics=diag,
                          freq_set=freqs.describe(), region="weight")
    return make_report(gram, 1.0, theta=frequency_set_theta(freqs), diagnostics=diag,
                       freq_set=freqs.describe(), region="weight")
