"""Inverse-orbit partitions x_n, the offset index eta, right preimages y_n.

Indexing follows the mathematical convention: ``xs[k]`` holds x_{k+1}, so
``xs[0] == 0.5``; likewise ``ys[0] == y_1 == 1``.  The left inverse at step n
uses alpha_n, i.e. x_{n+1} = tau_{alpha_n}^{-1}(x_n), which is the reading
consistent with T_{alpha_n,beta} X_n = X_{n-1}.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng
from .maps import HALF, OutOfRange, right_offsets

MAX_TERMS = 10**6


class SequenceTruncated(UserWarning):
    """x_n stopped decreasing (underflow); the returned sequence is shorter."""


class SequenceTooShort(ValueError):
    """The x-sequence does not reach far enough to bracket S_beta(1) or cover an index."""


class DegenerateRightBranch(ValueError):
    pass


class NoN0Found(RuntimeError):
    pass


_UNSET = object()


class AlphaStream:
    """Reproducible i.i.d. stream alpha_1, alpha_2, ... drawn from nu_A.

    ``AlphaStream.constant(a)`` yields a forever (``a=None`` for parameter-free
    left families).  Draws are made in fixed-size
    chunks so the prefix of a seeded stream never depends on how far it has
    been extended.
    """

    CHUNK = 4096

    def __init__(self, measure=None, seed=0, constant=_UNSET, index=0):
        if measure is None and constant is _UNSET:
            raise ValueError("need a measure or a constant")
        self.measure = measure
        self.seed = seed
        self.const = constant
        if constant is _UNSET and measure.is_singleton:
            self.const = measure.atoms[0]
        self._draws = np.empty(0)
        self._cursor = 0
        self._rng = None if self.is_constant else derive_rng(seed, "sequences", "alpha-stream", index)

    @classmethod
    def constant(cls, a):
        return cls(constant=a)

    @property
    def is_constant(self):
        return self.const is not _UNSET

    def _extend(self, n):
        while self._draws.size < n:
            chunk = np.asarray(self.measure.sample(self._rng, self.CHUNK), dtype=float)
            self._draws = np.concatenate([self._draws, chunk])

    def prefix(self, n):
        """alpha_1 .. alpha_n as an array."""
        if self.is_constant:
            return np.full(n, np.nan if self.const is None else self.const, dtype=float)
        self._extend(n)
        return self._draws[:n].copy()

    def draw(self):
        """Next unused alpha (cursor-based consumption, independent of indexing)."""
        self._cursor += 1
        return self[self._cursor]

    def __getitem__(self, n):
        """alpha_n, 1-based."""
        if n < 1:
            raise IndexError("alpha indices start at 1")
        if self.is_constant:
            return self.const
        self._extend(n)
        return float(self._draws[n - 1])


def x_sequence(system, alpha_stream, N, start=None):
    """x_1 .. x_{N+1}.

    `start` may hold an already computed prefix (x_1 .. x_k) to continue from.
    When rounding stops the strict decrease the sequence is cut there and a
    SequenceTruncated warning is issued.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    N = min(int(N), MAX_TERMS)
    left = system.left
    xs = np.empty(N + 1)
    k0 = 1
    if start is not None and len(start) > 0:
        k0 = min(len(start), N + 1)
        xs[:k0] = start[:k0]
    else:
        xs[0] = HALF
    inv = left.inverse
    if alpha_stream.is_constant or left.param_free:
        a = alpha_stream.const if alpha_stream.is_constant else None
        alphas = None
    else:
        alphas = alpha_stream.prefix(N)
    x = xs[k0 - 1]
    for k in range(k0, N + 1):
        # x_{k+1} = tau_{alpha_k}^{-1}(x_k)
        a_k = a if alphas is None else alphas[k - 1]
        if inv is not None:
            nxt = float(inv(x, a_k))
        else:
            nxt = left.branch(a_k).inverse(x)
        if not (0.0 < nxt < x):
            warnings.warn(f"x-sequence truncated at n={k} (x={x!r})", SequenceTruncated, stacklevel=2)
            return xs[:k].copy()
        xs[k] = nxt
        x = nxt
    return xs


def eta_index(system, xs, beta):
    """The n >= 0 with S_beta(1) in (x_{n+1}, x_n], x_0 = 1."""
    top = float(system.right.f(1.0, beta))
    if top <= 0.0:
        raise DegenerateRightBranch(f"S_beta(1) = 0 for beta={beta!r}")
    xs = np.asarray(xs)
    if xs[-1] >= top:
        raise SequenceTooShort(f"S_beta(1)={top!r} not bracketed by {len(xs)} terms; extend the x-sequence")
    # number of x_n (n >= 0, x_0 = 1) with x_n >= top, minus one
    return int(np.sum(xs >= top))


def y_offsets(system, xs, eta, beta, M):
    """y_n - 1/2 for n = 1 .. M+1 (first entry is 1/2)."""
    xs = np.asarray(xs)
    if len(xs) < eta + M:
        raise SequenceTooShort(f"need x_{eta + M}, have {len(xs)} terms")
    targets = xs[eta:eta + M]  # x_{eta+1} .. x_{eta+M}
    d = right_offsets(system.right, targets, beta)
    if np.any(np.isnan(d)):
        raise OutOfRange(f"x_(eta+n) above S_beta(1) for beta={beta!r}; inconsistent eta={eta}")
    return np.concatenate([[HALF], d])


def y_sequence(system, xs, eta, beta, M):
    """y_1 .. y_{M+1} with y_1 = 1 and y_{n+1} = S_beta^{-1}(x_{eta+n})."""
    return HALF + y_offsets(system, xs, eta, beta, M)


@dataclass
class PartitionSequences:
    xs: np.ndarray
    eta: int
    ys: np.ndarray
    y_off: np.ndarray
    beta: float
    truncated: bool = False

    def X_cell(self, n):
        """X_n = (x_{n+1}, x_n] with x_0 = 1."""
        hi = 1.0 if n == 0 else self.xs[n - 1]
        return self.xs[n], hi

    def Y_cell(self, n):
        """Y_n = (y_{n+1}, y_n]."""
        return self.ys[n], self.ys[n - 1]


def partition_sequences(system, alpha_stream, beta, N, M=None):
    """x_1..x_{N+1}, eta and y_1..y_{M+1}, extending the x-sequence if needed."""
    M = N if M is None else M
    truncated = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SequenceTruncated)
        xs = x_sequence(system, alpha_stream, N)
        length = len(xs)
        while True:
            try:
                eta = eta_index(system, xs, beta)
                break
            except SequenceTooShort:
                if len(xs) < length or len(xs) >= MAX_TERMS:
                    raise
                length = 2 * len(xs)
                xs = x_sequence(system, alpha_stream, length, start=xs)
        if len(xs) < eta + M:
            xs = x_sequence(system, alpha_stream, eta + M, start=xs)
        truncated = any(issubclass(w.category, SequenceTruncated) for w in caught)
    M = min(M, len(xs) - eta)
    off = y_offsets(system, xs, eta, beta, M)
    return PartitionSequences(xs, eta, HALF + off, off, beta, truncated)


# ------------------------------------------------------------------ N0 search

def _stream_nodes(system, n_streams, seed):
    if system.left.param_free:
        return [AlphaStream.constant(None)]
    if system.nu_A.is_singleton:
        return [AlphaStream.constant(system.nu_A.atoms[0])]
    return [AlphaStream(system.nu_A, seed=seed, index=i) for i in range(n_streams)]


def find_n0(system, delta, quadrature_nodes=256, n_streams=64, seed=0, cap=MAX_TERMS):
    """Smallest N0 with E[(y_{N0+1} - 1/2) / (x_1 - x_2)] < delta.

    The expectation over alpha-sequences is exact in constant-alpha mode
    (singleton nu_A or parameter-free left family) and a sample mean over
    `n_streams` seeded streams otherwise; nu_B is integrated by its quadrature.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    streams = _stream_nodes(system, n_streams, seed)
    pts, wts = system.nu_B.quadrature(quadrature_nodes)
    if system.right.param_free:
        pts, wts = np.array([pts[0]]), np.array([1.0])
    cache = []
    for st in streams:
        xs = x_sequence(system, st, 64)
        cache.append({"stream": st, "xs": xs, "eta": None})

    def ensure(entry, length):
        if len(entry["xs"]) < length:
            if len(entry["xs"]) >= cap + 1:
                raise NoN0Found("x-sequence capped before reaching required index")
            entry["xs"] = x_sequence(system, entry["stream"], min(max(length, 2 * len(entry["xs"])), cap + 1),
                                     start=entry["xs"])
        if entry["eta"] is None:
            etas = []
            for b in pts:
                while True:
                    try:
                        etas.append(eta_index(system, entry["xs"], b))
                        break
                    except SequenceTooShort:
                        if len(entry["xs"]) >= cap:
                            raise NoN0Found("eta not bracketed within the cap") from None
                        entry["xs"] = x_sequence(system, entry["stream"], min(2 * len(entry["xs"]), cap + 1),
                                                 start=entry["xs"])
            entry["eta"] = np.array(etas)

    def integrand(N):
        total = 0.0
        for entry in cache:
            ensure(entry, 1)
            eta = entry["eta"]
            ensure(entry, int(eta.max()) + N + 1)
            xs = entry["xs"]
            if len(xs) < int(eta.max()) + N:
                raise NoN0Found(f"x-sequence too short for N={N}")
            gap = HALF - xs[1]
            targets = xs[eta + N - 1]  # x_{eta+N}
            d = right_offsets(system.right, targets, pts)
            total += float(np.sum(wts * d)) / gap
        return total / len(cache)

    if integrand(1) < delta:
        return 1
    lo, hi = 1, 2
    while integrand(hi) >= delta:
        lo, hi = hi, 2 * hi
        if hi > cap:
            if integrand(cap) >= delta:
                raise NoN0Found(f"no N0 <= {cap} for delta={delta}")
            hi = cap
            break
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if integrand(mid) < delta:
            hi = mid
        else:
            lo = mid
    return hi


# ------------------------------------------------------- measure predictor

def _beta_crossing(system, target, lo, hi):
    """beta in [lo, hi] with S_beta(1) = target, S_.(1) monotone; bisection to 1e-10."""
    g = lambda b: float(system.right.f(1.0, b)) - target
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise SequenceTooShort("eta level-set boundary not bracketed; use a longer x-sequence")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-10:
            break
        if (g(mid) > 0) == (glo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _finite_support(measure):
    lo, hi = measure.support
    if not np.isfinite(lo):
        lo = float(measure.dist.ppf(1e-12))
    if not np.isfinite(hi):
        hi = float(measure.dist.ppf(1 - 1e-12))
    return lo, hi


def _region_above(system, t, lo, hi, inc):
    """The beta-interval where S_beta(1) > t, as (a, b) with a <= b (possibly empty)."""
    top = lambda b: float(system.right.f(1.0, b))
    if inc:
        if top(hi) <= t:
            return None
        if top(lo) > t:
            return lo, hi
        return _beta_crossing(system, t, lo, hi), hi
    if top(lo) <= t:
        return None
    if top(hi) > t:
        return lo, hi
    return lo, _beta_crossing(system, t, lo, hi)


def predict_mu_xn(system, alpha, ns, xs=None, nodes=None):
    """Order predictor for mu(X_n) with a constant left parameter.

    Evaluates  int_{eta < n} (y_{n-eta} - 1/2) dnu_B + nu_B{eta >= n}.
    Because y_{n-eta} - 1/2 equals the offset of S_beta^{-1}(x_{n-1}) whenever
    eta <= n - 2 and 1/2 when eta = n - 1, the integral splits into three
    beta-regions whose boundaries are the crossings S_beta(1) = x_{n-1} and
    S_beta(1) = x_n; only those boundaries carry discontinuities.
    """
    scalar = np.ndim(ns) == 0
    ns = np.atleast_1d(np.asarray(ns, dtype=int))
    if np.any(ns < 2):
        raise ValueError("n must be at least 2")
    nmax = int(ns.max())
    stream = AlphaStream.constant(alpha)
    if xs is None or len(xs) < nmax:
        xs = x_sequence(system, stream, nmax, start=xs)
    if len(xs) < nmax:
        raise SequenceTooShort(f"x-sequence truncated at {len(xs)} terms, need {nmax}")
    nu = system.nu_B
    out = np.empty(ns.size)
    discrete = nu.kind == "discrete" or system.right.param_free
    if discrete:
        if system.right.param_free:
            b_pts, b_w = np.array([0.0]), np.array([1.0])
        else:
            b_pts, b_w = nu.quadrature()
        tops = np.asarray(system.right.f(np.ones_like(b_pts), b_pts), dtype=float)
        for i, n in enumerate(ns):
            x_nm1, x_n = xs[n - 2], xs[n - 1]
            above = tops > x_nm1               # eta <= n - 2
            mid = (tops <= x_nm1) & (tops > x_n)  # eta == n - 1
            tail = tops <= x_n                 # eta >= n
            val = 0.0
            if np.any(above):
                d = right_offsets(system.right, np.full(int(above.sum()), x_nm1), b_pts[above])
                val += float(np.sum(b_w[above] * d))
            val += HALF * float(np.sum(b_w[mid])) + float(np.sum(b_w[tail]))
            out[i] = val
        return float(out[0]) if scalar else out

    lo, hi = _finite_support(nu)
    inc = float(system.right.f(1.0, hi)) >= float(system.right.f(1.0, lo))
    q = nodes or nu.nodes

    def mass(reg):
        return 0.0 if reg is None else nu.cdf(reg[1]) - nu.cdf(reg[0])

    for i, n in enumerate(ns):
        x_nm1, x_n = xs[n - 2], xs[n - 1]
        r1 = _region_above(system, x_nm1, lo, hi, inc)  # eta <= n-2
        r0 = _region_above(system, x_n, lo, hi, inc)    # eta <= n-1
        val = 0.0
        if r1 is not None:
            b, w = nu.quadrature_between(r1[0], r1[1], q)
            if b.size:
                val += float(np.sum(w * right_offsets(system.right, np.full(b.size, x_nm1), b)))
        m1, m0 = mass(r1), mass(r0)
        val += HALF * max(m0 - m1, 0.0) + max(1.0 - m0, 0.0)
        out[i] = val
    return float(out[0]) if scalar else out
