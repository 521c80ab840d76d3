"""Ulam discretization of the annealed operator P and the induced operator P_Y.

Matrices are row-stochastic with rows indexed by source cells: entry (i, j)
estimates the probability that a uniform point of cell i, pushed forward with
random parameters, lands in cell j.  Densities are handled internally as cell
masses m (so that m M is the pushforward) and converted to densities by
dividing by cell widths.
"""
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ._rng import derive_rng
from .induced import DEFAULT_CAP, hopeless_threshold, induced_batch
from .io import write_csv
from .maps import HALF
from .sequences import AlphaStream, x_sequence

CHUNK_ROWS = 16
UNRELIABLE_CENSORING = 0.5


class PartitionMismatch(ValueError):
    """The X-partition does not refine the Y-partition on [1/2, 1]."""


# ------------------------------------------------------------- partitions

@dataclass(frozen=True)
class IntervalPartition:
    """Cells (b_i, b_{i+1}] over strictly increasing breakpoints.

    The first cell is treated as closed on the left so that the lower end of
    the span is not lost.  For X-partitions in xcell-adapted mode `labels[i]`
    is the index n of the reference cell X_n containing cell i (0 for cells
    in Y, -1 for the tail cell next to 0).
    """

    breakpoints: np.ndarray
    mode: str = "uniform"
    labels: np.ndarray = None

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing with at least two entries")
        object.__setattr__(self, "breakpoints", bp)
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))

    @classmethod
    def uniform(cls, lo, hi, n):
        return cls(np.linspace(lo, hi, int(n) + 1), "uniform")

    @classmethod
    def y_uniform(cls, n=256):
        return cls.uniform(HALF, 1.0, n)

    @classmethod
    def xcell_adapted(cls, system, alpha=None, N=20, split=4, y_partition=None):
        """Cells X_n (n = 1..N) split into `split` pieces, one tail cell (0, x_{N+1}], and Y cells."""
        if y_partition is None:
            y_partition = cls.y_uniform(256)
        stream = AlphaStream.constant(alpha)
        xs = x_sequence(system, stream, N)
        if len(xs) < N + 1:
            raise ValueError("x-sequence too short for the requested number of X-cells")
        # tail cell (0, x_{N+1}], then X_n = (x_{n+1}, x_n] for n = N .. 1
        pts, labels = [0.0, xs[N]], [-1]
        for n in range(N, 0, -1):
            lo, hi = xs[n], xs[n - 1]
            pts.extend((lo + (hi - lo) * np.arange(1, split) / split).tolist())
            pts.append(hi)
            labels.extend([n] * split)
        ybp = y_partition.breakpoints
        pts.extend(ybp[1:].tolist())
        labels.extend([0] * (ybp.size - 1))
        return cls(np.array(pts), "xcell-adapted", np.array(labels))

    @property
    def n_cells(self):
        return self.breakpoints.size - 1

    @property
    def widths(self):
        return np.diff(self.breakpoints)

    @property
    def left(self):
        return self.breakpoints[:-1]

    @property
    def right(self):
        return self.breakpoints[1:]

    @property
    def span(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def locate(self, x):
        """Cell index of each x, or -1 outside the span."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="left") - 1
        idx = np.where(x == self.breakpoints[0], 0, idx)
        return np.where((idx < 0) | (idx >= self.n_cells), -1, idx)

    @property
    def y_mask(self):
        return self.left >= HALF - 1e-15

    def to_dict(self):
        return {"mode": self.mode, "n_cells": self.n_cells, "span": list(self.span)}


# --------------------------------------------------------------- operators

@dataclass
class UlamOperator:
    partition: IntervalPartition
    matrix: sparse.csr_matrix
    samples_per_cell: int
    n_ok: np.ndarray
    censored_fraction: np.ndarray
    overflow: np.ndarray
    kind: str = "P"
    unreliable: np.ndarray = None
    warnings: list = field(default_factory=list)
    pooled: np.ndarray = None

    @property
    def n_cells(self):
        return self.partition.n_cells

    def dense(self):
        return self.matrix.toarray()

    def sigma(self):
        """Binomial standard error of each entry, as a dense array."""
        M = self.dense()
        n = np.maximum(self.n_ok, 1)[:, None]
        return np.sqrt(M * (1.0 - M) / n)

    def output_sigma(self, m):
        """Standard error of each entry of m M.

        Rows are independent samples except rows filled from the shared pool
        of long returns, whose errors are identical and therefore add
        linearly rather than in quadrature.
        """
        m = np.asarray(m, dtype=float)
        sig = self.sigma()
        if self.pooled is None or not np.any(self.pooled):
            return np.sqrt((m ** 2) @ (sig ** 2))
        own = ~self.pooled
        var = (m[own] ** 2) @ (sig[own] ** 2)
        k = np.flatnonzero(self.pooled)[0]
        shared = np.sum(m[self.pooled]) * sig[k]
        return np.sqrt(var + shared ** 2)

    def diff_sigma(self, m):
        """Standard error of the adjacent differences of the pushforward density of m.

        Entries of one row are multinomial, so the two cells of a difference
        are negatively correlated; the covariance enters with a plus sign.
        """
        m = np.asarray(m, dtype=float)
        w = self.partition.widths
        M = self.dense()
        n = np.maximum(self.n_ok, 1)[:, None]
        a, b = M[:, :-1] / w[:-1], M[:, 1:] / w[1:]
        v = (a * (1.0 / w[:-1] - a) + b * (1.0 / w[1:] - b) + 2.0 * a * b) / n
        v = np.maximum(v, 0.0)
        if self.pooled is None or not np.any(self.pooled):
            return np.sqrt((m ** 2) @ v)
        own = ~self.pooled
        k = np.flatnonzero(self.pooled)[0]
        return np.sqrt((m[own] ** 2) @ v[own] + (np.sum(m[self.pooled]) ** 2) * v[k])

    def push_mass(self, m):
        """Pushforward m M of a cell-mass row vector."""
        return self.matrix.T @ np.asarray(m, dtype=float)

    def apply_density(self, f):
        """Density-level action: cell values f -> cell values of the pushforward."""
        w = self.partition.widths
        return self.push_mass(np.asarray(f, dtype=float) * w) / w

    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def summary(self):
        return {
            "kind": self.kind,
            "partition": self.partition.to_dict(),
            "samples_per_cell": self.samples_per_cell,
            "max_censored_fraction": float(np.max(self.censored_fraction)) if self.n_cells else 0.0,
            "mean_censored_fraction": float(np.mean(self.censored_fraction)) if self.n_cells else 0.0,
            "unreliable_rows": int(np.sum(self.unreliable)) if self.unreliable is not None else 0,
            "overflow_total": float(np.sum(self.overflow)),
            "max_row_sum_error": float(np.max(np.abs(self.row_sums() - 1.0))),
            "warnings": list(self.warnings),
        }


def _stratified(rng, lo, hi, n):
    u = (np.arange(n) + rng.random(n)) / n
    return lo + u * (hi - lo)


def _chunks(n_cells):
    return [range(s, min(s + CHUNK_ROWS, n_cells)) for s in range(0, n_cells, CHUNK_ROWS)]


def _run_chunks(fn, n_cells, threads):
    chunks = _chunks(n_cells)
    if threads is None or threads == 1 or len(chunks) == 1:
        return [fn(i, c) for i, c in enumerate(chunks)]
    workers = None if threads == 0 else int(threads)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda ic: fn(*ic), enumerate(chunks)))


def _assemble(rows, cols, n_rows, n_cols, n_ok, samples_per_cell):
    """Counts -> row-normalized sparse matrix, dropping entries below 1/samples_per_cell."""
    C = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    C.sum_duplicates()
    scale = np.where(n_ok > 0, 1.0 / np.maximum(n_ok, 1), 0.0)
    M = sparse.diags(scale) @ C
    M = M.tocsr()
    M.data[M.data < 1.0 / samples_per_cell - 1e-15] = 0.0
    M.eliminate_zeros()
    s = np.asarray(M.sum(axis=1)).ravel()
    M = (sparse.diags(np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)) @ M).tocsr()
    return M


def build_ulam_P(system, partition, samples_per_cell=10**4, rng_seed=0, threads=1):
    """Ulam matrix of the annealed one-step operator on `partition`.

    Each row uses stratified uniform points in its cell and i.i.d. (alpha, beta).
    Landings outside the span go to a separate overflow count and the row is
    normalized over in-span landings.  Seeds are derived per block of
    CHUNK_ROWS rows, so results do not depend on `threads`.
    """
    if samples_per_cell < 100:
        raise ValueError("samples_per_cell must be at least 100")
    n = partition.n_cells
    bp = partition.breakpoints

    def work(ci, rows):
        rng = derive_rng(rng_seed, "ulam", "P", ci)
        out_r, out_c, ok, over = [], [], [], []
        for i in rows:
            x = _stratified(rng, bp[i], bp[i + 1], samples_per_cell)
            a = None if system.left.param_free else system.sample_alpha(rng, samples_per_cell)
            b = None if system.right.param_free else system.sample_beta(rng, samples_per_cell)
            z = system.apply(x, a, b)
            j = partition.locate(z)
            good = j >= 0
            out_r.append(np.full(int(good.sum()), i))
            out_c.append(j[good])
            ok.append(int(good.sum()))
            over.append(int((~good).sum()))
        return np.concatenate(out_r), np.concatenate(out_c), ok, over

    res = _run_chunks(work, n, threads)
    rows = np.concatenate([r[0] for r in res])
    cols = np.concatenate([r[1] for r in res])
    n_ok = np.array([v for r in res for v in r[2]])
    overflow = np.array([v for r in res for v in r[3]]) / samples_per_cell
    M = _assemble(rows, cols, n, n, n_ok, samples_per_cell)
    op = UlamOperator(partition, M, samples_per_cell, n_ok, np.zeros(n), overflow, "P",
                      np.zeros(n, dtype=bool))
    if np.any(overflow > 0):
        op.warnings.append(f"{int(np.sum(overflow > 0))} rows have landings outside the partition span")
    return op


def build_ulam_PY(system, y_partition, samples_per_cell=10**4, cap=DEFAULT_CAP, rng_seed=0, threads=1,
                  pool_size=1000):
    """Ulam matrix of the induced operator on a partition of Y.

    Censored returns are excluded and the row renormalized over the rest.  A
    row with more than half its samples censored is flagged unreliable; a row
    with every sample censored is filled with the pooled landing distribution
    of the `pool_size` longest completed returns, as the best available proxy
    for returns that are longer still.
    """
    if cap < 100:
        raise ValueError("cap must be at least 100")
    if samples_per_cell < 100:
        raise ValueError("samples_per_cell must be at least 100")
    lo, hi = y_partition.span
    if lo < HALF - 1e-12 or hi < 1.0 - 1e-12:
        raise ValueError("y_partition must span (1/2, 1]")
    n = y_partition.n_cells
    bp = y_partition.breakpoints
    thr = hopeless_threshold(system, cap)

    def work(ci, rows):
        rng = derive_rng(rng_seed, "ulam", "PY", ci)
        rws = np.asarray(list(rows))
        x = np.concatenate([_stratified(rng, bp[i], bp[i + 1], samples_per_cell) for i in rws])
        x = np.maximum(x, np.nextafter(HALF, 1.0))
        src = np.repeat(rws, samples_per_cell)
        z, k, cens = induced_batch(system, x, rng, cap, threshold=thr)
        j = y_partition.locate(z)
        good = (~cens) & (j >= 0)
        return src[good], j[good], k[good], np.bincount(src[good] - rws[0], minlength=len(rws)), \
            np.bincount(src[cens] - rws[0], minlength=len(rws))

    res = _run_chunks(work, n, threads)
    rows = np.concatenate([r[0] for r in res])
    cols = np.concatenate([r[1] for r in res])
    times = np.concatenate([r[2] for r in res])
    n_ok = np.concatenate([r[3] for r in res])
    n_cens = np.concatenate([r[4] for r in res])
    cens_frac = n_cens / samples_per_cell
    unreliable = cens_frac > UNRELIABLE_CENSORING
    msgs = []
    empty = np.flatnonzero(n_ok == 0)
    if empty.size:
        if times.size == 0:
            raise RuntimeError("every induced step was censored; raise cap")
        longest = np.argsort(times, kind="stable")[-pool_size:]
        pool_cols = cols[longest]
        rows = np.concatenate([rows] + [np.full(pool_cols.size, i) for i in empty])
        cols = np.concatenate([cols] + [pool_cols] * empty.size)
        n_ok = n_ok.copy()
        n_ok[empty] = pool_cols.size
        msgs.append(f"{empty.size} fully censored rows filled from the {pool_cols.size} longest completed returns")
    M = _assemble(rows, cols, n, n, n_ok, samples_per_cell)
    if np.any(unreliable):
        msgs.append(f"{int(unreliable.sum())} rows have censored fraction > {UNRELIABLE_CENSORING}")
    pooled = np.zeros(n, dtype=bool)
    pooled[empty] = True
    return UlamOperator(y_partition, M, samples_per_cell, n_ok, cens_frac, np.zeros(n), "PY", unreliable, msgs,
                        pooled)


def exact_dyadic_matrix(n_cells=4):
    """Exact Ulam matrix of the dyadic system on a uniform partition of [0, 1] (n_cells even)."""
    if n_cells % 2:
        raise ValueError("n_cells must be even")
    M = np.zeros((n_cells, n_cells))
    half = n_cells // 2
    for i in range(n_cells):
        j = 2 * (i % half)
        M[i, j] = M[i, j + 1] = 0.5
    part = IntervalPartition.uniform(0.0, 1.0, n_cells)
    return UlamOperator(part, sparse.csr_matrix(M), 0, np.full(n_cells, np.iinfo(np.int64).max),
                        np.zeros(n_cells), np.zeros(n_cells), "P", np.zeros(n_cells, dtype=bool))


def induced_from_P(ulam_P, n_terms=200):
    """Dense matrix of I_Y P sum_n (I_{Y^c} P)^n restricted to the Y-cells, truncated at n_terms.

    Row i of the result is the distribution of the first Y-cell hit after
    leaving Y-cell i, under the discretized one-step chain.
    """
    M = ulam_P.matrix.tocsr()
    y = ulam_P.partition.y_mask
    Yi, Ci = np.flatnonzero(y), np.flatnonzero(~y)
    A = M[Yi][:, Yi].toarray()
    Q = M[Yi][:, Ci].toarray()
    C = M[Ci][:, Ci]
    B = M[Ci][:, Yi].toarray()
    term = Q
    for _ in range(n_terms):
        if not np.any(term):
            break
        A += term @ B
        term = (C.T @ term.T).T
    return A


# --------------------------------------------------------------- densities

@dataclass
class DensityEstimate:
    h0: np.ndarray
    y_partition: IntervalPartition
    converged: bool
    iterations: int
    residual: float
    h_ext: np.ndarray = None
    x_partition: IntervalPartition = None
    truncation_depth: int = 0
    tail_mass: float = float("nan")
    divergent_cells: np.ndarray = None
    sigma: np.ndarray = None
    warnings: list = field(default_factory=list)

    @property
    def masses(self):
        """mu of each X-partition cell."""
        return self.h_ext * self.x_partition.widths

    @property
    def mu_Y(self):
        return float(np.sum(self.masses[self.x_partition.y_mask]))

    def mu_X(self, n):
        """mu(X_n) for an xcell-adapted extension (n >= 1)."""
        lab = self.x_partition.labels
        if lab is None:
            raise ValueError("mu_X requires an xcell-adapted X-partition")
        return float(np.sum(self.masses[lab == n]))

    @property
    def tail_cell_value(self):
        lab = self.x_partition.labels
        return float(self.h_ext[lab == -1][0]) if lab is not None and np.any(lab == -1) else float("nan")

    def summary(self):
        out = {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_l1": self.residual,
            "h0_min": float(np.min(self.h0)),
            "h0_max": float(np.max(self.h0)),
            "warnings": list(self.warnings),
        }
        if self.h_ext is not None:
            out.update({
                "truncation_depth": self.truncation_depth,
                "tail_mass": self.tail_mass,
                "divergent_cells": int(np.sum(self.divergent_cells)),
                "mu_Y": self.mu_Y,
                "tail_cell_value": self.tail_cell_value,
            })
        return out


def invariant_density_h0(ulam_PY, max_iters=10**5, tol=1e-4):
    """Cesaro limit of P_Y^i 1_Y / lambda(Y) for the discretized induced operator.

    Stops when successive averages differ by less than `tol` in cell-weighted
    L1 and the fixed-point residual of the running average is at most `tol`.
    The residual of a Cesaro mean only decays like 1/n, hence the iteration
    budget.  Also returns a one-step propagated sampling standard error.
    """
    part = ulam_PY.partition
    w = part.widths
    lamY = float(np.sum(w))
    M = ulam_PY.matrix
    MT = M.T.tocsr()
    m = w / lamY
    total = m.copy()
    avg = m.copy()
    converged = False
    n = 1
    resid = float("inf")
    while n < max_iters:
        m = MT @ m
        total += m
        n += 1
        new = total / n
        diff = float(np.sum(np.abs(new - avg)))
        avg = new
        if diff < tol:
            resid = float(np.sum(np.abs(MT @ avg - avg)))
            if resid <= tol:
                converged = True
                break
    if not converged:
        resid = float(np.sum(np.abs(MT @ avg - avg)))
    avg = avg / np.sum(avg)
    h0 = avg / w
    sigma = ulam_PY.output_sigma(avg) / w
    est = DensityEstimate(h0, part, converged, n, float(np.sum(np.abs(MT @ avg - avg))), sigma=sigma)
    if not converged:
        est.warnings.append(f"Cesaro iteration did not reach tol={tol:g} in {max_iters} steps")
        warnings.warn(est.warnings[-1], RuntimeWarning, stacklevel=2)
    if ulam_PY.unreliable is not None and np.any(ulam_PY.unreliable):
        est.warnings.append("h0 built from a matrix with unreliable (heavily censored) rows")
    return est


def _refines(x_part, y_part):
    xb = x_part.breakpoints[x_part.breakpoints >= HALF - 1e-15]
    yb = y_part.breakpoints
    if abs(xb[0] - HALF) > 1e-12 or abs(xb[-1] - yb[-1]) > 1e-12:
        return False
    return bool(np.all(np.min(np.abs(xb[:, None] - yb[None, :]), axis=0) <= 1e-12))


def extend_density(h0, ulam_P, x_partition=None, N_trunc=200, rel_stop=1e-6, window=50, growth=0.005):
    """Extend h0 from Y to the whole interval.

    Accumulates h = h0 + sum_n I_{Y^c} (P I_{Y^c})^n P h0 on the X-partition
    of `ulam_P`.  Stops early once the newest term carries less than
    `rel_stop` of the accumulated mass on resolved (non-tail) cells.  A cell
    is flagged divergent when each of the last `window` terms added at least
    `growth` of its partial sum.
    """
    x_partition = ulam_P.partition if x_partition is None else x_partition
    if x_partition is not ulam_P.partition and not np.array_equal(x_partition.breakpoints,
                                                                   ulam_P.partition.breakpoints):
        raise PartitionMismatch("ulam_P must be built on x_partition")
    if N_trunc < 1:
        raise ValueError("N_trunc must be at least 1")
    y_part = h0.y_partition
    if not _refines(x_partition, y_part):
        raise PartitionMismatch("X-partition does not refine the Y-partition on [1/2, 1]")
    w = x_partition.widths
    ymask = x_partition.y_mask
    # embed h0 (densities) into the Y-cells of the X-partition
    mids = 0.5 * (x_partition.left + x_partition.right)
    h_emb = np.zeros(x_partition.n_cells)
    h_emb[ymask] = h0.h0[y_part.locate(mids[ymask])]
    m0 = h_emb * w
    MT = ulam_P.matrix.T.tocsr()
    resolved = ~ymask
    if x_partition.labels is not None:
        resolved &= x_partition.labels != -1
    acc = m0.copy()
    term = MT @ m0
    term[ymask] = 0.0
    hist = []
    depth = 0
    tail = float(np.sum(term))
    for depth in range(1, N_trunc + 1):
        acc += term
        hist.append(term / np.maximum(acc, 1e-300))
        if len(hist) > window:
            hist.pop(0)
        tail = float(np.sum(term))
        if float(np.sum(term[resolved])) < rel_stop * float(np.sum(acc[resolved])) and \
                float(np.sum(term[~resolved])) < rel_stop * max(float(np.sum(acc)), 1e-300):
            break
        term = MT @ term
        term[ymask] = 0.0
    if len(hist) >= window:
        divergent = np.all(np.array(hist) >= growth, axis=0)
    else:
        divergent = np.zeros(x_partition.n_cells, dtype=bool)
    h0.h_ext = acc / w
    h0.x_partition = x_partition
    h0.truncation_depth = depth
    h0.tail_mass = tail
    h0.divergent_cells = divergent
    if np.any(divergent):
        h0.warnings.append(f"{int(divergent.sum())} divergent cells (partial sums still growing)")
    if np.any(ulam_P.overflow > 0):
        h0.warnings.append("P matrix has landings outside the X-partition span")
    return h0


# ------------------------------------------------------ monotone preservation

@dataclass
class MonotoneReport:
    passed: bool
    trials: int
    violations: int
    max_violation: float
    max_violation_sigma: float

    def to_dict(self):
        return dict(self.__dict__)


def check_monotone_preservation(ulam_PY, trials=100, rng_seed=0, abs_tol=1e-6, n_sigma=3.0):
    """Apply the matrix to random non-increasing nonnegative step densities.

    An increase between adjacent output cells counts as a violation when it
    exceeds `abs_tol` plus `n_sigma` standard errors of the difference.
    The first three inputs are the constant, the indicator of the leftmost
    cell and a linear ramp; the rest are random.
    """
    if trials < 10:
        raise ValueError("trials must be at least 10")
    rng = derive_rng(rng_seed, "ulam", "monotone")
    n = ulam_PY.n_cells
    w = ulam_PY.partition.widths
    fixed = [np.ones(n), np.r_[1.0, np.zeros(n - 1)], np.linspace(1.0, 0.0, n)]
    violations, worst, worst_sig = 0, 0.0, 0.0
    for t in range(trials):
        if t < len(fixed):
            f = fixed[t]
        else:
            f = np.cumsum(rng.exponential(size=n) * (rng.random(n) < 0.2))[::-1]
            f = f / max(f.max(), 1e-300)
        m = f * w
        out = ulam_PY.push_mass(m) / w
        inc = np.diff(out)
        s_d = ulam_PY.diff_sigma(m) if ulam_PY.samples_per_cell else np.zeros(n - 1)
        excess = inc - abs_tol - n_sigma * s_d
        violations += int(np.sum(excess > 0))
        worst = max(worst, float(np.max(np.maximum(inc, 0.0))))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(s_d > 0, np.maximum(inc - abs_tol, 0) / s_d, np.where(inc > abs_tol, np.inf, 0.0))
        worst_sig = max(worst_sig, float(np.max(r)))
    return MonotoneReport(violations == 0, trials, violations, worst, worst_sig)


# ------------------------------------------------------------------ export

def export_matrix_csv(op, path):
    M = op.matrix.tocoo()
    bp = op.partition.breakpoints
    rows = sorted(zip(M.row.tolist(), M.col.tolist(), M.data.tolist()))
    return write_csv(path, ["src_left", "src_right", "dst_left", "dst_right", "value"],
                     ((bp[i], bp[i + 1], bp[j], bp[j + 1], v) for i, j, v in rows))


def export_density_csv(partition, values, path):
    return write_csv(path, ["cell_left", "cell_right", "value"],
                     zip(partition.left, partition.right, values))
