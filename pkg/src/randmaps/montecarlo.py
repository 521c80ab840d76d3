"""Long annealed orbits and occupation-ratio estimates.

Occupation counts of reporting cells are divided by the count of Y = (1/2, 1],
which has finite invariant measure whether or not the whole interval does.
Orbits are simulated as many short chains in parallel: a fixed number of
shards, each with its own derived seed, each advancing a vector of chains.
The shard layout depends only on the arguments, never on the worker count.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_rng
from .asymptotics import fit_exponent
from .induced import DEFAULT_CAP, induced_batch
from .io import write_csv
from .maps import HALF
from .sequences import AlphaStream, x_sequence

N_BATCHES = 100
MIN_BATCH_Y_HITS = 30
BURN_IN = 1000


@dataclass
class OccupationEstimate:
    cells: list
    counts: np.ndarray
    count_Y: int
    ratios: np.ndarray
    ci_halfwidth: np.ndarray
    steps: int
    seed: int
    labels: list = None
    absorbed_chains: int = 0
    unreliable: bool = False
    warnings: list = field(default_factory=list)

    def ratio_of(self, label):
        """Ratio of the cell carrying `label` (e.g. the index n of X_n)."""
        return float(self.ratios[self.labels.index(label)])

    def rows(self):
        return [(i, c[0], c[1], int(k), r, h) for i, (c, k, r, h) in
                enumerate(zip(self.cells, self.counts, self.ratios, self.ci_halfwidth))]

    def to_csv(self, path):
        return write_csv(path, ["cell_index", "cell_left", "cell_right", "count", "ratio", "ci"], self.rows())

    def manifest(self, system=None):
        out = {"seed": self.seed, "steps": self.steps, "count_Y": self.count_Y, "n_cells": len(self.cells),
               "absorbed_chains": self.absorbed_chains, "unreliable": self.unreliable,
               "warnings": list(self.warnings), "burn_in_per_chain": BURN_IN, "batches": N_BATCHES}
        if system is not None:
            out["family"] = system.describe()
        return out


def x_cells(system, alpha, N):
    """Reporting cells X_1 .. X_N for a constant reference alpha, with labels 1..N."""
    xs = x_sequence(system, AlphaStream.constant(alpha), N)
    cells = [(float(xs[n]), float(xs[n - 1])) for n in range(1, min(N, len(xs) - 1) + 1)]
    return cells, list(range(1, len(cells) + 1))


def _cell_index(cells):
    lefts = np.array([c[0] for c in cells])
    rights = np.array([c[1] for c in cells])
    order = np.argsort(rights)
    lefts, rights = lefts[order], rights[order]
    if np.any(lefts[1:] < rights[:-1] - 1e-300):
        raise ValueError("reporting cells must be disjoint")

    def locate(x):
        i = np.searchsorted(rights, x, side="left")
        ic = np.minimum(i, rights.size - 1)
        ok = (i < rights.size) & (x > lefts[ic])
        return np.where(ok, order[ic], -1)

    return locate


def dithered_step(system, x, alpha, beta, rng):
    """One annealed step that treats each float as a uniform point of its last-place cell.

    A stored x stands for the interval [x, x + ulp(x)); the true image is
    uniform (to first order) on the image of that interval under the chosen
    branch, and the step returns such a uniform point.  For branches like
    2x or 2x - 1 this supplies the binary digits that the float has run
    out of, reproducing the orbit of a Lebesgue-typical start point whose
    further digits are drawn lazily; without it the orbit collapses to 0
    after about 53 steps.  For nonlinear branches it is a round-off-sized
    perturbation.
    """
    x = np.asarray(x, dtype=float)
    xe = x + np.spacing(x)
    u = rng.random(x.shape)
    out = np.empty_like(x)
    m = x <= HALF
    r = ~m
    if np.any(m):
        a = alpha if np.ndim(alpha) == 0 else np.asarray(alpha)[m]
        f0 = system.left.f(x[m], a)
        out[m] = f0 + u[m] * (system.left.f(xe[m], a) - f0)
    if np.any(r):
        b = beta if np.ndim(beta) == 0 else np.asarray(beta)[r]
        f0 = system.right.f(x[r], b)
        out[r] = f0 + u[r] * (system.right.f(np.minimum(xe[r], 1.0), b) - f0)
    return np.clip(np.nan_to_num(out, nan=1.0), 0.0, 1.0)


def run_orbit(system, x0, steps, rng_seed=0, reporting_cells=None, labels=None, n_shards=16,
              chains_per_shard=64, burn_in=BURN_IN, threads=1, use_dither=True):
    """Occupation counts of `reporting_cells` along annealed orbits started at x0.

    `steps` counted iterations are split evenly over n_shards * chains_per_shard
    chains, each discarding `burn_in` initial steps.  Confidence half-widths
    come from 100 time batches (pooled over chains) of the ratio count/count_Y.
    Steps use `dithered_step` unless `use_dither` is False.
    """
    if not 0.0 < x0 <= 1.0:
        raise ValueError("x0 must lie in (0, 1]")
    if steps < 10**4:
        raise ValueError("steps must be at least 1e4")
    cells = [(HALF, 1.0)] if reporting_cells is None else [tuple(map(float, c)) for c in reporting_cells]
    locate = _cell_index(cells)
    n_chains = n_shards * chains_per_shard
    per_chain = max(int(np.ceil(steps / n_chains)), N_BATCHES)
    per_chain -= per_chain % N_BATCHES
    per_batch = per_chain // N_BATCHES
    nc = len(cells)
    fixed_a = system.left.param_free or system.nu_A.is_singleton
    fixed_b = system.right.param_free or system.nu_B.is_singleton
    a0 = None if system.left.param_free else system.nu_A.quadrature()[0][0] if fixed_a else None
    b0 = None if system.right.param_free else system.nu_B.quadrature()[0][0] if fixed_b else None

    def shard(s):
        rng = derive_rng(rng_seed, "montecarlo", "orbit", s)
        x = np.full(chains_per_shard, float(x0))
        alive = np.ones(chains_per_shard, dtype=bool)
        counts = np.zeros((N_BATCHES, nc + 1), dtype=np.int64)
        for t in range(burn_in + per_chain):
            a = a0 if fixed_a else system.sample_alpha(rng, chains_per_shard)
            b = b0 if fixed_b else system.sample_beta(rng, chains_per_shard)
            x = dithered_step(system, x, a, b, rng) if use_dither else system.apply(x, a, b)
            alive &= x > 0.0
            if t < burn_in:
                continue
            bi = (t - burn_in) // per_batch
            xa = x[alive]
            idx = locate(xa)
            counts[bi, :nc] += np.bincount(idx[idx >= 0], minlength=nc)
            counts[bi, nc] += int(np.sum(xa > HALF))
        return counts, int(np.sum(~alive))

    shards = range(n_shards)
    if threads == 1:
        res = [shard(s) for s in shards]
    else:
        with ThreadPoolExecutor(max_workers=None if threads == 0 else threads) as ex:
            res = list(ex.map(shard, shards))
    batches = sum(r[0] for r in res)
    absorbed = sum(r[1] for r in res)
    counts = batches[:, :nc].sum(axis=0)
    cY = int(batches[:, nc].sum())
    ratios = counts / cY if cY else np.full(nc, np.nan)
    yb = batches[:, nc]
    with np.errstate(divide="ignore", invalid="ignore"):
        br = batches[:, :nc] / yb[:, None]
    br = br[yb > 0]
    ci = 1.96 * br.std(axis=0, ddof=1) / np.sqrt(br.shape[0]) if br.shape[0] > 1 else np.full(nc, np.inf)
    est = OccupationEstimate(cells, counts, cY, ratios, ci, per_chain * n_chains, rng_seed, labels,
                             absorbed, bool(np.any(yb < MIN_BATCH_Y_HITS)))
    if est.unreliable:
        est.warnings.append(f"some batches have fewer than {MIN_BATCH_Y_HITS} visits to Y")
    if absorbed:
        est.warnings.append(f"{absorbed} chains reached 0 and were stopped")
    return est


@dataclass
class ReturnTimeHistogram:
    times: np.ndarray
    counts: np.ndarray
    n_returns: int
    censored: int
    mean: float
    tail_exponent: float
    tail_stderr: float
    tail_window: tuple

    def probabilities(self):
        return self.counts / self.n_returns

    def to_dict(self):
        return {"n_returns": self.n_returns, "censored": self.censored, "mean": self.mean,
                "tail_exponent": self.tail_exponent, "tail_stderr": self.tail_stderr,
                "tail_window": list(self.tail_window)}


def return_time_histogram(system, n_returns, cap=DEFAULT_CAP, rng_seed=0, min_tail_count=30):
    """First-return times to Y of uniform starting points in Y.

    The return time here counts every step (one right-branch step plus the
    left-branch steps).  The tail exponent is the log-log slope of the
    empirical survival function P(R > n); the mean is over completed returns,
    with censored returns reported separately.
    """
    if n_returns < 1000:
        raise ValueError("n_returns must be at least 1e3")
    rng = derive_rng(rng_seed, "montecarlo", "return-times")
    x = HALF + (1.0 - HALF) * (1.0 - rng.random(n_returns))
    _, k, cens = induced_batch(system, x, rng, cap)
    r = k[~cens] + 1
    times, counts = np.unique(r, return_counts=True)
    mean = float(r.mean()) if r.size else float("nan")
    # survival including censored returns, which exceed every completed time
    surv = n_returns - np.cumsum(counts)
    ok = surv >= min_tail_count
    tn, ts = times[ok], surv[ok]
    p, se, win = float("nan"), float("nan"), (0, 0)
    if tn.size >= 4:
        # drop the first time to avoid the lattice start
        fit = fit_exponent(np.column_stack([tn, ts / n_returns]), window=(tn[min(1, tn.size - 4)], tn[-1]))
        p, se, win = fit.exponent, fit.stderr, fit.window
    return ReturnTimeHistogram(times, counts, n_returns, int(cens.sum()), mean, p, se, win)


def occupation_vs_prediction(estimate, predictor, ns=None):
    """Table rows (n, empirical, rescaled prediction, empirical / rescaled prediction).

    `predictor` maps n to a predicted value (dict or callable).  The single
    scale factor minimizes the squared log-ratio over the overlap, i.e. it
    is the geometric mean of empirical / predicted.
    """
    get = predictor.get if isinstance(predictor, dict) else predictor
    labels = estimate.labels or []
    ns = labels if ns is None else list(ns)
    rows = []
    for n in ns:
        if n not in labels:
            continue
        pv = get(n)
        e = estimate.ratio_of(n)
        if pv is None or not pv > 0 or not e > 0:
            continue
        rows.append((n, e, float(pv)))
    if not rows:
        raise ValueError("no overlap between estimate cells and predictor indices")
    arr = np.array(rows)
    c = float(np.exp(np.mean(np.log(arr[:, 1]) - np.log(arr[:, 2]))))
    return [(int(n), e, c * pv, e / (c * pv)) for n, e, pv in rows]
