"""Probability measures on parameter spaces.

Two kinds are supported: finitely many atoms, and absolutely continuous laws
backed by a frozen ``scipy.stats`` distribution.  Both expose the same small
surface: sampling from a supplied generator, a quadrature rule, cdf/mass of
intervals, and membership of the support.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

DEFAULT_NODES = 256


class ParameterMeasure:
    """Common interface; see DiscreteMeasure and ContinuousMeasure."""

    kind = "abstract"

    def sample(self, rng, size=None):
        raise NotImplementedError

    def quadrature(self, nodes=None):
        raise NotImplementedError

    def quadrature_between(self, lo, hi, nodes=None):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def contains(self, p, atol=1e-12):
        raise NotImplementedError

    @property
    def support(self):
        raise NotImplementedError

    @property
    def is_singleton(self):
        return False

    def total_mass(self):
        return float(np.sum(self.quadrature()[1]))


@dataclass(frozen=True)
class DiscreteMeasure(ParameterMeasure):
    atoms: tuple
    weights: tuple

    kind = "discrete"

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.size == 0 or a.shape != w.shape:
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        order = np.argsort(a, kind="stable")
        object.__setattr__(self, "atoms", tuple(a[order].tolist()))
        object.__setattr__(self, "weights", tuple(w[order].tolist()))

    @property
    def _a(self):
        return np.asarray(self.atoms)

    @property
    def _w(self):
        return np.asarray(self.weights)

    def sample(self, rng, size=None):
        if len(self.atoms) == 1:
            return self.atoms[0] if size is None else np.full(size, self.atoms[0])
        idx = rng.choice(len(self.atoms), size=size, p=self._w)
        return self._a[idx]

    def quadrature(self, nodes=None):
        return self._a.copy(), self._w.copy()

    def quadrature_between(self, lo, hi, nodes=None):
        """Atoms in the half-open interval [lo, hi) with their weights."""
        a = self._a
        m = (a >= lo) & (a < hi)
        return a[m], self._w[m]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = (self._a[None, :] <= x.reshape(-1, 1)) @ self._w
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def contains(self, p, atol=1e-12):
        return bool(np.any(np.abs(self._a - p) <= atol))

    @property
    def support(self):
        return self.atoms[0], self.atoms[-1]

    @property
    def is_singleton(self):
        return len(self.atoms) == 1

    def describe(self):
        return {"kind": "discrete", "atoms": list(self.atoms), "weights": list(self.weights)}


def dirac(p):
    return DiscreteMeasure((float(p),), (1.0,))


@dataclass(frozen=True)
class ContinuousMeasure(ParameterMeasure):
    """Absolutely continuous law given by a frozen scipy.stats distribution.

    Quadrature uses the midpoint rule in probability space: the support is cut
    into `nodes` cells of equal mass and each cell is represented by the
    quantile of its midpoint.  This is the composite midpoint rule after the
    change of variables u = F(p), and it stays usable for unbounded supports
    and integrable density singularities.
    """

    dist: object
    nodes: int = DEFAULT_NODES
    label: str = field(default="", compare=False)

    kind = "continuous"

    def sample(self, rng, size=None):
        u = rng.random(size)
        return self.dist.ppf(u) if size is not None else float(self.dist.ppf(u))

    def quadrature(self, nodes=None):
        n = int(nodes or self.nodes)
        u = (np.arange(n) + 0.5) / n
        return self.dist.ppf(u), np.full(n, 1.0 / n)

    def quadrature_between(self, lo, hi, nodes=None):
        """Nodes and weights for integrating against the measure over [lo, hi)."""
        n = int(nodes or self.nodes)
        Flo, Fhi = float(self.dist.cdf(lo)), float(self.dist.cdf(hi))
        if Fhi <= Flo:
            return np.empty(0), np.empty(0)
        u = Flo + (np.arange(n) + 0.5) / n * (Fhi - Flo)
        return self.dist.ppf(u), np.full(n, (Fhi - Flo) / n)

    def cdf(self, x):
        out = self.dist.cdf(x)
        return float(out) if np.ndim(x) == 0 else out

    def pdf(self, x):
        return self.dist.pdf(x)

    def contains(self, p, atol=1e-12):
        lo, hi = self.support
        return bool(lo - atol <= p <= hi + atol)

    @property
    def support(self):
        lo, hi = self.dist.support()
        return float(lo), float(hi)

    def describe(self):
        return {"kind": "continuous", "label": self.label, "support": list(self.support), "nodes": self.nodes}


def uniform(lo, hi, nodes=DEFAULT_NODES):
    return ContinuousMeasure(stats.uniform(loc=lo, scale=hi - lo), nodes, f"uniform({lo},{hi})")


def power_density(ell, nodes=DEFAULT_NODES):
    """Density (1 - ell) p**(-ell) on [0, 1], 0 < ell < 1."""
    if not 0 < ell < 1:
        raise ValueError("ell must lie in (0, 1)")
    return ContinuousMeasure(stats.powerlaw(a=1.0 - ell), nodes, f"power({ell})")


def pareto_density(ell, nodes=DEFAULT_NODES):
    """Density (ell - 1) p**(-ell) on [1, inf), ell > 1."""
    if ell <= 1:
        raise ValueError("ell must exceed 1")
    return ContinuousMeasure(stats.pareto(b=ell - 1.0), nodes, f"pareto({ell})")


CONTINUOUS_LAWS = {
    "uniform": lambda lo, hi, nodes=DEFAULT_NODES: uniform(lo, hi, nodes),
    "power": lambda ell, nodes=DEFAULT_NODES: power_density(ell, nodes),
    "pareto": lambda ell, nodes=DEFAULT_NODES: pareto_density(ell, nodes),
}
