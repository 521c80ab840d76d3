"""Branches, map families and the random map system.

A system pairs a left family (alpha -> tau_alpha on [0, 1/2]) with a right
family (beta -> S_beta on [1/2, 1]) and two parameter measures.  Families are
vectorized over both the point and the parameter so that Ulam rows and orbit
shards can draw a fresh parameter per sample.

Right-branch inverses are computed as offsets from 1/2 because the preimages
y_n accumulate at 1/2 and the offset is the quantity every fit uses.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

HALF = 0.5
BISECT_ABS_TOL = 1e-13
BISECT_REL_TOL = 4e-16
FD_STEP = 1e-7


class ParameterDomainError(ValueError):
    """A parameter lies outside the family domain or the measure support."""


class OutOfRange(ValueError):
    """u lies above the image S_beta(1) of a (non-surjective) right branch."""


def bisect_increasing(f, target, lo, hi, abs_tol=BISECT_ABS_TOL, rel_tol=BISECT_REL_TOL):
    """Solve f(x) = target for increasing f on [lo, hi].

    Stops once the bracket is below `abs_tol` and also below `rel_tol` times
    the root, or cannot be split further in floating point.
    """
    if f(lo) >= target:
        return lo
    if f(hi) <= target:
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        w = hi - lo
        if w <= abs_tol and w <= rel_tol * abs(mid):
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class BranchFamily:
    """A one-parameter family of branches.

    f(x, p) and df(x, p) are vectorized.  For a left family `inverse(u, p)`
    returns x in [0, 1/2]; for a right family it returns the offset x - 1/2.
    Families without a closed-form inverse leave it None and get bisection.

    dominance: +1 when tau_p decreases pointwise in p near 0 (the smallest
    parameter dominates from above), -1 for the reverse, 0 when unknown.
    bounded_slope_at_half: analytic answer to "sup tau_p'(1/2) < inf" on a
    bounded parameter set (True/False), or None to decide by sampling.
    """

    name: str
    side: str
    f: Callable
    df: Optional[Callable] = None
    inverse: Optional[Callable] = None
    domain: Callable = field(default=lambda p: True)
    param_free: bool = False
    dominance: int = 0
    bounded_slope_at_half: Optional[bool] = None

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")

    def check(self, p):
        if not self.param_free and not self.domain(p):
            raise ParameterDomainError(f"parameter {p!r} outside the domain of family {self.name!r}")

    def deriv(self, x, p):
        if self.df is not None:
            return self.df(x, p)
        x = np.asarray(x, dtype=float)
        lo, hi = (0.0, HALF) if self.side == "left" else (HALF, 1.0)
        fwd = x + FD_STEP <= hi
        xp = np.where(fwd, x + FD_STEP, x)
        xm = np.where(fwd, x, x - FD_STEP)
        return (self.f(xp, p) - self.f(xm, p)) / (xp - xm)

    def branch(self, p=None):
        self.check(p)
        return (LeftBranch if self.side == "left" else RightBranch)(self, p)


@dataclass(frozen=True)
class LeftBranch:
    family: BranchFamily
    param: object = None

    def eval(self, x):
        return self.family.f(x, self.param)

    def derivative(self, x):
        return self.family.deriv(x, self.param)

    def inverse(self, u):
        u = min(max(float(u), 0.0), 1.0)
        if self.family.inverse is not None:
            return float(self.family.inverse(u, self.param))
        return bisect_increasing(lambda x: float(self.family.f(x, self.param)), u, 0.0, HALF)


@dataclass(frozen=True)
class RightBranch:
    family: BranchFamily
    param: object = None

    def eval(self, x):
        return self.family.f(x, self.param)

    def derivative(self, x):
        return self.family.deriv(x, self.param)

    @property
    def top(self):
        """S(1), the upper end of the image."""
        return float(self.family.f(1.0, self.param))

    def inverse_offset(self, u):
        """Offset d = x - 1/2 of the preimage of u; raises OutOfRange above S(1)."""
        u = float(u)
        top = self.top
        if u > top * (1 + 1e-14) + 1e-300 or u < 0:
            raise OutOfRange(f"u={u!r} not in [0, S(1)={top!r}] for {self.family.name}({self.param!r})")
        if u >= top:
            return HALF
        if self.family.inverse is not None:
            return float(self.family.inverse(u, self.param))
        return bisect_increasing(lambda d: float(self.family.f(HALF + d, self.param)), u, 0.0, HALF)

    def inverse_partial(self, u):
        return HALF + self.inverse_offset(u)


def _pick(p, mask):
    if np.ndim(p) == 0:
        return p
    return np.asarray(p)[mask]


@dataclass(frozen=True)
class RandomMapSystem:
    """Family {T_{alpha,beta}} with parameter laws nu_A and nu_B."""

    left: BranchFamily
    right: BranchFamily
    nu_A: object
    nu_B: object
    name: str = ""
    analytic_infinite: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def check_params(self, alpha, beta):
        if alpha is not None and not self.left.param_free:
            self.left.check(alpha)
            if not self.nu_A.contains(alpha):
                raise ParameterDomainError(f"alpha={alpha!r} outside supp nu_A {self.nu_A.support}")
        if beta is not None and not self.right.param_free:
            self.right.check(beta)
            if not self.nu_B.contains(beta):
                raise ParameterDomainError(f"beta={beta!r} outside supp nu_B {self.nu_B.support}")

    def tau(self, alpha):
        return self.left.branch(alpha)

    def S(self, beta):
        return self.right.branch(beta)

    def apply(self, x, alpha, beta):
        """Vectorized T_{alpha,beta}(x); alpha and beta may be arrays aligned with x."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        m = x <= HALF
        if np.any(m):
            out[m] = self.left.f(x[m], _pick(alpha, m))
        r = ~m
        if np.any(r):
            out[r] = self.right.f(x[r], _pick(beta, r))
        return out

    def sample_alpha(self, rng, size=None):
        return self.nu_A.sample(rng, size)

    def sample_beta(self, rng, size=None):
        return self.nu_B.sample(rng, size)

    def describe(self):
        return {
            "name": self.name,
            "left": self.left.name,
            "right": self.right.name,
            "nu_A": self.nu_A.describe(),
            "nu_B": self.nu_B.describe(),
            "params": dict(self.params),
        }


def eval_map(system, alpha, beta, x):
    """T_{alpha,beta}(x) for a single point, with parameter checks."""
    system.check_params(alpha, beta)
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x!r} outside [0, 1]")
    if x <= HALF:
        return float(system.left.f(x, alpha))
    return float(system.right.f(x, beta))


def invert_left(system, alpha, u):
    system.check_params(alpha, None)
    return system.tau(alpha).inverse(u)


def invert_right(system, beta, u):
    """Preimage of u in [1/2, 1] under S_beta; raises OutOfRange above S_beta(1)."""
    system.check_params(None, beta)
    return system.S(beta).inverse_partial(u)


def lsv_inverse(u, a):
    """Root of x (1 + (2x)^a) = u on [0, 1/2].

    Closed forms for a in {0, 1}; otherwise Newton from x0 = min(u, 1/2), which
    sits right of the root, so the iteration on a convex increasing function
    decreases monotonically onto it.
    """
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return HALF
    if a == 0:
        return 0.5 * u
    if a == 1:
        return 2.0 * u / (1.0 + math.sqrt(1.0 + 8.0 * u))
    x = min(u, HALF)
    for _ in range(200):
        xa = (2.0 * x) ** a
        step = (x * (1.0 + xa) - u) / (1.0 + (a + 1.0) * xa)
        if step <= 0.0:
            break
        x -= step
        if step <= 2.2e-16 * x:
            break
    return x


def right_offsets(family, u, beta):
    """Vectorized right-branch inverse offsets; NaN where u lies above S_beta(1)."""
    u = np.asarray(u, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), u.shape) if not family.param_free else beta
    top = np.asarray(family.f(np.ones_like(u), beta), dtype=float)
    if family.inverse is not None:
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.asarray(family.inverse(np.minimum(u, top), beta), dtype=float)
    else:
        bb = np.broadcast_to(np.asarray(beta if beta is not None else 0.0, dtype=float), u.shape)
        d = np.array([
            bisect_increasing(lambda t, b=b: float(family.f(HALF + t, b)), min(uu, tt), 0.0, HALF)
            for uu, tt, b in zip(u.ravel(), top.ravel(), bb.ravel())
        ]).reshape(u.shape)
    d = np.where(u >= top, HALF, d)
    return np.where(u > top * (1 + 1e-14) + 1e-300, np.nan, d)
