"""Built-in branch families and the system catalog.

Systems are addressable by string id; `make_system(id, nu_A=..., nu_B=...)`
fills in the default parameter laws when none are given.
"""
import numpy as np

from .maps import HALF, BranchFamily, RandomMapSystem, lsv_inverse
from .measures import dirac, uniform

TINY = np.finfo(float).tiny


def _arr(x):
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------- left families

DOUBLING = BranchFamily(
    name="doubling",
    side="left",
    f=lambda x, p: 2.0 * _arr(x),
    df=lambda x, p: np.full_like(_arr(x), 2.0),
    inverse=lambda u, p: 0.5 * u,
    param_free=True,
    bounded_slope_at_half=True,
)


def _lsv_f(x, a):
    x = _arr(x)
    return x * (1.0 + (2.0 * x) ** a)


def _lsv_df(x, a):
    x = _arr(x)
    return 1.0 + (np.asarray(a) + 1.0) * (2.0 * x) ** a


LSV = BranchFamily(
    name="lsv",
    side="left",
    f=_lsv_f,
    df=_lsv_df,
    inverse=lsv_inverse,
    domain=lambda a: a is not None and a >= 0,
    dominance=+1,
    bounded_slope_at_half=True,
)


def _sqrt_left_f(x, p):
    x = _arr(x)
    # 1 - sqrt(1 - 2x) without cancellation near 0
    return 2.0 * x / (1.0 + np.sqrt(np.maximum(1.0 - 2.0 * x, 0.0)))


def _sqrt_left_df(x, p):
    x = _arr(x)
    with np.errstate(divide="ignore"):
        return 1.0 / np.sqrt(np.maximum(1.0 - 2.0 * x, 0.0))


SQRT_LEFT = BranchFamily(
    name="counterexample",
    side="left",
    f=_sqrt_left_f,
    df=_sqrt_left_df,
    inverse=lambda u, p: 0.5 * u * (2.0 - u),
    param_free=True,
    bounded_slope_at_half=False,
)


# --------------------------------------------------------------- right families

def _d(x):
    return np.maximum(_arr(x) - HALF, 0.0)


DYADIC_RIGHT = BranchFamily(
    name="dyadic",
    side="right",
    f=lambda x, p: 2.0 * _d(x),
    df=lambda x, p: np.full_like(_arr(x), 2.0),
    inverse=lambda u, p: 0.5 * _arr(u),
    param_free=True,
)

LOW_SLOPE = BranchFamily(
    name="low-slope",
    side="right",
    f=lambda x, b: 2.0 ** (-np.asarray(b, dtype=float)) * 2.0 * _d(x),
    df=lambda x, b: np.ones_like(_arr(x)) * 2.0 ** (1.0 - np.asarray(b, dtype=float)),
    inverse=lambda u, b: 0.5 * _arr(u) * 2.0 ** np.asarray(b, dtype=float),
    domain=lambda b: b is not None and b >= 0,
)

CONTRACTING = BranchFamily(
    name="contracting",
    side="right",
    f=lambda x, b: np.asarray(b, dtype=float) * _d(x),
    df=lambda x, b: np.ones_like(_arr(x)) * np.asarray(b, dtype=float),
    inverse=lambda u, b: _arr(u) / np.asarray(b, dtype=float),
    domain=lambda b: b is not None and 0 < b <= 2,
)


def _critical_f(x, b):
    return (2.0 * _d(x)) ** b


def _critical_df(x, b):
    b = np.asarray(b, dtype=float)
    return 2.0 * b * (2.0 * _d(x)) ** (b - 1.0)


CRITICAL = BranchFamily(
    name="critical",
    side="right",
    f=_critical_f,
    df=_critical_df,
    inverse=lambda u, b: 0.5 * _arr(u) ** (1.0 / np.asarray(b, dtype=float)),
    domain=lambda b: b is not None and b >= 1,
)


def _flat_f(x, b):
    d = _d(x)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        expo = 2.0 ** b - d ** (-b)
        out = np.exp(expo)
    # clamp underflow to the smallest normal so orbits stay inside (0, 1]
    return np.where(d > 0, np.maximum(out, TINY), 0.0)


def _flat_df(x, b):
    d = _d(x)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        val = b * d ** (-b - 1.0) * np.exp(2.0 ** b - d ** (-b))
    return np.where(d > 0, np.nan_to_num(val, nan=0.0, posinf=0.0), 0.0)


def _flat_inverse(u, b):
    u = _arr(u)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore"):
        out = (2.0 ** b - np.log(np.maximum(u, TINY))) ** (-1.0 / b)
    return np.where(u > 0, out, 0.0)


FLAT = BranchFamily(
    name="flat",
    side="right",
    f=_flat_f,
    df=_flat_df,
    inverse=_flat_inverse,
    domain=lambda b: b is not None and b >= 1,
)

WIDE = BranchFamily(
    name="wide-entrance",
    side="right",
    f=lambda x, b: _d(x) ** np.asarray(b, dtype=float),
    df=lambda x, b: np.asarray(b, dtype=float) * _d(x) ** (np.asarray(b, dtype=float) - 1.0),
    inverse=lambda u, b: _arr(u) ** (1.0 / np.asarray(b, dtype=float)),
    domain=lambda b: b is not None and b >= 1,
)

LEFT_FAMILIES = {f.name: f for f in (DOUBLING, LSV, SQRT_LEFT)}
RIGHT_FAMILIES = {f.name: f for f in (DYADIC_RIGHT, LOW_SLOPE, CONTRACTING, CRITICAL, FLAT, WIDE)}


# ------------------------------------------------------------------- catalog

# id -> (left family, right family, default nu_A, default nu_B, analytic_infinite)
SYSTEMS = {
    "dyadic": (DOUBLING, DYADIC_RIGHT, lambda: dirac(0.0), lambda: dirac(0.0), False),
    "linear-low-slope": (DOUBLING, LOW_SLOPE, lambda: dirac(0.0), lambda: dirac(1.0), False),
    "lsv": (LSV, DYADIC_RIGHT, lambda: uniform(0.5, 2.0), lambda: dirac(0.0), False),
    "lsv-contracting": (LSV, CONTRACTING, lambda: uniform(0.5, 2.0), lambda: uniform(0.5, 1.0), False),
    "critical": (LSV, CRITICAL, lambda: uniform(0.5, 2.0), lambda: uniform(1.5, 3.0), False),
    "flat": (LSV, FLAT, lambda: uniform(0.5, 1.0), lambda: uniform(1.0, 2.0), True),
    "wide-entrance": (LSV, WIDE, lambda: uniform(0.0, 1.0), lambda: uniform(1.0, 3.0), False),
    "counterexample": (SQRT_LEFT, CONTRACTING, lambda: dirac(0.0), lambda: dirac(1.6), False),
}


def make_system(family_id, nu_A=None, nu_B=None, **left_right):
    """Build a catalog system.

    `left` / `right` keyword overrides swap in another registered branch
    family, e.g. ``make_system("lsv", right="contracting", nu_B=...)``.
    """
    try:
        left, right, dA, dB, inf_rule = SYSTEMS[family_id]
    except KeyError:
        raise KeyError(f"unknown family id {family_id!r}; known: {sorted(SYSTEMS)}") from None
    if "left" in left_right:
        left = LEFT_FAMILIES[left_right.pop("left")]
    if "right" in left_right:
        right = RIGHT_FAMILIES[left_right.pop("right")]
        inf_rule = inf_rule and right is FLAT
    if left_right:
        raise TypeError(f"unexpected arguments {sorted(left_right)}")
    nu_A = nu_A if nu_A is not None else dA()
    nu_B = nu_B if nu_B is not None else dB()
    return RandomMapSystem(left, right, nu_A, nu_B, name=family_id, analytic_infinite=inf_rule or right is FLAT)
