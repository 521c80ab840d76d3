"""Decay-exponent fits, finite/infinite verdicts and the two-system comparison.

A sequence a_n with a_n ~ n^p has finite sum iff p < -1.  Verdicts compare a
fitted log-log slope with -1 and refuse to decide inside a guard band.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

FINITE, INFINITE, INCONCLUSIVE = "finite", "infinite", "inconclusive"
BAND_FLOOR = 0.05
SLOW_VARIATION_REL = 0.1
MIN_POINTS = 4


class DominanceFailed(ValueError):
    """The reference parameters do not bracket the left branches."""


@dataclass
class FitResult:
    exponent: float
    stderr: float
    intercept: float
    window: tuple
    n_points: int
    half_exponents: tuple = (float("nan"), float("nan"))
    slow_variation: bool = False
    model: str = "power"

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        d["half_exponents"] = list(self.half_exponents)
        return d


def _as_series(series):
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (n, a_n) pairs")
    return arr[:, 0], arr[:, 1]


def _slope(u, v):
    if u.size < 2 or np.ptp(u) == 0:
        return float("nan"), float("nan"), float("nan")
    r = stats.linregress(u, v)
    se = float(r.stderr) if u.size > 2 else 0.0
    return float(r.slope), se, float(r.intercept)


def fit_exponent(series, window=None, model="power"):
    """Least-squares slope of log a_n against log n over `window` = (n_lo, n_hi).

    model="loglog" regresses against log log n instead, the natural scale
    for sequences that decay like a power of log n.  The window is also split
    at its logarithmic midpoint; when the two half-window slopes differ by
    more than 10% of the overall slope the fit is flagged as slowly varying.
    """
    n, a = _as_series(series)
    if window is None:
        window = (n.min(), n.max())
    lo, hi = window
    m = (n >= lo) & (n <= hi)
    if not np.any(m):
        raise ValueError(f"window {window} contains no points")
    n, a = n[m], a[m]
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("fit_exponent needs finite positive values")
    if model == "power":
        u = np.log(n)
    elif model == "loglog":
        if np.any(n <= 1):
            raise ValueError("loglog model needs n > 1")
        u = np.log(np.log(n))
    else:
        raise ValueError(f"unknown model {model!r}")
    v = np.log(a)
    p, se, c = _slope(u, v)
    mid = 0.5 * (np.log(n.min()) + np.log(n.max()))
    left = np.log(n) <= mid
    p1 = _slope(u[left], v[left])[0] if left.sum() >= 2 else float("nan")
    p2 = _slope(u[~left], v[~left])[0] if (~left).sum() >= 2 else float("nan")
    slow = bool(np.isfinite(p1) and np.isfinite(p2) and abs(p1 - p2) > SLOW_VARIATION_REL * abs(p))
    return FitResult(p, se, c, (float(n.min()), float(n.max())), int(n.size), (p1, p2), slow, model)


@dataclass
class Verdict:
    verdict: str
    reason: str
    fit: FitResult = None
    band: float = float("nan")

    def to_dict(self):
        return {"verdict": self.verdict, "reason": self.reason, "band": self.band,
                "fit": self.fit.to_dict() if self.fit else None}


def _analytic_rule(family_flags):
    if family_flags is None:
        return False
    if isinstance(family_flags, dict):
        return bool(family_flags.get("analytic_infinite", False))
    return bool(getattr(family_flags, "analytic_infinite", False))


def finiteness_verdict(series, family_flags=None, window=None):
    """Finite / infinite / inconclusive verdict for sum_n a_n.

    `family_flags` is a system or a dict; a registered analytic rule
    ("analytic_infinite") decides on its own.  Otherwise the fitted exponent
    must clear -1 by max(2 stderr, 0.05); windows with fewer than four
    points are inconclusive.
    """
    if _analytic_rule(family_flags):
        fit = None
        try:
            fit = fit_exponent(series, window)
        except ValueError:
            pass
        return Verdict(INFINITE, "analytic rule of the family", fit)
    n, _ = _as_series(series)
    lo, hi = window if window is not None else (n.min(), n.max())
    if int(np.sum((n >= lo) & (n <= hi))) < MIN_POINTS:
        return Verdict(INCONCLUSIVE, f"fewer than {MIN_POINTS} points in the window")
    fit = fit_exponent(series, window)
    band = max(2.0 * fit.stderr, BAND_FLOOR)
    if fit.exponent < -1.0 - band:
        return Verdict(FINITE, f"exponent {fit.exponent:.4g} < -1 - {band:.3g}", fit, band)
    if fit.exponent > -1.0 + band:
        return Verdict(INFINITE, f"exponent {fit.exponent:.4g} > -1 + {band:.3g}", fit, band)
    return Verdict(INCONCLUSIVE, f"exponent {fit.exponent:.4g} within {band:.3g} of -1", fit, band)


def theoretical_exponent(system, alpha):
    """Known decay exponent of mu(X_n) for a constant left parameter, or None.

    Available for LSV left branches followed by a single right branch that is
    linear at 1/2, where mu(X_n) decays like x_n, i.e. like n^(-1/alpha).
    """
    linear_right = system.right.name in ("dyadic", "low-slope", "contracting")
    single_beta = system.right.param_free or system.nu_B.kind == "discrete"
    if system.left.name == "lsv" and linear_right and single_beta and alpha and alpha > 0:
        return -1.0 / alpha
    return None


@dataclass
class AsymptoticsReport:
    family: str
    parameters: dict
    window: tuple
    fitted_exponent: float
    stderr: float
    theoretical_exponent: float
    verdict: str
    sandwich: dict = None
    slow_variation: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "family": self.family,
            "parameters": self.parameters,
            "window": list(self.window),
            "fitted_exponent": self.fitted_exponent,
            "stderr": self.stderr,
            "theoretical_exponent": self.theoretical_exponent,
            "verdict": self.verdict,
            "sandwich": self.sandwich,
            "slow_variation": self.slow_variation,
            "notes": list(self.notes),
        }


def default_ns(n_range, points=40):
    lo, hi = n_range
    return np.unique(np.round(np.geomspace(max(lo, 2), hi, points)).astype(int))


def sandwich_report(system, alpha1, alpha2, n_range=(100, 10**4), c=0.4, points=40, nodes=None):
    """Bracket mu(X_n) between the two constant-parameter reference systems.

    The lower system uses alpha1 (which must dominate every left branch near
    0), the upper system alpha2 (dominated on a set of positive mass).
    Overall verdict: infinite if the lower system is infinite, finite if the
    upper one is finite, inconclusive otherwise.
    """
    from .conditions import check_dominance
    from .maps import RandomMapSystem
    from .measures import dirac
    from .sequences import AlphaStream, predict_mu_xn, x_sequence

    dom = check_dominance(system, alpha1, alpha2, c)
    if not dom.passed:
        raise DominanceFailed(dom.message)
    ns = default_ns(n_range, points)
    sides = {}
    for key, a in (("lower", alpha1), ("upper", alpha2)):
        ref = RandomMapSystem(system.left, system.right, dirac(a), system.nu_B, f"{system.name}[alpha={a}]",
                              system.analytic_infinite)
        xs = x_sequence(ref, AlphaStream.constant(a), int(ns.max()))
        vals = predict_mu_xn(ref, a, ns, xs=xs, nodes=nodes)
        series = np.column_stack([ns, vals])
        v = finiteness_verdict(series, ref)
        sides[key] = {
            "alpha": a,
            "n": ns.tolist(),
            "predicted": vals.tolist(),
            "verdict": v.verdict,
            "fitted_exponent": v.fit.exponent if v.fit else None,
            "stderr": v.fit.stderr if v.fit else None,
            "theoretical_exponent": theoretical_exponent(ref, a),
        }
    lo_v, up_v = sides["lower"]["verdict"], sides["upper"]["verdict"]
    verdict = INFINITE if lo_v == INFINITE else FINITE if up_v == FINITE else INCONCLUSIVE
    ratio = np.asarray(sides["lower"]["predicted"]) / np.asarray(sides["upper"]["predicted"])
    sides["max_lower_over_upper"] = float(np.max(ratio))
    sides["dominance"] = dom.to_dict()
    chosen = sides["lower"] if verdict == INFINITE else sides["upper"]
    return AsymptoticsReport(
        family=system.name,
        parameters={"alpha1": alpha1, "alpha2": alpha2, "c": c, "nu_A": system.nu_A.describe(),
                    "nu_B": system.nu_B.describe()},
        window=(int(ns.min()), int(ns.max())),
        fitted_exponent=chosen["fitted_exponent"],
        stderr=chosen["stderr"],
        theoretical_exponent=chosen["theoretical_exponent"],
        verdict=verdict,
        sandwich=sides,
    )
