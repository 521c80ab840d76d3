"""Numerical checks of the standing branch conditions and of left-branch dominance."""
from dataclasses import dataclass, field

import numpy as np

from .maps import HALF

PASS, FAIL, UNDETERMINED = "pass", "fail", "undetermined"
PASS_SAMPLED = "pass (sampled)"
PASS_STRUCTURAL = "pass (structural)"

SLOPE_CEILING = 1e12


@dataclass
class ConditionReport:
    status: dict
    details: dict = field(default_factory=dict)
    max_slope_at_half: float = float("nan")
    integral_B: float = float("nan")

    @property
    def all_pass(self):
        return all(s.startswith(PASS) for s in self.status.values())

    def to_dict(self):
        return {
            "status": dict(self.status),
            "details": {k: list(v) if isinstance(v, (list, tuple)) else v for k, v in self.details.items()},
            "max_slope_at_half": self.max_slope_at_half,
            "integral_B": self.integral_B,
        }


def _param_nodes(measure, n):
    if measure.kind == "discrete":
        return list(measure.quadrature()[0])
    return list(measure.quadrature(n)[0])


def _nondecreasing(vals, rtol=1e-9):
    vals = np.asarray(vals, dtype=float)
    fin = vals[np.isfinite(vals)]
    if fin.size < 2:
        return True
    scale = max(np.max(np.abs(fin)), 1.0)
    return bool(np.all(np.diff(fin) >= -rtol * scale))


def check_conditions(system, grid_size=1024, quadrature_nodes=256, ceiling=SLOPE_CEILING, param_nodes=16):
    """Check conditions (0)-(2), the bounded-slope condition (A) and the integral condition (B).

    Branch shape conditions are checked by sampling parameters at quadrature
    nodes of nu_A / nu_B and evaluating on a uniform interior grid.
    """
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    status, details = {}, {"1": [], "2": [], "A": [], "B": []}
    status["0"] = PASS_STRUCTURAL

    gl = np.linspace(0.0, HALF, grid_size + 1)[1:-1]
    gr = np.linspace(HALF, 1.0, grid_size + 1)[1:-1]
    ok1 = ok2 = True
    alphas = _param_nodes(system.nu_A, param_nodes)
    betas = _param_nodes(system.nu_B, param_nodes)

    for a in alphas:
        f, df = system.left.f, system.left.deriv
        ends = (float(f(0.0, a)), float(f(HALF, a)))
        vals, der = f(gl, a), df(gl, a)
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(der))) or not np.all(np.isfinite(ends)):
            ok1 = False
            details["1"].append(f"non-finite left branch evaluation at alpha={a!r}")
            continue
        if abs(ends[0]) > 1e-12 or abs(ends[1] - 1.0) > 1e-12:
            ok1 = False
            details["1"].append(f"tau({a!r}) endpoints {ends}")
        if np.any(np.diff(vals) <= 0):
            ok1 = False
            details["1"].append(f"tau({a!r}) not strictly increasing")
        d0 = float(df(0.0, a))
        if not _nondecreasing(der) or np.any(der <= 1.0) or d0 < 1.0 - 1e-12:
            ok2 = False
            details["2"].append(f"tau'({a!r}) violates monotone/expansion requirements (tau'(0)={d0!r})")

    for b in betas:
        f, df = system.right.f, system.right.deriv
        s_half = float(f(HALF, b))
        vals, der = f(gr, b), df(gr, b)
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(der))):
            ok1 = False
            details["1"].append(f"non-finite right branch evaluation at beta={b!r}")
            continue
        if abs(s_half) > 1e-12:
            ok1 = False
            details["1"].append(f"S({b!r})(1/2) = {s_half!r}")
        if float(f(1.0, b)) > 1.0 + 1e-12:
            ok1 = False
            details["1"].append(f"S({b!r})(1) exceeds 1")
        resolved = vals > 1e-290
        if np.any(np.diff(vals[resolved]) <= 0):
            ok1 = False
            details["1"].append(f"S({b!r}) not strictly increasing")
        # strict positivity is only checkable where S itself did not underflow
        if not _nondecreasing(der) or np.any(der[resolved] <= 0) or float(df(HALF, b)) < 0:
            ok2 = False
            details["2"].append(f"S'({b!r}) violates monotone/positivity requirements")
        if not np.all(resolved):
            details["2"].append(f"S({b!r}) underflows on {int(np.sum(~resolved))} grid points; positivity skipped there")
    status["1"] = PASS if ok1 else FAIL
    status["2"] = PASS if ok2 else FAIL

    # (A): sup tau'(1/2) < inf
    nodes_A = _param_nodes(system.nu_A, quadrature_nodes)
    slopes = np.array([float(system.left.deriv(HALF, a)) for a in nodes_A])
    bad = ~np.isfinite(slopes) | (slopes > ceiling)
    max_slope = float(np.max(np.where(np.isnan(slopes), np.inf, slopes)))
    flag = system.left.bounded_slope_at_half
    bounded_support = all(np.isfinite(system.nu_A.support)) or system.left.param_free
    if flag is False:
        status["A"] = FAIL
        details["A"].append("family declares an unbounded slope at 1/2")
    elif np.any(bad):
        status["A"] = FAIL
        details["A"].append(f"tau'(1/2) exceeds {ceiling:g} at alpha={nodes_A[int(np.argmax(bad))]!r}")
    elif flag and bounded_support:
        status["A"] = PASS
    else:
        status["A"] = PASS_SAMPLED
    details["A"].append(f"max sampled tau'(1/2) = {max_slope!r}")

    # (B): integral of 1 / (x_1 - x_2^alpha) d nu_A
    if system.nu_A.kind == "discrete" or system.left.param_free:
        pts, wts = system.nu_A.quadrature()
        if system.left.param_free:
            pts, wts = np.array([pts[0]]), np.array([1.0])
    else:
        pts, wts = system.nu_A.quadrature(quadrature_nodes)
    gaps = np.array([HALF - system.left.branch(a).inverse(HALF) for a in pts])
    if np.any(gaps <= 0):
        status["B"] = FAIL
        integral = float("inf")
    else:
        integral = float(np.sum(wts / gaps))
        status["B"] = PASS if np.isfinite(integral) else FAIL
    details["B"].append(f"quadrature value {integral!r} with {len(pts)} nodes")
    return ConditionReport(status, details, max_slope, integral)


@dataclass
class DominanceReport:
    passed: bool
    upper_ok: bool
    lower_mass: float
    witness: object = None
    message: str = ""

    def to_dict(self):
        return {"passed": self.passed, "upper_ok": self.upper_ok, "lower_mass": self.lower_mass,
                "witness": self.witness, "message": self.message}


def check_dominance(system, alpha1, alpha2, c, grid_size=256, n_params=256, atol=1e-15):
    """Check that tau_alpha <= tau_alpha1 on (0, c) nu_A-a.s. and tau_alpha >= tau_alpha2 with positive mass.

    The almost-sure clause is tested on quadrature nodes of nu_A; where the
    family declares pointwise monotonicity in alpha the analytic answer is
    used as well, and the clause passes only if both agree.
    """
    if not 0 < c < HALF:
        raise ValueError("c must lie in (0, 1/2)")
    system.check_params(alpha1, None)
    system.check_params(alpha2, None)
    grid = np.linspace(0.0, c, grid_size + 1)[1:]
    grid = grid[grid < c]
    f = system.left.f
    top = f(grid, alpha1)
    bottom = f(grid, alpha2)

    nu = system.nu_A
    if nu.kind == "discrete":
        pts, wts = nu.quadrature()
    else:
        pts, wts = nu.quadrature(n_params)
        lo, hi = nu.support
        pts = np.concatenate([[lo], pts, [hi]]) if np.all(np.isfinite([lo, hi])) else pts
        wts = np.concatenate([[0.0], wts, [0.0]]) if len(pts) == len(wts) + 2 else wts

    witness = None
    for a in pts:
        if np.any(f(grid, a) > top + atol):
            witness = float(a)
            break
    upper_ok = witness is None
    sign = system.left.dominance
    if sign and upper_ok:
        lo, _ = nu.support
        upper_ok = (alpha1 <= lo + 1e-12) if sign > 0 else (alpha1 >= nu.support[1] - 1e-12)
        if not upper_ok:
            witness = float(lo) if sign > 0 else float(nu.support[1])

    below = np.array([np.all(f(grid, a) >= bottom - atol) for a in pts])
    lower_mass = float(np.sum(np.asarray(wts)[below]))
    if sign and nu.kind == "continuous":
        lower_mass = nu.cdf(alpha2) if sign > 0 else 1.0 - nu.cdf(alpha2)
    passed = upper_ok and lower_mass > 0
    if not upper_ok:
        msg = f"tau_alpha exceeds tau_{alpha1!r} on (0, {c}) at alpha={witness!r}"
    elif lower_mass <= 0:
        msg = f"no positive-mass set of alpha with tau_alpha >= tau_{alpha2!r}"
    else:
        msg = "dominance holds"
    return DominanceReport(passed, upper_ok, lower_mass, witness, msg)
