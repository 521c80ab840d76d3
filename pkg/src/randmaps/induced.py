"""First-return map to Y = [1/2, 1].

A return from x in Y applies S_beta once and then left branches until the
orbit re-enters Y.  ``return_time`` counts the left-branch applications only;
``first_return_time`` adds the initial right-branch step.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from .maps import HALF
from .sequences import partition_sequences

DEFAULT_CAP = 10**4


class ReturnTimeMismatch(RuntimeError):
    """Interior points of one Y-cell disagree on their return time."""


@dataclass(frozen=True)
class InducedStepResult:
    landing: float
    return_time: int
    derivative: float
    censored: bool

    @property
    def first_return_time(self):
        return self.return_time + 1


def induced_step(system, x, beta, alpha_stream, cap=DEFAULT_CAP):
    """One application of the induced map at x in (1/2, 1].

    Left parameters are drawn from `alpha_stream` in order.  When `cap` left
    steps pass without re-entering Y the result is marked censored and holds
    the current (left-half) point.
    """
    x = float(x)
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if x == HALF:
        raise ValueError("x = 1/2 never returns: S_beta(1/2) = 0 is fixed by every left branch")
    if not HALF < x <= 1.0:
        raise ValueError(f"x={x!r} outside (1/2, 1]")
    z = float(system.right.f(x, beta))
    der = float(system.right.deriv(x, beta))
    k = 0
    while z <= HALF:
        if k >= cap:
            return InducedStepResult(z, k, der, True)
        a = alpha_stream.draw()
        der *= float(system.left.deriv(z, a))
        z = float(system.left.f(z, a))
        k += 1
    return InducedStepResult(z, k, der, False)


def hopeless_threshold(system, cap):
    """Level below which a point of [0, 1/2] cannot re-enter Y within `cap` left steps.

    Uses the pointwise largest left branch, available when the left family
    is parameter-free or declares monotone dependence on its parameter: that
    branch maps its own cell X_m onto X_{m-1}, so a point at or below its
    x_{cap+1} needs more than `cap` steps under any parameter sequence.
    Returns 0.0 when no envelope is known.
    """
    from .sequences import AlphaStream, SequenceTruncated, x_sequence

    left = system.left
    if left.param_free:
        a = None
    elif left.dominance > 0:
        a = system.nu_A.support[0]
    elif left.dominance < 0:
        a = system.nu_A.support[1]
    else:
        return 0.0
    if a is not None and not np.isfinite(a):
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SequenceTruncated)
        xs = x_sequence(system, AlphaStream.constant(a), cap + 1)
    return float(xs[cap]) if len(xs) == cap + 2 else 0.0


def induced_batch(system, x, rng, cap=DEFAULT_CAP, beta=None, with_derivative=False, threshold=None):
    """Vectorized induced step with fresh (beta, alpha_1, alpha_2, ...) per sample.

    Returns (landing, return_time, censored) and, on request, the derivative.
    A fixed `beta` may be given; otherwise it is drawn from nu_B per sample.
    Samples whose first left-half point lies at or below `threshold` (see
    `hopeless_threshold`) are censored without iterating; this changes
    nothing but the running time.  Censored samples keep their last point.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if beta is None:
        beta = 0.0 if system.right.param_free else system.sample_beta(rng, n)
    b = np.broadcast_to(np.asarray(beta, dtype=float), x.shape)
    z = np.asarray(system.right.f(x, b), dtype=float).copy()
    der = np.asarray(system.right.deriv(x, b), dtype=float).copy() if with_derivative else None
    k = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(z <= HALF)
    hopeless = np.zeros(n, dtype=bool)
    if threshold:
        hopeless[active] = z[active] <= threshold
        active = active[~hopeless[active]]
    fixed_alpha = system.left.param_free or system.nu_A.is_singleton
    a_const = None if system.left.param_free else (system.nu_A.atoms[0] if fixed_alpha else None)
    steps = 0
    while active.size and steps < cap:
        za = z[active]
        a = a_const if fixed_alpha else system.sample_alpha(rng, active.size)
        if with_derivative:
            der[active] *= system.left.deriv(za, a)
        z[active] = system.left.f(za, a)
        k[active] += 1
        steps += 1
        active = active[z[active] <= HALF]
    censored = np.zeros(n, dtype=bool)
    censored[active] = True
    censored |= hopeless
    if with_derivative:
        return z, k, censored, der
    return z, k, censored


def return_time_of_cell(system, n, beta, alpha_stream, n_points=3):
    """Common number of left steps for points of Y_n, i.e. eta + n - 1.

    Checks the claim at `n_points` interior points by following one fixed
    alpha-sequence: S_beta maps Y_n into X_{eta+n-1}, and a point of X_m needs
    the left branches alpha_m, ..., alpha_1 in that order to return.
    """
    if n < 1:
        raise ValueError("cell index must be at least 1")
    ps = partition_sequences(system, alpha_stream, beta, n + 2, M=n + 1)
    lo, hi = ps.Y_cell(n)
    alphas = alpha_stream.prefix(len(ps.xs))
    expected = ps.eta + n - 1
    xs_full = np.concatenate([[1.0], ps.xs])  # xs_full[m] = x_m
    for t in (np.arange(1, n_points + 1) / (n_points + 1)):
        x = lo + t * (hi - lo)
        z = float(system.right.f(x, beta))
        # m with z in (x_{m+1}, x_m]
        m = int(np.sum(xs_full >= z)) - 1
        for j in range(m, 0, -1):
            if z > HALF:
                raise ReturnTimeMismatch(f"early return from x={x!r}")
            z = float(system.left.f(z, None if system.left.param_free else alphas[j - 1]))
        if m != expected or z <= HALF:
            raise ReturnTimeMismatch(f"point {x!r} of Y_{n} returns after {m} steps, expected {expected}")
    return expected
