import numpy as np
import pytest

from randmaps.asymptotics import (FINITE, INCONCLUSIVE, INFINITE, DominanceFailed, finiteness_verdict,
                                  fit_exponent, sandwich_report)
from randmaps.catalog import make_system
from randmaps.measures import dirac, uniform
from randmaps.sequences import AlphaStream, x_sequence


def _series(f, lo, hi, points=60):
    n = np.unique(np.round(np.geomspace(lo, hi, points)))
    return np.column_stack([n, f(n)])


def test_exact_power_law():
    fit = fit_exponent(_series(lambda n: n**-2.0, 10, 100), (10, 100))
    assert fit.exponent == pytest.approx(-2.0, abs=1e-12)
    assert fit.stderr <= 1e-8


def test_lsv_orbit_exponent():
    s = make_system("lsv", nu_A=dirac(1.0))
    xs = x_sequence(s, AlphaStream.constant(1.0), 10**5)
    n = np.unique(np.geomspace(1e3, 1e5, 100).astype(int))
    fit = fit_exponent(np.column_stack([n, xs[n - 1]]), (1e3, 1e4 * 10))
    assert fit.exponent == pytest.approx(-1.0, abs=0.05)


def test_log_decay_is_flagged_slow():
    fit = fit_exponent(_series(lambda n: 1.0 / np.log(n), 1e2, 1e4), (1e2, 1e4))
    assert -0.25 < fit.exponent < 0.0
    assert fit.slow_variation


def test_loglog_model_recovers_log_power():
    fit = fit_exponent(_series(lambda n: np.log(n) ** -0.5, 1e2, 1e6), model="loglog")
    assert fit.exponent == pytest.approx(-0.5, abs=1e-10)


def test_verdicts():
    assert finiteness_verdict(_series(lambda n: 2.0 ** (1 - n), 2, 40)).verdict == FINITE
    assert finiteness_verdict(_series(lambda n: n**-0.5, 1e2, 1e4)).verdict == INFINITE
    assert finiteness_verdict(_series(lambda n: 1.0 / n, 1e2, 1e4)).verdict == INCONCLUSIVE
    assert finiteness_verdict(_series(lambda n: n**-3.0, 1e2, 1e4)[:3]).verdict == INCONCLUSIVE


def test_flat_family_analytic_rule():
    s = make_system("flat")
    v = finiteness_verdict(_series(lambda n: n**-5.0, 1e2, 1e4), s)
    assert v.verdict == INFINITE
    assert v.reason == "analytic rule of the family"


def test_sandwich_finite_and_infinite():
    fin = sandwich_report(make_system("lsv", nu_A=uniform(0.5, 0.9)), 0.5, 0.6)
    assert fin.verdict == FINITE
    assert fin.sandwich["dominance"]["passed"]
    inf = sandwich_report(make_system("lsv", nu_A=uniform(1.2, 2.0)), 1.2, 2.0)
    assert inf.verdict == INFINITE
    assert set(inf.to_dict()) >= {"family", "parameters", "window", "fitted_exponent", "stderr",
                                  "theoretical_exponent", "verdict", "sandwich", "slow_variation", "notes"}


def test_sandwich_boundary_lower_system_is_undecided():
    # alpha1 = 1 gives mu(X_n) of order 1/n, on the boundary of the guard band
    rep = sandwich_report(make_system("lsv", nu_A=uniform(1.0, 2.0)), 1.0, 2.0)
    assert rep.sandwich["lower"]["verdict"] == INCONCLUSIVE
    assert rep.sandwich["upper"]["verdict"] == INFINITE
    assert rep.verdict == INCONCLUSIVE


def test_sandwich_collapses_for_singleton():
    s = make_system("lsv", nu_A=dirac(0.7))
    rep = sandwich_report(s, 0.7, 0.7)
    lo, up = rep.sandwich["lower"], rep.sandwich["upper"]
    assert lo["predicted"] == up["predicted"]
    single = finiteness_verdict(np.column_stack([lo["n"], lo["predicted"]]), s)
    assert rep.verdict == single.verdict == lo["verdict"]


def test_sandwich_bounded_ratio():
    rep = sandwich_report(make_system("lsv", nu_A=uniform(0.5, 2.0)), 0.5, 1.5)
    ratio = np.array(rep.sandwich["lower"]["predicted"]) / np.array(rep.sandwich["upper"]["predicted"])
    assert rep.sandwich["max_lower_over_upper"] == pytest.approx(ratio.max())
    assert np.isfinite(ratio.max())


def test_sandwich_rejects_reversed_reference():
    with pytest.raises(DominanceFailed):
        sandwich_report(make_system("lsv", nu_A=uniform(0.5, 2.0)), 2.0, 2.0)


def test_heavy_atom_series_is_partial_and_of_order_one_over_n():
    from randmaps.reproduce import heavy_atom_series
    out = heavy_atom_series(k=2)
    assert out["partial"] and max(out["atoms"]) == 60 and max(out["n"]) < 60
    assert sum(out["weights"]) == pytest.approx(1.0, abs=1e-12)
    # mu(X_n) stays above a constant multiple of 1/n across the computed window
    assert out["min_n_times_mu"] > 1.0
