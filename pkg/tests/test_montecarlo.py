import numpy as np
import pytest

from randmaps.catalog import SYSTEMS, make_system
from randmaps.montecarlo import occupation_vs_prediction, return_time_histogram, run_orbit, x_cells


@pytest.fixture(scope="module")
def dyadic_orbit():
    d = make_system("dyadic")
    cells = [(0.25, 0.5), (0.75, 1.0), (0.0, 0.125), (0.5, 0.625), (0.125, 0.25)]
    return run_orbit(d, 0.7, 10**7, 0, cells, list(range(len(cells))))


def test_dyadic_ratios_match_lebesgue(dyadic_orbit):
    est = dyadic_orbit
    lebesgue = np.array([0.25, 0.25, 0.125, 0.125, 0.125]) / 0.5
    assert np.all(np.abs(est.ratios - lebesgue) <= 3 * est.ci_halfwidth)
    assert not est.unreliable


def test_dyadic_first_cell_short_run():
    d = make_system("dyadic")
    est = run_orbit(d, 0.3, 10**6, 11, [(0.25, 0.5), (0.75, 1.0)], [1, 2])
    assert abs(est.ratio_of(1) - 0.5) <= 3 * est.ci_halfwidth[0]
    assert abs(est.ratio_of(2) - 0.5) <= 3 * est.ci_halfwidth[1]


def test_self_ratio_is_one():
    est = run_orbit(make_system("lsv"), 0.9, 10**4, 0, [(0.5, 1.0)], [0])
    assert est.ratios[0] == 1.0


def test_seed_determinism():
    s = make_system("critical")
    a = run_orbit(s, 0.7, 10**5, 4, [(0.5, 1.0), (0.2, 0.5)], [0, 1])
    b = run_orbit(s, 0.7, 10**5, 4, [(0.5, 1.0), (0.2, 0.5)], [0, 1])
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.count_Y == b.count_Y


def test_thread_count_does_not_change_counts():
    s = make_system("lsv")
    a = run_orbit(s, 0.7, 10**5, 4, [(0.2, 0.5)], [1], threads=1)
    b = run_orbit(s, 0.7, 10**5, 4, [(0.2, 0.5)], [1], threads=3)
    np.testing.assert_array_equal(a.counts, b.counts)


@pytest.mark.parametrize("family", sorted(SYSTEMS))
def test_orbit_stays_inside(family):
    est = run_orbit(make_system(family), 0.7, 10**6, 2, [(0.5, 1.0)], [0])
    assert est.absorbed_chains == 0


def test_dyadic_return_time_law():
    h = return_time_histogram(make_system("dyadic"), 10**5, rng_seed=0)
    p = h.probabilities()
    for t, pt in zip(h.times[:10], p[:10]):
        q = 2.0**-t
        assert abs(pt - q) <= 3 * np.sqrt(q * (1 - q) / h.n_returns)
    assert h.mean == pytest.approx(2.0, rel=0.05)
    assert h.censored == 0


def test_flat_point_heavy_tail():
    h = return_time_histogram(make_system("flat"), 10**4, cap=10**4, rng_seed=0)
    assert h.tail_exponent >= -1.0


def test_occupation_vs_identical_prediction():
    s = make_system("linear-low-slope")
    cells, labels = x_cells(s, None, 6)
    est = run_orbit(s, 0.7, 10**5, 0, cells, labels)
    pred = {n: est.ratio_of(n) for n in labels}
    for _, e, p, r in occupation_vs_prediction(est, pred):
        assert r == pytest.approx(1.0, abs=1e-12)
        assert p == pytest.approx(e, rel=1e-12)


def test_x_cells_labels(low_slope):
    cells, labels = x_cells(low_slope((2.0,)), None, 4)
    assert labels == [1, 2, 3, 4]
    assert cells[0] == (0.25, 0.5)
