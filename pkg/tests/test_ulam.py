import numpy as np
import pytest

from randmaps.catalog import make_system
from randmaps.conditions import check_conditions
from randmaps.montecarlo import run_orbit
from randmaps.ulam import (IntervalPartition, PartitionMismatch, build_ulam_P, build_ulam_PY,
                           check_monotone_preservation, exact_dyadic_matrix, extend_density, induced_from_P,
                           invariant_density_h0)


def test_dyadic_four_cell_matrix(dyadic):
    op = build_ulam_P(dyadic, IntervalPartition.uniform(0.0, 1.0, 4), 4000, rng_seed=0)
    exact = exact_dyadic_matrix(4).dense()
    sig = np.sqrt(exact * (1 - exact) / 4000)
    assert np.all(np.abs(op.dense() - exact) <= 3 * sig + 1e-12)
    np.testing.assert_allclose(op.row_sums(), 1.0, atol=1e-9)


def test_deterministic_image_gives_unit_row(dyadic):
    # (1/8, 1/4] doubles onto (1/4, 1/2], a single target cell
    part = IntervalPartition(np.array([0.0, 0.125, 0.25, 0.5, 1.0]))
    op = build_ulam_P(dyadic, part, 500, rng_seed=1)
    row = op.dense()[1]
    assert row[2] == pytest.approx(1.0, abs=1e-12)
    assert np.sum(row) == pytest.approx(1.0, abs=1e-9)


@pytest.fixture(scope="module")
def dyadic_density():
    d = make_system("dyadic")
    yp = IntervalPartition.y_uniform(8)
    PY = build_ulam_PY(d, yp, 10**4, rng_seed=1)
    return d, PY, invariant_density_h0(PY)


def test_dyadic_induced_density(dyadic_density):
    _, PY, est = dyadic_density
    np.testing.assert_allclose(PY.row_sums(), 1.0, atol=1e-9)
    assert est.converged
    np.testing.assert_allclose(est.h0, 2.0, atol=0.05)
    M = PY.dense()
    assert np.sum(np.abs(M.T @ est.h0 * PY.partition.widths - est.h0 * PY.partition.widths)) <= 2e-4 * 2 + 1e-12


def test_dyadic_extension_uniform_cells(dyadic_density):
    d, _, est = dyadic_density
    xp = IntervalPartition.uniform(0.0, 1.0, 64)
    P = build_ulam_P(d, xp, 10**4, rng_seed=2)
    extend_density(est, P, xp, 60)
    np.testing.assert_allclose(est.h_ext, 2.0, atol=0.05)
    y = xp.y_mask
    h0_on_x = est.h0[est.y_partition.locate(0.5 * (xp.left + xp.right)[y])]
    assert np.all(est.h_ext[y] >= h0_on_x - 1e-15)


def test_extension_needs_refining_partition(dyadic_density):
    d, _, est = dyadic_density
    xp = IntervalPartition.uniform(0.0, 1.0, 10)
    P = build_ulam_P(d, xp, 200, rng_seed=2)
    with pytest.raises(PartitionMismatch):
        extend_density(est, P, xp, 10)


def test_single_atom_cell_ratios(low_slope):
    s = low_slope((2.0,))
    yp = IntervalPartition.y_uniform(64)
    est = invariant_density_h0(build_ulam_PY(s, yp, 10**4, rng_seed=3))
    xp = IntervalPartition.xcell_adapted(s, None, 12, 2, yp)
    extend_density(est, build_ulam_P(s, xp, 10**4, rng_seed=4), xp)
    for n in range(3, 9):
        assert est.mu_X(n) / est.mu_X(n + 1) == pytest.approx(2.0, rel=0.15)


def test_h0_non_increasing_matches_occupation(low_slope):
    s = low_slope((1.0,))
    yp = IntervalPartition.y_uniform(16)
    PY = build_ulam_PY(s, yp, 10**4, rng_seed=5)
    est = invariant_density_h0(PY)
    assert np.all(np.diff(est.h0) <= 1e-6 + 3 * np.hypot(est.sigma[1:], est.sigma[:-1]))
    assert np.isfinite(est.h0.max() / est.h0.min())
    # oracle: occupation of the Y-cells along long annealed orbits, normalized by the visits to Y
    cells = list(zip(yp.left, yp.right))
    occ = run_orbit(s, 0.7, 10**6, 9, cells, list(range(16)), n_shards=4, chains_per_shard=64)
    occ = occ.ratios / yp.widths
    np.testing.assert_allclose(est.h0, occ, rtol=0.10)


def test_consistency_of_P_and_PY(dyadic):
    yp = IntervalPartition.y_uniform(8)
    xp = IntervalPartition.xcell_adapted(dyadic, None, 20, 2, yp)
    P = build_ulam_P(dyadic, xp, 10**4, rng_seed=6)
    from_P = induced_from_P(P, 200)
    PY = build_ulam_PY(dyadic, yp, 10**4, rng_seed=7).dense()
    assert np.max(np.sum(np.abs(from_P - PY), axis=1)) <= 0.05


def test_monotone_exact_matrix():
    rep = check_monotone_preservation(exact_dyadic_matrix(4), trials=50)
    assert rep.passed and rep.violations == 0 and rep.max_violation == 0.0


def test_monotone_constant_and_indicator(dyadic_density):
    _, PY, _ = dyadic_density
    w = PY.partition.widths
    out = PY.push_mass(w) / w
    assert np.max(np.abs(out - out.mean())) <= 3 * np.max(PY.output_sigma(w) / w) + 1e-12
    ind = np.r_[1.0, np.zeros(PY.n_cells - 1)] * w
    inc = np.diff(PY.push_mass(ind) / w)
    assert np.all(inc <= 1e-6 + 3 * PY.diff_sigma(ind))


def test_diff_sigma_covers_seed_spread():
    # the standard error used by the monotonicity check must not understate the
    # realized spread of adjacent output differences across independent matrices
    s = make_system("lsv")
    yp = IntervalPartition.y_uniform(12)
    m = yp.widths.copy()
    diffs, sig = [], []
    for seed in range(40):
        PY = build_ulam_PY(s, yp, 400, cap=2000, rng_seed=seed)
        diffs.append(np.diff(PY.push_mass(m) / yp.widths))
        sig.append(PY.diff_sigma(m))
    spread = np.std(np.array(diffs), axis=0, ddof=1)
    assert np.all(spread <= 1.3 * np.mean(np.array(sig), axis=0))


@pytest.mark.parametrize("family", ["dyadic", "linear-low-slope", "lsv-contracting"])
def test_h0_bounded_under_refinement(family):
    s = make_system(family)
    rep = check_conditions(s)
    assert rep.status["B"].startswith("pass")
    for n in (64, 128, 256, 512):
        est = invariant_density_h0(build_ulam_PY(s, IntervalPartition.y_uniform(n), 1000, rng_seed=n))
        assert est.h0.max() <= 10 * np.median(est.h0)
        if rep.status["A"].startswith("pass"):
            assert est.h0.min() >= 0.01


def test_counterexample_last_cell_shrinks():
    s = make_system("counterexample")
    last = []
    for n in (64, 128, 256):
        est = invariant_density_h0(build_ulam_PY(s, IntervalPartition.y_uniform(n), 4000, rng_seed=n))
        last.append(est.h0[-1])
    assert last[0] > last[1] > last[2]
