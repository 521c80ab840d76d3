import warnings

import numpy as np
import pytest

from randmaps.catalog import DOUBLING, make_system
from randmaps.maps import BranchFamily, RandomMapSystem
from randmaps.measures import DiscreteMeasure, dirac, uniform
from randmaps.sequences import (AlphaStream, SequenceTruncated, eta_index, find_n0, partition_sequences,
                                predict_mu_xn, x_sequence, y_sequence)


def test_x_sequence_doubling():
    xs = x_sequence(make_system("dyadic"), AlphaStream.constant(None), 5)
    np.testing.assert_allclose(xs, [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625], rtol=0, atol=1e-15)


def test_x2_closed_forms():
    s = make_system("lsv", nu_A=dirac(1.0))
    assert x_sequence(s, AlphaStream.constant(1.0), 2)[1] == pytest.approx((np.sqrt(5) - 1) / 4, abs=1e-13)
    ce = make_system("counterexample")
    assert x_sequence(ce, AlphaStream.constant(None), 2)[1] == pytest.approx(0.375, abs=1e-13)


def test_eta_examples(low_slope):
    s = low_slope((3.0,))
    xs = x_sequence(s, AlphaStream.constant(None), 10)
    assert eta_index(s, xs, 3.0) == 3
    d = make_system("dyadic")
    assert eta_index(d, x_sequence(d, AlphaStream.constant(None), 10), None) == 0


@pytest.mark.parametrize("beta", [1.0, 1.5, 2.0, 2.7])
def test_wide_entrance_level_sets(beta):
    s = make_system("wide-entrance", nu_A=dirac(0.0))
    ps = partition_sequences(s, AlphaStream.constant(0.0), beta, 40)
    k = int(np.floor(beta))
    assert ps.eta == k
    n = np.arange(1, 30)
    np.testing.assert_allclose(ps.y_off[n], 2.0 ** (-(n + k) / beta), rtol=1e-12)


def test_y_sequence_examples(low_slope, dyadic):
    s = low_slope((2.0,))
    xs = x_sequence(s, AlphaStream.constant(None), 20)
    ys = y_sequence(s, xs, eta_index(s, xs, 2.0), 2.0, 10)
    assert ys[1] == pytest.approx(0.75, abs=1e-15)
    xs = x_sequence(dyadic, AlphaStream.constant(None), 30)
    ys = y_sequence(dyadic, xs, 0, None, 20)
    n = np.arange(0, 20)
    np.testing.assert_allclose(ys[n], 0.5 + 2.0 ** (-(n + 1)), atol=1e-15)


def test_find_n0_dyadic(dyadic):
    assert find_n0(dyadic, 0.1) == 5
    assert find_n0(dyadic, 0.9) == 2


def test_find_n0_first_index_accepted():
    # S(x) = sqrt(2x - 1): steep at 1/2, so y_2 - 1/2 = 1/8 against x_1 - x_2 = 1/4
    steep = BranchFamily("steep", "right", lambda x, p: np.sqrt(np.maximum(2 * np.asarray(x) - 1, 0.0)),
                         param_free=True)
    s = RandomMapSystem(DOUBLING, steep, dirac(0.0), dirac(0.0), "steep")
    assert find_n0(s, 0.99) == 1


def test_predict_single_and_two_atoms(low_slope):
    assert predict_mu_xn(low_slope((1.0,)), None, 6) == pytest.approx(0.03125, rel=1e-12)
    assert predict_mu_xn(low_slope((1.0, 2.0)), None, 6) == pytest.approx(3 / 64, rel=1e-12)


def test_predict_beyond_all_eta_is_pure_sum(low_slope):
    s = low_slope((1.0, 3.0), (0.25, 0.75))
    xs = x_sequence(s, AlphaStream.constant(None), 40)
    n = 12
    expect = 0.0
    for b, p in zip((1.0, 3.0), (0.25, 0.75)):
        eta = eta_index(s, xs, b)
        ys = y_sequence(s, xs, eta, b, n)
        expect += p * (ys[n - eta - 1] - 0.5)
    assert predict_mu_xn(s, None, n) == pytest.approx(expect, rel=1e-12)


def test_predict_continuous_wide_entrance():
    # alpha = 0: x_n = 2^-n and, for beta in [k, k + 1), eta = k, so the three regions are explicit
    s = make_system("wide-entrance", nu_A=dirac(0.0))
    nodes = 4096
    n = 30
    beta, w = s.nu_B.quadrature_between(1.0, n - 1, nodes)
    below = np.sum(w * 2.0 ** (-(n - 1) / beta))
    mid = 0.5 * (s.nu_B.cdf(n) - s.nu_B.cdf(n - 1))
    above = 1.0 - s.nu_B.cdf(n)
    assert predict_mu_xn(s, 0.0, n, nodes=nodes) == pytest.approx(below + mid + above, rel=1e-4)


def test_alpha_stream_prefix_is_stable():
    m = uniform(0.5, 2.0)
    a = AlphaStream(m, seed=3)
    first = a.prefix(10)
    long = AlphaStream(m, seed=3).prefix(10000)
    np.testing.assert_array_equal(first, long[:10])
    assert a[1] == first[0]
    assert a.draw() == first[0] and a.draw() == first[1]


def test_truncation_warns():
    d = make_system("dyadic")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        xs = x_sequence(d, AlphaStream.constant(None), 2000)
    assert len(xs) < 2001
    assert any(issubclass(x.category, SequenceTruncated) for x in w)
    assert np.all(np.diff(xs) < 0)


def test_partition_cells(low_slope):
    ps = partition_sequences(low_slope((2.0,)), AlphaStream.constant(None), 2.0, 10)
    assert ps.X_cell(0) == (0.5, 1.0)
    assert ps.X_cell(2) == (0.125, 0.25)
    lo, hi = ps.Y_cell(1)
    assert (lo, hi) == (ps.ys[1], ps.ys[0])
