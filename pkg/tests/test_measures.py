import numpy as np
import pytest
from scipy import stats

from randmaps.measures import DiscreteMeasure, dirac, pareto_density, power_density, uniform


@pytest.mark.parametrize("measure", [uniform(0.5, 2.0), power_density(0.5), pareto_density(2.5)],
                         ids=["uniform", "power", "pareto"])
def test_sampler_matches_cdf(measure):
    x = measure.sample(np.random.default_rng(7), 10**5)
    d = stats.kstest(x, measure.cdf).statistic
    assert d <= 0.01


def test_discrete_sampler_frequencies():
    m = DiscreteMeasure((1.0, 2.0, 5.0), (0.2, 0.3, 0.5))
    x = m.sample(np.random.default_rng(1), 10**5)
    freq = np.array([np.mean(x == a) for a in m.atoms])
    assert np.max(np.abs(freq - np.array(m.weights))) < 0.01


def test_quadrature_weights_and_moments():
    m = uniform(1.0, 3.0)
    nodes, w = m.quadrature()
    assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(w * nodes) == pytest.approx(2.0, abs=1e-12)
    assert np.all((nodes > 1.0) & (nodes < 3.0))


def test_quadrature_between_partial_mass():
    m = uniform(0.0, 1.0)
    nodes, w = m.quadrature_between(0.25, 0.5)
    assert np.sum(w) == pytest.approx(0.25, rel=1e-6)


def test_dirac_is_singleton():
    d = dirac(1.5)
    assert d.is_singleton
    assert d.support == (1.5, 1.5)
    assert d.contains(1.5) and not d.contains(1.6)
