"""Annealed random interval maps with an indifferent fixed point, studied through induced maps and Ulam densities."""
from .asymptotics import finiteness_verdict, fit_exponent, sandwich_report
from .catalog import SYSTEMS, make_system
from .conditions import check_conditions, check_dominance
from .induced import induced_step, return_time_of_cell
from .maps import RandomMapSystem, eval_map, invert_left, invert_right
from .measures import DiscreteMeasure, dirac, pareto_density, power_density, uniform
from .montecarlo import occupation_vs_prediction, return_time_histogram, run_orbit
from .sequences import AlphaStream, eta_index, find_n0, partition_sequences, predict_mu_xn, x_sequence, y_sequence
from .ulam import (IntervalPartition, build_ulam_P, build_ulam_PY, check_monotone_preservation, extend_density,
                   invariant_density_h0)

__version__ = "0.1.0"

__all__ = [
    "AlphaStream", "DiscreteMeasure", "IntervalPartition", "RandomMapSystem", "SYSTEMS", "build_ulam_P",
    "build_ulam_PY", "check_conditions", "check_dominance", "check_monotone_preservation", "dirac", "eta_index",
    "eval_map", "extend_density", "find_n0", "finiteness_verdict", "fit_exponent", "induced_step",
    "invariant_density_h0", "invert_left", "invert_right", "make_system", "occupation_vs_prediction",
    "pareto_density", "partition_sequences", "power_density", "predict_mu_xn", "return_time_histogram",
    "return_time_of_cell", "run_orbit", "sandwich_report", "uniform", "x_sequence", "y_sequence",
]
