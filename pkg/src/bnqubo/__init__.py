"""Bayesian-network structure learning as a QUBO, solved by simulated annealing."""

from .dag import Dag
from .data import Dataset, RawTable, discretize_hartemink, forward_sample, load_csv, tabulate_counts
from .score import PriorScheme, LocalScoreTable, local_score, mobius_weights, network_score, score_table
from .qubo import PenaltyConfig, Qubo, VarRegistry, assemble, calibrate_penalties, encode, tight_penalties
from .anneal import SampleSet, Schedule, auto_schedule, run_campaign, solve_exhaustive, solve_sa
from .decode import decode, metrics, validate
from .oracle import enumerate_dags, exact_learn

__version__ = "0.1.0"

__all__ = [
    "Dag", "Dataset", "RawTable", "discretize_hartemink", "forward_sample", "load_csv", "tabulate_counts",
    "PriorScheme", "LocalScoreTable", "local_score", "mobius_weights", "network_score", "score_table",
    "PenaltyConfig", "Qubo", "VarRegistry", "assemble", "calibrate_penalties", "encode", "tight_penalties",
    "SampleSet", "Schedule", "auto_schedule", "run_campaign", "solve_exhaustive", "solve_sa",
    "decode", "metrics", "validate", "enumerate_dags", "exact_learn",
]
