"""Poisson follower dynamics.

Agents sit at the points of a planar Poisson process and repeatedly move
halfway toward their nearest neighbour.  The package builds the follower
graph, runs the dynamics, detects the resulting phenomena, estimates their
frequencies by simulation and by integral geometry, and provides lattice
diagnostics for the party-size argument.
"""
from .errors import FollowerError, InsufficientData, InvalidArgument, NotFound, Unsupported
from .sampler import (Configuration, ExperimentPlan, Window, core_region, replica_seed,
                      sample_poisson)
from .follower_graph import (FollowerGraph, Party, backward_set, brute_force_leaders,
                             build_graph, contraction_ratio, contraction_ratios,
                             forward_set, in_degree_histogram, leader_of_order, parties,
                             ultimate_leader_pairs)
from .dynamics import Trajectory, classify_limit, run, step
from .phenomena import EventRecord, PhenomenonKind, detect_all
from .frequency_stats import FrequencyEstimate, TABLE_KINDS, estimate_frequencies
from .ball_geometry import Ball, BallUnion, cell_membership, lens_area, union_area
from .frequency_integrals import (DOMAINS, beta_refinement, beta_upper_type1,
                                  density_order0_closed_form, density_order0_numeric,
                                  estimate_integral, frequency_order1_type1, membership)
from .asymptotics import (LimitReport, StableChain, branching_break_step, limit_report,
                          stable_position)
from .percolation_diag import (LatticeClassification, classify_step0, classify_step1,
                               closed_probability_bound, cluster_statistics,
                               empirical_contraction_tail, p0_analytic, p0_exact)

__all__ = [name for name in dir() if not name.startswith("_")]
