"""Rooted path systems and combs in layered random graphs."""

from .comb import (CombEmbedding, assemble_paths, brute_force_contains_comb, find_spine,
                   verify_embedding)
from .graph import Graph, LayeredGraph, count_nbrs_in, edges_between, sample_gnp, sample_layers
from .harness import (TrialConfig, TrialRecord, check_devs, estimate_threshold, fixed_graphs,
                      run_pipeline, run_trial, sweep)
from .matching import BipartiteInstance, MatchingOutcome, block_matchings, max_matching
from .params import ParamSet, bernstein_tail, derive_params, q_bound
from .partition import (FillInfeasible, NegativeDeficit, PartitionState, StuckInRepair,
                        compute_barred, compute_deficient, fill_in, first_step, repair)

__version__ = "0.1.0"
