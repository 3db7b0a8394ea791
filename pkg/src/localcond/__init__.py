"""Exact marginals on cyclic undirected networks by Belief Propagation,
Conditioning and Local Conditioning."""

from .conditioning import run_conditioning
from .cutset import LoopCutset, build_associated_tree, find_loop_cutset, verify_loop_cutset
from .graph import Graph, build_grid
from .local import compute_relevant_sets, run_local_conditioning
from .model import PotentialSet, brute_force_marginals, expand_ising, golden_model, load_model
from .runtime import run_distributed, setup_actors
from .treebp import run_bp

__all__ = [
    "Graph",
    "LoopCutset",
    "PotentialSet",
    "brute_force_marginals",
    "build_associated_tree",
    "build_grid",
    "compute_relevant_sets",
    "expand_ising",
    "find_loop_cutset",
    "golden_model",
    "load_model",
    "run_bp",
    "run_conditioning",
    "run_distributed",
    "run_local_conditioning",
    "setup_actors",
    "verify_loop_cutset",
]
