"""Spectral co-clustering of sparse non-negative tensors."""

from .cocluster import ClusterTree, GtscParams, gtsc, pagerank, popularity_scores
from .metrics import ari, f1_pairs, nmi
from .process import TransitionTensor, normalize, simulate_super_spacey, solve_stationary
from .spectral import ImplicitChain, build_chain, second_left_eigenvector
from .sweep import biased_conductance, sweep_cut
from .synth import SynthSpec, gen_rectangular, gen_square
from .tensor import (
    ModeClassMap,
    SparseTensor,
    apply_squared,
    contract_to_matrix,
    embed_rectangular,
    flatten,
    load_coordinate,
    remove_empty_indices,
    subtensor,
    symmetrize_square,
)

__version__ = "0.1.0"
