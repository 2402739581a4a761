"""Semiring semantics for first-order logic: evaluation over finite
K-interpretations, Hanf locality checks, and constructive Gaifman normal
forms over min-max semirings, with brute-force oracles."""

from .formula import (
    Signature, Formula, PosAtom, NegAtom, Eq, Neq, TrueAtom, FalseAtom,
    DistLeq, DistGt, And, Or, Exists, Forall, BallExists, BallForall,
    OutsideForall, OutsideExists, ScatteredExists, ScatteredForall,
    TRUE, FALSE, parse, render, to_nnf, to_prenex, quantification_dag,
    check_local, locality_radius, dualize, simplify, polarity, desugar,
)
from .semiring import (
    SemiringSpec, make_minmax_chain, make_lattice, diamond_lattice, builtin,
    check_properties, dual_semiring, separating_hom, separating_family,
)
from .semantics import (
    Interpretation, GaifmanGraph, Neighborhood, load_interpretation,
    load_model_file, gaifman_graph, evaluate_reduct_graph, ball,
    neighborhood, neighborhood_iso, evaluate,
)
from .oracle import (
    EnumerationBounds, Verdict, check_equivalence, enumerate_interpretations,
    lift_check, run_suite,
)
from .hanf import (
    HanfParameters, hanf_parameters, hanf_r_equivalent, hanf_rt_equivalent,
    build_back_and_forth, check_m_equivalence, neighborhood_census,
)
from .gaifman import (
    cluster_tuple, separate_local, abstract_atoms, restore_atoms, swap_blocks,
    gnf_step1, gnf_step2, gnf_step3_split, gnf_step3_single_outside,
    gnf_step3_scatter, gnf_step3_final, gnf, validate_local_sentence,
    check_negation_preservation,
)

__version__ = "0.1.0"
