"""Stochastic block model inference from subgraph densities via matrix pencils."""

from .counting import (CountTable, build_count_table, inj_hom_count, inj_hom_density,
                       jackknife_variance)
from .errors import (BudgetError, ConditioningError, DegeneracyError, GraphPencilError,
                     NumericalError, ParseError, ValidationError)
from .experiment import (ExperimentResult, ExperimentSpec, known_blocks_baseline,
                         run_experiment, squared_error, variance_check)
from .glyphs import (BistarGlyph, GlyphCombination, Rooting, block_degrees, eval_density,
                     parse_glyph, two_hop_matrix)
from .graph import (SampleConfig, SbmParams, UndirectedGraph, load_edge_list, load_params,
                    sample_graph, save_edge_list, save_params)
from .pencil import (ExactDensities, GraphDensities, MomentSequence, PencilSolution,
                     build_bistar_matrices, build_symmetric_basis, infer_sbm, recover_B,
                     solve_degree_pencil)

__version__ = "0.1.0"

__all__ = [
    "BistarGlyph", "block_degrees", "BudgetError", "build_bistar_matrices",
    "build_count_table", "build_symmetric_basis", "ConditioningError", "CountTable",
    "DegeneracyError", "eval_density", "ExactDensities", "ExperimentResult", "ExperimentSpec",
    "GlyphCombination", "GraphDensities", "GraphPencilError", "infer_sbm", "inj_hom_count",
    "inj_hom_density", "jackknife_variance", "known_blocks_baseline", "load_edge_list",
    "load_params", "MomentSequence", "NumericalError", "parse_glyph", "ParseError",
    "PencilSolution", "recover_B", "Rooting", "run_experiment", "sample_graph", "SampleConfig",
    "save_edge_list", "save_params", "SbmParams", "solve_degree_pencil", "squared_error",
    "two_hop_matrix", "UndirectedGraph", "ValidationError", "variance_check",
]
