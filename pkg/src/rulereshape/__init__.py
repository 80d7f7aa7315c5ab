"""Monotone reshaping of trained prediction rules.

Black-box reshaping (:mod:`rulereshape.blackbox`) isotonizes any rule's
predictions on a grid built from the observed data. Forest reshaping
(:mod:`rulereshape.reshape`) rewrites tree leaf values so every tree, and
hence the forest average, is monotone in the chosen variables.
"""

from .audit import (AuditConfig, AuditResult, accuracy, audit_forest, audit_grid,
                    audit_monotonicity, fold_summary, kfold_indices, mape, mse)
from .blackbox import (BlackBoxGrid, ReshapedGrid, build_grid, reshape_grid,
                       reshape_streaming, reshaped_predictions)
from .errors import (InvalidInputError, InvalidModelError, ModelParseError,
                     ReshapeError, SolverError)
from .iiso import IisoProblem, IisoSolution, evaluate_g, solve_iiso
from .isotonic import pava, pivoted_isotonic
from .reshape import (ConstraintGraph, ReshapeReport, build_constraint_graph,
                      dag_isotonic_exact, reshape_forest, reshape_tree, run_reshape,
                      solve_node_overconstrained)
from .shape import Direction, ShapeSpec
from .trees import (ForestModel, LeafCell, Tree, TreeNode, dumps_forest, from_sklearn, leaf_cells,
                    load_forest, loads_forest, overlapping_pairs, predict, save_forest)

__version__ = "0.1.0"
