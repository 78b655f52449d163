"""Low-rank completion of incomplete observation matrices and global
factorization of 2-D feature tracks into rigid 3-D structure and motion."""

from .completion import (CompletionResult, SolverConfig, complete, em_complete,
                         rc_col_step, rc_complete, rc_row_step)
from .errors import (CombinationError, DegenerateConfigurationError,
                     InitializationError, MergeConflictError, ParameterError,
                     ShapeMismatchError, SingularSystemError)
from .masked import (LowRankFactor, MaskedMatrix, masked_frobenius, rank_project,
                     singular_values, truncated_factor)
from .rearrange import (DEFAULT_ALPHA, GlobalResult, MergePlan, candidate_pairs,
                        global_rearrange, merge_columns, pl_cost)
from .sfm import (ErrorReport, RigidModel, evaluate_model, factorize_sfm,
                  motion_error, shape_error, similarity_align)
from .subspace_init import (CompleteBlock, InitGuess, PartialBasis, block_basis,
                            column_mean_fill, constant_init, find_block_chain,
                            heuristic_init, random_init, subspace_approx,
                            subspace_combine)
from .synth import (SceneSpec, error_curve_theta, feature_of_column, gen_lowrank,
                    gen_mask, gen_scene, theta_of_row_space)

__version__ = "0.1.0"

__all__ = [
    "CompletionResult", "SolverConfig", "complete", "em_complete", "rc_complete",
    "rc_row_step", "rc_col_step",
    "MaskedMatrix", "LowRankFactor", "masked_frobenius", "rank_project",
    "singular_values", "truncated_factor",
    "MergePlan", "GlobalResult", "DEFAULT_ALPHA", "candidate_pairs",
    "merge_columns", "pl_cost", "global_rearrange",
    "RigidModel", "ErrorReport", "factorize_sfm", "shape_error", "motion_error",
    "similarity_align", "evaluate_model",
    "CompleteBlock", "PartialBasis", "InitGuess", "block_basis", "find_block_chain",
    "subspace_approx", "subspace_combine", "heuristic_init", "column_mean_fill",
    "random_init", "constant_init",
    "SceneSpec", "gen_scene", "gen_mask", "gen_lowrank", "error_curve_theta",
    "feature_of_column", "theta_of_row_space",
    "ShapeMismatchError", "ParameterError", "SingularSystemError",
    "MergeConflictError", "InitializationError", "CombinationError",
    "DegenerateConfigurationError",
]
