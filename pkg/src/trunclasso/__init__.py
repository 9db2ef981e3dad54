"""Estimation and variable selection for doubly truncated linear regression.

A record (y, l, r, x) enters the sample only when y falls strictly inside
its truncation window (l, r).  Estimation minimises a pairwise rank loss over
comparable pairs, variable selection adds an adaptive-lasso penalty solved by
fixed-indicator LAD iterations, the penalty level is chosen by a modified BIC
and standard errors come from random-weighting perturbation.
"""

from .adaptive import (AdaptiveWeights, adaptive_weights, augment_system,
                       fit_adaptive_lasso)
from .data import Dataset, FitResult, Observation, residual, residuals, validate
from .errors import (CalibrationFailure, ColumnMismatch, ConfigError,
                     DataError, Degenerate, DegenerateWeights,
                     DimensionMismatch, EmptyPairSet, GridDegenerate,
                     GridTooLarge, InvalidTruncationWindow, NoComparablePairs,
                     NonFiniteValue, ParseError, RankDeficient,
                     SEEstimationError, SolverError, StudyAbort,
                     TooFewObserved, TruncLassoError, WindowViolation)
from .estimator import build_difference_system, fit_unpenalized, naive_lad
from .lad import LinearSystem, PairDifferenceSystem, directional_slack, solve_lad
from .pairwise import (clamp_bounds, comparable_pairs, is_comparable, loss,
                       pair_kernel_h, pair_score_xi, score, weighted_loss)
from .randomweight import (DEFAULT_LAW, PerturbationLaw, SEResult,
                           draw_weights, estimate_se, perturbed_fit)
from .simulate import (FullSample, MethodSummary, ScenarioSpec, StudyConfig,
                       StudySummary, apply_truncation, calibrate_truncation,
                       fit_naive, fit_oracle, generate_full_sample,
                       model_error, naive_loss, paper_scenario, run_study,
                       scenario_second_moment, selection_metrics,
                       truncation_rates)
from .tuning import (SelectionResult, TracePoint, bic, default_cn,
                     lambda_grid, select_lambda)

__version__ = "0.1.0"
