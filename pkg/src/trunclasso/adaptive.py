"""Adaptive-lasso penalised fitting through augmented LAD systems.

The L1 penalty lambda * sum_j w_j |beta_j| is expressed as p extra LAD rows
(response 0, design lambda*w_j on coordinate j), so each fixed-indicator
iteration remains a single weighted LAD solve.  The adaptive weights come
from the unpenalised estimate once and are reused across the whole
regularisation path.
"""

from dataclasses import dataclass

import numpy as np

from .data import FitResult
from .errors import DimensionMismatch
from .estimator import build_difference_system, fixed_indicator_iteration
from .lad import LinearSystem, PairDifferenceSystem
from .pairwise import loss, weighted_loss


@dataclass(frozen=True)
class AdaptiveWeights:
    """Per-coefficient penalty weights w_j = min(|beta_j|^-gamma, cap)."""

    w: np.ndarray
    gamma: float
    cap: float

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))


def adaptive_weights(beta_init, gamma=1.0, cap=1e8):
    """Adaptive penalty weights from a pilot estimate.

    Components with |beta_j| below cap^(-1/gamma) get weight exactly cap; the
    cap keeps the penalty rows finite when the pilot lands on zero.
    """
    beta_init = np.asarray(beta_init, dtype=float)
    if gamma <= 0 or cap <= 0:
        raise ValueError("gamma and cap must be positive")
    with np.errstate(divide="ignore", over="ignore"):
        w = np.minimum(np.abs(beta_init) ** (-gamma), cap)
    return AdaptiveWeights(w=w, gamma=float(gamma), cap=float(cap))


def augment_system(diff, lam, weights):
    """Append the p penalty rows to a difference system.

    Row j has response 0 and design lambda*w_j on coordinate j, so its L1
    contribution is exactly lambda * w_j * |beta_j|.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    p = diff.p
    pen = np.diag(lam * weights.w)
    if isinstance(diff, PairDifferenceSystem):
        pair_w = diff.row_weights[: diff.n_pairs]
        return PairDifferenceSystem(
            diff.x_base, diff.y_base, diff.pairs, diff.scale,
            pair_weights=pair_w, extra_design=pen,
            extra_response=np.zeros(p), extra_weights=np.ones(p),
        )
    return LinearSystem(
        np.vstack([diff.design, pen]),
        np.concatenate([diff.response, np.zeros(p)]),
        np.concatenate([diff.row_weights, np.ones(p)]),
    )


def threshold_zeros(beta, zero_tol):
    """Exact zeros below zero_tol relative to the largest coefficient."""
    beta = np.array(beta, dtype=float)
    cut = zero_tol * max(1.0, float(np.max(np.abs(beta))) if beta.size else 1.0)
    beta[np.abs(beta) < cut] = 0.0
    return beta


def fit_adaptive_lasso(dataset, lam, weights, beta_init, tol=1e-6, max_iter=50,
                       zero_tol=1e-6, obs_weights=None):
    """Penalised rank estimator at one penalty level.

    Parameters
    ----------
    lam : nonnegative penalty level; 0 reproduces the unpenalised iteration.
    weights : AdaptiveWeights from the unpenalised pilot.
    beta_init : start of the fixed-indicator iteration (the unpenalised
        estimate, or the previous fit on a penalty grid).
    obs_weights : optional per-record multipliers W_i; pair (i, j) then
        carries row weight W_i + W_j while penalty rows stay unweighted.
        With W_i = 0.5 for every record the original fit is reproduced
        exactly.

    After convergence coefficients within zero_tol (relative) of zero are
    snapped to exact zeros and the active set recorded.  The reported
    objective is loss + lambda * sum_j w_j |beta_j| at the returned point.
    """
    if weights.w.shape[0] != dataset.p:
        raise DimensionMismatch("weights length disagrees with dataset")
    if obs_weights is not None:
        obs_weights = np.asarray(obs_weights, dtype=float)
        if obs_weights.shape != (dataset.n,):
            raise DimensionMismatch("obs_weights length disagrees with dataset")

    def make_system(pairs):
        pw = None
        if obs_weights is not None:
            pw = obs_weights[pairs[:, 0]] + obs_weights[pairs[:, 1]]
        diff = build_difference_system(dataset, pairs, pair_weights=pw)
        if lam > 0:
            return augment_system(diff, lam, weights)
        return diff

    if obs_weights is None:
        def loss_term(b):
            return loss(dataset, b)
    else:
        def loss_term(b):
            return weighted_loss(dataset, b, obs_weights)

    def objective(b):
        return loss_term(b) + lam * float(weights.w @ np.abs(b))

    beta, _, solves, converged = fixed_indicator_iteration(
        dataset, beta_init, make_system, objective, tol=tol, max_iter=max_iter,
    )
    beta = threshold_zeros(beta, zero_tol)
    return FitResult(beta=beta, objective=objective(beta), iterations=solves,
                     converged=converged)
