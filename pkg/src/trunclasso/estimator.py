"""Unpenalised rank estimator via fixed-indicator LAD iterations.

The pairwise loss is nonconvex only through the comparability indicator.
Freezing the indicator at the current iterate leaves a convex LAD problem on
the comparable pair differences; alternating the two steps until the pair
set stops changing yields the estimator.
"""

import numpy as np

from .data import FitResult
from .errors import EmptyPairSet, NoComparablePairs
from .lad import LinearSystem, PairDifferenceSystem, solve_lad
from .pairwise import comparable_pairs, loss


def build_difference_system(dataset, pairs, pair_weights=None):
    """Pairwise difference LAD system, one row per unordered pair.

    Rows carry the 2/(n(n-1)) factor so the L1 objective of the system equals
    the loss restricted to the given pairs: the 2 accounts for both ordered
    orientations of a symmetric pair.
    """
    pairs = np.asarray(pairs, dtype=np.intp)
    if pairs.size == 0:
        raise EmptyPairSet("no pairs to difference")
    n = dataset.n
    scale = 2.0 / (n * (n - 1))
    return PairDifferenceSystem(dataset.x, dataset.y, pairs, scale,
                                pair_weights=pair_weights)


def naive_lad(dataset):
    """Plain LAD of y on x, ignoring the truncation windows entirely."""
    return solve_lad(LinearSystem(dataset.x, dataset.y))


def fixed_indicator_iteration(dataset, beta0, make_system, objective,
                              tol=1e-6, max_iter=50):
    """Shared driver for the fixed-indicator schemes.

    Repeats: take the comparable pair set at the current iterate, solve the
    convex problem `make_system(pairs)`, until the pair set reaches a fixed
    point, the iterate stalls below tol (sup norm), a pair set repeats (a
    cycle), or max_iter solves are spent.  Returns the visited iterate with
    the lowest `objective` to guard against cycling, plus bookkeeping.
    """
    beta = np.asarray(beta0, dtype=float)
    seen = {}
    prev_key = None
    best_obj = np.inf
    best_beta = None
    solves = 0
    converged = False
    while solves < max_iter:
        pairs = comparable_pairs(dataset, beta)
        if len(pairs) == 0:
            raise NoComparablePairs("comparable pair set is empty")
        key = pairs.tobytes()
        if key == prev_key:
            converged = True  # beta already solves its own pair set
            break
        if key in seen:
            break  # cycle; fall back to the best visited iterate
        seen[key] = solves
        new_beta = solve_lad(make_system(pairs))
        solves += 1
        obj = objective(new_beta)
        if obj < best_obj:
            best_obj = obj
            best_beta = new_beta
        if np.max(np.abs(new_beta - beta)) < tol:
            beta = new_beta
            converged = True
            break
        beta = new_beta
        prev_key = key
    if best_beta is None:  # max_iter == 0 guard; report the start point
        best_beta = beta
        best_obj = objective(beta)
    return best_beta, best_obj, solves, converged


def fit_unpenalized(dataset, tol=1e-6, max_iter=50, init=None):
    """Rank estimator of the regression coefficients.

    Starts from the naive LAD fit that ignores truncation, then iterates the
    fixed-indicator scheme.  The reported objective is the pairwise loss at
    the returned coefficients.
    """
    beta0 = naive_lad(dataset) if init is None else np.asarray(init, dtype=float)
    beta, obj, solves, converged = fixed_indicator_iteration(
        dataset, beta0, lambda pairs: build_difference_system(dataset, pairs),
        lambda b: loss(dataset, b), tol=tol, max_iter=max_iter,
    )
    return FitResult(beta=beta, objective=obj, iterations=solves,
                     converged=converged)
