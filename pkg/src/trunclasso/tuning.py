"""Penalty-grid construction and modified-BIC selection.

The selection criterion is the normalised pairwise loss plus a
(log n / n) * C_n * df penalty with C_n = log log p, a slowly diverging
multiplier that keeps selection consistent as the parameter count grows.
Cross-validation is deliberately out of scope.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .adaptive import fit_adaptive_lasso
from .errors import GridDegenerate, SolverError
from .estimator import build_difference_system
from .pairwise import comparable_pairs, loss

log = logging.getLogger(__name__)


def default_cn(p):
    """Modified-BIC multiplier log log p, floored at 1 so tiny p stays sane."""
    if p <= 3:
        return 1.0
    return float(max(1.0, np.log(np.log(p))))


def bic(dataset, fit, c_n):
    """Modified BIC of a fit: loss + (log n / n) * C_n * df."""
    n = dataset.n
    return loss(dataset, fit.beta) + (np.log(n) / n) * c_n * fit.df


@dataclass
class TracePoint:
    """One grid point of the selection path."""

    lam: float
    bic: float
    df: int
    loss: float
    objective: float


@dataclass
class SelectionResult:
    """Outcome of the penalty-grid search."""

    lambda_hat: float
    fit: object
    trace: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    c_n: float = 1.0


def lambda_grid(dataset, weights, size=50, beta_init=None, tol=1e-6,
                max_iter=50, zero_tol=1e-6):
    """Descending log-spaced penalty grid spanning four decades.

    The upper end is the smallest tested penalty whose fit is the all-zero
    vector, located by a doubling/halving search seeded at the subgradient
    bound of the fixed-indicator system at beta = 0.
    """
    if beta_init is None:
        raise ValueError("beta_init (the unpenalised estimate) is required")
    beta_init = np.asarray(beta_init, dtype=float)
    if not np.any(np.abs(beta_init) > 0):
        raise GridDegenerate("unpenalised fit is already the zero vector")

    def zero_fit(lam):
        fit = fit_adaptive_lasso(dataset, lam, weights, beta_init,
                                 tol=tol, max_iter=max_iter, zero_tol=zero_tol)
        return fit.df == 0

    lam = _subgradient_bound(dataset, weights)
    if not np.isfinite(lam) or lam <= 0:
        lam = 1.0
    if zero_fit(lam):
        lam_max = lam
        for _ in range(80):
            lam = lam / 2.0
            if not zero_fit(lam):
                break
            lam_max = lam
        else:
            raise GridDegenerate("every tested penalty selects nothing")
    else:
        for _ in range(80):
            lam = lam * 2.0
            if zero_fit(lam):
                lam_max = lam
                break
        else:
            raise SolverError("could not locate an all-zero penalty level")
    return np.geomspace(lam_max, 1e-4 * lam_max, int(size))


def _subgradient_bound(dataset, weights):
    # smallest lambda making beta = 0 stationary for the pair set at 0
    pairs = comparable_pairs(dataset, np.zeros(dataset.p))
    if len(pairs) == 0:
        return 1.0
    system = build_difference_system(dataset, pairs)
    g = system.design.T @ (system.row_weights * np.sign(system.response))
    return float(np.max(np.abs(g) / weights.w))


def select_lambda(dataset, weights, grid, beta_init=None, c_n=None, tol=1e-6,
                  max_iter=50, zero_tol=1e-6, obs_weights=None):
    """Fit every grid penalty and return the BIC argmin.

    Fits are warm-started from the previous grid point's coefficients to
    stabilise the indicator sets; each fit still runs to its own convergence
    criteria.  Ties in BIC resolve toward the larger (sparser) penalty.  A
    penalty whose fit fails is excluded from the argmin with a logged reason.
    """
    if beta_init is None:
        raise ValueError("beta_init (the unpenalised estimate) is required")
    if c_n is None:
        c_n = default_cn(dataset.p)
    prev = np.asarray(beta_init, dtype=float)
    trace = []
    excluded = []
    best = None
    best_fit = None
    for lam in np.asarray(grid, dtype=float):
        try:
            fit = fit_adaptive_lasso(dataset, lam, weights, prev, tol=tol,
                                     max_iter=max_iter, zero_tol=zero_tol,
                                     obs_weights=obs_weights)
        except SolverError as exc:
            log.warning("penalty %.6g excluded: %s", lam, exc)
            excluded.append((float(lam), str(exc)))
            continue
        point = TracePoint(lam=float(lam), bic=float(bic(dataset, fit, c_n)),
                           df=fit.df, loss=float(loss(dataset, fit.beta)),
                           objective=float(fit.objective))
        trace.append(point)
        if best is None or point.bic < best.bic:
            best = point
            best_fit = fit
        prev = fit.beta
    if best is None:
        raise SolverError("every penalty on the grid failed to fit")
    return SelectionResult(lambda_hat=best.lam, fit=best_fit, trace=trace,
                           excluded=excluded, c_n=float(c_n))
