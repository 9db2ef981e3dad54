"""Pairwise rank loss for doubly truncated responses.

For a pair of records the residual difference e_i(beta) - e_j(beta) carries
rank information only while each residual stays inside the other record's
shifted window.  The pair kernel clamps the difference into the window-derived
interval (lower, upper); the comparability indicator is exactly the event
that the difference is interior to that interval.  Both views are used:

* the clamped absolute difference, averaged over all ordered pairs, is the
  reported loss (normalised by n(n-1));
* the indicator form drives the fixed-indicator iterations of the solvers.

All functions here are pure; dataset-level aggregates are vectorised O(n^2).
"""

import numpy as np

from .data import residual


def clamp_bounds(obs_i, obs_j):
    """Clamp interval (lower, upper) of a pair; free of beta.

    lower = max(l_j - y_j, y_i - r_i) < 0 and upper = min(r_j - y_j, y_i - l_i) > 0
    because each record's window strictly contains its response.
    """
    lower = max(obs_j.l - obs_j.y, obs_i.y - obs_i.r)
    upper = min(obs_j.r - obs_j.y, obs_i.y - obs_i.l)
    return lower, upper


def pair_kernel_h(obs_i, obs_j, beta):
    """Absolute residual difference clamped into the pair's interval."""
    lower, upper = clamp_bounds(obs_i, obs_j)
    d = residual(obs_i, beta) - residual(obs_j, beta)
    return abs(min(max(d, lower), upper))


def is_comparable(obs_i, obs_j, beta):
    """True iff each residual falls strictly inside the other's shifted window.

    Equivalent to lower < e_i(beta) - e_j(beta) < upper with the bounds from
    clamp_bounds; ties at a bound count as not comparable.
    """
    lower, upper = clamp_bounds(obs_i, obs_j)
    d = residual(obs_i, beta) - residual(obs_j, beta)
    return bool(lower < d < upper)


def pair_score_xi(obs_i, obs_j, beta):
    """Score contribution of one ordered pair.

    indicator * (x_i - x_j) * sign(e_i - e_j); the zero vector when the pair
    is not comparable.  sign(0) is 0, so this is an honest subgradient
    selection of the pair kernel.
    """
    if not is_comparable(obs_i, obs_j, beta):
        return np.zeros_like(obs_i.x)
    d = residual(obs_i, beta) - residual(obs_j, beta)
    return (obs_i.x - obs_j.x) * np.sign(d)


def _pair_grids(dataset, beta):
    """(n, n) arrays of residual differences and clamp bounds."""
    e = dataset.y - dataset.x @ np.asarray(beta, dtype=float)
    d = e[:, None] - e[None, :]
    ly = dataset.l - dataset.y
    ry = dataset.r - dataset.y
    lower = np.maximum(ly[None, :], -ry[:, None])
    upper = np.minimum(ry[None, :], -ly[:, None])
    return d, lower, upper


def loss(dataset, beta):
    """Normalised pairwise loss: sum of clamped kernels over ordered pairs / n(n-1).

    The diagonal clamps to zero, so summing the full grid equals summing
    i != j.  Always >= 0 and invariant under a common shift of (y, l, r).
    """
    d, lower, upper = _pair_grids(dataset, beta)
    n = dataset.n
    h = np.abs(np.clip(d, lower, upper))
    return float(h.sum() / (n * (n - 1)))


def score(dataset, beta):
    """Normalised pairwise score vector; the negative loss gradient off kinks."""
    d, lower, upper = _pair_grids(dataset, beta)
    n = dataset.n
    s = np.sign(d)
    s[~((lower < d) & (d < upper))] = 0.0
    # sum_{i!=j} xi_ij = 2 * sum_i rowsum_i(s) x_i because s is antisymmetric
    return 2.0 * (dataset.x.T @ s.sum(axis=1)) / (n * (n - 1))


def weighted_loss(dataset, beta, obs_weights):
    """Loss with pair (i, j) multiplied by W_i + W_j, same normalisation.

    With W identically 0.5 this reduces to the plain loss exactly.
    """
    d, lower, upper = _pair_grids(dataset, beta)
    n = dataset.n
    w = np.asarray(obs_weights, dtype=float)
    h = np.abs(np.clip(d, lower, upper))
    h *= w[:, None] + w[None, :]
    return float(h.sum() / (n * (n - 1)))


def comparable_pairs(dataset, beta):
    """All unordered comparable pairs at beta as an (m, 2) index array, i < j.

    Rows are in lexicographic order, so the result is deterministic and
    hashable via its bytes.
    """
    d, lower, upper = _pair_grids(dataset, beta)
    comp = (lower < d) & (d < upper)
    comp &= np.triu(np.ones_like(comp, dtype=bool), k=1)
    return np.argwhere(comp)
