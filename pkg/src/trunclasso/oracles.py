"""Brute-force oracles used by the test suite.

These deliberately share no solver code with the estimation modules: the
grid oracle evaluates the pairwise loss exhaustively, and the enumeration
oracle tries every interpolating row subset.  Agreement with the fast paths
is therefore evidence, not tautology.  Never used on the main code path.
"""

from itertools import combinations

import numpy as np

from .errors import GridTooLarge
from .pairwise import loss

_MAX_EVALS = 10_000_000


def grid_min_loss(dataset, bounds, step):
    """Exhaustive minimiser of the pairwise loss on a regular grid (p <= 2).

    bounds is a (lo, hi) pair applied to every coordinate, or a sequence of
    per-coordinate pairs.  Ties go to the lexicographically smallest grid
    point.  Raises GridTooLarge above 10^7 evaluations.
    """
    p = dataset.p
    if p > 2:
        raise ValueError("grid oracle supports p <= 2 only")
    if step <= 0:
        raise ValueError("step must be positive")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim == 1:
        bounds = np.tile(bounds, (p, 1))
    axes = []
    total = 1
    for lo, hi in bounds:
        count = int(np.floor((hi - lo) / step)) + 1
        axes.append(lo + step * np.arange(count))
        total *= count
    if total > _MAX_EVALS:
        raise GridTooLarge(f"{total} grid evaluations exceed the budget")

    # precompute pair quantities once; the loss on the grid is then a clip+sum
    y, x = dataset.y, dataset.x
    iu, ju = np.triu_indices(dataset.n, k=1)
    ydiff = y[iu] - y[ju]
    xdiff = x[iu] - x[ju]
    ly = dataset.l - y
    ry = dataset.r - y
    lower = np.maximum(ly[ju], -ry[iu])
    upper = np.minimum(ry[ju], -ly[iu])
    norm = dataset.n * (dataset.n - 1)

    if p == 1:
        grid = axes[0][:, None]
    else:
        g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        grid = np.column_stack([g1.ravel(), g2.ravel()])

    best_val = np.inf
    best_idx = 0
    chunk = max(1, _MAX_EVALS // (10 * max(len(ydiff), 1)))
    for start in range(0, grid.shape[0], chunk):
        betas = grid[start:start + chunk]
        d = ydiff[None, :] - betas @ xdiff.T
        vals = np.abs(np.clip(d, lower[None, :], upper[None, :])).sum(axis=1)
        k = int(np.argmin(vals))
        # strict < keeps the first (lexicographically smallest) grid argmin
        if vals[k] < best_val:
            best_val = float(vals[k])
            best_idx = start + k
    best = grid[best_idx]
    # cross-check against the reference loss implementation
    assert np.isclose(best_val * 2 / norm, loss(dataset, best), rtol=1e-10)
    return best


def lad_enumerate(system):
    """Exact weighted LAD optimum by enumerating interpolating row subsets.

    Every p-subset of rows with an invertible submatrix yields a candidate;
    the best weighted L1 objective wins, with ties resolved toward the
    lexicographically smallest coefficient vector.  Guarded to m <= 200,
    p <= 3.  If no invertible subset exists the zero vector is returned.
    """
    design = system.design
    response = system.response
    weights = system.row_weights
    m, p = design.shape
    if m > 200 or p > 3:
        raise ValueError("enumeration oracle limited to m <= 200, p <= 3")

    subsets = np.array(list(combinations(range(m), p)))
    mats = design[subsets]                      # (K, p, p)
    dets = np.linalg.det(mats)
    row_norms = np.linalg.norm(mats, axis=2)    # (K, p)
    ok = np.abs(dets) > 1e-10 * np.prod(np.maximum(row_norms, 1e-30), axis=1)
    if not ok.any():
        return np.zeros(p)
    cand = np.linalg.solve(mats[ok], response[subsets[ok]][..., None])[..., 0]
    resid = response[None, :] - cand @ design.T
    objs = np.abs(resid) @ weights
    best = float(objs.min())
    near = np.flatnonzero(objs <= best * (1 + 1e-12) + 1e-300)
    # deterministic tie-break: lexicographically smallest beta among ties
    order = np.lexsort(cand[near].T[::-1])
    return cand[near[order[0]]]
