"""Domain types for doubly truncated samples.

A record (y, l, r, x) is observed only because its response fell strictly
inside its own truncation window, so l < y < r is an invariant of the data,
not a modelling choice.  All containers are immutable after validation and
safe to share across workers.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue, WindowViolation


@dataclass(frozen=True)
class Observation:
    """One observed record: response, window bounds, covariates."""

    y: float
    l: float
    r: float
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))


class Dataset:
    """Validated collection of observations with fixed covariate dimension.

    Parameters
    ----------
    y, l, r : array_like, shape (n,)
        Responses and their left/right truncation bounds.
    x : array_like, shape (n, p)
        Covariate rows.  No intercept column is ever added: the pairwise
        loss depends only on differences, so an intercept is not
        identifiable from it.
    """

    def __init__(self, y, l, r, x):
        self.y = np.ascontiguousarray(y, dtype=float)
        self.l = np.ascontiguousarray(l, dtype=float)
        self.r = np.ascontiguousarray(r, dtype=float)
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        self.x = np.ascontiguousarray(x)
        validate(self)
        for a in (self.y, self.l, self.r, self.x):
            a.setflags(write=False)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @classmethod
    def from_observations(cls, observations):
        obs = list(observations)
        if len(obs) < 2:
            raise DimensionMismatch("need at least two observations (one pair)")
        p = obs[0].x.shape[0]
        for i, o in enumerate(obs):
            if o.x.shape[0] != p:
                raise DimensionMismatch(
                    f"observation {i} has {o.x.shape[0]} covariates, expected {p}",
                    index=i,
                )
        return cls(
            [o.y for o in obs],
            [o.l for o in obs],
            [o.r for o in obs],
            np.vstack([o.x for o in obs]),
        )

    def observation(self, i):
        return Observation(self.y[i], self.l[i], self.r[i], self.x[i])

    def subset_columns(self, cols):
        """Dataset restricted to the covariate columns `cols` (same windows)."""
        return Dataset(self.y, self.l, self.r, self.x[:, list(cols)])

    def __repr__(self):
        return f"Dataset(n={self.n}, p={self.p})"


def validate(dataset):
    """Check every dataset invariant; return the dataset unchanged if all hold.

    Raises WindowViolation, DimensionMismatch, or NonFiniteValue with the
    offending row index.  Boundary ties (l == y or y == r) are rejected, not
    clamped: the pair comparability logic assumes strict interiority.
    """
    y, l, r, x = dataset.y, dataset.l, dataset.r, dataset.x
    n = y.shape[0]
    if not (l.shape == (n,) and r.shape == (n,)):
        raise DimensionMismatch("y, l, r must have equal length")
    if x.shape[0] != n:
        raise DimensionMismatch(f"x has {x.shape[0]} rows, expected {n}")
    if n < 2:
        raise DimensionMismatch("need at least two observations (one pair)")
    for name, a in (("y", y), ("l", l), ("r", r)):
        bad = np.flatnonzero(~np.isfinite(a))
        if bad.size:
            i = int(bad[0])
            raise NonFiniteValue(f"{name}[{i}] is not finite", index=i, field=name)
    bad = np.flatnonzero(~np.all(np.isfinite(x), axis=1))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteValue(f"x[{i}] contains a non-finite value", index=i, field="x")
    bad = np.flatnonzero(~((l < y) & (y < r)))
    if bad.size:
        i = int(bad[0])
        raise WindowViolation(
            f"row {i}: y={y[i]} not strictly inside ({l[i]}, {r[i]})", index=i
        )
    return dataset


def residual(obs, beta):
    """Residual y - beta'x of a single observation."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] != obs.x.shape[0]:
        raise DimensionMismatch(
            f"beta has length {beta.shape[0]}, covariates have {obs.x.shape[0]}"
        )
    return float(obs.y - beta @ obs.x)


def residuals(dataset, beta):
    """Vector of residuals y - X beta for the whole dataset."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] != dataset.p:
        raise DimensionMismatch(
            f"beta has length {beta.shape[0]}, dataset has p={dataset.p}"
        )
    return dataset.y - dataset.x @ beta


@dataclass
class FitResult:
    """Coefficients plus convergence metadata for one solve."""

    beta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    active_set: np.ndarray = field(default=None)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.active_set is None:
            self.active_set = np.flatnonzero(self.beta != 0.0)
        else:
            self.active_set = np.asarray(self.active_set, dtype=int)

    @property
    def df(self):
        return int(self.active_set.size)
