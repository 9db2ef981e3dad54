"""Random-weighting standard errors for the selected coefficients.

The asymptotic covariance of the penalised estimator involves the error
density and is unpleasant to estimate directly, so inference refits the
estimator under i.i.d. nonnegative multipliers W_i with mean 0.5 and
variance 1; pair (i, j) carries weight W_i + W_j, the penalty level and the
adaptive weights stay frozen at their selected values.  The spread of the
perturbed coefficients across replicates approximates the sampling spread.
"""

from dataclasses import dataclass

import numpy as np

from .adaptive import fit_adaptive_lasso
from .errors import DegenerateWeights, DimensionMismatch, SEEstimationError, SolverError


@dataclass(frozen=True)
class PerturbationLaw:
    """Scaled-Bernoulli multiplier law: W = value with probability prob, else 0.

    The defaults are the unique scaled Bernoulli with mean 0.5 and variance 1;
    it is nonnegative and bounded by `value`, which is everything the method
    requires of the multipliers.
    """

    value: float = 2.5
    prob: float = 0.2

    @property
    def mean(self):
        return self.value * self.prob

    @property
    def variance(self):
        return self.value**2 * self.prob * (1.0 - self.prob)

    @property
    def bound(self):
        return self.value

    def sample(self, n, rng):
        return self.value * rng.binomial(1, self.prob, size=n).astype(float)


DEFAULT_LAW = PerturbationLaw()


def draw_weights(n, rng, law=DEFAULT_LAW):
    """n i.i.d. multiplier draws from the perturbation law."""
    return law.sample(n, rng)


def perturbed_fit(dataset, w_obs, lambda_hat, weights, beta_init, tol=1e-6,
                  max_iter=50, zero_tol=1e-6):
    """One perturbed refit; returns the perturbed coefficient vector.

    Runs the same fixed-indicator iteration as the penalised fit, with pair
    (i, j) weighted by W_i + W_j and the penalty rows unweighted.
    """
    w_obs = np.asarray(w_obs, dtype=float)
    if w_obs.shape != (dataset.n,):
        raise DimensionMismatch("multiplier vector length disagrees with dataset")
    if not np.any(w_obs > 0):
        raise DegenerateWeights("all multipliers are zero")
    fit = fit_adaptive_lasso(dataset, lambda_hat, weights, beta_init, tol=tol,
                             max_iter=max_iter, zero_tol=zero_tol,
                             obs_weights=w_obs)
    return fit.beta


@dataclass
class SEResult:
    """Standard errors for the unperturbed active set."""

    active_set: np.ndarray
    se: np.ndarray
    se_mad: np.ndarray
    n_replicates: int
    n_failed: int
    replicates: np.ndarray  # (n_replicates, active) perturbed coefficients


def estimate_se(dataset, selection, weights, reps=500, seed=None,
                law=DEFAULT_LAW, max_failure_rate=0.05, tol=1e-6, max_iter=50,
                zero_tol=1e-6):
    """Random-weighting standard errors for the selected fit.

    Runs `reps` perturbed refits with independent multiplier streams derived
    from (seed, replicate index), so the result is reproducible and
    independent of scheduling.  The active set is frozen at the unperturbed
    selection; a replicate that zeroes a coefficient contributes the value 0.
    Reports the sample standard deviation and the robust 1.4826 * MAD
    alternative per active coefficient.  Replicates that fail to solve are
    dropped and counted; more than max_failure_rate failing is an error.
    """
    if reps < 2:
        raise ValueError("need at least two replicates")
    active = selection.fit.active_set
    betas = np.full((reps, dataset.p), np.nan)
    children = np.random.SeedSequence(seed).spawn(reps)
    n_failed = 0
    for b in range(reps):
        rng = np.random.default_rng(children[b])
        w_obs = draw_weights(dataset.n, rng, law)
        try:
            betas[b] = perturbed_fit(dataset, w_obs, selection.lambda_hat,
                                     weights, selection.fit.beta, tol=tol,
                                     max_iter=max_iter, zero_tol=zero_tol)
        except SolverError:
            n_failed += 1
    if n_failed > max_failure_rate * reps:
        raise SEEstimationError(
            f"{n_failed}/{reps} perturbation replicates failed"
        )
    ok = ~np.isnan(betas).any(axis=1)
    reps_ok = betas[ok][:, active]
    se = np.empty(active.size)
    se_mad = np.empty(active.size)
    for k in range(active.size):
        vals = np.sort(reps_ok[:, k])  # fixed order: invariant to replicate labels
        se[k] = float(np.std(vals, ddof=1))
        med = float(np.median(vals))
        se_mad[k] = 1.4826 * float(np.median(np.abs(vals - med)))
    return SEResult(active_set=active.copy(), se=se, se_mad=se_mad,
                    n_replicates=int(ok.sum()), n_failed=n_failed,
                    replicates=reps_ok)
