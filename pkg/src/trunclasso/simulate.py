"""Monte Carlo study machinery: scenario generation, truncation calibration,
metrics, and the three-way (proposed / naive / oracle) replication study.

A scenario describes the full (pre-truncation) data law: sparse coefficient
vector, mixed covariate laws with a correlated Gaussian block, error law,
and a covariate-dependent truncation window.  The window constants are
calibrated so left and right truncation each remove target/2 of the sample.
"""

import logging
import multiprocessing
from dataclasses import dataclass, field, replace

import numpy as np

from .adaptive import adaptive_weights, threshold_zeros
from .data import Dataset, FitResult
from .errors import (CalibrationFailure, InvalidTruncationWindow, SolverError,
                     StudyAbort, TooFewObserved)
from .estimator import fit_unpenalized
from .lad import LinearSystem, solve_lad
from .pairwise import loss
from .randomweight import estimate_se
from .tuning import default_cn, lambda_grid, select_lambda

log = logging.getLogger(__name__)

# base pattern of nonzero coefficients; a scenario uses its first p1 values,
# recycling if p1 ever exceeds the pattern length
NONZERO_PATTERN = (3.12, 2.20, -0.86, 0.92, -2.49, 1.95, -1.32, -2.13)


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Generative description of one simulation scenario.

    covariate_laws holds one tuple per coordinate: ("bernoulli", q),
    ("uniform", a, b) or ("gaussian",).  Gaussian coordinates are jointly
    normal with corr(X_i, X_j) = 0.3^|i-j| using the original coordinate
    distances; the non-Gaussian coordinates are independent of everything.
    The left truncation bound is Uniform(a_const, b_offset + b_vec'x) and the
    right bound sits c_const above it; (a_const, c_const, b_offset) come from
    calibrate_truncation.
    """

    n_tilde: int
    beta0: np.ndarray
    covariate_laws: tuple
    error_law: str
    truncation_target: float
    b_vec: np.ndarray
    b_offset: float = None
    a_const: float = None
    c_const: float = None

    def __post_init__(self):
        object.__setattr__(self, "beta0", np.asarray(self.beta0, dtype=float))
        object.__setattr__(self, "b_vec", np.asarray(self.b_vec, dtype=float))
        if self.error_law not in ("normal", "extreme_min"):
            raise ValueError(f"unknown error law {self.error_law!r}")
        if len(self.covariate_laws) != self.beta0.shape[0]:
            raise ValueError("one covariate law per coefficient required")

    @property
    def p(self):
        return self.beta0.shape[0]

    @property
    def support(self):
        return np.flatnonzero(self.beta0)

    @property
    def calibrated(self):
        return self.a_const is not None and self.c_const is not None

    def gaussian_indices(self):
        return np.array([k for k, law in enumerate(self.covariate_laws)
                         if law[0] == "gaussian"], dtype=int)


def paper_scenario(n_tilde, error_law="normal", truncation_target=0.3):
    """Scenario with p = floor(7 n^(1/5)) covariates and floor(p/3) signals.

    Layout: coordinates 1 and 2 are Bernoulli(0.25) and Bernoulli(0.8); the
    three coordinates right after the signal block are Uniform(0, 2),
    Bernoulli(0.5) and Uniform(-2, 0); everything else is standard normal
    with the 0.3^|i-j| correlation across the Gaussian block.  For full
    sample sizes 300 and 500 this reproduces the reference layouts exactly.
    """
    p = int(np.floor(7.0 * float(n_tilde) ** 0.2))
    p1 = p // 3
    if p1 < 1 or p < p1 + 3:
        raise ValueError("sample size too small for the standard layout")
    beta0 = np.zeros(p)
    pattern = np.resize(np.asarray(NONZERO_PATTERN), p1)
    beta0[:p1] = pattern
    laws = [("gaussian",)] * p
    laws[0] = ("bernoulli", 0.25)
    laws[1] = ("bernoulli", 0.8)
    laws[p1] = ("uniform", 0.0, 2.0)
    laws[p1 + 1] = ("bernoulli", 0.5)
    laws[p1 + 2] = ("uniform", -2.0, 0.0)
    return ScenarioSpec(
        n_tilde=int(n_tilde), beta0=beta0, covariate_laws=tuple(laws),
        error_law=error_law, truncation_target=float(truncation_target),
        b_vec=0.1 * np.abs(beta0),
    )


@dataclass(frozen=True)
class FullSample:
    """Pre-truncation sample; not a Dataset because windows may exclude y."""

    y: np.ndarray
    l: np.ndarray
    r: np.ndarray
    x: np.ndarray

    @property
    def n(self):
        return self.y.shape[0]


def _gaussian_chol(spec):
    g = spec.gaussian_indices()
    if g.size == 0:
        return g, None
    corr = 0.3 ** np.abs(g[:, None] - g[None, :])
    return g, np.linalg.cholesky(corr)


def draw_covariates(spec, rng, size):
    """Covariate block of a full sample, in a fixed draw order."""
    x = np.empty((size, spec.p))
    for k, law in enumerate(spec.covariate_laws):
        if law[0] == "bernoulli":
            x[:, k] = rng.binomial(1, law[1], size=size)
        elif law[0] == "uniform":
            x[:, k] = rng.uniform(law[1], law[2], size=size)
    g, chol = _gaussian_chol(spec)
    if g.size:
        z = rng.standard_normal((size, g.size))
        x[:, g] = z @ chol.T
    return x


def draw_errors(spec, rng, size):
    if spec.error_law == "normal":
        return rng.standard_normal(size)
    # minimum extreme value law, CDF 1 - exp(-exp(x)): negated standard Gumbel
    return -rng.gumbel(0.0, 1.0, size=size)


def generate_full_sample(spec, rng):
    """n_tilde i.i.d. pre-truncation records from a calibrated scenario."""
    if not spec.calibrated:
        raise ValueError("scenario must be calibrated first")
    x = draw_covariates(spec, rng, spec.n_tilde)
    eps = draw_errors(spec, rng, spec.n_tilde)
    y = x @ spec.beta0 + eps
    upper = spec.b_offset + x @ spec.b_vec
    if np.any(upper <= spec.a_const):
        raise InvalidTruncationWindow(
            "sampled covariates give an empty left-truncation support"
        )
    l = rng.uniform(spec.a_const, upper)
    r = l + spec.c_const
    return FullSample(y=y, l=l, r=r, x=x)


def apply_truncation(full):
    """Keep exactly the records whose response is interior to its window."""
    mask = (full.l < full.y) & (full.y < full.r)
    n_obs = int(mask.sum())
    if n_obs < full.x.shape[1] + 2:
        raise TooFewObserved(f"only {n_obs} records survive truncation")
    return Dataset(full.y[mask], full.l[mask], full.r[mask], full.x[mask])


def truncation_rates(full):
    """Realised (left, right) truncation fractions of a full sample."""
    left = float(np.mean(full.y <= full.l))
    right = float(np.mean(full.y >= full.r))
    return left, right


def calibrate_truncation(spec, rng, pilot=200_000, rate_tol=0.002,
                         max_depth=200):
    """Calibrate (a_const, c_const, b_offset) to the truncation target.

    Uses a pilot sample of (x, eps) and the conditional truncation
    probabilities given each record, which are exact in the uniform draw of
    the left bound; the resulting rate curves are smooth and monotone, so
    plain bisection suffices.  Left and right truncation are each targeted at
    target/2.  The offset is raised until the left target is reachable with
    the bound constant staying safely below every sampled upper bound.
    """
    target = spec.truncation_target
    if not 0.05 <= target <= 0.95:
        raise CalibrationFailure(f"truncation target {target} unsupported")
    half = target / 2.0
    x = draw_covariates(spec, rng, pilot)
    eps = draw_errors(spec, rng, pilot)
    ytil = x @ spec.beta0 + eps
    s = x @ spec.b_vec
    spread = float(np.std(s)) + 1e-9
    step = 1.0 + spread + float(np.std(ytil))

    def left_rate(a, off):
        u = off + s
        return float(np.mean(np.clip((u - ytil) / (u - a), 0.0, 1.0)))

    def right_rate(a, c, off):
        u = off + s
        return float(np.mean(np.clip((ytil - c - a) / (u - a), 0.0, 1.0)))

    # raise the offset until the left target is reachable from below the
    # smallest pilot upper bound (2 sd margin so fresh samples stay valid)
    off = 0.0
    for _ in range(80):
        a_top = off + float(np.min(s)) - 2.0 * spread
        if left_rate(a_top, off) >= 1.3 * half:
            break
        off += step
    else:
        raise CalibrationFailure("could not reach the left truncation target")

    a_lo = a_top - step
    for _ in range(80):
        if left_rate(a_lo, off) < half:
            break
        a_lo = a_lo - 2.0 * (a_top - a_lo)
    else:
        raise CalibrationFailure("left rate bracket not found")
    a_const = _bisect(lambda a: left_rate(a, off) - half, a_lo, a_top,
                      rate_tol, max_depth, "left truncation rate")

    c_hi = 1.0
    for _ in range(200):
        if right_rate(a_const, c_hi, off) < half:
            break
        c_hi *= 2.0
    else:
        raise CalibrationFailure("right rate bracket not found")
    c_lo = 1e-9 * (1.0 + abs(c_hi))
    if right_rate(a_const, c_lo, off) < half:
        raise CalibrationFailure("right truncation target unreachable")
    c_const = _bisect(lambda c: right_rate(a_const, c, off) - half, c_hi, c_lo,
                      rate_tol, max_depth, "right truncation rate")
    return replace(spec, a_const=float(a_const), c_const=float(c_const),
                   b_offset=float(off))


def _bisect(f, lo, hi, tol, max_depth, label):
    # f(lo) < 0 <= f(hi) by bracket construction; hi may sit left of lo
    flo, fhi = f(lo), f(hi)
    if not (flo < 0 <= fhi):
        raise CalibrationFailure(f"{label}: invalid bracket")
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    raise CalibrationFailure(f"{label}: bisection did not converge")


def scenario_second_moment(spec, rng, n_obs=100_000):
    """E[X X'] of the observed (post-truncation) covariates.

    Estimated once per scenario from an auxiliary sample of n_obs observed
    records; used by the model-error metric.
    """
    if not spec.calibrated:
        raise ValueError("scenario must be calibrated first")
    collected = []
    have = 0
    while have < n_obs:
        want = n_obs - have
        size = int(np.ceil(want / max(1.0 - spec.truncation_target, 0.05) * 1.1)) + 16
        x = draw_covariates(spec, rng, size)
        eps = draw_errors(spec, rng, size)
        y = x @ spec.beta0 + eps
        upper = spec.b_offset + x @ spec.b_vec
        l = rng.uniform(spec.a_const, np.maximum(upper, spec.a_const + 1e-12))
        keep = (l < y) & (y < l + spec.c_const)
        xk = x[keep]
        collected.append(xk[:want])
        have += min(len(xk), want)
    xs = np.vstack(collected)
    return xs.T @ xs / xs.shape[0]


def model_error(beta_hat, beta0, sigma):
    """Quadratic form (beta_hat - beta0)' Sigma (beta_hat - beta0)."""
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta0, dtype=float)
    return float(d @ sigma @ d)


def selection_metrics(beta_hat, beta0):
    """(correct zeros, incorrect zeros, exact support match)."""
    bh = np.asarray(beta_hat) != 0
    b0 = np.asarray(beta0) != 0
    cn = int(np.sum(~b0 & ~bh))
    incorrect = int(np.sum(b0 & ~bh))
    return cn, incorrect, bool(np.array_equal(bh, b0))


def naive_loss(dataset, beta):
    """Plain LAD loss (1/n) sum |y - x'beta| ignoring truncation."""
    return float(np.mean(np.abs(dataset.y - dataset.x @ np.asarray(beta, dtype=float))))


def fit_naive(dataset, gamma=1.0, cap=1e8, grid_size=20, zero_tol=1e-6):
    """Adaptive-lasso LAD treating the data as if it were never truncated.

    Pilot plain LAD, adaptive weights, a doubling/halving penalty grid and
    the same modified BIC, but with the plain (1/n) sum |y - x'beta| loss.
    Each penalty level is one convex LAD solve on the augmented rows.
    """
    n, p = dataset.n, dataset.p
    rows = dataset.x / n
    resp = dataset.y / n
    pilot = solve_lad(LinearSystem(rows, resp))
    w = adaptive_weights(pilot, gamma=gamma, cap=cap).w
    c_n = default_cn(p)

    def fit_at(lam):
        system = LinearSystem(
            np.vstack([rows, np.diag(lam * w)]),
            np.concatenate([resp, np.zeros(p)]),
        )
        return threshold_zeros(solve_lad(system), zero_tol)

    g = np.abs(rows.T @ np.sign(resp))
    lam = float(np.max(g / w))
    if not np.isfinite(lam) or lam <= 0:
        lam = 1.0
    solves = 1
    if np.any(fit_at(lam) != 0):
        for _ in range(80):
            lam *= 2.0
            solves += 1
            if not np.any(fit_at(lam) != 0):
                break
    else:
        lam_zero = lam
        for _ in range(80):
            lam /= 2.0
            solves += 1
            if np.any(fit_at(lam) != 0):
                break
            lam_zero = lam
        lam = lam_zero
    best = None
    for lam_k in np.geomspace(lam, 1e-4 * lam, int(grid_size)):
        beta_k = fit_at(lam_k)
        solves += 1
        df = int(np.sum(beta_k != 0))
        bic_k = naive_loss(dataset, beta_k) + (np.log(n) / n) * c_n * df
        if best is None or bic_k < best[0]:
            best = (bic_k, lam_k, beta_k, df)
    bic_b, lam_b, beta_b, _ = best
    objective = naive_loss(dataset, beta_b) + lam_b * float(w @ np.abs(beta_b))
    return FitResult(beta=beta_b, objective=objective, iterations=solves,
                     converged=True)


def fit_oracle(dataset, support):
    """Unpenalised fit restricted to the true support columns, zeros elsewhere."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        beta = np.zeros(dataset.p)
        return FitResult(beta=beta, objective=loss(dataset, beta),
                         iterations=0, converged=True)
    if support.size == dataset.p and np.array_equal(support, np.arange(dataset.p)):
        return fit_unpenalized(dataset)
    sub = dataset.subset_columns(support)
    fit = fit_unpenalized(sub)
    beta = np.zeros(dataset.p)
    beta[support] = fit.beta
    return FitResult(beta=beta, objective=fit.objective,
                     iterations=fit.iterations, converged=fit.converged)


@dataclass
class StudyConfig:
    """Everything a replication study needs besides the master seed."""

    spec: ScenarioSpec
    replications: int = 200
    grid_size: int = 20
    gamma: float = 1.0
    cap: float = 1e8
    se_reps: int = 0
    tol: float = 1e-6
    max_iter: int = 50
    zero_tol: float = 1e-6
    n_jobs: int = 1
    calibration_pilot: int = 200_000
    sigma_obs: int = 100_000
    max_failure_rate: float = 0.02


@dataclass
class MethodSummary:
    me_median: float
    me_mad: float
    cn: float
    incorrect: float
    rcm: float


@dataclass
class StudySummary:
    """Aggregated study outcome plus per-replication detail arrays."""

    methods: dict
    replications: int
    n_failed: int
    spec: ScenarioSpec
    details: dict = field(default_factory=dict)


METHODS = ("proposed", "naive", "oracle")


def _run_replication(args):
    spec, config, child_seed = args
    rng = np.random.default_rng(child_seed)
    se_seed = child_seed.spawn(1)[0]
    try:
        full = generate_full_sample(spec, rng)
        ds = apply_truncation(full)
        out = {"n_obs": ds.n}

        pilot = fit_unpenalized(ds, tol=config.tol, max_iter=config.max_iter)
        aw = adaptive_weights(pilot.beta, gamma=config.gamma, cap=config.cap)
        grid = lambda_grid(ds, aw, size=config.grid_size, beta_init=pilot.beta,
                           tol=config.tol, max_iter=config.max_iter,
                           zero_tol=config.zero_tol)
        selection = select_lambda(ds, aw, grid, beta_init=pilot.beta,
                                  tol=config.tol, max_iter=config.max_iter,
                                  zero_tol=config.zero_tol)
        out["proposed"] = selection.fit.beta
        if config.se_reps:
            se = estimate_se(ds, selection, aw, reps=config.se_reps,
                             seed=se_seed, tol=config.tol,
                             max_iter=config.max_iter,
                             zero_tol=config.zero_tol)
            sevec = np.full(spec.p, np.nan)
            sevec[se.active_set] = se.se
            out["se"] = sevec
        out["naive"] = fit_naive(ds, gamma=config.gamma, cap=config.cap,
                                 grid_size=config.grid_size,
                                 zero_tol=config.zero_tol).beta
        out["oracle"] = fit_oracle(ds, spec.support).beta
        return out
    except (SolverError, ValueError) as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def run_study(config, master_seed):
    """Run the replication study; bit-identical for a fixed master seed.

    Calibrates the scenario if needed, estimates the observed second-moment
    matrix once, then runs independent replications, each on its own seed
    stream derived from (master_seed, replication index), so the summary does
    not depend on worker count or scheduling.  Failed replications are logged
    and excluded; more than max_failure_rate of them aborts the study.
    """
    spec = config.spec
    root = np.random.SeedSequence(master_seed)
    children = root.spawn(config.replications + 2)
    calib_ss, sigma_ss = children[0], children[1]
    if not spec.calibrated:
        spec = calibrate_truncation(spec, np.random.default_rng(calib_ss),
                                    pilot=config.calibration_pilot)
    sigma = scenario_second_moment(spec, np.random.default_rng(sigma_ss),
                                   n_obs=config.sigma_obs)
    tasks = [(spec, config, children[2 + r]) for r in range(config.replications)]
    if config.n_jobs > 1:
        with multiprocessing.Pool(config.n_jobs) as pool:
            results = pool.map(_run_replication, tasks)
    else:
        results = [_run_replication(t) for t in tasks]

    failures = [r["error"] for r in results if "error" in r]
    if len(failures) > config.max_failure_rate * config.replications:
        raise StudyAbort(
            f"{len(failures)}/{config.replications} replications failed: "
            f"{failures[:3]}"
        )
    for msg in failures:
        log.warning("replication failed: %s", msg)
    good = [r for r in results if "error" not in r]

    details = {"n_obs": np.array([r["n_obs"] for r in good])}
    methods = {}
    for name in METHODS:
        betas = np.vstack([r[name] for r in good])
        me = np.array([model_error(b, spec.beta0, sigma) for b in betas])
        sel = [selection_metrics(b, spec.beta0) for b in betas]
        cn = np.array([s[0] for s in sel], dtype=float)
        inc = np.array([s[1] for s in sel], dtype=float)
        match = np.array([s[2] for s in sel], dtype=float)
        methods[name] = MethodSummary(
            me_median=float(np.median(me)),
            me_mad=float(np.median(np.abs(me - np.median(me)))),
            cn=float(cn.mean()),
            incorrect=float(inc.mean()),
            rcm=float(100.0 * match.mean()),
        )
        details[f"{name}_beta"] = betas
        details[f"{name}_me"] = me
    if config.se_reps:
        details["proposed_se"] = np.vstack([r["se"] for r in good])
    return StudySummary(methods=methods, replications=len(good),
                        n_failed=len(failures), spec=spec, details=details)
