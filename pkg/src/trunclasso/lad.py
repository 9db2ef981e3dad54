"""Exact weighted least-absolute-deviation regression.

Solves min_beta sum_m w_m |response_m - design_m' beta|.  The workhorse is a
Mehrotra predictor-corrector interior-point method on the LP formulation,
followed by a vertex polish (re-interpolating the best basis found), so the
returned point is a deterministic optimum to machine accuracy.  Systems built
from pairwise differences carry their structure, which turns the normal
matrix into a graph-Laplacian quadratic form and the per-iteration cost into
O(m + n^2 p) instead of O(m p^2).

A sparse HiGHS solve is kept as a fallback for inputs that defeat the
interior-point iteration; the choice of path is a deterministic function of
the input.
"""

import numpy as np
import scipy.sparse as sparse
from scipy.optimize import linprog

from .errors import Degenerate, RankDeficient, SolverError


class LinearSystem:
    """Weighted L1 regression system.

    Parameters
    ----------
    design : (m, p) array
    response : (m,) array
    row_weights : (m,) nonnegative array, default all ones
        Weights multiply rows exactly: w |r - d'beta|.
    """

    def __init__(self, design, response, row_weights=None):
        design = np.asarray(design, dtype=float)
        if design.ndim == 1:
            design = design[:, None]
        self.design = design
        self.response = np.asarray(response, dtype=float)
        m = self.response.shape[0]
        if design.shape[0] != m or m < 1:
            raise ValueError("design and response rows disagree or empty")
        if row_weights is None:
            self.row_weights = np.ones(m)
        else:
            self.row_weights = np.asarray(row_weights, dtype=float)
            if self.row_weights.shape != (m,):
                raise ValueError("row_weights length mismatch")
            if not np.all(np.isfinite(self.row_weights)) or np.any(self.row_weights < 0):
                raise ValueError("row_weights must be finite and nonnegative")

    @property
    def m(self):
        return self.response.shape[0]

    @property
    def p(self):
        return self.design.shape[1]

    def objective(self, beta):
        """Weighted L1 objective at beta."""
        res = self.response - self.design @ np.asarray(beta, dtype=float)
        return float(self.row_weights @ np.abs(res))


class PairDifferenceSystem(LinearSystem):
    """LinearSystem whose leading rows are scaled differences of base rows.

    Row k < n_pairs is scale * (x_base[i_k] - x_base[j_k]) with response
    scale * (y_base[i_k] - y_base[j_k]); any remaining rows (a penalty block)
    are stored densely.  Solvers work on the structure; the dense design of
    the LinearSystem contract is materialised only on first access.
    """

    def __init__(self, x_base, y_base, pairs, scale, pair_weights=None,
                 extra_design=None, extra_response=None, extra_weights=None):
        self.x_base = np.asarray(x_base, dtype=float)
        self.y_base = np.asarray(y_base, dtype=float)
        self.pairs = np.asarray(pairs, dtype=np.intp)
        self.scale = float(scale)
        self.n_pairs = len(self.pairs)
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        response = (self.y_base[i] - self.y_base[j]) * scale
        weights = (np.ones(self.n_pairs) if pair_weights is None
                   else np.asarray(pair_weights, dtype=float))
        if extra_design is not None and len(extra_design):
            self.extra_design = np.asarray(extra_design, dtype=float)
            response = np.concatenate([response, extra_response])
            ew = (np.ones(len(extra_design)) if extra_weights is None
                  else np.asarray(extra_weights, dtype=float))
            weights = np.concatenate([weights, ew])
        else:
            self.extra_design = np.zeros((0, self.x_base.shape[1]))
        self.response = response
        self.row_weights = weights
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("row_weights must be finite and nonnegative")
        self._design = None

    @property
    def design(self):
        if self._design is None:
            i, j = self.pairs[:, 0], self.pairs[:, 1]
            rows = (self.x_base[i] - self.x_base[j]) * self.scale
            self._design = np.vstack([rows, self.extra_design])
        return self._design

    @property
    def p(self):
        return self.x_base.shape[1]


def solve_lad(system, tol=1e-9, max_iter=100, polish=True, check_rank=False):
    """Minimise the weighted L1 objective of `system`.

    Returns the coefficient vector.  The objective at the returned point is
    within tol (relative) of the global optimum; for a fixed input the output
    is bit-reproducible.

    Raises
    ------
    Degenerate
        All row weights are zero.
    RankDeficient
        The positively weighted design has deficient column rank, so the
        minimiser is not unique; reported rather than silently regularised.
    """
    w = system.row_weights
    keep = np.flatnonzero(w > 0)
    if keep.size == 0:
        raise Degenerate("all row weights are zero")
    ops = _make_ops(system, keep)
    if check_rank:
        _require_full_rank(ops)
    try:
        beta, gap = _ipm(ops, gap_tol=min(tol, 1e-9) * 1e-2, max_iter=max_iter)
    except _IpmFailure:
        _require_full_rank(ops)
        beta = _solve_highs(ops)
    if polish:
        beta = _vertex_polish(ops, beta)
    return beta


def directional_slack(system, beta, zero_tol=1e-8):
    """Smallest one-sided directional derivative along +-coordinate axes.

    Nonnegative (up to solver tolerance) exactly when beta satisfies the
    coordinatewise subgradient optimality condition.  Rows whose residual is
    within zero_tol of zero (relative to the response scale) contribute their
    full |d_mj| swing in both directions.
    """
    w = system.row_weights
    res = system.response - system.design @ np.asarray(beta, dtype=float)
    scale = 1.0 + np.abs(system.response).max()
    at_zero = np.abs(res) <= zero_tol * scale
    s = np.sign(res)
    s[at_zero] = 0.0
    g = system.design.T @ (w * s)
    swing = np.abs(system.design[at_zero]).T @ w[at_zero]
    # derivative along +e_j is -g_j + swing_j, along -e_j it is +g_j + swing_j
    return float(np.min(swing - np.abs(g)))


# ---------------------------------------------------------------------------
# internal operator representations


class _DenseOps:
    def __init__(self, design, response, weights):
        self.D = design
        self.r = response
        self.w = weights
        self.m, self.p = design.shape

    def matvec(self, beta):
        return self.D @ beta

    def rmatvec(self, v):
        return self.D.T @ v

    def normal(self, theta):
        return (self.D * theta[:, None]).T @ self.D

    def rows(self, idx):
        return self.D[idx]

    def dense(self):
        return self.D


class _PairOps:
    """Operators for [scaled pair differences; dense extra rows]."""

    def __init__(self, x_base, pairs, scale, extra, response, weights):
        self.X = x_base
        self.i = pairs[:, 0]
        self.j = pairs[:, 1]
        self.scale = scale
        self.G = extra  # (q, p)
        self.r = response
        self.w = weights
        self.nb = x_base.shape[0]
        self.mp = len(self.i)
        self.q = extra.shape[0]
        self.m = self.mp + self.q
        self.p = x_base.shape[1]

    def matvec(self, beta):
        e = self.X @ beta
        out = np.empty(self.m)
        out[: self.mp] = (e[self.i] - e[self.j]) * self.scale
        if self.q:
            out[self.mp:] = self.G @ beta
        return out

    def rmatvec(self, v):
        acc = np.bincount(self.i, v[: self.mp], minlength=self.nb)
        acc -= np.bincount(self.j, v[: self.mp], minlength=self.nb)
        out = (self.X.T @ acc) * self.scale
        if self.q:
            out += self.G.T @ v[self.mp:]
        return out

    def normal(self, theta):
        th = theta[: self.mp] * self.scale**2
        a = np.bincount(self.i * self.nb + self.j, th, minlength=self.nb * self.nb)
        a = a.reshape(self.nb, self.nb)
        a = a + a.T
        lx = a.sum(axis=1)[:, None] * self.X - a @ self.X
        M = self.X.T @ lx
        if self.q:
            M = M + (self.G * theta[self.mp:, None]).T @ self.G
        return M

    def rows(self, idx):
        idx = np.asarray(idx)
        out = np.empty((idx.size, self.p))
        pair_part = idx < self.mp
        ip = idx[pair_part]
        out[pair_part] = (self.X[self.i[ip]] - self.X[self.j[ip]]) * self.scale
        if self.q:
            out[~pair_part] = self.G[idx[~pair_part] - self.mp]
        return out

    def dense(self):
        rows = (self.X[self.i] - self.X[self.j]) * self.scale
        return np.vstack([rows, self.G]) if self.q else rows


def _make_ops(system, keep):
    w = system.row_weights
    if isinstance(system, PairDifferenceSystem):
        mpair = system.n_pairs
        kp = keep[keep < mpair]
        ke = keep[keep >= mpair]
        extra = (system.extra_design[ke - mpair] if ke.size
                 else np.zeros((0, system.p)))
        pairs = system.pairs[kp]
        resp = np.concatenate([system.response[kp], system.response[ke]])
        wk = np.concatenate([w[kp], w[ke]])
        return _PairOps(system.x_base, pairs, system.scale, extra, resp, wk)
    return _DenseOps(system.design[keep], system.response[keep], w[keep])


def _require_full_rank(ops):
    if np.linalg.matrix_rank(ops.dense()) < ops.p:
        raise RankDeficient(
            "design is rank deficient on its positively weighted rows"
        )


class _IpmFailure(SolverError):
    pass


def _ipm(ops, gap_tol, max_iter):
    """Mehrotra predictor-corrector on the LAD primal-dual pair."""
    r, w, m, p = ops.r, ops.w, ops.m, ops.p
    scale = 1.0 + float(np.abs(r).mean())

    M0 = ops.normal(w)
    rhs0 = ops.rmatvec(w * r)
    try:
        beta = np.linalg.solve(M0 + np.eye(p) * (1e-12 * (1 + np.trace(M0) / p)), rhs0)
    except np.linalg.LinAlgError:
        raise _IpmFailure("singular normal matrix at initialisation")
    res = r - ops.matvec(beta)
    delta = 0.1 * scale + 0.1 * float(np.abs(res).mean())
    u = np.maximum(res, 0.0) + delta
    v = np.maximum(-res, 0.0) + delta
    nu = np.zeros(m)

    best_gap = np.inf
    stall = 0
    for _ in range(max_iter):
        sp = w - nu
        sm = w + nu
        mu = (u @ sp + v @ sm) / (2 * m)
        f_primal = float(w @ np.abs(res))
        relgap = (f_primal - float(r @ nu)) / (1.0 + abs(f_primal))
        pfeas = float(np.abs(res - u + v).max()) / scale
        dfeas = float(np.abs(ops.rmatvec(nu)).max()) / scale
        err = max(relgap, pfeas, dfeas)
        if relgap < gap_tol and pfeas < 1e-9 and dfeas < 1e-9:
            return beta, err
        if err < best_gap * 0.95:
            best_gap = err
            stall = 0
        else:
            stall += 1
            if stall > 12:
                if err < 1e-8:
                    return beta, err
                raise _IpmFailure("interior point iteration stalled")

        theta_inv = 1.0 / (u / sp + v / sm)
        M = ops.normal(theta_inv)
        try:
            chol = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            if err < 1e-8:
                return beta, err
            raise _IpmFailure("normal matrix lost positive definiteness")

        f1 = res - u + v
        f2 = -ops.rmatvec(nu)

        def newton(f3, f4):
            fhat = f1 - f3 / sp + f4 / sm
            rhs = ops.rmatvec(theta_inv * fhat) - f2
            db = _chol_solve(chol, rhs)
            dnu = theta_inv * (fhat - ops.matvec(db))
            du = (f3 + u * dnu) / sp
            dv = (f4 - v * dnu) / sm
            return db, dnu, du, dv

        # affine scaling step
        db_a, dnu_a, du_a, dv_a = newton(-u * sp, -v * sm)
        ap = _step(1.0, u, du_a, v, dv_a)
        ad = _step_dual(1.0, sp, sm, dnu_a)
        mu_aff = ((u + ap * du_a) @ (sp - ad * dnu_a)
                  + (v + ap * dv_a) @ (sm + ad * dnu_a)) / (2 * m)
        sigma = min(max((mu_aff / mu) ** 3, 1e-8), 1.0)

        # corrected step
        f3 = sigma * mu - u * sp + du_a * dnu_a
        f4 = sigma * mu - v * sm - dv_a * dnu_a
        db, dnu, du, dv = newton(f3, f4)
        eta = max(0.9995, 1.0 - 10.0 * mu / scale)
        ap = min(1.0, eta * _step(1.0, u, du, v, dv))
        ad = min(1.0, eta * _step_dual(1.0, sp, sm, dnu))

        beta = beta + ap * db
        u = u + ap * du
        v = v + ap * dv
        nu = nu + ad * dnu
        res = r - ops.matvec(beta)
    raise _IpmFailure("interior point iteration limit reached")


def _chol_solve(chol, rhs):
    z = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, z)


def _step(alpha, u, du, v, dv):
    msk = du < 0
    if msk.any():
        alpha = min(alpha, float(np.min(-u[msk] / du[msk])))
    msk = dv < 0
    if msk.any():
        alpha = min(alpha, float(np.min(-v[msk] / dv[msk])))
    return alpha


def _step_dual(alpha, sp, sm, dnu):
    msk = dnu > 0
    if msk.any():
        alpha = min(alpha, float(np.min(sp[msk] / dnu[msk])))
    msk = dnu < 0
    if msk.any():
        alpha = min(alpha, float(np.min(-sm[msk] / dnu[msk])))
    return alpha


def _vertex_polish(ops, beta):
    """Re-interpolate the basis suggested by the smallest residuals.

    Accepts the vertex only when its objective does not exceed the incoming
    one, so polishing never harms optimality and pins basic coordinates
    (e.g. penalty rows) to exact zeros.
    """
    res = ops.r - ops.matvec(beta)
    order = np.argsort(np.abs(res), kind="stable")
    p = ops.p
    Q = np.zeros((p, p))
    k = 0
    basis = []
    # greedy scan limited to a generous prefix; dependent rows are skipped
    for idx in order[: max(4 * p + 16, 64)]:
        x = ops.rows(np.array([idx]))[0]
        nx = float(np.linalg.norm(x))
        if nx <= 0.0:
            continue
        q = x - Q[:k].T @ (Q[:k] @ x)
        q = q - Q[:k].T @ (Q[:k] @ q)
        nq = float(np.linalg.norm(q))
        if nq > 1e-10 * nx:
            Q[k] = q / nq
            basis.append(int(idx))
            k += 1
            if k == p:
                break
    if k < p:
        return beta
    B = np.array(basis)
    try:
        cand = np.linalg.solve(ops.rows(B), ops.r[B])
    except np.linalg.LinAlgError:
        return beta
    obj_in = float(ops.w @ np.abs(res))
    obj_cand = float(ops.w @ np.abs(ops.r - ops.matvec(cand)))
    if obj_cand <= obj_in:
        return cand
    return beta


def _solve_highs(ops):
    """Sparse HiGHS solve of the LP dual; beta recovered from the marginals."""
    m, p = ops.m, ops.p
    if isinstance(ops, _PairOps):
        nb, mp, q = ops.nb, ops.mp, ops.q
        data = np.concatenate([np.ones(nb),
                               -ops.scale * np.ones(mp),
                               ops.scale * np.ones(mp)])
        rows = np.concatenate([np.arange(nb), ops.i, ops.j])
        cols = np.concatenate([np.arange(nb),
                               nb + np.arange(mp),
                               nb + np.arange(mp)])
        a1 = sparse.coo_matrix((data, (rows, cols)), shape=(nb, nb + mp + q))
        blocks = [sparse.coo_matrix(ops.X.T), sparse.coo_matrix((p, mp))]
        if q:
            blocks.append(sparse.coo_matrix(ops.G.T))
        a2 = sparse.hstack(blocks)
        a_eq = sparse.vstack([a1, a2], format="csc")
        c = np.concatenate([np.zeros(nb), -ops.r])
        lb = np.concatenate([np.full(nb, -np.inf), -ops.w])
        ub = np.concatenate([np.full(nb, np.inf), ops.w])
        pick = slice(nb, nb + p)
        n_eq = nb + p
    else:
        a_eq = sparse.csc_matrix(ops.D.T)
        c = -ops.r
        lb, ub = -ops.w, ops.w
        pick = slice(0, p)
        n_eq = p
    result = linprog(c, A_eq=a_eq, b_eq=np.zeros(n_eq),
                     bounds=np.column_stack([lb, ub]), method="highs-ds")
    if result.status != 0 or result.eqlin is None:
        raise SolverError(f"fallback LP failed: {result.message}")
    return -np.asarray(result.eqlin.marginals)[pick]
