"""Constrained concave maximization for value-vector estimation and acquisition.

Two finite-dimensional programs are solved here, both over candidate
value vectors Z at the queried points:

* the ball-constrained maximum-likelihood problem

      max  L(Z)          s.t.  Z^T (K + eps*I)^{-1} Z <= B^2,

* and the per-candidate optimistic advantage problem

      max  z - z_t       s.t.  [Z; z]^T (K_x + eps*I)^{-1} [Z; z] <= B^2,
                               L(Z) >= L_best - beta1,

  where K_x borders K with the kernel column of the candidate point x.

Both are concave programs with a single quadratic-norm constraint (plus
one smooth inequality for the second).  We work in Cholesky-whitened
coordinates w (Z = L w), where the norm constraint becomes the Euclidean
ball and projection is a rescale.  The smooth concave subproblems are
maximized by a spectral projected-gradient loop with a nonmonotone
backtracking line search; the likelihood inequality is handled by a
penalty outer loop with multiplier updates and doubling weights,
finished by an exact-feasibility polish (bisection toward a strictly
feasible anchor) so returned iterates satisfy the constraint to working
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit
from scipy.stats import qmc

from .kernels import DEFAULT_JITTER, KernelSpec, NumericalError, chol, cross_kernel, self_kernel
from .likelihood import History

OPT_TOL = 1e-6
FEAS_TOL = 1e-6
MAX_ITER = 500
MAX_DOUBLINGS = 20


@dataclass
class SolveReport:
    """Outcome of one constrained solve."""

    argmax: np.ndarray
    objective: float
    iterations: int
    constraint_slack: float
    converged: bool
    w: np.ndarray | None = field(default=None, repr=False)
    mu: float = field(default=0.0, repr=False)
    rho: float = field(default=1.0, repr=False)
    alpha: float = field(default=1.0, repr=False)


def _ll_and_grad(Z: np.ndarray, outcomes: np.ndarray) -> tuple[float, np.ndarray]:
    # fast path of likelihood.log_likelihood / grad_log_likelihood
    d = Z[1:] - Z[:-1]
    ll = float(outcomes @ d - np.logaddexp(0.0, d).sum())
    r = outcomes - expit(d)
    g = np.empty_like(Z)
    g[0] = -r[0]
    g[-1] = r[-1]
    if Z.shape[0] > 2:
        g[1:-1] = r[:-1] - r[1:]
    return ll, g


def _ball_project(w: np.ndarray, radius: float) -> np.ndarray:
    nrm = math.sqrt(float(w @ w))
    if nrm <= radius:
        return w
    return w * (radius / nrm)


def _spg_max(fg, w0: np.ndarray, radius: float, *, opt_tol: float, max_iter: int, alpha0: float = 1.0):
    """Maximize a smooth concave function over the Euclidean ball.

    Spectral (Barzilai-Borwein) step with a nonmonotone Armijo
    backtracking line search.  ``fg(w, need_grad)`` returns (value,
    gradient-or-None); line-search trials only request values.  Returns
    (w, f, g, iterations, converged, alpha).
    """
    w = _ball_project(np.array(w0, dtype=float), radius)
    f, g = fg(w, True)
    alpha = alpha0
    recent = [f]
    small_steps = 0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        d = _ball_project(w + alpha * g, radius) - w
        dn = math.sqrt(float(d @ d))
        if dn <= 1e-12 * (1.0 + math.sqrt(float(w @ w))):
            converged = True
            break
        gd = float(g @ d)
        if gd <= 0.0:
            # direction no longer ascent at this step length; shrink and retry
            alpha *= 0.25
            if alpha < 1e-14:
                converged = True
                break
            continue
        f_ref = max(recent)
        lam = 1.0
        while True:
            w_new = w + lam * d
            f_new, _ = fg(w_new, False)
            if f_new >= f_ref + 1e-4 * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        _, g_new = fg(w_new, True)
        s = w_new - w
        y = g_new - g
        sy = float(s @ y)
        alpha = min(max(-(s @ s) / sy, 1e-10), 1e10) if sy < -1e-300 else alpha * 2.0
        if abs(f_new - f) <= opt_tol * (1.0 + abs(f_new)):
            small_steps += 1
            if small_steps >= 2:
                w, f, g = w_new, f_new, g_new
                converged = True
                break
        else:
            small_steps = 0
        w, f, g = w_new, f_new, g_new
        recent.append(f)
        if len(recent) > 8:
            recent.pop(0)
    return w, f, g, it, converged, alpha


class StepWorkspace:
    """Factorizations shared by every solve at one optimization step.

    Holds the jittered Gram Cholesky over the queried points, the
    outcome bits, and (once computed) the canonical maximum-likelihood
    solution used as warm start and feasible anchor.
    """

    def __init__(self, history: History, kernel: KernelSpec, B: float, eps_K: float):
        if B <= 0:
            raise ValueError("norm bound B must be strictly positive")
        self.history = history
        self.kernel = kernel
        self.B = float(B)
        self.eps_K = float(eps_K)
        self.t = len(history)
        self.pts = history.points
        self.outcomes = history.outcomes
        K = cross_kernel(kernel, self.pts, self.pts)
        K = 0.5 * (K + K.T)
        K[np.diag_indices_from(K)] += eps_K
        self.K = K
        self.L = chol(K)
        self.Lrow_last = self.L[self.t, :].copy()
        self._Kinv_ones = solve_triangular(
            self.L.T, solve_triangular(self.L, np.ones(self.t + 1), lower=True, check_finite=False),
            lower=False, check_finite=False,
        )
        self.mle: SolveReport | None = None

    def whiten(self, Z: np.ndarray) -> np.ndarray:
        return solve_triangular(self.L, Z, lower=True, check_finite=False)

    def ensure_mle(self, warm_start=None) -> SolveReport:
        if self.mle is None:
            self.mle = solve_mle(
                self.history, self.kernel, self.B, self.eps_K,
                warm_start=warm_start, workspace=self,
            )
        return self.mle


def solve_mle(
    history: History,
    kernel: KernelSpec,
    B: float,
    eps_K: float = DEFAULT_JITTER,
    *,
    warm_start=None,
    workspace: StepWorkspace | None = None,
    opt_tol: float = OPT_TOL,
    max_iter: int = MAX_ITER,
) -> SolveReport:
    """Maximum-likelihood value vector inside the norm ball.

    Returns the canonical (minimum-norm) maximizer: the likelihood is
    invariant under constant shifts, so the exact shift minimizing the
    quadratic form is applied to the solution.
    """
    t = len(history)
    if t == 0:
        report = SolveReport(
            argmax=np.zeros(1), objective=0.0, iterations=0,
            constraint_slack=float(B) ** 2, converged=True, w=np.zeros(1),
        )
        if workspace is not None:
            workspace.mle = report
        return report
    ws = workspace if workspace is not None else StepWorkspace(history, kernel, B, eps_K)
    outcomes = ws.outcomes
    L = ws.L

    def fg(w, need_grad=True):
        Z = L @ w
        if not need_grad:
            d = Z[1:] - Z[:-1]
            return float(outcomes @ d - np.logaddexp(0.0, d).sum()), None
        ll, gZ = _ll_and_grad(Z, outcomes)
        return ll, L.T @ gZ

    if warm_start is not None:
        z0 = np.asarray(warm_start, dtype=float).reshape(-1)
        if z0.shape[0] < t + 1:
            z0 = np.concatenate([z0, np.full(t + 1 - z0.shape[0], z0[-1] if z0.size else 0.0)])
        w0 = ws.whiten(z0[: t + 1])
    else:
        w0 = np.zeros(t + 1)
    w, f, _, iters, converged, _ = _spg_max(fg, w0, ws.B, opt_tol=opt_tol, max_iter=max_iter)
    Z = L @ w
    # canonical minimum-norm representative along the shift direction
    denom = float(np.sum(ws._Kinv_ones))
    c = -float(Z @ ws._Kinv_ones) / denom
    Z = Z + c
    w = ws.whiten(Z)
    nrm = float(np.linalg.norm(w))
    if nrm > ws.B:
        w *= ws.B / nrm
        Z = L @ w
    f, _ = _ll_and_grad(Z, outcomes)
    report = SolveReport(
        argmax=Z, objective=float(f), iterations=iters,
        constraint_slack=ws.B**2 - float(w @ w), converged=converged, w=w,
    )
    if workspace is not None:
        workspace.mle = report
    return report


def _border(ws: StepWorkspace, x: np.ndarray):
    """Extend the step Cholesky with the kernel column of candidate x."""
    kx = cross_kernel(ws.kernel, ws.pts, np.atleast_2d(x)).ravel()
    b = solve_triangular(ws.L, kx, lower=True, check_finite=False)
    kxx = float(cross_kernel(ws.kernel, np.atleast_2d(x), np.atleast_2d(x))[0, 0]) + ws.eps_K
    gamma2 = kxx - float(b @ b)
    if gamma2 < -1e-8:
        raise NumericalError(f"bordered Gram lost positive definiteness (gamma^2 = {gamma2:.3e})")
    gamma = math.sqrt(max(gamma2, 1e-14))
    return b, gamma


def solve_acquisition_inner(
    x,
    history: History,
    kernel: KernelSpec,
    B: float,
    beta1: float,
    l_mle: float,
    eps_K: float = DEFAULT_JITTER,
    *,
    workspace: StepWorkspace | None = None,
    warm: SolveReport | None = None,
    border: tuple[np.ndarray, float] | None = None,
    opt_tol: float = OPT_TOL,
    feas_tol: float = FEAS_TOL,
    max_iter: int = MAX_ITER,
) -> SolveReport:
    """Optimistic advantage of candidate x over the last queried point.

    Maximizes z - z_t over value vectors consistent with the norm ball
    (bordered by x) and with log-likelihood within beta1 of the maximum.
    """
    if beta1 < 0:
        raise ValueError("beta1 must be nonnegative")
    x = np.asarray(x, dtype=float).reshape(-1)
    ws = workspace if workspace is not None else StepWorkspace(history, kernel, B, eps_K)
    t = ws.t
    B_ = ws.B
    b, gamma = border if border is not None else _border(ws, x)
    q = np.concatenate([b - ws.Lrow_last, [gamma]])

    if t == 0:
        # no preference data: advantage is the ball maximum of a linear functional
        qn = float(np.linalg.norm(q))
        w = B_ * q / qn if qn > 0 else np.zeros(2)
        Z = ws.L @ w[:1]
        z = float(b @ w[:1] + gamma * w[1])
        return SolveReport(
            argmax=np.concatenate([Z, [z]]), objective=B_ * qn, iterations=0,
            constraint_slack=0.0, converged=True, w=w,
        )

    mle = ws.ensure_mle()
    l0 = float(l_mle) - float(beta1)
    outcomes = ws.outcomes
    L = ws.L
    anchor_ll, _ = _ll_and_grad(mle.argmax, outcomes)
    if anchor_ll < l0 - 1e-9 * (1.0 + abs(l0)):
        raise NumericalError(
            "maximum-likelihood anchor violates the likelihood constraint; "
            "the supplied best value is inconsistent with this history"
        )
    w_mle = mle.w
    slack = max(B_**2 - float(w_mle @ w_mle), 0.0)
    anchor = np.concatenate([w_mle, [math.sqrt(slack)]])

    mu = warm.mu if warm is not None else 0.0
    rho = warm.rho if warm is not None else 1.0
    if warm is not None and warm.w is not None and warm.w.shape[0] == t + 2:
        w = _ball_project(warm.w.copy(), B_)
    else:
        w = anchor.copy()

    def make_fg(mu, rho):
        def fg(wv, need_grad=True):
            Z = L @ wv[:-1]
            base = float(q @ wv)
            if not need_grad:
                d = Z[1:] - Z[:-1]
                ll = float(outcomes @ d - np.logaddexp(0.0, d).sum())
                sarg = mu / rho + (l0 - ll)
                if sarg > 0.0:
                    return base - 0.5 * rho * sarg * sarg + 0.5 * mu * mu / rho, None
                return base + 0.5 * mu * mu / rho, None
            ll, gZ = _ll_and_grad(Z, outcomes)
            sarg = mu / rho + (l0 - ll)
            if sarg > 0.0:
                val = base - 0.5 * rho * sarg * sarg + 0.5 * mu * mu / rho
                grad = q.copy()
                grad[:-1] += (rho * sarg) * (L.T @ gZ)
                return val, grad
            return base + 0.5 * mu * mu / rho, q
        return fg

    total_iters = 0
    converged = False
    prev_viol = math.inf
    doublings = 0
    prev_obj = None
    alpha = warm.alpha if warm is not None else 1.0
    warm_started = warm is not None and warm.w is not None and warm.w.shape[0] == t + 2
    for outer in range(30):
        budget = min(120, max_iter - total_iters)
        if budget <= 0:
            break
        w, _, _, iters, sub_conv, alpha = _spg_max(
            make_fg(mu, rho), w, B_, opt_tol=opt_tol, max_iter=budget, alpha0=alpha,
        )
        total_iters += iters
        ll, _ = _ll_and_grad(L @ w[:-1], outcomes)
        viol = l0 - ll
        obj = float(q @ w)
        mu_new = max(0.0, mu + rho * viol)
        if viol <= feas_tol and sub_conv:
            # multiplier already stationary: accept without a confirm round
            if abs(mu_new - mu) <= 1e-3 * (1.0 + mu) and (warm_started or outer > 0):
                mu = mu_new
                converged = True
                break
            if prev_obj is not None and abs(obj - prev_obj) <= opt_tol * (1.0 + abs(obj)):
                mu = mu_new
                converged = True
                break
            if viol <= 0.0 and mu == 0.0:
                converged = True
                break
        mu = mu_new
        if viol > feas_tol and viol > 0.25 * prev_viol and doublings < MAX_DOUBLINGS:
            rho *= 2.0
            doublings += 1
        prev_viol = max(viol, 0.0) if viol > 0 else prev_viol
        prev_obj = obj

    # exact-feasibility polish: bisect toward the anchor until L(Z) >= l0
    ll, _ = _ll_and_grad(L @ w[:-1], outcomes)
    if ll < l0:
        lo_t, hi_t = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo_t + hi_t)
            w_mid = (1.0 - mid) * w + mid * anchor
            ll_mid, _ = _ll_and_grad(L @ w_mid[:-1], outcomes)
            if ll_mid >= l0:
                hi_t = mid
            else:
                lo_t = mid
        w = (1.0 - hi_t) * w + hi_t * anchor
        ll, _ = _ll_and_grad(L @ w[:-1], outcomes)

    w = _ball_project(w, B_)
    Z = L @ w[:-1]
    z = float(b @ w[:-1] + gamma * w[-1])
    objective = float(q @ w)
    slack = min(B_**2 - float(w @ w), ll - l0)
    return SolveReport(
        argmax=np.concatenate([Z, [z]]), objective=objective, iterations=total_iters,
        constraint_slack=float(slack), converged=converged or total_iters < max_iter,
        w=w, mu=mu, rho=rho, alpha=alpha,
    )


def grid_candidates(domain, budget: int | None = None) -> np.ndarray:
    """Uniform candidate grid for box domains of dimension one or two."""
    dom = np.asarray(domain, dtype=float).reshape(-1, 2)
    d = dom.shape[0]
    axes = []
    for j in range(d):
        lo, hi = dom[j]
        if hi < lo:
            raise ValueError("domain box has hi < lo")
        if hi == lo:
            axes.append(np.array([lo]))
            continue
        n = budget if budget is not None else (101 if d == 1 else 41)
        axes.append(np.linspace(lo, hi, n))
    if d == 1:
        return axes[0][:, None]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _reference_drop(ws: StepWorkspace, l0: float) -> float:
    """How far the last queried value can drop inside the confidence set.

    Solves max(-z_t) over the norm ball intersected with the likelihood
    superlevel set (a bordered solve with a zeroed kernel column), cached
    per workspace.  A small cushion covers solver tolerance so the value
    stays a valid upper-bound ingredient.
    """
    cached = getattr(ws, "_reference_drop", None)
    if cached is not None and cached[0] == l0:
        return cached[1]
    rep = solve_acquisition_inner(
        ws.pts[-1], ws.history, ws.kernel, ws.B, max(ws.mle.objective - l0, 0.0),
        ws.mle.objective, ws.eps_K, workspace=ws,
        border=(np.zeros(ws.t + 1), 1e-9),
    )
    value = rep.objective + 1e-4 * (1.0 + abs(rep.objective)) + 1e-9 * ws.B
    ws._reference_drop = (l0, value)
    return value


class _CandidateScreen:
    """Vectorized batch geometry for a candidate set at one step.

    Precomputes the bordered Cholesky columns for every candidate, plus

    * a valid upper bound per candidate: the ball maximum of the linear
      advantage functional intersected with the supporting halfspace of
      the likelihood set at the MLE (concavity makes the halfspace a
      relaxation of the likelihood constraint);
    * a valid lower bound per candidate: the advantage of the feasible
      anchor (MLE values with the remaining ball slack pushed into the
      candidate coordinate).

    Candidates whose upper bound cannot beat the best lower bound are
    never solved, which keeps the exact argmax while skipping most of
    the grid.
    """

    def __init__(self, ws: StepWorkspace, candidates: np.ndarray, beta1: float, l_mle: float):
        self.ws = ws
        m = candidates.shape[0]
        Kx = cross_kernel(ws.kernel, ws.pts, candidates)
        self.Bmat = solve_triangular(ws.L, Kx, lower=True, check_finite=False)
        kxx = self_kernel(ws.kernel, candidates) + ws.eps_K
        gamma2 = kxx - np.sum(self.Bmat * self.Bmat, axis=0)
        self.gammas = np.sqrt(np.maximum(gamma2, 1e-14))
        diff = self.Bmat - ws.Lrow_last[:, None]
        q_norm2 = np.sum(diff * diff, axis=0) + self.gammas**2
        ub = ws.B * np.sqrt(q_norm2)
        lb = np.full(m, -np.inf)
        if ws.t > 0:
            mle = ws.ensure_mle()
            w_mle = mle.w
            slack = math.sqrt(max(ws.B**2 - float(w_mle @ w_mle), 0.0))
            lb = diff.T @ w_mle + self.gammas * slack
            ll_star, g_star = _ll_and_grad(mle.argmax, ws.outcomes)
            h = ws.L.T @ g_star
            h_norm = math.sqrt(float(h @ h))
            if h_norm > 1e-12:
                # likelihood set lies in {g*.Z >= l0 - l* + g*.Z*}
                r = (float(l_mle) - float(beta1)) - ll_star + float(g_star @ mle.argmax)
                r_hat = max(min(r / h_norm, ws.B), -ws.B)
                cap = math.sqrt(max(ws.B**2 - r_hat**2, 0.0))
                qh = (diff.T @ h) / h_norm
                # joint bound: exact ball-within-halfspace max of the full functional
                q_perp = np.sqrt(np.maximum(q_norm2 - qh * qh, 0.0))
                on_slice = qh * r_hat + q_perp * cap
                interior = ws.B * qh >= r_hat * np.sqrt(q_norm2)
                ub = np.minimum(ub, np.where(interior, ub, on_slice))
                # decomposed bound: value-vector part over ball-within-halfspace,
                # plus the new coordinate capped by the budget any feasible
                # value vector must leave (its norm is at least max(r_hat, 0))
                d_norm2 = q_norm2 - self.gammas**2
                d_norm = np.sqrt(np.maximum(d_norm2, 0.0))
                d_perp = np.sqrt(np.maximum(d_norm2 - qh * qh, 0.0))
                d_slice = np.where(
                    ws.B * qh >= r_hat * d_norm,
                    ws.B * d_norm,
                    qh * r_hat + d_perp * cap,
                )
                z_roof = math.sqrt(max(ws.B**2 - max(r_hat, 0.0) ** 2, 0.0))
                ub = np.minimum(ub, d_slice + self.gammas * z_roof)
            # exact once-per-step cut: the candidate splits off through its
            # kernel column only, so q.w <= B*|b_i| + max(-z_t over the
            # confidence set) + gamma_i * B
            zeta = _reference_drop(ws, float(l_mle) - float(beta1))
            b_norm = np.sqrt(np.sum(self.Bmat * self.Bmat, axis=0))
            ub = np.minimum(ub, ws.B * b_norm + zeta + self.gammas * ws.B)
        self.upper = ub
        self.lower = lb

    def border(self, idx: int) -> tuple[np.ndarray, float]:
        return self.Bmat[:, idx], float(self.gammas[idx])


def maximize_acquisition(
    domain,
    history: History,
    kernel: KernelSpec,
    B: float,
    beta1: float,
    l_mle: float,
    eps_K: float = DEFAULT_JITTER,
    budget: int | None = None,
    rng: np.random.Generator | None = None,
    *,
    workspace: StepWorkspace | None = None,
) -> tuple[np.ndarray, float]:
    """Best candidate point by optimistic advantage over the current reference.

    Dimensions one and two enumerate a uniform grid (pruned by a valid
    upper bound, so the returned point is the exact grid argmax with
    ties broken toward the lowest candidate index).  Higher dimensions
    run Latin-hypercube starts refined by coordinate pattern search.
    """
    dom = np.asarray(domain, dtype=float).reshape(-1, 2)
    d = dom.shape[0]
    ws = workspace if workspace is not None else StepWorkspace(history, kernel, B, eps_K)
    if ws.t > 0:
        ws.ensure_mle()

    def inner(xc, warm, border=None):
        return solve_acquisition_inner(
            xc, history, kernel, B, beta1, l_mle, eps_K,
            workspace=ws, warm=warm, border=border,
        )

    if d <= 2:
        candidates = grid_candidates(dom, budget)
        screen = _CandidateScreen(ws, candidates, beta1, l_mle)
        # anchor values are certified feasible, so the step maximum is at
        # least their max; candidates bounded strictly below it can never
        # be the argmax.  Spatial order keeps warm starts adjacent.
        floor = float(np.max(screen.lower)) if np.isfinite(screen.lower).any() else -math.inf
        best_val = -math.inf
        best_idx = -1
        warm = None
        for idx in range(candidates.shape[0]):
            if screen.upper[idx] < max(best_val, floor):
                continue
            rep = inner(candidates[idx], warm, screen.border(idx))
            warm = rep
            if rep.objective > best_val:
                best_val = rep.objective
                best_idx = idx
        if best_idx < 0:
            # numerically possible only when solves undershoot their own
            # anchor bound; fall back to the anchor-best candidate
            best_idx = int(np.argmax(screen.lower))
            rep = inner(candidates[best_idx], None, screen.border(best_idx))
            best_val = rep.objective
        return candidates[best_idx].copy(), float(best_val)

    # d >= 3: Latin-hypercube multi-start with coordinate refinement
    n_starts = budget if budget is not None else 32
    if rng is None:
        rng = np.random.default_rng(0)
    sampler = qmc.LatinHypercube(d=d, seed=rng)
    unit = sampler.random(n_starts)
    starts = dom[:, 0] + unit * (dom[:, 1] - dom[:, 0])
    span = dom[:, 1] - dom[:, 0]
    best_val = -math.inf
    best_x = None
    warm = None
    for s in starts:
        x = s.copy()
        rep = inner(x, warm)
        warm = rep
        val = rep.objective
        if val > best_val:
            best_val, best_x = val, x.copy()
        h = 0.25 * span.copy()
        for step in range(50):
            j = step % d
            improved = False
            for delta in (h[j], -h[j]):
                xp = x.copy()
                xp[j] = float(np.clip(xp[j] + delta, dom[j, 0], dom[j, 1]))
                if np.array_equal(xp, x):
                    continue
                rep = inner(xp, warm)
                warm = rep
                if rep.objective > val:
                    x, val = xp, rep.objective
                    improved = True
                    break
            if not improved:
                h[j] *= 0.5
            if val > best_val:
                best_val, best_x = val, x.copy()
    return best_x, float(best_val)
