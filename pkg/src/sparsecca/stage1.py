"""Stage-1 convex relaxation solved by ADMM.

The program maximizes <sxy, F> - rho * ||F||_1 subject to
sx^{1/2} F sy^{1/2} lying in the convex hull of outer products of
orthonormal frames, {G : ||G||_* <= r, ||G||_op <= 1}.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRankError, DivergenceError
from .linalg import psd_sqrt, svd

# Relative threshold below which a trailing singular value counts as zero.
_RANK_EPS = 1e-12


@dataclass
class AdmmConfig:
    rho: float
    rank_r: int
    eta: float = 2.0
    eps: float = 1e-3
    max_outer: int = 500
    inner_tol: float = 1e-6
    max_inner: int = 200

    def __post_init__(self):
        # rho = 0 is admitted so the F-subproblem can be exercised without
        # the sparsity term.
        if self.rho < 0 or self.eta <= 0 or self.eps <= 0:
            raise ValueError("rho must be >= 0, eta and eps positive")
        if self.rank_r < 1:
            raise ValueError("rank_r must be >= 1")


@dataclass
class AdmmState:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    outer_iter: int = 0
    primal_residual: float = np.inf
    change_metric: float = np.inf
    converged: bool = False
    history: list = field(default_factory=list)


def _capped_gamma(singular_values, r):
    """Smallest gamma >= 0 with sum_i min(1, (s_i - gamma)_+) <= r.

    The sum is piecewise linear and nonincreasing in gamma with breakpoints
    at {s_i} and {s_i - 1}; the crossing is solved exactly on the bracketing
    segment.
    """
    s = np.asarray(singular_values, dtype=float)

    def total(g):
        return float(np.minimum(1.0, np.maximum(s - g, 0.0)).sum())

    if total(0.0) <= r + 1e-12:
        return 0.0
    breakpoints = np.unique(np.concatenate([s, s - 1.0]))
    breakpoints = breakpoints[breakpoints > 0.0]
    lo, f_lo = 0.0, total(0.0)
    for bp in breakpoints:
        f_bp = total(bp)
        if f_bp <= r:
            slope = (f_lo - f_bp) / (bp - lo)
            if slope <= 0.0:
                return bp
            return lo + (f_lo - r) / slope
        lo, f_lo = bp, f_bp
    return breakpoints[-1] if breakpoints.size else 0.0


def svcst(w, r):
    """Singular value capped soft thresholding.

    Euclidean projection of w onto {G : ||G||_* <= r, ||G||_op <= 1}: each
    singular value s_i is replaced by min(1, (s_i - gamma*)_+) with gamma*
    the smallest feasible threshold.
    """
    res = svd(w)
    gamma = _capped_gamma(res.singular_values, r)
    capped = np.minimum(1.0, np.maximum(res.singular_values - gamma, 0.0))
    return (res.left * capped) @ res.right.T


def _kkt_residual_l1(grad, f, rho):
    """Max-norm violation of 0 in grad + rho * subdifferential(||.||_1) at f."""
    on = f != 0.0
    res_on = np.abs(grad + rho * np.sign(f))[on]
    res_off = np.maximum(np.abs(grad[~on]) - rho, 0.0)
    worst = 0.0
    if res_on.size:
        worst = max(worst, float(res_on.max()))
    if res_off.size:
        worst = max(worst, float(res_off.max()))
    return worst


def f_update(state, sx_half, sy_half, sxy, cfg, lipschitz=None):
    """Solve the l1-penalized F-subproblem of the augmented Lagrangian.

    Minimizes -<sxy, F> + rho ||F||_1 + <H, sx_half F sy_half>
    + eta/2 ||sx_half F sy_half - G||_F^2 by accelerated proximal gradient
    (entrywise soft-threshold prox, step 1/(eta * smax(sx) * smax(sy))),
    warm-started at state.f. Stops once the relative objective change is
    below cfg.inner_tol and the l1 stationarity residual is below
    10 * cfg.inner_tol * scale, or at cfg.max_inner iterations.
    """
    sig_x = sx_half @ sx_half
    sig_y = sy_half @ sy_half
    if lipschitz is None:
        lipschitz = cfg.eta * float(
            np.linalg.eigvalsh(sig_x)[-1] * np.linalg.eigvalsh(sig_y)[-1]
        )
    shs = sx_half @ state.h @ sy_half
    sgs = sx_half @ state.g @ sy_half
    g_sq = float(np.vdot(state.g, state.g))
    c0 = shs - cfg.eta * sgs - sxy
    scale = max(1.0, lipschitz, float(np.abs(sxy).max()))
    step = 1.0 / lipschitz

    def objective(f, pf):
        return float(
            -np.vdot(sxy, f)
            + cfg.rho * np.abs(f).sum()
            + np.vdot(shs, f)
            + 0.5 * cfg.eta * (np.vdot(f, pf) - 2.0 * np.vdot(sgs, f) + g_sq)
        )

    f = state.f.copy()
    pf = sig_x @ f @ sig_y
    yk, py = f, pf
    t = 1.0
    obj = objective(f, pf)
    for _ in range(cfg.max_inner):
        grad_y = c0 + cfg.eta * py
        f_new = yk - step * grad_y
        f_new = np.sign(f_new) * np.maximum(np.abs(f_new) - step * cfg.rho, 0.0)
        pf_new = sig_x @ f_new @ sig_y
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        yk = f_new + beta * (f_new - f)
        py = pf_new + beta * (pf_new - pf)
        obj_new = objective(f_new, pf_new)
        if not np.isfinite(obj_new):
            raise DivergenceError("F-subproblem objective is non-finite")
        rel_change = abs(obj_new - obj) / max(1.0, abs(obj))
        f, pf, t, obj = f_new, pf_new, t_new, obj_new
        if rel_change <= cfg.inner_tol:
            grad = c0 + cfg.eta * pf
            if _kkt_residual_l1(grad, f, cfg.rho) <= 10.0 * cfg.inner_tol * scale:
                break
    return f


def admm_solve(sx, sy, sxy, cfg, log_path=None):
    """Run the alternating-direction solver for the stage-1 relaxation.

    Returns (a_hat, state). Initialization: F = svcst(sxy, r), G = H = 0.
    Each outer step solves the F-subproblem, projects
    H/eta + sx^{1/2} F sy^{1/2} through svcst, then takes a dual ascent
    step on H. Stops when max(||dF||_F, rho * ||dG||_F) <= cfg.eps.
    If log_path is given, per-iteration diagnostics are written as CSV
    (iter, change_metric, primal_residual).
    """
    sx_half = psd_sqrt(sx)
    sy_half = psd_sqrt(sy)
    lipschitz = cfg.eta * float(np.linalg.eigvalsh(sx)[-1] * np.linalg.eigvalsh(sy)[-1])
    f = svcst(sxy, cfg.rank_r)
    state = AdmmState(f=f, g=np.zeros_like(f), h=np.zeros_like(f))
    for k in range(cfg.max_outer):
        f_new = f_update(state, sx_half, sy_half, sxy, cfg, lipschitz=lipschitz)
        mapped = sx_half @ f_new @ sy_half
        g_new = svcst(state.h / cfg.eta + mapped, cfg.rank_r)
        state.h = state.h + cfg.eta * (mapped - g_new)
        change = max(
            float(np.linalg.norm(f_new - state.f)),
            cfg.rho * float(np.linalg.norm(g_new - state.g)),
        )
        state.f, state.g = f_new, g_new
        state.outer_iter = k + 1
        state.change_metric = change
        state.primal_residual = float(np.linalg.norm(mapped - g_new))
        state.history.append((k + 1, change, state.primal_residual))
        if change <= cfg.eps:
            state.converged = True
            break
    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "change_metric", "primal_residual"])
            writer.writerows(state.history)
    return state.f, state


def extract_pair(a_hat, r):
    """Top-r left and right singular vectors of the stage-1 solution."""
    a_hat = np.asarray(a_hat, dtype=float)
    if r > min(a_hat.shape):
        raise DegenerateRankError("r exceeds the matrix dimensions")
    res = svd(a_hat)
    s = res.singular_values
    if s[r - 1] <= _RANK_EPS * max(s[0], 1e-300):
        raise DegenerateRankError(f"singular value {r} of the solution is zero")
    return res.left[:, :r], res.right[:, :r]
