"""Stage-2 group-Lasso refinement, normalization, cross-validation, and the
full two-stage estimation pipeline."""

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CvFailureError, DegenerateInputError
from .linalg import psd_pinv_sqrt, save_matrix_csv
from .model import sample_covariances
from .stage1 import AdmmConfig, admm_solve, extract_pair


@dataclass
class GroupLassoConfig:
    rho_u: Optional[float] = None
    tol: float = 1e-7
    max_sweeps: int = 1000


@dataclass
class CvConfig:
    rank_r: int
    folds: int = 5
    b_grid: tuple = (0.5, 1.0, 1.5, 2.0)

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least two folds")
        if len(self.b_grid) == 0:
            raise ValueError("b_grid must be nonempty")


@dataclass
class EstimatorOutput:
    u_hat: np.ndarray
    v_hat: np.ndarray
    support_u: np.ndarray
    support_v: np.ndarray
    chosen_b: float
    converged: bool

    def save(self, directory, seed=None):
        os.makedirs(directory, exist_ok=True)
        save_matrix_csv(os.path.join(directory, "u_hat.csv"), self.u_hat)
        save_matrix_csv(os.path.join(directory, "v_hat.csv"), self.v_hat)
        with open(os.path.join(directory, "metadata.txt"), "w") as fh:
            fh.write(
                f"chosen_b={self.chosen_b!r},converged={self.converged},seed={seed!r}\n"
            )


def group_lasso_solve(sx, target, rho_u, cfg=None, return_info=False):
    """Row-sparse regression by block coordinate descent.

    Minimizes Tr(L' sx L) - 2 Tr(L' target) + rho_u * sum_j ||L_j.||.
    Each row update is the exact minimizer given the others:
    L_j = r_j (1 - rho_u / (2||r_j||))_+ / sx_jj with
    r_j = target_j - sum_{k != j} sx_jk L_k. Sweeps in ascending row order
    until the largest row change is below cfg.tol relative to the iterate
    scale.
    """
    cfg = cfg or GroupLassoConfig()
    sx = np.asarray(sx, dtype=float)
    target = np.atleast_2d(np.asarray(target, dtype=float))
    p, r = target.shape
    diag = np.diag(sx).copy()
    if (diag <= 0).any():
        raise DegenerateInputError("sx has a nonpositive diagonal entry")
    lmat = np.zeros((p, r))
    smat = np.zeros((p, r))  # running sx @ lmat
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        max_change = 0.0
        for j in range(p):
            r_j = target[j] - smat[j] + diag[j] * lmat[j]
            nrm = float(np.sqrt(r_j @ r_j))
            if nrm <= 0.5 * rho_u:
                row = np.zeros(r)
            else:
                row = r_j * ((1.0 - 0.5 * rho_u / nrm) / diag[j])
            delta = row - lmat[j]
            change = float(np.sqrt(delta @ delta))
            if change > 0.0:
                smat += np.outer(sx[:, j], delta)
                lmat[j] = row
                if change > max_change:
                    max_change = change
        if max_change <= cfg.tol * max(1.0, float(np.abs(lmat).max())):
            converged = True
            break
    if return_info:
        return lmat, sweeps, converged
    return lmat


def group_lasso_objective(lmat, sx, target, rho_u):
    return float(
        np.vdot(lmat, sx @ lmat)
        - 2.0 * np.vdot(lmat, target)
        + rho_u * np.linalg.norm(lmat, axis=1).sum()
    )


def group_lasso_kkt_residual(lmat, sx, target, rho_u):
    """Largest row-wise violation of the stationarity conditions."""
    grad = 2.0 * (sx @ lmat - target)
    row_norms = np.linalg.norm(lmat, axis=1)
    worst = 0.0
    for j in range(lmat.shape[0]):
        if row_norms[j] > 0:
            res = np.linalg.norm(grad[j] + rho_u * lmat[j] / row_norms[j])
        else:
            res = max(0.0, np.linalg.norm(grad[j]) - rho_u)
        worst = max(worst, float(res))
    return worst


def normalize(u1, sx, tol=1e-10):
    """Rescale so the columns are orthonormal in the sx inner product.

    Returns u1 @ (u1' sx u1)^{-1/2}, with the pseudo-inverse square root
    when u1 is rank-deficient.
    """
    u1 = np.atleast_2d(np.asarray(u1, dtype=float))
    if not np.any(u1):
        raise DegenerateInputError("cannot normalize an all-zero matrix")
    gram = u1.T @ sx @ u1
    return u1 @ psd_pinv_sqrt(gram, tol)


def penalty_level(b, r, dim, n):
    """Group penalty for slope b: b * sqrt((r + log dim) / n)."""
    return b * np.sqrt((r + np.log(dim)) / n)


def _canonical_correlation_sum(a, b, r, tol=1e-10):
    """Sum of classical canonical correlations between two projected samples.

    Returns 0.0 when either projected covariance is singular (degenerate
    fitted directions contribute nothing to the validation score).
    """
    n = a.shape[0]
    ca = a.T @ a / n
    cb = b.T @ b / n
    cab = a.T @ b / n
    wa, qa = np.linalg.eigh(0.5 * (ca + ca.T))
    wb, qb = np.linalg.eigh(0.5 * (cb + cb.T))
    if wa[-1] <= 0 or wb[-1] <= 0:
        return 0.0
    if wa[0] <= tol * wa[-1] or wb[0] <= tol * wb[-1]:
        return 0.0
    ca_isqrt = (qa * (1.0 / np.sqrt(wa))) @ qa.T
    cb_isqrt = (qb * (1.0 / np.sqrt(wb))) @ qb.T
    corr = np.linalg.svd(ca_isqrt @ cab @ cb_isqrt, compute_uv=False)
    return float(np.clip(corr[:r], 0.0, 1.0).sum())


def _fold_bounds(n, folds):
    return [(n * l) // folds for l in range(folds + 1)]


def cross_validate(s, v0, u0, cfg, gl_cfg=None):
    """Pick the penalty slope b maximizing the held-out correlation score.

    For each b, each fold is refit on the remaining folds (group-Lasso for
    both sides, then normalization) and scored by the sum of canonical
    correlations between the projected test samples; scores are summed over
    folds and ties break toward the smaller b.
    """
    r = cfg.rank_r
    if s.n < cfg.folds * (r + 1):
        raise DegenerateInputError("not enough observations for the fold count")
    gl_cfg = gl_cfg or GroupLassoConfig()
    bounds = _fold_bounds(s.n, cfg.folds)
    folds = []
    for l in range(cfg.folds):
        test = np.arange(bounds[l], bounds[l + 1])
        train = np.setdiff1d(np.arange(s.n), test)
        sub = s.subset(train)
        folds.append((test, sample_covariances(sub), len(train)))

    best_b, best_score = None, -np.inf
    any_scored = False
    for b in cfg.b_grid:
        score = 0.0
        for test, (sx_t, sy_t, sxy_t), n_train in folds:
            rho_u = penalty_level(b, r, s.p, n_train)
            rho_v = penalty_level(b, r, s.p, n_train)
            l_fit = group_lasso_solve(sx_t, sxy_t @ v0, rho_u, gl_cfg)
            r_fit = group_lasso_solve(sy_t, sxy_t.T @ u0, rho_v, gl_cfg)
            if (np.linalg.norm(l_fit, axis=0) == 0).any() or (
                np.linalg.norm(r_fit, axis=0) == 0
            ).any():
                continue
            u_fold = normalize(l_fit, sx_t)
            v_fold = normalize(r_fit, sy_t)
            score += _canonical_correlation_sum(s.x[test] @ u_fold, s.y[test] @ v_fold, r)
            any_scored = True
        if score > best_score + 1e-12:
            best_b, best_score = b, score
    if not any_scored:
        raise CvFailureError("every fold was degenerate for every candidate b")
    return float(best_b)


def _three_batches(n):
    n0 = n // 3
    return slice(0, n0), slice(n0, 2 * n0), slice(2 * n0, n)


def colar_estimate(s, r, admm_cfg=None, cv_cfg=None, split=False, gl_cfg=None,
                   return_init=False):
    """Full two-stage pipeline: convex relaxation, refinement, normalization.

    With split=False (default) every stage reuses the full-sample
    covariances. With split=True the sample is cut into three consecutive
    batches used for stage 1, stage 2, and the final normalization
    respectively (remainder rows join the last batch).

    With return_init=True also returns the stage-1 singular vectors after
    the same covariance normalization as the final estimator.
    """
    if split and s.n < 3:
        raise DegenerateInputError("need at least three observations to split")
    gl_cfg = gl_cfg or GroupLassoConfig()
    if split:
        b0, b1, b2 = _three_batches(s.n)
        s0, s1, s2 = s.subset(b0), s.subset(b1), s.subset(b2)
    else:
        s0 = s1 = s2 = s
    sx0, sy0, sxy0 = sample_covariances(s0)
    if admm_cfg is None:
        rho = 0.55 * np.sqrt(np.log(s.p + s.m) / s0.n)
        admm_cfg = AdmmConfig(rho=rho, rank_r=r)
    a_hat, admm_state = admm_solve(sx0, sy0, sxy0, admm_cfg)
    u0, v0 = extract_pair(a_hat, r)

    if cv_cfg is None:
        cv_cfg = CvConfig(rank_r=r)
    chosen_b = cross_validate(s1, v0, u0, cv_cfg, gl_cfg)

    sx1, sy1, sxy1 = sample_covariances(s1)
    rho_u = penalty_level(chosen_b, r, s.p, s1.n)
    rho_v = penalty_level(chosen_b, r, s.p, s1.n)
    u1, _, conv_u = group_lasso_solve(sx1, sxy1 @ v0, rho_u, gl_cfg, return_info=True)
    v1, _, conv_v = group_lasso_solve(sy1, sxy1.T @ u0, rho_v, gl_cfg, return_info=True)

    sx2, sy2, _ = sample_covariances(s2)
    u_hat = normalize(u1, sx2)
    v_hat = normalize(v1, sy2)
    output = EstimatorOutput(
        u_hat=u_hat,
        v_hat=v_hat,
        support_u=np.flatnonzero(np.linalg.norm(u1, axis=1) > 0),
        support_v=np.flatnonzero(np.linalg.norm(v1, axis=1) > 0),
        chosen_b=chosen_b,
        converged=bool(admm_state.converged and conv_u and conv_v),
    )
    if return_init:
        return output, normalize(u0, sx2), normalize(v0, sy2)
    return output
