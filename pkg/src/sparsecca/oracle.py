"""Exhaustive combinatorial two-stage estimator and classical CCA.

Usable only at tiny dimensions; serves as a correctness reference for the
convex pipeline.
"""

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import BudgetExceededError, NotPsdError
from .model import sample_covariances
from .stage2 import EstimatorOutput, normalize


@dataclass(frozen=True)
class OracleBudget:
    s_u: int
    s_v: int
    max_enumerations: int = 1_000_000


def _pinv_sqrt_strict(a, tol=1e-12):
    w, q = np.linalg.eigh(0.5 * (a + a.T))
    if w[0] <= tol * max(w[-1], 1e-300):
        raise NotPsdError("covariance block is numerically singular")
    return (q * (1.0 / np.sqrt(w))) @ q.T


def classical_cca(sx, sy, sxy, r):
    """Leading canonical coefficient directions from population/sample covariances.

    Returns (u, v, correlations) with u = sx^{-1/2} a_r, v = sy^{-1/2} b_r
    built from the top-r singular triplets of sx^{-1/2} sxy sy^{-1/2}.
    """
    sx_isqrt = _pinv_sqrt_strict(sx)
    sy_isqrt = _pinv_sqrt_strict(sy)
    k = sx_isqrt @ sxy @ sy_isqrt
    a, lam, bt = np.linalg.svd(k)
    return sx_isqrt @ a[:, :r], sy_isqrt @ bt[:r].T, lam[:r].copy()


def _check_budget(count, budget):
    if count > budget.max_enumerations:
        raise BudgetExceededError(
            f"{count} support combinations exceed the budget of {budget.max_enumerations}"
        )


def exhaustive_stage1(sx, sy, sxy, budget, r):
    """Best support pair by enumeration of restricted classical CCA problems.

    Supports of exactly size (s_u, s_v) are enumerated (any smaller support
    is contained in one of them and cannot score higher); the pair
    maximizing Tr(L' sxy R) wins, ties resolved by enumeration order
    (lexicographically smallest supports).
    """
    p, m = sxy.shape
    _check_budget(comb(p, budget.s_u) * comb(m, budget.s_v), budget)
    best_obj = -np.inf
    best = None
    for sub_u in itertools.combinations(range(p), budget.s_u):
        iu = list(sub_u)
        sx_r = sx[np.ix_(iu, iu)]
        for sub_v in itertools.combinations(range(m), budget.s_v):
            iv = list(sub_v)
            try:
                l_r, r_r, _ = classical_cca(sx_r, sy[np.ix_(iv, iv)], sxy[np.ix_(iu, iv)], r)
            except NotPsdError:
                continue
            obj = float(np.trace(l_r.T @ sxy[np.ix_(iu, iv)] @ r_r))
            if obj > best_obj:
                l_full = np.zeros((p, r))
                l_full[iu] = l_r
                r_full = np.zeros((m, r))
                r_full[iv] = r_r
                best_obj, best = obj, (l_full, r_full)
    if best is None:
        raise NotPsdError("every restricted covariance block was singular")
    return best


def exhaustive_stage2(sx, sxy, v0, s_u, max_enumerations=1_000_000):
    """Best-subset least squares refinement of the left coefficients.

    For each support S of size s_u the restricted solution is
    (sx_SS)^{-1} (sxy v0)_S with objective
    -Tr((sxy v0)_S' (sx_SS)^{-1} (sxy v0)_S); the minimizing support is
    returned embedded in the ambient dimension.
    """
    p = sx.shape[0]
    if comb(p, s_u) > max_enumerations:
        raise BudgetExceededError(f"{comb(p, s_u)} supports exceed the enumeration budget")
    target = sxy @ v0
    best_obj = np.inf
    best = None
    for sub in itertools.combinations(range(p), s_u):
        idx = list(sub)
        t_s = target[idx]
        try:
            sol = np.linalg.solve(sx[np.ix_(idx, idx)], t_s)
        except np.linalg.LinAlgError:
            continue
        obj = -float(np.vdot(t_s, sol))
        if obj < best_obj:
            full = np.zeros_like(target)
            full[idx] = sol
            best_obj, best = obj, full
    if best is None:
        raise NotPsdError("every restricted covariance block was singular")
    return best


def oracle_estimate(s, budget, r):
    """Three-batch exhaustive pipeline: support search, refit, normalization."""
    n0 = s.n // 3
    if n0 < 1:
        raise BudgetExceededError("need at least three observations for the split")
    s0 = s.subset(slice(0, n0))
    s1 = s.subset(slice(n0, 2 * n0))
    s2 = s.subset(slice(2 * n0, s.n))
    sx0, sy0, sxy0 = sample_covariances(s0)
    sx1, sy1, sxy1 = sample_covariances(s1)
    sx2, sy2, _ = sample_covariances(s2)
    u0, v0 = exhaustive_stage1(sx0, sy0, sxy0, budget, r)
    u1 = exhaustive_stage2(sx1, sxy1, v0, budget.s_u)
    v1 = exhaustive_stage2(sy1, sxy1.T, u0, budget.s_v)
    return EstimatorOutput(
        u_hat=normalize(u1, sx2),
        v_hat=normalize(v1, sy2),
        support_u=np.flatnonzero(np.linalg.norm(u1, axis=1) > 0),
        support_v=np.flatnonzero(np.linalg.norm(v1, axis=1) > 0),
        chosen_b=float("nan"),
        converged=True,
    )
