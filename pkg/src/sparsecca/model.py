"""Canonical pair models, Gaussian sampling, sample covariances, and losses."""

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateInputError, NotPsdError
from .linalg import load_matrix_csv, save_matrix_csv

DEFAULT_ALPHABET = (-2.0, -1.0, 0.0, 1.0, 2.0)


def build_covariance(kind, p):
    """Construct one of the three marginal covariance settings.

    kind: "identity", "toeplitz" (entries 0.3^|i-j|) or "sparse_inv"
    (correlation-normalized inverse of the banded matrix with 1 on the
    diagonal, 0.5 on the first and 0.4 on the second off-diagonal).
    All outputs have unit diagonal.
    """
    if p < 1:
        raise DegenerateInputError("p must be >= 1")
    if kind == "identity":
        return np.eye(p)
    if kind == "toeplitz":
        idx = np.arange(p)
        return 0.3 ** np.abs(idx[:, None] - idx[None, :])
    if kind == "sparse_inv":
        omega = np.eye(p)
        if p > 1:
            omega += 0.5 * (np.eye(p, k=1) + np.eye(p, k=-1))
        if p > 2:
            omega += 0.4 * (np.eye(p, k=2) + np.eye(p, k=-2))
        w = np.linalg.eigvalsh(omega)
        if w[0] <= 1e-12 * max(w[-1], 1.0):
            raise NotPsdError("band precision matrix is numerically singular")
        sigma0 = np.linalg.inv(omega)
        d = np.sqrt(np.diag(sigma0))
        return sigma0 / np.outer(d, d)
    raise DegenerateInputError(f"unknown covariance kind {kind!r}")


@dataclass(frozen=True)
class SparsityProfile:
    """Row supports and sparsity budgets for the two coefficient matrices."""

    support_u: np.ndarray
    support_v: np.ndarray
    s_u: int
    s_v: int

    @classmethod
    def from_supports(cls, support_u, support_v):
        su = np.asarray(support_u, dtype=int)
        sv = np.asarray(support_v, dtype=int)
        return cls(su, sv, len(su), len(sv))


@dataclass
class SampleSet:
    """Paired observation matrices with one observation per row."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x.shape[0] != self.y.shape[0]:
            raise DegenerateInputError("x and y must have equal row counts")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise DegenerateInputError("samples contain non-finite entries")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def m(self):
        return self.y.shape[1]

    def subset(self, rows):
        return SampleSet(self.x[rows], self.y[rows])


@dataclass
class CanonicalPairModel:
    """Population model with cross-covariance sigma_x @ u @ diag(lam) @ v' @ sigma_y."""

    sigma_x: np.ndarray
    sigma_y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    _chol: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def p(self):
        return self.sigma_x.shape[0]

    @property
    def m(self):
        return self.sigma_y.shape[0]

    @property
    def rank(self):
        return len(self.lam)

    @property
    def sigma_xy(self):
        return self.sigma_x @ (self.u * self.lam) @ self.v.T @ self.sigma_y

    def joint_covariance(self):
        sxy = self.sigma_xy
        return np.block([[self.sigma_x, sxy], [sxy.T, self.sigma_y]])

    def validate(self, tol=1e-8):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise DegenerateInputError("lam must be a nonempty vector")
        if (np.diff(lam) > 0).any():
            raise DegenerateInputError("lam must be nonincreasing")
        if lam[0] >= 1.0 or lam[-1] <= 0.0:
            raise DegenerateInputError("lam entries must lie in (0, 1)")
        for mat, cov, name in ((self.u, self.sigma_x, "u"), (self.v, self.sigma_y, "v")):
            gram = mat.T @ cov @ mat
            if np.abs(gram - np.eye(self.rank)).max() > tol:
                raise DegenerateInputError(f"{name} is not orthonormal in the covariance inner product")
        return self

    def support_u(self):
        return np.flatnonzero(np.linalg.norm(self.u, axis=1) > 0)

    def support_v(self):
        return np.flatnonzero(np.linalg.norm(self.v, axis=1) > 0)

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        save_matrix_csv(os.path.join(directory, "sigma_x.csv"), self.sigma_x)
        save_matrix_csv(os.path.join(directory, "sigma_y.csv"), self.sigma_y)
        save_matrix_csv(os.path.join(directory, "u.csv"), self.u)
        save_matrix_csv(os.path.join(directory, "v.csv"), self.v)
        save_matrix_csv(os.path.join(directory, "lambda.csv"), self.lam[None, :])

    @classmethod
    def load(cls, directory):
        return cls(
            sigma_x=load_matrix_csv(os.path.join(directory, "sigma_x.csv")),
            sigma_y=load_matrix_csv(os.path.join(directory, "sigma_y.csv")),
            u=load_matrix_csv(os.path.join(directory, "u.csv")),
            v=load_matrix_csv(os.path.join(directory, "v.csv")),
            lam=load_matrix_csv(os.path.join(directory, "lambda.csv")).ravel(),
        )


def sigma_gram_schmidt(raw, sigma, tol=1e-8):
    """Orthonormalize columns of raw in the inner product <a, b> = a' sigma b.

    Raises DegenerateInputError when a column is (numerically) linearly
    dependent on the previous ones.
    """
    p, r = raw.shape
    out = np.zeros((p, r))
    for j in range(r):
        vec = raw[:, j].copy()
        for k in range(j):
            vec -= (out[:, k] @ (sigma @ vec)) * out[:, k]
        nrm = vec @ (sigma @ vec)
        if nrm <= tol:
            raise DegenerateInputError("column is rank-deficient in the sigma inner product")
        out[:, j] = vec / np.sqrt(nrm)
    return out


def _draw_supported(p, support, r, rng, alphabet):
    raw = np.zeros((p, r))
    raw[support] = rng.choice(alphabet, size=(len(support), r))
    return raw


def make_canonical_pair(sigma_x, sigma_y, profile, lam, rng, alphabet=DEFAULT_ALPHABET, max_redraws=100):
    """Draw a canonical pair model with supported rows from a finite alphabet.

    Raw entries on the support rows are uniform over `alphabet`; each
    coefficient matrix is then orthonormalized in its own covariance inner
    product (Gram-Schmidt), redrawing up to max_redraws times if the raw
    draw is rank-deficient on the support.
    """
    sigma_x = np.asarray(sigma_x, dtype=float)
    sigma_y = np.asarray(sigma_y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    r = lam.size
    if r > min(profile.s_u, profile.s_v):
        raise DegenerateInputError("rank exceeds the sparsity budget")
    alphabet = np.asarray(alphabet, dtype=float)

    def draw(p, support, sigma):
        for _ in range(max_redraws):
            raw = _draw_supported(p, support, r, rng, alphabet)
            try:
                return sigma_gram_schmidt(raw, sigma)
            except DegenerateInputError:
                continue
        raise DegenerateInputError(f"support too small for rank {r} after {max_redraws} redraws")

    u = draw(sigma_x.shape[0], profile.support_u, sigma_x)
    v = draw(sigma_y.shape[0], profile.support_v, sigma_y)
    return CanonicalPairModel(sigma_x, sigma_y, u, v, lam).validate()


def add_canonical_pair(model, support, lam_extra, rng, alphabet=DEFAULT_ALPHABET, max_redraws=100):
    """Append one extra canonical pair, orthogonalized against the existing ones.

    The new directions live on `support`, get drawn from `alphabet`, and are
    Gram-Schmidt orthogonalized (in the respective covariance inner products)
    against the model's current columns.
    """
    if not 0.0 < lam_extra <= model.lam[-1]:
        raise DegenerateInputError("extra correlation must lie in (0, lam_r]")
    support = np.asarray(support, dtype=int)
    alphabet = np.asarray(alphabet, dtype=float)

    def draw_extra(base, sigma, p):
        for _ in range(max_redraws):
            raw = _draw_supported(p, support, 1, rng, alphabet)
            stacked = np.hstack([base, raw])
            try:
                return sigma_gram_schmidt(stacked, sigma)[:, -1:]
            except DegenerateInputError:
                continue
        raise DegenerateInputError("could not draw an extra pair on the given support")

    u3 = draw_extra(model.u, model.sigma_x, model.p)
    v3 = draw_extra(model.v, model.sigma_y, model.m)
    return CanonicalPairModel(
        sigma_x=model.sigma_x,
        sigma_y=model.sigma_y,
        u=np.hstack([model.u, u3]),
        v=np.hstack([model.v, v3]),
        lam=np.append(model.lam, lam_extra),
    ).validate()


def _joint_factor(model):
    """Cholesky-like factor L of the joint covariance with L @ L' = Sigma.

    Falls back to a symmetric eigendecomposition with eigenvalue clamping
    when the joint covariance is numerically semidefinite.
    """
    joint = model.joint_covariance()
    try:
        return np.linalg.cholesky(joint)
    except np.linalg.LinAlgError:
        w, q = np.linalg.eigh(0.5 * (joint + joint.T))
        if w[0] < -1e-8:
            raise NotPsdError(f"joint covariance has eigenvalue {w[0]:.3e}")
        return q * np.sqrt(np.clip(w, 0.0, None))


def sample(model, n, rng):
    """Draw n i.i.d. zero-mean Gaussian observation pairs from the model."""
    if model._chol is None:
        model._chol = _joint_factor(model)
    z = rng.standard_normal((n, model.p + model.m))
    data = z @ model._chol.T
    return SampleSet(data[:, : model.p], data[:, model.p :])


def sample_covariances(s):
    """Second-moment sample covariances (no mean-centering; zero-mean model)."""
    n = s.n
    if n < 1:
        raise DegenerateInputError("need at least one observation")
    return s.x.T @ s.x / n, s.y.T @ s.y / n, s.x.T @ s.y / n


def prediction_loss(u_hat, u, sigma_x):
    """Squared prediction error of the canonical variates, minimized over
    an orthogonal alignment of the estimated columns.

    Closed form: Tr(u_hat' S u_hat) + Tr(u' S u) - 2 ||u_hat' S u||_*.
    """
    u_hat = np.atleast_2d(np.asarray(u_hat, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u_hat.shape[0] == 1 and u.shape[0] > 1:
        u_hat = u_hat.T
    if u.shape[0] == 1 and u_hat.shape[0] > 1:
        u = u.T
    a = u_hat.T @ sigma_x @ u_hat
    b = u.T @ sigma_x @ u
    cross = u_hat.T @ sigma_x @ u
    nuc = np.linalg.svd(cross, compute_uv=False).sum()
    return max(float(np.trace(a) + np.trace(b) - 2.0 * nuc), 0.0)
