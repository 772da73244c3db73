"""Planted-clique sampling and the reduction machinery to spiked-PCA/CCA data.

Includes the entrywise Gaussianization densities, the graph-to-data map, the
rejection test on the second data half, dyadic quantization with its
finite-precision sampler, and numerical total-variation distances.
"""

from dataclasses import dataclass, field
from math import ceil, log2
from typing import Optional

import numpy as np
from scipy.special import erfc

from .errors import (
    DegenerateInputError,
    NumericError,
    PreconditionError,
    SamplerFailureError,
)
from .model import SampleSet

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Guards for the dyadic sampler's in-memory mass table.
_MAX_TABLE_CELLS = 1 << 22


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def sym_mixture_pdf(x, mu):
    """Density of the two-point location mixture (N(mu,1) + N(-mu,1)) / 2."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (std_normal_pdf(x - mu) + std_normal_pdf(x + mu))


def std_normal_tail(radius):
    """P(|Z| > radius) for Z standard normal, full float accuracy."""
    return float(erfc(radius / _SQRT2))


def sym_mixture_tail(radius, mu):
    """P(|X| > radius) under the symmetric location mixture."""
    return float(0.5 * (erfc((radius - mu) / _SQRT2) + erfc((radius + mu) / _SQRT2)))


@dataclass(frozen=True)
class CliqueInstance:
    """Undirected graph with optional planted-clique membership."""

    n_vertices: int
    adjacency: np.ndarray
    clique: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ReductionParams:
    """Derived constants of the graph-to-data reduction for one (N, k) pair."""

    n_vertices: int
    clique_size: int
    delta_n: float = field(init=False)
    eta_n: float = field(init=False)

    def __post_init__(self):
        n, k = self.n_vertices, self.clique_size
        if not 1 <= k <= n:
            raise PreconditionError("clique size must lie in [1, n_vertices]")
        object.__setattr__(self, "delta_n", k / n)
        object.__setattr__(self, "eta_n", k / (45.0 * n * np.log(n) ** 2))

    @property
    def trunc_radius(self):
        return 3.0 * np.sqrt(np.log(self.n_vertices))

    @property
    def mu_bound(self):
        return 3.0 * np.sqrt(self.eta_n * np.log(self.n_vertices))


def sample_graph(n_vertices, clique_size=None, rng=None):
    """Erdos-Renyi graph with edge probability 1/2, optionally with a clique.

    When clique_size is given, that many vertices are chosen uniformly at
    random and fully interconnected.
    """
    if rng is None:
        rng = np.random.default_rng()
    n = int(n_vertices)
    upper = rng.integers(0, 2, size=(n, n))
    adj = np.triu(upper, k=1)
    adj = adj + adj.T
    clique = None
    if clique_size is not None:
        if clique_size > n:
            raise PreconditionError("clique size exceeds the vertex count")
        clique = np.sort(rng.choice(n, size=clique_size, replace=False))
        block = np.ix_(clique, clique)
        adj[block] = 1
        adj[clique, clique] = 0
    return CliqueInstance(n_vertices=n, adjacency=adj.astype(np.int8), clique=clique)


def save_edge_list(path, inst):
    """Write a graph instance as a plain edge list.

    First line: `n_vertices <N>`; second line: `clique <i> <j> ...` (absent
    for null instances); then one `i j` pair per undirected edge with i < j.
    """
    lines = [f"n_vertices {inst.n_vertices}"]
    if inst.clique is not None:
        lines.append("clique " + " ".join(str(v) for v in inst.clique))
    rows, cols = np.nonzero(np.triu(inst.adjacency, k=1))
    lines.extend(f"{i} {j}" for i, j in zip(rows, cols))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_edge_list(path):
    """Read a graph instance written by save_edge_list."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("n_vertices "):
        raise PreconditionError("edge list must start with `n_vertices <N>`")
    n = int(lines[0].split()[1])
    clique = None
    start = 1
    if len(lines) > 1 and lines[1].startswith("clique"):
        clique = np.array([int(tok) for tok in lines[1].split()[1:]], dtype=int)
        start = 2
    adj = np.zeros((n, n), dtype=np.int8)
    for ln in lines[start:]:
        i, j = (int(tok) for tok in ln.split())
        adj[i, j] = adj[j, i] = 1
    return CliqueInstance(n_vertices=n, adjacency=adj, clique=clique)


def g_function(x, mu, index, params):
    """Untruncated, unnormalized entry density pieces.

    g_0 = phi_0 - delta^{-1} (mixture - phi_0), g_1 = phi_0 + delta^{-1}
    (mixture - phi_0); the two average exactly to the standard normal.
    """
    x = np.asarray(x, dtype=float)
    sign = -1.0 if index == 0 else 1.0
    base = std_normal_pdf(x)
    return base + (sign / params.delta_n) * (sym_mixture_pdf(x, mu) - base)


@dataclass(frozen=True)
class GaussianizationDensity:
    """Truncated, renormalized entry density for one edge state."""

    mu: float
    index: int
    trunc_radius: float
    norm_const: float
    delta_n: float

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        sign = -1.0 if self.index == 0 else 1.0
        base = std_normal_pdf(x)
        raw = base + (sign / self.delta_n) * (sym_mixture_pdf(x, self.mu) - base)
        return np.where(np.abs(x) <= self.trunc_radius, self.norm_const * raw, 0.0)

    def outside_mass(self):
        # Zero by construction; kept for a uniform density interface.
        return 0.0


def _norm_const(mu, index, params):
    """1 / integral of the unnormalized density over the truncation interval.

    Computed from Gaussian tail masses in closed form so that norm_const - 1
    (of order the truncation tails) keeps full relative accuracy.
    """
    r = params.trunc_radius
    t0 = std_normal_tail(r)
    t_mu = sym_mixture_tail(r, mu)
    sign = -1.0 if index == 0 else 1.0
    outside = t0 + sign * (t_mu - t0) / params.delta_n
    mass = 1.0 - outside
    if mass <= 0:
        raise PreconditionError("density has nonpositive mass on the interval")
    return 1.0 / mass


def gaussianization_density(mu, index, params):
    """Build the entry density for |mu| within the admissible range."""
    if index not in (0, 1):
        raise PreconditionError("index must be 0 or 1")
    if abs(mu) > params.mu_bound * (1.0 + 1e-12):
        raise PreconditionError(
            f"|mu| = {abs(mu):.4g} exceeds the admissible bound {params.mu_bound:.4g}"
        )
    return GaussianizationDensity(
        mu=float(mu),
        index=index,
        trunc_radius=params.trunc_radius,
        norm_const=_norm_const(mu, index, params),
        delta_n=params.delta_n,
    )


def density_f(x, mu, index, params):
    """Evaluate the truncated Gaussianization density at x."""
    return gaussianization_density(mu, index, params).pdf(x)


def null_entry_density(mu, params):
    """Entry marginal for a column outside the clique: (f_0 + f_1) / 2."""
    f0 = gaussianization_density(mu, 0, params)
    f1 = gaussianization_density(mu, 1, params)
    return lambda x: 0.5 * (f0.pdf(x) + f1.pdf(x))


def clique_entry_density(mu, params):
    """Entry marginal for a clique column: delta f_1 + (1 - delta) (f_0 + f_1) / 2."""
    f0 = gaussianization_density(mu, 0, params)
    f1 = gaussianization_density(mu, 1, params)
    d = params.delta_n
    return lambda x: d * f1.pdf(x) + (1.0 - d) * 0.5 * (f0.pdf(x) + f1.pdf(x))


def _rejection_sample(density, rng, size, max_proposals=10**7):
    """Exact draws via rejection with envelope 2 * norm_const * phi_0.

    The envelope is valid on the truncation interval because the signed
    perturbation of the standard normal is bounded by (4/5) phi_0 there.
    Raises SamplerFailureError when the acceptance rate drops below 1%
    after 1e5 proposals.
    """
    r = density.trunc_radius
    bound = 2.0 * density.norm_const
    out = np.empty(size)
    have = 0
    proposals = 0
    accepted = 0
    while have < size:
        batch = max(4 * (size - have), 64)
        x = rng.standard_normal(batch)
        x = x[np.abs(x) <= r]
        proposals += batch
        if x.size:
            u = rng.random(x.size)
            keep = x[u * bound * std_normal_pdf(x) <= density.pdf(x)]
            accepted += keep.size
            take = min(keep.size, size - have)
            out[have : have + take] = keep[:take]
            have += take
        if proposals >= 10**5 and accepted < 0.01 * proposals:
            raise SamplerFailureError(
                f"acceptance rate {accepted / proposals:.2e} below 1%"
            )
        if proposals > max_proposals:
            raise SamplerFailureError("proposal budget exhausted")
    return out


def _inverse_cdf_sample(density, rng, size, grid_points=8193):
    """Tabulated inverse-CDF fallback used when the rejection guard trips."""
    r = density.trunc_radius
    grid = np.linspace(-r, r, grid_points)
    pdf = density.pdf(grid)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
    if cdf[-1] <= 0:
        raise SamplerFailureError("fallback table has zero mass")
    cdf /= cdf[-1]
    return np.interp(rng.random(size), cdf, grid)


def sample_density(d, rng, size=None, fallback=True):
    """Draw from a Gaussianization density; scalar when size is None."""
    n = 1 if size is None else int(size)
    try:
        out = _rejection_sample(d, rng, n)
    except SamplerFailureError:
        if not fallback:
            raise
        out = _inverse_cdf_sample(d, rng, n)
    return float(out[0]) if size is None else out


def reduce_to_pca(inst, n, p, rng, clique_size=None):
    """Map a graph instance to 2n nearly Gaussian observation vectors.

    Row means are mu_i = sqrt(eta_N) * xi_i with xi_i truncated standard
    normal; the first 2n columns are drawn from the edge-state densities
    selected by the lower-left 2n x 2n adjacency block, remaining columns
    are standard normal. Returns a (2n, p) matrix.

    clique_size is the tested clique cardinality; it defaults to the
    instance's planted clique size and must be supplied for null instances.
    """
    big_n = inst.n_vertices
    if big_n < 12 * n:
        raise PreconditionError("need n_vertices >= 12 n")
    if p < 2 * n:
        raise PreconditionError("need p >= 2 n")
    if clique_size is None:
        if inst.clique is None:
            raise PreconditionError("clique_size required for a null instance")
        clique_size = len(inst.clique)
    params = ReductionParams(big_n, clique_size)

    two_n = 2 * n
    xi = rng.standard_normal(two_n)
    radius = params.trunc_radius
    bad = np.abs(xi) > radius
    while bad.any():
        xi[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(xi) > radius
    mu = np.sqrt(params.eta_n) * xi

    a0 = inst.adjacency[big_n - two_n :, :two_n].astype(float)
    w = np.empty((two_n, p))
    for i in range(two_n):
        b0 = sample_density(gaussianization_density(mu[i], 0, params), rng, size=two_n)
        b1 = sample_density(gaussianization_density(mu[i], 1, params), rng, size=two_n)
        w[i, :two_n] = b0 * (1.0 - a0[i]) + b1 * a0[i]
    if p > two_n:
        w[:, two_n:] = rng.standard_normal((two_n, p - two_n))
    return w


def pca_test(w, theta_hat, k, eta_n):
    """Reject the no-clique hypothesis on the held-out data half.

    theta_hat must be a unit vector built from the first n rows only; the
    statistic is the empirical second moment of the projections of rows
    n+1..2n, rejected at the threshold 1 + k * eta_n / 4.
    """
    theta_hat = np.asarray(theta_hat, dtype=float).ravel()
    nrm = np.linalg.norm(theta_hat)
    if abs(nrm - 1.0) > 1e-6:
        raise PreconditionError("theta_hat must be a unit vector")
    two_n = w.shape[0]
    n = two_n // 2
    proj = w[n : 2 * n] @ theta_hat
    statistic = float(np.mean(proj * proj))
    return statistic >= 1.0 + 0.25 * k * eta_n


def pca_to_cca(w, rng):
    """Split observations into a correlated pair via an independent copy."""
    w = np.asarray(w, dtype=float)
    z = rng.standard_normal(w.shape)
    inv_sqrt2 = 1.0 / _SQRT2
    return SampleSet(inv_sqrt2 * (w + z), inv_sqrt2 * (w - z))


def cca_to_pca_estimator(u_hat):
    """Unit-normalized leading direction from a CCA coefficient estimate."""
    u = np.asarray(u_hat, dtype=float).ravel()
    nrm = np.linalg.norm(u)
    if nrm == 0.0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return u / nrm


def quantize(x, t):
    """Round down to the dyadic grid 2^{-t} Z."""
    if t < 0:
        raise PreconditionError("t must be >= 0")
    scale = float(2**t)
    return np.floor(np.asarray(x, dtype=float) * scale) / scale


def dyadic_constants(t, p, n_vertices):
    """Grid width, probability precision, and range exponents (w, b, K)."""
    w = t + ceil(4 * log2(p))
    big_k = ceil(log2(3.0 * np.sqrt(np.log(n_vertices + p))))
    b = w + big_k + 1 + ceil(4 * log2(p))
    return w, b, big_k


def _cell_masses(density, w, big_k, order=24):
    """Integrals of the density over every dyadic cell of [-2^K, 2^K]."""
    n_cells = 1 << (big_k + w + 1)
    if n_cells > _MAX_TABLE_CELLS:
        raise PreconditionError(f"mass table with {n_cells} cells is too large")
    width = 2.0**-w
    left = -(2.0**big_k) + width * np.arange(n_cells)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    # Map nodes from [-1, 1] into every cell at once.
    pts = left[:, None] + 0.5 * width * (nodes[None, :] + 1.0)
    vals = density(pts.ravel()).reshape(pts.shape)
    if not np.isfinite(vals).all():
        raise NumericError("density evaluated to non-finite values")
    masses = 0.5 * width * vals @ weights
    return left, np.maximum(masses, 0.0)


def dyadic_cell_probabilities(density, w, big_k):
    """Support points and exact conditional cell probabilities."""
    left, masses = _cell_masses(density, w, big_k)
    total = masses.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise PreconditionError("mass table is not normalizable")
    return left, masses / total

def dyadic_table(density, w, b, big_k):
    """Finite-precision sampling table.

    All cells except the last carry their conditional probability rounded
    down to the 2^{-b} grid; the last cell absorbs the remainder so the
    table sums to one exactly.
    """
    if not big_k + w + 1 < b:
        raise PreconditionError("need K + w + 1 < b")
    support, exact = dyadic_cell_probabilities(density, w, big_k)
    pmf = np.empty_like(exact)
    pmf[:-1] = quantize(exact[:-1], b)
    pmf[-1] = 1.0 - pmf[:-1].sum()
    if pmf[-1] < 0.0:
        raise PreconditionError("mass table is not normalizable")
    return support, pmf


def dyadic_sampler(density, w, b, big_k, rng, size=None):
    """Sample from the finite-precision dyadic approximation of a density."""
    support, pmf = dyadic_table(density, w, b, big_k)
    out = rng.choice(support, size=1 if size is None else size, p=pmf)
    return float(out[0]) if size is None else out


def tv_numeric(f, g, interval, panels, f_outside=None, g_outside=None, order=16):
    """Total variation distance, (1/2) integral |f - g|, by panel quadrature.

    Composite Gauss-Legendre on `panels` equal panels of `interval`. Mass
    outside the interval enters as a point-mass correction; by default it
    is estimated as 1 - integral of each density over the interval (exact
    values can be supplied for truncated densities).
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise PreconditionError("interval must have positive length")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = edges[:-1, None] + half[:, None] * (nodes[None, :] + 1.0)
    fv = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    gv = np.asarray(g(pts.ravel()), dtype=float).reshape(pts.shape)
    if not (np.isfinite(fv).all() and np.isfinite(gv).all()):
        raise NumericError("integrand evaluated to non-finite values")
    abs_int = float(((np.abs(fv - gv) @ weights) * half).sum())
    if f_outside is None:
        f_outside = max(0.0, 1.0 - float(((fv @ weights) * half).sum()))
    if g_outside is None:
        g_outside = max(0.0, 1.0 - float(((gv @ weights) * half).sum()))
    return 0.5 * (abs_int + f_outside + g_outside)
