"""Covariance and structure matrices for varying-coefficient effect models.

Builds the dependence structures used throughout the package: exchangeable
and AR1 correlation matrices, random-walk and ICAR structure matrices
(with geometric-mean scaling of the constrained marginal variances), and
Matern correlation matrices over 2-D locations.

Everything is dense; the intended scale is a few hundred units. All
functions are pure and the returned arrays are fresh, so values can be
shared freely across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .kernels import matern_many, matern_scalar

# eigenvalue below n * RANK_EPS * lambda_max counts as part of the null space
RANK_EPS = 1e-12


def build_exchangeable(n, rho):
    """Exchangeable correlation matrix: 1 on the diagonal, ``rho`` elsewhere.

    Positive definite on the supported range ``0 <= rho < 1`` (the general
    positive-definiteness bound is ``-1/(n-1) < rho < 1``; negative values
    are excluded to match the prior's support).
    """
    n = _check_size(n, 2)
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"exchangeable correlation must satisfy 0 <= rho < 1, got {rho}")
    return (1.0 - rho) * np.eye(n) + rho * np.ones((n, n))


def build_ar1(n, rho):
    """AR1 correlation matrix ``R[i, j] = rho ** |i - j|`` (symmetric Toeplitz)."""
    n = _check_size(n, 2)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"AR1 correlation must satisfy |rho| < 1, got {rho}")
    powers = rho ** np.arange(n, dtype=np.float64)
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return powers[idx]


def ar1_precision(n, rho):
    """Closed-form tridiagonal inverse of the AR1 correlation matrix."""
    n = _check_size(n, 2)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"AR1 correlation must satisfy |rho| < 1, got {rho}")
    q = np.zeros((n, n))
    denom = 1.0 - rho * rho
    diag = np.full(n, (1.0 + rho * rho) / denom)
    diag[0] = diag[-1] = 1.0 / denom
    np.fill_diagonal(q, diag)
    off = -rho / denom
    idx = np.arange(n - 1)
    q[idx, idx + 1] = off
    q[idx + 1, idx] = off
    return q


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected region adjacency: ``n`` regions, 0-based edge pairs."""

    n: int
    edges: tuple

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("graph needs at least 2 regions")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at region {i + 1}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i + 1}, {j + 1}) outside 1..{self.n}")
            seen.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    def neighbor_counts(self):
        counts = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            counts[i] += 1
            counts[j] += 1
        return counts

    def is_connected(self):
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            for k in adj[stack.pop()]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        return len(seen) == self.n


def path_graph(n):
    """Chain 1-2-...-n, the lattice on which ICAR reduces to a first-order walk."""
    return AdjacencyGraph(n, tuple((i, i + 1) for i in range(n - 1)))


def read_edge_list(path):
    """Read an adjacency graph from a plain-text edge list.

    Format: first line is the region count ``n``, each following nonempty
    line is a 1-indexed pair ``i j``.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty edge-list file: {path}")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise ValueError(f"first line of {path} must be the region count") from exc
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line {ln!r} in {path}")
        i, j = (int(p) for p in parts)
        edges.append((i - 1, j - 1))
    return AdjacencyGraph(n, tuple(edges))


@dataclass(frozen=True)
class IgmrfStructure:
    """Symmetric PSD structure matrix with a known polynomial null space.

    ``order`` is the rank deficiency: 1 for a first-order walk / ICAR
    (constant null vector), 2 for a second-order walk (constant plus
    linear trend). ``scaled`` records whether the geometric mean of the
    constrained marginal variances has been normalized to one.
    """

    matrix: np.ndarray
    order: int
    family: str
    scaled: bool = False

    @property
    def n(self):
        return self.matrix.shape[0]

    def null_space(self):
        """Orthonormal basis of the declared null space, shape (n, order)."""
        n = self.n
        basis = np.ones((n, 1)) / np.sqrt(n)
        if self.order == 2:
            trend = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
            trend /= np.linalg.norm(trend)
            basis = np.column_stack([basis, trend])
        return basis


def build_rw_structure(n, order):
    """Random-walk structure matrix ``K = D' D`` for the given difference order.

    Equally spaced locations only; the rank deficiency equals ``order``.
    """
    if order not in (1, 2):
        raise ValueError(f"difference order must be 1 or 2, got {order}")
    n = _check_size(n, order + 2)
    d = np.diff(np.eye(n), n=order, axis=0)
    return IgmrfStructure(matrix=d.T @ d, order=order, family=f"rw{order}")


def build_icar_structure(graph):
    """ICAR structure matrix: neighbor counts on the diagonal, -1 for neighbors.

    Requires a connected graph, otherwise the rank deficiency would exceed
    one and the model would fall apart into independent islands.
    """
    if not graph.is_connected():
        raise ValueError("ICAR requires a connected adjacency graph")
    k = np.zeros((graph.n, graph.n))
    for i, j in graph.edges:
        k[i, j] = k[j, i] = -1.0
    np.fill_diagonal(k, graph.neighbor_counts().astype(np.float64))
    return IgmrfStructure(matrix=k, order=1, family="icar")


def numerical_rank(matrix):
    """Count of eigenvalues above the relative rank-detection threshold."""
    eigvals = np.linalg.eigvalsh(_check_symmetric(matrix))
    lam_max = eigvals[-1]
    if lam_max <= 0.0:
        return 0
    return int(np.sum(eigvals > matrix.shape[0] * RANK_EPS * lam_max))


def generalized_log_det(matrix):
    """Log of the product of the nonzero eigenvalues of a symmetric PSD matrix."""
    eigvals = np.linalg.eigvalsh(_check_symmetric(matrix))
    _check_psd(eigvals)
    keep = eigvals > matrix.shape[0] * RANK_EPS * max(eigvals[-1], 0.0)
    return float(np.sum(np.log(eigvals[keep])))


def constrained_generalized_inverse(matrix, rank_deficiency=None):
    """Generalized inverse with the null-space directions zeroed out.

    Equals the covariance of the implied Gaussian conditioned on the
    null-space constraints (sum-to-zero, plus zero linear trend for a
    second-order walk). With ``rank_deficiency`` given, a detected null
    space of any other dimension raises.
    """
    matrix = _check_symmetric(matrix)
    eigvals, vecs = np.linalg.eigh(matrix)
    _check_psd(eigvals)
    keep = eigvals > matrix.shape[0] * RANK_EPS * max(eigvals[-1], 0.0)
    if rank_deficiency is not None:
        found = int(np.sum(~keep))
        if found != rank_deficiency:
            raise ValueError(
                f"matrix is singular beyond its declared null space: expected "
                f"rank deficiency {rank_deficiency}, detected {found}")
    inv = np.zeros_like(eigvals)
    inv[keep] = 1.0 / eigvals[keep]
    return (vecs * inv) @ vecs.T


def scale_structure(structure):
    """Rescale a structure matrix to geometric-mean-one marginal variance.

    The factor is the geometric mean of the diagonal of the constrained
    generalized inverse, so that after scaling the constrained marginal
    variances of the implied field have geometric mean one. Idempotent.
    """
    sigma = constrained_generalized_inverse(structure.matrix, structure.order)
    marginal = np.diag(sigma)
    factor = float(np.exp(np.mean(np.log(marginal))))
    return replace(structure, matrix=factor * structure.matrix, scaled=True)


def matern_corr(h, nu, phi):
    """Matern correlation at distance ``h`` (scalar or array).

    ``C(h) = 2^(1-nu)/Gamma(nu) * (sqrt(8 nu) h / phi)^nu
    * K_nu(sqrt(8 nu) h / phi)`` with ``C(0) = 1`` by continuity. The
    smoothness ``nu`` is treated as fixed; half-integers are exact, other
    orders are evaluated by series/large-argument expansion (see
    ``pcvcm.kernels``).
    """
    if np.isscalar(h):
        return matern_scalar(float(h), nu, phi)
    h = np.asarray(h, dtype=np.float64)
    return matern_many(h.reshape(-1), nu, phi).reshape(h.shape)


def pairwise_distances(locations):
    """Euclidean distance matrix for an (n, 2) array of coordinates."""
    locations = np.asarray(locations, dtype=np.float64)
    if locations.ndim != 2 or locations.shape[1] != 2:
        raise ValueError("locations must be an (n, 2) array")
    diff = locations[:, None, :] - locations[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def build_matern(locations, nu, phi):
    """Matern correlation matrix over 2-D locations (distinct points required)."""
    dists = pairwise_distances(locations)
    n = dists.shape[0]
    if n < 2:
        raise ValueError("need at least 2 locations")
    off_diag = dists[~np.eye(n, dtype=bool)]
    if off_diag.size and off_diag.min() <= 0.0:
        raise ValueError("locations must be distinct")
    return matern_many(dists.reshape(-1), nu, phi).reshape(n, n)


def write_matrix_csv(matrix, path):
    """Emit a matrix as headerless row-major CSV."""
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def _check_size(n, minimum):
    n = int(n)
    if n < minimum:
        raise ValueError(f"need at least n = {minimum} units, got {n}")
    return n


def _check_symmetric(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(matrix, matrix.T, rtol=1e-10, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    return matrix


def _check_psd(eigvals):
    if eigvals[0] < -1e-8 * max(abs(eigvals[-1]), 1.0):
        raise ValueError("matrix is not positive semidefinite")
