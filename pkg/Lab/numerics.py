"""Dense linear algebra, quadrature grids and seeded random streams.

Every other module builds on these helpers. Matrices are plain numpy arrays;
the checks here (finite entries, symmetry, positive pivots) are the only place
those contracts are enforced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.linalg import cho_solve, lapack

import config


class InvalidInputError(ValueError):
    """Raised when an argument is malformed (NaN entries, bad shapes, bad ranges)."""


class ContractViolationError(ValueError):
    """Raised when an input breaks a structural precondition such as symmetry."""


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky pivot is not positive."""

    def __init__(self, message: str, pivot_index: int) -> None:
        super().__init__(message)
        self.pivot_index = pivot_index


class ConvergenceError(RuntimeError):
    """Raised when an iteration stops at its cap without meeting its tolerance."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


GRID_KINDS = ("gauss-hermite", "uniform-truncated")


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and Lebesgue weights: sum(weights * f(nodes)) approximates the integral of f."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "gauss-hermite"

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise InvalidInputError("grid nodes and weights must be equal-length 1D sequences")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise InvalidInputError("grid nodes and weights must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidInputError("grid nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise InvalidInputError("grid weights must be positive")
        if self.kind not in GRID_KINDS:
            raise InvalidInputError(f"unknown grid kind {self.kind!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def contains(self, x: float) -> bool:
        return bool(self.nodes[0] <= x <= self.nodes[-1])

    def matches(self, other: "QuadratureGrid") -> bool:
        return (
            self.kind == other.kind
            and self.size == other.size
            and np.allclose(self.nodes, other.nodes, rtol=1e-14, atol=0.0)
            and np.allclose(self.weights, other.weights, rtol=1e-14, atol=0.0)
        )


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream: the same (seed, stream_id) always yields the same draws."""

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name, value in (("seed", self.seed), ("stream_id", self.stream_id)):
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < 2**64:
                raise InvalidInputError(f"{name} must be an integer in [0, 2^64), got {value!r}")

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + offset)


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    return RngStream(seed, stream_id).generator()


# ---------------------------------------------------------------------------
# matrix checks
# ---------------------------------------------------------------------------


def as_matrix(m, *, name: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has NaN or infinite entries")
    return a


def check_symmetric(a: np.ndarray, *, name: str = "matrix") -> None:
    if a.shape[0] != a.shape[1]:
        raise ContractViolationError(f"{name} must be square, got shape {a.shape}")
    scale = float(np.abs(a).max()) if a.size else 0.0
    asym = float(np.abs(a - a.T).max()) if a.size else 0.0
    if asym > config.SYMMETRY_TOL * max(scale, np.finfo(float).tiny):
        raise ContractViolationError(f"{name} is not symmetric (max |a - a^T| = {asym:.3e})")


def as_symmetric(m, *, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, name=name)
    check_symmetric(a, name=name)
    return 0.5 * (a + a.T)


def index_set(indices: Sequence[int], n: int, *, name: str = "index set") -> np.ndarray:
    idx = np.asarray(list(indices), dtype=int).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise InvalidInputError(f"{name} has indices outside 0..{n - 1}")
    if np.unique(idx).size != idx.size:
        raise InvalidInputError(f"{name} has repeated indices")
    return np.sort(idx)


def complement(indices: np.ndarray, n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[indices] = False
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# factorizations
# ---------------------------------------------------------------------------


def sym_eigen(m) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order with orthonormal eigenvector columns."""
    a = as_symmetric(m)
    values, vectors = np.linalg.eigh(a)
    return values[::-1].copy(), vectors[:, ::-1].copy()


def cholesky(m) -> np.ndarray:
    a = as_symmetric(m)
    if a.size == 0:
        return a
    lower, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: pivot {info - 1} is not positive", info - 1
        )
    if info < 0:
        raise InvalidInputError(f"LAPACK dpotrf rejected argument {-info}")
    return lower


def logdet_spd(m) -> float:
    lower = cholesky(m)
    return float(2.0 * np.sum(np.log(np.diag(lower))))


def spd_solve(m, rhs) -> np.ndarray:
    lower = cholesky(m)
    return cho_solve((lower, True), np.asarray(rhs, dtype=float))


def spd_inverse(m) -> np.ndarray:
    a = as_symmetric(m)
    inverse = spd_solve(a, np.eye(a.shape[0]))
    return 0.5 * (inverse + inverse.T)


def schur_complement(m, keep: Sequence[int]) -> np.ndarray:
    """m_KK - m_KB m_BB^{-1} m_BK for K = keep and B its complement."""
    a = as_symmetric(m)
    n = a.shape[0]
    k = index_set(keep, n, name="keep")
    b = complement(k, n)
    if b.size == 0:
        return a[np.ix_(k, k)].copy()
    if k.size == 0:
        return np.zeros((0, 0))
    try:
        lower = cholesky(a[np.ix_(b, b)])
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(
            f"dropped block is not positive definite at vertex {int(b[exc.pivot_index])}",
            int(b[exc.pivot_index]),
        ) from exc
    coupling = a[np.ix_(b, k)]
    result = a[np.ix_(k, k)] - coupling.T @ cho_solve((lower, True), coupling)
    return 0.5 * (result + result.T)


# ---------------------------------------------------------------------------
# power iteration
# ---------------------------------------------------------------------------


def _dominant(a: np.ndarray, start: np.ndarray, scale: float, need_vector: bool):
    b = a / scale
    for _ in range(config.POWER_SQUARINGS):
        b = b @ b
        top = float(np.abs(b).max())
        if top == 0.0:
            break
        b = b / top
    v = b @ start
    if np.linalg.norm(v) == 0.0:
        v = start
    v = v / np.linalg.norm(v)
    lam = float(v @ (a @ v))
    residual = float("inf")
    for _ in range(config.POWER_MAX_ITER):
        w = a @ v
        new_lam = float(v @ w)
        residual = float(np.linalg.norm(w - new_lam * v))
        settled = abs(new_lam - lam) <= config.POWER_TOL * max(abs(new_lam), np.finfo(float).tiny)
        if settled and (not need_vector or residual <= 1e-10 * scale):
            return new_lam, v
        lam = new_lam
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v
        v = w / norm
    raise ConvergenceError(
        f"power iteration did not converge in {config.POWER_MAX_ITER} steps", residual
    )


def power_pair(m) -> Tuple[float, np.ndarray, float]:
    """Top eigenpair of a nonnegative symmetric matrix and the next eigenvalue by modulus."""
    a = as_symmetric(m)
    scale = float(np.abs(a).max())
    if scale == 0.0:
        raise InvalidInputError("power_pair needs a nonzero matrix")
    if a.min() < -config.SYMMETRY_TOL * scale:
        raise ContractViolationError("power_pair needs nonnegative entries")
    n = a.shape[0]
    lam0, v0 = _dominant(a, np.ones(n), scale, need_vector=True)
    if v0.sum() < 0:
        v0 = -v0
    deflated = a - lam0 * np.outer(v0, v0)
    deflated = 0.5 * (deflated + deflated.T)
    if np.abs(deflated).max() <= 1e-13 * scale:
        return lam0, v0, 0.0
    # squared operator is PSD so the dominant mode is the largest modulus, whatever its sign
    start = RngStream(0, 0).generator().standard_normal(n)
    squared = deflated @ deflated
    mu, v1 = _dominant(squared, start, float(np.abs(squared).max()), need_vector=False)
    modulus = float(np.sqrt(max(mu, 0.0)))
    rayleigh = float(v1 @ (deflated @ v1))
    lam1 = rayleigh if abs(abs(rayleigh) - modulus) <= 1e-6 * max(modulus, 1e-300) else modulus
    return lam0, v0, lam1


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def hermite_grid(order: int, scale: float = 1.0) -> QuadratureGrid:
    """Gauss-Hermite nodes x = scale*t with the weight e^{-t^2} folded back into the weights."""
    if not 1 <= order <= config.HERMITE_MAX_ORDER:
        raise InvalidInputError(f"order must be in 1..{config.HERMITE_MAX_ORDER}, got {order}")
    if not scale > 0:
        raise InvalidInputError(f"scale must be positive, got {scale}")
    t, w = hermgauss(order)
    return QuadratureGrid(scale * t, w * np.exp(t * t) * scale, "gauss-hermite")


def hermite_grid_spanning(order: int, half_width: float) -> QuadratureGrid:
    """Gauss-Hermite grid stretched so its outermost nodes sit at +-half_width."""
    if not half_width > 0:
        raise InvalidInputError(f"half_width must be positive, got {half_width}")
    unit = hermite_grid(order)
    outer = float(np.abs(unit.nodes).max()) or 1.0
    return hermite_grid(order, half_width / outer)


def uniform_grid(order: int, half_width: float) -> QuadratureGrid:
    if order < 2 or not half_width > 0:
        raise InvalidInputError("uniform grid needs order >= 2 and positive half_width")
    nodes = np.linspace(-half_width, half_width, order)
    weights = np.full(order, nodes[1] - nodes[0])
    weights[[0, -1]] *= 0.5
    return QuadratureGrid(nodes, weights, "uniform-truncated")


def gaussian_expectation_nodes(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights with sum(w * f(nodes)) = E[f(Z)] for Z ~ N(0, 1)."""
    t, w = hermgauss(order)
    return np.sqrt(2.0) * t, w / np.sqrt(np.pi)
