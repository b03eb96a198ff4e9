"""Amplitudes and transfer operators of lattice cylinder slabs.

A slab has n_layers interior layers between an in-boundary (layer 0) and an
out-boundary (layer n_layers + 1), each layer a periodic ring of n_transverse
sites. The action is the torus action cut open: longitudinal differences,
plus (L_T + m^2 a^2) on every layer with weight 1/2 on the two boundary
layers, so that gluing slabs end to end reproduces the torus exactly.

Kernels carry the normalized Gaussian measure (2 pi)^{-1/2} dphi per vertex,
so tr(U^N) of the free slab is det(Q_torus)^{-1/2} for the N-fold glued torus.
On the boundary grid the kernel is stored as sqrt(W_i) K(p_i, p_j) sqrt(W_j),
scaled to a unit maximum with the scale kept in log_scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

import config
from lattice import GaussianLaw, LatticeGraph, PrecisionOperator, bfk_check, dn_map, gaussian_logpdf, sample
from numerics import (
    InvalidInputError,
    QuadratureGrid,
    RngStream,
    cholesky,
    gaussian_expectation_nodes,
    hermite_grid,
    logdet_spd,
    power_pair,
    schur_complement,
    spd_inverse,
    spd_solve,
    sym_eigen,
)
from pphi2 import InteractionSpec, partition_mc
from wick import wick_evaluate

# GH error on the trace integral shrinks like (|e| / d)^order per mode
FREE_ORDER_TARGET = 1e-12


class CapacityError(ValueError):
    """Raised when a slab needs more quadrature points than the configured limits allow."""


class InvalidCompositionError(ValueError):
    """Raised when two amplitudes live on different boundary grids."""


# ---------------------------------------------------------------------------
# transverse ring
# ---------------------------------------------------------------------------


def transverse_laplacian(n: int) -> np.ndarray:
    shift = np.roll(np.eye(n), 1, axis=1)
    lap = 2.0 * np.eye(n) - shift - shift.T
    return lap if n > 1 else np.zeros((1, 1))


def fourier_basis(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Real orthonormal Fourier modes (columns) of the ring and the Laplacian eigenvalues."""
    j = np.arange(n)
    columns = [np.full(n, 1.0 / math.sqrt(n))]
    frequencies = [0]
    for k in range(1, (n - 1) // 2 + 1):
        columns.append(math.sqrt(2.0 / n) * np.cos(2.0 * np.pi * k * j / n))
        columns.append(math.sqrt(2.0 / n) * np.sin(2.0 * np.pi * k * j / n))
        frequencies += [k, k]
    if n % 2 == 0 and n > 1:
        columns.append((-1.0) ** j / math.sqrt(n))
        frequencies.append(n // 2)
    eigenvalues = np.array([2.0 - 2.0 * math.cos(2.0 * math.pi * k / n) for k in frequencies])
    return np.array(columns).T, eigenvalues


# ---------------------------------------------------------------------------
# slabs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CylinderSlab:
    n_transverse: int
    n_layers: int
    spacing: float = 1.0
    mass: float = 1.0
    interaction: Optional[InteractionSpec] = None
    wick_variance: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_transverse < 1 or self.n_layers < 0:
            raise InvalidInputError("slab needs n_transverse >= 1 and n_layers >= 0")
        if not self.spacing > 0 or not self.mass > 0:
            raise InvalidInputError("slab spacing and mass must be positive")
        if self.interaction is not None and self.interaction.chi is not None:
            if self.interaction.chi.size != self.n_vertices:
                raise InvalidInputError(
                    f"interaction mask has {self.interaction.chi.size} entries, slab has {self.n_vertices} vertices"
                )

    @property
    def n_vertices(self) -> int:
        return (self.n_layers + 2) * self.n_transverse

    def layer(self, index: int) -> np.ndarray:
        t = self.n_transverse
        return np.arange(index * t, (index + 1) * t)

    @property
    def boundary(self) -> np.ndarray:
        return np.concatenate([self.layer(0), self.layer(self.n_layers + 1)])

    @property
    def interior(self) -> np.ndarray:
        return np.arange(self.n_transverse, (self.n_layers + 1) * self.n_transverse)

    @cached_property
    def matrix(self) -> np.ndarray:
        t = self.n_transverse
        ring = transverse_laplacian(t) + (self.mass * self.spacing) ** 2 * np.eye(t)
        m = np.zeros((self.n_vertices, self.n_vertices))
        for i in range(self.n_layers + 2):
            block = self.layer(i)
            m[np.ix_(block, block)] += (0.5 if i in (0, self.n_layers + 1) else 1.0) * ring
        eye = np.eye(t)
        for i in range(self.n_layers + 1):
            a, b = self.layer(i), self.layer(i + 1)
            m[np.ix_(a, a)] += eye
            m[np.ix_(b, b)] += eye
            m[np.ix_(a, b)] -= eye
            m[np.ix_(b, a)] -= eye
        return m

    @cached_property
    def boundary_dn(self) -> np.ndarray:
        """Schur complement of the slab action onto (in, out)."""
        return schur_complement(self.matrix, self.boundary)

    @property
    def reflection_symmetric(self) -> bool:
        if self.interaction is None or self.interaction.chi is None:
            return True
        chi = self.interaction.chi.reshape(self.n_layers + 2, self.n_transverse)
        return bool(np.array_equal(chi, chi[::-1]))

    @property
    def interacting(self) -> bool:
        return self.interaction is not None and self.interaction.p.degree > 0

    def stacked(self, other: "CylinderSlab") -> "CylinderSlab":
        """The slab obtained by gluing other's in-boundary to this slab's out-boundary."""
        if (other.n_transverse, other.spacing, other.mass) != (self.n_transverse, self.spacing, self.mass):
            raise InvalidCompositionError("slabs differ in ring size, spacing or mass")
        if self.interaction is None and other.interaction is None:
            return replace(self, n_layers=self.n_layers + other.n_layers + 1)
        if (
            self.interaction is None
            or other.interaction is None
            or self.interaction.p.coefficients != other.interaction.p.coefficients
            or self.wick_variance != other.wick_variance
        ):
            raise InvalidCompositionError("slabs carry different interactions")
        t = self.n_transverse
        chi_a, chi_b = _slab_mask(self), _slab_mask(other)
        # the glued ring is interior now: its two half weights add up
        shared = 0.5 * (chi_a[-t:] + chi_b[:t])
        chi = np.concatenate([chi_a[:-t], shared, chi_b[t:]])
        return replace(
            self,
            n_layers=self.n_layers + other.n_layers + 1,
            interaction=InteractionSpec(self.interaction.p, chi),
        )


def _slab_mask(slab: CylinderSlab) -> np.ndarray:
    chi = slab.interaction.chi if slab.interaction is not None else None
    return np.ones(slab.n_vertices) if chi is None else chi


def mode_frequencies(slab: CylinderSlab) -> np.ndarray:
    """omega_k^2 = lambda_k(L_T) + m^2 a^2 for each transverse Fourier mode."""
    _, eigenvalues = fourier_basis(slab.n_transverse)
    return eigenvalues + (slab.mass * slab.spacing) ** 2


def local_wick_variance(slab: CylinderSlab) -> float:
    """Site variance of the free field on the infinite cylinder with this ring."""
    w2 = mode_frequencies(slab)
    return float(np.mean(1.0 / np.sqrt(w2 * (w2 + 4.0))))


def glued_torus(slab: CylinderSlab, n: int) -> PrecisionOperator:
    if n < 1:
        raise InvalidInputError("gluing needs n >= 1 copies")
    graph = LatticeGraph.torus(n * (slab.n_layers + 1), slab.n_transverse, slab.spacing)
    return PrecisionOperator(graph, slab.mass)


def torus_wick_shift(slab: CylinderSlab, n: int) -> float:
    """c_torus - c_local: the ordering change from local to free-field Wick ordering."""
    q = glued_torus(slab, n)
    return float(np.diag(q.covariance)[0] - local_wick_variance(slab))


def slab_wick_variance(slab: CylinderSlab) -> float:
    return local_wick_variance(slab) if slab.wick_variance is None else float(slab.wick_variance)


def mode_amplitudes(slab: CylinderSlab) -> List[Tuple[int, CylinderSlab]]:
    """One-site slabs, one per transverse Fourier mode, whose kernels multiply to the free kernel."""
    return [
        (k, CylinderSlab(1, slab.n_layers, slab.spacing, math.sqrt(w2) / slab.spacing))
        for k, w2 in enumerate(mode_frequencies(slab))
    ]


# ---------------------------------------------------------------------------
# boundary grids
# ---------------------------------------------------------------------------


def _tensor(nodes: Sequence[np.ndarray], weights: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    points = np.array(list(itertools.product(*nodes)), dtype=float).reshape(-1, len(nodes))
    product = np.array([math.prod(w) for w in itertools.product(*weights)], dtype=float)
    return points, product


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Tensor Gauss-Hermite grid in the Fourier coordinates of one boundary ring."""

    basis: np.ndarray
    mode_grids: Tuple[QuadratureGrid, ...]

    @cached_property
    def _tensor(self) -> Tuple[np.ndarray, np.ndarray]:
        coords, weights = _tensor([g.nodes for g in self.mode_grids], [g.weights for g in self.mode_grids])
        return coords @ self.basis.T, weights

    @property
    def points(self) -> np.ndarray:
        return self._tensor[0]

    @property
    def weights(self) -> np.ndarray:
        return self._tensor[1]

    @property
    def size(self) -> int:
        return int(math.prod(g.size for g in self.mode_grids))

    @property
    def n_transverse(self) -> int:
        return self.basis.shape[0]

    def matches(self, other: "BoundaryGrid") -> bool:
        return (
            self.n_transverse == other.n_transverse
            and np.allclose(self.basis, other.basis, rtol=0.0, atol=1e-14)
            and all(a.matches(b) for a, b in zip(self.mode_grids, other.mode_grids))
        )


def _mode_blocks(slab: CylinderSlab) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal (in-in) and cross (in-out) entries of the boundary DN map per Fourier mode."""
    basis, _ = fourier_basis(slab.n_transverse)
    t = slab.n_transverse
    rotate = np.zeros((2 * t, 2 * t))
    rotate[:t, :t] = basis
    rotate[t:, t:] = basis
    modes = rotate.T @ slab.boundary_dn @ rotate
    k = np.arange(t)
    return modes[k, k], modes[k, t + k]


def boundary_grid(slab: CylinderSlab, order: Optional[int] = None) -> BoundaryGrid:
    t = slab.n_transverse
    if t > config.MAX_TRANSVERSE:
        raise CapacityError(f"n_transverse={t} exceeds MAX_TRANSVERSE={config.MAX_TRANSVERSE}")
    diagonal, cross = _mode_blocks(slab)
    if order is not None:
        orders = [int(order)] * t
    elif slab.interacting:
        orders = [config.SEGAL_ORDER] * t
    else:
        ratios = np.abs(cross) / diagonal
        orders = [
            int(min(max(math.ceil(math.log(FREE_ORDER_TARGET) / math.log(r)), 8), config.SEGAL_FREE_ORDER))
            if 0.0 < r < 1.0 else 8
            for r in ratios
        ]
        if math.prod(orders) > config.MAX_AMPLITUDE_POINTS:
            orders = [int(config.MAX_AMPLITUDE_POINTS ** (1.0 / t))] * t
    if math.prod(orders) > config.MAX_AMPLITUDE_POINTS:
        raise CapacityError(
            f"{math.prod(orders)} boundary points exceed MAX_AMPLITUDE_POINTS={config.MAX_AMPLITUDE_POINTS}"
        )
    basis, _ = fourier_basis(t)
    # scale 1/sqrt(d_k) makes the glued middle integral exact up to a linear exponent
    grids = tuple(hermite_grid(o, 1.0 / math.sqrt(d)) for o, d in zip(orders, diagonal))
    return BoundaryGrid(basis, grids)


# ---------------------------------------------------------------------------
# amplitudes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AmplitudeOperator:
    grid: BoundaryGrid
    matrix: np.ndarray
    log_scale: float = 0.0
    slab: Optional[CylinderSlab] = None

    @property
    def symmetric(self) -> bool:
        scale = float(np.abs(self.matrix).max())
        return float(np.abs(self.matrix - self.matrix.T).max()) <= config.SYMMETRY_TOL * scale

    @cached_property
    def eigen(self) -> Tuple[np.ndarray, np.ndarray]:
        if not self.symmetric:
            raise InvalidInputError("spectral data needs a reflection-symmetric amplitude")
        values, vectors = sym_eigen(self.matrix)
        if vectors[:, 0].sum() < 0:
            vectors[:, 0] = -vectors[:, 0]
        return values, vectors

    def scaled(self, factor: float) -> "AmplitudeOperator":
        if not factor > 0:
            raise InvalidInputError("amplitudes can only be rescaled by a positive factor")
        return replace(self, log_scale=self.log_scale + math.log(factor))


def _free_log_constant(slab: CylinderSlab) -> float:
    interior = slab.interior
    logdet = logdet_spd(slab.matrix[np.ix_(interior, interior)]) if interior.size else 0.0
    return -0.5 * slab.n_transverse * math.log(2.0 * math.pi) - 0.5 * logdet


def _free_log_kernel(slab: CylinderSlab, phi_in: np.ndarray, phi_out: np.ndarray, pairwise: bool) -> np.ndarray:
    t = slab.n_transverse
    dn = slab.boundary_dn
    d_ii, d_io, d_oo = dn[:t, :t], dn[:t, t:], dn[t:, t:]
    a = 0.5 * np.einsum("pi,ij,pj->p", phi_in, d_ii, phi_in)
    b = 0.5 * np.einsum("pi,ij,pj->p", phi_out, d_oo, phi_out)
    if pairwise:
        return _free_log_constant(slab) - (a[:, None] + phi_in @ d_io @ phi_out.T + b[None, :])
    return _free_log_constant(slab) - (a + np.einsum("pi,ij,pj->p", phi_in, d_io, phi_out) + b)


def _interior_log_expectation(slab: CylinderSlab, points: np.ndarray, order: int) -> np.ndarray:
    """log E[exp(-S_interior)] under the interior Gaussian conditioned on each boundary pair."""
    spec = slab.interaction
    interior = slab.interior
    n_interior = interior.size
    if n_interior > config.MAX_INTERIOR_DIM:
        raise CapacityError(f"{n_interior} interior sites exceed MAX_INTERIOR_DIM={config.MAX_INTERIOR_DIM}")
    work = points.shape[0] ** 2 * order**n_interior
    if work > config.MAX_INTERACTING_WORK:
        raise CapacityError(f"interacting build needs {work} evaluations, MAX_INTERACTING_WORK={config.MAX_INTERACTING_WORK}")
    m = slab.matrix
    a_ii = m[np.ix_(interior, interior)]
    mean_in = -spd_solve(a_ii, m[np.ix_(interior, slab.layer(0))] @ points.T).T
    mean_out = -spd_solve(a_ii, m[np.ix_(interior, slab.layer(slab.n_layers + 1))] @ points.T).T
    root = cholesky(spd_inverse(a_ii))
    nodes, weights = gaussian_expectation_nodes(order)
    z, w = _tensor([nodes] * n_interior, [weights] * n_interior)
    offsets = z @ root.T
    site_weights = slab.spacing**2 * _slab_mask(slab)[interior]
    c = np.full(n_interior, slab_wick_variance(slab))
    result = np.empty((points.shape[0], points.shape[0]))
    log_w = np.log(w)
    for i in range(points.shape[0]):
        fields = mean_in[i][None, None, :] + mean_out[:, None, :] + offsets[None, :, :]
        action = wick_evaluate(spec.p, c, fields) @ site_weights
        shift = action.min(axis=1)
        result[i] = -shift + np.log(np.exp(-(action - shift[:, None]) + log_w[None, :]).sum(axis=1))
    return result


def _boundary_log_weight(slab: CylinderSlab, points: np.ndarray, layer: int) -> np.ndarray:
    spec = slab.interaction
    c = np.full(slab.n_transverse, slab_wick_variance(slab))
    chi = _slab_mask(slab)[slab.layer(layer)]
    return -(wick_evaluate(spec.p, c, points) @ (0.5 * slab.spacing**2 * chi))


def build_amplitude(
    slab: CylinderSlab,
    grid: Optional[BoundaryGrid] = None,
    order: Optional[int] = None,
    interior_order: Optional[int] = None,
) -> AmplitudeOperator:
    grid = grid or boundary_grid(slab, order)
    if grid.n_transverse != slab.n_transverse:
        raise InvalidCompositionError("grid and slab have different ring sizes")
    points, weights = grid.points, grid.weights
    log_kernel = _free_log_kernel(slab, points, points, pairwise=True)
    if slab.interacting:
        log_kernel = log_kernel + _boundary_log_weight(slab, points, 0)[:, None]
        log_kernel = log_kernel + _boundary_log_weight(slab, points, slab.n_layers + 1)[None, :]
        if slab.n_layers:
            log_kernel = log_kernel + _interior_log_expectation(slab, points, interior_order or config.SEGAL_ORDER)
    half_log_w = 0.5 * np.log(weights)
    entries = log_kernel + half_log_w[:, None] + half_log_w[None, :]
    shift = float(entries.max())
    if not math.isfinite(shift) or not np.all(np.isfinite(entries)):
        raise InvalidInputError("amplitude has non-finite entries on this grid")
    # far grid corners are clipped at e^floor so the matrix stays strictly positive
    matrix = np.exp(np.maximum(entries - shift, config.AMPLITUDE_LOG_FLOOR))
    return AmplitudeOperator(grid, matrix, shift, slab)


def compose(u1: AmplitudeOperator, u2: AmplitudeOperator) -> AmplitudeOperator:
    """U1 then U2: integrate the shared boundary with the grid weights."""
    if not u1.grid.matches(u2.grid):
        raise InvalidCompositionError("amplitudes live on different boundary grids")
    product = u1.matrix @ u2.matrix
    top = float(product.max())
    slab = u1.slab.stacked(u2.slab) if u1.slab is not None and u2.slab is not None else None
    return AmplitudeOperator(u1.grid, product / top, u1.log_scale + u2.log_scale + math.log(top), slab)


def relative_deviation(u: AmplitudeOperator, reference: AmplitudeOperator) -> float:
    """max |U - U_ref| / max |U_ref| on a common grid."""
    if not u.grid.matches(reference.grid):
        raise InvalidCompositionError("amplitudes live on different boundary grids")
    ratio = math.exp(u.log_scale - reference.log_scale)
    return float(np.abs(ratio * u.matrix - reference.matrix).max() / np.abs(reference.matrix).max())


def log_trace(u: AmplitudeOperator, n: int) -> float:
    if int(n) != n or n < 1:
        raise InvalidInputError(f"n must be a positive integer, got {n!r}")
    if u.symmetric:
        values, _ = u.eigen
        total = float(np.sum((values / values[0]) ** n))
        return n * (u.log_scale + math.log(values[0])) + math.log(total)
    power = np.eye(u.grid.size)
    log_norm = 0.0
    for _ in range(n):
        power = power @ u.matrix
        top = float(np.abs(power).max())
        power /= top
        log_norm += math.log(top)
    return n * u.log_scale + log_norm + math.log(float(np.trace(power)))


def trace(u: AmplitudeOperator, n: int) -> float:
    return math.exp(log_trace(u, n))


def mode_operators(slab: CylinderSlab, order: Optional[int] = None) -> List[Tuple[int, AmplitudeOperator]]:
    """Per-mode amplitudes of a free slab; in Fourier coordinates the full amplitude is their tensor product."""
    if slab.interacting:
        raise InvalidInputError("mode factorization needs a free slab")
    return [(k, build_amplitude(mode, order=order)) for k, mode in mode_amplitudes(slab)]


def factorized(slab: CylinderSlab) -> bool:
    """Free rings wider than MAX_TRANSVERSE are handled one Fourier mode at a time."""
    return not slab.interacting and slab.n_transverse > config.MAX_TRANSVERSE


def slab_log_trace(slab: CylinderSlab, n: int, order: Optional[int] = None) -> float:
    """log tr(U^n), as the sum over modes of log tr(U_k^n) for wide free rings."""
    if factorized(slab):
        return sum(log_trace(u, n) for _, u in mode_operators(slab, order))
    return log_trace(build_amplitude(slab, order=order, interior_order=order), n)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def adjoint_check(u: AmplitudeOperator) -> dict:
    scale = float(np.abs(u.matrix).max())
    asymmetry = float(np.abs(u.matrix - u.matrix.T).max()) / scale
    return {
        "check": "adjoint",
        "max_error": asymmetry,
        "symmetric_slab": u.slab.reflection_symmetric if u.slab is not None else None,
    }


def compose_check(slab: CylinderSlab, other: Optional[CylinderSlab] = None, order: Optional[int] = None) -> dict:
    """compose(U1, U2) against the directly built stacked slab on the same grid, and against compose(U2, U1)."""
    other = other or slab
    if factorized(slab):
        parts = [compose_check(a, b, order) for (_, a), (_, b) in zip(mode_amplitudes(slab), mode_amplitudes(other))]
        composition = max(p["composition_error"] for p in parts)
        commutator = max(p["commutator"] for p in parts)
        return {"check": "compose", "modes": len(parts), "composition_error": composition,
                "commutator": commutator, "max_error": max(composition, commutator)}
    u1 = build_amplitude(slab, order=order, interior_order=order)
    u2 = build_amplitude(other, grid=u1.grid, interior_order=order)
    composed = compose(u1, u2)
    direct = build_amplitude(slab.stacked(other), grid=u1.grid, interior_order=order)
    composition = relative_deviation(composed, direct)
    commutator = relative_deviation(compose(u2, u1), composed)
    return {
        "check": "compose",
        "grid_points": u1.grid.size,
        "composition_error": composition,
        "commutator": commutator,
        "max_error": max(composition, commutator),
    }


def trace_check(
    slab: CylinderSlab,
    n: int,
    rng: Optional[RngStream] = None,
    samples: Optional[int] = None,
    order: Optional[int] = None,
) -> dict:
    """tr(U^n) against the glued torus: exact determinant when free, Monte Carlo otherwise."""
    log_tr = slab_log_trace(slab, n, order)
    q = glued_torus(slab, n)
    log_free = -0.5 * logdet_spd(q.matrix)
    if not slab.interacting:
        return {"check": "trace", "n": n, "log_trace": log_tr, "log_det_torus": log_free,
                "factorized": factorized(slab), "max_error": abs(math.expm1(log_tr - log_free))}
    if slab.interaction.chi is not None:
        raise InvalidInputError("trace_check compares against a uniform interaction on the torus")
    spec = InteractionSpec(slab.interaction.p)
    estimate, stderr = partition_mc(
        spec, q, samples or config.PARTITION_SAMPLES, rng or RngStream(config.DEFAULT_SEED),
        variances=slab_wick_variance(slab),
    )
    ratio = math.exp(log_tr - log_free)
    return {
        "check": "trace", "n": n, "quadrature": ratio, "mc": estimate, "mc_stderr": stderr,
        "max_error": abs(ratio - estimate), "sigmas": abs(ratio - estimate) / stderr if stderr else 0.0,
    }


def decomposition_check(slab_a: CylinderSlab, n_a: int, slab_b: CylinderSlab, n_b: int) -> dict:
    """Two slab decompositions of the same free torus must give the same trace."""
    rows_a = n_a * (slab_a.n_layers + 1)
    rows_b = n_b * (slab_b.n_layers + 1)
    if rows_a != rows_b or slab_a.n_transverse != slab_b.n_transverse:
        raise InvalidInputError("the two decompositions describe different tori")
    a = slab_log_trace(slab_a, n_a)
    b = slab_log_trace(slab_b, n_b)
    return {"check": "decomposition", "log_trace_a": a, "log_trace_b": b, "max_error": abs(math.expm1(a - b))}


def boundary_reference(slab: CylinderSlab) -> GaussianLaw:
    """Gaussian on one ring with precision 2 (L_T + m^2 a^2)^{1/2}."""
    basis, _ = fourier_basis(slab.n_transverse)
    precision = (basis * (2.0 * np.sqrt(mode_frequencies(slab)))) @ basis.T
    return GaussianLaw.centered(spd_inverse(precision))


def amplitude_kernel(
    slab: CylinderSlab, phi_in, phi_out, reference=None
) -> np.ndarray:
    """log A(phi_in, phi_out) of a free slab for paired rows of phi_in and phi_out.

    With reference=None, A = K / sqrt(rho(phi_in) rho(phi_out)) for the boundary
    reference law rho. A (2T x 2T) matrix F instead gives the projective kernel
    K * exp(phi^T F phi / 2) without density normalization.
    """
    if slab.interacting:
        raise InvalidInputError("amplitude_kernel evaluates free slabs only")
    phi_in = np.atleast_2d(np.asarray(phi_in, dtype=float))
    phi_out = np.atleast_2d(np.asarray(phi_out, dtype=float))
    log_k = _free_log_kernel(slab, phi_in, phi_out, pairwise=False)
    if reference is None:
        law = boundary_reference(slab)
        return log_k - 0.5 * (law.logpdf(phi_in) + law.logpdf(phi_out))
    form = np.asarray(reference, dtype=float)
    boundary = np.hstack([phi_in, phi_out])
    return log_k + 0.5 * np.einsum("pi,ij,pj->p", boundary, form, boundary)


def amplitude_density_check(slab: CylinderSlab, rng: RngStream, points: Optional[int] = None) -> dict:
    """|A|^2 rho(in) rho(out) against Z_double * (trace-law density of the slab's double)."""
    if slab.interacting:
        raise InvalidInputError("amplitude_density_check needs a free slab")
    points = points or config.AMPLITUDE_POINTS
    t = slab.n_transverse
    double = glued_torus(slab, 2)
    boundary = np.concatenate([np.arange(t), (slab.n_layers + 1) * t + np.arange(t)])
    trace_cov = spd_inverse(dn_map(double, boundary))
    draws = sample(double, points, rng)[:, boundary]
    draws = np.vstack([np.zeros(2 * t), draws])
    law = boundary_reference(slab)
    phi_in, phi_out = draws[:, :t], draws[:, t:]
    lhs = 2.0 * amplitude_kernel(slab, phi_in, phi_out) + law.logpdf(phi_in) + law.logpdf(phi_out)
    rhs = -0.5 * logdet_spd(double.matrix) + gaussian_logpdf(draws, trace_cov)
    gap = np.abs(lhs - rhs)
    return {
        "check": "amplitude_density",
        "max_error": float(gap.max()),
        "zero_point_error": float(gap[0]),
        "bfk_error": bfk_check(double, boundary)["max_error"],
        "points": points,
    }


def factorization_check(slab: CylinderSlab, rng: RngStream, points: int = 200) -> dict:
    """Free kernel against the product of per-mode one-site kernels, plus the trace factorization."""
    if slab.interacting:
        raise InvalidInputError("factorization_check needs a free slab")
    t = slab.n_transverse
    basis, _ = fourier_basis(t)
    draws = rng.generator().standard_normal((points, 2 * t))
    phi_in, phi_out = draws[:, :t], draws[:, t:]
    full = amplitude_kernel(slab, phi_in, phi_out, reference=np.zeros((2 * t, 2 * t)))
    xi_in, xi_out = phi_in @ basis, phi_out @ basis
    product = np.zeros(points)
    logdet_modes = 0.0
    for k, mode in mode_amplitudes(slab):
        product += amplitude_kernel(mode, xi_in[:, [k]], xi_out[:, [k]], reference=np.zeros((2, 2)))
        logdet_modes += logdet_spd(glued_torus(mode, 2).matrix)
    logdet_full = logdet_spd(glued_torus(slab, 2).matrix)
    kernel_error = float(np.abs(full - product).max())
    trace_error = abs(logdet_full - logdet_modes) / max(abs(logdet_full), 1.0)
    return {
        "check": "factorization",
        "kernel_error": kernel_error,
        "trace_error": trace_error,
        "max_error": max(kernel_error, trace_error),
    }


# ---------------------------------------------------------------------------
# spectrum and Gibbs states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AmplitudeSpectrum:
    log_lambda0: float
    lambda1_ratio: float
    alpha: float
    ground: np.ndarray

    def summary(self) -> dict:
        return {
            "log_lambda0": self.log_lambda0,
            "lambda1_ratio": self.lambda1_ratio,
            "alpha": self.alpha,
            "ground_min": float(self.ground.min()),
        }


def spectral_report(u: AmplitudeOperator) -> AmplitudeSpectrum:
    if not u.symmetric:
        raise InvalidInputError("spectral data needs a reflection-symmetric amplitude")
    lam0, ground, lam1 = power_pair(u.matrix)
    return AmplitudeSpectrum(u.log_scale + math.log(lam0), lam1 / lam0, abs(lam1) / lam0, ground)


def _grid_observable(u: AmplitudeOperator, observable) -> np.ndarray:
    values = observable(u.grid.points) if callable(observable) else np.asarray(observable, dtype=float)
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size != u.grid.size:
        raise InvalidInputError(f"observable has {values.size} values, grid has {u.grid.size}")
    return values


def gibbs_ratio(u: AmplitudeOperator, observable, n: int, lag: int = 0) -> dict:
    """tr(U^{n-lag} F) / tr(U^n) and its limit <ground, F ground> / lambda0^lag, with the alpha^{n-lag} bound."""
    if lag < 0 or n < max(lag, 1):
        raise InvalidInputError("gibbs_ratio needs 0 <= lag <= n and n >= 1")
    f = _grid_observable(u, observable)
    values, vectors = u.eigen
    r = values / values[0]
    f_hat = np.einsum("ij,i,ij->j", vectors, f, vectors)
    lam0_log = u.log_scale + math.log(values[0])
    finite = float(np.sum(r ** (n - lag) * f_hat) / np.sum(r**n)) * math.exp(-lag * lam0_log)
    limit = float(f_hat[0]) * math.exp(-lag * lam0_log)
    alpha = float(np.abs(r[1:]).max()) if r.size > 1 else 0.0
    numerator = float(np.sum(np.abs(f_hat[1:])) + abs(f_hat[0]) * np.sum(np.abs(r[1:]) ** lag))
    denominator = 1.0 - float(np.sum(np.abs(r[1:]) ** n))
    bound = math.exp(-lag * lam0_log) * alpha ** (n - lag) * numerator / denominator if denominator > 0 else float("inf")
    return {"n": n, "lag": lag, "finite": finite, "limit": limit, "error": abs(finite - limit), "bound": bound}


def spectral_suite(
    u: AmplitudeOperator,
    n_list: Sequence[int] = (1, 2, 4, 8, 16, 32),
    observable: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    k_max: int = 20,
) -> dict:
    report = spectral_report(u)
    values, vectors = u.eigen
    r = values / values[0]
    dim = values.size
    free_energy = []
    for n in n_list:
        per_site = log_trace(u, n) / n
        # |log(1 + x)| <= |x| / (1 - |x|) with |x| <= (dim - 1) alpha^n
        tail = (dim - 1) * report.alpha**n
        free_energy.append({
            "n": int(n),
            "free_energy": per_site,
            "error": abs(per_site - report.log_lambda0),
            "bound": tail / (n * (1.0 - tail)) if tail < 1.0 else float("inf"),
        })
    observable = observable or (lambda points: np.tanh(points[:, 0]))
    f = _grid_observable(u, observable)
    f_hat = vectors.T @ f
    scale = float(np.linalg.norm(f) ** 2)
    mixing = []
    for k in range(1, k_max + 1):
        value = abs(float(np.sum(f_hat * r**k * f_hat)) - f_hat[0] ** 2)
        mixing.append({"k": k, "value": value, "bound": report.alpha**k * scale + 1e-10})
    gibbs = [gibbs_ratio(u, observable, n, 1) for n in n_list if n >= 1]
    return {
        "spectrum": report.summary(),
        "ground_positive": bool(report.ground.min() > 0),
        "free_energy": free_energy,
        "mixing": mixing,
        "gibbs": gibbs,
    }
