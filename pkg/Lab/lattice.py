"""Gaussian free field on weighted graphs.

Q = L_w + m^2 diag(mu) is the precision matrix of the field: L_w the weighted
graph Laplacian, mu the vertex measure. On a 2D torus of spacing a the edge
weights are 1 and mu = a^2; on a cycle the weights are 1/a and mu = a, so Q
is the finite-difference version of the Helmholtz form in either dimension.
Every identity in this module (Markov decomposition, Bayes, Dirichlet-to-Neumann,
BFK, reflection positivity) is exact linear algebra on Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

import config
from numerics import (
    ContractViolationError,
    InvalidInputError,
    RngStream,
    as_symmetric,
    cholesky,
    complement,
    index_set,
    logdet_spd,
    schur_complement,
    spd_inverse,
    spd_solve,
    sym_eigen,
)

GRAPH_KINDS = ("torus", "cycle", "double", "explicit")


@dataclass(frozen=True)
class VertexSet:
    indices: Tuple[int, ...]

    @classmethod
    def of(cls, indices: Iterable[int]) -> "VertexSet":
        return cls(tuple(sorted(int(i) for i in indices)))

    def complement(self, n: int) -> np.ndarray:
        return complement(np.asarray(self.indices, dtype=int), n)


SigmaLike = Union[VertexSet, Sequence[int], np.ndarray]


def vertex_indices(sigma: SigmaLike, n: int, name: str = "sigma") -> np.ndarray:
    raw = sigma.indices if isinstance(sigma, VertexSet) else sigma
    return index_set(raw, n, name=name)


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """Weighted graph with vertex measures. Parallel edges add up; self-loops are dropped."""

    n_vertices: int
    edges: Tuple[Tuple[int, int, float], ...]
    vertex_measure: np.ndarray
    kind: str = "explicit"
    shape: Tuple[int, ...] = ()
    spacing: float = 1.0
    involution: Optional[np.ndarray] = None
    fixed: Optional[np.ndarray] = None
    region: Optional[np.ndarray] = None
    allow_disconnected: bool = False

    def __post_init__(self) -> None:
        n = int(self.n_vertices)
        if n < 1:
            raise InvalidInputError("graph needs at least one vertex")
        if self.kind not in GRAPH_KINDS:
            raise InvalidInputError(f"unknown graph kind {self.kind!r}")
        merged: Dict[Tuple[int, int], float] = {}
        for i, j, w in self.edges:
            i, j, w = int(i), int(j), float(w)
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidInputError(f"edge ({i}, {j}) outside 0..{n - 1}")
            if not w > 0 or not math.isfinite(w):
                raise InvalidInputError(f"edge ({i}, {j}) needs a positive finite weight, got {w}")
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            merged[key] = merged.get(key, 0.0) + w
        measure = np.asarray(self.vertex_measure, dtype=float).reshape(-1)
        if measure.size != n or not np.all(measure > 0) or not np.all(np.isfinite(measure)):
            raise InvalidInputError("vertex_measure needs one positive finite value per vertex")
        object.__setattr__(self, "edges", tuple((i, j, w) for (i, j), w in sorted(merged.items())))
        object.__setattr__(self, "vertex_measure", measure)
        if not self.allow_disconnected and self.component_count > 1:
            raise InvalidInputError(f"graph is disconnected ({self.component_count} components)")

    # -- builders ---------------------------------------------------------

    @classmethod
    def torus(cls, n1: int, n2: int, spacing: float = 1.0) -> "LatticeGraph":
        if n1 < 1 or n2 < 1 or not spacing > 0:
            raise InvalidInputError("torus needs n1, n2 >= 1 and positive spacing")
        edges = []
        for i in range(n1):
            for j in range(n2):
                v = i * n2 + j
                edges.append((v, ((i + 1) % n1) * n2 + j, 1.0))
                edges.append((v, i * n2 + (j + 1) % n2, 1.0))
        measure = np.full(n1 * n2, spacing * spacing)
        return cls(n1 * n2, tuple(edges), measure, "torus", (n1, n2), spacing)

    @classmethod
    def cycle(cls, n: int, spacing: float = 1.0) -> "LatticeGraph":
        if n < 1 or not spacing > 0:
            raise InvalidInputError("cycle needs n >= 1 and positive spacing")
        edges = tuple((i, (i + 1) % n, 1.0 / spacing) for i in range(n))
        return cls(n, edges, np.full(n, spacing), "cycle", (n,), spacing)

    @classmethod
    def reflection_double(cls, half_columns: int, rows: int, spacing: float = 1.0) -> "LatticeGraph":
        """Columns -h..h times a periodic ring of rows; reflection in column 0 is the involution."""
        if half_columns < 1 or rows < 1:
            raise InvalidInputError("reflection double needs half_columns >= 1 and rows >= 1")
        width = 2 * half_columns + 1

        def vertex(col: int, row: int) -> int:
            return (col + half_columns) * rows + row % rows

        edges = []
        for col in range(-half_columns, half_columns + 1):
            for row in range(rows):
                if rows > 1:
                    edges.append((vertex(col, row), vertex(col, row + 1), 1.0))
                if col < half_columns:
                    edges.append((vertex(col, row), vertex(col + 1, row), 1.0))
        involution = np.array(
            [vertex(-col, row) for col in range(-half_columns, half_columns + 1) for row in range(rows)]
        )
        fixed = np.array([vertex(0, row) for row in range(rows)])
        region = np.array([vertex(c, r) for c in range(-half_columns, 0) for r in range(rows)])
        measure = np.full(width * rows, spacing * spacing)
        return cls(
            width * rows, tuple(edges), measure, "double", (width, rows), spacing,
            involution=involution, fixed=fixed, region=np.sort(region),
        )

    @classmethod
    def from_edges(
        cls,
        n_vertices: int,
        edges: Sequence[Tuple[int, int, float]],
        vertex_measure: Union[float, Sequence[float]] = 1.0,
        *,
        allow_disconnected: bool = False,
    ) -> "LatticeGraph":
        measure = np.broadcast_to(np.asarray(vertex_measure, dtype=float), (n_vertices,)).copy()
        return cls(
            n_vertices, tuple(tuple(e) for e in edges), measure, "explicit",
            allow_disconnected=allow_disconnected,
        )

    # -- structure --------------------------------------------------------

    def _adjacency(self, keep: Optional[np.ndarray] = None):
        n = self.n_vertices
        rows = [i for i, j, _ in self.edges]
        cols = [j for i, j, _ in self.edges]
        adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
        if keep is not None:
            adjacency = adjacency[keep][:, keep]
        return adjacency

    @cached_property
    def component_count(self) -> int:
        count, _ = connected_components(self._adjacency(), directed=False)
        return int(count)

    def components_without(self, removed: np.ndarray) -> List[np.ndarray]:
        """Connected components of the graph with `removed` vertices deleted, as vertex arrays."""
        keep = complement(np.asarray(removed, dtype=int), self.n_vertices)
        if keep.size == 0:
            return []
        _, labels = connected_components(self._adjacency(keep), directed=False)
        return [keep[labels == label] for label in range(labels.max() + 1)]

    def laplacian(self) -> np.ndarray:
        n = self.n_vertices
        lap = np.zeros((n, n))
        for i, j, w in self.edges:
            lap[i, i] += w
            lap[j, j] += w
            lap[i, j] -= w
            lap[j, i] -= w
        return lap

    def torus_row(self, i: int) -> np.ndarray:
        """Vertices of the horizontal cycle i of a torus."""
        if self.kind != "torus":
            raise InvalidInputError("torus_row needs a torus graph")
        n1, n2 = self.shape
        return np.arange(i % n1 * n2, i % n1 * n2 + n2)


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    covariance: np.ndarray
    mean: np.ndarray

    def __post_init__(self) -> None:
        cov = as_symmetric(self.covariance, name="covariance")
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if mean.size != cov.shape[0]:
            raise InvalidInputError("mean and covariance dimensions differ")
        if cov.size:
            lowest = float(np.linalg.eigvalsh(cov).min())
            if lowest < -config.PSD_TOL * max(float(np.abs(cov).max()), 1e-300):
                raise ContractViolationError(f"covariance is not PSD (min eigenvalue {lowest:.3e})")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def centered(cls, covariance) -> "GaussianLaw":
        covariance = np.asarray(covariance, dtype=float)
        return cls(covariance, np.zeros(covariance.shape[0]))

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    def logpdf(self, x) -> np.ndarray:
        """Log density at the rows of x (needs a positive definite covariance)."""
        return gaussian_logpdf(x, self.covariance, self.mean)


def gaussian_logpdf(x, covariance: np.ndarray, mean: Optional[np.ndarray] = None) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if mean is not None:
        x = x - mean
    lower = cholesky(covariance)
    z = solve_triangular(lower, x.T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(lower)))
    dim = covariance.shape[0]
    return -0.5 * (np.sum(z * z, axis=0) + logdet + dim * math.log(2.0 * math.pi))


@dataclass(frozen=True, eq=False)
class PrecisionOperator:
    graph: LatticeGraph
    mass: float

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise InvalidInputError(f"mass must be positive, got {self.mass}")

    @property
    def n(self) -> int:
        return self.graph.n_vertices

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.graph.laplacian() + self.mass**2 * np.diag(self.graph.vertex_measure)

    @cached_property
    def covariance(self) -> np.ndarray:
        return spd_inverse(self.matrix)

    @cached_property
    def factor(self) -> np.ndarray:
        return cholesky(self.matrix)


# ---------------------------------------------------------------------------
# Green function and sampling
# ---------------------------------------------------------------------------


def green(q: PrecisionOperator) -> GaussianLaw:
    return GaussianLaw.centered(q.covariance)


def sample(q: PrecisionOperator, count: int, rng: RngStream) -> np.ndarray:
    """count x n array of independent draws with covariance Q^{-1}."""
    if count < 1:
        raise InvalidInputError("count must be at least 1")
    generator = rng.generator()
    upper = q.factor.T
    batches = []
    remaining = count
    while remaining > 0:
        size = min(remaining, config.MC_BATCH)
        z = generator.standard_normal((q.n, size))
        # Q = L L^T, so L^T phi = z has covariance Q^{-1}
        batches.append(solve_triangular(upper, z, lower=False).T)
        remaining -= size
    return np.vstack(batches)


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann, harmonic extension, Markov decomposition
# ---------------------------------------------------------------------------


def dn_map(q: PrecisionOperator, sigma: SigmaLike) -> np.ndarray:
    return schur_complement(q.matrix, vertex_indices(sigma, q.n))


def poisson_matrix(q: PrecisionOperator, sigma: SigmaLike) -> np.ndarray:
    """n x |sigma| matrix of the harmonic extension: identity on sigma, Q u = 0 off sigma."""
    s = vertex_indices(sigma, q.n)
    b = complement(s, q.n)
    extension = np.zeros((q.n, s.size))
    extension[s, np.arange(s.size)] = 1.0
    if b.size and s.size:
        extension[b] = -spd_solve(q.matrix[np.ix_(b, b)], q.matrix[np.ix_(b, s)])
    return extension


def poisson_extend(q: PrecisionOperator, sigma: SigmaLike, f) -> np.ndarray:
    s = vertex_indices(sigma, q.n)
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size != s.size:
        raise InvalidInputError(f"boundary data has {f.size} values, sigma has {s.size}")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("boundary data must be finite")
    return poisson_matrix(q, s) @ f


def dirichlet_covariance(q: PrecisionOperator, sigma: SigmaLike) -> np.ndarray:
    """(Q_BB)^{-1} on the complement B of sigma, embedded with zeros on sigma."""
    s = vertex_indices(sigma, q.n)
    b = complement(s, q.n)
    embedded = np.zeros((q.n, q.n))
    if b.size:
        embedded[np.ix_(b, b)] = spd_inverse(q.matrix[np.ix_(b, b)])
    return embedded


@dataclass(frozen=True, eq=False)
class MarkovDecomposition:
    sigma: np.ndarray
    poisson: np.ndarray
    dn: np.ndarray
    sigma_part: GaussianLaw
    dirichlet_part: GaussianLaw

    def split(self, phi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(PI phi|sigma, phi - PI phi|sigma) for each row of phi."""
        phi = np.atleast_2d(phi)
        harmonic = phi[:, self.sigma] @ self.poisson.T
        return harmonic, phi - harmonic


def markov_decompose(q: PrecisionOperator, sigma: SigmaLike) -> MarkovDecomposition:
    s = vertex_indices(sigma, q.n)
    extension = poisson_matrix(q, s)
    dn = dn_map(q, s)
    if s.size:
        sigma_cov = extension @ spd_inverse(dn) @ extension.T
    else:
        sigma_cov = np.zeros((q.n, q.n))
    return MarkovDecomposition(
        sigma=s,
        poisson=extension,
        dn=dn,
        sigma_part=GaussianLaw.centered(0.5 * (sigma_cov + sigma_cov.T)),
        dirichlet_part=GaussianLaw.centered(dirichlet_covariance(q, s)),
    )


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------


def markov_check(q: PrecisionOperator, sigma: SigmaLike) -> dict:
    parts = markov_decompose(q, sigma)
    total = parts.sigma_part.covariance + parts.dirichlet_part.covariance
    error = float(np.abs(total - q.covariance).max())
    return {"check": "markov", "max_error": error / float(np.abs(q.covariance).max())}


def dn_inverse_check(q: PrecisionOperator, sigma: SigmaLike) -> dict:
    s = vertex_indices(sigma, q.n)
    product = dn_map(q, s) @ q.covariance[np.ix_(s, s)]
    return {"check": "dn_inverse", "max_error": float(np.linalg.norm(product - np.eye(s.size), 2))}


def bfk_check(q: PrecisionOperator, sigma: SigmaLike) -> dict:
    """log det Q = log det Q_BB + log det DN (Schur determinant identity)."""
    s = vertex_indices(sigma, q.n)
    b = complement(s, q.n)
    full = logdet_spd(q.matrix)
    interior = logdet_spd(q.matrix[np.ix_(b, b)]) if b.size else 0.0
    boundary = logdet_spd(dn_map(q, s)) if s.size else 0.0
    return {
        "check": "bfk",
        "logdet_q": full,
        "logdet_dirichlet": interior,
        "logdet_dn": boundary,
        "max_error": abs(full - interior - boundary) / max(abs(full), 1.0),
    }


def dissection_check(q: PrecisionOperator, sigma: SigmaLike) -> dict:
    """BFK with the Dirichlet determinant split over the components left after removing sigma."""
    s = vertex_indices(sigma, q.n)
    parts = q.graph.components_without(s)
    if len(parts) < 2:
        raise InvalidInputError("sigma does not dissect the graph")
    pieces = [logdet_spd(q.matrix[np.ix_(c, c)]) for c in parts]
    full = logdet_spd(q.matrix)
    dn = dn_map(q, s)
    off_diagonal = float(np.abs(dn - np.diag(np.diag(dn))).max()) if s.size > 1 else 0.0
    return {
        "check": "dissection",
        "components": len(parts),
        "dirichlet_logdets": pieces,
        "dn_offdiagonal": off_diagonal,
        "max_error": abs(full - sum(pieces) - logdet_spd(dn)) / max(abs(full), 1.0),
    }


def bayes_check(
    q: PrecisionOperator, s1: SigmaLike, s2: SigmaLike, rng: RngStream, points: Optional[int] = None
) -> dict:
    """Joint trace density of (phi|s1, phi|s2) against both marginal-times-conditional factorizations."""
    a = vertex_indices(s1, q.n, "s1")
    b = vertex_indices(s2, q.n, "s2")
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("s1 and s2 must be nonempty")
    if np.intersect1d(a, b).size:
        raise InvalidInputError("s1 and s2 overlap")
    points = points or config.BAYES_POINTS
    cov = q.covariance
    joint = np.concatenate([a, b])
    joint_cov = cov[np.ix_(joint, joint)]
    x = sample(q, points, rng)[:, joint]
    x1, x2 = x[:, : a.size], x[:, a.size :]

    log_joint = gaussian_logpdf(x, joint_cov)
    transition_21, cond_21 = _conditional_from_precision(q, a, b)
    transition_12, cond_12 = _conditional_from_precision(q, b, a)
    order_12 = gaussian_logpdf(x1, cov[np.ix_(a, a)]) + _conditional_logpdf(x2, x1, transition_21, cond_21)
    order_21 = gaussian_logpdf(x2, cov[np.ix_(b, b)]) + _conditional_logpdf(x1, x2, transition_12, cond_12)

    regression = cov[np.ix_(b, a)] @ spd_inverse(cov[np.ix_(a, a)])
    density_error = float(max(np.abs(log_joint - order_12).max(), np.abs(log_joint - order_21).max()))
    transition_error = float(np.abs(transition_21 - regression).max())
    return {
        "check": "bayes",
        "density_error": density_error,
        "transition_error": transition_error,
        "max_error": max(density_error, transition_error),
        "order_gap": float(np.abs(order_12 - order_21).max()),
        "points": points,
    }


def _conditional_from_precision(q: PrecisionOperator, given: np.ndarray, target: np.ndarray):
    # mean map: harmonic extension from `given` read off on `target`;
    # covariance: inverse Schur complement onto `target` with `given` grounded
    transition = poisson_matrix(q, given)[target]
    rest = complement(given, q.n)
    grounded = q.matrix[np.ix_(rest, rest)]
    keep = np.searchsorted(rest, target)
    cond_cov = spd_inverse(schur_complement(grounded, keep))
    return transition, cond_cov


def _conditional_logpdf(x, given, transition, cond_cov):
    return gaussian_logpdf(x - given @ transition.T, cond_cov)


def rp_check(q: PrecisionOperator) -> dict:
    """Reflection positivity on a symmetric double: C_N - C_D = 2 Pi_+ theta C >= 0 on the region."""
    g = q.graph
    if g.kind != "double" or g.involution is None or g.fixed is None or g.region is None:
        raise InvalidInputError("rp_check needs a double-of-region graph with an involution")
    sigma, region, theta = g.fixed, g.region, g.involution
    cov = q.covariance

    parts = markov_decompose(q, sigma)
    sigma_block = parts.sigma_part.covariance[np.ix_(region, region)]
    markov_error = float(
        np.abs(cov[np.ix_(region, region)] - parts.dirichlet_part.covariance[np.ix_(region, region)] - sigma_block).max()
    )

    # one-sided problem on region + sigma with the sigma self-terms split in half
    half = np.concatenate([region, sigma])
    q_half = q.matrix[np.ix_(half, half)].copy()
    ns = sigma.size
    q_half[-ns:, -ns:] *= 0.5
    local_sigma = np.arange(region.size, half.size)
    dn_one_sided = schur_complement(q_half, local_sigma)
    extension = np.zeros((half.size, ns))
    extension[local_sigma, np.arange(ns)] = 1.0
    extension[: region.size] = -spd_solve(q_half[: region.size, : region.size], q_half[: region.size, -ns:])
    neumann_minus_dirichlet = (extension @ spd_inverse(dn_one_sided) @ extension.T)[: region.size, : region.size]

    reflected = cov[np.ix_(region, theta[region])]
    image_error = float(np.abs(2.0 * reflected - neumann_minus_dirichlet).max())
    lowest = float(sym_eigen(0.5 * (neumann_minus_dirichlet + neumann_minus_dirichlet.T))[0][-1])
    sigma_pairing = float(sym_eigen(cov[np.ix_(sigma, sigma)])[0][-1])
    scale = float(np.abs(cov).max())
    return {
        "check": "rp",
        "markov_error": markov_error / scale,
        "image_error": image_error / scale,
        "min_eigenvalue": lowest / scale,
        "sigma_pairing_min": sigma_pairing,
        "max_error": max(markov_error, image_error, max(-lowest, 0.0)) / scale,
    }


# ---------------------------------------------------------------------------
# quadratic perturbations and trace-law densities
# ---------------------------------------------------------------------------


def quad_perturb(q: PrecisionOperator, v) -> Tuple[float, GaussianLaw]:
    """E[exp(-x^T V x / 2)] = det(I + C^{1/2} V C^{1/2})^{-1/2} and the tilted law N(0, (Q + V)^{-1})."""
    v = as_symmetric(v, name="V")
    if v.shape != q.matrix.shape:
        raise InvalidInputError(f"V has shape {v.shape}, expected {q.matrix.shape}")
    tilted = q.matrix + v
    lower_c = cholesky(q.covariance)
    dressed = np.eye(q.n) + lower_c.T @ v @ lower_c
    z = math.exp(-0.5 * logdet_spd(0.5 * (dressed + dressed.T)))
    return z, GaussianLaw.centered(spd_inverse(tilted))


def quad_perturb_mc(q: PrecisionOperator, v, count: int, rng: RngStream) -> Tuple[float, float]:
    v = as_symmetric(v, name="V")
    phi = sample(q, count, rng)
    weights = np.exp(-0.5 * np.einsum("si,ij,sj->s", phi, v, phi))
    return float(weights.mean()), float(weights.std(ddof=1) / math.sqrt(count))


def random_quad_perturbation(size: int, mass: float, rng: RngStream) -> Tuple[PrecisionOperator, np.ndarray]:
    """A cycle with random edge weights, chords and vertex measure, and a dense symmetric PSD perturbation V."""
    if size < 1:
        raise InvalidInputError("perturbation needs at least one vertex")
    gen = rng.generator()
    edges = [(i, (i + 1) % size, w) for i, w in enumerate(gen.uniform(0.5, 2.0, size))]
    edges += [(i, (i + 2) % size, w) for i, w in enumerate(gen.uniform(0.1, 0.5, size))]
    graph = LatticeGraph.from_edges(size, edges, gen.uniform(0.5, 1.5, size))
    factor = gen.standard_normal((size, size))
    v = 0.3 * factor @ factor.T / size
    return PrecisionOperator(graph, mass), 0.5 * (v + v.T)


def quad_perturb_check(q: PrecisionOperator, v, count: int, rng: RngStream) -> dict:
    """Determinant formula against Monte Carlo, and the tilted covariance against L (I + L^T V L)^{-1} L^T."""
    z, tilted = quad_perturb(q, v)
    mc, stderr = quad_perturb_mc(q, v, count, rng)
    lower_c = cholesky(q.covariance)
    dressed = np.eye(q.n) + lower_c.T @ as_symmetric(v, name="V") @ lower_c
    via_factor = lower_c @ spd_inverse(0.5 * (dressed + dressed.T)) @ lower_c.T
    scale = float(np.abs(tilted.covariance).max())
    return {
        "check": "quad_perturb",
        "z": z,
        "mc": mc,
        "mc_stderr": stderr,
        "sigmas": abs(z - mc) / stderr if stderr else 0.0,
        "max_error": float(np.abs(tilted.covariance - via_factor).max()) / scale,
    }


@dataclass(frozen=True, eq=False)
class TraceLawDensity:
    """Radon-Nikodym density of the trace law N(0, DN^{-1}) on sigma against a reference law."""

    dn: np.ndarray
    reference: GaussianLaw

    @cached_property
    def _log_constant(self) -> float:
        return 0.5 * (logdet_spd(self.reference.covariance) + logdet_spd(self.dn))

    @cached_property
    def _form(self) -> np.ndarray:
        return self.dn - spd_inverse(self.reference.covariance)

    def log(self, phi) -> np.ndarray:
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        return self._log_constant - 0.5 * np.einsum("si,ij,sj->s", phi, self._form, phi)

    def __call__(self, phi) -> np.ndarray:
        return np.exp(self.log(phi))

    def total_mass(self) -> float:
        """Exact integral of the density against the reference law."""
        ref = self.reference.covariance
        root = _sym_sqrt(ref)
        dressed = np.eye(ref.shape[0]) + root @ self._form @ root
        return math.exp(self._log_constant - 0.5 * logdet_spd(0.5 * (dressed + dressed.T)))


def _sym_sqrt(m: np.ndarray) -> np.ndarray:
    values, vectors = sym_eigen(m)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def trace_law_density(q: PrecisionOperator, sigma: SigmaLike, reference: GaussianLaw) -> TraceLawDensity:
    s = vertex_indices(sigma, q.n)
    if reference.dim != s.size:
        raise InvalidInputError(f"reference law has dimension {reference.dim}, sigma has {s.size}")
    cholesky(reference.covariance)
    return TraceLawDensity(dn_map(q, s), reference)


def trace_law_check(q: PrecisionOperator, sigma: SigmaLike) -> dict:
    """The trace-law density integrates to one against a diagonal reference on sigma."""
    s = vertex_indices(sigma, q.n)
    reference = GaussianLaw.centered(np.diag(np.diag(q.covariance[np.ix_(s, s)])))
    density = trace_law_density(q, s, reference)
    return {"check": "trace_law", "total_mass": density.total_mass(), "max_error": abs(density.total_mass() - 1.0)}


# ---------------------------------------------------------------------------
# torus spectra
# ---------------------------------------------------------------------------


def torus_symbol(n1: int, n2: int, spacing: float, mass: float) -> np.ndarray:
    """Eigenvalues of Q on the n1 x n2 torus (unit edge weights, measure spacing^2)."""
    k1 = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n1) / n1)
    k2 = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n2) / n2)
    return k1[:, None] + k2[None, :] + (mass * spacing) ** 2


def torus_tadpole(n1: int, n2: int, spacing: float, mass: float) -> float:
    """Diagonal of Q^{-1} on a torus, from the Fourier symbol."""
    return float(np.mean(1.0 / torus_symbol(n1, n2, spacing, mass)))


def cycle_covariance_symbol(n: int, spacing: float, mass: float) -> np.ndarray:
    """Covariance symbol 1 / (2(1 - cos)/spacing^2 + m^2) on a cycle.

    Q^{-1} of the cycle is circulant(symbol) / spacing, the vertex measure being spacing.
    """
    k = 2.0 * np.pi * np.arange(n) / n
    return 1.0 / (2.0 * (1.0 - np.cos(k)) / spacing**2 + mass**2)


def circulant(symbol: np.ndarray) -> np.ndarray:
    """Real circulant matrix with the given (even) Fourier symbol."""
    first = np.real(np.fft.ifft(symbol))
    n = symbol.size
    return np.array([np.roll(first, i) for i in range(n)])


def tadpole_fit(log_inverse_spacing: Sequence[float], values: Sequence[float]) -> Dict[str, float]:
    """Least-squares c = beta log(1/a) + gamma with R^2."""
    x = np.asarray(log_inverse_spacing, dtype=float)
    y = np.asarray(values, dtype=float)
    design = np.vstack([x, np.ones_like(x)]).T
    (beta, gamma), *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ np.array([beta, gamma])
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return {"beta": float(beta), "gamma": float(gamma), "r2": 1.0 - ss_res / ss_tot if ss_tot else 1.0}
