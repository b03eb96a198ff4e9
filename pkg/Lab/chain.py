"""Circular spin chain: kernels, transfer matrices, partition functions and Gibbs states.

The chain weight is exp(-sum (s(i+1) - s(i))^2 - sum P(s(i))) on a cycle of n
sites. Splitting P half and half between neighbouring bonds gives the symmetric
kernel K(x, y) = exp(-(x - y)^2 - (P(x) + P(y)) / 2), and Z(n) = tr T^n.
On a quadrature grid T is the symmetric Nystrom matrix sqrt(w_i) K(x_i, x_j) sqrt(w_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from numerics import (
    InvalidInputError,
    QuadratureGrid,
    hermite_grid_spanning,
    power_pair,
    sym_eigen,
)
from polynomial import InvalidInteractionError, Polynomial

# (1/2) log(2/pi): per-site factor between the raw Lebesgue measure and the
# normalized determinant convention of the Gaussian benchmark.
NORMALIZATION_PER_SITE = 0.5 * math.log(2.0 / math.pi)

GridFunction = Union[Sequence[float], np.ndarray, Callable[[np.ndarray], np.ndarray]]


class OutOfDomainError(ValueError):
    """Raised when an endpoint lies outside the quadrature grid hull."""


@dataclass(frozen=True, eq=False)
class TransferOperator:
    grid: QuadratureGrid
    matrix: np.ndarray
    polynomial: Polynomial

    def kernel(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p = self.polynomial
        return np.exp(-((x - y) ** 2) - 0.5 * (p(x) + p(y)))

    @cached_property
    def eigen(self) -> Tuple[np.ndarray, np.ndarray]:
        values, vectors = sym_eigen(self.matrix)
        if vectors[:, 0].sum() < 0:
            vectors[:, 0] = -vectors[:, 0]
        return values, vectors

    def scaled(self, factor: float) -> "TransferOperator":
        """Operator for the kernel factor*K (the polynomial shifts by -log factor)."""
        shift = Polynomial((-math.log(factor),))
        return TransferOperator(self.grid, factor * self.matrix, self.polynomial + shift)


@dataclass(frozen=True, eq=False)
class SpectralReport:
    lambda0: float
    lambda1: float
    alpha: float
    ground: np.ndarray

    def summary(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "alpha": self.alpha,
            "log_lambda0": math.log(self.lambda0),
            "ground_min": float(self.ground.min()),
        }


def default_grid(p: Polynomial, order: Optional[int] = None) -> QuadratureGrid:
    """Gauss-Hermite grid wide enough that exp(-P/2) is negligible at the hull."""
    order = order or config.CHAIN_ORDER
    if p.degree == 0:
        return hermite_grid_spanning(order, config.CHAIN_HALF_WIDTH_FREE)
    floor = p.minimum()
    half_width = 0.5
    while half_width < config.CHAIN_MAX_HALF_WIDTH:
        if min(p(half_width), p(-half_width)) - floor >= config.CHAIN_TAIL_ACTION:
            break
        half_width *= 1.1
    return hermite_grid_spanning(order, min(half_width, config.CHAIN_MAX_HALF_WIDTH))


def build_transfer(p: Polynomial, grid: Optional[QuadratureGrid] = None) -> TransferOperator:
    p.require_bounded_below()
    grid = grid or default_grid(p)
    x = grid.nodes
    root_w = np.sqrt(grid.weights)
    half_p = 0.5 * p(x)
    kernel = np.exp(-((x[:, None] - x[None, :]) ** 2) - half_p[:, None] - half_p[None, :])
    matrix = root_w[:, None] * kernel * root_w[None, :]
    matrix = 0.5 * (matrix + matrix.T)
    if not np.all(np.isfinite(matrix)) or matrix.min() <= 0.0:
        raise InvalidInteractionError(
            "kernel under- or overflows on this grid; use a narrower grid or rescale P"
        )
    return TransferOperator(grid, matrix, p)


# ---------------------------------------------------------------------------
# partition functions
# ---------------------------------------------------------------------------


def _check_n(n: int) -> None:
    if int(n) != n or n < 1:
        raise InvalidInputError(f"n must be a positive integer, got {n!r}")


def log_partition(t: TransferOperator, n: int) -> float:
    """log tr(T^n) from the eigenvalues, stable for large n."""
    _check_n(n)
    values, _ = t.eigen
    top = values[0]
    ratios = values / top
    return float(n * math.log(top) + math.log(np.sum(ratios**n)))


def partition_function(t: TransferOperator, n: int) -> float:
    return float(math.exp(log_partition(t, n)))


def normalized_log_partition(t: TransferOperator, n: int) -> float:
    return log_partition(t, n) + n * NORMALIZATION_PER_SITE


def _kernel_rows(t: TransferOperator, x: float) -> np.ndarray:
    # sqrt(w_j) K(x, x_j): the kernel leg from an off-grid point into the symmetrized basis
    return t.kernel(x, t.grid.nodes) * np.sqrt(t.grid.weights)


def conditioned_kernel(t: TransferOperator, n: int, sigma_in: float, sigma_out: float) -> float:
    """K_n(sigma_out, sigma_in): the kernel chain with n - 1 interior sites integrated out."""
    _check_n(n)
    for name, value in (("sigma_in", sigma_in), ("sigma_out", sigma_out)):
        if not t.grid.contains(value):
            raise OutOfDomainError(
                f"{name}={value} outside grid hull [{t.grid.nodes[0]:.4g}, {t.grid.nodes[-1]:.4g}]"
            )
    if n == 1:
        return float(t.kernel(sigma_out, sigma_in))
    left = _kernel_rows(t, sigma_out)
    right = _kernel_rows(t, sigma_in)
    for _ in range(n - 2):
        right = t.matrix @ right
    return float(left @ right)


def free_conditioned_kernel(n: int, x: float, y: float) -> float:
    """Closed form of K_n for P = 0: sqrt(pi^(n-1) / n) exp(-(x - y)^2 / n)."""
    _check_n(n)
    return math.sqrt(math.pi ** (n - 1) / n) * math.exp(-((x - y) ** 2) / n)


def chapman_kolmogorov_residual(
    t: TransferOperator, n1: int, n2: int, z_in: float, z_out: float
) -> float:
    """Relative gap between the quadrature of K_n2 * K_n1 over the middle site and K_(n1+n2)."""
    nodes, weights = t.grid.nodes, t.grid.weights
    first = np.array([conditioned_kernel(t, n1, z_in, s) for s in nodes])
    second = np.array([conditioned_kernel(t, n2, s, z_out) for s in nodes])
    glued = float(np.sum(weights * second * first))
    direct = conditioned_kernel(t, n1 + n2, z_in, z_out)
    return abs(glued - direct) / abs(direct)


def trace_three_ways(t: TransferOperator, n: int) -> Tuple[float, float, float]:
    """tr(T^n) from eigenvalue powers, repeated multiplication and the K_n diagonal."""
    _check_n(n)
    by_eigen = partition_function(t, n)
    power = np.eye(t.grid.size)
    for _ in range(n):
        power = power @ t.matrix
    by_product = float(np.trace(power))
    nodes, weights = t.grid.nodes, t.grid.weights
    by_diagonal = float(
        sum(w * conditioned_kernel(t, n, x, x) for x, w in zip(nodes, weights))
    )
    return by_eigen, by_product, by_diagonal


# ---------------------------------------------------------------------------
# spectrum, free energy, Gibbs states
# ---------------------------------------------------------------------------


def spectral_report(t: TransferOperator) -> SpectralReport:
    lam0, ground, lam1 = power_pair(t.matrix)
    alpha = abs(lam1) / lam0
    return SpectralReport(lambda0=lam0, lambda1=lam1, alpha=alpha, ground=ground)


def free_energy(t: TransferOperator, n_list: Sequence[int]) -> List[dict]:
    if not n_list:
        raise InvalidInputError("n_list must not be empty")
    values, _ = t.eigen
    log_lambda0 = math.log(values[0])
    alpha = float(np.abs(values[1:]).max() / values[0]) if values.size > 1 else 0.0
    constant = math.log(t.grid.size)
    rows = []
    for n in n_list:
        log_z = log_partition(t, n)
        rows.append(
            {
                "n": int(n),
                "logZ": log_z,
                "free_energy": log_z / n,
                "log_lambda0": log_lambda0,
                "alpha": alpha,
                "error": abs(log_z / n - log_lambda0),
                "bound": constant / n,
            }
        )
    return rows


def grid_values(t: TransferOperator, f: GridFunction) -> np.ndarray:
    values = f(t.grid.nodes) if callable(f) else np.asarray(f, dtype=float)
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size != t.grid.size:
        raise InvalidInputError(f"grid function has {values.size} values, grid has {t.grid.size}")
    return values


def _normalized_power(t: TransferOperator, power: int) -> np.ndarray:
    values, vectors = t.eigen
    mu = values / values[0]
    return (vectors * mu**power) @ vectors.T


def gibbs_expectation(
    t: TransferOperator,
    insertions: Sequence[Tuple[int, GridFunction]],
    n: Optional[int] = None,
) -> float:
    """Expectation of the product of F_k(s(i_k)); n=None is the thermodynamic limit."""
    sites = [int(site) for site, _ in insertions]
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise InvalidInputError(f"insertion sites must be strictly increasing, got {sites}")
    if len(sites) > config.GIBBS_MAX_SITES:
        raise InvalidInputError(f"at most {config.GIBBS_MAX_SITES} insertions are supported")
    if sites and sites[0] < 1:
        raise InvalidInputError("insertion sites start at 1")
    observables = [grid_values(t, f) for _, f in insertions]

    if n is None:
        _, vectors = t.eigen
        ground = vectors[:, 0]
        v = ground.copy()
        previous = sites[0] if sites else 1
        for site, f in zip(sites, observables):
            v = _normalized_power(t, site - previous) @ v
            v = f * v
            previous = site
        return float(ground @ v)

    _check_n(n)
    if sites and sites[-1] > n:
        raise InvalidInputError(f"insertion site {sites[-1]} exceeds n={n}")
    if not sites:
        return 1.0
    values, _ = t.eigen
    mu = values / values[0]
    # cyclic order: F_1 T^(i_2 - i_1) F_2 ... F_k T^(n - i_k + i_1)
    product = np.diag(observables[0])
    for j in range(1, len(sites)):
        product = product @ _normalized_power(t, sites[j] - sites[j - 1]) @ np.diag(observables[j])
    product = product @ _normalized_power(t, n - sites[-1] + sites[0])
    return float(np.trace(product) / np.sum(mu**n))


def mixing_check(
    t: TransferOperator, f: GridFunction, g: GridFunction, k_max: int, alpha: Optional[float] = None
) -> List[dict]:
    """|<f, T^k g>/lambda0^k - <f, ground><ground, g>| against alpha^k ||f|| ||g||."""
    if k_max < 1:
        raise InvalidInputError("k_max must be at least 1")
    fv, gv = grid_values(t, f), grid_values(t, g)
    values, vectors = t.eigen
    if alpha is None:
        alpha = spectral_report(t).alpha
    mu = values / values[0]
    f_hat, g_hat = vectors.T @ fv, vectors.T @ gv
    limit = f_hat[0] * g_hat[0]
    scale = float(np.linalg.norm(fv) * np.linalg.norm(gv))
    rows = []
    for k in range(1, k_max + 1):
        value = abs(float(np.sum(f_hat * mu**k * g_hat)) - limit)
        bound = alpha**k * scale + 1e-10
        rows.append({"k": k, "value": value, "bound": bound, "ok": value <= bound})
    return rows


# ---------------------------------------------------------------------------
# Gaussian benchmark
# ---------------------------------------------------------------------------


def benchmark_polynomial(m: float) -> Polynomial:
    """P(s) = 2 m^2 s^2: makes the chain the discrete massive Gaussian free field.

    With the kernel exp(-(x - y)^2 - (P(x) + P(y)) / 2) the chain action is
    2 x^T A_n x, A_n having symbol 1 + m^2 - cos; P = m^2 s^2 would give
    symbol 1 + m^2 / 2 - cos instead.
    """
    return Polynomial.interaction((0.0, 0.0, 2.0 * m * m))


def benchmark_log_partition(m: float, n: int) -> float:
    """Normalized convention: log det(A_n)^(-1/2), A_n circulant with symbol 1 + m^2 - cos(2 pi k / n)."""
    _check_n(n)
    k = np.arange(n)
    return float(-0.5 * np.sum(np.log(1.0 + m * m - np.cos(2.0 * np.pi * k / n))))


def benchmark_limit(m: float) -> float:
    a = 1.0 + m * m
    return -0.5 * math.log((a + math.sqrt(a * a - 1.0)) / 2.0)


def gaussian_benchmark(m: float, n_list: Sequence[int], t: Optional[TransferOperator] = None) -> List[dict]:
    """Circulant and transfer-matrix values of log Z(n) in both measure conventions."""
    t = t or build_transfer(benchmark_polynomial(m))
    limit = benchmark_limit(m)
    rows = []
    for n in n_list:
        exact = benchmark_log_partition(m, n)
        transfer_raw = log_partition(t, n)
        rows.append(
            {
                "n": int(n),
                "circulant_normalized": exact,
                "circulant_raw": exact - n * NORMALIZATION_PER_SITE,
                "transfer_raw": transfer_raw,
                "transfer_normalized": transfer_raw + n * NORMALIZATION_PER_SITE,
                "free_energy_normalized": (transfer_raw / n) + NORMALIZATION_PER_SITE,
                "limit": limit,
            }
        )
    return rows
