"""Hermite polynomials, Wick ordering and Gaussian pairing sums.

Hermite polynomials are the probabilists' ones, h_{n+1} = x h_n - n h_{n-1},
with generating function exp(z x - z^2/2). :x^n:_c = c^{n/2} h_n(x / sqrt c) is
the Wick power at variance c; it obeys the same recurrence with n replaced by
n c, which is how it is evaluated here (c = 0 gives the plain monomial).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e

import config
from numerics import InvalidInputError, RngStream
from polynomial import Polynomial

Pair = Tuple[int, int]


def _check_order(n: int) -> int:
    if int(n) != n or n < 0:
        raise InvalidInputError(f"order must be a nonnegative integer, got {n}")
    return int(n)


def hermite(n: int, x):
    """h_n(x) by the three-term recurrence; x may be an array."""
    n = _check_order(n)
    x = np.asarray(x, dtype=float)
    previous, current = np.zeros_like(x), np.ones_like(x)
    for k in range(n):
        previous, current = current, x * current - k * previous
    return current if current.ndim else float(current)


def wick_monomials(n: int, x, c) -> list:
    """[:x^0:_c, ..., :x^n:_c] evaluated elementwise; c broadcasts against x."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    powers = [np.ones(np.broadcast(x, c).shape)]
    if n >= 1:
        powers.append(x * powers[0])
    for k in range(1, n):
        powers.append(x * powers[k] - k * c * powers[k - 1])
    return powers


@dataclass(frozen=True, eq=False)
class WickPolynomial:
    base: Polynomial
    variance: float
    expanded: Polynomial

    def __call__(self, x):
        return self.expanded(x)

    def minimum(self) -> float:
        return self.expanded.minimum()


def wick_power(n: int, c: float) -> WickPolynomial:
    n = _check_order(n)
    if not c >= 0:
        raise InvalidInputError(f"variance must be nonnegative, got {c}")
    coefficients = np.zeros(n + 1)
    for j in range(n // 2 + 1):
        coefficients[n - 2 * j] = (
            (-1) ** j * math.factorial(n) / (math.factorial(n - 2 * j) * math.factorial(j) * 2**j) * c**j
        )
    return WickPolynomial(Polynomial.monomial(n), float(c), Polynomial(tuple(coefficients)))


def wick_order(p: Polynomial, c: float) -> WickPolynomial:
    """:P:_c = sum_k a_k :x^k:_c as a polynomial in x."""
    total = Polynomial((0.0,))
    for k, a in p.terms():
        total = total + wick_power(k, c).expanded.scaled(a)
    return WickPolynomial(p, float(c), total)


def hermite_lower_bound(n: int) -> float:
    """b_n = -min h_n for even n, so that :x^n:_c >= -b_n c^{n/2}."""
    n = _check_order(n)
    if n % 2:
        raise InvalidInputError("Hermite lower bound needs an even order")
    coefficients = hermite_e.herme2poly([0.0] * n + [1.0])
    return -Polynomial(tuple(coefficients)).minimum()


def wick_evaluate(p: Polynomial, variances, x) -> np.ndarray:
    """:P:_{c_v}(x_v) per vertex; x is (n,) or (samples, n), variances is (n,)."""
    x = np.asarray(x, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if variances.shape[-1:] != x.shape[-1:]:
        raise InvalidInputError(f"{variances.shape[-1]} variances for fields of width {x.shape[-1]}")
    if np.any(variances < 0):
        raise InvalidInputError("variances must be nonnegative")
    powers = wick_monomials(p.degree, x, variances)
    return sum(a * powers[k] for k, a in p.terms()) + np.zeros_like(x)


# ---------------------------------------------------------------------------
# pairings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairingDiagram:
    n: int
    pairs: Tuple[Pair, ...]

    def __post_init__(self) -> None:
        seen = [v for pair in self.pairs for v in pair]
        if any(not 0 <= v < self.n for v in seen) or len(set(seen)) != len(seen):
            raise InvalidInputError("pairs must use distinct legs in 0..n-1")

    @property
    def fully_contracted(self) -> bool:
        return 2 * len(self.pairs) == self.n


@lru_cache(maxsize=None)
def matching_count(n: int) -> int:
    """(n-1)!! perfect matchings of n legs; 0 for odd n."""
    if n % 2:
        return 0
    return 1 if n == 0 else (n - 1) * matching_count(n - 2)


def all_matchings(n: int) -> Iterator[PairingDiagram]:
    n = _check_order(n)
    if n > config.MAX_MATCHING_ORDER:
        raise InvalidInputError(
            f"matching enumeration is limited to n <= {config.MAX_MATCHING_ORDER}, got {n}"
        )
    if n % 2:
        return
    for pairs in _matchings(tuple(range(n))):
        yield PairingDiagram(n, pairs)


def _matchings(legs: Tuple[int, ...]) -> Iterator[Tuple[Pair, ...]]:
    if not legs:
        yield ()
        return
    first, rest = legs[0], legs[1:]
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1 :]
        for tail in _matchings(remaining):
            yield ((first, partner),) + tail


def diagram_value(cov, diagram: PairingDiagram, labels: Optional[Sequence[int]] = None) -> float:
    """Product of covariance entries over the pairs; leg i carries variable labels[i]."""
    if not diagram.fully_contracted:
        raise InvalidInputError("only fully contracted diagrams have a value")
    cov = np.asarray(cov, dtype=float)
    labels = list(range(diagram.n)) if labels is None else list(labels)
    if len(labels) != diagram.n:
        raise InvalidInputError(f"{len(labels)} labels for a diagram with {diagram.n} legs")
    value = 1.0
    for a, b in diagram.pairs:
        value *= float(cov[labels[a], labels[b]])
    return value


def isserlis(cov, indices: Sequence[int]) -> float:
    """E[X_{i1} ... X_{in}] for a centered Gaussian vector with covariance cov."""
    cov = np.asarray(cov, dtype=float)
    indices = [int(i) for i in indices]
    if any(not 0 <= i < cov.shape[0] for i in indices):
        raise InvalidInputError(f"indices must lie in 0..{cov.shape[0] - 1}")
    if len(indices) % 2:
        return 0.0
    return float(sum(diagram_value(cov, d, indices) for d in all_matchings(len(indices))))


def diagram_classes(labels: Sequence) -> Dict[Tuple[Tuple, ...], int]:
    """Multiplicity of each contraction pattern when legs carry the given vertex labels."""
    labels = list(labels)
    classes: Counter = Counter()
    for diagram in all_matchings(len(labels)):
        pattern = tuple(sorted(tuple(sorted((labels[a], labels[b]))) for a, b in diagram.pairs))
        classes[pattern] += 1
    return dict(classes)


# ---------------------------------------------------------------------------
# covariances of Wick powers
# ---------------------------------------------------------------------------


def _check_covariance(cxy: float, cx: float, cy: float) -> None:
    if cx < 0 or cy < 0:
        raise InvalidInputError("variances must be nonnegative")
    if abs(cxy) > math.sqrt(cx * cy) * (1.0 + 1e-12):
        raise InvalidInputError(f"|cxy| = {abs(cxy)} exceeds sqrt(cx*cy) = {math.sqrt(cx * cy)}")


def wick_cov(n: int, m: int, cxy: float, cx: float, cy: float) -> float:
    """E[:X^n: :Y^m:] = delta_nm n! cxy^n."""
    n, m = _check_order(n), _check_order(m)
    _check_covariance(cxy, cx, cy)
    return float(math.factorial(n) * cxy**n) if n == m else 0.0


def wick_cov_mc(
    n: int, m: int, cxy: float, cx: float, cy: float, count: int, rng: RngStream
) -> Tuple[float, float]:
    n, m = _check_order(n), _check_order(m)
    _check_covariance(cxy, cx, cy)
    z = rng.generator().standard_normal((2, count))
    sx, sy = math.sqrt(cx), math.sqrt(cy)
    rho = cxy / (sx * sy) if sx * sy > 0 else 0.0
    x = sx * z[0]
    y = sy * (rho * z[0] + math.sqrt(max(1.0 - rho * rho, 0.0)) * z[1])
    product = wick_monomials(n, x, cx)[n] * wick_monomials(m, y, cy)[m]
    return float(product.mean()), float(product.std(ddof=1) / math.sqrt(count))


def hypercontractivity_check(n: int, p: float, count: int, rng: RngStream) -> dict:
    """Monte-Carlo E|:X^n:|^p)^{1/p} against (p-1)^{n/2} ||:X^n:||_2 for X ~ N(0, 1)."""
    n = _check_order(n)
    if not p >= 2:
        raise InvalidInputError(f"hypercontractivity needs p >= 2, got {p}")
    x = rng.generator().standard_normal(count)
    lp_norm = float(np.mean(np.abs(hermite(n, x)) ** p) ** (1.0 / p))
    bound = (p - 1.0) ** (n / 2.0) * math.sqrt(math.factorial(n))
    return {"check": "hypercontractivity", "n": n, "p": p, "lp_norm": lp_norm, "bound": bound, "ok": lp_norm <= bound}


def generating_function_error(x, z, terms: Optional[int] = None) -> float:
    """max |sum_{k<=N} z^k/k! h_k(x) - exp(z x - z^2/2)| over the broadcast grid of x and z."""
    terms = config.GENERATING_TERMS if terms is None else terms
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    powers = wick_monomials(terms, x, 1.0)
    series = sum(z**k / math.factorial(k) * powers[k] for k in range(terms + 1))
    return float(np.abs(series - np.exp(z * x - 0.5 * z * z)).max())


# ---------------------------------------------------------------------------
# change of Wick ordering
# ---------------------------------------------------------------------------


def change_ordering(n: int, delta: float) -> np.ndarray:
    """Coefficients t with :x^n:_{c1} = sum_k t[k] :x^k:_{c2}, delta = c2 - c1."""
    n = _check_order(n)
    table = np.zeros(n + 1)
    for j in range(n // 2 + 1):
        table[n - 2 * j] = (
            math.factorial(n) / (math.factorial(n - 2 * j) * math.factorial(j) * 2**j) * delta**j
        )
    return table


def reorder(wick_coefficients: Sequence[float], delta: float) -> np.ndarray:
    """Re-express sum_k b_k :x^k:_{c1} in the Wick basis at c2 = c1 + delta."""
    b = np.asarray(wick_coefficients, dtype=float)
    result = np.zeros(b.size)
    for k, coefficient in enumerate(b):
        if coefficient:
            result[: k + 1] += coefficient * change_ordering(k, delta)
    return result


def compose_orderings(n: int, delta_a: float, delta_b: float) -> dict:
    """Changing ordering by delta_a then delta_b against the direct change by delta_a + delta_b."""
    unit = np.zeros(_check_order(n) + 1)
    unit[n] = 1.0
    stepwise = reorder(reorder(unit, delta_a), delta_b)
    direct = change_ordering(n, delta_a + delta_b)
    scale = max(float(np.abs(direct).max()), 1.0)
    return {
        "check": "compose_orderings",
        "stepwise": stepwise.tolist(),
        "direct": direct.tolist(),
        "max_error": float(np.abs(stepwise - direct).max()) / scale,
    }
