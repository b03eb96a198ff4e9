"""Real polynomials used as interactions P(x), stored constant term first."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from numerics import InvalidInputError


class InvalidInteractionError(ValueError):
    """Raised when an interaction polynomial is not bounded below."""


@dataclass(frozen=True, eq=False)
class Polynomial:
    coefficients: Tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = [float(c) for c in self.coefficients]
        if not coeffs:
            coeffs = [0.0]
        if not all(np.isfinite(coeffs)):
            raise InvalidInputError("polynomial coefficients must be finite")
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @classmethod
    def from_list(cls, coefficients: Sequence[float]) -> "Polynomial":
        return cls(tuple(coefficients))

    @classmethod
    def interaction(cls, coefficients: Sequence[float]) -> "Polynomial":
        """An interaction P, rejected at construction unless bounded below."""
        p = cls(tuple(coefficients))
        p.require_bounded_below()
        return p

    @classmethod
    def monomial(cls, n: int, coefficient: float = 1.0) -> "Polynomial":
        return cls(tuple([0.0] * n + [coefficient]))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def leading(self) -> float:
        return self.coefficients[-1]

    @property
    def bounded_below(self) -> bool:
        return self.degree == 0 or (self.degree % 2 == 0 and self.leading > 0)

    def require_bounded_below(self) -> None:
        if not self.bounded_below:
            raise InvalidInteractionError(
                f"P must have even degree and positive leading coefficient, got {list(self.coefficients)}"
            )

    def __call__(self, x):
        return npoly.polyval(x, self.coefficients)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(tuple(npoly.polyadd(self.coefficients, other.coefficients)))

    def scaled(self, factor: float) -> "Polynomial":
        return Polynomial(tuple(factor * c for c in self.coefficients))

    def derivative(self) -> "Polynomial":
        return Polynomial(tuple(npoly.polyder(self.coefficients)))

    def terms(self) -> Iterator[Tuple[int, float]]:
        for k, a in enumerate(self.coefficients):
            if a != 0.0:
                yield k, a

    def pure_power(self) -> Optional[Tuple[int, float]]:
        """(k, a) when P = a*x^k, else None."""
        nonzero = list(self.terms())
        return nonzero[0] if len(nonzero) == 1 else None

    def minimum(self) -> float:
        """Global minimum over the real line."""
        self.require_bounded_below()
        if self.degree == 0:
            return self.coefficients[0]
        roots = npoly.polyroots(self.derivative().coefficients)
        real = [r.real for r in np.atleast_1d(roots) if abs(r.imag) <= 1e-9 * (1.0 + abs(r.real))]
        return float(min(self(np.array(real)))) if real else float(self(0.0))

    def to_list(self) -> list:
        return list(self.coefficients)
