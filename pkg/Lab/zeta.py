"""Zeta-regularized and Fredholm determinants on flat circles, cylinders and tori.

zeta(s) = Gamma(s)^{-1} int_0^inf t^{s-1} theta(t) dt with theta the heat trace.
The integral is split at t_split. Below it, theta = sum_p c_p t^p + R(t) with
the c_p known in closed form and R the exact Poisson-resummed remainder; above
it, each eigenvalue contributes an incomplete gamma function. At s = 0 this
gives zeta(0) = c_0 and

    zeta'(0) = sum_{p != 0} c_p t_s^p / p + c_0 (log t_s + gamma)
               + int_0^{t_s} R(t) / t dt + sum_k m_k E_1(t_s lambda_k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

import config
from numerics import InvalidInputError

Spectrum = Callable[[float], Tuple[np.ndarray, np.ndarray]]
Remainder = Callable[[np.ndarray], np.ndarray]


class AccuracyError(RuntimeError):
    """Raised when a continuation or a determinant misses its accuracy target."""


class NotTraceClassError(ValueError):
    """Raised when the trace norm of a family does not converge."""


@dataclass(frozen=True, eq=False)
class EigenvalueFamily:
    """Eigenvalues up to any cutoff plus the small-t heat-trace expansion theta = sum c_p t^p + R."""

    name: str
    spectrum: Spectrum
    expansion: Tuple[Tuple[float, float], ...]
    remainder: Remainder
    growth: float = 2.0
    dimension: float = 1.0

    def heat_trace(self, t: float, cutoff: Optional[float] = None) -> float:
        cutoff = cutoff if cutoff is not None else config.ZETA_TAIL_EXPONENT * 2.0 / t
        values, multiplicities = self.spectrum(cutoff)
        return float(np.sum(multiplicities * np.exp(-t * values)))


@dataclass(frozen=True)
class ZetaResult:
    zeta0: float
    zeta_prime0: float
    error_estimate: float = 0.0

    @property
    def logdet(self) -> float:
        return -self.zeta_prime0

    @property
    def det(self) -> float:
        return math.exp(self.logdet)

    def summary(self) -> dict:
        return {
            "zeta0": self.zeta0,
            "zeta_prime0": self.zeta_prime0,
            "logdet": self.logdet,
            "error_estimate": self.error_estimate,
        }


# ---------------------------------------------------------------------------
# remainders
# ---------------------------------------------------------------------------


def _taylor_tail(x: np.ndarray, start: int) -> np.ndarray:
    """sum_{j >= start} (-x)^j / j!, summed directly so nothing cancels."""
    x = np.asarray(x, dtype=float)
    term = (-x) ** start / math.factorial(start)
    total = np.zeros_like(x)
    for j in range(start, start + 160):
        total = total + term
        term = term * (-x) / (j + 1)
    return total


def _poisson_tail(t: np.ndarray, period: float) -> np.ndarray:
    """2 sum_{n >= 1} exp(-n^2 period^2 / (4 t)): the image sum of a circle of length period."""
    t = np.asarray(t, dtype=float)
    n_max = int(math.ceil(math.sqrt(4.0 * float(np.max(t)) * 50.0) / period)) + 1
    n_max = max(n_max, config.POISSON_TERMS)
    n = np.arange(1, n_max + 1)
    return 2.0 * np.exp(-np.outer(1.0 / (4.0 * t), n * n * period * period)).sum(axis=1)


def _bessel_k1_regular(z: np.ndarray) -> np.ndarray:
    """K_1(z) - 1/z, from the ascending series below z = 2 where the difference would cancel."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    small = (z > 0.0) & (z < 2.0)
    half = 0.5 * z[small]
    log_half = np.log(half)
    term = half.copy()
    total = np.zeros_like(half)
    for k in range(30):
        total = total + term * (log_half - 0.5 * (special.digamma(k + 1) + special.digamma(k + 2)))
        term = term * half * half / ((k + 1) * (k + 2))
    out[small] = total
    large = z >= 2.0
    out[large] = special.kv(1, z[large]) - 1.0 / z[large]
    return out


def _mass_expansion(prefactor: float, power: float, mass: float) -> List[Tuple[float, float]]:
    """prefactor e^{-m^2 t} t^power as sum_j prefactor (-m^2)^j / j! t^{j + power}."""
    return [
        (j + power, prefactor * (-(mass * mass)) ** j / math.factorial(j))
        for j in range(config.ZETA_TAYLOR_TERMS)
    ]


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0 or not math.isfinite(value):
            raise InvalidInputError(f"{name} must be positive and finite, got {value}")


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


def circle_family(mass: float, circumference: float) -> EigenvalueFamily:
    """-d^2/dx^2 + m^2 on a circle: (2 pi k / L)^2 + m^2, k in Z."""
    _check_positive(mass=mass, circumference=circumference)
    m, length = mass, circumference
    prefactor = length / math.sqrt(4.0 * math.pi)

    def spectrum(cutoff: float):
        k_max = int(length * math.sqrt(max(cutoff - m * m, 0.0)) / (2.0 * math.pi))
        k = np.arange(0, k_max + 1)
        values = (2.0 * math.pi * k / length) ** 2 + m * m
        return values, np.where(k == 0, 1.0, 2.0)

    def remainder(t):
        t = np.asarray(t, dtype=float)
        head = prefactor / np.sqrt(t)
        return head * (_taylor_tail(m * m * t, config.ZETA_TAYLOR_TERMS) + np.exp(-m * m * t) * _poisson_tail(t, length))

    return EigenvalueFamily(
        f"circle(m={m}, L={length})", spectrum, tuple(_mass_expansion(prefactor, -0.5, m)), remainder, 2.0, 1.0
    )


def harmonic_family(scale: float = 1.0) -> EigenvalueFamily:
    """scale * n^2 for n >= 1: the circle Laplacian of length 2 pi / sqrt(scale) without its zero mode, one sign of n."""
    _check_positive(scale=scale)
    period = 2.0 * math.pi / math.sqrt(scale)

    def spectrum(cutoff: float):
        n = np.arange(1, int(math.sqrt(cutoff / scale)) + 1)
        return scale * n * n, np.ones(n.size)

    def remainder(t):
        t = np.asarray(t, dtype=float)
        return 0.5 * period / np.sqrt(4.0 * math.pi * t) * _poisson_tail(t, period)

    expansion = ((-0.5, 0.5 * period / math.sqrt(4.0 * math.pi)), (0.0, -0.5))
    return EigenvalueFamily(f"harmonic(scale={scale})", spectrum, expansion, remainder, 2.0, 1.0)


def torus_family(mass: float, circumference: float, height: float) -> EigenvalueFamily:
    """-Laplacian + m^2 on the flat torus L x T."""
    _check_positive(mass=mass, circumference=circumference, height=height)
    m, length, t_len = mass, circumference, height
    prefactor = length * t_len / (4.0 * math.pi)

    def spectrum(cutoff: float):
        room = max(cutoff - m * m, 0.0)
        k = np.arange(-int(length * math.sqrt(room) / (2.0 * math.pi)), int(length * math.sqrt(room) / (2.0 * math.pi)) + 1)
        n = np.arange(-int(t_len * math.sqrt(room) / (2.0 * math.pi)), int(t_len * math.sqrt(room) / (2.0 * math.pi)) + 1)
        values = ((2.0 * math.pi * k[:, None] / length) ** 2 + (2.0 * math.pi * n[None, :] / t_len) ** 2 + m * m).ravel()
        return values, np.ones(values.size)

    def remainder(t):
        t = np.asarray(t, dtype=float)
        p_l, p_t = _poisson_tail(t, length), _poisson_tail(t, t_len)
        images = p_l + p_t + p_l * p_t
        return prefactor / t * (_taylor_tail(m * m * t, config.ZETA_TAYLOR_TERMS) + np.exp(-m * m * t) * images)

    return EigenvalueFamily(
        f"torus(m={m}, L={length}, T={t_len})", spectrum, tuple(_mass_expansion(prefactor, -1.0, m)), remainder, 1.0, 2.0
    )


def dirichlet_cylinder_family(mass: float, circumference: float, height: float) -> EigenvalueFamily:
    """-Laplacian + m^2 on the cylinder circle(L) x [0, T] with Dirichlet ends."""
    _check_positive(mass=mass, circumference=circumference, height=height)
    m, length, t_len = mass, circumference, height
    area_term = length * t_len / (4.0 * math.pi)
    edge_term = -length / (4.0 * math.sqrt(math.pi))

    def spectrum(cutoff: float):
        room = max(cutoff - m * m, 0.0)
        k_max = int(length * math.sqrt(room) / (2.0 * math.pi))
        k = np.arange(-k_max, k_max + 1)
        n = np.arange(1, int(t_len * math.sqrt(room) / math.pi) + 2)
        values = ((2.0 * math.pi * k[:, None] / length) ** 2 + (math.pi * n[None, :] / t_len) ** 2 + m * m).ravel()
        return values, np.ones(values.size)

    def remainder(t):
        t = np.asarray(t, dtype=float)
        tail = _taylor_tail(m * m * t, config.ZETA_TAYLOR_TERMS)
        decay = np.exp(-m * m * t)
        p_l = _poisson_tail(t, length)
        # the Dirichlet sum over n >= 1 is half the periodic sum of period 2T, minus the zero mode
        p_t = _poisson_tail(t, 2.0 * t_len)
        area = area_term / t * (tail + decay * (p_l + p_t + p_l * p_t))
        edge = edge_term / np.sqrt(t) * (tail + decay * p_l)
        return area + edge

    expansion = _mass_expansion(area_term, -1.0, m) + _mass_expansion(edge_term, -0.5, m)
    return EigenvalueFamily(
        f"dirichlet_cylinder(m={m}, L={length}, T={t_len})", spectrum, tuple(expansion), remainder, 1.0, 2.0
    )


def sqrt_circle_family(mass: float, circumference: float, scale: float = 1.0) -> EigenvalueFamily:
    """scale * sqrt((2 pi k / L)^2 + m^2), k in Z: a multiple of D = (-d^2/dx^2 + m^2)^{1/2} on the circle.

    Poisson summation of e^{-s omega} gives theta(t) = (L m s / pi) sum_n K_1(m r_n) / r_n with
    s = scale t and r_n = sqrt(s^2 + n^2 L^2); the n = 0 term carries the only singular piece L / (pi s).
    """
    _check_positive(mass=mass, circumference=circumference, scale=scale)
    m, length = mass, circumference
    n_max = max(config.POISSON_TERMS, int(math.ceil(60.0 / (m * length))) + 1)
    images = np.arange(1, n_max + 1) * length

    def spectrum(cutoff: float):
        room = max((cutoff / scale) ** 2 - m * m, 0.0)
        k = np.arange(0, int(length * math.sqrt(room) / (2.0 * math.pi)) + 1)
        values = scale * np.sqrt((2.0 * math.pi * k / length) ** 2 + m * m)
        keep = values <= cutoff
        return values[keep], np.where(k == 0, 1.0, 2.0)[keep]

    def remainder(t):
        s = scale * np.asarray(t, dtype=float)
        head = length * m / math.pi * _bessel_k1_regular(m * s)
        r = np.sqrt(s[:, None] ** 2 + images[None, :] ** 2)
        tail = 2.0 * length * m / math.pi * s * (special.kv(1, m * r) / r).sum(axis=1)
        return head + tail

    expansion = ((-1.0, length / (math.pi * scale)),)
    return EigenvalueFamily(
        f"sqrt_circle(m={m}, L={length}, scale={scale})", spectrum, expansion, remainder, 1.0, 1.0
    )


def jumpy_dn_family(mass: float, circumference: float, height: float) -> EigenvalueFamily:
    """Jumpy DN eigenvalues 2 omega_k tanh(omega_k T / 2) of the cylinder glued along its two ends.

    The heat trace is that of 2D plus sum_k e^{-2 t omega_k} (e^{t (2 omega_k - lambda_k)} - 1), and the
    difference is O(t) because 2 omega_k - lambda_k decays like e^{-omega_k T}.
    """
    _check_positive(mass=mass, circumference=circumference, height=height)
    m, length, t_len = mass, circumference, height
    base = sqrt_circle_family(m, length, 2.0)
    k_max = int(math.ceil(60.0 * length / (2.0 * math.pi * t_len))) + 1
    w = np.sqrt((2.0 * math.pi * np.arange(-k_max, k_max + 1) / length) ** 2 + m * m)
    gap = 4.0 * w * special.expit(-w * t_len)
    floor = math.tanh(0.5 * m * t_len)

    def spectrum(cutoff: float):
        room = max((0.5 * cutoff / floor) ** 2 - m * m, 0.0)
        k = np.arange(0, int(length * math.sqrt(room) / (2.0 * math.pi)) + 1)
        omega = np.sqrt((2.0 * math.pi * k / length) ** 2 + m * m)
        values = 2.0 * omega * np.tanh(0.5 * omega * t_len)
        keep = values <= cutoff
        return values[keep], np.where(k == 0, 1.0, 2.0)[keep]

    def remainder(t):
        t = np.asarray(t, dtype=float)
        shift = (np.exp(-2.0 * np.outer(t, w)) * np.expm1(np.outer(t, gap))).sum(axis=1)
        return base.remainder(t) + shift

    return EigenvalueFamily(
        f"jumpy_dn(m={m}, L={length}, T={t_len})", spectrum, base.expansion, remainder, 1.0, 1.0
    )


def finite_family(eigenvalues: Sequence[float], multiplicities: Optional[Sequence[float]] = None) -> EigenvalueFamily:
    values = np.asarray(eigenvalues, dtype=float)
    mult = np.ones(values.size) if multiplicities is None else np.asarray(multiplicities, dtype=float)
    if values.size == 0 or np.any(values <= 0) or mult.shape != values.shape:
        raise InvalidInputError("finite family needs positive eigenvalues with matching multiplicities")

    def spectrum(cutoff: float):
        keep = values <= cutoff
        return values[keep], mult[keep]

    def remainder(t):
        t = np.asarray(t, dtype=float)
        return np.expm1(-np.outer(t, values)) @ mult

    return EigenvalueFamily("finite", spectrum, ((0.0, float(mult.sum())),), remainder, 0.0, 0.0)


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------


def _remainder_integral(fam: EigenvalueFamily, t_split: float, power: float) -> Tuple[float, float]:
    """int_0^{t_split} t^{power - 1} R(t) dt with quad's error estimate."""
    def integrand(t: float) -> float:
        return float(fam.remainder(np.array([t]))[0]) * t ** (power - 1.0)

    value, error = integrate.quad(integrand, 0.0, t_split, epsabs=config.ZETA_QUAD_EPSABS, epsrel=1e-13, limit=400)
    return value, error


def zeta_continue(
    fam: EigenvalueFamily, t_split: Optional[float] = None, tail_exponent: Optional[float] = None
) -> ZetaResult:
    t_split = t_split or config.ZETA_T_SPLIT
    tail_exponent = tail_exponent or config.ZETA_TAIL_EXPONENT
    _check_positive(t_split=t_split)
    zeta0 = 0.0
    analytic = 0.0
    for p, c in fam.expansion:
        if p == 0.0:
            zeta0 += c
        else:
            analytic += c * t_split**p / p
    integral, quad_error = _remainder_integral(fam, t_split, 0.0)
    values, multiplicities = fam.spectrum(tail_exponent / t_split)
    large = float(np.sum(multiplicities * special.exp1(t_split * values)))
    dropped = math.exp(-tail_exponent) * max(1.0, float(np.sum(multiplicities)))
    if not quad_error <= 1e-8 or not math.isfinite(integral):
        raise AccuracyError(f"remainder integral for {fam.name} has error estimate {quad_error:.2e}")
    zeta_prime0 = analytic + zeta0 * (math.log(t_split) + np.euler_gamma) + integral + large
    return ZetaResult(zeta0, float(zeta_prime0), quad_error + dropped)


def zeta_at(fam: EigenvalueFamily, s: float, t_split: Optional[float] = None) -> float:
    """zeta(s) for real s > 0 from the same split (poles of the expansion excluded)."""
    t_split = t_split or config.ZETA_T_SPLIT
    if not s > 0:
        raise InvalidInputError(f"zeta_at needs s > 0, got {s}")
    small = 0.0
    for p, c in fam.expansion:
        if abs(s + p) < 1e-12:
            raise InvalidInputError(f"s = {s} is a pole of zeta for {fam.name}")
        small += c * t_split ** (s + p) / (s + p)
    integral, _ = _remainder_integral(fam, t_split, s)
    values, multiplicities = fam.spectrum(config.ZETA_TAIL_EXPONENT / t_split)
    large = float(np.sum(multiplicities * values ** (-s) * special.gammaincc(s, t_split * values)))
    return (small + integral) / special.gamma(s) + large


def heat_constant_term(fam: EigenvalueFamily, t_min: float = 5e-4, points: int = 8) -> float:
    """zeta(0) read off the heat trace itself: the t^0 coefficient of theta(t) minus its known powers.

    Fits intercept, t log t, t, t^3 log t and t^3 on t = t_min 2^j, so it assumes the remainder runs in
    those powers, as the circle and sqrt-circle remainders do.
    """
    _check_positive(t_min=t_min)
    t = t_min * 2.0 ** np.arange(points)
    theta = np.array([fam.heat_trace(float(x)) for x in t])
    known = sum(c * t**p for p, c in fam.expansion if p != 0.0)
    basis = np.column_stack([np.ones_like(t), t * np.log(t), t, t**3 * np.log(t), t**3])
    norms = np.abs(basis).max(axis=0)
    coefficients, *_ = np.linalg.lstsq(basis / norms, theta - known, rcond=None)
    return float(coefficients[0] / norms[0])


def t_split_check(fam: EigenvalueFamily, t_split: Optional[float] = None) -> dict:
    """Continuation at t_split / 2, t_split and 2 t_split."""
    t_split = t_split or config.ZETA_T_SPLIT
    results = [zeta_continue(fam, t_split * f) for f in (0.5, 1.0, 2.0)]
    primes = [r.zeta_prime0 for r in results]
    return {
        "check": "t_split",
        "family": fam.name,
        "zeta_prime0": primes,
        "max_error": max(primes) - min(primes),
    }


def scaled(result: ZetaResult, c: float) -> ZetaResult:
    """zeta data of c * A: logdet shifts by zeta(0) log c."""
    _check_positive(c=c)
    return ZetaResult(result.zeta0, result.zeta_prime0 - result.zeta0 * math.log(c), result.error_estimate)


def power(result: ZetaResult, r: float) -> ZetaResult:
    """zeta data of A^r: zeta_{A^r}(s) = zeta_A(r s)."""
    _check_positive(r=r)
    return ZetaResult(result.zeta0, r * result.zeta_prime0, r * result.error_estimate)


def relative_zeta(base: ZetaResult, values, base_values) -> ZetaResult:
    """zeta data after replacing eigenvalues base_values[k] by values[k] (absolutely summable log ratios)."""
    values = np.asarray(values, dtype=float)
    base_values = np.asarray(base_values, dtype=float)
    if values.shape != base_values.shape or np.any(values <= 0) or np.any(base_values <= 0):
        raise InvalidInputError("relative_zeta needs matching positive eigenvalue lists")
    return ZetaResult(base.zeta0, base.zeta_prime0 - float(np.sum(np.log(values / base_values))), base.error_estimate)


def detzeta_circle(mass: float, circumference: float, t_split: Optional[float] = None) -> ZetaResult:
    return zeta_continue(circle_family(mass, circumference), t_split)


def circle_closed_form(mass: float, circumference: float) -> float:
    """log(4 sinh^2(m L / 2)), written so it does not overflow for large m L."""
    x = mass * circumference
    return x + 2.0 * math.log1p(-math.exp(-x))


def sqrt_circle(mass: float, circumference: float, t_split: Optional[float] = None) -> ZetaResult:
    """zeta data of D = (-d^2/dx^2 + m^2)^{1/2} on the circle."""
    return power(detzeta_circle(mass, circumference, t_split), 0.5)


def circle_check(mass: float, circumference: float, t_split: Optional[float] = None) -> dict:
    """det of the circle Laplacian against 4 sinh^2(m L / 2); D and 2D continued from their own heat traces."""
    result = detzeta_circle(mass, circumference, t_split)
    closed = circle_closed_form(mass, circumference)
    d = zeta_continue(sqrt_circle_family(mass, circumference), t_split)
    two_d = zeta_continue(sqrt_circle_family(mass, circumference, 2.0), t_split)
    via_power = sqrt_circle(mass, circumference, t_split)
    two_d_vs_d = abs(two_d.logdet - d.logdet)
    d_vs_power = abs(d.logdet - via_power.logdet)
    return {
        "check": "circle_det",
        "logdet": result.logdet,
        "closed_form": closed,
        "logdet_d": d.logdet,
        "logdet_2d": two_d.logdet,
        "zeta0_sqrt": heat_constant_term(sqrt_circle_family(mass, circumference)),
        "two_d_vs_d": two_d_vs_d,
        "d_vs_power": d_vs_power,
        "max_error": max(abs(result.logdet - closed), two_d_vs_d, d_vs_power),
    }


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann maps on the flat cylinder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeDN:
    k: int
    omega: float
    matrix: np.ndarray
    jumpy: float


@dataclass(frozen=True)
class CylinderDN:
    mass: float
    circumference: float
    height: float

    def omega(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return np.sqrt((2.0 * math.pi * k / self.circumference) ** 2 + self.mass**2)

    def mode(self, k: int) -> ModeDN:
        w = float(self.omega(k))
        x = w * self.height
        coth, csch = 1.0 / math.tanh(x), 1.0 / math.sinh(x)
        matrix = w * np.array([[coth, -csch], [-csch, coth]])
        return ModeDN(int(k), w, matrix, 2.0 * w * math.tanh(0.5 * x))

    def mode_cutoff(self, tol: float = 1e-9) -> int:
        """K with sum_{|k| > K} |jumpy_k - 2 omega_k| below tol."""
        ratio = math.exp(-2.0 * math.pi * self.height / self.circumference)
        k = 0
        while True:
            w = float(self.omega(k))
            term = 2.0 * 4.0 * w * math.exp(-w * self.height)
            if k > 0 and term / (1.0 - ratio) ** 2 < tol:
                return k
            k += 1

    def modes(self, cutoff: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """omega_k for k = -K..K and the jumpy DN eigenvalues 2 omega tanh(omega T / 2)."""
        cutoff = self.mode_cutoff() if cutoff is None else cutoff
        k = np.arange(-cutoff, cutoff + 1)
        w = self.omega(k)
        return w, 2.0 * w * np.tanh(0.5 * w * self.height)

    def trace_class_sum(self, cutoff: Optional[int] = None) -> float:
        w, jumpy = self.modes(cutoff)
        return float(np.sum(np.abs(jumpy - 2.0 * w)))

    def energy_check(self, k: int, f: float, g: float) -> dict:
        """<(f, g), DN (f, g)> against the Dirichlet energy of the cosh/sinh interpolant."""
        mode = self.mode(k)
        w, height = mode.omega, self.height
        b = (g - f * math.cosh(w * height)) / math.sinh(w * height)

        def density(x: float) -> float:
            u = f * math.cosh(w * x) + b * math.sinh(w * x)
            du = w * (f * math.sinh(w * x) + b * math.cosh(w * x))
            return du * du + w * w * u * u

        energy, _ = integrate.quad(density, 0.0, height, epsabs=1e-13, epsrel=1e-13)
        form = float(np.array([f, g]) @ mode.matrix @ np.array([f, g]))
        return {"check": "dn_energy", "k": k, "form": form, "energy": energy,
                "max_error": abs(form - energy) / max(abs(energy), 1e-300)}


def dn_cylinder(mass: float, circumference: float, height: float) -> CylinderDN:
    _check_positive(mass=mass, circumference=circumference, height=height)
    return CylinderDN(mass, circumference, height)


# ---------------------------------------------------------------------------
# Fredholm determinants
# ---------------------------------------------------------------------------


def _eigenvalue_array(a: Union[Sequence[float], np.ndarray, Callable[[int], float]]) -> np.ndarray:
    if not callable(a):
        values = np.asarray(a, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise NotTraceClassError("eigenvalues must be finite")
        return values
    collected: List[float] = []
    quiet = 0
    norm = 0.0
    for k in range(config.FREDHOLM_MAX_TERMS):
        value = float(a(k))
        collected.append(value)
        norm += abs(value)
        quiet = quiet + 1 if abs(value) <= 1e-17 * (1.0 + norm) else 0
        if quiet >= 10:
            return np.array(collected)
    raise NotTraceClassError(
        f"trace norm still growing after {config.FREDHOLM_MAX_TERMS} terms (last term {collected[-1]:.3e})"
    )


def fredholm_det(a, z: float = 1.0) -> float:
    """det_F(1 + z A) from eigenvalues (array or k -> lambda_k) or from a square matrix."""
    if not callable(a) and np.ndim(a) == 2:
        return fredholm_det_matrix(a, z)
    values = _eigenvalue_array(a)
    trace_norm = float(np.sum(np.abs(values)))
    det = float(np.prod(1.0 + z * values))
    if abs(det) > math.exp(abs(z) * trace_norm) * (1.0 + 1e-12):
        raise AccuracyError(f"|det| = {abs(det):.6e} exceeds exp(|z| ||A||_1) = {math.exp(abs(z) * trace_norm):.6e}")
    return det


def fredholm_det_matrix(a, z: float = 1.0) -> float:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError("fredholm_det_matrix needs a square matrix")
    sign, logdet = np.linalg.slogdet(np.eye(a.shape[0]) + z * a)
    det = float(sign * math.exp(logdet)) if sign != 0 else 0.0
    trace_norm = float(np.sum(np.linalg.svd(a, compute_uv=False)))
    if abs(det) > math.exp(abs(z) * trace_norm) * (1.0 + 1e-10):
        raise AccuracyError("Fredholm determinant violates the trace-norm bound")
    return det


def fredholm_det_series(power_traces: Sequence[float], z: float = 1.0) -> float:
    """det_F(1 + z A) from tr(A^n), n = 1..N, by the Plemelj recursion for the coefficients."""
    p = np.asarray(power_traces, dtype=float)
    coefficients = [1.0]
    for n in range(1, p.size + 1):
        e_n = sum((-1) ** (k - 1) * coefficients[n - k] * p[k - 1] for k in range(1, n + 1)) / n
        coefficients.append(e_n)
    return float(sum(c * z**n for n, c in enumerate(coefficients)))


def fredholm_continuity_check(a: Sequence[float], b: Sequence[float]) -> dict:
    """|det(1 + A) - det(1 + B)| <= ||A - B||_1 exp(||A||_1 + ||B||_1 + 1) for diagonal families."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    gap = abs(fredholm_det(a) - fredholm_det(b))
    bound = float(np.sum(np.abs(a - b))) * math.exp(float(np.sum(np.abs(a)) + np.sum(np.abs(b))) + 1.0)
    return {"check": "fredholm_continuity", "gap": gap, "bound": bound, "ok": gap <= bound}


# ---------------------------------------------------------------------------
# determinant identities on the flat cylinder and torus
# ---------------------------------------------------------------------------


def _log_fredholm_tanh(dn: CylinderDN) -> Tuple[float, int]:
    w, jumpy = dn.modes()
    kernel = jumpy / (2.0 * w) - 1.0
    det = fredholm_det(kernel)
    return math.log(det), w.size


def bfk_torus_check(mass: float, circumference: float, height: float) -> dict:
    """log det torus = log det Dirichlet + log det DN, plus the per-mode bookkeeping."""
    dn = dn_cylinder(mass, circumference, height)
    torus = zeta_continue(torus_family(mass, circumference, height))
    dirichlet = zeta_continue(dirichlet_cylinder_family(mass, circumference, height))
    jumpy = zeta_continue(jumpy_dn_family(mass, circumference, height))
    d = zeta_continue(sqrt_circle_family(mass, circumference))
    two_d = zeta_continue(sqrt_circle_family(mass, circumference, 2.0))
    log_tanh, n_modes = _log_fredholm_tanh(dn)
    logdet_dn_fredholm = two_d.logdet + log_tanh
    offset = torus.logdet - dirichlet.logdet - jumpy.logdet

    w, _ = dn.modes()
    x = w * height
    torus_mode = x + 2.0 * np.log1p(-np.exp(-x))
    dirichlet_mode = x + np.log1p(-np.exp(-2.0 * x)) - np.log(w)
    dn_mode = np.log(2.0 * w * np.tanh(0.5 * x))
    ratio_error = float(np.abs(np.exp(dirichlet_mode + dn_mode - torus_mode) - 2.0).max())
    dn_gap = abs(jumpy.logdet - logdet_dn_fredholm)
    return {
        "check": "bfk_torus",
        "logdet_torus": torus.logdet,
        "logdet_dirichlet": dirichlet.logdet,
        "logdet_dn": jumpy.logdet,
        "logdet_dn_fredholm": logdet_dn_fredholm,
        "log_offset": offset,
        "max_error": max(abs(offset), ratio_error, dn_gap),
        "per_mode_ratio_error": ratio_error,
        "dn_gap": dn_gap,
        # per mode: log 4 sinh^2 - log(2 sinh / omega) = log omega + log tanh
        "per_mode_difference": d.logdet + log_tanh,
        "continued_difference": torus.logdet - dirichlet.logdet,
        "zeta_omega0": heat_constant_term(sqrt_circle_family(mass, circumference)),
        "modes": n_modes,
    }


def rn_det_identity(mass: float, circumference: float, height: float) -> dict:
    """det_zeta(2D) det_F(1 + (2D)^{-1}(DN - 2D)) = det_zeta(DN), the right side continued from the DN heat trace."""
    dn = dn_cylinder(mass, circumference, height)
    two_d = zeta_continue(sqrt_circle_family(mass, circumference, 2.0))
    log_fredholm, _ = _log_fredholm_tanh(dn)
    continued = zeta_continue(jumpy_dn_family(mass, circumference, height))
    lhs = two_d.logdet + log_fredholm
    return {
        "check": "rn_det",
        "logdet_2d": two_d.logdet,
        "log_fredholm": log_fredholm,
        "logdet_dn_fredholm": lhs,
        "logdet_dn": continued.logdet,
        "zeta0_dn": continued.zeta0,
        "max_error": abs(lhs - continued.logdet),
    }


def commutation_check(a: np.ndarray, b: np.ndarray) -> dict:
    """det_F(1 + AB) = det_F(1 + BA)."""
    ab = fredholm_det_matrix(np.asarray(a) @ np.asarray(b))
    ba = fredholm_det_matrix(np.asarray(b) @ np.asarray(a))
    return {"check": "fredholm_commutation", "ab": ab, "ba": ba, "max_error": abs(ab - ba) / max(abs(ab), 1.0)}


def zeta_suite(mass: float, circumference: float, height: float) -> Dict[str, dict]:
    return {
        "circle": circle_check(mass, circumference),
        "t_split": t_split_check(circle_family(mass, circumference)),
        "bfk_torus": bfk_torus_check(mass, circumference, height),
        "rn_det": rn_det_identity(mass, circumference, height),
        "dn_energy": dn_cylinder(mass, circumference, height).energy_check(1, 0.7, -0.3),
    }
