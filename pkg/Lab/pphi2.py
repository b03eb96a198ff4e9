"""Wick-ordered P(phi) interactions on lattice free fields.

S(phi) = sum_x mu_x chi_x :P:_{c_x}(phi_x) where c_x = (Q^{-1})_xx is the tadpole
(Green function diagonal). Every evaluator accepts an explicit `variances`
vector so a different Wick ordering (for instance the local ordering of the
infinite cylinder) can be used in place of the tadpole.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

import config
from lattice import (
    PrecisionOperator,
    SigmaLike,
    vertex_indices,
    markov_decompose,
    quad_perturb,
    sample,
    tadpole_fit,
    torus_tadpole,
)
from numerics import InvalidInputError, RngStream
from polynomial import Polynomial
from wick import reorder, wick_cov, wick_evaluate, wick_order


@dataclass(frozen=True, eq=False)
class InteractionSpec:
    p: Polynomial
    chi: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.p.require_bounded_below()
        if self.chi is not None:
            chi = np.asarray(self.chi, dtype=float).reshape(-1)
            if not np.all(np.isfinite(chi)) or np.any(chi < 0):
                raise InvalidInputError("chi must be finite and nonnegative")
            object.__setattr__(self, "chi", chi)

    def weights(self, q: PrecisionOperator) -> np.ndarray:
        """mu_x * chi_x per vertex."""
        measure = q.graph.vertex_measure
        if self.chi is None:
            return measure.copy()
        if self.chi.size != q.n:
            raise InvalidInputError(f"chi has {self.chi.size} entries, graph has {q.n} vertices")
        return measure * self.chi


@dataclass(frozen=True, eq=False)
class TadpoleField:
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if np.any(values <= 0):
            raise InvalidInputError("tadpole values must be positive")
        object.__setattr__(self, "values", values)


def tadpole(q: PrecisionOperator) -> TadpoleField:
    return TadpoleField(np.diag(q.covariance).copy())


def _variances(q: PrecisionOperator, variances) -> np.ndarray:
    if variances is None:
        return tadpole(q).values
    variances = np.broadcast_to(np.asarray(variances, dtype=float), (q.n,)).copy()
    if np.any(variances < 0):
        raise InvalidInputError("Wick variances must be nonnegative")
    return variances


def wick_action(spec: InteractionSpec, q: PrecisionOperator, phi, variances=None):
    """S for one field (float) or for each row of a (samples, n) array."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != q.n:
        raise InvalidInputError(f"field has {phi.shape[-1]} values, graph has {q.n} vertices")
    local = wick_evaluate(spec.p, _variances(q, variances), phi)
    action = local @ spec.weights(q)
    return float(action) if np.ndim(action) == 0 else action


def action_lower_bound(spec: InteractionSpec, q: PrecisionOperator, variances=None) -> float:
    """sum_x mu_x chi_x min :P:_{c_x}, a bound every sampled action must respect."""
    minima: Dict[float, float] = {}
    total = 0.0
    for c, w in zip(_variances(q, variances), spec.weights(q)):
        if w == 0.0:
            continue
        if c not in minima:
            minima[c] = wick_order(spec.p, float(c)).minimum()
        total += w * minima[c]
    return total


def action_variance(spec: InteractionSpec, q: PrecisionOperator) -> float:
    """Var S for P = a theta^{2n}: a^2 (2n)! sum_xy w_x w_y C_xy^{2n}."""
    power = spec.p.pure_power()
    if power is None or power[0] == 0 or power[0] % 2:
        raise InvalidInputError("action_variance needs P to be a pure even power; use polynomial_action_variance")
    return polynomial_action_variance(spec, q)


def polynomial_action_variance(spec: InteractionSpec, q: PrecisionOperator) -> float:
    w = spec.weights(q)
    cov = q.covariance
    total = 0.0
    for k, a in spec.p.terms():
        if k == 0:
            continue
        total += a * a * math.factorial(k) * float(w @ (cov**k) @ w)
    return total


def sample_actions(
    spec: InteractionSpec, q: PrecisionOperator, n_samples: int, rng: RngStream, variances=None
) -> np.ndarray:
    """Actions of n_samples free-field draws, drawn in batches on child streams."""
    actions = []
    done = 0
    batch = 0
    while done < n_samples:
        size = min(config.MC_BATCH, n_samples - done)
        actions.append(wick_action(spec, q, sample(q, size, rng.child(batch)), variances))
        done += size
        batch += 1
    return np.concatenate([np.atleast_1d(a) for a in actions])


def partition_mc(
    spec: InteractionSpec,
    q: PrecisionOperator,
    n_samples: Optional[int] = None,
    rng: Optional[RngStream] = None,
    variances=None,
) -> Tuple[float, float]:
    """Monte-Carlo E[exp(-S)] under the free field, with its standard error."""
    n_samples = n_samples or config.PARTITION_SAMPLES
    rng = rng or RngStream(config.DEFAULT_SEED)
    actions = sample_actions(spec, q, n_samples, rng, variances)
    shift = float(actions.min())
    weights = np.exp(-(actions - shift))
    ess = float(weights.sum() ** 2 / np.sum(weights * weights))
    if ess < config.ESS_WARN_FRACTION * n_samples:
        print(
            f"Warning: effective sample size {ess:.1f} of {n_samples} draws; partition estimate is unreliable",
            file=sys.stderr,
        )
    scale = math.exp(-shift)
    stderr = float(weights.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return scale * float(weights.mean()), scale * stderr


def quadratic_partition(spec: InteractionSpec, q: PrecisionOperator, variances=None) -> float:
    """Exact E[exp(-S)] when deg P <= 2, through the Gaussian determinant formula."""
    if spec.p.degree > 2:
        raise InvalidInputError("quadratic_partition needs deg P <= 2")
    a = list(spec.p.coefficients) + [0.0] * (3 - len(spec.p.coefficients))
    w = spec.weights(q)
    c = _variances(q, variances)
    constant = float(np.sum(w * (a[0] - a[2] * c)))
    v = np.diag(2.0 * a[2] * w)
    h = a[1] * w
    z, tilted = quad_perturb(q, v)
    return math.exp(-constant + 0.5 * float(h @ tilted.covariance @ h)) * z


def change_reference(spec: InteractionSpec, delta: float) -> InteractionSpec:
    """P' with :P:_c = :P':_{c + delta} for every c."""
    coefficients = reorder(spec.p.coefficients, delta)
    return InteractionSpec(Polynomial(tuple(coefficients)), spec.chi)


def tadpole_regression(
    spacings: Optional[Sequence[float]] = None, size: float = 1.0, mass: float = 1.0
) -> dict:
    """Fit c(a) = beta log(1/a) + gamma for tori of fixed physical size."""
    spacings = list(spacings or config.TADPOLE_SPACINGS)
    rows = []
    for a in spacings:
        n = int(round(size / a))
        if n < 1:
            raise InvalidInputError(f"spacing {a} is larger than the torus size {size}")
        rows.append({"spacing": a, "n": n, "tadpole": torus_tadpole(n, n, a, mass)})
    fit = tadpole_fit([math.log(1.0 / r["spacing"]) for r in rows], [r["tadpole"] for r in rows])
    beta_ok = abs(fit["beta"] - config.TADPOLE_BETA) <= config.TADPOLE_BETA_REL_TOL * config.TADPOLE_BETA
    return {
        "check": "tadpole_regression",
        "rows": rows,
        **fit,
        "expected_beta": config.TADPOLE_BETA,
        "ok": bool(fit["r2"] >= config.TADPOLE_MIN_R2 and beta_ok),
    }


# ---------------------------------------------------------------------------
# locality and decoupling
# ---------------------------------------------------------------------------


def _region_action(spec, q, phi, region, variances) -> np.ndarray:
    local = wick_evaluate(spec.p, variances[region], phi[:, region])
    return local @ spec.weights(q)[region]


def decouple_check(
    q: PrecisionOperator,
    sigma: SigmaLike,
    spec: InteractionSpec,
    rng: RngStream,
    samples: int = 100,
    variances=None,
) -> dict:
    """S(phi) against S_Omega + S_Omega^c + S_sigma built from the Markov split of phi."""
    s = vertex_indices(sigma, q.n)
    parts = q.graph.components_without(s)
    if len(parts) < 2:
        raise InvalidInputError("sigma does not dissect the graph into two regions")
    omega = min(parts, key=lambda p: p[0])
    outside = np.sort(np.concatenate([p for p in parts if p is not omega]))
    c = _variances(q, variances)

    phi = sample(q, samples, rng)
    decomposition = markov_decompose(q, s)
    harmonic, dirichlet = decomposition.split(phi)
    dirichlet_omega = np.zeros_like(dirichlet)
    dirichlet_omega[:, omega] = dirichlet[:, omega]
    dirichlet_outside = np.zeros_like(dirichlet)
    dirichlet_outside[:, outside] = dirichlet[:, outside]

    total = np.atleast_1d(wick_action(spec, q, phi, c))
    pieces = (
        _region_action(spec, q, dirichlet_omega + harmonic, omega, c)
        + _region_action(spec, q, dirichlet_outside + harmonic, outside, c)
        + _region_action(spec, q, harmonic, s, c)
    )
    scale = max(float(np.abs(total).max()), 1.0)

    noise = rng.child(1).generator().standard_normal(phi.shape)
    perturbed = phi.copy()
    perturbed[:, outside] += noise[:, outside]
    local_before = _region_action(spec, q, phi, np.concatenate([omega, s]), c)
    local_after = _region_action(spec, q, perturbed, np.concatenate([omega, s]), c)
    identical = bool(np.array_equal(local_before, local_after))

    return {
        "check": "decouple",
        "regions": len(parts),
        "omega_size": int(omega.size),
        "max_error": float(np.abs(total - pieces).max()) / scale,
        "locality_bit_identical": identical,
        "ok": identical,
    }


# ---------------------------------------------------------------------------
# mollifier independence
# ---------------------------------------------------------------------------


def _box_average(n: int, radius: int) -> np.ndarray:
    average = np.zeros((n, n))
    for d in range(-radius, radius + 1):
        average += np.roll(np.eye(n), d, axis=1)
    return average / (2 * radius + 1)


def mollifiers(q: PrecisionOperator, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """Box average of radius round(eps/a) and the heat flow with the same per-axis variance."""
    g = q.graph
    if g.kind != "torus":
        raise InvalidInputError("mollifier comparison needs a torus")
    n1, n2 = g.shape
    radius = int(round(eps / g.spacing))
    if radius < 0 or 2 * radius + 1 > min(n1, n2):
        raise InvalidInputError(f"mollifier radius {radius} does not fit on a {n1}x{n2} torus")
    box = np.kron(_box_average(n1, radius), _box_average(n2, radius))
    heat = expm(-(radius * (radius + 1) / 6.0) * g.laplacian())
    return box, heat


def mollifier_distance(spec: InteractionSpec, q: PrecisionOperator, box: np.ndarray, heat: np.ndarray) -> float:
    """Exact L^2 distance between the two mollified Wick actions, each ordered with its own tadpole."""
    w = spec.weights(q)
    cov = q.covariance
    g_aa = box @ cov @ box.T
    g_bb = heat @ cov @ heat.T
    g_ab = box @ cov @ heat.T
    total = 0.0
    for k, a in spec.p.terms():
        if k == 0:
            continue
        total += a * a * math.factorial(k) * float(w @ (g_aa**k + g_bb**k - 2.0 * g_ab**k) @ w)
    return math.sqrt(max(total, 0.0))


def mollifier_compare(
    q: PrecisionOperator,
    spec: InteractionSpec,
    eps_list: Sequence[float],
    rng: RngStream,
    samples: Optional[int] = None,
) -> List[dict]:
    samples = samples or config.MOLLIFIER_SAMPLES
    phi = sample(q, samples, rng)
    cov = q.covariance
    rows = []
    for eps in eps_list:
        box, heat = mollifiers(q, eps)
        field_a, field_b = phi @ box.T, phi @ heat.T
        c_a = np.diag(box @ cov @ box.T)
        c_b = np.diag(heat @ cov @ heat.T)
        gap = wick_evaluate(spec.p, c_a, field_a) @ spec.weights(q) - wick_evaluate(spec.p, c_b, field_b) @ spec.weights(q)
        squared = gap * gap
        mc = float(math.sqrt(squared.mean()))
        # delta method for the standard error of sqrt(mean)
        stderr = float(squared.std(ddof=1) / math.sqrt(samples) / (2.0 * mc)) if mc > 0 else 0.0
        rows.append({
            "eps": float(eps),
            "exact": mollifier_distance(spec, q, box, heat),
            "mc": mc,
            "mc_stderr": stderr,
        })
    for previous, row in zip(rows, rows[1:]):
        row["monotone"] = bool((row["exact"] - previous["exact"]) * (row["eps"] - previous["eps"]) >= 0)
    return rows


def wick_cov_table(c: float, g: float, n_max: int = 4) -> List[dict]:
    """E[:X^n: :Y^m:] for n, m <= n_max at equal variance c and covariance g."""
    return [
        {"n": n, "m": m, "value": wick_cov(n, m, g, c, c)}
        for n in range(n_max + 1)
        for m in range(n_max + 1)
    ]
