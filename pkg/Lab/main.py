"""
Main entry point for the constructive-QFT lab.

Each subcommand (chain, lattice, pphi2, segal, zeta) runs one experiment
suite from a JSON config or a built-in preset and writes a report. Progress
goes to stderr; the report path is printed on stdout.

Exit codes: 2 for invalid configs or inputs, 1 when a check fails, 0 on pass.
"""

import os
import sys

from dotenv import load_dotenv

load_dotenv()

# BLAS reads its thread count when numpy is first imported
_threads = os.getenv("LAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _threads

import argparse  # noqa: E402
import json  # noqa: E402
import math  # noqa: E402
from pathlib import Path  # noqa: E402
from typing import Callable, Dict, List, Optional  # noqa: E402

import numpy as np  # noqa: E402

import chain  # noqa: E402
import config  # noqa: E402
import lattice  # noqa: E402
import pphi2  # noqa: E402
import segal  # noqa: E402
import wick  # noqa: E402
import zeta  # noqa: E402
from experiment_config import ConfigValidationError, load_experiment_config  # noqa: E402
from numerics import ContractViolationError, InvalidInputError, RngStream  # noqa: E402
from polynomial import InvalidInteractionError, Polynomial  # noqa: E402
from reports import CheckReport, all_passed, run_check, write_reports  # noqa: E402

# errors that mean "fix the input", reported with exit code 2
INPUT_ERRORS = (
    ConfigValidationError,
    InvalidInputError,
    InvalidInteractionError,
    ContractViolationError,
    chain.OutOfDomainError,
    segal.CapacityError,
    segal.InvalidCompositionError,
    zeta.NotTraceClassError,
)

Runner = Callable[[dict, Dict[str, float]], List[CheckReport]]


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _max_zero(values) -> float:
    return max([0.0] + [float(v) for v in values])


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------


def build_graph(section: dict) -> lattice.LatticeGraph:
    kind = section["type"]
    if kind == "torus":
        return lattice.LatticeGraph.torus(section["n1"], section["n2"], section["spacing"])
    if kind == "cycle":
        return lattice.LatticeGraph.cycle(section["n"], section["spacing"])
    if kind == "double":
        return lattice.LatticeGraph.reflection_double(section["half_columns"], section["rows"], section["spacing"])
    return lattice.LatticeGraph.from_edges(section["n_vertices"], section["edges"], section["measure"])


def default_sigma(graph: lattice.LatticeGraph) -> np.ndarray:
    """A separating set: two torus rows, two opposite cycle vertices, or the fixed column of a double."""
    if graph.kind == "torus":
        n1 = graph.shape[0]
        rows = [graph.torus_row(0)] + ([graph.torus_row(n1 // 2)] if n1 >= 3 else [])
        return np.concatenate(rows)
    if graph.kind == "cycle":
        return np.array(sorted({0, graph.n_vertices // 2}))
    if graph.kind == "double":
        return graph.fixed
    return np.array([0])


def default_pair(graph: lattice.LatticeGraph):
    if graph.kind == "torus" and graph.shape[0] >= 2:
        return graph.torus_row(0), graph.torus_row(graph.shape[0] // 2)
    n = graph.n_vertices
    if n < 2:
        raise InvalidInputError("bayes_check needs at least two vertices")
    return np.arange(0, n // 2), np.arange(n // 2, n)


# ---------------------------------------------------------------------------
# chain
# ---------------------------------------------------------------------------


def run_chain(cfg: dict, tol: Dict[str, float]) -> List[CheckReport]:
    section = cfg["chain"]
    mass = section["benchmark_mass"]
    p = chain.benchmark_polynomial(mass) if mass else Polynomial.interaction(section["polynomial"])
    _progress(f"Building transfer operator for P = {p.to_list()} on {section['order']} nodes")
    t = chain.build_transfer(p, chain.default_grid(p, section["order"]))
    n_list = list(section["n_list"])
    reports = []

    if mass:
        def benchmark() -> dict:
            rows = chain.gaussian_benchmark(mass, n_list + [config.FREE_ENERGY_CHECK_N], t)
            last = rows[-1]
            return {
                "limit": last["limit"],
                "free_energy_normalized": last["free_energy_normalized"],
                "circulant_per_site": last["circulant_normalized"] / last["n"],
                "max_error": max(
                    abs(last["free_energy_normalized"] - last["limit"]),
                    abs(last["circulant_normalized"] / last["n"] - last["limit"]),
                ),
                "rows": rows,
            }

        reports.append(run_check("benchmark_limit", benchmark, tol["benchmark_limit"], table_key="rows"))

    def chapman() -> dict:
        z_in, z_out = 0.3, -0.2
        pairs = [(1, 1), (2, 3), (3, 5)]
        residuals = [chain.chapman_kolmogorov_residual(t, a, b, z_in, z_out) for a, b in pairs]
        return {"pairs": pairs, "residuals": residuals, "max_error": max(residuals)}

    def three_ways() -> dict:
        values = chain.trace_three_ways(t, section["trace_n"])
        return {"traces": values, "max_error": (max(values) - min(values)) / abs(values[0])}

    def spectrum() -> dict:
        summary = chain.spectral_report(t).summary()
        return {**summary, "ok": summary["ground_min"] > 0 and summary["alpha"] < 1}

    def free_energy() -> dict:
        rows = chain.free_energy(t, n_list + [config.FREE_ENERGY_CHECK_N])
        return {"n": rows[-1]["n"], "max_error": rows[-1]["error"], "rows": rows}

    def mixing() -> dict:
        rows = chain.mixing_check(t, np.tanh, np.square, section["k_max"])
        return {"max_error": _max_zero(r["value"] - r["bound"] for r in rows), "rows": rows}

    def gibbs() -> dict:
        insertions = [(1, np.tanh), (3, np.tanh)]
        limit = chain.gibbs_expectation(t, insertions)
        rows = [
            {"n": n, "value": chain.gibbs_expectation(t, insertions, n)}
            for n in sorted(set(n_list + [config.FREE_ENERGY_CHECK_N]))
            if n >= 3
        ]
        return {"limit": limit, "max_error": abs(rows[-1]["value"] - limit), "rows": rows}

    reports.append(run_check("chapman_kolmogorov", chapman, tol["chapman_kolmogorov"]))
    reports.append(run_check("trace_three_ways", three_ways, tol["trace_three_ways"]))
    reports.append(run_check("spectral_report", spectrum))
    reports.append(run_check("free_energy", free_energy, tol["free_energy_limit"], table_key="rows"))
    reports.append(run_check("mixing", mixing, tol["mixing"], table_key="rows"))
    reports.append(run_check("gibbs", gibbs, tol["gibbs"], table_key="rows"))
    return reports


# ---------------------------------------------------------------------------
# lattice
# ---------------------------------------------------------------------------


def run_lattice(cfg: dict, tol: Dict[str, float]) -> List[CheckReport]:
    section = cfg["lattice"]
    seed = cfg["seed"]
    graph = build_graph(section["graph"])
    q = lattice.PrecisionOperator(graph, section["mass"])
    sigma = np.array(section["sigma"]) if section["sigma"] is not None else default_sigma(graph)
    if section["s1"] is not None and section["s2"] is not None:
        s1, s2 = np.array(section["s1"]), np.array(section["s2"])
    else:
        s1, s2 = default_pair(graph)
    _progress(f"Lattice suite on {graph.kind} graph with {graph.n_vertices} vertices, |sigma| = {sigma.size}")
    reports = [
        run_check("bfk", lambda: lattice.bfk_check(q, sigma), tol["bfk"]),
        run_check("dn_inverse", lambda: lattice.dn_inverse_check(q, sigma), tol["dn_inverse"]),
        run_check("markov", lambda: lattice.markov_check(q, sigma), tol["markov"]),
        run_check("trace_law", lambda: lattice.trace_law_check(q, sigma), tol["trace_law"]),
        run_check(
            "bayes",
            lambda: lattice.bayes_check(q, s1, s2, RngStream(seed, 1), section["bayes_points"]),
            tol["bayes"],
        ),
    ]
    if len(graph.components_without(sigma)) >= 2:
        reports.append(run_check("dissection", lambda: lattice.dissection_check(q, sigma), tol["bfk"]))

    double = build_graph({**section["double"], "type": "double"})
    q_double = lattice.PrecisionOperator(double, section["mass"])
    reports.append(run_check("rp", lambda: lattice.rp_check(q_double), tol["rp"]))

    def perturb() -> dict:
        size = section["quad_perturb_size"]
        small, v = lattice.random_quad_perturbation(size, section["mass"], RngStream(seed, 2))
        _progress(f"Quadratic perturbation: {section['mc_samples']} samples on a random {size}-vertex graph")
        result = lattice.quad_perturb_check(small, v, section["mc_samples"], RngStream(seed, 3))
        result["ok"] = result["sigmas"] <= config.MC_SIGMA
        return result

    reports.append(run_check("quad_perturb", perturb, tol["quad_perturb"]))

    reports.append(
        run_check(
            "tadpole_regression",
            lambda: pphi2.tadpole_regression(section["tadpole_spacings"], 1.0, section["mass"]),
            table_key="rows",
        )
    )
    return reports


# ---------------------------------------------------------------------------
# pphi2 and wick
# ---------------------------------------------------------------------------


def _wick_suite(seed: int, samples: int) -> List[CheckReport]:
    def hermite_values() -> dict:
        x = np.linspace(-3.0, 3.0, 13)
        h2 = np.abs(wick.hermite(2, x) - (x * x - 1.0)).max()
        h4 = np.abs(wick.hermite(4, x) - (x**4 - 6.0 * x * x + 3.0)).max()
        return {"h2_error": float(h2), "h4_error": float(h4), "ok": bool(max(h2, h4) <= 1e-12)}

    def covariance() -> dict:
        exact = wick.wick_cov(4, 4, 0.5, 1.0, 1.0)
        mean, stderr = wick.wick_cov_mc(4, 4, 0.5, 1.0, 1.0, samples, RngStream(seed, 20))
        sigmas = abs(mean - exact) / stderr
        return {"exact": exact, "mc": mean, "mc_stderr": stderr, "sigmas": sigmas, "ok": sigmas <= config.MC_SIGMA}

    def isserlis() -> dict:
        cov = np.array([[1.0, 0.4, 0.2], [0.4, 2.0, 0.3], [0.2, 0.3, 1.5]])
        eighth = wick.isserlis(cov, [0] * 8)
        mixed = wick.isserlis(cov, [0, 0, 1, 1])
        errors = [abs(eighth - 105.0 * cov[0, 0] ** 4), abs(mixed - (cov[0, 0] * cov[1, 1] + 2.0 * cov[0, 1] ** 2))]
        return {"errors": errors, "ok": max(errors) <= 1e-12}

    def orderings() -> dict:
        result = wick.compose_orderings(6, 0.3, -0.7)
        result["ok"] = result["max_error"] <= 1e-12
        return result

    def hypercontractivity() -> dict:
        return wick.hypercontractivity_check(4, 4.0, samples, RngStream(seed, 21))

    return [
        run_check("hermite", hermite_values),
        run_check("wick_cov", covariance),
        run_check("isserlis", isserlis),
        run_check("compose_orderings", orderings),
        run_check("hypercontractivity", hypercontractivity),
    ]


def run_pphi2(cfg: dict, tol: Dict[str, float]) -> List[CheckReport]:
    section = cfg["pphi2"]
    seed = cfg["seed"]
    graph = build_graph(section["graph"])
    q = lattice.PrecisionOperator(graph, section["mass"])
    spec = pphi2.InteractionSpec(Polynomial.interaction(section["polynomial"]))
    variances = section["wick_variance"]
    samples = section["samples"]
    _progress(f"P(phi)_2 suite on {graph.n_vertices} vertices with P = {spec.p.to_list()}, {samples} samples")
    actions = pphi2.sample_actions(spec, q, samples, RngStream(seed, 10), variances)
    reports = []

    def tadpole_field() -> dict:
        values = pphi2.tadpole(q).values
        return {"min": float(values.min()), "max": float(values.max()), "ok": bool(values.min() > 0)}

    def action_mean() -> dict:
        # every :x^k: with k >= 1 has mean zero under its own tadpole
        exact = spec.p.coefficients[0] * float(spec.weights(q).sum())
        stderr = float(actions.std(ddof=1) / math.sqrt(actions.size))
        sigmas = abs(float(actions.mean()) - exact) / stderr if stderr else 0.0
        return {"exact": exact, "mc": float(actions.mean()), "mc_stderr": stderr, "sigmas": sigmas,
                "ok": sigmas <= config.MC_SIGMA}

    def lower_bound() -> dict:
        bound = pphi2.action_lower_bound(spec, q, variances)
        return {"bound": bound, "sample_min": float(actions.min()), "ok": bool(actions.min() >= bound - 1e-9)}

    def variance() -> dict:
        exact = pphi2.polynomial_action_variance(spec, q)
        centred = (actions - actions.mean()) ** 2
        stderr = float(centred.std(ddof=1) / math.sqrt(actions.size))
        sigmas = abs(float(centred.mean()) - exact) / stderr if stderr else 0.0
        return {"exact": exact, "mc": float(centred.mean()), "mc_stderr": stderr, "sigmas": sigmas,
                "ok": sigmas <= config.MC_SIGMA}

    def partition() -> dict:
        estimate, stderr = pphi2.partition_mc(spec, q, samples, RngStream(seed, 11), variances)
        result = {"mc": estimate, "mc_stderr": stderr, "ok": True}
        if spec.p.degree <= 2:
            exact = pphi2.quadratic_partition(spec, q, variances)
            sigmas = abs(estimate - exact) / stderr if stderr else 0.0
            result.update({"exact": exact, "sigmas": sigmas, "ok": sigmas <= config.MC_SIGMA})
        return result

    reports.append(run_check("tadpole", tadpole_field))
    if variances is None:
        reports.append(run_check("action_mean", action_mean))
        reports.append(run_check("action_variance", variance))
    reports.append(run_check("action_lower_bound", lower_bound))
    reports.append(run_check("partition_mc", partition))

    sigma = np.array(section["sigma"]) if section["sigma"] is not None else default_sigma(graph)
    if len(graph.components_without(sigma)) >= 2:
        reports.append(
            run_check(
                "decouple",
                lambda: pphi2.decouple_check(q, sigma, spec, RngStream(seed, 12), variances=variances),
                tol["decouple"],
            )
        )
    if graph.kind == "torus":
        def mollify() -> dict:
            rows = pphi2.mollifier_compare(q, spec, section["eps_list"], RngStream(seed, 13), section["mollifier_samples"])
            return {"rows": rows, "ok": all(r.get("monotone", True) for r in rows)}

        reports.append(run_check("mollifier", mollify, table_key="rows"))

    reports.extend(_wick_suite(seed, section["wick_samples"]))
    return reports


# ---------------------------------------------------------------------------
# segal
# ---------------------------------------------------------------------------


def run_segal(cfg: dict, tol: Dict[str, float]) -> List[CheckReport]:
    section = cfg["segal"]
    seed = cfg["seed"]
    interaction = None
    if section["polynomial"] is not None:
        interaction = pphi2.InteractionSpec(Polynomial.interaction(section["polynomial"]))
    slab = segal.CylinderSlab(
        section["n_transverse"], section["n_layers"], section["spacing"], section["mass"], interaction
    )
    _progress(
        f"Segal suite on a {section['n_transverse']}-site ring, {section['n_layers']} interior layers, "
        f"{'interacting' if slab.interacting else 'free'}"
    )
    order = section["order"]
    wide = segal.factorized(slab)
    if wide:
        _progress(f"Ring wider than MAX_TRANSVERSE={config.MAX_TRANSVERSE}: amplitudes run per Fourier mode")
        operators = [u for _, u in segal.mode_operators(slab, order)]
    else:
        operators = [segal.build_amplitude(slab, order=order, interior_order=order)]
    n = section["trace_n"]

    def adjoint() -> dict:
        errors = [segal.adjoint_check(u)["max_error"] for u in operators]
        return {"amplitudes": len(operators), "max_error": max(errors)}

    reports = [
        run_check(
            "compose",
            lambda: segal.compose_check(slab, order=order),
            tol["compose_interacting" if slab.interacting else "compose_free"],
        ),
        run_check("adjoint", adjoint, tol["adjoint"]),
    ]

    if slab.interacting:
        def trace_mc() -> dict:
            result = segal.trace_check(slab, n, RngStream(seed, 30), section["samples"], order)
            result["ok"] = result["sigmas"] <= config.MC_SIGMA
            return result

        reports.append(run_check("trace", trace_mc))
    else:
        one_site = segal.CylinderSlab(section["n_transverse"], 0, section["spacing"], section["mass"])
        reports.extend([
            run_check("trace", lambda: segal.trace_check(slab, n, order=order), tol["trace_free"]),
            run_check(
                "decomposition",
                lambda: segal.decomposition_check(slab, n, one_site, n * (slab.n_layers + 1)),
                tol["trace_free"],
            ),
            run_check(
                "amplitude_density",
                lambda: segal.amplitude_density_check(slab, RngStream(seed, 31), section["amplitude_points"]),
                tol["amplitude_density"],
            ),
            run_check(
                "factorization",
                lambda: segal.factorization_check(slab, RngStream(seed, 32)),
                tol["factorization"],
            ),
        ])

    def spectrum() -> dict:
        suite = segal.spectral_suite(operators[0], k_max=section["k_max"])
        mixing_gap = _max_zero(r["value"] - r["bound"] for r in suite["mixing"])
        energy_gap = _max_zero(r["error"] - r["bound"] - 1e-12 for r in suite["free_energy"])
        return {
            **suite["spectrum"],
            "ground_positive": suite["ground_positive"],
            "mixing_gap": mixing_gap,
            "free_energy_gap": energy_gap,
            "rows": suite["free_energy"],
            "ok": suite["ground_positive"] and mixing_gap == 0.0 and energy_gap == 0.0,
        }

    # the transfer spectrum needs the full tensor grid
    if not wide:
        reports.append(run_check("spectral_suite", spectrum, table_key="rows"))
    return reports


# ---------------------------------------------------------------------------
# zeta
# ---------------------------------------------------------------------------


def run_zeta(cfg: dict, tol: Dict[str, float]) -> List[CheckReport]:
    section = cfg["zeta"]
    m, length, height, t_split = section["mass"], section["circumference"], section["height"], section["t_split"]
    _progress(f"Zeta suite at m = {m}, L = {length}, T = {height}")
    circle = zeta.circle_family(m, length)

    def omega0() -> dict:
        value = zeta.heat_constant_term(zeta.sqrt_circle_family(m, length))
        return {"zeta0": value, "max_error": abs(value)}

    def fredholm() -> dict:
        rng = RngStream(cfg["seed"], 40).generator()
        a = 0.2 * rng.standard_normal((6, 6))
        b = 0.2 * rng.standard_normal((6, 6))
        commutation = zeta.commutation_check(a, b)
        values = 0.5 ** np.arange(1, 30)
        product = zeta.fredholm_det(values, 0.7)
        series = zeta.fredholm_det_series([float(np.sum(values**k)) for k in range(1, 30)], 0.7)
        return {
            "commutation_error": commutation["max_error"],
            "product": product,
            "series": series,
            "max_error": max(commutation["max_error"], abs(product - series)),
        }

    return [
        run_check("circle_det", lambda: zeta.circle_check(m, length, t_split), tol["circle_det"]),
        run_check("zeta_omega0", omega0, tol["zeta_omega0"]),
        run_check("t_split", lambda: zeta.t_split_check(circle, t_split), tol["t_split"]),
        run_check("bfk_torus", lambda: zeta.bfk_torus_check(m, length, height), tol["bfk_torus"]),
        run_check("rn_det", lambda: zeta.rn_det_identity(m, length, height), tol["rn_det"]),
        run_check("dn_energy", lambda: zeta.dn_cylinder(m, length, height).energy_check(1, 0.7, -0.3), tol["dn_energy"]),
        run_check("fredholm", fredholm, tol["fredholm"]),
    ]


RUNNERS: Dict[str, Runner] = {
    "chain": run_chain,
    "lattice": run_lattice,
    "pphi2": run_pphi2,
    "segal": run_segal,
    "zeta": run_zeta,
}


# ---------------------------------------------------------------------------
# cli
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON experiment config")
    common.add_argument("--preset", type=str, default=None, choices=sorted(config.PRESETS), help="built-in config")
    common.add_argument("--seed", type=int, default=None, help="seed for every random stream (overrides the config)")
    common.add_argument("--out", type=str, default=None, help="report path (default: $LAB_OUTPUT_DIR/<subcommand>.<format>)")
    common.add_argument("--format", type=str, default=None, choices=["json", "csv"], help="report format")
    common.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every tolerance by this factor")
    common.add_argument("--timings", action="store_true", help="write runtime_ms for each check")
    common.add_argument("--dry-run", action="store_true", help="validate the config, print it and exit")

    parser = argparse.ArgumentParser(description="Constructive-QFT numerical lab")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("chain", parents=[common], help="circular spin chain and transfer operators")
    sub.add_parser("lattice", parents=[common], help="Gaussian free field identities on graphs")
    sub.add_parser("pphi2", parents=[common], help="Wick-ordered interactions and Wick calculus")
    sub.add_parser("segal", parents=[common], help="cylinder slab amplitudes")
    sub.add_parser("zeta", parents=[common], help="zeta and Fredholm determinants")
    return parser


def report_path(cfg: dict, out: Optional[str]) -> Path:
    if out:
        return Path(out)
    if cfg["output"]:
        return Path(cfg["output"])
    directory = os.getenv("LAB_OUTPUT_DIR") or config.DEFAULT_OUTPUT_DIR
    return Path(directory) / f"{cfg['subcommand']}.{cfg['format']}"


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if not args.tolerance_scale > 0:
            raise ConfigValidationError("--tolerance-scale", f"must be positive, got {args.tolerance_scale}")
        cfg = load_experiment_config(
            args.subcommand,
            path=args.config,
            preset=args.preset,
            overrides={"seed": args.seed, "output": args.out, "format": args.format},
        )
    except ConfigValidationError as exc:
        print(f"Invalid config: {exc}", file=sys.stderr)
        return 2

    if args.dry_run:
        print(json.dumps(cfg, sort_keys=True, indent=2))
        return 0

    tolerances = {name: value * args.tolerance_scale for name, value in cfg["tolerances"].items()}
    try:
        reports = RUNNERS[args.subcommand](cfg, tolerances)
    except INPUT_ERRORS as exc:
        print(f"Invalid input: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"Experiment failed: {exc}", file=sys.stderr)
        raise

    path = write_reports(reports, cfg, report_path(cfg, args.out), cfg["format"], args.timings)
    failed = [r.name for r in reports if not r.passed]
    for r in reports:
        _progress(f"  {'pass' if r.passed else 'FAIL'}  {r.name}")
    if failed:
        _progress(f"{len(failed)} of {len(reports)} checks failed: {', '.join(failed)}")
    print(path)
    return 0 if all_passed(reports) else 1


if __name__ == "__main__":
    sys.exit(main())
