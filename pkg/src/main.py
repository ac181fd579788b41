"""
Command-line front end: solve, periods, reduce, nahm, verify and scan.

Results go to stdout (plain summary, JSON or CSV); logs go to stderr.
Exit codes: 0 success, 2 invalid input, 3 negative verdict, 4 numerical failure.
"""
import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from src.config import settings
from src.exceptions import DomainError, MonopoleError
from src.models.curve import SymmetricCurve
from src.models.report import RunReport, matrix_rows, write_csv
from src.models.tolerance import ToleranceConfig
from src.services import es_solver, identities, nahm_flow, reduction, riemann_theta, trigonal_curve
from src.utils.logger import configure_logging, setup_logger
from src.utils.validators import (
    validate_curve_parameter,
    validate_grid,
    validate_modulus,
    validate_scan_bound,
    validate_signs,
    validate_suite,
    validate_winding_pair,
)

logger = setup_logger(__name__)

Table = Tuple[List[str], List[List[Any]]]

ES_TOL = 1e-9
QUADRATURE_TOL = 1e-7
FIRST_ROW_TOL = 1e-7
THETA_SPLIT_TOL = 1e-9
NAHM_TOL = 1e-9
CLOSED_FORM_TOL = 1e-7
NU_TOL = 1e-10
SPECTRAL_TOL = 1e-6

# Sample point (z; w) for the theta splitting cross-check
SPLIT_Z = 0.11 + 0.07j
SPLIT_W = np.array([0.05 - 0.02j, -0.13 + 0.04j, 0.08 + 0.01j])


def _tolerances(args: argparse.Namespace) -> ToleranceConfig:
    return ToleranceConfig.from_settings(
        abs_tol=args.abs_tol, rel_tol=args.rel_tol, theta_tol=args.theta_tol, max_terms=args.max_terms
    )


def _tolerance_map(cfg: ToleranceConfig) -> Dict[str, float]:
    return {"abs_tol": cfg.abs_tol, "rel_tol": cfg.rel_tol, "theta_tol": cfg.theta_tol, "max_terms": cfg.max_terms}


def _es_outputs(es) -> Dict[str, Any]:
    return {
        "t": es.t,
        "b": es.b,
        "alpha": es.alpha,
        "chi": es.chi,
        "chi_cuberoot": es.chi_cuberoot,
        "xi": es.xi,
        "d": es.d,
        "n": es.n,
        "m": es.m,
    }


def _key_value_table(report: RunReport) -> Table:
    """Long-format CSV of every output: scalars as (name, , , value), matrices entrywise."""
    rows: List[List[Any]] = []
    for key, value in report.outputs.items():
        arr = np.asarray(value) if isinstance(value, (np.ndarray, list, tuple)) else None
        if arr is not None and arr.dtype.kind in "biufc" and arr.ndim in (1, 2):
            rows.extend(matrix_rows(key, arr.reshape(1, -1) if arr.ndim == 1 else arr))
        elif isinstance(value, (int, float, complex, np.number)):
            rows.append([key, "", "", value])
        else:
            rows.append([key, "", "", str(value)])
    for key, value in report.residuals.items():
        rows.append([f"residual:{key}", "", "", float(value)])
    return ["name", "i", "j", "value"], rows


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(args: argparse.Namespace, cfg: ToleranceConfig) -> Tuple[RunReport, Optional[Table]]:
    n1, m1 = validate_winding_pair(args.n1, args.m1)
    es = es_solver.solve_es(n1, m1, cfg)
    periods = trigonal_curve.periods_symmetric(es.b, cfg)
    residuals = es_solver.es_residuals(periods, es)
    outputs = _es_outputs(es)
    closed = es_solver.ramanujan_t(n1, m1)
    if closed is not None:
        outputs["t_closed_form"] = closed
        residuals["t_closed_form"] = abs(es.t - closed)
    report = RunReport(
        command="solve",
        inputs={"n1": n1, "m1": m1},
        outputs=outputs,
        residuals=residuals,
        tolerances={"es": ES_TOL},
        provenance={
            "t": "signature-3 ratio equation (2n1-m1)/(m1+n1) = F(t)/F(1-t)",
            "b": "b = (1-2t)/sqrt(t(1-t))",
            "chi_cuberoot": "a-period normalization of du1",
            "xi": "x = xi(Hn + rho^2 m)",
        },
    )
    if max(residuals["es_periods"], residuals["x_vector"]) > ES_TOL:
        report.verdict = "ES residual above tolerance"
        report.exit_code = 4
    return report, None


def _quadrature_deltas(b: float, periods, cfg: ToleranceConfig) -> Dict[str, float]:
    """First-sheet integrals 0 → α and 0 → β by quadrature against the closed forms."""
    sextic = SymmetricCurve.from_b(b).to_sextic()
    quad_I = trigonal_curve.quad_period(sextic, 0j, 1, 1, cfg)
    quad_J = trigonal_curve.quad_period(sextic, 0j, 4, 1, cfg)
    return {
        "quadrature_I": float(np.max(np.abs(quad_I - periods.I))),
        "quadrature_J": float(np.max(np.abs(quad_J - periods.J))),
    }


def cmd_periods(args: argparse.Namespace, cfg: ToleranceConfig) -> Tuple[RunReport, Optional[Table]]:
    b = validate_curve_parameter(args.b)
    periods = trigonal_curve.periods_symmetric(b, cfg)
    residuals = trigonal_curve.structure_residuals(periods)
    tolerances = {"structure": 1e-9}
    if args.verify_quadrature:
        residuals.update(_quadrature_deltas(b, periods, cfg))
        tolerances["quadrature"] = QUADRATURE_TOL
    report = RunReport(
        command="periods",
        inputs={"b": b, "verify_quadrature": args.verify_quadrature},
        outputs={
            "alpha": periods.alpha,
            "A": periods.A,
            "B": periods.B,
            "tau_a": periods.tau_a,
            "tau_b": periods.tau_b.entries,
            "x": periods.x,
            "y": periods.y,
        },
        residuals=residuals,
        tolerances=tolerances,
        provenance={
            "A": "hypergeometric I, J integrals assembled over the a-cycles",
            "B": "B = H A Lambda",
            "tau_b": "A B^-1, equal to rho(H - (1-rho) x x^T / x^T H x)",
            "y": "second-kind a-periods, y.Hx = -2pi/sqrt3",
        },
    )
    worst_quad = max(residuals.get("quadrature_I", 0.0), residuals.get("quadrature_J", 0.0))
    if worst_quad > QUADRATURE_TOL:
        report.verdict = "quadrature disagrees with closed form"
        report.exit_code = 4
    return report, None


def cmd_reduce(args: argparse.Namespace, cfg: ToleranceConfig) -> Tuple[RunReport, Optional[Table]]:
    n1, m1 = validate_winding_pair(args.n1, args.m1)
    es = es_solver.solve_es(n1, m1, cfg)
    periods = trigonal_curve.periods_symmetric(es.b, cfg)
    reduced = reduction.reduce(periods.tau_b, es, cfg)
    winding = reduction.transformed_winding(reduced.sigma, es)

    split = riemann_theta.theta_reduce(SPLIT_Z, SPLIT_W, reduced.tau_prime, cfg)
    direct = riemann_theta.theta(np.concatenate([[SPLIT_Z], SPLIT_W]), reduced.tau_prime, cfg=cfg)
    report = RunReport(
        command="reduce",
        inputs={"n1": n1, "m1": m1},
        outputs={
            "sigma": reduced.sigma.matrix,
            "tau_prime": reduced.tau_prime.entries,
            "d": reduced.d,
            "alpha_entry": reduced.alpha_entry,
            "alpha_gcd": reduction.alpha_gcd(n1, m1),
            "winding": [str(w) for w in winding],
            "theta_split": split,
        },
        residuals={
            "first_row": reduced.first_row_residual,
            "theta_split": float(abs(split - direct) / max(1.0, abs(direct))),
        },
        tolerances={"first_row": FIRST_ROW_TOL, "theta_split": THETA_SPLIT_TOL},
        provenance={
            "sigma": "integer symplectic basis with a''1 = ES cycle",
            "tau_prime": "(A tau + B)(C tau + D)^-1",
            "winding": "ES vector in the reduced frame, exact rationals",
        },
    )
    if report.residuals["first_row"] > FIRST_ROW_TOL:
        report.verdict = "reduced first row is not (1, 0, 0, 0)"
        report.exit_code = 4
    elif report.residuals["theta_split"] > THETA_SPLIT_TOL:
        report.verdict = "theta splitting disagrees with the direct sum"
        report.exit_code = 4
    return report, None


def _nahm_table(sample) -> Table:
    n = sample.T1.shape[1]
    header = ["z"]
    for name in ("T1", "T2", "T3"):
        header.extend(f"{name}_{i + 1}{j + 1}" for i in range(n) for j in range(n))
    header.append("nahm_residual")
    rows = []
    for idx, z in enumerate(sample.z_nodes):
        row: List[Any] = [float(z)]
        for T in (sample.T1, sample.T2, sample.T3):
            row.extend(complex(v) for v in T[idx].ravel())
        row.append(float(sample.residual[idx]))
        rows.append(row)
    return header, rows


def _flow_verdict(report: RunReport, limits: Dict[str, float]) -> None:
    failed = [name for name, tol in limits.items() if report.residuals[name] > tol]
    if failed:
        report.verdict = "residual above tolerance: " + ", ".join(failed)
        report.exit_code = 4
    else:
        report.verdict = "pole-free interior"


def _charge2(args, cfg, grid) -> Tuple[RunReport, Optional[Table]]:
    k = validate_modulus(args.k)
    sample = nahm_flow.charge2_nahm(k, grid, cfg, step=args.step)
    spectral = nahm_flow.charge2_spectral_data(k, cfg)
    frame = nahm_flow.select_odd_characteristic(
        spectral.tau, spectral.phi_inf, spectral.inf_expansion, cfg, phi_zero=spectral.phi_zero
    )
    nu = nahm_flow.nu_differences_theta(spectral, frame, cfg)
    report = RunReport(
        command="nahm",
        inputs={"charge": 2, "k": k, "nodes": len(grid), "step": args.step or settings.RK4_STEP},
        outputs={"nu_21": nu[1, 0], "odd_char": str(frame.odd_char)},
        residuals={
            "nahm": sample.metadata["window_residual"],
            "nahm_full_grid": sample.max_residual,
            "lax": float(np.max(sample.lax_residual)),
            "closed_form": sample.metadata["closed_form_deviation"],
            "nu_21": float(abs(nu[1, 0] - 0.5j * np.pi)),
        },
        tolerances={"nahm": NAHM_TOL, "closed_form": CLOSED_FORM_TOL, "nu_21": NU_TOL},
        provenance={
            "T": "gauge flow C' = CQ0/2 rotated onto the Jacobi-elliptic closed form",
            "closed_form": f"max deviation on |z| <= {nahm_flow.CLOSED_FORM_WINDOW}",
            "nu_21": "theta logarithmic derivative at the points over zeta = 0",
        },
    )
    _flow_verdict(report, {"closed_form": CLOSED_FORM_TOL, "nahm": NAHM_TOL})
    return report, _nahm_table(sample)


def _charge3(args, cfg, grid) -> Tuple[RunReport, Optional[Table]]:
    n1, m1 = validate_winding_pair(args.n1, args.m1)
    eps = validate_signs(args.eps, 3)
    es = es_solver.solve_es(n1, m1, cfg)
    periods = trigonal_curve.periods_symmetric(es.b, cfg)
    zeros = nahm_flow.zero_scan(es, periods, cfg=cfg)
    interior = nahm_flow.interior_zeros(zeros)
    inputs = {"charge": 3, "n1": n1, "m1": m1, "nodes": len(grid), "eps": list(eps or (1, 1))}
    zero_z = [s - 1.0 for s, _, _ in zeros]
    if interior:
        logger.warning(f"({n1}, {m1}) is ES-solved but the flow has interior poles at z = {[s - 1 for s in interior]}")
        report = RunReport(
            command="nahm",
            inputs=inputs,
            outputs={
                "b": es.b,
                "chi_cuberoot": es.chi_cuberoot,
                "theta_zeros_z": zero_z,
                "numerator_abs": [num for _, _, num in zeros],
                "interior_poles_z": [s - 1.0 for s in interior],
            },
            residuals={"theta_at_zero": max(v for _, v, _ in zeros)},
            provenance={"theta_zeros_z": "zeros of theta(sU - K) for s = z + 1 in [0, 2]"},
            verdict="interior poles",
            exit_code=3,
        )
        return report, None

    sample = nahm_flow.charge3_nahm(es, periods, eps, grid, cfg, step=args.step)
    report = RunReport(
        command="nahm",
        inputs=inputs,
        outputs={"b": es.b, "chi_cuberoot": es.chi_cuberoot, "theta_zeros_z": zero_z},
        residuals={
            "nahm": sample.max_residual,
            "lax": sample.metadata["max_lax_residual"],
            "spectral_drift": sample.metadata["spectral_drift"],
            "spectral_mismatch": sample.metadata["spectral_mismatch"],
        },
        tolerances={"nahm": NAHM_TOL, "spectral": SPECTRAL_TOL},
        provenance={
            "T": "gauge flow C' = CQ0/2 from the theta-function Q0",
            "spectral_mismatch": "det(eta - A(zeta)) against eta^3 + chi(zeta^6 + b zeta^3 - 1)",
        },
    )
    _flow_verdict(report, {"spectral_mismatch": SPECTRAL_TOL})
    return report, _nahm_table(sample)


def cmd_nahm(args: argparse.Namespace, cfg: ToleranceConfig) -> Tuple[RunReport, Optional[Table]]:
    nodes, margin = validate_grid(args.nodes, args.margin, floor=settings.GRID_MARGIN)
    grid = nahm_flow.default_grid(nodes, margin)
    if args.charge == 2:
        if args.k is None:
            raise DomainError("Charge 2 needs --k", {"charge": 2})
        return _charge2(args, cfg, grid)
    if args.n1 is None or args.m1 is None:
        raise DomainError("Charge 3 needs --n1 and --m1", {"charge": 3})
    return _charge3(args, cfg, grid)


def cmd_verify(args: argparse.Namespace, cfg: ToleranceConfig) -> Tuple[RunReport, Optional[Table]]:
    names = sorted(identities.SUITES) if args.suite == "all" else [
        validate_suite(args.suite, list(identities.SUITES))
    ]
    residuals: Dict[str, float] = {}
    failed = []
    for name in names:
        suite = identities.run_suite(name, cfg)
        residuals.update({f"{name}.{check}": value for check, value in suite.items()})
        if not identities.suite_passed(name, suite):
            failed.append(name)
    report = RunReport(
        command="verify",
        inputs={"suite": args.suite},
        outputs={"suites": names, "failed": failed},
        residuals=residuals,
        tolerances={name: identities.SUITE_TOLERANCES[name] for name in names},
        verdict="failed: " + ", ".join(failed) if failed else "passed",
        exit_code=3 if failed else 0,
    )
    rows = [[key, value, identities.SUITE_TOLERANCES[key.split(".")[0]]] for key, value in residuals.items()]
    return report, (["check", "residual", "tolerance"], rows)


def _scan_pair(pair: Tuple[int, int], cfg: ToleranceConfig, zeros: bool) -> Dict[str, Any]:
    n1, m1 = pair
    row: Dict[str, Any] = {"n1": n1, "m1": m1}
    try:
        es = es_solver.solve_es(n1, m1, cfg)
        periods = trigonal_curve.periods_symmetric(es.b, cfg)
        row.update({"t": es.t, "b": es.b, "chi_cuberoot": es.chi_cuberoot, "d": es.d})
        row.update(es_solver.es_residuals(periods, es))
        if zeros:
            found = nahm_flow.zero_scan(es, periods, cfg=cfg)
            row["interior_zeros"] = len(nahm_flow.interior_zeros(found))
    except MonopoleError as e:
        logger.error(f"Scan of ({n1}, {m1}) failed: {e.message}")
        row["error"] = type(e).__name__
    return row


def cmd_scan(args: argparse.Namespace, cfg: ToleranceConfig) -> Tuple[RunReport, Optional[Table]]:
    bound = validate_scan_bound(args.bound)
    pairs = es_solver.admissible_pairs(bound)
    workers = args.threads or settings.MONOPOLE_THREADS
    logger.info(f"Scanning {len(pairs)} admissible pairs with {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(lambda p: _scan_pair(p, cfg, args.zeros), pairs))

    columns = ["n1", "m1", "t", "b", "chi_cuberoot", "d", "es_periods", "x_vector"]
    if args.zeros:
        columns.append("interior_zeros")
    columns.append("error")
    worst = max((max(r["es_periods"], r["x_vector"]) for r in rows if "es_periods" in r), default=0.0)
    errors = [(r["n1"], r["m1"]) for r in rows if "error" in r]
    report = RunReport(
        command="scan",
        inputs={"bound": bound, "zeros": args.zeros, "threads": workers},
        outputs={"pairs": len(rows), "errors": [list(p) for p in errors], "rows": rows},
        residuals={"worst_es": worst},
        tolerances={"es": ES_TOL},
        verdict="ok" if worst <= ES_TOL and not errors else "residual or error in sweep",
        exit_code=0 if worst <= ES_TOL and not errors else 4,
    )
    table_rows = [[r.get(c, "") for c in columns] for r in rows]
    return report, (columns, table_rows)


COMMANDS = {
    "solve": cmd_solve,
    "periods": cmd_periods,
    "reduce": cmd_reduce,
    "nahm": cmd_nahm,
    "verify": cmd_verify,
    "scan": cmd_scan,
}


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", nargs="?", const="-", default=None, metavar="PATH",
                        help="Write the JSON report (to stdout when no path is given).")
    common.add_argument("--compact", action="store_true", help="Compact JSON instead of indented.")
    common.add_argument("--csv", nargs="?", const="-", default=None, metavar="PATH",
                        help="Write the CSV table (to stdout when no path is given).")
    common.add_argument("--abs-tol", type=float, default=None, dest="abs_tol", help="Absolute tolerance.")
    common.add_argument("--rel-tol", type=float, default=None, dest="rel_tol", help="Relative tolerance.")
    common.add_argument("--theta-tol", type=float, default=None, dest="theta_tol",
                        help="Truncation tolerance of theta sums.")
    common.add_argument("--max-terms", type=int, default=None, dest="max_terms",
                        help="Series term limit for the hypergeometric and theta sums.")
    common.add_argument("--log-config", nargs="?", const=settings.LOG_CONFIG_PATH, default=None,
                        dest="log_config", metavar="PATH", help="Apply a YAML logging configuration.")

    p = argparse.ArgumentParser(
        prog="monopole-curves",
        description="Spectral curves and Nahm data of SU(2) monopoles of charge 2 and 3.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="Solve the ES constraints for a winding pair.")
    s.add_argument("n1", type=int)
    s.add_argument("m1", type=int)

    s = sub.add_parser("periods", parents=[common], help="Periods and period matrices of w^3 = z^6 + b z^3 - 1.")
    s.add_argument("b", type=float)
    s.add_argument("--verify-quadrature", action="store_true", dest="verify_quadrature",
                   help="Cross-check the closed forms against numerical quadrature.")

    s = sub.add_parser("reduce", parents=[common], help="Symplectic reduction of the period matrix.")
    s.add_argument("n1", type=int)
    s.add_argument("m1", type=int)

    s = sub.add_parser("nahm", parents=[common], help="Nahm data by the gauge flow.")
    s.add_argument("charge", type=int, choices=[2, 3])
    s.add_argument("--k", type=float, default=None, help="Elliptic modulus (charge 2).")
    s.add_argument("--n1", type=int, default=None, help="Winding n1 (charge 3).")
    s.add_argument("--m1", type=int, default=None, help="Winding m1 (charge 3).")
    s.add_argument("--nodes", type=int, default=181, help="Grid nodes on (-1, 1).")
    s.add_argument("--margin", type=float, default=None, help="Distance kept from z = +-1.")
    s.add_argument("--eps", type=int, nargs=2, default=None, metavar=("E12", "E23"),
                   help="Gauge signs (charge 3).")
    s.add_argument("--step", type=float, default=None, help="RK4 step size.")

    s = sub.add_parser("verify", parents=[common], help="Run a named identity suite.")
    s.add_argument("suite", choices=sorted(identities.SUITES) + ["all"])

    s = sub.add_parser("scan", parents=[common], help="Sweep admissible pairs with |n1|, |m1| <= N.")
    s.add_argument("bound", type=int)
    s.add_argument("--zeros", action="store_true", help="Also run the theta zero scan per pair.")
    s.add_argument("--threads", type=int, default=None, help="Worker count (default MONOPOLE_THREADS).")
    return p


def _write(path: str, text_writer) -> None:
    if path == "-":
        text_writer(sys.stdout)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            text_writer(f)


def emit(report: RunReport, table: Optional[Table], args: argparse.Namespace) -> None:
    if args.json is not None:
        _write(args.json, lambda f: f.write(report.to_json(compact=args.compact) + "\n"))
    if args.csv is not None:
        header, rows = table if table is not None else _key_value_table(report)
        _write(args.csv, lambda f: write_csv(f, header, rows))
    if args.json is None and args.csv is None:
        print("\n".join(report.summary_lines()))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_config:
        configure_logging(args.log_config)

    logger.info(f"{settings.SERVICE_NAME} v{settings.VERSION}: {args.command}")
    try:
        try:
            cfg = _tolerances(args)
        except ValidationError as e:
            raise DomainError("Tolerances must be positive", {"errors": str(e)})
        report, table = COMMANDS[args.command](args, cfg)
        report.tolerances.update(_tolerance_map(cfg))
    except MonopoleError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        payload = RunReport(
            command=args.command, outputs={"error": e.to_dict()}, verdict="error", exit_code=e.exit_code
        ).to_json(compact=getattr(args, "compact", False))
        _write(args.json or "-", lambda f: f.write(payload + "\n"))
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected failure in {args.command}: {e}", exc_info=True)
        return 4

    emit(report, table, args)
    logger.info(f"{args.command} finished: {report.verdict or 'ok'} (exit {report.exit_code})")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
