"""``spectral`` command line: ``run``, ``verify`` and ``print-defaults``.

Exit codes: 0 converged / all checks passed, 1 usage or configuration
error, 2 non-convergence, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import oracle
from .config import ConfigError, ExperimentConfig, DEFAULT_CONFIG, parse_config, render_config
from .functional import evaluate
from .manifold import SkewDirection, random_frame, tangent_of
from .poisson import PoissonError, hartree_potential
from .solvers import (
    HomotopyError,
    SolverOptions,
    extract_spectrum,
    minimize_coupled,
    minimize_linear,
    scf_homotopy_1d,
)

__all__ = ["main", "run", "verify", "build_report"]

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_VERIFY_FAILED = 0, 1, 2, 3

log = logging.getLogger("spectral")


def _options(config: ExperimentConfig) -> SolverOptions:
    s = config.solver
    return SolverOptions(max_iterations=s.max_iterations, gradient_tolerance=s.tolerance,
                         line_search=s.line_search, armijo_c1=s.armijo_c1, backtrack_factor=s.backtrack,
                         fixed_step=s.step, reorthonormalize_every=s.reorthonormalize_every,
                         seed=s.seed, restarts=s.restarts)


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _solve(config: ExperimentConfig) -> dict:
    """Run the configured mode; returns the raw results keyed by solver."""
    op = config.build_operator()
    weights = config.build_weights()
    mode = config.solver.mode
    out = {"operator": op, "weights": weights}
    if mode == "linear":
        out["descent"] = minimize_linear(op, weights, _options(config))
    if mode in ("coupled", "cross-validate"):
        out["descent"] = minimize_coupled(op, weights, options=_options(config))
    if mode in ("scf-1d", "cross-validate"):
        s = config.solver
        out["scf"] = scf_homotopy_1d(op, weights, theta_steps=s.theta_steps, damping=s.damping,
                                     tolerance=s.scf_tolerance)
    return out


def build_report(config: ExperimentConfig, results: dict) -> dict:
    weights = results["weights"]
    op = results["operator"]
    domain = op.domain
    report = {
        "schema": SCHEMA_VERSION,
        "mode": config.solver.mode,
        "config": render_config(config),
        "weights": weights.diagnostics(),
        "grid": {"dim": domain.dim, "n": domain.n, "spacing": list(domain.spacing)},
    }
    converged = True
    sol = results.get("descent")
    if sol is not None:
        spectrum = extract_spectrum(sol)
        report.update({
            "converged": bool(sol.converged),
            "message": sol.message,
            "iterations": int(sol.iterations_used),
            "seed": int(sol.seed),
            "eigenvalues": _floats(sol.eigenvalues),
            "eigenvalues_sorted": _floats(spectrum.sorted_eigenvalues),
            "ordering_consistent": bool(spectrum.ordering_consistent),
            "residuals": _floats(sol.residuals),
            "residual_max": sol.residual_max,
            "j0_final": float(sol.j0),
            "j1_final": float(sol.j1),
            "j_final": float(sol.total),
            "j_history": _floats(sol.functional_history),
            "gram_error": float(sol.gram_error),
            "poisson_residual": float(sol.poisson_residual),
        })
        converged = converged and sol.converged
        V = sol.hartree if sol.hartree is not None else np.zeros(domain.n)
        report["potential"] = _floats(V)
    scf = results.get("scf")
    if scf is not None:
        report["scf"] = {
            "converged": bool(scf.converged),
            "eigenvalues": _floats(scf.eigenvalues),
            "fixed_point_residual": float(scf.fixed_point_residual),
            "theta_path": [[float(t), int(k), float(r)] for t, k, r in scf.theta_path],
            "potential": _floats(scf.potential),
        }
        converged = converged and scf.converged
        if sol is None:
            report["converged"] = bool(scf.converged)
            report["eigenvalues"] = _floats(scf.eigenvalues)
            report["potential"] = _floats(scf.potential)
    if sol is not None and scf is not None:
        report["potential_linf_gap"] = float(np.max(np.abs(sol.hartree - scf.potential)))
        report["eigenvalue_gap"] = float(np.max(np.abs(np.sort(sol.eigenvalues) - np.sort(scf.eigenvalues))))
    report["converged"] = bool(converged)
    return report


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def render_outputs(config: ExperimentConfig, report: dict, coordinates: np.ndarray) -> dict[str, str]:
    """File name -> contents for every configured format."""
    name = config.output.name
    files = {}
    if "json" in config.output.formats:
        files[f"{name}.json"] = json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if "csv" in config.output.formats:
        lam = report.get("eigenvalues", [])
        res = report.get("residuals", [float("nan")] * len(lam))
        rho = report["weights"]["values"]
        rows = [["index", "rho", "eigenvalue", "residual"]]
        rows += [[j + 1, repr(rho[j]), repr(lam[j]), repr(res[j])] for j in range(len(lam))]
        rows.append(["summary", repr(sum(rho)), repr(report.get("j_final", float("nan"))),
                     repr(report.get("residual_max", float("nan")))])
        files[f"{name}.csv"] = _csv_text(rows)
        if "j_history" in report:
            files[f"{name}_history.csv"] = _csv_text(
                [["iteration", "J"]] + [[k, repr(v)] for k, v in enumerate(report["j_history"])])
        if "potential" in report:
            header = [f"x{a}" for a in range(coordinates.shape[1])] + ["V"]
            body = [[repr(float(c)) for c in coordinates[i]] + [repr(v)] for i, v in enumerate(report["potential"])]
            files[f"{name}_potential.csv"] = _csv_text([header] + body)
    return files


def _check_output_dir(config: ExperimentConfig) -> Path:
    directory = Path(config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not os.access(directory, os.W_OK):
        raise ConfigError(f"output directory {directory} is not writable")
    return directory


def run(config: ExperimentConfig, base_dir: Path | None = None) -> tuple[int, dict]:
    """Solve, write the report files and return ``(exit_code, report)``."""
    directory = _check_output_dir(config) if base_dir is None else Path(base_dir)
    start = time.perf_counter()
    results = _solve(config)
    report = build_report(config, results)
    files = render_outputs(config, report, results["operator"].domain.coordinates())
    for fname, text in files.items():
        _atomic_write(directory / fname, text)
    log.info("wall clock %.3f s", time.perf_counter() - start)
    return (EXIT_OK if report["converged"] else EXIT_NOT_CONVERGED), report


def _check(table: list, name: str, value: float, limit: float, ok: bool | None = None) -> None:
    table.append((name, float(value), float(limit), bool(value <= limit) if ok is None else bool(ok)))


def verify(config: ExperimentConfig, stream=None) -> int:
    """Compare the configured instance against the oracles; print a table."""
    stream = stream if stream is not None else sys.stdout
    results = _solve(config)
    op, weights = results["operator"], results["weights"]
    table: list = []
    sol = results.get("descent")
    if sol is not None:
        _check(table, "converged", 0.0 if sol.converged else 1.0, 0.0)
        _check(table, "residual_max", sol.residual_max, 1e-6)
        _check(table, "gram_error", sol.max_gram_error, 1e-8)
        history = np.asarray(sol.functional_history)
        _check(table, "monotone_descent", float(np.max(np.diff(history), initial=0.0)), 1e-14)
        spectrum = extract_spectrum(sol)
        _check(table, "ordering", float(spectrum.violations), 0.0)
    if config.solver.mode == "linear":
        if op.n <= 512:
            ref = oracle.dense_eig(op.dense()).eigenvalues[: weights.M]
            gap = np.max(np.abs(np.sort(sol.eigenvalues) - ref) / np.maximum(np.abs(ref), 1e-300))
            _check(table, "oracle_eigenvalues", gap, 1e-8)
    if config.solver.mode in ("coupled", "cross-validate"):
        # away from the minimizer, where both sides of the comparison are O(1)
        rng = np.random.default_rng(config.solver.seed)
        probe = random_frame(op.domain, weights.M, config.solver.seed + 1000)
        J = lambda f: evaluate(f, op, weights).total  # noqa: E731
        ev = evaluate(probe, op, weights)
        G = ev.gradient().riemannian_gradient
        worst = 0.0
        for _ in range(5):
            d = SkewDirection.random(probe, rng)
            pairing = probe.inner(G, tangent_of(d, probe))
            fd = oracle.fd_directional_derivative(J, probe, d, 1e-4)
            worst = max(worst, abs(pairing - fd) / max(abs(fd), 1e-300))
        _check(table, "gradient_fd", worst, 1e-5)
        h = hartree_potential(sol.frame, weights, op.domain, check_duality=None)
        _check(table, "poisson_duality", h.duality_gap, 1e-10)
        _check(table, "poisson_residual", h.poisson_residual, 1e-8)
        _check(table, "potential_nonnegative", -float(np.min(h.potential.values)), 0.0)
    scf = results.get("scf")
    if scf is not None:
        _check(table, "scf_fixed_point", scf.fixed_point_residual, 1e-8)
        _check(table, "scf_potential_nonnegative", -float(np.min(scf.potential)), 0.0)
    if sol is not None and scf is not None:
        _check(table, "potential_linf_gap", float(np.max(np.abs(sol.hartree - scf.potential))), 1e-4)
        _check(table, "eigenvalue_gap",
               float(np.max(np.abs(np.sort(sol.eigenvalues) - np.sort(scf.eigenvalues)))), 1e-5)
    failed = [row[0] for row in table if not row[3]]
    for name, value, limit, ok in table:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<26} {value: .3e}  (limit {limit:.1e})", file=stream)
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def _load(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spectral", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve and write report files")
    p_run.add_argument("config")
    p_verify = sub.add_parser("verify", help="check the solve against brute-force references")
    p_verify.add_argument("config")
    sub.add_parser("print-defaults", help="print a complete default configuration")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "print-defaults":
        sys.stdout.write(render_config(DEFAULT_CONFIG))
        return EXIT_OK
    try:
        config = _load(args.config)
        if args.command == "run":
            code, report = run(config)
            if code == EXIT_NOT_CONVERGED:
                print(f"solver did not converge: {report.get('message', '')}", file=sys.stderr)
            return code
        return verify(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (PoissonError, HomotopyError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
