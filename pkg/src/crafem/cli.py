"""
Command-line interface.

    crafem run --problem kellogg --estimator modified --theta 0.2 --tol 0.1 --out results/
    crafem describe --problem lshape

Exit codes of ``run``: 0 when the tolerance is reached, 2 when the step
limit is hit first, 1 on any error.
"""
import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .adapt import CSV_COLUMNS, ESTIMATORS, adaptive_solve
from .fem import GRADING_LEVELS, SolverError
from .mesh import write_mesh
from .problems import get_problem

EMIT_CHOICES = ("mesh", "indicators", "csv", "plotdata")


@dataclass
class RunConfig:
    problem: str = "kellogg"
    estimator: str = "modified"
    theta: float = 0.2
    tol: float = 0.1
    max_steps: int = 60
    out: str = "."
    emit: tuple = ("csv",)
    quad_grading: int = GRADING_LEVELS
    dirichlet_zero_clement: bool = False

    def validate(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta out of range (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.max_steps < 0:
            raise ValueError("max-steps must be non-negative")
        if self.quad_grading < 0:
            raise ValueError("quad-grading must be non-negative")
        bad = set(self.emit) - set(EMIT_CHOICES)
        if bad:
            raise ValueError(f"unknown emit option(s): {', '.join(sorted(bad))}")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def describe(config, stream=None):
    """Print the resolved problem and estimator settings; returns the text."""
    spec = get_problem(config.problem)
    mesh = spec.mesh
    lines = [f"problem: {spec.name}"]
    if config.problem.startswith("file:"):
        lines.append(json.dumps(spec.description, indent=2, sort_keys=True))
    else:
        d = spec.description
        lines.append(f"domain: {d.get('domain', '')}")
        lines.append("subdomains:")
        for sid in sorted(spec.coefficients):
            region = d.get("subdomains", {}).get(str(sid), "")
            lines.append(f"  {sid}: alpha = {spec.coefficients[sid]!r}  {region}".rstrip())
        lines.append(f"boundary: {d.get('boundary', '')}")
        lines.append(f"f: {d.get('f', '')}")
        if spec.exact is not None:
            lines.append(f"exact solution: {d.get('exact', '')}")
            lines.append(f"energy norm of exact solution: {spec.exact.energy_norm!r}")
    tags = mesh.edge_tags
    lines.append(f"initial mesh: {mesh.n_elements} elements, {mesh.n_edges} edges, "
                 f"{int(np.sum(tags == 1))} Dirichlet / {int(np.sum(tags == 2))} Neumann boundary edges")
    lines.append(f"estimator: {config.estimator}, theta = {config.theta!r}, tol = {config.tol!r}, "
                 f"max steps = {config.max_steps}, grading levels = {config.quad_grading}")
    text = "\n".join(lines)
    print(text, file=stream or sys.stdout)
    return text


def run(config, stream=None):
    """Run the adaptive loop and write the requested outputs; returns the exit code."""
    err = sys.stderr if stream is None else stream
    try:
        config.validate()
        os.makedirs(config.out, exist_ok=True)
        if not os.access(config.out, os.W_OK):
            raise PermissionError(f"output directory {config.out} is not writable")
        spec = get_problem(config.problem)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=err)
        return 1

    emit = set(config.emit)
    csv_path = os.path.join(config.out, "convergence.csv")
    csv_fh = open(csv_path, "w") if "csv" in emit else None
    if csv_fh:
        csv_fh.write(",".join(CSV_COLUMNS) + "\n")
        csv_fh.flush()

    def callback(rec, mesh, u_h, report):
        if csv_fh:
            csv_fh.write(",".join(_fmt(v) for v in rec.csv_row()) + "\n")
            csv_fh.flush()
        if "mesh" in emit:
            write_mesh(mesh, os.path.join(config.out, f"mesh_{rec.step}.txt"))
        if "indicators" in emit:
            report.to_csv(os.path.join(config.out, f"indicators_{rec.step}.csv"))

    try:
        result = adaptive_solve(spec, estimator=config.estimator, theta=config.theta, tol=config.tol,
                                max_steps=config.max_steps, levels=config.quad_grading,
                                callback=callback)
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    finally:
        if csv_fh:
            csv_fh.close()

    if "plotdata" in emit:
        with open(os.path.join(config.out, "plot_loglog.csv"), "w") as fh:
            fh.write("log10_dofs,log10_error,log10_eta,log10_eta_tilde\n")
            for r in result.records:
                vals = [r.dofs, r.true_error, r.eta, r.eta_tilde]
                fh.write(",".join(_fmt(math.log10(v)) if v > 0 else "nan" for v in vals) + "\n")

    if config.dirichlet_zero_clement and spec.exact is not None:
        from .estimator import clement_interpolate
        from .fem import error_representation

        u_h = result.solution
        mesh = result.mesh

        def E(x, y, k):
            return spec.exact.value(x, y) - u_h.evaluate(k, x, y)

        E_h = clement_interpolate(mesh, E, dirichlet_zero=True, elementwise=True,
                                  singular_points=spec.singular_points, levels=config.quad_grading)
        lhs, rhs, _ = error_representation(mesh, spec, u_h, E_h, config.quad_grading)
        with open(os.path.join(config.out, "error_representation.txt"), "w") as fh:
            fh.write(f"lhs {_fmt(lhs)}\nrhs {_fmt(rhs)}\n")

    last = result.records[-1]
    print(f"{spec.name}: {len(result.records) - 1} steps, {last.elements} elements, "
          f"rel_err {last.rel_err:.4g}, eff_eta {last.eff_eta:.4g}, eff_eta_tilde {last.eff_eta_tilde:.4g}",
          file=sys.stdout)
    return 0 if result.converged else 2


def _parser():
    p = argparse.ArgumentParser(
        prog="crafem",
        description="Adaptive Crouzeix-Raviart finite elements for elliptic interface problems.",
        epilog="exit codes of run: 0 tolerance reached, 2 step limit hit first, 1 error")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"run": "run the adaptive loop and write convergence.csv",
             "describe": "print the problem setup without solving"}
    for name in ("run", "describe"):
        s = sub.add_parser(name, help=helps[name], description=helps[name],
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        s.add_argument("--problem", default="kellogg", help="kellogg, lshape or file:<path.json>")
        s.add_argument("--estimator", default="modified",
                       help="indicator driving the marking: standard, modified or tangential")
        s.add_argument("--theta", type=float, default=0.2, help="bulk marking fraction in (0, 1]")
        s.add_argument("--tol", type=float, default=0.1,
                       help="stop when the relative energy error (or relative estimator) is below this")
        s.add_argument("--max-steps", type=int, default=60, help="maximum number of refinement steps")
        s.add_argument("--out", default=".", help="output directory (created if missing)")
        s.add_argument("--emit", default="csv", help="comma list of mesh,indicators,csv,plotdata")
        s.add_argument("--quad-grading", type=int, default=GRADING_LEVELS,
                       help="levels of geometric grading for integrals at singular points")
        s.add_argument("--dirichlet-zero-clement", action="store_true",
                       help="also write error_representation.txt, checking the error identity "
                            "with the Dirichlet-zero Clement interpolant")
        s.add_argument("-v", "--verbose", action="store_true", help="log every step")
    return p


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    config = RunConfig(
        problem=args.problem, estimator=args.estimator, theta=args.theta, tol=args.tol,
        max_steps=args.max_steps, out=args.out,
        emit=tuple(e.strip() for e in args.emit.split(",") if e.strip()),
        quad_grading=args.quad_grading, dirichlet_zero_clement=args.dirichlet_zero_clement,
    )
    if args.command == "describe":
        try:
            config.validate()
            describe(config)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
