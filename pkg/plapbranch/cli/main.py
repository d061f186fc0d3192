"""plapbranch command-line interface."""

import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import typer
from rich.console import Console

from plapbranch import __version__
from plapbranch.adapters.artifacts import (
    write_branch_diagram,
    write_branches_csv,
    write_json,
    write_manifest,
    write_mesh_dump,
)
from plapbranch.cli.utils import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    CLIUtils,
    handle_cli_errors,
)
from plapbranch.core.config import ToolkitConfig, load_config
from plapbranch.core.logging import setup_logging
from plapbranch.core.parallel import ordered_map
from plapbranch.models.domain import DomainSpec
from plapbranch.models.errors import UnsupportedError
from plapbranch.models.results import Branch, RunManifest
from plapbranch.numerics.asymptotics import (
    bound_crossover,
    infinity_limit_scan,
    inradius,
    packing_bound,
    strip_bound,
    three_disk_packing,
)
from plapbranch.numerics.calculus import (
    branch_dp,
    branch_fd_derivative,
    dboxbar_da,
    dboxminus_da,
    dcomparison_gap_da,
    dlambda1_da,
    dlambda1_dp,
    fd_derivative,
    numvalues_quadrature,
)
from plapbranch.numerics.eigsolve import default_grid, extrapolate_lambda1, solve_lambda1
from plapbranch.numerics.mesh import MIN_RESOLUTION, build_mesh
from plapbranch.numerics.spectra import (
    branch_value,
    comparison_gap,
    detect_crossing,
    lambda1_rect,
    linear_branches,
    sample_branch,
)
from plapbranch.pipeline.validate import CHECKS, run_validation

app = typer.Typer(
    name="plapbranch",
    help="Dirichlet p-Laplacian eigenvalue branches on rectangles and the square",
    add_completion=False,
)
config_app = typer.Typer(help="Configuration commands")
app.add_typer(config_app, name="config")

# options that do not change results are left out of the manifest hash
UNHASHED = ("out_dir", "log_level", "log_file", "threads")


class DomainChoice(str, Enum):
    RECT = "rect"
    TRI = "tri"


class WrtChoice(str, Enum):
    P = "p"
    A = "a"
    B = "b"


@dataclass
class CLIState:
    ui: CLIUtils
    config_file: Optional[Path] = None


@app.callback()
def callback(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable debug output"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress non-essential output"),
    config_file: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Configuration file (.toml, .yaml)"
    ),
):
    """Global options and setup"""
    ctx.obj = CLIState(ui=CLIUtils(verbose=verbose, quiet=quiet), config_file=config_file)


def _state(ctx: typer.Context) -> CLIState:
    if ctx.obj is None:
        ctx.obj = CLIState(ui=CLIUtils())
    return ctx.obj


def _configure(state: CLIState, **overrides: Any) -> ToolkitConfig:
    """Config file and environment, with command-line flags on top; sets up logging."""
    cfg = load_config(state.config_file).merged(overrides)
    if state.ui.verbose:
        level = "DEBUG"
    elif state.ui.quiet:
        level = "WARNING"
    else:
        level = cfg.log_level
    setup_logging(level, cfg.log_file, console=Console(stderr=True))
    return cfg


def _manifest(command: str, cfg: ToolkitConfig, **flags: Any) -> RunManifest:
    options = {
        k: v for k, v in cfg.model_dump(mode="json").items() if k not in UNHASHED
    }
    options.update({k: (v.value if isinstance(v, Enum) else v) for k, v in flags.items()})
    return RunManifest(command=command, options=options)


def _emit_json(
    state: CLIState,
    cfg: ToolkitConfig,
    out: Optional[Path],
    default_name: str,
    payload: Dict[str, Any],
    manifest: RunManifest,
) -> Path:
    path = out or cfg.out_dir / default_name
    write_json(path, payload, manifest)
    write_manifest(path, manifest)
    state.ui.print_success(f"Wrote {path}")
    return path


def _domain(choice: DomainChoice, cfg: ToolkitConfig) -> DomainSpec:
    if choice is DomainChoice.TRI:
        return DomainSpec.triangle()
    return DomainSpec.rectangle(cfg.a, cfg.b)


@app.command()
def eig1(
    ctx: typer.Context,
    domain: DomainChoice = typer.Option(DomainChoice.RECT, "--domain", help="rect or tri"),
    a: Optional[float] = typer.Option(None, "--a", help="Rectangle width"),
    b: Optional[float] = typer.Option(None, "--b", help="Rectangle height"),
    p: Optional[float] = typer.Option(None, "--p", help="Exponent p > 1"),
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON output path"),
    richardson: bool = typer.Option(
        False, "--richardson", help="Also extrapolate from n/4, n/2 and n"
    ),
    dump_mesh: Optional[Path] = typer.Option(None, "--dump-mesh", help="Write the mesh as text"),
):
    """First eigenpair of a rectangle or the unit right triangle."""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = _configure(state, a=a, b=b, p=p, n=n)
        d = _domain(domain, cfg)
        manifest = _manifest("eig1", cfg, domain=domain, richardson=richardson)
        m = build_mesh(d, cfg.n)
        res = solve_lambda1(m, cfg.p, cfg.solve_options())
        manifest.record(res, "lambda1")
        payload = res.summary()
        if richardson:
            ns = (cfg.n // 4, cfg.n // 2, cfg.n)
            if ns[0] < MIN_RESOLUTION:
                raise UnsupportedError(
                    f"--richardson needs n >= {4 * MIN_RESOLUTION}", n=cfg.n
                )
            value, order, coarse = extrapolate_lambda1(d, cfg.p, ns, cfg.solve_options())
            for r in coarse[:-1]:
                manifest.record(r, "lambda1")
            payload.update({"extrapolated": value, "order": order, "ns": list(ns)})
        if dump_mesh is not None:
            write_mesh_dump(dump_mesh, m)
        _emit_json(state, cfg, out, "eig1.json", payload, manifest)
        state.ui.print_mapping(
            f"lambda_1 on {d.label}",
            {"p": cfg.p, "n": cfg.n, "lambda": res.lambda_, "iterations": res.iterations},
        )
        if not res.converged:
            state.ui.print_error("Solver did not converge")
            raise typer.Exit(EXIT_NUMERICAL)


@app.command()
def branch(
    ctx: typer.Context,
    label: Optional[List[str]] = typer.Option(
        None, "--label", help="lambda1, boxbar, boxminus, boxbslash or lambda2-ub (repeatable)"
    ),
    a: Optional[float] = typer.Option(None, "--a", help="Rectangle width"),
    b: Optional[float] = typer.Option(None, "--b", help="Rectangle height (lambda1 only)"),
    p_from: float = typer.Option(1.5, "--p-from", help="First exponent"),
    p_to: float = typer.Option(3.0, "--p-to", help="Last exponent"),
    step: float = typer.Option(0.05, "--step", help="Grid spacing in p"),
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    out: Optional[Path] = typer.Option(None, "--out", help="CSV output path"),
):
    """Warm-started branch sweep over p, written as CSV."""
    state = _state(ctx)
    labels = label or ["lambda1"]
    with handle_cli_errors(state.ui):
        cfg = _configure(state, a=a, b=b, n=n, threads=threads)
        grid = default_grid(p_from, p_to, step)
        manifest = _manifest(
            "branch", cfg, labels=labels, p_from=p_from, p_to=p_to, step=step
        )
        branches = _sample(labels, cfg, grid)
        for br in branches:
            manifest.record_branch(br)
        path = out or cfg.out_dir / "branch.csv"
        write_branches_csv(path, branches, manifest)
        write_manifest(path, manifest)
        state.ui.print_branches(branches)
        state.ui.print_success(f"Wrote {path}")
        if not all(s.converged for br in branches for s in br.samples):
            state.ui.print_error("Some samples did not converge")
            raise typer.Exit(EXIT_NUMERICAL)


def _sample(labels: List[str], cfg: ToolkitConfig, grid: List[float]) -> List[Branch]:
    opts = cfg.solve_options()
    return ordered_map(
        lambda lbl: sample_branch(lbl, cfg.a, grid, cfg.n, opts, b=cfg.b),
        labels,
        cfg.threads,
    )


@app.command()
def deriv(
    ctx: typer.Context,
    label: str = typer.Option(
        "lambda1", "--label", help="lambda1, boxbar, boxminus, boxbslash or gap"
    ),
    wrt: WrtChoice = typer.Option(WrtChoice.P, "--wrt", help="Differentiate in p, a or b"),
    p: Optional[float] = typer.Option(None, "--p", help="Exponent p > 1"),
    a: Optional[float] = typer.Option(None, "--a", help="Rectangle width"),
    b: Optional[float] = typer.Option(None, "--b", help="Rectangle height (lambda1 only)"),
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    step: float = typer.Option(1e-3, "--step", help="Finite-difference step"),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON output path"),
):
    """Derivative of a branch from its formula, checked against a central difference."""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = _configure(state, p=p, a=a, b=b, n=n)
        manifest = _manifest("deriv", cfg, label=label, wrt=wrt, step=step)
        if wrt is WrtChoice.P:
            value, fd = _derivative_in_p(label, cfg, step)
        else:
            value, fd = _derivative_in_side(label, wrt, cfg, step)
        payload = {
            "label": label,
            "wrt": wrt.value,
            "p": cfg.p,
            "a": cfg.a,
            "b": cfg.b,
            "n": cfg.n,
            "value": value,
            "fd_value": fd,
            "err_estimate": abs(value - fd),
        }
        if wrt is WrtChoice.P:
            payload["log_bracket"] = cfg.p * value
        _emit_json(state, cfg, out, "deriv.json", payload, manifest)
        state.ui.print_mapping(f"d{label}/d{wrt.value}", payload)


def _derivative_in_p(label: str, cfg: ToolkitConfig, step: float) -> Tuple[float, float]:
    opts = cfg.solve_options()
    if label == "gap":
        minus, _ = branch_dp("boxminus", cfg.p, cfg.a, cfg.n, opts)
        bar, _ = branch_dp("boxbar", cfg.p, cfg.a, cfg.n, opts)
        fd = fd_derivative(lambda q: comparison_gap(q, cfg.a, cfg.n, opts), cfg.p, step)
        return minus - bar, fd
    if label == "lambda1":
        res = lambda1_rect(cfg.p, cfg.a, cfg.b, cfg.n, opts)
        fd = fd_derivative(
            lambda q: lambda1_rect(q, cfg.a, cfg.b, cfg.n, opts, warm=res.field).lambda_,
            cfg.p,
            step,
        )
        return dlambda1_dp(None, res), fd
    value, _ = branch_dp(label, cfg.p, cfg.a, cfg.n, opts)
    return value, branch_fd_derivative(label, cfg.p, cfg.a, cfg.n, step, opts)


def _derivative_in_side(
    label: str, wrt: WrtChoice, cfg: ToolkitConfig, step: float
) -> Tuple[float, float]:
    opts = cfg.solve_options()
    p, n = cfg.p, cfg.n
    if label == "lambda1":
        res = lambda1_rect(p, cfg.a, cfg.b, n, opts)
        if wrt is WrtChoice.A:
            return dlambda1_da(res, "x"), fd_derivative(
                lambda s: lambda1_rect(p, s, cfg.b, n, opts, warm=res.field).lambda_,
                cfg.a,
                step,
            )
        return dlambda1_da(res, "y"), fd_derivative(
            lambda s: lambda1_rect(p, cfg.a, s, n, opts, warm=res.field).lambda_,
            cfg.b,
            step,
        )
    if wrt is WrtChoice.B:
        raise UnsupportedError("Only lambda1 has a height derivative", label=label)
    if label == "gap":
        return dcomparison_gap_da(p, cfg.a, n, opts), fd_derivative(
            lambda s: comparison_gap(p, s, n, opts), cfg.a, step
        )
    formulas = {"boxbar": dboxbar_da, "boxminus": dboxminus_da}
    if label not in formulas:
        raise UnsupportedError(f"No width derivative for {label!r}", label=label)
    return formulas[label](p, cfg.a, n, opts), fd_derivative(
        lambda s: branch_value(label, p, s, n, opts).lambda_, cfg.a, step
    )


@app.command()
def numvalues(
    ctx: typer.Context,
    which: str = typer.Option("both", "--which", help="halfsquare, triangle or both"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Target absolute error"),
    max_evaluations: Optional[int] = typer.Option(
        None, "--max-evaluations", help="Integrand evaluation budget"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON output path"),
):
    """Log brackets of the two closed-form eigenfunctions by adaptive quadrature."""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = _configure(state, tol=tol)
        manifest = _manifest("numvalues", cfg, which=which, max_evaluations=max_evaluations)
        names = ["halfsquare", "triangle"] if which == "both" else [which]
        results = {
            name: numvalues_quadrature(name, cfg.tol, max_evaluations) for name in names
        }
        if len(results) == 1:
            payload: Dict[str, Any] = {"which": which, **results[which].model_dump()}
        else:
            payload = {name: r.model_dump() for name, r in results.items()}
            payload["gap"] = results["halfsquare"].value - results["triangle"].value
            payload["gap_err_estimate"] = sum(r.err_estimate for r in results.values())
        _emit_json(state, cfg, out, "numvalues.json", payload, manifest)
        state.ui.print_mapping(
            "Log brackets", {name: r.value for name, r in results.items()}
        )


@app.command()
def crossing(
    ctx: typer.Context,
    branch_a: str = typer.Option(..., "--branch-a", help="First branch label"),
    branch_b: str = typer.Option(..., "--branch-b", help="Second branch label"),
    bracket: Tuple[float, float] = typer.Option(..., "--bracket", help="p interval LO HI"),
    a: Optional[float] = typer.Option(None, "--a", help="Rectangle width"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Final bracket width"),
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON output path"),
):
    """Bisect for the exponent where two branches meet."""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = _configure(state, a=a, tol=tol, n=n, threads=threads)
        manifest = _manifest(
            "crossing", cfg, branch_a=branch_a, branch_b=branch_b, bracket=list(bracket)
        )
        report = detect_crossing(
            branch_a,
            branch_b,
            cfg.a,
            bracket,
            cfg.tol,
            cfg.n,
            cfg.solve_options(),
            cfg.threads,
        )
        payload = {**report.model_dump(mode="json"), "gap": report.gap}
        _emit_json(state, cfg, out, "crossing.json", payload, manifest)
        state.ui.print_mapping(
            f"{branch_a} / {branch_b}",
            {"p_star": report.p_star, "gap": report.gap, "evaluations": report.evaluations},
        )


@app.command()
def packing(
    ctx: typer.Context,
    p: Optional[float] = typer.Option(None, "--p", help="Exponent p > 1"),
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    numeric: bool = typer.Option(True, "--numeric/--no-numeric", help="Masked-mesh value"),
    scan_p: Optional[List[float]] = typer.Option(
        None, "--scan-p", help="Compare with lambda_boxbar^(1/p) at these p (repeatable)"
    ),
    with_disk: bool = typer.Option(
        False, "--with-disk", help="Add the disk eigenvalue bound to the scan"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON output path"),
):
    """Three-disk packing bound for the third eigenvalue of the square."""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = _configure(state, p=p, n=n)
        manifest = _manifest(
            "packing", cfg, numeric=numeric, scan_p=scan_p or [], with_disk=with_disk
        )
        disks = three_disk_packing()
        bound = packing_bound(cfg.p, cfg.n, numeric=numeric)
        payload: Dict[str, Any] = {
            "p": bound.p,
            "radius": bound.radius,
            "centers": [list(c) for c in disks.centers],
            "closed_form": bound.closed_form,
            "numeric": bound.numeric,
            "relative_gap": bound.relative_gap,
            "limit": bound.limit,
        }
        if scan_p:
            report = bound_crossover(
                sorted(scan_p), cfg.n, cfg.solve_options(), with_disk=with_disk
            )
            payload["crossover"] = [
                {
                    "p": row.p,
                    "boxbar_root": row.boxbar_root,
                    "bound": row.bound,
                    "disk_root": row.disk_root,
                    "below": row.below,
                }
                for row in report.rows
            ]
            payload["first_below"] = report.first_below
        _emit_json(state, cfg, out, "packing.json", payload, manifest)
        state.ui.print_mapping(
            "Packing bound",
            {"closed_form": bound.closed_form, "numeric": bound.numeric, "limit": bound.limit},
        )


@app.command()
def limit(
    ctx: typer.Context,
    domain: DomainChoice = typer.Option(DomainChoice.RECT, "--domain", help="rect or tri"),
    a: Optional[float] = typer.Option(None, "--a", help="Rectangle width"),
    b: Optional[float] = typer.Option(None, "--b", help="Rectangle height"),
    p_list: Optional[List[float]] = typer.Option(
        None, "--p", help="Exponents, increasing (repeatable)"
    ),
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON output path"),
):
    """lambda_1^(1/p) along growing p against the inverse inradius."""
    state = _state(ctx)
    ps = p_list or [10.0, 20.0, 40.0]
    with handle_cli_errors(state.ui):
        cfg = _configure(state, a=a, b=b, n=n)
        d = _domain(domain, cfg)
        manifest = _manifest("limit", cfg, domain=domain, p_list=ps)
        scan = infinity_limit_scan(d, ps, cfg.n, cfg.solve_options())
        rows = []
        for point in scan:
            row = {
                "p": point.p,
                "root": point.root,
                "lambda": point.lambda_,
                "iterations": point.iterations,
                "converged": point.converged,
            }
            if domain is DomainChoice.RECT:
                row["strip_bound"] = strip_bound(point.p, d)
            rows.append(row)
        payload = {"domain": d.label, "limit": 1.0 / inradius(d), "scan": rows}
        _emit_json(state, cfg, out, "limit.json", payload, manifest)
        state.ui.print_mapping(
            f"lambda_1^(1/p) on {d.label}", {f"p={r['p']:g}": r["root"] for r in rows}
        )
        if not all(point.converged for point in scan):
            state.ui.print_error("Some solves did not converge")
            raise typer.Exit(EXIT_NUMERICAL)


@app.command()
def diagram(
    ctx: typer.Context,
    a: Optional[float] = typer.Option(None, "--a", help="Rectangle width"),
    p_from: float = typer.Option(1.5, "--p-from", help="First exponent"),
    p_to: float = typer.Option(3.0, "--p-to", help="Last exponent"),
    step: float = typer.Option(0.05, "--step", help="Grid spacing in p"),
    label: Optional[List[str]] = typer.Option(
        None, "--label", help="Branches to draw (default boxbar, boxminus, boxbslash on the square)"
    ),
    lin: int = typer.Option(0, "--lin", help="Number of p = 2 reference values to mark"),
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    title: str = typer.Option("", "--title", help="Diagram title"),
    out: Optional[Path] = typer.Option(None, "--out", help="SVG output path"),
):
    """Branch diagram (SVG) with a CSV sidecar of the plotted samples."""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = _configure(state, a=a, n=n, threads=threads)
        labels = label or (
            ["boxbar", "boxminus", "boxbslash"] if cfg.a == 1.0 else ["boxbar", "boxminus"]
        )
        grid = default_grid(p_from, p_to, step)
        manifest = _manifest(
            "diagram", cfg, labels=labels, p_from=p_from, p_to=p_to, step=step, lin=lin
        )
        branches = _sample(labels, cfg, grid)
        if lin > 0:
            branches += linear_branches(cfg.a, lin)
        for br in branches:
            manifest.record_branch(br)
        path = out or cfg.out_dir / "diagram.svg"
        svg, csv_path = write_branch_diagram(
            path, branches, manifest, title or f"Branches of R[{cfg.a:g}]"
        )
        write_manifest(svg, manifest)
        state.ui.print_branches(branches)
        state.ui.print_success(f"Wrote {svg} and {csv_path}")
        if not all(s.converged for br in branches for s in br.samples):
            state.ui.print_error("Some samples did not converge")
            raise typer.Exit(EXIT_NUMERICAL)


@app.command()
def validate(
    ctx: typer.Context,
    n: Optional[int] = typer.Option(None, "--n", help="Mesh cells per unit length"),
    check: Optional[List[str]] = typer.Option(
        None, "--check", help=f"Run only these checks: {', '.join(CHECKS)}"
    ),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker threads"),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON report path"),
):
    """Run the invariant suite; exit 3 if any check fails."""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = _configure(state, n=n, threads=threads)
        manifest = _manifest("validate", cfg, checks=check or list(CHECKS))
        report = run_validation(cfg.n, cfg.solve_options(), check, cfg.threads)
        if out is not None:
            write_json(out, report.model_dump(mode="json"), manifest)
            write_manifest(out, manifest)
        for result in report.checks:
            if result.passed:
                state.ui.print_success(f"{result.name}: {result.detail}")
            else:
                state.ui.print_error(f"{result.name}: {result.detail}")
        if not report.passed:
            raise typer.Exit(EXIT_VALIDATION)


@config_app.command("show")
def config_show(
    ctx: typer.Context,
    key: Optional[str] = typer.Argument(None, help="Specific config key to show"),
):
    """Show the effective configuration"""
    state = _state(ctx)
    with handle_cli_errors(state.ui):
        cfg = load_config(state.config_file)
        values = cfg.model_dump(mode="json")
        if key is not None:
            if key not in values:
                state.ui.print_error(f"Configuration key '{key}' not found")
                raise typer.Exit(EXIT_USAGE)
            typer.echo(f"{key}: {values[key]}")
            return
        state.ui.print_mapping("plapbranch configuration", values)


@app.command()
def version():
    """Show version information"""
    typer.echo(f"plapbranch {__version__}")


def main() -> None:
    """Console entry point: usage errors exit 1, numerical failures 2, failed checks 3."""
    try:
        code = app(standalone_mode=False)
    except click.exceptions.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    sys.exit(code or EXIT_OK)


if __name__ == "__main__":
    main()
