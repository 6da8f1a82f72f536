"""Command-line front end: CSV ingestion and the three analysis workflows.

Exit codes: 0 success, 2 validation or configuration problem, 3 estimation
failure, 4 I/O failure. Reports are tab-delimited with a commented header
carrying the library version, seed, and full effective configuration, and
regenerate byte-identically for a fixed invocation.
"""

from __future__ import annotations

import csv
import sys
import warnings
from importlib import metadata

import click

from .bootstrap import (
    ESTIMATION_ERRORS,
    STRATIFIED_BY_ARM,
    WHOLE_SAMPLE,
    BootstrapConfig,
    bootstrap_estimate,
)
from .data import Dataset, validate
from .empirical import EmpiricalTables
from .errors import (
    MalformedRecord,
    ParseError,
    PstratumError,
    SchemaError,
    TooManyFailedReplicates,
)
from .estimand import fit_and_estimate
from .model import FitConfig
from .sensitivity import sensitivity_sweep
from .simulation import (
    PRESET_NAMES,
    default_n_jobs,
    make_preset,
    mc_table,
    run_monte_carlo,
)

EXIT_VALIDATION = 2
EXIT_ESTIMATION = 3
EXIT_IO = 4

_BINARY_COLUMNS = {"id", "z", "x", "s", "y"}
_SURVIVAL_COLUMNS = {"id", "z", "x", "s", "time", "event"}


def _version() -> str:
    try:
        return metadata.version("pstratum")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def load_csv(path: str, t0: float | None = None) -> Dataset:
    """Read a subject-level CSV into a dataset.

    Columns must be exactly ``id, z, x, s, y`` (binary outcome) or
    ``id, z, x, s, time, event`` (survival outcome, in which case ``t0``
    must be supplied). The number of covariate levels is inferred from the
    largest observed ``x``. Missing values are rejected.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError("empty file: no header row")
        columns = set(reader.fieldnames)
        if columns == _BINARY_COLUMNS:
            survival = False
        elif columns == _SURVIVAL_COLUMNS:
            survival = True
        else:
            missing_b = sorted(_BINARY_COLUMNS - columns)
            missing_s = sorted(_SURVIVAL_COLUMNS - columns)
            extra = sorted(columns - (_BINARY_COLUMNS | _SURVIVAL_COLUMNS))
            raise SchemaError(
                "columns must be exactly id,z,x,s,y or id,z,x,s,time,event; "
                f"missing {missing_b or missing_s}, unexpected {extra}"
            )
        ids, z, x, s = [], [], [], []
        y, time, event = [], [], []
        for line_no, row in enumerate(reader, start=2):
            def cell(col, conv):
                raw = row.get(col)
                if raw is None or raw.strip() == "":
                    raise ParseError(line_no, f"missing value in column {col!r}")
                try:
                    return conv(raw)
                except ValueError:
                    raise ParseError(line_no, f"cannot parse {raw!r} in column {col!r}")
            ids.append(cell("id", str))
            z.append(cell("z", int))
            x.append(cell("x", int))
            s.append(cell("s", int))
            if survival:
                time.append(cell("time", float))
                event.append(cell("event", int))
            else:
                y.append(cell("y", int))
    if not ids:
        raise SchemaError("file contains a header but no data rows")
    k_levels = max(x) + 1
    if survival:
        if t0 is None:
            raise SchemaError("survival columns present: the --t0 flag is required")
        return Dataset(z=z, x=x, s=s, k_levels=k_levels, ids=ids,
                       time=time, event=event, horizon_t0=t0)
    if t0 is not None:
        raise SchemaError("--t0 only applies to survival data (time/event columns)")
    return Dataset(z=z, x=x, s=s, k_levels=k_levels, ids=ids, y=y)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    if value is None:
        return "none"
    return str(value)


def _header_lines(command: str, config: dict) -> list[str]:
    lines = [f"# tool: pstratum {command}", f"# version: {_version()}"]
    lines.extend(f"# {key}: {_fmt(value)}" for key, value in config.items())
    return lines


def _write_report(path: str, lines: list[str]):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fail(category: str, message: str, code: int):
    click.echo(f"error category={category}: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(_version(), prog_name="pstratum")
def main():
    """Principal-stratum treatment effect estimation for randomized trials."""


@main.command("estimate")
@click.option("--input", "input_path", required=True, help="Subject-level CSV file.")
@click.option("--output", "output_path", required=True, help="Report file to write.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--bootstrap", "-B", "n_bootstrap", default=500, show_default=True, type=int)
@click.option("--t0", type=float, default=None,
              help="Evaluation horizon; required for survival data.")
@click.option("--stratify-by-arm", is_flag=True,
              help="Resample within arms, preserving per-arm counts.")
@click.option("--multistart", type=int, default=None,
              help="Also start the fit from every integer point of [-m, m]^3.")
def cmd_estimate(input_path, output_path, seed, alpha, n_bootstrap, t0,
                 stratify_by_arm, multistart):
    """Estimate the responder-stratum effect with a pivotal bootstrap CI."""
    try:
        dataset = load_csv(input_path, t0=t0)
    except OSError as exc:
        _fail("io", str(exc), EXIT_IO)
    except (SchemaError, ParseError, MalformedRecord, ValueError) as exc:
        _fail("validation", str(exc), EXIT_VALIDATION)

    report = validate(dataset)
    fit_config = FitConfig(grid_multistart=multistart)
    boot_config = BootstrapConfig(
        n_replicates=n_bootstrap, alpha=alpha, seed=seed,
        resampling=STRATIFIED_BY_ARM if stratify_by_arm else WHOLE_SAMPLE,
    )
    caught: list[str] = []
    try:
        with warnings.catch_warnings(record=True) as wlist:
            warnings.simplefilter("always")
            est = bootstrap_estimate(dataset, fit_config, boot_config)
            _, fit, tables = fit_and_estimate(dataset, fit_config)
        caught = sorted({str(w.message) for w in wlist})
    except (*ESTIMATION_ERRORS, TooManyFailedReplicates) as exc:
        _fail("estimation", str(exc), EXIT_ESTIMATION)
    except PstratumError as exc:
        _fail("validation", str(exc), EXIT_VALIDATION)

    header = _header_lines("estimate", {
        "input": input_path,
        "seed": seed,
        "alpha": alpha,
        "bootstrap_replicates": n_bootstrap,
        "resampling": boot_config.resampling,
        "t0": t0,
        "multistart": multistart,
        "k_levels": dataset.k_levels,
        "n": dataset.n,
        "validation_flags": report.flag_count,
        "warnings": "; ".join(caught) if caught else "none",
    })
    b = est.beta_hat
    body = ["key\tvalue"]
    for key, value in [
        ("theta_hat", est.theta_hat),
        ("ci_lower", est.ci_lower),
        ("ci_upper", est.ci_upper),
        ("alpha", est.alpha),
        ("beta0_hat", b.beta0),
        ("beta1_hat", b.beta1),
        ("beta2_hat", b.beta2),
        ("objective_value", est.objective_value),
        ("jacobian_rank", fit.jacobian_rank),
        ("fit_converged", fit.converged),
        ("n_bootstrap", est.n_bootstrap),
        ("n_failed_replicates", est.n_failed),
    ]:
        body.append(f"{key}\t{_fmt(value)}")

    diag = ["", "x\tn_control\tn_treated\tq0_hat\tq1_hat\tg_l_hat\tresidual\tflags"]
    for level in report.levels:
        x = level.x
        flags = []
        if (0, x) in report.empty_arm_levels:
            flags.append("empty-control-arm")
        if (1, x) in report.empty_arm_levels:
            flags.append("empty-treatment-arm")
        if x in report.empty_control_nonresponder_levels:
            flags.append("no-control-nonresponders")
        if x in report.monotonicity_warnings:
            flags.append("response-rate-reversal")
        g_l = tables.g_l[x]
        resid = fit.per_level_residuals[x]
        diag.append("\t".join([
            str(x), str(level.n_control), str(level.n_treated),
            _fmt(level.q0_hat), _fmt(level.q1_hat),
            _fmt(float(g_l)), _fmt(float(resid)),
            ",".join(flags) if flags else "-",
        ]))
    try:
        _write_report(output_path, header + body + diag)
    except OSError as exc:
        _fail("io", str(exc), EXIT_IO)


@main.command("sensitivity")
@click.option("--input", "input_path", required=True)
@click.option("--output", "output_path", required=True)
@click.option("--beta1-grid", default="-7,-6,-5,-4,-3", show_default=True,
              help="Comma-separated fixed outcome coefficients.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--bootstrap", "-B", "n_bootstrap", default=500, show_default=True, type=int)
@click.option("--t0", type=float, default=None)
def cmd_sensitivity(input_path, output_path, beta1_grid, seed, alpha, n_bootstrap, t0):
    """Sweep the fixed outcome coefficient and report the effect per grid value."""
    try:
        grid = [float(v) for v in beta1_grid.split(",") if v.strip() != ""]
        if not grid:
            raise ValueError("empty grid")
    except ValueError as exc:
        _fail("validation", f"cannot parse --beta1-grid: {exc}", EXIT_VALIDATION)
    try:
        dataset = load_csv(input_path, t0=t0)
    except OSError as exc:
        _fail("io", str(exc), EXIT_IO)
    except (SchemaError, ParseError, MalformedRecord, ValueError) as exc:
        _fail("validation", str(exc), EXIT_VALIDATION)

    boot_config = BootstrapConfig(n_replicates=n_bootstrap, alpha=alpha, seed=seed)
    try:
        results = sensitivity_sweep(dataset, grid, boot_config)
    except (*ESTIMATION_ERRORS, TooManyFailedReplicates) as exc:
        _fail("estimation", str(exc), EXIT_ESTIMATION)

    header = _header_lines("sensitivity", {
        "input": input_path,
        "seed": seed,
        "alpha": alpha,
        "bootstrap_replicates": n_bootstrap,
        "beta1_grid": beta1_grid,
        "t0": t0,
        "n": dataset.n,
    })
    body = ["beta1\ttheta_hat\tci_lower\tci_upper"]
    for res in results:
        lower, upper = res.ci
        body.append("\t".join([
            _fmt(res.beta1_fixed), _fmt(res.theta_hat), _fmt(lower), _fmt(upper),
        ]))
    try:
        _write_report(output_path, header + body)
    except OSError as exc:
        _fail("io", str(exc), EXIT_IO)


@main.command("simulate")
@click.option("--preset", required=True, help=f"One of {', '.join(PRESET_NAMES)}.")
@click.option("--n", "sample_size", default=1000, show_default=True, type=int)
@click.option("--replicates", "-R", default=1000, show_default=True, type=int)
@click.option("--bootstrap", "-B", "n_bootstrap", default=500, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--jobs", default=None, type=int,
              help="Worker processes for replicates (default: all cores).")
@click.option("--output", "output_path", required=True)
def cmd_simulate(preset, sample_size, replicates, n_bootstrap, seed, alpha, jobs,
                 output_path):
    """Run the Monte Carlo bench for a named preset population."""
    try:
        spec = make_preset(preset, n=sample_size)
    except ValueError as exc:
        _fail("validation", str(exc), EXIT_VALIDATION)
    boot_config = BootstrapConfig(n_replicates=n_bootstrap, alpha=alpha, seed=seed)
    n_jobs = jobs if jobs is not None else default_n_jobs()
    try:
        report = run_monte_carlo(spec, replicates, FitConfig(), boot_config,
                                 label=preset, n_jobs=n_jobs)
    except TooManyFailedReplicates as exc:
        _fail("estimation", str(exc), EXIT_ESTIMATION)

    header = _header_lines("simulate", {
        "preset": preset,
        "n": sample_size,
        "replicates": replicates,
        "bootstrap_replicates": n_bootstrap,
        "seed": seed,
        "alpha": alpha,
        "true_theta": report.true_theta,
        "failed_replicates": report.n_failed,
    })
    try:
        _write_report(output_path, header + mc_table([report]).splitlines())
    except OSError as exc:
        _fail("io", str(exc), EXIT_IO)


if __name__ == "__main__":
    main()
