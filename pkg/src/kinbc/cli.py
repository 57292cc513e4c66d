"""Command-line interface: ``verify``, ``design``, ``simulate`` and ``sweep``.

Exit codes: 0 success, 1 numerical failure (divergence, non-convergence),
2 validation failure (bad config, non-steady state, zero velocity, CFL).
"""

from __future__ import annotations

import argparse
import copy
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .boundary import check_admissible, crossfeed_gain_bound, crossfeed_reflect_gain_bounds
from .config import (
    build_domain,
    build_grid,
    build_initial_field,
    build_law,
    build_model,
    build_steady_state,
    default_fit_window,
    law_summary,
    load_config,
    serialize_config,
)
from .errors import (
    CFLError,
    ConfigError,
    DivergenceError,
    KinbcError,
    LawError,
    ModelError,
    NumericalError,
    ParameterError,
)
from .lyapunov import build_certificate
from .report import (
    certificate_lines,
    certificate_payload,
    fit_decay,
    format_float,
    write_csv,
    write_report,
    write_snapshot,
)
from .solver import UpwindSolver, cfl_number
from .stability import decompose, decomposition_residuals

_VALIDATION_ERRORS = (ConfigError, ParameterError, ModelError, LawError)


def _thread_count(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("KINBC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"KINBC_THREADS must be an integer, got {env!r}") from exc
    return 1


def _resolve(path, output_dir):
    if path is None:
        return None
    p = Path(path)
    if output_dir is not None and not p.is_absolute():
        p = Path(output_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _warn(message):
    print(f"warning: {message}", file=sys.stderr)


def _model_lines(cfg, model, fe):
    lines = [
        f"model: {cfg.preset or 'custom'} ({model.n_species} species, dim {model.dim}, "
        f"{len(model.channels)} collision channels)",
        f"steady state: {np.array2string(fe.values, separator=', ')} "
        f"(source residual {fe.residual:.3e})",
    ]
    speeds = np.max(np.abs(model.velocities), axis=1)
    lines.append(f"nonzero-velocity check: ok (smallest velocity component magnitude {speeds.min():g})")
    return lines


def cmd_verify(args):
    cfg = load_config(args.config)
    model = build_model(cfg)
    fe = build_steady_state(cfg, model)
    decomposition = decompose(model, fe)
    res_sim, res_weighted = decomposition_residuals(decomposition, model, fe)

    rates = decomposition.relaxation_rates
    lines = ["kinbc verify", "============"]
    lines += _model_lines(cfg, model, fe)
    lines += [
        f"dissipated modes: r = {decomposition.rank} of {model.n_species}",
        f"relaxation rates = {np.array2string(rates, separator=', ')}",
        f"similarity residual = {res_sim:.3e}",
        f"weighted residual = {res_weighted:.3e}",
    ]
    text = "\n".join(lines)
    print(text)
    payload = {
        "command": "verify",
        "rank": decomposition.rank,
        "relaxation_rates": rates.tolist(),
        "similarity_residual": res_sim,
        "weighted_residual": res_weighted,
        "steady_residual": fe.residual,
        "config": serialize_config(cfg),
    }
    report_path = _resolve(cfg.report, args.output_dir)
    if report_path:
        write_report(report_path, text, payload)
    return 0


def _gain_bound_lines(cfg, fe, alpha):
    if cfg.preset != "coplanar":
        return [], {}
    b1 = crossfeed_gain_bound(fe, alpha)
    b2, b3 = crossfeed_reflect_gain_bounds(fe, alpha)
    lines = [
        f"crossfeed law: |k1| <= {b1:.12g}",
        f"crossfeed_reflect law: |k2| <= {b2:.12g}, |k3| <= {b3:.12g}",
    ]
    return lines, {"k1": b1, "k2": b2, "k3": b3}


def cmd_design(args):
    cfg = load_config(args.config)
    model = build_model(cfg)
    fe = build_steady_state(cfg, model)
    domain = build_domain(cfg, model)
    decomposition = decompose(model, fe)
    certificate = build_certificate(
        model, fe, domain, decomposition, alpha=cfg.alpha, margin=cfg.margin
    )
    law = build_law(cfg)
    admissibility = check_admissible(law, model, fe, certificate.alpha, domain)

    lines = ["kinbc design", "============"]
    lines += _model_lines(cfg, model, fe)
    lines.append(f"law: {law_summary(cfg)}")
    lines.append("")
    lines.append("certificate")
    lines.append("-----------")
    lines += certificate_lines(certificate)
    bound_lines, bounds = _gain_bound_lines(cfg, fe, certificate.alpha)
    if bound_lines:
        lines.append("")
        lines.append("closed-form gain bounds (at selected alpha)")
        lines += bound_lines
    lines.append("")
    if admissibility.admissible:
        lines.append(f"admissibility: ADMISSIBLE (margin = {admissibility.margin:.6g})")
    else:
        lines.append(f"admissibility: NOT ADMISSIBLE (margin = {admissibility.margin:.6g})")
        lines.append(f"violated budget: {admissibility.violation}")
    text = "\n".join(lines)
    print(text)
    payload = {
        "command": "design",
        "certificate": certificate_payload(certificate),
        "gain_bounds": bounds,
        "admissible": admissibility.admissible,
        "margin": admissibility.margin,
        "violation": admissibility.violation,
        "law": law_summary(cfg),
        "config": serialize_config(cfg),
    }
    report_path = _resolve(cfg.report, args.output_dir)
    if report_path:
        write_report(report_path, text, payload)
    return 0


def _simulate_once(cfg, *, output_dir=None, csv_override=None, figures=None, quiet=False):
    """Shared simulate pipeline; returns a result dict, raising on failure.

    On divergence the partial CSV is still written before the error
    propagates (the caller maps it to exit code 1).
    """
    model = build_model(cfg)
    fe = build_steady_state(cfg, model)
    domain = build_domain(cfg, model)
    grid = build_grid(cfg, domain)
    law = build_law(cfg)
    if cfg.dt is None or cfg.t_end is None:
        raise ConfigError("section [time] must set dt and t_end")
    cfl = cfl_number(model, grid, cfg.dt)
    if cfl > 1.0 + 1e-12:
        raise CFLError(
            f"CFL number {cfl:.6g} exceeds 1 (dt = {cfg.dt}, spacings = {grid.spacings}); "
            "refusing to run an unstable scheme"
        )
    decomposition = decompose(model, fe)
    certificate = build_certificate(
        model, fe, domain, decomposition, alpha=cfg.alpha, margin=cfg.margin, strict=False
    )
    warnings = []
    if not certificate.valid:
        warnings.append(
            f"certificate is not valid at alpha = {certificate.alpha:g} "
            f"(dissipation margin {certificate.dissipation_margin:.6g})"
        )
    admissibility = check_admissible(law, model, fe, certificate.alpha, domain)
    if not admissibility.admissible:
        warnings.append(
            f"law is not certified admissible ({admissibility.violation}); simulating anyway"
        )
    if not quiet:
        for message in warnings:
            _warn(message)

    field0 = build_initial_field(cfg, model, grid)
    solver = UpwindSolver(model, fe, domain, grid, law)
    csv_path = _resolve(csv_override if csv_override is not None else cfg.csv, output_dir)
    try:
        record = solver.run(
            field0, cfg.dt, cfg.t_end, alpha=certificate.alpha, record_every=cfg.record_every
        )
    except DivergenceError as exc:
        if exc.partial is not None and csv_path is not None:
            write_csv(csv_path, exc.partial)
            if not quiet:
                _warn(f"divergence at step {exc.step}; partial series kept in {csv_path}")
        raise

    window = default_fit_window(cfg)
    fit = fit_decay(record.times, record.l2_norm, window)
    if not fit.ok and not quiet:
        _warn(f"decay fit flagged: {fit.message}")

    if csv_path is not None:
        write_csv(csv_path, record)
    snapshot_path = _resolve(cfg.snapshot, output_dir)
    if snapshot_path is not None:
        write_snapshot(snapshot_path, record.final_state, grid)

    figure_paths = []
    figures_on = cfg.figures if figures is None else figures
    if figures_on and csv_path is not None:
        from . import plots  # matplotlib import deferred to the figure path

        stem = csv_path.with_suffix("")
        decay_png = Path(f"{stem}_norm.png")
        energy_png = Path(f"{stem}_energy.png")
        plots.save_decay_figure(record, fit, decay_png)
        plots.save_energy_figure(record, energy_png)
        figure_paths = [str(decay_png), str(energy_png)]

    return {
        "model": model,
        "steady": fe,
        "grid": grid,
        "cfl": cfl,
        "certificate": certificate,
        "admissibility": admissibility,
        "record": record,
        "fit": fit,
        "csv": str(csv_path) if csv_path else None,
        "figures": figure_paths,
        "warnings": warnings,
        "cfg": cfg,
    }


def cmd_simulate(args):
    cfg = load_config(args.config)
    result = _simulate_once(cfg, output_dir=args.output_dir)
    record = result["record"]
    fit = result["fit"]
    certificate = result["certificate"]
    admissibility = result["admissibility"]

    lines = ["kinbc simulate", "=============="]
    lines += _model_lines(cfg, result["model"], result["steady"])
    grid = result["grid"]
    lines.append(
        f"grid: {' x '.join(str(c) for c in grid.nodes_per_axis)} nodes, dt = {cfg.dt}, "
        f"cfl = {result['cfl']:.4g}"
    )
    lines.append(f"law: {law_summary(cfg)}")
    lines.append("")
    lines += certificate_lines(certificate)
    lines.append(
        "admissibility: "
        + ("ADMISSIBLE" if admissibility.admissible else "NOT ADMISSIBLE")
        + f" (margin = {admissibility.margin:.6g})"
    )
    lines.append("")
    lines.append(f"steps = {record.steps}, records = {record.n_records}, "
                 f"wall time = {record.wall_time:.2f} s")
    lines.append(f"final L2 norm = {format_float(record.l2_norm[-1])}")
    if fit.ok:
        lines.append(
            f"fitted decay rate = {fit.nu:.6g} on window [{fit.window[0]:g}, {fit.window[1]:g}] "
            f"(R^2 = {fit.r_squared:.6f})"
        )
    else:
        lines.append(f"decay fit not available: {fit.message}")
    if result["csv"]:
        lines.append(f"csv: {result['csv']}")
    for fig in result["figures"]:
        lines.append(f"figure: {fig}")
    text = "\n".join(lines)
    print(text)

    payload = {
        "command": "simulate",
        "certificate": certificate_payload(certificate),
        "admissible": admissibility.admissible,
        "margin": admissibility.margin,
        "fit": fit.as_dict(),
        "cfl": result["cfl"],
        "steps": record.steps,
        "records": record.n_records,
        "wall_time": record.wall_time,
        "final_l2_norm": record.l2_norm[-1],
        "csv": result["csv"],
        "figures": result["figures"],
        "warnings": result["warnings"],
        "law": law_summary(cfg),
        "config": serialize_config(cfg),
    }
    report_path = _resolve(cfg.report, args.output_dir)
    if report_path:
        write_report(report_path, text, payload)
    return 0


def parse_range(spec):
    """Range spec: ``lo:hi:step`` (inclusive) or a comma-separated value list."""
    spec = spec.strip()
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ConfigError(f"range must be lo:hi:step, got {spec!r}")
            lo, hi, step = (float(p) for p in parts)
            if step <= 0.0 or not math.isfinite(step):
                raise ConfigError(f"range step must be positive, got {step}")
            values = []
            k = 0
            while lo + k * step <= hi + 1e-9 * step:
                values.append(lo + k * step)
                k += 1
        else:
            values = [float(p) for p in spec.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"could not parse range {spec!r}: {exc}") from exc
    if not values:
        raise ConfigError(f"sweep range {spec!r} is empty")
    return values


_SWEEP_PARAMS = ("k1", "k2", "k3", "alpha", "dt")


def _with_param(cfg, param, value):
    out = copy.deepcopy(cfg)
    if param == "alpha":
        out.alpha = value
    elif param == "dt":
        out.dt = value
    else:
        setattr(out, param, value)
    return out


def cmd_sweep(args):
    cfg = load_config(args.config)
    values = parse_range(args.range)
    threads = _thread_count(args)

    base_csv = cfg.csv

    def row_csv(value):
        if base_csv is None:
            return None
        stem, dot, ext = base_csv.rpartition(".")
        if not dot:
            stem, ext = base_csv, "csv"
        return f"{stem}_{args.param}_{value:g}.{ext}"

    def run_row(value):
        row_cfg = _with_param(cfg, args.param, value)
        row = {
            "value": value,
            "admissible": None,
            "margin": math.nan,
            "nu": math.nan,
            "r_squared": math.nan,
            "final_norm": math.nan,
            "status": "ok",
        }
        try:
            result = _simulate_once(
                row_cfg,
                output_dir=args.output_dir,
                csv_override=row_csv(value),
                figures=False,
                quiet=True,
            )
        except KinbcError as exc:
            row["status"] = f"error: {exc}"
            return row
        row["admissible"] = result["admissibility"].admissible
        row["margin"] = result["admissibility"].margin
        fit = result["fit"]
        if fit.ok:
            row["nu"] = fit.nu
            row["r_squared"] = fit.r_squared
        row["final_norm"] = float(result["record"].l2_norm[-1])
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_row, values))
    else:
        rows = [run_row(v) for v in values]

    header = f"{args.param:>12}  {'admissible':>10}  {'nu_fit':>12}  {'R^2':>8}  {'final_norm':>12}  status"
    print(header)
    print("-" * len(header))
    for row in rows:
        adm = "-" if row["admissible"] is None else ("yes" if row["admissible"] else "no")
        print(
            f"{row['value']:>12.6g}  {adm:>10}  {row['nu']:>12.6g}  "
            f"{row['r_squared']:>8.4f}  {row['final_norm']:>12.6g}  {row['status']}"
        )

    table_path = None
    if base_csv is not None:
        stem, dot, ext = base_csv.rpartition(".")
        table_name = f"{stem or base_csv}_sweep.{ext if dot else 'csv'}"
        table_path = _resolve(table_name, args.output_dir)
        with open(table_path, "w", encoding="utf-8") as handle:
            handle.write(f"{args.param},admissible,nu_fit,r_squared,final_norm,status\n")
            for row in rows:
                adm = "" if row["admissible"] is None else str(row["admissible"]).lower()
                handle.write(
                    ",".join(
                        [
                            format_float(row["value"]),
                            adm,
                            format_float(row["nu"]) if not math.isnan(row["nu"]) else "",
                            format_float(row["r_squared"]) if not math.isnan(row["r_squared"]) else "",
                            format_float(row["final_norm"]) if not math.isnan(row["final_norm"]) else "",
                            '"' + row["status"].replace('"', "'") + '"',
                        ]
                    )
                    + "\n"
                )
        print(f"sweep table: {table_path}")

    if cfg.figures and table_path is not None:
        from . import plots

        fig_path = Path(str(table_path).rsplit(".", 1)[0] + ".png")
        plots.save_sweep_figure(
            [row["value"] for row in rows],
            [row["nu"] for row in rows],
            [bool(row["admissible"]) for row in rows],
            args.param,
            fig_path,
        )
        print(f"sweep figure: {fig_path}")

    return 0 if any(row["status"] == "ok" for row in rows) else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kinbc",
        description="Boundary feedback design and upwind simulation for "
        "linearized discrete-velocity kinetic models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = dict(threads="worker threads for sweeps (env KINBC_THREADS)", output="directory for output files")
    for name, help_text in (
        ("verify", "check steadiness and the dissipation decomposition"),
        ("design", "compute the decay certificate, gain bounds and admissibility"),
        ("simulate", "run the upwind solver and fit the decay rate"),
        ("sweep", "repeat simulate over a parameter range"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to a run configuration file")
        p.add_argument("--threads", type=int, default=None, help=common["threads"])
        p.add_argument("--output-dir", default=None, help=common["output"])
        if name == "sweep":
            p.add_argument("--param", required=True, choices=_SWEEP_PARAMS)
            p.add_argument("--range", required=True, help="lo:hi:step (inclusive) or v1,v2,...")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    commands = {
        "verify": cmd_verify,
        "design": cmd_design,
        "simulate": cmd_simulate,
        "sweep": cmd_sweep,
    }
    try:
        return commands[args.command](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
