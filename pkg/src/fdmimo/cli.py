"""Command-line front end.

Subcommands: ``run``, ``sweep``, ``verify-lemma``, ``diversity``,
``ray-import`` and ``report``. System parameters come from an optional JSON
config file, overridden by ``--set key=value``. Run options (trials, seed,
scenario, ...) may also be given in a ``"run"`` object inside the config
file; command-line flags win.

Exit codes: 0 success, 2 usage, 3 config, 4 IO, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .beamforming import Method
from .channel import AntennaGeometry, empirical_correlation, load_pattern, load_rays, synth_ray_si_channel
from .errors import ConfigError, DimensionError, InputFileError, SingularChannelError
from .montecarlo import ExperimentPlan, MetricsTable, Scenario, ray_si_correlation, run_experiment
from .montecarlo.engine import point_rng
from .montecarlo.lemmas import LemmaSetupError, verify_lemma
from .montecarlo.metrics import CSV_VERSION_LINE
from .montecarlo.report import constraint_report, format_report
from .montecarlo.stats import diversity_check
from .sysconfig import SystemConfig, config_from_mapping, read_config_file

__all__ = ["main", "build_parser", "UsageError", "EXIT_OK", "EXIT_USAGE", "EXIT_CONFIG",
           "EXIT_IO", "EXIT_NUMERIC"]

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4, 5

RUN_SECTION = "run"
RUN_DEFAULTS: Dict[str, Any] = {
    "scenario": "iid",
    "methods": "stt,sps",
    "trials": 10000,
    "seed": 0,
    "workers": 1,
    "chunk_size": 250,
    "rays": None,
    "pattern_tx": None,
    "pattern_rx": None,
    "realizations": 200,
    "perfect_csi": False,
    "power_scaling": False,
    "epsilon_si_sq": None,
    "si_error": "auto",
    "corr_r": None,
    "output": None,
    "axis": None,
    "lemma": "all",
}


class UsageError(Exception):
    """Bad or missing command-line input."""


def _parse_value(text: str):
    low = text.strip().lower()
    if low in ("none", "null"):
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_set(items: Optional[Sequence[str]]) -> Dict[str, Any]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = _parse_value(value)
    return out


def _parse_axes(items) -> tuple:
    if isinstance(items, dict):
        items = [f"{k}={','.join(str(v) for v in vals)}" for k, vals in items.items()]
    axes = []
    for item in items or ():
        key, sep, values = item.partition("=")
        if not sep or not values.strip():
            raise UsageError(f"--axis expects name=v1,v2,..., got {item!r}")
        axes.append((key.strip(), tuple(_parse_value(v) for v in values.split(","))))
    return tuple(axes)


class _Context:
    """Resolved config and run options: flag, then config ``run`` section, then default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        section: Dict[str, Any] = {}
        data: Dict[str, Any] = {}
        if args.config:
            data = read_config_file(args.config)
            section = data.pop(RUN_SECTION, {}) or {}
            if not isinstance(section, dict):
                raise ConfigError(f"'{RUN_SECTION}' section must be an object", RUN_SECTION)
            unknown = set(section) - set(RUN_DEFAULTS)
            if unknown:
                raise ConfigError(f"unknown run option(s): {', '.join(sorted(unknown))}",
                                  sorted(unknown)[0])
        self.section = section
        overrides = _parse_set(args.set)
        self.cfg: SystemConfig = config_from_mapping({**data, **overrides})

    def get(self, name: str, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        return self.section.get(name, RUN_DEFAULTS[name] if default is None else default)


def _methods(text) -> tuple:
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    try:
        return tuple(Method.parse(m) for m in items if str(m).strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _scenario(text) -> Scenario:
    try:
        return Scenario.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _positive_int(ctx: _Context, name: str, default=None) -> int:
    value = ctx.get(name, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise UsageError(f"{name} must be a positive integer, got {value!r}")
    return value


def _geometry(ctx: _Context, cfg: SystemConfig) -> AntennaGeometry:
    tx, rx = ctx.get("pattern_tx"), ctx.get("pattern_rx")
    return AntennaGeometry.default_ula(cfg.m_tx, cfg.n_rx,
                                     load_pattern(tx, "tx") if tx else None,
                                     load_pattern(rx, "rx") if rx else None)


def _require_rays(ctx: _Context, what: str) -> str:
    rays = ctx.get("rays")
    if not rays:
        raise UsageError(f"{what} needs --rays FILE")
    return rays


def _write_text(text: str, path: Optional[str]):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(table: MetricsTable) -> str:
    lines = []
    for row in table.rows:
        if row.skipped:
            lines.append(f"{row.scenario} {row.method} {row.param}: {row.metric}")
        else:
            lines.append(f"{row.scenario} {row.method} {row.param} {row.metric}: "
                         f"{row.mean:.6g} ± {row.stderr:.3g}  (n={row.trials})")
    return "\n".join(lines) + "\n"


def _emit_table(table: MetricsTable, output: Optional[str]):
    # CSV goes to stdout only when no file is given; the summary then moves to stderr
    if output:
        table.write_csv(output)
        sys.stdout.write(_summary(table))
    else:
        sys.stdout.write(table.to_csv_string())
        sys.stderr.write(_summary(table))


def _experiment(ctx: _Context, sweep: Optional[tuple]) -> int:
    cfg = ctx.cfg
    scenario = _scenario(ctx.get("scenario"))
    si_correlation = None
    seed = ctx.get("seed")
    if scenario is Scenario.RAY_FILE:
        rays = load_rays(_require_rays(ctx, "scenario ii"))
        if sweep and any(a in ("m_tx", "n_rx") for a, _ in sweep):
            raise UsageError("scenario ii cannot sweep antenna counts")
        si_correlation = ray_si_correlation(rays, _geometry(ctx, cfg),
                                            point_rng(seed, "ray-correlation", 0),
                                            _positive_int(ctx, "realizations"))
    si_error = ctx.get("si_error")
    if si_error not in ("auto", "pilot", "aqnm"):
        raise UsageError(f"--si-error must be auto, pilot or aqnm, got {si_error!r}")
    plan = ExperimentPlan(
        scenario=scenario,
        methods=_methods(ctx.get("methods")),
        trials=_positive_int(ctx, "trials"),
        master_seed=seed,
        sweep=sweep,
        perfect_csi=bool(ctx.get("perfect_csi")),
        epsilon_si_sq=ctx.get("epsilon_si_sq"),
        si_error_source=si_error,
        power_scaling=bool(ctx.get("power_scaling")),
        corr_r=ctx.get("corr_r"),
        si_correlation=si_correlation,
        chunk_size=_positive_int(ctx, "chunk_size"),
        workers=_positive_int(ctx, "workers"),
    )
    _emit_table(run_experiment(plan, cfg), ctx.get("output"))
    return EXIT_OK


def cmd_run(ctx: _Context) -> int:
    return _experiment(ctx, None)


def cmd_sweep(ctx: _Context) -> int:
    axes = _parse_axes(ctx.get("axis"))
    if not axes:
        raise UsageError("sweep needs at least one --axis name=v1,v2,...")
    return _experiment(ctx, axes)


def cmd_verify_lemma(ctx: _Context) -> int:
    which = str(ctx.get("lemma")).strip().lower()
    try:
        ids = [1, 2, 3, 4, 5] if which == "all" else [int(which)]
    except ValueError as exc:
        raise UsageError(f"--lemma must be 1 to 5 or 'all', got {which!r}") from exc
    trials = _positive_int(ctx, "trials", 4000)
    eps = ctx.get("epsilon_si_sq", 0.1)
    scenario = ctx.get("scenario", "i-high")
    parts = []
    for lemma_id in ids:
        rng = point_rng(ctx.get("seed"), f"lemma|{lemma_id}", 0)
        report = verify_lemma(lemma_id, ctx.cfg, trials, rng,
                              epsilon_sq=float(eps), scenario=scenario)
        parts.append(report.summary())
    _write_text("\n".join(parts) + "\n", ctx.get("output"))
    return EXIT_OK


def cmd_diversity(ctx: _Context) -> int:
    rng = point_rng(ctx.get("seed"), "diversity", 0)
    _emit_table(diversity_check(ctx.cfg, _positive_int(ctx, "trials"), rng), ctx.get("output"))
    return EXIT_OK


def cmd_ray_import(ctx: _Context) -> int:
    cfg = ctx.cfg
    rays = load_rays(_require_rays(ctx, "ray-import"))
    if not rays:
        raise InputFileError("ray file has no taps")
    geom = _geometry(ctx, cfg)
    realizations = _positive_int(ctx, "realizations", 1)
    rng = point_rng(ctx.get("seed"), "ray-import", 0)
    samples = np.stack([synth_ray_si_channel(rays, geom, rng) for _ in range(realizations)])
    emp = empirical_correlation(samples)
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["matrix", "row", "col", "magnitude"])
    for name in ("r_tx", "r_rx"):
        mag = np.abs(emp[name])
        for i in range(mag.shape[0]):
            for j in range(mag.shape[1]):
                writer.writerow([name, i, j, format(float(mag[i, j]), ".17g")])
    out = ctx.get("output")
    if out:
        Path(out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    info = sys.stdout if out else sys.stderr
    info.write(f"taps: {len(rays)}, realizations: {realizations}\n")
    for name in ("r_tx", "r_rx"):
        ev = np.linalg.eigvalsh(emp[name])
        info.write(f"{name}: largest eigenvalue fraction {ev[-1] / np.sum(ev):.4f}\n")
    return EXIT_OK


def cmd_report(ctx: _Context) -> int:
    rows = constraint_report(ctx.cfg, trials=_positive_int(ctx, "trials", 1000),
                             seed=ctx.get("seed"))
    _write_text(format_report(rows) + "\n", ctx.get("output"))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "verify-lemma": cmd_verify_lemma,
    "diversity": cmd_diversity,
    "ray-import": cmd_ray_import,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field (repeatable)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--scenario", help="iid, i-low, i-high or ii")
    sim.add_argument("--methods", help="comma-separated: nosic, stt, sps")
    sim.add_argument("--rays", help="ray CSV (scenario ii)")
    sim.add_argument("--pattern-tx", dest="pattern_tx", help="transmit antenna pattern CSV")
    sim.add_argument("--pattern-rx", dest="pattern_rx", help="receive antenna pattern CSV")
    sim.add_argument("--realizations", type=int,
                     help="ray realizations for the SI correlation estimate")
    sim.add_argument("--workers", type=int, help="worker processes")
    sim.add_argument("--chunk-size", dest="chunk_size", type=int, help="trials per seeded chunk")
    sim.add_argument("--perfect-csi", dest="perfect_csi", action="store_const", const=True,
                     help="use exact channel estimates")
    sim.add_argument("--power-scaling", dest="power_scaling", action="store_const", const=True,
                     help="lower the ZF transmit power to match the SI-nulling array gain")
    sim.add_argument("--epsilon-si", dest="epsilon_si_sq", type=float,
                     help="fixed SI estimation error variance")
    sim.add_argument("--si-error", dest="si_error", help="auto, pilot or aqnm")
    sim.add_argument("--corr-r", dest="corr_r", type=float,
                     help="exponential SI correlation coefficient")

    parser = argparse.ArgumentParser(prog="fdmimo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    sub.add_parser("run", parents=[common, sim], help="simulate one configuration")
    p = sub.add_parser("sweep", parents=[common, sim], help="simulate a parameter grid")
    p.add_argument("--axis", action="append", metavar="NAME=V1,V2,...",
                   help="sweep axis: a config field, epsilon_si_sq or corr_r (repeatable)")
    p = sub.add_parser("verify-lemma", parents=[common], help="numerically check an SI-power lemma")
    p.add_argument("--lemma", help="1 to 5 or 'all'")
    p.add_argument("--scenario", help="iid, i-low or i-high")
    p.add_argument("--epsilon-si", dest="epsilon_si_sq", type=float,
                   help="SI estimation error variance")
    sub.add_parser("diversity", parents=[common], help="precoder and combiner diversity orders")
    p = sub.add_parser("ray-import", parents=[common], help="validate a ray file and report SI correlation")
    p.add_argument("--rays", help="ray CSV")
    p.add_argument("--pattern-tx", dest="pattern_tx", help="transmit antenna pattern CSV")
    p.add_argument("--pattern-rx", dest="pattern_rx", help="receive antenna pattern CSV")
    p.add_argument("--realizations", type=int, help="SI realizations to synthesize (default 1)")
    sub.add_parser("report", parents=[common], help="preferred SIC method per system constraint")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        ctx = _Context(args)
        return COMMANDS[args.command](ctx)
    except (UsageError, LemmaSetupError) as exc:
        print(f"fdmimo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputFileError as exc:
        print(f"fdmimo: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, DimensionError, ValueError) as exc:
        print(f"fdmimo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fdmimo: IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SingularChannelError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fdmimo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
