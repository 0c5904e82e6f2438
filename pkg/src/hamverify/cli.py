"""Command-line interface: verify, integrate, brackets, actions, catalog.

Exit-code contract: 0 = all requested checks pass, 1 = a check failed (the
report is still emitted), 2 = input error (no report).  JSON reports carry
``"schema": 1`` and the sampling seed so runs are reproducible.

Configuration files are flat INI text::

    [system]
    name = free2d            ; or inline: m = 2 / hamiltonian = "(p1^2+p2^2)/2"

    [integrals]
    phi1 = "p1"
    phi2 = "p2"
    phi3 = "q1 - t*p1"

    [sampling]
    count = 200
    seed = 2024
    box = -2, 2              ; every q and p coordinate
    t_range = 0, 2
    exclusion = "(p1^2+q1^2)/2 - 0.1"   ; keep a sample iff this is > 0

    [integrator]
    method = rk4
    step = 1e-3

    [checks]
    run = independence, closure, corank, residuals, lifted

    [output]
    report = verdict.json
    trajectory = flow.csv
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import catalog as catalog_mod
from .action_angle import (action_loop_integral, chart_verify, frequencies,
                           initial_data_check, measured_frequencies,
                           round_trip_defect)
from .dynamics import (IntegratorConfig, csv_header, equivalence_check,
                        integrate_extended, integrate_vertical,
                        trajectory_rows)
from .errors import (BlowupDetected, ConfigError, HamverifyError,
                     NotClosedOrbit, ParseError)
from .expr import ScalarField
from .integrability import (closure_check, corank_check, independence_check,
                            integrals_residual, involution_check,
                            lifted_report, structure_matrix)
from .lift import section_H
from .phase_space import PhasePoint, SystemSpec
from .sampling import Box, sample_extended_points, sample_phase_points

SCHEMA_VERSION = 1
ALL_CHECKS = ("independence", "closure", "corank", "involution", "residuals",
              "lifted", "equivalence", "chart")


def worker_count() -> int:
    """Worker cap from HAMVERIFY_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("HAMVERIFY_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    workers = worker_count()
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class RunConfig:
    system: SystemSpec
    box: Box
    exclusion: Optional[object] = None
    entry: Optional[catalog_mod.CatalogEntry] = None
    count: int = 200
    seed: int = 2024
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    checks: Optional[tuple] = None
    report_path: Optional[str] = None
    trajectory_path: Optional[str] = None


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _parse_range(text: str, label: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{label} must be 'low, high'")
    try:
        low, high = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad {label}: {exc}") from exc
    if not low < high:
        raise ConfigError(f"{label} must have low < high")
    return low, high


def _load_config_file(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    return parser


def _system_from_config(cp: configparser.ConfigParser, include_flagged: bool):
    if not cp.has_section("system"):
        raise ConfigError("config has no [system] section")
    section = cp["system"]
    has_name = "name" in section
    has_inline = "hamiltonian" in section or "m" in section
    if has_name and has_inline:
        raise ConfigError("give either a catalog name or an inline system, "
                          "not both")
    if has_name:
        return _catalog_entry(section["name"].strip(), include_flagged)
    if not ("m" in section and "hamiltonian" in section):
        raise ConfigError("inline systems need both m and hamiltonian")
    try:
        m = int(section["m"])
    except ValueError as exc:
        raise ConfigError(f"bad m: {exc}") from exc
    h_src = _unquote(section["hamiltonian"])
    integrals = []
    if cp.has_section("integrals"):
        for key, value in cp["integrals"].items():
            integrals.append(ScalarField.from_source(_unquote(value), m,
                                                     name=key))
    system = SystemSpec(m=m, H=ScalarField.from_source(h_src, m, name="H"),
                        integrals=tuple(integrals), name="inline")
    return system, None


def _catalog_entry(name: str, include_flagged: bool):
    try:
        entry = catalog_mod.get_entry(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    if entry.feature_flagged and not include_flagged:
        raise ConfigError(f"system {name!r} is feature-flagged; pass --flagged")
    return entry.system, entry


def _exclusion_from_expr(source: str, m: int):
    guard = ScalarField.from_source(source, m, name="exclusion")

    def exclude(x: PhasePoint) -> bool:
        return guard.value_at(x.t, x.q, x.p) <= 0.0
    return exclude


def build_run_config(args) -> RunConfig:
    """Merge config file and command-line flags into a RunConfig."""
    cp = None
    if getattr(args, "config", None):
        cp = _load_config_file(args.config)

    include_flagged = bool(getattr(args, "flagged", False))
    if getattr(args, "system", None):
        system, entry = _catalog_entry(args.system, include_flagged)
    elif cp is not None:
        system, entry = _system_from_config(cp, include_flagged)
    else:
        raise ConfigError("no system given; use --system NAME or --config FILE")

    box = entry.box if entry is not None else Box.default(system.m)
    exclusion = entry.exclusion if entry is not None else None
    count, seed = 200, 2024
    integrator = {}
    checks = None
    report_path = getattr(args, "out", None)
    trajectory_path = None

    if cp is not None:
        if cp.has_section("sampling"):
            s = cp["sampling"]
            count = s.getint("count", fallback=count)
            seed = s.getint("seed", fallback=seed)
            if "box" in s:
                low, high = _parse_range(s["box"], "box")
                box = Box(t_range=box.t_range,
                          q_ranges=((low, high),) * system.m,
                          p_ranges=((low, high),) * system.m)
            if "t_range" in s:
                box = Box(t_range=_parse_range(s["t_range"], "t_range"),
                          q_ranges=box.q_ranges, p_ranges=box.p_ranges)
            if "exclusion" in s:
                exclusion = _exclusion_from_expr(_unquote(s["exclusion"]),
                                                 system.m)
        if cp.has_section("integrator"):
            s = cp["integrator"]
            integrator["method"] = s.get("method", fallback="rk4").strip()
            integrator["step"] = s.getfloat("step", fallback=1e-3)
            integrator["rtol"] = s.getfloat("rtol", fallback=1e-10)
            integrator["atol"] = s.getfloat("atol", fallback=1e-10)
            integrator["max_steps"] = s.getint("max_steps", fallback=2_000_000)
            integrator["blowup_threshold"] = s.getfloat("blowup",
                                                        fallback=1e8)
        if cp.has_section("checks") and "run" in cp["checks"]:
            checks = tuple(c.strip() for c in cp["checks"]["run"].split(",")
                           if c.strip())
            for c in checks:
                if c not in ALL_CHECKS:
                    raise ConfigError(f"unknown check {c!r}")
        if cp.has_section("output"):
            report_path = report_path or cp["output"].get("report", fallback=None)
            trajectory_path = cp["output"].get("trajectory", fallback=None)

    if getattr(args, "count", None):
        count = args.count
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    if getattr(args, "checks", None):
        checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
        for c in checks:
            if c not in ALL_CHECKS:
                raise ConfigError(f"unknown check {c!r}")
    if getattr(args, "step", None):
        integrator["step"] = args.step

    try:
        integrator_cfg = IntegratorConfig(**integrator)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if count < 1:
        raise ConfigError("sampling count must be >= 1")
    return RunConfig(system=system, box=box, exclusion=exclusion, entry=entry,
                     count=count, seed=seed, integrator=integrator_cfg,
                     checks=checks, report_path=report_path,
                     trajectory_path=trajectory_path)


def _default_checks(system: SystemSpec) -> tuple:
    if system.n == 0:
        raise ConfigError(f"system {system.name!r} declares no integrals; "
                          "nothing to verify")
    if system.n == system.m:
        return ("residuals", "involution")
    return ("residuals", "independence", "closure", "corank", "lifted")


def _reference_point(cfg: RunConfig) -> PhasePoint:
    if cfg.entry is not None and cfg.entry.reference_point is not None:
        return cfg.entry.reference_point
    mid = lambda r: 0.5 * (r[0] + r[1])
    return PhasePoint(t=cfg.box.t_range[0],
                      q=tuple(mid(r) for r in cfg.box.q_ranges),
                      p=tuple(mid(r) for r in cfg.box.p_ranges))


def _emit_json(payload: dict, path: Optional[str]):
    text = json.dumps(payload, indent=2, default=float)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(rows, header, path: Optional[str]):
    if path:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)


# -- subcommands -------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = build_run_config(args)
    system = cfg.system
    checks = cfg.checks or _default_checks(system)
    samples = sample_phase_points(cfg.box, cfg.count, cfg.seed, cfg.exclusion)
    reports = {}
    for check in checks:
        if check == "independence":
            reports[check] = independence_check(system, samples)
        elif check == "closure":
            reports[check] = closure_check(system, samples)
        elif check == "corank":
            reports[check] = corank_check(system, samples)
        elif check == "involution":
            reports[check] = involution_check(system, samples)
        elif check == "residuals":
            reports[check] = integrals_residual(system, samples)
        elif check == "lifted":
            ext = sample_extended_points(cfg.box, cfg.count, cfg.seed + 1,
                                         cfg.exclusion)
            reports[check] = lifted_report(system, ext)
        elif check == "equivalence":
            x0 = _reference_point(cfg)
            rep = equivalence_check(system, x0, x0.t + args.t_end,
                                    cfg.integrator)
            reports[check] = _EquivalenceWrapper(rep)
        elif check == "chart":
            if cfg.entry is None or cfg.entry.chart is None:
                raise ConfigError(f"system {system.name!r} has no chart")
            reports[check] = chart_verify(system, cfg.entry.chart, samples)
    passed = all(rep.passed for rep in reports.values())
    payload = {"schema": SCHEMA_VERSION, "system": system.name,
               "m": system.m, "n": system.n, "seed": cfg.seed,
               "count": cfg.count, "evidence": "sampled",
               "checks": {name: rep.as_dict() for name, rep in reports.items()},
               "passed": passed}
    _emit_json(payload, cfg.report_path)
    return 0 if passed else 1


class _EquivalenceWrapper:
    def __init__(self, report):
        self.report = report
        self.passed = (report.max_deviation < 1e-8
                       and report.i0_drift < 1e-8)

    def as_dict(self):
        return {"max_deviation": self.report.max_deviation,
                "max_t_deviation": self.report.max_t_deviation,
                "i0_drift": self.report.i0_drift,
                "n_samples": self.report.n_samples,
                "passed": self.passed}


def cmd_integrate(args) -> int:
    cfg = build_run_config(args)
    system = cfg.system
    if args.x0:
        values = [float(v) for v in args.x0.split(",")]
        if len(values) != 1 + 2 * system.m:
            raise ConfigError(f"--x0 needs {1 + 2 * system.m} values "
                              "(t, q..., p...)")
        x0 = PhasePoint(t=values[0], q=values[1:system.m + 1],
                        p=values[system.m + 1:])
    else:
        x0 = _reference_point(cfg)

    summary = {"schema": SCHEMA_VERSION, "system": system.name,
               "seed": cfg.seed, "integrator": cfg.integrator.method,
               "step": cfg.integrator.step, "lifted": bool(args.lifted)}
    out_path = args.out or cfg.trajectory_path
    try:
        if args.compare:
            rep = equivalence_check(system, x0, x0.t + args.t_end,
                                    cfg.integrator)
            traj = rep.extended
            summary["equivalence_max_deviation"] = rep.max_deviation
            summary["i0_drift"] = rep.i0_drift
        elif args.lifted:
            traj = integrate_extended(system, section_H(system, x0),
                                      args.t_end, cfg.integrator)
        else:
            traj = integrate_vertical(system, x0, x0.t + args.t_end,
                                      cfg.integrator)
    except BlowupDetected as blow:
        summary["error"] = {"type": "BlowupDetected", "s": blow.s,
                            "norm": blow.norm}
        _emit_json(summary, args.summary)
        return 1

    summary["n_samples"] = len(traj)
    summary["monitors"] = {name: {"initial": mon.initial,
                                  "max_drift": mon.max_drift,
                                  "final": mon.final}
                           for name, mon in traj.monitors.items()}
    header = csv_header(system.m, traj.kind == "extended")
    _write_csv(trajectory_rows(traj, system), header, out_path)
    if args.summary:
        _emit_json(summary, args.summary)
    elif out_path:
        _emit_json(summary, None)
    return 0


def cmd_brackets(args) -> int:
    cfg = build_run_config(args)
    system = cfg.system
    if system.n == 0:
        raise ConfigError(f"system {system.name!r} declares no integrals")
    samples = sample_phase_points(cfg.box, cfg.count, cfg.seed, cfg.exclusion)
    names = [phi.name or f"phi{i + 1}" for i, phi in enumerate(system.integrals)]
    header = (["t"] + [f"q{i}" for i in range(1, system.m + 1)]
              + [f"p{i}" for i in range(1, system.m + 1)]
              + names
              + [f"s_{a + 1}_{b + 1}" for a in range(system.n)
                 for b in range(a + 1, system.n)])
    mats = _parallel_map(lambda x: structure_matrix(system, x), samples)
    rows = []
    for mat in mats:
        row = list(mat.point) + list(mat.phi_values)
        row += [mat.values[a, b] for a in range(system.n)
                for b in range(a + 1, system.n)]
        rows.append(row)
    _write_csv(rows, header, args.out)
    return 0


def cmd_actions(args) -> int:
    cfg = build_run_config(args)
    entry = cfg.entry
    if entry is None:
        raise ConfigError("the actions command needs a catalog system")
    levels = [float(v) for v in args.levels.split(",")] if args.levels \
        else [0.5, 1.0, 2.0]

    payload = {"schema": SCHEMA_VERSION, "system": entry.name,
               "seed": cfg.seed, "actions": [], "passed": True}
    rows = []
    for factor in entry.action_factors:
        if not factor.compact:
            continue
        for energy in levels:
            value = action_loop_integral(factor.hamiltonian, energy,
                                         cfg.integrator)
            record = {"factor": factor.name, "energy": energy,
                      "action": value}
            if factor.closed_form_action is not None:
                expected = factor.closed_form_action(energy)
                record["closed_form"] = expected
                record["abs_error"] = abs(value - expected)
                if record["abs_error"] > 1e-6:
                    payload["passed"] = False
            payload["actions"].append(record)
            rows.append([factor.name, energy, value,
                         record.get("closed_form", ""),
                         record.get("abs_error", "")])

    if entry.chart is not None:
        samples = sample_phase_points(cfg.box, cfg.count, cfg.seed,
                                      cfg.exclusion)
        chart_rep = chart_verify(cfg.system, entry.chart, samples)
        payload["chart"] = chart_rep.as_dict()
        x0 = _reference_point(cfg)
        actions0 = entry.chart.forward(x0).actions
        payload["frequencies_fd"] = list(frequencies(entry.chart, actions0))
        payload["frequencies_measured"] = list(
            measured_frequencies(cfg.system, entry.chart, x0, x0.t + 5.0,
                                 cfg.integrator))
        payload["round_trip_max"] = max(
            round_trip_defect(entry.chart, x) for x in samples[:50])
        if not chart_rep.passed or payload["round_trip_max"] > 1e-10:
            payload["passed"] = False

    _write_csv(rows, ["factor", "energy", "action", "closed_form",
                      "abs_error"], args.out)
    _emit_json(payload, args.report)
    return 0 if payload["passed"] else 1


def cmd_catalog(args) -> int:
    if args.action == "list":
        for entry in catalog_mod.catalog_entries(include_flagged=True):
            flags = []
            if entry.feature_flagged:
                flags.append("flagged")
            if not entry.flow_complete:
                flags.append("incomplete-flow")
            suffix = f"  [{', '.join(flags)}]" if flags else ""
            print(f"{entry.name:22s} m={entry.system.m} "
                  f"n={entry.system.n}{suffix}")
        return 0
    try:
        entry = catalog_mod.get_entry(args.name)
    except KeyError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(f"name:        {entry.name}")
    print(f"m:           {entry.system.m}")
    print(f"hamiltonian: {entry.system.H.source}")
    for i, phi in enumerate(entry.system.integrals, start=1):
        print(f"phi{i}:        {phi.source}")
    if entry.expected is not None:
        print(f"expected:    {entry.expected}")
    if entry.chart is not None:
        print(f"chart:       {entry.chart.name} (k={entry.chart.k}, "
              f"r={entry.chart.r})")
    if entry.exclusion_note:
        print(f"sampling:    {entry.exclusion_note}")
    if entry.notes:
        print(f"notes:       {entry.notes}")
    return 0


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamverify",
        description="verify integrability structure of non-autonomous "
                    "Hamiltonian systems")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--system", help="catalog system name")
        p.add_argument("--config", help="INI config file")
        p.add_argument("--count", type=int, help="sample count")
        p.add_argument("--seed", type=int, help="sampling seed")
        p.add_argument("--step", type=float, help="integrator step")
        p.add_argument("--flagged", action="store_true",
                       help="allow feature-flagged catalog systems")

    p_verify = sub.add_parser("verify", help="run integrability checks")
    add_common(p_verify)
    p_verify.add_argument("--checks", help="comma list of checks to run")
    p_verify.add_argument("--t-end", type=float, default=10.0,
                          help="horizon for the equivalence check")
    p_verify.add_argument("--out", help="write the JSON report here")
    p_verify.set_defaults(fn=cmd_verify)

    p_int = sub.add_parser("integrate", help="integrate a trajectory to CSV")
    add_common(p_int)
    p_int.add_argument("--t-end", type=float, default=10.0)
    p_int.add_argument("--x0", help="initial point 't,q1,..,p1,..'")
    p_int.add_argument("--lifted", action="store_true",
                       help="integrate the autonomous lifted flow")
    p_int.add_argument("--compare", action="store_true",
                       help="run both flows and report the deviation")
    p_int.add_argument("--out", help="trajectory CSV path (default stdout)")
    p_int.add_argument("--summary", help="monitor summary JSON path")
    p_int.set_defaults(fn=cmd_integrate)

    p_br = sub.add_parser("brackets",
                          help="structure-matrix entries at sampled points")
    add_common(p_br)
    p_br.add_argument("--out", help="CSV path (default stdout)")
    p_br.set_defaults(fn=cmd_brackets)

    p_act = sub.add_parser("actions",
                           help="loop-integral actions and chart verification")
    add_common(p_act)
    p_act.add_argument("--levels", help="comma list of energy levels")
    p_act.add_argument("--out", help="action table CSV path (default stdout)")
    p_act.add_argument("--report", help="chart report JSON path")
    p_act.set_defaults(fn=cmd_actions)

    p_cat = sub.add_parser("catalog", help="list or show catalog entries")
    cat_sub = p_cat.add_subparsers(dest="action", required=True)
    cat_list = cat_sub.add_parser("list")
    cat_list.set_defaults(fn=cmd_catalog)
    cat_show = cat_sub.add_parser("show")
    cat_show.add_argument("name")
    cat_show.set_defaults(fn=cmd_catalog)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"expression error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NotClosedOrbit, HamverifyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
