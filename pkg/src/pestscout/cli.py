"""Command line: flat config files in, CSV tables and infestation maps out."""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import shutil
import sys
import tempfile
from dataclasses import fields, replace
from pathlib import Path
from typing import Sequence

from . import infestation as inf
from .cost_model import CostModel, DetectionCurve, DetectionMode, kmh_to_ms
from .engine import Mode, RunReport, SeedingSpec, SimConfig, initial_infestation, substreams
from .experiments import (
    PRESETS, AggregateReport, Scenario, SweepSpec, mode_defaults, preset, run_scenario,
    run_sweep, threshold_median,
)
from .field import FieldSpec, build_grid
from .infestation import SpreadParams
from .policies import PolicyError, PolicySpec, parse_policy

SECTIONS = ("field", "spread", "cost", "policy", "run", "sweep")


class ConfigError(ValueError):
    def __init__(self, message: str, path: str | None = None, lineno: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        super().__init__(where + message)
        self.lineno = lineno


# ---------------------------------------------------------------------------
# value parsing


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not a finite number")
    return value


def _int(text: str) -> int:
    return int(text, 10)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _opt_int(text: str) -> int | None:
    return None if text.lower() in ("", "none") else _int(text)


def _opt_float(text: str) -> float | None:
    return None if text.lower() in ("", "none") else _float(text)


def _text(text: str) -> str:
    return text


FIELD_KEYS = {
    "row_length_m": _float, "row_width_m": _float, "plant_spacing_m": _float,
    "area_dunam": _float, "plant_count": _opt_int, "corridor_crossing_m": _opt_float,
}
SPREAD_KEYS = {"initial_probability": _float, "severity": _float, "per_edge": _bool}
COST_KEYS = {
    "speed_kmh": _float, "speed_m_per_s": _float, "vp1_s": _float, "vp2_s": _float,
    "vp3_s": _float, "turn90_s": _float, "turn180_s": _float, "between_rows_s": _float,
    "day_budget_s": _float, "inspect_seconds": _float, "detection_mode": _text,
    "detection_curve": _text, "approach_s": _float, "side_switch_s": _float,
    "charge_guard_turn": _bool,
}
POLICY_KEYS = {"policy": _text, "n": _int, "max_skip": _int, "vp": _int,
               "passes_per_day": _int, "suspicious": _text}
RUN_KEYS = {
    "days": _int, "seed": _int, "mode": _text, "seeding": _text, "spots_per_ha": _float,
    "mean_spot_size": _float, "edge_bias": _float, "map_path": _text, "policies": _text,
    "repetitions": _int, "name": _text,
}
SWEEP_KEYS = {"axis": _text, "values": _text}
KEYS = {"field": FIELD_KEYS, "spread": SPREAD_KEYS, "cost": COST_KEYS,
        "policy": POLICY_KEYS, "run": RUN_KEYS, "sweep": SWEEP_KEYS}


def read_config_text(text: str, path: str = "<config>") -> dict[str, dict[str, tuple[object, int]]]:
    """Split a config into ``{section: {key: (value, line number)}}`` with typed values."""
    out: dict[str, dict[str, tuple[object, int]]] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", path, lineno)
            out.setdefault(section, {})
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", path, lineno)
        if section is None:
            raise ConfigError(f"key {key!r} appears before any [section]", path, lineno)
        parser = KEYS[section].get(key)
        if parser is None:
            raise ConfigError(f"unknown key {key!r} in [{section}]", path, lineno)
        if key in out[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", path, lineno)
        try:
            out[section][key] = (parser(value), lineno)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", path, lineno) from None
    return out


def _apply(obj, updates: dict, path: str, section: str):
    try:
        return replace(obj, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}", path) from None


def build_config(raw: dict, mode: Mode | str | None = None, path: str = "<config>"):
    """Turn parsed sections into a SimConfig, Scenario or SweepSpec."""

    def val(section: str, key: str, default=None):
        entry = raw.get(section, {}).get(key)
        return default if entry is None else entry[0]

    def line(section: str, key: str) -> int | None:
        entry = raw.get(section, {}).get(key)
        return None if entry is None else entry[1]

    def fail(msg: str, section: str, key: str | None = None):
        raise ConfigError(msg, path, line(section, key) if key else None)

    mode_text = mode if mode is not None else val("run", "mode", Mode.CHAPTER4.value)
    try:
        mode_enum = Mode(mode_text)
    except ValueError:
        fail(f"mode must be chapter4 or chapter5, got {mode_text!r}", "run", "mode")
    base = mode_defaults(mode_enum)

    f_updates = {k: v for k, (v, _) in raw.get("field", {}).items()}
    field_spec = _apply(base.field, f_updates, path, "field")

    s_updates = {k: v for k, (v, _) in raw.get("spread", {}).items()}
    spread = _apply(base.spread, s_updates, path, "spread")

    c_raw = {k: v for k, (v, _) in raw.get("cost", {}).items()}
    c_updates: dict = {}
    if "speed_kmh" in c_raw and "speed_m_per_s" in c_raw:
        fail("give speed_kmh or speed_m_per_s, not both", "cost", "speed_m_per_s")
    if "speed_kmh" in c_raw:
        c_updates["speed_m_per_s"] = kmh_to_ms(c_raw.pop("speed_kmh"))
    vp = dict(base.cost.vp_times_s)
    for k in ("vp1_s", "vp2_s", "vp3_s"):
        if k in c_raw:
            vp[int(k[2])] = c_raw.pop(k)
    c_updates["vp_times_s"] = vp
    if "detection_mode" in c_raw:
        try:
            c_updates["detection_mode"] = DetectionMode(c_raw.pop("detection_mode"))
        except ValueError:
            fail("detection_mode must be deterministic or probabilistic", "cost", "detection_mode")
    if "detection_curve" in c_raw:
        try:
            c_updates["curve"] = DetectionCurve.parse(c_raw.pop("detection_curve"))
        except ValueError as exc:
            fail(str(exc), "cost", "detection_curve")
    c_updates.update(c_raw)
    cost = _apply(base.cost, c_updates, path, "cost")

    p_raw = {k: v for k, (v, _) in raw.get("policy", {}).items()}
    name = p_raw.pop("policy", None)
    try:
        if name is None:
            if p_raw:
                fail("policy parameters given without policy=NAME", "policy")
            policy = base.policy
        else:
            policy = PolicySpec(name, p_raw)
            policy.build()
    except PolicyError as exc:
        fail(str(exc), "policy", "policy")

    seeding = base.seeding
    s_keys = {"seeding": "kind", "spots_per_ha": "spots_per_ha",
              "mean_spot_size": "mean_spot_size", "edge_bias": "edge_bias", "map_path": "map_path"}
    seed_updates = {dst: val("run", src) for src, dst in s_keys.items() if val("run", src) is not None}
    seeding = _apply(seeding, seed_updates, path, "run")

    cfg = SimConfig(
        field=field_spec, spread=spread, cost=cost, policy=policy,
        days=val("run", "days", base.days), seed=val("run", "seed", base.seed),
        mode=mode_enum, seeding=seeding,
    )
    try:
        cfg.validate()
    except (ValueError, PolicyError) as exc:
        raise ConfigError(str(exc), path) from None

    policies_text = val("run", "policies")
    reps = val("run", "repetitions")
    if reps is not None and reps < 1:
        fail("repetitions must be >= 1", "run", "repetitions")
    scenario = None
    if policies_text is not None or reps is not None or "sweep" in raw:
        pols: tuple[PolicySpec, ...] = (policy,)
        if policies_text is not None:
            try:
                pols = tuple(parse_policy(p) for p in str(policies_text).split(";") if p.strip())
            except PolicyError as exc:
                fail(str(exc), "run", "policies")
            if not pols:
                fail("policies list is empty", "run", "policies")
        scenario = Scenario(val("run", "name", "scenario"), cfg.with_(policy=pols[0]), pols,
                            reps if reps is not None else 10)

    if "sweep" in raw:
        axis = val("sweep", "axis")
        values = val("sweep", "values")
        if axis is None:
            raise ConfigError("[sweep] needs axis=", path)
        if values is None:
            raise ConfigError("[sweep] needs values=", path)
        try:
            vals = tuple(_float(v) for v in str(values).split(",") if v.strip())
            assert scenario is not None
            return SweepSpec(axis, vals, scenario)
        except ValueError as exc:
            fail(str(exc), "sweep", "values" if "value" in str(exc) else "axis")
    return scenario if scenario is not None else cfg


def parse_config_text(text: str, mode: Mode | str | None = None, path: str = "<config>"):
    return build_config(read_config_text(text, path), mode, path)


def parse_config(path: str | os.PathLike, mode: Mode | str | None = None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config_text(text, mode, str(path))


def emit_config(obj: SimConfig | Scenario | SweepSpec) -> str:
    """Config text that :func:`parse_config` turns back into an equal object."""
    sweep = obj if isinstance(obj, SweepSpec) else None
    scenario = sweep.base if sweep else (obj if isinstance(obj, Scenario) else None)
    cfg = scenario.base if scenario else obj
    assert isinstance(cfg, SimConfig)
    out = io.StringIO()

    def put(key, value):
        if isinstance(value, float):
            value = repr(value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif value is None:
            value = "none"
        out.write(f"{key} = {value}\n")

    out.write("[field]\n")
    for f in fields(FieldSpec):
        put(f.name, getattr(cfg.field, f.name))
    out.write("\n[spread]\n")
    for f in fields(SpreadParams):
        put(f.name, getattr(cfg.spread, f.name))
    c = cfg.cost
    out.write("\n[cost]\n")
    put("speed_m_per_s", c.speed_m_per_s)
    for vp in (1, 2, 3):
        if vp in c.vp_times_s:
            put(f"vp{vp}_s", float(c.vp_times_s[vp]))
    for name in ("turn90_s", "turn180_s", "between_rows_s", "day_budget_s", "inspect_seconds",
                 "approach_s", "side_switch_s"):
        put(name, float(getattr(c, name)))
    put("charge_guard_turn", c.charge_guard_turn)
    put("detection_mode", c.detection_mode.value)
    put("detection_curve", c.curve.format())
    out.write("\n[policy]\n")
    put("policy", cfg.policy.name)
    for k, v in sorted(cfg.policy.params.items()):
        put(k, v)
    out.write("\n[run]\n")
    put("mode", cfg.mode.value)
    put("days", cfg.days)
    put("seed", cfg.seed)
    s = cfg.seeding
    put("seeding", s.kind)
    put("spots_per_ha", float(s.spots_per_ha))
    put("mean_spot_size", float(s.mean_spot_size))
    put("edge_bias", float(s.edge_bias))
    if s.map_path:
        put("map_path", s.map_path)
    if scenario is not None:
        put("name", scenario.name)
        put("repetitions", scenario.repetitions)
        put("policies", "; ".join(p.label for p in scenario.policies))
    if sweep is not None:
        out.write("\n[sweep]\n")
        put("axis", sweep.axis)
        put("values", ", ".join(repr(float(v)) for v in sweep.values))
    return out.getvalue()


# ---------------------------------------------------------------------------
# CSV output

RESULTS_HEADER = ["run_id", "policy", "seed", "day", "visited_pct", "pcd_ed",
                  "cum_detection_pct", "time_used_s"]
SUMMARY_HEADER = ["policy", "metric", "mean", "std", "median"]
THRESHOLD_HEADER = ["policy", "seed", "d30", "d50", "d80", "d100"]


def _num(x: float) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return f"{x:.4f}"


def results_rows(agg: AggregateReport) -> list[list[str]]:
    rows = []
    run_id = 0
    n_reps = agg.repetitions
    for r in range(n_reps):
        for pol in agg.policies:
            rep = agg.runs[pol][r]
            for d in rep.days:
                rows.append([str(run_id), pol, str(rep.seed), str(d.day), _num(d.visited_pct),
                             _num(d.pcd_ed), _num(d.cumulative_detection_pct), _num(d.time_used_s)])
            run_id += 1
    return rows


def threshold_rows(agg: AggregateReport) -> list[list[str]]:
    rows = []
    for pol in agg.policies:
        for rep in agg.runs[pol]:
            rows.append([pol, str(rep.seed)] + ["" if rep.thresholds[t] is None else str(rep.thresholds[t])
                                                for t in (30, 50, 80, 100)])
    return rows


def summary_rows(agg: AggregateReport) -> list[list[str]]:
    return [[pol, metric, _num(s.mean), _num(s.std), _num(s.median)]
            for pol, metric, s in agg.summary()]


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_aggregate(agg: AggregateReport, scenario: Scenario, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", RESULTS_HEADER, results_rows(agg))
    _write_csv(out / "summary.csv", SUMMARY_HEADER, summary_rows(agg))
    _write_csv(out / "thresholds.csv", THRESHOLD_HEADER, threshold_rows(agg))
    maps = out / "maps"
    maps.mkdir(exist_ok=True)
    grid = build_grid(scenario.base.field)
    seen = set()
    for _, _, cfg in scenario.configs():
        if cfg.seed in seen:
            continue
        seen.add(cfg.seed)
        state = initial_infestation(cfg, grid, substreams(cfg.seed)["seeding"])
        inf.export_map(grid, state, maps / f"initial_{cfg.seed}.csv")
    (out / "config.cfg").write_text(emit_config(scenario), encoding="utf-8")


def format_summary(agg: AggregateReport) -> str:
    lines = [f"{agg.name}: {agg.repetitions} repetition(s), {agg.days} day(s)"]
    lines.append(f"  {'policy':<34} {'final det %':>12} {'visited %/day':>14} {'D100 median':>12}")
    for pol in agg.policies:
        fin = agg.final_detection(pol)
        vis = agg.day_metric(pol, "visited_pct").mean()
        d100 = [r.d100 for r in agg.runs[pol]]
        med = threshold_median(d100)
        med_s = "never" if math.isinf(med) else f"{med:g}"
        lines.append(f"  {pol:<34} {fin.mean():8.1f} +- {fin.std():4.1f} {vis:11.1f}    {med_s:>10}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# commands


def _load_scenario(args) -> Scenario | SweepSpec:
    if args.preset and args.config:
        raise ConfigError("use either --config or --preset, not both")
    if args.preset:
        try:
            obj: object = preset(args.preset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        if args.mode and Mode(args.mode) is not obj.base.mode:  # type: ignore[attr-defined]
            raise ConfigError(f"preset {args.preset} is a {obj.base.mode.value} scenario")  # type: ignore[attr-defined]
    elif args.config:
        obj = parse_config(args.config, args.mode)
    else:
        obj = mode_defaults(args.mode or "chapter4")
    if isinstance(obj, SimConfig):
        obj = Scenario("run", obj, (obj.policy,), 1)
    return obj  # type: ignore[return-value]


def _override(sc: Scenario, args, compare: bool) -> Scenario:
    base = sc.base
    if args.seed is not None:
        base = base.with_(seed=args.seed)
    pols = sc.policies
    if args.policy:
        try:
            pols = tuple(parse_policy(p) for spec in args.policy for p in spec.split(";") if p.strip())
        except PolicyError as exc:
            raise ConfigError(str(exc)) from None
    elif compare and len(pols) < 2:
        pols = tuple(parse_policy(p) for p in ("dynamic", "naive", "bouncy"))
    if not compare and len(pols) > 1 and args.policy is None:
        pols = pols[:1]
    reps = args.reps if args.reps is not None else sc.repetitions
    if reps < 1:
        raise ConfigError("--reps must be >= 1")
    return replace(sc, base=base.with_(policy=pols[0]), policies=pols, repetitions=reps)


def _staged_output(out: Path):
    out = out.resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))


def _publish(stage: Path, out: Path) -> None:
    out = out.resolve()
    out.mkdir(parents=True, exist_ok=True)
    for entry in sorted(stage.iterdir()):
        target = out / entry.name
        if target.is_dir():
            shutil.rmtree(target)
        elif target.exists():
            target.unlink()
        os.replace(entry, target)
    stage.rmdir()


def cmd_run(args, compare: bool = False) -> int:
    obj = _load_scenario(args)
    if isinstance(obj, SweepSpec):
        obj = obj.base
    sc = _override(obj, args, compare)
    out = Path(args.out)
    stage = _staged_output(out)
    try:
        agg = run_scenario(sc, jobs=args.jobs)
        write_aggregate(agg, sc, stage)
        _publish(stage, out)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    print(format_summary(agg))
    print(f"wrote {out}/results.csv, summary.csv, thresholds.csv")
    return 0


def cmd_compare(args) -> int:
    return cmd_run(args, compare=True)


def _sweep_values(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    obj = _load_scenario(args)
    if isinstance(obj, SweepSpec):
        axis = args.axis or obj.axis
        values = _sweep_values(args.values) if args.values else obj.values
        scenario = obj.base
    else:
        if not args.axis or not args.values:
            raise ConfigError("sweep needs a [sweep] section or --axis and --values")
        axis, values, scenario = args.axis, _sweep_values(args.values), obj
    scenario = _override(scenario, args, compare=len(scenario.policies) > 1)
    sweep = SweepSpec(axis, values, scenario)
    out = Path(args.out)
    stage = _staged_output(out)
    try:
        aggs = run_sweep(sweep, jobs=args.jobs)
        rows = []
        for value, agg in zip(sweep.values, aggs):
            sub = stage / f"{sweep.axis}_{value:g}"
            write_aggregate(agg, sweep.scenario_for(value), sub)
            for r in summary_rows(agg):
                rows.append([f"{value:g}"] + r)
        _write_csv(stage / "sweep_summary.csv", ["value"] + SUMMARY_HEADER, rows)
        (stage / "config.cfg").write_text(emit_config(sweep), encoding="utf-8")
        _publish(stage, out)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    for value, agg in zip(sweep.values, aggs):
        print(f"[{sweep.axis} = {value:g}]")
        print(format_summary(agg))
    print(f"wrote {out}/sweep_summary.csv and one directory per value")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pestscout",
                                description="Simulate a scouting robot sampling an infested row-crop field.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "simulate one policy"),
                           ("compare", "simulate several policies on paired seeds"),
                           ("sweep", "repeat a scenario across values of one parameter")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="config file (key = value lines in [sections])")
        s.add_argument("--preset", choices=PRESETS, help="built-in scenario")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--reps", type=int, help="repetitions per policy")
        s.add_argument("--out", default="pestscout-out", help="output directory")
        s.add_argument("--jobs", type=int, default=1, help="worker processes")
        s.add_argument("--mode", choices=[m.value for m in Mode], help="default parameter set")
        s.add_argument("--policy", action="append",
                       help="policy such as bouncy:n=2; repeat or separate with ';'")
        if name == "sweep":
            s.add_argument("--axis", help="severity, inspect_seconds, field_size_ha, ...")
            s.add_argument("--values", help="comma-separated values")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except (ConfigError, PolicyError, ValueError) as exc:
        print(f"pestscout: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        target = exc.filename or ""
        print(f"pestscout: I/O error: {exc.strerror} {target}".rstrip(), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
