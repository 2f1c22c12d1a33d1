"""Scenarios, repetitions with paired seeds, sensitivity sweeps and aggregation."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .cost_model import CostModel, DetectionCurve, DetectionMode
from .engine import THRESHOLDS, Mode, RunReport, SeedingSpec, SimConfig, run_simulation
from .field import FieldSpec
from .infestation import SpreadParams
from .policies import PolicySpec, parse_policy

PLANTS_PER_HA = 820
# per-sample stop, face-the-plant and pull-out time for free-moving policies
CH5_APPROACH_S = 24.0


def rep_seed(master: int, rep: int) -> int:
    """Seed of repetition ``rep``; every policy and sweep value shares it."""
    return int(np.random.SeedSequence([master, rep]).generate_state(1, np.uint64)[0])


def chapter4_config(policy: str | PolicySpec = "snake_every", **field_kw) -> SimConfig:
    spec = parse_policy(policy) if isinstance(policy, str) else policy
    return SimConfig(field=FieldSpec(**field_kw), policy=spec, mode=Mode.CHAPTER4)


def chapter5_config(
    policy: str | PolicySpec = "dynamic",
    hectares: float = 6.0,
    plant_count: int | None = None,
    seeding: SeedingSpec | None = None,
    days: int = 25,
    severity: float = 0.3,
) -> SimConfig:
    spec = parse_policy(policy) if isinstance(policy, str) else policy
    if plant_count is None:
        plant_count = round(hectares * PLANTS_PER_HA)
    return SimConfig(
        field=FieldSpec(row_length_m=100.0, row_width_m=4.0, plant_spacing_m=3.0,
                        area_dunam=hectares * 10.0, plant_count=plant_count),
        spread=SpreadParams(initial_probability=0.0, severity=severity),
        cost=CostModel(day_budget_s=12 * 3600.0, inspect_seconds=40.0,
                       detection_mode=DetectionMode.PROBABILISTIC,
                       approach_s=CH5_APPROACH_S),
        policy=spec,
        days=days,
        mode=Mode.CHAPTER5,
        seeding=seeding or SeedingSpec("hotspots", spots_per_ha=2.0, mean_spot_size=4.0,
                                       edge_bias=0.8),
    )


def mode_defaults(mode: Mode | str) -> SimConfig:
    mode = Mode(mode)
    return chapter4_config() if mode is Mode.CHAPTER4 else chapter5_config()


@dataclass(frozen=True)
class Scenario:
    name: str
    base: SimConfig
    policies: tuple[PolicySpec, ...] = ()
    repetitions: int = 10
    description: str = ""

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.policies:
            object.__setattr__(self, "policies", (self.base.policy,))
        elif self.base.policy != self.policies[0]:
            object.__setattr__(self, "base", self.base.with_(policy=self.policies[0]))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def configs(self) -> list[tuple[str, int, SimConfig]]:
        """(policy label, repetition, config) for every run, in a fixed order."""
        out = []
        for r in range(self.repetitions):
            seed = rep_seed(self.base.seed, r)
            for p in self.policies:
                out.append((p.label, r, self.base.with_(policy=p, seed=seed)))
        return out


SWEEP_AXES = ("field_size_ha", "field_size_dunam", "severity", "inspect_seconds",
              "detection_rate", "skip_n")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    base: Scenario

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {', '.join(SWEEP_AXES)}")
        if not self.values:
            raise ValueError("a sweep needs at least one value")
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be in non-decreasing order")

    def scenario_for(self, value: float) -> Scenario:
        return apply_axis(self.base, self.axis, value)


def apply_axis(sc: Scenario, axis: str, value: float) -> Scenario:
    base = sc.base
    if axis in ("field_size_ha", "field_size_dunam"):
        ha = value if axis == "field_size_ha" else value / 10.0
        fs = base.field
        if fs.plant_count is not None:
            density = fs.plant_count / (fs.area_dunam / 10.0)
            fs = replace(fs, area_dunam=ha * 10.0, plant_count=max(2, round(ha * density)))
        else:
            fs = replace(fs, area_dunam=ha * 10.0)
        base = base.with_(field=fs)
    elif axis == "severity":
        base = base.with_(spread=replace(base.spread, severity=float(value)))
    elif axis == "inspect_seconds":
        base = base.with_(cost=replace(base.cost, inspect_seconds=float(value)))
    elif axis == "detection_rate":
        base = base.with_(cost=replace(base.cost, curve=DetectionCurve.flat(float(value)),
                                       detection_mode=DetectionMode.PROBABILISTIC))
    elif axis == "skip_n":
        n = int(value)
        pols = tuple(PolicySpec(p.name, {**p.params, "n": n}) if "n" in p.build().params() else p
                     for p in sc.policies)
        return replace(sc, base=base.with_(policy=pols[0]), policies=pols,
                       name=f"{sc.name}[{axis}={value:g}]")
    return replace(sc, base=base, name=f"{sc.name}[{axis}={value:g}]")


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float
    median: float

    @classmethod
    def of(cls, xs: Sequence[float]) -> "Stat":
        a = np.asarray(xs, dtype=float)
        if a.size == 0:
            return cls(math.nan, math.nan, math.nan)
        finite = a[np.isfinite(a)]
        mean = float(finite.mean()) if finite.size else math.nan
        std = float(finite.std()) if finite.size else math.nan
        return cls(mean, std, float(np.median(a)))


def threshold_median(days: Iterable[int | None]) -> float:
    """Median threshold day with unattained runs ranked last (infinite)."""
    a = np.array([math.inf if d is None else d for d in days], dtype=float)
    return float(np.median(a)) if a.size else math.nan


@dataclass
class AggregateReport:
    name: str
    days: int
    runs: dict[str, list[RunReport]] = field(default_factory=dict)
    value: float | None = None

    @property
    def policies(self) -> list[str]:
        return list(self.runs)

    @property
    def repetitions(self) -> int:
        return len(next(iter(self.runs.values()))) if self.runs else 0

    def final_detection(self, policy: str) -> np.ndarray:
        return np.array([r.pcd_all for r in self.runs[policy]])

    def day_metric(self, policy: str, metric: str) -> np.ndarray:
        """(repetitions, days) array of a DayReport attribute."""
        return np.array([[getattr(d, metric) for d in r.days] for r in self.runs[policy]], dtype=float)

    def daily_stats(self, policy: str, metric: str) -> list[Stat]:
        m = self.day_metric(policy, metric)
        return [Stat.of(m[:, d]) for d in range(m.shape[1])]

    def threshold_days(self, policy: str, threshold: int) -> list[int | None]:
        return [r.thresholds[threshold] for r in self.runs[policy]]

    def attainment(self, policy: str, threshold: int) -> float:
        days = self.threshold_days(policy, threshold)
        return sum(d is not None for d in days) / len(days)

    def summary(self) -> list[tuple[str, str, Stat]]:
        rows: list[tuple[str, str, Stat]] = []
        for pol, runs in self.runs.items():
            rows.append((pol, "final_detection_pct", Stat.of([r.pcd_all for r in runs])))
            rows.append((pol, "mean_visited_pct",
                         Stat.of([float(np.mean([d.visited_pct for d in r.days])) for r in runs])))
            rows.append((pol, "pvv_all", Stat.of([r.pvv_all for r in runs])))
            rows.append((pol, "missed_detections", Stat.of([r.md for r in runs])))
            for thr in THRESHOLDS:
                days = self.threshold_days(pol, thr)
                attained = [d for d in days if d is not None]
                base = Stat.of(attained)
                rows.append((pol, f"d{thr}", Stat(base.mean, base.std, threshold_median(days))))
                rows.append((pol, f"d{thr}_attained", Stat.of([d is not None for d in days])))
        return rows


def _run_one(cfg: SimConfig) -> RunReport:
    return run_simulation(cfg, keep_log=False)


def run_configs(configs: Sequence[SimConfig], jobs: int = 1) -> list[RunReport]:
    """Run many independent simulations; results keep the input order."""
    if jobs <= 1 or len(configs) <= 1:
        return [_run_one(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, configs, chunksize=max(1, len(configs) // (4 * jobs))))


def run_scenario(scenario: Scenario, jobs: int = 1) -> AggregateReport:
    plan = scenario.configs()
    reports = run_configs([c for _, _, c in plan], jobs)
    agg = AggregateReport(scenario.name, scenario.base.days,
                          {p.label: [] for p in scenario.policies})
    for (label, _, _), rep in zip(plan, reports):
        agg.runs[label].append(rep)
    return agg


def run_sweep(sweep: SweepSpec, jobs: int = 1) -> list[AggregateReport]:
    out = []
    for value in sweep.values:
        agg = run_scenario(sweep.scenario_for(value), jobs)
        agg.value = value
        out.append(agg)
    return out


# ---------------------------------------------------------------------------
# presets

CH4_FIELDS = {
    "A": dict(row_length_m=100.0, plant_spacing_m=2.0, area_dunam=2.0),
    "B": dict(row_length_m=200.0, plant_spacing_m=3.0, area_dunam=4.0),
    "C": dict(row_length_m=400.0, plant_spacing_m=4.0, area_dunam=8.0),
}

CH4_POLICIES = tuple(parse_policy(p) for p in (
    "snake_every", "snake_every_n:n=2", "snake_every_n:n=3", "snake_every_n:n=4",
    "snake_online_random", "neighbor_every", "neighbor_every_n:n=2",
    "neighbor_every_n:n=3", "neighbor_every_n:n=4", "neighbor_online_random",
    "random_fraction:n=4",
))

CH5_POLICIES = tuple(parse_policy(p) for p in ("dynamic", "naive", "bouncy"))

# hot-spot layouts standing in for the three monitored plots
CH5_SCENARIOS = {
    "A": (1.0, 784, SeedingSpec("hotspots", spots_per_ha=2.0, mean_spot_size=2.0, edge_bias=0.4)),
    "B": (5.0, 4096, SeedingSpec("hotspots", spots_per_ha=2.0, mean_spot_size=4.0, edge_bias=0.8)),
    "C": (10.0, 8281, SeedingSpec("hotspots", spots_per_ha=2.0, mean_spot_size=4.0, edge_bias=0.8)),
}


def preset(name: str, repetitions: int = 10, seed: int = 0) -> Scenario:
    """Named scenarios: ``ch4-A`` .. ``ch4-C``, ``ch4-random-4``, ``ch4-random-8``,
    ``ch5-A`` .. ``ch5-C`` and ``ch5-6ha``."""
    if name.startswith("ch4-") and name[4:] in CH4_FIELDS:
        base = chapter4_config(**CH4_FIELDS[name[4:]]).with_(seed=seed)
        return Scenario(name, base, CH4_POLICIES, repetitions,
                        f"uninformed traversals, 3 days of 2 h, field {name[4:]}")
    if name == "ch4-random-4":
        base = chapter4_config(row_length_m=200.0, area_dunam=6.0).with_(seed=seed)
        pols = tuple(parse_policy(p) for p in ("random_fraction:n=4", "snake_online_random:max_skip=4",
                                               "neighbor_online_random:max_skip=4"))
        return Scenario(name, base, pols, repetitions,
                        "random quarter sample against online-random skips of 1-4, 200 m rows, 6 dunam")
    if name == "ch4-random-8":
        base = chapter4_config(row_length_m=210.0, area_dunam=11.0).with_(seed=seed)
        pols = tuple(parse_policy(p) for p in ("random_fraction:n=8", "snake_online_random:max_skip=8",
                                               "neighbor_online_random:max_skip=8"))
        return Scenario(name, base, pols, repetitions,
                        "random eighth sample against online-random skips of 1-8, 210 m rows, 11 dunam")
    if name.startswith("ch5-") and name[4:] in CH5_SCENARIOS:
        ha, count, seeding = CH5_SCENARIOS[name[4:]]
        base = chapter5_config(hectares=ha, plant_count=count, seeding=seeding).with_(seed=seed)
        return Scenario(name, base, CH5_POLICIES, repetitions,
                        f"{ha:g} ha, {count} plants, 25 days of 12 h")
    if name == "ch5-6ha":
        base = chapter5_config(hectares=6.0).with_(seed=seed)
        return Scenario(name, base, (parse_policy("dynamic"),), repetitions,
                        "6 ha sensitivity field, dynamic policy")
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("ch4-A", "ch4-B", "ch4-C", "ch4-random-4", "ch4-random-8",
           "ch5-A", "ch5-B", "ch5-C", "ch5-6ha")
