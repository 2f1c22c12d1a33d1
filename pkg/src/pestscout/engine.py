"""Day loop: ask the policy for actions, charge time, draw detections, spread overnight."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import infestation as inf
from .cost_model import CostModel, DetectionMode
from .field import FieldGrid, FieldSpec, build_grid
from .infestation import InfestationState, SpreadParams
from .policies import ActionKind, EngineView, Policy, PolicySpec

THRESHOLDS = (30, 50, 80, 100)


class EngineError(RuntimeError):
    """A policy or configuration broke an engine contract."""


class Mode(str, enum.Enum):
    CHAPTER4 = "chapter4"
    CHAPTER5 = "chapter5"


@dataclass(frozen=True)
class SeedingSpec:
    """How the day-0 infestation is laid out.

    ``random`` infests each planting-row slot independently with the spread
    parameters' initial probability. ``hotspots`` grows compact patches,
    about ``spots_per_ha`` of them per hectare. ``map`` loads a 0/1 grid file.
    """

    kind: str = "random"
    spots_per_ha: float = 2.0
    mean_spot_size: float = 3.0
    edge_bias: float = 0.8
    map_path: str | None = None

    def validate(self) -> None:
        if self.kind not in ("random", "hotspots", "map"):
            raise ValueError(f"seeding must be random, hotspots or map, got {self.kind!r}")
        if self.kind == "map" and not self.map_path:
            raise ValueError("map seeding needs map_path")
        if self.spots_per_ha < 0 or self.mean_spot_size < 1:
            raise ValueError("spots_per_ha must be >= 0 and mean_spot_size >= 1")
        if not 0.0 <= self.edge_bias <= 1.0:
            raise ValueError("edge_bias must lie in [0, 1]")


@dataclass(frozen=True)
class SimConfig:
    field: FieldSpec = FieldSpec()
    spread: SpreadParams = SpreadParams()
    cost: CostModel = CostModel()
    policy: PolicySpec = PolicySpec("snake_every")
    days: int = 3
    seed: int = 0
    mode: Mode = Mode.CHAPTER4
    seeding: SeedingSpec = SeedingSpec()

    def __post_init__(self) -> None:
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", Mode(self.mode))

    def validate(self) -> None:
        if not isinstance(self.days, int) or self.days < 1:
            raise ValueError(f"days must be an integer >= 1, got {self.days!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.field.validate()
        self.spread.validate()
        self.cost.validate()
        self.seeding.validate()
        self.policy.build()

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    @property
    def fixed_costs(self) -> bool:
        """Corridor traversals use the fixed step table in chapter4 mode."""
        return self.mode is Mode.CHAPTER4 and self.policy.uses_fixed_steps


@dataclass(frozen=True)
class DayReport:
    day: int
    visited_count: int
    visited_pct: float
    detections: int
    infested_at_start: int
    detection_pct_of_day_start: float
    time_used_s: float
    detected_total: int
    denominator: int
    cumulative_detection_pct: float
    new_infested: int
    visited: tuple[int, ...] = field(default=(), repr=False, compare=True)

    @property
    def pcd_ed(self) -> float:
        return self.detection_pct_of_day_start


@dataclass(frozen=True)
class RunReport:
    days: tuple[DayReport, ...]
    total_plants: int
    initial_count: int
    pvv_all: float
    pcd_all: float
    md: int
    remaining_infested: int
    thresholds: dict[int, int | None]
    seed: int = 0
    policy: str = ""

    def threshold_day(self, pct: int) -> int | None:
        return self.thresholds.get(pct)

    @property
    def d30(self) -> int | None:
        return self.thresholds[30]

    @property
    def d50(self) -> int | None:
        return self.thresholds[50]

    @property
    def d80(self) -> int | None:
        return self.thresholds[80]

    @property
    def d100(self) -> int | None:
        return self.thresholds[100]

    @property
    def final_detection_pct(self) -> float:
        return self.pcd_all


def percent(num: int, den: int) -> float:
    return 100.0 if den == 0 else 100.0 * num / den


def reaches(num: int, den: int, threshold: int) -> bool:
    # integer comparison avoids 99.999...% rounding surprises
    return num * 100 >= threshold * den


def detection_denominator(state: InfestationState, final_day: bool) -> int:
    """Insects counted against detection: everything except the last night's spread."""
    return state.cumulative_total - (state.new_today if final_day else 0)


def substreams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for seeding, spread, policy and detection draws."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("seeding", "spread", "policy", "detection")
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def initial_infestation(config: SimConfig, grid: FieldGrid, rng: np.random.Generator) -> InfestationState:
    s = config.seeding
    if s.kind == "map":
        assert s.map_path is not None
        return inf.seed_from_map(grid, s.map_path)
    if s.kind == "hotspots":
        hectares = config.field.area_dunam / 10.0
        n_spots = max(1, round(s.spots_per_ha * hectares))
        return inf.seed_hotspots(grid, n_spots, s.mean_spot_size, rng, s.edge_bias)
    return inf.seed_random(grid, config.spread, rng)


@dataclass
class EngineState:
    config: SimConfig
    grid: FieldGrid
    policy: Policy
    infestation: InfestationState
    rngs: dict[str, np.random.Generator]
    day: int = 0
    ever_visited: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    denominator: int = 0
    reports: list[DayReport] = field(default_factory=list)
    check_invariants: bool = False
    keep_log: bool = True

    @property
    def cost(self) -> CostModel:
        return self.config.cost


def _detect_probability(cost: CostModel) -> float:
    if cost.detection_mode is DetectionMode.DETERMINISTIC:
        return 1.0
    return cost.curve(cost.inspect_seconds)


def new_engine(config: SimConfig, policy: Policy | None = None,
               check_invariants: bool = False, keep_log: bool = True) -> EngineState:
    config.validate()
    grid = build_grid(config.field)
    rngs = substreams(config.seed)
    state = initial_infestation(config, grid, rngs["seeding"])
    if policy is None:
        policy = config.policy.build()
    policy.reset(grid, config.cost, rngs["policy"], fixed_costs=config.fixed_costs)
    return EngineState(
        config=config,
        grid=grid,
        policy=policy,
        infestation=state,
        rngs=rngs,
        ever_visited=np.zeros(grid.total, dtype=bool),
        denominator=state.cumulative_total,
        check_invariants=check_invariants,
        keep_log=keep_log,
    )


def run_day(es: EngineState) -> DayReport:
    """Simulate one working day followed by the night's spread."""
    es.day += 1
    cfg, grid, cost = es.config, es.grid, es.config.cost
    state = es.infestation
    N = grid.total
    budget = cost.day_budget_s
    time_left = budget
    visited_today = np.zeros(N, dtype=bool)
    log: list[int] = []
    detections = 0
    at_start = state.remaining
    p_detect = _detect_probability(cost)
    det_rng = es.rngs["detection"]
    view = EngineView(grid, cost, es.day, time_left, visited_today, cfg.fixed_costs)
    es.policy.on_day_start(es.day, view)

    idle = 0
    idle_limit = 2 * N + 10
    while len(log) < N:
        view.time_left = time_left
        action = es.policy.next_action(view)
        if action.kind is ActionKind.DAY_DONE:
            break
        if action.cost_s < 0 or not math.isfinite(action.cost_s):
            raise EngineError(f"{es.policy.name} produced a bad cost {action.cost_s}")
        if action.cost_s > time_left:
            if action.kind is ActionKind.MOVE:
                # cannot afford to reach the next row before dusk
                break
            raise EngineError(
                f"{es.policy.name} chose an inspection costing {action.cost_s:.2f}s "
                f"with {time_left:.2f}s left"
            )
        time_left -= action.cost_s
        if action.kind is ActionKind.MOVE:
            continue
        fresh = False
        for plant in action.targets:
            if visited_today[plant]:
                continue
            fresh = True
            visited_today[plant] = True
            es.ever_visited[plant] = True
            log.append(plant)
            if state.infested[plant]:
                hit = p_detect >= 1.0 or det_rng.random() < p_detect
                if hit:
                    inf.destroy(state, plant)
                    detections += 1
                    es.policy.on_detection(plant)
        idle = 0 if fresh else idle + 1
        if idle > idle_limit:
            break
        if es.check_invariants and not state.check_conservation():
            raise EngineError("conservation violated during the day")

    denominator = es.denominator
    detected = state.detected_total
    final = es.day >= cfg.days
    new = inf.spread_end_of_day(state, grid, cfg.spread.severity, es.rngs["spread"],
                                per_edge=cfg.spread.per_edge)
    if not final:
        es.denominator += new
    if es.check_invariants and not state.check_conservation():
        raise EngineError("conservation violated by spread")

    report = DayReport(
        day=es.day,
        visited_count=len(log),
        visited_pct=percent(len(log), N),
        detections=detections,
        infested_at_start=at_start,
        detection_pct_of_day_start=percent(detections, at_start),
        time_used_s=budget - time_left,
        detected_total=detected,
        denominator=denominator,
        cumulative_detection_pct=percent(detected, denominator),
        new_infested=new,
        visited=tuple(log) if es.keep_log else (),
    )
    es.reports.append(report)
    return report


def summarize(es: EngineState) -> RunReport:
    days = tuple(es.reports)
    thresholds: dict[int, int | None] = {}
    for thr in THRESHOLDS:
        thresholds[thr] = next(
            (d.day for d in days if reaches(d.detected_total, d.denominator, thr)), None
        )
    last = days[-1]
    return RunReport(
        days=days,
        total_plants=es.grid.total,
        initial_count=es.infestation.initial_count,
        pvv_all=percent(int(es.ever_visited.sum()), es.grid.total),
        pcd_all=last.cumulative_detection_pct,
        md=last.denominator - last.detected_total,
        remaining_infested=es.infestation.remaining,
        thresholds=thresholds,
        seed=es.config.seed,
        policy=es.config.policy.label,
    )


def run_simulation(config: SimConfig, policy: Policy | None = None,
                   check_invariants: bool = False, keep_log: bool = True) -> RunReport:
    es = new_engine(config, policy, check_invariants, keep_log)
    for _ in range(config.days):
        run_day(es)
    return summarize(es)
