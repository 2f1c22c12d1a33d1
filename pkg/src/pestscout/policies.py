"""Sampling policies behind one interface.

A policy is asked for one action at a time. It answers with plants to
inspect (and what that costs), a pure move such as a row change, or
``DAY_DONE`` once nothing affordable remains. Each policy owns its cursor and
memory; the engine owns time, infestation and the daily visit log.

Two accounting styles exist. *Fixed* accounting charges the per-step
constants of the corridor traversals (drive one spacing plus a viewpoint
time, a pair of viewpoints plus a 180 degree turn, a flat row change).
*Travel* accounting charges the row-constrained travel time from the robot's
position plus the time spent at each plant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .cost_model import CostModel
from .field import FieldGrid


class PolicyError(ValueError):
    """Unknown policy or invalid policy parameters."""


class ActionKind(enum.Enum):
    INSPECT = "inspect"
    MOVE = "move"
    DAY_DONE = "day_done"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    targets: tuple[int, ...] = ()
    cost_s: float = 0.0
    label: str = ""


DAY_DONE = Action(ActionKind.DAY_DONE)


@dataclass
class EngineView:
    """What a policy may look at when choosing its next action."""

    grid: FieldGrid
    cost: CostModel
    day: int
    time_left: float
    visited_today: np.ndarray
    fixed_costs: bool = True


class Policy:
    name = "policy"

    def __init__(self) -> None:
        self.grid: FieldGrid | None = None
        self.cost: CostModel | None = None
        self.rng: np.random.Generator | None = None
        self.fixed_costs = True
        self.position = 0

    def params(self) -> dict:
        return {}

    def spec(self) -> "PolicySpec":
        return PolicySpec(self.name, self.params())

    def reset(self, grid: FieldGrid, cost: CostModel, rng: np.random.Generator,
              fixed_costs: bool = True) -> None:
        self.grid, self.cost, self.rng = grid, cost, rng
        self.fixed_costs = fixed_costs
        self.position = 0

    def on_day_start(self, day: int, view: EngineView) -> None:
        pass

    def next_action(self, view: EngineView) -> Action:
        raise NotImplementedError

    def on_detection(self, plant: int) -> None:
        pass

    def travel_cost(self, targets: Iterable[int]) -> float:
        """Travel accounting: drive to each target in turn and spend the inspection time there."""
        assert self.grid is not None and self.cost is not None
        total = 0.0
        here = self.position
        for t in targets:
            total += self.grid.travel_time(self.cost, here, t)
            total += self.cost.inspect_seconds + self.cost.approach_s
            here = t
        return total


# ---------------------------------------------------------------------------
# corridor traversals with fixed step costs


class _Traversal(Policy):
    """Shared cursor logic for the snake and neighbour families."""

    vp = 1
    online = False

    def __init__(self, n: int = 1, max_skip: int = 4, vp: int | None = None) -> None:
        super().__init__()
        if n < 1:
            raise PolicyError(f"{self.name}: n must be >= 1, got {n}")
        if max_skip < 1:
            raise PolicyError(f"{self.name}: max_skip must be >= 1, got {max_skip}")
        self.n = n
        self.max_skip = max_skip
        if vp is not None:
            self.vp = vp
        self.forward = True
        self.fresh = True
        self.pending_move = 0.0
        self.visits: np.ndarray = np.zeros(0, dtype=np.int64)

    def params(self) -> dict:
        if self.online:
            return {"max_skip": self.max_skip, "vp": self.vp}
        if self.n != 1:
            return {"n": self.n, "vp": self.vp}
        return {"vp": self.vp}

    def reset(self, grid, cost, rng, fixed_costs=True) -> None:
        super().reset(grid, cost, rng, fixed_costs)
        if self.vp not in cost.vp_times_s:
            raise PolicyError(f"{self.name}: no timing for {self.vp} viewpoint(s)")
        self.forward = True
        self.fresh = True
        self.pending_move = 0.0
        self.visits = np.zeros(grid.total, dtype=np.int64)

    def on_day_start(self, day: int, view: EngineView) -> None:
        self.fresh = True
        # a row change left unpaid at dusk is made overnight
        self.pending_move = 0.0

    def _skip(self) -> int:
        if self.online:
            assert self.rng is not None
            return int(self.rng.integers(1, self.max_skip + 1))
        return self.n

    def _step_cost(self) -> float:
        raise NotImplementedError

    def _guard(self) -> float:
        return self._step_cost()

    def _targets(self) -> tuple[int, ...]:
        raise NotImplementedError

    def _advance(self) -> None:
        raise NotImplementedError

    def next_action(self, view: EngineView) -> Action:
        if self.pending_move > 0:
            move, self.pending_move = self.pending_move, 0.0
            return Action(ActionKind.MOVE, (), move, "end_of_row")
        targets = self._targets()
        if self.fixed_costs:
            step = self._step_cost()
            if not view.time_left - self._guard() > 0:
                return DAY_DONE
        else:
            step = self.travel_cost(targets)
            if step > view.time_left:
                return DAY_DONE
        self.fresh = False
        for t in targets:
            self.visits[t] += 1
        self.position = targets[-1]
        self._advance()
        return Action(ActionKind.INSPECT, targets, step, "inspect")

    @staticmethod
    def _least_visited(visits: np.ndarray, candidates: range, prefer_high: bool) -> int:
        """Minimum visit count among ``candidates``; ties go high or low as asked."""
        best = None
        best_v = None
        order = candidates if not prefer_high else reversed(candidates)
        for k in order:
            v = visits[k]
            if best_v is None or v < best_v:
                best, best_v = k, v
        assert best is not None
        return best


class SnakeEvery(_Traversal):
    """Single-sided serpentine: walk the linear index one plant line after another."""

    name = "snake_every"
    vp = 3

    def __init__(self, vp: int | None = None) -> None:
        super().__init__(n=1, vp=vp)
        self.pos = 0

    def reset(self, grid, cost, rng, fixed_costs=True) -> None:
        super().reset(grid, cost, rng, fixed_costs)
        self.pos = 0

    def _step_cost(self) -> float:
        assert self.grid is not None and self.cost is not None
        step = self.grid.spec.plant_spacing_m / self.cost.speed_m_per_s + self.cost.vp_time(self.vp)
        if self.cost.charge_guard_turn:
            step += self.cost.turn90_s
        return step

    def _guard(self) -> float:
        # a 90 degree turn is reserved, but not spent, when (re)starting a pass
        assert self.cost is not None
        step = self._step_cost()
        if self.fresh and not self.cost.charge_guard_turn:
            step += self.cost.turn90_s
        return step

    def _targets(self) -> tuple[int, ...]:
        return (self.pos,)

    def _end_forward(self) -> int:
        assert self.grid is not None
        total, P = self.grid.total, self.grid.plants_per_row
        start = max(total - self.n, total - P)
        return self._least_visited(self.visits, range(start, total), prefer_high=True)

    def _end_backward(self) -> int:
        assert self.grid is not None
        stop = min(self.n, self.grid.plants_per_row)
        return self._least_visited(self.visits, range(0, stop), prefer_high=True)

    def _advance(self) -> None:
        assert self.grid is not None and self.cost is not None
        P, total = self.grid.plants_per_row, self.grid.total
        n = self._skip()
        old_line = self.pos // P
        if self.forward:
            if self.pos + n >= total:
                self.pos = self._end_forward()
                self.forward = False
                self.fresh = True
                return
            self.pos += n
        else:
            if self.pos - n < 0:
                self.pos = self._end_backward()
                self.forward = True
                self.fresh = True
                return
            self.pos -= n
        crossed = abs(self.pos // P - old_line)
        if crossed:
            self.pending_move = crossed * self.cost.between_rows_s


class SnakeEveryN(SnakeEvery):
    """Serpentine sampling every ``n``-th plant, reversing at the field ends."""

    name = "snake_every_n"

    def __init__(self, n: int = 2, vp: int | None = None) -> None:
        _Traversal.__init__(self, n=n, vp=vp)
        self.pos = 0


class SnakeOnlineRandom(SnakeEvery):
    """Serpentine with the skip redrawn uniformly from ``1..max_skip`` before each step."""

    name = "snake_online_random"
    online = True

    def __init__(self, max_skip: int = 4, vp: int | None = None) -> None:
        _Traversal.__init__(self, n=1, max_skip=max_skip, vp=vp)
        self.pos = 0

    # at a field end the random walk just steps one plant and turns around
    def _advance(self) -> None:
        assert self.grid is not None and self.cost is not None
        P, total = self.grid.plants_per_row, self.grid.total
        n = self._skip()
        old_line = self.pos // P
        if self.forward:
            if self.pos + n >= total:
                self.pos = self.pos + 1 if self.pos + 1 < total else self.pos - 1
                self.forward = False
                self.fresh = True
            else:
                self.pos += n
        else:
            if self.pos - n < 0:
                self.pos = self.pos - 1 if self.pos - 1 > 0 else self.pos + 1
                self.forward = True
                self.fresh = True
            else:
                self.pos -= n
        self.pos = min(max(self.pos, 0), total - 1)
        crossed = abs(self.pos // P - old_line)
        if crossed:
            self.pending_move = crossed * self.cost.between_rows_s


class NeighborEvery(_Traversal):
    """Inspect both plants facing each other across a corridor at every stop.

    The robot sweeps a corridor slot by slot, jumps to the next corridor at
    the row end and turns back at the far side of the field. The two edge
    corridors border a single plant line, so a stop there inspects one plant
    and needs no turn.
    """

    name = "neighbor_every"
    vp = 1

    def __init__(self, vp: int | None = None) -> None:
        super().__init__(n=1, vp=vp)
        self.corridor = 0
        self.slot = 0

    def reset(self, grid, cost, rng, fixed_costs=True) -> None:
        super().reset(grid, cost, rng, fixed_costs)
        self.corridor = 0
        self.slot = 0

    @property
    def num_corridors(self) -> int:
        assert self.grid is not None
        return self.grid.num_corridors

    def _step_cost(self) -> float:
        assert self.grid is not None and self.cost is not None
        c = self.cost
        drive = self.grid.spec.plant_spacing_m / c.speed_m_per_s
        if len(self.grid.corridor_lines(self.corridor)) == 1:
            return drive + c.vp_time(self.vp)
        return drive + 2 * c.vp_time(self.vp) + c.turn180_s

    def _targets(self) -> tuple[int, ...]:
        assert self.grid is not None
        P = self.grid.plants_per_row
        return tuple(line * P + self.slot for line in self.grid.corridor_lines(self.corridor))

    def _advance(self) -> None:
        assert self.grid is not None and self.cost is not None
        P = self.grid.plants_per_row
        n = self._skip()
        C = self.num_corridors
        if self.forward:
            slot, jumps = self.slot + n, 0
            while slot >= P:
                slot -= P
                jumps += 1
            self.slot = slot
            if jumps:
                self.corridor += jumps
                self.pending_move = jumps * self.cost.between_rows_s
            if self.corridor >= C:
                self.corridor = C - 1
                last_line = self.grid.num_plant_lines - 1
                lo = max(P - n, 0)
                best = self._least_visited(
                    self.visits, range(last_line * P + lo, last_line * P + P), prefer_high=True
                )
                self.slot = best - last_line * P
                self.forward = False
                self.fresh = True
        else:
            slot, jumps = self.slot - n, 0
            while slot < 0:
                slot += P
                jumps += 1
            self.slot = slot
            if jumps:
                self.corridor -= jumps
                self.pending_move = jumps * self.cost.between_rows_s
            if self.corridor < 0:
                self.corridor = 0
                self.slot = self._least_visited(
                    self.visits, range(0, min(n, P)), prefer_high=False
                )
                self.forward = True
                self.fresh = True


class NeighborEveryN(NeighborEvery):
    name = "neighbor_every_n"

    def __init__(self, n: int = 2, vp: int | None = None) -> None:
        _Traversal.__init__(self, n=n, vp=vp)
        self.corridor = 0
        self.slot = 0


class NeighborOnlineRandom(NeighborEvery):
    name = "neighbor_online_random"
    online = True

    def __init__(self, max_skip: int = 4, vp: int | None = None) -> None:
        _Traversal.__init__(self, n=1, max_skip=max_skip, vp=vp)
        self.corridor = 0
        self.slot = 0


class RandomFraction(SnakeEvery):
    """Each morning draw ``ceil(total / n)`` distinct plants and visit them in draw order."""

    name = "random_fraction"

    def __init__(self, n: int = 4, vp: int | None = None) -> None:
        if n < 2:
            raise PolicyError(f"random_fraction: n must be >= 2, got {n}")
        _Traversal.__init__(self, n=n, vp=vp)
        self.pos = 0
        self.sample: np.ndarray = np.zeros(0, dtype=np.int64)
        self.cursor = 0

    def params(self) -> dict:
        return {"n": self.n, "vp": self.vp}

    def sample_size(self) -> int:
        assert self.grid is not None
        return -(-self.grid.total // self.n)

    def on_day_start(self, day: int, view: EngineView) -> None:
        super().on_day_start(day, view)
        assert self.rng is not None and self.grid is not None
        self.sample = self.rng.choice(self.grid.total, size=self.sample_size(), replace=False)
        self.cursor = 0

    def next_action(self, view: EngineView) -> Action:
        if self.cursor >= len(self.sample):
            return DAY_DONE
        self.pos = int(self.sample[self.cursor])
        return super().next_action(view)

    def _advance(self) -> None:
        self.cursor += 1


# ---------------------------------------------------------------------------
# fixed-order sweeps with travel accounting


def serpentine_order(grid: FieldGrid) -> np.ndarray:
    """Even plant lines left to right, odd lines right to left."""
    idx = np.arange(grid.total).reshape(grid.shape).copy()
    idx[1::2] = idx[1::2, ::-1]
    return idx.reshape(-1)


class Bouncy(Policy):
    """Follow the serpentine order sampling every ``n``-th plant, bouncing at each end.

    At an end the robot restarts from the least-visited of the last ``n``
    positions (ties go to the one nearest the end) and reverses, so the
    return sweep covers the plants skipped on the way out. With
    ``passes_per_day`` set, the day also ends after that many bounces.
    Plants already inspected today are driven past.
    """

    name = "bouncy"

    def __init__(self, n: int = 2, passes_per_day: int | None = 1) -> None:
        super().__init__()
        if n < 1:
            raise PolicyError(f"{self.name}: n must be >= 1, got {n}")
        if passes_per_day is not None and passes_per_day < 1:
            raise PolicyError(f"{self.name}: passes_per_day must be >= 1")
        self.n = n
        self.passes_per_day = passes_per_day
        self.order: np.ndarray = np.zeros(0, dtype=np.int64)
        self.k = 0
        self.step = 1
        self.bounces_today = 0
        self.visits: np.ndarray = np.zeros(0, dtype=np.int64)

    def params(self) -> dict:
        return {"n": self.n, "passes_per_day": self.passes_per_day or 0}

    def reset(self, grid, cost, rng, fixed_costs=True) -> None:
        super().reset(grid, cost, rng, fixed_costs)
        self.order = serpentine_order(grid)
        self.k = 0
        self.step = 1
        self.visits = np.zeros(len(self.order), dtype=np.int64)

    def on_day_start(self, day: int, view: EngineView) -> None:
        self.bounces_today = 0

    def _bounce(self) -> None:
        m = len(self.order)
        n = min(self.n, m)
        if self.step > 0:
            cands = range(m - 1, m - 1 - n, -1)
        else:
            cands = range(0, n)
        self.k = min(cands, key=lambda j: self.visits[j])
        self.step = -self.step
        self.bounces_today += 1

    def _next_index(self, view: EngineView) -> int | None:
        m = len(self.order)
        for _ in range(2 * m + 2):
            if not 0 <= self.k < m:
                self._bounce()
                if self.passes_per_day is not None and self.bounces_today >= self.passes_per_day:
                    return None
            plant = int(self.order[self.k])
            if not view.visited_today[plant]:
                return self.k
            self.k += self.step * self.n
        return None

    def next_action(self, view: EngineView) -> Action:
        k = self._next_index(view)
        if k is None:
            return DAY_DONE
        plant = int(self.order[k])
        c = self.travel_cost((plant,))
        if c > view.time_left:
            return DAY_DONE
        self.visits[k] += 1
        self.position = plant
        self.k = k + self.step * self.n
        return Action(ActionKind.INSPECT, (plant,), c, "inspect")


class Naive(Bouncy):
    """Every plant, one by one, along the serpentine order."""

    name = "naive"

    def __init__(self) -> None:
        super().__init__(n=1, passes_per_day=None)

    def params(self) -> dict:
        return {}


# ---------------------------------------------------------------------------
# open-list hot-spot search


class Dynamic(Policy):
    """Greedy hot-spot search over an open list of suspicious plants.

    The robot always drives to the nearest plant on the open list. A positive
    detection puts the plant's unvisited neighbours on the list, and the next
    morning the neighbours of yesterday's finds are queued again. When the
    list runs dry it is refilled with, in order of preference: never-visited
    suspicious plants, never-visited plants, then the plants that have gone
    longest without a visit.
    """

    name = "dynamic"

    def __init__(self, suspicious: str = "boundary",
                 pop_observer: Callable[[int, np.ndarray, np.ndarray], None] | None = None) -> None:
        super().__init__()
        if suspicious not in ("boundary", "none"):
            raise PolicyError("dynamic: suspicious must be 'boundary' or 'none'")
        self.suspicious_kind = suspicious
        self.pop_observer = pop_observer
        self.open: np.ndarray = np.zeros(0, dtype=bool)
        self.close: np.ndarray = np.zeros(0, dtype=bool)
        self.suspicious: np.ndarray = np.zeros(0, dtype=bool)
        self.last_visit: np.ndarray = np.zeros(0, dtype=np.int64)
        self.found_today: list[int] = []
        self.found_yesterday: list[int] = []
        self.day = 0

    def params(self) -> dict:
        return {"suspicious": self.suspicious_kind}

    def reset(self, grid, cost, rng, fixed_costs=True) -> None:
        super().reset(grid, cost, rng, fixed_costs)
        N = grid.total
        if self.suspicious_kind == "boundary":
            self.suspicious = grid.boundary_mask.copy()
        else:
            self.suspicious = np.zeros(N, dtype=bool)
        self.open = self.suspicious.copy()
        self.close = np.zeros(N, dtype=bool)
        self.last_visit = np.full(N, -1, dtype=np.int64)
        self.found_today = []
        self.found_yesterday = []

    def on_day_start(self, day: int, view: EngineView) -> None:
        self.day = day
        self.close[:] = False
        self.found_yesterday, self.found_today = self.found_today, []
        for p in self.found_yesterday:
            self._push_neighbors(p)

    def _push_neighbors(self, plant: int) -> None:
        assert self.grid is not None
        nb = self.grid.neighbor_table[plant]
        nb = nb[nb >= 0]
        nb = nb[~self.close[nb]]
        self.open[nb] = True

    def on_detection(self, plant: int) -> None:
        self._push_neighbors(plant)
        self.found_today.append(plant)

    def refill(self) -> bool:
        avail = ~self.close
        never = self.last_visit < 0
        for tier in (self.suspicious & never & avail, never & avail):
            if tier.any():
                self.open |= tier
                return True
        if not avail.any():
            return False
        stalest = self.last_visit[avail].min()
        self.open |= avail & (self.last_visit == stalest)
        return True

    def next_action(self, view: EngineView) -> Action:
        assert self.grid is not None and self.cost is not None
        if not self.open.any() and not self.refill():
            return DAY_DONE
        cand = np.flatnonzero(self.open)
        times = self.grid.travel_times_from(self.cost, self.position, cand)
        # argmin keeps the first minimum, and cand is ascending: ties go to the lowest index
        k = int(np.argmin(times))
        j = int(cand[k])
        c = float(times[k]) + self.cost.inspect_seconds + self.cost.approach_s
        if c > view.time_left:
            return DAY_DONE
        if self.pop_observer is not None:
            self.pop_observer(j, cand, times)
        self.open[j] = False
        self.close[j] = True
        self.last_visit[j] = view.day
        self.position = j
        return Action(ActionKind.INSPECT, (j,), c, "inspect")


# ---------------------------------------------------------------------------
# names and parameters


POLICIES: dict[str, type[Policy]] = {
    cls.name: cls
    for cls in (SnakeEvery, SnakeEveryN, SnakeOnlineRandom, NeighborEveryN,
                NeighborOnlineRandom, NeighborEvery, RandomFraction, Naive, Bouncy, Dynamic)
}

TRAVERSAL_POLICIES = (
    "snake_every", "snake_every_n", "snake_online_random", "neighbor_every_n",
    "neighbor_online_random", "neighbor_every", "random_fraction",
)
SWEEP_POLICIES = ("naive", "bouncy", "dynamic")

_INT_PARAMS = {"n", "max_skip", "vp", "passes_per_day"}


@dataclass(frozen=True)
class PolicySpec:
    """A policy name with its parameters, e.g. ``bouncy:n=2``."""

    name: str
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if self.name not in POLICIES:
            raise PolicyError(
                f"unknown policy {self.name!r}; choose from {', '.join(POLICIES)}"
            )

    @property
    def uses_fixed_steps(self) -> bool:
        return self.name in TRAVERSAL_POLICIES

    def build(self) -> Policy:
        kwargs = dict(self.params)
        if self.name == "bouncy" and kwargs.get("passes_per_day") == 0:
            kwargs["passes_per_day"] = None
        try:
            return POLICIES[self.name](**kwargs)
        except TypeError as exc:
            raise PolicyError(f"{self.name}: bad parameters {self.params}: {exc}") from None

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}:{inner}"

    def __str__(self) -> str:
        return self.label


def parse_policy(text: str) -> PolicySpec:
    """``"snake_every_n:n=3"`` or ``"dynamic"``."""
    text = text.strip()
    name, _, rest = text.partition(":")
    params: dict = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        key = key.strip()
        if not eq:
            raise PolicyError(f"bad policy parameter {item!r}; expected key=value")
        value = value.strip()
        if key in _INT_PARAMS:
            try:
                params[key] = int(value)
            except ValueError:
                raise PolicyError(f"policy parameter {key} must be an integer, got {value!r}") from None
        else:
            params[key] = value
    spec = PolicySpec(name.strip(), params)
    spec.build()  # validate eagerly
    return spec


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def expected_pass_size(total: int, n: int) -> int:
    return math.ceil(total / n)
