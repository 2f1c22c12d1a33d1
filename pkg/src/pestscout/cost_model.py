"""Robot timing constants and the inspection-time to detection-probability curve."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping


class CostError(ValueError):
    """Invalid timing or detection parameters."""


def kmh_to_ms(kmh: float) -> float:
    return kmh * 1000.0 / 3600.0


class DetectionMode(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    PROBABILISTIC = "probabilistic"


@dataclass(frozen=True)
class CurveStep:
    threshold_s: float
    probability: float
    # False means the step only applies strictly above the threshold
    inclusive: bool = True

    def applies(self, t: float) -> bool:
        return t >= self.threshold_s if self.inclusive else t > self.threshold_s


@dataclass(frozen=True)
class DetectionCurve:
    """Piecewise-constant map from seconds spent at a plant to detection probability.

    Steps are scanned in order; the last step whose threshold is met wins.
    Times below the first threshold detect nothing.
    """

    steps: tuple[CurveStep, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise CostError("detection curve needs at least one step")
        prev_key = None
        prev_p = -1.0
        for s in self.steps:
            if not (0.0 <= s.probability <= 1.0):
                raise CostError(f"curve probability {s.probability} outside [0, 1]")
            if s.threshold_s < 0 or not math.isfinite(s.threshold_s):
                raise CostError(f"curve threshold {s.threshold_s} must be finite and >= 0")
            # an inclusive step sorts before an exclusive one at the same time
            key = (s.threshold_s, 0 if s.inclusive else 1)
            if prev_key is not None and key <= prev_key:
                raise CostError("curve thresholds must be strictly increasing")
            if s.probability < prev_p:
                raise CostError("detection curve must be non-decreasing")
            prev_key, prev_p = key, s.probability

    def __call__(self, t: float) -> float:
        return detection_probability(self, t)

    @classmethod
    def flat(cls, probability: float) -> "DetectionCurve":
        return cls((CurveStep(0.0, probability),))

    @classmethod
    def parse(cls, text: str) -> "DetectionCurve":
        """Parse ``"0:0,20:0.5,40:0.84,>40:0.9"``; a ``>`` prefix marks a strict threshold."""
        steps = []
        for chunk in text.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                t_text, p_text = chunk.split(":")
                inclusive = not t_text.strip().startswith(">")
                t = float(t_text.strip().lstrip(">"))
                p = float(p_text)
            except ValueError:
                raise CostError(f"bad curve step {chunk!r}; expected SECONDS:PROB") from None
            steps.append(CurveStep(t, p, inclusive))
        return cls(tuple(steps))

    def format(self) -> str:
        return ",".join(
            f"{'' if s.inclusive else '>'}{s.threshold_s:g}:{s.probability:g}" for s in self.steps
        )


DEFAULT_CURVE = DetectionCurve(
    (
        CurveStep(0.0, 0.0),
        CurveStep(20.0, 0.50),
        CurveStep(25.0, 0.60),
        CurveStep(30.0, 0.69),
        CurveStep(35.0, 0.77),
        CurveStep(40.0, 0.84),
        CurveStep(40.0, 0.90, inclusive=False),
    )
)


def detection_probability(curve: DetectionCurve, t: float) -> float:
    if t < 0 or math.isnan(t):
        raise CostError(f"inspection time must be >= 0, got {t}")
    p = 0.0
    for step in curve.steps:
        if step.applies(t):
            p = step.probability
    return p


DEFAULT_VP_TIMES: Mapping[int, float] = {1: 4.34, 2: 16.14, 3: 23.74}


@dataclass(frozen=True)
class CostModel:
    speed_m_per_s: float = kmh_to_ms(2.5)
    vp_times_s: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_VP_TIMES))
    turn90_s: float = 10.0
    turn180_s: float = 23.0
    between_rows_s: float = 25.0
    day_budget_s: float = 7200.0
    inspect_seconds: float = 40.0
    detection_mode: DetectionMode = DetectionMode.DETERMINISTIC
    curve: DetectionCurve = DEFAULT_CURVE
    # fixed overhead per sampled plant when moving freely (stop, face the plant, leave)
    approach_s: float = 0.0
    # penalty for inspecting the plant line on the other side of the corridor
    side_switch_s: float = 23.0
    # deduct the 90 degree turn the step guard reserves instead of only checking it
    charge_guard_turn: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.detection_mode, str):
            object.__setattr__(self, "detection_mode", DetectionMode(self.detection_mode))

    def validate(self) -> None:
        if not (self.speed_m_per_s > 0 and math.isfinite(self.speed_m_per_s)):
            raise CostError("speed must be positive")
        for name in ("turn90_s", "turn180_s", "between_rows_s", "day_budget_s",
                     "inspect_seconds", "approach_s", "side_switch_s"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise CostError(f"{name} must be a finite non-negative number, got {value}")
        if not self.vp_times_s:
            raise CostError("at least one viewpoint time is required")
        for vp, t in self.vp_times_s.items():
            if vp < 1 or not (t >= 0 and math.isfinite(t)):
                raise CostError(f"bad viewpoint time {vp}: {t}")
        if self.day_budget_s <= 0:
            raise CostError("day budget must be positive")

    @property
    def speed_kmh(self) -> float:
        return self.speed_m_per_s * 3600.0 / 1000.0

    def vp_time(self, vp: int) -> float:
        try:
            return self.vp_times_s[vp]
        except KeyError:
            raise CostError(f"no timing for {vp} viewpoint(s)") from None

    def with_(self, **changes) -> "CostModel":
        return replace(self, **changes)


class StepKind(str, enum.Enum):
    ADVANCE_AND_INSPECT = "advance_and_inspect"
    PAIR_INSPECT = "pair_inspect"
    END_OF_ROW = "end_of_row"
    DYNAMIC_MOVE = "dynamic_move"


def step_cost(
    cost: CostModel,
    kind: StepKind | str,
    *,
    plant_spacing_m: float = 2.0,
    vp: int = 3,
    next_row: bool = True,
    distance_m: float = 0.0,
) -> float:
    kind = StepKind(kind)
    if kind is StepKind.ADVANCE_AND_INSPECT:
        return plant_spacing_m / cost.speed_m_per_s + cost.vp_time(vp)
    if kind is StepKind.PAIR_INSPECT:
        return plant_spacing_m / cost.speed_m_per_s + 2 * cost.vp_time(vp) + cost.turn180_s
    if kind is StepKind.END_OF_ROW:
        return cost.between_rows_s if next_row else cost.turn180_s
    return distance_m / cost.speed_m_per_s + cost.inspect_seconds + cost.approach_s
