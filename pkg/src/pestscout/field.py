"""Field geometry: plant indexing, spread adjacency and row-constrained travel.

Plants live on *plant lines*. A field of ``R`` planting rows exposes
``2R - 2`` lines: the two edge rows show one face each, interior rows show
two. Interior lines pair up as ``(2c - 1, 2c)``: the two lines facing each
other across corridor ``c``, which the robot drives along and pests cross
overnight. The edge lines 0 and ``L - 1`` have no partner and get a corridor of
their own (0 and ``L / 2``). The linear index walks one line slot by slot,
then moves on to the next line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

SQM_PER_DUNAM = 1000.0


class FieldError(ValueError):
    """Invalid field geometry."""


class PlantIndex(NamedTuple):
    line: int
    slot: int


@dataclass(frozen=True)
class FieldSpec:
    row_length_m: float = 100.0
    row_width_m: float = 3.5
    plant_spacing_m: float = 2.0
    area_dunam: float = 2.0
    plant_count: int | None = None
    # distance charged per corridor crossed on the headland; None -> row width
    corridor_crossing_m: float | None = None

    def validate(self) -> None:
        for name in ("row_length_m", "row_width_m", "plant_spacing_m", "area_dunam"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise FieldError(f"{name} must be a positive number, got {value!r}")
        if self.plant_count is not None and self.plant_count < 2:
            raise FieldError(f"plant_count must be >= 2, got {self.plant_count}")
        if self.corridor_crossing_m is not None and self.corridor_crossing_m < 0:
            raise FieldError("corridor_crossing_m must be >= 0")


def layout_for_count(count: int) -> tuple[int, int]:
    """Squarest (lines, slots) with an even number of lines covering ``count`` plants.

    Among layouts whose product is the smallest achievable value >= count,
    the one with the smallest |lines - slots| wins; ties go to fewer lines.
    """
    if count < 2:
        raise FieldError(f"plant count must be >= 2, got {count}")
    best: tuple[int, int, int] | None = None
    best_key = None
    for lines in range(2, count + 2, 2):
        slots = -(-count // lines)
        key = (lines * slots, abs(lines - slots), lines)
        if best_key is None or key < best_key:
            best_key, best = key, (lines, slots, lines * slots)
        if lines > slots and lines * 1 >= count:
            break
    assert best is not None
    return best[0], best[1]


@dataclass(frozen=True)
class FieldGrid:
    spec: FieldSpec
    plants_per_row: int
    num_planting_rows: int
    num_plant_lines: int

    @property
    def total(self) -> int:
        return self.num_plant_lines * self.plants_per_row

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_plant_lines, self.plants_per_row)

    @property
    def crossing_m(self) -> float:
        c = self.spec.corridor_crossing_m
        return self.spec.row_width_m if c is None else c

    def __contains__(self, p: object) -> bool:
        if isinstance(p, tuple) and len(p) == 2:
            return 0 <= p[0] < self.num_plant_lines and 0 <= p[1] < self.plants_per_row
        if isinstance(p, (int, np.integer)):
            return 0 <= p < self.total
        return False

    def to_linear(self, p: PlantIndex | tuple[int, int]) -> int:
        line, slot = p
        if not (0 <= line < self.num_plant_lines and 0 <= slot < self.plants_per_row):
            raise IndexError(f"plant {tuple(p)} outside {self.shape} grid")
        return line * self.plants_per_row + slot

    def from_linear(self, i: int) -> PlantIndex:
        if not 0 <= i < self.total:
            raise IndexError(f"linear index {i} outside grid of {self.total}")
        line, slot = divmod(int(i), self.plants_per_row)
        return PlantIndex(line, slot)

    def partner_line(self, line: int) -> int | None:
        """Line facing ``line`` across its corridor; edge lines have none."""
        if line % 2 == 1 and line + 1 < self.num_plant_lines:
            return line + 1
        if line % 2 == 0 and line > 0:
            return line - 1
        return None

    @staticmethod
    def corridor(line: int) -> int:
        return (line + 1) // 2

    @property
    def num_corridors(self) -> int:
        return self.num_plant_lines // 2 + 1

    def corridor_lines(self, c: int) -> tuple[int, ...]:
        """Lines flanking corridor ``c``: one for the edge corridors, two otherwise."""
        lines = tuple(l for l in (2 * c - 1, 2 * c) if 0 <= l < self.num_plant_lines)
        if not lines or c < 0:
            raise IndexError(f"corridor {c} outside field of {self.num_corridors}")
        return lines

    def adjacency(self, p: PlantIndex | tuple[int, int]) -> set[PlantIndex]:
        line, slot = p
        out: set[PlantIndex] = set()
        if slot > 0:
            out.add(PlantIndex(line, slot - 1))
        if slot + 1 < self.plants_per_row:
            out.add(PlantIndex(line, slot + 1))
        partner = self.partner_line(line)
        if partner is not None:
            out.add(PlantIndex(partner, slot))
        return out

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """(total, 3) array of linear neighbour indices, -1 where absent.

        Columns: previous slot, next slot, partner line.
        """
        L, P = self.shape
        table = np.full((L, P, 3), -1, dtype=np.int64)
        idx = np.arange(L * P).reshape(L, P)
        table[:, 1:, 0] = idx[:, :-1]
        table[:, :-1, 1] = idx[:, 1:]
        for line in range(L):
            partner = self.partner_line(line)
            if partner is not None:
                table[line, :, 2] = idx[partner]
        return table.reshape(L * P, 3)

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in self.neighbor_table[i] if j >= 0]

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Edge lines plus the row-end plants that face the headland paths."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask.reshape(-1)

    @cached_property
    def _coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        i = np.arange(self.total)
        line, slot = np.divmod(i, self.plants_per_row)
        return line, slot, (line + 1) // 2, line % 2

    def distance_m(self, a: int, b: int) -> float:
        P = self.plants_per_row
        la, sa = divmod(int(a), P)
        lb, sb = divmod(int(b), P)
        ca, cb = (la + 1) // 2, (lb + 1) // 2
        if ca == cb:
            slots = abs(sa - sb)
            corridors = 0
        else:
            slots = min(sa + sb, 2 * (P - 1) - sa - sb)
            corridors = abs(ca - cb)
        return slots * self.spec.plant_spacing_m + corridors * self.crossing_m

    def distances_from(self, a: int, to: np.ndarray | None = None) -> np.ndarray:
        """Distances from ``a`` to every plant, or only to the linear indices ``to``."""
        P = self.plants_per_row
        la, sa = divmod(int(a), P)
        ca = (la + 1) // 2
        if to is None:
            _, slot, corr, _ = self._coords
        else:
            line, slot = np.divmod(to, P)
            corr = (line + 1) // 2
        same = corr == ca
        around = np.minimum(sa + slot, 2 * (P - 1) - sa - slot)
        slots = np.where(same, np.abs(slot - sa), around)
        corridors = np.abs(corr - ca)
        return slots * self.spec.plant_spacing_m + corridors * self.crossing_m

    def travel_time(self, cost, a: int, b: int) -> float:
        """Seconds to drive from plant ``a`` to plant ``b``.

        Includes ``cost.side_switch_s`` when the target sits on the other side
        of the robot, which keeps facing plants at a non-zero distance.
        """
        if a == b:
            return 0.0
        t = self.distance_m(a, b) / cost.speed_m_per_s
        if (int(a) // self.plants_per_row) % 2 != (int(b) // self.plants_per_row) % 2:
            t += cost.side_switch_s
        return t

    def travel_times_from(self, cost, a: int, to: np.ndarray | None = None) -> np.ndarray:
        t = self.distances_from(a, to) / cost.speed_m_per_s
        side = self._coords[3] if to is None else (to // self.plants_per_row) % 2
        a_side = (int(a) // self.plants_per_row) % 2
        return t + np.where(side != a_side, cost.side_switch_s, 0.0)


def build_grid(spec: FieldSpec) -> FieldGrid:
    spec.validate()
    if spec.plant_count is not None:
        lines, slots = layout_for_count(spec.plant_count)
        return FieldGrid(spec, slots, lines // 2 + 1, lines)
    plants_per_row = math.floor(spec.row_length_m / spec.plant_spacing_m + 1e-9)
    if plants_per_row < 1:
        raise FieldError("row shorter than one plant spacing")
    rows = round(spec.area_dunam * SQM_PER_DUNAM / (spec.row_length_m * spec.row_width_m))
    if rows < 2:
        raise FieldError(
            f"area {spec.area_dunam} dunam gives {rows} planting row(s); need at least 2"
        )
    return FieldGrid(spec, plants_per_row, rows, 2 * rows - 2)


def adjacency(grid: FieldGrid, p: PlantIndex | tuple[int, int]) -> set[PlantIndex]:
    return grid.adjacency(p)


def travel_time(grid: FieldGrid, cost, a: PlantIndex | int, b: PlantIndex | int) -> float:
    if isinstance(a, tuple):
        a = grid.to_linear(a)
    if isinstance(b, tuple):
        b = grid.to_linear(b)
    return grid.travel_time(cost, a, b)
