"""Insect presence per plant: initial seeding, nightly spread and detection bookkeeping."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .field import FieldGrid, PlantIndex


class InfestationError(ValueError):
    """Bad infestation parameters or map file."""


@dataclass(frozen=True)
class SpreadParams:
    initial_probability: float = 0.3
    severity: float = 0.3
    # one draw per neighbour edge instead of one draw gating the whole neighbourhood
    per_edge: bool = False

    def validate(self) -> None:
        for name in ("initial_probability", "severity"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise InfestationError(f"{name} must lie in [0, 1], got {value}")


@dataclass
class InfestationState:
    infested: np.ndarray
    cumulative_total: int = 0
    new_today: int = 0
    detected_total: int = 0
    initial_count: int = field(default=0)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "InfestationState":
        mask = np.asarray(mask, dtype=bool).reshape(-1).copy()
        n = int(mask.sum())
        return cls(mask, cumulative_total=n, initial_count=n)

    @property
    def remaining(self) -> int:
        return int(self.infested.sum())

    def is_infested(self, i: int) -> bool:
        return bool(self.infested[i])

    def copy(self) -> "InfestationState":
        return InfestationState(
            self.infested.copy(),
            self.cumulative_total,
            self.new_today,
            self.detected_total,
            self.initial_count,
        )

    def check_conservation(self) -> bool:
        return self.cumulative_total == self.detected_total + self.remaining


def _row_faces(grid: FieldGrid) -> list[tuple[int, ...]]:
    """Groups of lines seeded together: each facing pair, edge lines alone."""
    return [grid.corridor_lines(c) for c in range(grid.num_corridors)]


def expected_seed_count(grid: FieldGrid, probability: float) -> float:
    """Mean number of infested plants after :func:`seed_random`."""
    per_row = sum(len(lines) for lines in _row_faces(grid))
    return probability * grid.plants_per_row * per_row


def seed_random(grid: FieldGrid, params: SpreadParams, rng: np.random.Generator) -> InfestationState:
    """One draw per (corridor, slot); a hit infests the plant and its facing partner."""
    params.validate()
    rows = _row_faces(grid)
    hits = rng.random((len(rows), grid.plants_per_row)) < params.initial_probability
    mask = np.zeros(grid.shape, dtype=bool)
    for r, lines in enumerate(rows):
        for line in lines:
            mask[line] |= hits[r]
    return InfestationState.from_mask(mask)


def seed_hotspots(
    grid: FieldGrid,
    n_spots: int,
    mean_spot_size: float,
    rng: np.random.Generator,
    edge_bias: float = 0.8,
) -> InfestationState:
    """Clustered infestation: grow ``n_spots`` contiguous patches by random accretion.

    Each patch starts on a boundary plant with probability ``edge_bias`` (pests
    tend to enter from the edges and headland paths), otherwise anywhere. Patch
    sizes are ``1 + Poisson(mean_spot_size - 1)``.
    """
    if n_spots < 0 or mean_spot_size < 1 or not (0.0 <= edge_bias <= 1.0):
        raise InfestationError("need n_spots >= 0, mean_spot_size >= 1, edge_bias in [0, 1]")
    table = grid.neighbor_table
    boundary = np.flatnonzero(grid.boundary_mask)
    mask = np.zeros(grid.total, dtype=bool)
    for _ in range(n_spots):
        if rng.random() < edge_bias:
            center = int(boundary[rng.integers(len(boundary))])
        else:
            center = int(rng.integers(grid.total))
        size = 1 + int(rng.poisson(mean_spot_size - 1))
        patch = [center]
        members = {center}
        attempts = 0
        while len(patch) < size and attempts < 20 * size:
            attempts += 1
            src = patch[rng.integers(len(patch))]
            nb = table[src]
            nb = nb[nb >= 0]
            cand = int(nb[rng.integers(len(nb))])
            if cand not in members:
                members.add(cand)
                patch.append(cand)
        mask[patch] = True
    return InfestationState.from_mask(mask)


def spread_end_of_day(
    state: InfestationState,
    grid: FieldGrid,
    severity: float,
    rng: np.random.Generator,
    per_edge: bool = False,
) -> int:
    """Nightly spread from the plants infested right now; returns the number newly infested.

    Only plants infested before the step can act as sources, so a plant infested
    tonight waits until tomorrow night to spread.
    """
    snapshot = state.infested.copy()
    table = grid.neighbor_table
    present = table >= 0
    if per_edge:
        fire = snapshot[:, None] & present & (rng.random(table.shape) < severity)
    else:
        sources = snapshot & (rng.random(grid.total) < severity)
        fire = sources[:, None] & present
    targets = np.zeros(grid.total, dtype=bool)
    targets[table[fire]] = True
    new = targets & ~snapshot
    count = int(new.sum())
    state.infested |= new
    state.new_today = count
    state.cumulative_total += count
    return count


def destroy(state: InfestationState, i: int | PlantIndex, grid: FieldGrid | None = None) -> None:
    if isinstance(i, tuple):
        if grid is None:
            raise TypeError("a grid is needed to destroy by (line, slot)")
        i = grid.to_linear(i)
    if not state.infested[i]:
        raise InfestationError(f"plant {i} is not infested; nothing to destroy")
    state.infested[i] = False
    state.detected_total += 1


def load_map(path: str | os.PathLike) -> np.ndarray:
    rows = []
    with open(path, encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            cells = [c.strip() for c in text.split(",")]
            bad = [c for c in cells if c not in ("0", "1")]
            if bad:
                raise InfestationError(f"{path}:{lineno}: cell values must be 0 or 1, got {bad[0]!r}")
            rows.append([c == "1" for c in cells])
    if not rows:
        raise InfestationError(f"{path}: empty map")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InfestationError(f"{path}: ragged map, row widths {sorted(widths)}")
    return np.array(rows, dtype=bool)


def seed_from_map(grid: FieldGrid, path: str | os.PathLike) -> InfestationState:
    mask = load_map(path)
    if mask.shape != grid.shape:
        raise InfestationError(
            f"{path}: map is {mask.shape[0]}x{mask.shape[1]} but the field is "
            f"{grid.shape[0]}x{grid.shape[1]} (lines x plants)"
        )
    return InfestationState.from_mask(mask)


def format_map(grid: FieldGrid, mask: np.ndarray) -> str:
    m = np.asarray(mask, dtype=bool).reshape(grid.shape)
    return "".join(",".join("1" if v else "0" for v in row) + "\n" for row in m)


def export_map(grid: FieldGrid, state: InfestationState, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_map(grid, state.infested))
