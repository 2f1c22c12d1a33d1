import math

import numpy as np
import pytest

from pestscout.cost_model import CostModel
from pestscout.field import (
    FieldError, FieldSpec, PlantIndex, adjacency, build_grid, layout_for_count, travel_time,
)


def test_default_grid_counts():
    g = build_grid(FieldSpec(row_length_m=100, row_width_m=3.5, plant_spacing_m=2, area_dunam=2))
    # 2000 m2 / 350 m2 per row = 5.71 -> 6 planting rows, 2 * 6 - 2 lines
    assert (g.plants_per_row, g.num_planting_rows, g.num_plant_lines, g.total) == (50, 6, 10, 500)


def test_minimal_field():
    g = build_grid(FieldSpec(row_length_m=10, row_width_m=5, plant_spacing_m=10, area_dunam=0.1))
    assert (g.plants_per_row, g.num_planting_rows, g.num_plant_lines) == (1, 2, 2)


def test_area_scales_lines():
    small = build_grid(FieldSpec(area_dunam=2))
    big = build_grid(FieldSpec(area_dunam=8))
    assert big.plants_per_row == small.plants_per_row
    assert big.num_planting_rows == 23  # 8000 / 350 = 22.9
    assert big.total > 4 * small.total * 0.9


@pytest.mark.parametrize("bad", [
    dict(row_length_m=0), dict(row_width_m=-1), dict(plant_spacing_m=math.nan), dict(area_dunam=0),
])
def test_rejects_non_positive(bad):
    with pytest.raises(FieldError):
        build_grid(FieldSpec(**bad))


def test_rejects_single_row():
    with pytest.raises(FieldError):
        build_grid(FieldSpec(area_dunam=0.4))


@pytest.mark.parametrize("count, expected", [(784, (28, 28)), (4096, (64, 64)), (8281, (82, 101)),
                                             (2, (2, 1)), (6, (2, 3))])
def test_layout_for_count(count, expected):
    lines, slots = layout_for_count(count)
    assert (lines, slots) == expected
    assert lines % 2 == 0 and lines * slots >= count


def test_plant_count_override():
    g = build_grid(FieldSpec(plant_count=784))
    assert g.shape == (28, 28) and g.num_planting_rows == 15


def test_index_round_trip():
    g = build_grid(FieldSpec(area_dunam=2))
    for i in range(g.total):
        assert g.to_linear(g.from_linear(i)) == i
    assert g.from_linear(51) == PlantIndex(1, 1)


def test_adjacency_examples():
    g = build_grid(FieldSpec())
    last_line = g.num_plant_lines - 1
    last_slot = g.plants_per_row - 1
    assert adjacency(g, (0, 0)) == {(0, 1)}
    assert adjacency(g, (1, 7)) == {(1, 6), (1, 8), (2, 7)}
    assert adjacency(g, (2, 7)) == {(2, 6), (2, 8), (1, 7)}
    assert adjacency(g, (last_line, last_slot)) == {(last_line, last_slot - 1)}


def test_neighbor_table_matches_adjacency():
    g = build_grid(FieldSpec())
    for i in range(g.total):
        expected = {g.to_linear(q) for q in g.adjacency(g.from_linear(i))}
        assert set(g.neighbors(i)) == expected


def test_boundary_mask():
    g = build_grid(FieldSpec())
    m = g.boundary_mask.reshape(g.shape)
    assert m[0].all() and m[-1].all() and m[:, 0].all() and m[:, -1].all()
    assert not m[1:-1, 1:-1].any()


def test_travel_time_examples():
    g = build_grid(FieldSpec())
    cost = CostModel()
    assert travel_time(g, cost, (3, 4), (3, 4)) == 0.0
    assert travel_time(g, cost, (3, 4), (3, 5)) == pytest.approx(2.88)
    # facing plant across the corridor: no distance, only the side switch
    assert travel_time(g, cost, (1, 4), (2, 4)) == pytest.approx(cost.side_switch_s)
    # the line behind (2, 4) lies in the next corridor: out the low end and back
    assert travel_time(g, cost, (2, 4), (3, 4)) == pytest.approx(
        (8 * 2.0 + 3.5) / cost.speed_m_per_s + cost.side_switch_s)


def test_corridors_pair_facing_lines():
    g = build_grid(FieldSpec())
    assert g.num_plant_lines == 10 and g.num_corridors == 6
    assert [g.corridor_lines(c) for c in range(6)] == [
        (0,), (1, 2), (3, 4), (5, 6), (7, 8), (9,)]
    for line in range(10):
        partner = g.partner_line(line)
        assert g.corridor(line) == (g.corridor(partner) if partner is not None else g.corridor(line))
    with pytest.raises(IndexError):
        g.corridor_lines(6)


def test_travel_across_corridors_uses_nearest_row_end():
    g = build_grid(FieldSpec())
    cost = CostModel(side_switch_s=0.0)
    P = g.plants_per_row
    # slots 1 and 2 in corridors 0 and 1: out the low end (1 + 2 slots) plus one crossing
    d = g.distance_m(g.to_linear((0, 1)), g.to_linear((2, 2)))
    assert d == pytest.approx(3 * 2.0 + 3.5)
    d = g.distance_m(g.to_linear((0, P - 2)), g.to_linear((4, P - 1)))
    assert d == pytest.approx(1 * 2.0 + 2 * 3.5)
    assert travel_time(g, cost, 0, g.to_linear((2, 0))) == pytest.approx(3.5 / cost.speed_m_per_s)


def test_travel_symmetric_random_pairs():
    g = build_grid(FieldSpec())
    cost = CostModel()
    rng = np.random.default_rng(3)
    for a, b in rng.integers(g.total, size=(100, 2)):
        assert g.travel_time(cost, a, b) == g.travel_time(cost, b, a)


def test_vectorized_travel_matches_scalar():
    g = build_grid(FieldSpec(area_dunam=1.2, row_length_m=30))
    cost = CostModel()
    for a in range(0, g.total, 7):
        full = g.travel_times_from(cost, a)
        sub = np.arange(0, g.total, 3)
        part = g.travel_times_from(cost, a, sub)
        for b in range(g.total):
            assert full[b] == pytest.approx(g.travel_time(cost, a, b) if a != b else 0.0)
        assert np.allclose(part, full[sub])
