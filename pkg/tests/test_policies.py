import numpy as np
import pytest

from pestscout.cost_model import CostModel
from pestscout.field import FieldSpec, build_grid
from pestscout.policies import (
    POLICIES, ActionKind, Bouncy, Dynamic, EngineView, NeighborEvery, PolicyError, PolicySpec,
    RandomFraction, SnakeEvery, SnakeEveryN, expected_pass_size, parse_policy, serpentine_order,
)

BIG = 1e12


def drive_day(policy, grid, cost, day=1, budget=BIG, fixed=True, visited=None):
    """Run one day against a bare view; returns the inspect actions and total cost."""
    visited = np.zeros(grid.total, dtype=bool) if visited is None else visited
    view = EngineView(grid, cost, day, budget, visited, fixed)
    policy.on_day_start(day, view)
    actions = []
    spent = 0.0
    for _ in range(10 * grid.total + 10):
        view.time_left = budget - spent
        a = policy.next_action(view)
        if a.kind is ActionKind.DAY_DONE:
            break
        spent += a.cost_s
        actions.append(a)
        if a.kind is ActionKind.INSPECT:
            fresh = [t for t in a.targets if not visited[t]]
            visited[list(a.targets)] = True
            if not fresh:
                break
        if visited.all():
            break
    return actions, spent


def tiny(count=6):
    return build_grid(FieldSpec(plant_count=count))


def test_snake_every_two_by_three_order():
    g = tiny(6)
    p = SnakeEvery()
    p.reset(g, CostModel(), np.random.default_rng(0))
    actions, _ = drive_day(p, g, CostModel())
    kinds = [(a.kind, a.targets) for a in actions][:7]
    assert kinds == [
        (ActionKind.INSPECT, (0,)), (ActionKind.INSPECT, (1,)), (ActionKind.INSPECT, (2,)),
        (ActionKind.MOVE, ()), (ActionKind.INSPECT, (3,)), (ActionKind.INSPECT, (4,)),
        (ActionKind.INSPECT, (5,)),
    ]
    assert actions[3].cost_s == 25.0
    assert actions[0].cost_s == pytest.approx(2.0 / CostModel().speed_m_per_s + 23.74)


def test_snake_resumes_next_day():
    g = build_grid(FieldSpec())
    cost = CostModel()
    p = SnakeEvery()
    p.reset(g, cost, np.random.default_rng(0))
    day1, _ = drive_day(p, g, cost, budget=1000.0)
    last = [a for a in day1 if a.kind is ActionKind.INSPECT][-1].targets[0]
    day2, _ = drive_day(p, g, cost, day=2, budget=1000.0)
    first = [a for a in day2 if a.kind is ActionKind.INSPECT][0].targets[0]
    assert first == last + 1


def test_snake_guard_reserves_turn_on_fresh_start():
    g = tiny(6)
    cost = CostModel()
    step = 2.0 / cost.speed_m_per_s + 23.74
    p = SnakeEvery()
    p.reset(g, cost, np.random.default_rng(0))
    # enough for the step but not for the step plus the reserved 90 degree turn
    actions, _ = drive_day(p, g, cost, budget=step + 5.0)
    assert actions == []
    p.reset(g, cost, np.random.default_rng(0))
    actions, _ = drive_day(p, g, cost, budget=step + 10.5)
    assert len(actions) == 1


def test_neighbor_covers_edge_line_then_pairs():
    g = build_grid(FieldSpec(area_dunam=1.05))  # 3 planting rows, 4 lines
    assert g.num_plant_lines == 4
    cost = CostModel()
    p = NeighborEvery()
    p.reset(g, cost, np.random.default_rng(0))
    actions, _ = drive_day(p, g, cost)
    P = g.plants_per_row
    # the edge line alone, one plant per stop and no turn
    assert actions[0].targets == (0,)
    assert actions[0].cost_s == pytest.approx(2.88 + 4.34, abs=0.01)
    move = next(i for i, a in enumerate(actions) if a.kind is ActionKind.MOVE)
    assert move == P
    # then lines 1 and 2 face each other across the next corridor
    assert actions[move + 1].targets == (P, 2 * P)
    assert actions[move + 1].cost_s == pytest.approx(34.56, abs=0.01)
    move2 = next(i for i, a in enumerate(actions) if i > move and a.kind is ActionKind.MOVE)
    assert move2 == move + 1 + P and actions[move2 + 1].targets == (3 * P,)


@pytest.mark.parametrize("name", ["snake_every", "neighbor_every"])
def test_full_coverage_with_unlimited_budget(name):
    g = build_grid(FieldSpec())
    cost = CostModel()
    p = PolicySpec(name).build()
    p.reset(g, cost, np.random.default_rng(0))
    visited = np.zeros(g.total, dtype=bool)
    drive_day(p, g, cost, visited=visited)
    assert visited.all()


def test_every_n_reverses_at_least_visited_high_index():
    g = tiny(6)
    cost = CostModel()
    p = SnakeEveryN(n=2)
    p.reset(g, cost, np.random.default_rng(0))
    view = EngineView(g, cost, 1, BIG, np.zeros(g.total, dtype=bool))
    p.on_day_start(1, view)
    seq = []
    for _ in range(12):
        a = p.next_action(view)
        if a.kind is ActionKind.INSPECT:
            seq.extend(a.targets)
    # forward 0, 2, 4; restart from the least visited of {4, 5} -> 5; back 5, 3, 1;
    # least visited of {0, 1} ties at one visit and goes to the higher index
    assert seq[:7] == [0, 2, 4, 5, 3, 1, 1]


def test_random_fraction_daily_sample():
    g = build_grid(FieldSpec())
    cost = CostModel()
    p = RandomFraction(n=4)
    p.reset(g, cost, np.random.default_rng(1))
    day1, _ = drive_day(p, g, cost)
    day2, _ = drive_day(p, g, cost, day=2)
    s1 = [a.targets[0] for a in day1]
    s2 = [a.targets[0] for a in day2]
    assert len(s1) == len(set(s1)) == -(-g.total // 4)
    assert s1 != s2


def test_random_fraction_rejects_n_one():
    with pytest.raises(PolicyError):
        RandomFraction(n=1)


def test_serpentine_order():
    g = tiny(6)
    assert list(serpentine_order(g)) == [0, 1, 2, 5, 4, 3]


@pytest.mark.parametrize("count", [6, 50, 784, 785])
def test_bouncy_pass_size(count):
    g = tiny(count)
    cost = CostModel()
    p = Bouncy(n=2, passes_per_day=1)
    p.reset(g, cost, np.random.default_rng(0))
    actions, _ = drive_day(p, g, cost, fixed=False)
    plants = [a.targets[0] for a in actions]
    assert len(set(plants)) == len(plants) == expected_pass_size(g.total, 2)
    # the next day sweeps back over the plants skipped on the way out
    more, _ = drive_day(p, g, cost, day=2, fixed=False)
    assert set(plants) | {a.targets[0] for a in more} == set(range(g.total))


def test_naive_resumes_where_it_stopped():
    g = tiny(50)
    cost = CostModel()
    p = PolicySpec("naive").build()
    p.reset(g, cost, np.random.default_rng(0))
    order = list(serpentine_order(g))
    day1, _ = drive_day(p, g, cost, budget=400.0, fixed=False)
    day2, _ = drive_day(p, g, cost, day=2, budget=400.0, fixed=False)
    seq = [a.targets[0] for a in day1 + day2]
    assert seq == order[:len(seq)]


def test_dynamic_first_pop_is_nearest_boundary_plant():
    g = build_grid(FieldSpec(area_dunam=1.4, row_length_m=40))
    cost = CostModel(inspect_seconds=40.0)
    seen = []
    p = Dynamic(pop_observer=lambda j, cand, times: seen.append((j, cand.copy())))
    p.reset(g, cost, np.random.default_rng(0), fixed_costs=False)
    drive_day(p, g, cost, budget=200.0, fixed=False)
    j, cand = seen[0]
    boundary = np.flatnonzero(g.boundary_mask)
    brute = min(boundary, key=lambda b: (g.travel_time(cost, 0, b), b))
    assert j == brute == 0
    assert set(cand) == set(boundary)


def test_dynamic_detection_pushes_unvisited_neighbors():
    g = build_grid(FieldSpec())
    cost = CostModel()
    p = Dynamic(suspicious="none")
    p.reset(g, cost, np.random.default_rng(0), fixed_costs=False)
    plant = g.to_linear((3, 10))
    assert not p.open.any()
    p.on_detection(plant)
    assert set(np.flatnonzero(p.open)) == set(g.neighbors(plant))
    assert not (p.open & p.close).any()


def test_dynamic_detection_with_closed_neighbors_is_noop():
    g = build_grid(FieldSpec())
    p = Dynamic(suspicious="none")
    p.reset(g, CostModel(), np.random.default_rng(0), fixed_costs=False)
    plant = g.to_linear((3, 10))
    p.close[g.neighbors(plant)] = True
    p.on_detection(plant)
    assert not p.open.any()


def test_dynamic_close_list_resets_daily():
    g = tiny(50)
    cost = CostModel()
    p = Dynamic()
    p.reset(g, cost, np.random.default_rng(0), fixed_costs=False)
    drive_day(p, g, cost, budget=500.0, fixed=False)
    assert p.close.any()
    drive_day(p, g, cost, day=2, budget=0.0, fixed=False)
    assert not p.close.any()


def test_dynamic_refill_order():
    g = tiny(50)
    p = Dynamic()
    p.reset(g, CostModel(), np.random.default_rng(0), fixed_costs=False)
    p.open[:] = False
    assert p.refill()
    assert (p.open == g.boundary_mask).all()
    p.last_visit[g.boundary_mask] = 1
    p.open[:] = False
    p.refill()
    assert (p.open == ~g.boundary_mask).all()
    p.last_visit[:] = 3
    p.last_visit[7] = 2
    p.open[:] = False
    p.refill()
    assert list(np.flatnonzero(p.open)) == [7]


def test_parse_policy():
    spec = parse_policy("snake_every_n:n=3")
    assert spec == PolicySpec("snake_every_n", {"n": 3})
    assert spec.label == "snake_every_n:n=3"
    assert parse_policy(spec.label) == spec
    assert parse_policy("bouncy:n=3,passes_per_day=0").build().passes_per_day is None


@pytest.mark.parametrize("text", ["nope", "snake_every_n:n=0", "snake_every_n:n=x",
                                  "snake_online_random:max_skip=0", "dynamic:suspicious=all",
                                  "naive:n=2", "snake_every:n"])
def test_parse_policy_errors(text):
    with pytest.raises(PolicyError):
        parse_policy(text)


def test_all_policies_build_with_defaults():
    for name in POLICIES:
        p = PolicySpec(name).build()
        assert p.name == name
        assert PolicySpec(name, p.params()).build().params() == p.params()
