"""Statistical acceptance checks over paired seeds.

Each test prints one PASS/FAIL line (collected again in the terminal summary)
and then asserts the same condition.
"""

import subprocess
import sys
from functools import cache
from pathlib import Path

import numpy as np

from pestscout.experiments import (
    CH4_FIELDS, CH4_POLICIES, Scenario, apply_axis, chapter4_config, preset, run_scenario,
    threshold_median,
)
from pestscout.policies import parse_policy

SEEDS = 30
MASTER = 0
TESTS = Path(__file__).parent


@cache
def ch4(field: str, policies: tuple[str, ...]):
    base = chapter4_config(**CH4_FIELDS[field]).with_(seed=MASTER)
    return run_scenario(Scenario(f"ch4-{field}", base, tuple(parse_policy(p) for p in policies), SEEDS))


@cache
def ch5(name: str, axis: str | None = None, value: float | None = None):
    sc = preset(name, SEEDS, seed=MASTER)
    if axis is not None:
        sc = apply_axis(sc, axis, value)
    return run_scenario(sc)


def med(days) -> float:
    return threshold_median(days)


def test_snake_every_day_one_point_check(verdict):
    agg = ch4("A", ("snake_every",))
    vis = agg.day_metric("snake_every", "visited_pct")[:, 0].mean()
    pcd = agg.day_metric("snake_every", "pcd_ed")[:, 0].mean()
    runs = agg.runs["snake_every"]
    full = all(r.pvv_all == 100.0 and r.md == 0 for r in runs)
    ok = abs(vis - 53) <= 10 and abs(pcd - 51.1) <= 10 and full
    verdict("1 snake_every day-1 point check", ok,
            f"visited {vis:.1f}% (53 +-10), PCD {pcd:.1f}% (51.1 +-10), "
            f"all seeds 100% visited and MD=0: {full}")
    assert ok


def test_scenario_a_threshold_days(verdict):
    pols = ("neighbor_every", "snake_every", "snake_every_n:n=2", "snake_every_n:n=3",
            "snake_every_n:n=4")
    agg = ch4("A", pols)
    nb = med(agg.threshold_days("neighbor_every", 100))
    sn = med(agg.threshold_days("snake_every", 100))
    never = {p: 1 - agg.attainment(p, 100) for p in pols[2:]}
    ok = nb == 2 and sn in (2, 3) and all(v >= 0.8 for v in never.values())
    verdict("2 scenario A D100", ok,
            f"neighbor_every median {nb:g} (=2), snake_every median {sn:g} (2 or 3), "
            + ", ".join(f"{p} unattained {v:.0%}" for p, v in never.items()) + " (>=80%)")
    assert ok


def test_neighbor_beats_snake_on_day_one_coverage(verdict):
    agg = ch4("A", ("snake_every", "neighbor_every"))
    gap = (agg.day_metric("neighbor_every", "visited_pct")[:, 0]
           - agg.day_metric("snake_every", "visited_pct")[:, 0])
    ok = gap.mean() >= 20
    verdict("3 day-1 coverage gap", ok, f"neighbor - snake = {gap.mean():.1f} points (>=20)")
    assert ok


def test_large_field_neighbor_dominance(verdict):
    labels = tuple(p.label for p in CH4_POLICIES)
    agg = ch4("C", labels)
    fast = sorted(p for p in labels if med(agg.threshold_days(p, 100)) <= 3)
    d50 = med(agg.threshold_days("snake_every", 50))
    d80_never = 1 - agg.attainment("snake_every", 80)
    nb = np.array([d or 99 for d in agg.threshold_days("neighbor_every", 100)])
    ok = fast == ["neighbor_every"] and d50 == 3 and d80_never >= 0.8
    verdict("4 scenario C dominance", ok,
            f"policies with median D100<=3: {fast or 'none'} (want only neighbor_every; "
            f"neighbor_every D100<=3 in {np.mean(nb <= 3):.0%} of seeds, final detection "
            f"{agg.final_detection('neighbor_every').mean():.1f}%), "
            f"snake_every D50 median {d50:g} (=3), D80 unattained {d80_never:.0%} (>=80%)")
    assert ok


def test_chapter5_ordering(verdict):
    b = ch5("ch5-B")
    fd, fn, fb = (b.final_detection(p) for p in ("dynamic", "naive", "bouncy"))
    order = np.mean((fd > fn) & (fn > fb))
    c = ch5("ch5-C")
    dn = (c.final_detection("dynamic") - c.final_detection("naive")).mean()
    ok = order >= 0.8 and (fd - fb).mean() >= 20 and dn >= 10
    verdict("5 dynamic > naive > bouncy", ok,
            f"B means {fd.mean():.1f}/{fn.mean():.1f}/{fb.mean():.1f}, ordered in {order:.0%} "
            f"(>=80%), D-B {(fd - fb).mean():.1f} (>=20); C D-N {dn:.1f} (>=10)")
    assert ok


def test_scenario_a_analog_thresholds(verdict):
    a = ch5("ch5-A")
    m = {p: med(a.threshold_days(p, 100)) for p in ("dynamic", "naive", "bouncy")}
    ok = m["dynamic"] == 2 and m["naive"] == 2 and 3 <= m["bouncy"] <= 5
    verdict("6 scenario A analog D100", ok,
            f"dynamic {m['dynamic']:g} (=2), naive {m['naive']:g} (=2), bouncy {m['bouncy']:g} (4 +-1)")
    assert ok


def test_spread_rate_insensitivity(verdict):
    finals = {s: ch5("ch5-6ha", "severity", s).final_detection("dynamic") for s in (0.3, 0.5, 0.8)}
    means = {s: v.mean() for s, v in finals.items()}
    spread = max(means.values()) - min(means.values())
    ok = spread <= 10
    verdict("7 severity insensitivity", ok,
            ", ".join(f"sev {s}: {m:.1f}%" for s, m in means.items()) + f"; range {spread:.1f} (<=10)")
    assert ok


def test_inspection_time_tradeoff(verdict):
    slow = ch5("ch5-6ha", "inspect_seconds", 40.0)
    quick = ch5("ch5-6ha", "inspect_seconds", 20.0)
    day1 = [a.day_metric("dynamic", "cumulative_detection_pct")[:, 0].mean() for a in (slow, quick)]
    final = [a.final_detection("dynamic").mean() for a in (slow, quick)]
    ok = day1[0] - day1[1] >= 8 and abs(final[0] - final[1]) <= 10 and min(final) >= 85
    verdict("8 inspection time", ok,
            f"day-1 {day1[0]:.1f}% at 40 s vs {day1[1]:.1f}% at 20 s (gap >=8); "
            f"final {final[0]:.1f}% vs {final[1]:.1f}% (gap <=10, both >=85)")
    assert ok


def test_flat_detection_curve_robustness(verdict):
    agg = ch5("ch5-6ha", "detection_rate", 0.4)
    final = agg.final_detection("dynamic").mean()
    ok = final >= 70
    verdict("9 flat 40% detection", ok, f"dynamic final detection {final:.1f}% (>=70)")
    assert ok


def test_property_suites(verdict):
    targets = [
        "test_properties.py",
        "test_engine.py::test_denominator_three_day_hand_trace",
        "test_cli.py::test_run_is_byte_identical",
    ]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *targets],
        cwd=TESTS, capture_output=True, text=True,
    )
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    verdict("10 property suites", ok, tail)
    assert ok, proc.stdout[-3000:]
