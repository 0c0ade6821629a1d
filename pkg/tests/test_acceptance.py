"""Acceptance criteria, each checked at its stated tolerance.

Every test prints a single ``CRITERION n: PASS|FAIL`` line (collected again in
the terminal summary) and then asserts the same verdict.
"""

import itertools
import json
import math
import statistics
import time

import numpy as np
import pytest

from helpers import (
    CELL_FRAME,
    FRAME,
    dense_jousselme,
    merged_pair,
    polygon_to_word,
    powerset_conjunctive,
    random_bba,
    random_rect,
    random_word_masses,
    subset_oracle,
    winding_grid,
    word_bba,
    word_to_polygon,
)
from polybel import cli
from polybel.decision import betp_argmax, build_graph, maximal_intersections, simplify_graph
from polybel.evidence import BBA, BinaryWord, conjunctive_combine, discount, disjunctive_combine, plausibility
from polybel.geometry import GeometryError, canonicalize, regular_polygon_disk, snap
from polybel.simplify import greedy_step, simplify_bba
from polybel.tracking import Camera, Scenario, Target, TrackerConfig, default_scenario, generate_detections, run_scenario

OPTIONS = list(itertools.product([False, True], repeat=3))


def decision_corpus():
    """The 200 random BBAs of criterion 1 (rectangles and 64-gon disks, <= 8 elements)."""
    rng = np.random.default_rng(0)
    return [random_bba(rng, max_n=8) for _ in range(200)]


def raster_density(bba: BBA) -> np.ndarray:
    """BetP density at every unit-cell center of the 1000x1000 frame, from the float winding oracle."""
    density = np.zeros((1000, 1000))
    for fe, m in bba.items():
        x0, y0, x1, y1 = fe.bbox
        inside = winding_grid(fe.rings, x0, y0, x1, y1) != 0
        density[y0:y1, x0:x1] += inside * (m / fe.area)
    return density


def families(bba: BBA, simplify: bool, root: bool, early: bool):
    g = build_graph(bba)
    if simplify:
        g = simplify_graph(g)
    found, visits = maximal_intersections(g, root_suppression=root, early_stopping=early)
    return {m.members for m in found}, visits


# ------------------------------------------------------------------ 1
def test_criterion_1_decision_oracle(criterion):
    t0 = time.perf_counter()
    corpus = decision_corpus()
    family_bad, raster_bad = [], []
    for k, bba in enumerate(corpus):
        g = build_graph(bba)
        found, _ = maximal_intersections(simplify_graph(g))
        if {m.members for m in found} != subset_oracle(g.nodes):
            family_bad.append(k)
        d = betp_argmax(bba)
        density = raster_density(bba)
        rows, cols = np.nonzero(density == density.max())
        if not any(d.region.locate((c + 0.5, r + 0.5)) >= 0 for r, c in zip(rows, cols)):
            raster_bad.append(k)
    elapsed = time.perf_counter() - t0
    ok = not family_bad and not raster_bad and elapsed < 60
    criterion(
        1,
        ok,
        f"family mismatches {len(family_bad)}/200 {family_bad}, raster-argmax cell outside region "
        f"{len(raster_bad)}/200 {raster_bad}, runtime {elapsed:.1f}s (< 60s)",
    )
    assert ok


# ------------------------------------------------------------------ 2
def test_criterion_2_optimizations(criterion):
    chains = [(k, cli.nested_chain(k)) for k in range(2, 13)]
    rng = np.random.default_rng(7)
    clustered = [cli.clustered_overlaps(rng) for _ in range(50)]
    corpus = decision_corpus() + [b for _, b in chains] + clustered
    changed, increased = 0, 0
    for bba in corpus:
        reference, naive = families(bba, False, False, False)
        for opts in OPTIONS:
            family, visits = families(bba, *opts)
            changed += family != reference
            increased += visits > naive
    chain_visits = {k: families(b, True, True, True)[1] for k, b in chains}
    chain_ok = all(v == k for k, v in chain_visits.items())
    ratios = [families(b, False, False, False)[1] / families(b, True, True, True)[1] for b in clustered]
    median = statistics.median(ratios)
    ok = changed == 0 and increased == 0 and chain_ok and median >= 2.0
    criterion(
        2,
        ok,
        f"result changes {changed}, visit increases {increased} over {len(corpus)} instances x 8 subsets; "
        f"chain visits {chain_visits}; clustered median reduction {median:.2f}x (>= 2x)",
    )
    assert ok


# ------------------------------------------------------------------ 3
def test_criterion_3_combination(criterion):
    rng = np.random.default_rng(3)
    worst_1d = 0.0
    for _ in range(1000):
        d1 = random_word_masses(rng, n=int(rng.integers(1, 7)), conflict=bool(rng.uniform() < 0.3))
        d2 = random_word_masses(rng, n=int(rng.integers(1, 7)))
        expected = powerset_conjunctive(d1, d2)
        out = conjunctive_combine(word_bba(d1), word_bba(d2))
        worst_1d = max(worst_1d, abs(out.conflict - expected.get(0, 0.0)))
        for w, m in expected.items():
            if w:
                worst_1d = max(worst_1d, abs(out.mass(BinaryWord(w, 6)) - m))
        worst_1d = max(worst_1d, abs(len(out) - sum(1 for w in expected if w)))

    worst_cross = 0.0
    for _ in range(200):
        d1, d2 = random_word_masses(rng), random_word_masses(rng)
        for rule in (conjunctive_combine, disjunctive_combine):
            one = rule(word_bba(d1), word_bba(d2))
            p1, p2 = BBA(CELL_FRAME), BBA(CELL_FRAME)
            for w, m in d1.items():
                p1.add_mass(word_to_polygon(w), m)
            for w, m in d2.items():
                p2.add_mass(word_to_polygon(w), m)
            two = rule(p1, p2)
            worst_cross = max(worst_cross, abs(one.conflict - two.conflict), abs(len(one) - len(two)))
            for fe, m in two.items():
                worst_cross = max(worst_cross, abs(one.mass(BinaryWord(polygon_to_word(fe), 6)) - m))

    worst_sum = 0.0
    m1 = word_bba(random_word_masses(rng))
    m2 = BBA(CELL_FRAME).add_mass(word_to_polygon(0b111111), 1.0)
    for k in range(1000):
        dw = random_word_masses(rng, n=2)
        other1 = word_bba(dw)
        other2 = BBA(CELL_FRAME)
        for w, m in dw.items():
            other2.add_mass(word_to_polygon(w), m)
        op = k % 4
        if op == 0:
            m1, m2 = conjunctive_combine(m1, other1), conjunctive_combine(m2, other2)
        elif op == 1:
            m1, m2 = disjunctive_combine(m1, other1), disjunctive_combine(m2, other2)
        elif op == 2:
            alpha = float(rng.uniform(0, 0.3))
            m1, m2 = discount(m1, alpha), discount(m2, alpha)
        else:
            m1, m2 = m1.finalize(), m2.finalize()
        worst_sum = max(worst_sum, abs(m1.total() - 1.0), abs(m2.total() - 1.0))

    ok = worst_1d <= 1e-9 and worst_cross <= 1e-9 and worst_sum <= 1e-9
    criterion(
        3,
        ok,
        f"1D power-set max error {worst_1d:.2e}, cross-variant max error {worst_cross:.2e}, "
        f"unit-sum drift after 10^3 operations {worst_sum:.2e} (all <= 1e-9)",
    )
    assert ok


# ------------------------------------------------------------------ 4
def _random_polygon(rng):
    """Raw rings of a star-shaped polygon, sometimes with an extra rectangle that may overlap it."""
    n = int(rng.integers(3, 12))
    cx, cy = (int(v) for v in rng.integers(300, 700, 2))
    angles = np.sort(rng.uniform(0, 2 * math.pi, n))
    radii = rng.uniform(20, 250, n)
    rings = [[(cx + snap(r * math.cos(a)), cy + snap(r * math.sin(a))) for a, r in zip(angles, radii)]]
    if rng.uniform() < 0.3:
        x0, y0 = (int(v) for v in rng.integers(0, 250, 2))
        rings.append([(x0, y0), (x0 + 40, y0), (x0 + 40, y0 + 30), (x0, y0 + 30)])
    return rings


def _perimeter(p):
    return sum(math.dist(a, b) for ring in p.rings for a, b in zip(ring, ring[1:] + ring[:1]))


def test_criterion_4_geometry(criterion):
    rng = np.random.default_rng(4)
    ie_bad = 0
    for _ in range(5000):
        a, b = random_rect(rng, lo=1), random_rect(rng, lo=1)
        if a.unite(b).area + a.intersect(b).area != a.area + b.area:
            ie_bad += 1

    raster_bad, raster_n = 0, 0
    while raster_n < 300:
        try:
            p = canonicalize(_random_polygon(rng))
        except GeometryError:
            continue
        if rng.uniform() < 0.5:
            p = p.unite(regular_polygon_disk(tuple(int(v) for v in rng.integers(200, 800, 2)), 120, 64))
        x0, y0, x1, y1 = p.bbox
        cells = int(np.count_nonzero(winding_grid(p.rings, x0, y0, x1, y1)))
        raster_bad += abs(cells - p.area / 2) > 2 * _perimeter(p)
        raster_n += 1

    t0 = time.perf_counter()
    variant_bad, n_poly = 0, 0
    by_digest: dict[int, set] = {}
    bba = BBA(FRAME)
    distinct = set()
    while n_poly < 100_000:
        rings = _random_polygon(rng)
        try:
            p = canonicalize(rings)
        except GeometryError:
            continue
        if p.is_empty:
            # collinear draws bound no area; the empty set is not a focal element
            continue
        n_poly += 1
        # rotate every ring and shuffle the ring order; orientation carries
        # the outer/hole role, so it is kept
        variant = []
        for ring in rings:
            k = int(rng.integers(len(ring)))
            variant.append(ring[k:] + ring[:k])
        rng.shuffle(variant)
        q = canonicalize(variant)
        if q != p or q.digest != p.digest or q.rings != p.rings:
            variant_bad += 1
        by_digest.setdefault(p.digest, set()).add(p.rings)
        distinct.add(p.rings)
        bba.add_mass(p, 1e-6)
    collisions = sum(len(v) - 1 for v in by_digest.values())
    undetected = len(distinct) - len(bba)
    elapsed = time.perf_counter() - t0
    ok = ie_bad == 0 and raster_bad == 0 and variant_bad == 0 and undetected == 0
    criterion(
        4,
        ok,
        f"inclusion-exclusion failures {ie_bad}/5000, raster outside 2*perimeter {raster_bad}/{raster_n}, "
        f"canonical/hash mismatches {variant_bad}/{n_poly} ({len(distinct)} distinct), "
        f"digest collisions {collisions} of which undetected {undetected} ({elapsed:.0f}s)",
    )
    assert ok


# ------------------------------------------------------------------ 5
def test_criterion_5_simplification(criterion):
    rng = np.random.default_rng(5)
    step_bad, steps = 0, 0
    for _ in range(40):
        n = int(rng.integers(2, 11))
        m = BBA(FRAME)
        masses = rng.dirichlet(np.ones(n))
        while len(m) < n:
            fe = random_rect(rng) if rng.uniform() < 0.5 else regular_polygon_disk(
                tuple(int(v) for v in rng.integers(200, 800, 2)), int(rng.integers(30, 150)), 64
            )
            m.add_mass(fe, float(masses[len(m)]))
        current = m
        while len(current) > 1:
            step, dist, _ = greedy_step(m, current)
            nc = len(current)
            best = min(dense_jousselme(m, merged_pair(current, i, j)) for i in range(nc) for j in range(i + 1, nc))
            step_bad += abs(dist - best) > 1e-9 or abs(dense_jousselme(m, step) - dist) > 1e-9
            steps += 1
            current = step

    count_bad = 0
    for _ in range(10):
        m = BBA(FRAME)
        masses = rng.dirichlet(np.ones(15))
        while len(m) < 15:
            m.add_mass(random_rect(rng), float(masses[len(m)]))
        count_bad += len(simplify_bba(m, 5)) != 5

    pl_bad, queries = 0, 0
    while queries < 1000:
        m = random_bba(rng, max_n=8)
        if len(m) < 3:
            continue
        out = simplify_bba(m, int(rng.integers(1, len(m))))
        for _ in range(20):
            q = random_rect(rng, lo=5, hi=300)
            pl_bad += plausibility(out, q) < plausibility(m, q) - 1e-12
            queries += 1

    ok = step_bad == 0 and count_bad == 0 and pl_bad == 0
    criterion(
        5,
        ok,
        f"greedy vs exhaustive mismatches {step_bad}/{steps} steps (n <= 10), 15->5 count failures {count_bad}/10, "
        f"plausibility decreases {pl_bad}/{queries} queries",
    )
    assert ok


# ------------------------------------------------------------------ 6
def test_criterion_6_tracking(criterion):
    t0 = time.perf_counter()
    s = default_scenario()
    detections = generate_detections(s)
    scales = [10, 100, 1_000, 10_000, 100_000]
    reports = {sc: run_scenario(s, TrackerConfig(scale=sc), detections) for sc in scales}
    elapsed = time.perf_counter() - t0
    default = reports[10_000]
    errors = [reports[sc].mean_error for sc in scales]
    monotone = all(b <= a for a, b in zip(errors, errors[1:]))
    coarse_gap = errors[0] / errors[3] - 1.0
    checks = {
        "mean": default.mean_error <= 0.20,
        "std": default.temporal_std <= 0.05,
        "monotone": monotone,
        "coarse": coarse_gap > 0.20,
        "runtime": elapsed < 300,
    }
    ok = all(checks.values())
    curve = ", ".join(f"{1 / sc:g} m: {e * 100:.4f} cm" for sc, e in zip(scales, errors))
    criterion(
        6,
        ok,
        f"mean error {default.mean_error * 100:.3f} cm (<= 20 cm), temporal std {default.temporal_std * 100:.3f} cm "
        f"(<= 5 cm), sweep [{curve}], monotone {monotone}, 0.1 m vs 1e-4 m gap {coarse_gap * 100:.1f}% (> 20%), "
        f"runtime {elapsed:.0f}s; failed: {[k for k, v in checks.items() if not v] or 'none'}",
    )
    assert ok


# ------------------------------------------------------------------ 7
def _tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_7_determinism(criterion, tmp_path):
    targets = [
        Target([(0.0, 5.0, 5.0), (19.0, 5.0, 5.0)], 1.7),
        Target([(0.0, 12.0, 4.0), (19.0, 14.0, 7.0)], 1.6),
        Target([(0.0, 16.0, 10.0), (19.0, 13.0, 11.0)], 1.8),
    ]
    visible = [(0.0, 0.0), (22.0, 0.0), (22.0, 15.0), (0.0, 15.0)]
    scenario = Scenario((0.0, 0.0, 22.0, 15.0), targets, Camera(11.0, -8.0, 8.0), visible, duration=4, seed=11)
    s_path = tmp_path / "scenario.json"
    s_path.write_text(json.dumps(scenario.to_json()))
    rng = np.random.default_rng(7)
    bba_paths = []
    for k in range(2):
        p = tmp_path / f"m{k}.json"
        p.write_text(json.dumps(random_bba(rng, max_n=4).to_json()))
        bba_paths.append(str(p))

    def commands(out):
        return [
            ["track", "--scenario", str(s_path), "--svg", "--out", f"{out}/track"],
            ["sweep", "--scenario", str(s_path), "--scales", "10,1000,100000", "--out", f"{out}/sweep"],
            ["combine", *bba_paths, "--out", f"{out}/combined.json"],
            ["combine", *bba_paths, "--rule", "disjunctive", "--normalize", "--out", f"{out}/disj.json"],
            ["argmax", bba_paths[0], "--out", f"{out}/argmax.json", "--graph", f"{out}/graph.txt"],
            ["bench", "--instances", "10", "--out", f"{out}/bench"],
            ["scenario", "--out", f"{out}/scenario.json"],
            ["detections", "--scenario", str(s_path), "--out", f"{out}/detections.csv"],
        ]

    trees, codes = [], []
    for run in ("a", "b"):
        out = tmp_path / run
        codes.extend(cli.main(cmd) for cmd in commands(out))
        trees.append(_tree_bytes(out))
    differing = sorted(k for k in trees[0].keys() | trees[1].keys() if trees[0].get(k) != trees[1].get(k))
    ok = all(c == 0 for c in codes) and not differing and len(trees[0]) > 8
    criterion(7, ok, f"{len(commands(tmp_path))} commands run twice, {len(trees[0])} output files, differing {differing}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
