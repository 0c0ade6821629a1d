"""Command-line front end.

Exit codes: 0 success, 2 unreadable or malformed input, 3 contract violation
(bad geometry, masses, undefined decision), 4 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Callable

import numpy as np

from .decision import DecisionError, build_graph, maximal_intersections, simplify_graph, betp_argmax
from .evidence import BBA, EvidenceError, conjunctive_combine, dempster_normalize, disjunctive_combine
from .geometry import FrameSpec, GeometryError, PolygonSet, regular_polygon_disk, svg_document
from .tracking import Scenario, TrackerConfig, default_scenario, fmt, generate_detections, run_scenario

log = logging.getLogger("polybel")

EXIT_OK, EXIT_INPUT, EXIT_CONTRACT, EXIT_INTERNAL = 0, 2, 3, 4
DEFAULT_SCALES = (10, 100, 1_000, 10_000, 100_000)
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

# optimization subsets: (simplify graph, root suppression, early stopping)
OPT_SUBSETS = {
    "none": (False, False, False),
    "simplify": (True, False, False),
    "root": (False, True, False),
    "early": (False, False, True),
    "all": (True, True, True),
}


class InputError(Exception):
    """Unreadable or malformed input file."""


def _load_json(path: str) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _load_bba(path: str) -> BBA:
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    try:
        return BBA.from_json(data)
    except (EvidenceError, GeometryError) as exc:
        if isinstance(exc.__cause__, (KeyError, TypeError, ValueError)):
            raise InputError(f"{path}: {exc}") from exc
        raise


def _load_scenario(args: argparse.Namespace) -> Scenario:
    if args.scenario in (None, "default"):
        return default_scenario(seed=args.seed if args.seed is not None else 7)
    data = _load_json(args.scenario)
    try:
        s = Scenario.from_json(data)  # type: ignore[arg-type]
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"{args.scenario}: malformed scenario ({exc!r})") from exc
    if args.seed is not None:
        s.seed = args.seed
    return s


def _config(args: argparse.Namespace, scale: int | None = None) -> TrackerConfig:
    cfg = TrackerConfig(
        scale=scale if scale is not None else args.scale,
        disk_vertices=args.disk_vertices,
        simplify_at=args.simplify_at,
        simplify_to=args.simplify_to,
        dilation_m=args.dilation_m,
        gate=args.gate,
    )
    if not 10 <= cfg.scale <= 1_000_000:
        raise EvidenceError("scale must lie in [10, 10^6] units per meter")
    if cfg.disk_vertices < 8:
        raise GeometryError("disks need at least 8 vertices")
    if not 1 <= cfg.simplify_to < cfg.simplify_at:
        raise EvidenceError("need 1 <= simplify_to < simplify_at")
    return cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- track
def _snapshot_writer(out: Path, frame: FrameSpec, prior: PolygonSet) -> Callable:
    def snap(frame_index: int, tracks) -> None:
        layers = [(prior, "#cccccc", 0.15)]
        for t in tracks:
            if t.state == "terminated":
                continue
            color = PALETTE[t.id % len(PALETTE)]
            for fe, m in sorted(t.bba.items(), key=lambda it: (-it[0].area, it[0].digest)):
                layers.append((fe, color, 0.1 + 0.8 * m))
        _write(out / "frames" / f"frame_{frame_index:03d}.svg", svg_document(layers, frame.bounds))

    return snap


def cmd_track(args: argparse.Namespace) -> int:
    s = _load_scenario(args)
    cfg = _config(args)
    out = Path(args.out)
    snapshot = None
    if args.svg:
        frame = s.frame(cfg.scale)
        region = PolygonSet.from_rings([[frame.point(x, y) for x, y in s.visible_region_m]]).intersect(frame.omega())
        snapshot = _snapshot_writer(out, frame, region)
    report = run_scenario(s, cfg, snapshot=snapshot)
    _write(out / "metrics.csv", report.metrics_csv())
    _write(out / "histogram.csv", report.histogram_csv())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "active", "inactive", "terminated", "initialized"])
    for c in report.track_counts:
        w.writerow([c["frame"], c["active"], c["inactive"], c["terminated"], c["initialized"]])
    _write(out / "tracks.csv", buf.getvalue())
    summary = {"mean_error_m": fmt(report.mean_error), "temporal_std_m": fmt(report.temporal_std), "scale": cfg.scale}
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"mean error {report.mean_error:.4f} m, temporal std {report.temporal_std:.4f} m")
    return EXIT_OK


# ---------------------------------------------------------------- sweep
def _sweep_one(job: tuple[dict, dict, int]) -> tuple[int, float]:
    scenario_json, cfg_dict, scale = job
    s = Scenario.from_json(scenario_json)
    cfg = TrackerConfig(**{**cfg_dict, "scale": scale})
    return scale, run_scenario(s, cfg).mean_error


def cmd_sweep(args: argparse.Namespace) -> int:
    s = _load_scenario(args)
    scales = [int(v) for v in args.scales.split(",")] if args.scales else list(DEFAULT_SCALES)
    for sc in scales:
        _config(args, sc)
    base = asdict(_config(args))
    jobs = [(s.to_json(), base, sc) for sc in scales]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["resolution_m", "mean_error_m"])
    for scale, err in results:
        w.writerow([fmt(1.0 / scale), fmt(err)])
        print(f"resolution {1.0 / scale:g} m: mean error {err:.5f} m")
    _write(Path(args.out) / "sweep.csv", buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------- combine / argmax
def cmd_combine(args: argparse.Namespace) -> int:
    bbas = [_load_bba(p) for p in args.inputs]
    rule = conjunctive_combine if args.rule == "conjunctive" else disjunctive_combine
    out = bbas[0]
    for other in bbas[1:]:
        out = rule(out, other)
    if args.normalize:
        out = dempster_normalize(out)
    text = json.dumps(out.to_json(), sort_keys=True) + "\n"
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_argmax(args: argparse.Namespace) -> int:
    bba = _load_bba(args.input)
    d = betp_argmax(bba)
    result = {
        "region": d.region.to_json() if isinstance(d.region, PolygonSet) else {"bits": d.region.bits},
        "density": d.density,
        "barycenter": list(d.barycenter) if d.barycenter is not None else None,
        "members": d.members,
        "visits": d.visits,
    }
    text = json.dumps(result, sort_keys=True) + "\n"
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if args.graph:
        _write(Path(args.graph), simplify_graph(build_graph(bba)).dump())
    return EXIT_OK


# ---------------------------------------------------------------- bench
BENCH_FRAME = FrameSpec((0, 0, 1000, 1000))


def nested_chain(k: int, center: tuple[int, int] = (500, 500)) -> BBA:
    """Consonant BBA of ``k`` concentric squares with equal masses."""
    bba = BBA(BENCH_FRAME)
    for i in range(k):
        h = 20 * (i + 1)
        bba.add_mass(PolygonSet.rectangle(center[0] - h, center[1] - h, center[0] + h, center[1] + h), 1.0 / k)
    return bba


def clustered_overlaps(rng: np.random.Generator, n_clusters: int = 2, per_cluster: int = 6) -> BBA:
    """Clusters of partially nested sets, shaped like fused detection and track BBAs.

    Every cluster holds a disk, a few enclosing rectangles grown around it
    (nested, as dilation produces) and a few jittered rectangles that only
    overlap the core.
    """
    items: list[PolygonSet] = []
    for _ in range(n_clusters):
        cx, cy = (int(v) for v in rng.integers(200, 800, 2))
        items.append(regular_polygon_disk((cx, cy), int(rng.integers(25, 40)), 16))
        n_nested = per_cluster // 2
        for i in range(n_nested):
            h = 40 + 25 * i + int(rng.integers(0, 10))
            items.append(PolygonSet.rectangle(cx - h, cy - h, cx + h, cy + h + int(rng.integers(0, 20))))
        for _ in range(per_cluster - 1 - n_nested):
            dx, dy = (int(v) for v in rng.integers(-50, 50, 2))
            w, h = (int(v) for v in rng.integers(30, 90, 2))
            items.append(PolygonSet.rectangle(cx + dx - w, cy + dy - h, cx + dx + w, cy + dy + h))
    masses = rng.dirichlet(np.ones(len(items)))
    bba = BBA(BENCH_FRAME)
    for fe, m in zip(items, masses):
        bba.add_mass(fe.intersect(BENCH_FRAME.omega()), float(m))
    return bba


def disjoint_groups(rng: np.random.Generator, n_groups: int = 4, per_group: int = 3) -> BBA:
    """Groups of overlapping rectangles, groups mutually disjoint."""
    bba = BBA(BENCH_FRAME)
    masses = rng.dirichlet(np.ones(n_groups * per_group))
    k = 0
    for g in range(n_groups):
        x0 = 20 + 240 * g
        for _ in range(per_group):
            a, b = sorted(int(v) for v in rng.integers(x0, x0 + 200, 2))
            c, d = sorted(int(v) for v in rng.integers(100, 900, 2))
            bba.add_mass(PolygonSet.rectangle(a, c, max(b, a + 5), max(d, c + 5)), float(masses[k]))
            k += 1
    return bba


def bench_corpus(seed: int, instances: int) -> list[tuple[str, int, BBA]]:
    rng = np.random.default_rng(seed)
    corpus = [("nested_chain", k, nested_chain(k)) for k in range(2, 13)]
    corpus += [("clustered_overlaps", i, clustered_overlaps(rng)) for i in range(instances)]
    corpus += [("disjoint_groups", i, disjoint_groups(rng)) for i in range(instances)]
    return corpus


def bench_rows(corpus: list[tuple[str, int, BBA]]) -> list[dict]:
    rows = []
    for family, idx, bba in corpus:
        g = build_graph(bba)
        gs = simplify_graph(g)
        for name, (simp, root, early) in OPT_SUBSETS.items():
            t0 = time.perf_counter()
            found, visits = maximal_intersections(gs if simp else g, root_suppression=root, early_stopping=early)
            elapsed = time.perf_counter() - t0
            rows.append(
                {
                    "family": family,
                    "instance": idx,
                    "n_focal": len(g.nodes),
                    "optimizations": name,
                    "visits": visits,
                    "n_maximal": len(found),
                    "time_s": elapsed,
                }
            )
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    rows = bench_rows(bench_corpus(args.seed if args.seed is not None else 7, args.instances))
    fields = ["family", "instance", "n_focal", "optimizations", "visits", "n_maximal"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([r[k] for k in fields])
    out = Path(args.out)
    _write(out / "bench.csv", buf.getvalue())
    if args.timing:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["family", "instance", "optimizations", "time_s"])
        for r in rows:
            w.writerow([r["family"], r["instance"], r["optimizations"], fmt(r["time_s"])])
        _write(out / "bench_timing.csv", buf.getvalue())
    by_family: dict[str, list[float]] = {}
    visits = {(r["family"], r["instance"], r["optimizations"]): r["visits"] for r in rows}
    for fam, idx, opt in visits:
        if opt == "none":
            by_family.setdefault(fam, []).append(visits[(fam, idx, "none")] / visits[(fam, idx, "all")])
    for fam, ratios in by_family.items():
        print(f"{fam}: median visit reduction {statistics.median(ratios):.2f}x over {len(ratios)} instances")
    return EXIT_OK


# ---------------------------------------------------------------- scenario
def cmd_scenario(args: argparse.Namespace) -> int:
    s = default_scenario(seed=args.seed if args.seed is not None else 7)
    _write(Path(args.out), json.dumps(s.to_json(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_detections(args: argparse.Namespace) -> int:
    s = _load_scenario(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "target", "x_m", "y_m", "bearing_rad", "height_m"])
    for f, dets in enumerate(generate_detections(s)):
        for d in dets:
            w.writerow([f, d.target, fmt(d.position[0]), fmt(d.position[1]), fmt(d.bearing_to_camera), fmt(d.height)])
    _write(Path(args.out), buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------- parser
def _tracking_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario JSON (default: built-in synthetic scenario)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scale", type=int, default=10_000, help="units per meter")
    p.add_argument("--disk-vertices", type=int, default=64)
    p.add_argument("--simplify-at", type=int, default=15)
    p.add_argument("--simplify-to", type=int, default=5)
    p.add_argument("--dilation-m", type=float, default=0.10)
    p.add_argument("--gate", type=float, default=4.0)
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polybel", description="Belief functions on polygon focal elements.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run a tracking scenario")
    _tracking_flags(p)
    p.add_argument("--svg", action="store_true", help="write one SVG snapshot per frame")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("sweep", help="mean error across grid resolutions")
    _tracking_flags(p)
    p.add_argument("--scales", default=None, help="comma-separated units-per-meter list")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("combine", help="combine BBA JSON files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--rule", choices=("conjunctive", "disjunctive"), default="conjunctive")
    p.add_argument("--normalize", action="store_true", help="apply Dempster normalization")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("argmax", help="region of maximal BetP density")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.add_argument("--graph", default=None, help="write the simplified intersection graph here")
    p.set_defaults(func=cmd_argmax)

    p = sub.add_parser("bench", help="visit counts of the maximal-intersection search")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--timing", action="store_true", help="also write wall-clock times (not reproducible)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scenario", help="write the built-in scenario as JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("detections", help="write the synthetic detections of a scenario")
    p.add_argument("--scenario")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detections)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("POLYBEL_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GeometryError, EvidenceError, DecisionError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal failure", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
