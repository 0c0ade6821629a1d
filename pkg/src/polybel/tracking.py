"""Multi-target tracking on the ground plane with polygon BBAs.

A calibrated camera at height ``H`` sees each pedestrian head on a ray; the
unknown height in [1.4, 2.0] m turns every detection into a ground-plane
segment pointing at the camera. Detections become consonant two-element BBAs
(disk, disk plus ring-sector trapezoid), tracks are combined with them by the
conjunctive rule, associated by minimum conflict, dilated between frames and
localized by BetP maximization.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .decision import betp_argmax
from .evidence import BBA, EvidenceError, conjunctive_combine
from .geometry import FrameSpec, PolygonSet, contains, offset, regular_polygon_disk, ring_sector, unite
from .simplify import simplify_bba

HEIGHT_RANGE = (1.4, 2.0)
CONFLICT_GATE = 1.0 - 1e-12


@dataclass(frozen=True)
class Camera:
    x: float
    y: float
    height: float = 8.0

    def ground_point(self, head_xy: Sequence[float], assumed: float, height: float) -> tuple[float, float]:
        """Ground position of a head seen at ``head_xy`` (for ``assumed``) if it were ``height`` tall."""
        k = (self.height - height) / (self.height - assumed)
        return self.x + (head_xy[0] - self.x) * k, self.y + (head_xy[1] - self.y) * k

    def segment(self, xy: Sequence[float], assumed: float) -> tuple[tuple[float, float], tuple[float, float]]:
        """Height-uncertainty segment through ``xy`` (the ground point for ``assumed``)."""
        return (
            self.ground_point(xy, assumed, HEIGHT_RANGE[0]),
            self.ground_point(xy, assumed, HEIGHT_RANGE[1]),
        )


@dataclass
class Detection:
    position: tuple[float, float]
    bearing_to_camera: float
    timestamp: int
    height: float = 1.7
    height_range: tuple[float, float] = HEIGHT_RANGE
    camera: Camera | None = None
    target: int = -1


@dataclass
class TrackerConfig:
    scale: int = 10_000
    disk_vertices: int = 64
    disk_radius_m: float = 0.20
    disk_mass: float = 0.51
    simplify_at: int = 15
    simplify_to: int = 5
    dilation_m: float = 0.10
    gate: float = 4.0
    max_inactive: int = 5


@dataclass
class Track:
    id: int
    bba: BBA
    state: str = "active"
    history: list[tuple[int, float, float]] = field(default_factory=list)
    inactive_age: int = 0
    label: int = -1
    heights: list[float] = field(default_factory=list)
    visits: int = 0

    @property
    def height(self) -> float:
        return float(np.mean(self.heights)) if self.heights else 0.5 * sum(HEIGHT_RANGE)


@dataclass
class Target:
    """Piecewise-linear ground-truth trajectory: waypoints ``(frame, x, y)``."""

    waypoints: list[tuple[float, float, float]]
    height: float = 1.7

    def position(self, frame: float) -> tuple[float, float]:
        wps = self.waypoints
        if frame <= wps[0][0]:
            return wps[0][1], wps[0][2]
        for (f0, x0, y0), (f1, x1, y1) in zip(wps, wps[1:]):
            if frame <= f1:
                u = (frame - f0) / (f1 - f0)
                return x0 + u * (x1 - x0), y0 + u * (y1 - y0)
        return wps[-1][1], wps[-1][2]


@dataclass
class Scenario:
    bounds_m: tuple[float, float, float, float]
    targets: list[Target]
    camera: Camera
    visible_region_m: list[tuple[float, float]]
    detection_noise: float = 0.05
    height_noise: float = 0.05
    miss_rate: float = 0.0
    duration: int = 20
    seed: int = 0

    def frame(self, scale: int) -> FrameSpec:
        return FrameSpec.from_meters(*self.bounds_m, scale=scale)

    def to_json(self) -> dict:
        data = asdict(self)
        data["targets"] = [{"waypoints": [list(w) for w in t.waypoints], "height": t.height} for t in self.targets]
        return data

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        return cls(
            bounds_m=tuple(float(v) for v in data["bounds_m"]),
            targets=[
                Target([tuple(float(v) for v in w) for w in t["waypoints"]], float(t.get("height", 1.7)))
                for t in data["targets"]
            ],
            camera=Camera(**data["camera"]),
            visible_region_m=[tuple(float(v) for v in p) for p in data["visible_region_m"]],
            detection_noise=float(data.get("detection_noise", 0.05)),
            height_noise=float(data.get("height_noise", 0.05)),
            miss_rate=float(data.get("miss_rate", 0.0)),
            duration=int(data.get("duration", 20)),
            seed=int(data.get("seed", 0)),
        )


def default_scenario(seed: int = 7, n_static: int = 4, n_moving: int = 9, duration: int = 20) -> Scenario:
    """13 pedestrians on a 22 m x 15 m (330 m^2) plaza, camera to the south."""
    rng = np.random.default_rng(seed)
    bounds = (0.0, 0.0, 22.0, 15.0)
    building = (0.0, 11.0, 4.0, 15.0)
    camera = Camera(11.0, -8.0, 8.0)
    visible = [(0.0, 0.0), (22.0, 0.0), (22.0, 15.0), (4.0, 15.0), (4.0, 11.0), (0.0, 11.0)]

    def safe(x: float, y: float) -> bool:
        if not (1.5 <= x <= 20.5 and 1.5 <= y <= 13.5):
            return False
        return not (x < building[2] + 1.0 and y > building[1] - 1.0)

    targets: list[Target] = []
    while len(targets) < n_static + n_moving:
        moving = len(targets) >= n_static
        x, y = rng.uniform(1.5, 20.5), rng.uniform(1.5, 13.5)
        if moving:
            speed = rng.uniform(0.04, 0.09)
            heading = rng.uniform(0, 2 * math.pi)
            ex = x + speed * (duration - 1) * math.cos(heading)
            ey = y + speed * (duration - 1) * math.sin(heading)
        else:
            ex, ey = x, y
        if not (safe(x, y) and safe(ex, ey)):
            continue
        cand = Target([(0.0, x, y), (float(duration - 1), ex, ey)], float(rng.uniform(1.5, 1.9)))
        if all(
            math.dist(cand.position(f), other.position(f)) >= 1.5
            for other in targets
            for f in range(duration)
        ):
            targets.append(cand)
    return Scenario(bounds, targets, camera, visible, seed=seed, duration=duration)


def generate_detections(s: Scenario) -> list[list[Detection]]:
    """Per-frame detections; identical seeds give identical detections."""
    rng = np.random.default_rng(s.seed)
    frames: list[list[Detection]] = []
    cam = s.camera
    for f in range(s.duration):
        dets = []
        for idx, target in enumerate(s.targets):
            truth = target.position(f)
            h_est = float(np.clip(target.height + rng.normal(0.0, s.height_noise), *HEIGHT_RANGE))
            noise = rng.normal(0.0, s.detection_noise, size=2)
            missed = rng.uniform() < s.miss_rate
            if missed:
                continue
            # head seen on the true ray, placed at the estimated height
            gx, gy = cam.ground_point(truth, target.height, h_est)
            pos = (gx + float(noise[0]), gy + float(noise[1]))
            bearing = math.atan2(cam.y - pos[1], cam.x - pos[0])
            dets.append(Detection(pos, bearing, f, h_est, HEIGHT_RANGE, cam, idx))
        frames.append(dets)
    return frames


def detection_bba(d: Detection, frame: FrameSpec, config: TrackerConfig | None = None) -> BBA:
    """Consonant BBA: disk (0.51) and disk plus ring-sector trapezoid (0.49)."""
    cfg = config or TrackerConfig()
    omega = frame.omega()
    center = frame.point(*d.position)
    disk = regular_polygon_disk(center, cfg.disk_radius_m * frame.scale, cfg.disk_vertices).intersect(omega)
    if disk.is_empty:
        raise EvidenceError("detection lies outside the frame")
    cam = d.camera or Camera(d.position[0] + math.cos(d.bearing_to_camera) * 10.0,
                             d.position[1] + math.sin(d.bearing_to_camera) * 10.0)
    radii = [math.dist(p, (cam.x, cam.y)) for p in cam.segment(d.position, d.height)]
    r_in = min(radii) - cfg.disk_radius_m
    r_out = max(radii) + cfg.disk_radius_m
    angle = d.bearing_to_camera + math.pi
    width = 2.0 * math.asin(min(0.9, cfg.disk_radius_m / max(r_in, cfg.disk_radius_m)))
    sector = PolygonSet.empty()
    if r_in > 0:
        sector = ring_sector(frame.point(cam.x, cam.y), r_in * frame.scale, r_out * frame.scale, angle, width)
        sector = sector.intersect(omega)
    if sector.is_empty:
        return BBA.categorical(frame, disk)
    outer = unite(disk, sector)
    if outer == disk:
        return BBA.categorical(frame, disk)
    return BBA(frame).add_mass(disk, cfg.disk_mass).add_mass(outer, 1.0 - cfg.disk_mass)


def association_cost(t: Track | BBA, d: Detection | BBA, frame: FrameSpec | None = None) -> float:
    """-log(1 - conflict) of the conjunctive combination; inf when gated."""
    mt = t.bba if isinstance(t, Track) else t
    md = d if isinstance(d, BBA) else detection_bba(d, frame or mt.frame)
    conflict = conjunctive_combine(mt, md).conflict
    if conflict >= CONFLICT_GATE:
        return math.inf
    return -math.log1p(-conflict) if conflict > 0 else 0.0


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]
    orphan_tracks: list[int]
    orphan_detections: list[int]

    def total_cost(self, costs: np.ndarray) -> float:
        return float(sum(costs[i, j] for i, j in self.pairs))


def associate(costs: np.ndarray, gate: float = math.inf) -> Assignment:
    """Hungarian matching on a track x detection cost matrix.

    Gated cells are ``inf``; matched pairs costing more than ``gate`` are
    released as orphans.
    """
    costs = np.asarray(costs, dtype=float)
    k, h = costs.shape
    if k == 0 or h == 0:
        return Assignment([], list(range(k)), list(range(h)))
    finite = costs[np.isfinite(costs)]
    big = (float(finite.max()) + 1.0) * (min(k, h) + 1) if finite.size else 1.0
    rows, cols = linear_sum_assignment(np.where(np.isfinite(costs), costs, big))
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if np.isfinite(costs[i, j]) and costs[i, j] <= gate]
    matched_t = {i for i, _ in pairs}
    matched_d = {j for _, j in pairs}
    return Assignment(
        pairs,
        [i for i in range(k) if i not in matched_t],
        [j for j in range(h) if j not in matched_d],
    )


def _locate(track: Track, frame_index: int) -> None:
    decision = betp_argmax(track.bba)
    x, y = decision.barycenter
    scale = track.bba.frame.scale
    track.history.append((frame_index, x / scale, y / scale))
    track.visits = decision.visits


def _settle(bba: BBA, cfg: TrackerConfig) -> BBA:
    """Drop the conflict after association, purge dust, simplify if needed."""
    k = 1.0 - bba.conflict
    out = BBA(bba.frame)
    for fe, m in bba.items():
        out._add_unchecked(fe, m / k)
    out = out.finalize()
    if len(out) >= cfg.simplify_at:
        out = simplify_bba(out, cfg.simplify_to)
    return out


def update_track(
    t: Track,
    d: Detection | BBA,
    prior: BBA,
    frame_index: int,
    config: TrackerConfig | None = None,
    md: BBA | None = None,
) -> Track:
    """Fuse a matched detection and the prior into the track.

    ``md`` may carry the detection BBA when it has already been built.
    """
    cfg = config or TrackerConfig()
    if md is None:
        md = d if isinstance(d, BBA) else detection_bba(d, t.bba.frame, cfg)
    fused = conjunctive_combine(conjunctive_combine(t.bba, md), prior)
    if fused.conflict >= CONFLICT_GATE or len(fused) == 0:
        t.state = "inactive"
        t.inactive_age += 1
        return t
    t.bba = _settle(fused, cfg)
    t.state = "active"
    t.inactive_age = 0
    if isinstance(d, Detection):
        t.label = d.target
        t.heights.append(d.height)
    _locate(t, frame_index)
    return t


def dilate_bba(bba: BBA, delta: int) -> BBA:
    """Offset every focal element by ``delta`` units, keeping inclusions."""
    omega = bba.frame.omega()
    items = list(bba.items())
    grown = [offset(fe, delta).intersect(omega) for fe, _ in items]
    for i, (a, _) in enumerate(items):
        for j, (b, _) in enumerate(items):
            if i != j and a.area <= b.area and contains(b, a) and not contains(grown[j], grown[i]):
                grown[j] = unite(grown[j], grown[i])
    out = BBA(bba.frame, bba.conflict)
    for fe, (_, m) in zip(grown, items):
        out._add_unchecked(fe, m)
    return out


def predict_track(t: Track, delta_m: float = 0.10) -> Track:
    """Random-walk prediction: isotropic dilation of the focal elements."""
    delta = t.bba.frame.to_units(delta_m)
    if delta > 0:
        t.bba = dilate_bba(t.bba, delta)
    return t


def estimate_inactive(t: Track, frame_index: int) -> tuple[float, float]:
    """Least-squares linear extrapolation of the track history."""
    if not t.history:
        raise EvidenceError("track has no history")
    if len(t.history) < 2:
        return t.history[-1][1], t.history[-1][2]
    f = np.array([h[0] for h in t.history], dtype=float)
    xs = np.array([h[1] for h in t.history])
    ys = np.array([h[2] for h in t.history])
    fc = f - f.mean()
    denom = float(fc @ fc)
    if denom == 0:
        return float(xs.mean()), float(ys.mean())
    dt = frame_index - f.mean()
    return (
        float(xs.mean() + (fc @ (xs - xs.mean())) / denom * dt),
        float(ys.mean() + (fc @ (ys - ys.mean())) / denom * dt),
    )


def segment_distance(s1, s2) -> float:
    """Minimum Euclidean distance between two closed 2D segments."""
    (p1, p2), (q1, q2) = s1, s2

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1, d2 = cross(q1, q2, p1), cross(q1, q2, p2)
    d3, d4 = cross(p1, p2, q1), cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return 0.0

    def point_seg(p, a, b):
        ax, ay = b[0] - a[0], b[1] - a[1]
        ll = ax * ax + ay * ay
        u = 0.0 if ll == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / ll))
        return math.hypot(p[0] - a[0] - u * ax, p[1] - a[1] - u * ay)

    return min(point_seg(p1, q1, q2), point_seg(p2, q1, q2), point_seg(q1, p1, p2), point_seg(q2, p1, p2))


def localization_error(estimate_segment, truth_segment) -> float:
    return segment_distance(estimate_segment, truth_segment)


@dataclass
class Report:
    rows: list[dict]
    mean_error: float
    temporal_std: float
    histogram: list[tuple[float, float, int]]
    track_counts: list[dict]

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "track_id", "err_m", "n_focal", "visits"])
        for r in self.rows:
            w.writerow([r["frame"], r["track_id"], fmt(r["err_m"]), r["n_focal"], r["visits"]])
        return buf.getvalue()

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo_m", "bin_hi_m", "count", "fraction"])
        total = sum(c for _, _, c in self.histogram) or 1
        for lo, hi, c in self.histogram:
            w.writerow([fmt(lo), fmt(hi), c, fmt(c / total)])
        return buf.getvalue()


def fmt(x: float) -> str:
    """Locale-independent 17-significant-digit float text."""
    return format(float(x), ".17g")


def prior_bba(s: Scenario, frame: FrameSpec) -> BBA:
    region = PolygonSet.from_rings([[frame.point(x, y) for x, y in s.visible_region_m]]).intersect(frame.omega())
    return BBA.categorical(frame, region)


def run_scenario(
    s: Scenario,
    config: TrackerConfig | None = None,
    detections: list[list[Detection]] | None = None,
    snapshot=None,
) -> Report:
    """Track every frame of ``s`` and score the tracks against ground truth.

    ``snapshot(frame_index, tracks)`` is called after each frame if given.
    """
    cfg = config or TrackerConfig()
    frame = s.frame(cfg.scale)
    prior = prior_bba(s, frame)
    detections = detections if detections is not None else generate_detections(s)
    tracks: list[Track] = []
    terminated = 0
    rows: list[dict] = []
    counts: list[dict] = []
    per_frame: list[float] = []
    delta = frame.to_units(cfg.dilation_m)

    for f, dets in enumerate(detections):
        live = [t for t in tracks if t.state != "terminated"]
        if f > 0 and delta > 0:
            for t in live:
                t.bba = dilate_bba(t.bba, delta)
        det_bbas = [detection_bba(d, frame, cfg) for d in dets]
        costs = np.full((len(live), len(dets)), math.inf)
        for i, t in enumerate(live):
            for j, md in enumerate(det_bbas):
                costs[i, j] = association_cost(t.bba, md)
        assignment = associate(costs, cfg.gate)
        for i, j in assignment.pairs:
            update_track(live[i], dets[j], prior, f, cfg, md=det_bbas[j])
        for i in assignment.orphan_tracks:
            t = live[i]
            t.state = "inactive"
            t.inactive_age += 1
        for t in live:
            if t.state == "inactive" and t.inactive_age > cfg.max_inactive:
                t.state = "terminated"
                terminated += 1
        for j in assignment.orphan_detections:
            fused = conjunctive_combine(det_bbas[j], prior)
            if fused.conflict >= CONFLICT_GATE or len(fused) == 0:
                continue
            t = Track(len(tracks), _settle(fused, cfg), label=dets[j].target, heights=[dets[j].height])
            _locate(t, f)
            tracks.append(t)

        n_active = sum(t.state == "active" for t in tracks)
        n_inactive = sum(t.state == "inactive" for t in tracks)
        n_term = sum(t.state == "terminated" for t in tracks)
        if n_active + n_inactive + n_term != len(tracks) or n_term != terminated:
            raise AssertionError("track count conservation violated")
        counts.append({"frame": f, "active": n_active, "inactive": n_inactive, "terminated": n_term, "initialized": len(tracks)})

        errors_f = []
        for idx, target in enumerate(s.targets):
            truth = s.camera.segment(target.position(f), target.height)
            best = _track_for(tracks, idx, f)
            if best is None:
                rows.append({"frame": f, "track_id": -1, "target": idx, "err_m": math.nan, "n_focal": 0, "visits": 0})
                continue
            if best.history and best.history[-1][0] == f:
                est = best.history[-1][1:]
            else:
                est = estimate_inactive(best, f)
            err = localization_error(s.camera.segment(est, best.height), truth)
            errors_f.append(err)
            rows.append({"frame": f, "track_id": best.id, "target": idx, "err_m": err, "n_focal": len(best.bba), "visits": best.visits})
        if errors_f:
            per_frame.append(float(np.mean(errors_f)))
        if snapshot is not None:
            snapshot(f, tracks)

    errs = np.array([r["err_m"] for r in rows if not math.isnan(r["err_m"])])
    mean = float(errs.mean()) if errs.size else math.nan
    temporal_std = float(np.std(per_frame)) if per_frame else math.nan
    hist_counts, edges = np.histogram(errs, bins=20, range=(0.0, 0.5)) if errs.size else (np.zeros(20, int), np.linspace(0, 0.5, 21))
    histogram = [(float(edges[k]), float(edges[k + 1]), int(hist_counts[k])) for k in range(len(hist_counts))]
    return Report(rows, mean, temporal_std, histogram, counts)


def _track_for(tracks: list[Track], target: int, frame_index: int) -> Track | None:
    """Most recently updated live track labelled with ``target``."""
    best = None
    for t in tracks:
        if t.label != target or t.state == "terminated" or not t.history:
            continue
        if best is None or t.history[-1][0] > best.history[-1][0]:
            best = t
    return best


def resolution_sweep(s: Scenario, scales: Sequence[int], config: TrackerConfig | None = None) -> list[tuple[int, float]]:
    """Mean localization error of the same scenario at several grid scales."""
    base = config or TrackerConfig()
    detections = generate_detections(s)
    out = []
    for scale in scales:
        cfg = TrackerConfig(**{**asdict(base), "scale": scale})
        out.append((scale, run_scenario(s, cfg, detections).mean_error))
    return out


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return Scenario.from_json(json.load(fh))
