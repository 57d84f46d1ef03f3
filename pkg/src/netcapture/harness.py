"""Batch experiments: shared start points on a sphere around the debris, every
controller x net-model combination, aggregate statistics and SVG scatter plots."""

from __future__ import annotations

import copy
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from netcapture.config import (
    BatchSpec,
    ControllerKind,
    NetModelKind,
    SimConfig,
    combination_label,
    to_plain,
)
from netcapture.sim import HIST_EDGES, HIST_QUANTITIES, run_episode

EPISODE_COLUMNS = ("combination", "start_x", "start_y", "start_z", "captured", "capture_time_s",
                   "fuel_kg", "contacts", "effective_area_m2", "termination_reason")
_FLOAT_COLUMNS = {"start_x", "start_y", "start_z", "capture_time_s", "fuel_kg", "effective_area_m2"}


def sample_sphere_uniform(n: int, radius: float, seed: int, volume: bool = False) -> np.ndarray:
    """``n`` points uniform on the sphere surface (or inside the ball when ``volume``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not radius > 0:
        raise ValueError("radius must be > 0")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, 3))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    while np.any(norms == 0.0):  # measure-zero, but redraw rather than divide by zero
        bad = norms[:, 0] == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    pts = radius * g / norms
    if volume:
        pts *= rng.random((n, 1)) ** (1.0 / 3.0)
    return pts


# --------------------------------------------------------------------------
# episode execution

@dataclass
class EpisodeTask:
    index: int
    controller: ControllerKind
    model: NetModelKind
    start: tuple[float, float, float]
    config: SimConfig


def episode_config(base: SimConfig, controller, model, start) -> SimConfig:
    cfg = copy.deepcopy(base)
    cfg.controller.kind = ControllerKind(controller)
    cfg.net_model = NetModelKind(model)
    cfg.net.offset = tuple(float(x) for x in start)
    return cfg


def _execute(task: EpisodeTask) -> tuple[dict, dict]:
    metrics, _ = run_episode(task.config)
    row = {
        "combination": combination_label(task.controller, task.model),
        "start_x": float(task.start[0]),
        "start_y": float(task.start[1]),
        "start_z": float(task.start[2]),
        "captured": bool(metrics.captured),
        "capture_time_s": metrics.capture_time,
        "fuel_kg": metrics.fuel_total,
        "contacts": metrics.contact_points_at_capture,
        "effective_area_m2": metrics.effective_area_at_first_contact,
        "termination_reason": metrics.termination_reason,
    }
    return row, metrics.to_dict()


def build_tasks(spec: BatchSpec, base: SimConfig) -> list[EpisodeTask]:
    starts = sample_sphere_uniform(spec.samples, spec.radius, spec.seed, spec.volume)
    tasks = []
    for controller, model in spec.combinations:
        for p in starts:
            tasks.append(EpisodeTask(len(tasks), ControllerKind(controller), NetModelKind(model),
                                     tuple(float(x) for x in p),
                                     episode_config(base, controller, model, p)))
    return tasks


def run_tasks(tasks: list[EpisodeTask], workers: int = 1) -> list[tuple[dict, dict]]:
    """Run episodes; results come back in task order whatever the worker count."""
    if workers <= 1 or len(tasks) <= 1:
        return [_execute(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute, tasks, chunksize=1))


# --------------------------------------------------------------------------
# aggregation

@dataclass
class Stats:
    n: int
    median: float
    q1: float
    q3: float
    min: float
    max: float
    mean: float

    @classmethod
    def of(cls, values) -> "Stats | None":
        v = np.asarray([x for x in values if x is not None], dtype=float)
        if len(v) == 0:
            return None  # absent, not zero
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        return cls(len(v), float(med), float(q1), float(q3), float(v.min()), float(v.max()),
                   float(v.mean()))


@dataclass
class CombinationSummary:
    episodes: int
    captured: int
    capture_percentage: float
    capture_time: Stats | None
    fuel: Stats | None
    contacts: Stats | None
    effective_area: Stats | None
    terminations: dict[str, int]
    histograms: dict[str, list[int]] = field(default_factory=dict)


@dataclass
class BatchSummary:
    combinations: dict[str, CombinationSummary]
    rows: list[dict]
    histogram_edges: list[float] = field(default_factory=lambda: HIST_EDGES.tolist())
    io_errors: list[str] = field(default_factory=list)

    def to_dict(self, include_rows: bool = False) -> dict:
        doc = {"combinations": {k: asdict(v) for k, v in self.combinations.items()},
               "histogram_edges": self.histogram_edges}
        if include_rows:
            doc["rows"] = self.rows
        return doc


def summarize(rows: list[dict], details: list[dict] | None = None) -> BatchSummary:
    """Per-combination capture percentage and median/IQR statistics.

    Capture time and contact counts are over captured episodes, effective area
    over episodes that touched the debris, fuel over all episodes. Histograms
    of thrust, velocity, acceleration and internal force are summed from the
    per-episode metrics when ``details`` is given.
    """
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict[str, list[int]] = {}
    for i, r in enumerate(rows):
        groups.setdefault(r["combination"], []).append(i)
    out = {}
    for label, idx in groups.items():
        sub = [rows[i] for i in idx]
        captured = [r for r in sub if r["captured"]]
        terminations: dict[str, int] = {}
        for r in sub:
            terminations[r["termination_reason"]] = terminations.get(r["termination_reason"], 0) + 1
        hist = {}
        if details is not None:
            for name in HIST_QUANTITIES:
                total = np.zeros(len(HIST_EDGES) + 1, dtype=np.int64)
                for i in idx:
                    counts = details[i].get("histograms", {}).get(name)
                    if counts:
                        total += np.asarray(counts, dtype=np.int64)
                hist[name] = total.tolist()
        out[label] = CombinationSummary(
            episodes=len(sub),
            captured=len(captured),
            capture_percentage=100.0 * len(captured) / len(sub),
            capture_time=Stats.of(r["capture_time_s"] for r in captured),
            fuel=Stats.of(r["fuel_kg"] for r in sub),
            contacts=Stats.of(r["contacts"] for r in captured),
            effective_area=Stats.of(r["effective_area_m2"] for r in sub),
            terminations=terminations,
            histograms=hist,
        )
    return BatchSummary(out, rows)


# --------------------------------------------------------------------------
# files

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EPISODE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in EPISODE_COLUMNS])


def read_rows(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EPISODE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for raw in reader:
            r = {}
            for c in EPISODE_COLUMNS:
                v = raw[c]
                if c in _FLOAT_COLUMNS:
                    r[c] = float(v) if v != "" else None
                elif c == "captured":
                    r[c] = v == "1"
                elif c == "contacts":
                    r[c] = int(v) if v != "" else None
                else:
                    r[c] = v
            rows.append(r)
    return rows


def write_outputs(summary: BatchSummary, out_dir, details: list[dict] | None = None,
                  svg: bool = True) -> list[str]:
    """Write episodes.csv, summary.json (and SVG plots); returns the I/O errors.

    A failing file is reported and skipped so the remaining outputs are still written.
    """
    out = Path(out_dir)
    errors = []
    jobs = [("episodes.csv", lambda p: write_rows(summary.rows, p)),
            ("summary.json", lambda p: p.write_text(json.dumps(summary.to_dict(), indent=2)))]
    if details is not None:
        jobs.append(("episodes_detail.jsonl", lambda p: p.write_text(
            "".join(json.dumps(d) + "\n" for d in details))))
    if svg:
        jobs.append(("scatter_capture_time.svg", lambda p: p.write_text(emit_scatter_svg(
            summary.rows, color="capture_time_s", size="effective_area_m2"))))
        jobs.append(("scatter_fuel.svg", lambda p: p.write_text(emit_scatter_svg(
            summary.rows, color="fuel_kg", size="contacts"))))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return [f"{out}: {exc}"]
    for name, job in jobs:
        try:
            job(out / name)
        except OSError as exc:
            errors.append(f"{out / name}: {exc}")
    return errors


def run_batch(spec: BatchSpec, base_config: SimConfig | None = None, write: bool = True) -> BatchSummary:
    """Run every combination on one shared, seeded start set."""
    spec.validate()
    base = (base_config or SimConfig()).validate()
    tasks = build_tasks(spec, base)
    results = run_tasks(tasks, spec.workers)
    rows = [r for r, _ in results]
    details = [d for _, d in results]
    summary = summarize(rows, details)
    if write:
        errors = write_outputs(summary, spec.out_dir, details)
        cfg_doc = {"batch": to_plain(spec), "sim": to_plain(base)}
        try:
            (Path(spec.out_dir) / "batch_config.json").write_text(json.dumps(cfg_doc, indent=2))
        except OSError as exc:
            errors.append(str(exc))
        summary.io_errors = errors
    return summary


# --------------------------------------------------------------------------
# SVG scatter

_PANEL = 260
_MARGIN = 40
_AXES = {"x": 0, "y": 1, "z": 2}
_LOW = (68, 1, 84)     # colour-ramp end points
_HIGH = (253, 231, 37)


def _ramp(t: float) -> str:
    t = min(1.0, max(0.0, t))
    rgb = [round(a + (b - a) * t) for a, b in zip(_LOW, _HIGH)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def marker_radius(value, vmax: float, r_min: float = 2.0, r_max: float = 12.0) -> float:
    """Radius proportional to ``value`` (``r_max`` at ``vmax``), clamped to [r_min, r_max]."""
    if value is None or not vmax > 0:
        return r_min
    return min(r_max, max(r_min, r_max * float(value) / vmax))


def emit_scatter_svg(rows: list[dict], projection: tuple[str, str] = ("x", "y"),
                     color: str = "capture_time_s", size: str = "effective_area_m2",
                     r_min: float = 2.0, r_max: float = 12.0) -> str:
    """One panel per combination; start positions projected on a coordinate plane."""
    if not rows:
        raise ValueError("no rows to plot")
    ax0, ax1 = (_AXES[p] for p in projection)
    labels = list(dict.fromkeys(r["combination"] for r in rows))
    ncols = min(3, len(labels))
    nrows = math.ceil(len(labels) / ncols)
    width = ncols * (_PANEL + _MARGIN) + _MARGIN
    height = nrows * (_PANEL + _MARGIN) + _MARGIN + 60

    coords = np.array([[r["start_x"], r["start_y"], r["start_z"]] for r in rows])
    extent = float(np.abs(coords[:, [ax0, ax1]]).max()) or 1.0
    cvals = [r[color] for r in rows if r[color] is not None]
    cmin, cmax = (min(cvals), max(cvals)) if cvals else (0.0, 1.0)
    svals = [r[size] for r in rows if r[size] is not None]
    smax = max(svals) if svals else 0.0

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for k, label in enumerate(labels):
        gx = _MARGIN + (k % ncols) * (_PANEL + _MARGIN)
        gy = _MARGIN + (k // ncols) * (_PANEL + _MARGIN)
        cx, cy, half = gx + _PANEL / 2, gy + _PANEL / 2, _PANEL / 2 - 14
        parts.append(f'<g><rect x="{gx}" y="{gy}" width="{_PANEL}" height="{_PANEL}" '
                     f'fill="none" stroke="#888"/>')
        parts.append(f'<text x="{cx}" y="{gy - 6}" text-anchor="middle">{escape(label)}</text>')
        for tick in (-extent, 0.0, extent):
            tx = cx + tick / extent * half
            ty = cy - tick / extent * half
            parts.append(f'<text x="{tx:.1f}" y="{gy + _PANEL + 13}" text-anchor="middle">{tick:.3g}</text>')
            parts.append(f'<text x="{gx - 4}" y="{ty + 4:.1f}" text-anchor="end">{tick:.3g}</text>')
        parts.append(f'<text x="{cx}" y="{gy + _PANEL + 26}" text-anchor="middle">{projection[0]} [m]</text>')
        for r in rows:
            if r["combination"] != label:
                continue
            p = (r["start_x"], r["start_y"], r["start_z"])
            px = cx + p[ax0] / extent * half
            py = cy - p[ax1] / extent * half
            value = r[color]
            fill = "#bbbbbb" if value is None else _ramp(
                (value - cmin) / (cmax - cmin) if cmax > cmin else 0.5)
            rad = marker_radius(r[size], smax, r_min, r_max)
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{rad:.2f}" fill="{fill}" '
                         f'fill-opacity="0.8" stroke="black" stroke-width="0.4"/>')
        parts.append("</g>")

    ly = height - 40
    parts.append(f'<text x="{_MARGIN}" y="{ly - 6}">colour: {escape(color)} '
                 f'(grey = none); radius: {escape(size)}; axes: {projection[0]}-{projection[1]} [m]</text>')
    for i in range(11):
        parts.append(f'<rect x="{_MARGIN + 20 * i}" y="{ly}" width="20" height="10" fill="{_ramp(i / 10)}"/>')
    parts.append(f'<text x="{_MARGIN}" y="{ly + 24}">{cmin:.4g}</text>')
    parts.append(f'<text x="{_MARGIN + 220}" y="{ly + 24}" text-anchor="end">{cmax:.4g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def default_workers() -> int:
    env = os.environ.get("NETCAPTURE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1
