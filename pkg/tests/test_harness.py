import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from netcapture.config import BatchSpec, ControllerKind, NetModelKind, SimConfig
from netcapture.harness import (
    EPISODE_COLUMNS,
    HIST_EDGES,
    Stats,
    build_tasks,
    emit_scatter_svg,
    marker_radius,
    read_rows,
    run_batch,
    sample_sphere_uniform,
    summarize,
    write_outputs,
    write_rows,
)


def _row(label="smc-saint_venant", captured=True, t=100.0, fuel=1.5, contacts=12, area=200.0,
         start=(1.0, 2.0, 3.0)):
    return {"combination": label, "start_x": start[0], "start_y": start[1], "start_z": start[2],
            "captured": captured, "capture_time_s": t if captured else None, "fuel_kg": fuel,
            "contacts": contacts if captured else None, "effective_area_m2": area,
            "termination_reason": "captured" if captured else "timeout"}


def test_sphere_points_on_radius():
    pts = sample_sphere_uniform(500, 5.0, seed=3)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 5.0)


def test_sphere_uniform_statistics():
    pts = sample_sphere_uniform(20000, 1.0, seed=1)
    # uniform on the sphere: zero mean, second moments 1/3, z uniform on [-1, 1]
    np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=0.02)
    np.testing.assert_allclose((pts**2).mean(axis=0), 1.0 / 3.0, atol=0.01)
    hist, _ = np.histogram(pts[:, 2], bins=10, range=(-1, 1))
    assert hist.min() > 0.9 * 2000 and hist.max() < 1.1 * 2000


def test_ball_sampling_radius_distribution():
    pts = sample_sphere_uniform(20000, 2.0, seed=1, volume=True)
    r = np.linalg.norm(pts, axis=1)
    assert r.max() <= 2.0
    assert np.mean(r <= 1.0) == pytest.approx(1.0 / 8.0, abs=0.01)


def test_sphere_seeded():
    np.testing.assert_array_equal(sample_sphere_uniform(5, 5.0, 7), sample_sphere_uniform(5, 5.0, 7))
    assert not np.array_equal(sample_sphere_uniform(5, 5.0, 7), sample_sphere_uniform(5, 5.0, 8))


def test_sphere_rejects_bad_input():
    with pytest.raises(ValueError):
        sample_sphere_uniform(0, 5.0, 0)
    with pytest.raises(ValueError):
        sample_sphere_uniform(3, -1.0, 0)


def test_tasks_share_start_points():
    spec = BatchSpec(samples=4, seed=2)
    tasks = build_tasks(spec, SimConfig())
    assert len(tasks) == 24
    starts = {}
    for t in tasks:
        starts.setdefault((t.controller, t.model), []).append(t.start)
        assert t.config.net.offset == t.start
        assert t.config.controller.kind is t.controller
    assert len({tuple(v) for v in starts.values()}) == 1


def test_summary_capture_percentage():
    rows = [_row(captured=k < 187) for k in range(200)]
    s = summarize(rows).combinations["smc-saint_venant"]
    assert s.capture_percentage == pytest.approx(93.5)
    assert s.captured == 187 and s.episodes == 200
    assert s.terminations == {"captured": 187, "timeout": 13}


def test_summary_statistics():
    rows = [_row(t=float(t)) for t in (10, 20, 30, 40, 50)]
    s = summarize(rows).combinations["smc-saint_venant"]
    assert s.capture_time.median == 30.0
    assert (s.capture_time.q1, s.capture_time.q3) == (20.0, 40.0)


def test_summary_absent_statistics_are_none():
    rows = [_row(captured=False, area=None) for _ in range(3)]
    s = summarize(rows).combinations["smc-saint_venant"]
    assert s.capture_time is None and s.contacts is None and s.effective_area is None
    assert s.fuel is not None
    assert Stats.of([None, None]) is None


def test_summary_sums_histograms():
    n = len(HIST_EDGES) + 1
    a, b = np.zeros(n, dtype=int), np.zeros(n, dtype=int)
    a[:3], b[:3] = [1, 2, 3], [0, 1, 1]
    details = [{"histograms": {"thrust": a.tolist()}}, {"histograms": {"thrust": b.tolist()}}]
    s = summarize([_row(), _row()], details).combinations["smc-saint_venant"]
    assert s.histograms["thrust"][:3] == [1, 3, 4]
    assert s.histograms["velocity"] == [0] * n


def test_summary_rejects_empty():
    with pytest.raises(ValueError):
        summarize([])


def test_rows_round_trip(tmp_path):
    rows = [_row(), _row("pid-shell", captured=False, area=None, start=(0.1, -1e-17, 4.999))]
    path = tmp_path / "episodes.csv"
    write_rows(rows, path)
    assert read_rows(path) == rows
    assert path.read_text().splitlines()[0] == ",".join(EPISODE_COLUMNS)


def test_read_rows_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_rows(path)


def test_marker_radius():
    assert marker_radius(10.0, 10.0) == 12.0
    assert marker_radius(5.0, 10.0) == 6.0
    assert marker_radius(0.0, 10.0) == 2.0
    assert marker_radius(None, 10.0) == 2.0
    assert marker_radius(3.0, 0.0) == 2.0


def test_svg_well_formed():
    rows = [_row(start=(1.0, 2.0, 3.0), area=100.0), _row(start=(-2.0, 0.5, 1.0), area=50.0),
            _row("pid-shell", captured=False, area=None)]
    root = ET.fromstring(emit_scatter_svg(rows))
    ns = "{http://www.w3.org/2000/svg}"
    assert root.tag == ns + "svg"
    circles = root.findall(f".//{ns}circle")
    assert len(circles) == 3
    radii = [float(c.get("r")) for c in circles]
    assert radii[0] / radii[1] == pytest.approx(2.0, rel=1e-3)
    assert circles[2].get("fill") == "#bbbbbb"
    texts = [t.text for t in root.iter(ns + "text")]
    assert "smc-saint_venant" in texts and "pid-shell" in texts


def test_svg_projection_axes():
    rows = [_row(start=(4.0, 0.0, -4.0))]
    root = ET.fromstring(emit_scatter_svg(rows, projection=("x", "z")))
    c = root.find(".//{http://www.w3.org/2000/svg}circle")
    # x positive maps right of centre, z negative maps below centre
    cx0 = 40 + 130
    assert float(c.get("cx")) > cx0 and float(c.get("cy")) > 40 + 130


def test_write_outputs_reports_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    errors = write_outputs(summarize([_row()]), blocker / "sub")
    assert errors and "file" in errors[0]


def test_small_batch_end_to_end(tmp_path):
    base = SimConfig()
    base.timeout = 0.2
    spec = BatchSpec(samples=2, seed=5, out_dir=str(tmp_path),
                     combinations=[(ControllerKind.SMC, NetModelKind.SHELL),
                                   (ControllerKind.PID, NetModelKind.SHELL)])
    summary = run_batch(spec, base)
    assert summary.io_errors == []
    for name in ("episodes.csv", "summary.json", "episodes_detail.jsonl",
                 "scatter_capture_time.svg", "scatter_fuel.svg", "batch_config.json"):
        assert (tmp_path / name).exists()
    rows = read_rows(tmp_path / "episodes.csv")
    assert [r["combination"] for r in rows] == ["smc-shell"] * 2 + ["pid-shell"] * 2
    for r in rows:
        assert math.isclose(math.dist((r["start_x"], r["start_y"], r["start_z"]), (0, 0, 0)), 5.0)
