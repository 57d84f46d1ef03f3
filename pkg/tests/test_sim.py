import csv
import json

import numpy as np
import pytest

from netcapture.config import NetModelKind, SimConfig
from netcapture.sim import (
    HIST_EDGES,
    RECORD_COLUMNS,
    Episode,
    LogHistogram,
    run_episode,
    write_metrics_json,
)


def _short(timeout=1.0, **kw):
    cfg = SimConfig(**kw)
    cfg.timeout = timeout
    return cfg.validate()


def test_timeout_termination():
    metrics, record = run_episode(_short(2.0), record=True)
    assert metrics.termination_reason == "timeout"
    assert not metrics.captured and metrics.capture_time is None
    assert metrics.steps == 100 and len(record) == 100
    assert metrics.sim_time == pytest.approx(2.0)
    np.testing.assert_array_equal(record.column("step"), np.arange(1, 101))


def test_zero_gains_burn_no_fuel():
    cfg = _short(1.0)
    cfg.controller.lam = 0.0
    cfg.controller.k_sw = 0.0
    metrics, _ = run_episode(cfg)
    assert metrics.fuel_total == 0.0
    assert metrics.max_thrust == 0.0


def test_fuel_matches_recorded_masses():
    metrics, record = run_episode(_short(1.0), record=True)
    for k in range(4):
        assert 350.0 - record.column(f"mass{k}")[-1] == pytest.approx(metrics.fuel_per_satellite[k])
    assert metrics.fuel_total == pytest.approx(sum(metrics.fuel_per_satellite))


def test_fuel_exhaustion_terminates():
    cfg = _short(5.0)
    cfg.controller.dry_mass = 350.0 - 1e-6
    metrics, _ = run_episode(cfg)
    assert metrics.termination_reason == "fuel_exhausted"
    assert metrics.steps < 250


def test_divergence_terminates_cleanly():
    cfg = _short(1.0)
    cfg.net.initial_velocity = (1e9, 0.0, 0.0)
    metrics, _ = run_episode(cfg)
    assert metrics.termination_reason == "diverged"


@pytest.mark.parametrize("model", list(NetModelKind))
def test_all_models_run(model):
    metrics, _ = run_episode(_short(0.4, net_model=model))
    assert metrics.steps == 20
    assert metrics.max_thrust <= 20.0


def test_inextensible_strain_tracked():
    metrics, _ = run_episode(_short(1.0, net_model=NetModelKind.INEXTENSIBLE))
    assert 0.0 <= metrics.max_edge_strain < 1e-2


def test_runs_are_deterministic():
    a, ra = run_episode(_short(1.0), record=True)
    b, rb = run_episode(_short(1.0), record=True)
    assert a.to_dict() == b.to_dict()
    assert ra.rows == rb.rows


def test_record_csv(tmp_path):
    _, record = run_episode(_short(0.2), record=True)
    path = tmp_path / "trace.csv"
    record.write_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == tuple(RECORD_COLUMNS)
    assert len(rows) == 11
    assert float(rows[-1][RECORD_COLUMNS.index("t")]) == pytest.approx(0.2)


def test_metrics_json(tmp_path):
    cfg = _short(0.2)
    metrics, _ = run_episode(cfg)
    path = tmp_path / "m.json"
    write_metrics_json(metrics, cfg, path)
    doc = json.loads(path.read_text())
    assert doc["metrics"]["termination_reason"] == "timeout"
    assert doc["config"]["net_model"] == "saint_venant"


def test_histogram_bins():
    h = LogHistogram()
    h.add([0.0, 1e-7, 1e-6, 1.0, 5e4])
    assert h.counts[0] == 2  # below the first edge
    assert h.counts[-1] == 1  # above the last edge
    assert h.counts[1] == 1
    k = 1 + int(np.searchsorted(HIST_EDGES, 1.0, side="right")) - 1
    assert h.counts[k] == 1
    assert h.counts.sum() == 5


def test_phase_log_starts_in_orienting():
    ep = Episode(_short(0.1))
    assert ep.guidance.phase.value == "orienting"
    ep.step()
    assert ep.step_index == 1
