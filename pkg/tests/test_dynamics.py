import numpy as np
import pytest

from netcapture import kernels
from netcapture.config import ConfigError, NetModelKind, SimConfig
from netcapture.contact import signed_distance_many
from netcapture.dynamics import (
    PhysicsEngine,
    SimulationDiverged,
    check_finite,
    init_scene,
    net_topology,
)
from netcapture.netmodels import internal_forces

COMPILED = "compiled" in kernels.available_backends()
needs_compiled = pytest.mark.skipif(not COMPILED, reason="compiled core not built")


def _contact_scene(model, rng=None):
    """Net pressed onto the bus face with random velocities."""
    cfg = SimConfig(net_model=model)
    cfg.net.offset = (-2.04, 0.0, 0.0)
    cfg.net.initial_clearance = None
    cfg.net.side_length = 3.0
    cfg.validate()
    net, debris = init_scene(cfg)
    if rng is not None:
        net.node_vel += 0.05 * rng.standard_normal(net.node_vel.shape)
        net.node_pos += 0.01 * rng.standard_normal(net.node_pos.shape)
    return cfg, net, debris


def test_init_scene_defaults(default_config):
    net, debris = init_scene(default_config)
    assert net.node_pos.shape == (100, 3)
    np.testing.assert_array_equal(net.corner_indices, [0, 9, 99, 90])
    assert net.node_mass[0] == 350.0 and net.node_mass[1] == 0.1
    d, _ = signed_distance_many(debris.geometry, net.node_pos, debris.position, debris.orientation)
    assert d.min() >= 0.5
    np.testing.assert_allclose(np.ptp(net.node_pos[:, 0]), 0.0, atol=1e-12)  # plane x = const


def test_init_scene_exact_offset():
    cfg = SimConfig()
    cfg.net.initial_clearance = None
    cfg.net.offset = (-30.0, 1.0, 2.0)
    net, _ = init_scene(cfg)
    np.testing.assert_allclose(net.centroid(), [-30.0, 1.0, 2.0], atol=1e-12)


def test_invalid_config_rejected():
    cfg = SimConfig()
    cfg.net.node_mass = -1.0
    with pytest.raises(ConfigError, match="net.node_mass"):
        init_scene(cfg)


@pytest.mark.parametrize("model", list(NetModelKind))
def test_python_kernel_forces_match_reference(model, rng):
    cfg = SimConfig(net_model=model)
    net, _ = init_scene(cfg)
    engine = PhysicsEngine(cfg, backend="python")
    pos = net.node_pos + 0.1 * rng.standard_normal(net.node_pos.shape)
    vel = rng.standard_normal(net.node_pos.shape)
    got = engine.stepper.internal_forces(pos, vel)
    want = internal_forces(pos, vel, engine.topology, model, cfg.elastic)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("model", list(NetModelKind))
def test_compiled_matches_python(model, rng):
    cfg, net, debris = _contact_scene(model, rng)
    states = []
    for backend in ("python", "compiled"):
        n, d = net.copy(), debris.copy()
        eng = PhysicsEngine(cfg, backend=backend)
        ext = np.zeros_like(n.node_pos)
        ext[n.corner_indices] = [1.0, -0.5, 0.2]
        counts = [eng.advance(n, d, ext, np.array([0.0, 0.1, 0.0])) for _ in range(10)]
        states.append((n, d, counts))
    (n1, d1, c1), (n2, d2, c2) = states
    assert c1 == c2 and max(c1) > 0
    np.testing.assert_allclose(n1.node_pos, n2.node_pos, rtol=0, atol=1e-9)
    np.testing.assert_allclose(n1.node_vel, n2.node_vel, rtol=0, atol=1e-7)
    np.testing.assert_allclose(d1.position, d2.position, atol=1e-12)
    np.testing.assert_allclose(d1.orientation, d2.orientation, atol=1e-12)


def _momentum(net, debris):
    return net.momentum() + debris.momentum()


@pytest.mark.parametrize("backend", ["python"] + (["compiled"] if COMPILED else []))
@pytest.mark.parametrize("model", [NetModelKind.SHELL, NetModelKind.SAINT_VENANT])
def test_momentum_conserved_with_contact(backend, model, rng):
    cfg, net, debris = _contact_scene(model, rng)
    net.node_vel[:, 0] += 0.1  # drive the net into the bus
    eng = PhysicsEngine(cfg, backend=backend, orbital=False)
    p0 = _momentum(net, debris)
    contacts = 0
    nsub = 100 if backend == "python" else 1000
    for _ in range(nsub // 20):
        contacts += eng.advance(net, debris, np.zeros_like(net.node_pos), nsub=20, dt=1e-3)
    assert contacts > 0
    assert np.linalg.norm(_momentum(net, debris) - p0) <= 1e-6 * np.linalg.norm(p0)


def test_projection_keeps_edges_at_rest_length(rng):
    cfg, net, debris = _contact_scene(NetModelKind.INEXTENSIBLE, rng)
    eng = PhysicsEngine(cfg)
    for _ in range(20):
        eng.advance(net, debris, np.zeros_like(net.node_pos))
    from netcapture.netmodels import max_edge_strain
    assert max_edge_strain(net.node_pos, net_topology(cfg)) < 1e-2


def test_no_external_force_at_rest_stays_put():
    cfg = SimConfig()
    cfg.net.offset = (0.0, 0.0, 0.0)
    cfg.net.initial_clearance = 0.5
    net, debris = init_scene(cfg)
    eng = PhysicsEngine(cfg, orbital=False)
    before = net.node_pos.copy()
    eng.advance(net, debris, np.zeros_like(net.node_pos))
    np.testing.assert_allclose(net.node_pos, before, atol=1e-12)


def test_divergence_detected(default_config):
    net, debris = init_scene(default_config)
    net.node_pos[3, 1] = np.nan
    with pytest.raises(SimulationDiverged):
        check_finite(net, debris, 7)
    net.node_pos[3, 1] = 2e6
    with pytest.raises(SimulationDiverged, match="step 7"):
        check_finite(net, debris, 7)


def test_unknown_backend_rejected(default_config):
    with pytest.raises(ValueError):
        PhysicsEngine(default_config, backend="gpu")
