"""Compiled vs pure-Python substep kernel, per net model.

Times one outer control step (20 substeps) of the default 10x10 scene with
thrust on the corners, then a short full episode through ``sim.Episode``.

    python3 benchmarks/bench_kernels.py [--steps N] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from netcapture import kernels
from netcapture.config import NetModelKind, SimConfig
from netcapture.dynamics import PhysicsEngine, init_scene
from netcapture.sim import Episode


def time_advance(model: NetModelKind, backend: str, steps: int) -> float:
    cfg = SimConfig(net_model=model).validate()
    net, debris = init_scene(cfg)
    engine = PhysicsEngine(cfg, backend=backend)
    ext = np.zeros_like(net.node_pos)
    ext[net.corner_indices] = [0.5, 0.0, 0.0]
    engine.advance(net, debris, ext)  # warm-up
    t0 = time.perf_counter()
    for _ in range(steps):
        engine.advance(net, debris, ext)
    return (time.perf_counter() - t0) / steps


def time_episode(model: NetModelKind, backend: str, steps: int) -> float:
    ep = Episode(SimConfig(net_model=model), backend=backend)
    ep.step()
    t0 = time.perf_counter()
    for _ in range(steps):
        ep.step()
    return (time.perf_counter() - t0) / steps


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=200, help="outer steps for the compiled core")
    parser.add_argument("--python-steps", type=int, default=10, help="outer steps for the numpy core")
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled core not built; timing the numpy fallback only")
    results = []
    print(f"{'model':14s} {'backend':9s} {'advance [ms]':>12s} {'episode step [ms]':>18s} {'steps/s':>9s}")
    for model in NetModelKind:
        for backend in backends:
            n = args.steps if backend == "compiled" else args.python_steps
            adv = time_advance(model, backend, n)
            step = time_episode(model, backend, n)
            results.append({"model": model.value, "backend": backend, "advance_s": adv,
                            "episode_step_s": step, "steps_per_s": 1.0 / step})
            print(f"{model.value:14s} {backend:9s} {1e3 * adv:12.3f} {1e3 * step:18.3f} {1.0 / step:9.1f}")
    if "compiled" in backends:
        for model in NetModelKind:
            py = next(r for r in results if r["model"] == model.value and r["backend"] == "python")
            cc = next(r for r in results if r["model"] == model.value and r["backend"] == "compiled")
            print(f"speed-up {model.value}: {py['advance_s'] / cc['advance_s']:.0f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
