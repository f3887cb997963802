"""Benchmark the JIT and pure-numpy builds of the hot kernels.

Runs two child processes -- one with numba enabled, one with
``TRILOOP_NO_NUMBA=1`` -- because the backend is fixed at import time.
Each arm times the two hot paths:

* ``plant``: 300 simulated seconds of the plant loop (3000 RK4 substeps),
* ``twin``: a 345-step autoregressive rollout of a 256x2 forecaster using
  the staggered-stream kernels.

Warm-up passes run first so the numba arm's JIT compilation is reported
separately rather than polluting the steady-rate numbers.

Usage::

    python3 benchmarks/bench_kernels.py            # the comparison table
    python3 benchmarks/bench_kernels.py --arm      # one arm (internal)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import subprocess
import sys
import time

PLANT_SECONDS = 300
TWIN_STEPS = 345


def _measure_arm() -> dict:
    import numpy as np

    from triloop import _accel
    from triloop.gru import GruModel
    from triloop.pipeline import NormStats
    from triloop.plant import Simulator
    from triloop.twin import rollout

    report = {"backend": _accel.backend_name()}

    # --- plant loop -------------------------------------------------------
    sim = Simulator(noise_enabled=False)
    sim.apply(heater_ao=100.0, pump1_hz=10.0, pump2_hz=10.0, cr_ao=40.0)
    t0 = time.perf_counter()
    sim.advance_seconds(5)                       # JIT warm-up
    report["plant_warmup_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    sim.advance_seconds(PLANT_SECONDS)
    wall = time.perf_counter() - t0
    report["plant_wall_s"] = wall
    report["plant_ratio"] = PLANT_SECONDS / wall  # sim seconds per wall second

    # --- streamed twin rollout -------------------------------------------
    model = GruModel.new(d_x=26, d_h=256, layers=2, seed=0)
    stats = NormStats(in_mean=np.zeros(26), in_std=np.ones(26),
                      out_mean=np.zeros(29), out_std=np.ones(29))
    model = dataclasses.replace(model, norm_stats=stats)
    window = np.zeros((30, 26))
    t0 = time.perf_counter()
    rollout(model, window, 0.5, max_steps=5, eps=0.0)   # JIT warm-up
    report["twin_warmup_s"] = time.perf_counter() - t0
    result = rollout(model, window, 0.5, max_steps=TWIN_STEPS, eps=0.0)
    report["twin_wall_s"] = result.wall_clock_s
    report["twin_steps_per_s"] = TWIN_STEPS / result.wall_clock_s
    return report


def _run_arm(disable_numba: bool) -> dict:
    env = dict(os.environ)
    env["TRILOOP_NO_NUMBA"] = "1" if disable_numba else "0"
    out = subprocess.run([sys.executable, os.path.abspath(__file__), "--arm"],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--arm", action="store_true",
                        help="measure the current process's backend (internal)")
    args = parser.parse_args()

    if args.arm:
        json.dump(_measure_arm(), sys.stdout, indent=2)
        print()
        return 0

    jit = _run_arm(disable_numba=False)
    plain = _run_arm(disable_numba=True)
    if jit["backend"] != "numba":
        print("note: numba unavailable; both arms ran the numpy build")

    rows = [
        ("plant loop, 300 sim s", "plant_wall_s", "s", False),
        ("  sim-time speedup", "plant_ratio", "x real time", True),
        ("twin rollout, 345 steps", "twin_wall_s", "s", False),
        ("  prediction rate", "twin_steps_per_s", "steps/s", True),
        ("one-time warm-up (plant)", "plant_warmup_s", "s", False),
        ("one-time warm-up (twin)", "twin_warmup_s", "s", False),
    ]
    print(f"{'kernel path':<28}{jit['backend']:>14}{plain['backend']:>14}")
    for label, key, unit, _ in rows:
        print(f"{label:<28}{jit[key]:>11.3f} {unit.split()[0]:<2}"
              f"{plain[key]:>11.3f} {unit.split()[0]}")
    print()
    print(f"plant advance: {plain['plant_wall_s'] / jit['plant_wall_s']:.1f}x "
          f"faster with {jit['backend']}")
    print(f"twin rollout:  {plain['twin_wall_s'] / jit['twin_wall_s']:.1f}x "
          f"faster with {jit['backend']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
