#!/usr/bin/env python3
"""Benchmark the compiled transient kernel against the pure-Python fallback.

Runs the stock two-path network under a sinusoidal drive through both
stepping kernels, reports steps/second and the speedup, and cross-checks
that the two integrations agree.

    python benchmarks/bench_stepper.py --steps 20000 --repeat 3
"""

import argparse
import time

import numpy as np

from mycelsim import _stepper_py
from mycelsim.netsim import default_topology
from mycelsim.signals import WaveformSpec, synthesize

try:
    from mycelsim import _stepper_cy
except ImportError:
    _stepper_cy = None


def kernel_args(steps: int, freq_hz: float):
    top = default_topology()
    drive = synthesize(WaveformSpec("sine", freq_hz, 10.0), 1.0, float(steps))
    params = [e.params for e in top.edges]
    free_idx = np.array(
        [n for n in range(top.node_count)
         if n not in (top.terminals.input1, top.terminals.ground)]
    )
    return (
        np.array([e.node_a for e in top.edges]),
        np.array([e.node_b for e in top.edges]),
        np.array([p.g_fast_S for p in params]),
        np.array([p.g_slow_S for p in params]),
        np.array([p.tau_s for p in params]),
        np.array([p.alpha2_per_V for p in params]),
        np.array([p.alpha3_per_V2 for p in params]),
        np.array([p.v_half_V for p in params]),
        np.zeros(len(params)),
        free_idx,
        np.array([top.terminals.ground, top.terminals.input1]),
        np.ascontiguousarray(np.vstack([np.zeros(steps), drive.samples])),
        top.node_count,
        1.0,
        1e-9,
        50,
    )


def time_kernel(kernel, args, repeat: int):
    best = float("inf")
    volts = None
    for _ in range(repeat):
        start = time.perf_counter()
        volts, _w, status, _f = kernel.run_transient(*args)
        elapsed = time.perf_counter() - start
        assert status == 0, f"kernel failed with status {status}"
        best = min(best, elapsed)
    return best, volts


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--freq-hz", type=float, default=0.002)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    bench_args = kernel_args(args.steps, args.freq_hz)

    t_py, v_py = time_kernel(_stepper_py, bench_args, args.repeat)
    print(f"python kernel: {args.steps / t_py:12.0f} steps/s  ({t_py * 1e3:8.1f} ms)")

    if _stepper_cy is None:
        print("cython kernel: not built (pip install -e . --no-build-isolation)")
        return 0

    t_cy, v_cy = time_kernel(_stepper_cy, bench_args, args.repeat)
    print(f"cython kernel: {args.steps / t_cy:12.0f} steps/s  ({t_cy * 1e3:8.1f} ms)")
    print(f"speedup:       {t_py / t_cy:12.1f}x")

    deviation = np.max(np.abs(v_py - v_cy)) / max(np.max(np.abs(v_py)), 1e-30)
    print(f"max relative voltage deviation between kernels: {deviation:.3e}")
    assert deviation < 1e-9, "kernels disagree"
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
