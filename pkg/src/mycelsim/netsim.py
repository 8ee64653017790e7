"""Transient simulation of a small nonlinear conductive network.

The network mimics a mycelium-like sample probed through two injection
terminals and a common ground, sensed by differential channel pairs.  Each
edge carries a dual-transport law: a fast fixed conductance plus a slow,
voltage-activated conductance whose state w relaxes with time constant tau,

    i(v, w) = (g_fast + g_slow * w) * (v + alpha2 * v^2 + alpha3 * v^3)
    dw/dt   = (sigma(|v| / v_half) - w) / tau,   sigma(x) = x^2 / (1 + x^2)

For drive periods much longer than tau the state tracks |v| within each
cycle and modulates the conductance, which distorts slow signals strongly;
for fast drives the state freezes near its mean and distortion collapses.

The per-step integration loop lives in a compiled extension
(mycelsim._stepper_cy) with a pure-numpy fallback (mycelsim._stepper_py);
selection happens at import and can be forced with MYCELSIM_KERNEL.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    NewtonConvergenceError,
    SingularNodalSystemError,
    ValidationError,
)
from .signals import TimeSeries

_requested = os.environ.get("MYCELSIM_KERNEL", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise ImportError(f"MYCELSIM_KERNEL must be auto, cython, or python, got {_requested!r}")
if _requested == "python":
    from . import _stepper_py as _kernel

    KERNEL_NAME = "python"
else:
    try:
        from . import _stepper_cy as _kernel  # type: ignore[attr-defined]

        KERNEL_NAME = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _stepper_py as _kernel

        KERNEL_NAME = "python"

TERMINAL_NAMES = ("input1", "input2")


@dataclass(frozen=True)
class DualTransportParams:
    """Edge constitutive parameters (conductances in siemens)."""

    g_fast_S: float = 0.05e-6
    g_slow_S: float = 6.0e-6
    tau_s: float = 14.0
    alpha2_per_V: float = 0.01
    alpha3_per_V2: float = 0.004
    v_half_V: float = 5.0

    def __post_init__(self):
        if self.g_fast_S < 0 or self.g_slow_S < 0:
            raise ValidationError("conductances must be nonnegative")
        if self.g_fast_S + self.g_slow_S <= 0:
            raise ValidationError("g_fast_S + g_slow_S must be positive")
        if not (self.tau_s > 0):
            raise ValidationError(f"tau_s must be positive, got {self.tau_s}")
        if not (self.v_half_V > 0):
            raise ValidationError(f"v_half_V must be positive, got {self.v_half_V}")


@dataclass(frozen=True)
class EdgeState:
    """Slow-transport activation of one edge, clamped to [0, 1]."""

    w: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.w <= 1.0):
            raise ValidationError(f"w must be in [0, 1], got {self.w}")


@dataclass(frozen=True)
class Edge:
    node_a: int
    node_b: int
    params: DualTransportParams

    def __post_init__(self):
        if self.node_a == self.node_b:
            raise ValidationError(f"self-loop edge at node {self.node_a}")


@dataclass(frozen=True)
class Terminals:
    input1: int
    input2: int
    ground: int

    def __post_init__(self):
        if len({self.input1, self.input2, self.ground}) != 3:
            raise ValidationError("terminal nodes must be distinct")


@dataclass(frozen=True)
class NetworkTopology:
    node_count: int
    edges: Tuple[Edge, ...]
    terminals: Terminals
    channels: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "channels", tuple(tuple(c) for c in self.channels))
        if self.node_count < 2:
            raise ValidationError(f"node_count must be >= 2, got {self.node_count}")
        for e in self.edges:
            for n in (e.node_a, e.node_b):
                if not (0 <= n < self.node_count):
                    raise ValidationError(f"edge node {n} out of range 0..{self.node_count - 1}")
        for t in (self.terminals.input1, self.terminals.input2, self.terminals.ground):
            if not (0 <= t < self.node_count):
                raise ValidationError(f"terminal node {t} out of range")
        for pos, neg in self.channels:
            for n in (pos, neg):
                if not (0 <= n < self.node_count):
                    raise ValidationError(f"channel node {n} out of range")
        reach = self._reachable_from(self.terminals.ground)
        for name in TERMINAL_NAMES:
            t = getattr(self.terminals, name)
            if t not in reach:
                raise ValidationError(f"terminal {name} (node {t}) has no conductive path to ground")

    def _reachable_from(self, start: int) -> set:
        adj: Dict[int, List[int]] = {}
        for e in self.edges:
            adj.setdefault(e.node_a, []).append(e.node_b)
            adj.setdefault(e.node_b, []).append(e.node_a)
        seen = {start}
        queue = deque([start])
        while queue:
            n = queue.popleft()
            for m in adj.get(n, ()):
                if m not in seen:
                    seen.add(m)
                    queue.append(m)
        return seen


@dataclass(frozen=True)
class SimConfig:
    dt_s: float = 1.0
    duration_s: float = 8000.0
    newton_tol_V: float = 1e-9
    newton_max_iter: int = 50
    w_initial: float = 0.0

    def __post_init__(self):
        if not (self.dt_s > 0):
            raise ValidationError(f"dt_s must be positive, got {self.dt_s}")
        if not (self.duration_s > 0):
            raise ValidationError(f"duration_s must be positive, got {self.duration_s}")
        if not (self.newton_tol_V > 0):
            raise ValidationError(f"newton_tol_V must be positive, got {self.newton_tol_V}")
        if self.newton_max_iter < 1:
            raise ValidationError(f"newton_max_iter must be >= 1, got {self.newton_max_iter}")
        if not (0.0 <= self.w_initial <= 1.0):
            raise ValidationError(f"w_initial must be in [0, 1], got {self.w_initial}")


def slow_activation(x: float) -> float:
    """Saturating activation sigma(x) = x^2 / (1 + x^2)."""
    return x * x / (1.0 + x * x)


def edge_current(v_V: float, w: float, p: DualTransportParams) -> float:
    """Edge current in amperes for branch voltage v_V and slow state w."""
    g = p.g_fast_S + p.g_slow_S * w
    return g * (v_V + p.alpha2_per_V * v_V**2 + p.alpha3_per_V2 * v_V**3)


def state_derivative(v_V: float, w: float, p: DualTransportParams) -> float:
    """dw/dt (1/s): first-order relaxation toward sigma(|v| / v_half)."""
    return (slow_activation(abs(v_V) / p.v_half_V) - w) / p.tau_s


def default_params() -> DualTransportParams:
    """Injection-edge parameters for the stock network (config data)."""
    return DualTransportParams()


def default_topology(params: Optional[DualTransportParams] = None) -> NetworkTopology:
    """Stock two-path network with heterogeneous edges.

    Nodes: 0 input1, 1 input2, 2 center, 3 sense A, 4 sense B, 5 ground.
    Both injection terminals couple to a shared center node through
    slow-transport-dominated edges: at drive periods well above tau the
    activation tracks the instantaneous voltage and the coupling conductance
    expands with signal level, which distorts slow drives strongly and fast
    drives barely.  Branch A (center - sense A - ground) is a stiff, nearly
    linear pair that loads the center; branch B (center - sense B - ground)
    is a light sensing divider whose upper edge saturates at much lower
    voltage, compounding the distortion of the center voltage.

    Channel 0 measures (sense A - sense B), channel 1 (center - sense B).
    Passing params replaces the injection-edge law (the rest of the network
    scales from it) for quick what-if runs.
    """
    inj = params if params is not None else default_params()
    ref = DualTransportParams(10e-6, 0.1e-6, inj.tau_s, inj.alpha2_per_V, inj.alpha3_per_V2, 3.0)
    exp_top = DualTransportParams(
        0.05e-6, 3e-6, inj.tau_s, inj.alpha2_per_V, inj.alpha3_per_V2, 0.5
    )
    exp_bot = DualTransportParams(2e-6, 0.05e-6, inj.tau_s, inj.alpha2_per_V, inj.alpha3_per_V2, 3.0)
    edges = (
        Edge(0, 2, inj),
        Edge(1, 2, inj),
        Edge(2, 3, ref),
        Edge(3, 5, ref),
        Edge(2, 4, exp_top),
        Edge(4, 5, exp_bot),
    )
    return NetworkTopology(
        node_count=6,
        edges=edges,
        terminals=Terminals(input1=0, input2=1, ground=5),
        channels=((3, 4), (2, 4)),
    )


def simulate(
    top: NetworkTopology,
    drives: Dict[str, TimeSeries],
    cfg: SimConfig,
    initial_states: Optional[Sequence[EdgeState]] = None,
) -> Dict[int, TimeSeries]:
    """Run the transient solver and return one TimeSeries per channel index.

    drives maps terminal names ("input1", "input2") to prescribed voltage
    records; undriven input terminals float.  The ground terminal is held at
    0 V.  All drive series must share dt (equal to cfg.dt_s) and length.
    """
    if not drives:
        raise ValidationError("at least one terminal must be driven")
    for name in drives:
        if name not in TERMINAL_NAMES:
            raise ValidationError(f"unknown drive terminal {name!r}, expected one of {TERMINAL_NAMES}")

    series = list(drives.values())
    n_steps = len(series[0])
    for ts in series:
        if len(ts) != n_steps:
            raise ValidationError("drive series must share the same length")
        if not math.isclose(ts.dt_s, cfg.dt_s, rel_tol=1e-12):
            raise ValidationError(f"drive dt_s={ts.dt_s} differs from cfg.dt_s={cfg.dt_s}")

    if initial_states is not None:
        if len(initial_states) != len(top.edges):
            raise ValidationError(
                f"initial_states has {len(initial_states)} entries for {len(top.edges)} edges"
            )
        w0 = np.array([s.w for s in initial_states])
    else:
        w0 = np.full(len(top.edges), cfg.w_initial)

    fixed_nodes = [top.terminals.ground]
    fixed_rows = [np.zeros(n_steps)]
    for name in TERMINAL_NAMES:
        if name in drives:
            fixed_nodes.append(getattr(top.terminals, name))
            fixed_rows.append(drives[name].samples)
    fixed_idx = np.array(fixed_nodes, dtype=np.intp)
    fixed_v = np.ascontiguousarray(np.vstack(fixed_rows))
    free_idx = np.array(
        [n for n in range(top.node_count) if n not in set(fixed_nodes)], dtype=np.intp
    )

    edge_a = np.array([e.node_a for e in top.edges], dtype=np.intp)
    edge_b = np.array([e.node_b for e in top.edges], dtype=np.intp)

    def pvec(attr: str) -> np.ndarray:
        return np.array([getattr(e.params, attr) for e in top.edges])

    volts, _w_final, status, fail_step = _kernel.run_transient(
        edge_a,
        edge_b,
        pvec("g_fast_S"),
        pvec("g_slow_S"),
        pvec("tau_s"),
        pvec("alpha2_per_V"),
        pvec("alpha3_per_V2"),
        pvec("v_half_V"),
        w0,
        free_idx,
        fixed_idx,
        fixed_v,
        top.node_count,
        cfg.dt_s,
        cfg.newton_tol_V,
        cfg.newton_max_iter,
    )
    if status == _kernel.STATUS_NO_CONVERGENCE:
        raise NewtonConvergenceError(fail_step, cfg.newton_max_iter)
    if status == _kernel.STATUS_SINGULAR:
        raise SingularNodalSystemError(fail_step)

    t0 = series[0].t0_s
    return {
        i: TimeSeries(cfg.dt_s, volts[:, pos] - volts[:, neg], t0)
        for i, (pos, neg) in enumerate(top.channels)
    }
