"""DC operating points, transient simulation and waveform analysis.

The continuous state of a circuit is the vector of balloon volumes. All
other node pressures are algebraic: between valve transitions the flow
network is linear, so free-node pressures come from one conductance-matrix
solve per regime and the balloon volumes integrate the resulting inflows.
Valve switching is handled as discrete events, localized by bisection and
followed by an integrator restart, so traces are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from .elements import (
    Balloon,
    BalloonParams,
    KinkValveDevice,
    PneumaticNetwork,
    ValveState,
    balloon_pressure,
    is_burst,
    valve_step,
)
from .errors import (
    AstableCircuitError,
    CalibrationFailedError,
    NonConvergenceError,
    NoOscillationError,
    SingularNetworkError,
    TooManyValvesError,
)

KPA = 1.0e3

#: above this many nodes the DC solve switches to sparse factorization
_DENSE_LIMIT = 400

#: exhaustive valve-state enumeration is capped at 2**16 assignments
_MAX_ENUM_VALVES = 16


# ---------------------------------------------------------------------------
# configuration and result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Transient run settings. Tolerances are on the SI volume state."""

    t_end: float
    rtol: float = 1.0e-6
    atol: float = 1.0e-9
    max_step: float = 0.01
    event_tol: float = 1.0e-6  # seconds; valve flips are located this tightly
    sample_interval: float = 1.0e-3
    probes: tuple[str, ...] | None = None
    initial_valve_states: dict[str, ValveState] | None = None
    initial_pressures_kpa: dict[str, float] | None = None

    def __post_init__(self):
        for name in ("t_end", "rtol", "atol", "max_step", "event_tol", "sample_interval"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"SimConfig.{name} must be positive")


@dataclass(frozen=True)
class Trace:
    """Sampled node pressures plus the valve transition log."""

    probes: tuple[str, ...]
    times: np.ndarray                       # strictly increasing, seconds
    pressures_kpa: np.ndarray               # shape (len(times), len(probes))
    events: tuple[tuple[float, str, ValveState], ...]
    warnings: tuple[str, ...] = ()

    def column(self, probe: str) -> np.ndarray:
        return self.pressures_kpa[:, self.probes.index(probe)]

    def to_csv(self) -> str:
        """Render the samples as CSV with LF line endings."""
        header = "time_s," + ",".join(f"{p}_kPa" for p in self.probes)
        lines = [header]
        for i in range(len(self.times)):
            row = [repr(float(self.times[i]) + 0.0)]
            row += [repr(float(x) + 0.0) for x in self.pressures_kpa[i]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SteadyState:
    valve_states: dict[str, ValveState]
    node_pressures_kpa: dict[str, float]
    converged: bool = True
    #: every self-consistent assignment found when enumeration ran
    fixed_points: tuple[dict[str, ValveState], ...] = ()


@dataclass(frozen=True)
class OscillationReport:
    probe: str
    frequency_hz: float
    duty: float
    peaks_kpa: dict[str, float]
    troughs_kpa: dict[str, float]
    phase_deg: dict[str, float]
    cycles: int
    assumptions: tuple[str, ...] = ()


@dataclass(frozen=True)
class CalibrationResult:
    compliance: float
    open_conductance: float
    frequency_hz: float
    peak_kpa: float
    target_frequency_hz: float
    target_peak_kpa: float
    iterations: int
    notes: tuple[str, ...] = ()

    @property
    def relative_errors(self) -> tuple[float, float]:
        return (
            abs(self.frequency_hz - self.target_frequency_hz) / self.target_frequency_hz,
            abs(self.peak_kpa - self.target_peak_kpa) / self.target_peak_kpa,
        )


# ---------------------------------------------------------------------------
# compiled form of a network
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ValveRef:
    name: str
    a: int
    b: int
    control: int
    g_open: float
    g_leak: float
    p_inflate: float
    p_deflate: float
    initial: ValveState


@dataclass(frozen=True)
class _CapRef:
    name: str
    node: int
    params: BalloonParams
    initial_kpa: float


class _Compiled:
    """Index-based view of a network for the linear solves."""

    def __init__(self, net: PneumaticNetwork):
        self.net = net
        nodes = net.node_order()
        virtual = [s.name + ".__src" for s in net.sources if s.internal_resistance > 0.0]
        self.nodes = nodes + virtual
        self.index = {n: i for i, n in enumerate(self.nodes)}
        self.n = len(self.nodes)

        fixed = dict(net.fixed_pressures())
        for s in net.sources:
            if s.internal_resistance > 0.0:
                fixed[s.name + ".__src"] = s.pressure_kpa
        self.fixed_idx = np.array([self.index[n] for n in fixed], dtype=int)
        self.fixed_pa = np.array([fixed[n] * KPA for n in fixed], dtype=float)

        # constant-conductance branches: tubes and source internal paths
        static = []
        for t in net.tubes:
            static.append((self.index[t.node_a], self.index[t.node_b], 1.0 / t.resistance))
        for s in net.sources:
            if s.internal_resistance > 0.0:
                static.append(
                    (self.index[s.name + ".__src"], self.index[s.node], 1.0 / s.internal_resistance)
                )
        self.static_branches = static

        self.valves = [
            _ValveRef(
                v.name,
                self.index[v.flow_from],
                self.index[v.flow_to],
                self.index[v.control_node],
                v.open_conductance,
                v.leak_conductance,
                v.thresholds.p_inflate,
                v.thresholds.p_deflate,
                v.state,
            )
            for v in net.valves
        ]
        self.caps = [
            _CapRef(name, self.index[node], params, init)
            for name, node, params, init in net.capacitances()
        ]
        cap_set = {c.node for c in self.caps}
        fixed_set = set(self.fixed_idx.tolist())
        self.free_idx = np.array(
            [i for i in range(self.n) if i not in cap_set and i not in fixed_set], dtype=int
        )
        self.cap_idx = np.array([c.node for c in self.caps], dtype=int)
        self._regimes: dict[tuple[ValveState, ...], _Regime] = {}

    # -- assembly ------------------------------------------------------------

    def _branches(self, states: tuple[ValveState, ...]):
        branches = list(self.static_branches)
        for v, s in zip(self.valves, states):
            g = v.g_open if s is ValveState.OPEN else v.g_leak
            if g > 0.0:
                branches.append((v.a, v.b, g))
        return branches

    def laplacian(self, states: tuple[ValveState, ...]) -> np.ndarray:
        L = np.zeros((self.n, self.n))
        for a, b, g in self._branches(states):
            L[a, a] += g
            L[b, b] += g
            L[a, b] -= g
            L[b, a] -= g
        return L

    # -- DC solve (balloons act as open circuits) ------------------------------

    def components(self, branches) -> list[int]:
        """Union-find roots per node over the conducting branches."""
        parent = list(range(self.n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b, _g in branches:
            parent[find(a)] = find(b)
        return [find(i) for i in range(self.n)]

    def _isolated_cap_pins(self, roots) -> tuple[np.ndarray, np.ndarray]:
        """Balloon nodes with no conducting path to a fixed node, pinned at
        the compliance-weighted mean of their component's initial charges
        (the limit the component relaxes to with no external exchange)."""
        if not self.caps:
            return np.zeros(0, dtype=int), np.zeros(0)
        fixed_roots = {roots[int(i)] for i in self.fixed_idx}
        groups: dict[int, list[_CapRef]] = {}
        for c in self.caps:
            root = roots[c.node]
            if root not in fixed_roots:
                groups.setdefault(root, []).append(c)
        idx, pa = [], []
        for members in groups.values():
            c_total = sum(m.params.compliance for m in members)
            p_star = sum(m.params.compliance * m.initial_kpa for m in members) / c_total
            for m in members:
                idx.append(m.node)
                pa.append(p_star * KPA)
        return np.array(idx, dtype=int), np.array(pa)

    def dead_nodes(self, roots) -> np.ndarray:
        """Nodes sealed off from every fixed node and every balloon.

        A blocked tube segment holds trapped air; with no compliance in it
        the pressure carries no state and no flow crosses it, so these are
        reported at ambient rather than making the solve singular.
        """
        anchor_roots = {roots[int(i)] for i in self.fixed_idx}
        anchor_roots |= {roots[c.node] for c in self.caps}
        return np.array(
            [i for i in range(self.n) if roots[i] not in anchor_roots], dtype=int
        )

    def solve_dc(self, states: tuple[ValveState, ...]) -> np.ndarray:
        """Full node-pressure vector (Pa) with the given valve states.

        Balloons in components that reach a fixed node equilibrate (zero
        flow, so they are plain unknowns); balloons cut off from every
        fixed node keep their charge and pin their component instead.
        """
        branches = self._branches(states)
        roots = self.components(branches)
        pin_idx, pin_pa = self._isolated_cap_pins(roots)
        dead = self.dead_nodes(roots)
        known_idx = np.concatenate([self.fixed_idx, pin_idx, dead]).astype(int)
        known_pa = np.concatenate([self.fixed_pa, pin_pa, np.zeros(len(dead))])
        known_set = set(known_idx.tolist())
        unknown = np.array(
            [i for i in range(self.n) if i not in known_set], dtype=int
        )
        p = np.zeros(self.n)
        p[known_idx] = known_pa
        if len(unknown) == 0:
            return p
        if self.n <= _DENSE_LIMIT:
            L = self.laplacian(states)
            G = L[np.ix_(unknown, unknown)]
            rhs = -L[np.ix_(unknown, known_idx)] @ known_pa
            try:
                sol = np.linalg.solve(G, rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularNetworkError(f"flow-balance system is singular: {exc}") from exc
            residual = np.abs(G @ sol - rhs).max()
            scale = max(1.0, np.abs(rhs).max())
            if not np.isfinite(sol).all() or residual > 1.0e-6 * scale:
                raise SingularNetworkError("flow-balance system is numerically singular")
        else:
            pos = {int(u): k for k, u in enumerate(unknown)}
            rows, cols, vals = [], [], []
            rhs = np.zeros(len(unknown))
            fixed_map = {int(i): v for i, v in zip(known_idx, known_pa)}
            for a, b, g in branches:
                for x, y in ((a, b), (b, a)):
                    if x in pos:
                        rows.append(pos[x]); cols.append(pos[x]); vals.append(g)
                        if y in pos:
                            rows.append(pos[x]); cols.append(pos[y]); vals.append(-g)
                        else:
                            rhs[pos[x]] += g * fixed_map[y]
            G = coo_matrix((vals, (rows, cols)), shape=(len(unknown), len(unknown))).tocsc()
            sol = spsolve(G, rhs)
            if not np.isfinite(sol).all():
                raise SingularNetworkError("flow-balance system is numerically singular")
        p[unknown] = sol
        return p

    # -- transient regime (balloon nodes pinned by their volumes) -------------

    def regime(self, states: tuple[ValveState, ...]) -> "_Regime":
        reg = self._regimes.get(states)
        if reg is None:
            reg = _Regime(self, states)
            if len(self._regimes) < 4096:
                self._regimes[states] = reg
        return reg

    def initial_states(self, overrides: dict[str, ValveState] | None) -> tuple[ValveState, ...]:
        overrides = overrides or {}
        known = {v.name for v in self.valves}
        bad = sorted(set(overrides) - known)
        if bad:
            raise ValueError(f"unknown valve name(s) in initial states: {', '.join(bad)}")
        return tuple(overrides.get(v.name, v.initial) for v in self.valves)

    def initial_volumes(self, overrides: dict[str, float] | None) -> np.ndarray:
        overrides = overrides or {}
        known = {c.name for c in self.caps}
        bad = sorted(set(overrides) - known)
        if bad:
            raise ValueError(f"unknown balloon name(s) in initial pressures: {', '.join(bad)}")
        return np.array(
            [c.params.volume_at(overrides.get(c.name, c.initial_kpa)) for c in self.caps]
        )


class _Regime:
    """Factorized linear problem for one valve-state assignment."""

    def __init__(self, compiled: _Compiled, states: tuple[ValveState, ...]):
        self.c = compiled
        branches = compiled._branches(states)
        roots = compiled.components(branches)
        dead = set(compiled.dead_nodes(roots).tolist())
        L = compiled.laplacian(states)
        self.L = L
        # nodes sealed off in this regime carry no flow; they read ambient
        f = np.array([i for i in compiled.free_idx if i not in dead], dtype=int)
        self.f_live = f
        self.known_idx = np.concatenate([compiled.fixed_idx, compiled.cap_idx]).astype(int)
        self.L_fk = L[np.ix_(f, self.known_idx)] if len(f) else None
        self.lu = None
        if len(f):
            G = L[np.ix_(f, f)]
            try:
                self.lu = lu_factor(G)
            except Exception as exc:  # LinAlgError or ValueError on NaN
                raise SingularNetworkError(f"flow-balance system is singular: {exc}") from exc
        self.L_c = L[compiled.cap_idx, :] if len(compiled.cap_idx) else None

    def pressures_pa(self, cap_pa: np.ndarray) -> np.ndarray:
        """Full pressure vector given balloon-node pressures."""
        c = self.c
        p = np.zeros(c.n)
        p[c.fixed_idx] = c.fixed_pa
        p[c.cap_idx] = cap_pa
        if self.lu is not None:
            p_known = np.concatenate([c.fixed_pa, cap_pa])
            rhs = -(self.L_fk @ p_known)
            sol = lu_solve(self.lu, rhs)
            if not np.isfinite(sol).all():
                raise SingularNetworkError("flow-balance system is numerically singular")
            p[self.f_live] = sol
        return p

    def cap_inflow(self, p: np.ndarray) -> np.ndarray:
        """Net volumetric inflow (m3/s) into each balloon node."""
        if self.L_c is None:
            return np.zeros(0)
        return -(self.L_c @ p)


def _cap_pressures_kpa(compiled: _Compiled, volumes: np.ndarray) -> np.ndarray:
    return np.array(
        [balloon_pressure(v, c.params) for v, c in zip(volumes, compiled.caps)]
    )


# ---------------------------------------------------------------------------
# DC operating point
# ---------------------------------------------------------------------------


def _stable_assignment(compiled: _Compiled, states, p_pa) -> bool:
    for v, s in zip(compiled.valves, states):
        ctrl = p_pa[v.control] / KPA
        thr = _thr(v)
        if valve_step(s, ctrl, thr) is not s:
            return False
    return True


def _thr(v: _ValveRef):
    from .elements import HysteresisThresholds

    return HysteresisThresholds(p_inflate=v.p_inflate, p_deflate=v.p_deflate)


def dc_operating_point(
    net: PneumaticNetwork,
    initial_states: dict[str, ValveState] | None = None,
) -> SteadyState:
    """Find a valve-state assignment consistent with its own pressures.

    Starts with a synchronous fixed-point iteration from the initial
    states; if that cycles, falls back to exhaustive enumeration of all
    assignments (up to 16 valves). Multiple fixed points are all listed,
    with the first in enumeration order reported as the operating point
    when the iteration itself did not converge.

    Raises AstableCircuit when no assignment is self-consistent, Singular
    when the flow-balance system cannot be solved uniquely, and
    TooManyValves when enumeration would be needed but is intractable.
    """
    net.validate()
    compiled = _Compiled(net)
    states = compiled.initial_states(initial_states)
    nv = len(compiled.valves)

    def result(states, p_pa, fixed_points=()):
        pressures = {
            n: p_pa[i] / KPA for n, i in compiled.index.items() if not n.endswith(".__src")
        }
        named = {v.name: s for v, s in zip(compiled.valves, states)}
        fps = tuple({v.name: s for v, s in zip(compiled.valves, fp)} for fp in fixed_points)
        return SteadyState(named, pressures, True, fps)

    seen = set()
    while states not in seen:
        seen.add(states)
        p_pa = compiled.solve_dc(states)
        new = tuple(
            valve_step(s, p_pa[v.control] / KPA, _thr(v))
            for v, s in zip(compiled.valves, states)
        )
        if new == states:
            return result(states, p_pa)
        states = new

    # iteration cycled; enumerate every assignment
    if nv > _MAX_ENUM_VALVES:
        raise TooManyValvesError(
            f"{nv} valves exceed the exhaustive search cap of {_MAX_ENUM_VALVES}"
        )
    fixed_points = []
    solutions = {}
    for assign in product((ValveState.OPEN, ValveState.CLOSED), repeat=nv):
        try:
            p_pa = compiled.solve_dc(assign)
        except SingularNetworkError:
            continue  # a floating regime cannot be an operating point
        if _stable_assignment(compiled, assign, p_pa):
            fixed_points.append(assign)
            solutions[assign] = p_pa
    if not fixed_points:
        raise AstableCircuitError(
            "no self-consistent valve-state assignment exists; the circuit is astable at DC"
        )
    chosen = fixed_points[0]
    return result(chosen, solutions[chosen], fixed_points)


def solve_pressures(
    net: PneumaticNetwork, valve_states: dict[str, ValveState]
) -> dict[str, float]:
    """Node pressures (kPa) for a forced valve-state assignment.

    No fixed-point search: the given states are taken as-is. Useful for
    worst-case analyses where valves are held in a particular state.
    """
    net.validate()
    compiled = _Compiled(net)
    states = compiled.initial_states(valve_states)
    p_pa = compiled.solve_dc(states)
    return {n: p_pa[i] / KPA for n, i in compiled.index.items() if not n.endswith(".__src")}


def branch_flows(
    net: PneumaticNetwork,
    valve_states: dict[str, ValveState],
    pressures_kpa: dict[str, float],
) -> dict[str, float]:
    """Flow (m3/s) through every element at the given pressures."""
    from .elements import element_flow

    flows = {}
    for t in net.tubes:
        flows[t.name] = element_flow(t, pressures_kpa[t.node_a], pressures_kpa[t.node_b])
    for v in net.valves:
        flows[v.name] = element_flow(
            v, pressures_kpa[v.flow_from], pressures_kpa[v.flow_to], valve_states[v.name]
        )
    for s in net.sources:
        if s.internal_resistance > 0.0:
            flows[s.name] = (
                (s.pressure_kpa - pressures_kpa[s.node]) * KPA / s.internal_resistance
            )
    return flows


def node_residuals(
    net: PneumaticNetwork,
    valve_states: dict[str, ValveState],
    pressures_kpa: dict[str, float],
) -> dict[str, float]:
    """Net inflow (m3/s) at every non-fixed node; ~0 at an operating point."""
    flows = branch_flows(net, valve_states, pressures_kpa)
    acc = {n: 0.0 for n in net.node_order()}
    for t in net.tubes:
        acc[t.node_a] -= flows[t.name]
        acc[t.node_b] += flows[t.name]
    for v in net.valves:
        acc[v.flow_from] -= flows[v.name]
        acc[v.flow_to] += flows[v.name]
    for s in net.sources:
        if s.internal_resistance > 0.0:
            acc[s.node] += flows[s.name]
    for n in net.fixed_pressures():
        acc.pop(n, None)
    return acc


# ---------------------------------------------------------------------------
# transient simulation
# ---------------------------------------------------------------------------

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


class _Integrator:
    """One regime's ODE right-hand side with burst tracking."""

    def __init__(self, compiled: _Compiled, regime: _Regime):
        self.compiled = compiled
        self.regime = regime

    def pressures(self, volumes: np.ndarray) -> np.ndarray:
        cap_kpa = _cap_pressures_kpa(self.compiled, volumes)
        return self.regime.pressures_pa(cap_kpa * KPA)

    def deriv(self, volumes: np.ndarray) -> np.ndarray:
        p = self.pressures(volumes)
        dv = self.regime.cap_inflow(p)
        for i, vol in enumerate(volumes):
            if vol <= 0.0 and dv[i] < 0.0:
                dv[i] = 0.0  # an empty balloon cannot lose more air
        return dv


def _rk_step(f, y, h, k1):
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kk for a, kk in zip(_A[i], k))
        k.append(f(yi))
    y5 = y + h * sum(b * kk for b, kk in zip(_B5, k) if b != 0.0)
    err = h * sum(e * kk for e, kk in zip(_E, k) if e != 0.0)
    return y5, err, k[6]  # k7 equals f(t+h, y5): reused as next k1


def _hermite(y0, y1, f0, f1, h, tau):
    t2 = tau * tau
    t3 = t2 * tau
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + tau
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _crossing(v: _ValveRef, state: ValveState, ctrl_kpa: float) -> float:
    """Positive once the pending transition's threshold is met."""
    if state is ValveState.OPEN:
        return ctrl_kpa - v.p_inflate
    return v.p_deflate - ctrl_kpa


def simulate(net: PneumaticNetwork, cfg: SimConfig) -> Trace:
    """Integrate the circuit and return a sampled Trace.

    Balloon volumes are advanced with an adaptive embedded Runge-Kutta
    pair; valve transitions are located by bisection inside the step that
    brackets them, the step is retaken up to the event time, the valve
    state flips, and integration restarts. Samples land on a regular grid
    plus a pre/post pair at each event so switching edges stay sharp.
    The run is deterministic: identical inputs give identical traces.
    """
    net.validate()
    compiled = _Compiled(net)
    probes = cfg.probes if cfg.probes is not None else net.probes
    if not probes:
        raise ValueError("no probes: set PneumaticNetwork.probes or SimConfig.probes")
    missing = [p for p in probes if p not in compiled.index]
    if missing:
        raise ValueError(f"unknown probe node(s): {', '.join(missing)}")
    probe_idx = np.array([compiled.index[p] for p in probes], dtype=int)

    states = compiled.initial_states(cfg.initial_valve_states)
    volumes = compiled.initial_volumes(cfg.initial_pressures_kpa)

    times: list[float] = []
    rows: list[np.ndarray] = []
    events: list[tuple[float, str, ValveState]] = []
    warnings: list[str] = []
    burst_seen: set[str] = set()

    def emit(t: float, p_pa: np.ndarray) -> None:
        if times and t <= times[-1]:
            return
        times.append(t)
        rows.append(p_pa[probe_idx] / KPA)

    def check_burst(t: float, volumes: np.ndarray) -> None:
        for c, vol in zip(compiled.caps, volumes):
            if c.name in burst_seen:
                continue
            p = balloon_pressure(vol, c.params)
            if is_burst(p, c.params):
                burst_seen.add(c.name)
                warnings.append(
                    f"balloon {c.name} passed its burst pressure "
                    f"({c.params.burst_kpa} kPa) at t={t:.6g} s"
                )

    def settle(t: float, states, integ) -> tuple[tuple[ValveState, ...], "_Integrator"]:
        """Apply valve_step until self-consistent, logging transitions.

        Control pressures sitting on balloons cannot react to flips, so
        this terminates immediately for gate-style circuits; free-node
        controls get a bounded relaxation.
        """
        for _ in range(4 * max(1, len(compiled.valves))):
            p = integ.pressures(volumes)
            new = tuple(
                valve_step(s, p[v.control] / KPA, _thr(v))
                for v, s in zip(compiled.valves, states)
            )
            if new == states:
                return states, integ
            for v, old, cur in zip(compiled.valves, states, new):
                if old is not cur:
                    events.append((t, v.name, cur))
            states = new
            integ = _Integrator(compiled, compiled.regime(states))
        return states, integ

    integ = _Integrator(compiled, compiled.regime(states))
    states, integ = settle(0.0, states, integ)

    t = 0.0
    p0 = integ.pressures(volumes)
    emit(0.0, p0)
    check_burst(0.0, volumes)
    next_sample = cfg.sample_interval

    k1 = integ.deriv(volumes)
    h = min(cfg.max_step, cfg.t_end / 100.0, cfg.sample_interval)
    min_h = max(1.0e-14, 2.0 * np.finfo(float).eps * cfg.t_end)

    while t < cfg.t_end:
        h = min(h, cfg.t_end - t)
        if h < min_h:
            raise NonConvergenceError(f"step size underflow at t={t!r}")

        y1, err, k7 = _rk_step(integ.deriv, volumes, h, k1)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(volumes), np.abs(y1))
        if len(scale):
            errnorm = float(np.sqrt(np.mean((err / scale) ** 2)))
        else:
            errnorm = 0.0
        if errnorm > 1.0:
            h *= max(0.2, 0.9 * errnorm ** -0.2)
            continue

        p1 = integ.pressures(y1)
        # scan for valve transitions across this step
        crossers = []
        for vi, (v, s) in enumerate(zip(compiled.valves, states)):
            c0 = _crossing(v, s, p0[v.control] / KPA)
            c1 = _crossing(v, s, p1[v.control] / KPA)
            if c0 < 0.0 <= c1:
                crossers.append((vi, c0, c1))
            elif c0 >= 0.0:
                crossers.append((vi, c0, c0))  # already past threshold at step start

        if crossers:
            # bisect each crossing on the Hermite interpolant of the step
            def ctrl_at(tau: float) -> np.ndarray:
                vols = _hermite(volumes, y1, k1, k7, h, tau)
                return integ.pressures(np.maximum(vols, 0.0))

            t_events = []
            for vi, c0, c1 in crossers:
                v = compiled.valves[vi]
                if c0 >= 0.0:
                    t_events.append((0.0, vi))
                    continue
                lo, hi = 0.0, 1.0
                while (hi - lo) * h > cfg.event_tol:
                    mid = 0.5 * (lo + hi)
                    cm = _crossing(v, states[vi], ctrl_at(mid)[v.control] / KPA)
                    if cm >= 0.0:
                        hi = mid
                    else:
                        lo = mid
                t_events.append((hi, vi))
            tau_star = min(te for te, _ in t_events)
            flip_set = [vi for te, vi in t_events if (te - tau_star) * h <= cfg.event_tol]

            t_event = t + tau_star * h
            if tau_star > 0.0:
                y_e, _, k_e = _rk_step(integ.deriv, volumes, tau_star * h, k1)
            else:
                y_e, k_e = volumes.copy(), k1
            # regular samples up to the event
            while next_sample < t_event - 1.0e-15:
                tau_s = (next_sample - t) / h
                vols = np.maximum(_hermite(volumes, y1, k1, k7, h, tau_s), 0.0)
                emit(next_sample, integ.pressures(vols))
                next_sample += cfg.sample_interval
            p_pre = integ.pressures(np.maximum(y_e, 0.0))
            emit(t_event, p_pre)

            new_states = list(states)
            for vi in flip_set:
                v = compiled.valves[vi]
                cur = states[vi]
                nxt = ValveState.CLOSED if cur is ValveState.OPEN else ValveState.OPEN
                new_states[vi] = nxt
                events.append((t_event, v.name, nxt))
            states = tuple(new_states)
            integ = _Integrator(compiled, compiled.regime(states))
            states, integ = settle(t_event, states, integ)

            t = t_event
            volumes = np.maximum(y_e, 0.0)
            p0 = integ.pressures(volumes)
            emit(t + min(cfg.event_tol, cfg.sample_interval / 8.0), p0)
            check_burst(t, volumes)
            k1 = integ.deriv(volumes)
            h = min(cfg.max_step, max(h, min_h))
            continue

        # no event: commit the step, emit any samples inside it
        t1 = t + h
        while next_sample <= t1 + 1.0e-15 and next_sample <= cfg.t_end:
            tau_s = (next_sample - t) / h
            vols = np.maximum(_hermite(volumes, y1, k1, k7, h, tau_s), 0.0)
            emit(next_sample, integ.pressures(vols))
            next_sample += cfg.sample_interval
        t = t1
        volumes = y1
        p0 = p1
        k1 = k7
        check_burst(t, volumes)
        if errnorm == 0.0:
            h = min(h * 5.0, cfg.max_step)
        else:
            h = min(h * min(5.0, 0.9 * errnorm ** -0.2), cfg.max_step)

    emit(cfg.t_end, p0)
    return Trace(
        probes=tuple(probes),
        times=np.array(times),
        pressures_kpa=np.array(rows) if rows else np.zeros((0, len(probes))),
        events=tuple(events),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# waveform analysis
# ---------------------------------------------------------------------------


def _rising_crossings(t: np.ndarray, y: np.ndarray, level: float) -> np.ndarray:
    idx = np.nonzero((y[:-1] < level) & (y[1:] >= level))[0]
    if len(idx) == 0:
        return np.zeros(0)
    frac = (level - y[idx]) / (y[idx + 1] - y[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def extract_frequency(
    trace: Trace, probe: str, min_amplitude_kpa: float = 1.0
) -> OscillationReport:
    """Estimate frequency, per-cycle extrema, duty and phase offsets.

    The first 20% of the trace is dropped as startup transient. Frequency
    is the reciprocal of the mean interval between rising crossings of the
    midline; fewer than 3 crossings, or a peak-to-trough span under
    ``min_amplitude_kpa``, raises NoOscillation. Peaks and troughs are
    averaged over cycles; phases of the other probes are reported in
    degrees relative to ``probe``.
    """
    if probe not in trace.probes:
        raise ValueError(f"probe {probe!r} not in trace")
    if len(trace.times) < 2:
        raise ValueError("trace needs at least two samples")
    t = np.asarray(trace.times, dtype=float)
    start = t[0] + 0.2 * (t[-1] - t[0])
    keep = t >= start
    t = t[keep]
    ref = np.asarray(trace.column(probe), dtype=float)[keep]
    if len(t) < 2:
        raise NoOscillationError("trace too short after transient removal")

    span = float(ref.max() - ref.min())
    if span < min_amplitude_kpa:
        raise NoOscillationError(
            f"peak-to-trough span {span:.3g} kPa is below the "
            f"{min_amplitude_kpa:.3g} kPa oscillation floor"
        )
    mid = 0.5 * float(ref.max() + ref.min())
    crossings = _rising_crossings(t, ref, mid)
    if len(crossings) < 3:
        raise NoOscillationError(
            f"only {len(crossings)} midline crossings; need at least 3"
        )
    period = float(np.mean(np.diff(crossings)))
    frequency = 1.0 / period

    # duty: fraction of time the reference spends above its midline
    above = ref > mid
    seg = np.diff(t)
    w = 0.5 * (above[:-1].astype(float) + above[1:].astype(float))
    duty = float(np.sum(seg * w) / np.sum(seg))

    peaks: dict[str, float] = {}
    troughs: dict[str, float] = {}
    phases: dict[str, float] = {}
    cycle_edges = crossings
    for name in trace.probes:
        y = np.asarray(trace.column(name), dtype=float)[keep]
        cyc_max, cyc_min = [], []
        for a, b in zip(cycle_edges[:-1], cycle_edges[1:]):
            m = (t >= a) & (t < b)
            if m.any():
                cyc_max.append(float(y[m].max()))
                cyc_min.append(float(y[m].min()))
        peaks[name] = float(np.mean(cyc_max)) if cyc_max else float(y.max())
        troughs[name] = float(np.mean(cyc_min)) if cyc_min else float(y.min())
        if name == probe:
            phases[name] = 0.0
            continue
        own_mid = 0.5 * float(y.max() + y.min())
        own = _rising_crossings(t, y, own_mid)
        if len(own) == 0:
            phases[name] = float("nan")
            continue
        # circular mean of the offsets from the latest reference crossing
        deltas = []
        for tc in own:
            prior = crossings[crossings <= tc]
            if len(prior):
                deltas.append(((tc - prior[-1]) % period) / period * 2.0 * math.pi)
        if not deltas:
            phases[name] = float("nan")
        else:
            s = np.mean(np.sin(deltas))
            c = np.mean(np.cos(deltas))
            phases[name] = float(math.degrees(math.atan2(s, c)) % 360.0)

    return OscillationReport(
        probe=probe,
        frequency_hz=frequency,
        duty=duty,
        peaks_kpa=peaks,
        troughs_kpa=troughs,
        phase_deg=phases,
        cycles=len(crossings) - 1,
    )


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationBounds:
    compliance: tuple[float, float] = (5.0e-11, 1.0e-8)
    open_conductance: tuple[float, float] = (1.0e-8, 1.0e-3)


def _measure(
    net: PneumaticNetwork,
    probe: str,
    f_hint: float,
    min_amplitude_kpa: float,
) -> OscillationReport | None:
    cycles = 24.0
    t_end = cycles / f_hint
    cfg = SimConfig(
        t_end=t_end,
        sample_interval=1.0 / (f_hint * 250.0),
        max_step=0.02 / f_hint,
    )
    trace = simulate(net, cfg)
    try:
        return extract_frequency(trace, probe, min_amplitude_kpa)
    except NoOscillationError:
        return None


def calibrate_oscillator(
    template: PneumaticNetwork,
    target_frequency_hz: float,
    target_peak_kpa: float,
    probe: str | None = None,
    bounds: CalibrationBounds = CalibrationBounds(),
    tolerance: float = 0.02,
    min_amplitude_kpa: float = 1.0,
) -> CalibrationResult:
    """Fit balloon compliance and valve open conductance to measurements.

    Free parameters are applied uniformly to every balloon and valve in
    the template. Peak amplitude at the probe depends (in steady state)
    on the conductance alone, while the period scales linearly with
    compliance, so the search alternates a bisection on conductance
    against the peak target with a direct rescale of the compliance
    against the frequency target. Raises CalibrationFailed, carrying the
    best result found, if both targets cannot be met within ``tolerance``
    relative error.
    """
    if target_frequency_hz <= 0.0 or target_peak_kpa <= 0.0:
        raise ValueError("calibration targets must be positive")
    if probe is None:
        if not template.probes:
            raise ValueError("template has no probes")
        probe = template.probes[0]

    c_lo, c_hi = bounds.compliance
    g_lo, g_hi = bounds.open_conductance
    compliance = min(max(template_compliance(template), c_lo), c_hi)
    notes = (
        "peak fitted at the declared probe node; the bench measurement point "
        "is downstream of the pull-down resistance, not at the valve outlet",
        "valve reopening threshold (p_deflate) is a modeling assumption",
    )

    best: CalibrationResult | None = None
    f_hint = target_frequency_hz

    def evaluate(c: float, g: float) -> OscillationReport | None:
        nonlocal f_hint
        net = template.with_uniform_params(compliance=c, open_conductance=g)
        # the real period may be far from the hint; widen the window twice
        for f_try in (f_hint, f_hint / 8.0, f_hint / 64.0):
            rep = _measure(net, probe, f_try, min_amplitude_kpa)
            if rep is not None:
                f_hint = rep.frequency_hz
                return rep
        return None

    iterations = 0
    for _outer in range(4):
        # 1) bisect the conductance against the peak target
        lo, hi = g_lo, g_hi
        rep_hi = evaluate(compliance, hi)
        iterations += 1
        if rep_hi is None:
            break
        if rep_hi.peaks_kpa[probe] <= target_peak_kpa:
            g = hi  # peak target at or above what the network can do
            rep = rep_hi
        else:
            rep = rep_hi
            g = hi
            for _ in range(40):
                mid = math.sqrt(lo * hi)  # geometric: conductance spans decades
                rep_mid = evaluate(compliance, mid)
                iterations += 1
                if rep_mid is None or rep_mid.peaks_kpa[probe] < target_peak_kpa:
                    lo = mid
                else:
                    hi, g, rep = mid, mid, rep_mid
                if abs(rep.peaks_kpa[probe] - target_peak_kpa) <= 0.25 * tolerance * target_peak_kpa:
                    break
                if hi / lo < 1.0 + 1.0e-6:
                    break

        # 2) the period scales with compliance: rescale and verify
        compliance = min(max(compliance * rep.frequency_hz / target_frequency_hz, c_lo), c_hi)
        rep = evaluate(compliance, g)
        iterations += 1
        if rep is None:
            break
        result = CalibrationResult(
            compliance=compliance,
            open_conductance=g,
            frequency_hz=rep.frequency_hz,
            peak_kpa=rep.peaks_kpa[probe],
            target_frequency_hz=target_frequency_hz,
            target_peak_kpa=target_peak_kpa,
            iterations=iterations,
            notes=notes,
        )
        if best is None or sum(x * x for x in result.relative_errors) < sum(
            x * x for x in best.relative_errors
        ):
            best = result
        ef, ep = result.relative_errors
        if ef <= tolerance and ep <= tolerance:
            return result

    msg = "calibration could not reach the requested targets"
    if best is not None:
        ef, ep = best.relative_errors
        msg += (
            f": best fit {best.frequency_hz:.4g} Hz / {best.peak_kpa:.4g} kPa "
            f"(relative errors {ef:.2%} / {ep:.2%})"
        )
    raise CalibrationFailedError(msg, best=best)


def template_compliance(net: PneumaticNetwork) -> float:
    """The compliance shared by the template's balloons (first one found)."""
    for v in net.valves:
        if v.balloon is not None:
            return v.balloon.compliance
    for b in net.balloons:
        return b.params.compliance
    raise ValueError("network has no balloons to calibrate")
