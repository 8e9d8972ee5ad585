"""Transient-fault injection and sensitivity analysis.

A transient fault is an X-pulse: a pair of external events driving a signal to
X and, a pulse width later, back to its fault-free value.  The circuit is
susceptible to a fault if the fault makes a monitored signal attain X.

Susceptible times are located per value region of the fault-free execution
(the interval between two consecutive value-switching times): within a region
the susceptible times form a postfix, so one bisection per region finds the
boundary to the stated resolution, far cheaper than scanning a time grid.
The grid scan is kept as ``analyze_naive`` and doubles as the test oracle.
"""

from __future__ import annotations

import bisect as _bisect_mod
import math
import random
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .prs import Circuit, InputTraces, SignalTrace, Value, check_input_traces, trace_value_at
from .sim import (
    Execution,
    ExternalEvent,
    SimConfig,
    _compiled,
    _kernel,
    _prepare_inputs,
    execute,
)

DEFAULT_EPSILON = 0.1
DEFAULT_GAMMA = 0.1
DEFAULT_DELTA = 0.01

X_PULSE = "xpulse"
FLIP_PULSE = "flip"


class PostfixViolationWarning(UserWarning):
    """Susceptible times in a region were not a postfix at the probe width."""


@dataclass(frozen=True)
class Glitch:
    """A pulse of the given width injected at a signal at time ``at``."""

    signal: str
    at: float
    width: float
    kind: str = X_PULSE


@dataclass(frozen=True)
class ValueRegion:
    """Interval between consecutive value-switching times, left-closed."""

    start: float
    end: float
    index: int

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SensitivityWindow:
    """Susceptible sub-interval of one value region for one injection signal."""

    signal: str
    start: float
    end: float
    resolution: float

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SensitivityReport:
    horizon: float
    epsilon: float
    gamma: float
    delta: float
    monitored: tuple[str, ...]
    injected: tuple[str, ...]
    fault_kind: str
    windows: tuple[SensitivityWindow, ...]
    p_fail: float
    p_per_signal: Mapping[str, float]
    simulations: int


def trace_has_x(trace: SignalTrace) -> bool:
    return trace.initial is Value.X or any(v is Value.X for _, v in trace.transitions)


# --- fault construction -------------------------------------------------------


def make_transient(
    signal: str,
    at: float,
    width: float,
    kind: str,
    base_execution: Execution,
) -> tuple[ExternalEvent, ExternalEvent]:
    """Two external events forming a pulse at the signal.

    An X-pulse drives the signal to X and restores the value the fault-free
    execution holds when the pulse ends, so outside the pulse the overlay
    tracks the fault-free trace even across a switching time.  A flip-pulse
    drives the complement of the fault-free value at the pulse start and
    restores that value afterwards.
    """
    if at < 0:
        raise ValueError(f"pulse start must be nonnegative, got {at}")
    if width <= 0:
        raise ValueError(f"pulse width must be positive, got {width}")
    trace = base_execution.traces[signal]
    end = at + width
    if kind == X_PULSE:
        restore = trace_value_at(trace, min(end, trace.horizon))
        return (ExternalEvent(at, signal, Value.X), ExternalEvent(end, signal, restore))
    if kind == FLIP_PULSE:
        v = trace_value_at(trace, at)
        if not v.is_boolean:
            raise ValueError(f"flip-pulse at {signal}@{at}: pre-fault value is X, nothing to flip")
        flipped = Value.ONE if v is Value.ZERO else Value.ZERO
        return (ExternalEvent(at, signal, flipped), ExternalEvent(end, signal, v))
    raise ValueError(f"unknown pulse kind {kind!r}")


def is_susceptible(
    circuit: Circuit,
    inputs: InputTraces,
    monitored: Iterable[str],
    glitch: Glitch,
    config: SimConfig,
) -> bool:
    """True iff the glitched execution assigns X to a monitored signal."""
    monitored = sorted(monitored)
    if not monitored:
        raise ValueError("monitored set must not be empty")
    unknown = [m for m in monitored if m not in circuit.signals]
    if unknown:
        raise ValueError(f"monitored signals not in circuit: {', '.join(unknown)}")
    if glitch.at < 0 or glitch.at + glitch.width > config.horizon:
        raise ValueError(
            f"glitch [{glitch.at}, {glitch.at + glitch.width}) not within [0, {config.horizon}]"
        )
    base = execute(circuit, inputs, config)
    events = make_transient(glitch.signal, glitch.at, glitch.width, glitch.kind, base)
    faulty = execute(circuit, inputs, config, events)
    return any(trace_has_x(faulty.traces[m]) for m in monitored)


# --- value regions --------------------------------------------------------------


def value_regions(execution: Execution) -> list[ValueRegion]:
    """Regions between consecutive value-switching times of a fault-free
    execution, covering [0, horizon)."""
    if any(ev.cause == "ext" for ev in execution.events):
        raise ValueError("value regions are defined on the fault-free execution (no external events)")
    return _regions_from_times((ev.time for ev in execution.events), execution.horizon)


def _regions_from_times(times: Iterable[float], horizon: float) -> list[ValueRegion]:
    cuts = sorted({0.0} | {t for t in times if t < horizon})
    cuts.append(horizon)
    return [ValueRegion(a, b, i) for i, (a, b) in enumerate(zip(cuts, cuts[1:])) if a < b]


# --- probe engine ----------------------------------------------------------------


class _ProbeContext:
    """Shared state for fault probes against one (circuit, inputs, config).

    Runs the fault-free execution once, keeping per-visit state snapshots.  A
    probe then resumes from the snapshot preceding the pulse and stops as soon
    as a monitored signal attains X (susceptible) or the state re-converges to
    the fault-free run with no X left in flight (masked).  Verdicts are
    identical to re-running the full execution with the pulse overlaid.
    """

    def __init__(
        self,
        circuit: Circuit,
        inputs: InputTraces,
        config: SimConfig,
        monitored: Iterable[str],
        settle: float | None = None,
        fault_kind: str = X_PULSE,
    ):
        self.circuit = circuit
        self.config = config
        self.monitored = sorted(monitored)
        if not self.monitored:
            raise ValueError("monitored set must not be empty")
        self.fault_kind = fault_kind
        comp = _compiled(circuit)
        self.comp = comp
        unknown = [m for m in self.monitored if m not in comp.idx]
        if unknown:
            raise ValueError(f"monitored signals not in circuit: {', '.join(unknown)}")
        if settle is None:
            settle = circuit.size * max(config.epsilon, circuit.d_max)
        self.settle = settle
        self.t_end = config.horizon + settle

        inputs = dict(inputs or {})
        check_input_traces(circuit, inputs, config.horizon)
        self.in_initial, self.in_transitions = _prepare_inputs(comp, inputs, self.t_end)
        base = _kernel(
            comp,
            self.in_transitions,
            self.in_initial,
            self.t_end,
            config.epsilon,
            (),
            record=True,
            keep_snapshots=True,
        )
        self.base = base
        self.visit_times = base.visit_times
        self.snapshots = base.snapshots
        self.mon_ids = frozenset(comp.idx[m] for m in self.monitored)
        self.base_mon_x = any(
            fv == 0.5 for sid in self.mon_ids for _, fv in base.trace_lists[sid]
        ) or any(base.initial_values[sid] == 0.5 for sid in self.mon_ids)

        # per-signal transition lists for O(log n) value lookups
        self._times = [tuple(t for t, _ in lst) for lst in base.trace_lists]
        self._vals = [tuple(v for _, v in lst) for lst in base.trace_lists]
        self.regions = _regions_from_times(
            (t for lst in base.trace_lists for t, _ in lst), config.horizon
        )
        self.simulations = 0

    def base_value(self, sid: int, t: float) -> float:
        i = _bisect_mod.bisect_right(self._times[sid], t)
        return self._vals[sid][i - 1] if i else self.base.initial_values[sid]

    def matches(self, t: float, values, pend, pend_x, done) -> bool:
        i = _bisect_mod.bisect_right(self.visit_times, t) - 1
        if i < 0:
            return False
        snap = self.snapshots[i]
        return (
            snap.done == done
            and snap.pend == tuple(sorted(pend.items()))
            and snap.pend_x == tuple(sorted(pend_x.items()))
            and list(snap.values) == values
        )

    def pulse_events(self, sid: int, at: float, width: float):
        end = at + width
        if self.fault_kind == X_PULSE:
            return ((at, sid, 0.5), (end, sid, self.base_value(sid, min(end, self.t_end))))
        v = self.base_value(sid, at)
        if v == 0.5:
            raise ValueError("flip-pulse where the fault-free value is X")
        return ((at, sid, 1.0 - v), (end, sid, v))

    def probe(self, signal: str, at: float, width: float) -> bool:
        """Susceptibility verdict for one pulse; counts one simulation."""
        self.simulations += 1
        if self.base_mon_x:
            return True
        sid = self.comp.idx[signal]
        events = self.pulse_events(sid, at, width)
        i = _bisect_mod.bisect_left(self.visit_times, at) - 1
        seed = self.snapshots[i] if i >= 0 else None
        run = _kernel(
            self.comp,
            self.in_transitions,
            self.in_initial,
            self.t_end,
            self.config.epsilon,
            events,
            record=False,
            watch=self.mon_ids,
            stop_on_watch=True,
            seed=seed,
            base=self,
        )
        return run.watch_hit


# --- bisection -------------------------------------------------------------------


def _locate_boundary(ctx: _ProbeContext, signal: str, region: ValueRegion, gamma: float, delta: float):
    """Endpoint classification plus bisection within one region.

    Returns (boundary, kind) where kind is "postfix" (susceptible from the
    boundary to the region end), or "prefix" for the anomalous orientation
    (susceptible from the region start up to the boundary).
    """
    r0, r1 = region.start, region.end
    hi_cap = r1 - gamma
    if hi_cap <= r0:
        return (r0 if ctx.probe(signal, r0, gamma) else r1), "postfix"
    lo_sus = ctx.probe(signal, r0, gamma)
    hi_sus = ctx.probe(signal, hi_cap, gamma)
    if lo_sus and hi_sus:
        return r0, "postfix"
    if not lo_sus and not hi_sus:
        return r1, "postfix"
    if not lo_sus and hi_sus:
        lo, hi = r0, hi_cap
        while hi - lo > delta:
            mid = (lo + hi) / 2.0
            if ctx.probe(signal, mid, gamma):
                hi = mid
            else:
                lo = mid
        return hi, "postfix"
    # susceptible on the left, masked on the right: the postfix shape does not
    # hold at these finite pulse parameters; report the prefix boundary
    warnings.warn(
        f"susceptible times in region [{r0}, {r1}) at {signal} do not form a postfix",
        PostfixViolationWarning,
    )
    lo, hi = r0, hi_cap
    while hi - lo > delta:
        mid = (lo + hi) / 2.0
        if ctx.probe(signal, mid, gamma):
            lo = mid
        else:
            hi = mid
    return hi, "prefix"


def bisect_region(
    circuit: Circuit,
    inputs: InputTraces,
    monitored: Iterable[str],
    signal: str,
    region: ValueRegion,
    gamma: float,
    delta: float,
    config: SimConfig,
    ctx: _ProbeContext | None = None,
) -> float:
    """Boundary between masked times (left) and susceptible times (right)
    within the region, located to resolution delta.

    Probes are X-pulses of width gamma, clamped to end at the region boundary.
    If both endpoint probes classify identically no interior probe is run and
    the boundary is the region start (all susceptible) or end (none).
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if ctx is None:
        ctx = _ProbeContext(circuit, inputs, config, monitored)
    boundary, kind = _locate_boundary(ctx, signal, region, gamma, delta)
    if kind == "prefix":
        # the caller sees the closest postfix summary: everything susceptible
        return region.start if boundary > region.start else region.end
    return boundary


def _windows_for_signal(
    ctx: _ProbeContext, signal: str, gamma: float, delta: float, mode: str
) -> list[SensitivityWindow]:
    out: list[SensitivityWindow] = []
    for region in ctx.regions:
        boundary, kind = _locate_boundary(ctx, signal, region, gamma, delta)
        if kind == "postfix":
            if boundary < region.end:
                out.append(SensitivityWindow(signal, boundary, region.end, delta))
        elif mode == "exhaustive":
            out.extend(_grid_scan_region(ctx, signal, region, gamma, delta))
        elif boundary > region.start:
            out.append(SensitivityWindow(signal, region.start, boundary, delta))
    return out


def _grid_scan_region(
    ctx: _ProbeContext, signal: str, region: ValueRegion, gamma: float, delta: float
) -> list[SensitivityWindow]:
    """Exhaustive fallback: classify the region on a delta grid."""
    count = max(1, math.ceil(region.length / delta))
    edges = [region.start + i * delta for i in range(count)]
    verdicts = [ctx.probe(signal, t, gamma) for t in edges]
    out: list[SensitivityWindow] = []
    start = None
    for i, sus in enumerate(verdicts):
        if sus and start is None:
            start = edges[i]
        if not sus and start is not None:
            out.append(SensitivityWindow(signal, start, edges[i], delta))
            start = None
    if start is not None:
        out.append(SensitivityWindow(signal, start, region.end, delta))
    return out


# --- full analyses ----------------------------------------------------------------


def _resolve_injection(circuit, monitored, injection_set, include_monitored):
    if injection_set is not None:
        injected = sorted(injection_set)
        unknown = [s for s in injected if s not in circuit.signals]
        if unknown:
            raise ValueError(f"injection signals not in circuit: {', '.join(unknown)}")
        return injected
    if include_monitored:
        return sorted(circuit.signals)
    return sorted(circuit.signals - frozenset(monitored))


def analyze(
    circuit: Circuit,
    inputs: InputTraces,
    monitored: Iterable[str],
    gamma: float = DEFAULT_GAMMA,
    delta: float = DEFAULT_DELTA,
    config: SimConfig = SimConfig(horizon=100.0),
    injection_set: Iterable[str] | None = None,
    include_monitored: bool = False,
    fault_kind: str = X_PULSE,
    mode: str = "default",
    settle: float | None = None,
) -> SensitivityReport:
    """Locate all sensitivity windows by per-region bisection and report the
    failure probability under a uniform single-fault distribution.

    The injection set defaults to every signal except the monitored ones.
    A monitored signal in the injection set is susceptible at every time by
    definition (the pulse itself drives it to X), so it contributes a full
    window without probing.
    """
    monitored = sorted(monitored)
    injected = _resolve_injection(circuit, monitored, injection_set, include_monitored)
    ctx = _ProbeContext(circuit, inputs, config, monitored, settle=settle, fault_kind=fault_kind)
    T = config.horizon
    windows: list[SensitivityWindow] = []
    p_per_signal: dict[str, float] = {}
    for s in injected:
        if s in monitored:
            windows.append(SensitivityWindow(s, 0.0, T, delta))
            p_per_signal[s] = 1.0
            continue
        sig_windows = _windows_for_signal(ctx, s, gamma, delta, mode)
        windows.extend(sig_windows)
        p_per_signal[s] = math.fsum(w.length for w in sig_windows) / T if T > 0 else 0.0
    total = math.fsum(w.length for w in windows)
    p_fail = total / (len(injected) * T) if injected and T > 0 else 0.0
    return SensitivityReport(
        horizon=T,
        epsilon=ctx.config.epsilon,
        gamma=gamma,
        delta=delta,
        monitored=tuple(monitored),
        injected=tuple(injected),
        fault_kind=fault_kind,
        windows=tuple(windows),
        p_fail=p_fail,
        p_per_signal=p_per_signal,
        simulations=ctx.simulations,
    )


def analyze_naive(
    circuit: Circuit,
    inputs: InputTraces,
    monitored: Iterable[str],
    gamma: float = DEFAULT_GAMMA,
    step: float = 0.25,
    config: SimConfig = SimConfig(horizon=100.0),
    injection_set: Iterable[str] | None = None,
    include_monitored: bool = False,
    fault_kind: str = X_PULSE,
    settle: float | None = None,
) -> SensitivityReport:
    """Grid-scan reference: one pulse at every multiple of the step, for every
    injection signal.  Exactly |injected| * ceil(T/step) simulations."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    monitored = sorted(monitored)
    injected = _resolve_injection(circuit, monitored, injection_set, include_monitored)
    ctx = _ProbeContext(circuit, inputs, config, monitored, settle=settle, fault_kind=fault_kind)
    T = config.horizon
    npoints = math.ceil(T / step)
    windows: list[SensitivityWindow] = []
    p_per_signal: dict[str, float] = {}
    for s in injected:
        start = None
        sig_len = 0.0
        sig_windows = []
        for k in range(npoints):
            t = k * step
            sus = ctx.probe(s, t, gamma)
            if sus and start is None:
                start = t
            if not sus and start is not None:
                sig_windows.append(SensitivityWindow(s, start, k * step, step))
                start = None
        if start is not None:
            sig_windows.append(SensitivityWindow(s, start, T, step))
        windows.extend(sig_windows)
        p_per_signal[s] = math.fsum(w.length for w in sig_windows) / T if T > 0 else 0.0
    total = math.fsum(w.length for w in windows)
    p_fail = total / (len(injected) * T) if injected and T > 0 else 0.0
    return SensitivityReport(
        horizon=T,
        epsilon=ctx.config.epsilon,
        gamma=gamma,
        delta=step,
        monitored=tuple(monitored),
        injected=tuple(injected),
        fault_kind=fault_kind,
        windows=tuple(windows),
        p_fail=p_fail,
        p_per_signal=p_per_signal,
        simulations=ctx.simulations,
    )


def p_fail_weighted(report: SensitivityReport, weights: Mapping[str, float]) -> float:
    """Weighted average of the per-signal fault probabilities."""
    missing = [s for s in report.injected if s not in weights]
    if missing:
        raise ValueError(f"weights missing for: {', '.join(missing)}")
    bad = {s: w for s, w in weights.items() if w < 0}
    if bad:
        raise ValueError(f"weights must be nonnegative: {bad}")
    total = math.fsum(weights[s] for s in report.injected)
    if total == 0:
        raise ValueError("total weight is zero")
    return math.fsum(weights[s] * report.p_per_signal[s] for s in report.injected) / total


# --- region equivalence (test support) ----------------------------------------------


def x_reach(execution: Execution, regions: Sequence[ValueRegion]) -> frozenset:
    """Set of (signal, region index) pairs where the signal is X at some time
    within the region."""
    out = set()
    for name, trace in execution.traces.items():
        segs = []
        cur_v, cur_t = trace.initial, 0.0
        for t, v in trace.transitions:
            if cur_v is Value.X:
                segs.append((cur_t, t))
            cur_v, cur_t = v, t
        if cur_v is Value.X:
            segs.append((cur_t, execution.horizon))
        if not segs:
            continue
        for region in regions:
            if any(a < region.end and region.start < b for a, b in segs):
                out.add((name, region.index))
    return frozenset(out)


def check_region_equivalence(
    circuit: Circuit,
    inputs: InputTraces,
    region: ValueRegion,
    signal: str,
    gamma: float,
    config: SimConfig,
    samples: int = 4,
    seed: int = 0,
) -> bool:
    """Within one region, a later fault must reach X everywhere an earlier
    fault does.  Samples fault times away from the region's right boundary;
    vacuously true when the margin leaves no room."""
    margin = circuit.size * config.epsilon + gamma
    hi = region.end - margin
    if hi <= region.start:
        return True
    rng = random.Random(seed)
    times = sorted(rng.uniform(region.start, hi) for _ in range(samples))
    base = execute(circuit, inputs, config)
    regions = value_regions(base)
    reaches = []
    for t in times:
        events = make_transient(signal, t, gamma, X_PULSE, base)
        faulty = execute(circuit, inputs, config, events)
        reaches.append(x_reach(faulty, regions))
    return all(reaches[i] <= reaches[i + 1] for i in range(len(reaches) - 1))
