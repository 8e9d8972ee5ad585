"""Deterministic discrete-event execution of production rule sets.

An execution advances through visited time points. At each visit:

1.  input-trace transitions at t become visible;
2.  actions due at t are applied (Boolean actions, then X actions), followed
    by external events at t;
3.  after every batch of value changes, unstable guards are handled: a
    pending Boolean action whose guard no longer evaluates to true while the
    target does not yet hold the action's value is canceled and the target is
    driven to X immediately (the gate was mid-switching and its drive got
    corrupted);
4.  rules are (re)evaluated: a fresh guard edge to 1 schedules the rule's
    action after its delay; a guard at X with the target neither at X nor at
    the rule's value schedules an X on the target after the small propagation
    delay epsilon;
5.  time advances to the earliest pending action, input transition, or
    external event; the run stops at the horizon.

Scheduling is edge-triggered: while a guard stays at 1 a rule never
re-schedules an action it has already scheduled or applied.  Equal-time events
are drained as one batch and processed in canonical (sorted signal name)
order, so identical arguments always produce identical executions.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .prs import (
    Circuit,
    InputTraces,
    SignalTrace,
    Value,
    check_input_traces,
    guard_signals,
    validate_circuit,
)

X = 0.5  # numeric encoding used throughout the kernel


class CircuitInvalid(ValueError):
    """Raised when a circuit fails validation before execution."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class SimConfig:
    """Execution horizon and X propagation delay (0 < epsilon < d_min)."""

    horizon: float
    epsilon: float = 0.1


@dataclass(frozen=True)
class ExternalEvent:
    at: float
    target: str
    value: Value


@dataclass(frozen=True)
class Event:
    """One recorded value change, with the mechanism that caused it."""

    time: float
    signal: str
    value: Value
    cause: str


@dataclass(frozen=True)
class Execution:
    traces: Mapping[str, SignalTrace]
    events: tuple[Event, ...]
    horizon: float

    def trace(self, signal: str) -> SignalTrace:
        return self.traces[signal]


def count_events(execution: Execution) -> int:
    """Total number of transitions across all signal traces."""
    return sum(len(t.transitions) for t in execution.traces.values())


# --- compiled circuit -------------------------------------------------------


def _guard_source(expr, idx) -> str:
    from .prs import And, Not, Or, SignalRef

    if isinstance(expr, SignalRef):
        return f"v[{idx[expr.name]}]"
    if isinstance(expr, Not):
        return f"(1.0-{_guard_source(expr.child, idx)})"
    if isinstance(expr, And):
        return f"min({','.join(_guard_source(c, idx) for c in expr.children)})"
    if isinstance(expr, Or):
        return f"max({','.join(_guard_source(c, idx) for c in expr.children)})"
    raise TypeError(f"not a guard expression: {expr!r}")


class _CompiledRule:
    __slots__ = ("rid", "target", "bval", "delay", "fn", "support", "label")

    def __init__(self, rid, target, bval, delay, fn, support, label):
        self.rid = rid
        self.target = target
        self.bval = bval
        self.delay = delay
        self.fn = fn
        self.support = support
        self.label = label


class _Compiled:
    """Index-based form of a circuit shared by all runs."""

    __slots__ = (
        "names",
        "idx",
        "n",
        "rules",
        "affected",
        "input_ids",
        "initial",
        "d_min",
        "validated",
    )

    def __init__(self, circuit: Circuit):
        violations = validate_circuit(circuit)
        if violations:
            raise CircuitInvalid(violations)
        self.validated = True
        self.names = sorted(circuit.signals)
        self.idx = {s: i for i, s in enumerate(self.names)}
        self.n = len(self.names)
        self.input_ids = frozenset(self.idx[s] for s in circuit.inputs)

        ordered = sorted(circuit.rules, key=lambda r: (r.target, -r.value))
        self.rules = []
        for rid, rule in enumerate(ordered):
            fn = eval(compile(f"lambda v: {_guard_source(rule.guard, self.idx)}", "<guard>", "eval"))
            support = tuple(sorted(self.idx[s] for s in guard_signals(rule.guard)))
            label = f"{rule.target}{'+' if rule.value else '-'}"
            self.rules.append(
                _CompiledRule(rid, self.idx[rule.target], float(rule.value), rule.delay, fn, support, label)
            )
        self.d_min = min(r.delay for r in self.rules) if self.rules else float("inf")

        affected: list[set] = [set() for _ in range(self.n)]
        for r in self.rules:
            affected[r.target].add(r.rid)
            for s in r.support:
                affected[s].add(r.rid)
        self.affected = [tuple(sorted(a)) for a in affected]

        self.initial = [X] * self.n
        for s, v in circuit.initial.items():
            self.initial[self.idx[s]] = v.value


def _compiled(circuit: Circuit) -> _Compiled:
    comp = getattr(circuit, "_compiled_form", None)
    if comp is None:
        comp = _Compiled(circuit)
        object.__setattr__(circuit, "_compiled_form", comp)
    return comp


# --- kernel -----------------------------------------------------------------

_IN, _BOOL, _XACT, _EXT = 0, 1, 2, 3


class _Seed:
    """Kernel state captured after one visit, for resuming a run mid-way."""

    __slots__ = ("time", "values", "pend", "pend_x", "done")

    def __init__(self, time, values, pend, pend_x, done):
        self.time = time
        self.values = values  # tuple of floats
        self.pend = pend  # tuple of (rule_id, due)
        self.pend_x = pend_x  # tuple of (signal_id, due)
        self.done = done  # bitmask over rules


class _Run:
    """One kernel run; collects traces, events, and optional snapshots."""

    __slots__ = (
        "comp",
        "horizon",
        "epsilon",
        "values",
        "initial_values",
        "trace_lists",
        "events",
        "watch_hit",
        "snapshots",
        "visit_times",
    )

    def __init__(self, comp, horizon, epsilon):
        self.comp = comp
        self.horizon = horizon
        self.epsilon = epsilon
        self.values = None
        self.initial_values = None
        self.trace_lists = None
        self.events = None
        self.watch_hit = False
        self.snapshots = None
        self.visit_times = None


def _kernel(
    comp: _Compiled,
    input_transitions: Sequence[tuple[float, int, float]],
    input_initial: Mapping[int, float],
    horizon: float,
    epsilon: float,
    externals: Sequence[tuple[float, int, float]],
    record: bool = True,
    watch: frozenset = frozenset(),
    stop_on_watch: bool = False,
    keep_snapshots: bool = False,
    seed: _Seed | None = None,
    base=None,
) -> _Run:
    """Run the five-step loop. All sequences are sorted; times are exact floats.

    ``watch`` signals flag the run as hit when they attain X; with
    ``stop_on_watch`` the run returns at that point.  ``base`` enables the
    early convergence exit for fault probes: once no X is present or pending
    and the state matches the fault-free run at the same time, the suffix is
    known to be identical and the run stops.
    """
    rules = comp.rules
    affected = comp.affected
    n = comp.n
    run = _Run(comp, horizon, epsilon)

    heap: list[tuple[float, int, int]] = []
    pend: dict[int, float] = {}  # rule id -> due time of its Boolean action
    pend_x: dict[int, float] = {}  # signal id -> due time of an X action
    ext_by_key: dict[tuple[float, int], float] = {}
    in_by_key: dict[tuple[float, int], float] = {}

    if seed is None:
        values = list(comp.initial)
        for i, fv in input_initial.items():
            values[i] = fv
        done = 0
        start_time = None
    else:
        values = list(seed.values)
        done = seed.done
        for rid, due in seed.pend:
            pend[rid] = due
            heapq.heappush(heap, (due, _BOOL, rid))
        for sid, due in seed.pend_x:
            pend_x[sid] = due
            heapq.heappush(heap, (due, _XACT, sid))
        start_time = seed.time

    run.initial_values = list(values)
    num_x = sum(1 for fv in values if fv == X)
    watch_hit = any(values[i] == X for i in watch)

    for at, sid, fv in input_transitions:
        if (start_time is None or at > start_time) and at < horizon:
            in_by_key[(at, sid)] = fv
            heapq.heappush(heap, (at, _IN, sid))
    ext_last = 0.0
    for at, sid, fv in externals:
        if (start_time is None or at > start_time) and at < horizon:
            ext_by_key[(at, sid)] = fv
            heapq.heappush(heap, (at, _EXT, sid))
            ext_last = max(ext_last, at)
    ext_remaining = len(ext_by_key)

    if record:
        run.trace_lists = [[] for _ in range(n)]
        run.events = []
    if keep_snapshots:
        run.snapshots = []
        run.visit_times = []

    names = comp.names
    events = run.events
    trace_lists = run.trace_lists

    if stop_on_watch and watch_hit:
        run.values = values
        run.watch_hit = True
        return run

    dirty = [True] * len(rules)
    changed: set = set()

    def set_value(sid: int, fv: float, cause: str, t: float) -> None:
        nonlocal num_x, watch_hit
        old = values[sid]
        if old == fv:
            return
        values[sid] = fv
        if old == X:
            num_x -= 1
        if fv == X:
            num_x += 1
            if sid in watch:
                watch_hit = True
        changed.add(sid)
        for rid in affected[sid]:
            dirty[rid] = True
        if record:
            trace_lists[sid].append((t, fv))
            events.append(Event(t, names[sid], Value(fv), cause))

    t = 0.0

    def cancel_unstable() -> None:
        # A rule whose pending action no longer has a solidly true guard is
        # mid-switching with a degraded drive: cancel the action and corrupt
        # the target.  Runs to a fixpoint after every batch of value changes,
        # so X generation does not depend on when the next event happens to
        # be scheduled.
        progress = True
        while progress:
            progress = False
            for rid in sorted(pend):
                if not dirty[rid]:
                    continue
                rule = rules[rid]
                dirty[rid] = False
                if rule.fn(values) != 1.0 and values[rule.target] != rule.bval:
                    del pend[rid]
                    set_value(rule.target, X, "unstable " + rule.label, t)
                    progress = True

    first_visit = seed is None

    while True:
        if first_visit:
            t = 0.0
            if t >= horizon:
                break
        else:
            if not heap:
                break
            t = heap[0][0]
            if t >= horizon:
                break

        # drain the batch at time t
        due_bool: list[int] = []
        due_x: list[int] = []
        due_ext: list[int] = []
        due_in: list[int] = []
        while heap and heap[0][0] == t:
            _, tag, key = heapq.heappop(heap)
            if tag == _BOOL:
                if pend.get(key) == t:
                    due_bool.append(key)
            elif tag == _XACT:
                if pend_x.get(key) == t:
                    due_x.append(key)
            elif tag == _EXT:
                due_ext.append(key)
            else:
                due_in.append(key)

        changed = set()

        # step 1: input-trace transitions at t
        for sid in sorted(due_in):
            set_value(sid, in_by_key[(t, sid)], "in", t)

        # step 2: unstable guards (a no-op unless inputs just changed, since
        # every earlier batch ran the same check)
        cancel_unstable()

        # step 3a: apply actions due at t (Boolean first, then X)
        for rid in sorted(due_bool, key=lambda r: (rules[r].target, r)):
            rule = rules[rid]
            if pend.get(rid) == t:
                del pend[rid]
                set_value(rule.target, rule.bval, rule.label, t)
        for sid in sorted(due_x):
            if pend_x.get(sid) == t:
                del pend_x[sid]
                set_value(sid, X, "xprop", t)
        cancel_unstable()

        # step 3b: external events at t
        for sid in sorted(due_ext):
            set_value(sid, ext_by_key[(t, sid)], "ext", t)
            ext_remaining -= 1
        cancel_unstable()

        # step 4: schedule on fresh guard edges; propagate X
        if first_visit:
            touched = range(len(rules))
            first_visit = False
        else:
            touched_set = set()
            for sid in changed:
                touched_set.update(affected[sid])
            touched = sorted(touched_set)
        for rid in touched:
            rule = rules[rid]
            g = rule.fn(values)
            bit = 1 << rid
            if g == 1.0:
                if not done & bit:
                    done |= bit
                    if values[rule.target] != rule.bval and rid not in pend:
                        due = t + rule.delay
                        pend[rid] = due
                        dirty[rid] = False
                        heapq.heappush(heap, (due, _BOOL, rid))
            else:
                done &= ~bit
                if g == X:
                    tgt = rule.target
                    if values[tgt] != rule.bval and values[tgt] != X and tgt not in pend_x:
                        due = t + epsilon
                        pend_x[tgt] = due
                        heapq.heappush(heap, (due, _XACT, tgt))

        if stop_on_watch and watch_hit:
            break

        if keep_snapshots:
            run.visit_times.append(t)
            run.snapshots.append(
                _Seed(t, tuple(values), tuple(sorted(pend.items())), tuple(sorted(pend_x.items())), done)
            )

        # early convergence exit for probes: no X live or pending, externals
        # consumed, and state equal to the fault-free run at this time
        if (
            base is not None
            and ext_remaining == 0
            and num_x == 0
            and not pend_x
            and t >= ext_last
            and base.matches(t, values, pend, pend_x, done)
        ):
            break

    run.values = values
    run.watch_hit = watch_hit
    return run


# --- public execution -------------------------------------------------------


def _prepare_externals(comp: _Compiled, externals: Iterable[ExternalEvent], horizon: float):
    evs = sorted(externals, key=lambda e: (e.at, e.target))
    seen = set()
    out = []
    for ev in evs:
        if ev.target not in comp.idx:
            raise ValueError(f"external event targets undeclared signal {ev.target!r}")
        if ev.at < 0:
            raise ValueError(f"external event at negative time {ev.at}")
        key = (ev.at, ev.target)
        if key in seen:
            raise ValueError(f"two external events target {ev.target!r} at time {ev.at}")
        seen.add(key)
        if ev.at >= horizon:
            warnings.warn(f"external event at {ev.at} is beyond the horizon {horizon} and is ignored")
            continue
        out.append((ev.at, comp.idx[ev.target], Value(ev.value).value))
    return out


def _prepare_inputs(comp: _Compiled, inputs: InputTraces, horizon: float):
    initial = {}
    transitions = []
    for name, trace in inputs.items():
        sid = comp.idx[name]
        initial[sid] = trace.initial.value
        for t, v in trace.transitions:
            if t < horizon:
                transitions.append((t, sid, v.value))
    transitions.sort()
    return initial, transitions


def execute(
    circuit: Circuit,
    inputs: InputTraces | None = None,
    config: SimConfig = SimConfig(horizon=100.0),
    externals: Iterable[ExternalEvent] = (),
) -> Execution:
    """Execute the circuit against input traces and external events.

    Identical arguments produce identical executions.  Extending the horizon
    only appends to the traces.
    """
    comp = _compiled(circuit)
    inputs = dict(inputs or {})
    if config.horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {config.horizon}")
    if not 0 < config.epsilon < comp.d_min:
        raise ValueError(
            f"epsilon must satisfy 0 < epsilon < d_min ({comp.d_min}), got {config.epsilon}"
        )
    check_input_traces(circuit, inputs, config.horizon)
    in_initial, in_transitions = _prepare_inputs(comp, inputs, config.horizon)
    exts = _prepare_externals(comp, externals, config.horizon)
    run = _kernel(
        comp,
        in_transitions,
        in_initial,
        config.horizon,
        config.epsilon,
        exts,
        record=True,
    )
    return _build_execution(comp, run, config.horizon)


def _build_execution(comp: _Compiled, run: _Run, horizon: float) -> Execution:
    traces = {}
    for sid, name in enumerate(comp.names):
        transitions = tuple((t, Value(fv)) for t, fv in run.trace_lists[sid])
        traces[name] = SignalTrace(Value(run.initial_values[sid]), transitions, horizon)
    return Execution(traces, tuple(run.events), horizon)
