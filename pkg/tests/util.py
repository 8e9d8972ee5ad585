"""Shared test helpers: random well-formed circuits, traces, and fault probes."""

from __future__ import annotations

import random

from faultscope import Circuit, SignalTrace, Value, make_trace
from faultscope.generators import gate_and, gate_inverter, gate_mce, gate_or

GATES = ("inv", "mce", "or", "and")


def random_delay(rng: random.Random) -> float:
    # multiples of 1/16 in [0.5, 5]: exact binary fractions keep event
    # times reproducible across runs
    return rng.randrange(8, 81) / 16.0


def random_circuit(rng: random.Random, max_driven: int = 6, n_inputs: int | None = None):
    """Random gate soup over a handful of signals; always validates."""
    n_driven = rng.randint(2, max_driven)
    if n_inputs is None:
        n_inputs = rng.randint(0, 2)
    inputs = [f"i{k}" for k in range(n_inputs)]
    driven = [f"d{k}" for k in range(n_driven)]
    signals = inputs + driven
    rules = []
    initial = {}
    for target in driven:
        pool = [s for s in signals if s != target]
        kind = rng.choice(GATES)
        delay = random_delay(rng)
        if kind == "inv" or len(pool) < 2:
            rules += gate_inverter(rng.choice(pool), target, delay)
        else:
            a, b = rng.sample(pool, 2)
            gate = {"mce": gate_mce, "or": gate_or, "and": gate_and}[kind]
            rules += gate(a, b, target, delay)
        initial[target] = rng.choice((Value.ZERO, Value.ONE))
    circuit = Circuit(
        inputs=inputs,
        locals=driven[:-1],
        outputs=[driven[-1]],
        initial=initial,
        rules=rules,
        name=f"rand{rng.randrange(10**6)}",
    )
    return circuit


def random_input_traces(rng: random.Random, circuit: Circuit, horizon: float, allow_x: bool = False):
    traces = {}
    for name in sorted(circuit.inputs):
        value = rng.choice((Value.ZERO, Value.ONE))
        transitions = []
        t = 0.0
        while True:
            t += rng.randrange(8, 8 * int(horizon)) / 16.0
            if t >= horizon:
                break
            choices = [v for v in (Value.ZERO, Value.ONE, Value.X) if allow_x or v is not Value.X]
            nxt = rng.choice([v for v in choices if v != (transitions[-1][1] if transitions else value)])
            transitions.append((t, nxt))
        traces[name] = make_trace(value, transitions, horizon=float("inf"))
    return traces


def monitored_for(rng: random.Random, circuit: Circuit):
    driven = sorted(circuit.driven)
    count = min(len(driven), rng.randint(1, 2))
    return frozenset(rng.sample(driven, count))
