"""Ancilla interferometry for ``Re<a, b>`` with finite measurement statistics.

The base register is shifted up by one qubit and the ancilla becomes qubit 0,
so the ancilla marginal is the squared norm of the first half of the state.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .circuit import (
    CircuitError,
    Gate,
    Generator,
    ParametricCircuit,
    derivative_terms,
    evaluate,
    h,
    x,
)


@dataclass(frozen=True)
class DerivativePair:
    """Estimate ``Re<gamma_m, gamma_n>`` of one circuit.

    ``term_m`` / ``term_n`` pick one unitary insertion of a slot (see
    :func:`bestapprox.circuit.derivative_terms`).  Leave them as ``None`` for
    uncontrolled single-gate slots, or to let :func:`estimate_real_inner`
    sum over all insertion pairs.
    """

    m: int
    n: int
    term_m: int | None = None
    term_n: int | None = None


@dataclass(frozen=True)
class CircuitPair:
    """Estimate ``Re<C_1(theta), C_2(other_theta)>``."""

    other: ParametricCircuit
    other_theta: tuple


@dataclass(frozen=True, eq=False)
class InterferenceJob:
    base_circuit: ParametricCircuit
    theta: np.ndarray
    mode: DerivativePair | CircuitPair
    shots: int = 1000
    rng_seed: int | tuple = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        if self.theta.shape != (self.base_circuit.num_params,):
            raise CircuitError("theta length does not match the circuit")
        if isinstance(self.mode, DerivativePair):
            for s in (self.mode.m, self.mode.n):
                if not 0 <= s < self.base_circuit.num_params:
                    raise CircuitError(f"slot {s} out of range")

    def circuit_theta(self) -> np.ndarray:
        """Parameter vector for the circuit returned by :func:`build_interference_circuit`."""
        if isinstance(self.mode, CircuitPair):
            return np.concatenate([self.theta, np.asarray(self.mode.other_theta, float)])
        return self.theta


def _shift(gate: Gate, offset: int, extra_controls=(), slot_offset=0) -> Gate:
    if gate.kind == "h":
        ctrls = tuple((q + offset, p) for q, p in gate.controls) + tuple(extra_controls)
        return Gate("h", qubit=gate.qubit + offset, controls=ctrls)
    gen = gate.generator
    new = Generator(
        "I" * offset + gen.pauli,
        tuple((q + offset, p) for q, p in gen.controls) + tuple(extra_controls),
    )
    slot = None if gate.slot is None else gate.slot + slot_offset
    return Gate(gate.kind, new, slot=slot, angle=gate.angle, mult=gate.mult)


def _term(circuit, slot, which):
    terms = derivative_terms(circuit, slot)
    if which is None:
        if len(terms) != 1:
            raise CircuitError(
                f"slot {slot} has {len(terms)} insertion terms; choose one explicitly"
            )
        which = 0
    if not 0 <= which < len(terms):
        raise CircuitError(f"slot {slot} has no insertion term {which}")
    return terms[which]


def build_interference_circuit(job: InterferenceJob) -> ParametricCircuit:
    base = job.base_circuit
    Q = base.num_qubits
    if base.initial_state is not None:
        raise CircuitError("interference circuits need the |0...0> initial state")
    gates = [h(0)]
    if isinstance(job.mode, DerivativePair):
        _, gm, pm = _term(base, job.mode.m, job.mode.term_m)
        _, gn, pn = _term(base, job.mode.n, job.mode.term_n)
        anc = ((0, 1),)
        for i, g in enumerate(base.gates):
            gates.append(_shift(g, 1))
            if i == gm:
                gates += [x(Q + 1, 0), Gate("pauli", Generator("I" + pm, anc)), x(Q + 1, 0)]
            if i == gn:
                gates.append(Gate("pauli", Generator("I" + pn, anc)))
        num_params = base.num_params
        periods = base.param_periods
    else:
        other = job.mode.other
        if other.num_qubits != Q:
            raise CircuitError("circuit pair must act on the same number of qubits")
        if other.initial_state is not None:
            raise CircuitError("interference circuits need the |0...0> initial state")
        gates += [_shift(g, 1, ((0, 0),)) for g in base.gates]
        gates += [_shift(g, 1, ((0, 1),), base.num_params) for g in other.gates]
        num_params = base.num_params + other.num_params
        periods = base.param_periods + other.param_periods
    gates.append(h(0))
    return ParametricCircuit(Q + 1, gates, num_params, param_periods=periods)


def prob_anc0_exact(job: InterferenceJob) -> float:
    psi = evaluate(build_interference_circuit(job), job.circuit_theta())
    half = psi.size // 2
    return float(min(1.0, max(0.0, np.vdot(psi[:half], psi[:half]).real)))


def _rng(seed, *stream: int) -> np.random.Generator:
    # counter-based stream keyed by (seed..., term indices); platform independent
    key = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key + list(stream))))


def _sample(p: float, shots: int, rng) -> tuple[float, float]:
    phat = rng.binomial(shots, p) / shots
    return 2 * phat - 1, 2 * sqrt(phat * (1 - phat) / shots)


def estimate_real_inner(job: InterferenceJob) -> tuple[float, float]:
    """Shot estimate of the real inner product and its binomial standard error.

    For derivative pairs with several insertion terms each term circuit is run
    with ``shots`` shots on its own RNG stream and the weighted results summed.
    """
    mode = job.mode
    if isinstance(mode, CircuitPair) or (mode.term_m is not None and mode.term_n is not None):
        return _sample(prob_anc0_exact(job), job.shots, _rng(job.rng_seed))
    tm = derivative_terms(job.base_circuit, mode.m)
    tn = derivative_terms(job.base_circuit, mode.n)
    ims = range(len(tm)) if mode.term_m is None else [mode.term_m]
    ins = range(len(tn)) if mode.term_n is None else [mode.term_n]
    est, var = 0.0, 0.0
    for i in ims:
        for j in ins:
            sub = InterferenceJob(job.base_circuit, job.theta,
                                  DerivativePair(mode.m, mode.n, i, j), job.shots, job.rng_seed)
            r, se = _sample(prob_anc0_exact(sub), job.shots, _rng(job.rng_seed, i, j))
            w = tm[i][0] * tn[j][0]
            est += w * r
            var += (w * se) ** 2
    return est, sqrt(var)
