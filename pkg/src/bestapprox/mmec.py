"""Inductive minimal, maximally expressive circuits and their CNOT-basis compilation."""
from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .circuit import (
    CircuitError,
    Gate,
    Generator,
    ParametricCircuit,
    evaluate,
    h,
    rot,
    rx,
    ry,
    rz,
    x,
)
from .dea import jacobian_gram


@dataclass(frozen=True)
class MmecSpec:
    num_qubits: int
    phase_mode: str = "with_global_phase"  # or "phase_free"
    compile_mode: str = "native_controls"  # or "cnot_basis"

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        if self.phase_mode not in ("with_global_phase", "phase_free"):
            raise ValueError(f"unknown phase mode {self.phase_mode!r}")
        if self.compile_mode not in ("native_controls", "cnot_basis"):
            raise ValueError(f"unknown compile mode {self.compile_mode!r}")


def parameter_count(num_qubits: int, phase_mode: str = "with_global_phase") -> int:
    full = 2 ** (num_qubits + 1) - 1
    return full if phase_mode == "with_global_phase" else full - 1


def _embed(gate: Gate, width: int, control: tuple[int, int] | None, slot_offset: int) -> Gate:
    """Move a gate of the Q-qubit block onto qubits 1..Q of a (Q+1)-qubit circuit."""
    extra = (control,) if control else ()
    if gate.kind == "h":
        return Gate("h", qubit=gate.qubit + 1,
                    controls=tuple((q + 1, p) for q, p in gate.controls) + extra)
    gen = Generator(
        "I" + gen_pad(gate.generator.pauli, width - 1),
        tuple((q + 1, p) for q, p in gate.generator.controls) + extra,
    )
    slot = None if gate.slot is None else gate.slot + slot_offset
    return Gate(gate.kind, gen, slot=slot, angle=gate.angle, mult=gate.mult)


def gen_pad(pauli: str, width: int) -> str:
    return pauli + "I" * (width - len(pauli))


def _gates(Q: int, phase_free: bool) -> list[Gate]:
    if Q == 1:
        if phase_free:
            return [rx(1, 0, 0), rz(1, 0, 1)]
        return [rx(1, 0, 0), rz(1, 0, 1), ry(1, 0, 2)]
    inner = _gates(Q - 1, phase_free)
    p_inner = parameter_count(Q - 1, "phase_free" if phase_free else "with_global_phase")
    head = [rx(Q, 0, 0)]
    if phase_free:
        # relative phase between the two branches of the new qubit
        head.append(rz(Q, 0, 1))
    off = len(head)
    ctrl = (0, 1)
    first = [_embed(g, Q, ctrl, off) for g in inner]
    second = [_embed(g, Q, ctrl, off + p_inner) for g in inner]
    return head + first + [x(Q, 0)] + second


def build(spec: MmecSpec) -> ParametricCircuit:
    """``C_1 = R_Y R_Z R_X |0>`` and ``C_{Q+1}`` by controlling two copies of ``C_Q``.

    Slot order is ``(theta_1, theta', theta'')`` (``theta_1, theta_2, ...`` when
    phase free), matching ``cos(t1/2)|1> C_Q(t'') - i sin(t1/2)|0> C_Q(t')``.
    """
    Q = spec.num_qubits
    free = spec.phase_mode == "phase_free"
    gates = _gates(Q, free)
    n = parameter_count(Q, spec.phase_mode)
    # a controlled rotation only flips the sign of its own branch after 2 pi
    periods = [2 * pi] * n
    for g in gates:
        if g.kind == "rot" and g.slot is not None and g.generator.controls:
            periods[g.slot] = 4 * pi
    circ = ParametricCircuit(
        Q, gates, n, param_periods=tuple(periods),
        name=f"mmec-{Q}{'-phase-free' if free else ''}",
    )
    if spec.compile_mode == "cnot_basis":
        circ = compile_to_cnot_basis(circ)
    return circ


def expressivity_check(circuit: ParametricCircuit, target_dim: int, probes: int = 10,
                       seed: int = 0, tol: float = 1e-8) -> int:
    """Largest numerical rank of the full Jacobian Gram matrix over random probes."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    best = 0
    for _ in range(probes):
        theta = np.array([rng.uniform(0, p) for p in circuit.param_periods])
        S = jacobian_gram(circuit, theta).entries
        best = max(best, int(np.sum(np.linalg.eigvalsh(S) > tol)))
        if best >= target_dim:
            break
    return best


# CNOT-basis compilation ---------------------------------------------------------

def _zyz(U: np.ndarray) -> tuple[float, float, float, float]:
    """``U = e^{i alpha} R_Z(beta) R_Y(gamma) R_Z(delta)``."""
    det = np.linalg.det(U)
    alpha = np.angle(det) / 2
    V = U * np.exp(-1j * alpha)
    gamma = 2 * np.arctan2(abs(V[1, 0]), abs(V[0, 0]))
    if abs(V[0, 0]) < 1e-12:
        s = np.angle(V[1, 0])
        return alpha, 2 * s, gamma, 0.0
    if abs(V[1, 0]) < 1e-12:
        return alpha, -2 * np.angle(V[0, 0]), gamma, 0.0
    a = -np.angle(V[0, 0])  # (beta + delta) / 2
    b = np.angle(V[1, 0])   # (beta - delta) / 2
    return alpha, a + b, gamma, a - b


def _fixed(Q, axis, q, angle):
    return rot(Q, {q: axis}, angle=float(angle))


def _single_qubit(Q, U, q):
    """Fixed gates for ``U`` on qubit ``q`` (global phase dropped)."""
    _, beta, gamma, delta = _zyz(U)
    return [_fixed(Q, "Z", q, delta), _fixed(Q, "Y", q, gamma), _fixed(Q, "Z", q, beta)]


def _controlled_u(Q, U, c, t):
    """Singly controlled ``U`` (control-on-1) from CNOTs and single-qubit gates."""
    alpha, beta, gamma, delta = _zyz(U)
    gates = [
        _fixed(Q, "Z", t, (delta - beta) / 2),                      # C
        x(Q, t, ((c, 1),)),
        _fixed(Q, "Z", t, -(delta + beta) / 2), _fixed(Q, "Y", t, -gamma / 2),  # B
        x(Q, t, ((c, 1),)),
        _fixed(Q, "Y", t, gamma / 2), _fixed(Q, "Z", t, beta),      # A
        _fixed(Q, "Z", c, alpha),                                   # diag(1, e^{i alpha}) up to phase
    ]
    return gates


def _sqrtm_unitary(U):
    w, v = np.linalg.eig(U)
    return v @ np.diag(np.sqrt(w)) @ np.linalg.inv(v)


_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _mc_u(Q, U, controls, t):
    """Multi-controlled ``U`` (all controls on-1) by V / CNOT / V-dagger recursion."""
    if not controls:
        return _single_qubit(Q, U, t)
    if len(controls) == 1:
        if np.allclose(U, _X):
            return [x(Q, t, ((controls[0], 1),))]
        return _controlled_u(Q, U, controls[0], t)
    V = _sqrtm_unitary(U)
    *rest, last = controls
    return (
        _mc_u(Q, V, [last], t)
        + _mc_u(Q, _X, rest, last)
        + _mc_u(Q, V.conj().T, [last], t)
        + _mc_u(Q, _X, rest, last)
        + _mc_u(Q, V, rest, t)
    )


def _flip_zero_controls(Q, controls):
    return [x(Q, q) for q, pol in controls if pol == 0]


_BASIS = {  # (before, after) changing the Pauli factor to Z on that qubit
    "X": ("H", "H"),
    "Y": (("X", pi / 2), ("X", -pi / 2)),
}


def _basis_gates(Q, q, spec):
    if spec == "H":
        return [h(q)]
    axis, ang = spec
    return [_fixed(Q, axis, q, ang)]


def _compile_gate(Q, g: Gate) -> list[Gate]:
    if g.kind == "h":
        if g.controls:
            c = [q for q, _ in g.controls]
            H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
            flips = _flip_zero_controls(Q, g.controls)
            return flips + _mc_u(Q, H, c, g.qubit) + flips
        return [g]
    gen = g.generator
    ctrls = gen.controls
    cq = [q for q, _ in ctrls]
    flips = _flip_zero_controls(Q, ctrls)
    if g.kind == "pauli":
        if not ctrls and sum(c != "I" for c in gen.pauli) == 1:
            return [g] if gen.pauli.replace("I", "") == "X" else [
                _fixed(Q, gen.pauli.replace("I", ""), gen.support[0], pi)]
        out = []
        for q in gen.support:
            P = {"X": _X, "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1, -1]).astype(complex)}[
                gen.pauli[q]]
            out += _mc_u(Q, P, cq, q)
        return flips + out + flips
    if not ctrls and len(gen.support) == 1:
        return [g]
    # rotation: basis change, parity ladder onto the last support qubit, R_Z there
    support = list(gen.support)
    pre, post = [], []
    for q in support:
        c = gen.pauli[q]
        if c in _BASIS:
            b, a = _BASIS[c]
            pre += _basis_gates(Q, q, b)
            post = _basis_gates(Q, q, a) + post
    tgt = support[-1]
    ladder = [x(Q, support[i + 1], ((support[i], 1),)) for i in range(len(support) - 1)]
    core = _controlled_rz(Q, g, cq, tgt)
    return flips + pre + ladder + core + ladder[::-1] + post + flips


def _controlled_rz(Q, g, cq, t):
    """``R_Z`` on ``t`` with the angle of ``g``, controlled on all of ``cq`` (on-1)."""
    def half(sign):
        if g.slot is not None:
            return rot(Q, {t: "Z"}, g.slot, mult=sign * g.mult)
        return _fixed(Q, "Z", t, sign * g.angle)

    if not cq:
        if g.slot is not None:
            return [rot(Q, {t: "Z"}, g.slot, mult=g.mult)]
        return [_fixed(Q, "Z", t, g.angle)]
    # R_Z(a/2) X R_Z(-a/2) X applies R_Z(a) when the controls fire and I otherwise
    mcx = _mc_u(Q, _X, cq, t)
    return mcx + [half(-0.5)] + mcx + [half(0.5)]


def compile_to_cnot_basis(circuit: ParametricCircuit) -> ParametricCircuit:
    """Equivalent circuit (up to global phase) using only single-qubit gates and CNOT.

    Parametric controlled rotations turn into pairs of ``R_Z(+-theta/2)`` sharing a
    slot, so the result is meant for execution rather than for
    :func:`bestapprox.circuit.derivative_state`.
    """
    Q = circuit.num_qubits
    out = []
    for g in circuit.gates:
        out += _compile_gate(Q, g)
    return ParametricCircuit(
        Q, out, circuit.num_params,
        param_periods=circuit.param_periods,
        sample_ranges=circuit.sample_ranges,
        initial_state=circuit.initial_state,
        name=(circuit.name + "-cnot") if circuit.name else "",
    )


def is_cnot_basis(circuit: ParametricCircuit) -> bool:
    for g in circuit.gates:
        if g.kind == "h":
            if g.controls:
                return False
        elif g.kind == "pauli":
            ok_x = g.generator.pauli.count("X") == 1 and set(g.generator.pauli) <= {"I", "X"}
            if not ok_x or len(g.generator.controls) > 1:
                return False
            if g.generator.controls and g.generator.controls[0][1] != 1:
                return False
        elif g.generator.controls or len(g.generator.support) != 1:
            return False
    return True


# phase symmetry ----------------------------------------------------------------

def _inverse(g: Gate) -> Gate:
    if g.kind == "rot":
        if g.slot is not None:
            raise CircuitError("u_init must not contain parametric gates")
        return Gate("rot", g.generator, angle=-g.angle)
    return g  # Pauli strings and Hadamards are involutions


def add_phase_parameter(circuit: ParametricCircuit, u_init=(), qubit: int = 0,
                        atol: float = 1e-10) -> ParametricCircuit:
    """Prepend a global-phase parameter: ``U(theta) U_init R_Z(phi) U_init^* |init>``.

    ``u_init`` must prepare ``circuit``'s initial state from ``|0...0>`` (up to a
    phase).  The new parameter becomes slot 0; the old slots shift by one.
    """
    Q = circuit.num_qubits
    u_init = list(u_init)
    zero = ParametricCircuit(Q, u_init, 0) if u_init else None
    prepared = evaluate(zero, np.zeros(0)) if zero else ParametricCircuit(Q, [], 0).init_vector()
    init = circuit.init_vector()
    if abs(abs(np.vdot(prepared, init)) - 1) > atol:
        raise CircuitError("u_init does not prepare the circuit's initial state")
    shifted = [
        Gate("rot", g.generator, slot=g.slot + 1, mult=g.mult) if g.kind == "rot" and g.slot is not None
        else g
        for g in circuit.gates
    ]
    gates = [_inverse(g) for g in reversed(u_init)] + [rz(Q, qubit, 0)] + u_init + shifted
    return ParametricCircuit(
        Q, gates, circuit.num_params + 1,
        param_periods=(4 * pi,) + circuit.param_periods,
        sample_ranges=((0.0, 4 * pi),) + circuit.sample_ranges,
        initial_state=circuit.initial_state,
        name=(circuit.name + "+phase") if circuit.name else "",
    )
