"""Parametric circuits and dense statevector simulation.

Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of the
flattened amplitude index.  Rotation gates act as ``exp(-i angle/2 P)`` on the
subspace selected by their controls and as the identity elsewhere.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product
from math import pi
from pathlib import Path

import numpy as np

PAULIS = "IXYZ"
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class CircuitError(ValueError):
    """Malformed circuit, bad parameter vector or unsupported operation."""


@dataclass(frozen=True)
class Generator:
    """Pauli string with optional controls.

    ``pauli[q]`` is the factor acting on qubit ``q``; ``controls`` holds
    ``(qubit, polarity)`` pairs with polarity 1 for control-on-1.
    """

    pauli: str
    controls: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if any(c not in PAULIS for c in self.pauli):
            raise CircuitError(f"bad Pauli string {self.pauli!r}")
        if not self.support:
            raise CircuitError("generator needs at least one non-identity factor")
        ctrl = [q for q, _ in self.controls]
        if len(set(ctrl)) != len(ctrl):
            raise CircuitError("repeated control qubit")
        if set(ctrl) & set(self.support):
            raise CircuitError("control qubits overlap the Pauli support")
        if any(p not in (0, 1) for _, p in self.controls):
            raise CircuitError("control polarity must be 0 or 1")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.pauli) if c != "I")

    @property
    def qubits(self) -> set[int]:
        return set(self.support) | {q for q, _ in self.controls}


@dataclass(frozen=True)
class Gate:
    """One circuit element.

    kind ``"rot"``: ``exp(-i a/2 P)`` with ``a = mult * theta[slot]`` or the fixed
    ``angle``.  kind ``"pauli"``: the (controlled) Pauli string itself, which
    covers X, CNOT and Toffoli.  kind ``"h"``: Hadamard on ``qubit`` with
    optional ``controls``.
    """

    kind: str
    generator: Generator | None = None
    slot: int | None = None
    angle: float | None = None
    mult: float = 1.0
    qubit: int | None = None
    controls: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kind == "rot":
            if self.generator is None:
                raise CircuitError("rotation gate needs a generator")
            if (self.slot is None) == (self.angle is None):
                raise CircuitError("rotation needs exactly one of slot / angle")
        elif self.kind == "pauli":
            if self.generator is None:
                raise CircuitError("pauli gate needs a generator")
        elif self.kind == "h":
            if self.qubit is None:
                raise CircuitError("hadamard needs a qubit")
        else:
            raise CircuitError(f"unknown gate kind {self.kind!r}")

    @property
    def qubits(self) -> set[int]:
        if self.kind == "h":
            return {self.qubit} | {q for q, _ in self.controls}
        return self.generator.qubits

    @property
    def all_controls(self) -> tuple[tuple[int, int], ...]:
        return self.controls if self.kind == "h" else self.generator.controls


# constructors for the common gates ------------------------------------------

def _string(num_qubits: int, ops: dict[int, str]) -> str:
    return "".join(ops.get(q, "I") for q in range(num_qubits))


def rot(num_qubits, axes, slot=None, *, angle=None, mult=1.0, controls=()):
    """Rotation gate; ``axes`` maps qubit -> 'X'|'Y'|'Z' (or is a Pauli string)."""
    pauli = axes if isinstance(axes, str) else _string(num_qubits, axes)
    return Gate("rot", Generator(pauli, tuple(controls)), slot=slot, angle=angle, mult=mult)


def rx(num_qubits, q, slot=None, **kw):
    return rot(num_qubits, {q: "X"}, slot, **kw)


def ry(num_qubits, q, slot=None, **kw):
    return rot(num_qubits, {q: "Y"}, slot, **kw)


def rz(num_qubits, q, slot=None, **kw):
    return rot(num_qubits, {q: "Z"}, slot, **kw)


def x(num_qubits, q, controls=()):
    return Gate("pauli", Generator(_string(num_qubits, {q: "X"}), tuple(controls)))


def cnot(num_qubits, control, target):
    return x(num_qubits, target, ((control, 1),))


def toffoli(num_qubits, c1, c2, target):
    return x(num_qubits, target, ((c1, 1), (c2, 1)))


def h(q, controls=()):
    return Gate("h", qubit=q, controls=tuple(controls))


@dataclass(frozen=True, eq=False)
class ParametricCircuit:
    """Ordered gate list acting on ``initial_state`` (default ``|0...0>``).

    ``param_periods`` is the parameter torus used for volume integrals.
    ``sample_ranges`` is the box used when sampling the image; it defaults to
    ``[0, period]`` but may be a fundamental domain of a multiply covered image.
    """

    num_qubits: int
    gates: tuple[Gate, ...]
    num_params: int
    param_periods: tuple[float, ...] = None
    sample_ranges: tuple[tuple[float, float], ...] = None
    initial_state: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        Q, N = self.num_qubits, self.num_params
        if Q < 1:
            raise CircuitError("need at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        periods = self.param_periods
        if periods is None:
            periods = (2 * pi,) * N
        periods = tuple(float(p) for p in periods)
        if len(periods) != N or any(not p > 0 for p in periods):
            raise CircuitError("need one positive period per parameter")
        object.__setattr__(self, "param_periods", periods)
        ranges = self.sample_ranges
        if ranges is None:
            ranges = tuple((0.0, p) for p in periods)
        ranges = tuple((float(a), float(b)) for a, b in ranges)
        if len(ranges) != N or any(not b > a for a, b in ranges):
            raise CircuitError("need one non-empty sample range per parameter")
        object.__setattr__(self, "sample_ranges", ranges)

        used = set()
        for g in self.gates:
            if g.kind != "h" and len(g.generator.pauli) != Q:
                raise CircuitError(f"Pauli string length {len(g.generator.pauli)} != {Q} qubits")
            if any(not 0 <= q < Q for q in g.qubits):
                raise CircuitError("qubit index out of range")
            if g.kind == "rot" and g.slot is not None:
                if not 0 <= g.slot < N:
                    raise CircuitError(f"slot {g.slot} out of range")
                used.add(g.slot)
        if used != set(range(N)):
            raise CircuitError(f"unreferenced parameter slots {sorted(set(range(N)) - used)}")

        if self.initial_state is not None:
            psi = np.asarray(self.initial_state, dtype=complex).reshape(-1)
            if psi.size != 2**Q:
                raise CircuitError("initial state has wrong dimension")
            if abs(np.linalg.norm(psi) - 1) > 1e-12:
                raise CircuitError("initial state is not normalized")
            psi.setflags(write=False)
            object.__setattr__(self, "initial_state", psi)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def init_vector(self) -> np.ndarray:
        if self.initial_state is not None:
            return self.initial_state.copy()
        psi = np.zeros(self.dim, dtype=complex)
        psi[0] = 1
        return psi

    def slot_gates(self, n: int) -> list[int]:
        """Indices of the gates driven by parameter slot ``n``."""
        if not 0 <= n < self.num_params:
            raise CircuitError(f"slot {n} out of range")
        return [i for i, g in enumerate(self.gates) if g.kind == "rot" and g.slot == n]


# simulation ------------------------------------------------------------------

def _ctrl_index(controls, ndim):
    idx = [slice(None)] * ndim
    for q, pol in controls:
        idx[q + 1] = pol
    return tuple(idx)


def _axis_after_ctrl(q, controls):
    # controlled axes are removed by integer indexing; shift accordingly
    return q + 1 - sum(1 for c, _ in controls if c < q)


def _pauli_apply(block, pauli, controls):
    """Apply a Pauli string to ``block`` (batch axis first, control axes removed)."""
    out = block
    for q, c in enumerate(pauli):
        if c == "I":
            continue
        ax = _axis_after_ctrl(q, controls)
        if c in "XY":
            out = np.flip(out, axis=ax)
        if c in "YZ":
            sign = np.ones(2, dtype=complex)
            if c == "Z":
                sign[1] = -1
            else:
                sign[:] = (-1j, 1j)
            shape = [1] * out.ndim
            shape[ax] = 2
            out = out * sign.reshape(shape)
    return out


def _apply_gate(psi, gate, theta):
    """Apply ``gate`` in place to batched tensor ``psi`` of shape (B, 2, ..., 2)."""
    controls = gate.all_controls
    idx = _ctrl_index(controls, psi.ndim)
    block = psi[idx]
    if gate.kind == "h":
        ax = _axis_after_ctrl(gate.qubit, controls)
        psi[idx] = np.moveaxis(np.tensordot(block, _H, axes=([ax], [1])), -1, ax)
        return
    flipped = _pauli_apply(block, gate.generator.pauli, controls)
    if gate.kind == "pauli":
        psi[idx] = np.array(flipped)
        return
    if gate.slot is None:
        a = np.full(psi.shape[0], gate.angle, dtype=float)
    else:
        a = gate.mult * theta[:, gate.slot]
    shape = (-1,) + (1,) * (block.ndim - 1)
    c = np.cos(a / 2).reshape(shape)
    s = np.sin(a / 2).reshape(shape)
    psi[idx] = c * block - 1j * s * flipped


def _insert_projected(psi, generator):
    """Replace ``psi`` by (controlled-subspace projector) x (Pauli) applied to it."""
    idx = _ctrl_index(generator.controls, psi.ndim)
    block = _pauli_apply(psi[idx], generator.pauli, generator.controls)
    out = np.zeros_like(psi)
    out[idx] = block
    return out


def _check_theta(circuit, thetas):
    t = np.asarray(thetas, dtype=float)
    single = t.ndim == 1
    t = np.atleast_2d(t)
    if t.shape[1] != circuit.num_params:
        raise CircuitError(f"expected {circuit.num_params} parameters, got {t.shape[1]}")
    if not np.all(np.isfinite(t)):
        raise CircuitError("non-finite parameter value")
    return t, single


def _run(circuit, t, insert_after=None, insert_op=None):
    B = t.shape[0]
    psi = np.broadcast_to(circuit.init_vector(), (B, circuit.dim)).copy()
    psi = psi.reshape((B,) + (2,) * circuit.num_qubits)
    for i, g in enumerate(circuit.gates):
        _apply_gate(psi, g, t)
        if i == insert_after:
            psi = insert_op(psi)
    return psi.reshape(B, circuit.dim)


def evaluate(circuit: ParametricCircuit, theta) -> np.ndarray:
    """State ``C(theta)``; ``theta`` may be a single vector or a (B, N) batch."""
    t, single = _check_theta(circuit, theta)
    out = _run(circuit, t)
    return out[0] if single else out


def derivative_terms(circuit: ParametricCircuit, n: int):
    """Unitary insertions whose weighted sum gives the tangent of slot ``n``.

    Returns ``(coef, gate_index, pauli)`` triples with
    ``d C / d theta_n = -i/2 * sum coef * C[pauli inserted after gate]``.
    Controls are expanded through ``|pol><pol| = (I +- Z)/2``.
    """
    terms = []
    for gi in circuit.slot_gates(n):
        gen = circuit.gates[gi].generator
        mult = circuit.gates[gi].mult
        for bits in product((0, 1), repeat=len(gen.controls)):
            coef = mult
            ops = list(gen.pauli)
            for (q, pol), b in zip(gen.controls, bits):
                coef *= 0.5 if (b == 0 or pol == 0) else -0.5
                if b:
                    ops[q] = "Z"
            terms.append((coef, gi, "".join(ops)))
    return terms


def insertion_state(circuit, theta, gate_index, pauli) -> np.ndarray:
    """State with the (uncontrolled) Pauli string applied right after a gate."""
    t, single = _check_theta(circuit, theta)
    gen = Generator(pauli)
    out = _run(circuit, t, gate_index, lambda psi: _insert_projected(psi, gen))
    return out[0] if single else out


def derivative_state(circuit: ParametricCircuit, theta, n: int) -> np.ndarray:
    """``gamma_n`` with ``d C / d theta_n = -i/2 gamma_n``.

    Only slots driving a single rotation gate are supported.  For an
    uncontrolled generator ``gamma_n`` is a unit vector; for a controlled one
    it is the projection onto the controlled subspace and has norm <= 1.
    """
    gates = circuit.slot_gates(n)
    if len(gates) != 1:
        raise CircuitError(
            f"slot {n} drives {len(gates)} gates; derivative_state needs exactly one"
        )
    gi = gates[0]
    g = circuit.gates[gi]
    t, single = _check_theta(circuit, theta)
    out = g.mult * _run(circuit, t, gi, lambda psi: _insert_projected(psi, g.generator))
    return out[0] if single else out


def tangents(circuit: ParametricCircuit, theta) -> np.ndarray:
    """All tangent vectors ``d C / d theta_n``; shape (N, 2^Q) or (B, N, 2^Q).

    Unlike :func:`derivative_state` this sums over every gate a slot drives.
    """
    t, single = _check_theta(circuit, theta)
    out = np.zeros((t.shape[0], circuit.num_params, circuit.dim), dtype=complex)
    for n in range(circuit.num_params):
        for gi in circuit.slot_gates(n):
            g = circuit.gates[gi]
            out[:, n] += (-0.5j * g.mult) * _run(
                circuit, t, gi, lambda psi, gen=g.generator: _insert_projected(psi, gen)
            )
    return out[0] if single else out


def real_inner(a, b) -> float:
    """``Re <a, b>`` (conjugate-linear in the first argument)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise CircuitError(f"dimension mismatch {a.shape} vs {b.shape}")
    return float(np.real(np.vdot(a, b)))


# named circuits ----------------------------------------------------------------

def bloch_circuit() -> ParametricCircuit:
    """``R_Z(t2) R_Y(t1)|0>``, sampled on the fundamental domain [0, pi] x [0, 2 pi]."""
    return ParametricCircuit(
        1,
        [ry(1, 0, 0), rz(1, 0, 1)],
        2,
        sample_ranges=((0.0, pi), (0.0, 2 * pi)),
        name="full-bloch",
    )


def great_circle_circuit() -> ParametricCircuit:
    """``R_Y(t)|0>``: a single great circle of the Bloch sphere."""
    return ParametricCircuit(1, [ry(1, 0, 0)], 1, name="great-circle")


# file format -------------------------------------------------------------------

def _controls_from_json(items):
    return tuple((int(c["q"]), int(c.get("polarity", 1))) for c in items or ())


def circuit_from_dict(d: dict) -> ParametricCircuit:
    try:
        Q = int(d["num_qubits"])
        params = d.get("params", [])
        gates = []
        for gd in d["gates"]:
            typ = gd["type"]
            ctrls = _controls_from_json(gd.get("controls"))
            if typ == "rot":
                pauli = gd["pauli"]
                if "slot" in gd:
                    gates.append(Gate("rot", Generator(pauli, ctrls), slot=int(gd["slot"]),
                                      mult=float(gd.get("mult", 1.0))))
                else:
                    gates.append(Gate("rot", Generator(pauli, ctrls), angle=float(gd["angle"])))
            elif typ == "pauli":
                gates.append(Gate("pauli", Generator(gd["pauli"], ctrls)))
            elif typ == "h":
                gates.append(h(int(gd["qubits"][0]), ctrls))
            elif typ in ("x", "cnot", "toffoli", "mcx"):
                qs = [int(q) for q in gd["qubits"]]
                need = {"x": 1, "cnot": 2, "toffoli": 3}.get(typ)
                if need is not None and len(qs) != need:
                    raise CircuitError(f"{typ} takes {need} qubits")
                *cs, tgt = qs
                gates.append(x(Q, tgt, tuple((c, 1) for c in cs) + ctrls))
            else:
                raise CircuitError(f"unknown gate type {typ!r}")
        if not params:
            # no slot table: one default slot per referenced index
            params = [{}] * (1 + max((g.slot for g in gates if g.slot is not None), default=-1))
        init = d.get("initial_state")
        if init is not None:
            init = np.array([complex(re, im) for re, im in init])
        return ParametricCircuit(
            Q,
            gates,
            len(params),
            param_periods=tuple(float(p.get("period", 2 * pi)) for p in params),
            sample_ranges=tuple(
                tuple(p["range"]) if "range" in p else (0.0, float(p.get("period", 2 * pi)))
                for p in params
            ),
            initial_state=init,
            name=d.get("name", ""),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise CircuitError(f"malformed circuit description: {exc!r}") from exc


def circuit_to_dict(circuit: ParametricCircuit) -> dict:
    gates = []
    for g in circuit.gates:
        ctrls = [{"q": q, "polarity": p} for q, p in g.all_controls]
        if g.kind == "h":
            gd = {"type": "h", "qubits": [g.qubit]}
        elif g.kind == "pauli":
            gd = {"type": "pauli", "pauli": g.generator.pauli}
        else:
            gd = {"type": "rot", "pauli": g.generator.pauli}
            if g.slot is not None:
                gd["slot"] = g.slot
                if g.mult != 1.0:
                    gd["mult"] = g.mult
            else:
                gd["angle"] = g.angle
        if ctrls:
            gd["controls"] = ctrls
        gates.append(gd)
    d = {
        "num_qubits": circuit.num_qubits,
        "params": [
            {"period": p, "range": list(r)}
            for p, r in zip(circuit.param_periods, circuit.sample_ranges)
        ],
        "gates": gates,
    }
    if circuit.name:
        d["name"] = circuit.name
    if circuit.initial_state is not None:
        d["initial_state"] = [[z.real, z.imag] for z in circuit.initial_state]
    return d


def load_circuit(path) -> ParametricCircuit:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CircuitError(f"{path}: not valid JSON ({exc})") from exc
    return circuit_from_dict(d)


def save_circuit(circuit: ParametricCircuit, path) -> None:
    Path(path).write_text(json.dumps(circuit_to_dict(circuit), indent=2))
