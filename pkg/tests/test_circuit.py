import json
from math import pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bestapprox.circuit import (
    CircuitError,
    Gate,
    Generator,
    ParametricCircuit,
    bloch_circuit,
    circuit_from_dict,
    circuit_to_dict,
    cnot,
    derivative_state,
    derivative_terms,
    evaluate,
    great_circle_circuit,
    h,
    insertion_state,
    load_circuit,
    real_inner,
    rot,
    rx,
    ry,
    rz,
    save_circuit,
    tangents,
    toffoli,
    x,
)
from bestapprox.mmec import MmecSpec, build

S2 = 1 / np.sqrt(2)


def c1():
    return build(MmecSpec(1))


def fd(circuit, theta, n, step=1e-5):
    e = np.zeros(circuit.num_params)
    e[n] = step
    return (evaluate(circuit, theta + e) - evaluate(circuit, theta - e)) / (2 * step)


def test_c1_at_zero_is_ground_state():
    assert np.allclose(evaluate(c1(), [0, 0, 0]), [1, 0])


def test_ry_pi_flips():
    assert abs(abs(np.vdot([0, 1], evaluate(great_circle_circuit(), [pi]))) - 1) < 1e-12


def test_bloch_circuit_closed_form():
    psi = evaluate(bloch_circuit(), [pi / 2, pi / 2])
    target = np.array([1, 1j]) * S2
    assert abs(abs(np.vdot(target, psi)) - 1) < 1e-12


def test_matrix_oracle_for_two_qubit_circuit(rng):
    # kron-based reference simulator
    X = np.array([[0, 1], [1, 0]])
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1, -1])
    I2 = np.eye(2)
    circ = ParametricCircuit(2, [rot(2, {0: "X", 1: "Y"}, 0), cnot(2, 0, 1), rz(2, 1, 1), h(0)], 2)
    t = rng.uniform(0, 2 * pi, 2)
    XY = np.kron(X, Y)
    U1 = np.cos(t[0] / 2) * np.eye(4) - 1j * np.sin(t[0] / 2) * XY
    CN = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    U3 = np.kron(I2, np.cos(t[1] / 2) * I2 - 1j * np.sin(t[1] / 2) * Z)
    H = np.kron(np.array([[1, 1], [1, -1]]) * S2, I2)
    ref = H @ U3 @ CN @ U1 @ np.array([1, 0, 0, 0])
    assert np.allclose(evaluate(circ, t), ref, atol=1e-12)


def test_controlled_rotation_acts_on_subspace_only():
    circ = ParametricCircuit(2, [x(2, 0), rot(2, {1: "Y"}, 0, controls=((0, 1),))], 1)
    assert np.allclose(evaluate(circ, [pi]), [0, 0, 0, 1])
    circ0 = ParametricCircuit(2, [rot(2, {1: "Y"}, 0, controls=((0, 1),))], 1)
    assert np.allclose(evaluate(circ0, [pi]), [1, 0, 0, 0])


def test_toffoli_truth_table():
    for bits in range(8):
        init = np.zeros(8)
        init[bits] = 1
        circ = ParametricCircuit(3, [toffoli(3, 0, 1, 2), rz(3, 0, 0)], 1, initial_state=init)
        out = evaluate(circ, [0.0])
        expect = bits ^ 1 if bits >= 6 else bits
        assert abs(out[expect]) == pytest.approx(1)


def test_batch_evaluation_matches_single(rng):
    circ = build(MmecSpec(2))
    T = rng.uniform(0, 2 * pi, (5, circ.num_params))
    B = evaluate(circ, T)
    for t, b in zip(T, B):
        assert np.allclose(evaluate(circ, t), b)


def test_theta_length_mismatch():
    with pytest.raises(CircuitError):
        evaluate(c1(), [0.1, 0.2])


def test_qubit_out_of_range():
    with pytest.raises(CircuitError):
        ParametricCircuit(1, [rx(2, 1, 0)], 1)


def test_unused_slot_rejected():
    with pytest.raises(CircuitError):
        ParametricCircuit(1, [rx(1, 0, 0)], 2)


def test_generator_validation():
    with pytest.raises(CircuitError):
        Generator("II")
    with pytest.raises(CircuitError):
        Generator("XI", ((0, 1),))
    with pytest.raises(CircuitError):
        Generator("XI", ((1, 2),))


# derivative states --------------------------------------------------------------

def test_gamma_of_ry_at_zero():
    g = derivative_state(great_circle_circuit(), [0.0], 0)
    assert np.allclose(g, [0, 1j])
    assert np.allclose(-0.5j * g, fd(great_circle_circuit(), np.array([0.0]), 0))


def test_gamma_of_rx_at_zero():
    circ = ParametricCircuit(1, [rx(1, 0, 0)], 1)
    assert np.allclose(derivative_state(circ, [0.0], 0), [0, 1])


def test_bloch_circuit_gradients_match_finite_differences(rng):
    circ = bloch_circuit()
    for _ in range(10):
        t = rng.uniform(0, 2 * pi, 2)
        for n in range(2):
            err = np.abs(-0.5j * derivative_state(circ, t, n) - fd(circ, t, n)).max()
            assert err < 1e-8


def test_gradient_convergence_order(rng):
    circ = c1()
    t = rng.uniform(0, 2 * pi, 3)
    for n in range(3):
        exact = -0.5j * derivative_state(circ, t, n)
        e1 = np.linalg.norm(exact - fd(circ, t, n, 1e-3))
        e2 = np.linalg.norm(exact - fd(circ, t, n, 1e-4))
        assert np.log10(e1 / e2) >= 1.9


def test_controlled_slot_tangent_matches_finite_differences(rng):
    circ = build(MmecSpec(2))
    t = rng.uniform(0, 2 * pi, circ.num_params)
    T = tangents(circ, t)
    for n in range(circ.num_params):
        assert np.abs(T[n] - fd(circ, t, n)).max() < 1e-8
        assert np.allclose(-0.5j * derivative_state(circ, t, n), T[n], atol=1e-12)


def test_derivative_terms_sum_to_gamma(rng):
    circ = build(MmecSpec(2))
    t = rng.uniform(0, 2 * pi, circ.num_params)
    for n in range(circ.num_params):
        total = sum(c * insertion_state(circ, t, gi, p) for c, gi, p in derivative_terms(circ, n))
        assert np.allclose(total, derivative_state(circ, t, n), atol=1e-12)


def test_multi_gate_slot_rejected_but_tangent_supported(rng):
    circ = ParametricCircuit(1, [ry(1, 0, 0), rz(1, 0, 0, mult=2.0)], 1)
    with pytest.raises(CircuitError):
        derivative_state(circ, [0.3], 0)
    t = np.array([0.3])
    assert np.allclose(tangents(circ, t)[0], fd(circ, t, 0), atol=1e-9)


def test_derivative_slot_out_of_range():
    with pytest.raises(CircuitError):
        derivative_state(c1(), [0, 0, 0], 3)


# inner products ------------------------------------------------------------------

def test_real_inner_examples():
    a = np.array([1, 0], dtype=complex)
    assert real_inner(a, a) == 1
    assert real_inner(a, [0, 1]) == 0
    assert real_inner(a, np.array([1, 1j]) * S2) == pytest.approx(0.7071067811865476, abs=1e-12)


def test_real_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        real_inner([1, 0], [1, 0, 0, 0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=7, max_size=7))
def test_norm_preserved_and_periodic(theta):
    # slot 0 is an uncontrolled rotation (period 2 pi), slot 3 a controlled one (4 pi)
    circ = build(MmecSpec(2))
    t = np.array(theta)
    psi = evaluate(circ, t)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    for n in (0, 3):
        s = t.copy()
        s[n] += circ.param_periods[n]
        assert abs(abs(np.vdot(evaluate(circ, s), psi)) - 1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_real_inner_symmetric(seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal(4) + 1j * r.standard_normal(4)
    b = r.standard_normal(4) + 1j * r.standard_normal(4)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    assert real_inner(a, b) == real_inner(b, a)
    assert -1 - 1e-12 <= real_inner(a, b) <= 1 + 1e-12


# file format ---------------------------------------------------------------------

def test_json_roundtrip(tmp_path, rng):
    circ = build(MmecSpec(2))
    p = tmp_path / "c.json"
    save_circuit(circ, p)
    back = load_circuit(p)
    t = rng.uniform(0, 2 * pi, circ.num_params)
    assert np.allclose(evaluate(back, t), evaluate(circ, t))


def test_json_named_gates():
    d = {"num_qubits": 3, "params": [{"period": 4 * pi}],
         "gates": [{"type": "h", "qubits": [0]}, {"type": "cnot", "qubits": [0, 1]},
                   {"type": "toffoli", "qubits": [0, 1, 2]},
                   {"type": "rot", "pauli": "IIZ", "slot": 0, "controls": [{"q": 0, "polarity": 0}]},
                   {"type": "rot", "pauli": "XII", "angle": 0.25}]}
    circ = circuit_from_dict(d)
    assert circ.param_periods == (4 * pi,)
    assert json.loads(json.dumps(circuit_to_dict(circ)))["num_qubits"] == 3


def test_json_malformed():
    with pytest.raises(CircuitError):
        circuit_from_dict({"gates": []})
    with pytest.raises(CircuitError):
        circuit_from_dict({"num_qubits": 1, "params": [], "gates": [{"type": "swap"}]})


def test_fixed_gate_kinds():
    g = Gate("rot", Generator("X"), angle=pi)
    circ = ParametricCircuit(1, [g, ry(1, 0, 0)], 1)
    assert np.allclose(np.abs(evaluate(circ, [0.0])), [0, 1])


def test_controlled_slot_is_not_2pi_periodic():
    circ = build(MmecSpec(2))
    t = np.full(7, 0.4)
    s = t.copy()
    s[3] += 2 * pi
    assert abs(abs(np.vdot(evaluate(circ, s), evaluate(circ, t))) - 1) > 1e-3
    assert circ.param_periods[0] == 2 * pi and circ.param_periods[3] == 4 * pi
