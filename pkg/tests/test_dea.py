from math import pi

import numpy as np
import pytest

from bestapprox.circuit import ParametricCircuit, bloch_circuit, evaluate, rx, ry, rz
from bestapprox.dea import (
    ExactMode,
    GramMatrix,
    ShotMode,
    is_independent,
    jacobian_gram,
    minimality_certificate,
    restrict,
    scan,
)
from bestapprox.mmec import MmecSpec, build


def rxrx():
    return ParametricCircuit(1, [rx(1, 0, 0), rx(1, 0, 1)], 2)


def c1():
    return build(MmecSpec(1))


def test_single_slot_gram():
    S = jacobian_gram(ParametricCircuit(1, [ry(1, 0, 0)], 1), [0.7])
    assert np.allclose(S.entries, [[0.25]])


def test_commuting_generators_singular():
    S = jacobian_gram(rxrx(), [0.4, 1.1])
    assert np.allclose(S.entries, 0.25 * np.ones((2, 2)), atol=1e-14)
    assert not is_independent(S, 1e-8)


def test_c1_gram_invertible():
    S = jacobian_gram(c1(), [0.3, 0.7, 1.1])
    assert S.smallest_eigenvalue() > 1e-3
    assert is_independent(S, 1e-8)


def test_is_independent_basics():
    assert not is_independent(0.25 * np.ones((2, 2)), 1e-8)
    assert is_independent(np.eye(3), 1e-8)
    with pytest.raises(ValueError):
        is_independent(np.ones((2, 3)), 1e-8)


def test_gram_symmetric_psd(rng):
    c = build(MmecSpec(2))
    for _ in range(5):
        S = jacobian_gram(c, rng.uniform(0, 2 * pi, 7)).entries
        assert np.allclose(S, S.T, atol=1e-12)
        assert np.linalg.eigvalsh(S).min() > -1e-10


def test_gram_subset_of_slots(rng):
    c = build(MmecSpec(2))
    t = rng.uniform(0, 2 * pi, 7)
    full = jacobian_gram(c, t).entries
    sub = jacobian_gram(c, t, [5, 1]).entries
    assert np.allclose(sub, full[np.ix_([5, 1], [5, 1])])


def test_scan_partitions():
    rep = scan(c1(), [0.3, 0.7, 1.1])
    assert rep.independent_slots == [0, 1, 2] and not rep.redundant_slots
    rep = scan(rxrx(), [0.4, 1.1])
    assert rep.independent_slots == [0] and rep.redundant_slots == {1: 1.1}


def test_scan_c2_all_independent(rng):
    c = build(MmecSpec(2))
    rep = scan(c, rng.uniform(0, 4 * pi, 7))
    assert rep.independent_slots == list(range(7))


@pytest.mark.parametrize("tol", [1e-10, 1e-8, 1e-6])
def test_scan_tolerance_dithering(tol, rng):
    t = rng.uniform(0, 2 * pi, 3)
    assert scan(c1(), t, tol).independent_slots == [0, 1, 2]
    assert scan(rxrx(), t[:2], tol).independent_slots == [0]


def test_scan_default_probe_is_recorded():
    rep = scan(c1(), seed=3)
    rep2 = scan(c1(), rep.probe_theta)
    assert rep.as_dict() == rep2.as_dict()


def test_shot_mode_reproduces_exact_partition():
    for circ in (c1(), rxrx(), bloch_circuit()):
        t = np.linspace(0.4, 1.3, circ.num_params)
        ex = scan(circ, t)
        sh = scan(circ, t, mode=ShotMode(10 ** 6, 5))
        assert sh.independent_slots == ex.independent_slots


def test_shot_gram_close_to_exact():
    c = c1()
    t = np.array([0.3, 0.7, 1.1])
    S = jacobian_gram(c, t, mode=ShotMode(10 ** 6, 1))
    E = jacobian_gram(c, t, mode=ExactMode())
    assert np.all(np.abs(S.entries - E.entries) <= 5 * S.std_error + 1e-12)


def test_minimality_certificate(rng):
    probes = [rng.uniform(0, 2 * pi, 3) for _ in range(100)]
    worst, vals = minimality_certificate(c1(), probes)
    assert worst > 0 and len(vals) == 100
    dup = ParametricCircuit(1, [rz(1, 0, 0), ry(1, 0, 1), ry(1, 0, 2)], 3)
    worst, vals = minimality_certificate(dup, [rng.uniform(0, 2 * pi, 3) for _ in range(10)])
    assert max(vals) <= 1e-8
    with pytest.raises(ValueError):
        minimality_certificate(c1(), [])


def test_restrict_freezes_redundant_slots():
    rep = scan(rxrx(), [0.4, 1.1])
    r = restrict(rxrx(), rep)
    assert r.num_params == 1
    assert np.allclose(evaluate(r, [0.4]), evaluate(rxrx(), [0.4, 1.1]))


def test_gram_matrix_validation():
    with pytest.raises(ValueError):
        GramMatrix(np.ones(3))
