import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qseal import quantum_core as qc
from qseal.errors import ArityExceeded, EmptySubsetWithUnitDemand, NotNormalized, NotProductState
from qseal.rng import stream
from qseal.stats import within_sigma

from .conftest import random_state

angles = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)


def projector(v):
    return np.outer(v, v)


def test_pure_qubit_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        qc.PureQubit(1.0, 1.0)
    with pytest.raises(NotNormalized):
        qc.PureQubit(float("nan"), 0.0)


@given(theta=angles, bit=st.integers(0, 1))
def test_sealed_qubit_amplitudes(theta, bit):
    q = qc.make_sealed_qubit(bit, theta)
    assert q.prob(bit) == pytest.approx(math.cos(theta) ** 2, abs=1e-12)
    assert q.prob(1 - bit) == pytest.approx(math.sin(theta) ** 2, abs=1e-12)


def test_sealed_qubit_rejects_nonfinite():
    with pytest.raises(ValueError):
        qc.make_sealed_qubit(0, float("inf"))


@given(theta=angles, phi=angles)
def test_projection_branches_match_matrix_oracle(theta, phi):
    psi = qc.make_sealed_qubit(0, theta)
    t = qc.rotate(qc.ZERO, phi)
    P = projector(t.vector)
    p_ok = float(psi.vector @ P @ psi.vector)
    branches = qc.project_branches(psi, t)
    assert sum(p for p, _, _ in branches) == pytest.approx(1.0)
    for p, ok, post in branches:
        if ok:
            assert p == pytest.approx(p_ok, abs=1e-12)
            assert post.isclose(t)
        else:
            assert p == pytest.approx(1 - p_ok, abs=1e-12)
            rest = (np.eye(2) - P) @ psi.vector
            rest /= np.linalg.norm(rest)
            assert post.isclose(qc.PureQubit(*rest), tol=1e-7)


def test_projection_of_exact_target_is_deterministic(rng):
    q = qc.make_sealed_qubit(1, 0.2)
    for _ in range(100):
        ok, post = qc.project(q, q, rng)
        assert ok and post == q


def test_measure_z_born_frequencies():
    q = qc.make_sealed_qubit(0, 0.5)
    rng = stream(1, 2)
    T = 20000
    ones = sum(qc.measure_z(q, rng)[0] for _ in range(T))
    assert within_sigma(ones / T, math.sin(0.5) ** 2, T)


def test_basis2_vectors_orthonormal():
    v0, v1 = qc.Basis2(math.radians(15)).vectors
    assert v0.overlap(v1) == pytest.approx(0.0, abs=1e-15)
    assert v0.overlap(v0) == pytest.approx(1.0)


def test_measure_basis2_collapses_to_basis_vector(rng):
    basis = qc.Basis2(0.3)
    out, post = qc.measure_basis2(qc.ZERO, basis, rng)
    assert post == basis.vectors[out]


# joint states


def test_joint_state_validation():
    with pytest.raises(NotNormalized):
        qc.JointState(1, np.array([1.0, 1.0]))
    with pytest.raises(ArityExceeded):
        qc.JointState(3, np.ones(8) / math.sqrt(8), cap=2)
    with pytest.raises(ValueError):
        qc.JointState(2, np.array([1.0, 0.0]))


def test_joint_amplitudes_read_only():
    s = qc.tensor([qc.ZERO, qc.ONE])
    with pytest.raises(ValueError):
        s.amps[0] = 1.0


def test_tensor_uses_msb_first_ordering():
    s = qc.tensor([qc.ONE, qc.ZERO])
    assert np.flatnonzero(s.amps).tolist() == [0b10]
    assert qc.bits_to_index("10") == 2
    assert qc.index_to_bits(2, 2) == (1, 0)


def test_tensor_respects_cap():
    with pytest.raises(ArityExceeded):
        qc.tensor([qc.ZERO] * 3, cap=2)


@given(thetas=st.lists(angles, min_size=1, max_size=5))
@settings(max_examples=50)
def test_split_inverts_tensor(thetas):
    qubits = [qc.make_sealed_qubit(i % 2, t) for i, t in enumerate(thetas)]
    joint = qc.tensor(qubits)
    back = qc.split_to_qubits(joint)
    assert np.allclose(qc.tensor(back).amps, joint.amps, atol=1e-9)
    for q, b in zip(qubits[:-1], back[:-1]):
        assert q.isclose(b, tol=1e-9)


def test_split_rejects_entangled():
    bell = qc.JointState(2, np.array([1, 0, 0, 1]) / math.sqrt(2))
    assert not qc.is_product(bell)
    with pytest.raises(NotProductState):
        qc.split_to_qubits(bell)


def test_subset_projector_matches_dense_oracle():
    gen = stream(3, 1)
    psi = random_state(gen, 4)
    state = qc.JointState(4, psi)
    qubits = [2, 0]
    accepted = ["01", "11"]
    # dense projector built from basis kets
    P = np.zeros((16, 16))
    for idx in range(16):
        bits = qc.index_to_bits(idx, 4)
        if f"{bits[2]}{bits[0]}" in accepted:
            P[idx, idx] = 1.0
    p_ok = float(psi @ P @ psi)
    assert qc.subset_probability(state, accepted, qubits) == pytest.approx(p_ok)
    branches = qc.joint_project_branches(state, accepted, qubits)
    (p1, ok1, s1), (p2, ok2, s2) = branches
    assert ok1 and not ok2
    assert p1 == pytest.approx(p_ok) and p2 == pytest.approx(1 - p_ok)
    want = P @ psi / np.linalg.norm(P @ psi)
    assert np.allclose(s1.amps, want)


def test_single_attempt_probability_is_sum_of_products():
    thetas = [0.1, -0.2, 0.15]
    bits = [0, 1, 1]
    qubits = [qc.make_sealed_qubit(b, t) for b, t in zip(bits, thetas)]
    accepted = [(0, 1, 1), (1, 0, 0), (1, 1, 1)]
    expected = sum(math.prod(q.prob(x) for q, x in zip(qubits, xs)) for xs in accepted)
    assert qc.subset_probability(qc.tensor(qubits), accepted) == pytest.approx(expected, abs=1e-14)


def test_empty_accepted_set_warns_and_fails(rng):
    s = qc.tensor([qc.ZERO, qc.ONE])
    with pytest.warns(EmptySubsetWithUnitDemand):
        ok, post = qc.joint_project_subset(s, [], rng)
    assert not ok and post is s


def test_accepted_out_of_range():
    with pytest.raises(ValueError):
        qc.subset_mask(2, ["111"], [0, 1])


def test_project_qubit_in_joint_matches_dense_oracle():
    gen = stream(4, 0)
    psi = random_state(gen, 3)
    state = qc.JointState(3, psi)
    t = qc.make_sealed_qubit(1, 0.3)
    P = np.kron(np.kron(np.eye(2), projector(t.vector)), np.eye(2))
    p_ok = float(psi @ P @ psi)
    (p, ok, post), (q, bad, rest) = qc.project_qubit_branches(state, 1, t)
    assert ok and not bad
    assert p == pytest.approx(p_ok) and q == pytest.approx(1 - p_ok)
    assert np.allclose(post.amps, P @ psi / np.linalg.norm(P @ psi))
    other = (np.eye(8) - P) @ psi
    assert np.allclose(rest.amps, other / np.linalg.norm(other))


def test_measure_qubit_z_frequencies():
    state = qc.tensor([qc.make_sealed_qubit(0, 0.4), qc.make_sealed_qubit(1, 0.2)])
    gen = stream(5, 0)
    T = 20000
    ones = sum(qc.measure_qubit_z(state, 0, gen)[0] for _ in range(T))
    assert within_sigma(ones / T, math.sin(0.4) ** 2, T)
