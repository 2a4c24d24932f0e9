import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrmsim.linalg import expm, opnorm
from qrmsim.metrics import (
    analyse_gate,
    cnot,
    cnot_local_unitaries,
    cnot_residual,
    entangling_power,
    equal_up_to_global_phase,
    gate_operator,
    linear_entropy,
    pauli_basis,
    positive_parts,
    process_fidelity,
    rearrange,
    state_fidelity,
    swap_operator,
)

from conftest import random_unitary


def _loop_rearrange(u, d=2):
    out = np.zeros_like(u)
    for i, j, k, l in itertools.product(range(d), repeat=4):
        out[d * i + j, d * k + l] = u[d * i + k, d * j + l]
    return out


def _loop_linear_entropy(u, d=2):
    r = _loop_rearrange(u, d)
    total = 0.0
    for a, b, c, e in itertools.product(range(d * d), repeat=4):
        total += (r[a, b] * np.conj(r[c, b]) * r[c, e] * np.conj(r[a, e])).real
    return 1 - total / d**4


def test_state_fidelity_basics(rng):
    psi = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi /= np.linalg.norm(psi)
    assert abs(state_fidelity(psi, psi) - 1) < 1e-12
    e0, e1 = np.eye(6)[0], np.eye(6)[1]
    assert state_fidelity(e0, e1) == 0
    assert abs(state_fidelity(np.eye(6) / 6, psi) - 1 / 6) < 1e-12
    assert abs(state_fidelity(np.outer(psi, psi.conj()), psi) - 1) < 1e-12
    with pytest.raises(ValueError):
        state_fidelity(psi, e0[:5])


@given(seed=st.integers(0, 2**16))
def test_state_fidelity_range(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    psi = rng.normal(size=5) + 1j * rng.normal(size=5)
    psi /= np.linalg.norm(psi)
    f = state_fidelity(rho, psi)
    assert -1e-12 <= f <= 1 + 1e-10


def test_rearrange_against_index_loop(rng):
    u = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.array_equal(rearrange(u), _loop_rearrange(u))
    assert np.array_equal(rearrange(rearrange(u)), u)
    v = rng.normal(size=(9, 9))
    assert np.array_equal(rearrange(v), _loop_rearrange(v, 3))
    with pytest.raises(ValueError):
        rearrange(np.eye(6))


def test_rearranged_product_has_rank_one(rng):
    a, b = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
    s = np.linalg.svd(rearrange(np.kron(a, b)), compute_uv=False)
    assert s[0] > 1e-3 and np.all(s[1:] < 1e-12)


def test_rearranged_identity_is_vec_outer_product():
    v = np.eye(2).reshape(4)
    assert np.array_equal(rearrange(np.eye(4)), np.outer(v, v))


def test_swap_entropy_two_paths():
    s = swap_operator(2)
    assert abs(linear_entropy(s) - _loop_linear_entropy(s)) < 1e-12
    assert abs(linear_entropy(s) - 0.75) < 1e-12


@pytest.mark.parametrize("name, U, want", [
    ("identity", np.eye(4), 0.0),
    ("swap", swap_operator(2), 0.0),
    ("cnot", cnot(), 2 / 9),
    ("sqrt swap", expm(-1j * np.pi / 4 * (np.eye(4) - swap_operator(2))), 1 / 6),
])
def test_entangling_power_known_gates(name, U, want):
    assert abs(entangling_power(U) - want) < 1e-12


def test_entangling_power_closed_form():
    for phi in np.linspace(0, np.pi, 20):
        assert abs(entangling_power(gate_operator(phi)) - 2 / 9 * np.sin(phi) ** 2) < 1e-10


def test_entangling_power_sampling_oracle(rng):
    # mean linear entropy of the output over Haar-random product inputs
    U = gate_operator(0.9)
    acc = []
    for _ in range(4000):
        a, b = (random_unitary(rng, 2)[:, 0] for _ in range(2))
        out = (U @ np.kron(a, b)).reshape(2, 2)
        rho = out @ out.conj().T
        acc.append(1 - np.trace(rho @ rho).real)
    mean, err = np.mean(acc), np.std(acc) / np.sqrt(len(acc))
    assert abs(mean - entangling_power(U)) < 4 * err


@given(seed=st.integers(0, 2**16))
def test_entangling_power_local_invariance(seed):
    rng = np.random.default_rng(seed)
    U = random_unitary(rng, 4)
    a, b, c, d = (random_unitary(rng, 2) for _ in range(4))
    V = np.kron(a, b) @ U @ np.kron(c, d)
    ep = entangling_power(U)
    assert abs(entangling_power(V) - ep) < 1e-10
    assert -1e-12 <= ep <= 2 / 9 + 1e-12


def test_entangling_power_rejects_non_unitary():
    with pytest.raises(ValueError):
        entangling_power(2 * np.eye(4))


def test_pauli_basis_order_and_orthogonality():
    basis = pauli_basis(2)
    assert [lab for lab, _ in basis[:5]] == ["II", "IX", "IY", "IZ", "XI"]
    mats = np.array([w for _, w in basis])
    gram = np.einsum("aij,bij->ab", mats.conj(), mats)
    assert np.allclose(gram, 4 * np.eye(16))


@given(seed=st.integers(0, 2**16))
def test_positive_parts_reconstruct(seed):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    parts = positive_parts(W)
    assert np.allclose(sum(c * P for c, P in parts), W, atol=1e-12)
    for _, P in parts:
        assert np.linalg.eigvalsh(P).min() > -1e-12


def test_pauli_strings_have_two_positive_parts():
    counts = [len(positive_parts(w)) for _, w in pauli_basis(2)]
    assert counts[0] == 1 and all(c == 2 for c in counts[1:])


def test_process_fidelity_anchors(rng):
    U = gate_operator(np.pi / 2)
    assert abs(process_fidelity(lambda w: U @ w @ U.conj().T, U) - 1) < 1e-10
    assert abs(process_fidelity(lambda w: np.trace(w) * np.eye(4) / 4, U) - 0.0625) < 1e-12
    V = random_unitary(rng, 4)
    # for a unitary channel the formula reduces to |Tr(U^dag V)|^2 / d^2
    want = abs(np.trace(U.conj().T @ V)) ** 2 / 16
    assert abs(process_fidelity(lambda w: V @ w @ V.conj().T, U) - want) < 1e-12
    outs = [V @ w @ V.conj().T for _, w in pauli_basis(2)]
    assert abs(process_fidelity(outs, U) - want) < 1e-12
    with pytest.raises(ValueError):
        process_fidelity(outs[:3], U)


@given(p=st.floats(0, 1), seed=st.integers(0, 2**16))
def test_process_fidelity_linear_in_channel(p, seed):
    rng = np.random.default_rng(seed)
    U, V1, V2 = (random_unitary(rng, 4) for _ in range(3))

    def c1(w):
        return V1 @ w @ V1.conj().T

    def c2(w):
        return V2 @ w @ V2.conj().T

    mixed = process_fidelity(lambda w: p * c1(w) + (1 - p) * c2(w), U)
    assert abs(mixed - p * process_fidelity(c1, U) - (1 - p) * process_fidelity(c2, U)) < 1e-10


def test_equal_up_to_global_phase(rng):
    B = random_unitary(rng, 4)
    ok, theta, res = equal_up_to_global_phase(np.exp(0.7j) * B, B)
    assert ok and abs(theta - 0.7) < 1e-12 and res < 1e-12
    ok, _, res = equal_up_to_global_phase(np.eye(2), np.array([[0, 1], [1, 0]]))
    assert not ok and res > 1
    with pytest.raises(ValueError):
        equal_up_to_global_phase(np.eye(2), np.eye(3))


def test_gate_operator_is_exp_of_xx():
    xx = np.kron([[0, 1], [1, 0]], [[0, 1], [1, 0]])
    for phi in (0.3, np.pi / 2, 2.0):
        assert opnorm(gate_operator(phi) - expm(0.5j * phi * xx)) < 1e-12


def test_cnot_local_equivalence():
    ok, res = cnot_residual(gate_operator(np.pi / 2))
    assert ok and res < 1e-8
    for u in cnot_local_unitaries():
        assert opnorm(u.conj().T @ u - np.eye(2)) < 1e-12
    ok, _ = cnot_residual(gate_operator(np.pi / 3))
    assert not ok


def test_analyse_gate():
    ga = analyse_gate(gate_operator(np.pi / 2), 0.99)
    assert ga.cnot_equivalent and ga.residual >= 0
    assert abs(ga.entangling_power - 2 / 9) < 1e-12 and ga.process_fidelity == 0.99
