import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrmsim.hilbert import (
    TruncationWarning,
    build_layout,
    cat_normalization,
    cat_state,
    coherent_vector,
    collective_operator,
    collective_state,
    displacement_matrix,
    displacement_operator,
    ground_state,
    partial_trace_mode,
    qubit_operator,
    spin_matrix,
    spin_state,
    vacuum,
    zbasis_to_xbasis_coefficients,
)
from qrmsim.linalg import commutator, opnorm


@pytest.mark.parametrize("n, fock, dim", [(2, 10, 40), (1, 2, 4), (6, 25, 1600)])
def test_layout_dimension(n, fock, dim):
    assert build_layout(n, fock).dim == dim


@pytest.mark.parametrize("n, fock", [(0, 4), (2, 1), (-1, 5), (2, 0)])
def test_layout_rejects_bad_sizes(n, fock):
    with pytest.raises(ValueError):
        build_layout(n, fock)


def test_symmetric_layout_dimension():
    layout = build_layout(4, 10, symmetric=True)
    assert layout.spin_dim == 5 and layout.dim == 50
    assert layout.as_full().dim == 160


def test_single_spin_z_spectrum():
    layout = build_layout(1, 5)
    w = np.linalg.eigvalsh(collective_operator(layout, "z"))
    assert np.allclose(np.sort(w), [-0.5] * 5 + [0.5] * 5)


def test_two_spin_x_block_spectrum():
    # brute force: diagonalize (X1 + X2)/2 built from explicit Kronecker products
    x = np.array([[0, 1], [1, 0]])
    jx = (np.kron(x, np.eye(2)) + np.kron(np.eye(2), x)) / 2
    assert np.allclose(np.sort(np.linalg.eigvalsh(jx)), [-1, 0, 0, 1])
    assert np.allclose(spin_matrix(2, "x"), jx)
    layout = build_layout(2, 3)
    w = np.sort(np.linalg.eigvalsh(collective_operator(layout, "x")))
    assert np.allclose(w, np.repeat([-1, 0, 0, 1], 3))


@pytest.mark.parametrize("n", range(1, 6))
@pytest.mark.parametrize("sym", [False, True])
def test_su2_structure(n, sym):
    jx, jy, jz = (spin_matrix(n, a, sym) for a in "xyz")
    j2 = spin_matrix(n, "squared", sym)
    assert opnorm(commutator(jx, jy) - 1j * jz) < 1e-12
    assert opnorm(commutator(jy, jz) - 1j * jx) < 1e-12
    assert opnorm(commutator(jz, jx) - 1j * jy) < 1e-12
    for op in (jx, jy, jz):
        assert opnorm(commutator(j2, op)) < 1e-12


@pytest.mark.parametrize("n", range(1, 6))
def test_ladder_coefficients(n):
    j = n / 2
    jp, jm = spin_matrix(n, "+", True), spin_matrix(n, "-", True)
    for k in range(n + 1):
        m = k - j
        ket = spin_state(n, m, "z", True)
        if k < n:
            want = math.sqrt(j * (j + 1) - m * (m + 1)) * spin_state(n, m + 1, "z", True)
            assert np.allclose(jp @ ket, want, atol=1e-10)
        if k > 0:
            want = math.sqrt(j * (j + 1) - m * (m - 1)) * spin_state(n, m - 1, "z", True)
            assert np.allclose(jm @ ket, want, atol=1e-10)


def test_qubit_ladder_matches_basis_convention():
    layout = build_layout(1, 2)
    sp_ = qubit_operator(layout, 0, "+")
    g0 = ground_state(layout)
    e0 = np.kron([0, 1], vacuum(2))
    assert np.allclose(sp_ @ g0, e0)
    assert np.allclose(collective_operator(layout, "z") @ g0, -0.5 * g0)


def test_qubit_operator_rejected_on_symmetric_layout():
    with pytest.raises(ValueError):
        qubit_operator(build_layout(2, 3, symmetric=True), 0, "-")


def test_collective_state_examples():
    layout = build_layout(2, 4)
    gg = np.zeros(layout.dim)
    gg[0] = 1
    assert np.allclose(collective_state(layout, 1, -1, "z"), gg)
    plus = spin_state(1, 0.5, "x")
    assert np.allclose(plus, np.array([1, 1]) / np.sqrt(2))


@given(n=st.integers(1, 5), k=st.integers(0, 5), axis=st.sampled_from("xz"), sym=st.booleans())
def test_collective_states_are_eigenvectors(n, k, axis, sym):
    k = min(k, n)
    j = n / 2
    m = k - j
    layout = build_layout(n, 3, symmetric=sym)
    psi = collective_state(layout, j, m, axis)
    assert abs(np.linalg.norm(psi) - 1) < 1e-10
    ja = collective_operator(layout, axis)
    j2 = collective_operator(layout, "squared")
    assert np.linalg.norm(ja @ psi - m * psi) < 1e-10
    assert np.linalg.norm(j2 @ psi - j * (j + 1) * psi) < 1e-10


def test_x_states_are_rotated_z_states():
    # |j,m>_x = exp(-i pi/2 J_y)|j,m>_z, built independently from Kronecker products
    y = np.array([[0, 1j], [-1j, 0]]) / 2
    for n in range(1, 4):
        jy = sum(np.kron(np.kron(np.eye(2**k), y), np.eye(2 ** (n - k - 1))) for k in range(n))
        w, v = np.linalg.eigh(jy)
        rot = v @ np.diag(np.exp(-1j * np.pi / 2 * w)) @ v.conj().T
        for k in range(n + 1):
            m = k - n / 2
            assert np.allclose(spin_state(n, m, "x"), rot @ spin_state(n, m, "z"), atol=1e-12)


def test_invalid_jm_rejected():
    layout = build_layout(2, 3)
    with pytest.raises(ValueError):
        collective_state(layout, 1, 2)
    with pytest.raises(ValueError):
        collective_state(layout, 1, 0.5)
    with pytest.raises(ValueError):
        collective_state(layout, 0.5, 0.5)


@pytest.mark.parametrize("n", range(1, 7))
def test_cm_coefficients(n):
    c = zbasis_to_xbasis_coefficients(n)
    assert abs(np.sum(np.abs(c) ** 2) - 1) < 1e-12
    j = n / 2
    xs = [spin_state(n, k - j, "x", True) for k in range(n + 1)]
    down = sum(cm * x for cm, x in zip(c, xs))
    assert 1 - abs(np.vdot(spin_state(n, -j, "z", True), down)) ** 2 < 1e-12
    up = sum(cm * (-1) ** (n - k) * x for k, (cm, x) in enumerate(zip(c, xs)))
    assert 1 - abs(np.vdot(spin_state(n, j, "z", True), up)) ** 2 < 1e-12


def test_cm_magnitudes_match_brute_force():
    for n, want in ((1, [2**-0.5] * 2), (2, [0.5, 2**-0.5, 0.5])):
        assert np.allclose(np.abs(zbasis_to_xbasis_coefficients(n)), want)


def test_displacement_identities():
    layout = build_layout(2, 30)
    assert np.allclose(displacement_operator(layout, 0), np.eye(layout.dim))
    beta = 1.1 - 0.4j
    d = displacement_matrix(30, beta)
    assert opnorm(d @ displacement_matrix(30, -beta) - np.eye(30)) < 1e-10
    v = coherent_vector(30, beta)
    n = np.arange(30)
    assert abs(np.sum(n * np.abs(v) ** 2) - abs(beta) ** 2) < 1e-8


def test_coherent_amplitudes_match_series():
    beta = 0.8 + 0.6j
    v = coherent_vector(40, beta)
    series = np.array([np.exp(-abs(beta) ** 2 / 2) * beta**k / math.sqrt(math.factorial(k)) for k in range(40)])
    assert np.allclose(v, series, atol=1e-12)


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        displacement_matrix(8, 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        displacement_matrix(16, 2.0)


def test_cat_states():
    layout = build_layout(1, 40)
    assert np.allclose(cat_state(layout, 0, "even"), vacuum(40))
    with pytest.raises(ValueError):
        cat_state(layout, 0, "odd")
    with pytest.raises(ValueError):
        cat_normalization(0, "odd")


@given(re=st.floats(-1.5, 1.5), im=st.floats(-1.5, 1.5))
def test_cat_orthogonality_and_normalization(re, im):
    alpha = complex(re, im)
    layout = build_layout(1, 50)
    even = cat_state(layout, alpha, "even")
    assert abs(np.linalg.norm(even) - 1) < 1e-10
    if abs(alpha) > 1e-3:
        odd = cat_state(layout, alpha, "odd")
        assert abs(np.vdot(even, odd)) < 1e-10
        raw = coherent_vector(50, alpha) - coherent_vector(50, -alpha)
        assert abs(np.linalg.norm(raw) - 1 / cat_normalization(alpha, "odd")) < 1e-10
    raw = coherent_vector(50, alpha) + coherent_vector(50, -alpha)
    assert abs(np.linalg.norm(raw) - 1 / cat_normalization(alpha, "even")) < 1e-10


def test_partial_trace(rng):
    layout = build_layout(2, 3)
    spin = rng.normal(size=4) + 1j * rng.normal(size=4)
    spin /= np.linalg.norm(spin)
    mode = rng.normal(size=3) + 1j * rng.normal(size=3)
    mode /= np.linalg.norm(mode)
    psi = np.kron(spin, mode)
    want = np.outer(spin, spin.conj())
    assert np.allclose(partial_trace_mode(layout, psi), want)
    rho = np.outer(psi, psi.conj())
    assert np.allclose(partial_trace_mode(layout, rho), want)
    assert np.allclose(partial_trace_mode(layout, np.stack([rho, rho])), [want, want])


def test_sparse_and_dense_agree():
    layout = build_layout(3, 8)
    for axis in ("x", "y", "z", "+", "-"):
        assert np.abs(collective_operator(layout, axis, sparse=True).toarray()
                      - collective_operator(layout, axis)).max() < 1e-12
    for k, which in itertools.product(range(3), "xyz+-"):
        assert np.abs(qubit_operator(layout, k, which, sparse=True).toarray()
                      - qubit_operator(layout, k, which)).max() < 1e-12
