"""Composite Hilbert space of N qubits and one truncated bosonic mode.

Basis conventions
-----------------
* Qubit 1 is the most significant tensor factor, the boson mode is last.
* Each qubit uses the ordering ``(|g>, |e>)`` so ``sigma_z = diag(-1, +1)`` and
  ``|gg...g>`` is spin index 0.
* A *symmetric* layout replaces the ``2**N`` qubit register by the ``N + 1``
  Dicke states ``|N/2, m>_z`` (index ``k = m + N/2``). It is only valid for
  permutation-symmetric dynamics and is never used for individual-qubit
  dissipation.

Every operator returned here is a dense ``numpy`` array unless ``sparse=True``
is requested. Cached arrays are marked read-only.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import expm, readonly

__all__ = [
    "HilbertLayout",
    "TruncationWarning",
    "annihilation",
    "boson_annihilation",
    "build_layout",
    "cat_normalization",
    "cat_state",
    "coherent_vector",
    "collective_operator",
    "collective_state",
    "displacement_matrix",
    "displacement_operator",
    "embed",
    "ground_state",
    "number_operator",
    "partial_trace_mode",
    "qubit_operator",
    "spin_matrix",
    "spin_state",
    "vacuum",
    "zbasis_to_xbasis_coefficients",
]

_AXES = {
    "x": "x", "y": "y", "z": "z",
    "+": "+", "plus": "+",
    "-": "-", "−": "-", "minus": "-",
    "squared": "sq", "sq": "sq", "J2": "sq",
}


class TruncationWarning(UserWarning):
    """The boson truncation is too small for the requested displacement."""


@dataclass(frozen=True)
class HilbertLayout:
    """Tensor-product structure ``(qubits) x (boson mode)``."""

    n_qubits: int
    fock_dim: int
    symmetric: bool = False

    def __post_init__(self):
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ValueError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got {self.fock_dim!r}")

    @property
    def spin_dim(self) -> int:
        return self.n_qubits + 1 if self.symmetric else 2**self.n_qubits

    @property
    def dim(self) -> int:
        return self.spin_dim * self.fock_dim

    @property
    def j(self) -> float:
        return self.n_qubits / 2

    def with_fock_dim(self, fock_dim: int) -> "HilbertLayout":
        return HilbertLayout(self.n_qubits, fock_dim, self.symmetric)

    def as_full(self) -> "HilbertLayout":
        return HilbertLayout(self.n_qubits, self.fock_dim, False)


def build_layout(n_qubits: int, fock_dim: int, symmetric: bool = False) -> HilbertLayout:
    return HilbertLayout(n_qubits, fock_dim, symmetric)


# ---------------------------------------------------------------------------
# single-factor matrices

_SIGMA = {
    "+": np.array([[0, 0], [1, 0]], dtype=complex),
    "-": np.array([[0, 1], [0, 0]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


def _axis(axis: str) -> str:
    try:
        return _AXES[axis]
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}") from None


@functools.lru_cache(maxsize=None)
def boson_annihilation(fock_dim: int) -> np.ndarray:
    return readonly(np.diag(np.sqrt(np.arange(1, fock_dim)), 1).astype(complex))


def _qubit_factor(n_qubits: int, k: int, op: np.ndarray) -> np.ndarray:
    left = np.eye(2**k)
    right = np.eye(2 ** (n_qubits - k - 1))
    return np.kron(np.kron(left, op), right)


@functools.lru_cache(maxsize=None)
def spin_matrix(n_qubits: int, axis: str, symmetric: bool = False) -> np.ndarray:
    """Collective spin operator on the qubit register only."""
    axis = _axis(axis)
    if axis == "sq":
        jx, jy, jz = (spin_matrix(n_qubits, a, symmetric) for a in "xyz")
        return readonly(jx @ jx + jy @ jy + jz @ jz)
    if symmetric:
        j = n_qubits / 2
        m = np.arange(n_qubits + 1) - j
        jp = np.diag(np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1)), -1).astype(complex)
        mats = {
            "+": jp,
            "-": jp.T.copy(),
            "z": np.diag(m).astype(complex),
            "x": (jp + jp.T) / 2,
            "y": (jp - jp.T) / 2j,
        }
        return readonly(mats[axis])
    scale = 1.0 if axis in "+-" else 0.5
    out = sum(_qubit_factor(n_qubits, k, _SIGMA[axis]) for k in range(n_qubits))
    return readonly(scale * out)


def embed(layout: HilbertLayout, spin: np.ndarray | None = None,
          boson: np.ndarray | None = None, sparse: bool = False):
    """Return ``spin (x) boson`` with identities for missing factors."""
    if sparse:
        s = sp.identity(layout.spin_dim, format="csr") if spin is None else sp.csr_matrix(spin)
        b = sp.identity(layout.fock_dim, format="csr") if boson is None else sp.csr_matrix(boson)
        return sp.kron(s, b, format="csr").astype(complex)
    s = np.eye(layout.spin_dim) if spin is None else spin
    b = np.eye(layout.fock_dim) if boson is None else boson
    return np.kron(s, b).astype(complex)


def annihilation(layout: HilbertLayout, sparse: bool = False):
    return embed(layout, boson=boson_annihilation(layout.fock_dim), sparse=sparse)


def number_operator(layout: HilbertLayout, sparse: bool = False):
    a = boson_annihilation(layout.fock_dim)
    return embed(layout, boson=a.conj().T @ a, sparse=sparse)


def collective_operator(layout: HilbertLayout, axis: str, sparse: bool = False):
    """Collective operator ``J_axis`` (identity on the mode).

    ``axis`` is one of ``x, y, z, +, -, squared``.
    """
    return embed(layout, spin=spin_matrix(layout.n_qubits, axis, layout.symmetric), sparse=sparse)


def qubit_operator(layout: HilbertLayout, k: int, which: str, sparse: bool = False):
    """Pauli (or ladder) operator of qubit ``k`` (0-based)."""
    if layout.symmetric:
        raise ValueError("single-qubit operators are not defined on a symmetric layout")
    if not 0 <= k < layout.n_qubits:
        raise ValueError(f"qubit index {k} out of range")
    op = _qubit_factor(layout.n_qubits, k, _SIGMA[_axis(which)])
    return embed(layout, spin=op, sparse=sparse)


# ---------------------------------------------------------------------------
# states

def vacuum(fock_dim: int) -> np.ndarray:
    v = np.zeros(fock_dim, dtype=complex)
    v[0] = 1.0
    return v


def _check_jm(n_qubits: int, j: float, m: float) -> None:
    if not math.isclose(j, n_qubits / 2):
        raise ValueError(f"only the maximal multiplet j = N/2 = {n_qubits / 2} is supported, got j={j}")
    steps = m + j
    if abs(m) > j + 1e-12 or abs(steps - round(steps)) > 1e-12:
        raise ValueError(f"m={m} is not in -j..j in integer steps for j={j}")


@functools.lru_cache(maxsize=None)
def _dicke_z(n_qubits: int, excitations: int, symmetric: bool) -> np.ndarray:
    if symmetric:
        v = np.zeros(n_qubits + 1, dtype=complex)
        v[excitations] = 1.0
        return readonly(v)
    v = np.zeros(2**n_qubits, dtype=complex)
    for ones in itertools.combinations(range(n_qubits), excitations):
        v[sum(1 << (n_qubits - 1 - q) for q in ones)] = 1.0
    return readonly(v / np.linalg.norm(v))


@functools.lru_cache(maxsize=None)
def _z_to_x_rotation(n_qubits: int, symmetric: bool) -> np.ndarray:
    # exp(-i pi/2 J_y) maps J_z eigenstates onto J_x eigenstates with the same m
    # and sends |ee..e> to ((|g>+|e>)/sqrt2)^N; the matrix is real.
    r = expm(-0.5j * np.pi * spin_matrix(n_qubits, "y", symmetric))
    return readonly(np.real_if_close(r, tol=1e6).astype(complex))


def spin_state(n_qubits: int, m: float, axis: str = "z", symmetric: bool = False) -> np.ndarray:
    """Register-only collective state ``|N/2, m>_axis``.

    The x-basis phase convention: ``|N/2, m>_x = exp(-i pi/2 J_y) |N/2, m>_z``,
    which makes every x-state overlap positively with the ladder generated from
    ``((|g>+|e>)/sqrt2)^N`` and keeps all expansion coefficients real.
    """
    j = n_qubits / 2
    _check_jm(n_qubits, j, m)
    k = int(round(m + j))
    z = _dicke_z(n_qubits, k, symmetric)
    axis = _axis(axis)
    if axis == "z":
        return z.copy()
    if axis == "x":
        return _z_to_x_rotation(n_qubits, symmetric) @ z
    raise ValueError("collective states are provided for axis x or z")


def collective_state(layout: HilbertLayout, j: float, m: float, axis: str = "z",
                     mode: np.ndarray | None = None) -> np.ndarray:
    """``|j, m>_axis (x) mode`` with the mode defaulting to the vacuum."""
    _check_jm(layout.n_qubits, j, m)
    spin = spin_state(layout.n_qubits, m, axis, layout.symmetric)
    return np.kron(spin, vacuum(layout.fock_dim) if mode is None else mode)


def ground_state(layout: HilbertLayout) -> np.ndarray:
    """``|gg...g> (x) |0>``."""
    return collective_state(layout, layout.j, -layout.j, "z")


def zbasis_to_xbasis_coefficients(n_qubits: int) -> np.ndarray:
    """Coefficients ``C_M`` of ``|N/2,-N/2>_z`` in the x basis, ``M = -N/2 .. N/2``.

    The companion expansion of ``|N/2,+N/2>_z`` is ``C_M (-1)**(N/2 - M)``.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    j = n_qubits / 2
    down = spin_state(n_qubits, -j, "z", symmetric=True)
    return np.array([np.vdot(spin_state(n_qubits, k - j, "x", symmetric=True), down)
                     for k in range(n_qubits + 1)])


def displacement_matrix(fock_dim: int, beta: complex) -> np.ndarray:
    """Truncated ``D(beta) = exp(beta a^dag - beta^* a)`` on the mode alone."""
    if abs(beta) ** 2 > fock_dim / 4:
        warnings.warn(f"|beta|^2 = {abs(beta) ** 2:.3g} exceeds fock_dim/4 = {fock_dim / 4:.3g}; "
                      "truncation error may be large", TruncationWarning, stacklevel=2)
    if beta == 0:
        return np.eye(fock_dim, dtype=complex)
    a = boson_annihilation(fock_dim)
    return expm(beta * a.conj().T - np.conj(beta) * a)


def displacement_operator(layout: HilbertLayout, beta: complex) -> np.ndarray:
    return embed(layout, boson=displacement_matrix(layout.fock_dim, beta))


def coherent_vector(fock_dim: int, alpha: complex) -> np.ndarray:
    """``D(alpha)|0>`` in the truncated space."""
    return displacement_matrix(fock_dim, alpha)[:, 0].copy()


def cat_normalization(alpha: complex, parity: str) -> float:
    """Closed-form ``[2(1 +/- exp(-2|alpha|^2))]^(-1/2)``."""
    sign = _parity_sign(parity)
    denom = 2.0 * (1.0 + sign * math.exp(-2.0 * abs(alpha) ** 2))
    if denom <= 0.0:
        raise ValueError("odd cat state is undefined for alpha = 0")
    return denom ** -0.5


def _parity_sign(parity: str) -> int:
    if parity in ("even", "+"):
        return 1
    if parity in ("odd", "-"):
        return -1
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def cat_state(layout: HilbertLayout, alpha: complex, parity: str) -> np.ndarray:
    """Normalized ``|alpha> +/- |-alpha>`` on the mode (length ``fock_dim``).

    Compose with a register state via :func:`numpy.kron` when needed.
    """
    sign = _parity_sign(parity)
    if sign < 0 and alpha == 0:
        raise ValueError("odd cat state is undefined for alpha = 0")
    v = coherent_vector(layout.fock_dim, alpha) + sign * coherent_vector(layout.fock_dim, -alpha)
    norm = np.linalg.norm(v)
    if norm < 1e-14:
        raise ValueError("cat superposition vanishes")
    return v / norm


def partial_trace_mode(layout: HilbertLayout, rho: np.ndarray) -> np.ndarray:
    """Trace out the boson mode; accepts a vector, a matrix or a batch of matrices."""
    s, d = layout.spin_dim, layout.fock_dim
    rho = np.asarray(rho)
    if rho.ndim == 1:
        psi = rho.reshape(s, d)
        return psi @ psi.conj().T
    batch = rho.shape[:-2]
    r = rho.reshape(*batch, s, d, s, d)
    return np.einsum("...injn->...ij", r)
