"""Figures of merit: state fidelity, entangling power, process fidelity and
local equivalence to CNOT.

Two-qubit operators are indexed ``|ij>`` with qubit 1 the most significant
factor, in the same basis order as :mod:`qrmsim.hilbert`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import dagger, kron, unitarity_error

__all__ = [
    "GateAnalysis",
    "analyse_gate",
    "cnot",
    "cnot_local_unitaries",
    "cnot_residual",
    "entangling_power",
    "equal_up_to_global_phase",
    "gate_operator",
    "linear_entropy",
    "pauli_basis",
    "positive_parts",
    "process_fidelity",
    "rearrange",
    "state_fidelity",
    "swap_operator",
]

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def state_fidelity(state: np.ndarray, target: np.ndarray) -> float:
    """``|<target|psi>|^2`` for a vector, ``<target|rho|target>`` for a density matrix."""
    state = np.asarray(state)
    target = np.asarray(target)
    if target.ndim != 1 or state.shape[0] != target.shape[0]:
        raise ValueError(f"dimension mismatch: state {state.shape}, target {target.shape}")
    if state.ndim == 1:
        return float(abs(np.vdot(target, state)) ** 2)
    if state.shape != (target.size, target.size):
        raise ValueError(f"density matrix shape {state.shape} does not match target {target.shape}")
    return float(np.vdot(target, state @ target).real)


def _local_dim(U: np.ndarray) -> int:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("operator must be square")
    d = int(round(np.sqrt(U.shape[0])))
    if d * d != U.shape[0]:
        raise ValueError(f"dimension {U.shape[0]} is not a square of a local dimension")
    return d


def rearrange(U: np.ndarray) -> np.ndarray:
    """Realignment ``U^R_{ij,kl} = U_{ik,jl}``."""
    d = _local_dim(U)
    return np.asarray(U).reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def swap_operator(d: int = 2) -> np.ndarray:
    s = np.zeros((d * d, d * d), dtype=complex)
    for i, j in itertools.product(range(d), repeat=2):
        s[i * d + j, j * d + i] = 1
    return s


def linear_entropy(U: np.ndarray) -> float:
    """``E(U) = 1 - Tr[U^R U^R^dag U^R U^R^dag] / d^4``."""
    d = _local_dim(U)
    r = rearrange(U)
    rr = r @ dagger(r)
    return float(1 - np.trace(rr @ rr).real / d**4)


def entangling_power(U: np.ndarray, atol: float = 1e-8) -> float:
    """``(d/(d+1))^2 [E(U) + E(U S) - E(S)]``."""
    U = np.asarray(U, dtype=complex)
    d = _local_dim(U)
    if unitarity_error(U) > atol:
        raise ValueError("entangling power needs a unitary operator")
    s = swap_operator(d)
    return (d / (d + 1)) ** 2 * (linear_entropy(U) + linear_entropy(U @ s) - linear_entropy(s))


def pauli_basis(n_qubits: int = 2) -> list[tuple[str, np.ndarray]]:
    """Unnormalized Pauli strings in lexicographic (I, X, Y, Z) order."""
    return [("".join(lab), kron(*(PAULI[c] for c in lab)))
            for lab in itertools.product("IXYZ", repeat=n_qubits)]


def positive_parts(W: np.ndarray, tol: float = 1e-14) -> list[tuple[complex, np.ndarray]]:
    """Split ``W = (H+ - H-) + i (K+ - K-)`` into positive operators.

    Returns ``(coefficient, P)`` pairs with ``P >= 0`` and ``W = sum c P``;
    vanishing parts are dropped.
    """
    W = np.asarray(W, dtype=complex)
    out = []
    for coef, herm in ((1.0, (W + dagger(W)) / 2), (1j, (W - dagger(W)) / 2j)):
        w, v = np.linalg.eigh(herm)
        for sign in (1.0, -1.0):
            lam = np.clip(sign * w, 0, None)
            if lam.max(initial=0.0) > tol:
                out.append((coef * sign, (v * lam) @ dagger(v)))
    return out


def process_fidelity(channel: Callable[[np.ndarray], np.ndarray], U: np.ndarray,
                     basis: list[tuple[str, np.ndarray]] | None = None) -> float:
    """``(1/d^3) sum_j Tr[U W_j^dag U^dag E(W_j)]`` over Pauli strings ``W_j``.

    ``channel`` may also be a precomputed sequence of outputs aligned with
    :func:`pauli_basis`.
    """
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    n = int(round(np.log2(d)))
    if 2**n != d:
        raise ValueError(f"dimension {d} is not a qubit register")
    if basis is None:
        basis = pauli_basis(n)
    outputs = channel if not callable(channel) else [channel(w) for _, w in basis]
    if len(outputs) != len(basis):
        raise ValueError("channel outputs do not match the operator basis")
    total = 0.0 + 0.0j
    for (_, w), ew in zip(basis, outputs):
        ew = np.asarray(ew)
        if ew.shape != (d, d):
            raise ValueError(f"channel output shape {ew.shape} does not match {(d, d)}")
        total += np.trace(U @ dagger(w) @ dagger(U) @ ew)
    return float(total.real / d**3)


def equal_up_to_global_phase(A: np.ndarray, B: np.ndarray, tol: float = 1e-8) -> tuple[bool, float, float]:
    """Return ``(equal, theta, residual)`` with ``residual = ||A - e^{i theta} B||_F / ||B||_F``."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    overlap = np.trace(dagger(B) @ A)
    theta = float(np.angle(overlap)) if abs(overlap) > 0 else 0.0
    residual = float(np.linalg.norm(A - np.exp(1j * theta) * B) / np.linalg.norm(B))
    return residual < tol, theta, residual


def gate_operator(phi: float) -> np.ndarray:
    """``cos(phi/2) I + i sin(phi/2) X X``, the period-``T`` spin propagator up to a global phase."""
    xx = np.kron(PAULI["X"], PAULI["X"])
    return np.cos(phi / 2) * np.eye(4) + 1j * np.sin(phi / 2) * xx


def cnot() -> np.ndarray:
    """Controlled-NOT with qubit 1 as control."""
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def cnot_local_unitaries() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``u1..u4`` with ``CNOT = (u1 (x) u2) U(phi=pi/2) (u3 (x) u4)`` up to a global phase."""
    s = 1 / np.sqrt(2)
    u1 = s * np.array([[1, -1], [-1, -1]], dtype=complex)
    u2 = np.eye(2, dtype=complex)
    u3 = s * np.array([[1, 1j], [-1, 1j]], dtype=complex)
    u4 = s * np.array([[1, 1j], [1j, 1]], dtype=complex)
    return u1, u2, u3, u4


@dataclass(frozen=True)
class GateAnalysis:
    entangling_power: float
    process_fidelity: float
    cnot_equivalent: bool
    residual: float


def cnot_residual(U: np.ndarray) -> tuple[bool, float]:
    u1, u2, u3, u4 = cnot_local_unitaries()
    equal, _, residual = equal_up_to_global_phase(np.kron(u1, u2) @ U @ np.kron(u3, u4), cnot())
    return equal, residual


def analyse_gate(U: np.ndarray, fidelity: float) -> GateAnalysis:
    """Bundle entangling power and CNOT equivalence of ``U`` with a process fidelity."""
    equal, residual = cnot_residual(U)
    return GateAnalysis(entangling_power(U), fidelity, equal, residual)
