"""Dense linear-algebra helpers shared across the simulator.

Matrix exponentials of general matrices go through :func:`scipy.linalg.expm`
(Pade scaling-and-squaring). Exponentials of Hermitian generators use an
eigendecomposition, which is exact up to rounding and cheap to re-evaluate at
many times once the decomposition is cached.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "commutator",
    "dagger",
    "expm",
    "expm_hermitian",
    "hermitian_error",
    "kron",
    "opnorm",
    "readonly",
    "unitarity_error",
]


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes (works on batches)."""
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def expm(a: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(np.asarray(a, dtype=complex))


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h``."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def opnorm(a: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_error(a: np.ndarray) -> float:
    """Relative deviation from Hermiticity, ``||a - a^dag|| / ||a||``."""
    scale = opnorm(a)
    if scale == 0.0:
        return 0.0
    return opnorm(a - dagger(a)) / scale


def unitarity_error(u: np.ndarray) -> float:
    return opnorm(dagger(u) @ u - np.eye(u.shape[-1]))


def readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a
