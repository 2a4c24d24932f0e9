"""Time propagation: closed-form Magnus propagator, time-ordered oracle,
fixed-step RK4 for states and density matrices, and quantum trajectories.

Open-system runs integrate the master equation in the drive frame
``U_1(t) = exp(-i w_x (J_z + a^dag a) t)``. Both dissipators only pick up a
phase under this frame (``U_1^dag sigma_k^- U_1 = e^{-i w_x t} sigma_k^-`` and
likewise for ``a``), and the phase cancels inside every Lindblad term, so the
lab-frame master equation with bare ``sigma_k^-`` and ``a`` is solved exactly;
results are mapped back to the lab frame on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .hilbert import HilbertLayout, collective_operator, displacement_matrix, number_operator, spin_matrix
from .linalg import dagger, expm_hermitian
from .model import (
    EffectiveParams,
    HarmonicOperator,
    SystemParams,
    collapse_operators,
    drive_frame_hamiltonian,
    max_step as regime_step,
)

__all__ = [
    "DisplacementPhase",
    "NumericalBudgetError",
    "Trajectory",
    "displacement_phase",
    "drive_frame_phases",
    "lindblad_evolve",
    "liouvillian",
    "magnus_propagator",
    "mcwf_evolve",
    "propagate_schrodinger",
    "time_ordered_oracle",
    "to_rotating_frame",
    "trajectory_seed",
]

DEFAULT_MAX_STEPS = 20_000_000
# RK4 step is also capped at NORM_STEP / ||H||; renormalisation removes the
# amplitude error, this bounds the phase error.
NORM_STEP = 0.05
JUMP_PROBABILITY_CAP = 0.1


class NumericalBudgetError(RuntimeError):
    """The requested accuracy needs more steps than the configured budget."""


@dataclass(frozen=True)
class DisplacementPhase:
    beta: complex
    phi: float


def displacement_phase(e: EffectiveParams, t: float) -> DisplacementPhase:
    """``beta = r (1 - e^{i w~ t})`` and ``phi = r^2 (w~ t - sin w~ t)`` with ``r = g~ / w~``."""
    if e.omega_r == 0:
        raise ValueError("effective mode frequency is zero; the closed form does not exist")
    r = e.g / e.omega_r
    wt = e.omega_r * t
    return DisplacementPhase(beta=complex(r * (1 - np.exp(1j * wt))), phi=float(r * r * (wt - math.sin(wt))))


def magnus_propagator(e: EffectiveParams, layout: HilbertLayout, t: float) -> np.ndarray:
    """``D(beta J_x) exp(i phi J_x^2)``, the exact interaction-picture propagator for ``eps~ = 0``.

    Built block-wise in the ``J_x`` eigenbasis, where it is
    ``e^{i phi m^2} D(m beta)`` on each eigenvalue ``m``.
    """
    if e.epsilon != 0:
        raise ValueError("closed-form propagator needs a vanishing effective splitting (Omega_z = 0)")
    dp = displacement_phase(e, t)
    m, v = np.linalg.eigh(spin_matrix(layout.n_qubits, "x", layout.symmetric))
    S, D = layout.spin_dim, layout.fock_dim
    blocks = np.zeros((S, D, S, D), dtype=complex)
    cache: dict[float, np.ndarray] = {}
    for k, mk in enumerate(np.round(m, 12)):
        if mk not in cache:
            cache[mk] = np.exp(1j * dp.phi * mk * mk) * displacement_matrix(D, mk * dp.beta)
        blocks[k, :, k, :] = cache[mk]
    blocks = blocks.reshape(S * D, S * D)
    vb = np.kron(v, np.eye(D))
    return vb @ blocks @ dagger(vb)


def _sparse_at(H, t: float):
    if isinstance(H, HarmonicOperator):
        return H.sparse(t)
    return H(t)


def _dense_at(H, t: float) -> np.ndarray:
    h = H(t)
    return h.toarray() if sp.issparse(h) else np.asarray(h)


def time_ordered_oracle(H: Callable[[float], np.ndarray], t_final: float, steps: int,
                        initial: np.ndarray | None = None, t0: float = 0.0) -> np.ndarray:
    """Midpoint product ``prod_k exp(-i H(t_k) dt)`` ordered with later times to the left.

    Returns the full propagator, or the propagated block ``U @ initial`` when
    ``initial`` is given (via ``expm_multiply``, which never forms ``U``).
    """
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = (t_final - t0) / steps
    mids = t0 + (np.arange(steps) + 0.5) * dt
    if initial is None:
        u = None
        for tm in mids:
            step = expm_hermitian(_dense_at(H, tm), dt)
            u = step if u is None else step @ u
        return u
    x = np.asarray(initial, dtype=complex)
    for tm in mids:
        x = expm_multiply(-1j * dt * sp.csr_matrix(_sparse_at(H, tm)), x)
    return x


@dataclass
class Trajectory:
    """States (or trajectory-averaged observables) on a time grid."""

    times: np.ndarray
    states: np.ndarray | None
    meta: dict = field(default_factory=dict)
    observables: np.ndarray | None = None
    stderr: np.ndarray | None = None


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("time grid must be a non-empty vector")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def _schedule(grid: np.ndarray, hmax: float, max_steps: int):
    """Uniform substeps per grid interval; returns step start times, sizes and grid end indices."""
    if not hmax > 0:
        raise NumericalBudgetError(f"step bound {hmax!r} is not positive")
    spans = np.diff(grid)
    counts = np.maximum(np.ceil(spans / hmax * (1 - 1e-12)).astype(np.int64), 1)
    total = int(counts.sum())
    if total > max_steps:
        raise NumericalBudgetError(f"{total} steps needed (step {hmax:.3g} s) but the budget is {max_steps}")
    starts = np.concatenate([grid[i] + np.arange(n) * (spans[i] / n) for i, n in enumerate(counts)]) \
        if total else np.zeros(0)
    sizes = np.repeat(spans / counts, counts)
    ends = np.concatenate([[0], np.cumsum(counts)])
    return starts, sizes, ends


def _step_bound(H, max_step: float | None, norm_step: float, extra: float = 0.0) -> float:
    bounds = []
    if max_step is not None:
        bounds.append(max_step)
    if isinstance(H, HarmonicOperator):
        if max_step is None and H.fastest_frequency > 0:
            bounds.append(2 * np.pi / H.fastest_frequency / 40)
        nb = H.norm_bound() + extra
    else:
        nb = float(np.abs(np.linalg.eigvalsh(_dense_at(H, 0.0))).max()) * 2 + extra
    if nb > 0:
        bounds.append(norm_step / nb)
    return min(bounds) if bounds else math.inf


def _rk4(f, t: float, h: float, x: np.ndarray) -> np.ndarray:
    k1 = f(t, x)
    k2 = f(t + h / 2, x + (h / 2) * k1)
    k3 = f(t + h / 2, x + (h / 2) * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _apply_fn(H):
    if isinstance(H, HarmonicOperator):
        return H.scaled(-1j).apply
    return lambda t, x: -1j * (H(t) @ x)


def propagate_schrodinger(H, psi0: np.ndarray, grid, max_step: float | None = None,
                          norm_step: float = NORM_STEP, max_steps: int = DEFAULT_MAX_STEPS,
                          renormalize: bool = True) -> Trajectory:
    """Fixed-step RK4 integration of ``i d psi/dt = H(t) psi``.

    ``H`` is a :class:`HarmonicOperator` or any callable returning a matrix.
    The step is the smaller of ``max_step`` (default ``(2 pi / w_fast)/40``)
    and ``norm_step / ||H||``. ``psi0`` may be a ``(dim, k)`` block of columns,
    each normalized and renormalized independently after every step.
    """
    grid = _check_grid(grid)
    psi = np.array(psi0, dtype=complex)
    norms0 = np.linalg.norm(psi, axis=0)
    if np.any(np.abs(norms0 - 1) > 1e-8):
        raise ValueError("initial state is not normalized")
    h = _step_bound(H, max_step, norm_step)
    starts, sizes, ends = _schedule(grid, h, max_steps)
    f = _apply_fn(H)
    out = np.empty((grid.size,) + psi.shape, dtype=complex)
    out[0] = psi
    drift = 0.0
    gi = 1
    for s in range(starts.size):
        psi = _rk4(f, starts[s], sizes[s], psi)
        if renormalize:
            nrm = np.linalg.norm(psi, axis=0)
            drift += float(np.max(np.abs(nrm - 1)))
            psi = psi / nrm
        while gi < grid.size and ends[gi] == s + 1:
            out[gi] = psi
            gi += 1
    meta = {"integrator": "rk4", "steps": int(starts.size), "max_step": h, "norm_drift": drift}
    return Trajectory(grid, out, meta)


def drive_frame_phases(p: SystemParams, layout: HilbertLayout, t: float) -> np.ndarray:
    """Diagonal of ``U_1(t) = exp(-i w_x (J_z + a^dag a) t)``."""
    m = np.diag(collective_operator(layout, "z")).real
    n = np.diag(number_operator(layout)).real
    return np.exp(-1j * p.omega_x * (m + n) * t)


def _generator_with_decay(H: HarmonicOperator, ops: Sequence) -> tuple[HarmonicOperator, sp.csr_matrix]:
    """Non-Hermitian ``K = H - (i/2) sum L^dag L`` and ``sum L^dag L``."""
    ldl = sp.csr_matrix((H.dim, H.dim), dtype=complex)
    for L in ops:
        ldl = ldl + (L.getH() @ L)
    return H + HarmonicOperator([(0.0, -0.5j * ldl)], H.dim), ldl.tocsr()


def _norm_bound(m) -> float:
    a = abs(sp.csr_matrix(m))
    if a.nnz == 0:
        return 0.0
    return math.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max())


def liouvillian(H: HarmonicOperator, ops: Sequence) -> HarmonicOperator:
    """Row-major superoperator of the master equation, ``d vec(rho)/dt = L(t) vec(rho)``.

    Uses ``vec(A rho B) = (A (x) B^T) vec(rho)``; a Hamiltonian term
    ``e^{i w t} O`` contributes ``-i O (x) 1`` at ``+w`` and ``+i 1 (x) conj(O)``
    at ``-w``.
    """
    K, _ = _generator_with_decay(H, ops)
    eye = sp.identity(H.dim, dtype=complex, format="csr")
    terms = []
    for w, op in zip(K.frequencies, K.operators):
        terms.append((w, -1j * sp.kron(op, eye, format="csr")))
        terms.append((-w, 1j * sp.kron(eye, op.conj(), format="csr")))
    for L in ops:
        L = sp.csr_matrix(L)
        terms.append((0.0, sp.kron(L, L.conj(), format="csr")))
    return HarmonicOperator(terms, H.dim * H.dim)


def lindblad_evolve(p: SystemParams, layout: HilbertLayout, rho0: np.ndarray, grid,
                    counter_rotating: bool = False, frame: str = "lab",
                    max_step: float | None = None, norm_step: float = NORM_STEP,
                    max_steps: int = DEFAULT_MAX_STEPS, hermitian: bool = True) -> Trajectory:
    """Fixed-step RK4 solution of the master equation with ``sqrt(gamma) sigma_k^-`` and ``sqrt(kappa) a``.

    ``rho0`` is one ``(d, d)`` matrix or a batch ``(B, d, d)``; the map is
    linear, so unnormalized or non-Hermitian operators may be propagated too
    (pass ``hermitian=False`` to skip the Hermitian symmetrization).
    ``frame`` selects the output representation: ``"lab"`` or ``"drive"``.
    """
    if frame not in ("lab", "drive"):
        raise ValueError(f"unknown frame {frame!r}")
    grid = _check_grid(grid)
    X = np.array(rho0, dtype=complex)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.shape[1:] != (layout.dim, layout.dim):
        raise ValueError(f"density matrix shape {X.shape[1:]} does not match layout dimension {layout.dim}")
    H = drive_frame_hamiltonian(p, layout, counter_rotating=counter_rotating)
    Ls = [sp.csr_matrix(L) for L in collapse_operators(p, layout)]
    K, ldl = _generator_with_decay(H, Ls)
    rhs = liouvillian(H, Ls).apply

    hmax = regime_step(p) if max_step is None else max_step
    h = _step_bound(K, hmax, norm_step, extra=_norm_bound(ldl))
    starts, sizes, ends = _schedule(grid, h, max_steps)
    B, d = X.shape[0], layout.dim
    out = np.empty((grid.size,) + X.shape, dtype=complex)
    out[0] = X
    V = X.reshape(B, d * d).T.copy()
    gi = 1
    for s in range(starts.size):
        V = _rk4(rhs, starts[s], sizes[s], V)
        while gi < grid.size and ends[gi] == s + 1:
            M = V.T.reshape(B, d, d)
            if hermitian:
                # the flow preserves Hermiticity; this only removes rounding noise
                M = 0.5 * (M + dagger(M))
                V = M.reshape(B, d * d).T.copy()
            out[gi] = M
            gi += 1
    if frame == "lab":
        for i, t in enumerate(grid):
            ph = drive_frame_phases(p, layout, t)
            out[i] = ph[:, None] * out[i] * ph.conj()[None, :]
    traces = np.trace(out, axis1=-2, axis2=-1)
    meta = {
        "integrator": "rk4",
        "frame": frame,
        "steps": int(starts.size),
        "max_step": h,
        "trace_drift": float(np.max(np.abs(traces - traces[0]))),
        "counter_rotating": counter_rotating,
    }
    return Trajectory(grid, out[:, 0] if single else out, meta)


def trajectory_seed(seed: int, k: int) -> np.random.Generator:
    """Independent generator for trajectory ``k``; stable as the trajectory count grows."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(k),)))


def mcwf_evolve(p: SystemParams, layout: HilbertLayout, psi0: np.ndarray, grid, n_traj: int,
                seed: int, observables: Callable[[np.ndarray, int], np.ndarray] | None = None,
                store_density: bool | None = None, counter_rotating: bool = False,
                frame: str = "lab", max_step: float | None = None, norm_step: float = NORM_STEP,
                max_steps: int = DEFAULT_MAX_STEPS, checkpoint_stride: int = 256) -> Trajectory:
    """Monte-Carlo wave-function unraveling of the master equation (norm-threshold jumps).

    Each trajectory draws a uniform target ``r`` and evolves under
    ``K = H - (i/2) sum L^dag L`` until ``||psi||^2 < r``; a jump operator is
    then chosen with probability proportional to ``||L_k psi||^2`` and a new
    target is drawn. The jump-free path is identical for every trajectory, so
    it is integrated once and shared.

    ``observables(psi, i)`` receives the normalized state at grid index ``i``
    (in the requested frame) and returns a vector; the result carries its
    trajectory mean and standard error. Averaged density matrices are stored
    when ``store_density`` is true (default: ``dim <= 512``).
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if frame not in ("lab", "drive"):
        raise ValueError(f"unknown frame {frame!r}")
    grid = _check_grid(grid)
    dim = layout.dim
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (dim,):
        raise ValueError(f"initial state has shape {psi0.shape}, expected ({dim},)")
    if abs(np.linalg.norm(psi0) - 1) > 1e-8:
        raise ValueError("initial state is not normalized")
    if store_density is None:
        store_density = dim <= 512
    H = drive_frame_hamiltonian(p, layout, counter_rotating=counter_rotating)
    Ls = [sp.csr_matrix(L) for L in collapse_operators(p, layout)]
    K, ldl = _generator_with_decay(H, Ls)
    f = _apply_fn(K)
    rate = _norm_bound(ldl)
    hmax = regime_step(p) if max_step is None else max_step
    if rate > 0:
        hmax = min(hmax, JUMP_PROBABILITY_CAP / rate)
    h = _step_bound(K, hmax, norm_step)
    starts, sizes, ends = _schedule(grid, h, max_steps)
    n_steps = starts.size
    grid_at_step = {int(e): i for i, e in enumerate(ends)}
    phases = [drive_frame_phases(p, layout, t) for t in grid] if frame == "lab" else None

    def emit(psi_raw, gi):
        psi = psi_raw / np.linalg.norm(psi_raw)
        if phases is not None:
            psi = phases[gi] * psi
        obs = None if observables is None else np.atleast_1d(np.asarray(observables(psi, gi), dtype=float))
        return psi, obs

    # jump-free reference path
    norms = np.empty(n_steps + 1)
    norms[0] = 1.0
    checkpoints = {0: psi0.copy()}
    nj_states, nj_obs = [None] * grid.size, [None] * grid.size
    nj_states[0], nj_obs[0] = emit(psi0, 0)
    psi = psi0.copy()
    for s in range(n_steps):
        psi = _rk4(f, starts[s], sizes[s], psi)
        norms[s + 1] = np.vdot(psi, psi).real
        if (s + 1) % checkpoint_stride == 0:
            checkpoints[s + 1] = psi.copy()
        gi = grid_at_step.get(s + 1)
        if gi is not None and gi > 0:
            nj_states[gi], nj_obs[gi] = emit(psi, gi)

    def jump(psi, rng):
        weights = np.array([np.vdot(v, v).real for v in (L @ psi for L in Ls)])
        k = int(rng.choice(len(Ls), p=weights / weights.sum()))
        new = Ls[k] @ psi
        return new / np.linalg.norm(new), k

    def replay(step):
        base = max(c for c in checkpoints if c <= step)
        psi = checkpoints[base].copy()
        for s in range(base, step):
            psi = _rk4(f, starts[s], sizes[s], psi)
        return psi

    n_obs = None if observables is None else nj_obs[0].size
    obs_all = None if observables is None else np.empty((n_traj, grid.size, n_obs))
    rho_sum = np.zeros((grid.size, dim, dim), dtype=complex) if store_density else None
    nj_count = 0
    jump_counts = np.zeros(len(Ls), dtype=np.int64)
    for k in range(n_traj):
        rng = trajectory_seed(seed, k)
        r = rng.random()
        below = np.nonzero(norms[1:] < r)[0]
        if below.size == 0:
            nj_count += 1
            if obs_all is not None:
                obs_all[k] = np.stack(nj_obs)
            continue
        s_jump = int(below[0]) + 1
        first_after = int(np.searchsorted(ends, s_jump))  # grid points with ends < s_jump are jump-free
        states_k, obs_k = list(nj_states[:first_after]), list(nj_obs[:first_after])
        psi = replay(s_jump)
        psi, which = jump(psi, rng)
        jump_counts[which] += 1
        r = rng.random()
        s = s_jump
        while True:
            gi = grid_at_step.get(s)
            if gi is not None and gi >= first_after:
                st, ob = emit(psi, gi)
                states_k.append(st)
                obs_k.append(ob)
            if s == n_steps:
                break
            psi = _rk4(f, starts[s], sizes[s], psi)
            s += 1
            if np.vdot(psi, psi).real < r:
                psi, which = jump(psi, rng)
                jump_counts[which] += 1
                r = rng.random()
        if obs_all is not None:
            obs_all[k] = np.stack(obs_k)
        if rho_sum is not None:
            for gi, st in enumerate(states_k):
                rho_sum[gi] += np.outer(st, st.conj())
    if rho_sum is not None and nj_count:
        for gi, st in enumerate(nj_states):
            rho_sum[gi] += nj_count * np.outer(st, st.conj())
    meta = {
        "integrator": "rk4+mcwf",
        "frame": frame,
        "steps": int(n_steps),
        "max_step": h,
        "n_traj": int(n_traj),
        "seed": int(seed),
        "jump_free": int(nj_count),
        "jumps": jump_counts.tolist(),
        "counter_rotating": counter_rotating,
    }
    traj = Trajectory(grid, None if rho_sum is None else rho_sum / n_traj, meta)
    if obs_all is not None:
        traj.observables = obs_all.mean(axis=0)
        traj.stderr = obs_all.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 \
            else np.zeros_like(traj.observables)
        traj.meta["samples"] = obs_all
    return traj


def to_rotating_frame(state: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``U^dag psi`` for a state vector, ``U rho U^dag`` for a density matrix."""
    state = np.asarray(state)
    U = np.asarray(U)
    if U.shape[0] != state.shape[0]:
        raise ValueError(f"dimension mismatch: operator {U.shape}, state {state.shape}")
    if state.ndim == 1:
        return dagger(U) @ state
    if state.shape != U.shape:
        raise ValueError(f"dimension mismatch: operator {U.shape}, state {state.shape}")
    return U @ state @ dagger(U)
