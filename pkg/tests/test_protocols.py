import math
import warnings

import numpy as np
import pytest

from qrmsim.hilbert import build_layout, cat_state, ground_state, spin_matrix, spin_state, vacuum
from qrmsim.linalg import expm
from qrmsim.metrics import state_fidelity
from qrmsim.model import MHZ, SystemParams
from qrmsim.protocols import (
    ExperimentConfig,
    RegimeError,
    cat_target,
    default_fock_dim,
    ghz_target,
    run_cat_protocol,
    run_experiment,
    run_fidelity_scan,
    run_gate_protocol,
    run_ghz_protocol,
)

REALISTIC = SystemParams.realistic(2)


def _spin_part(layout, state):
    return state.reshape(layout.spin_dim, layout.fock_dim)[:, 0]


def check_result_invariants(res):
    for name, values in res.series.items():
        assert values.shape == res.times.shape
        assert np.all(values >= -1e-12) and np.all(values <= 1 + 1e-8), name
    assert np.all(np.diff(res.times) > 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(REALISTIC, "teleport")
    with pytest.raises(ValueError):
        ExperimentConfig(REALISTIC, "ghz", modes=("effective",), engine="mcwf")
    with pytest.raises(ValueError):
        ExperimentConfig(REALISTIC, "ghz", horizon_periods=0)
    with pytest.raises(ValueError):
        ExperimentConfig(REALISTIC, "ghz", modes=("exact",))
    cfg = ExperimentConfig(REALISTIC, "ghz", samples=5)
    assert cfg.fock == 17 and math.isclose(cfg.period, 50e-9, rel_tol=1e-9)
    assert np.allclose(cfg.grid(), np.linspace(0, cfg.period, 5))
    assert cfg.grid(extra=(cfg.period / 3,)).size == 6


def test_default_truncation_holds_peak_displacement():
    assert default_fock_dim(2, 0.5) == 17
    for n in range(1, 7):
        for ratio in (0.25, 0.5, 1.0, 2.0):
            peak = n * ratio
            assert default_fock_dim(n, ratio) >= peak**2 + 6 * peak + 8


@pytest.mark.parametrize("n", range(1, 7))
def test_ghz_target_algebra(n):
    layout = build_layout(n, 2, symmetric=True)
    jx = spin_matrix(n, "x", True)
    evolved = expm(1j * np.pi / 2 * jx @ jx) @ spin_state(n, -n / 2, "z", True)
    target = _spin_part(layout, ghz_target(layout))
    assert 1 - abs(np.vdot(target, evolved)) ** 2 < 1e-10
    # global phase included: the target is the evolved state itself
    assert np.linalg.norm(target - evolved) < 1e-10
    if n % 2 == 0:
        g, e = spin_state(n, -n / 2, "z", True), spin_state(n, n / 2, "z", True)
        want = np.exp(1j * np.pi / 4) / np.sqrt(2) * (g + np.exp(1j * (n - 1) * np.pi / 2) * e)
        assert np.linalg.norm(target - want) < 1e-10
    else:
        raw = _spin_part(layout, ghz_target(layout, rotated=False))
        g, e = spin_state(n, -n / 2, "z", True), spin_state(n, n / 2, "z", True)
        assert abs(abs(np.vdot(g, raw)) ** 2 - 0.5) < 1e-12 and abs(abs(np.vdot(e, raw)) ** 2 - 0.5) < 1e-12


def test_odd_phase_identity():
    for twice_m in range(-11, 12, 2):
        m = twice_m / 2
        lhs = np.exp(1j * m * m * np.pi / 2)
        rhs = np.exp(-1j * np.pi / 8) * np.exp(1j * m * np.pi / 2) * np.exp(1j * (m - 0.5) ** 2 * np.pi / 2)
        assert abs(lhs - rhs) < 1e-12


def test_ghz_target_symmetric_and_full_agree():
    for n in (2, 3):
        sym, full = build_layout(n, 3, symmetric=True), build_layout(n, 3)
        a, b = ghz_target(sym), ghz_target(full)
        # compare through populations of |g..g> and |e..e>
        assert abs(abs(a[0]) - abs(b[0])) < 1e-12
        assert abs(abs(a[-3]) - abs(b[-3])) < 1e-12


@pytest.mark.parametrize("n", range(1, 7))
def test_ghz_effective_reaches_target(n):
    res = run_ghz_protocol(ExperimentConfig(SystemParams.realistic(n), "ghz", samples=5, modes=("effective",),
                                            check_convergence=False))
    assert abs(res.summary["F_ideal_T"] - 1) < 1e-9
    check_result_invariants(res)


def test_ghz_ratio_warning():
    p = REALISTIC.replace(g=30 * MHZ)
    with pytest.warns(UserWarning, match="ratio"):
        run_ghz_protocol(ExperimentConfig(p, "ghz", samples=3, modes=("effective",), check_convergence=False))


def test_ghz_closed_and_open_consistency():
    """Short horizon: symmetric closed run vs the full-layout master equation with zero rates."""
    p = SystemParams.realistic(2, dissipative=False)
    cfg = ExperimentConfig(p, "ghz", samples=5, horizon_periods=0.1, check_convergence=False,
                           modes=("full_unitary", "full_dissipative"), engine="dense")
    res = run_ghz_protocol(cfg)
    assert np.max(np.abs(res.series["F_full"] - res.series["F_diss"])) < 1e-8
    assert res.meta["trace_drift"] < 1e-6


def test_ghz_full_run_and_convergence():
    res = run_ghz_protocol(ExperimentConfig(REALISTIC, "ghz", samples=11, modes=("effective", "full_unitary")))
    assert res.meta["fock_converged"] and res.meta["fock_doubling_delta"] < 1e-6
    assert res.summary["F_full_T"] == res.series["F_full"][-1]
    assert abs(res.summary["F_full_T"] - 0.9971) < 0.005
    check_result_invariants(res)


def test_dissipation_lowers_fidelity():
    cfg = ExperimentConfig(REALISTIC, "ghz", samples=3, horizon_periods=0.3, check_convergence=False,
                           modes=("full_unitary", "full_dissipative"))
    res = run_ghz_protocol(cfg)
    assert np.all(res.series["F_diss"][1:] < res.series["F_full"][1:])


def test_cat_effective_anchors():
    for n in (1, 2, 3):
        p = SystemParams.realistic(n)
        res = run_cat_protocol(ExperimentConfig(p, "cat", samples=5, modes=("effective",),
                                                check_convergence=False))
        s = res.summary
        assert abs(s["p_even"] - s["p_even_analytic"]) < 1e-9
        assert abs(s["p_odd"] - s["p_odd_analytic"]) < 1e-9
        assert abs(s["p_even"] + s["p_odd"] - 1) < 1e-9
        want = 0.5 * (1 + math.exp(-0.5 * n * n * 1.0**2 * 4 * 0.25))
        assert abs(s["p_even_analytic"] - want) < 1e-12
        assert abs(s["peak_displacement"] - n * 0.5) < 1e-6
        assert abs(s["F_ideal_t0"] - 1) < 1e-9
        check_result_invariants(res)


def test_cat_post_measurement_states_are_cats():
    p = SystemParams.realistic(2)
    res = run_cat_protocol(ExperimentConfig(p, "cat", samples=3, modes=("effective",), check_convergence=False))
    D = res.meta["fock_dim"]
    layout = build_layout(1, D)
    alpha = res.summary["peak_displacement_analytic"]
    post = res.meta["post_measurement"]
    # the branch displacement is purely imaginary at t0: beta(t0) = 2 r
    for label, state in post.items():
        best = max(abs(np.vdot(cat_state(layout, amp, label), state)) ** 2
                   for amp in (alpha, 1j * alpha, -alpha, -1j * alpha))
        assert best > 1 - 1e-9


def test_cat_target_is_normalized():
    layout = build_layout(3, 30, symmetric=True)
    psi = cat_target(SystemParams.realistic(3), layout, 12.5e-9)
    assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_cat_truncation_guard():
    with pytest.raises(ValueError, match="too small"):
        run_cat_protocol(ExperimentConfig(SystemParams.realistic(6), "cat", fock_dim=10, modes=("effective",)))


def test_gate_effective_mode():
    res = run_gate_protocol(ExperimentConfig(REALISTIC, "gate", modes=("effective",)))
    s = res.summary
    assert abs(s["phi"] - np.pi / 2) < 1e-9
    assert abs(s["F_pro_effective"] - 1) < 1e-10
    assert s["gate_match_residual"] < 1e-8
    assert abs(s["e_p"] - 2 / 9) < 1e-12
    assert s["cnot_equivalent"] == 1.0 and s["cnot_residual"] < 1e-8
    assert res.meta["fock_doubling_delta"] < 1e-6


def test_gate_preconditions():
    with pytest.raises(ValueError, match="two qubits"):
        run_gate_protocol(ExperimentConfig(SystemParams.realistic(3), "gate", modes=("effective",)))
    with pytest.raises(ValueError, match="Omega_z"):
        run_gate_protocol(ExperimentConfig(REALISTIC.replace(Omega_z=10 * MHZ), "gate", modes=("effective",)))


def test_regime_hard_failure_aborts():
    bad = REALISTIC.replace(omega_z=0.7e9)
    with pytest.raises(RegimeError) as info:
        run_experiment(ExperimentConfig(bad, "ghz", modes=("effective",)))
    assert info.value.report.hard_failures


def test_scan_starts_at_one_and_stays_high():
    res = run_fidelity_scan(ExperimentConfig(SystemParams.scan_panel(0.25, 2), "fidelity_scan", samples=21))
    f = res.series["F_full"]
    assert f[0] == 1.0
    assert res.summary["F_min"] == f.min() and res.summary["F_end"] == f[-1]
    assert f.min() > 0.99
    assert res.meta["fock_doubling_delta"] < 1e-6
    check_result_invariants(res)
