import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh

from qptcomplexity.adiabatic import (
    CdAnsatz,
    Schedule,
    alternate_path,
    closed_form_complexity,
    evolve,
    gap_sharpness,
    geometric_grid,
    minimal_time_scan,
    tfi_problem,
    zzxz_problem,
)
from qptcomplexity.geometry import susceptibility
from qptcomplexity.models import TfiParams, ZzxzParams, field_sum
from qptcomplexity.selftest import dense_sum


@given(st.floats(0.05, 200.0), st.floats(0.001, 0.5))
def test_schedule_endpoints_and_monotone(T, frac):
    s = Schedule(T, frac * T)
    assert s.lam(0.0) == pytest.approx(0.0, abs=1e-15)
    assert s.lam(T) == pytest.approx(1.0, abs=1e-15)
    assert s.lam_dot(0.0) == pytest.approx(0.0, abs=1e-12)
    assert s.lam_dot(T) == pytest.approx(0.0, abs=1e-12)
    lam = s.lam(s.edges)
    assert np.all(np.diff(lam) >= -1e-15)
    assert np.all((lam >= 0) & (lam <= 1))
    assert s.dt <= s.dT + 1e-12
    assert s.nsteps * s.dt == pytest.approx(T)


def test_default_step():
    assert Schedule(1.5).dT == pytest.approx(0.05)
    assert Schedule(30.0).dT == pytest.approx(0.1)


def test_lam_dot_matches_finite_difference():
    s = Schedule(3.0)
    t = np.linspace(0.1, 2.9, 15)
    h = 1e-6
    fd = (s.lam(t + h) - s.lam(t - h)) / (2 * h)
    assert np.allclose(s.lam_dot(t), fd, atol=1e-8)


@pytest.mark.parametrize("T", [0.0, -1.0, np.inf])
def test_schedule_rejects_bad_times(T):
    with pytest.raises(ValueError):
        Schedule(T)


def _dense_coefficients(prob, lam):
    H = dense_sum(prob.hamiltonian(lam))
    dH = dense_sum(prob.h1)
    Cs = [-1j * (H @ B - B @ H) for B in (dense_sum(b) for b in prob.ansatz.basis)]
    D = H.shape[0]
    M = np.array([[np.trace(a @ b).real / D for b in Cs] for a in Cs])
    rhs = np.array([np.trace(dH @ c).real / D for c in Cs])
    return np.linalg.lstsq(M, -rhs, rcond=None)[0]


@pytest.mark.parametrize("lam", [0.1, 0.5, 0.93])
def test_tfi_coefficient_matches_dense_action_minimizer(lam):
    from scipy.optimize import minimize_scalar

    prob = tfi_problem(TfiParams(4, J=0.8, boundary="open"))
    H, dH, B = dense_sum(prob.hamiltonian(lam)), dense_sum(prob.h1), dense_sum(prob.ansatz.basis[0])

    def action(a):
        G = dH - 1j * (H @ (a * B) - (a * B) @ H)
        return np.trace(G @ G).real

    ref = minimize_scalar(action, bracket=(-1, 1), tol=1e-12).x
    assert prob.cd_coefficients(lam)[0, 0] == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("variant", ["local", "commutator"])
def test_zzxz_coefficients_match_dense_traces(variant):
    prob = zzxz_problem(ZzxzParams(4, J=1.4, h_z=0.75), variant)
    for lam in (0.2, 0.7):
        assert np.allclose(prob.cd_coefficients(lam)[0], _dense_coefficients(prob, lam), atol=1e-10)


def test_cd_term_vanishes_at_endpoints():
    s = Schedule(4.0)
    assert abs(s.lam_dot(0.0)) < 1e-14 and abs(s.lam_dot(4.0)) < 1e-14


def test_ansatz_validation():
    y = field_sum(3, "Y")
    with pytest.raises(ValueError):
        CdAnsatz((y * 1j,), ("a",))
    with pytest.raises(ValueError):
        CdAnsatz((y, field_sum(4, "Y")), ("a", "b"))
    from qptcomplexity.pauli import PauliSum

    three_body = PauliSum.from_labels({"YZZ": 1.0})
    with pytest.raises(ValueError):
        CdAnsatz((three_body,), ("a",))


def _two_site():
    return tfi_problem(TfiParams(2, J=1.3, boundary="open"))


def test_two_site_cd_is_exact():
    # the single family spans the exact gauge potential of the two-site chain
    tr = evolve(_two_site(), 0.3, 1e-3, with_cd=True)
    bare = evolve(_two_site(), 0.3, 1e-3, with_cd=False)
    assert tr.final_fidelity > 1 - 1e-5
    assert bare.final_fidelity < 0.99


@pytest.mark.parametrize("lam", [0.2, 0.6, 0.9])
def test_metric_equals_gauge_potential_variance(lam):
    prob = _two_site()

    def gs(x):
        return eigh(dense_sum(prob.hamiltonian(x)))[1][:, 0]

    g, _ = susceptibility(lambda a, b: 1 - abs(np.vdot(gs(a), gs(b))), lam, 1e-3)
    A = dense_sum(prob.ansatz.operator(prob.cd_coefficients(lam)[0]))
    psi = gs(lam)
    var = np.vdot(psi, A @ A @ psi).real - np.vdot(psi, A @ psi).real ** 2
    assert g == pytest.approx(var, rel=1e-5)


def test_norm_is_conserved():
    tr = evolve(tfi_problem(TfiParams(6, J=1.2, boundary="open")), 3.0)
    assert tr.norm_error < 1e-8


def test_fidelity_is_second_order_in_step():
    prob = tfi_problem(TfiParams(4, J=0.8, boundary="open"))
    f = [evolve(prob, 2.0, dT, track=False).final_fidelity for dT in (0.04, 0.02, 0.01)]
    d1, d2 = abs(f[0] - f[1]), abs(f[1] - f[2])
    assert d1 > 0
    assert 3.0 < d1 / d2 < 5.0


def test_trace_contents():
    tr = evolve(tfi_problem(TfiParams(4, J=0.5, boundary="open")), 1.0, n_samples=11)
    assert tr.times[0] == 0 and tr.times[-1] == pytest.approx(1.0)
    assert tr.lam[0] == pytest.approx(0) and tr.lam[-1] == pytest.approx(1)
    assert np.all(tr.gap > 0)
    assert tr.fidelity_inst[0] == pytest.approx(1.0)
    assert tr.fidelity_inst[-1] == pytest.approx(tr.final_fidelity)
    assert tr.C_N == pytest.approx(tr.nielsen())


@pytest.mark.parametrize("prob,T", [
    (tfi_problem(TfiParams(5, J=0.9, boundary="open")), 1.7),
    (zzxz_problem(ZzxzParams(5, J=1.2, h_z=0.75)), 2.3),
])
@pytest.mark.parametrize("with_cd", [True, False])
def test_cost_matches_closed_form(prob, T, with_cd):
    tr = evolve(prob, T, with_cd=with_cd, track=False)
    assert tr.nielsen() == pytest.approx(closed_form_complexity(tr), rel=1e-10)


def test_slow_sweep_approaches_ground_state():
    prob = tfi_problem(TfiParams(6, J=0.6, boundary="open"))
    f = [evolve(prob, T, with_cd=False, track=False).final_fidelity for T in (1.0, 4.0, 16.0)]
    assert f[0] <= f[1] <= f[2]
    assert f[2] > 0.99


def test_scan_reports_no_solution():
    prob = tfi_problem(TfiParams(6, J=1.5, boundary="open"))
    res = minimal_time_scan(prob, [0.05, 0.1], threshold=0.999, with_cd=False)
    assert not res.reached
    assert res.T_star is None and res.C_N is None
    assert res.best_fidelity < 0.999


def test_scan_finds_first_grid_point():
    prob = tfi_problem(TfiParams(4, J=0.3, boundary="open"))
    grid = geometric_grid(0.2, 5.0, 6)
    res = minimal_time_scan(prob, grid, threshold=0.9, stop_early=False)
    assert res.reached
    i = int(np.flatnonzero(grid == res.T_star)[0])
    assert res.fidelities[i] >= 0.9 and np.all(res.fidelities[:i] < 0.9)


def test_scan_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        minimal_time_scan(tfi_problem(TfiParams(4, J=0.3)), [1.0, 0.5])


def test_ramp_J_is_evolve():
    p = TfiParams(4, J=0.7, boundary="open")
    a = alternate_path(p, "ramp_J", T=1.5)
    b = evolve(tfi_problem(p), 1.5)
    assert a.final_fidelity == b.final_fidelity
    assert np.array_equal(a.final_state, b.final_state)


def test_field_ramp_starts_in_symmetric_state():
    tr = alternate_path(TfiParams(4, J=1.0, boundary="open"), "ramp_hx", T=2.0)
    assert tr.fidelity_inst[0] == pytest.approx(1.0)
    assert tr.norm_error < 1e-8


def test_alternate_path_validation():
    with pytest.raises(ValueError):
        alternate_path(TfiParams(4), "sideways", T=1.0)
    with pytest.raises(ValueError):
        alternate_path(ZzxzParams(4), "ramp_hx", T=1.0)


def test_geometric_grid():
    g = geometric_grid(0.5, 50, 8)
    assert g[0] == pytest.approx(0.5) and g[-1] == pytest.approx(50)
    assert np.allclose(np.diff(np.log(g)), np.log(g[1] / g[0]))
    with pytest.raises(ValueError):
        geometric_grid(2.0, 1.0)


def test_gap_sharpness_orders_dips():
    lam = np.linspace(0, 1, 101)
    broad = 1 + 0.5 * (1 - np.exp(-((lam - 0.5) / 0.3) ** 2))
    narrow = 1 - 0.99 * np.exp(-((lam - 0.5) / 0.02) ** 2)
    assert gap_sharpness(lam, narrow) > gap_sharpness(lam, broad)
