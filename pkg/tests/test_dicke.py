import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qptcomplexity.dicke import (
    PhaseDomainError,
    QuadraticBosonHam,
    critical_coupling,
    dicke_metric_finite,
    dicke_metric_thermo,
    effective_ham,
    eigenmodes,
    emary_brandes_modes,
    gaussian_infidelity,
    gaussian_overlap,
)
from qptcomplexity.geometry import BranchSwitchError
from qptcomplexity.models import DickeParams, dicke_ground_state
from qptcomplexity.scaling import find_peak


def modes(lam, wc=1.0, ws=1.0, phase=None):
    return eigenmodes(effective_ham(wc, ws, lam, phase))


def test_decoupled_modes():
    g = modes(0.0, 1.5, 0.7)
    assert (g.eps_minus, g.eps_plus) == pytest.approx((0.7, 1.5))
    np.testing.assert_allclose(np.abs(g.U), np.eye(2)[::-1], atol=1e-12)


def test_symmetric_coupling_rotates_by_45_degrees():
    g = modes(0.3)
    np.testing.assert_allclose(np.abs(g.U), np.full((2, 2), np.sqrt(0.5)), atol=1e-12)


def test_critical_coupling_where_soft_mode_vanishes():
    lc = critical_coupling(1.0, 1.0)
    assert lc == pytest.approx(0.5, abs=1e-12)
    assert critical_coupling(2.0, 0.5) == pytest.approx(0.5)
    eps = [modes(x).eps_minus for x in (0.4, 0.49, 0.499, 0.4999)]
    assert np.all(np.diff(eps) < 0) and eps[-1] < 0.05
    with pytest.raises(PhaseDomainError):
        effective_ham(1, 1, lc)


@given(st.floats(0.01, 0.49), st.floats(0.51, 3.0))
def test_modes_match_closed_form_in_both_phases(lo, hi):
    for lam in (lo, hi):
        g = modes(lam)
        assert (g.eps_minus, g.eps_plus) == pytest.approx(emary_brandes_modes(1.0, 1.0, lam), rel=1e-10)
        assert g.eps_minus > 0


def test_superradiant_far_from_critical():
    g = modes(5.0)
    assert g.phase == "superradiant" and 0 < g.eps_minus < g.eps_plus


def test_round_trip_reconstruction():
    h = effective_ham(1.3, 0.8, 0.2)
    g = eigenmodes(h)
    s = np.sqrt(h.kinetic)
    w = h.potential * np.outer(s, s)
    np.testing.assert_allclose(g.U.T @ np.diag([g.eps_minus, g.eps_plus]) ** 2 @ g.U, w, atol=1e-12)


@given(st.floats(0.0, 0.45), st.floats(0.0, 0.45))
def test_overlap_symmetric_and_bounded(a, b):
    ga, gb = modes(a), modes(b)
    o = gaussian_overlap(ga, gb)
    assert 0 < o <= 1 + 1e-15
    assert o == pytest.approx(gaussian_overlap(gb, ga), abs=1e-14)
    assert gaussian_infidelity(ga, gb) == pytest.approx(1 - o, abs=1e-12)


def test_overlap_one_for_identical_and_separable_formula():
    g = modes(0.2)
    assert gaussian_overlap(g, g) == pytest.approx(1.0, abs=1e-15)
    # bare frequency changes leave the vacuum untouched
    assert gaussian_overlap(modes(0.0, 1.0, 2.0), modes(0.0, 1.0, 3.0)) == pytest.approx(1.0)
    # a squeezed mode (potential differs from kinetic) follows the 1D formula
    sq = lambda k: eigenmodes(QuadraticBosonHam(np.ones(2), np.diag([k, 1.0]), "normal", 1, 1, 0))  # noqa: E731
    ref = np.sqrt(2 * np.sqrt(2.0 * 3.0) / 5.0)
    assert gaussian_overlap(sq(4.0), sq(9.0)) == pytest.approx(ref, rel=1e-12)


def test_overlap_across_phases_rejected():
    with pytest.raises(ValueError):
        gaussian_overlap(modes(0.3), modes(0.7))


def test_thermo_metric_grows_towards_critical_point():
    s = dicke_metric_thermo([0.1, 0.3, 0.45, 0.49, 0.51, 0.6, 1.0])
    g = [x.g for x in s]
    assert g[0] < g[1] < g[2] < g[3]
    assert g[4] > g[5] > g[6]
    with pytest.raises(PhaseDomainError):
        dicke_metric_thermo([0.5])


def test_thermo_metric_matches_large_n_ed_in_normal_phase():
    grid = np.array([0.3, 0.301])
    fin = dicke_metric_finite(60, grid, n_exc=20)[0].g
    th = dicke_metric_thermo([0.3005])[0].g
    assert fin == pytest.approx(th, rel=0.05)


def test_finite_peaks_approach_critical_point_from_above():
    grid = np.round(np.arange(0.40, 0.80 + 1e-9, 2e-3), 9)
    pos = []
    for N in (6, 10, 14):
        s = dicke_metric_finite(N, grid, n_exc=24)
        pk = find_peak([x.lam for x in s], [x.sqrt_g for x in s], N)
        assert not pk.edge
        pos.append(pk.x_max)
    assert pos[0] > pos[1] > pos[2] > 0.5


def test_finite_metric_validation_and_branch_guard():
    with pytest.raises(ValueError):
        dicke_metric_finite(4, [0.3])
    # huge steps across the transition make neighbouring states nearly orthogonal
    with pytest.raises(BranchSwitchError):
        dicke_metric_finite(30, [0.1, 2.0], n_exc=20)


def test_ground_state_seed_does_not_change_result():
    p = DickeParams(10, 0.45, n_exc=20)
    e1, psi1 = dicke_ground_state(p)
    e2, psi2 = dicke_ground_state(p, v0=psi1)
    assert e1 == pytest.approx(e2, abs=1e-10)
    assert abs(np.dot(psi1, psi2)) == pytest.approx(1.0, abs=1e-10)
