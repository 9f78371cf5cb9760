import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qptcomplexity import ising
from qptcomplexity.geometry import (
    BranchSwitchError,
    FubiniStudyMetric,
    MetricSample,
    ParamPath,
    cfs_integral,
    chi_fd,
    exponent_relation,
    fidelity,
    fidelity_per_site,
    metric_fluctuation,
    susceptibility,
)
from qptcomplexity.models import TfiParams, build_tfi
from qptcomplexity.pauli import lowest_eigenpairs


def tfi_state(L):
    return lambda J: lowest_eigenpairs(build_tfi(TfiParams(L, J=J)), 1).ground_state


def test_fidelity_trivial_cases():
    e = np.eye(4)
    assert fidelity(e[0], e[0]) == 1.0
    assert fidelity(e[0], e[1]) == 0.0
    assert fidelity(e[0], 1j * e[0]) == 1.0
    with pytest.raises(ValueError):
        fidelity(e[0], np.ones(3))


def test_fidelity_matches_analytic_overlap():
    p = tfi_state(8)
    assert fidelity(p(0.6), p(0.61)) == pytest.approx(ising.gs_overlap(0.6, 0.61, 8), abs=1e-10)


def test_fidelity_per_site():
    N = 5
    psi = np.array([1.0, 0.0])
    phi = np.array([np.exp(-N), np.sqrt(1 - np.exp(-2 * N))])
    assert fidelity_per_site(psi, psi, N) == 0.0
    assert fidelity_per_site(psi, phi, N) == pytest.approx(-1.0)
    assert fidelity_per_site(psi, np.array([0.0, 1.0]), N) == -np.inf


def test_fidelity_per_site_converges_in_size():
    vals = [np.log(ising.gs_overlap(0.4, 0.5, L)) / L for L in (64, 256, 1024)]
    logs = [np.log(ising.gs_overlap(0.4, 0.5, L)) for L in (64, 256, 1024)]
    assert abs(vals[-1] - vals[-2]) < 1e-6
    assert logs[-1] < 3 * logs[-2]


def test_constant_provider_has_zero_metric():
    s = chi_fd(lambda lam: np.array([1.0, 0.0]), 0.3)
    assert s.g == 0.0


def test_chi_fd_matches_closed_form_on_tfi():
    s = chi_fd(tfi_state(8), 0.7, 1e-4)
    assert s.g == pytest.approx(ising.metric_finite(0.7, 8), rel=1e-4)
    per = chi_fd(tfi_state(8), 0.7, 1e-4, per_site=8)
    assert per.g == pytest.approx(s.g / 8) and per.per_site


def test_infidelity_is_half_metric_times_step_squared():
    # 1 - F = g d^2 / 2 + O(d^4): halving d quarters the leading term, the remainder drops 16x
    g = ising.metric_finite(0.6, 32)
    rem = []
    for d in (4e-2, 2e-2):
        q = ising.gs_infidelity(0.6 - d / 2, 0.6 + d / 2, 32)
        rem.append(q - g * d * d / 2)
    assert rem[0] / rem[1] == pytest.approx(16, rel=0.05)


def test_param_path_domain_and_validation():
    path = ParamPath(np.linspace(0.2, 0.8, 7), tfi_state(4))
    assert len(path.states()) == 7
    with pytest.raises(ValueError):
        chi_fd(path, 0.8)
    with pytest.raises(ValueError):
        ParamPath([0.3, 0.2], tfi_state(4))


def test_branch_switch_detected():
    e = np.eye(2)
    with pytest.raises(BranchSwitchError):
        chi_fd(lambda lam: e[0] if lam < 0.5 else e[1], 0.5, 1e-3)


def test_susceptibility_rejects_bad_step():
    with pytest.raises(ValueError):
        susceptibility(lambda a, b: 0.0, 0.1, 0.0)


@given(st.integers(0, 1000))
def test_fluctuation_nonnegative_and_zero_for_eigenoperator(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    a = rng.normal(size=(8, 8))
    O = a + a.T
    assert metric_fluctuation(psi, O, O) >= -1e-12
    w, v = np.linalg.eigh(O)
    assert metric_fluctuation(v[:, 0], O, O) == pytest.approx(0.0, abs=1e-12)


def test_fluctuation_of_exact_gauge_potential_is_metric():
    # g = <A^2> - <A>^2 with A the exact adiabatic gauge potential
    L, J = 6, 0.7
    H = build_tfi(TfiParams(L, J=J)).to_dense()
    dH = build_tfi(TfiParams(L, J=1.0, h_x=0.0)).to_dense()
    w, v = np.linalg.eigh(H)
    m = v.T @ dH @ v
    de = w[None, :] - w[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(np.abs(de) > 1e-12, 1j * m / de, 0)
    A = v @ a @ v.T
    g = metric_fluctuation(v[:, 0], A, A)
    assert g == pytest.approx(chi_fd(tfi_state(L), J).g, rel=1e-5)


def test_cfs_integral_trivial_and_additive():
    assert cfs_integral((np.linspace(0, 1, 11), np.ones(11))).total == pytest.approx(1.0)
    assert cfs_integral((np.linspace(0, 2, 21), 4 * np.ones(21))).total == pytest.approx(4.0)
    grid = np.linspace(0, 2, 201)
    g = ising.metric_finite(grid, 64)
    whole = cfs_integral((grid, g)).total
    parts = cfs_integral((grid[:101], g[:101])).total + cfs_integral((grid[100:], g[100:])).total
    assert whole == pytest.approx(parts, rel=1e-12)


def test_cfs_integral_matches_ising_path():
    grid = np.round(np.arange(0, 1.5 + 1e-12, 1e-3), 12)
    samples = [MetricSample(x, y, "analytic") for x, y in zip(grid, ising.metric_finite(grid, 128, per_site=True))]
    assert cfs_integral(samples).total == pytest.approx(ising.cfs_path(0, 1.5, 1e-3, L=128), rel=1e-12)


def test_metric_sample_validation():
    with pytest.raises(ValueError):
        MetricSample(0.1, -1.0)
    with pytest.raises(ValueError):
        MetricSample(0.1, 1.0, method="guess")
    assert MetricSample(0.1, 4.0).sqrt_g == 2.0


def test_exponent_relation_regimes():
    assert exponent_relation(0, 0, 0, 2).regime == "extensive"
    assert exponent_relation(0, 0, 0, 3).regime == "superextensive"
    assert exponent_relation(0, 0, 0, 1).regime == "subextensive"
    # Ising: operator dimensions 1 each, z = 1, d = 1 -> g/L ~ L, derivative ~ L^(1/2)
    r = exponent_relation(1, 1, 1, 1)
    assert r.delta == -1 and r.derivative_exponent == 0.5


def test_transformer_interface():
    est = FubiniStudyMetric(ground_state=tfi_state(6), step=1e-4)
    out = est.fit_transform(np.array([[0.3], [0.9]]))
    assert out.shape == (2, 2)
    np.testing.assert_allclose(out[:, 0], ising.metric_finite(np.array([0.3, 0.9]), 6), rtol=1e-4)
    assert est.get_params()["step"] == 1e-4
    with pytest.raises(TypeError):
        FubiniStudyMetric().fit()
