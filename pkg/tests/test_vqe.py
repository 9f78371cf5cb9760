import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from qptcomplexity.models import TfiParams, ZzxzParams, build_tfi, build_zzxz
from qptcomplexity.selftest import dense_ansatz, dense_sum
from qptcomplexity.vqe import (
    VQE,
    AnsatzCircuit,
    afm_diagnostics,
    apply_ansatz,
    circuit_complexity,
    convergence_scan,
    depth_scan,
    energy,
    energy_and_gradient,
    optimize,
    parameter_shift_gradient,
)


@given(st.integers(2, 9), st.integers(0, 6))
def test_parameter_count(L, d):
    c = AnsatzCircuit(L, d)
    assert c.n_params == d * 2 * (L - 1) + L
    assert sum(g[0] == "ry" for g in c.gates()) == c.n_params
    assert sum(g[0] == "cz" for g in c.gates()) == 2 * d


@pytest.mark.parametrize("L,d", [(2, 1), (3, 2), (4, 1), (5, 3)])
def test_statevector_matches_dense_gates(L, d, rng):
    theta = rng.uniform(-np.pi, np.pi, AnsatzCircuit(L, d).n_params)
    ref = dense_ansatz(L, d, theta)[:, 0]
    assert np.allclose(apply_ansatz(AnsatzCircuit(L, d), theta), ref, atol=1e-12)


def test_dense_circuit_is_orthogonal(rng):
    U = dense_ansatz(4, 2, rng.normal(size=AnsatzCircuit(4, 2).n_params))
    assert np.allclose(U.T @ U, np.eye(16), atol=1e-12)


def test_zero_angles_give_reference_state():
    psi = apply_ansatz(AnsatzCircuit(5, 3), np.zeros(AnsatzCircuit(5, 3).n_params))
    assert psi[0] == pytest.approx(1.0) and np.allclose(psi[1:], 0)


def test_wrong_parameter_count():
    with pytest.raises(ValueError):
        apply_ansatz(AnsatzCircuit(4, 1), np.zeros(3))
    with pytest.raises(ValueError):
        AnsatzCircuit(1, 1)
    with pytest.raises(ValueError):
        AnsatzCircuit(4, -1)


@pytest.mark.parametrize("L,d", [(3, 1), (4, 2), (6, 1)])
def test_gradients_agree(L, d, rng):
    h = build_zzxz(ZzxzParams(L, J=1.3, h_z=0.5))
    c = AnsatzCircuit(L, d)
    theta = rng.uniform(-1, 1, c.n_params)
    e, g = energy_and_gradient(c, theta, h)
    assert e == pytest.approx(energy(c, theta, h), abs=1e-12)
    ps = parameter_shift_gradient(c, theta, h)
    assert np.allclose(g, ps, atol=1e-10)
    eps = 1e-5
    fd = np.array([(energy(c, theta + eps * u, h) - energy(c, theta - eps * u, h)) / (2 * eps)
                   for u in np.eye(c.n_params)])
    assert np.allclose(ps, fd, atol=1e-7)


def test_energy_matches_dense_expectation(rng):
    h = build_tfi(TfiParams(4, J=0.7, bias=0.01, boundary="open"))
    c = AnsatzCircuit(4, 2)
    theta = rng.normal(size=c.n_params)
    psi = dense_ansatz(4, 2, theta)[:, 0]
    assert energy(c, theta, h) == pytest.approx(psi @ dense_sum(h).real @ psi, abs=1e-12)


def test_complexity_formula():
    c = AnsatzCircuit(4, 2)
    theta = np.arange(c.n_params, dtype=float) / 10
    layers = theta[:12].reshape(2, 6)
    ref = sum(np.sqrt(np.sum((row / 2) ** 2) + 9 * (np.pi / 4) ** 2) for row in layers)
    assert circuit_complexity(c, theta) == pytest.approx(ref)
    assert circuit_complexity(AnsatzCircuit(4, 0), np.ones(4)) == 0.0


def test_deep_paramagnet_needs_no_layers():
    # +h_x sum X has the product ground state |- - ...>, reachable by the bare rotation column
    h = build_tfi(TfiParams(4, J=0.0, bias=0.0, boundary="open"))
    res = depth_scan(h, d_max=0, restarts=2)
    assert len(res) == 1 and res[0].layers == 0
    assert res[0].fidelity > 0.999 and res[0].C_N == 0.0


def test_warm_start_never_raises_energy():
    h = build_tfi(TfiParams(6, J=1.0, bias=0.001, boundary="open"))
    res = depth_scan(h, d_max=3, threshold=1.1, restarts=1)
    e = [r.energy for r in res]
    assert [r.layers for r in res] == [1, 2, 3]
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))
    assert not res[-1].converged


def test_scan_stops_at_first_converged_depth():
    scans = convergence_scan(lambda J: build_tfi(TfiParams(4, J=J, bias=0.001, boundary="open")),
                             [0.2, 2.0], d_max=4, restarts=2)
    for rs in scans:
        assert rs[-1].converged and not any(r.converged for r in rs[:-1])


def test_optimize_is_reproducible():
    h = build_zzxz(ZzxzParams(4, J=0.8))
    a, b = optimize(h, 1, seed=3, restarts=2), optimize(h, 1, seed=3, restarts=2)
    assert np.array_equal(a.theta, b.theta)
    assert a.energy >= a.exact_energies[0] - 1e-10
    assert 0 <= a.fidelity <= a.subspace_fidelity <= 1 + 1e-12


def test_estimator_interface():
    h = build_tfi(TfiParams(4, J=0.3, bias=0.001, boundary="open"))
    est = VQE(depth=1, restarts=2, random_state=0)
    assert clone(est).get_params() == est.get_params()
    est.fit(h)
    assert est.n_qubits_ == 4
    assert est.predict().shape == (16,)
    assert est.score() == pytest.approx(est.result_.fidelity)
    assert est.score() > 0.9
    with pytest.raises(ValueError):
        VQE(depth=-1).fit(h)


def test_afm_diagnostics_on_neel_state():
    L = 6
    h = build_zzxz(ZzxzParams(L, J=4.0, h_x=1.0, h_z=0.0))
    neel = np.zeros(1 << L)
    neel[int("".join("1" if i % 2 else "0" for i in reversed(range(L))), 2)] = 1.0
    res = optimize(h, 0, restarts=1)
    diag = afm_diagnostics(res, h, psi=neel)
    even, odd = diag.sublattice_occupation
    assert even == pytest.approx(0.0) and odd == pytest.approx(1.0)
    assert diag.fidelity == pytest.approx(0.5, abs=0.05)
    assert diag.subspace_fidelity > 0.9
    ex_even, ex_odd = diag.exact_sublattice_occupation
    assert ex_even == pytest.approx(0.5, abs=0.05) and ex_odd == pytest.approx(0.5, abs=0.05)
