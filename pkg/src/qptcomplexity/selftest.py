"""Oracle suite behind ``qptc --selftest``.

Every check recomputes a quantity by an independent dense route (explicit
Kronecker products, dense traces, full diagonalization, finite differences or
planted synthetic data) and compares at a fixed tolerance.
"""
from __future__ import annotations

import sys
import time
from functools import reduce

import numpy as np
from scipy.linalg import expm

_I = np.eye(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0, -1.0]).astype(complex)


def dense_string(x: int, z: int, L: int) -> np.ndarray:
    """Kronecker product with site 0 as the least significant qubit."""
    ops = []
    for i in reversed(range(L)):
        bx, bz = (x >> i) & 1, (z >> i) & 1
        ops.append(_Y if bx and bz else _X if bx else _Z if bz else _I)
    return reduce(np.kron, ops)


def dense_sum(h) -> np.ndarray:
    return sum(c * dense_string(int(x), int(z), h.nsites) for x, z, c in zip(h.x, h.z, h.coeffs))


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]])


def dense_ansatz(L: int, d: int, theta) -> np.ndarray:
    """Circuit unitary built gate by gate as full matrices."""
    from .vqe import AnsatzCircuit

    c = AnsatzCircuit(L, d)
    U = np.eye(1 << L)
    flat = iter(np.asarray(theta, dtype=float))
    for gate in c.gates():
        if gate[0] == "ry":
            q = gate[1]
            ops = [_ry(next(flat)) if i == q else _I for i in reversed(range(L))]
            G = reduce(np.kron, ops)
        else:
            parity = gate[1]
            diag = np.ones(1 << L)
            for i in range(parity, L - 1, 2):
                both = (((np.arange(1 << L) >> i) & 1) & ((np.arange(1 << L) >> (i + 1)) & 1)).astype(bool)
                diag[both] *= -1
            G = np.diag(diag)
        U = G @ U
    return U


# checks -----------------------------------------------------------------------------

def check_pauli_dense(seed=0):
    from .pauli import PauliSum

    rng = np.random.default_rng(seed)
    L = 4
    x, z = rng.integers(0, 1 << L, 12), rng.integers(0, 1 << L, 12)
    c = rng.normal(size=12) + 1j * rng.normal(size=12)
    h = PauliSum(x, z, c, L)
    err = np.abs(h.to_sparse().toarray() - dense_sum(h)).max()
    return err < 1e-12, f"max |sparse - kron| = {err:.2e}"


def check_products(seed=1):
    from .pauli import PauliSum

    rng = np.random.default_rng(seed)
    L = 3
    a = PauliSum(rng.integers(0, 8, 5), rng.integers(0, 8, 5), rng.normal(size=5), L)
    b = PauliSum(rng.integers(0, 8, 5), rng.integers(0, 8, 5), rng.normal(size=5), L)
    err = np.abs(dense_sum(a @ b) - dense_sum(a) @ dense_sum(b)).max()
    return err < 1e-12, f"max |(AB) - A B| = {err:.2e}"


def check_gates(seed=2):
    from .vqe import AnsatzCircuit, apply_ansatz

    rng = np.random.default_rng(seed)
    errs = []
    for L, d in ((3, 1), (4, 2), (5, 1)):
        theta = rng.uniform(-np.pi, np.pi, AnsatzCircuit(L, d).n_params)
        ref = dense_ansatz(L, d, theta)[:, 0]
        errs.append(np.abs(apply_ansatz(AnsatzCircuit(L, d), theta) - ref).max())
    err = max(errs)
    return err < 1e-12, f"max |statevector - dense gate product| = {err:.2e}"


def check_diagonalization():
    from .models import TfiParams, ZzxzParams, build_tfi, build_zzxz
    from .pauli import lowest_eigenpairs

    errs = []
    for h in (build_tfi(TfiParams(8, J=0.7, bias=0.01)), build_zzxz(ZzxzParams(8, J=1.5)),
              build_tfi(TfiParams(10, J=1.0, boundary="open"))):
        ref = np.linalg.eigvalsh(h.to_sparse().toarray())[:3]
        spec = lowest_eigenpairs(h, 3, dense_below=0)
        errs.append(np.abs(spec.energies - ref).max())
    err = max(errs)
    return err < 1e-9, f"max |Lanczos - dense eigvalsh| = {err:.2e}"


def check_cd_traces():
    from .adiabatic import tfi_problem, zzxz_problem
    from .models import TfiParams, ZzxzParams

    errs = []
    for prob in (tfi_problem(TfiParams(4, J=0.8, boundary="open")), zzxz_problem(ZzxzParams(4, J=1.3))):
        lam = 0.37
        H = dense_sum(prob.hamiltonian(lam))
        dH = dense_sum(prob.h1)
        Bs = [dense_sum(b) for b in prob.ansatz.basis]
        Cs = [-1j * (H @ B - B @ H) for B in Bs]
        D = H.shape[0]
        M = np.array([[np.trace(a @ b).real / D for b in Cs] for a in Cs])
        rhs = np.array([np.trace(dH @ c).real / D for c in Cs])
        ref = np.linalg.lstsq(M, -rhs, rcond=None)[0]
        errs.append(np.abs(prob.cd_coefficients(lam) - ref).max())
    err = max(errs)
    return err < 1e-10, f"max |c - dense S minimizer| = {err:.2e}"


def check_gradients(seed=3):
    from .models import ZzxzParams, build_zzxz
    from .vqe import AnsatzCircuit, energy, energy_and_gradient, parameter_shift_gradient

    rng = np.random.default_rng(seed)
    h = build_zzxz(ZzxzParams(4, J=1.2))
    c = AnsatzCircuit(4, 2)
    theta = rng.uniform(-1, 1, c.n_params)
    _, g = energy_and_gradient(c, theta, h)
    ps = parameter_shift_gradient(c, theta, h)
    eps = 1e-5
    fd = np.array([(energy(c, theta + eps * e, h) - energy(c, theta - eps * e, h)) / (2 * eps)
                   for e in np.eye(c.n_params)])
    e1, e2 = np.abs(g - ps).max(), np.abs(ps - fd).max()
    return e1 < 1e-10 and e2 < 1e-7, f"|adjoint - shift| = {e1:.1e}, |shift - finite diff| = {e2:.1e}"


def check_trotter():
    from .models import TfiParams, build_tfi
    from .pauli import split_commuting_groups, trotter_step

    h = build_tfi(TfiParams(4, J=0.9, bias=0.2))
    groups = split_commuting_groups(h)
    psi = np.zeros(16, dtype=complex)
    psi[3] = 1
    dt = 1e-3
    out = trotter_step(groups, dt, psi)
    ref = psi
    for g in groups:
        ref = expm(-1j * dt * dense_sum(g)) @ ref
    exact = expm(-1j * dt * dense_sum(h)) @ psi
    e1, e2 = np.abs(out - ref).max(), np.abs(out - exact).max()
    return e1 < 1e-12 and e2 < 1e-5, f"|step - group exponentials| = {e1:.1e}, |step - exact| = {e2:.1e}"


def check_ising_metric():
    from . import ising
    from .geometry import susceptibility

    worst = 0.0
    for L in (8, 64):
        for J in (0.2, 0.9, 2.0):
            g, _ = susceptibility(lambda a, b: ising.gs_infidelity(a, b, L), J, 1e-3)
            worst = max(worst, abs(g / ising.metric_finite(J, L) - 1))
    return worst < 1e-4, f"max rel |closed form - fidelity finite difference| = {worst:.1e}"


def check_ising_spectrum():
    from . import ising
    from .models import TfiParams, build_tfi
    from .pauli import lowest_eigenpairs

    # even-parity sector, antiperiodic momenta: E0 = -2 sum_{k>0} sqrt(1 + J^2 - 2 J cos k)
    J, L = 0.6, 8
    e_ed = lowest_eigenpairs(build_tfi(TfiParams(L, J=J)), 1).energies[0]
    k = ising.momenta(L)
    e_jw = -2 * np.sum(np.sqrt(1 + J ** 2 - 2 * J * np.cos(k)))
    err = abs(e_ed - e_jw)
    return err < 1e-9, f"|ED - free-fermion energy| = {err:.1e}"


def check_scaling(seed=4):
    from .scaling import fit_scaling

    rng = np.random.default_rng(seed)
    N = np.array([10, 15, 20, 25, 30, 35, 40], dtype=float)
    planted = {"power_offset": ("delta", 2 / 3, 0.4 + 1.5 * N ** (2 / 3)),
               "position": ("nu", 2 / 3, 0.5 + 0.8 * N ** (-2 / 3)),
               "power": ("b", 0.5, 3.0 * N ** 0.5),
               "linear_log": ("b", 0.3, 1.0 + 0.3 * np.log(N))}
    worst = 0.0
    for law, (_, true, y) in planted.items():
        worst = max(worst, abs(fit_scaling(N, y, law).exponent - true))
    # noisy round trip: the 95% interval covers the planted exponent in at least 95% of seeded trials
    hits, trials = 0, 200
    for _ in range(trials):
        y = (0.4 + 1.5 * N ** 0.6) * (1 + 0.01 * rng.normal(size=N.size))
        lo, hi = fit_scaling(N, y, "power_offset").exponent_interval(0.95)
        hits += lo <= 0.6 <= hi
    ok = worst < 1e-6 and hits >= 0.95 * trials
    return ok, f"exact-data error {worst:.1e}, noisy coverage {hits}/{trials}"


def check_nielsen_cost():
    from .adiabatic import closed_form_complexity, evolve, tfi_problem
    from .models import TfiParams

    tr = evolve(tfi_problem(TfiParams(4, J=0.7, boundary="open")), 2.0, track=False)
    a, b = tr.nielsen(), closed_form_complexity(tr)
    err = abs(a - b) / b
    return err < 1e-10, f"rel |trace cost - closed form| = {err:.1e}"


CHECKS = {
    "pauli strings vs Kronecker products": check_pauli_dense,
    "Pauli products vs dense products": check_products,
    "ansatz statevector vs dense gate product": check_gates,
    "iterative eigensolver vs dense diagonalization": check_diagonalization,
    "counter-diabatic coefficients vs dense traces": check_cd_traces,
    "adjoint and parameter-shift gradients vs finite differences": check_gradients,
    "Trotter step vs dense exponentials": check_trotter,
    "Ising metric closed form vs fidelity finite differences": check_ising_metric,
    "Ising free-fermion energy vs ED": check_ising_spectrum,
    "synthetic scaling-law round trips": check_scaling,
    "protocol cost vs closed form": check_nielsen_cost,
}


def run_checks() -> list[tuple[str, bool, str]]:
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # reported as a failure, not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out


def run_selftest(stream=None) -> int:
    stream = stream or sys.stdout
    t0 = time.time()
    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=stream)
    n_fail = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed in {time.time() - t0:.1f} s", file=stream)
    return 1 if n_fail else 0
