"""Layered Ry + CZ variational eigensolver on a real statevector.

Each layer applies ``Ry`` to every qubit, CZ on even bonds ``(0,1), (2,3), ...``,
``Ry`` on qubits ``1..L-2`` and CZ on odd bonds ``(1,2), (3,4), ...``; a final
``Ry`` column closes the circuit.  All gates are real, so states stay real.
Protocol fidelities are squared overlaps ``|<a|b>|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state

from .pauli import PauliSum, Spectrum, lowest_eigenpairs

__all__ = [
    "AnsatzCircuit",
    "VqeResult",
    "StagnationWarning",
    "apply_ansatz",
    "energy",
    "energy_and_gradient",
    "parameter_shift_gradient",
    "optimize",
    "depth_scan",
    "convergence_scan",
    "circuit_complexity",
    "afm_diagnostics",
    "AfmDiagnostics",
    "VQE",
]


class StagnationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AnsatzCircuit:
    L: int
    d: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ValueError("L must be an integer >= 2")
        if int(self.d) != self.d or self.d < 0:
            raise ValueError("d must be a non-negative integer")

    @property
    def per_layer(self) -> int:
        return 2 * (self.L - 1)

    @property
    def n_params(self) -> int:
        return self.d * self.per_layer + self.L

    @property
    def cz_per_layer(self) -> int:
        return self.L - 1

    def gates(self):
        """Gate list: ``("ry", qubit, param_index)`` or ``("cz", parity)``."""
        out, k = [], 0
        inner = list(range(1, self.L - 1))
        for _ in range(self.d):
            for q in range(self.L):
                out.append(("ry", q, k))
                k += 1
            out.append(("cz", 0))
            for q in inner:
                out.append(("ry", q, k))
                k += 1
            out.append(("cz", 1))
        for q in range(self.L):
            out.append(("ry", q, k))
            k += 1
        return out

    def split(self, theta):
        """``(layers, final)``: ``layers`` has shape ``(d, 2(L-1))``."""
        theta = self.check(theta)
        return theta[: self.d * self.per_layer].reshape(self.d, self.per_layer), theta[self.d * self.per_layer:]

    def check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters for L={self.L}, d={self.d}, got {theta.size}")
        return theta


_CZ_CACHE: dict = {}


def _cz_signs(L: int, parity: int) -> np.ndarray:
    key = (L, parity)
    if key not in _CZ_CACHE:
        idx = np.arange(1 << L)
        s = np.ones(1 << L)
        for i in range(parity, L - 1, 2):
            both = ((idx >> i) & 1) & ((idx >> (i + 1)) & 1)
            s = s * (1 - 2 * both)
        _CZ_CACHE[key] = s
    return _CZ_CACHE[key]


def _ry(psi, q, L, theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    v = psi.reshape(1 << (L - 1 - q), 2, 1 << q)
    if q >= 3:
        # wide inner blocks: batched 2x2 product is fastest
        return np.matmul(np.array([[c, -s], [s, c]]), v).reshape(-1)
    out = v * c
    out[:, 0, :] -= s * v[:, 1, :]
    out[:, 1, :] += s * v[:, 0, :]
    return out.reshape(-1)


def _dry(psi, q, L, theta):
    # derivative of Ry(theta) applied to psi
    return 0.5 * _ry(psi, q, L, theta + np.pi)


def apply_ansatz(c: AnsatzCircuit, theta, psi0=None) -> np.ndarray:
    """State ``U(theta)|0...0>`` (or ``U(theta) psi0``)."""
    theta = c.check(theta)
    if psi0 is None:
        psi = np.zeros(1 << c.L)
        psi[0] = 1.0
    else:
        psi = np.asarray(psi0, dtype=float).copy()
    for g in c.gates():
        if g[0] == "ry":
            psi = _ry(psi, g[1], c.L, theta[g[2]])
        else:
            psi = psi * _cz_signs(c.L, g[1])
    return psi


def _matrix(h):
    if isinstance(h, PauliSum):
        m = h.to_sparse()
    else:
        m = sp.csr_matrix(h) if not sp.issparse(h) else h.tocsr()
    if np.iscomplexobj(m.data):
        if np.abs(m.data.imag).max(initial=0.0) > 1e-12:
            raise ValueError("Hamiltonian is not real; the real-amplitude ansatz needs a real operator")
        m = m.real.tocsr()
    return m


def energy(c: AnsatzCircuit, theta, h) -> float:
    m = _matrix(h)
    psi = apply_ansatz(c, theta)
    return float(psi @ (m @ psi))


def energy_and_gradient(c: AnsatzCircuit, theta, h) -> tuple[float, np.ndarray]:
    """Energy and exact gradient by reverse-mode sweep through the circuit.

    Equal to the parameter-shift rule for ``Ry`` but needs one forward and
    one backward pass instead of ``2 n_params`` circuit evaluations.
    """
    m = h if sp.issparse(h) and not np.iscomplexobj(h.data) else _matrix(h)
    theta = c.check(theta)
    psi = apply_ansatz(c, theta)
    lam = m @ psi
    e = float(psi @ lam)
    grad = np.zeros(theta.size)
    phi = psi
    for g in reversed(c.gates()):
        if g[0] == "ry":
            q, k = g[1], g[2]
            phi = _ry(phi, q, c.L, -theta[k])
            grad[k] = 2.0 * lam @ _dry(phi, q, c.L, theta[k])
            lam = _ry(lam, q, c.L, -theta[k])
        else:
            s = _cz_signs(c.L, g[1])
            phi = phi * s
            lam = lam * s
    return e, grad


def parameter_shift_gradient(c: AnsatzCircuit, theta, h) -> np.ndarray:
    """``dE/dtheta_k = [E(theta_k + pi/2) - E(theta_k - pi/2)] / 2``."""
    m = _matrix(h)
    theta = c.check(theta)
    grad = np.empty(theta.size)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += np.pi / 2
        tm[k] -= np.pi / 2
        grad[k] = 0.5 * (energy(c, tp, m) - energy(c, tm, m))
    return grad


def circuit_complexity(c: AnsatzCircuit, theta) -> float:
    """``sum_j sqrt(sum_i (theta_i^j / 2)^2 + 3 (L-1) (pi/4)^2)`` over the ``d`` layers.

    The closing ``Ry`` column is not part of the sum.
    """
    layers, _ = c.split(theta)
    cz = 3 * (c.L - 1) * (np.pi / 4) ** 2
    return float(np.sum(np.sqrt(np.sum((layers / 2) ** 2, axis=1) + cz)))


def final_column_complexity(c: AnsatzCircuit, theta) -> float:
    """Norm ``sqrt(sum (theta_final/2)^2)`` of the closing rotation column, reported separately."""
    _, final = c.split(theta)
    return float(np.sqrt(np.sum((final / 2) ** 2)))


# optimization ------------------------------------------------------------------------

@dataclass
class VqeResult:
    theta: np.ndarray
    energy: float
    fidelity: float
    subspace_fidelity: float
    layers: int
    L: int
    C_N: float
    converged: bool
    exact_energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    restarts: int = 0
    nit: int = 0
    stagnated: bool = False
    final_column: float = 0.0

    @property
    def C_N_per_site(self) -> float:
        return self.C_N / self.L

    @property
    def energy_accuracy(self) -> float:
        """``1 - E_rel`` with ``E_rel = |E - E0| / |E0|``."""
        e0 = self.exact_energies[0]
        return float(1.0 - abs(self.energy - e0) / max(abs(e0), 1e-300))

    def state(self) -> np.ndarray:
        return apply_ansatz(AnsatzCircuit(self.L, self.layers), self.theta)


def _fidelities(psi, spec: Spectrum):
    amps = spec.vectors.conj().T @ psi
    p = np.abs(amps) ** 2
    return float(p[0]), float(p[:2].sum())


def exact_spectrum(h, k: int = 2) -> Spectrum:
    return lowest_eigenpairs(h, k)


def optimize(h, d: int, *, seed: int = 0, restarts: int = 8, init=None, spec: Spectrum | None = None,
             threshold: float = 0.9, init_scale=(0.1, np.pi), maxiter: int = 2000,
             gtol: float = 1e-7) -> VqeResult:
    """Multi-start L-BFGS-B minimization of the ansatz energy.

    Restart ``r`` starts from angles drawn uniformly in ``[-s, s]`` where ``s``
    cycles through ``init_scale`` (a float or a sequence), seeded by
    ``(seed, r)``.  The default alternates small angles, which stay near the
    reference state, with full-range angles, which reach states the small
    ones cannot (for instance the flipped ferromagnet).  ``init`` adds one
    extra start, typically a warm start from a shallower circuit.  The lowest energy wins.  Stagnation
    (no restart reporting success) is flagged on the result.
    """
    if d < 0:
        raise ValueError("d must be >= 0")
    c = AnsatzCircuit(int(round(np.log2(_matrix(h).shape[0]))), d)
    m = _matrix(h)
    if m.shape[0] != 1 << c.L:
        raise ValueError("Hamiltonian dimension is not a power of two")
    spec = spec or exact_spectrum(m)
    starts = []
    if init is not None:
        starts.append(c.check(init))
    scales = np.atleast_1d(np.asarray(init_scale, dtype=float))
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        s = scales[r % scales.size]
        starts.append(rng.uniform(-s, s, c.n_params))
    if not starts:
        raise ValueError("need at least one start (restarts >= 1 or init)")
    best, nit, ok = None, 0, False
    for x0 in starts:
        res = minimize(lambda t: energy_and_gradient(c, t, m), x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "gtol": gtol})
        nit += int(res.nit)
        ok = ok or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x
    psi = apply_ansatz(c, theta)
    f, fsub = _fidelities(psi, spec)
    return VqeResult(theta, float(best.fun), f, fsub, d, c.L, circuit_complexity(c, theta), f >= threshold,
                     spec.energies.copy(), len(starts), nit, not ok, final_column_complexity(c, theta))


def pad_layer(theta, L: int, d: int) -> np.ndarray:
    """Depth ``d`` parameters to depth ``d+1`` by prepending a zero-angle layer.

    On the ``|0...0>`` input the zero layer is the identity (CZ acts
    trivially on ``|00>``), so the padded circuit prepares the same state.
    """
    theta = AnsatzCircuit(L, d).check(theta)
    return np.concatenate([np.zeros(2 * (L - 1)), theta])


def convergence_scan(h_of_J, J_grid, *, d_max: int = 8, threshold: float = 0.9, seed: int = 0,
                     restarts: int = 8, warm_start: bool = True, d_min: int = 1,
                     executor=None) -> list[list[VqeResult]]:
    """Depth scan per ``J``: stop at the first depth whose fidelity reaches ``threshold``.

    ``h_of_J`` maps ``J`` to a Hamiltonian.  Returns, per ``J``, the list of
    results tried (last entry is the converged one, if any).  With
    ``d_max = 0`` only the bare rotation column is evaluated.
    """
    def run(J):
        return depth_scan(h_of_J(J), d_max=d_max, threshold=threshold, seed=seed, restarts=restarts,
                          warm_start=warm_start, d_min=d_min)

    J_grid = list(J_grid)
    if executor is None:
        return [run(J) for J in J_grid]
    return list(executor.map(run, J_grid))


def depth_scan(h, *, d_max: int = 8, threshold: float = 0.9, seed: int = 0, restarts: int = 8,
               warm_start: bool = True, d_min: int = 1) -> list[VqeResult]:
    """Increase the depth of the circuit for one Hamiltonian until ``threshold`` is met."""
    h = _matrix(h)
    spec = exact_spectrum(h)
    out, prev = [], None
    depths = [0] if d_max == 0 else range(max(d_min, 0), d_max + 1)
    L = int(round(np.log2(h.shape[0])))
    for d in depths:
        init = pad_layer(prev.theta, L, prev.layers) if (warm_start and prev is not None and prev.layers == d - 1) else None
        res = optimize(h, d, seed=seed, restarts=restarts, init=init, spec=spec, threshold=threshold)
        if prev is not None and init is not None and res.energy > prev.energy:
            res = prev_as_depth(prev, d, L, spec, threshold)
        out.append(res)
        prev = res
        if res.converged:
            break
    return out


def prev_as_depth(prev: VqeResult, d: int, L: int, spec, threshold) -> VqeResult:
    """The incumbent embedded at depth ``d`` (guards the warm-start monotonicity)."""
    theta = prev.theta
    for k in range(prev.layers, d):
        theta = pad_layer(theta, L, k)
    c = AnsatzCircuit(L, d)
    f, fsub = _fidelities(apply_ansatz(c, theta), spec)
    return VqeResult(theta, prev.energy, f, fsub, d, L, circuit_complexity(c, theta), f >= threshold,
                     prev.exact_energies, prev.restarts, prev.nit, prev.stagnated, final_column_complexity(c, theta))


def scan_summary(results: list[VqeResult]) -> VqeResult:
    """Converged entry if any, otherwise the best-fidelity attempt."""
    conv = [r for r in results if r.converged]
    return conv[0] if conv else max(results, key=lambda r: r.fidelity)


# diagnostics -----------------------------------------------------------------------------

@dataclass
class AfmDiagnostics:
    sigma_z: np.ndarray          # per-site <sigma^z>
    occupation: np.ndarray       # per-site (1 - <sigma^z>)/2
    exact_sigma_z: np.ndarray
    exact_occupation: np.ndarray
    magnetization: float         # mean occupation of the VQE state
    exact_magnetization: float
    fidelity: float
    subspace_fidelity: float
    energy_accuracy: float

    @property
    def sublattice_occupation(self) -> tuple[float, float]:
        """Mean occupation on even and on odd sites of the VQE state."""
        return float(self.occupation[0::2].mean()), float(self.occupation[1::2].mean())

    @property
    def exact_sublattice_occupation(self) -> tuple[float, float]:
        return float(self.exact_occupation[0::2].mean()), float(self.exact_occupation[1::2].mean())


def _sigma_z(psi, L):
    p = np.abs(psi) ** 2
    idx = np.arange(psi.size)
    return np.array([np.sum(p * (1 - 2 * ((idx >> i) & 1))) for i in range(L)])


def afm_diagnostics(result: VqeResult, h=None, spec: Spectrum | None = None, *, psi=None) -> AfmDiagnostics:
    """Per-site magnetization, fidelities and energy accuracy of a VQE state.

    ``psi`` overrides the state prepared from ``result`` (useful for
    constructed inputs); the exact spectrum comes from ``spec`` or ``h``.
    """
    if spec is None:
        if h is None:
            raise ValueError("need the Hamiltonian or its spectrum")
        spec = exact_spectrum(_matrix(h))
    psi = result.state() if psi is None else np.asarray(psi)
    L = int(round(np.log2(psi.size)))
    sz = _sigma_z(psi, L)
    ez = _sigma_z(spec.ground_state, L)
    f, fsub = _fidelities(psi, spec)
    e0 = spec.energies[0]
    e = float(np.real(np.vdot(psi, _matrix(h) @ psi))) if h is not None else result.energy
    acc = 1.0 - abs(e - e0) / max(abs(e0), 1e-300)
    return AfmDiagnostics(sz, (1 - sz) / 2, ez, (1 - ez) / 2, float(np.mean((1 - sz) / 2)),
                          float(np.mean((1 - ez) / 2)), f, fsub, float(acc))


# estimator ---------------------------------------------------------------------------

class VQE(BaseEstimator):
    """Estimator front end for :func:`optimize`.

    ``fit(H)`` takes a :class:`PauliSum` or a real sparse matrix.
    ``predict()`` returns the optimized state and ``score()`` the squared
    overlap with the exact ground state.

    Parameters
    ----------
    depth : int
        Number of Ry + CZ layers.
    restarts : int
        Random starts per fit.
    random_state : int
        Seed of the restart sequence.
    threshold : float
        Fidelity that marks convergence.
    init_scale : float or tuple
        Half-widths of the uniform initial-angle distributions, cycled over restarts.
    """

    def __init__(self, depth=1, restarts=8, random_state=0, threshold=0.9, init_scale=(0.1, np.pi)):
        self.depth = depth
        self.restarts = restarts
        self.random_state = random_state
        self.threshold = threshold
        self.init_scale = init_scale

    def fit(self, X, y=None):
        if int(self.depth) != self.depth or self.depth < 0:
            raise ValueError("depth must be a non-negative integer")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        seed = check_random_state(self.random_state).randint(0, 2 ** 31 - 1) if not isinstance(
            self.random_state, (int, np.integer)) else int(self.random_state)
        self.result_ = optimize(X, int(self.depth), seed=seed, restarts=int(self.restarts),
                                threshold=self.threshold, init_scale=self.init_scale)
        self.theta_ = self.result_.theta
        self.energy_ = self.result_.energy
        self.n_qubits_ = self.result_.L
        return self

    def predict(self, X=None):
        return self.result_.state()

    def score(self, X=None, y=None):
        return self.result_.fidelity
