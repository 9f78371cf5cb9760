"""Dicke model in the thermodynamic limit as two coupled oscillators.

After the Holstein-Primakoff expansion the ground state is a two-mode
Gaussian.  Quadratures ``x = (a + a^dag)/sqrt(2)`` (field) and
``y = (b + b^dag)/sqrt(2)`` (collective spin) give

    H = 1/2 p^T K p + 1/2 r^T V r,   K = diag(k_x, k_y)

and, in the mass-weighted frame ``r' = K^{-1/2} r``, the ground-state
profile ``exp(-r'^T A r' / 2)`` with ``A = U^T diag(eps_-, eps_+) U``.
Superradiant displacements are not tracked, so overlaps are only
meaningful between states of the same phase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import BranchSwitchError, MetricSample, susceptibility

__all__ = [
    "QuadraticBosonHam",
    "GaussianGroundState",
    "PhaseDomainError",
    "critical_coupling",
    "effective_ham",
    "eigenmodes",
    "gaussian_overlap",
    "gaussian_infidelity",
    "dicke_metric_thermo",
    "emary_brandes_modes",
    "dicke_metric_finite",
]


class PhaseDomainError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticBosonHam:
    kinetic: np.ndarray     # (2,) diagonal of K
    potential: np.ndarray   # (2, 2) symmetric V
    phase: str
    omega_c: float
    omega_s: float
    coupling: float


@dataclass(frozen=True)
class GaussianGroundState:
    eps_minus: float
    eps_plus: float
    U: np.ndarray
    A: np.ndarray
    kinetic: np.ndarray
    phase: str

    @property
    def M(self) -> np.ndarray:
        return np.diag([self.eps_minus, self.eps_plus])

    def physical_form(self) -> np.ndarray:
        """Quadratic form of the profile in the bare ``(x, y)`` quadratures."""
        s = 1.0 / np.sqrt(self.kinetic)
        return self.A * np.outer(s, s)


def _mu(omega_c, omega_s, lam):
    return omega_c * omega_s / (4.0 * lam * lam)


def effective_ham(omega_c: float, omega_s: float, coupling: float, phase: str | None = None,
                  *, tol: float = 1e-12) -> QuadraticBosonHam:
    """Quadratic Hamiltonian of the normal or superradiant phase.

    The phase is chosen from the sign of the softest normal-phase mode
    unless ``phase`` is given explicitly.
    """
    if not (omega_c > 0 and omega_s > 0):
        raise ValueError("frequencies must be positive")
    lam = float(coupling)
    if phase is None:
        w2 = _normal_w2(omega_c, omega_s, lam)
        if abs(w2) <= tol:
            raise PhaseDomainError("coupling sits at the critical point: both phases are gapless")
        phase = "normal" if w2 > 0 else "superradiant"
    if phase == "normal":
        kin = np.array([omega_c, omega_s])
        pot = np.array([[omega_c, 2 * lam], [2 * lam, omega_s]])
    elif phase == "superradiant":
        if lam == 0:
            raise PhaseDomainError("superradiant phase needs a nonzero coupling")
        mu = _mu(omega_c, omega_s, lam)
        w_b = omega_s * (1 + mu) / (2 * mu)
        squeeze = omega_s * (1 - mu) * (3 + mu) / (8 * mu * (1 + mu))
        lam_eff = lam * mu * np.sqrt(2.0 / (1 + mu))
        kin = np.array([omega_c, w_b])
        pot = np.array([[omega_c, 2 * lam_eff], [2 * lam_eff, w_b + 4 * squeeze]])
    else:
        raise ValueError(f"unknown phase {phase!r}")
    return QuadraticBosonHam(kin, pot, phase, omega_c, omega_s, lam)


def _normal_w2(omega_c, omega_s, lam):
    s = np.sqrt(omega_c * omega_s)
    w = np.array([[omega_c ** 2, 2 * lam * s], [2 * lam * s, omega_s ** 2]])
    return float(np.linalg.eigvalsh(w)[0])


def eigenmodes(h: QuadraticBosonHam) -> GaussianGroundState:
    """Normal modes; ``eps_- <= eps_+`` and ``A = U^T M U``."""
    s = np.sqrt(h.kinetic)
    w = h.potential * np.outer(s, s)
    w2, vec = np.linalg.eigh(w)
    if w2[0] <= 0:
        raise PhaseDomainError(f"non-positive mode frequency^2 {w2[0]:.3g}: outside the {h.phase} phase")
    eps = np.sqrt(w2)
    # orient eigenvectors so U is a proper rotation with a non-negative (0, 0) entry
    if vec[0, 0] < 0:
        vec[:, 0] *= -1
    if np.linalg.det(vec) < 0:
        vec[:, 1] *= -1
    U = vec.T
    A = U.T @ np.diag(eps) @ U
    return GaussianGroundState(float(eps[0]), float(eps[1]), U, 0.5 * (A + A.T), h.kinetic.copy(), h.phase)


def gaussian_overlap(g1: GaussianGroundState, g2: GaussianGroundState) -> float:
    """``2 (det A det A')**(1/4) / det(A + A')**(1/2)`` in a common frame."""
    if g1.phase != g2.phase:
        raise ValueError("overlaps across phases need the displacements, which are not modelled")
    a, b = g1.physical_form(), g2.physical_form()
    da, db = np.linalg.det(a), np.linalg.det(b)
    dab = np.linalg.det(a + b)
    if min(da, db) <= 0 or dab <= 0:
        raise ValueError("quadratic forms must be positive definite")
    return float(2.0 * (da * db) ** 0.25 / np.sqrt(dab))


def gaussian_infidelity(g1: GaussianGroundState, g2: GaussianGroundState) -> float:
    """``1 - overlap`` without cancellation (via log-determinants)."""
    a, b = g1.physical_form(), g2.physical_form()
    _, la = np.linalg.slogdet(a)
    _, lb = np.linalg.slogdet(b)
    _, lab = np.linalg.slogdet(0.5 * (a + b))
    # overlap = exp(la/4 + lb/4 - lab/2)
    return float(-np.expm1(0.25 * la + 0.25 * lb - 0.5 * lab))


def critical_coupling(omega_c: float = 1.0, omega_s: float = 1.0) -> float:
    """Coupling where the soft normal mode vanishes, located by root bracketing."""
    f = lambda lam: _normal_w2(omega_c, omega_s, lam)  # noqa: E731
    hi = 1.0
    while f(hi) > 0:
        hi *= 2
    return float(brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _state(omega_c, omega_s, lam, phase):
    return eigenmodes(effective_ham(omega_c, omega_s, lam, phase))


def dicke_metric_thermo(grid, omega_c: float = 1.0, omega_s: float = 1.0,
                        step: float = 1e-3, *, richardson: bool = True) -> list[MetricSample]:
    """Metric along ``grid`` from finite differences of the Gaussian overlap."""
    lam_c = critical_coupling(omega_c, omega_s)
    out = []
    for lam in np.asarray(grid, dtype=float):
        if abs(lam - lam_c) < step:
            raise PhaseDomainError(f"lam={lam} closer than step to the critical point {lam_c:.6f}")
        phase = "normal" if lam < lam_c else "superradiant"

        def infid(a, b, phase=phase):
            return gaussian_infidelity(_state(omega_c, omega_s, a, phase), _state(omega_c, omega_s, b, phase))

        g, err = susceptibility(infid, lam, step, richardson=richardson)
        out.append(MetricSample(float(lam), float(g), "finite_difference_fidelity", float(err)))
    return out


def emary_brandes_modes(omega_c: float, omega_s: float, coupling: float) -> tuple[float, float]:
    """Closed-form normal-mode frequencies of both phases, for cross-checks."""
    lam_c = np.sqrt(omega_c * omega_s) / 2
    if coupling < lam_c:
        a = omega_c ** 2 + omega_s ** 2
        b = np.sqrt((omega_s ** 2 - omega_c ** 2) ** 2 + 16 * coupling ** 2 * omega_c * omega_s)
    else:
        mu = _mu(omega_c, omega_s, coupling)
        a = omega_s ** 2 / mu ** 2 + omega_c ** 2
        b = np.sqrt((omega_s ** 2 / mu ** 2 - omega_c ** 2) ** 2 + 4 * omega_c ** 2 * omega_s ** 2)
    return float(np.sqrt((a - b) / 2)), float(np.sqrt((a + b) / 2))


def dicke_metric_finite(N: int, grid, omega_c: float = 1.0, omega_s: float = 1.0, n_exc: int = 30,
                        *, parity: int = 1) -> list[MetricSample]:
    """Finite-N metric from overlaps of neighbouring grid ground states.

    Ground states come from exact diagonalization of the spin-boson
    Hamiltonian in one parity sector; each consecutive pair gives
    ``g = 2 (1 - F) / dlam**2`` at the pair midpoint.
    """
    from .models import DickeParams, dicke_ground_state

    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least two points")
    states = []
    prev = None
    for lam in grid:
        _, psi = dicke_ground_state(DickeParams(N, float(lam), omega_c, omega_s, n_exc), parity=parity, v0=prev)
        states.append(psi)
        prev = psi
    out = []
    for i in range(grid.size - 1):
        dl = grid[i + 1] - grid[i]
        f = min(1.0, abs(float(np.dot(states[i], states[i + 1]))))
        if f < 0.5:
            raise BranchSwitchError(f"fidelity {f:.3g} between lam={grid[i]} and {grid[i + 1]}")
        out.append(MetricSample(float(0.5 * (grid[i] + grid[i + 1])), 2.0 * (1.0 - f) / dl ** 2,
                                "finite_difference_fidelity"))
    return out
