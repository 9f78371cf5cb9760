"""Free-fermion solution of the periodic transverse-field Ising chain.

The chain ``-J sum Z_i Z_{i+1} + sum X_i`` maps to independent momentum
pairs ``(k, -k)``, each in the state ``cos(theta_k/2)|0> + sin(theta_k/2)|k,-k>``.
Everything here is a function of the Bogoliubov angles ``theta_k(J)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BogoliubovSolution",
    "momenta",
    "theta",
    "dtheta_dJ",
    "solve",
    "gs_overlap",
    "gs_infidelity",
    "metric_finite",
    "metric_thermo",
    "cfs_path",
    "nielsen_angle_complexity",
    "nielsen_angle_derivative",
]


def _check_even(L):
    if int(L) != L or L < 2 or L % 2:
        raise ValueError(f"L must be an even integer >= 2, got {L}")


def momenta(L: int) -> np.ndarray:
    """Positive momenta ``(2m-1) pi / L``, ``m = 1..L/2``."""
    _check_even(L)
    return (2 * np.arange(1, L // 2 + 1) - 1) * np.pi / L


def theta(J, k):
    """Bogoliubov angle, continuous in ``J`` (two-argument arctangent)."""
    J = np.asarray(J, dtype=float)
    k = np.asarray(k, dtype=float)
    return np.arctan2(-J * np.sin(k), 1.0 + J * np.cos(k))


def dtheta_dJ(J, k):
    J = np.asarray(J, dtype=float)
    k = np.asarray(k, dtype=float)
    return -np.sin(k) / (1.0 + 2.0 * J * np.cos(k) + J * J)


@dataclass(frozen=True)
class BogoliubovSolution:
    L: int
    J: float
    momenta: np.ndarray
    thetas: np.ndarray


def solve(J: float, L: int) -> BogoliubovSolution:
    k = momenta(L)
    return BogoliubovSolution(L, float(J), k, theta(J, k))


def _log_abs_cos_half(d):
    # cos(d/2) = 1 - 2 sin^2(d/4); log1p keeps small angles exact
    c = 1.0 - 2.0 * np.sin(d / 4.0) ** 2
    with np.errstate(divide="ignore"):
        return np.where(c > 0.5, np.log1p(-2.0 * np.sin(d / 4.0) ** 2), np.log(np.abs(c)))


def gs_overlap(J_R: float, J_T: float, L: int) -> float:
    """``|<psi(J_R)|psi(J_T)>| = prod_k |cos(dtheta_k / 2)|``."""
    k = momenta(L)
    d = theta(J_T, k) - theta(J_R, k)
    return float(np.prod(np.abs(np.cos(d / 2.0))))


def gs_infidelity(J_R: float, J_T: float, L: int) -> float:
    """``1 - gs_overlap`` evaluated without cancellation."""
    k = momenta(L)
    d = theta(J_T, k) - theta(J_R, k)
    return float(-np.expm1(np.sum(_log_abs_cos_half(d))))


def metric_finite(J, L: int, *, per_site: bool = False):
    """``g_JJ = 1/4 sum_{k>0} (d theta_k / dJ)^2``; vectorized over ``J``."""
    k = momenta(L)
    J = np.asarray(J, dtype=float)
    g = 0.25 * np.sum(dtheta_dJ(J[..., None], k) ** 2, axis=-1)
    if per_site:
        g = g / L
    return g if g.ndim else float(g)


def metric_thermo(J):
    """Per-site metric of the infinite chain.

    Closed form of ``lim g_JJ / L`` written with complex logarithms on the
    principal branch; the imaginary residue is checked before it is dropped.
    Equals ``1 / (16 (1 - J^2))`` inside the paramagnet and
    ``1 / (16 J^2 (J^2 - 1))`` in the ferromagnet.
    """
    J = np.asarray(J, dtype=float)
    if np.any(np.isclose(np.abs(J), 1.0, rtol=0, atol=1e-15)):
        raise ValueError("metric diverges at |J| = 1")
    if np.any(J == 0):
        # removable: the closed form is 0/0 there, the limit is 1/16
        out = np.where(J == 0, 1.0 / 16.0, metric_thermo(np.where(J == 0, 0.5, J)))
        return out if out.ndim else float(out)
    Jc = J.astype(complex)
    r = 2j * (Jc + 1) / (Jc - 1)
    num = -np.pi * (Jc ** 2 - 1) + 1j * (Jc ** 2 + 1) * (np.log(-r) - np.log(r))
    val = num / (32 * Jc ** 2 * (Jc ** 2 - 1)) / np.pi
    if np.any(np.abs(val.imag) > 1e-12 * np.maximum(1.0, np.abs(val.real))):
        raise ArithmeticError("closed form left an imaginary residue")
    out = val.real
    return out if out.ndim else float(out)


def _grid(J_R, J_T, dJ):
    if not dJ > 0:
        raise ValueError("dJ must be positive")
    n = max(1, int(np.ceil(abs(J_T - J_R) / dJ - 1e-9)))
    return np.linspace(J_R, J_T, n + 1)


def cfs_path(J_R: float, J_T: float, dJ: float = 1e-3, L: int | None = None, *,
             per_site: bool = True, return_grid: bool = False):
    """Fubini-Study complexity ``int sqrt(g_JJ) dJ`` by the trapezoidal rule.

    ``L=None`` uses the thermodynamic per-site metric.  With
    ``return_grid=True`` also returns ``(grid, sqrt_g, cumulative)``.
    """
    if J_R == J_T:
        return (0.0, (np.array([J_R]), np.zeros(1), np.zeros(1))) if return_grid else 0.0
    grid = _grid(J_R, J_T, dJ)
    if L is None:
        if np.any(np.abs(grid) == 1.0):
            raise ValueError("grid hits the critical point |J| = 1")
        g = metric_thermo(grid)
    else:
        g = metric_finite(grid, L, per_site=per_site)
    rt = np.sqrt(g)
    steps = 0.5 * (rt[1:] + rt[:-1]) * np.diff(grid)
    cum = np.r_[0.0, np.cumsum(steps)]
    total = float(abs(cum[-1]))
    return (total, (grid, rt, np.abs(cum))) if return_grid else total


def nielsen_angle_complexity(J_R: float, J_T, L: int, *, per_site: bool = False):
    """``sum_{k>0} (theta_k(J_T) - theta_k(J_R))^2``; vectorized over ``J_T``."""
    k = momenta(L)
    J_T = np.asarray(J_T, dtype=float)
    c = np.sum((theta(J_T[..., None], k) - theta(J_R, k)) ** 2, axis=-1)
    if per_site:
        c = c / L
    return c if c.ndim else float(c)


def nielsen_angle_derivative(J_R: float, J_T, L: int, *, per_site: bool = False):
    """Analytic ``d C_N / d J_T``."""
    k = momenta(L)
    J_T = np.asarray(J_T, dtype=float)
    d = 2 * np.sum((theta(J_T[..., None], k) - theta(J_R, k)) * dtheta_dJ(J_T[..., None], k), axis=-1)
    if per_site:
        d = d / L
    return d if d.ndim else float(d)
