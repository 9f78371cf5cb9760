"""Fubini-Study geometry of ground-state manifolds.

The metric along a one-parameter path is estimated from fidelities between
neighbouring ground states, ``1 - F(lam, lam + d) = g d**2 / 2 + O(d**4)``,
or from operator fluctuations.  Its square root is the derivative of the
Fubini-Study complexity along the path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .pauli import PauliSum, apply

__all__ = [
    "MetricSample",
    "ParamPath",
    "BranchSwitchError",
    "fidelity",
    "fidelity_per_site",
    "susceptibility",
    "chi_fd",
    "metric_fluctuation",
    "cfs_integral",
    "CfsResult",
    "exponent_relation",
    "FubiniStudyMetric",
]

METHODS = ("finite_difference_fidelity", "fluctuation", "analytic")


class BranchSwitchError(RuntimeError):
    """Neighbouring ground states are nearly orthogonal: the provider jumped branches."""


@dataclass(frozen=True)
class MetricSample:
    lam: float
    g: float
    method: str = "finite_difference_fidelity"
    error: float = 0.0
    per_site: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.g < -1e-10:
            raise ValueError(f"negative metric {self.g} at lam={self.lam}")

    @property
    def sqrt_g(self) -> float:
        return float(np.sqrt(max(self.g, 0.0)))


@dataclass(frozen=True)
class ParamPath:
    """A parameter grid together with a deterministic ground-state provider."""

    grid: np.ndarray
    ground_state: Callable[[float], np.ndarray]

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least two points")
        object.__setattr__(self, "grid", grid)

    def states(self) -> list[np.ndarray]:
        return [self.ground_state(lam) for lam in self.grid]


def fidelity(psi, phi) -> float:
    """``|<psi|phi>|`` for normalized states."""
    psi, phi = np.asarray(psi), np.asarray(phi)
    if psi.shape != phi.shape:
        raise ValueError(f"dimension mismatch {psi.shape} vs {phi.shape}")
    return float(min(1.0, abs(np.vdot(psi, phi))))


def fidelity_per_site(psi, phi, nsites: int) -> float:
    """``log(F) / N``; ``-inf`` for orthogonal states."""
    if nsites < 1:
        raise ValueError("nsites must be >= 1")
    f = fidelity(psi, phi)
    return -np.inf if f == 0 else float(np.log(f) / nsites)


def susceptibility(infidelity: Callable[[float, float], float], lam: float, step: float = 1e-4,
                   *, richardson: bool = True) -> tuple[float, float]:
    """Metric from a symmetric infidelity difference ``2 (1 - F) / step**2``.

    ``infidelity(a, b)`` must return ``1 - |<psi(a)|psi(b)>|``.  With
    Richardson extrapolation the steps ``step`` and ``step/2`` are combined
    to cancel the ``O(step**2)`` bias.  Returns ``(g, error_estimate)``.
    """
    if not step > 0:
        raise ValueError("step must be positive")

    def central(h):
        q = infidelity(lam - h / 2, lam + h / 2)
        if q > 0.5:
            raise BranchSwitchError(f"fidelity {1 - q:.3g} between lam={lam - h / 2} and {lam + h / 2}")
        return 2.0 * q / (h * h)

    g1 = central(step)
    if not richardson:
        return g1, float("nan")
    g2 = central(step / 2)
    g = (4.0 * g2 - g1) / 3.0
    return g, abs(g - g2)


def chi_fd(path, lam: float, step: float = 1e-4, *, richardson: bool = True,
           per_site: int | None = None) -> MetricSample:
    """Finite-difference metric at ``lam`` from a ground-state provider.

    ``path`` is a :class:`ParamPath` (its grid bounds the admissible window)
    or a bare callable ``lam -> state``.  ``per_site=N`` divides by ``N``.
    """
    provider = path.ground_state if isinstance(path, ParamPath) else path
    if isinstance(path, ParamPath) and not (path.grid[0] <= lam - step / 2 and lam + step / 2 <= path.grid[-1]):
        raise ValueError(f"lam={lam} +- step/2 leaves the path domain")

    def infid(a, b):
        return 1.0 - fidelity(provider(a), provider(b))

    g, err = susceptibility(infid, lam, step, richardson=richardson)
    if per_site:
        g, err = g / per_site, err / per_site
    return MetricSample(float(lam), float(g), "finite_difference_fidelity", float(err), bool(per_site))


def _act(op, psi):
    return apply(op, psi) if isinstance(op, PauliSum) else np.asarray(op) @ psi


def metric_fluctuation(psi, o_mu, o_nu) -> float:
    """``1/2 <{O_mu, O_nu}> - <O_mu><O_nu>`` in the state ``psi``."""
    psi = np.asarray(psi)
    a, b = _act(o_mu, psi), _act(o_nu, psi)
    anti = np.real(np.vdot(a, b))
    return float(anti - np.real(np.vdot(psi, a)) * np.real(np.vdot(psi, b)))


class CfsResult(NamedTuple):
    total: float
    grid: np.ndarray
    sqrt_g: np.ndarray
    cumulative: np.ndarray


def cfs_integral(samples: Sequence[MetricSample] | tuple) -> CfsResult:
    """Trapezoidal ``int sqrt(g) dlam`` over samples on a monotone grid.

    Accepts a sequence of :class:`MetricSample` or a ``(grid, g)`` pair.
    """
    if isinstance(samples, tuple) and len(samples) == 2 and not isinstance(samples[0], MetricSample):
        grid, g = (np.asarray(a, dtype=float) for a in samples)
    else:
        grid = np.array([s.lam for s in samples], dtype=float)
        g = np.array([s.g for s in samples], dtype=float)
    if grid.size < 1:
        raise ValueError("no samples")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("samples must lie on a strictly increasing grid")
    if np.any(g < -1e-10):
        raise ValueError("negative metric sample")
    rt = np.sqrt(np.clip(g, 0.0, None))
    cum = np.r_[0.0, np.cumsum(0.5 * (rt[1:] + rt[:-1]) * np.diff(grid))]
    return CfsResult(float(cum[-1]), grid, rt, cum)


class ExponentRelation(NamedTuple):
    delta: float
    regime: str
    derivative_exponent: float


def exponent_relation(delta_mu: float, delta_nu: float, z: float, d: int) -> ExponentRelation:
    """Scaling dimension of the (intensive) metric, ``D_mu + D_nu - 2z - d``.

    ``g ~ L**(-delta)``, so the complexity derivative grows as
    ``L**(-delta/2)``.  ``regime`` classifies that derivative:
    sub-extensive for ``delta > -2``, extensive at ``-2``, super-extensive below.
    """
    delta = delta_mu + delta_nu - 2 * z - d
    if np.isclose(delta, -2.0):
        regime = "extensive"
    elif delta > -2:
        regime = "subextensive"
    else:
        regime = "superextensive"
    return ExponentRelation(float(delta), regime, float(-delta / 2))


class FubiniStudyMetric(TransformerMixin, BaseEstimator):
    """Map parameter values to finite-difference metric values.

    Stateless transformer: ``transform`` takes a column of parameter values
    and returns ``[g, sqrt(g)]`` per row.

    Parameters
    ----------
    ground_state : callable
        ``lam -> normalized state``; must be deterministic.
    step : float
        Symmetric finite-difference step.
    richardson : bool
        Combine ``step`` and ``step/2`` to cancel the leading bias.
    nsites : int or None
        Divide by the system size to obtain the per-site metric.
    """

    def __init__(self, ground_state=None, step=1e-4, richardson=True, nsites=None):
        self.ground_state = ground_state
        self.step = step
        self.richardson = richardson
        self.nsites = nsites

    def fit(self, X=None, y=None):
        if not callable(self.ground_state):
            raise TypeError("ground_state must be callable")
        if not self.step > 0:
            raise ValueError("step must be positive")
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        lam = check_array(np.asarray(X, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
        samples = [chi_fd(self.ground_state, x, self.step, richardson=self.richardson,
                          per_site=self.nsites) for x in lam]
        g = np.array([s.g for s in samples])
        return np.column_stack([g, np.sqrt(np.clip(g, 0, None))])
