"""Peak extraction and finite-size-scaling fits.

Laws
----
``power_offset``  ``y = B + C N**delta``  (so ``|y - B| = |C| N**delta``)
``position``      ``x = x_c + A N**(-nu)``
``power``         ``log y = a + b log N``  (exponent ``b``)
``linear_log``    ``y = a + b log N``
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import t as student_t
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from . import ising

__all__ = [
    "PeakEstimate",
    "ScalingFit",
    "FitError",
    "LAWS",
    "find_peak",
    "fit_scaling",
    "ScalingLawRegressor",
    "ising_fs_peaks",
    "ising_nielsen_peaks",
    "exponent_check_ising",
]

LAWS = ("power_offset", "position", "power", "linear_log")


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class PeakEstimate:
    x_max: float
    y_max: float
    N: float | None = None
    refinement_error: float = 0.0
    edge: bool = False


def find_peak(xs, ys, N=None) -> PeakEstimate:
    """Grid argmax refined by the parabola through it and its neighbours.

    A maximum on the first or last sample is returned unrefined with
    ``edge=True``.  ``refinement_error`` is the shift of the vertex from
    the grid argmax.
    """
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 3:
        raise ValueError("need at least three (x, y) samples of equal length")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    i = int(np.nanargmax(ys))
    if i == 0 or i == xs.size - 1:
        return PeakEstimate(float(xs[i]), float(ys[i]), N, 0.0, True)
    x0, x1, x2 = xs[i - 1: i + 2]
    y0, y1, y2 = ys[i - 1: i + 2]
    # Lagrange parabola through the three points
    d0 = (x0 - x1) * (x0 - x2)
    d1 = (x1 - x0) * (x1 - x2)
    d2 = (x2 - x0) * (x2 - x1)
    a = y0 / d0 + y1 / d1 + y2 / d2
    b = -(y0 * (x1 + x2) / d0 + y1 * (x0 + x2) / d1 + y2 * (x0 + x1) / d2)
    if not a < 0:
        return PeakEstimate(float(x1), float(y1), N, 0.0, False)
    xv = -b / (2 * a)
    xv = float(np.clip(xv, x0, x2))
    yv = float(y0 * (xv - x1) * (xv - x2) / d0 + y1 * (xv - x0) * (xv - x2) / d1
               + y2 * (xv - x0) * (xv - x1) / d2)
    return PeakEstimate(xv, max(yv, float(y1)), N, abs(xv - x1), False)


@dataclass
class ScalingFit:
    law: str
    params: dict
    stderr: dict
    r2: float
    residuals: np.ndarray
    N: np.ndarray
    y: np.ndarray
    degenerate: bool = False
    fixed: dict = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        key = {"power_offset": "delta", "position": "nu", "power": "b", "linear_log": "b"}[self.law]
        return float(self.params[key])

    @property
    def exponent_error(self) -> float:
        key = {"power_offset": "delta", "position": "nu", "power": "b", "linear_log": "b"}[self.law]
        return float(self.stderr[key])

    def exponent_interval(self, level: float = 0.95) -> tuple[float, float]:
        """Student-t confidence interval with ``n - p`` degrees of freedom."""
        dof = max(self.N.size - len(self.params), 1)
        half = student_t.ppf(0.5 + level / 2, dof) * self.exponent_error
        return self.exponent - half, self.exponent + half

    def predict(self, N):
        return _model(self.law, {**self.params, **self.fixed})(np.asarray(N, dtype=float))

    def to_dict(self) -> dict:
        return {"law": self.law, "params": self.params, "stderr": self.stderr, "r2": self.r2,
                "fixed": self.fixed, "degenerate": self.degenerate,
                "N": self.N.tolist(), "y": self.y.tolist(), "residuals": self.residuals.tolist()}


def _model(law, p):
    if law == "power_offset":
        return lambda N: p["B"] + p["C"] * N ** p["delta"]
    if law == "position":
        return lambda N: p["x_c"] + p["A"] * N ** (-p["nu"])
    if law == "power":
        return lambda N: np.exp(p["a"]) * N ** p["b"]
    if law == "linear_log":
        return lambda N: p["a"] + p["b"] * np.log(N)
    raise ValueError(f"unknown law {law!r}; choose from {LAWS}")


def _two_point_exponent(N, y):
    # y = B + C N^e  =>  successive differences scale as N^(e-1)
    dy = np.diff(y)
    nm = np.sqrt(N[1:] * N[:-1])
    dn = np.diff(N)
    r = np.abs(dy / dn)
    if r[0] <= 0 or r[-1] <= 0:
        return 0.5
    return float(np.log(r[-1] / r[0]) / np.log(nm[-1] / nm[0]) + 1.0)


def _linear_given_exponent(N, y, e):
    X = np.column_stack([np.ones_like(N), N ** e])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def _jacobian(law, fixed, N, popt):
    lg = np.log(N)
    if law == "power_offset":
        _, C, d = popt
        return np.column_stack([np.ones_like(N), N ** d, C * N ** d * lg])
    if not fixed:
        _, A, nu = popt
        return np.column_stack([np.ones_like(N), N ** -nu, -A * N ** -nu * lg])
    A, nu = popt
    return np.column_stack([N ** -nu, -A * N ** -nu * lg])


def _covariance(law, fixed, N, y, popt, sig, f):
    """``s^2 (J^T J)^-1`` from the analytic Jacobian.

    MINPACK's own estimate degrades to ``inf`` when it stops after one
    iteration on exact data, although the model Jacobian is full rank.
    """
    w = np.ones_like(N) if sig is None else 1.0 / sig
    J = _jacobian(law, fixed, N, popt) * w[:, None]
    r = (y - f(N, *popt)) * w
    dof = N.size - J.shape[1]
    if dof <= 0 or np.linalg.matrix_rank(J) < J.shape[1]:
        return np.full((J.shape[1],) * 2, np.inf)
    return np.linalg.inv(J.T @ J) * float(r @ r) / dof


def _r2(y, fit):
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)


def fit_scaling(N, y, law: str = "power_offset", *, x_c: float | None = None, p0=None,
                sigma=None) -> ScalingFit:
    """Least-squares fit of one scaling law.

    Three-parameter laws use Levenberg-Marquardt (``curve_fit``) from a
    deterministic initial guess: the exponent from the log slope of
    successive differences, then the linear parameters by least squares.
    For ``position`` a given ``x_c`` is held fixed.  Standard errors come
    from the Jacobian covariance.  Fewer than four sizes are rejected for
    three free parameters; two-parameter laws accept three sizes and mark
    the fit ``degenerate``.
    """
    if law not in LAWS:
        raise ValueError(f"unknown law {law!r}; choose from {LAWS}")
    N = np.asarray([getattr(n, "N", n) for n in N], dtype=float)
    y = np.asarray(y, dtype=float)
    if N.shape != y.shape or N.ndim != 1:
        raise ValueError("N and y must be 1-D of equal length")
    if not (np.all(np.isfinite(N)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    if np.any(N <= 0):
        raise ValueError("sizes must be positive")
    order = np.argsort(N)
    N, y = N[order], y[order]
    sig = None if sigma is None else np.asarray(sigma, dtype=float)[order]
    nfree = {"power_offset": 3, "position": 3 if x_c is None else 2, "power": 2, "linear_log": 2}[law]
    if N.size < max(nfree, 3) or (nfree == 3 and N.size < 4):
        raise ValueError(f"law {law!r} with {nfree} free parameters needs at least {max(4, nfree) if nfree == 3 else 3} sizes")
    degenerate = N.size <= nfree + 1

    fixed = {}
    if law in ("power", "linear_log"):
        if law == "power":
            if np.any(y <= 0):
                raise ValueError("power law needs positive y")
            t = np.log(y)
        else:
            t = y
        X = np.column_stack([np.ones_like(N), np.log(N)])
        coef, *_ = np.linalg.lstsq(X, t, rcond=None)
        res = t - X @ coef
        dof = max(N.size - 2, 1)
        cov = np.linalg.inv(X.T @ X) * float(res @ res) / dof
        names = ("a", "b")
        popt, perr = coef, np.sqrt(np.diag(cov))
        r2 = _r2(t, X @ coef)
        resid = res
    else:
        if law == "power_offset":
            e0 = p0[2] if p0 is not None else float(np.clip(_two_point_exponent(N, y), 0.05, 3.0))
            b0, c0 = _linear_given_exponent(N, y, e0) if p0 is None else p0[:2]
            f = lambda n, B, C, d: B + C * n ** d  # noqa: E731
            start, names = (b0, c0, e0), ("B", "C", "delta")
        elif x_c is None:
            e0 = p0[2] if p0 is not None else float(np.clip(-_two_point_exponent(N, y), 0.05, 3.0))
            xc0, a0 = _linear_given_exponent(N, y, -e0) if p0 is None else p0[:2]
            f = lambda n, xc, A, nu: xc + A * n ** (-nu)  # noqa: E731
            start, names = (xc0, a0, e0), ("x_c", "A", "nu")
        else:
            fixed = {"x_c": float(x_c)}
            dx = np.abs(y - x_c)
            if np.any(dx <= 0):
                raise ValueError("a sample sits exactly at x_c")
            sl = np.polyfit(np.log(N), np.log(dx), 1)
            a0 = float(np.sign(np.median(y - x_c)) * np.exp(sl[1]))
            f = lambda n, A, nu: x_c + A * n ** (-nu)  # noqa: E731
            start, names = (a0, -sl[0]) if p0 is None else tuple(p0), ("A", "nu")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                popt, pcov = curve_fit(f, N, y, p0=start, sigma=sig, method="lm", maxfev=20000)
        except (RuntimeError, ValueError) as exc:
            raise FitError(f"{law} fit did not converge: {exc}") from exc
        pcov = _covariance(law, fixed, N, y, popt, sig, f)
        if not np.all(np.isfinite(pcov)):
            if N.size > len(names):
                raise FitError(f"{law} fit is rank deficient")
            pcov = np.full_like(pcov, np.inf)
            degenerate = True
        perr = np.sqrt(np.abs(np.diag(pcov)))
        fitv = f(N, *popt)
        resid = y - fitv
        r2 = _r2(y, fitv)
    params = {k: float(v) for k, v in zip(names, popt)}
    stderr = {k: float(v) for k, v in zip(names, perr)}
    return ScalingFit(law, params, stderr, float(r2), np.asarray(resid), N, y, bool(degenerate), fixed)


class ScalingLawRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper: ``X`` is a single column of sizes, ``y`` the observable.

    Parameters
    ----------
    law : str
        One of ``power_offset``, ``position``, ``power``, ``linear_log``.
    x_c : float or None
        Fixed critical value for the ``position`` law.
    """

    def __init__(self, law="power_offset", x_c=None):
        self.law = law
        self.x_c = x_c

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=3)
        if X.shape[1] != 1:
            raise ValueError("X must hold exactly one column of system sizes")
        self.n_features_in_ = 1
        self.fit_ = fit_scaling(X[:, 0], y, self.law, x_c=self.x_c)
        self.params_ = dict(self.fit_.params)
        self.stderr_ = dict(self.fit_.stderr)
        self.exponent_ = self.fit_.exponent
        self.r2_ = self.fit_.r2
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = check_array(X)
        return self.fit_.predict(X[:, 0])


# Ising drivers --------------------------------------------------------------------

def _zoom_peak(f, lo, hi, n=401, levels=2):
    """Grid peak of ``f`` on ``[lo, hi]``, re-gridded around the argmax ``levels`` times."""
    for _ in range(levels + 1):
        xs = np.linspace(lo, hi, n)
        pk = find_peak(xs, f(xs))
        h = xs[1] - xs[0]
        if pk.edge:
            break
        lo, hi = pk.x_max - 4 * h, pk.x_max + 4 * h
    return pk


def ising_fs_peaks(L_list, window=(0.5, 1.5)) -> list[PeakEstimate]:
    """Peaks of ``sqrt(g_JJ / L)`` (the per-site ``dC_FS/dJ``) per chain length."""
    out = []
    for L in L_list:
        pk = _zoom_peak(lambda J: np.sqrt(ising.metric_finite(J, L, per_site=True)), *window)
        out.append(PeakEstimate(pk.x_max, pk.y_max, L, pk.refinement_error, pk.edge))
    return out


def ising_nielsen_peaks(L_list, J_R: float = 0.0, window=(0.5, 1.5), per_site: bool = True) -> list[PeakEstimate]:
    """Peaks of ``dC_N/dJ_T`` (angle form, reference ``J_R``) per chain length."""
    out = []
    for L in L_list:
        pk = _zoom_peak(lambda J: ising.nielsen_angle_derivative(J_R, J, L, per_site=per_site), *window)
        out.append(PeakEstimate(pk.x_max, pk.y_max, L, pk.refinement_error, pk.edge))
    return out


def exponent_check_ising(L_list, window=(0.5, 1.5)) -> ScalingFit:
    """Growth exponent of the per-site ``dC_FS/dJ`` peak, from a log-log fit."""
    L_list = list(L_list)
    for L in L_list:
        if int(L) != L or L % 2:
            raise ValueError("chain lengths must be even integers")
    peaks = ising_fs_peaks(L_list, window)
    if any(p.edge for p in peaks):
        raise FitError("a peak sits on the window edge; widen the window")
    return fit_scaling([p.N for p in peaks], [p.y_max for p in peaks], "power")
