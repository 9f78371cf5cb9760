"""Hamiltonian builders: transverse-field Ising, ZZXZ and the finite Dicke model."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .pauli import PauliSum

__all__ = [
    "TfiParams",
    "ZzxzParams",
    "DickeParams",
    "CutoffWarning",
    "build_tfi",
    "build_zzxz",
    "bond_list",
    "field_sum",
    "bond_sum",
    "build_dicke_finite",
    "dicke_parity",
    "dicke_ground_state",
    "check_cutoff",
    "global_flip",
]


def _check_finite(obj, *names):
    for name in names:
        if not math.isfinite(getattr(obj, name)):
            raise ValueError(f"{name} must be finite")


def _check_boundary(boundary):
    if boundary not in ("periodic", "open"):
        raise ValueError(f"boundary must be 'periodic' or 'open', got {boundary!r}")


@dataclass(frozen=True)
class TfiParams:
    L: int
    J: float = 1.0
    h_x: float = 1.0
    bias: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ValueError("L must be an integer >= 2")
        _check_finite(self, "J", "h_x", "bias")
        _check_boundary(self.boundary)


@dataclass(frozen=True)
class ZzxzParams:
    L: int
    J: float = 1.0
    h_x: float = 1.0
    h_z: float = 0.75
    boundary: str = "open"

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ValueError("L must be an integer >= 2")
        _check_finite(self, "J", "h_x", "h_z")
        _check_boundary(self.boundary)


@dataclass(frozen=True)
class DickeParams:
    N: int
    coupling: float
    omega_c: float = 1.0
    omega_s: float = 1.0
    n_exc: int = 30

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be an integer >= 1")
        if int(self.n_exc) != self.n_exc or self.n_exc < 1:
            raise ValueError("n_exc must be an integer >= 1")
        if not (self.omega_c > 0 and self.omega_s > 0):
            raise ValueError("omega_c and omega_s must be positive")
        _check_finite(self, "coupling")

    @property
    def dim(self) -> int:
        return (self.N + 1) * self.n_exc


def bond_list(L: int, boundary: str) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(L - 1)]
    if boundary == "periodic":
        bonds.append((L - 1, 0))
    return bonds


def field_sum(L: int, letter: str, strength: float = 1.0) -> PauliSum:
    return PauliSum.from_terms([(strength, {i: letter}) for i in range(L)], L)


def bond_sum(L: int, letters: str, strength: float = 1.0, boundary: str = "open") -> PauliSum:
    """``strength * sum_<ij> P_i Q_j`` for the two-letter string ``letters``."""
    a, b = letters
    return PauliSum.from_terms(
        [(strength, {i: a, j: b}) for i, j in bond_list(L, boundary)], L)


def build_tfi(p: TfiParams) -> PauliSum:
    """``-J sum Z_i Z_{i+1} + h_x sum X_i + bias sum Z_i``."""
    h = bond_sum(p.L, "ZZ", -p.J, p.boundary) + field_sum(p.L, "X", p.h_x)
    if p.bias:
        h = h + field_sum(p.L, "Z", p.bias)
    return h.simplify(0.0)


def build_zzxz(p: ZzxzParams) -> PauliSum:
    """Antiferromagnetic ``J sum Z_i Z_{i+1} + h_x sum X_i + h_z sum Z_i``."""
    h = bond_sum(p.L, "ZZ", p.J, p.boundary) + field_sum(p.L, "X", p.h_x) + field_sum(p.L, "Z", p.h_z)
    return h.simplify(0.0)


def global_flip(L: int) -> PauliSum:
    return PauliSum.from_terms([(1.0, {i: "X" for i in range(L)})], L)


# Dicke --------------------------------------------------------------------------

def _spin_ops(N: int):
    s = N / 2
    m = np.arange(-s, s + 1)
    sz = sp.diags(m)
    up = np.sqrt(s * (s + 1) - m[:-1] * (m[:-1] + 1))
    splus = sp.diags(up, -1)  # |m> -> |m+1>, index increases with m
    return sz, splus


def _boson_ops(n_exc: int):
    a = sp.diags(np.sqrt(np.arange(1, n_exc)), 1)
    return a


def build_dicke_finite(p: DickeParams, *, sparse: bool = False):
    """Spin-boson Dicke Hamiltonian in the total-spin ``S = N/2`` sector.

    Basis ordering is spin-major: index ``(m + S) * n_exc + n`` with
    ``m = -S..S`` and boson number ``n = 0..n_exc-1``.
    """
    s = p.N / 2
    sz, splus = _spin_ops(p.N)
    a = _boson_ops(p.n_exc)
    num = sp.diags(np.arange(p.n_exc, dtype=float))
    ispin = sp.identity(p.N + 1)
    ibos = sp.identity(p.n_exc)
    h = (p.omega_c * sp.kron(ispin, num) + p.omega_s * sp.kron(sz, ibos)
         + p.coupling / math.sqrt(2 * s) * sp.kron(splus + splus.T, a + a.T))
    h = h.tocsr()
    return h if sparse else h.toarray()


def dicke_parity(N: int, n_exc: int) -> np.ndarray:
    """Eigenvalue ``(-1)**(n + m + S)`` of the conserved parity on each basis state."""
    spin = np.arange(N + 1)  # m + S
    bos = np.arange(n_exc)
    return (1 - 2 * ((spin[:, None] + bos[None, :]) % 2)).ravel()


class CutoffWarning(UserWarning):
    pass


def check_cutoff(psi, p: DickeParams, tol: float = 1e-6) -> float:
    """Population of the highest boson level; warns when it exceeds ``tol``."""
    pop = np.abs(np.asarray(psi).reshape(p.N + 1, p.n_exc)) ** 2
    top = float(pop[:, -1].sum())
    if top > tol:
        warnings.warn(f"boson cutoff n_exc={p.n_exc} too small: top-level population {top:.2e}",
                      CutoffWarning, stacklevel=2)
    return top


def dicke_ground_state(p: DickeParams, *, parity: int = 1, v0=None) -> tuple[float, np.ndarray]:
    """Ground state inside one parity sector, embedded in the full basis.

    Working in the even sector keeps the selected branch continuous across
    the superradiant crossover, where finite-N levels become quasi-degenerate.
    """
    from .pauli import lowest_eigenpairs

    h = build_dicke_finite(p, sparse=True)
    keep = np.flatnonzero(dicke_parity(p.N, p.n_exc) == parity)
    sub = h[keep][:, keep]
    start = None if v0 is None else np.asarray(v0)[keep]
    spec = lowest_eigenpairs(sub, 1, v0=start, dense_below=400)
    psi = np.zeros(p.dim)
    vec = spec.ground_state
    # fix the sign so consecutive grid points are comparable in plots
    vec = vec * np.sign(vec[np.argmax(np.abs(vec))])
    psi[keep] = vec
    check_cutoff(psi, p)
    return float(spec.energies[0]), psi
