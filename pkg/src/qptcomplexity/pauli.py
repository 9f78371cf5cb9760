"""Pauli-string algebra on qubit chains.

Strings are stored in symplectic form: two integer bit masks ``x`` and ``z``
with one bit per site (site 0 is the least significant bit).  The operator
attached to ``(x, z)`` is the tensor product of single-site Paulis, with
``Y = i X Z`` on every site where both bits are set.  The computational basis
state ``|b>`` is the integer ``b``; ``|0>`` is the +1 eigenstate of sigma_z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "PauliTerm",
    "PauliSum",
    "CostWeights",
    "Spectrum",
    "EigensolverError",
    "apply",
    "expectation",
    "commutator",
    "lowest_eigenpairs",
    "trotter_step",
    "split_commuting_groups",
    "pauli_trace_inner",
    "nielsen_cost",
]

_LETTERS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_PHASES = np.array([1, 1j, -1, -1j])


def _popcount(a):
    return np.bitwise_count(np.asarray(a, dtype=np.int64)).astype(np.int64)


@dataclass(frozen=True)
class PauliTerm:
    """A single weighted Pauli string."""

    coefficient: complex
    letters: Mapping[int, str]
    nsites: int

    def __post_init__(self):
        if self.nsites < 1:
            raise ValueError("nsites must be positive")
        for site, letter in self.letters.items():
            if not 0 <= site < self.nsites:
                raise ValueError(f"site {site} outside chain of length {self.nsites}")
            if letter not in _LETTERS:
                raise ValueError(f"unknown Pauli letter {letter!r}")
        if not np.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")

    @property
    def weight(self) -> int:
        return len(self.letters)

    def masks(self) -> tuple[int, int]:
        x = z = 0
        for site, letter in self.letters.items():
            bx, bz = _LETTERS[letter]
            x |= bx << site
            z |= bz << site
        return x, z

    def label(self) -> str:
        return "".join(self.letters.get(i, "I") for i in range(self.nsites))


def _letters_from_masks(x: int, z: int, nsites: int) -> dict[int, str]:
    out = {}
    for i in range(nsites):
        bx, bz = (x >> i) & 1, (z >> i) & 1
        if bx and bz:
            out[i] = "Y"
        elif bx:
            out[i] = "X"
        elif bz:
            out[i] = "Z"
    return out


class PauliSum:
    """Canonical weighted sum of Pauli strings over ``nsites`` qubits.

    Duplicate strings are merged on construction.  Coefficients may be
    complex for intermediate results (commutators); Hamiltonians built by
    :mod:`qptcomplexity.models` are real and therefore Hermitian.
    """

    def __init__(self, x, z, coeffs, nsites: int, *, tol: float = 0.0):
        if nsites < 1 or nsites > 62:
            raise ValueError("nsites must be in [1, 62]")
        x = np.asarray(x, dtype=np.int64).ravel()
        z = np.asarray(z, dtype=np.int64).ravel()
        c = np.asarray(coeffs).ravel()
        if not (x.shape == z.shape == c.shape):
            raise ValueError("masks and coefficients must have equal length")
        if c.size and not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if np.any((x | z) >> nsites):
            raise ValueError("mask outside chain")
        if c.size:
            key = x * (1 << nsites) + z
            uniq, inv = np.unique(key, return_inverse=True)
            merged = np.zeros(uniq.size, dtype=np.result_type(c.dtype, np.float64))
            np.add.at(merged, inv, c)
            keep = np.abs(merged) > tol
            uniq, merged = uniq[keep], merged[keep]
            x, z = uniq >> nsites, uniq & ((1 << nsites) - 1)
            c = merged
        else:
            c = np.zeros(0)
        if np.iscomplexobj(c) and c.size and np.all(c.imag == 0):
            c = c.real.copy()
        self.x, self.z, self.coeffs, self.nsites = x, z, c, int(nsites)

    # construction ---------------------------------------------------------
    @classmethod
    def zero(cls, nsites: int) -> "PauliSum":
        return cls([], [], [], nsites)

    @classmethod
    def from_terms(cls, terms: Iterable, nsites: int) -> "PauliSum":
        """Build from ``PauliTerm`` objects or ``(coefficient, {site: letter})`` pairs."""
        xs, zs, cs = [], [], []
        for t in terms:
            if not isinstance(t, PauliTerm):
                coef, letters = t
                t = PauliTerm(coef, dict(letters), nsites)
            elif t.nsites != nsites:
                raise ValueError("all terms must share nsites")
            x, z = t.masks()
            xs.append(x)
            zs.append(z)
            cs.append(t.coefficient)
        return cls(xs, zs, np.array(cs) if cs else [], nsites)

    @classmethod
    def from_labels(cls, labels: Mapping[str, complex]) -> "PauliSum":
        """``{"XZI": 0.5, ...}`` with the leftmost character acting on site 0."""
        nsites = len(next(iter(labels)))
        terms = []
        for lab, coef in labels.items():
            if len(lab) != nsites:
                raise ValueError("labels must have equal length")
            terms.append((coef, {i: ch for i, ch in enumerate(lab) if ch != "I"}))
        return cls.from_terms(terms, nsites)

    # introspection ----------------------------------------------------------
    def __len__(self):
        return self.coeffs.size

    @property
    def dim(self) -> int:
        return 1 << self.nsites

    @property
    def terms(self) -> list[PauliTerm]:
        return [
            PauliTerm(complex(c) if np.iscomplexobj(self.coeffs) else float(c),
                      _letters_from_masks(int(x), int(z), self.nsites), self.nsites)
            for x, z, c in zip(self.x, self.z, self.coeffs)
        ]

    @property
    def body(self) -> np.ndarray:
        """Number of non-identity sites of each string."""
        return _popcount(self.x | self.z)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return not np.iscomplexobj(self.coeffs) or bool(np.all(np.abs(self.coeffs.imag) <= tol))

    def coefficient(self, label_or_letters) -> complex:
        if isinstance(label_or_letters, str):
            letters = {i: ch for i, ch in enumerate(label_or_letters) if ch != "I"}
        else:
            letters = label_or_letters
        x, z = PauliTerm(1.0, letters, self.nsites).masks()
        hit = np.flatnonzero((self.x == x) & (self.z == z))
        return self.coeffs[hit[0]] if hit.size else 0.0

    def __repr__(self):
        body = " + ".join(f"{c:.6g}*{t.label()}" for c, t in zip(self.coeffs, self.terms))
        return f"PauliSum({body or '0'})"

    # arithmetic -------------------------------------------------------------
    def _check(self, other: "PauliSum"):
        if not isinstance(other, PauliSum):
            return NotImplemented
        if other.nsites != self.nsites:
            raise ValueError("PauliSums act on different numbers of sites")

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return PauliSum(np.r_[self.x, other.x], np.r_[self.z, other.z],
                        np.r_[self.coeffs, other.coeffs], self.nsites)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        if isinstance(scalar, PauliSum):
            return NotImplemented
        return PauliSum(self.x, self.z, self.coeffs * scalar, self.nsites)

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        """Operator product, evaluated string by string with exact phases."""
        if self._check(other) is NotImplemented:
            return NotImplemented
        x1, z1, c1 = self.x[:, None], self.z[:, None], self.coeffs[:, None]
        x2, z2, c2 = other.x[None, :], other.z[None, :], other.coeffs[None, :]
        x3, z3 = x1 ^ x2, z1 ^ z2
        k = (_popcount(x1 & z1) + _popcount(x2 & z2) - _popcount(x3 & z3)
             + 2 * _popcount(z1 & x2)) % 4
        c3 = c1 * c2 * _PHASES[k]
        return PauliSum(x3, z3, c3, self.nsites)

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.x, self.z, np.conj(self.coeffs), self.nsites)

    def simplify(self, tol: float = 1e-14) -> "PauliSum":
        return PauliSum(self.x, self.z, self.coeffs, self.nsites, tol=tol)

    def real(self) -> "PauliSum":
        return PauliSum(self.x, self.z, np.real(self.coeffs), self.nsites)

    # matrices ---------------------------------------------------------------
    def to_sparse(self) -> sp.csr_matrix:
        dim = self.dim
        idx = np.arange(dim, dtype=np.int64)
        if len(self) == 0:
            return sp.csr_matrix((dim, dim))
        rows, data = [], []
        for x, z, c in zip(self.x, self.z, self.coeffs):
            rows.append(idx ^ x)
            sign = 1 - 2 * (_popcount(idx & z) & 1)
            data.append(c * _PHASES[_popcount(x & z) % 4] * sign)
        cols = np.tile(idx, len(self))
        data = np.concatenate(data)
        if np.all(data.imag == 0):
            data = data.real
        m = sp.coo_matrix((data, (np.concatenate(rows), cols)), shape=(dim, dim))
        return m.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def diagonal_terms(self) -> np.ndarray:
        return self.x == 0


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    return (a @ b - b @ a).simplify()


def apply(h: PauliSum, psi) -> np.ndarray:
    """Return ``h @ psi`` computed term by term with bit operations."""
    psi = np.asarray(psi)
    if psi.shape[0] != h.dim:
        raise ValueError(f"state dimension {psi.shape[0]} does not match 2**{h.nsites}")
    idx = np.arange(h.dim, dtype=np.int64)
    out = np.zeros(psi.shape, dtype=np.result_type(psi.dtype, h.coeffs.dtype, np.complex128))
    for x, z, c in zip(h.x, h.z, h.coeffs):
        src = idx ^ x
        sign = 1 - 2 * (_popcount(src & z) & 1)
        factor = c * _PHASES[_popcount(x & z) % 4] * sign
        if psi.ndim == 2:
            factor = factor[:, None]
        out += factor * psi[src]
    return out


def expectation(h, psi) -> float:
    """Real expectation value <psi|h|psi> for Hermitian ``h`` (PauliSum or matrix)."""
    hpsi = apply(h, psi) if isinstance(h, PauliSum) else h @ psi
    return float(np.real(np.vdot(psi, hpsi)))


# eigensolver -------------------------------------------------------------------

class EigensolverError(RuntimeError):
    pass


@dataclass
class Spectrum:
    """Lowest eigenpairs, ascending.  ``vectors[:, i]`` belongs to ``energies[i]``."""

    energies: np.ndarray
    vectors: np.ndarray
    degenerate: bool = False
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ground_state(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0]) if self.energies.size > 1 else np.nan

    def __iter__(self):
        return iter(zip(self.energies, self.vectors.T))


def _start_vector(dim: int, dtype) -> np.ndarray:
    v = np.random.default_rng(20240917).standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(dtype)


def lowest_eigenpairs(h, k: int = 1, *, v0=None, tol: float = 1e-12,
                      maxiter: int | None = None, dense_below: int = 512) -> Spectrum:
    """``k`` lowest eigenpairs of a Hermitian operator.

    ``h`` may be a :class:`PauliSum`, a scipy sparse matrix or a dense array.
    Small problems are diagonalized densely; larger ones use implicitly
    restarted Lanczos from a fixed pseudo-random start vector, so results
    (including the choice inside a degenerate subspace) are reproducible.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mat = h.to_sparse() if isinstance(h, PauliSum) else h
    dim = mat.shape[0]
    if k >= dim:
        raise ValueError(f"k={k} must be smaller than the dimension {dim}")
    if dim <= dense_below:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        w, v = np.linalg.eigh(dense)
        w, v = w[:k], v[:, :k]
    else:
        dtype = np.complex128 if np.iscomplexobj(mat.data if sp.issparse(mat) else mat) else np.float64
        start = _start_vector(dim, dtype) if v0 is None else np.asarray(v0, dtype=dtype)
        ncv = min(dim - 1, max(2 * k + 1, 20))
        try:
            w, v = spla.eigsh(mat, k=k, which="SA", v0=start, tol=tol, ncv=ncv,
                              maxiter=maxiter or 50 * dim)
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(
                f"Lanczos did not converge: {len(exc.eigenvalues)} of {k} eigenpairs found"
            ) from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    res = np.linalg.norm(mat @ v - v * w, axis=0)
    if np.any(res > max(1e-6, 1e4 * tol) * max(1.0, np.abs(w).max())):
        raise EigensolverError(f"eigenpair residuals too large: {res}")
    degenerate = k > 1 and (w[1] - w[0]) < 1e-10 * max(abs(w[0]), 1.0)
    return Spectrum(w, v, bool(degenerate), res)


# Trotter evolution -------------------------------------------------------------

def apply_local(psi: np.ndarray, gate: np.ndarray, sites: Sequence[int], nsites: int) -> np.ndarray:
    """Apply a dense ``2**k`` gate acting on ``sites`` (first site = lowest local bit)."""
    k = len(sites)
    t = psi.reshape((2,) * nsites)
    g = gate.reshape((2,) * (2 * k))
    axes = [nsites - 1 - s for s in reversed(sites)]
    out = np.tensordot(g, t, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(-1)


def _local_masks(mask: int, sites: Sequence[int]) -> int:
    return sum(((mask >> s) & 1) << j for j, s in enumerate(sites))


@lru_cache(maxsize=256)
def _cluster_plan(xs: tuple, zs: tuple, nsites: int, max_cluster: int):
    """Partition strings into site-disjoint clusters (union-find on supports)."""
    parent = list(range(nsites))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    supports = []
    for x, z in zip(xs, zs):
        s = [i for i in range(nsites) if ((x | z) >> i) & 1]
        supports.append(s)
        for a in s[1:]:
            parent[find(a)] = find(s[0])
    clusters: dict[int, list[int]] = {}
    for t, s in enumerate(supports):
        if s:
            clusters.setdefault(find(s[0]), []).append(t)
    plan = []
    for members in clusters.values():
        sites = sorted({i for t in members for i in supports[t]})
        if len(sites) > max_cluster:
            raise ValueError(f"group couples {len(sites)} sites; not exponentiable as a local block")
        lx = [_local_masks(xs[t], sites) for t in members]
        lz = [_local_masks(zs[t], sites) for t in members]
        mats = [PauliSum([a], [b], [1.0], len(sites)).to_dense() for a, b in zip(lx, lz)]
        plan.append((tuple(sites), np.array(members), np.array(mats)))
    return plan


@lru_cache(maxsize=256)
def _diagonal_signs(zs: tuple, nsites: int) -> np.ndarray:
    idx = np.arange(1 << nsites, dtype=np.int64)
    return np.array([1 - 2 * (_popcount(idx & z) & 1) for z in zs], dtype=np.float64)


def _exp_group(h: PauliSum, dt: float, psi: np.ndarray, max_cluster: int) -> np.ndarray:
    if len(h) == 0:
        return psi
    if np.all(h.x == 0):
        signs = _diagonal_signs(tuple(h.z.tolist()), h.nsites)
        return psi * np.exp(-1j * dt * (h.coeffs @ signs))
    plan = _cluster_plan(tuple(h.x.tolist()), tuple(h.z.tolist()), h.nsites, max_cluster)
    for sites, members, mats in plan:
        local = np.tensordot(h.coeffs[members], mats, axes=1)
        gate = scipy.linalg.expm(-1j * dt * local)
        psi = apply_local(psi, gate, sites, h.nsites)
    return psi


def trotter_step(groups: Sequence[PauliSum], dt: float, psi, *, max_cluster: int = 4) -> np.ndarray:
    """First-order product formula ``prod_g exp(-i dt H_g) psi``.

    Each group is exponentiated exactly: diagonal groups as a phase vector,
    other groups as independent dense blocks on their site-disjoint clusters.
    Groups are applied in the given order (the first group acts first).
    """
    if not np.isfinite(dt):
        raise ValueError("dt must be finite")
    psi = np.asarray(psi, dtype=np.complex128)
    for g in groups:
        if psi.shape[0] != g.dim:
            raise ValueError("state dimension does not match group")
        psi = _exp_group(g, dt, psi, max_cluster)
    return psi


def _subset(h: PauliSum, mask) -> PauliSum:
    return PauliSum(h.x[mask], h.z[mask], h.coeffs[mask], h.nsites)


def split_commuting_groups(h: PauliSum) -> list[PauliSum]:
    """Split a nearest-neighbour Hamiltonian into exactly exponentiable groups.

    Returns ``[diagonal, single-site, even bonds, odd bonds, wrap bond]`` with
    empty groups dropped.  Bond ``(i, i+1)`` is even when ``i`` is even; the
    periodic bond ``(L-1, 0)`` joins the odd bonds when ``L`` is even.
    """
    n = h.nsites
    support = h.x | h.z
    diag = h.x == 0
    body = _popcount(support)
    groups = [diag, (~diag) & (body == 1)]
    low = np.zeros(len(h), dtype=np.int64)
    bond_color = np.full(len(h), -1)
    for t in np.flatnonzero((~diag) & (body == 2)):
        s = [i for i in range(n) if (int(support[t]) >> i) & 1]
        if s[1] - s[0] == 1:
            low[t] = s[0]
            bond_color[t] = s[0] % 2
        elif s == [0, n - 1]:
            bond_color[t] = 1 if n % 2 == 0 else 2
        else:
            raise ValueError("only nearest-neighbour two-body terms can be Trotterized")
    if np.any((~diag) & (body > 2)):
        raise ValueError("off-diagonal terms beyond two bodies are not supported")
    groups += [bond_color == c for c in (0, 1, 2)]
    return [_subset(h, m) for m in groups if np.any(m)]


# traces and costs -------------------------------------------------------------------

def pauli_trace_inner(a: PauliSum, b: PauliSum) -> float:
    """Normalized trace ``Tr(A B) / 2**L`` from string orthonormality."""
    if a.nsites != b.nsites:
        raise ValueError("operands act on different numbers of sites")
    if len(a) == 0 or len(b) == 0:
        return 0.0
    ka = a.x * (1 << a.nsites) + a.z
    kb = b.x * (1 << b.nsites) + b.z
    _, ia, ib = np.intersect1d(ka, kb, assume_unique=True, return_indices=True)
    return float(np.real(np.sum(a.coeffs[ia] * b.coeffs[ib])))


@dataclass(frozen=True)
class CostWeights:
    """Penalty ``p`` applied to strings acting on more than ``bodycut`` sites."""

    penalty: float = 1.0
    bodycut: int = 2

    def __post_init__(self):
        if not self.penalty >= 0:
            raise ValueError("penalty must be >= 0")
        if self.bodycut < 1:
            raise ValueError("bodycut must be >= 1")


def nielsen_cost(snapshots, dt: float, total_time: float, weights: CostWeights = CostWeights()) -> float:
    """Discrete Nielsen cost of a piecewise-constant Hamiltonian sequence.

    ``snapshots`` holds one entry per time step, either a :class:`PauliSum`
    or a ``(coefficients, body_counts)`` pair.  Every step contributes
    ``dt * sqrt(T/dt) * sqrt(sum_local h^2 + p^2 sum_nonlocal h^2)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("no snapshots")
    total = 0.0
    scale = dt * np.sqrt(total_time / dt)
    for snap in snapshots:
        if isinstance(snap, PauliSum):
            coeffs, body = snap.coeffs, snap.body
        else:
            coeffs, body = (np.asarray(a) for a in snap)
        h2 = np.abs(coeffs) ** 2
        local = body <= weights.bodycut
        total += scale * np.sqrt(h2[local].sum() + weights.penalty ** 2 * h2[~local].sum())
    return float(total)
