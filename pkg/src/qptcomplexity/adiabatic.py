"""Adiabatic and counter-diabatic ground-state preparation.

The protocol Hamiltonian is ``H(lam) = H0 + lam * H1`` driven by the
schedule ``lam(t) = sin^2[(pi/2) sin^2(pi t / 2T)]``.  The counter-diabatic
term ``lam_dot * sum_a c_a(lam) B_a`` uses a fixed basis of local operator
families whose coefficients minimize the first-order action
``Tr[(dH - i[H, A])^2]``.  Evolution is a first-order Trotter product with
coefficients evaluated at step midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .models import TfiParams, ZzxzParams, bond_sum, build_tfi, build_zzxz, field_sum, global_flip
from .pauli import (
    CostWeights,
    PauliSum,
    apply,
    commutator,
    lowest_eigenpairs,
    nielsen_cost,
    pauli_trace_inner,
    split_commuting_groups,
    trotter_step,
)

__all__ = [
    "Schedule",
    "CdAnsatz",
    "CdSolution",
    "AdiabaticProblem",
    "EvolutionTrace",
    "TimeScanResult",
    "tfi_cd_basis",
    "zzxz_cd_basis",
    "cd_coefficients",
    "tfi_problem",
    "zzxz_problem",
    "field_ramp_problem",
    "evolve",
    "minimal_time_scan",
    "alternate_path",
    "geometric_grid",
    "closed_form_complexity",
    "gap_sharpness",
]


# schedule -----------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """``lam(t)`` on ``[0, T]`` with step ``dT = min(0.1, T/30)`` unless given.

    The step count is ``ceil(T / dT)`` so the realized step ``dt`` never
    exceeds ``dT``.
    """

    T: float
    dT: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("T must be positive and finite")
        if self.dT is None:
            object.__setattr__(self, "dT", min(0.1, self.T / 30.0))
        if not self.dT > 0:
            raise ValueError("dT must be positive")

    @property
    def nsteps(self) -> int:
        return max(1, int(np.ceil(self.T / self.dT - 1e-9)))

    @property
    def dt(self) -> float:
        return self.T / self.nsteps

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nsteps + 1)

    @property
    def midpoints(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    def lam(self, t):
        s = np.sin(np.pi * np.asarray(t, dtype=float) / (2 * self.T)) ** 2
        return np.sin(0.5 * np.pi * s) ** 2

    def lam_dot(self, t):
        u = np.pi * np.asarray(t, dtype=float) / (2 * self.T)
        s = np.sin(u) ** 2
        # d/dt sin^2(pi s / 2) = (pi/2) sin(pi s) * ds/dt,  ds/dt = sin(2u) pi / (2T)
        return 0.5 * np.pi * np.sin(np.pi * s) * np.sin(2 * u) * np.pi / (2 * self.T)


# counter-diabatic ansatz ------------------------------------------------------------

@dataclass(frozen=True)
class CdAnsatz:
    """Named operator families ``B_a``; the gauge potential is ``sum_a c_a B_a``."""

    basis: tuple
    names: tuple

    def __post_init__(self):
        if len(self.basis) != len(self.names) or not self.basis:
            raise ValueError("basis and names must be non-empty and of equal length")
        n = {b.nsites for b in self.basis}
        if len(n) != 1:
            raise ValueError("basis families act on different chain lengths")
        for b in self.basis:
            if not b.is_hermitian():
                raise ValueError("basis families must be Hermitian")
            if len(b) and b.body.max() > 2:
                raise ValueError("first-order ansatz admits at most two-body families")

    @property
    def nsites(self) -> int:
        return self.basis[0].nsites

    def operator(self, coeffs) -> PauliSum:
        out = PauliSum.zero(self.nsites)
        for c, b in zip(coeffs, self.basis):
            out = out + b * float(c)
        return out


def _pair_sum(L, a, b, boundary):
    return bond_sum(L, a + b, 1.0, boundary) + bond_sum(L, b + a, 1.0, boundary)


def tfi_cd_basis(L: int, boundary: str = "open") -> CdAnsatz:
    """Single family ``sum (Y_i Z_{i+1} + Z_i Y_{i+1})``."""
    return CdAnsatz((_pair_sum(L, "Y", "Z", boundary),), ("alpha",))


def zzxz_cd_basis(L: int, boundary: str = "open", variant: str = "local") -> CdAnsatz:
    """Three families for the mixed-field chain.

    ``variant="local"``: ``sum Y``, ``sum (YZ + ZY)``, ``sum (XY + YX)``.
    ``variant="commutator"``: ``sum Y``, ``sum YZ``, ``sum ZY``, the families
    reached by a single commutator ``[H, dH]``.
    """
    y = field_sum(L, "Y")
    if variant == "local":
        fams = (y, _pair_sum(L, "Y", "Z", boundary), _pair_sum(L, "X", "Y", boundary))
    elif variant == "commutator":
        fams = (y, bond_sum(L, "YZ", 1.0, boundary), bond_sum(L, "ZY", 1.0, boundary))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return CdAnsatz(fams, ("alpha", "beta", "gamma"))


@dataclass(frozen=True)
class CdSolution:
    coefficients: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    rank: int
    action: float

    @property
    def singular(self) -> bool:
        return self.rank < len(self.rhs)


def _gram(cs, ds):
    return np.array([[pauli_trace_inner(a, b) for b in ds] for a in cs])


def _solve(M, b, rcond=1e-10):
    c, _, rank, _ = np.linalg.lstsq(M, -b, rcond=rcond)
    return c, int(rank)


def cd_coefficients(h: PauliSum, dh: PauliSum, ansatz: CdAnsatz, *, rcond: float = 1e-10) -> CdSolution:
    """Minimize ``S = Tr[(dH - i[H, A])^2] / 2^L`` over ``A = sum c_a B_a``.

    With ``C_a = -i [H, B_a]`` the action is quadratic,
    ``S = Tr dH^2 + 2 c.b + c.M.c``, so ``M c = -b``.  A rank-deficient
    ``M`` is solved in the least-squares sense and reported via ``rank``.
    """
    cs = [(commutator(h, b) * -1j).real() for b in ansatz.basis]
    M = _gram(cs, cs)
    b = np.array([pauli_trace_inner(dh, c) for c in cs])
    c, rank = _solve(M, b, rcond)
    action = pauli_trace_inner(dh, dh) + 2 * c @ b + c @ M @ c
    return CdSolution(c, M, b, rank, float(action))


# problems ----------------------------------------------------------------------

@dataclass
class AdiabaticProblem:
    """``H(lam) = h0 + lam * h1`` together with its counter-diabatic ansatz.

    ``symmetry`` is an optional conserved operator used to pick the
    symmetric combination when the ground state of ``h0`` is degenerate.
    """

    name: str
    h0: PauliSum
    h1: PauliSum
    ansatz: CdAnsatz
    params: dict = field(default_factory=dict)
    symmetry: PauliSum | None = None

    def __post_init__(self):
        if self.h0.nsites != self.h1.nsites or self.h0.nsites != self.ansatz.nsites:
            raise ValueError("operators act on different chain lengths")
        self._poly = None

    @property
    def nsites(self) -> int:
        return self.h0.nsites

    def hamiltonian(self, lam: float) -> PauliSum:
        return (self.h0 + self.h1 * float(lam)).simplify(0.0)

    @property
    def target(self) -> PauliSum:
        return self.hamiltonian(1.0)

    def _polynomial(self):
        # C_a(lam) = C0_a + lam C1_a, so M and b are polynomials in lam
        if self._poly is None:
            c0 = [(commutator(self.h0, b) * -1j).real() for b in self.ansatz.basis]
            c1 = [(commutator(self.h1, b) * -1j).real() for b in self.ansatz.basis]
            m00, m01, m11 = _gram(c0, c0), _gram(c0, c1), _gram(c1, c1)
            b0 = np.array([pauli_trace_inner(self.h1, c) for c in c0])
            b1 = np.array([pauli_trace_inner(self.h1, c) for c in c1])
            self._poly = (m00, m01 + m01.T, m11, b0, b1)
        return self._poly

    def cd_coefficients(self, lam, *, rcond: float = 1e-10) -> np.ndarray:
        """Coefficients ``c_a(lam)``; vectorized over ``lam``."""
        m00, m01, m11, b0, b1 = self._polynomial()
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        out = np.empty((lam.size, len(b0)))
        for i, x in enumerate(lam):
            out[i], _ = _solve(m00 + x * m01 + x * x * m11, b0 + x * b1, rcond)
        return out

    def initial_state(self) -> np.ndarray:
        spec = lowest_eigenpairs(self.h0, 2)
        psi = spec.ground_state.astype(np.complex128)
        if spec.degenerate and self.symmetry is not None:
            cand = [spec.vectors[:, 0], spec.vectors[:, 1]]
            sym = [v + apply(self.symmetry, v) for v in cand]
            best = max(sym, key=np.linalg.norm)
            psi = (best / np.linalg.norm(best)).astype(np.complex128)
        return psi


def tfi_problem(p: TfiParams) -> AdiabaticProblem:
    """Field fixed, interaction switched on: ``h_x sum X -> build_tfi(p)``."""
    h0 = field_sum(p.L, "X", p.h_x)
    h1 = (build_tfi(p) - h0).simplify(0.0)
    return AdiabaticProblem("tfi", h0, h1, tfi_cd_basis(p.L, p.boundary),
                            {"L": p.L, "J": p.J, "h_x": p.h_x, "bias": p.bias, "boundary": p.boundary},
                            global_flip(p.L))


def zzxz_problem(p: ZzxzParams, variant: str = "local") -> AdiabaticProblem:
    """Field fixed, ``J ZZ + h_z Z`` switched on."""
    h0 = field_sum(p.L, "X", p.h_x)
    h1 = (build_zzxz(p) - h0).simplify(0.0)
    return AdiabaticProblem("zzxz", h0, h1, zzxz_cd_basis(p.L, p.boundary, variant),
                            {"L": p.L, "J": p.J, "h_x": p.h_x, "h_z": p.h_z, "boundary": p.boundary})


def field_ramp_problem(p: TfiParams) -> AdiabaticProblem:
    """Interaction fixed, transverse field switched on (classical Ising start)."""
    h1 = field_sum(p.L, "X", p.h_x)
    h0 = (build_tfi(p) - h1).simplify(0.0)
    return AdiabaticProblem("tfi_field_ramp", h0, h1, tfi_cd_basis(p.L, p.boundary),
                            {"L": p.L, "J": p.J, "h_x": p.h_x, "bias": p.bias, "boundary": p.boundary},
                            global_flip(p.L))


# evolution ----------------------------------------------------------------------

class _TermUnion:
    """Fixed list of Pauli strings with per-component coefficient rows."""

    def __init__(self, parts: Sequence[PauliSum]):
        n = parts[0].nsites
        keys = np.unique(np.concatenate([p.x * (1 << n) + p.z for p in parts]))
        self.nsites = n
        self.x, self.z = keys >> n, keys & ((1 << n) - 1)
        self.rows = np.zeros((len(parts), keys.size))
        for r, p in enumerate(parts):
            idx = np.searchsorted(keys, p.x * (1 << n) + p.z)
            self.rows[r, idx] = np.real(p.coeffs)
        self.full = PauliSum(self.x, self.z, np.ones(keys.size), n, tol=-1.0)
        masks = []
        for g in split_commuting_groups(self.full):
            gk = g.x * (1 << n) + g.z
            masks.append(np.searchsorted(keys, gk))
        self.group_index = masks
        self.body = self.full.body

    def groups(self, coeffs) -> list[PauliSum]:
        return [PauliSum(self.x[m], self.z[m], coeffs[m], self.nsites, tol=-1.0) for m in self.group_index]


@dataclass
class EvolutionTrace:
    problem: str
    params: dict
    T: float
    dt: float
    with_cd: bool
    times: np.ndarray           # sample times
    lam: np.ndarray
    fidelity_inst: np.ndarray
    gap: np.ndarray
    step_times: np.ndarray      # midpoints, one per step
    coefficients: np.ndarray    # (nsteps, nterms) Hamiltonian coefficients per step
    body: np.ndarray            # (nterms,) string weights
    cd_coefficients: np.ndarray  # (nsteps, nfamilies) c_a at midpoints
    final_fidelity: float
    final_state: np.ndarray
    norm_error: float
    C_N: float = 0.0

    def nielsen(self, weights: CostWeights = CostWeights()) -> float:
        snaps = [(c, self.body) for c in self.coefficients]
        return nielsen_cost(snaps, self.dt, self.T, weights)


def _ground_projection(spec, psi, rel=1e-8):
    """Squared overlap of ``psi`` with the (numerically) lowest eigenspace."""
    e = spec.energies
    tol = rel * max(1.0, abs(e[0]))
    sel = np.abs(e - e[0]) <= tol
    amps = spec.vectors[:, sel].conj().T @ psi
    return float(min(1.0, np.sum(np.abs(amps) ** 2)))


_SEED_MIX = 0.05


def _seed(prev, dim):
    rng = np.random.default_rng(7)
    noise = rng.standard_normal(dim)
    if prev is None:
        return noise / np.linalg.norm(noise)
    v = np.real(prev) + _SEED_MIX * noise / np.linalg.norm(noise)
    return v / np.linalg.norm(v)


def evolve(problem: AdiabaticProblem, T: float, dT: float | None = None, *, with_cd: bool = True,
           n_samples: int = 41, track: bool = True, weights: CostWeights = CostWeights()) -> EvolutionTrace:
    """Trotterized evolution from the ground state of ``h0`` to ``h0 + h1``.

    ``n_samples`` evenly spaced step boundaries (always including both ends)
    record the fidelity to the instantaneous ground state and the gap
    ``E1 - E0``.  The seed of each eigensolve is the previous ground state
    mixed with a fixed random vector, which keeps branches continuous
    without confining Lanczos to one symmetry sector.
    """
    sched = Schedule(T, dT)
    n, dt = sched.nsteps, sched.dt
    mids = sched.midpoints
    lam_m, ldot_m = sched.lam(mids), sched.lam_dot(mids)
    nfam = len(problem.ansatz.basis)
    if with_cd:
        cd = problem.cd_coefficients(lam_m)
    else:
        cd = np.zeros((n, nfam))
    union = _TermUnion([problem.h0, problem.h1, *problem.ansatz.basis])
    weights_rows = np.column_stack([np.ones(n), lam_m, ldot_m[:, None] * cd])
    coeffs = weights_rows @ union.rows

    psi = problem.initial_state()
    dim = psi.size
    sample_steps = np.unique(np.linspace(0, n, max(2, n_samples)).round().astype(int)) if track else np.array([0, n])
    ts, lams, fids, gaps = [], [], [], []
    prev = None

    def record(step, psi):
        nonlocal prev
        t = step * dt
        lam = float(sched.lam(t))
        spec = lowest_eigenpairs(problem.hamiltonian(lam), 2, v0=_seed(prev, dim))
        prev = spec.ground_state
        ts.append(t)
        lams.append(lam)
        fids.append(_ground_projection(spec, psi))
        gaps.append(float(spec.energies[1] - spec.energies[0]))
        return spec

    spec = None
    for step in range(n + 1):
        if step in sample_steps and (track or step == n):
            spec = record(step, psi)
        if step < n:
            groups = union.groups(coeffs[step])
            # alternating the product order pairs steps into symmetric products (global error O(dt^2))
            psi = trotter_step(groups if step % 2 == 0 else groups[::-1], dt, psi)
    final = _ground_projection(spec, psi)
    norm_err = abs(np.linalg.norm(psi) - 1.0)
    trace = EvolutionTrace(problem.name, dict(problem.params), float(T), dt, with_cd,
                           np.array(ts), np.array(lams), np.array(fids), np.array(gaps),
                           mids, coeffs, union.body, cd, final, psi, norm_err)
    trace.C_N = trace.nielsen(weights)
    return trace


def closed_form_complexity(trace: EvolutionTrace) -> float:
    """Printed closed forms (open chains), evaluated by the midpoint rule.

    TFI: ``N + (N-1) lam^2 J^2 + 2 (N-1) lam_dot^2 alpha^2``;
    ZZXZ adds ``N h_z^2 lam^2`` and uses ``N alpha^2 + 2(N-1)(beta^2 + gamma^2)``.
    Both assume unit transverse field and the ``local`` ZZXZ basis.
    """
    p = trace.params
    N, J = p["L"], p["J"]
    sched = Schedule(trace.T, trace.dt)
    lam, ldot = sched.lam(trace.step_times), sched.lam_dot(trace.step_times)
    c = trace.cd_coefficients
    if trace.problem == "tfi":
        inner = N + (N - 1) * lam ** 2 * J ** 2 + 2 * (N - 1) * ldot ** 2 * c[:, 0] ** 2
    elif trace.problem == "zzxz":
        inner = (N * (1 + p["h_z"] ** 2 * lam ** 2) + (N - 1) * lam ** 2 * J ** 2
                 + ldot ** 2 * (N * c[:, 0] ** 2 + 2 * (N - 1) * (c[:, 1] ** 2 + c[:, 2] ** 2)))
    else:
        raise ValueError(f"no closed form for {trace.problem!r}")
    return float(np.sum(trace.dt * np.sqrt(trace.T / trace.dt) * np.sqrt(inner)))


# scans --------------------------------------------------------------------------

def geometric_grid(t_min: float, t_max: float, per_decade: int = 16) -> np.ndarray:
    if not (0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    n = max(2, int(np.ceil(per_decade * np.log10(t_max / t_min))) + 1)
    return np.geomspace(t_min, t_max, n)


@dataclass
class TimeScanResult:
    T_grid: np.ndarray
    fidelities: np.ndarray
    threshold: float
    T_star: float | None
    C_N: float | None
    best_fidelity: float
    with_cd: bool

    @property
    def reached(self) -> bool:
        return self.T_star is not None


def minimal_time_scan(problem: AdiabaticProblem, T_grid, *, threshold: float = 0.9, with_cd: bool = True,
                      dT: float | None = None, stop_early: bool = True,
                      weights: CostWeights = CostWeights()) -> TimeScanResult:
    """Smallest grid time whose final fidelity reaches ``threshold``.

    When no grid point qualifies ``T_star`` and ``C_N`` are ``None`` and
    ``best_fidelity`` reports how close the grid came.
    """
    grid = np.asarray(T_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("T grid must be strictly increasing")
    fids = np.full(grid.size, np.nan)
    t_star = c_n = None
    for i, T in enumerate(grid):
        tr = evolve(problem, T, dT, with_cd=with_cd, track=False, weights=weights)
        fids[i] = tr.final_fidelity
        if tr.final_fidelity >= threshold and t_star is None:
            t_star, c_n = float(T), tr.C_N
            if stop_early:
                break
    return TimeScanResult(grid, fids, threshold, t_star, c_n, float(np.nanmax(fids)), with_cd)


def alternate_path(p, mode: str = "ramp_J", **kw):
    """Evolve along another switching path.

    ``ramp_J`` is :func:`evolve` on :func:`tfi_problem`; ``ramp_hx`` starts
    from the classical Ising chain in its flip-symmetric ground state and
    switches on the transverse field.  Remaining keywords go to :func:`evolve`
    (``T`` is required).
    """
    if mode == "ramp_J":
        prob = tfi_problem(p) if isinstance(p, TfiParams) else zzxz_problem(p)
    elif mode == "ramp_hx":
        if not isinstance(p, TfiParams):
            raise ValueError("ramp_hx is defined for the transverse-field Ising chain")
        prob = field_ramp_problem(p)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return evolve(prob, **kw)


def gap_sharpness(lam, gap) -> float:
    """Dimensionless sharpness of the gap minimum.

    ``(g_max / g_min) / w`` where ``w`` is the width in ``lam`` of the
    region with ``gap <= 2 g_min``; larger means a deeper, narrower dip.
    """
    lam, gap = np.asarray(lam, dtype=float), np.asarray(gap, dtype=float)
    gmin = max(float(gap.min()), 1e-300)
    below = lam[gap <= 2 * gmin]
    width = max(float(below.max() - below.min()), float(np.min(np.diff(np.sort(lam)))))
    return float(gap.max() / gmin / width)
