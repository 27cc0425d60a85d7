"""Exact spectral heat solver on the torus with Duhamel forcing, block-decay fits
and the maximal-regularity report.

The free part ``e^{nu t Delta} u0`` is applied exactly in Fourier space.  The
forcing enters through a composite trapezoid (product) rule on a
:class:`TimeGrid`: f is interpolated linearly on each step and integrated
against the exact kernel ``e^{nu (t - s) Delta}``.  The solution is therefore
exact when f is piecewise linear in time on the grid (in particular constant)
and second-order accurate otherwise, uniformly in the stiffness nu |xi|^2 dt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import rng as _rng
from .besov import (
    HOMOGENEOUS,
    BesovIndex,
    DegenerateInput,
    besov_norm,
    lebesgue_norm,
)
from .spectral import (
    DyadicCutoffs,
    Field,
    Grid,
    band_field,
    band_limited_noise,
    build_cutoffs,
    heat_multiply,
    hessian,
    hessian_weights,
)

GEOMETRIC_LEVELS = 12


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing instants 0 = t_0 < ... < t_M = T."""

    instants: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.instants, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must start at 0 and increase strictly")
        t.setflags(write=False)
        object.__setattr__(self, "instants", t)

    @property
    def T(self) -> float:
        return float(self.instants[-1])

    @property
    def M(self) -> int:
        return self.instants.size - 1

    def __len__(self):
        return self.instants.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.instants, other.instants)

    def __hash__(self):
        return hash(self.instants.tobytes())

    @classmethod
    def uniform(cls, T: float, M: int) -> "TimeGrid":
        return cls(np.linspace(0.0, T, M + 1))

    @classmethod
    def hybrid(cls, T: float, M: int = 256, levels: int = GEOMETRIC_LEVELS) -> "TimeGrid":
        """Uniform steps T/M_u plus the dyadic points T 2^-m (m <= levels) below the first step.

        ``M_u`` is the largest count such that the grid has ``M`` intervals in total.
        """
        if not T > 0:
            raise ValueError(f"horizon must be positive, got {T}")
        if M < 16:
            raise ValueError("hybrid time grid needs at least 16 intervals")

        def n_geo(mu):
            return sum(1 for m in range(1, levels + 1) if 2.0**-m < 1.0 / mu)

        mu = M
        while mu + n_geo(mu) > M:
            mu -= 1
        geo = [T * 2.0**-m for m in range(levels, 0, -1) if 2.0**-m < 1.0 / mu]
        uni = list(np.linspace(0.0, T, mu + 1)[1:])
        return cls(np.array([0.0] + geo + uni))

    def trapezoid(self, values) -> float:
        v = np.asarray(values, dtype=float)
        return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(self.instants)))


Forcing = Union[None, Callable[[float], Field], tuple]


@dataclass
class HeatProblem:
    """u_t - nu Delta u = f on the torus, u(0) = u0.

    ``forcing`` is ``None``, a callable ``t -> Field``, or a pair
    ``(TimeGrid, [Field, ...])`` of samples on a fixed time grid.
    """

    nu: float
    T: float
    u0: Field
    forcing: Forcing = None
    label: str = ""

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if isinstance(self.forcing, tuple):
            tg, samples = self.forcing
            if any(f.grid != self.u0.grid for f in samples):
                raise ValueError("incompatible sampling: forcing lives on another grid")
            if len(samples) != len(tg):
                raise ValueError("incompatible sampling: forcing sample count differs from its time grid")

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def forcing_samples(self, times: TimeGrid) -> list[Field] | None:
        f = self.forcing
        if f is None:
            return None
        if isinstance(f, tuple):
            tg, samples = f
            if tg != times:
                raise ValueError("incompatible sampling: forcing time grid differs from solver grid")
            return list(samples)
        out = [f(float(t)) for t in times.instants]
        if any(x.grid != self.grid for x in out):
            raise ValueError("incompatible sampling: forcing lives on another grid")
        return out


@dataclass
class HeatSolution:
    problem: HeatProblem
    times: TimeGrid
    fields: list
    forcing: list | None = None

    def __len__(self):
        return len(self.fields)

    def forcing_at(self, i: int) -> Field:
        return self.forcing[i] if self.forcing is not None else Field.zeros(self.problem.grid)

    def ut(self, i: int) -> Field:
        """u_t from the equation: nu Delta u + f."""
        u = self.fields[i]
        lap = Field.from_spectrum(u.grid, -self.problem.nu * u.grid.xi_norm**2 * u.spectrum)
        return lap + self.forcing_at(i) if self.forcing is not None else lap

    def hessian(self, i: int) -> list[Field]:
        return hessian(self.fields[i])

    def series(self, kind: str, idx: BesovIndex | None, cutoffs: DyadicCutoffs | None = None) -> np.ndarray:
        """Per-instant norm of u, ut, hess or f; Lebesgue norm when ``idx`` is a bare p."""
        grid = self.problem.grid
        cutoffs = cutoffs or build_cutoffs(grid)
        out = np.empty(len(self))
        weights = hessian_weights(grid.n)
        for i in range(len(self)):
            if kind == "u":
                obj, w = self.fields[i], None
            elif kind == "ut":
                obj, w = self.ut(i), None
            elif kind == "hess":
                obj, w = self.hessian(i), weights
            elif kind == "f":
                obj, w = self.forcing_at(i), None
            else:
                raise ValueError(f"unknown series {kind!r}")
            out[i] = besov_norm(obj, idx, cutoffs, w).value
        return out


def _product_weights(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights of the linearly interpolated forcing under the exact kernel on one step.

    int_0^1 e^{-z(1-r)} [(1-r) f0 + r f1] dr = w0 f0 + w1 f1; both tend to 1/2 as z -> 0.
    """
    z = np.asarray(z, dtype=float)
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    e = np.exp(-zs)
    w0 = np.where(small, 0.5 - z / 3 + z * z / 8, (1 - (1 + zs) * e) / zs**2)
    w1 = np.where(small, 0.5 - z / 6 + z * z / 24, (zs - 1 + e) / zs**2)
    return w0, w1


def solve_whole(problem: HeatProblem, times: TimeGrid | None = None) -> HeatSolution:
    """Duhamel solution sampled on ``times`` (hybrid grid with 256 steps by default)."""
    times = times or TimeGrid.hybrid(problem.T)
    if abs(times.T - problem.T) > 1e-12 * problem.T:
        raise ValueError(f"time grid ends at {times.T}, horizon is {problem.T}")
    grid = problem.grid
    nu = problem.nu
    fs = problem.forcing_samples(times)
    u0 = problem.u0
    fields = [u0]
    if fs is None:
        for t in times.instants[1:]:
            fields.append(heat_multiply(u0, float(t), nu))
        return HeatSolution(problem, times, fields, None)

    # D_i = e^{-a dt} D_{i-1} + dt (w0 f_{i-1} + w1 f_i) per mode a = nu |xi|^2
    a = nu * grid.xi_norm**2
    duh = np.zeros(grid.shape, dtype=complex)
    t = times.instants
    for i in range(1, t.size):
        dt = t[i] - t[i - 1]
        w0, w1 = _product_weights(a * dt)
        duh = np.exp(-a * dt) * duh + dt * (w0 * fs[i - 1].spectrum + w1 * fs[i].spectrum)
        free = u0.spectrum * np.exp(-a * t[i])
        fields.append(Field.from_spectrum(grid, free + duh))
    return HeatSolution(problem, times, fields, fs)


# --------------------------------------------------------------------------
# block decay of the semigroup

@dataclass
class BlockDecayFit:
    j: int
    p: float
    C_fit: float
    c_fit: float
    trials: int


def block_decay_fit(j: int, p: float, nu: float = 1.0, trials: int = 20,
                    seed: int = _rng.DEFAULT_SEED, n: int = 1) -> BlockDecayFit:
    """Envelope ||e^{nu t Delta} Delta_j h||_p <= C exp(-c nu t 4^j) ||Delta_j h||_p.

    For each random block the decay rate is read off the secant of the last two
    samples of ``log r(tau)`` (``tau = nu t 4^j``) and ``C`` is the smallest
    prefactor making the envelope hold on the whole sampled range; the suite
    returns the largest ``C`` and the smallest ``c``.
    """
    grid = Grid(n, max(64, 2 ** (j + 6)), 32 * math.pi)
    cutoffs = build_cutoffs(grid)
    cutoffs.check_band(j)
    taus = np.concatenate([[0.0], np.logspace(-3, math.log10(40.0), 48)])
    C_all, c_all = [], []
    rho2 = grid.xi_norm**2
    for trial in range(trials):
        gen = _rng.stream(seed, "block_decay", j, p, n, trial)
        h = band_field(grid, j, cutoffs, gen)
        base = lebesgue_norm(h, p)
        r = []
        for tau in taus:
            t = tau / (nu * 4.0**j)
            w = Field.from_spectrum(grid, h.spectrum * np.exp(-nu * t * rho2))
            r.append(lebesgue_norm(w, p) / base)
        r = np.array(r)
        keep = np.nonzero(r >= 1e-12)[0]
        last = keep[-1]
        lr = np.log(r[last - 1 : last + 1])
        c = -(lr[1] - lr[0]) / (taus[last] - taus[last - 1])
        C = float(np.max(r[: last + 1] * np.exp(c * taus[: last + 1])))
        C_all.append(C)
        c_all.append(c)
    return BlockDecayFit(j, p, float(max(C_all)), float(min(c_all)), trials)


def l2_block_excess(grid: Grid, nu: float = 1.0, trials: int = 5, seed: int = _rng.DEFAULT_SEED,
                    c: float = 0.25, C: float = 1.0) -> float:
    """max over bands, trials and times of ||e^{nu t Delta} D_j h||_2 / ||D_j h||_2 - C exp(-c nu t 4^j).

    phi vanishes below |xi| = 2^(j-1), so Plancherel gives the bound with
    c = 1/4 and C = 1 exactly; the result should be <= round-off.
    """
    cutoffs = build_cutoffs(grid)
    taus = np.concatenate([[0.0], np.logspace(-3, math.log10(40.0), 32)])
    rho2 = grid.xi_norm**2
    worst = -math.inf
    for j in cutoffs.bands:
        for trial in range(trials):
            h = band_field(grid, j, cutoffs, _rng.stream(seed, "l2_block", grid.n, j, trial))
            base = lebesgue_norm(h, 2.0)
            for tau in taus:
                t = tau / (nu * 4.0**j)
                w = Field.from_spectrum(grid, h.spectrum * np.exp(-nu * t * rho2))
                worst = max(worst, lebesgue_norm(w, 2.0) / base - C * math.exp(-c * tau))
    return float(worst)


# --------------------------------------------------------------------------
# maximal regularity

@dataclass
class MaxRegReport:
    sup_norm: float
    ut_l1: float
    lap_l1: float
    rhs: float
    sliver: float = 0.0
    T: float = 0.0
    nu: float = 1.0
    index: BesovIndex | None = None
    extras: dict = field(default_factory=dict)

    @property
    def lhs(self) -> float:
        return self.sup_norm + self.ut_l1 + self.lap_l1

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            if self.lhs == 0:
                return 0.0
            raise DegenerateInput("degenerate input: rhs = 0 with nonzero solution")
        return self.lhs / self.rhs

    CSV_HEADER = ("case", "s", "p", "nu", "T", "sup_norm", "ut_l1", "lap_l1", "rhs", "ratio")

    def csv_row(self, case) -> list:
        idx = self.index
        return [case, idx.s, idx.p, self.nu, self.T, self.sup_norm, self.ut_l1,
                self.lap_l1, self.rhs, self.ratio]


def _check_maxreg_index(idx: BesovIndex):
    if idx.flavor != HOMOGENEOUS or idx.q != 1:
        raise ValueError("maximal regularity norms are homogeneous with third index 1")


def assemble_maxreg(sol: HeatSolution, idx: BesovIndex, cutoffs: DyadicCutoffs | None = None,
                    norm: Callable | None = None) -> MaxRegReport:
    """Assemble the report from a solution; ``norm(kind, i)`` overrides the norm evaluation."""
    times = sol.times
    if norm is None:
        cutoffs = cutoffs or build_cutoffs(sol.problem.grid)
        series = {k: sol.series(k, idx, cutoffs) for k in ("u", "ut", "hess")}
        series["f"] = sol.series("f", idx, cutoffs) if sol.forcing is not None else np.zeros(len(sol))
    else:
        series = {k: np.array([norm(k, i) for i in range(len(sol))]) for k in ("u", "ut", "hess", "f")}
    nu = sol.problem.nu
    t1 = times.instants[1]
    sliver = t1 * (max(series["ut"][0], series["ut"][1]) + nu * max(series["hess"][0], series["hess"][1]))
    return MaxRegReport(
        sup_norm=float(series["u"].max()),
        ut_l1=times.trapezoid(series["ut"]),
        lap_l1=nu * times.trapezoid(series["hess"]),
        rhs=float(series["u"][0]) + times.trapezoid(series["f"]),
        sliver=float(sliver),
        T=times.T,
        nu=nu,
        index=idx,
    )


def maxreg_report(problem: HeatProblem, idx: BesovIndex, times: TimeGrid | None = None,
                  cutoffs: DyadicCutoffs | None = None) -> MaxRegReport:
    """sup_t ||u|| + ||u_t||_{L1} + nu ||grad^2 u||_{L1} against ||u0|| + ||f||_{L1}."""
    _check_maxreg_index(idx)
    sol = solve_whole(problem, times)
    return assemble_maxreg(sol, idx, cutoffs)


# --------------------------------------------------------------------------
# T-independence

SWEEP_GRID = Grid(1, 64, 2 * math.pi)
SWEEP_HORIZONS = (1.0, 4.0, 16.0, 64.0)
FAMILIES = ("free", "decaying", "persistent")
# families whose ratio saturates on the sweep horizons; persistent forcing moves
# from the transient regime (ratio near 2) to the steady one (ratio near 1)
FLAT_FAMILIES = ("free", "decaying")


def random_problem(case: int, T: float, seed: int = _rng.DEFAULT_SEED, grid: Grid = SWEEP_GRID,
                   nu: float = 1.0, family: str | None = None) -> HeatProblem:
    """Reproducible (u0, f) pair for a sweep case; by default the family cycles free/decaying."""
    family = family or FLAT_FAMILIES[case % len(FLAT_FAMILIES)]
    gen = _rng.stream(seed, "maxreg_case", case)
    u0 = band_limited_noise(grid, gen, k_max=grid.N / 4, k_min=1)
    g = band_limited_noise(grid, gen, k_max=grid.N / 4, k_min=1)
    if family == "free":
        forcing = None
    elif family == "decaying":
        def forcing(t, g=g):
            return g * math.exp(-t)
    elif family == "persistent":
        def forcing(t, g=g):
            return g
    else:
        raise ValueError(f"unknown forcing family {family!r}")
    return HeatProblem(nu, T, u0, forcing, label=family)


@dataclass
class SweepTable:
    horizons: tuple
    ratios: dict  # case -> list of ratios per horizon
    families: dict

    def variation(self, case) -> float:
        r = self.ratios[case]
        return max(r) / min(r)

    @property
    def envelope(self) -> float:
        return max(max(r) for r in self.ratios.values())

    def rows(self):
        for c, rs in sorted(self.ratios.items()):
            for T, r in zip(self.horizons, rs):
                yield c, self.families[c], T, r


class TIndependenceError(AssertionError):
    pass


def t_independence_sweep(problem_family: Callable[[int, float], HeatProblem], idx: BesovIndex,
                         horizons: Sequence[float] = SWEEP_HORIZONS, cases: Sequence[int] = range(20),
                         M: int = 256, limit: float | None = 1.5) -> SweepTable:
    """Max-regularity ratios for each case over increasing horizons.

    Raises :class:`TIndependenceError` naming the first case whose ratios vary
    by more than ``limit`` (pass ``limit=None`` to only tabulate).
    """
    horizons = tuple(float(T) for T in horizons)
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must increase")
    ratios, fams = {}, {}
    for c in cases:
        rs = []
        for T in horizons:
            prob = problem_family(c, T)
            rs.append(maxreg_report(prob, idx, TimeGrid.hybrid(T, M)).ratio)
            fams[c] = prob.label
        ratios[c] = rs
        if limit is not None and max(rs) / min(rs) > limit:
            raise TIndependenceError(f"case {c}: ratios {rs} vary by {max(rs) / min(rs):.3f} > {limit}")
    return SweepTable(horizons, ratios, fams)
