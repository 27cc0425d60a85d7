"""Dirichlet heat flow on a slab by odd reflection.

The half-space becomes the slab ``0 <= x_n <= L/2`` of the torus.  Data are
extended oddly across both planes ``x_n = 0`` and ``x_n = L/2``, the periodic
problem is solved exactly (see :mod:`heatlab.heat_whole`), and the result is
restricted back.  A discrete sine transform in ``x_n`` gives an independent
solver for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft

from . import rng as _rng
from .besov import HOMOGENEOUS, BesovIndex, DegenerateInput, besov_norm, lebesgue_norm
from .heat_whole import (
    HeatProblem,
    HeatSolution,
    MaxRegReport,
    TimeGrid,
    _product_weights,
    assemble_maxreg,
    solve_whole,
)
from .spectral import (
    FLAG_NONCOMPATIBLE_TRACE,
    DyadicCutoffs,
    Field,
    Grid,
    band_limited_noise,
    build_cutoffs,
    hessian_weights,
    partial,
)


class SlabField:
    """Samples on the closed slab: planes ``i = 0 .. N/2`` of the last axis."""

    __slots__ = ("grid", "samples", "flags")

    def __init__(self, grid: Grid, samples, flags: int = 0):
        arr = np.array(samples, dtype=float)
        want = grid.shape[:-1] + (grid.N // 2 + 1,)
        if arr.shape != want:
            raise ValueError(f"slab samples shape {arr.shape}, expected {want}")
        arr.setflags(write=False)
        self.grid = grid
        self.samples = arr
        self.flags = flags

    @classmethod
    def from_function(cls, grid: Grid, func: Callable) -> "SlabField":
        coords = [c[..., : grid.N // 2 + 1] for c in grid.coords]
        return cls(grid, np.broadcast_to(func(*coords), coords[0].shape))

    @classmethod
    def restrict(cls, u: Field) -> "SlabField":
        return cls(u.grid, u.samples[..., : u.grid.N // 2 + 1], flags=u.flags)

    def boundary_residual(self) -> float:
        return float(max(np.max(np.abs(self.samples[..., 0])), np.max(np.abs(self.samples[..., -1]))))

    def lebesgue_norm(self, p: float) -> float:
        """Trapezoid quadrature in x_n (half weight on both planes)."""
        g = self.grid
        a = np.abs(self.samples)
        if p == math.inf:
            return float(a.max())
        w = np.ones(a.shape[-1])
        w[0] = w[-1] = 0.5
        return float((np.sum(a**p * w) * g.cell_volume) ** (1.0 / p))

    def zero_extend(self) -> Field:
        full = np.zeros(self.grid.shape)
        full[..., : self.grid.N // 2 + 1] = self.samples
        return Field(self.grid, full, flags=self.flags)


# boundary values below this fraction of the sup count as round-off, not as a trace
TRACE_TOL = 1e-12


def reflect(values: np.ndarray) -> np.ndarray:
    """v(x', -x_n) on the periodic lattice (index i -> -i mod N on the last axis)."""
    return np.roll(values[..., ::-1], 1, axis=-1)


def _extend(u: SlabField, sign: float) -> Field:
    N = u.grid.N
    half = N // 2
    full = np.zeros(u.grid.shape)
    full[..., : half + 1] = u.samples
    full[..., half + 1 :] = sign * u.samples[..., 1:half][..., ::-1]
    flags = u.flags
    if sign < 0:
        if u.boundary_residual() > TRACE_TOL * max(np.max(np.abs(u.samples)), 1e-300):
            flags |= FLAG_NONCOMPATIBLE_TRACE
        full[..., 0] = 0.0
        full[..., half] = 0.0
    return Field(u.grid, full, flags=flags)


def antisym_extend(u: SlabField) -> Field:
    """Odd extension across x_n = 0 (and x_n = L/2); boundary planes are set to zero.

    Nonzero boundary values cannot survive odd reflection; they are dropped and
    the result carries ``FLAG_NONCOMPATIBLE_TRACE``.
    """
    return _extend(u, -1.0)


def sym_extend(u: SlabField) -> Field:
    return _extend(u, 1.0)


# --------------------------------------------------------------------------
# solver

WINDOW_NOTE = "index outside -1+1/p < s < 1/p"


@dataclass
class HalfSolution:
    whole: HeatSolution
    index: BesovIndex | None = None
    notes: list = field(default_factory=list)

    @property
    def times(self) -> TimeGrid:
        return self.whole.times

    @property
    def fields(self) -> list:
        return [SlabField.restrict(u) for u in self.whole.fields]

    def boundary_trace(self) -> float:
        """sup over instants and both Dirichlet planes of |u|."""
        return max(SlabField.restrict(u).boundary_residual() for u in self.whole.fields)


@dataclass
class HalfProblem:
    nu: float
    T: float
    u0: SlabField
    forcing: Callable[[float], SlabField] | None = None

    def extended(self) -> HeatProblem:
        f = None
        if self.forcing is not None:
            def f(t, src=self.forcing):
                return antisym_extend(src(t))
        return HeatProblem(self.nu, self.T, antisym_extend(self.u0), f)


def solve_half(problem: HalfProblem, times: TimeGrid | None = None,
               idx: BesovIndex | None = None) -> HalfSolution:
    """Reflect, solve on the torus, keep the extended solution for auditing."""
    sol = HalfSolution(solve_whole(problem.extended(), times), index=idx)
    if idx is not None and not idx.in_trace_window():
        sol.notes.append(f"{WINDOW_NOTE}: s={idx.s}, p={idx.p}")
    if problem.u0.flags & FLAG_NONCOMPATIBLE_TRACE or sol.whole.problem.u0.flags & FLAG_NONCOMPATIBLE_TRACE:
        sol.notes.append("non-compatible trace")
    return sol


def sine_oracle(problem: HalfProblem, times: TimeGrid | None = None) -> list[SlabField]:
    """Independent slab solver: DST-I in x_n, FFT in x', same time quadrature."""
    grid = problem.u0.grid
    times = times or TimeGrid.hybrid(problem.T)
    half = grid.N // 2
    kn = np.arange(1, half)  # sine modes sin(2 pi k x_n / L)
    xi_n = 2 * math.pi * kn / grid.L
    shape = [1] * grid.n
    shape[-1] = half - 1
    sq = (xi_n**2).reshape(shape)
    for axis in range(grid.n - 1):
        k = np.fft.fftfreq(grid.N, d=1.0 / grid.N) * 2 * math.pi / grid.L
        s = [1] * grid.n
        s[axis] = grid.N
        sq = sq + (k**2).reshape(s)
    a = problem.nu * sq
    xp_axes = tuple(range(grid.n - 1))

    def fwd(sf: SlabField):
        c = scipy.fft.dst(sf.samples[..., 1:half], type=1, axis=-1)
        return np.fft.fftn(c, axes=xp_axes) if xp_axes else c

    def inv(c):
        c = np.fft.ifftn(c, axes=xp_axes).real if xp_axes else np.real(c)
        interior = scipy.fft.idst(c, type=1, axis=-1)
        out = np.zeros(grid.shape[:-1] + (half + 1,))
        out[..., 1:half] = interior
        return SlabField(grid, out)

    c0 = fwd(problem.u0)
    t = times.instants
    fs = [fwd(problem.forcing(float(s))) for s in t] if problem.forcing is not None else None
    out = [inv(c0)]
    duh = np.zeros_like(c0, dtype=complex)
    for i in range(1, t.size):
        dt = t[i] - t[i - 1]
        if fs is not None:
            w0, w1 = _product_weights(a * dt)
            duh = np.exp(-a * dt) * duh + dt * (w0 * fs[i - 1] + w1 * fs[i])
        out.append(inv(c0 * np.exp(-a * t[i]) + duh))
    return out


def oracle_gap(problem: HalfProblem, times: TimeGrid | None = None) -> float:
    """max over instants of sup |reflection - sine| / sup |reflection|."""
    times = times or TimeGrid.hybrid(problem.T)
    refl = solve_half(problem, times).fields
    orc = sine_oracle(problem, times)
    scale = max(np.max(np.abs(r.samples)) for r in refl) or 1.0
    return max(float(np.max(np.abs(r.samples - o.samples))) for r, o in zip(refl, orc)) / scale


# --------------------------------------------------------------------------
# parity audit

class ParityError(AssertionError):
    pass


@dataclass
class ParityReport:
    deviations: dict

    @property
    def passed(self) -> bool:
        return all(v <= PARITY_TOL for v in self.deviations.values())


PARITY_TOL = 1e-9


def _parity_dev(v: np.ndarray, sign: float) -> float:
    # relative deviation of v from (sign)-parity under x_n -> -x_n
    scale = np.max(np.abs(v))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(v - sign * reflect(v))) / scale)


def parity_audit(solution: HalfSolution | HeatSolution, tol: float = PARITY_TOL) -> ParityReport:
    """Check the parity bookkeeping of the reflected solution at every instant.

    u_t odd; Delta_{x'} u odd; grad_{x'} d_n u even; d_n^2 u computed spectrally
    agrees with (u_t - f)/nu - Delta_{x'} u.  Raises :class:`ParityError`
    naming the first derivative whose deviation exceeds ``tol``.
    """
    sol = solution.whole if isinstance(solution, HalfSolution) else solution
    grid = sol.problem.grid
    n = grid.n
    nu = sol.problem.nu
    dev = {"u_t parity": 0.0, "tangential Laplacian parity": 0.0,
           "mixed derivative parity": 0.0, "normal second derivative": 0.0}
    for i in range(len(sol)):
        u = sol.fields[i]
        ut = sol.ut(i).samples
        dev["u_t parity"] = max(dev["u_t parity"], _parity_dev(ut, -1.0))
        lap_t = np.zeros(grid.shape)
        for a in range(n - 1):
            lap_t += partial(u, a, 2).samples
            mixed = Field.from_spectrum(grid, -grid.xi[a] * grid.xi[n - 1] * u.spectrum).samples
            dev["mixed derivative parity"] = max(dev["mixed derivative parity"], _parity_dev(mixed, 1.0))
        if n > 1:
            dev["tangential Laplacian parity"] = max(dev["tangential Laplacian parity"], _parity_dev(lap_t, -1.0))
        dnn = partial(u, n - 1, 2).samples
        other = (ut - sol.forcing_at(i).samples) / nu - lap_t
        scale = max(np.max(np.abs(dnn)), 1e-300)
        dev["normal second derivative"] = max(dev["normal second derivative"],
                                              float(np.max(np.abs(dnn - other)) / scale))
    report = ParityReport(dev)
    for name, v in dev.items():
        if v > tol:
            raise ParityError(f"parity broken: {name} deviation {v:.3e} > {tol:g}")
    return report


# --------------------------------------------------------------------------
# maximal regularity on the slab

def slab_besov(u: SlabField | list, idx: BesovIndex, cutoffs: DyadicCutoffs | None = None,
               weights=None) -> float:
    """Besov norm of the zero extension of slab data (components for tensors)."""
    comps = [u] if isinstance(u, SlabField) else list(u)
    return besov_norm([c.zero_extend() for c in comps], idx, cutoffs, weights).value


def maxreg_report_half(problem: HalfProblem, idx: BesovIndex, times: TimeGrid | None = None,
                       cutoffs: DyadicCutoffs | None = None) -> MaxRegReport:
    """Slab version of the maximal-regularity report.

    ``extras`` carries ``lp_extension_ratio`` (torus L_p of the odd extension
    over slab L_p of the data, equal to 2^{1/p}) and the largest
    ``besov_extension_ratio`` of the extended-field norm over the slab norm.
    """
    if not idx.in_trace_window():
        raise ValueError(f"{WINDOW_NOTE}: s={idx.s}, p={idx.p}")
    if idx.flavor != HOMOGENEOUS or idx.q != 1:
        raise ValueError("maximal regularity norms are homogeneous with third index 1")
    sol = solve_half(problem, times, idx)
    whole = sol.whole
    grid = problem.u0.grid
    cutoffs = cutoffs or build_cutoffs(grid)
    w = hessian_weights(grid.n)
    ext_ratio = [0.0]

    def norm(kind, i):
        if kind == "u":
            obj, ww = whole.fields[i], None
        elif kind == "ut":
            obj, ww = whole.ut(i), None
        elif kind == "hess":
            obj, ww = whole.hessian(i), w
        else:
            obj, ww = whole.forcing_at(i), None
        comps = [obj] if isinstance(obj, Field) else obj
        slab = slab_besov([SlabField.restrict(c) for c in comps], idx, cutoffs, ww)
        if slab > 0 and kind == "u":
            ext_ratio[0] = max(ext_ratio[0], besov_norm(comps, idx, cutoffs, ww).value / slab)
        return slab

    rep = assemble_maxreg(whole, idx, norm=norm)
    s0 = SlabField.restrict(whole.fields[0])
    lp = s0.lebesgue_norm(idx.p)
    rep.extras["lp_extension_ratio"] = lebesgue_norm(whole.fields[0], idx.p) / lp if lp > 0 else 0.0
    rep.extras["besov_extension_ratio"] = ext_ratio[0]
    rep.extras["boundary_residual"] = sol.boundary_trace()
    return rep


# --------------------------------------------------------------------------
# random odd-compatible cases

def odd_noise(grid: Grid, gen: np.random.Generator, k_max: float) -> Field:
    u = band_limited_noise(grid, gen, k_max=k_max, k_min=1)
    v = 0.5 * (u.samples - reflect(u.samples))
    return Field(grid, v / np.max(np.abs(v)))


def random_half_problem(case: int, T: float = 1.0, seed: int = _rng.DEFAULT_SEED,
                        grid: Grid = Grid(2, 32, 2 * math.pi), nu: float = 1.0,
                        forced: bool | None = None) -> HalfProblem:
    gen = _rng.stream(seed, "half_case", case)
    u0 = SlabField.restrict(odd_noise(grid, gen, grid.N / 4))
    forced = bool(case % 2) if forced is None else forced
    forcing = None
    if forced:
        g = SlabField.restrict(odd_noise(grid, gen, grid.N / 4))

        def forcing(t, g=g):
            return SlabField(g.grid, g.samples * math.exp(-t))
    return HalfProblem(nu, T, u0, forcing)


def half_t_sweep(cases=range(10), horizons=(1.0, 4.0, 16.0, 64.0), idx: BesovIndex = BesovIndex(0.0, 2.0, 1.0),
                 seed: int = _rng.DEFAULT_SEED, grid: Grid = Grid(1, 64, 2 * math.pi), M: int = 256) -> dict:
    """case -> list of slab max-regularity ratios over the horizons."""
    out = {}
    cutoffs = build_cutoffs(grid)
    for c in cases:
        out[c] = [maxreg_report_half(random_half_problem(c, T, seed, grid), idx,
                                     TimeGrid.hybrid(T, M), cutoffs).ratio for T in horizons]
    return out
