"""Acceptance experiments: each returns claims with tolerances and CSV tables.

Every experiment is a plain function of keyword parameters (all with
defaults, overridable from a config file) plus ``seed`` and ``baseline``.
The CLI and the acceptance tests both call these functions.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .baseline import DRIFT_LIMIT, MissingBaseline, compare_baseline
from .besov import (BesovIndex, ProductLaw, besov_norm, composition_pointwise_excess,
                    composition_suite, duality_suite, extension_suite, fd_equivalence_ratios,
                    interpolation_suite, product_suite, smooth_bump, symmetric_envelope)
from .fd_domains import (FDSolverConfig, LocalizedNorm, absorption_integral, absorption_lattice,
                         algebraic_decay_fit, annulus_eigenvalue, ball_bump, build_mask,
                         duality_identity_check, exp_decay_fit, far_horizon, fd_norm, fd_solve,
                         localized_norm_series, random_interior_data, subsolution_check,
                         whole_box_kernel_decay, DIMENSION_NOTE)
from .halfspace import (ParityError, half_t_sweep, oracle_gap, parity_audit, random_half_problem,
                        solve_half)
from .heat_whole import (FLAT_FAMILIES, TimeGrid, block_decay_fit, l2_block_excess, random_problem,
                         t_independence_sweep)
from .nonlinear import (NonlinearSpec, Transport, solve_semilinear, threshold_nu_scaling,
                        threshold_search)
from .nonlinearities import Nonlinearity
from .spectral import DyadicCutoffs, Field, Grid, band_limited_noise, build_cutoffs, verify_partition_of_unity


@dataclass
class Claim:
    label: str
    value: float
    tol: str
    passed: bool

    def line(self, number: int) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} [#{number}] {self.label}: {self.value:.6g} (tol {self.tol})"


@dataclass
class CriterionResult:
    number: int
    title: str
    subcommand: str
    claims: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    measured: dict = field(default_factory=dict)  # suite -> {key: value} for baselines
    notes: list = field(default_factory=list)
    wall: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def claim(self, label, value, ok, tol):
        self.claims.append(Claim(label, float(value), tol, bool(ok)))

    def at_most(self, label, value, limit):
        self.claim(label, value, value <= limit, f"<= {limit:g}")

    def at_least(self, label, value, limit):
        self.claim(label, value, value >= limit, f">= {limit:g}")

    def within(self, label, value, target, rel):
        err = abs(value / target - 1.0)
        self.claim(label, value, err <= rel, f"{target:g} +/- {100 * rel:g}%")

    def drift(self, suite: str, baseline: dict | None):
        """Drift claim against the frozen baseline (skipped while freezing)."""
        current = self.measured[suite]
        if baseline is None:
            self.notes.append(f"{suite}: baseline frozen from this run")
            return None
        try:
            rep = compare_baseline(suite, current, baseline)
        except MissingBaseline as exc:
            self.claim(f"{suite} baseline present ({exc})", math.nan, False, "present")
            return None
        self.claim(f"{suite} drift vs frozen baseline", rep.max_drift, rep.ok, f"< {100 * DRIFT_LIMIT:g}%")
        self.tables[f"{suite}_drift"] = (("suite", "key", "frozen", "current", "drift", "ok"), list(rep.rows()))
        return rep

    def lines(self):
        return [c.line(self.number) for c in self.claims]


RUNTIME = {1: 5, 2: 30, 3: 120, 4: 120, 5: 60, 6: 180, 7: 600, 8: 1, 9: 600, 10: 60, 11: 180, 12: 600}

WALL_LABEL = "wall time [s]"


def _timed(number, title, sub):
    def deco(fn):
        @functools.wraps(fn)
        def run(*args, **kw):
            t0 = time.perf_counter()
            res = CriterionResult(number, title, sub)
            fn(res, *args, **kw)
            res.wall = time.perf_counter() - t0
            res.at_most(WALL_LABEL, res.wall, RUNTIME[number])
            return res
        run.number, run.title, run.subcommand = number, title, sub
        return run
    return deco


# --------------------------------------------------------------------------

class OffsetCutoffs(DyadicCutoffs):
    """chi scaled by (1 - offset): a deliberately broken pair for negative controls."""

    def __init__(self, base: DyadicCutoffs, offset: float):
        super().__init__(base.profile, base.j_min, base.j_max)
        object.__setattr__(self, "offset", offset)

    def chi(self, rho):
        return (1.0 - self.offset) * super().chi(rho)


@_timed(1, "partition of unity", "lp-verify")
def partition_of_unity(res, profile: str = "quintic", offset: float = 0.0, seed=_rng.DEFAULT_SEED,
                       baseline=None):
    rows = []
    worst = 0.0
    for n in (1, 2):
        for N in (64, 128, 256):
            grid = Grid(n, N)
            cut = build_cutoffs(grid, profile)
            if offset:
                cut = OffsetCutoffs(cut, offset)
            dev = verify_partition_of_unity(cut, grid)
            rows.append((n, N, cut.j_min, cut.j_max, dev))
            worst = max(worst, dev)
    res.tables["partition"] = (("n", "N", "j_min", "j_max", "deviation"), rows)
    res.at_most("max |sum phi_j - 1| over the covered annulus", worst, 1e-10)


@_timed(2, "semigroup block decay", "maxreg")
def block_decay(res, trials: int = 20, seed=_rng.DEFAULT_SEED, baseline=None):
    ex = max(l2_block_excess(Grid(1, 256), seed=seed), l2_block_excess(Grid(2, 64), seed=seed))
    res.at_most("p=2 excess over exp(-t 4^j / 4)", ex, 1e-9)
    rows = []
    fits = {}
    for p in (1.0, math.inf):
        for j in (0, 1, 2):
            f = block_decay_fit(j, p, trials=trials, seed=seed)
            rows.append((p, j, f.c_fit, f.C_fit, f.trials))
            tag = "inf" if p == math.inf else f"{p:g}"
            fits[f"c_p{tag}_j{j}"] = f.c_fit
            fits[f"C_p{tag}_j{j}"] = f.C_fit
    res.tables["block_decay"] = (("p", "j", "c_fit", "C_fit", "trials"), rows)
    res.at_least("min c_fit over p in {1, inf}", min(r[2] for r in rows), 0.2)
    res.at_most("max C_fit over p in {1, inf}", max(r[3] for r in rows), 3.0)
    res.measured["block_decay"] = fits
    res.drift("block_decay", baseline)


@_timed(3, "T-independence of maximal regularity", "maxreg")
def t_independence(res, cases: int = 20, M: int = 256, persistent_cases: int = 4,
                   seed=_rng.DEFAULT_SEED, baseline=None):
    idx = BesovIndex(0.0, 2.0, 1.0)
    table = t_independence_sweep(lambda c, T: random_problem(c, T, seed), idx, cases=range(cases), M=M, limit=None)
    res.tables["maxreg_sweep"] = (("case", "family", "T", "ratio"), list(table.rows()))
    var = max(table.variation(c) for c in table.ratios)
    res.claim("max per-case ratio variation over T in {1,4,16,64}", var, var < 1.5, "< 1.5")
    env = table.envelope
    res.measured["maxreg_sweep"] = {"envelope": env}
    if baseline is not None and "maxreg_sweep" in baseline:
        frozen = baseline["maxreg_sweep"]["envelope"]
        res.at_most("max ratio against frozen envelope", env, frozen * (1 + 1e-9))
    res.drift("maxreg_sweep", baseline)
    if persistent_cases:
        pers = t_independence_sweep(lambda c, T: random_problem(c, T, seed, family="persistent"), idx,
                                    cases=range(persistent_cases), M=M, limit=None)
        res.tables["maxreg_sweep_persistent"] = (("case", "family", "T", "ratio"), list(pers.rows()))
        res.notes.append("persistent forcing reported separately: ratios stay bounded but drift with T")


@_timed(4, "half-space reflection", "halfspace")
def halfspace(res, oracle_cases: int = 50, audit_cases: int = 10, sweep_cases: int = 10, M: int = 256,
              seed=_rng.DEFAULT_SEED, baseline=None):
    trace, parity = 0.0, {}
    parity_ok = True
    for c in range(audit_cases):
        prob = random_half_problem(c, 1.0, seed)
        sol = solve_half(prob, TimeGrid.hybrid(1.0, 64))
        trace = max(trace, sol.boundary_trace())
        try:
            rep = parity_audit(sol)
            for k, v in rep.deviations.items():
                parity[k] = max(parity.get(k, 0.0), v)
        except ParityError as exc:
            parity_ok = False
            res.notes.append(str(exc))
    res.at_most("boundary trace sup over instants", trace, 1e-12)
    for k, v in sorted(parity.items()):
        res.at_most(f"parity audit: {k}", v, 1e-9)
    if not parity_ok:
        res.claim("parity audit raised", math.nan, False, "no ParityError")
    gaps = [oracle_gap(random_half_problem(c, 1.0, seed), TimeGrid.hybrid(1.0, 64)) for c in range(oracle_cases)]
    res.tables["oracle_gap"] = (("case", "gap"), list(enumerate(gaps)))
    res.at_most(f"sine-transform oracle gap over {oracle_cases} cases", max(gaps), 1e-10)
    sweep = half_t_sweep(range(sweep_cases), seed=seed, M=M)
    rows = [(c, T, r) for c, rs in sweep.items() for T, r in zip((1.0, 4.0, 16.0, 64.0), rs)]
    res.tables["half_sweep"] = (("case", "T", "ratio"), rows)
    var = max(max(r) / min(r) for r in sweep.values())
    res.claim("half-space max-regularity ratio variation over T", var, var < 1.5, "< 1.5")


@_timed(5, "whole-space kernel decay", "decay")
def kernel_decay(res, seed=_rng.DEFAULT_SEED, baseline=None):
    f2 = whole_box_kernel_decay(2, 256, 64.0)
    f3 = whole_box_kernel_decay(3, 96, 48.0)
    res.tables["kernel_decay"] = (("n",) + tuple(f2.CSV_HEADER), [(2, *f2.csv_row()), (3, *f3.csv_row())])
    res.within("2D L1 -> Linf slope", f2.value, -1.0, 0.03)
    res.within("3D L1 -> Linf slope (spectral, N=96)", f3.value, -1.5, 0.05)


@_timed(6, "bounded-domain exponential decay", "decay")
def bounded_decay(res, annulus_N: int = 257, seed=_rng.DEFAULT_SEED, baseline=None):
    rows = []
    m = build_mask("box", 1, 200)
    X = m.coords()[0]
    s = fd_solve(m, FDSolverConfig(dt=1e-4), np.where(m.interior, np.sin(np.pi * X), 0.0), 0.5,
                 observers={"l2": lambda u: fd_norm(u, 2, m)})
    f = exp_decay_fit(s, "l2")
    rows.append(("interval", *f.csv_row()))
    res.within("1D rate vs nu pi^2", f.value, np.pi**2, 0.02)

    m = build_mask("box", 2, 65)
    X, Y = m.coords()
    s = fd_solve(m, FDSolverConfig(dt=1e-3), np.where(m.interior, np.sin(np.pi * X) * np.sin(np.pi * Y), 0.0),
                 0.3, observers={"l2": lambda u: fd_norm(u, 2, m)})
    f = exp_decay_fit(s, "l2")
    rows.append(("square", *f.csv_row()))
    res.within("2D square rate vs 2 nu pi^2", f.value, 2 * np.pi**2, 0.03)

    side, a, b = 2.1, 0.5, 1.0
    m = build_mask("annulus", 2, annulus_N, side=side, radius=b, inner=a)
    X, Y = m.coords()
    r = np.hypot(X - side / 2, Y - side / 2)
    s = fd_solve(m, FDSolverConfig(dt=1e-3), np.where(m.interior, np.sin(np.pi * (r - a) / (b - a)), 0.0),
                 0.3, observers={"l2": lambda u: fd_norm(u, 2, m)})
    f = exp_decay_fit(s, "l2")
    rows.append(("annulus", *f.csv_row()))
    res.within("annulus rate vs Bessel cross-product eigenvalue", f.value, annulus_eigenvalue(a, b) ** 2, 0.05)
    res.tables["bounded_decay"] = (("geometry", "t1", "t2", "rate", "target", "r2"),
                                   [(g, fr[6], fr[7], fr[3], fr[4], fr[5]) for g, *fr in rows])


@functools.lru_cache(maxsize=2)
def exterior_run(N: int = 48, side: float = 47.0, radius: float = 3.0, offset: float = 5.0,
                 width: float = 2.0, aux_N: int = 32, p_loc: float = 1.2):
    """The single 3D box-minus-ball run shared by the decay and localized-norm checks."""
    mask = build_mask("box_minus_ball", 3, N, side=side, radius=radius)
    c = np.asarray(mask.center)
    u0 = ball_bump(mask, c + np.array([offset, 0.0, 0.0]), width)
    K = mask.K_mask()
    loc = LocalizedNorm(mask, BesovIndex(0.0, p_loc, 1.0), aux_N=aux_N)
    obs = {"linf_K": lambda u: fd_norm(u, math.inf, mask, K), "l1": lambda u: fd_norm(u, 1.0, mask),
           "besov_K": loc}
    return fd_solve(mask, FDSolverConfig(dt=0.01, dt_rel=0.02), u0, far_horizon(side), observers=obs)


@_timed(7, "exterior-proxy algebraic decay", "exterior")
def exterior_decay(res, N: int = 48, seed=_rng.DEFAULT_SEED, baseline=None):
    sol = exterior_run(N)
    f = algebraic_decay_fit(sol, "linf_K", 1.0, math.inf)
    res.tables["exterior_decay"] = (f.CSV_HEADER, [f.csv_row()])
    res.tables["exterior_series"] = (("t", "linf_K", "l1", "besov_K"),
                                     list(zip(sol.times, sol.series["linf_K"], sol.series["l1"],
                                              sol.series["besov_K"])))
    res.within("3D box-minus-ball L1 -> Linf(K) slope on [1, T_far]", f.value, -1.5, 0.20)


@_timed(8, "absorption criterion", "absorb")
def absorption(res, points: int = 200, seed=_rng.DEFAULT_SEED, baseline=None):
    rows = []
    mismatches, worst = 0, 0.0
    for n, p, eps in absorption_lattice(points, seed):
        r = absorption_integral(n, p, eps)
        want = (n / 2) * (1 / p - eps) - 1 > 0
        mismatches += r.converges != want
        if r.converges:
            worst = max(worst, r.relative_gap)
        rows.append((n, p, eps, r.exponent, r.converges, r.value, r.closed_form))
    res.tables["absorption"] = (("n", "p", "eps", "exponent", "converges", "value", "closed_form"), rows)
    res.claim(f"flag mismatches on {points}-point lattice", mismatches, mismatches == 0, "== 0")
    res.at_most("closed-form gap on convergent points", worst, 0.01)


@_timed(9, "localized cumulative norm saturation", "exterior")
def localized_saturation(res, N: int = 48, seed=_rng.DEFAULT_SEED, baseline=None):
    sol = exterior_run(N)
    ser = localized_norm_series(sol, "besov_K", 0.0, 1.2)
    T = far_horizon(sol.mask.side) / 2
    ratio = ser.saturation_ratio(T)
    res.notes.extend(ser.notes)
    res.tables["localized"] = (("t", "value", "cumulative"), list(zip(ser.times, ser.values, ser.cumulative)))
    res.at_most(f"3D cumulative B^0_(1.2,1)(K) norm at 2T / at T (T={T:.3g})", ratio, 1.15)
    # dimension gate: a 2D run records the exclusion note instead of asserting
    m2 = build_mask("box_minus_ball", 2, 33, side=31.0, radius=2.0)
    loc = LocalizedNorm(m2, BesovIndex(0.0, 1.2, 1.0))
    s2 = fd_solve(m2, FDSolverConfig(dt=0.05, dt_rel=0.05), ball_bump(m2, np.asarray(m2.center) + [4.0, 0.0], 2.0),
                  2.0, observers={"besov_K": loc})
    gate = localized_norm_series(s2, "besov_K", 0.0, 1.2)
    skipped = DIMENSION_NOTE in gate.notes
    res.notes.append(f"n=2: {DIMENSION_NOTE}")
    res.claim("n=2 skipped with dimension note", float(skipped), skipped, "note present")


@_timed(10, "subsolution comparison and duality", "decay")
def comparison_duality(res, seed=_rng.DEFAULT_SEED, baseline=None):
    masks = [build_mask("box", 1, 200), build_mask("box", 2, 65),
             build_mask("annulus", 2, 129, side=2.1, radius=1.0, inner=0.5),
             build_mask("box_minus_ball", 2, 65, side=1.0, radius=0.1),
             build_mask("box_minus_ball", 3, 24, side=1.0, radius=0.12)]
    rows = []
    worst_v, worst_g = -math.inf, 0.0
    cfg = FDSolverConfig(dt=1e-3)
    for i, m in enumerate(masks):
        gen = _rng.stream(seed, "comparison", i)
        viol = subsolution_check(m, random_interior_data(m, gen, nonnegative=True), 0.02, cfg)
        gap = duality_identity_check(m, random_interior_data(m, gen), random_interior_data(m, gen), 0.02, cfg)
        rows.append((m.kind, m.n, m.N, viol, gap))
        worst_v, worst_g = max(worst_v, viol), max(worst_g, gap)
    res.tables["comparison"] = (("kind", "n", "N", "violation", "duality_gap"), rows)
    res.at_most("max subsolution violation over masks", worst_v, 1e-10)
    res.at_most("max duality gap over masks", worst_g, 1e-9)


def lq_monotonicity_violations(cases: int = 20, seed=_rng.DEFAULT_SEED, grid: Grid = Grid(1, 256)) -> int:
    qs = (1.0, 1.5, 2.0, 4.0, math.inf)
    cut = build_cutoffs(grid)
    bad = 0
    for c in range(cases):
        u = band_limited_noise(grid, _rng.stream(seed, "lq", c), k_max=grid.N / 4, k_min=1)
        for s in (-0.5, 0.0, 0.5):
            v = [besov_norm(u, BesovIndex(s, 2.0, q), cut).value for q in qs]
            bad += sum(b > a for a, b in zip(v, v[1:]))
    return bad


def dilation_family(grid: Grid, center, r: float) -> Field:
    """r^4 Delta^2 exp(-|x - c|^2 / r^2), i.e. (Delta^2 psi)((x - c) / r) for a Gaussian psi.

    Four vanishing moments keep the low-band sum of homogeneous norms
    convergent and the Gaussian spectrum leaves nothing above the top band.
    """
    d2 = sum((x - center) ** 2 for x in grid.coords)
    b = Field(grid, np.exp(-d2 / r**2))
    return Field.from_spectrum(grid, r**4 * grid.xi_norm**4 * b.spectrum)


def homogeneity_errors(N: int = 256, L: float = 16 * math.pi, radius: float = 2.0) -> list:
    """|ratio / 2^(s - n/p) - 1| for u(2x) against u, dilating about the torus centre."""
    out = []
    for n in (1, 2):
        g = Grid(n, N, L)
        cut = build_cutoffs(g)
        u = dilation_family(g, g.L / 2, radius)
        v = dilation_family(g, g.L / 2, radius / 2)
        for s in (-0.5, 0.0, 0.5):
            for p in (1.0, 2.0, 4.0):
                idx = BesovIndex(s, p, 1.0)
                r = besov_norm(v, idx, cut).value / besov_norm(u, idx, cut).value
                out.append((n, s, p, r, abs(r / 2.0 ** (s - n / p) - 1)))
    return out


@_timed(11, "Besov toolbox", "besov-suite")
def besov_toolbox(res, cases: int = 100, seed=_rng.DEFAULT_SEED, baseline=None):
    bad = lq_monotonicity_violations(seed=seed)
    res.claim("l^q monotonicity violations", bad, bad == 0, "== 0")
    fd = fd_equivalence_ratios(seed=seed)
    spread = max(fd) / min(fd)
    res.at_most("fd vs LP norm ratio spread", spread, 10.0)
    comp = composition_suite(Nonlinearity.square(), cases, seed)
    res.at_most("u^2 composition ratio (constant 2 ||u||_inf)", comp.envelope, 1 + 1e-9)
    grid = Grid(1, 128, 2 * math.pi)
    excess = max(composition_pointwise_excess(Nonlinearity.square(),
                                              band_limited_noise(grid, _rng.stream(seed, "pointwise", c), 16, 1))
                 for c in range(5))
    res.at_most("u^2 pointwise excess over 2 ||u||_inf |u(y) - u(x)|", excess, 0.0)
    hom = homogeneity_errors()
    res.tables["homogeneity"] = (("n", "s", "p", "ratio", "rel_error"), hom)
    res.at_most("dyadic homogeneity error vs 2^(s - n/p)", max(h[-1] for h in hom), 0.02)
    suites = [product_suite(law, cases, seed) for law in ProductLaw]
    suites += [duality_suite(cases, seed), interpolation_suite(cases, seed), comp]
    env = {s.name: s.envelope for s in suites}
    ext = extension_suite(min(cases, 50), seed)
    env["extension_symmetric"] = symmetric_envelope(ext.ratios)
    env["fd_spread"] = spread
    rows = [row for s in suites + [ext] for row in s.rows()]
    res.tables["besov_suites"] = (("case", "suite", "ratio"), rows)
    res.measured["besov_suites"] = env
    if baseline is not None and "besov_suites" in baseline:
        frozen = baseline["besov_suites"]
        over = [k for k, v in env.items() if k in frozen and v > frozen[k] * (1 + 1e-9)]
        res.claim("suites within frozen envelopes", len(over), not over, "none above")
    res.drift("besov_suites", baseline)


def riccati_times(amplitudes=(0.5, 1.0, 2.0)) -> list:
    g = Grid(1, 32, 2 * math.pi)
    spec = NonlinearSpec(Nonlinearity.square(), Transport.zero())
    out = []
    for a in amplitudes:
        _, v = solve_semilinear(spec, Field(g, np.full(g.shape, a)), 2.0 / a, TimeGrid.hybrid(2.0 / a, 64))
        out.append((a, v.outcome, v.t_star, 1 / a))
    return out


def sine_shape(N: int = 32) -> Field:
    g = Grid(1, N, 2 * math.pi)
    return Field.from_function(g, lambda x: np.sin(x))


@_timed(12, "nonlinear small-data experiments", "nonlinear")
def nonlinear(res, T: float = 100.0, burgers_amplitude: float = 0.5, seeds: str = "1,2", jobs: int = 1,
              seed=_rng.DEFAULT_SEED, baseline=None):
    ric = riccati_times()
    res.tables["riccati"] = (("a", "outcome", "t_star", "exact"), ric)
    err = max(abs(t * a - 1) if t is not None else math.inf for a, _, t, _ in ric)
    res.at_most("Riccati blow-up time relative error for a in {0.5, 1, 2}", err, 0.10)

    g = Grid(1, 64, 2 * math.pi)
    u0 = Field.from_function(g, lambda x: burgers_amplitude * np.sin(x))
    burgers = NonlinearSpec(Nonlinearity.zero(), Transport.burgers())
    times = TimeGrid.hybrid(T, 128)
    _, v = solve_semilinear(burgers, u0, T, times)
    _, lin = solve_semilinear(burgers.linearized(), u0, T, times)
    res.tables["burgers_x"] = (("t", "sup_part", "cum_part"), list(v.x.csv_rows()))
    res.claim(f"small Burgers verdict at T={T:g}", float(v.is_global), v.is_global, "global")
    res.at_most("small Burgers X(T) / linear X(T)", v.x.final() / lin.x.final(), 2.0)

    shape = sine_shape()
    scal = threshold_nu_scaling(Transport.burgers(), shape, T=T, M=64, a0=16.0, jobs=jobs)
    rows = [(nu, r.lo, r.hi, r.width, len(r.probes), r.note) for nu, r in scal.items()]
    base = scal[1.0]
    res.at_most("threshold bracket width (nu=1)", base.width, 0.05)
    spread = 0.0
    for s in (int(x) for x in str(seeds).split(",") if x.strip()):
        r = threshold_search(NonlinearSpec(Nonlinearity.zero(), Transport.burgers()), shape, T=T, M=64,
                             dt=0.05, a0=16.0, seed=s, jobs=jobs)
        rows.append((1.0, r.lo, r.hi, r.width, len(r.probes), f"seed {s} {r.note}".strip()))
        spread = max(spread, abs(r.estimate / base.estimate - 1))
    res.tables["threshold"] = (("nu", "lo", "hi", "width", "probes", "note"), rows)
    res.at_most("threshold estimate spread across seeds", spread, 0.05)
    nus = sorted(scal)
    for a, b in zip(nus, nus[1:]):
        ratio = scal[b].estimate / scal[a].estimate
        res.claim(f"threshold ratio c({b:g}) / c({a:g})", ratio, 1.4 <= ratio <= 2.6, "[1.4, 2.6]")

    false = 0
    damped = NonlinearSpec(Nonlinearity.power(3, -1.0), Transport.zero())
    for amp in (1.0, 3.0, 10.0):
        _, vd = solve_semilinear(damped, Field.from_function(g, lambda x: amp * (np.cos(x) + 0.5)), T, times)
        false += vd.blew_up
        _, vl = solve_semilinear(burgers.linearized(), Field.from_function(g, lambda x: amp * np.cos(3 * x)), T, times)
        false += vl.blew_up
    res.claim("false blow-up reports on damped and linear runs", false, false == 0, "== 0")


CRITERIA = {f.number: f for f in (partition_of_unity, block_decay, t_independence, halfspace, kernel_decay,
                                  bounded_decay, exterior_decay, absorption, localized_saturation,
                                  comparison_duality, besov_toolbox, nonlinear)}

SUBCOMMANDS = {}
for _f in CRITERIA.values():
    SUBCOMMANDS.setdefault(_f.subcommand, []).append(_f.number)
SUBCOMMANDS["threshold"] = []
