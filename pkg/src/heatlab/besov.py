"""Besov norms built from Littlewood-Paley blocks, a finite-difference oracle,
and empirical checks of the product, composition, duality, interpolation and
zero-extension estimates.

All norms live on the periodic lattice; "homogeneous" sums the bands
``[j_min, j_max]`` resolved by the grid, "nonhomogeneous" adds ``||S_0 u||_p``
to the bands ``j >= 0``.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import rng as _rng
from .nonlinearities import Nonlinearity
from .spectral import (
    DyadicCutoffs,
    Field,
    Grid,
    band_limited_noise,
    build_cutoffs,
)

HOMOGENEOUS = "homogeneous"
NONHOMOGENEOUS = "nonhomogeneous"

FieldLike = Union[Field, Sequence[Field]]


class InequalityViolated(ArithmeticError):
    """Left side positive while the right side of an estimate vanishes."""


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float
    q: float = 1.0
    flavor: str = HOMOGENEOUS

    def __post_init__(self):
        if not 1 <= self.p <= math.inf or not 1 <= self.q <= math.inf:
            raise ValueError(f"integrability indices must lie in [1, inf], got p={self.p}, q={self.q}")
        if self.flavor not in (HOMOGENEOUS, NONHOMOGENEOUS):
            raise ValueError(f"unknown flavor {self.flavor!r}")

    def shifted(self, ds: float) -> "BesovIndex":
        return BesovIndex(self.s + ds, self.p, self.q, self.flavor)

    def in_trace_window(self) -> bool:
        """-1 + 1/p < s < 1/p."""
        return -1 + 1 / self.p < self.s < 1 / self.p


def conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1)


@dataclass
class NormReport:
    value: float
    band_terms: dict
    tail_estimate: float
    flavor: str
    low_term: float | None = None
    index: BesovIndex | None = None

    @property
    def unreliable(self) -> bool:
        return self.tail_estimate > 0.05 * self.value

    def to_json(self) -> str:
        obj = {
            "value": self.value,
            "bands": {str(j): t for j, t in sorted(self.band_terms.items())},
            "tail": self.tail_estimate,
            "flavor": self.flavor,
        }
        if self.low_term is not None:
            obj["low"] = self.low_term
        return json.dumps(obj, sort_keys=True)


# --------------------------------------------------------------------------
# Lebesgue norms

def _lp(values: np.ndarray, p: float, dv: float) -> float:
    a = np.abs(values)
    if p == math.inf:
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return float(a.sum() * dv)
    m = a.max() if a.size else 0.0
    if m == 0:
        return 0.0
    # scale first so large p does not overflow
    return float(m * (np.sum((a / m) ** p) * dv) ** (1.0 / p))


def _components(u: FieldLike) -> list[Field]:
    return [u] if isinstance(u, Field) else list(u)


def pointwise_magnitude(u: FieldLike, weights: Sequence[float] | None = None) -> np.ndarray:
    comps = _components(u)
    if len(comps) == 1 and weights is None:
        return np.abs(comps[0].samples)
    w = weights or [1.0] * len(comps)
    return np.sqrt(sum(wi * c.samples**2 for wi, c in zip(w, comps)))


def lebesgue_norm(u: FieldLike, p: float, weights: Sequence[float] | None = None) -> float:
    """(sum |u|^p h^n)^(1/p), or the lattice sup for p = inf."""
    comps = _components(u)
    return _lp(pointwise_magnitude(comps, weights), p, comps[0].grid.cell_volume)


def _lq_sum(terms, q: float) -> float:
    terms = np.asarray(list(terms), dtype=float)
    if terms.size == 0:
        return 0.0
    if q == math.inf:
        return float(terms.max())
    if q == 1:
        return float(terms.sum())
    m = terms.max()
    if m == 0:
        return 0.0
    return float(m * np.sum((terms / m) ** q) ** (1.0 / q))


# --------------------------------------------------------------------------
# Besov norms

class _Bands:
    """Per-grid cache of band multipliers."""

    def __init__(self, grid: Grid, cutoffs: DyadicCutoffs):
        rho = grid.xi_norm
        self.grid = grid
        self.cutoffs = cutoffs
        self.phi = {j: cutoffs.phi(rho * 2.0**-j) for j in cutoffs.bands}
        self.low = cutoffs.chi(rho)
        above = 1.0 - cutoffs.chi(rho * 2.0 ** -(cutoffs.j_max + 1))
        self.tail = above


_band_cache: dict = {}


def _bands(grid: Grid, cutoffs: DyadicCutoffs) -> _Bands:
    key = (grid, cutoffs)
    b = _band_cache.get(key)
    if b is None:
        if len(_band_cache) > 32:
            _band_cache.clear()
        b = _band_cache[key] = _Bands(grid, cutoffs)
    return b


def band_norms(u: FieldLike, p: float, cutoffs: DyadicCutoffs | None = None,
               weights: Sequence[float] | None = None) -> dict:
    """Map j -> ||Delta_j u||_p over the resolved bands."""
    comps = _components(u)
    grid = comps[0].grid
    cutoffs = cutoffs or build_cutoffs(grid)
    b = _bands(grid, cutoffs)
    spectra = [c.spectrum for c in comps]
    out = {}
    for j, mult in b.phi.items():
        blocks = [np.fft.ifftn(s * mult).real for s in spectra]
        if len(blocks) == 1 and weights is None:
            mag = np.abs(blocks[0])
        else:
            w = weights or [1.0] * len(blocks)
            mag = np.sqrt(sum(wi * x**2 for wi, x in zip(w, blocks)))
        out[j] = _lp(mag, p, grid.cell_volume)
    return out


def besov_norm(u: FieldLike, idx: BesovIndex, cutoffs: DyadicCutoffs | None = None,
               weights: Sequence[float] | None = None) -> NormReport:
    """Besov (semi-)norm of a scalar field or of a tensor field given by components.

    For tensor fields the pointwise magnitude is the weighted Euclidean norm of
    the components (``weights`` carries multiplicities, e.g. of Hessian entries).
    """
    comps = _components(u)
    grid = comps[0].grid
    cutoffs = cutoffs or build_cutoffs(grid)
    b = _bands(grid, cutoffs)
    norms = band_norms(comps, idx.p, cutoffs, weights)
    if idx.flavor == HOMOGENEOUS:
        terms = {j: 2.0 ** (idx.s * j) * a for j, a in norms.items()}
        low = None
    else:
        terms = {j: 2.0 ** (idx.s * j) * a for j, a in norms.items() if j >= 0}
        lows = [np.fft.ifftn(c.spectrum * b.low).real for c in comps]
        low = _lp(pointwise_magnitude([c.with_samples(x) for c, x in zip(comps, lows)], weights),
                  idx.p, grid.cell_volume)
    value = _lq_sum(terms.values(), idx.q) + (low or 0.0)
    rest = [np.fft.ifftn(c.spectrum * b.tail).real for c in comps]
    rest_norm = _lp(pointwise_magnitude([c.with_samples(x) for c, x in zip(comps, rest)], weights),
                    idx.p, grid.cell_volume)
    tail = 2.0 ** (idx.s * (cutoffs.j_max + 1)) * rest_norm
    return NormReport(value=value, band_terms=terms, tail_estimate=tail,
                      flavor=idx.flavor, low_term=low, index=idx)


def besov_value(u: FieldLike, s: float, p: float, q: float = 1.0, flavor: str = HOMOGENEOUS,
                cutoffs: DyadicCutoffs | None = None) -> float:
    return besov_norm(u, BesovIndex(s, p, q, flavor), cutoffs).value


# --------------------------------------------------------------------------
# finite-difference characterization

FD_DENSE_LIMIT = 2**16
FD_SAMPLED_PAIRS = 2**20


def _check_fd_index(idx: BesovIndex):
    if not 0 < idx.s < 1:
        raise ValueError(f"finite-difference characterization out of range: s={idx.s}")
    if math.isinf(idx.p) or math.isinf(idx.q):
        raise ValueError("finite-difference characterization needs finite p and q")


def _fd_inner_dense(values: np.ndarray, grid: Grid, s: float, p: float) -> np.ndarray:
    """inner[x] = sum_{y != x} |v(y) - v(x)|^p / |y - x|^(n + s p) h^n."""
    n = grid.n
    inner = np.zeros(grid.shape)
    idx_ranges = [range(grid.N)] * n
    for off in itertools.product(*idx_ranges):
        if not any(off):
            continue
        dist = float(grid.torus_distance([np.array(o) for o in off]))
        diff = np.roll(values, shift=[-o for o in off], axis=tuple(range(n))) - values
        inner += np.abs(diff) ** p * (dist ** -(n + s * p))
    return inner * grid.cell_volume


def fd_seminorm(u: Field, idx: BesovIndex, seed: int = _rng.DEFAULT_SEED) -> float:
    """Double-integral (finite-difference) Besov seminorm with torus distances.

    Dense lattice summation up to ``FD_DENSE_LIMIT`` points, stratified random
    subsampling above (see :func:`fd_seminorm_sampled`).
    """
    _check_fd_index(idx)
    grid = u.grid
    if grid.N**grid.n > FD_DENSE_LIMIT:
        return fd_seminorm_sampled(u, idx, seed=seed)[0]
    inner = _fd_inner_dense(u.samples, grid, idx.s, idx.p)
    return float((np.sum(inner ** (idx.q / idx.p)) * grid.cell_volume) ** (1.0 / idx.q))


def fd_seminorm_sampled(u: Field, idx: BesovIndex, seed: int = _rng.DEFAULT_SEED,
                        pairs: int = FD_SAMPLED_PAIRS) -> tuple[float, float]:
    """Stratified Monte Carlo estimate of the finite-difference seminorm.

    Returns ``(value, relative standard error)``.  Anchor points and offsets are
    each drawn one per stratum of the flattened lattice.
    """
    _check_fd_index(idx)
    grid = u.grid
    gen = _rng.stream(seed, "fd_seminorm")
    total = grid.N**grid.n
    n_x = int(math.isqrt(pairs))
    n_d = pairs // n_x

    def stratified(count, lo, hi):
        edges = np.linspace(lo, hi, count + 1)
        return np.floor(edges[:-1] + gen.random(count) * (edges[1:] - edges[:-1])).astype(np.int64)

    xs = stratified(n_x, 0, total)
    flat = u.samples.reshape(-1)
    x_multi = np.array(np.unravel_index(xs, grid.shape))
    inner = np.empty(n_x)
    for i in range(n_x):
        ds = stratified(n_d, 1, total)
        d_multi = np.array(np.unravel_index(ds, grid.shape))
        y_multi = (x_multi[:, i : i + 1] + d_multi) % grid.N
        y_flat = np.ravel_multi_index(tuple(y_multi), grid.shape)
        dist = grid.torus_distance(list(d_multi))
        integrand = np.abs(flat[y_flat] - flat[xs[i]]) ** idx.p * dist ** -(grid.n + idx.s * idx.p)
        inner[i] = integrand.mean() * (total - 1) * grid.cell_volume
    outer_terms = inner ** (idx.q / idx.p)
    mean = outer_terms.mean()
    value = (mean * total * grid.cell_volume) ** (1.0 / idx.q)
    if mean == 0:
        return 0.0, 0.0
    rel_se = outer_terms.std(ddof=1) / math.sqrt(n_x) / mean / idx.q
    return float(value), float(rel_se)


# --------------------------------------------------------------------------
# product estimates

class ProductLaw(enum.Enum):
    """The four a priori product estimates, in their stated order."""

    TAME = 1            # s > 0:  L_inf x b^s
    PARAPRODUCT = 2     # s > 0, t > 0: adds b^{-t}_{inf,r} x b^{s+t}_{p,inf}
    LOW_REGULARITY = 3  # s > -n/p', t > 0: adds b^{n/p'}_{p',inf} x b^s_{p,r}
    CRITICAL = 4        # q > 1, 1 - n/q <= s <= 1: b^s_{n,1} x b^{1-s}_{q,1} -> b^0_{q,1}


def _ratio(lhs: float, rhs: float, what: str) -> float:
    if rhs == 0:
        if lhs > 0:
            raise InequalityViolated(f"inequality violated ({what}): lhs={lhs:g}, rhs=0")
        return 0.0
    return lhs / rhs


def product_estimate_check(u: Field, v: Field, idx: BesovIndex, law: ProductLaw,
                           t: float = 0.5, cutoffs: DyadicCutoffs | None = None) -> float:
    """LHS / RHS of the selected product law with implied constant 1."""
    law = ProductLaw(law)
    grid = u.grid
    n = grid.n
    cutoffs = cutoffs or build_cutoffs(grid)
    s, p, r, fl = idx.s, idx.p, idx.q, idx.flavor

    def nb(w, s_, p_, r_):
        return besov_norm(w, BesovIndex(s_, p_, r_, fl), cutoffs).value

    uv = u * v
    if law is ProductLaw.CRITICAL:
        if not (p > 1 and 1 - n / p <= s <= 1):
            raise ValueError(f"law hypotheses not met: need q > 1 and 1 - n/q <= s <= 1 (s={s}, q={p})")
        lhs = nb(uv, 0.0, p, 1.0)
        rhs = nb(u, s, n, 1.0) * nb(v, 1 - s, p, 1.0)
        return _ratio(lhs, rhs, law.name)

    if law in (ProductLaw.TAME, ProductLaw.PARAPRODUCT) and not s > 0:
        raise ValueError(f"law hypotheses not met: need s > 0 (s={s})")
    if law is not ProductLaw.TAME and not t > 0:
        raise ValueError(f"law hypotheses not met: need t > 0 (t={t})")
    pc = conjugate(p)
    if law is ProductLaw.LOW_REGULARITY and not s > -n / pc:
        raise ValueError(f"law hypotheses not met: need s > -n/p' (s={s}, p={p})")

    u_inf, v_inf = lebesgue_norm(u, math.inf), lebesgue_norm(v, math.inf)
    lhs = nb(uv, s, p, r)
    if law is ProductLaw.TAME:
        rhs = u_inf * nb(v, s, p, r) + v_inf * nb(u, s, p, r)
    else:
        rhs = u_inf * nb(v, s, p, r) + nb(v, -t, math.inf, r) * nb(u, s + t, p, math.inf)
        if law is ProductLaw.LOW_REGULARITY:
            rhs += nb(u, n / pc, pc, math.inf) * nb(v, s, p, r)
    return _ratio(lhs, rhs, law.name)


# --------------------------------------------------------------------------
# composition

def composition_estimate_check(family: Nonlinearity, u: Field, idx: BesovIndex,
                               seed: int = _rng.DEFAULT_SEED) -> float:
    """||f(u)|| / (K ||u||_inf^(m-1) ||u||) with fd seminorms.

    ``K ||u||_inf^(m-1)`` is taken as ``family.lipschitz(||u||_inf)``, which
    coincides with it for pure power growth and is the mean-value bound for the
    flame family.  The pointwise argument makes the result <= 1.
    """
    _check_fd_index(idx)
    base = fd_seminorm(u, idx, seed)
    if base == 0:
        raise DegenerateInput("degenerate input: u has vanishing seminorm")
    fu = Field(u.grid, family(u.samples))
    lip = family.lipschitz(float(np.max(np.abs(u.samples))))
    top = fd_seminorm(fu, idx, seed)
    return _ratio(top, lip * base, f"composition {family.name}")


def composition_pointwise_excess(family: Nonlinearity, u: Field) -> float:
    """max over lattice pairs of |f(u(y)) - f(u(x))| - Lip |u(y) - u(x)| (should be <= 0)."""
    vals = u.samples.reshape(-1)
    fv = family(vals)
    lip = family.lipschitz(float(np.max(np.abs(vals))))
    worst = -math.inf
    for i in range(vals.size):
        excess = np.abs(fv - fv[i]) - lip * np.abs(vals - vals[i])
        scale = 1e-15 * (np.abs(fv) + np.abs(fv[i]) + 1.0)
        worst = max(worst, float(np.max(excess - scale)))
    return worst


# --------------------------------------------------------------------------
# duality, interpolation, zero extension

def pairing(u: Field, v: Field) -> float:
    return float(np.sum(u.samples * v.samples) * u.grid.cell_volume)


def duality_pairing_check(u: Field, v: Field, s: float, p: float,
                          cutoffs: DyadicCutoffs | None = None) -> float:
    """|<u, v>| / (||u||_{B^s_{p,1}} ||v||_{B^{-s}_{p',inf}})."""
    if math.isinf(p):
        raise ValueError("duality check needs finite p")
    cutoffs = cutoffs or build_cutoffs(u.grid)
    den = (besov_norm(u, BesovIndex(s, p, 1.0), cutoffs).value
           * besov_norm(v, BesovIndex(-s, conjugate(p), math.inf), cutoffs).value)
    num = abs(pairing(u, v))
    if den == 0:
        raise DegenerateInput("degenerate input: zero denominator in duality pairing")
    return num / den


def interpolation_check(u: Field, s: float, p: float, cutoffs: DyadicCutoffs | None = None) -> float:
    """||u||_{B^{1+s}} / (||u||_{B^{2+s}}^(1/2) ||u||_{B^s}^(1/2)), nonhomogeneous, third index 1."""
    cutoffs = cutoffs or build_cutoffs(u.grid)

    def nb(sv):
        return besov_norm(u, BesovIndex(sv, p, 1.0, NONHOMOGENEOUS), cutoffs).value

    mid, top, bottom = nb(1 + s), nb(2 + s), nb(s)
    if top == 0 or bottom == 0:
        raise DegenerateInput("degenerate input: u = 0")
    return mid / math.sqrt(top * bottom)


def _box_masks(grid: Grid, lower, upper, margin: float):
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (grid.n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (grid.n,))
    inside = np.ones(grid.shape, dtype=bool)
    core = np.ones(grid.shape, dtype=bool)
    for a, x in enumerate(grid.coords):
        inside &= (x >= lower[a]) & (x <= upper[a])
        core &= (x >= lower[a] + margin) & (x <= upper[a] - margin)
    return inside, core


def extension_by_zero_check(u: Field, idx: BesovIndex, box_lower, box_upper,
                            cutoffs: DyadicCutoffs | None = None) -> float:
    """Ratio of homogeneous to nonhomogeneous norm of a field supported inside a sub-box.

    The field must vanish outside the box shrunk by 4h.
    """
    if not idx.in_trace_window():
        raise ValueError(f"index outside -1+1/p < s < 1/p: s={idx.s}, p={idx.p}")
    grid = u.grid
    _, core = _box_masks(grid, box_lower, box_upper, 4 * grid.h)
    scale = np.max(np.abs(u.samples))
    if scale == 0:
        raise DegenerateInput("degenerate input: u = 0")
    if np.max(np.abs(u.samples[~core])) > 1e-14 * scale:
        raise ValueError("margin violated: support reaches within 4h of the sub-box boundary")
    cutoffs = cutoffs or build_cutoffs(grid)
    hom = besov_norm(u, BesovIndex(idx.s, idx.p, idx.q, HOMOGENEOUS), cutoffs).value
    inh = besov_norm(u, BesovIndex(idx.s, idx.p, idx.q, NONHOMOGENEOUS), cutoffs).value
    return hom / inh


def smooth_bump(grid: Grid, center, radius: float) -> Field:
    """C-infinity radial bump exp(1 - 1/(1 - r^2)) supported in the ball of given radius."""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.n,))
    r2 = sum(((x - c) / radius) ** 2 for x, c in zip(grid.coords, center))
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.where(r2 < 1, np.exp(1.0 - 1.0 / np.where(r2 < 1, 1 - r2, 1.0)), 0.0)
    return Field(grid, vals)


# --------------------------------------------------------------------------
# randomized suites (empirical constants C*)

@dataclass
class SuiteResult:
    name: str
    ratios: list = field(default_factory=list)

    @property
    def envelope(self) -> float:
        return float(max(self.ratios))

    def rows(self):
        return [(i, self.name, r) for i, r in enumerate(self.ratios)]


SUITE_GRID = Grid(1, 256)


def _pair(grid: Grid, seed: int, name: str, case: int, k_max: float):
    gen = _rng.stream(seed, name, case)
    u = band_limited_noise(grid, gen, k_max=k_max, k_min=1)
    v = band_limited_noise(grid, gen, k_max=k_max, k_min=1)
    return u, v


def product_suite(law: ProductLaw, cases: int = 100, seed: int = _rng.DEFAULT_SEED,
                  grid: Grid = SUITE_GRID, idx: BesovIndex | None = None) -> SuiteResult:
    law = ProductLaw(law)
    cutoffs = build_cutoffs(grid)
    if idx is None:
        idx = BesovIndex(0.5, 2.0, 1.0) if law is not ProductLaw.CRITICAL else BesovIndex(0.5, 2.0, 1.0)
    res = SuiteResult(f"product_{law.name.lower()}")
    for c in range(cases):
        u, v = _pair(grid, seed, res.name, c, grid.N / 8)
        res.ratios.append(product_estimate_check(u, v, idx, law, cutoffs=cutoffs))
    return res


def duality_suite(cases: int = 100, seed: int = _rng.DEFAULT_SEED, grid: Grid = SUITE_GRID,
                  s: float = 1 / 3, p: float = 3.0) -> SuiteResult:
    cutoffs = build_cutoffs(grid)
    res = SuiteResult("duality")
    for c in range(cases):
        u, v = _pair(grid, seed, res.name, c, grid.N / 4)
        res.ratios.append(duality_pairing_check(u, v, s, p, cutoffs))
    return res


def interpolation_suite(cases: int = 100, seed: int = _rng.DEFAULT_SEED, grid: Grid = SUITE_GRID,
                        s: float = 0.25, p: float = 2.0) -> SuiteResult:
    cutoffs = build_cutoffs(grid)
    res = SuiteResult("interpolation")
    for c in range(cases):
        u, _ = _pair(grid, seed, res.name, c, grid.N / 4)
        res.ratios.append(interpolation_check(u, s, p, cutoffs))
    return res


def composition_suite(family: Nonlinearity, cases: int = 100, seed: int = _rng.DEFAULT_SEED,
                      grid: Grid = Grid(1, 128, 2 * math.pi)) -> SuiteResult:
    idx = BesovIndex(0.5, 2.0, 2.0)
    res = SuiteResult(f"composition_{family.name}")
    for c in range(cases):
        u, _ = _pair(grid, seed, res.name, c, grid.N / 8)
        res.ratios.append(composition_estimate_check(family, u, idx, seed))
    return res


def extension_suite(cases: int = 50, seed: int = _rng.DEFAULT_SEED, grid: Grid = Grid(1, 256),
                    width: float = 1.0, idx: BesovIndex = BesovIndex(0.25, 2.0, 1.0)) -> SuiteResult:
    """Zero-extension ratios for bumps of fixed support size placed at random."""
    cutoffs = build_cutoffs(grid)
    res = SuiteResult(f"extension_w{width:g}")
    half = width / 2
    box = 4.0 * width
    for c in range(cases):
        gen = _rng.stream(seed, res.name, c)
        center = gen.uniform(box, grid.L - box, size=grid.n)
        u = smooth_bump(grid, center, half)
        lo, hi = center - half - 5 * grid.h, center + half + 5 * grid.h
        res.ratios.append(extension_by_zero_check(u, idx, lo, hi, cutoffs))
    return res


def symmetric_envelope(ratios) -> float:
    """C* with every ratio inside [1/C*, C*]."""
    r = np.asarray(ratios, dtype=float)
    return float(max(r.max(), 1.0 / r.min()))


def fd_equivalence_ratios(cases: int = 20, seed: int = _rng.DEFAULT_SEED,
                          grid: Grid = Grid(1, 256)) -> list:
    """fd seminorm over LP norm (s = 1/2, p = q = 2) for random band-limited fields."""
    idx = BesovIndex(0.5, 2.0, 2.0)
    cutoffs = build_cutoffs(grid)
    out = []
    for c in range(cases):
        gen = _rng.stream(seed, "fd_equivalence", c)
        u = band_limited_noise(grid, gen, k_max=grid.N / 4, k_min=1)
        out.append(fd_seminorm(u, idx) / besov_norm(u, idx, cutoffs).value)
    return out
