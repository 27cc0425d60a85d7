"""Finite-difference Dirichlet heat flow on boxes, box-minus-ball exterior proxies
and annuli.

Geometry lives on a node lattice with ``N`` nodes per axis over ``[0, side]^n``
(spacing ``h = side / (N - 1)``).  Each node is interior, Dirichlet boundary or
exterior; the obstacle is a staircase of nodes.  Time stepping is implicit
Euler with the (2n+1)-point Laplacian, which keeps the discrete maximum and
comparison principles exact.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg
import scipy.special

from . import rng as _rng
from .besov import BesovIndex, besov_norm
from .spectral import Field, Grid, build_cutoffs

EXTERIOR, DIRICHLET, INTERIOR = 0, 1, 2
_LETTER = {INTERIOR: "I", DIRICHLET: "D", EXTERIOR: "E"}
_FLAG = {v: k for k, v in _LETTER.items()}

BOX, BOX_MINUS_BALL, ANNULUS = "box", "box_minus_ball", "annulus"


class FDSolverError(RuntimeError):
    pass


class HorizonExhausted(ValueError):
    pass


# --------------------------------------------------------------------------
# masks

@dataclass
class DomainMask:
    kind: str
    n: int
    N: int
    side: float
    flags: np.ndarray
    center: tuple = ()
    radius: float = 0.0
    inner: float = 0.0
    K: tuple = ()  # (lower index per axis, upper index per axis), inclusive
    notes: list = field(default_factory=list)

    @property
    def h(self) -> float:
        return self.side / (self.N - 1)

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def interior(self) -> np.ndarray:
        return self.flags == INTERIOR

    def coords(self):
        x = np.arange(self.N) * self.h
        return np.meshgrid(*([x] * self.n), indexing="ij")

    def K_mask(self) -> np.ndarray:
        lo, hi = self.K
        m = np.zeros(self.shape, dtype=bool)
        m[tuple(slice(a, b + 1) for a, b in zip(lo, hi))] = True
        return m

    def check(self):
        """Every interior node has only interior or Dirichlet neighbours."""
        inside = self.interior
        for axis in range(self.n):
            for shift in (1, -1):
                nb = np.roll(self.flags, shift, axis=axis)
                if np.any(inside & (nb == EXTERIOR)):
                    raise ValueError("interior node adjacent to an exterior node")
        edge = np.zeros(self.shape, dtype=bool)
        for axis in range(self.n):
            sl = [slice(None)] * self.n
            sl[axis] = [0, self.N - 1]
            edge[tuple(sl)] = True
        if np.any(inside & edge):
            raise ValueError("interior node on the outer box edge")

    def obstacle_volume(self) -> float:
        """Continuum volume of the removed ball (or hole and outside of an annulus)."""
        if self.kind != BOX_MINUS_BALL:
            return 0.0
        return math.pi ** (self.n / 2) / math.gamma(self.n / 2 + 1) * self.radius**self.n

    # plain-text mask files: header lines, then run-length-encoded flags
    def to_text(self) -> str:
        lines = [
            "# heatlab mask",
            f"kind={self.kind}",
            f"n={self.n}",
            f"N={self.N}",
            f"side={self.side!r}",
            "center=" + ",".join(repr(float(c)) for c in self.center),
            f"radius={self.radius!r}",
            f"inner={self.inner!r}",
            "K=" + ";".join(",".join(str(int(v)) for v in part) for part in self.K),
            "flags",
        ]
        flat = self.flags.reshape(-1)
        runs = []
        start = 0
        change = np.nonzero(np.diff(flat))[0] + 1
        for stop in list(change) + [flat.size]:
            runs.append(f"{_LETTER[int(flat[start])]}{stop - start}")
            start = stop
        for i in range(0, len(runs), 16):
            lines.append(" ".join(runs[i : i + 16]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DomainMask":
        header, _, body = text.partition("\nflags\n")
        kv = {}
        for line in header.splitlines():
            if line.startswith("#") or not line.strip():
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
        n, N = int(kv["n"]), int(kv["N"])
        vals = []
        for tok in body.split():
            m = re.fullmatch(r"([IDE])(\d+)", tok)
            if not m:
                raise ValueError(f"bad run-length token {tok!r}")
            vals.extend([_FLAG[m.group(1)]] * int(m.group(2)))
        if len(vals) != N**n:
            raise ValueError("run-length body does not cover the lattice")
        K = tuple(tuple(int(v) for v in part.split(",")) for part in kv["K"].split(";")) if kv.get("K") else ()
        center = tuple(float(c) for c in kv["center"].split(",")) if kv.get("center") else ()
        return cls(kv["kind"], n, N, float(kv["side"]), np.array(vals, dtype=np.int8).reshape((N,) * n),
                   center, float(kv["radius"]), float(kv["inner"]), K)

    def save(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "DomainMask":
        with open(path) as fh:
            return cls.from_text(fh.read())


def build_mask(kind: str, n: int, N: int, side: float = 1.0, radius: float | None = None,
               center: Sequence[float] | None = None, inner: float | None = None) -> DomainMask:
    """Node flags for a box, a box minus a centred ball, or a 2D annulus.

    ``box_minus_ball`` puts the obstacle's nodes adjacent to the fluid on the
    Dirichlet layer and marks ``K`` as the obstacle-centred sub-box of side four
    radii.  ``annulus`` keeps ``inner < |x - c| < radius``.
    """
    if kind not in (BOX, BOX_MINUS_BALL, ANNULUS):
        raise ValueError(f"unknown mask kind {kind!r}")
    h = side / (N - 1)
    c = np.broadcast_to(np.asarray(center if center is not None else side / 2, dtype=float), (n,))
    x = np.arange(N) * h
    X = np.meshgrid(*([x] * n), indexing="ij")
    r = np.sqrt(sum((Xi - ci) ** 2 for Xi, ci in zip(X, c)))
    edge = np.zeros((N,) * n, dtype=bool)
    for axis in range(n):
        sl = [slice(None)] * n
        sl[axis] = [0, N - 1]
        edge[tuple(sl)] = True

    flags = np.full((N,) * n, INTERIOR, dtype=np.int8)
    notes = []
    K = ((1,) * n, (N - 2,) * n)
    rad = 0.0 if radius is None else float(radius)
    inn = 0.0 if inner is None else float(inner)
    if kind == BOX:
        flags[edge] = DIRICHLET
    elif kind == BOX_MINUS_BALL:
        if radius is None or rad <= 0:
            raise ValueError("box_minus_ball needs a positive radius")
        if np.any(c - rad < side / 4) or np.any(c + rad > 3 * side / 4):
            raise ValueError("insufficient far-field margin: obstacle must stay side/4 away from the box")
        solid = r <= rad
        flags[edge] = DIRICHLET
        flags[solid] = EXTERIOR
        near = np.zeros_like(solid)
        for axis in range(n):
            for shift in (1, -1):
                near |= np.roll(~solid, shift, axis=axis)
        flags[solid & near] = DIRICHLET
        lo = np.maximum(np.floor((c - 2 * rad) / h).astype(int), 1)
        hi = np.minimum(np.ceil((c + 2 * rad) / h).astype(int), N - 2)
        K = (tuple(int(v) for v in lo), tuple(int(v) for v in hi))
    else:
        if n != 2:
            raise ValueError("annulus masks are two-dimensional")
        if not 0 < inn < rad:
            raise ValueError("annulus needs 0 < inner < radius")
        if np.any(c - rad < h) or np.any(c + rad > side - h):
            raise ValueError("insufficient far-field margin: annulus leaves the box")
        fluid = (r > inn) & (r < rad)
        flags[:] = EXTERIOR
        near = np.zeros_like(fluid)
        for axis in range(n):
            for shift in (1, -1):
                near |= np.roll(fluid, shift, axis=axis)
        flags[near & ~fluid] = DIRICHLET
        flags[fluid] = INTERIOR
        notes.append("annulus: the hole is not simply connected to the outer boundary")
    mask = DomainMask(kind, n, N, side, flags, tuple(float(v) for v in c), rad, inn, K, notes)
    mask.check()
    return mask


# --------------------------------------------------------------------------
# implicit Euler solver

@dataclass(frozen=True)
class FDSolverConfig:
    """Implicit Euler settings.

    The step is ``max(dt, dt_rel * t)`` capped by ``dt_max``; ``dt_rel > 0``
    gives steps proportional to ``t``, which keeps relative errors of decaying
    norms uniform across a log-log window.  ``solver`` is ``"cg"``,
    ``"direct"`` or ``"auto"`` (direct for fixed steps on small systems).
    """

    dt: float = 1e-3
    dt_rel: float = 0.0
    dt_max: float = math.inf
    solver: str = "auto"
    rtol: float = 1e-12
    maxiter: int = 20000

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if not self.rtol < 1e-8:
            raise ValueError("linear solver tolerance must be below 1e-8")
        if self.solver not in ("auto", "cg", "direct"):
            raise ValueError(f"unknown linear solver {self.solver!r}")


def laplacian_matrix(mask: DomainMask) -> scipy.sparse.csr_matrix:
    """Dirichlet (2n+1)-point Laplacian on the interior unknowns."""
    inside = mask.interior
    index = -np.ones(mask.shape, dtype=np.int64)
    m = int(inside.sum())
    index[inside] = np.arange(m)
    rows = [np.arange(m)]
    cols = [np.arange(m)]
    vals = [np.full(m, -2.0 * mask.n)]
    for axis in range(mask.n):
        for shift in (1, -1):
            nb = np.roll(index, shift, axis=axis)
            ok = inside & (nb >= 0)
            rows.append(index[ok])
            cols.append(nb[ok])
            vals.append(np.ones(int(ok.sum())))
    A = scipy.sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    return A / mask.h**2


@dataclass
class FDSolution:
    mask: DomainMask
    nu: float
    times: np.ndarray
    series: dict
    snapshots: dict
    final: np.ndarray
    steps: list = field(default_factory=list)  # dt per step
    max_residual: float = 0.0

    def snapshot(self, t: float) -> np.ndarray:
        key = min(self.snapshots, key=lambda s: abs(s - t))
        if abs(key - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"no snapshot at t={t}")
        return self.snapshots[key]


class _Stepper:
    def __init__(self, mask: DomainMask, nu: float, config: FDSolverConfig):
        self.mask = mask
        self.nu = nu
        self.cfg = config
        self.L = laplacian_matrix(mask)
        self.m = self.L.shape[0]
        self.eye = scipy.sparse.identity(self.m, format="csr")
        self._lu = {}
        self.max_residual = 0.0

    def method(self) -> str:
        if self.cfg.solver != "auto":
            return self.cfg.solver
        return "direct" if self.cfg.dt_rel == 0 and self.m <= 40000 and self.mask.n < 3 else "cg"

    def step(self, x: np.ndarray, rhs: np.ndarray, dt: float) -> np.ndarray:
        A = self.eye - (dt * self.nu) * self.L
        if self.method() == "direct":
            key = round(dt, 15)
            lu = self._lu.get(key)
            if lu is None:
                if len(self._lu) > 4:
                    self._lu.clear()
                lu = self._lu[key] = scipy.sparse.linalg.splu(A.tocsc())
            y = lu.solve(rhs)
        else:
            y, info = scipy.sparse.linalg.cg(A, rhs, x0=x, rtol=self.cfg.rtol, atol=0.0, maxiter=self.cfg.maxiter)
            if info != 0:
                res = np.linalg.norm(A @ y - rhs) / max(np.linalg.norm(rhs), 1e-300)
                raise FDSolverError(f"linear solver did not converge (info={info}), relative residual {res:.3e}")
        bn = np.linalg.norm(rhs)
        if bn > 0:
            self.max_residual = max(self.max_residual, float(np.linalg.norm(A @ y - rhs) / bn))
        return y


def fd_solve(mask: DomainMask, config: FDSolverConfig, u0: np.ndarray, T: float, nu: float = 1.0,
             f: Callable[[float], np.ndarray] | np.ndarray | None = None,
             observers: dict | None = None, snapshot_times: Sequence[float] = ()) -> FDSolution:
    """Implicit Euler from ``u0`` (full node array, zero off the interior) to ``T``.

    ``observers`` maps names to callables ``u -> float`` evaluated on the full
    node array after every step (and at t = 0); ``snapshot_times`` are hit
    exactly and their states kept.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != mask.shape:
        raise ValueError(f"initial data shape {u0.shape} does not match the mask {mask.shape}")
    inside = mask.interior
    if np.any(u0[~inside] != 0):
        raise ValueError("initial data must vanish on Dirichlet and exterior nodes")
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    stepper = _Stepper(mask, nu, config)
    observers = observers or {}
    marks = sorted(float(s) for s in snapshot_times if 0 < s <= T)

    def full(x):
        out = np.zeros(mask.shape)
        out[inside] = x
        return out

    def forcing(t):
        if f is None:
            return 0.0
        v = f(t) if callable(f) else f
        return np.broadcast_to(np.asarray(v, dtype=float), mask.shape)[inside]

    x = u0[inside].copy()
    t = 0.0
    times = [0.0]
    series = {k: [obs(u0)] for k, obs in observers.items()}
    snaps = {}
    steps = []
    while t < T * (1 - 1e-14):
        dt = min(max(config.dt, config.dt_rel * t), config.dt_max, T - t)
        if marks and t + dt > marks[0] * (1 + 1e-14):
            dt = marks[0] - t
        if T - (t + dt) < 1e-12 * T:
            dt = T - t
        t_new = t + dt
        x = stepper.step(x, x + dt * forcing(t_new), dt)
        t = t_new
        times.append(t)
        steps.append(dt)
        if observers or (marks and abs(t - marks[0]) <= 1e-12 * max(1.0, t)):
            u = full(x)
            for k, obs in observers.items():
                series[k].append(obs(u))
            while marks and abs(t - marks[0]) <= 1e-12 * max(1.0, t):
                snaps[marks.pop(0)] = u.copy()
    return FDSolution(mask, nu, np.array(times), {k: np.array(v) for k, v in series.items()},
                      snaps, full(x), steps, stepper.max_residual)


def fd_norm(u: np.ndarray, p: float, mask: DomainMask, region: np.ndarray | None = None) -> float:
    v = np.abs(u if region is None else u[region])
    if p == math.inf:
        return float(v.max()) if v.size else 0.0
    return float((np.sum(v**p) * mask.cell_volume) ** (1.0 / p))


# --------------------------------------------------------------------------
# decay fits

@dataclass
class DecayFit:
    kind: str            # "algebraic" (log-log slope) or "exponential" (semilog rate)
    window: tuple
    value: float         # slope or rate
    r2: float
    target: float | None = None
    geometry: str = ""
    b: float | None = None
    a: float | None = None
    extras: dict = field(default_factory=dict)

    CSV_HEADER = ("geometry", "b", "a", "slope", "target", "r2", "t1", "t2")

    def csv_row(self):
        return [self.geometry, self.b, self.a, self.value, self.target, self.r2, self.window[0], self.window[1]]

    def relative_error(self) -> float:
        return abs(self.value - self.target) / abs(self.target)


def _linfit(x, y):
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(r2)


def dirichlet_eigenvalue(mask: DomainMask) -> float | None:
    """First Dirichlet eigenvalue of the continuum geometry, when known in closed form."""
    if mask.kind == BOX:
        return mask.n * (math.pi / mask.side) ** 2
    if mask.kind == ANNULUS:
        return annulus_eigenvalue(mask.inner, mask.radius) ** 2
    return None


def annulus_eigenvalue(a: float, b: float) -> float:
    """Smallest k with J0(ka) Y0(kb) - J0(kb) Y0(ka) = 0 (radial Dirichlet mode)."""
    def g(k):
        return scipy.special.j0(k * a) * scipy.special.y0(k * b) - scipy.special.j0(k * b) * scipy.special.y0(k * a)

    guess = math.pi / (b - a)
    ks = np.linspace(0.5 * guess, 1.5 * guess, 400)
    vals = g(ks)
    i = int(np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0][0])
    return float(scipy.optimize.brentq(g, ks[i], ks[i + 1], xtol=1e-14))


def exp_decay_fit(sol: FDSolution, series: str, window: tuple | None = None, min_r2: float = 0.99) -> DecayFit:
    """Semilog fit of a norm series on ``window`` (default [T/2, T]).

    With uniform steps the per-step factor of implicit Euler is inverted,
    ``rate = (e^{r dt} - 1) / dt``, which removes its first-order bias.
    """
    t = sol.times
    T = t[-1]
    lo, hi = window or (T / 2, T)
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    y = sol.series[series][sel]
    slope, r2 = _linfit(t[sel], np.log(y))
    if r2 < min_r2:
        raise ValueError(f"fit window unreliable: R^2 = {r2:.4f}")
    raw = -slope
    rate = raw
    steps = np.asarray(sol.steps)
    if steps.size and np.allclose(steps, steps[0], rtol=1e-9):
        dt = steps[0]
        rate = math.expm1(raw * dt) / dt
    lam = dirichlet_eigenvalue(sol.mask)
    target = None if lam is None else sol.nu * lam
    return DecayFit("exponential", (lo, hi), rate, r2, target, sol.mask.kind, extras={"raw_rate": raw})


def far_horizon(side: float, nu: float = 1.0) -> float:
    """Time before reflections from the artificial outer box reach the centre: (side/4)^2 / (4 nu)."""
    return (side / 4) ** 2 / (4 * nu)


def algebraic_decay_fit(sol: FDSolution, series: str, b: float, a: float,
                        window: tuple | None = None) -> DecayFit:
    """log-log slope of ``series`` on [1, T_far] against -(n/2)(1/b - 1/a)."""
    mask = sol.mask
    t_far = far_horizon(mask.side, sol.nu)
    lo, hi = window or (1.0, min(t_far, sol.times[-1]))
    if lo < 1.0:
        raise ValueError("algebraic fits start at t >= 1")
    hi = min(hi, t_far)
    sel = (sol.times >= lo - 1e-12) & (sol.times <= hi + 1e-12)
    if hi <= lo or sel.sum() < 3:
        raise HorizonExhausted("far-field horizon exhausted: no samples in [1, T_far]")
    slope, r2 = _linfit(np.log(sol.times[sel]), np.log(sol.series[series][sel]))
    inv = lambda q: 0.0 if q == math.inf else 1.0 / q  # noqa: E731
    target = -(mask.n / 2) * (inv(b) - inv(a))
    return DecayFit("algebraic", (lo, hi), slope, r2, target, mask.kind, b, a)


def whole_box_kernel_decay(n: int, N: int, side: float, nu: float = 1.0, t0: float = 0.5,
                           samples: int = 40) -> DecayFit:
    """Spectral (not finite-difference) control: L1 -> L_inf decay of a unit-mass spike.

    Works on any even ``N`` (FFT lattice of ``N^n`` points over a period
    ``side``); fits on [t0, T_far].
    """
    h = side / N
    k = 2 * math.pi * np.fft.fftfreq(N, d=h)
    sq = sum(np.meshgrid(*([k**2] * n), indexing="ij", sparse=True))
    spike = np.zeros((N,) * n)
    spike[(N // 2,) * n] = 1.0 / h**n
    spec = np.fft.fftn(spike)
    t_far = far_horizon(side, nu)
    ts = np.geomspace(t0, t_far, samples)
    sup = []
    mass = []
    for t in ts:
        u = np.fft.ifftn(spec * np.exp(-nu * t * sq)).real
        sup.append(np.max(np.abs(u)))
        mass.append(np.sum(np.abs(u)) * h**n)
    slope, r2 = _linfit(np.log(ts), np.log(sup))
    return DecayFit("algebraic", (t0, t_far), slope, r2, -n / 2, "periodic_box", 1.0, math.inf,
                    extras={"mass_drift": float(max(abs(m - 1.0) for m in mass))})


# --------------------------------------------------------------------------
# comparison and duality

def zero_extend_to_box(mask: DomainMask, u: np.ndarray):
    """Companion obstacle-free box mask and the data extended by zero (a no-op on nodes)."""
    box = build_mask(BOX, mask.n, mask.N, mask.side)
    return box, np.where(mask.interior, u, 0.0)


def subsolution_check(mask: DomainMask, u0: np.ndarray, T: float, config: FDSolverConfig,
                      nu: float = 1.0, samples: int = 8) -> float:
    """max over sampled times and nodes of (eta - eta_bar), eta the masked solution and
    eta_bar the free box solution with the same (zero-extended) data."""
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < 0):
        raise ValueError("subsolution check needs nonnegative data")
    box, ub = zero_extend_to_box(mask, u0)
    marks = list(np.linspace(T / samples, T, samples))
    a = fd_solve(mask, config, u0, T, nu, snapshot_times=marks)
    b = fd_solve(box, config, ub, T, nu, snapshot_times=marks)
    return float(max(np.max(a.snapshots[t] - b.snapshots[t]) for t in a.snapshots))


def duality_identity_check(mask: DomainMask, eta0: np.ndarray, zeta0: np.ndarray, t: float,
                           config: FDSolverConfig, nu: float = 1.0) -> float:
    """|<eta(t), zeta0> - <eta0, zeta(t)>| / max(|<eta(t), zeta0>|, eps)."""
    inside = mask.interior
    for name, d in (("eta0", eta0), ("zeta0", zeta0)):
        if np.any(np.asarray(d)[~inside] != 0):
            raise ValueError(f"{name} must be supported on interior nodes")
    eta = fd_solve(mask, config, eta0, t, nu).final
    zeta = fd_solve(mask, config, zeta0, t, nu).final
    dv = mask.cell_volume
    left = float(np.sum(eta * zeta0) * dv)
    right = float(np.sum(eta0 * zeta) * dv)
    return abs(left - right) / max(abs(left), 1e-300)


def random_interior_data(mask: DomainMask, gen: np.random.Generator, nonnegative: bool = False) -> np.ndarray:
    v = gen.random(mask.shape) if nonnegative else gen.standard_normal(mask.shape)
    return np.where(mask.interior, v, 0.0)


def ball_bump(mask: DomainMask, center, radius: float) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) of unit L1 mass, restricted to interior nodes."""
    X = mask.coords()
    r2 = sum((Xi - ci) ** 2 for Xi, ci in zip(X, center)) / radius**2
    with np.errstate(divide="ignore", over="ignore"):
        v = np.where(r2 < 1, np.exp(1 - 1 / np.where(r2 < 1, 1 - r2, 1.0)), 0.0)
    v = np.where(mask.interior, v, 0.0)
    return v / (v.sum() * mask.cell_volume)


# --------------------------------------------------------------------------
# absorption integral

@dataclass
class AbsorptionResult:
    exponent: float
    value: float
    closed_form: float
    converges: bool

    @property
    def relative_gap(self) -> float:
        if math.isinf(self.value) and math.isinf(self.closed_form):
            return 0.0
        return abs(self.value - self.closed_form) / max(abs(self.closed_form), 1e-300)


def absorption_integral(n: int, p: float, eps: float, T: float = math.inf) -> AbsorptionResult:
    """int_1^T t^{-(n/2)(1/p - eps)} dt by quadrature, with the closed form alongside."""
    if not 0 < eps < 1 / p:
        raise ValueError(f"eps must lie in (0, 1/p), got eps={eps}, p={p}")
    alpha = (n / 2) * (1 / p - eps)
    converges = alpha > 1
    if math.isinf(T):
        closed = 1 / (alpha - 1) if converges else math.inf
    elif abs(alpha - 1) < 1e-14:
        closed = math.log(T)
    else:
        closed = (T ** (1 - alpha) - 1) / (1 - alpha)
    if math.isinf(T) and not converges:
        value = math.inf
    else:
        value, _ = scipy.integrate.quad(lambda t: t**-alpha, 1.0, T, limit=200, epsabs=0, epsrel=1e-10)
    return AbsorptionResult(alpha, float(value), float(closed), converges)


def absorption_criterion(n: int, p: float) -> bool:
    """Integrability of t^{-(n/2)/p} at infinity: p < n/2."""
    return p < n / 2


def absorption_lattice(points: int = 200, seed: int = _rng.DEFAULT_SEED):
    """(n, p, eps) triples covering both sides of the threshold."""
    gen = _rng.stream(seed, "absorption_lattice")
    out = []
    for i in range(points):
        n = int(gen.integers(1, 7))
        p = float(gen.uniform(1.0, 4.0))
        eps = float(gen.uniform(0.0, 1.0 / p) * 0.98 + 0.01 / p)
        out.append((n, p, eps))
    return out


# --------------------------------------------------------------------------
# localized norms on K

@dataclass
class LocalizedSeries:
    times: np.ndarray
    values: np.ndarray
    cumulative: np.ndarray
    notes: list = field(default_factory=list)

    def cumulative_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.cumulative))

    def saturation_ratio(self, T: float) -> float:
        return self.cumulative_at(2 * T) / self.cumulative_at(T)


DIMENSION_NOTE = "dimension excluded: no p > 1 with p < n/2 when n <= 2"


class LocalizedNorm:
    """Besov norm on K: restrict, multiply by a margin bump, zero-extend to a torus.

    The auxiliary torus has power-of-two side count ``aux_N`` with the mask
    spacing; the margin bump equals one on the central part of K and tapers
    over ``margin`` nodes.
    """

    def __init__(self, mask: DomainMask, idx: BesovIndex, margin: int = 2, aux_N: int | None = None):
        self.mask = mask
        self.idx = idx
        lo, hi = (np.asarray(v) for v in mask.K)
        ext = hi - lo + 1
        need = int(ext.max()) + 2 * margin
        self.aux_N = aux_N or 1 << max(3, (need - 1).bit_length())
        self.grid = Grid(mask.n, self.aux_N, self.aux_N * mask.h)
        self.cutoffs = build_cutoffs(self.grid)
        self.sl = tuple(slice(int(a), int(b) + 1) for a, b in zip(lo, hi))
        taper = []
        for e in ext:
            i = np.arange(e)
            d = np.minimum(i, e - 1 - i) / max(margin, 1)
            x = np.clip(d, 0, 1)
            taper.append(x**3 * (10 - 15 * x + 6 * x * x))
        self.bump = np.ones(tuple(ext))
        for axis, w in enumerate(taper):
            shape = [1] * mask.n
            shape[axis] = w.size
            self.bump = self.bump * w.reshape(shape)
        off = (self.aux_N - ext) // 2
        self.place = tuple(slice(int(o), int(o + e)) for o, e in zip(off, ext))

    def __call__(self, u: np.ndarray) -> float:
        aux = np.zeros(self.grid.shape)
        aux[self.place] = u[self.sl] * self.bump
        return besov_norm(Field(self.grid, aux), self.idx, self.cutoffs).value


def localized_norm_series(sol: FDSolution, series: str, s: float, p: float) -> LocalizedSeries:
    """Series of a localized norm recorded during ``fd_solve`` plus its running time integral."""
    notes = []
    n = sol.mask.n
    if not -1 + 1 / p < s < 1 / p - 2 / n:
        notes.append(f"index gate: s={s} outside (-1+1/p, 1/p-2/n)")
    if n <= 2:
        notes.append(DIMENSION_NOTE)
    v = sol.series[series]
    t = sol.times
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    return LocalizedSeries(t, v, cum, notes)


# --------------------------------------------------------------------------
# partition of unity near the obstacle

def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x * x)


class PartitionOfUnity:
    """eta^0 away from the obstacle plus eta^l on balls of radius lam straddling it.

    psi^0 = S((d - lam/2) / (3 lam / 2)) with d the signed distance to the
    obstacle surface; ball centres lie on a lattice of spacing lam/2 with
    |d| <= lam; psi^l = 1 - S(|x - x^l| / lam); eta^l = psi^l / sum psi.
    Weights are computed on demand.
    """

    def __init__(self, mask: DomainMask, lam: float):
        if mask.kind != BOX_MINUS_BALL:
            raise ValueError("partition of unity is built around a ball obstacle")
        if lam < 4 * mask.h:
            raise ValueError(f"unresolvable bump: lambda={lam} < 4h={4 * mask.h}")
        self.mask = mask
        self.lam = lam
        self.X = mask.coords()
        c = np.asarray(mask.center)
        self.dist = np.sqrt(sum((Xi - ci) ** 2 for Xi, ci in zip(self.X, c))) - mask.radius
        step = lam / 2
        axes = [np.arange(ci - mask.radius - 2 * lam, ci + mask.radius + 2 * lam + step, step) for ci in c]
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        dc = np.linalg.norm(pts - c, axis=1) - mask.radius
        self.centers = pts[np.abs(dc) <= lam]
        self._total = None

    @property
    def count(self) -> int:
        return 1 + len(self.centers)

    def _psi(self, l: int, scale: float = 1.0) -> np.ndarray:
        if l == 0:
            return _smoothstep((self.dist - 0.5 * self.lam) / (1.5 * self.lam))
        x = self.centers[l - 1]
        r = np.sqrt(sum((Xi - xi) ** 2 for Xi, xi in zip(self.X, x)))
        return 1.0 - _smoothstep(r / (scale * self.lam))

    def total(self) -> np.ndarray:
        if self._total is None:
            tot = self._psi(0)
            for l in range(1, self.count):
                tot = tot + self._psi(l)
            self._total = tot
        return self._total

    def weight(self, l: int) -> np.ndarray:
        tot = self.total()
        psi = self._psi(l)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, psi / np.where(tot > 0, tot, 1.0), 0.0)

    def companion(self, l: int) -> np.ndarray:
        """Equals 1 on supp eta^l, vanishes beyond twice its radius."""
        if l == 0:
            return _smoothstep(self.dist / (0.5 * self.lam))
        x = self.centers[l - 1]
        r = np.sqrt(sum((Xi - xi) ** 2 for Xi, xi in zip(self.X, x)))
        return 1.0 - _smoothstep((r - self.lam) / self.lam)

    def sum_deviation(self) -> float:
        """max over fluid nodes of |sum_l eta^l - 1|."""
        fluid = self.mask.flags != EXTERIOR
        s = np.zeros(self.mask.shape)
        for l in range(self.count):
            s += self.weight(l)
        return float(np.max(np.abs(s - 1.0)[fluid & (self.total() > 0)]))

    def uncovered(self) -> int:
        return int(np.sum((self.mask.flags != EXTERIOR) & (self.total() <= 0)))

    def gradient_sup(self, k: int = 1, balls_only: bool = True) -> float:
        """max_l ||grad^k eta^l||_inf over fluid nodes by central differences (k = 1 or 2)."""
        h = self.mask.h
        fluid = self.mask.flags != EXTERIOR
        best = 0.0
        for l in range(1 if balls_only else 0, self.count):
            w = self.weight(l)
            if k == 1:
                g = np.sqrt(sum(np.gradient(w, h, axis=a) ** 2 for a in range(self.mask.n)))
            elif k == 2:
                g = np.abs(sum(np.gradient(np.gradient(w, h, axis=a), h, axis=a) for a in range(self.mask.n)))
            else:
                raise ValueError("only k = 1, 2 are measured")
            best = max(best, float(g[fluid].max()))
        return best

    def boundary_ball(self) -> int:
        """Index of a ball whose centre sits closest to the obstacle surface."""
        dc = np.linalg.norm(self.centers - np.asarray(self.mask.center), axis=1) - self.mask.radius
        return 1 + int(np.argmin(np.abs(dc)))


def build_partition(mask: DomainMask, lam: float) -> PartitionOfUnity:
    return PartitionOfUnity(mask, lam)


# --------------------------------------------------------------------------
# localization audit

def _lap_h(w: np.ndarray, h: float) -> np.ndarray:
    out = -2.0 * w.ndim * w
    for a in range(w.ndim):
        out = out + np.roll(w, 1, axis=a) + np.roll(w, -1, axis=a)
    return out / h**2


def _grad_h(w: np.ndarray, h: float) -> list:
    return [(np.roll(w, -1, axis=a) - np.roll(w, 1, axis=a)) / (2 * h) for a in range(w.ndim)]


@dataclass
class LocalizationReport:
    residual: float
    commutator_grad: float
    commutator_lap: float
    weight: int


def localization_audit(mask: DomainMask, u_prev: np.ndarray, pou: PartitionOfUnity | None, dt: float,
                       nu: float = 1.0, weight: int = 0, p: float = 2.0,
                       f: np.ndarray | None = None) -> LocalizationReport:
    """Discrete residual of U = eta u for one implicit step from ``u_prev``.

    With u_t = nu Delta_h u + f on interior nodes, the defect is
    U_t - nu Delta_h U - (eta f - 2 nu grad eta . grad u - nu u Delta eta),
    measured in sup norm over interior nodes away from the outer box; the
    commutator terms are reported in L_p.
    """
    cfg = FDSolverConfig(dt=dt, solver="direct" if mask.n < 3 else "cg")
    u_new = fd_solve(mask, cfg, u_prev, dt, nu, f=f).final
    h = mask.h
    eta = np.ones(mask.shape) if pou is None else pou.weight(weight)
    ff = np.zeros(mask.shape) if f is None else np.broadcast_to(f, mask.shape)
    U_t = eta * (u_new - u_prev) / dt
    lapU = _lap_h(eta * u_new, h)
    g_eta, g_u = _grad_h(eta, h), _grad_h(u_new, h)
    grad_term = 2 * nu * sum(a * b for a, b in zip(g_eta, g_u))
    lap_term = nu * u_new * _lap_h(eta, h)
    res = U_t - nu * lapU - (eta * ff - grad_term - lap_term)
    sel = mask.interior
    return LocalizationReport(
        residual=float(np.max(np.abs(res[sel]))),
        commutator_grad=fd_norm(np.where(sel, grad_term, 0.0), p, mask),
        commutator_lap=fd_norm(np.where(sel, lap_term, 0.0), p, mask),
        weight=weight,
    )


def smooth_wall_data(mask: DomainMask, width: float = 0.3) -> np.ndarray:
    """prod sin(pi x_a / side) times S(d / width), d the distance to the obstacle surface."""
    X = mask.coords()
    d = np.sqrt(sum((Xi - ci) ** 2 for Xi, ci in zip(X, mask.center))) - mask.radius
    v = np.prod([np.sin(np.pi * Xi / mask.side) for Xi in X], axis=0) * _smoothstep(d / width)
    return np.where(mask.interior, v, 0.0)


def localization_refinement(Ns=(48, 96), radius: float = 0.1, lam: float = 0.25, dt: float = 1e-3,
                            nu: float = 1.0) -> dict:
    """Residual of the localized equation for eta^0 and one boundary ball across grids.

    The discrete defect equals -(nu h^2 / 2) sum_a D_a^2 eta D_a^2 u, so the
    refinement slope tends to 2 once lam spans enough nodes for D^2 eta to settle.
    Returns per weight label the residuals and the log2 slope between consecutive grids.
    """
    res = {"eta0": [], "ball": []}
    for N in Ns:
        mask = build_mask(BOX_MINUS_BALL, 2, N, side=1.0, radius=radius)
        pou = build_partition(mask, lam)
        u = smooth_wall_data(mask)
        res["eta0"].append(localization_audit(mask, u, pou, dt, nu, weight=0).residual)
        res["ball"].append(localization_audit(mask, u, pou, dt, nu, weight=pou.boundary_ball()).residual)
    out = {}
    for k, v in res.items():
        slopes = [math.log(a / b) / math.log((nb - 1) / (na - 1))
                  for a, b, na, nb in zip(v, v[1:], Ns, Ns[1:])]
        out[k] = {"residual": v, "slope": slopes}
    return out
