"""Periodic lattices, Fourier multipliers and the dyadic Littlewood-Paley apparatus.

The torus of side ``L`` with ``N`` points per axis stands in for R^n.  Every
operator here is a Fourier multiplier applied to the FFT of the samples, so
linear operations are exact on the lattice (no aliasing is introduced).
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

DEFAULT_PERIOD = 2 * math.pi * 16

#: Field flag: data were antisymmetrised across a plane where they did not vanish.
FLAG_NONCOMPATIBLE_TRACE = 1

_HEADER = struct.Struct("<qqdq")  # n, N, L, flags -> 32 bytes


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on the box [0, L)^n."""

    n: int
    N: int
    L: float = DEFAULT_PERIOD

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"period must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def volume(self) -> float:
        return self.L**self.n

    @property
    def nyquist(self) -> float:
        """Largest resolved frequency per axis, pi N / L."""
        return math.pi * self.N / self.L

    @property
    def fundamental(self) -> float:
        """Smallest nonzero frequency, 2 pi / L."""
        return 2 * math.pi / self.L

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer multi-indices k in [-N/2, N/2)^n, one broadcastable array per axis."""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        out = []
        for axis in range(self.n):
            shape = [1] * self.n
            shape[axis] = self.N
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        """Physical frequencies 2 pi k / L per axis (broadcastable)."""
        return tuple(self.fundamental * k for k in self.wavenumbers)

    @cached_property
    def xi_norm(self) -> np.ndarray:
        sq = np.zeros(self.shape)
        for x in self.xi:
            sq = sq + x**2
        return np.sqrt(sq)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) * self.h
        return tuple(np.meshgrid(*([x] * self.n), indexing="ij"))

    def torus_distance(self, offsets: Sequence[np.ndarray]) -> np.ndarray:
        """Minimal-image length of integer lattice offsets."""
        sq = 0.0
        for d in offsets:
            d = np.mod(d, self.N)
            d = np.minimum(d, self.N - d)
            sq = sq + (d * self.h) ** 2
        return np.sqrt(sq)


class Field:
    """Real samples on a :class:`Grid` with a lazily cached spectrum.

    Fields are immutable: the sample array is copied and marked read-only.
    """

    __slots__ = ("grid", "samples", "flags", "_spectrum")

    def __init__(self, grid: Grid, samples, flags: int = 0):
        arr = np.array(samples, dtype=float)
        if arr.shape != grid.shape:
            raise ValueError(f"samples shape {arr.shape} does not match grid {grid.shape}")
        arr.setflags(write=False)
        self.grid = grid
        self.samples = arr
        self.flags = int(flags)
        self._spectrum = None

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[..., np.ndarray]) -> "Field":
        return cls(grid, np.broadcast_to(func(*grid.coords), grid.shape))

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray, flags: int = 0) -> "Field":
        return cls(grid, np.fft.ifftn(spectrum).real, flags=flags)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            spec = np.fft.fftn(self.samples)
            spec.setflags(write=False)
            self._spectrum = spec
        return self._spectrum

    def with_samples(self, samples) -> "Field":
        return Field(self.grid, samples, flags=self.flags)

    def mean(self) -> float:
        return float(self.samples.mean())

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.samples + other.samples, self.flags | other.flags)
        return Field(self.grid, self.samples + other, self.flags)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.samples - other.samples, self.flags | other.flags)
        return Field(self.grid, self.samples - other, self.flags)

    def __mul__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.samples * other.samples, self.flags | other.flags)
        return Field(self.grid, self.samples * other, self.flags)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.samples, self.flags)

    def __repr__(self):
        return f"Field(n={self.grid.n}, N={self.grid.N}, L={self.grid.L:.6g})"

    # serialization: 32-byte header followed by row-major float64 samples
    def to_bytes(self) -> bytes:
        g = self.grid
        return _HEADER.pack(g.n, g.N, g.L, self.flags) + self.samples.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Field":
        n, N, L, flags = _HEADER.unpack_from(data)
        grid = Grid(int(n), int(N), float(L))
        body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        if body.size != N**n:
            raise ValueError("truncated field payload")
        return cls(grid, body.reshape(grid.shape), flags=flags)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Field":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# --------------------------------------------------------------------------
# transition profiles for the radial cutoff chi

def _cubic(x):
    return x * x * (3 - 2 * x)


def _quintic(x):
    return x**3 * (10 - 15 * x + 6 * x * x)


def _septic(x):
    return x**4 * (35 - 84 * x + 70 * x * x - 20 * x**3)


def _smooth(x):
    # C-infinity step built from exp(-1/x)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1 - x, 1.0)), 0.0)
    return a / (a + b)


PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "cubic": _cubic,
    "quintic": _quintic,
    "septic": _septic,
    "smooth": _smooth,
}


@dataclass(frozen=True)
class DyadicCutoffs:
    """Radial pair (chi, phi) with phi(r) = chi(r/2) - chi(r), plus resolvable bands.

    chi is 1 on [0, 1/2], 0 on [1, inf) and follows ``1 - S(2 r - 1)`` in between,
    where ``S`` is the chosen smoothstep profile.
    """

    profile: str
    j_min: int
    j_max: int

    def chi(self, rho) -> np.ndarray:
        x = np.clip(2.0 * np.asarray(rho, dtype=float) - 1.0, 0.0, 1.0)
        return 1.0 - PROFILES[self.profile](x)

    def phi(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return self.chi(rho / 2.0) - self.chi(rho)

    @property
    def bands(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def check_band(self, j: int):
        if not self.j_min <= j <= self.j_max:
            raise ValueError(
                f"band outside grid resolution: j={j} not in [{self.j_min}, {self.j_max}]"
            )


def band_range(grid: Grid) -> tuple[int, int]:
    """Resolvable bands: 2^(j_max+1) <= Nyquist and 2^j_min <= 2 pi / L.

    The lower end makes the homogeneous sum exhaust every nonzero lattice
    frequency, since all of them satisfy |xi| >= 2 pi / L >= 2^j_min.
    """
    j_max = math.floor(math.log2(grid.nyquist) + 1e-12) - 1
    j_min = math.floor(math.log2(grid.fundamental) + 1e-12)
    return j_min, j_max


def build_cutoffs(grid: Grid, profile: str = "quintic") -> DyadicCutoffs:
    if profile not in PROFILES:
        raise ValueError(f"unknown transition profile {profile!r}; choose from {sorted(PROFILES)}")
    j_min, j_max = band_range(grid)
    if j_max - j_min + 1 < 3:
        raise ValueError(
            f"insufficient spectral range: grid N={grid.N}, L={grid.L:g} hosts bands "
            f"[{j_min}, {j_max}], need at least 3"
        )
    return DyadicCutoffs(profile, j_min, j_max)


# --------------------------------------------------------------------------
# multipliers

def apply_multiplier(u: Field, symbol: np.ndarray) -> Field:
    """Multiply the spectrum of ``u`` by a real even symbol."""
    return Field.from_spectrum(u.grid, u.spectrum * symbol, flags=u.flags)


def lp_block(u: Field, j: int, cutoffs: DyadicCutoffs) -> Field:
    """Littlewood-Paley block: spectrum times phi(2^-j |xi|)."""
    cutoffs.check_band(j)
    return apply_multiplier(u, cutoffs.phi(u.grid.xi_norm * 2.0**-j))


def low_freq(u: Field, k: int, cutoffs: DyadicCutoffs) -> Field:
    """Low-frequency cut-off: spectrum times chi(2^-k |xi|)."""
    if k > cutoffs.j_max + 1:
        raise ValueError(f"band outside grid resolution: k={k} > j_max+1={cutoffs.j_max + 1}")
    return apply_multiplier(u, cutoffs.chi(u.grid.xi_norm * 2.0**-k))


def partition_sum(cutoffs: DyadicCutoffs, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    total = np.zeros_like(rho)
    for j in cutoffs.bands:
        total = total + cutoffs.phi(rho * 2.0**-j)
    return total


def verify_partition_of_unity(cutoffs: DyadicCutoffs, grid: Grid) -> float:
    """Max of |sum_j phi(2^-j |xi|) - 1| over lattice frequencies in the covered annulus."""
    rho = grid.xi_norm
    window = (rho >= 2.0 ** (cutoffs.j_min - 1)) & (rho <= 2.0**cutoffs.j_max)
    if not window.any():
        return 0.0
    return float(np.max(np.abs(partition_sum(cutoffs, rho[window]) - 1.0)))


def partition_tail(cutoffs: DyadicCutoffs, grid: Grid) -> float:
    """Largest partition sum at lattice frequencies above 2^(j_max+1) (uncovered tail)."""
    rho = grid.xi_norm
    above = rho > 2.0 ** (cutoffs.j_max + 1)
    if not above.any():
        return 0.0
    return float(np.max(partition_sum(cutoffs, rho[above])))


def heat_symbol(grid: Grid, t: float, nu: float) -> np.ndarray:
    return np.exp(-nu * t * grid.xi_norm**2)


def heat_multiply(u: Field, t: float, nu: float) -> Field:
    """Exact periodic heat propagation e^{nu t Delta} u."""
    if t < 0:
        raise ValueError(f"backward heat rejected: t={t}")
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    if t == 0:
        return u
    return apply_multiplier(u, heat_symbol(u.grid, t, nu))


def laplacian(u: Field) -> Field:
    return apply_multiplier(u, -u.grid.xi_norm**2)


def gradient(u: Field) -> list[Field]:
    return [Field.from_spectrum(u.grid, 1j * x * u.spectrum) for x in u.grid.xi]


def partial(u: Field, axis: int, order: int = 1) -> Field:
    return Field.from_spectrum(u.grid, (1j * u.grid.xi[axis]) ** order * u.spectrum)


def hessian(u: Field) -> list[Field]:
    """Components d_a d_b u for a <= b, off-diagonal entries listed once."""
    xi = u.grid.xi
    out = []
    for a in range(u.grid.n):
        for b in range(a, u.grid.n):
            out.append(apply_multiplier(u, -xi[a] * xi[b]))
    return out


def hessian_weights(n: int) -> list[float]:
    """Multiplicities matching :func:`hessian` so that Frobenius norms come out right."""
    return [1.0 if a == b else 2.0 for a in range(n) for b in range(a, n)]


def band_limited_noise(grid: Grid, rng: np.random.Generator, k_max: float, k_min: float = 0.0) -> Field:
    """Random real field with spectrum supported in k_min <= |k| <= k_max (integer units)."""
    kn = np.sqrt(sum(k.astype(float) ** 2 for k in grid.wavenumbers))
    mask = (kn <= k_max) & (kn >= k_min)
    noise = rng.standard_normal(grid.shape)
    spec = np.fft.fftn(noise) * mask
    f = Field.from_spectrum(grid, spec)
    scale = np.max(np.abs(f.samples))
    return f if scale == 0 else f * (1.0 / scale)


def band_field(grid: Grid, j: int, cutoffs: DyadicCutoffs, rng: np.random.Generator) -> Field:
    """Random real field whose spectrum sits inside the support of phi(2^-j .)."""
    noise = Field(grid, rng.standard_normal(grid.shape))
    return lp_block(noise, j, cutoffs)


def dyadic_mode(grid: Grid, j: int, axis: int = 0, phase: float = 0.0) -> Field:
    """cos(2^j x_axis + phase): a single mode with |xi| = 2^j exactly, when on the lattice."""
    freq = 2.0**j
    k = freq / grid.fundamental
    if abs(k - round(k)) > 1e-9 or abs(k) >= grid.N / 2:
        raise ValueError(f"|xi| = 2^{j} is not a lattice frequency of {grid}")
    return Field(grid, np.cos(freq * grid.coords[axis] + phase))
