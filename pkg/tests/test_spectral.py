import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatlab import rng
from heatlab.spectral import (
    PROFILES, Field, Grid, band_field, band_limited_noise, build_cutoffs, dyadic_mode, heat_multiply,
    lp_block, low_freq, partition_sum, partition_tail, verify_partition_of_unity,
)

GRIDS = [Grid(1, 256), Grid(2, 64), Grid(3, 32), Grid(1, 64, 2 * math.pi), Grid(2, 128, 8 * math.pi)]


@pytest.fixture(scope="module")
def g1():
    return Grid(1, 256)


@pytest.fixture(scope="module")
def cut1(g1):
    return build_cutoffs(g1)


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


@pytest.mark.parametrize("bad", [4, 7, 100])
def test_grid_rejects_bad_point_counts(bad):
    with pytest.raises(ValueError, match="power of two"):
        Grid(1, bad)


def test_grid_rejects_nonpositive_period():
    with pytest.raises(ValueError, match="period"):
        Grid(1, 16, 0.0)


def test_insufficient_spectral_range():
    with pytest.raises(ValueError, match="insufficient spectral range"):
        build_cutoffs(Grid(1, 8, 2 * math.pi))


@pytest.mark.parametrize("grid", GRIDS[:3])
def test_round_trip_and_hermitian(grid):
    u = band_limited_noise(grid, rng.stream(1, "rt"), k_max=grid.N // 3)
    back = Field.from_spectrum(grid, u.spectrum)
    assert rel(back.samples, u.samples) < 1e-12
    spec = u.spectrum
    neg = (-np.arange(grid.N)) % grid.N
    flipped = np.conj(spec[np.ix_(*([neg] * grid.n))])
    assert rel(flipped, spec) < 1e-12


def test_bytes_round_trip(tmp_path):
    u = band_limited_noise(Grid(2, 16), rng.stream(2), k_max=5)
    u.save(tmp_path / "u.bin")
    v = Field.load(tmp_path / "u.bin")
    assert v.grid == u.grid and np.array_equal(v.samples, u.samples)
    assert len(u.to_bytes()) == 32 + 8 * 256


@pytest.mark.parametrize("profile", sorted(PROFILES))
def test_cutoff_shape(profile, g1):
    c = build_cutoffs(g1, profile)
    rho = np.linspace(0, 4, 10001)
    chi, phi = c.chi(rho), c.phi(rho)
    assert np.all(np.diff(chi) <= 1e-15)
    assert np.all(chi[rho <= 0.5] == 1) and np.all(chi[rho >= 1] == 0)
    assert np.all((phi >= 0) & (phi <= 1))
    assert np.all(phi[(rho < 0.5) | (rho > 2)] == 0)


def test_cutoff_point_values(cut1):
    assert cut1.chi(0.4) == 1.0
    x = 2 * 0.65 - 1
    assert math.isclose(float(cut1.phi(1.3)), 1 - (10 * x**3 - 15 * x**4 + 6 * x**5), rel_tol=1e-14)
    assert cut1.chi(1.0) == 0.0 and cut1.phi(1.0) == 1.0


def test_telescoping_on_sample_points(cut1):
    rho = np.geomspace(2.0 ** cut1.j_min, 2.0 ** cut1.j_max, 10**4)
    assert np.max(np.abs(partition_sum(cut1, rho) - 1)) < 1e-12
    # sum over bands a..b equals chi(2^{-b-1} rho) - chi(2^{-a} rho)
    rho = np.linspace(0, 20, 10**4)
    a, b = cut1.j_min, cut1.j_max
    expect = cut1.chi(rho * 2.0 ** (-b - 1)) - cut1.chi(rho * 2.0**-a)
    assert np.max(np.abs(partition_sum(cut1, rho) - expect)) < 1e-12


@pytest.mark.parametrize("grid", GRIDS)
def test_partition_of_unity_on_grids(grid):
    c = build_cutoffs(grid)
    assert verify_partition_of_unity(c, grid) <= 1e-10
    assert partition_sum(c, 0.0) == 0.0
    assert 0.0 <= partition_tail(c, grid) < 1.0


def test_single_mode_blocks(g1, cut1):
    u = dyadic_mode(g1, 0)
    assert rel(lp_block(u, 0, cut1).samples, u.samples) < 1e-12
    assert np.max(np.abs(lp_block(Field(g1, np.cos(4.0 * g1.coords[0])), 0, cut1).samples)) < 1e-13
    two = dyadic_mode(g1, -3) + Field(g1, np.cos(g1.coords[0]))
    kept = lp_block(two, -3, cut1)
    assert rel(kept.samples, dyadic_mode(g1, -3).samples) < 1e-12


def test_low_freq_modes(g1, cut1):
    u = dyadic_mode(g1, -2)
    assert rel(low_freq(u, 0, cut1).samples, u.samples) < 1e-12
    assert np.max(np.abs(low_freq(dyadic_mode(g1, 1), 0, cut1).samples)) < 1e-13


def test_band_range_errors(g1, cut1):
    u = dyadic_mode(g1, 0)
    with pytest.raises(ValueError, match="band outside grid resolution"):
        lp_block(u, cut1.j_max + 1, cut1)
    with pytest.raises(ValueError, match="band outside grid resolution"):
        low_freq(u, cut1.j_max + 2, cut1)


@pytest.mark.parametrize("case", range(5))
def test_low_plus_high_reconstructs(case, g1, cut1):
    u = band_limited_noise(g1, rng.stream(3, case), k_max=60, k_min=1)
    k = -1
    total = low_freq(u, k, cut1)
    for j in range(k, cut1.j_max + 1):
        total = total + lp_block(u, j, cut1)
    assert rel(total.samples, u.samples) < 1e-12


@pytest.mark.parametrize("grid", GRIDS[:3])
def test_far_blocks_are_orthogonal(grid):
    c = build_cutoffs(grid)
    u = band_limited_noise(grid, rng.stream(4, grid.n), k_max=grid.N // 2)
    for j in c.bands:
        for jp in c.bands:
            if abs(j - jp) >= 2:
                w = lp_block(lp_block(u, jp, c), j, c)
                assert np.max(np.abs(w.samples)) <= 1e-12 * np.max(np.abs(u.samples))


def test_heat_on_mode_and_identity(g1):
    u = Field(g1, np.cos(0.5 * g1.coords[0]))
    out = heat_multiply(u, 0.3, 2.0)
    assert rel(out.samples, math.exp(-2.0 * 0.3 * 0.25) * u.samples) < 1e-12
    assert heat_multiply(u, 0.0, 1.0) is u
    with pytest.raises(ValueError, match="backward heat rejected"):
        heat_multiply(u, -1e-3, 1.0)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.0, 2.0), t=st.floats(0.0, 2.0), seed=st.integers(0, 2**32 - 1))
def test_semigroup_law(s, t, seed):
    g = Grid(2, 32)
    u = band_limited_noise(g, rng.stream(seed), k_max=12)
    a = heat_multiply(heat_multiply(u, s, 1.0), t, 1.0)
    b = heat_multiply(u, s + t, 1.0)
    assert np.max(np.abs(a.samples - b.samples)) <= 1e-12 * max(np.max(np.abs(b.samples)), 1e-3)


def test_spike_matches_gaussian_kernel():
    g = Grid(1, 1024, 64.0)
    spike = np.zeros(g.shape)
    spike[512] = 1.0 / g.h
    t = 0.5
    out = heat_multiply(Field(g, spike), t, 1.0)
    # kernel by quadrature: periodised Gaussian, sup at the spike location
    images = np.arange(-3, 4) * g.L
    oracle = np.sum(np.exp(-images**2 / (4 * t))) / math.sqrt(4 * math.pi * t)
    assert abs(np.max(out.samples) / oracle - 1) < 0.02
    assert abs(np.max(out.samples) * math.sqrt(4 * math.pi * t) - 1) < 0.02


@pytest.mark.parametrize("j", [-2, 0, 1])
def test_l2_block_decay_bound(j, g1, cut1):
    u = band_field(g1, j, cut1, rng.stream(5, j))
    for t in (0.1, 1.0, 5.0):
        lhs = np.linalg.norm(heat_multiply(u, t, 1.0).samples)
        assert lhs <= math.exp(-t * 4.0**j / 4) * np.linalg.norm(u.samples) * (1 + 1e-9)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_real_in_real_out(seed):
    g = Grid(1, 64)
    u = band_limited_noise(g, rng.stream(seed), k_max=20)
    out = heat_multiply(u, 0.7, 1.3)
    assert np.isrealobj(out.samples)
    spec = out.spectrum
    assert np.max(np.abs(spec[1:] - np.conj(spec[1:][::-1]))) <= 1e-12 * np.max(np.abs(spec))


def test_rng_streams_are_order_independent():
    a = rng.stream(7, "suite", 3).standard_normal(4)
    rng.stream(7, "suite", 2).standard_normal(100)
    b = rng.stream(7, "suite", 3).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, rng.stream(8, "suite", 3).standard_normal(4))
