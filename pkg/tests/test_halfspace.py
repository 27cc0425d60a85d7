import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatlab import rng
from heatlab.besov import BesovIndex, lebesgue_norm
from heatlab.halfspace import (
    HalfProblem, ParityError, SlabField, antisym_extend, half_t_sweep, maxreg_report_half, odd_noise,
    oracle_gap, parity_audit, random_half_problem, reflect, solve_half, sym_extend,
)
from heatlab.heat_whole import HeatProblem, TimeGrid, solve_whole
from heatlab.spectral import FLAG_NONCOMPATIBLE_TRACE, Field, Grid

L = 2 * math.pi
G1 = Grid(1, 64, L)
G2 = Grid(2, 32, L)


def test_slab_shape_validation():
    with pytest.raises(ValueError, match="slab samples shape"):
        SlabField(G1, np.zeros(64))


def test_sine_is_already_odd():
    u = SlabField.from_function(G1, lambda x: np.sin(2 * math.pi * x / L))
    ext = antisym_extend(u)
    assert np.max(np.abs(ext.samples - np.sin(G1.coords[0]))) < 1e-15
    assert not ext.flags & FLAG_NONCOMPATIBLE_TRACE


def test_constant_data_flags_trace():
    u = SlabField(G1, np.ones(33))
    ext = antisym_extend(u)
    assert ext.flags & FLAG_NONCOMPATIBLE_TRACE
    assert ext.samples[0] == 0 and ext.samples[1] == 1 and ext.samples[-1] == -1
    sol = solve_half(HalfProblem(1.0, 0.1, u), TimeGrid.uniform(0.1, 4))
    assert "non-compatible trace" in sol.notes


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_reflection_doubles_integrals(seed):
    gen = rng.stream(seed)
    u = SlabField.restrict(odd_noise(G2, gen, 8))
    assert u.boundary_residual() == 0
    assert math.isclose(lebesgue_norm(antisym_extend(u), 2) ** 2, 2 * u.lebesgue_norm(2) ** 2, rel_tol=1e-12)
    v = SlabField(G2, np.abs(u.samples) + 0.5)
    assert math.isclose(lebesgue_norm(sym_extend(v), 1), 2 * v.lebesgue_norm(1), rel_tol=1e-12)


def test_sym_extension_of_cosine_and_one():
    c = SlabField.from_function(G1, lambda x: np.cos(x))
    assert np.max(np.abs(sym_extend(c).samples - np.cos(G1.coords[0]))) < 1e-15
    assert np.all(sym_extend(SlabField(G1, np.ones(33))).samples == 1)


def test_reflect_is_involution():
    v = rng.stream(31).standard_normal(G2.shape)
    assert np.array_equal(reflect(reflect(v)), v)


def test_eigenfunction_decay_1d():
    nu, T = 0.8, 1.5
    u0 = SlabField.from_function(G1, lambda x: np.sin(2 * math.pi * x / L))
    sol = solve_half(HalfProblem(nu, T, u0), TimeGrid.uniform(T, 10))
    lam = nu * (2 * math.pi / L) ** 2
    for t, u in zip(sol.times.instants, sol.fields):
        assert np.max(np.abs(u.samples - math.exp(-lam * t) * u0.samples)) < 1e-12
    assert sol.boundary_trace() < 1e-15


def test_product_eigenfunction_2d():
    u0 = SlabField.from_function(G2, lambda x, y: np.sin(x) * np.sin(y))
    sol = solve_half(HalfProblem(1.0, 1.0, u0), TimeGrid.uniform(1.0, 4))
    assert np.max(np.abs(sol.fields[-1].samples - math.exp(-2.0) * u0.samples)) < 1e-12
    rep = parity_audit(sol, tol=1e-12)
    assert rep.passed


@pytest.mark.parametrize("case", range(6))
def test_matches_sine_transform_oracle(case):
    prob = random_half_problem(case, T=1.0)
    assert oracle_gap(prob, TimeGrid.hybrid(1.0, 64)) < 1e-10


@pytest.mark.parametrize("case", range(4))
def test_random_parity_audit_passes(case):
    sol = solve_half(random_half_problem(case), TimeGrid.hybrid(1.0, 32))
    assert parity_audit(sol, tol=1e-10).passed


def test_even_contamination_breaks_ut_parity():
    bad = Field(G1, np.cos(G1.coords[0]) + np.sin(G1.coords[0]))
    sol = solve_whole(HeatProblem(1.0, 0.5, bad), TimeGrid.uniform(0.5, 4))
    with pytest.raises(ParityError, match="u_t parity"):
        parity_audit(sol)


def test_maxreg_half_extension_ratios():
    prob = random_half_problem(1, T=2.0, grid=G1)
    rep = maxreg_report_half(prob, BesovIndex(0.0, 2.0, 1.0), TimeGrid.hybrid(2.0, 64))
    assert math.isclose(rep.extras["lp_extension_ratio"], math.sqrt(2), rel_tol=1e-12)
    assert rep.extras["boundary_residual"] < 1e-15
    assert 0 < rep.ratio < 10
    with pytest.raises(ValueError, match="index outside"):
        maxreg_report_half(prob, BesovIndex(0.6, 2.0, 1.0))


def test_window_note_on_out_of_window_index():
    sol = solve_half(random_half_problem(0, grid=G1), TimeGrid.uniform(1.0, 4), BesovIndex(0.9, 2.0))
    assert any("index outside" in n for n in sol.notes)


def test_half_sweep_is_flat():
    out = half_t_sweep(cases=range(2), horizons=(1.0, 4.0, 16.0), M=64)
    for r in out.values():
        assert max(r) / min(r) < 1.5
