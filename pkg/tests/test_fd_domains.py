import math

import numpy as np
import pytest
import scipy.special

from heatlab import rng
from heatlab.besov import BesovIndex
from heatlab.fd_domains import (
    DIMENSION_NOTE, DIRICHLET, EXTERIOR, INTERIOR, DomainMask, FDSolverConfig, HorizonExhausted,
    LocalizedNorm, absorption_criterion, absorption_integral, absorption_lattice, algebraic_decay_fit,
    annulus_eigenvalue, ball_bump, build_mask, build_partition, duality_identity_check, exp_decay_fit,
    far_horizon, fd_norm, fd_solve, localization_audit, localization_refinement, localized_norm_series,
    random_interior_data, smooth_wall_data, subsolution_check, whole_box_kernel_decay,
)


def l2_observer(mask):
    return {"l2": lambda u: fd_norm(u, 2, mask)}


# ---- masks

def test_box_1d_flags():
    m = build_mask("box", 1, 200)
    assert m.flags[0] == DIRICHLET and m.flags[-1] == DIRICHLET
    assert np.all(m.flags[1:-1] == INTERIOR)


def test_obstacle_node_count_matches_ball_volume():
    m = build_mask("box_minus_ball", 3, 48, side=47.0, radius=6.0)
    box_edge = 48**3 - 46**3
    removed = np.sum(m.flags == EXTERIOR) + np.sum(m.flags == DIRICHLET) - box_edge
    assert abs(removed * m.cell_volume / m.obstacle_volume() - 1) < 0.02
    lo, hi = m.K
    c = np.asarray(m.center) / m.h
    assert all(l < ci - 6 and ci + 6 < h for l, ci, h in zip(lo, c, hi))


def test_annulus_records_topology_note():
    m = build_mask("annulus", 2, 65, side=2.1, radius=1.0, inner=0.5)
    assert any("not simply connected" in n for n in m.notes)
    m.check()


@pytest.mark.parametrize("kwargs,match", [
    (dict(kind="box_minus_ball", n=2, N=33, side=1.0, radius=0.4), "insufficient far-field margin"),
    (dict(kind="box_minus_ball", n=2, N=33, side=1.0), "positive radius"),
    (dict(kind="annulus", n=3, N=17, side=2.1, radius=1.0, inner=0.5), "two-dimensional"),
    (dict(kind="disc", n=2, N=17), "unknown mask kind"),
])
def test_mask_errors(kwargs, match):
    with pytest.raises(ValueError, match=match):
        build_mask(**kwargs)


@pytest.mark.parametrize("kind,kw", [("box", {}), ("box_minus_ball", {"radius": 0.15}),
                                     ("annulus", {"side": 2.1, "radius": 1.0, "inner": 0.5})])
def test_mask_text_round_trip(kind, kw, tmp_path):
    m = build_mask(kind, 2, 65, **kw)
    m.save(tmp_path / "m.txt")
    back = DomainMask.load(tmp_path / "m.txt")
    assert np.array_equal(back.flags, m.flags)
    assert (back.kind, back.N, back.side, back.K) == (m.kind, m.N, m.side, m.K)
    assert back.to_text() == m.to_text()


def test_mask_text_rejects_bad_tokens():
    text = build_mask("box", 1, 10).to_text().replace("I8", "X8")
    with pytest.raises(ValueError, match="bad run-length token"):
        DomainMask.from_text(text)


# ---- solver

def test_solver_preconditions():
    m = build_mask("box", 1, 20)
    with pytest.raises(ValueError, match="must vanish"):
        fd_solve(m, FDSolverConfig(), np.ones(m.shape), 0.1)
    with pytest.raises(ValueError, match="tolerance"):
        FDSolverConfig(rtol=1e-6)


def test_interval_eigenfunction_rate():
    m = build_mask("box", 1, 200)
    X = m.coords()[0]
    s = fd_solve(m, FDSolverConfig(dt=1e-4), np.where(m.interior, np.sin(np.pi * X), 0.0), 0.5,
                 observers=l2_observer(m))
    assert abs(exp_decay_fit(s, "l2").value / np.pi**2 - 1) < 0.02


def test_square_rate():
    m = build_mask("box", 2, 65)
    X, Y = m.coords()
    s = fd_solve(m, FDSolverConfig(dt=1e-3), np.where(m.interior, np.sin(np.pi * X) * np.sin(np.pi * Y), 0.0),
                 0.3, observers=l2_observer(m))
    fit = exp_decay_fit(s, "l2")
    assert abs(fit.value / (2 * np.pi**2) - 1) < 0.03 and fit.target == pytest.approx(2 * np.pi**2)


def test_annulus_eigenvalue_oracle():
    a, b = 0.5, 1.0
    k = annulus_eigenvalue(a, b)
    g = scipy.special.j0(k * a) * scipy.special.y0(k * b) - scipy.special.j0(k * b) * scipy.special.y0(k * a)
    assert abs(g) < 1e-12
    assert abs(k / (math.pi / (b - a)) - 1) < 0.01


def test_unreliable_fit_window():
    m = build_mask("box", 1, 50)
    X = m.coords()[0]
    u0 = np.where(m.interior, np.sin(np.pi * X) + np.sin(20 * np.pi * X), 0.0)
    s = fd_solve(m, FDSolverConfig(dt=1e-4), u0, 0.01, observers=l2_observer(m))
    with pytest.raises(ValueError, match="fit window unreliable"):
        exp_decay_fit(s, "l2", window=(0.0, 0.01), min_r2=0.99999)


@pytest.mark.parametrize("case", range(3))
def test_maximum_principle(case):
    m = build_mask("box_minus_ball", 2, 33, side=1.0, radius=0.15)
    u0 = random_interior_data(m, rng.stream(41, case), nonnegative=True)
    s = fd_solve(m, FDSolverConfig(dt=1e-3), u0, 0.05, observers={"min": lambda u: float(u.min())})
    assert s.series["min"].min() >= -1e-12


def test_steady_state_with_unit_forcing():
    m = build_mask("box", 1, 101)
    X = m.coords()[0]
    s = fd_solve(m, FDSolverConfig(dt=1e-3), np.zeros(m.shape), 5 / np.pi**2, f=1.0)
    exact = X * (1 - X) / 2
    assert np.max(np.abs(s.final - exact)) / exact.max() < 0.01


def test_snapshots_are_hit_exactly():
    m = build_mask("box", 1, 30)
    s = fd_solve(m, FDSolverConfig(dt=0.003), np.zeros(m.shape), 0.1, f=1.0, snapshot_times=[0.05, 0.1])
    assert set(s.snapshots) == {0.05, 0.1}
    assert np.array_equal(s.snapshot(0.1), s.final)
    with pytest.raises(KeyError):
        s.snapshot(0.07)


# ---- algebraic decay

def test_whole_box_kernel_slope():
    fit = whole_box_kernel_decay(2, 256, 64.0)
    assert abs(fit.value + 1) < 0.03
    assert fit.extras["mass_drift"] < 1e-10


def test_equal_exponents_give_no_decay():
    m = build_mask("box_minus_ball", 3, 48, side=47.0, radius=3.0)
    K = m.K_mask()
    s = fd_solve(m, FDSolverConfig(dt=0.01, dt_rel=0.02), np.where(m.interior, 1.0, 0.0), far_horizon(47.0),
                 observers={"linf_K": lambda u: fd_norm(u, math.inf, m, K)})
    fit = algebraic_decay_fit(s, "linf_K", math.inf, math.inf)
    assert fit.target == 0 and abs(fit.value) < 0.05


def test_small_box_exhausts_horizon():
    m = build_mask("box", 1, 30, side=3.0)
    s = fd_solve(m, FDSolverConfig(dt=0.05), np.zeros(m.shape), 2.0, observers=l2_observer(m))
    with pytest.raises(HorizonExhausted, match="far-field horizon exhausted"):
        algebraic_decay_fit(s, "l2", 1.0, math.inf)


# ---- comparison and duality

def test_subsolution_without_obstacle_is_exact():
    m = build_mask("box", 2, 33)
    u0 = random_interior_data(m, rng.stream(42), nonnegative=True)
    assert subsolution_check(m, u0, 0.02, FDSolverConfig(dt=1e-3)) == 0


def test_subsolution_with_obstacle():
    m = build_mask("box_minus_ball", 2, 65, side=1.0, radius=0.1)
    u0 = ball_bump(m, np.asarray(m.center) + [0.2, 0.0], 0.1)
    assert subsolution_check(m, u0, 0.02, FDSolverConfig(dt=1e-3)) <= 1e-10
    with pytest.raises(ValueError, match="nonnegative"):
        subsolution_check(m, -u0, 0.02, FDSolverConfig(dt=1e-3))


def test_duality_identity():
    m = build_mask("box", 1, 200)
    gen = rng.stream(43)
    eta0, zeta0 = random_interior_data(m, gen), random_interior_data(m, gen)
    cfg = FDSolverConfig(dt=1e-3)
    assert duality_identity_check(m, eta0, eta0, 0.02, cfg) <= 1e-12
    assert duality_identity_check(m, eta0, zeta0, 0.02, cfg) <= 1e-10


# ---- absorption

def test_absorption_examples():
    r = absorption_integral(3, 1.2, 0.05)
    assert r.converges and abs(r.exponent - 1.175) < 1e-12
    assert abs(r.value / (1 / 0.175) - 1) < 0.01
    assert not absorption_integral(3, 2.0, 0.05).converges and not absorption_criterion(3, 2.0)
    assert absorption_integral(4, 1.9, 0.01).converges and absorption_criterion(4, 1.9)
    with pytest.raises(ValueError, match="eps must lie"):
        absorption_integral(3, 2.0, 0.6)


def test_absorption_finite_horizon_closed_form():
    r = absorption_integral(3, 1.2, 0.05, T=100.0)
    assert r.relative_gap < 1e-9


def test_absorption_lattice_flags():
    for n, p, eps in absorption_lattice(50):
        r = absorption_integral(n, p, eps)
        assert r.converges == ((n / 2) * (1 / p - eps) > 1)


# ---- localized norms

def test_localized_norm_dimension_gate():
    m = build_mask("box_minus_ball", 2, 33, side=31.0, radius=2.0)
    loc = LocalizedNorm(m, BesovIndex(0.0, 1.2, 1.0))
    s = fd_solve(m, FDSolverConfig(dt=0.1), ball_bump(m, np.asarray(m.center) + [4.0, 0.0], 2.0), 1.0,
                 observers={"besov_K": loc})
    ser = localized_norm_series(s, "besov_K", 0.0, 1.2)
    assert DIMENSION_NOTE in ser.notes
    assert np.all(np.diff(ser.cumulative) >= 0)


# ---- partition of unity

def test_partition_basics():
    m = build_mask("box_minus_ball", 2, 129, side=1.0, radius=0.1)
    pou = build_partition(m, 0.08)
    assert pou.sum_deviation() <= 1e-10 and pou.uncovered() == 0
    far = (10, 10)
    assert pou.weight(0)[far] == 1
    assert all(pou.weight(l)[far] == 0 for l in range(1, pou.count))
    l = pou.boundary_ball()
    w = pou.weight(l)
    X = m.coords()
    r = np.sqrt(sum((Xi - ci) ** 2 for Xi, ci in zip(X, pou.centers[l - 1])))
    assert np.all(w[r >= 0.08] == 0) and w.min() >= 0 and w.max() <= 1
    with pytest.raises(ValueError, match="unresolvable bump"):
        build_partition(m, 0.02)


def test_partition_gradient_law():
    m = build_mask("box_minus_ball", 2, 257, side=1.0, radius=0.2)
    a, b = build_partition(m, 0.08), build_partition(m, 0.04)
    assert abs(b.gradient_sup(1) / a.gradient_sup(1) / 2 - 1) < 0.15


def test_localization_without_obstacle_has_no_commutator():
    m = build_mask("box", 2, 33)
    rep = localization_audit(m, random_interior_data(m, rng.stream(44)), None, 1e-3)
    assert rep.commutator_grad == 0 and rep.commutator_lap == 0 and rep.residual < 1e-9


def test_localization_residual_is_second_order():
    out = localization_refinement()
    assert 1.7 <= out["eta0"]["slope"][0] <= 2.3
    assert 1.7 <= out["ball"]["slope"][0] <= 2.3


def test_smooth_wall_data_vanishes_off_interior():
    m = build_mask("box_minus_ball", 2, 49, side=1.0, radius=0.1)
    v = smooth_wall_data(m)
    assert np.all(v[~m.interior] == 0) and v.max() > 0.5
