import math
import warnings

import numpy as np
import pytest

from heatlab.besov import BesovIndex
from heatlab.heat_whole import TimeGrid
from heatlab.nonlinear import (
    BLOWUP, GLOBAL, HypothesisGateWarning, NonlinearSpec, Transport, entry_norm, estimate_chain_audit, eta_P,
    growth_constant, riccati_certificate, solve_semilinear, threshold_search, x_norm,
)
from heatlab.nonlinearities import Nonlinearity
from heatlab.spectral import Field, Grid

G = Grid(1, 64, 2 * math.pi)
BURGERS = NonlinearSpec(Nonlinearity.zero(), Transport.burgers())
HEAT = NonlinearSpec(Nonlinearity.zero(), Transport.zero())


def sine(a=1.0, grid=G):
    return Field(grid, a * np.sin(grid.coords[0]))


def test_spec_validation():
    with pytest.raises(ValueError, match="viscosity"):
        NonlinearSpec(Nonlinearity.zero(), Transport.zero(), nu=0.0)
    with pytest.raises(ValueError, match="P breaks parabolicity"):
        NonlinearSpec(Nonlinearity.zero(), Transport.zero(), P=np.array([[[1.5]]]))
    with pytest.raises(ValueError, match="shape"):
        Transport.general(np.zeros((1, 2)))
    with pytest.raises(ValueError, match="system dimension"):
        solve_semilinear(HEAT, [sine(), sine()], 1.0)
    with pytest.raises(ValueError, match="m >= 2"):
        Nonlinearity.power(1.5)


@pytest.mark.parametrize("f0", [Nonlinearity.square(), Nonlinearity.power(3), Nonlinearity.flame()])
def test_growth_bound(f0):
    C = growth_constant(f0)
    w = np.linspace(-5, 5, 2001)
    assert np.all(np.abs(f0.derivative(w)) <= C * (np.abs(w) ** (f0.m - 1) + np.abs(w)) + 1e-12)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_riccati_blowup_time(a):
    g = Grid(1, 16, 2 * math.pi)
    spec = NonlinearSpec(Nonlinearity.square(), Transport.zero())
    _, v = solve_semilinear(spec, Field(g, np.full(g.shape, a)), 4.0 / a, TimeGrid.uniform(4.0 / a, 64), dt=0.01 / a)
    assert v.blew_up and 0.9 <= v.t_star * a <= 1.1
    assert v.bracket[0] <= v.bracket[1]


def test_zero_data_stays_zero():
    sol, v = solve_semilinear(BURGERS, Field.zeros(G), 10.0, TimeGrid.uniform(10.0, 16))
    assert v.outcome == GLOBAL
    assert all(np.all(f[0].samples == 0) for f in sol.fields)
    assert x_norm(sol, (BesovIndex(0, 1), BesovIndex(0, 2)), warn=False).final() == 0


def test_small_burgers_is_global_and_decays():
    sol, v = solve_semilinear(BURGERS, sine(0.5), 100.0, TimeGrid.hybrid(100.0, 128))
    assert v.is_global and not v.blew_up
    assert sol.sup[-1] < 1e-6 * sol.sup[0]


def test_burgers_keeps_odd_parity():
    sol, _ = solve_semilinear(BURGERS, sine(2.0) + Field(G, 0.7 * np.sin(3 * G.coords[0])), 1.0,
                              TimeGrid.uniform(1.0, 8))
    for comps in sol.fields:
        u = comps[0].samples
        assert np.max(np.abs(u + np.roll(u[::-1], 1))) <= 1e-10 * np.max(np.abs(u))


def test_damping_never_triggers_blowup():
    spec = NonlinearSpec(Nonlinearity.power(3, sign=-1.0), Transport.zero())
    _, v = solve_semilinear(spec, sine(3.0) + 2.0, 20.0, TimeGrid.hybrid(20.0, 64))
    assert not v.blew_up


@pytest.mark.parametrize("spec,tol", [(HEAT, 1e-12), (BURGERS, 1e-8)])
def test_nu_rescaling(spec, tol):
    # u(t) = nu U(nu t) with U the unit-viscosity run from u0 / nu
    nu, T, dt = 2.0, 3.0, 0.02
    u0 = sine(1.5) + Field(G, 0.5 * np.cos(2 * G.coords[0]))
    a, _ = solve_semilinear(spec.with_nu(nu), u0, T, TimeGrid.uniform(T, 12), dt=dt)
    b, _ = solve_semilinear(spec, u0 * (1 / nu), nu * T, TimeGrid.uniform(nu * T, 12), dt=nu * dt)
    scale = np.max(np.abs(u0.samples))
    for x, y in zip(a.fields, b.fields):
        assert np.max(np.abs(x[0].samples - nu * y[0].samples)) <= tol * scale


def test_linear_x_norm_is_homogeneous():
    times = TimeGrid.hybrid(20.0, 64)
    x1 = solve_semilinear(HEAT, sine(1.0), 20.0, times)[1].x.final()
    x3 = solve_semilinear(HEAT, sine(3.0), 20.0, times)[1].x.final()
    assert abs(x3 / (3 * x1) - 1) < 1e-12
    assert x1 >= entry_norm(sine(1.0), (BesovIndex(0, 1), BesovIndex(0, 2)))


def test_dealias_flag_changes_nothing_for_linear_runs():
    times = TimeGrid.uniform(1.0, 4)
    a, _ = solve_semilinear(HEAT, sine(), 1.0, times, dealias=True)
    b, _ = solve_semilinear(HEAT, sine(), 1.0, times, dealias=False)
    assert np.max(np.abs(a.fields[-1][0].samples - b.fields[-1][0].samples)) < 1e-14


def test_hypothesis_gate_warns_but_computes():
    sol, _ = solve_semilinear(BURGERS, sine(0.1), 1.0, TimeGrid.uniform(1.0, 4))
    with pytest.warns(HypothesisGateWarning, match="hypothesis gate"):
        x = x_norm(sol, (BesovIndex(0.5, 2.0), BesovIndex(0.0, 2.0)))
    assert x.final() > 0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        x_norm(sol, (BesovIndex(0.5, 2.0), BesovIndex(0.0, 2.0)), warn=False)


def test_eta_P_surrogate():
    assert eta_P(HEAT, sine()) == 0
    spec = NonlinearSpec(Nonlinearity.zero(), Transport.zero(), P=np.array([[[0.5]]]))
    assert abs(eta_P(spec, sine() + Field(G, np.cos(5 * G.coords[0]))) - 0.5) < 1e-12
    # P shifts the linear symbol to -(nu - 0.5) |xi|^2
    assert np.allclose(spec.symbol(G)[0], -0.5 * G.xi_norm**2)


def test_estimate_chain_audit():
    sol, _ = solve_semilinear(BURGERS, sine(0.5), 10.0, TimeGrid.hybrid(10.0, 64))
    out = estimate_chain_audit(sol)
    assert out["transport"] > 0 and out["f0_first"] == 0 and "lm1_sup" not in out
    assert all(np.isfinite(v) for v in out.values())
    spec = NonlinearSpec(Nonlinearity.power(3, sign=-1.0), Transport.zero())
    sol, _ = solve_semilinear(spec, sine(0.5), 10.0, TimeGrid.hybrid(10.0, 64))
    out = estimate_chain_audit(sol)
    assert out["f0_first"] > 0 and out["lm1_sup"] > 0


def test_estimate_chain_rejects_zero_solution():
    sol, _ = solve_semilinear(BURGERS, Field.zeros(G), 1.0, TimeGrid.uniform(1.0, 4))
    with pytest.raises(ValueError, match="degenerate input"):
        estimate_chain_audit(sol)


def test_riccati_certificate_for_positive_mean():
    spec = NonlinearSpec(Nonlinearity.square(), Transport.zero())
    const = Field(G, np.ones(G.shape))
    assert "no positive threshold" in riccati_certificate(spec, const)
    assert riccati_certificate(spec, sine()) is None
    assert riccati_certificate(BURGERS, const) is None
    r = threshold_search(spec, const)
    assert not r.positive and r.note.startswith("no positive threshold")


def test_degenerate_shape():
    with pytest.raises(ValueError, match="degenerate shape"):
        threshold_search(BURGERS, Field.zeros(G))


def test_budget_exhausted_keeps_honest_bracket():
    r = threshold_search(BURGERS, sine(grid=Grid(1, 32, 2 * math.pi)), T=10.0, budget=2, M=32, dt=0.05)
    assert r.note.startswith("budget exhausted") and len(r.probes) == 2
    assert r.lo <= r.hi


def test_blowup_verdict_carries_bracket():
    g = Grid(1, 16, 2 * math.pi)
    spec = NonlinearSpec(Nonlinearity.square(), Transport.zero())
    sol, v = solve_semilinear(spec, Field(g, np.full(g.shape, 1.0)), 3.0, TimeGrid.uniform(3.0, 30))
    assert v.outcome == BLOWUP and v.x is None
    assert sol.times[-1] <= v.bracket[1]
