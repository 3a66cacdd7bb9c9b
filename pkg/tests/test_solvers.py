import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ive

from conftest import perturbed_equilibrium
from fdfisher.config import SimulationConfig
from fdfisher.functionals import fisher_J
from fdfisher.grids import Field, Grid, GridError
from fdfisher.oracles import counterexample_search, landau_coefficients
from fdfisher.profiles import FDProfileSpec, QuantumParams, fd_equilibrium, fd_profile
from fdfisher.solvers import (
    ClipLedger,
    Flow,
    NumericalError,
    StabilityError,
    fdfp_dt_bound,
    heat_dt_bound,
    landau_dt_bound,
    periodic_wave,
    run_flow,
    simulate,
    step_fdfp,
    step_heat_torus,
    step_landau,
    step_model,
)


def _sup_drift(a, b):
    return np.abs(a.values - b.values).max() / np.abs(b.values).max()


# -- FDFP ------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["line-1d", "tensor-2d"])
def test_fdfp_equilibrium_is_stationary(kind):
    g = Grid(kind, 8, 128)
    mu = fd_equilibrium(QuantumParams(0.2, 1.0), g)
    dt = 0.9 * fdfp_dt_bound(g)
    f = mu
    for _ in range(100):
        f = step_fdfp(f, 0.2, dt)
    assert _sup_drift(f, mu) <= 1e-6


def test_fdfp_equilibrium_stationary_over_unit_time():
    g = Grid("line-1d", 8, 256)
    mu = fd_equilibrium(QuantumParams(0.05, 1.0), g)
    flow = Flow("fdfp", g, 0.05)
    f, _ = flow.advance(mu, 1.0, flow.default_dt, ClipLedger())
    assert _sup_drift(f, mu) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), eps=st.floats(0.0, 0.4))
def test_fdfp_step_conserves_mass(seed, eps):
    g = Grid("tensor-2d", 8, 48)
    f = perturbed_equilibrium(g, eps, seed=seed, amplitude=0.5)
    out = step_fdfp(f, eps, fdfp_dt_bound(g))
    assert out.mass == pytest.approx(f.mass, rel=1e-12)


def test_fdfp_rejects_large_steps_with_bound():
    g = Grid("tensor-2d", 8, 64)
    mu = fd_equilibrium(QuantumParams(0.1), g)
    bound = fdfp_dt_bound(g)
    with pytest.raises(StabilityError, match=f"{bound:.6g}") as info:
        step_fdfp(mu, 0.1, 1.5 * bound)
    assert info.value.bound == bound
    with pytest.raises(ValueError):
        step_fdfp(mu, 0.1, 0.0)
    with pytest.raises(GridError):
        step_fdfp(fd_equilibrium(QuantumParams(0.1), Grid("polar-2d", 8, 16, 8)), 0.1, 1e-6)


def test_clip_ledger_books_violations():
    g = Grid("line-1d", 2, 8)
    values = np.full(g.shape, 0.5)
    values[2], values[4] = -1e-3, 2.0 + 1e-3
    ledger = ClipLedger()
    out = ledger.clip(Field(g, values), 0.5)
    assert out.values.min() == 0 and out.values.max() == 2.0
    assert ledger.count == 2 and ledger.max_violation == pytest.approx(1e-3)
    assert ledger.mass > 0
    values[1] = np.nan
    with pytest.raises(NumericalError):
        ledger.clip(Field(g, values), 0.5)


def test_ornstein_uhlenbeck_translate():
    # the Gaussian translate keeps its shape; its centre relaxes as u e^{-t}
    g = Grid("line-1d", 10, 256)
    u = 2.0
    f = fd_profile(FDProfileSpec(1.0, (u,), 0.0), g)
    times = np.linspace(0, 1, 11)
    log = run_flow(Flow("fdfp", g, 0.0), f, times)
    expected = u * u * np.exp(-2 * times) * f.mass
    assert np.allclose(log.series("fisher_J"), expected, rtol=0.02)


def test_fdfp_free_energy_nonincreasing(tensor96):
    f = perturbed_equilibrium(tensor96, 0.2, seed=11, amplitude=0.5)
    log = run_flow(Flow("fdfp", tensor96, 0.2), f, np.linspace(0, 0.5, 11))
    assert np.all(np.diff(log.series("free_energy_H")) <= 0)
    assert max(log.mass_drift) <= 1e-10
    assert log.clip_fraction <= 1e-8


# -- heat on the torus -----------------------------------------------------------------


def test_heat_constant_unchanged_and_bound():
    g = Grid("torus-2d", 3, 32)
    c = Field(g, np.full(g.shape, 0.7))
    assert np.array_equal(step_heat_torus(c, heat_dt_bound(g)).values, c.values)
    assert heat_dt_bound(g) == pytest.approx(0.9 * g.h**2 / 4)
    with pytest.raises(StabilityError):
        step_heat_torus(c, 2 * heat_dt_bound(g))
    with pytest.raises(GridError):
        step_heat_torus(fd_equilibrium(QuantumParams(0.1), Grid("tensor-2d", 4, 8)), 1e-4)


def test_heat_conserves_mass_and_bounds():
    g = Grid("torus-2d", 4, 64)
    f = periodic_wave(g, 0.3)
    out = step_heat_torus(f, heat_dt_bound(g))
    assert out.mass == pytest.approx(f.mass, rel=1e-12)
    assert out.values.max() <= f.values.max() and out.values.min() >= f.values.min()


@pytest.mark.parametrize("kind,j", [("torus-1d", 3), ("torus-2d", 2)])
def test_heat_discrete_fourier_symbol(kind, j):
    g = Grid(kind, math.pi, 64)
    k = math.pi * j / g.extent
    a, c = 0.3, 1.0
    f = Field(g, a * np.cos(k * g.coords[0]) + c)
    flow = Flow("heat", g, 0.3)
    out, steps = flow.advance(f, 0.1, flow.default_dt, ClipLedger())
    dt = 0.1 / steps
    symbol = 4 / g.h**2 * math.sin(k * g.h / 2) ** 2
    expected = a * (1 - dt * symbol) ** steps * np.cos(k * g.coords[0]) + c
    assert np.abs(out.values - expected).max() <= 1e-10


def test_heat_entropy_nonincreasing():
    g = Grid("torus-2d", 4, 64)
    log = run_flow(Flow("heat", g, 0.3), periodic_wave(g, 0.3), np.linspace(0, 0.5, 11))
    assert np.all(np.diff(log.series("entropy_E")) <= 0)
    assert np.all(np.diff(log.series("fisher_I")) <= 0)


# -- rotational model ------------------------------------------------------------------


def test_model_keeps_radial_fields(polar96):
    r = polar96.axes[0][:, None]
    radial = Field(polar96, np.exp(-r * r) * (1 + 0.5 * np.sin(r)) + 0 * polar96.coords[0])
    out = step_model(radial, 0.3, 0.7)
    assert np.abs(out.values - radial.values).max() <= 1e-12
    mu = fd_equilibrium(QuantumParams(0.3, 1.0), polar96)
    assert np.abs(step_model(mu, 0.3, 5.0).values - mu.values).max() <= 1e-12
    with pytest.raises(GridError):
        step_model(fd_equilibrium(QuantumParams(0.1), Grid("tensor-2d", 4, 8)), 0.1, 0.1)


def test_model_conserves_mass_and_damps_modes(polar96):
    f = perturbed_equilibrium(polar96, 0.3, seed=2, amplitude=0.5)
    out = step_model(f, 0.3, 0.05)
    assert out.mass == pytest.approx(f.mass, rel=1e-12)
    r = polar96.axes[0][:, None]
    th = polar96.axes[1][None, :]
    mode = Field(polar96, np.exp(-r * r) * (1 + 0.5 * np.cos(3 * th)))
    damped = step_model(mode, 0.3, 0.1)
    expected = np.exp(-r * r) * (1 + 0.5 * math.exp(-0.9) * np.cos(3 * th))
    assert np.abs(damped.values - expected).max() <= 1e-12


# -- Landau ----------------------------------------------------------------------------


def test_landau_equilibrium_stationary(polar96):
    eps, beta = 0.05, 1.0
    mu = fd_equilibrium(QuantumParams(eps, beta), polar96)
    flow = Flow("landau", polar96, eps, beta)
    f = mu
    for _ in range(100):
        f = flow.step(f, flow.default_dt, ClipLedger())
    assert _sup_drift(f, mu) <= 1e-6
    f, _ = flow.advance(mu, 1.0, flow.default_dt, ClipLedger())
    assert _sup_drift(f, mu) <= 1e-6


def test_landau_conserves_mass_and_rejects_large_steps(polar96):
    eps, beta = 0.05, 1.0
    c = landau_coefficients(eps, beta, 2)
    f = perturbed_equilibrium(polar96, eps, seed=4, amplitude=0.5)
    bound = landau_dt_bound(polar96, c)
    out = step_landau(f, eps, beta, bound, coeffs=c)
    assert out.mass == pytest.approx(f.mass, rel=1e-10)
    with pytest.raises(StabilityError):
        step_landau(f, eps, beta, 3 * bound, coeffs=c)


def _classical_landau_solution(grid, u, coeffs, t, modes=60):
    # at eps = 0 the two parts commute: the translate relaxes as u e^{-nu t}, then
    # angular diffusion damps each Bessel mode of exp(v . w) by e^{-k^2 nu_tilde t}
    w = u * math.exp(-coeffs.nu * t)
    r = grid.axes[0][:, None]
    th = grid.axes[1][None, :]
    series = ive(0, r * w) + 0 * th
    for k in range(1, modes):
        series = series + 2 * ive(k, r * w) * math.exp(-k * k * coeffs.nu_tilde * t) * np.cos(k * th)
    return Field(grid, np.exp(-0.5 * r * r - 0.5 * w * w + r * w) * series)


def test_landau_classical_translate_against_exact_solution(polar96):
    f = fd_profile(FDProfileSpec(1.0, (1.0, 0.0), 0.0), polar96)
    flow = Flow("landau", polar96, 0.0, 1.0)
    times = np.linspace(0, 0.2, 11)
    log = run_flow(flow, f, times)
    exact = [fisher_J(_classical_landau_solution(polar96, 1.0, flow.coeffs, t), 0.0) for t in times]
    assert np.allclose(log.series("fisher_J"), exact, rtol=0.03)
    assert np.abs(_classical_landau_solution(polar96, 1.0, flow.coeffs, 0.0).values - f.values).max() < 1e-12


# -- refinement and driver -------------------------------------------------------------------


def _trajectory_ratio(kind, ns, equation, t, names):
    q = []
    for n in ns:
        g = Grid(kind, 8, n, 64 if kind == "polar-2d" else None)
        u = (1.0, 0.0) if kind == "polar-2d" else (1.0, 0.5)[: g.d]
        f = fd_profile(FDProfileSpec(1.5, u, 0.2), g)
        log = run_flow(Flow(equation, g, 0.2, 1.0), f, [0.0, t])
        q.append([log.series(name)[-1] for name in names])
    q = np.array(q)
    return (q[0] - q[1]) / (q[1] - q[2])


def test_trajectory_functionals_converge_at_second_order():
    for ratio in _trajectory_ratio("tensor-2d", (48, 96, 192), "fdfp", 0.1, ("fisher_J", "fisher_I")):
        assert ratio == pytest.approx(4.0, abs=1.0)
    for ratio in _trajectory_ratio("line-1d", (128, 256, 512), "fdfp", 0.1, ("fisher_J", "free_energy_H")):
        assert ratio == pytest.approx(4.0, abs=1.0)


@pytest.mark.slow
def test_landau_trajectory_converges_at_second_order():
    for ratio in _trajectory_ratio("polar-2d", (48, 96, 192), "landau", 0.02, ("fisher_J", "free_energy_H")):
        assert ratio == pytest.approx(4.0, abs=1.0)


def test_run_flow_validates_times_and_dt(tensor96):
    flow = Flow("fdfp", tensor96, 0.1)
    mu = fd_equilibrium(QuantumParams(0.1), tensor96)
    for times in ([], [0.1, 0.2], [0.0, 0.2, 0.2]):
        with pytest.raises(ValueError):
            run_flow(flow, mu, times)
    with pytest.raises(StabilityError):
        run_flow(flow, mu, [0.0, 0.1], dt=10 * flow.dt_bound)


def test_simulate_equilibrium_has_zero_fisher():
    cfg = SimulationConfig(equation="fdfp", dimension=2, epsilon=0.1, beta=1.0, grid_kind="tensor-2d",
                           grid_n=96, init="equilibrium", t_end=0.2, samples=4)
    log = simulate(cfg)
    assert len(log.snapshots) == 5
    assert np.all(log.series("fisher_J") <= 1e-6)
    assert log.config["equation"] == "fdfp"


def test_simulate_scaled_equilibrium_J_nonincreasing():
    cfg = SimulationConfig(equation="fdfp", dimension=2, epsilon=0.05, mass=6.0, grid_kind="tensor-2d",
                           grid_n=96, init="scaled_equilibrium", init_scale=0.9, t_end=0.5, samples=10)
    log = simulate(cfg)
    J = log.series("fisher_J")
    assert np.all(np.diff(J) < 0)


def test_simulate_counterexample_datum_grows():
    r = counterexample_search(0.2, 2)
    cfg = SimulationConfig(equation="fdfp", dimension=2, epsilon=0.2, beta=1.0, grid_kind="tensor-2d",
                           grid_extent=7 / math.sqrt(r.alpha), grid_n=96, grid_center=(r.u_norm, 0.0),
                           init="fd_profile", init_alpha=r.alpha, init_u=(r.u_norm, 0.0),
                           t_end=1e-3, samples=1)
    log = simulate(cfg)
    J = log.series("fisher_J")
    assert log.snapshots[0].djdt_oracle > 0
    assert J[1] > J[0]
