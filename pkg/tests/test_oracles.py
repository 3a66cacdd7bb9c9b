import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import perturbed_equilibrium
from fdfisher.functionals import fisher_J
from fdfisher.grids import Field, Grid, GridError
from fdfisher.oracles import (
    F_criterion,
    SearchFailed,
    certificate_field,
    counterexample_integrals,
    counterexample_search,
    d1_components,
    didt_heat_flat,
    djdt_fdfp,
    djdt_fdfp_altform,
    djdt_landau,
    djdt_model,
    landau_coefficients,
    landau_counterexample_search,
    model_counterexample_search,
    model_djdt0,
)
from fdfisher.profiles import FDProfileSpec, QuantumParams, fd_equilibrium, fd_profile, mobility


@pytest.fixture(scope="module")
def cex02():
    return counterexample_search(0.2, 2)


def test_fdfp_oracles_vanish_at_equilibrium(tensor96, polar96):
    for grid in (tensor96, polar96):
        mu = fd_equilibrium(QuantumParams(0.2, 1.3), grid)
        scale = 1 + fisher_J(mu, 0.2)
        assert abs(djdt_fdfp(mu, 0.2)) < 1e-6 * scale
        assert abs(djdt_fdfp_altform(mu, 0.2)) < 1e-6 * scale


def test_fdfp_oracle_classical_translate():
    g = Grid("tensor-2d", 10, 160)
    f = fd_profile(FDProfileSpec(1.0, (1.5, 0.0), 0.0), g)
    assert djdt_fdfp(f, 0.0) == pytest.approx(-2 * 1.5**2 * f.mass, rel=1e-3)


@pytest.mark.parametrize("seed", range(10))
def test_two_forms_agree_on_random_fields(seed, tensor96):
    eps = [0.0, 0.1, 0.2, 0.3][seed % 4]
    f = perturbed_equilibrium(tensor96, eps, seed=seed)
    a, b = djdt_fdfp(f, eps), djdt_fdfp_altform(f, eps)
    assert a == pytest.approx(b, rel=1e-6)


def test_heat_oracle_sign_and_constants():
    g = Grid("torus-2d", 3, 48)
    assert didt_heat_flat(Field(g, np.full(g.shape, 0.4)), 0.3) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(10):
        k = rng.integers(1, 3, 2)
        wave = np.cos(k[0] * np.pi * g.coords[0] / 3) * np.sin(k[1] * np.pi * g.coords[1] / 3)
        f = Field(g, (0.5 + 0.4 * rng.uniform(0.2, 1.0) * wave) / 0.3)
        assert didt_heat_flat(f, 0.3) <= 0
    with pytest.raises(GridError):
        didt_heat_flat(fd_equilibrium(QuantumParams(0.1), Grid("tensor-2d", 4, 16)), 0.1)


def test_model_oracle_radial_fields_vanish(tensor96, polar96):
    for grid in (tensor96, polar96):
        mu = fd_equilibrium(QuantumParams(0.3, 1.0), grid)
        assert abs(djdt_model(mu, 0.3)) < 1e-8
    with pytest.raises(GridError):
        djdt_model(fd_equilibrium(QuantumParams(0.1), Grid("line-1d", 4, 16)), 0.1)


@pytest.mark.parametrize("alpha,u", [(1.0, 2.0), (2.0, 1.5), (0.7, 1.0)])
def test_model_oracle_matches_closed_form(alpha, u):
    eps = 0.3
    g = Grid("tensor-2d", 10, 240)
    f = fd_profile(FDProfileSpec(alpha, (u, 0.0), eps), g)
    assert djdt_model(f, eps) == pytest.approx(model_djdt0(eps, alpha, u), rel=1e-2)


@pytest.mark.parametrize("seed", range(10))
def test_model_growth_bound_on_random_fields(seed, polar96):
    eps = 0.3
    f = perturbed_equilibrium(polar96, eps, seed=seed, amplitude=0.5)
    cap = eps * np.max(polar96.speed2**2 * mobility(f.values, eps)) * fisher_J(f, eps)
    assert 0.5 * djdt_model(f, eps) <= cap


def test_counterexample_classical_limit_has_positive_D1():
    for alpha in (1.0, 10.0, 1e3):
        _, D1 = counterexample_integrals(1e-12, alpha, 2)
        assert D1 > 0


def test_D1_changes_sign_for_eps_02():
    signs = [counterexample_integrals(0.2, 2.0**k, 2)[1] > 0 for k in range(0, 21)]
    assert signs[0] and not signs[-1]
    flip = signs.index(False)
    assert all(signs[:flip]) and not any(signs[flip:])


def test_counterexample_search_certificate(cex02):
    r = cex02
    assert r.positive and r.djdt0 > 0 and r.alpha >= 1
    assert r.recompute() == pytest.approx(r.djdt0, rel=1e-12)
    assert r.u_norm == pytest.approx(2 * r.u_threshold)
    assert r.trace[-1][1] < 0 < r.trace[0][1]


def test_counterexample_grid_cross_check(cex02):
    field = certificate_field(cex02)
    assert field.grid.center[0] == pytest.approx(cex02.u_norm)
    value = djdt_fdfp(field, 0.2)
    assert value > 0
    assert value == pytest.approx(cex02.djdt0, rel=0.25)
    assert djdt_fdfp_altform(field, 0.2) == pytest.approx(value, rel=1e-6)


def test_counterexample_search_fails_classically():
    with pytest.raises(SearchFailed) as info:
        counterexample_search(0.0, 2)
    assert len(info.value.trace) > 10


def test_model_counterexample_search():
    r = model_counterexample_search(0.3, 1.0)
    assert r.positive and r.djdt0 > 0
    assert r.recompute() == pytest.approx(r.djdt0, rel=1e-12)
    assert model_djdt0(0.3, 1.0, 0.0) == 0.0
    g = Grid("tensor-2d", 14, 384)
    f = fd_profile(FDProfileSpec(1.0, (r.u_norm, 0.0), 0.3), g)
    assert djdt_model(f, 0.3) == pytest.approx(r.djdt0, rel=2e-2)
    with pytest.raises(SearchFailed):
        model_counterexample_search(0.3, 1.0, u_max=2.0)


def test_F_criterion_examples(tensor96):
    assert F_criterion(perturbed_equilibrium(tensor96, 0.0, seed=1), 0.0) == 1.0
    eps, beta = 0.05, 1.0
    f = Field(tensor96, 0.9 * fd_equilibrium(QuantumParams(eps, beta), tensor96).values)
    assert F_criterion(f, eps) >= 1 - 4 * eps / beta
    half = Field(tensor96, np.full(tensor96.shape, 0.5 / 0.2))
    assert F_criterion(half, 0.2) < 1


def test_landau_coefficients():
    c0 = landau_coefficients(0.0, 2.0, 2)
    assert c0.nu == pytest.approx(math.pi, rel=1e-12)
    assert c0.nu_tilde == pytest.approx(c0.nu, rel=1e-12)
    c = landau_coefficients(0.1, 1.0, 2)
    g = Grid("tensor-2d", 10, 256)
    assert fd_equilibrium(QuantumParams(0.1, 1.0), g).mass == pytest.approx(c.nu, rel=1e-5)


@settings(max_examples=20, deadline=None)
@given(beta=st.floats(0.1, 10), ratio=st.floats(0, 1))
def test_nu_tilde_below_nu(beta, ratio):
    c = landau_coefficients(ratio * beta, beta, 2)
    assert 0 < c.nu_tilde <= c.nu * (1 + 1e-12)


def test_landau_oracle_classical_translate():
    g = Grid("tensor-2d", 10, 192)
    u = 1.0
    f = fd_profile(FDProfileSpec(1.0, (u, 0.0), 0.0), g)
    c = landau_coefficients(0.0, 1.0, 2)
    # the rotational part of a Gaussian translate dissipates 2|u|^2 mass too
    expected = -2 * c.nu * u * u * f.mass - 2 * c.nu_tilde * u * u * f.mass
    assert djdt_landau(f, 0.0, 1.0) == pytest.approx(expected, rel=1e-3)


def test_landau_oracle_vanishes_at_equilibrium(polar96):
    mu = fd_equilibrium(QuantumParams(0.05, 1.0), polar96)
    assert abs(djdt_landau(mu, 0.05, 1.0)) < 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_landau_decay_bound_on_admissible_fields(seed, tensor96):
    eps, beta = 0.05, 1.0
    mu = fd_equilibrium(QuantumParams(eps, beta), tensor96).values
    rng = np.random.default_rng(seed)
    k = rng.uniform(-1, 1, 2)
    shape = 0.6 + 0.3 * np.cos(k[0] * tensor96.coords[0] + k[1] * tensor96.coords[1])
    f = Field(tensor96, shape * mu)
    c = landau_coefficients(eps, beta, 2)
    bound = -2 * c.nu * (1 - 6 * eps / beta) * fisher_J(f, eps)
    assert djdt_landau(f, eps, beta, c) <= bound


def test_landau_counterexample():
    r = landau_counterexample_search(0.1)
    assert r.positive and r.parts["fdfp"] + r.parts["model"] == pytest.approx(r.djdt0)
    assert r.recompute() == pytest.approx(r.djdt0)


@pytest.mark.parametrize("d", [2, 3])
def test_D1_component_slopes(d):
    alphas = np.logspace(3, 5, 9)
    P, N = np.array([d1_components(0.2, a, d) for a in alphas]).T
    sp = np.polyfit(np.log(alphas), np.log(P), 1)[0]
    sn = np.polyfit(np.log(alphas), np.log(N), 1)[0]
    assert sp == pytest.approx(-d / 2, rel=0.05)
    assert sn == pytest.approx(1 - d / 2, abs=0.05 * max(1.0, abs(1 - d / 2)))
    for a, p, n in zip(alphas, P, N):
        assert p - n == pytest.approx(counterexample_integrals(0.2, a, d)[1], rel=1e-10, abs=1e-14)
