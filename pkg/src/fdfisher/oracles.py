"""Closed-form time derivatives of the Fisher functionals and counterexample search.

Grid oracles evaluate the dissipation identities at a single state, with no
time stepping.  Inside them the density gradient is formed by the chain rule
as m * grad(psi), so identities that hold pointwise in the continuum also
hold node by node on the grid.

The radial reducers integrate u-independent quantities of the centred
profile 1/(eps + exp(alpha |w|^2 / 2)) with Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .grids import Field, Grid, GridError
from .profiles import (
    FDProfileSpec,
    RADIAL_CUTOFF,
    equilibrium_mass,
    fd_profile,
    mobility,
    psi,
    radial_integral,
)


class SearchFailed(RuntimeError):
    """No sign change was found; ``trace`` holds the scanned values."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


@dataclass
class CounterexampleResult:
    equation: str
    alpha: float
    u_norm: float
    D0: float
    D1: float
    djdt0: float
    positive: bool
    u_threshold: float = math.nan
    epsilon: float = math.nan
    d: int = 2
    parts: dict = dc_field(default_factory=dict)
    trace: list = dc_field(default_factory=list)

    def recompute(self) -> float:
        """dJ/dt at t = 0 rebuilt from the stored coefficients."""
        if self.equation == "fdfp":
            return fdfp_djdt0(self.alpha, self.u_norm, self.D0, self.D1)
        if self.equation == "model":
            return model_djdt0_from(self.alpha, self.u_norm, self.D0, self.D1, self.d)
        if self.equation == "landau":
            return self.parts["model"] + self.parts["fdfp"]
        raise ValueError(self.equation)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LandauCoefficients:
    nu: float
    nu_tilde: float


# -- shared pointwise state -------------------------------------------------------


def _state(field: Field, epsilon: float):
    g = field.grid
    f = field.values
    m = mobility(f, epsilon)
    p = psi(f, epsilon)
    gpsi = g.gradient(p)
    v = g.frame_velocity
    return g, f, m, p, gpsi, v


def _dot(a, b):
    return np.sum(a * b, axis=0)


def _hs2(H):
    return np.sum(H * H, axis=(0, 1))


def djdt_fdfp(field: Field, epsilon: float) -> float:
    """dJ/dt along the FDFP flow, three-term form.

    -2 * integral of m|D^2 Phi|^2 + m (m' - eps grad f . grad Phi)|grad Phi|^2
    + 2 eps (grad f . grad Phi)^2.
    """
    g, f, m, p, gpsi, v = _state(field, epsilon)
    gphi = gpsi + v
    gf = m * gpsi
    H = g.hessian(p + 0.5 * g.speed2)
    fp = _dot(gf, gphi)
    mp = 1.0 - 2.0 * epsilon * f
    integrand = m * _hs2(H) + m * (mp - epsilon * fp) * _dot(gphi, gphi) + 2.0 * epsilon * fp**2
    return -2.0 * g.integrate(integrand)


def djdt_fdfp_altform(field: Field, epsilon: float) -> float:
    """dJ/dt along the FDFP flow, five-term form with explicit m'' = -2 eps."""
    g, f, m, p, gpsi, v = _state(field, epsilon)
    gphi = gpsi + v
    gf = m * gpsi
    H = g.hessian(p + 0.5 * g.speed2)
    mp = 1.0 - 2.0 * epsilon * f
    mpp = -2.0 * epsilon
    q = _dot(gphi, gphi)
    integrand = (
        2.0 * m * _hs2(H)
        + 2.0 * m * mp * q
        - mpp * _dot(gf, gf) * q
        + 2.0 * mpp * m * _dot(v, gphi) * _dot(gf, gphi)
        - mpp * m * _dot(v, gf) * q
    )
    return -g.integrate(integrand)


def didt_heat_flat(field: Field, epsilon: float) -> float:
    """dI/dt along the heat flow on a flat torus; a sum of squares, never positive."""
    g, f, m, p, gpsi, v = _state(field, epsilon)
    if not g.periodic:
        raise GridError("the heat-flow identity is hosted on torus grids")
    gf = m * gpsi
    integrand = m * _hs2(g.hessian(p)) + epsilon * _dot(gf, gf) * _dot(gpsi, gpsi)
    return -2.0 * g.integrate(integrand)


def djdt_model(field: Field, epsilon: float) -> float:
    """dJ/dt along the rotational diffusion model (single generator, d = 2)."""
    g, f, m, p, gpsi, v = _state(field, epsilon)
    if g.d != 2:
        raise GridError("the model equation is implemented for d = 2 only")
    rot_psi = g.rotation(p)
    grad_rot = g.gradient(rot_psi)
    rot_f = m * rot_psi
    integrand = m * _dot(grad_rot, grad_rot) + epsilon * (_dot(gpsi, gpsi) - g.speed2) * rot_f**2
    return -2.0 * g.integrate(integrand)


def F_field(field: Field, epsilon: float) -> np.ndarray:
    f = field.values
    return 1.0 - 2.0 * epsilon * f - 2.25 * epsilon * field.grid.speed2 * mobility(f, epsilon)


def F_criterion(field: Field, epsilon: float) -> float:
    """Infimum over nodes of 1 - 2 eps f - (9 eps / 4)|v|^2 m."""
    return float(np.min(F_field(field, epsilon)))


def landau_coefficients(epsilon: float, beta: float, d: int = 2) -> LandauCoefficients:
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    nu = equilibrium_mass(epsilon, beta, d)
    upper = RADIAL_CUTOFF + (np.sqrt(2 * np.log(epsilon / beta)) if epsilon > beta else 0.0)

    def mu_tilde(r):
        e = np.exp(-0.5 * r * r)
        mu = e / (beta + epsilon * e)
        return mu * (1.0 - epsilon * mu)

    return LandauCoefficients(nu=nu, nu_tilde=radial_integral(mu_tilde, d, upper))


def djdt_landau(field: Field, epsilon: float, beta: float, coeffs: LandauCoefficients | None = None) -> float:
    """dJ/dt along the linear Landau flow: nu_tilde * model part + (d-1) nu * FDFP part."""
    d = field.grid.d
    c = coeffs or landau_coefficients(epsilon, beta, d)
    return c.nu_tilde * djdt_model(field, epsilon) + (d - 1) * c.nu * djdt_fdfp(field, epsilon)


# -- radial reducers ---------------------------------------------------------


def _profile_parts(epsilon, alpha):
    def f(r):
        e = np.exp(-0.5 * alpha * r * r)
        return e / (1.0 + epsilon * e)

    def m(r):
        x = f(r)
        return x * (1.0 - epsilon * x)

    def mp(r):
        return 1.0 - 2.0 * epsilon * f(r)

    return f, m, mp


def _moments(epsilon, alpha, d):
    _, m, mp = _profile_parts(epsilon, alpha)
    upper = RADIAL_CUTOFF / np.sqrt(alpha)
    I = lambda g: radial_integral(g, d, upper)  # noqa: E731
    return {
        "m": I(m),
        "mmp": I(lambda r: m(r) * mp(r)),
        "w2mmp": I(lambda r: r**2 * m(r) * mp(r)),
        "w2m2": I(lambda r: r**2 * m(r) ** 2),
        "w4m2": I(lambda r: r**4 * m(r) ** 2),
    }


def counterexample_integrals(epsilon: float, alpha: float, d: int) -> tuple:
    """The u-independent coefficients (D0, D1) with (1/2) dJ/dt = -(1-alpha)^2 D0 - |u|^2 D1."""
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    M = _moments(epsilon, alpha, d)
    D0 = d * M["m"] + M["w2mmp"] + epsilon * alpha * (1 + alpha) * M["w4m2"]
    D1 = M["mmp"] + epsilon * alpha * (1 - alpha + 2.0 / d) * M["w2m2"]
    return D0, D1


def d1_components(epsilon: float, alpha: float, d: int) -> tuple:
    """Split D1 = P - N into the parts scaling like alpha^{-d/2} and alpha^{1-d/2}."""
    M = _moments(epsilon, alpha, d)
    P = M["mmp"] + epsilon * alpha * (1 + 2.0 / d) * M["w2m2"]
    N = epsilon * alpha**2 * M["w2m2"]
    return P, N


def fdfp_djdt0(alpha, u_norm, D0, D1) -> float:
    return 2.0 * (-((1 - alpha) ** 2) * D0 - u_norm**2 * D1)


def counterexample_search(epsilon: float, d: int = 2, alpha_max: float = 2.0**60) -> CounterexampleResult:
    """Find a shifted profile along which J increases under the FDFP flow.

    alpha doubles from 1 until D1 < 0; |u| is then twice the threshold
    sqrt((1-alpha)^2 D0 / -D1).
    """
    if not epsilon >= 0:
        raise ValueError("epsilon must be >= 0")
    alpha, trace = 1.0, []
    while alpha <= alpha_max:
        D0, D1 = counterexample_integrals(epsilon, alpha, d)
        trace.append((alpha, D1))
        if D1 < 0:
            break
        alpha *= 2.0
    else:
        raise SearchFailed(
            f"D1 stayed positive up to alpha = {alpha_max:g} (eps={epsilon}, d={d})", trace
        )
    threshold = math.sqrt((1 - alpha) ** 2 * D0 / -D1)
    u = 2.0 * threshold
    dj = fdfp_djdt0(alpha, u, D0, D1)
    return CounterexampleResult(
        "fdfp", alpha, u, D0, D1, dj, dj > 0, threshold, epsilon, d, {"fdfp": dj}, trace
    )


def model_coefficients(epsilon: float, alpha: float, d: int = 2) -> tuple:
    """(A, B) with (1/2) dJ/dt|_0 = -alpha^2 (d-1)|u|^2 (A - |u|^2 B) for the model flow."""
    if d < 2:
        raise ValueError("the model equation needs d >= 2")
    M = _moments(epsilon, alpha, d)
    A = M["m"] + epsilon / d * (alpha**2 - 1) * M["w4m2"]
    B = epsilon / d * M["w2m2"]
    return A, B


def model_djdt0_from(alpha, u_norm, A, B, d) -> float:
    return -2.0 * alpha**2 * (d - 1) * u_norm**2 * (A - u_norm**2 * B)


def model_djdt0(epsilon: float, alpha: float, u_norm: float, d: int = 2) -> float:
    A, B = model_coefficients(epsilon, alpha, d)
    return model_djdt0_from(alpha, u_norm, A, B, d)


def model_counterexample_search(
    epsilon: float, alpha: float, d: int = 2, u_start: float = 1.0, u_max: float = 1e3
) -> CounterexampleResult:
    """Double |u| from ``u_start`` until J increases at t = 0 under the model flow."""
    if not (epsilon > 0 and alpha > 0):
        raise ValueError("model counterexample needs eps > 0 and alpha > 0")
    A, B = model_coefficients(epsilon, alpha, d)
    u, trace = u_start, []
    while u <= u_max:
        dj = model_djdt0_from(alpha, u, A, B, d)
        trace.append((u, dj))
        if dj > 0:
            threshold = math.sqrt(A / B) if A > 0 else 0.0
            return CounterexampleResult(
                "model", alpha, u, A, B, dj, True, threshold, epsilon, d, {"model": dj}, trace
            )
        u *= 2.0
    raise SearchFailed(f"no positive model derivative for |u| <= {u_max:g}", trace)


def landau_counterexample_search(epsilon: float, beta: float = 1.0, d: int = 2) -> CounterexampleResult:
    """Combine the FDFP certificate with the rotational part, doubling |u| until the sum is positive."""
    base = counterexample_search(epsilon, d)
    c = landau_coefficients(epsilon, beta, d)
    A, B = model_coefficients(epsilon, base.alpha, d)
    u, trace = base.u_norm, []
    for _ in range(60):
        fd = (d - 1) * c.nu * fdfp_djdt0(base.alpha, u, base.D0, base.D1)
        mo = c.nu_tilde * model_djdt0_from(base.alpha, u, A, B, d)
        trace.append((u, fd + mo))
        if fd + mo > 0:
            return CounterexampleResult(
                "landau", base.alpha, u, base.D0, base.D1, fd + mo, True, base.u_threshold,
                epsilon, d, {"fdfp": fd, "model": mo, "nu": c.nu, "nu_tilde": c.nu_tilde}, trace,
            )
        u *= 2.0
    raise SearchFailed("combined Landau derivative never turned positive", trace)


# -- grid re-verification -----------------------------------------------------


def certificate_grid(result: CounterexampleResult, n: int = 192, margin: float = 7.0) -> Grid:
    """Window grid centred on the profile's peak, wide enough for its support."""
    extent = margin / math.sqrt(result.alpha)
    if result.d == 1:
        return Grid("line-1d", extent, n, center=(result.u_norm,))
    return Grid("tensor-2d", extent, n, center=(result.u_norm, 0.0))


def certificate_field(result: CounterexampleResult, grid: Grid | None = None) -> Field:
    grid = grid or certificate_grid(result)
    u = (result.u_norm,) + (0.0,) * (grid.d - 1)
    return fd_profile(FDProfileSpec(result.alpha, u, result.epsilon), grid)


def grid_djdt(result: CounterexampleResult, field: Field, beta: float = 1.0) -> float:
    """Evaluate the oracle matching ``result.equation`` on a grid field."""
    eps = result.epsilon
    if result.equation == "fdfp":
        return djdt_fdfp(field, eps)
    if result.equation == "model":
        return djdt_model(field, eps)
    return djdt_landau(field, eps, beta)
