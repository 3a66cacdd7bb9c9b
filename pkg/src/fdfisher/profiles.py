"""Fermi-Dirac equilibria, shifted profiles and the pointwise nonlinear maps.

Notation follows the usual kinetic conventions: ``m`` is the mobility
f(1 - eps f), ``psi`` the entropy variable log(f / (1 - eps f)) and ``phi``
the free-energy variable psi + |v|^2 / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import bisect
from scipy.special import xlogy

from .grids import Field, Grid, GridError, check_range

LOG_FLOOR = 1e-300
GL_NODES = 512
# e^{-72} is far below double precision relative to the peak
RADIAL_CUTOFF = 12.0


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuantumParams:
    """Quantum parameter ``epsilon`` (0 = classical) and equilibrium constant ``beta``."""

    epsilon: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")

    def satisfies(self, factor: float) -> bool:
        """True when factor * eps <= beta (4 for FDFP decay, 6 for Landau)."""
        return factor * self.epsilon <= self.beta

    def require(self, factor: float) -> None:
        if not self.satisfies(factor):
            raise ValueError(
                f"decay hypothesis {factor}*eps <= beta fails for eps={self.epsilon}, beta={self.beta}"
            )


@dataclass(frozen=True)
class FDProfileSpec:
    """Shifted, steepened Fermi-Dirac profile 1 / (eps + exp(alpha |v - u|^2 / 2))."""

    alpha: float
    u: tuple
    epsilon: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        object.__setattr__(self, "u", tuple(float(c) for c in np.atleast_1d(self.u)))

    @property
    def u_norm(self) -> float:
        return float(np.linalg.norm(self.u))

    @property
    def support_radius(self) -> float:
        return 6.0 / np.sqrt(self.alpha)


# -- pointwise maps -----------------------------------------------------------


def mobility(f, epsilon: float, check: bool = True):
    """m(f) = f (1 - eps f); raises InvariantError on out-of-range input."""
    f = np.asarray(f, dtype=float)
    if check:
        check_range(f, epsilon)
    out = f * (1.0 - epsilon * f)
    return float(out) if out.ndim == 0 else out


def mobility_prime(f, epsilon: float):
    return 1.0 - 2.0 * epsilon * np.asarray(f, dtype=float)


def _clamped(f, epsilon):
    f = np.asarray(f, dtype=float)
    top = 1.0 - epsilon * f
    return np.maximum(f, LOG_FLOOR), np.maximum(top, LOG_FLOOR)


def psi(f, epsilon: float):
    """Entropy variable log(f / (1 - eps f)) with both logarithms floored at 1e-300."""
    lo, hi = _clamped(f, epsilon)
    out = np.log(lo) - np.log(hi)
    return float(out) if out.ndim == 0 else out


def clamp_count(f, epsilon: float) -> int:
    """Number of nodes whose psi evaluation hit the logarithm floor."""
    f = np.asarray(f, dtype=float)
    return int(np.count_nonzero((f < LOG_FLOOR) | (1.0 - epsilon * f < LOG_FLOOR)))


def phi(f, epsilon: float, speed2):
    """Free-energy variable psi + |v|^2 / 2; ``speed2`` is |v|^2."""
    return psi(f, epsilon) + 0.5 * np.asarray(speed2, dtype=float)


def entropy_density(f, epsilon: float):
    """U(f) = (1/eps)[eps f log(eps f) + (1 - eps f) log(1 - eps f)], or f log f at eps = 0."""
    f = np.asarray(f, dtype=float)
    if epsilon == 0:
        out = xlogy(f, f)
    else:
        x = epsilon * f
        out = (xlogy(x, x) + xlogy(1.0 - x, 1.0 - x)) / epsilon
    return float(out) if out.ndim == 0 else out


def entropy_density_prime(f, epsilon: float):
    """Exact derivative of :func:`entropy_density`.

    For eps > 0 this is psi + log(eps); the constant shift drops out of every
    mass-preserving comparison.
    """
    if epsilon == 0:
        return psi(f, 0.0) + 1.0
    return psi(f, epsilon) + np.log(epsilon)


# -- profiles on grids ------------------------------------------------------------


def _fd_value(s, scale, epsilon):
    # 1 / (eps + scale e^{s}) without overflowing for large s
    e = np.exp(-s)
    return e / (scale + epsilon * e)


def fd_equilibrium(params: QuantumParams, grid: Grid) -> Field:
    """Node-wise Fermi-Dirac equilibrium 1 / (eps + beta exp(|v|^2 / 2))."""
    values = _fd_value(0.5 * grid.speed2, params.beta, params.epsilon)
    return Field(grid, values)


def _shifted_speed2(grid: Grid, u):
    if not any(u):
        return grid.speed2
    return sum((c - uc) ** 2 for c, uc in zip(grid.coords, u))


def fd_profile(spec: FDProfileSpec, grid: Grid) -> Field:
    """Profile 1 / (eps + exp(alpha |v - u|^2 / 2)).

    Raises
    ------
    GridError
        If the ball of radius 6/sqrt(alpha) about ``u`` leaves the grid.
    """
    u = spec.u
    if len(u) == 1 and grid.d == 2:
        u = (u[0], 0.0)
    if len(u) != grid.d:
        raise GridError(f"shift u has {len(u)} components on a {grid.d}-d grid")
    if grid.polar:
        need = spec.u_norm + spec.support_radius
    else:
        need = max(abs(uc - c) for uc, c in zip(u, grid.center)) + spec.support_radius
    if need > grid.extent * (1 + 1e-12) and not grid.periodic:
        raise GridError(f"profile support leaves the domain; need extent R >= {need:.6g}")
    s = 0.5 * spec.alpha * _shifted_speed2(grid, u)
    return Field(grid, _fd_value(s, 1.0, spec.epsilon))


# -- radial quadrature ------------------------------------------------------------


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[d]


@lru_cache(maxsize=None)
def _gl(n: int):
    return leggauss(n)


def radial_nodes(upper: float, n: int = GL_NODES):
    x, w = _gl(n)
    return 0.5 * upper * (x + 1.0), 0.5 * upper * w


def radial_integral(g, d: int, upper: float = RADIAL_CUTOFF, n: int = GL_NODES) -> float:
    """Integral over R^d of a radial function, S_{d-1} int_0^upper g(r) r^{d-1} dr."""
    r, w = radial_nodes(upper, n)
    return float(sphere_area(d) * np.sum(w * g(r) * r ** (d - 1)))


def _equilibrium_upper(epsilon, beta):
    plateau = np.sqrt(2.0 * np.log(epsilon / beta)) if epsilon > beta else 0.0
    return plateau + RADIAL_CUTOFF


def equilibrium_mass(epsilon: float, beta: float, d: int) -> float:
    """Mass of mu_{eps,beta} over R^d by Gauss-Legendre radial quadrature."""
    return radial_integral(
        lambda r: _fd_value(0.5 * r * r, beta, epsilon), d, _equilibrium_upper(epsilon, beta)
    )


def beta_from_mass(epsilon: float, target_mass: float, d: int) -> float:
    """Equilibrium constant beta whose Fermi-Dirac state carries ``target_mass``.

    Bisection in log(beta) over [1e-12, 1e12]; mass is strictly decreasing in beta.
    """
    if not target_mass > 0:
        raise ValueError(f"target mass must be positive, got {target_mass}")
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    lo, hi = np.log(1e-12), np.log(1e12)

    def residual(x):
        return np.log(equilibrium_mass(epsilon, np.exp(x), d)) - np.log(target_mass)

    r_lo, r_hi = residual(lo), residual(hi)
    if r_lo < 0 or r_hi > 0:
        raise BracketError(
            f"mass {target_mass} not attainable for eps={epsilon}, d={d}: "
            f"range is [{np.exp(r_hi) * target_mass:.3g}, {np.exp(r_lo) * target_mass:.3g}]"
        )
    return float(np.exp(bisect(residual, lo, hi, xtol=1e-14, maxiter=80)))
