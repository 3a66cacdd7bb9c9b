"""Explicit time integration of the four flows.

FDFP fluxes are written in gradient-flow form, G = avg(m) * (Phi_{i+1} - Phi_i) / h
with the mobility averaged arithmetically at faces.  Phi is constant on an
equilibrium, so every face flux of mu vanishes to round-off and equilibria stay
put regardless of resolution.  Divergences use the trapezoid dual cells, which
makes the update conserve exactly the mass returned by ``Grid.integrate``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .config import ConfigError, SimulationConfig
from .functionals import (
    FunctionalSnapshot,
    entropy_E,
    fisher_I,
    fisher_J,
    floored_nodes,
    free_energy_H,
)
from .grids import Field, Grid, GridError
from .oracles import (
    F_criterion,
    LandauCoefficients,
    didt_heat_flat,
    djdt_fdfp,
    djdt_landau,
    djdt_model,
    landau_coefficients,
)
from .profiles import (
    FDProfileSpec,
    QuantumParams,
    beta_from_mass,
    clamp_count,
    fd_equilibrium,
    fd_profile,
    mobility,
    phi,
)


class StabilityError(ValueError):
    """Requested step exceeds the explicit stability bound."""

    def __init__(self, dt, bound, flow):
        super().__init__(f"{flow} step dt={dt:.6g} exceeds the stability bound {bound:.6g}")
        self.dt = dt
        self.bound = bound


class NumericalError(RuntimeError):
    """A run produced non-finite values."""


@dataclass
class ClipLedger:
    """Running account of what clipping to [0, 1/eps] removed or added."""

    mass: float = 0.0
    count: int = 0
    max_violation: float = 0.0

    def clip(self, field: Field, epsilon: float) -> Field:
        f = field.values
        if not np.all(np.isfinite(f)):
            raise NumericalError("non-finite density after a step")
        top = 1.0 / epsilon if epsilon > 0 else math.inf
        low = np.minimum(f, 0.0)
        high = np.maximum(f - top, 0.0)
        excess = high - low
        if excess.any():
            self.count += int(np.count_nonzero(excess))
            self.max_violation = max(self.max_violation, float(excess.max()))
            self.mass += field.grid.integrate(excess)
            f = np.clip(f, 0.0, top)
        return Field(field.grid, f)


# -- stability bounds ------------------------------------------------------------


def _max_speed(grid: Grid) -> float:
    return float(np.sqrt(grid.speed2.max()))


def fdfp_dt_bound(grid: Grid) -> float:
    # sup m' <= 1 for admissible densities
    return 0.5 * grid.h**2 / (grid.d * (1.0 + _max_speed(grid)))


def heat_dt_bound(grid: Grid) -> float:
    return 0.9 * grid.h**2 / (2 * grid.d)


def landau_dt_bound(grid: Grid, coeffs: LandauCoefficients) -> float:
    # only the radial part is stepped explicitly
    return 0.5 * grid.h**2 / (1.0 + grid.extent) / ((grid.d - 1) * coeffs.nu)


def _check_dt(dt, bound, flow):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > bound * (1 + 1e-12):
        raise StabilityError(dt, bound, flow)


# -- steppers --------------------------------------------------------------------


def _cartesian_divergence(grid: Grid, m, p):
    """Finite-volume divergence of the face fluxes avg(m) * diff(p) / h."""
    out = np.zeros_like(m)
    for ax in range(grid.d):
        mf = 0.5 * (np.take(m, range(1, m.shape[ax]), ax) + np.take(m, range(m.shape[ax] - 1), ax))
        flux = mf * np.diff(p, axis=ax) / grid.h
        pad = [(0, 0)] * m.ndim
        pad[ax] = (1, 1)
        flux = np.pad(flux, pad)
        w = grid.axis_weights.reshape([-1 if a == ax else 1 for a in range(m.ndim)])
        out += np.diff(flux, axis=ax) / w
    return out


def step_fdfp(field: Field, epsilon: float, dt: float, ledger: ClipLedger | None = None) -> Field:
    """One conservative explicit step of the FDFP flow on a Cartesian grid."""
    grid = field.grid
    if grid.polar or grid.periodic:
        raise GridError(f"FDFP steps run on line-1d or tensor-2d grids, not {grid.kind}")
    _check_dt(dt, fdfp_dt_bound(grid), "fdfp")
    f = field.values
    m = mobility(f, epsilon)
    p = phi(f, epsilon, grid.speed2)
    new = Field(grid, f + dt * _cartesian_divergence(grid, m, p))
    return (ledger or ClipLedger()).clip(new, epsilon)


def step_heat_torus(field: Field, dt: float) -> Field:
    """Explicit centred-Laplacian step on a torus; monotone under the enforced bound."""
    grid = field.grid
    if not grid.periodic:
        raise GridError(f"the heat flow runs on torus grids, not {grid.kind}")
    _check_dt(dt, heat_dt_bound(grid), "heat")
    out = field.values + dt * grid.laplacian(field.values)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite density after a heat step")
    return Field(grid, out)


def _angular_decay(field: Field, rate) -> Field:
    """Exact solution of f_t = rate(r) f_thetatheta over unit time, shell by shell."""
    grid = field.grid
    k = np.fft.rfftfreq(grid.m, d=1.0 / grid.m)
    rate = np.broadcast_to(np.asarray(rate, dtype=float).reshape(-1, 1), (grid.n, 1))
    coeffs = np.fft.rfft(field.values, axis=-1) * np.exp(-rate * k**2)
    return Field(grid, np.fft.irfft(coeffs, n=grid.m, axis=-1))


def _require_polar(grid, flow):
    if not grid.polar:
        raise GridError(f"the {flow} flow runs on polar-2d grids, not {grid.kind}")


def step_model(field: Field, epsilon: float, dt: float, ledger: ClipLedger | None = None) -> Field:
    """Exact exponential step of the rotational diffusion model (d = 2).

    The transform round trip can leave values a few ulps outside [0, 1/eps];
    those are clipped and booked like any other clip.
    """
    _require_polar(field.grid, "model")
    return (ledger or ClipLedger()).clip(_angular_decay(field, dt), epsilon)


def _radial_fdfp(field: Field, epsilon: float, dt: float) -> Field:
    grid = field.grid
    dr = grid.h
    f = field.values
    m = mobility(f, epsilon)
    p = phi(f, epsilon, grid.speed2)
    r_face = (np.arange(1, grid.n) * dr)[:, None]
    flux = r_face * 0.5 * (m[1:] + m[:-1]) * np.diff(p, axis=0) / dr
    flux = np.pad(flux, ((1, 1), (0, 0)))
    r = grid.axes[0][:, None]
    return Field(grid, f + dt * np.diff(flux, axis=0) / (r * dr))


def step_landau(
    field: Field,
    epsilon: float,
    beta: float,
    dt: float,
    ledger: ClipLedger | None = None,
    coeffs: LandauCoefficients | None = None,
) -> Field:
    """Strang-split step of the linear Landau flow on a polar grid.

    The angular half-steps are exact and carry both the rotational part
    (rate nu_tilde) and the angular share of the FDFP part, which is the
    linear term (d-1) nu f_thetatheta / r^2.  The radial FDFP part is one
    explicit step scaled by (d-1) nu.
    """
    grid = field.grid
    _require_polar(grid, "landau")
    c = coeffs or landau_coefficients(epsilon, beta, grid.d)
    _check_dt(dt, landau_dt_bound(grid, c), "landau")
    scale = (grid.d - 1) * c.nu
    rate = 0.5 * dt * (c.nu_tilde + scale / grid.axes[0] ** 2)
    ledger = ledger or ClipLedger()
    half = ledger.clip(_angular_decay(field, rate), epsilon)
    full = ledger.clip(_radial_fdfp(half, epsilon, scale * dt), epsilon)
    return ledger.clip(_angular_decay(full, rate), epsilon)


# -- driver ----------------------------------------------------------------------


@dataclass
class Flow:
    """A flow bound to its grid and parameters: one-step map, bound and oracle."""

    equation: str
    grid: Grid
    epsilon: float
    beta: float = 1.0
    coeffs: LandauCoefficients | None = None

    def __post_init__(self):
        if self.equation == "landau" and self.coeffs is None:
            self.coeffs = landau_coefficients(self.epsilon, self.beta, self.grid.d)

    @property
    def dt_bound(self) -> float:
        if self.equation == "fdfp":
            return fdfp_dt_bound(self.grid)
        if self.equation == "heat":
            return heat_dt_bound(self.grid)
        if self.equation == "landau":
            return landau_dt_bound(self.grid, self.coeffs)
        return math.inf

    @property
    def default_dt(self) -> float:
        if self.equation == "model":
            return 0.05
        if self.equation == "heat":
            return self.dt_bound
        return 0.9 * self.dt_bound

    def step(self, field: Field, dt: float, ledger: ClipLedger) -> Field:
        if self.equation == "fdfp":
            return step_fdfp(field, self.epsilon, dt, ledger)
        if self.equation == "heat":
            return step_heat_torus(field, dt)
        if self.equation == "model":
            return step_model(field, self.epsilon, dt, ledger)
        return step_landau(field, self.epsilon, self.beta, dt, ledger, self.coeffs)

    def oracle(self, field: Field) -> float:
        """dJ/dt, or dI/dt for the heat flow."""
        if self.equation == "fdfp":
            return djdt_fdfp(field, self.epsilon)
        if self.equation == "heat":
            return didt_heat_flat(field, self.epsilon)
        if self.equation == "model":
            return djdt_model(field, self.epsilon)
        return djdt_landau(field, self.epsilon, self.beta, self.coeffs)

    def advance(self, field: Field, span: float, dt: float, ledger: ClipLedger) -> tuple:
        """Advance by exactly ``span`` with equal steps no longer than ``dt``.

        Returns the new field and the number of steps taken.
        """
        if span <= 0:
            return field, 0
        steps = max(1, math.ceil(span / dt - 1e-9))
        h = span / steps
        for _ in range(steps):
            field = self.step(field, h, ledger)
        return field, steps


def snapshot(field: Field, flow: Flow, t: float, clip_mass: float = 0.0) -> FunctionalSnapshot:
    eps = flow.epsilon
    return FunctionalSnapshot(
        t=t,
        mass=field.mass,
        entropy_E=entropy_E(field, eps),
        free_energy_H=free_energy_H(field, eps),
        fisher_I=fisher_I(field, eps),
        fisher_J=fisher_J(field, eps),
        djdt_oracle=flow.oracle(field),
        F_inf=F_criterion(field, eps),
        clamp_count=clamp_count(field.values, eps) + floored_nodes(field, eps),
        clip_mass=clip_mass,
    )


@dataclass
class TrajectoryLog:
    config: dict
    snapshots: list = dc_field(default_factory=list)
    dt: float = math.nan
    steps: int = 0
    max_violation: float = 0.0
    clip_count: int = 0
    clip_mass: float = 0.0
    mass_drift: list = dc_field(default_factory=list)
    runtime_s: float = 0.0
    final: Field | None = dc_field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.snapshots])

    @property
    def clip_fraction(self) -> float:
        m0 = self.snapshots[0].mass if self.snapshots else math.nan
        return self.clip_mass / m0

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "config", "dt", "steps", "max_violation", "clip_count", "clip_mass", "mass_drift", "runtime_s"
        )}
        out["snapshots"] = [s.as_dict() for s in self.snapshots]
        return out


def run_flow(flow: Flow, field: Field, times, dt: float | None = None, config: dict | None = None) -> TrajectoryLog:
    """Step ``field`` along ``flow`` and snapshot it at each of ``times`` (first is t = 0)."""
    times = [float(t) for t in times]
    if not times or times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("sample times must start at 0 and increase strictly")
    dt = flow.default_dt if dt is None else dt
    _check_dt(dt, flow.dt_bound, flow.equation)
    start = time.perf_counter()
    ledger = ClipLedger()
    log = TrajectoryLog(config=config or {}, dt=dt)
    m0 = field.mass
    for i, t in enumerate(times):
        if i:
            field, n = flow.advance(field, t - times[i - 1], dt, ledger)
            log.steps += n
        snap = snapshot(field, flow, t, ledger.mass)
        if not all(math.isfinite(x) for x in (snap.fisher_J, snap.fisher_I, snap.djdt_oracle)):
            raise NumericalError(f"non-finite functional at t = {t}")
        log.snapshots.append(snap)
        log.mass_drift.append(abs(snap.mass - m0) / m0)
    log.max_violation = ledger.max_violation
    log.clip_count = ledger.count
    log.clip_mass = ledger.mass
    log.runtime_s = time.perf_counter() - start
    log.final = field
    return log


# -- configs -------------------------------------------------------------------------


def build_grid(cfg: SimulationConfig) -> Grid:
    kind = cfg.grid_kind
    try:
        grid = Grid(kind, cfg.grid_extent, cfg.grid_n, cfg.grid_m if kind == "polar-2d" else None,
                    cfg.grid_center)
    except GridError as exc:
        raise ConfigError(f"grid: {exc}") from None
    if grid.d != cfg.dimension:
        raise ConfigError(f"grid.kind: {kind} does not match dimension = {cfg.dimension}")
    needs = {"fdfp": ("line-1d", "tensor-2d"), "heat": ("torus-1d", "torus-2d"),
             "model": ("polar-2d",), "landau": ("polar-2d",)}[cfg.equation]
    if kind not in needs:
        raise ConfigError(f"grid.kind: equation {cfg.equation} needs one of {needs}, got {kind}")
    return grid


def resolve_beta(cfg: SimulationConfig) -> float:
    if cfg.mass is not None:
        return beta_from_mass(cfg.epsilon, cfg.mass, cfg.dimension)
    return 1.0 if cfg.beta is None else cfg.beta


def periodic_wave(grid: Grid, epsilon: float) -> Field:
    """Smooth positive torus datum bounded by 0.9/eps (0.9 when eps = 0)."""
    top = 0.9 / epsilon if epsilon > 0 else 0.9
    w = np.pi / grid.extent
    v = grid.coords
    if grid.d == 1:
        shape = 0.55 + 0.25 * np.cos(w * v[0]) + 0.2 * np.sin(2 * w * v[0])
    else:
        shape = (0.55 + 0.2 * np.cos(w * v[0]) + 0.15 * np.sin(w * v[1])
                 + 0.1 * np.cos(w * (v[0] + 2 * v[1])))
    return Field(grid, top * shape)


def initial_field(cfg: SimulationConfig, grid: Grid, beta: float) -> Field:
    eps = cfg.epsilon
    try:
        if cfg.init == "equilibrium":
            return fd_equilibrium(QuantumParams(eps, beta), grid)
        if cfg.init == "scaled_equilibrium":
            mu = fd_equilibrium(QuantumParams(eps, beta), grid)
            return Field(grid, cfg.init_scale * mu.values).check(eps)
        if cfg.init == "fd_profile":
            u = cfg.init_u[: grid.d]
            return fd_profile(FDProfileSpec(cfg.init_alpha, u, eps), grid)
        return periodic_wave(grid, eps)
    except (GridError, ValueError) as exc:
        raise ConfigError(f"init: {exc}") from None


def simulate(cfg: SimulationConfig) -> TrajectoryLog:
    """Build grid and datum from ``cfg``, run the flow and snapshot every sample time."""
    grid = build_grid(cfg)
    beta = resolve_beta(cfg)
    f0 = initial_field(cfg, grid, beta)
    flow = Flow(cfg.equation, grid, cfg.epsilon, beta)
    return run_flow(flow, f0, cfg.sample_times, cfg.dt, config=cfg.as_dict())
