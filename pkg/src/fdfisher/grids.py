"""Velocity-space grids, finite-difference stencils and quadrature.

Every grid exposes its derivatives in an orthonormal frame: the Cartesian
frame for line/tensor/torus grids and the local (e_r, e_theta) frame for
polar grids.  Frame-invariant expressions (|grad f|^2, v . grad f, the
Hilbert-Schmidt norm of a Hessian) can then be written once for all kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

KINDS = ("line-1d", "tensor-2d", "polar-2d", "torus-1d", "torus-2d")


class GridError(ValueError):
    """Grid construction or stencil precondition failure."""


class InvariantError(ValueError):
    """A density left its admissible range 0 <= f <= 1/eps."""


@dataclass(frozen=True)
class Grid:
    """Discretized velocity domain.

    Parameters
    ----------
    kind : str
        One of ``line-1d``, ``tensor-2d``, ``polar-2d``, ``torus-1d``,
        ``torus-2d``.
    extent : float
        Half-width R of each axis (radius for polar grids).  Torus grids
        have side 2R.
    n : int
        Cells per axis.  Cartesian axes carry ``n + 1`` vertex nodes, torus
        axes ``n`` nodes, polar grids ``n`` cell-centred radii.
    m : int, optional
        Number of angular nodes of a polar grid (even, at least 4).
    center : tuple of float, optional
        Offset of a Cartesian grid.  Used to host a narrow profile far from
        the origin without covering the whole ball of radius |u|.
    """

    kind: str
    extent: float
    n: int
    m: int | None = None
    center: tuple = dc_field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GridError(f"unknown grid kind {self.kind!r}; expected one of {KINDS}")
        if not self.extent > 0:
            raise GridError(f"extent must be positive, got {self.extent}")
        if int(self.n) != self.n or self.n < 1:
            raise GridError(f"n must be a positive integer, got {self.n}")
        if self.kind == "polar-2d":
            if self.m is None or self.m < 4 or self.m % 2:
                raise GridError(f"polar grids need an even angular count m >= 4, got {self.m}")
            if self.center and any(c != 0 for c in self.center):
                raise GridError("polar grids are always centred at the origin")
            object.__setattr__(self, "center", (0.0, 0.0))
        else:
            center = tuple(float(c) for c in self.center) or (0.0,) * self.d
            if len(center) != self.d:
                raise GridError(f"center needs {self.d} components, got {len(center)}")
            object.__setattr__(self, "center", center)

    # -- geometry ---------------------------------------------------------

    @property
    def d(self) -> int:
        return 1 if self.kind.endswith("1d") else 2

    @property
    def periodic(self) -> bool:
        return self.kind.startswith("torus")

    @property
    def polar(self) -> bool:
        return self.kind == "polar-2d"

    @property
    def h(self) -> float:
        """Node spacing (radial spacing for polar grids)."""
        if self.polar:
            return self.extent / self.n
        return 2.0 * self.extent / self.n

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.m

    @cached_property
    def axes(self) -> tuple:
        R, n, h = self.extent, self.n, self.h
        if self.polar:
            return ((np.arange(n) + 0.5) * h, np.arange(self.m) * self.dtheta)
        if self.periodic:
            base = -R + h * np.arange(n)
        else:
            base = np.linspace(-R, R, n + 1)
        return tuple(c + base for c in self.center)

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @cached_property
    def coords(self) -> tuple:
        """Cartesian velocity components broadcast to ``shape``."""
        if self.polar:
            r, th = self.axes
            return (np.outer(r, np.cos(th)), np.outer(r, np.sin(th)))
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def speed2(self) -> np.ndarray:
        """|v|^2 at every node."""
        if self.polar:
            return np.broadcast_to((self.axes[0] ** 2)[:, None], self.shape).copy()
        return sum(c * c for c in self.coords)

    @cached_property
    def frame_velocity(self) -> np.ndarray:
        """The velocity vector v written in the grid frame, shape ``(d, *shape)``."""
        if self.polar:
            r = np.broadcast_to(self.axes[0][:, None], self.shape)
            return np.stack([r, np.zeros(self.shape)])
        return np.stack(self.coords)

    @cached_property
    def weights(self) -> np.ndarray:
        if self.polar:
            r = self.axes[0]
            return np.broadcast_to((r * self.h * self.dtheta)[:, None], self.shape).copy()
        w = self.axis_weights
        out = w
        for _ in range(self.d - 1):
            out = np.multiply.outer(out, w)
        return out

    @cached_property
    def axis_weights(self) -> np.ndarray:
        """1-D quadrature weights of one Cartesian axis (trapezoid or uniform)."""
        if self.polar:
            raise GridError("polar grids have no single axis weight")
        size = self.n if self.periodic else self.n + 1
        w = np.full(size, self.h)
        if not self.periodic:
            w[0] = w[-1] = 0.5 * self.h
        return w

    @property
    def volume(self) -> float:
        if self.polar:
            return np.pi * self.extent**2
        return (2.0 * self.extent) ** self.d

    # -- quadrature ---------------------------------------------------------

    def integrate(self, values) -> float:
        """Trapezoid (Cartesian), rectangle (torus) or midpoint-r x uniform-theta (polar) sum."""
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise GridError("cannot integrate non-finite values")
        axes = tuple(range(values.ndim - len(self.shape), values.ndim))
        out = np.sum(values * self.weights, axis=axes)
        return float(out) if np.ndim(out) == 0 else out

    # -- stencils -------------------------------------------------------------

    def _require(self, nodes: int, what: str) -> None:
        sizes = self.shape if not self.polar else self.shape[:1]
        if min(sizes) < nodes:
            raise GridError(f"{what} needs at least {nodes} nodes per axis, grid has {self.shape}")

    def _d1(self, a, axis):
        h = self.h
        if self.periodic:
            return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)
        return np.gradient(a, h, axis=axis, edge_order=2)

    def _d2(self, a, axis):
        h = self.h
        if self.periodic:
            return (np.roll(a, -1, axis) - 2 * a + np.roll(a, 1, axis)) / h**2
        a = np.moveaxis(a, axis, 0)
        out = np.empty_like(a)
        out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
        out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
        out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
        return np.moveaxis(out, 0, axis)

    # polar: a ghost radius -dr/2 is the antipodal node at +dr/2 (regularity)
    def _with_ghost(self, a):
        ghost = np.roll(a[0], self.m // 2, axis=-1)
        return np.concatenate([ghost[None], a], axis=0)

    def _dr1(self, a):
        h = self.h
        e = self._with_ghost(a)
        out = np.empty_like(a)
        out[:-1] = (e[2:] - e[:-2]) / (2 * h)
        out[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * h)
        return out

    def _dr2(self, a):
        h = self.h
        e = self._with_ghost(a)
        out = np.empty_like(a)
        out[:-1] = (e[2:] - 2 * e[1:-1] + e[:-2]) / h**2
        out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
        return out

    # fourth-order periodic stencil in theta; kept local so that round-off in
    # far tails of psi cannot leak around a shell the way a spectral derivative would
    def _dtheta(self, a, order):
        dt = self.dtheta
        p1, m1 = np.roll(a, -1, -1), np.roll(a, 1, -1)
        p2, m2 = np.roll(a, -2, -1), np.roll(a, 2, -1)
        if order == 1:
            return (8 * (p1 - m1) - (p2 - m2)) / (12 * dt)
        return (16 * (p1 + m1) - (p2 + m2) - 30 * a) / (12 * dt**2)

    def gradient(self, values) -> np.ndarray:
        """Frame components of the gradient, shape ``(d, *shape)``."""
        self._require(3, "gradient")
        a = np.asarray(values, dtype=float)
        if self.polar:
            r = self.axes[0][:, None]
            return np.stack([self._dr1(a), self._dtheta(a, 1) / r])
        return np.stack([self._d1(a, ax) for ax in range(self.d)])

    def hessian(self, values) -> np.ndarray:
        """Symmetric second-derivative table, shape ``(d, d, *shape)``."""
        self._require(5, "hessian")
        a = np.asarray(values, dtype=float)
        d = self.d
        H = np.empty((d, d) + a.shape)
        if self.polar:
            r = self.axes[0][:, None]
            a_t = self._dtheta(a, 1)
            H[0, 0] = self._dr2(a)
            H[1, 1] = self._dtheta(a, 2) / r**2 + self._dr1(a) / r
            H[0, 1] = H[1, 0] = self._dr1(a_t) / r - a_t / r**2
            return H
        for i in range(d):
            H[i, i] = self._d2(a, i)
        if d == 2:
            H[0, 1] = H[1, 0] = self._d1(self._d1(a, 1), 0)
        return H

    def laplacian(self, values) -> np.ndarray:
        self._require(5, "laplacian")
        a = np.asarray(values, dtype=float)
        if self.polar:
            r = self.axes[0][:, None]
            return self._dr2(a) + self._dr1(a) / r + self._dtheta(a, 2) / r**2
        return sum(self._d2(a, ax) for ax in range(self.d))

    def rotation(self, values) -> np.ndarray:
        """Apply the rotation generator v1 d/dv2 - v2 d/dv1 (d/dtheta on polar grids)."""
        if self.d != 2:
            raise GridError("the rotation generator needs a two-dimensional grid")
        a = np.asarray(values, dtype=float)
        if self.polar:
            return self._dtheta(a, 1)
        g = self.gradient(a)
        v1, v2 = self.coords
        return v1 * g[1] - v2 * g[0]


@dataclass
class Field:
    """Density values attached to a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(f"values of shape {self.values.shape} do not match grid {self.grid.shape}")

    def check(self, epsilon: float, atol: float = 0.0) -> "Field":
        """Raise :class:`InvariantError` unless 0 <= f <= 1/eps holds at every node."""
        check_range(self.values, epsilon, atol)
        return self

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def check_range(values, epsilon: float, atol: float = 0.0) -> None:
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise InvariantError(f"non-finite density at node {idx}")
    low = values < -atol
    high = values > 1.0 / epsilon + atol if epsilon > 0 else np.zeros_like(low)
    if low.any() or high.any():
        idx = tuple(int(i) for i in np.argwhere(low | high)[0])
        bound = "inf" if epsilon == 0 else f"{1.0 / epsilon:.17g}"
        raise InvariantError(
            f"density {values[idx]:.17g} at node {idx} outside [0, {bound}]"
        )


def gradient(field: Field) -> np.ndarray:
    return field.grid.gradient(field.values)


def hessian(field: Field) -> np.ndarray:
    return field.grid.hessian(field.values)


def integrate(values, grid: Grid) -> float:
    return grid.integrate(values)
