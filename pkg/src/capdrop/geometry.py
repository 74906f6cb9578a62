"""Angular grids, radial profiles, differentiation, quadrature, and
polar <-> Cartesian curve conversion.

All operations are pure functions on immutable inputs; nothing here mutates
shared state, so values can be used freely across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DimensionMismatchError, InvalidGridError, RecentreDomainError

__all__ = [
    "AngularGrid",
    "SurfaceProfile",
    "CartesianCurve",
    "derivative_values",
    "second_derivative_values",
    "integrate",
    "cumulative_integral",
    "derivative",
    "to_cartesian",
    "from_cartesian",
    "profile_to_csv",
    "profile_from_csv",
]


def _simpson_weights(n_cells: int, h: float) -> np.ndarray:
    """Composite Simpson weights on n_cells+1 uniform nodes.

    Falls back to the trapezoid rule when n_cells is odd.
    """
    w = np.empty(n_cells + 1)
    if n_cells % 2 == 0:
        w[0] = w[-1] = h / 3.0
        w[1:-1:2] = 4.0 * h / 3.0
        w[2:-1:2] = 2.0 * h / 3.0
    else:
        w[:] = h
        w[0] = w[-1] = h / 2.0
    return w


@dataclass(frozen=True)
class AngularGrid:
    """Uniform angular grid on [theta_lo, theta_hi] with quadrature weights."""

    theta_lo: float
    theta_hi: float
    n_cells: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_cells < 1:
            raise InvalidGridError("grid needs at least one cell")
        if not (0.0 <= self.theta_lo < self.theta_hi <= np.pi + 1e-12):
            raise InvalidGridError(
                f"angular span [{self.theta_lo}, {self.theta_hi}] not inside [0, pi]"
            )
        if len(self.nodes) != self.n_cells + 1 or len(self.weights) != self.n_cells + 1:
            raise InvalidGridError("node/weight arrays do not match n_cells")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def make(cls, theta_lo: float, theta_hi: float, n_cells: int) -> "AngularGrid":
        if n_cells < 1:
            raise InvalidGridError("grid needs at least one cell")
        nodes = np.linspace(theta_lo, theta_hi, n_cells + 1)
        h = (theta_hi - theta_lo) / n_cells
        return cls(theta_lo, theta_hi, n_cells, nodes, _simpson_weights(n_cells, h))

    @property
    def spacing(self) -> float:
        return (self.theta_hi - self.theta_lo) / self.n_cells

    def require_field(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.nodes.shape:
            raise DimensionMismatchError(
                f"field of length {values.shape} does not match {len(self.nodes)} nodes"
            )
        return values


# one-sided first-derivative stencil whose leading error term matches the
# centered one (+h^2/6 f'''), keeping the discrete-derivative error field
# smooth through the endpoints
_EDGE1 = (-2.0, 7.0 / 2.0, -2.0, 1.0 / 2.0)
# one-sided second-derivative stencil with the interior error constant
# (+h^2/12 f'''')
_EDGE2 = (3.0, -9.0, 10.0, -5.0, 1.0)


def derivative_values(grid: AngularGrid, values: np.ndarray) -> np.ndarray:
    """First derivative of a nodal field: centered differences inside,
    second-order one-sided stencils at the two endpoints."""
    f = grid.require_field(values)
    if len(f) < 4:
        raise InvalidGridError("derivative needs at least 4 nodes")
    h = grid.spacing
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    d[0] = (_EDGE1[0] * f[0] + _EDGE1[1] * f[1] + _EDGE1[2] * f[2] + _EDGE1[3] * f[3]) / h
    d[-1] = -(_EDGE1[0] * f[-1] + _EDGE1[1] * f[-2] + _EDGE1[2] * f[-3] + _EDGE1[3] * f[-4]) / h
    return d


def derivative_transpose(grid: AngularGrid, values: np.ndarray) -> np.ndarray:
    """Action of the transpose of the derivative stencil matrix.

    Needed to assemble exact gradients of quadrature functionals that contain
    discrete derivatives.
    """
    y = grid.require_field(values)
    h = grid.spacing
    out = np.zeros_like(y)
    out[2:] += y[1:-1] / (2.0 * h)
    out[:-2] -= y[1:-1] / (2.0 * h)
    for k, c in enumerate(_EDGE1):
        out[k] += c * y[0] / h
        out[-1 - k] += -c * y[-1] / h
    return out


def second_derivative_values(grid: AngularGrid, values: np.ndarray) -> np.ndarray:
    """Second derivative: three-point interior stencil, second-order
    four-point one-sided stencils at the endpoints."""
    f = grid.require_field(values)
    if len(f) < 5:
        raise InvalidGridError("second derivative needs at least 5 nodes")
    h2 = grid.spacing ** 2
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
    d[0] = sum(c * f[k] for k, c in enumerate(_EDGE2)) / h2
    d[-1] = sum(c * f[-1 - k] for k, c in enumerate(_EDGE2)) / h2
    return d


def integrate(grid: AngularGrid, values: np.ndarray) -> float:
    """Quadrature of a nodal field over the angular span (composite Simpson,
    trapezoid fallback on odd cell counts)."""
    f = grid.require_field(values)
    return float(np.dot(grid.weights, f))


def cumulative_integral(grid: AngularGrid, values: np.ndarray) -> np.ndarray:
    """Running integral from theta_lo, one value per node (Simpson-based)."""
    from scipy.integrate import cumulative_simpson

    f = grid.require_field(values)
    out = np.empty_like(f)
    out[0] = 0.0
    out[1:] = cumulative_simpson(f, x=grid.nodes)
    return out


@dataclass(frozen=True)
class SurfaceProfile:
    """Radial free-surface sample rho(theta) on an angular grid."""

    grid: AngularGrid
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != self.grid.nodes.shape:
            raise DimensionMismatchError("rho length does not match grid nodes")
        if not np.all(rho > 0.0):
            raise InvalidGridError("profile must be strictly positive")
        object.__setattr__(self, "rho", rho)
        rho.setflags(write=False)

    def derivative(self) -> np.ndarray:
        return derivative_values(self.grid, self.rho)

    def second_derivative(self) -> np.ndarray:
        return second_derivative_values(self.grid, self.rho)

    def with_rho(self, rho: np.ndarray) -> "SurfaceProfile":
        return SurfaceProfile(self.grid, np.array(rho, dtype=float))


def derivative(profile: SurfaceProfile) -> np.ndarray:
    """d(rho)/d(theta) of a profile at its nodes."""
    return profile.derivative()


@dataclass(frozen=True)
class CartesianCurve:
    """Planar free-surface curve as an ordered (x, y) point list, y >= 0."""

    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DimensionMismatchError("curve points must be an (n, 2) array")
        if np.any(pts[:, 1] < -1e-12):
            raise InvalidGridError("curve dips below the supporting plane")
        object.__setattr__(self, "points", pts)
        pts.setflags(write=False)

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def translated(self, dx: float) -> "CartesianCurve":
        pts = self.points.copy()
        pts[:, 0] += dx
        return CartesianCurve(pts)


def to_cartesian(profile: SurfaceProfile) -> CartesianCurve:
    """Map a polar profile to the Cartesian point list
    (rho cos(theta), rho sin(theta)), node order preserved."""
    th = profile.grid.nodes
    pts = np.column_stack((profile.rho * np.cos(th), profile.rho * np.sin(th)))
    # clamp the O(1e-16) sine residue at theta = pi so the y >= 0 check holds
    pts[:, 1] = np.maximum(pts[:, 1], 0.0)
    return CartesianCurve(pts)


def from_cartesian(curve: CartesianCurve, pole_x: float, grid: AngularGrid) -> SurfaceProfile:
    """Resample a star-shaped curve as a radial profile about the pole
    (pole_x, 0) using monotone cubic interpolation in the new angle.

    Raises RecentreDomainError when the angle of (x - pole_x, y) is not
    strictly monotone along the curve or does not span the grid.
    """
    dx = curve.x - pole_x
    theta_new = np.arctan2(curve.y, dx)
    if not np.all(np.diff(theta_new) > 0.0):
        raise RecentreDomainError(
            f"curve is not star-shaped about pole x={pole_x:.6g}"
        )
    tol = 1e-9
    if theta_new[0] > grid.theta_lo + tol or theta_new[-1] < grid.theta_hi - tol:
        raise RecentreDomainError(
            f"resampled angles [{theta_new[0]:.6g}, {theta_new[-1]:.6g}] do not span "
            f"the grid [{grid.theta_lo:.6g}, {grid.theta_hi:.6g}]"
        )
    r = np.hypot(dx, curve.y)
    interp = PchipInterpolator(theta_new, r, extrapolate=True)
    return SurfaceProfile(grid, interp(np.clip(grid.nodes, theta_new[0], theta_new[-1])))


def profile_to_csv(profile: SurfaceProfile) -> str:
    """Serialize a profile as `theta,rho` CSV with 17 significant digits."""
    buf = io.StringIO()
    buf.write("theta,rho\r\n")
    for t, r in zip(profile.grid.nodes, profile.rho):
        buf.write(f"{t:.17g},{r:.17g}\r\n")
    return buf.getvalue()


def profile_from_csv(text: str) -> SurfaceProfile:
    """Rebuild a profile from `theta,rho` CSV written by profile_to_csv."""
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows or rows[0].strip().lower() != "theta,rho":
        raise InvalidGridError("profile CSV must start with a theta,rho header")
    data = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    theta, rho = data[:, 0], data[:, 1]
    n = len(theta) - 1
    spacing = np.diff(theta)
    if n < 1 or not np.allclose(spacing, spacing[0], rtol=1e-10, atol=1e-12):
        raise InvalidGridError("profile CSV nodes are not a uniform grid")
    grid = AngularGrid.make(theta[0], theta[-1], n)
    return SurfaceProfile(grid, rho)
