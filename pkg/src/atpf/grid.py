"""Uniform node-centered rectangle grids and their discrete calculus.

Fields live on the nodes of a uniform grid over [x0,x1] x [y0,y1] with square
cells of side h.  Arrays are indexed (j, i) = (y-row, x-column), so the
row-major flattening enumerates nodes left-to-right, bottom-to-top.  Gradients
live on cells: each cell gradient component is the mean of the two parallel
edge difference quotients, which is exact for affine fields and second-order
accurate at the cell center in general.

Quadrature conventions used throughout the package:

* nodal integration: 2D trapezoid, weight h^2 interior / h^2/2 side / h^2/4
  corner nodes;
* cell integration: midpoint, weight h^2 per cell;
* edge sums: weight h^2 per edge, halved for edges lying inside the boundary
  (the transverse trapezoid rule), so that Dirichlet-type edge energies of
  affine fields integrate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class GridSpec:
    """Node counts and rectangle bounds requested for a grid."""

    nx: int
    ny: int
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0


@dataclass(frozen=True)
class Grid:
    """Validated uniform grid with square cells.

    Attributes
    ----------
    nx, ny : node counts per axis (>= 3)
    x0, x1, y0, y1 : rectangle bounds
    h : grid spacing, identical along both axes
    """

    nx: int
    ny: int
    x0: float
    x1: float
    y0: float
    y1: float
    h: float

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (ny, nx) of nodal fields."""
        return (self.ny, self.nx)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.ny - 1, self.nx - 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def n_cells(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    @property
    def n_edges(self) -> int:
        return (self.nx - 1) * self.ny + self.nx * (self.ny - 1)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodal coordinate arrays X, Y of shape (ny, nx)."""
        return np.meshgrid(self.xs, self.ys)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xc = self.x0 + self.h * (np.arange(self.nx - 1) + 0.5)
        yc = self.y0 + self.h * (np.arange(self.ny - 1) + 0.5)
        return np.meshgrid(xc, yc)

    def boundary_mask(self) -> np.ndarray:
        """Boolean (ny, nx) mask of boundary nodes."""
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = True
        m[:, 0] = m[:, -1] = True
        return m

    def side_masks(self) -> dict[str, np.ndarray]:
        """Boundary-node classification by side; corners belong to two sides."""
        left = np.zeros(self.shape, dtype=bool)
        left[:, 0] = True
        right = np.zeros(self.shape, dtype=bool)
        right[:, -1] = True
        bottom = np.zeros(self.shape, dtype=bool)
        bottom[0, :] = True
        top = np.zeros(self.shape, dtype=bool)
        top[-1, :] = True
        return {"left": left, "right": right, "bottom": bottom, "top": top}


def make_grid(spec: GridSpec) -> Grid:
    """Validate a GridSpec and derive the spacing.

    Raises ValueError for fewer than 3 nodes per axis or non-square cells
    (relative mismatch of the two spacings above 1e-12).
    """
    if spec.nx < 3 or spec.ny < 3:
        raise ValueError(f"need nx, ny >= 3, got nx={spec.nx}, ny={spec.ny}")
    if not (spec.x1 > spec.x0 and spec.y1 > spec.y0):
        raise ValueError("empty rectangle")
    hx = (spec.x1 - spec.x0) / (spec.nx - 1)
    hy = (spec.y1 - spec.y0) / (spec.ny - 1)
    if abs(hx - hy) > 1e-12 * hx:
        raise ValueError(f"cells are not square: hx={hx!r}, hy={hy!r}")
    return Grid(spec.nx, spec.ny, spec.x0, spec.x1, spec.y0, spec.y1, hx)


def grid_for_domain(h_target: float, x0: float, x1: float, y0: float, y1: float) -> Grid:
    """Grid whose spacing is the largest h <= h_target dividing both extents."""
    nx = int(round((x1 - x0) / h_target)) + 1
    ny = int(round((y1 - y0) / h_target)) + 1
    nx = max(nx, 3)
    ny = max(ny, 3)
    # exact square cells require compatible extents; enforced by make_grid
    return make_grid(GridSpec(nx, ny, x0, x1, y0, y1))


def check_field(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Coerce to (ny, nx) float array and reject non-finite entries."""
    a = np.asarray(f, dtype=float)
    if a.shape != grid.shape:
        raise ValueError(f"field shape {a.shape} != grid shape {grid.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("field contains non-finite entries")
    return a


def cell_gradient(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Cell-centered gradient, shape (ny-1, nx-1, 2).

    Each component is the mean of the two parallel edge difference quotients
    of the cell; exact for affine f, and exact at cell centers for bilinear f.
    """
    f = check_field(grid, f)
    h = grid.h
    dx = (f[:, 1:] - f[:, :-1]) / h        # horizontal quotients, (ny, nx-1)
    dy = (f[1:, :] - f[:-1, :]) / h        # vertical quotients, (ny-1, nx)
    g = np.empty(grid.cell_shape + (2,))
    g[:, :, 0] = 0.5 * (dx[:-1, :] + dx[1:, :])
    g[:, :, 1] = 0.5 * (dy[:, :-1] + dy[:, 1:])
    return g


def cell_average(f: np.ndarray) -> np.ndarray:
    """Average of the four corner values per cell."""
    return 0.25 * (f[:-1, :-1] + f[:-1, 1:] + f[1:, :-1] + f[1:, 1:])


def nodal_weights(grid: Grid) -> np.ndarray:
    """Trapezoid quadrature weights, shape (ny, nx)."""
    w = np.full(grid.shape, grid.h ** 2)
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w


def integrate_nodal(grid: Grid, f: np.ndarray) -> float:
    """Trapezoid integral of a nodal field over the rectangle."""
    f = check_field(grid, f)
    return float(np.sum(f * nodal_weights(grid)))


def integrate_cell(grid: Grid, c: np.ndarray) -> np.ndarray | float:
    """Midpoint integral of a per-cell quantity (scalar, vector or tensor).

    The leading two axes index cells; any trailing axes are integrated
    componentwise.
    """
    c = np.asarray(c, dtype=float)
    if c.shape[:2] != grid.cell_shape:
        raise ValueError(f"cell array shape {c.shape} incompatible with {grid.cell_shape}")
    out = grid.h ** 2 * c.sum(axis=(0, 1))
    return float(out) if out.ndim == 0 else out


def hedge_weights(grid: Grid) -> np.ndarray:
    """Weights of horizontal edges, shape (ny, nx-1); boundary rows halved."""
    w = np.full((grid.ny, grid.nx - 1), grid.h ** 2)
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    return w


def vedge_weights(grid: Grid) -> np.ndarray:
    """Weights of vertical edges, shape (ny-1, nx); boundary columns halved."""
    w = np.full((grid.ny - 1, grid.nx), grid.h ** 2)
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w


def boundary_normal_derivative(grid: Grid, f: np.ndarray) -> dict[str, np.ndarray]:
    """Outward normal derivative on each side by the 3-point one-sided formula.

    Returns one array per side ('left'/'right' of length ny, 'bottom'/'top' of
    length nx), each holding that side's own formula at every node of the side,
    corners included.  The formula (3 f0 - 4 f1 + f2) / (2h) is exact on
    quadratics.  Where a single per-node value is needed at a corner, average
    the two adjacent sides (see `boundary_normal_derivative_nodal`).
    """
    f = check_field(grid, f)
    h2 = 2.0 * grid.h
    return {
        "left": (3.0 * f[:, 0] - 4.0 * f[:, 1] + f[:, 2]) / h2,
        "right": (3.0 * f[:, -1] - 4.0 * f[:, -2] + f[:, -3]) / h2,
        "bottom": (3.0 * f[0, :] - 4.0 * f[1, :] + f[2, :]) / h2,
        "top": (3.0 * f[-1, :] - 4.0 * f[-2, :] + f[-3, :]) / h2,
    }


def boundary_normal_derivative_nodal(grid: Grid, f: np.ndarray) -> dict[str, np.ndarray]:
    """Per-side normal derivatives with corner entries replaced by side averages."""
    d = boundary_normal_derivative(grid, f)
    out = {s: a.copy() for s, a in d.items()}
    corners = [
        ("left", 0, "bottom", 0), ("left", -1, "top", 0),
        ("right", 0, "bottom", -1), ("right", -1, "top", -1),
    ]
    for sa, ia, sb, ib in corners:
        avg = 0.5 * (d[sa][ia] + d[sb][ib])
        out[sa][ia] = avg
        out[sb][ib] = avg
    return out


def boundary_integral(grid: Grid, side_values: dict[str, np.ndarray]) -> float:
    """Trapezoid integral over the four sides of per-side nodal samples."""
    total = 0.0
    for side in SIDES:
        a = np.asarray(side_values[side], dtype=float)
        w = np.full(a.shape, grid.h)
        w[0] *= 0.5
        w[-1] *= 0.5
        total += float(np.sum(a * w))
    return total


def interp_bilinear(grid: Grid, f: np.ndarray, x: np.ndarray, y: np.ndarray,
                    tol_factor: float = 1e-9) -> np.ndarray:
    """Bilinear interpolation of a nodal field at arbitrary points.

    Points may exceed the rectangle by at most tol_factor*h (they are clamped);
    anything further out raises ValueError.
    """
    f = check_field(grid, f)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = tol_factor * grid.h
    if (x.min() < grid.x0 - tol or x.max() > grid.x1 + tol
            or y.min() < grid.y0 - tol or y.max() > grid.y1 + tol):
        raise ValueError("interpolation point outside the domain")
    sx = np.clip((x - grid.x0) / grid.h, 0.0, grid.nx - 1.0)
    sy = np.clip((y - grid.y0) / grid.h, 0.0, grid.ny - 1.0)
    i0 = np.minimum(sx.astype(int), grid.nx - 2)
    j0 = np.minimum(sy.astype(int), grid.ny - 2)
    tx = sx - i0
    ty = sy - j0
    return ((1 - ty) * ((1 - tx) * f[j0, i0] + tx * f[j0, i0 + 1])
            + ty * ((1 - tx) * f[j0 + 1, i0] + tx * f[j0 + 1, i0 + 1]))
