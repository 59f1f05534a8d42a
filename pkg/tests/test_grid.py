import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atpf.grid import (
    GridSpec,
    boundary_integral,
    boundary_normal_derivative,
    boundary_normal_derivative_nodal,
    cell_gradient,
    integrate_cell,
    integrate_nodal,
    interp_bilinear,
    make_grid,
)


def unit_grid(n=5):
    return make_grid(GridSpec(n, n, 0.0, 1.0, 0.0, 1.0))


class TestMakeGrid:
    def test_counts_5x5(self):
        g = unit_grid(5)
        assert g.h == 0.25
        assert g.n_nodes == 25
        assert g.n_cells == 16
        assert g.n_edges == 40

    def test_non_square_cells_rejected(self):
        with pytest.raises(ValueError, match="square"):
            make_grid(GridSpec(3, 5, 0.0, 1.0, 0.0, 1.0))

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValueError):
            make_grid(GridSpec(2, 2, 0.0, 1.0, 0.0, 1.0))

    def test_side_masks_cover_boundary(self):
        g = unit_grid(5)
        sides = g.side_masks()
        union = np.zeros(g.shape, dtype=bool)
        for m in sides.values():
            union |= m
        assert np.array_equal(union, g.boundary_mask())


class TestCellGradient:
    def test_affine_exact(self):
        g = unit_grid(7)
        X, Y = g.meshgrid()
        gr = cell_gradient(g, 3.0 * X - 2.0 * Y + 1.0)
        assert np.allclose(gr[:, :, 0], 3.0, atol=1e-14)
        assert np.allclose(gr[:, :, 1], -2.0, atol=1e-14)

    def test_constant_zero(self):
        g = unit_grid(6)
        gr = cell_gradient(g, np.full(g.shape, 4.2))
        assert np.all(gr == 0.0)

    def test_bilinear_exact_at_centers(self):
        g = unit_grid(9)
        X, Y = g.meshgrid()
        gr = cell_gradient(g, X * Y)
        Xc, Yc = g.cell_centers()
        assert np.allclose(gr[:, :, 0], Yc, atol=1e-14)
        assert np.allclose(gr[:, :, 1], Xc, atol=1e-14)

    def test_rejects_nonfinite(self):
        g = unit_grid(5)
        f = np.zeros(g.shape)
        f[2, 2] = np.nan
        with pytest.raises(ValueError, match="finite"):
            cell_gradient(g, f)


class TestQuadrature:
    def test_constant(self):
        g = unit_grid(5)
        assert integrate_nodal(g, np.ones(g.shape)) == pytest.approx(1.0, abs=1e-15)

    def test_affine_exact(self):
        g = unit_grid(8)
        X, _ = g.meshgrid()
        assert integrate_nodal(g, X) == pytest.approx(0.5, abs=1e-14)

    def test_x_squared_3x3(self):
        # hand trapezoid sum: (0 + 2*0.25 + 1) * 0.25
        g = unit_grid(3)
        X, _ = g.meshgrid()
        assert integrate_nodal(g, X ** 2) == pytest.approx(0.375, abs=1e-15)

    def test_cell_integral_tensor_shape(self):
        g = unit_grid(4)
        c = np.ones(g.cell_shape + (3,))
        out = integrate_cell(g, c)
        assert out.shape == (3,)
        assert np.allclose(out, 1.0)

    @given(st.integers(min_value=3, max_value=9), st.integers(min_value=0, max_value=2 ** 31))
    @settings(max_examples=30, deadline=None)
    def test_flip_symmetry(self, n, seed):
        # integral is invariant under axis flips of the data
        g = unit_grid(n)
        f = np.random.default_rng(seed).standard_normal(g.shape)
        base = integrate_nodal(g, f)
        assert integrate_nodal(g, f[::-1, :]) == pytest.approx(base, rel=1e-12, abs=1e-12)
        assert integrate_nodal(g, f[:, ::-1]) == pytest.approx(base, rel=1e-12, abs=1e-12)

    @given(st.integers(min_value=0, max_value=2 ** 31))
    @settings(max_examples=25, deadline=None)
    def test_gradient_outer_product_psd(self, seed):
        g = unit_grid(6)
        f = np.random.default_rng(seed).standard_normal(g.shape)
        gr = cell_gradient(g, f)
        m = integrate_cell(g, np.stack([
            gr[:, :, 0] ** 2, gr[:, :, 0] * gr[:, :, 1],
            gr[:, :, 0] * gr[:, :, 1], gr[:, :, 1] ** 2,
        ], axis=-1).reshape(g.cell_shape + (2, 2)))
        assert abs(m[0, 1] - m[1, 0]) == 0.0
        eig = np.linalg.eigvalsh(m)
        assert eig.min() >= -1e-12


class TestBoundaryNormalDerivative:
    def test_linear_left_side(self):
        g = unit_grid(6)
        X, _ = g.meshgrid()
        d = boundary_normal_derivative(g, X)
        assert np.allclose(d["left"], -1.0, atol=1e-13)
        assert np.allclose(d["right"], 1.0, atol=1e-13)

    def test_constant_zero(self):
        g = unit_grid(5)
        d = boundary_normal_derivative(g, np.full(g.shape, 2.5))
        for side in d.values():
            assert np.allclose(side, 0.0, atol=1e-13)

    def test_quadratic_exact(self):
        g = unit_grid(9)
        X, _ = g.meshgrid()
        d = boundary_normal_derivative(g, X ** 2)
        assert np.allclose(d["right"], 2.0, atol=1e-12)

    def test_corner_averaging(self):
        g = unit_grid(7)
        X, _ = g.meshgrid()
        d = boundary_normal_derivative_nodal(g, X)
        # bottom-left corner: average of left (-1) and bottom (0)
        assert d["left"][0] == pytest.approx(-0.5, abs=1e-13)
        assert d["bottom"][0] == pytest.approx(-0.5, abs=1e-13)

    def test_boundary_integral_perimeter(self):
        g = unit_grid(11)
        ones = {s: np.ones(g.ny if s in ("left", "right") else g.nx) for s in ("left", "right", "bottom", "top")}
        assert boundary_integral(g, ones) == pytest.approx(4.0, abs=1e-14)


class TestInterpolation:
    def test_reproduces_nodes(self):
        g = unit_grid(6)
        rng = np.random.default_rng(3)
        f = rng.standard_normal(g.shape)
        X, Y = g.meshgrid()
        assert np.allclose(interp_bilinear(g, f, X, Y), f, atol=1e-14)

    def test_bilinear_exact(self):
        g = unit_grid(6)
        X, Y = g.meshgrid()
        f = 2.0 + X + 3.0 * Y + 0.5 * X * Y
        pts = np.random.default_rng(0).uniform(0, 1, size=(2, 40))
        vals = interp_bilinear(g, f, pts[0], pts[1])
        assert np.allclose(vals, 2.0 + pts[0] + 3.0 * pts[1] + 0.5 * pts[0] * pts[1], atol=1e-13)

    def test_outside_raises(self):
        g = unit_grid(5)
        with pytest.raises(ValueError, match="outside"):
            interp_bilinear(g, np.zeros(g.shape), np.array([1.5]), np.array([0.5]))
