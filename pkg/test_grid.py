#!/usr/bin/env python3
"""
Tests for the uniform grid, finite differences and norms
"""

import sys

import numpy as np
import pytest

from filamentlab.errors import ResolutionError, ValidationError
from filamentlab.grid import (
    GridSpec, UnitVecField, VecField, derivative, fd_weights, l2_norm, sobolev_norm, unit_drift,
)


def test_grid_rejects_coarse_or_fractional_sizes():
    with pytest.raises(ValidationError):
        GridSpec(4)
    with pytest.raises(ValidationError):
        GridSpec(16.5)


def test_nodes_cover_unit_interval():
    grid = GridSpec(32)
    assert grid.n_nodes == 33
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == pytest.approx(1.0)
    assert grid.h == pytest.approx(1 / 32)


def test_fd_weights_reproduce_classic_stencils():
    assert np.allclose(fd_weights(np.array([-1, 0, 1]), 2), [1.0, -2.0, 1.0])
    assert np.allclose(fd_weights(np.array([0, 1, 2]), 1), [-1.5, 2.0, -0.5])


def test_derivative_order_out_of_range():
    with pytest.raises(ValidationError):
        GridSpec(16).diff_matrix(5)


def test_low_degree_polynomials_are_differentiated_exactly():
    grid = GridSpec(16)
    s = grid.nodes
    assert np.allclose(grid.apply(s ** 2, 2), 2.0, atol=1e-8)
    assert np.allclose(grid.apply(s ** 3, 3), 6.0, atol=1e-6)
    assert np.allclose(grid.apply(s ** 2, 1), 2 * s, atol=1e-10)


def test_second_derivative_interior_error_is_second_order():
    for n in (32, 64, 128):
        grid = GridSpec(n)
        s = grid.nodes
        err = np.abs(grid.apply(np.sin(np.pi * s), 2) + np.pi ** 2 * np.sin(np.pi * s))
        assert np.max(err[1:-1]) <= 10 * grid.h ** 2


def test_one_sided_first_derivative_converges_at_second_order():
    errors = []
    for n in (32, 64):
        grid = GridSpec(n)
        s = grid.nodes
        errors.append(np.max(np.abs(grid.apply(np.exp(s), 1) - np.exp(s))))
    assert errors[0] / errors[1] > 3.5


def test_complex_values_are_differentiated_componentwise():
    grid = GridSpec(32)
    s = grid.nodes
    f = np.exp(1j * s)
    d = grid.apply(f, 1)
    assert np.allclose(d.real, grid.apply(np.cos(s), 1))
    assert np.allclose(d.imag, grid.apply(np.sin(s), 1))


def test_quadrature_rules():
    grid = GridSpec(16)
    s = grid.nodes
    assert grid.integrate(np.ones_like(s)) == pytest.approx(1.0)
    assert grid.integrate(s ** 2, "simpson") == pytest.approx(1 / 3, abs=1e-12)
    with pytest.raises(ValidationError):
        grid.integrate(s, "gauss")


def test_vecfield_validation():
    grid = GridSpec(8)
    with pytest.raises(ValidationError):
        VecField(grid, np.zeros((8, 3)))
    bad = np.zeros((9, 3))
    bad[3, 1] = np.nan
    with pytest.raises(ValidationError):
        VecField(grid, bad)
    with pytest.raises(ValidationError):
        UnitVecField(grid, np.full((9, 3), 0.5))
    with pytest.raises(ValidationError):
        VecField(grid, np.zeros((9, 3))).normalized()


def test_fields_are_read_only():
    f = VecField.constant(GridSpec(8), [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        f.data[0, 0] = 1.0


def test_grid_mismatch_is_rejected():
    with pytest.raises(ValidationError):
        VecField.constant(GridSpec(8), [1, 0, 0]) + VecField.constant(GridSpec(16), [1, 0, 0])


def test_norms_of_arc(arc):
    grid = GridSpec(128)
    v = arc(grid)
    assert unit_drift(v) < 1e-14
    assert l2_norm(v) == pytest.approx(1.0, abs=1e-12)
    # |v_s| = pi/2
    expected = np.sqrt(1.0 + (np.pi / 2) ** 2)
    assert sobolev_norm(v, 1) == pytest.approx(expected, rel=1e-3)
    assert derivative(v, 1).norms()[64] == pytest.approx(np.pi / 2, rel=1e-3)


def test_constant_field_has_no_derivatives():
    v = VecField.constant(GridSpec(16), [0.0, 0.0, 1.0])
    for k in range(1, 5):
        assert v.d(k).max_abs() < 1e-5
    assert sobolev_norm(v, 3) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        sobolev_norm(v, -1)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_derivative_is_linear(k):
    grid = GridSpec(32)
    rng = np.random.default_rng(k)
    f = VecField(grid, rng.normal(size=(grid.n_nodes, 3)))
    g = VecField(grid, rng.normal(size=(grid.n_nodes, 3)))
    lhs = derivative(2.5 * f - 0.75 * g, k).data
    rhs = 2.5 * derivative(f, k).data - 0.75 * derivative(g, k).data
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 / grid.h ** k)


def test_discrete_integration_by_parts():
    for n in (64, 128):
        grid = GridSpec(n)
        s = grid.nodes
        f = VecField(grid, np.column_stack([np.sin(np.pi * s), s ** 2, np.cos(s)]))
        g = VecField(grid, np.column_stack([s, np.exp(s), np.sin(2 * s)]))
        boundary = f.dot(g)
        lhs = grid.integrate(f.dot(g.d(1))) + grid.integrate(f.d(1).dot(g))
        assert abs(lhs - (boundary[-1] - boundary[0])) <= 10 * grid.h ** 2


def test_boundary_derivatives_exact_on_quartics():
    grid = GridSpec(16)
    s = grid.nodes
    p = 1 + 2 * s - s ** 2 + 0.5 * s ** 3 + 0.25 * s ** 4
    left = grid.boundary_derivatives(p, right=False, order=4)
    right = grid.boundary_derivatives(p, right=True, order=4)
    assert np.allclose(left, [1.0, 2.0, -2.0, 3.0, 6.0], rtol=1e-8, atol=1e-7)
    assert np.allclose(right, [2.75, 2.5, 4.0, 9.0, 6.0], rtol=1e-8, atol=1e-7)


def test_boundary_derivatives_converge_at_fourth_order():
    for k in (1, 2):
        errors = []
        for n in (16, 32):
            grid = GridSpec(n)
            d = grid.boundary_derivatives(np.exp(grid.nodes), right=True, order=k)
            errors.append(abs(d[k] - np.e))
        assert errors[0] / errors[1] >= 10


def test_boundary_derivatives_reject_high_orders():
    grid = GridSpec(16)
    with pytest.raises(ValidationError):
        grid.boundary_derivatives(grid.nodes, right=False, order=5)
    with pytest.raises(ValidationError):
        grid.boundary_derivatives(np.zeros(5), right=False, order=1)


def test_resolution_error_carries_validation_kind():
    assert ResolutionError().kind == "validation"
    assert "insufficient resolution" in str(ResolutionError())


def main():
    """Run this module's tests"""
    return pytest.main([__file__, "-q"])


if __name__ == "__main__":
    sys.exit(main())
