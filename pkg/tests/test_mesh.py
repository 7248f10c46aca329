import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtdtopo.mesh import (ELEMENT, NODAL, DesignField, ScalarField, StructuredGrid, build_grid,
                          element_to_nodal, nodal_to_element)


def test_smallest_grid():
    g = build_grid((1, 1), (1.0, 1.0))
    assert g.n_elements == 1
    assert g.n_nodes == 4


def test_fine_3d_grid_counts():
    g = build_grid((120, 60, 30), (2.0, 1.0, 0.5))
    assert g.n_elements == 216_000
    np.testing.assert_allclose(g.h, (1 / 60, 1 / 60, 1 / 60), rtol=1e-14)


def test_element_node_numbering_golden():
    g = build_grid((2, 2), (1.0, 1.0))
    assert set(g.element_nodes[0]) == {0, 1, 4, 3}
    assert list(g.element_nodes[0]) == [0, 1, 4, 3]
    assert list(g.element_nodes[3]) == [4, 5, 8, 7]


def test_3d_node_numbering_x_fastest():
    g = build_grid((2, 1, 1), (2.0, 1.0, 1.0))
    np.testing.assert_array_equal(g.node_coords[:3, 0], [0.0, 1.0, 2.0])
    assert list(g.element_nodes[0]) == [0, 1, 4, 3, 6, 7, 10, 9]


def test_boundary_tags():
    g = build_grid((4, 2), (2.0, 1.0), {"left": lambda x: x[:, 0] == 0.0})
    np.testing.assert_array_equal(g.tags["left"], [0, 5, 10])


@pytest.mark.parametrize("dims,lengths", [((0, 2), (1, 1)), ((2,), (1,)), ((2, 2), (1, -1)),
                                          ((2, 2), (1, 1, 1))])
def test_invalid_grid(dims, lengths):
    with pytest.raises(ValueError):
        build_grid(dims, lengths)


def test_grid_arrays_read_only():
    g = build_grid((2, 2), (1.0, 1.0))
    with pytest.raises(ValueError):
        g.node_coords[0, 0] = 5.0


def test_element_to_nodal_constant():
    g = build_grid((3, 2), (1.0, 1.0))
    out = element_to_nodal(ScalarField(g, ELEMENT, np.full(6, 2.5)))
    np.testing.assert_allclose(out.values, 2.5)


def test_element_to_nodal_shared_edge():
    g = build_grid((2, 1), (2.0, 1.0))
    out = element_to_nodal(ScalarField(g, ELEMENT, [0.0, 1.0]))
    np.testing.assert_allclose(out.values[[1, 4]], 0.5)


def test_element_to_nodal_center_node():
    g = build_grid((2, 2), (1.0, 1.0))
    out = element_to_nodal(ScalarField(g, ELEMENT, [1.0, 2.0, 3.0, 4.0]))
    assert out.values[4] == pytest.approx(2.5)


def test_nodal_to_element_linear_midpoint():
    g = build_grid((1, 1), (1.0, 1.0))
    out = nodal_to_element(ScalarField(g, NODAL, [0.0, 0.0, 1.0, 1.0]))
    assert out.values[0] == pytest.approx(0.5)


def test_round_trip_linear_field_interior():
    g = build_grid((8, 5), (2.0, 1.0))
    cx = g.element_centroids[:, 0]
    back = nodal_to_element(element_to_nodal(ScalarField(g, ELEMENT, 3.0 * cx - 1.0)))
    ix = np.arange(g.n_elements) % 8
    iy = np.arange(g.n_elements) // 8
    interior = (ix > 0) & (ix < 7)
    # rows away from the left/right boundary reproduce the linear field
    np.testing.assert_allclose(back.values[interior], (3.0 * cx - 1.0)[interior], atol=1e-13)
    assert iy.max() == 4


def test_wrong_location_rejected():
    g = build_grid((1, 1), (1.0, 1.0))
    with pytest.raises(ValueError):
        element_to_nodal(ScalarField(g, NODAL, np.zeros(4)))
    with pytest.raises(ValueError):
        ScalarField(g, ELEMENT, np.zeros(4))


def test_design_field_two_valued():
    g = build_grid((2, 1), (1.0, 1.0))
    with pytest.raises(ValueError):
        DesignField(g, [1.0, 0.5], 0.1)
    d = DesignField.from_mask(g, [True, False], 0.1)
    np.testing.assert_array_equal(d.chi, [1.0, 0.1])
    np.testing.assert_allclose(d.delta_chi, [-0.9, 0.9])


@given(st.integers(1, 6), st.integers(1, 6), st.floats(-5, 5))
def test_element_to_nodal_preserves_constants(nx, ny, c):
    g = build_grid((nx, ny), (1.0, 2.0))
    out = element_to_nodal(ScalarField(g, ELEMENT, np.full(g.n_elements, c)))
    np.testing.assert_allclose(out.values, c, atol=1e-12 * max(1, abs(c)))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4))
def test_counts_consistent_3d(nx, ny, nz):
    g = StructuredGrid((nx, ny, nz), (1.0, 1.0, 1.0))
    assert g.n_nodes == (nx + 1) * (ny + 1) * (nz + 1)
    assert g.element_nodes.max() == g.n_nodes - 1
    assert np.isclose(g.element_volume * g.n_elements, g.volume)
