import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtdtopo.geometry import (CUT, HARD, SOFT, classify_and_measure, export_isosurface,
                              hard_volumes, soft_fraction, tessellate_cell)
from rtdtopo.mesh import build_grid


def sphere_grid(r0, n_per_radius):
    """Cube of side ``3 r0`` with ``h = r0 / n_per_radius``, sphere in the centre."""
    n = 3 * n_per_radius
    g = build_grid((n, n, n), (3 * r0,) * 3)
    psi = r0 - np.linalg.norm(g.node_coords - 1.5 * r0, axis=1)
    return g, psi


@pytest.mark.parametrize("dim", [2, 3])
def test_tessellation_covers_cell(dim):
    h = np.array([0.5, 0.25, 2.0][:dim])
    origin = np.array([1.0, -1.0, 0.5][:dim])
    coords, values = tessellate_cell(np.arange(2 ** dim, dtype=float), origin, h)
    assert coords.shape[1:] == (dim + 1, dim)
    vols = [abs(np.linalg.det(c[1:] - c[0])) for c in coords]
    assert sum(vols) / math.factorial(dim) == pytest.approx(np.prod(h), rel=1e-14)
    assert np.all(np.asarray(vols) > 0)


@given(st.floats(-10, 10))
def test_tessellation_constant_values(c):
    _, values = tessellate_cell(np.full(8, c), np.zeros(3), np.ones(3))
    np.testing.assert_allclose(values, c, rtol=1e-14, atol=1e-14)


def test_tessellation_reproduces_linear_field():
    g = build_grid((1, 1, 1), (1.0, 2.0, 3.0))
    a = np.array([0.3, -0.2, 0.7])
    psi = g.node_coords @ a + 0.1
    coords, values = tessellate_cell(psi[g.element_nodes[0]], np.zeros(3), g.h)
    np.testing.assert_allclose(values, coords @ a + 0.1, rtol=1e-13, atol=1e-13)


def test_all_positive_is_hard():
    g = build_grid((4, 3, 2), (1.0, 1.0, 1.0))
    snap = classify_and_measure(g, np.ones(g.n_nodes))
    assert np.all(snap.phase == HARD)
    assert snap.hard_fraction == 1.0
    assert snap.interface_measure == 0.0
    pts, cells, normals = export_isosurface(snap)
    assert pts.shape == (0, 3) and cells.shape == (0, 3) and normals.shape == (0, 3)


def test_phases_classified():
    g = build_grid((3, 1), (3.0, 1.0))
    psi = 1.5 - g.node_coords[:, 0]
    _, phase = hard_volumes(g, psi)
    np.testing.assert_array_equal(phase, [HARD, CUT, SOFT])


@pytest.mark.parametrize("dims", [(5, 4, 3), (7, 6, 5)])
def test_plane_cut_volume_exact(dims):
    g = build_grid(dims, (1.0, 1.0, 1.0))
    x = g.node_coords
    psi = 0.3 + 0.2 * x[:, 0] + 0.1 * x[:, 1] - 0.7 * x[:, 2]
    vol, _ = hard_volumes(g, psi)
    exact = (0.3 + 0.2 * 0.5 + 0.1 * 0.5) / 0.7
    assert abs(vol.sum() - exact) <= 1e-12 * exact


def test_plane_cut_area_and_normals():
    g = build_grid((5, 4, 3), (1.0, 1.0, 1.0))
    a = np.array([0.2, 0.1, -0.7])
    psi = 0.3 + g.node_coords @ a
    snap = classify_and_measure(g, psi)
    # graph area of z = f(x, y) over the unit square
    exact = np.linalg.norm(a) / 0.7
    assert snap.interface_measure == pytest.approx(exact, rel=1e-12)
    np.testing.assert_allclose(snap.normals, np.tile(a / np.linalg.norm(a), (len(snap.normals), 1)),
                               atol=1e-12)


def test_line_cut_2d_length():
    g = build_grid((6, 5), (1.0, 1.0))
    psi = 0.55 - g.node_coords[:, 1] - 0.1 * g.node_coords[:, 0]
    snap = classify_and_measure(g, psi)
    assert snap.interface_measure == pytest.approx(np.sqrt(1.01), rel=1e-12)
    assert snap.hard_volume == pytest.approx(0.5, rel=1e-12)


def test_sphere_volume_within_one_percent(oracle):
    g, psi = sphere_grid(0.3, 10)
    vol, _ = hard_volumes(g, psi)
    exact = oracle["sphere_r0.3"]
    assert abs(vol.sum() - exact) / exact < 0.01


def test_sphere_volume_second_order(oracle):
    exact = oracle["sphere_r0.3"]
    errs = []
    for n in (5, 10, 20):
        g, psi = sphere_grid(0.3, n)
        errs.append(abs(hard_volumes(g, psi)[0].sum() - exact) / exact)
    order = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(order >= 1.8)


def test_sphere_normals_radial():
    g, psi = sphere_grid(0.3, 20)
    snap = classify_and_measure(g, psi)
    centres = snap.patches.mean(axis=1)
    inward = 1.5 * 0.3 - centres
    inward /= np.linalg.norm(inward, axis=1)[:, None]
    cosang = np.einsum("nd,nd->n", snap.normals, inward)
    assert np.degrees(np.arccos(np.clip(cosang, -1, 1))).max() < 5.0


def test_partition_random_fields(rng):
    for dims in [(4, 3)] * 50 + [(3, 3, 2)] * 50:
        g = build_grid(dims, (1.0,) * len(dims))
        psi = rng.standard_normal(g.n_nodes)
        snap = classify_and_measure(g, psi)
        np.testing.assert_allclose(snap.vol_plus + snap.vol_minus, g.element_volume,
                                   rtol=1e-10)
        assert np.all(snap.vol_plus >= -1e-15) and np.all(snap.vol_minus >= -1e-15)
        assert snap.hard_fraction + snap.soft_fraction == pytest.approx(1.0, abs=1e-10)
        for c in snap.cut_elements():
            c.check(g.element_volume, rtol=1e-10)


def test_soft_fraction_monotone_in_iso(rng):
    g = build_grid((6, 5), (1.0, 1.0))
    psi = rng.standard_normal(g.n_nodes)
    fr = [soft_fraction(g, psi, lam) for lam in np.linspace(-3, 3, 41)]
    assert np.all(np.diff(fr) >= -1e-15)
    assert fr[0] == 0.0 and fr[-1] == 1.0


def test_zero_value_counts_as_hard():
    g = build_grid((1, 1), (1.0, 1.0))
    vol, phase = hard_volumes(g, np.zeros(4))
    assert phase[0] == HARD and vol[0] == 1.0


def test_wrong_shape_rejected():
    g = build_grid((2, 2), (1.0, 1.0))
    with pytest.raises(ValueError):
        classify_and_measure(g, np.zeros(5))
