"""Structured quad/hex grids, scalar fields on them, and the two-valued design field.

Nodes and elements are numbered lexicographically with x fastest::

    node(i, j[, k]) = i + (nx + 1) * (j + (ny + 1) * k)
    elem(i, j[, k]) = i + nx * (j + ny * k)

Element connectivity is counter-clockwise in the xy-plane, bottom face first
in 3D, so element 0 of a 2x2 grid is ``[0, 1, 4, 3]``.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ._validation import check_array_1d

NODAL = "nodal"
ELEMENT = "element"


class StructuredGrid:
    """Uniform structured grid of bilinear quads (2D) or trilinear hexahedra (3D).

    Parameters
    ----------
    dims : tuple of int
        Element counts per axis, ``(nx, ny)`` or ``(nx, ny, nz)``.
    lengths : tuple of float
        Physical extents per axis.
    boundary_specs : dict, optional
        Maps a tag name to a predicate ``f(coords) -> bool mask`` evaluated on
        the ``(n_nodes, dim)`` node coordinate array.

    The grid is treated as immutable after construction; all arrays are
    marked read-only.
    """

    def __init__(self, dims, lengths, boundary_specs=None):
        dims = tuple(int(d) for d in dims)
        lengths = tuple(float(v) for v in lengths)
        if len(dims) not in (2, 3):
            raise ValueError(f"only 2D and 3D grids are supported, got dims={dims}")
        if len(lengths) != len(dims):
            raise ValueError("dims and lengths must have the same length")
        if any(d < 1 for d in dims):
            raise ValueError(f"all element counts must be >= 1, got {dims}")
        if any(not np.isfinite(v) or v <= 0 for v in lengths):
            raise ValueError(f"all lengths must be positive, got {lengths}")

        self.dims = dims
        self.lengths = lengths
        self.dim = len(dims)
        self.h = tuple(v / d for v, d in zip(lengths, dims))
        self.node_dims = tuple(d + 1 for d in dims)
        self.n_elements = int(np.prod(dims))
        self.n_nodes = int(np.prod(self.node_dims))
        self.element_volume = float(np.prod(self.h))
        self.volume = float(np.prod(lengths))

        axes = [np.linspace(0.0, L, n) for L, n in zip(lengths, self.node_dims)]
        # indexing="ij" on reversed axes gives x fastest after ravel
        mesh = np.meshgrid(*axes[::-1], indexing="ij")
        self.node_coords = np.stack([m.ravel() for m in mesh[::-1]], axis=1)
        self.element_nodes = self._connectivity()
        self.element_centroids = self.node_coords[self.element_nodes].mean(axis=1)
        for arr in (self.node_coords, self.element_nodes, self.element_centroids):
            arr.flags.writeable = False

        self.tags = {}
        for name, pred in (boundary_specs or {}).items():
            mask = np.asarray(pred(self.node_coords), dtype=bool)
            if mask.shape != (self.n_nodes,):
                raise ValueError(f"boundary predicate {name!r} returned shape {mask.shape}")
            idx = np.flatnonzero(mask)
            idx.flags.writeable = False
            self.tags[name] = idx

    def __repr__(self):
        return f"StructuredGrid(dims={self.dims}, lengths={self.lengths})"

    def node_index(self, *ijk):
        idx = 0
        stride = 1
        for i, n in zip(ijk, self.node_dims):
            idx = idx + np.asarray(i) * stride
            stride *= n
        return idx

    def element_index(self, *ijk):
        idx = 0
        stride = 1
        for i, n in zip(ijk, self.dims):
            idx = idx + np.asarray(i) * stride
            stride *= n
        return idx

    def _connectivity(self):
        ranges = [np.arange(d) for d in self.dims]
        mesh = np.meshgrid(*ranges[::-1], indexing="ij")
        ijk = [m.ravel() for m in mesh[::-1]]
        quad = [(0, 0), (1, 0), (1, 1), (0, 1)]
        if self.dim == 2:
            offsets = quad
        else:
            offsets = [(a, b, 0) for a, b in quad] + [(a, b, 1) for a, b in quad]
        cols = [self.node_index(*[c + o for c, o in zip(ijk, off)]) for off in offsets]
        return np.stack(cols, axis=1).astype(np.int64)

    @property
    def nodes_per_element(self):
        return 2 ** self.dim

    def boundary_facets(self):
        """Return ``(facet_nodes, measure)`` for every facet on the outer boundary."""
        if hasattr(self, "_facets"):
            return self._facets
        facets = []
        measures = []
        for axis in range(self.dim):
            others = [a for a in range(self.dim) if a != axis]
            measure = float(np.prod([self.h[a] for a in others]))
            for side in (0, self.dims[axis]):
                ranges = [np.arange(self.dims[a]) for a in others]
                grids = np.meshgrid(*ranges, indexing="ij")
                base = [g.ravel() for g in grids]
                if len(others) == 1:
                    offs = [(0,), (1,)]
                else:
                    offs = [(0, 0), (1, 0), (1, 1), (0, 1)]
                cols = []
                for off in offs:
                    ijk = [None] * self.dim
                    ijk[axis] = np.full_like(base[0], side)
                    for a, b, o in zip(others, base, off):
                        ijk[a] = b + o
                    cols.append(self.node_index(*ijk))
                facets.append(np.stack(cols, axis=1))
                measures.append(np.full(base[0].shape, measure))
        self._facets = (np.concatenate(facets), np.concatenate(measures))
        return self._facets

    def boundary_weights(self, nodes):
        """Tributary measure ``int N_a dGamma`` of each node over boundary facets
        whose nodes all lie in ``nodes``.

        Returns a length-``n_nodes`` array; zero away from the selected facets.
        This is the consistent lumping of a uniform traction on bilinear facets.
        """
        facet_nodes, measure = self.boundary_facets()
        selected = np.zeros(self.n_nodes, dtype=bool)
        selected[np.asarray(nodes, dtype=np.int64)] = True
        use = selected[facet_nodes].all(axis=1)
        w = np.zeros(self.n_nodes)
        per_node = measure[use] / facet_nodes.shape[1]
        for col in facet_nodes[use].T:
            np.add.at(w, col, per_node)
        return w

    def node_element_counts(self):
        counts = np.zeros(self.n_nodes)
        np.add.at(counts, self.element_nodes.ravel(), 1.0)
        return counts


def build_grid(dims, lengths, boundary_specs=None):
    """Build a :class:`StructuredGrid`; see the class for argument meaning."""
    return StructuredGrid(dims, lengths, boundary_specs)


@dataclass
class ScalarField:
    """Real values on the nodes or elements of a grid."""

    grid: StructuredGrid
    location: str
    values: np.ndarray

    def __post_init__(self):
        if self.location not in (NODAL, ELEMENT):
            raise ValueError(f"location must be {NODAL!r} or {ELEMENT!r}")
        size = self.grid.n_nodes if self.location == NODAL else self.grid.n_elements
        self.values = check_array_1d(self.values, size, f"{self.location} field")


@dataclass
class DesignField:
    """Per-element characteristic function with values in ``{beta, 1}``."""

    grid: StructuredGrid
    chi: np.ndarray
    beta: float
    cut: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.chi = check_array_1d(self.chi, self.grid.n_elements, "chi")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        ok = (self.chi == self.beta) | (self.chi == 1.0)
        if not ok.all():
            raise ValueError("chi must take exactly the values beta or 1")

    @classmethod
    def full(cls, grid, beta):
        return cls(grid, np.ones(grid.n_elements), beta)

    @classmethod
    def from_mask(cls, grid, hard, beta, cut=None):
        chi = np.where(np.asarray(hard, dtype=bool), 1.0, beta)
        return cls(grid, chi, beta, cut or {})

    @property
    def hard(self):
        return self.chi == 1.0

    @property
    def delta_chi(self):
        """Phase-exchange increment: ``-(1-beta)`` on hard, ``+(1-beta)`` on soft."""
        return np.where(self.hard, -(1.0 - self.beta), 1.0 - self.beta)

    def l2_distance(self, other):
        """``(sum_e (chi_e - chi'_e)^2 |Omega_e|)^(1/2)``."""
        d = self.chi - other.chi
        return float(np.sqrt(np.sum(d * d) * self.grid.element_volume))


def element_to_nodal(f):
    """Average element values onto nodes (volume-weighted; uniform grids give the mean)."""
    if f.location != ELEMENT:
        raise ValueError("element_to_nodal expects an element-located field")
    g = f.grid
    acc = np.zeros(g.n_nodes)
    for col in g.element_nodes.T:
        np.add.at(acc, col, f.values)
    return ScalarField(g, NODAL, acc / g.node_element_counts())


def nodal_to_element(f):
    """Mean of each element's node values (the centroid value of the multilinear field)."""
    if f.location != NODAL:
        raise ValueError("nodal_to_element expects a nodal field")
    g = f.grid
    return ScalarField(g, ELEMENT, f.values[g.element_nodes].mean(axis=1))


def corner_offsets(dim):
    """Reference-cube corner signs in element-local node order."""
    quad = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    if dim == 2:
        return np.array(quad, dtype=float)
    return np.array([q + (-1,) for q in quad] + [q + (1,) for q in quad], dtype=float)


def gauss_points(dim, order=2):
    """Tensor Gauss-Legendre points on [-1, 1]^dim and weights."""
    x, w = np.polynomial.legendre.leggauss(order)
    pts = np.array(list(product(x, repeat=dim)))[:, ::-1]
    wts = np.array([np.prod(c) for c in product(w, repeat=dim)])
    return pts, wts


def shape_functions(xi):
    """Multilinear shape functions and reference derivatives at one point.

    Returns ``N`` (n_nodes,) and ``dN`` (n_nodes, dim) with respect to the
    reference coordinates.
    """
    xi = np.asarray(xi, dtype=float)
    dim = xi.shape[0]
    c = corner_offsets(dim)
    terms = 1.0 + c * xi
    N = np.prod(terms, axis=1) / 2 ** dim
    dN = np.empty((c.shape[0], dim))
    for a in range(dim):
        others = np.prod(np.delete(terms, a, axis=1), axis=1)
        dN[:, a] = c[:, a] * others / 2 ** dim
    return N, dN
