"""Laplacian smoothing of element energy fields onto nodes.

Solves ``psi_tau - div(eps^2 grad psi_tau) = psi`` with zero Neumann
conditions by Galerkin finite elements::

    (M + sum_a eps_a^2 K_a) psi_tau = int N^T psi dOmega

``M`` is the consistent mass matrix and ``K_a`` the stiffness of the
derivative along axis ``a``; ``eps_a = tau_a * h_a``.  Giving ``tau`` per axis
yields the orthotropic (extrusion) operator.  The factorization is built once
and reused for every smoothing call.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_array_1d, per_axis
from .mesh import ELEMENT, NODAL, ScalarField, gauss_points, shape_functions


class SmoothingOperator:
    """Assembled and factorized ``G = M + sum_a eps_a^2 K_a`` for one grid."""

    def __init__(self, grid, tau):
        tau = per_axis(tau, grid.dim, "tau")
        if any(t < 0 or not np.isfinite(t) for t in tau):
            raise ValueError(f"tau must be finite and >= 0, got {tau}")
        self.grid = grid
        self.tau = tau
        self.epsilon = tuple(t * h for t, h in zip(tau, grid.h))

        jac = np.asarray(grid.h) / 2.0
        detj = float(np.prod(jac))
        pts, wts = gauss_points(grid.dim, 2)
        nen = grid.nodes_per_element
        Me = np.zeros((nen, nen))
        Ka = np.zeros((grid.dim, nen, nen))
        for p, w in zip(pts, wts):
            N, dN = shape_functions(p)
            dN = dN / jac
            Me += w * detj * np.outer(N, N)
            for a in range(grid.dim):
                Ka[a] += w * detj * np.outer(dN[:, a], dN[:, a])
        Ge = Me + np.einsum("a,aij->ij", np.square(self.epsilon), Ka)

        en = grid.element_nodes
        rows = np.repeat(en, nen, axis=1).ravel()
        cols = np.tile(en, (1, nen)).ravel()
        ne = grid.n_elements

        def glob(Ae):
            return sp.coo_matrix((np.tile(Ae.ravel(), ne), (rows, cols)),
                                 shape=(grid.n_nodes, grid.n_nodes)).tocsc()

        self.M = glob(Me)
        self.K = [glob(Ka[a]) for a in range(grid.dim)]
        self.G = glob(Ge)
        self._rhs_weight = detj * sum(w * shape_functions(p)[0] for p, w in zip(pts, wts))
        try:
            self._lu = spla.splu(self.G)
        except RuntimeError as exc:
            raise RuntimeError("smoothing operator factorization failed") from exc

    def rhs(self, xi):
        """``int N^T xi dOmega`` for an element-constant field."""
        g = self.grid
        f = np.zeros(g.n_nodes)
        contrib = xi[:, None] * self._rhs_weight[None, :]
        np.add.at(f, g.element_nodes.ravel(), contrib.ravel())
        return f

    def apply(self, xi):
        """Smooth raw element values; returns nodal values."""
        return self._lu.solve(self.rhs(xi))


def build_operator(grid, tau):
    return SmoothingOperator(grid, tau)


def smooth(op, xi):
    """Smooth an element :class:`ScalarField` (or raw array) to a nodal field."""
    if isinstance(xi, ScalarField):
        if xi.location != ELEMENT:
            raise ValueError("smoothing expects an element-located field")
        values = xi.values
    else:
        values = check_array_1d(xi, op.grid.n_elements, "xi")
    out = op.apply(values)
    return ScalarField(op.grid, NODAL, out)


class LaplacianSmoother(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit(grid)`` builds the operator, ``transform(xi)`` smooths.

    Parameters
    ----------
    tau : float or sequence of float
        Filter length in element sizes, per axis or isotropic.
    """

    def __init__(self, tau=1.0):
        self.tau = tau

    def fit(self, grid, y=None):
        self.operator_ = SmoothingOperator(grid, self.tau)
        self.epsilon_ = self.operator_.epsilon
        return self

    def transform(self, xi):
        check_is_fitted(self, "operator_")
        values = xi.values if isinstance(xi, ScalarField) else xi
        values = check_array_1d(values, self.operator_.grid.n_elements, "xi")
        return self.operator_.apply(values)
