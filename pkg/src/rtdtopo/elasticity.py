"""Relaxed bi-material linear elasticity on structured grids.

Full-phase elements use ``chi^m * int B^T D B`` with 2x2(x2) Gauss
quadrature.  Bi-material (cut) elements use a mixed formulation with
element-constant strain and stress: ``|Omega_e| * B_c^T Dbar B_c`` where
``B_c`` is evaluated at the centroid and
``Dbar = (vol_plus + alpha * vol_minus) / |Omega_e| * D``.

Dirichlet conditions are imposed by eliminating the constrained dofs, which
keeps the reduced stiffness symmetric positive definite.  Springs are added
to the diagonal of the tagged dofs.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_array_1d, check_scalar
from .mesh import gauss_points, shape_functions


class SolverError(RuntimeError):
    """Raised when the reduced stiffness cannot be factorized or solved."""


class RigidBodyError(SolverError):
    """Raised when the boundary conditions leave rigid-body modes free."""


@dataclass(frozen=True)
class Material:
    """Isotropic material with a soft-phase contrast ``alpha = beta**m``."""

    E: float = 210e9
    nu: float = 0.3
    alpha: float = 1e-6
    m: int = 5

    def __post_init__(self):
        check_scalar(self.E, "E", lo=0.0, lo_inclusive=False)
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {self.nu}")
        check_scalar(self.alpha, "alpha", lo=0.0, hi=1.0, lo_inclusive=False, hi_inclusive=False)
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"contrast exponent m must be an integer >= 1, got {self.m}")

    @property
    def beta(self):
        return self.alpha ** (1.0 / self.m)

    @property
    def lame(self):
        lam = self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
        mu = self.E / (2.0 * (1.0 + self.nu))
        return lam, mu


def constitutive_matrix(material, dim=3):
    """Voigt matrix of ``lam 1 x 1 + 2 mu I`` with engineering shear strains.

    2D is plane strain with ordering ``(xx, yy, xy)``; 3D uses
    ``(xx, yy, zz, yz, xz, xy)``.
    """
    if material.nu >= 0.5:
        raise ValueError("nu = 0.5 makes the isotropic constitutive matrix singular")
    lam, mu = material.lame
    if dim == 2:
        D = np.array([[lam + 2 * mu, lam, 0.0],
                      [lam, lam + 2 * mu, 0.0],
                      [0.0, 0.0, mu]])
    elif dim == 3:
        D = np.zeros((6, 6))
        D[:3, :3] = lam
        D[np.arange(3), np.arange(3)] = lam + 2 * mu
        D[np.arange(3, 6), np.arange(3, 6)] = mu
    else:
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    return D


def strain_displacement(dN_phys):
    """Voigt B matrix from physical shape-function derivatives ``(n_nodes, dim)``."""
    n, dim = dN_phys.shape
    if dim == 2:
        B = np.zeros((3, 2 * n))
        B[0, 0::2] = dN_phys[:, 0]
        B[1, 1::2] = dN_phys[:, 1]
        B[2, 0::2] = dN_phys[:, 1]
        B[2, 1::2] = dN_phys[:, 0]
    else:
        B = np.zeros((6, 3 * n))
        B[0, 0::3] = dN_phys[:, 0]
        B[1, 1::3] = dN_phys[:, 1]
        B[2, 2::3] = dN_phys[:, 2]
        B[3, 1::3] = dN_phys[:, 2]
        B[3, 2::3] = dN_phys[:, 1]
        B[4, 0::3] = dN_phys[:, 2]
        B[4, 2::3] = dN_phys[:, 0]
        B[5, 0::3] = dN_phys[:, 1]
        B[5, 1::3] = dN_phys[:, 0]
    return B


class ElementKernels:
    """Reference element matrices shared by every element of a uniform grid."""

    def __init__(self, grid, material):
        self.dim = grid.dim
        self.D = constitutive_matrix(material, grid.dim)
        h = np.asarray(grid.h)
        jac = h / 2.0
        detj = float(np.prod(jac))
        pts, wts = gauss_points(grid.dim, 2)
        self.gauss_B = np.array([strain_displacement(shape_functions(p)[1] / jac) for p in pts])
        self.gauss_w = wts * detj
        self.centroid_B = strain_displacement(shape_functions(np.zeros(grid.dim))[1] / jac)
        self.volume = grid.element_volume
        self.K_full = np.einsum("g,gia,ij,gjb->ab", self.gauss_w, self.gauss_B, self.D, self.gauss_B)
        self.K_centroid = self.volume * self.centroid_B.T @ self.D @ self.centroid_B


def element_stiffness(grid, material, chi_e, cut_info=None, kernels=None):
    """Stiffness of one element.

    ``cut_info`` (a :class:`~rtdtopo.geometry.CutElementData`) switches to the
    mixed bi-material element; otherwise the element is full-phase with the
    given ``chi_e``.
    """
    kern = kernels or ElementKernels(grid, material)
    if cut_info is None:
        return chi_e ** material.m * kern.K_full
    cut_info.check(grid.element_volume)
    frac = (cut_info.vol_plus + material.alpha * cut_info.vol_minus) / grid.element_volume
    return frac * kern.K_centroid


@dataclass
class Spring:
    """Distributed spring on a node set, in stiffness per unit area (N/m^3)."""

    nodes: np.ndarray
    stiffness: float
    direction: int


@dataclass
class LoadCase:
    """Nodal force vector plus spring attachments.

    ``force`` is a full-length dof vector (``n_nodes * dim``); ``springs`` are
    converted to nodal stiffness with the tributary boundary measure of their
    node sets.
    """

    force: np.ndarray
    springs: list = field(default_factory=list)

    def __post_init__(self):
        self.force = check_array_1d(self.force, name="force")
        for s in self.springs:
            if s.stiffness < 0:
                raise ValueError("spring stiffness must be nonnegative")


def traction_load(grid, nodes, traction):
    """Consistent nodal forces of a uniform traction vector over boundary facets."""
    w = grid.boundary_weights(nodes)
    f = np.zeros((grid.n_nodes, grid.dim))
    f += w[:, None] * np.asarray(traction, dtype=float)[None, :]
    return f.ravel()


def point_load(grid, node, vector):
    f = np.zeros((grid.n_nodes, grid.dim))
    f[node] = vector
    return f.ravel()


def spring_diagonal(grid, springs):
    diag = np.zeros(grid.n_nodes * grid.dim)
    for s in springs:
        w = grid.boundary_weights(s.nodes)
        if not w.any():
            # springs on interior or point sets: split evenly
            w = np.zeros(grid.n_nodes)
            w[np.asarray(s.nodes)] = 1.0 / len(s.nodes)
        diag[np.arange(grid.n_nodes) * grid.dim + s.direction] += s.stiffness * w
    return diag


def element_coefficients(design, material, vol_plus=None):
    """Per-element stiffness multipliers and the centroid-integration mask.

    Full elements get ``chi^m``; cut elements (``0 < vol_plus < |Omega_e|``)
    get the mixed volume-averaged factor.
    """
    grid = design.grid
    coef = design.chi ** material.m
    mixed = np.zeros(grid.n_elements, dtype=bool)
    if vol_plus is not None:
        vol_plus = np.asarray(vol_plus, dtype=float)
        ve = grid.element_volume
        mixed = (vol_plus > 0.0) & (vol_plus < ve)
        frac = vol_plus[mixed] / ve
        coef = coef.copy()
        coef[mixed] = frac + material.alpha * (1.0 - frac)
    return coef, mixed


class ElasticSystem:
    """Assembled stiffness for one design, with a cached factorization.

    Built by :func:`assemble`.  ``fixed`` are constrained dof indices;
    ``solve`` accepts any full-length right-hand side.
    """

    def __init__(self, grid, material, kernels, K, fixed, coef, mixed, solver="direct"):
        self.grid = grid
        self.material = material
        self.kernels = kernels
        self.K = K
        self.ndof = K.shape[0]
        self.fixed = np.asarray(fixed, dtype=np.int64)
        free = np.ones(self.ndof, dtype=bool)
        free[self.fixed] = False
        self.free = np.flatnonzero(free)
        self.coef = coef
        self.mixed = mixed
        self.solver = solver
        self._Kff = None
        self._factor = None

    @property
    def Kff(self):
        if self._Kff is None:
            self._Kff = self.K[self.free][:, self.free].tocsc()
        return self._Kff

    def _factorize(self):
        if self._factor is None:
            if self.Kff.shape[0] == 0:
                self._factor = lambda b: np.zeros_like(b)
                return self._factor
            try:
                lu = spla.splu(self.Kff, permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise RigidBodyError(
                    "stiffness is singular; boundary conditions may not preclude rigid body motion"
                ) from exc
            diag = lu.U.diagonal()
            if np.any(diag == 0) or np.any(~np.isfinite(diag)):
                raise RigidBodyError("zero pivot in stiffness factorization (rigid body motion)")
            self._factor = lu.solve
        return self._factor

    def solve(self, rhs, rtol=1e-6):
        """Displacements for a full-length load vector; constrained dofs are zero."""
        rhs = np.asarray(rhs, dtype=float)
        d = np.zeros(self.ndof)
        b = rhs[self.free]
        if not b.any():
            return d
        if self.solver == "cg":
            x = self._solve_cg(b, rtol)
        else:
            x = self._factorize()(b)
            r = self.Kff @ x - b
            rel = np.linalg.norm(r) / np.linalg.norm(b)
            # a few steps of iterative refinement before giving up; high
            # stiffness contrast makes the factorization lose digits
            for _ in range(3):
                if rel <= rtol:
                    break
                x -= self._factorize()(r)
                r = self.Kff @ x - b
                rel = np.linalg.norm(r) / np.linalg.norm(b)
            if rel > rtol:
                raise SolverError(f"relative residual {rel:.3e} exceeds {rtol:.1e}")
        d[self.free] = x
        return d

    def _solve_cg(self, b, rtol):
        A = self.Kff
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise SolverError("non-positive diagonal; matrix is not SPD")
        M = sp.diags(1.0 / diag)
        x, info = spla.cg(A, b, rtol=rtol, atol=0.0, M=M, maxiter=20 * A.shape[0])
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge (info={info})")
        return x

    def element_dofs(self):
        dim = self.grid.dim
        en = self.grid.element_nodes
        return (en[:, :, None] * dim + np.arange(dim)).reshape(en.shape[0], -1)

    def element_strains(self, d):
        """Strains at Gauss points ``(ne, ngp, nv)`` and at centroids ``(ne, nv)``."""
        de = d[self.element_dofs()]
        gauss = np.einsum("gva,ea->egv", self.kernels.gauss_B, de)
        centroid = de @ self.kernels.centroid_B.T
        return gauss, centroid


def _assembly_pattern(grid):
    dim = grid.dim
    en = grid.element_nodes
    edofs = (en[:, :, None] * dim + np.arange(dim)).reshape(en.shape[0], -1)
    nd = edofs.shape[1]
    rows = np.repeat(edofs, nd, axis=1).ravel()
    cols = np.tile(edofs, (1, nd)).ravel()
    return rows, cols


def assemble(grid, design, material, cut_data=None, loads=None, bc=(), kernels=None,
             solver="direct"):
    """Assemble the global stiffness for ``design``.

    Parameters
    ----------
    cut_data : array of per-element hard volumes, optional
        Elements with ``0 < vol_plus < |Omega_e|`` are treated as mixed
        bi-material elements.
    loads : LoadCase, optional
        Only its springs enter the stiffness.
    bc : array of int
        Constrained dof indices (prescribed zero displacement).
    """
    if design.grid is not grid:
        if design.grid.dims != grid.dims or design.grid.lengths != grid.lengths:
            raise ValueError("design does not match grid")
    kern = kernels or ElementKernels(grid, material)
    coef, mixed = element_coefficients(design, material, cut_data)
    rows, cols = _assembly_pattern(grid)
    Ke = np.where(mixed[:, None, None], kern.K_centroid[None], kern.K_full[None])
    vals = (coef[:, None, None] * Ke).ravel()
    ndof = grid.n_nodes * grid.dim
    K = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()
    if loads is not None and loads.springs:
        K = K + sp.diags(spring_diagonal(grid, loads.springs))
    K = K.tocsr()
    K.sum_duplicates()
    return ElasticSystem(grid, material, kern, K, bc, coef, mixed, solver=solver)


def solve(system, rhs, rtol=1e-6):
    return system.solve(rhs, rtol)


def compliance(f, d):
    """Structural compliance ``f . d``."""
    return float(np.dot(f, d))


def energy_norm(system, d):
    """``sum_e coef_e * eps^T D eps |Omega_e|`` with each element's own quadrature."""
    gauss, centroid = system.element_strains(d)
    kern = system.kernels
    full = np.einsum("g,egi,ij,egj->e", kern.gauss_w, gauss, kern.D, gauss)
    one = kern.volume * np.einsum("ei,ij,ej->e", centroid, kern.D, centroid)
    return float(np.sum(system.coef * np.where(system.mixed, one, full)))


def mechanism_outputs(system, force, one_vert):
    """Solve the state and auxiliary systems sharing one stiffness."""
    d1 = system.solve(force)
    d2 = system.solve(one_vert)
    return d1, d2
