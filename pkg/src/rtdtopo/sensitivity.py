"""Relaxed topological derivatives.

The stored energy fields are the lambda-free part of the discrimination
function, ``xi = -(1 - beta) dF/dchi``.  For mean compliance
``xi = 2 m (1 - beta) chi^(m-1) U`` with the nominal energy density
``U = eps^T D eps / 2`` (full-material ``D``); for compliant mechanisms
``xi = -2 m (1 - beta) chi^(m-1) U_c`` with ``U_c = eps1^T D eps2 / 2``.

Full elements average the energy density over their Gauss points; mixed
cut elements use their single centroid strain.  In a cut element the
two-valued ``chi`` is integrated exactly over the element: with hard volume
fraction ``f`` the factor ``chi^(m-1)`` becomes ``f + (1 - f) beta^(m-1)``,
which is the element mean of the pointwise RTD.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .elasticity import assemble
from .mesh import ELEMENT, ScalarField

COMPLIANCE = "compliance"
MECHANISM = "mechanism"

HARD_PHASE = "hard"
SOFT_PHASE = "soft"


@dataclass
class EnergyField:
    """Element energy field ``xi`` with the parameters that produced it."""

    field: ScalarField
    kind: str
    m: int
    beta: float

    @property
    def values(self):
        return self.field.values


def rtd_volume(point_phase, measure="hard"):
    """Derivative of a phase volume for a point in ``point_phase``.

    Exchanging a hard point removes hard volume (``-1``); a soft point adds it
    (``+1``).  ``measure="soft"`` returns the negated soft-volume derivative.
    """
    if point_phase not in (HARD_PHASE, SOFT_PHASE):
        raise ValueError(f"point_phase must be {HARD_PHASE!r} or {SOFT_PHASE!r}")
    s = -1.0 if point_phase == HARD_PHASE else 1.0
    if measure == "hard":
        return s
    if measure == "soft":
        return -s
    raise ValueError("measure must be 'hard' or 'soft'")


def rtd_perimeter(which="hard"):
    """Derivative of the hard/soft perimeter or of the interface measure: always 1."""
    if which not in ("hard", "soft", "interface"):
        raise ValueError("which must be 'hard', 'soft' or 'interface'")
    if which == "interface":
        return 0.5 * (rtd_perimeter("hard") + rtd_perimeter("soft"))
    return 1.0


def nominal_energy_density(gauss1, centroid1, mixed, D, gauss2=None, centroid2=None):
    """``eps1^T D eps2 / 2`` per element (Gauss mean on full elements)."""
    if gauss2 is None:
        gauss2, centroid2 = gauss1, centroid1
    full = 0.5 * np.einsum("egi,ij,egj->eg", gauss1, D, gauss2).mean(axis=1)
    one = 0.5 * np.einsum("ei,ij,ej->e", centroid1, D, centroid2)
    return np.where(mixed, one, full)


def _prefactor(chi, m, beta, mixed=None, hard_fraction=None):
    p = chi ** (m - 1)
    if hard_fraction is not None and mixed is not None and np.any(mixed):
        f = np.asarray(hard_fraction, dtype=float)
        p = np.where(mixed, f + (1.0 - f) * beta ** (m - 1), p)
    return 2.0 * m * (1.0 - beta) * p


def compliance_energy(design, strains, D, m, mixed=None, hard_fraction=None):
    """Energy field for mean compliance.

    ``strains`` is ``(gauss, centroid)`` as returned by
    :meth:`ElasticSystem.element_strains`; a bare ``(ne, nv)`` array is read
    as one strain per element.  ``hard_fraction`` (per element, in
    ``[0, 1]``) is only used on ``mixed`` elements.
    """
    gauss, centroid = _unpack(strains)
    if mixed is None:
        mixed = np.zeros(design.grid.n_elements, dtype=bool)
    U = nominal_energy_density(gauss, centroid, mixed, D)
    if np.any(U < -1e-12 * max(1.0, np.abs(U).max())):
        raise ArithmeticError("negative nominal energy density; D is not positive definite")
    U = np.maximum(U, 0.0)
    xi = _prefactor(design.chi, m, design.beta, mixed, hard_fraction) * U
    return EnergyField(ScalarField(design.grid, ELEMENT, xi), COMPLIANCE, m, design.beta)


def mechanism_energy(design, strains1, strains2, D, m, mixed=None, hard_fraction=None):
    """Pseudo-energy field for compliant mechanisms (sign-indefinite)."""
    g1, c1 = _unpack(strains1)
    g2, c2 = _unpack(strains2)
    if mixed is None:
        mixed = np.zeros(design.grid.n_elements, dtype=bool)
    Uc = nominal_energy_density(g1, c1, mixed, D, g2, c2)
    xi = -_prefactor(design.chi, m, design.beta, mixed, hard_fraction) * Uc
    return EnergyField(ScalarField(design.grid, ELEMENT, xi), MECHANISM, m, design.beta)


def _unpack(strains):
    if isinstance(strains, tuple):
        return strains
    s = np.asarray(strains, dtype=float)
    if s.ndim == 2:
        return s[:, None, :], s
    return s, s.mean(axis=1)


def rtd_per_unit_exchange(energy):
    """``dJ/dchi`` per unit volume, i.e. ``-xi / (1 - beta)``.

    Gives ``-2 m chi^(m-1) U`` for compliance and ``+2 m chi^(m-1) U_c`` for
    mechanisms; multiplying by ``delta_chi`` gives the RTD of the cost.
    """
    return -energy.values / (1.0 - energy.beta)


def lagrangian_rtd(energy, design, lam):
    """``dL/dchi = dJ/dchi * delta_chi + lam * sgn(delta_chi)`` per element."""
    dchi = design.delta_chi
    return rtd_per_unit_exchange(energy) * dchi + lam * np.sign(dchi)


def fd_sensitivity_oracle(problem, design, element, delta=1e-6):
    """Central difference of the cost in a continuous ``chi`` at one element.

    Returns ``(J(chi_e + delta) - J(chi_e - delta)) / (2 delta |Omega_e|)``;
    compare with :func:`rtd_per_unit_exchange`.  ``problem`` must provide
    ``material``, ``fixed_dofs``, ``loads`` and ``cost(system)``.
    """
    if delta > 1e-3:
        warnings.warn("large finite-difference step; truncation error may dominate",
                      RuntimeWarning, stacklevel=2)
    grid = design.grid
    costs = []
    for s in (+1.0, -1.0):
        d = _ContinuousDesign(grid, design.chi.copy(), design.beta)
        d.chi[element] += s * delta
        system = assemble(grid, d, problem.material, None, problem.loads, problem.fixed_dofs,
                          kernels=problem.kernels)
        costs.append(problem.cost(system))
    return (costs[0] - costs[1]) / (2.0 * delta * grid.element_volume)


@dataclass
class _ContinuousDesign:
    # chi outside {beta, 1}; only the finite-difference oracle builds these
    grid: object
    chi: np.ndarray
    beta: float
