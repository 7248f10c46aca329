"""Quick built-in oracle checks run by ``rtdtopo verify``.

Each check returns ``(name, passed, detail)``.  They use only the package
itself; the test suite holds the stricter and slower versions.
"""

import numpy as np

from .elasticity import Material
from .geometry import hard_volumes
from .mesh import DesignField, StructuredGrid
from .optimizer import make_schedule
from .problems import cantilever_2d
from .sensitivity import fd_sensitivity_oracle, rtd_per_unit_exchange
from .smoothing import SmoothingOperator


def _fd_error(alpha, hard):
    problem = cantilever_2d(3, 3, lengths=(1.0, 1.0),
                            material=Material(E=1.0, nu=0.3, alpha=alpha), load_height=1.0 / 3.0)
    design = DesignField.from_mask(problem.grid, hard, problem.beta)
    rtd = rtd_per_unit_exchange(problem.analyze(design).energy)
    fd = np.array([fd_sensitivity_oracle(problem, design, e) for e in range(9)])
    return np.max(np.abs(fd - rtd) / np.abs(rtd))


def check_sensitivity(rtol=1e-4):
    """Finite differences against the closed-form RTD on a 3x3 cantilever.

    All-hard design at the default contrast, plus a two-phase design at
    ``alpha = 1e-2`` (at ``alpha = 1e-6`` the soft-element cost differences
    drop to the roundoff level of the cost itself).
    """
    e1 = _fd_error(1e-6, np.ones(9, dtype=bool))
    e2 = _fd_error(1e-2, np.array([1, 1, 0, 1, 1, 1, 1, 0, 1], dtype=bool))
    ok = e1 <= rtol and e2 <= rtol
    return "sensitivity", bool(ok), f"max relative error {e1:.2e} (all hard), {e2:.2e} (two phase)"


def check_filter():
    """Constant preservation and mass-weighted mean preservation."""
    grid = StructuredGrid((12, 7), (1.2, 0.7))
    op = SmoothingOperator(grid, 2.0)
    const = op.apply(np.full(grid.n_elements, 3.5))
    rng = np.random.default_rng(0)
    xi = rng.standard_normal(grid.n_elements)
    out = op.apply(xi)
    mean_in = xi.sum() * grid.element_volume
    mean_out = op.M @ out
    e1 = np.max(np.abs(const - 3.5))
    e2 = abs(mean_out.sum() - mean_in) / abs(mean_in)
    return "filter", bool(e1 <= 1e-12 and e2 <= 1e-10), f"constant {e1:.1e}, mean {e2:.1e}"


def check_plane_cut():
    """Volume below an oblique plane is exact."""
    grid = StructuredGrid((5, 4, 3), (1.0, 1.0, 1.0))
    x = grid.node_coords
    psi = 0.3 + 0.2 * x[:, 0] + 0.1 * x[:, 1] - 0.7 * x[:, 2]
    vol, _ = hard_volumes(grid, psi)
    # the bound z <= (0.3 + 0.2 x + 0.1 y) / 0.7 stays inside the cube, so the
    # volume is the mean of the bound
    exact = (0.3 + 0.2 * 0.5 + 0.1 * 0.5) / 0.7
    err = abs(vol.sum() - exact) / exact
    return "plane cut", bool(err <= 1e-12), f"relative error {err:.1e}"


def check_schedule():
    s = make_schedule(40, -4.5, 0.0, 1.0)
    ok = s.times[0] == 0.0 and s.times[-1] == 1.0 and np.all(np.diff(s.times) > 0)
    return "schedule", bool(ok), f"{len(s)} times, t1={s.times[1]:.6g}"


def run_checks():
    return [check_sensitivity(), check_filter(), check_plane_cut(), check_schedule()]
