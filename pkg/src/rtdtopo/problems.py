"""State problems and the benchmark library.

Presets are reduced-resolution 2D/3D versions of the classic benchmarks:
cantilever, arch bridge (quarter domain) and gripper (half domain in 2D).
The port and support extents below are assumptions; only the aspect ratios
are taken from the original geometry.
"""

from dataclasses import dataclass, field

import numpy as np

from .elasticity import ElementKernels, LoadCase, Material, Spring, assemble, traction_load
from .mesh import StructuredGrid
from .sensitivity import COMPLIANCE, MECHANISM, compliance_energy, mechanism_energy


@dataclass
class State:
    """Solved state for one design."""

    system: object
    d1: np.ndarray
    d2: np.ndarray
    cost: float
    energy: object


@dataclass
class TopologyProblem:
    """Grid, material, supports and loads of a volume-constrained design problem.

    ``kind`` is ``"compliance"`` (cost ``f . d``) or ``"mechanism"`` (cost
    ``-one_vert . d1`` with the auxiliary load ``one_vert``).
    """

    grid: StructuredGrid
    material: Material
    fixed_dofs: np.ndarray
    loads: LoadCase
    kind: str = COMPLIANCE
    one_vert: np.ndarray = None
    solver: str = "direct"
    name: str = "custom"
    kernels: ElementKernels = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in (COMPLIANCE, MECHANISM):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kind == MECHANISM and self.one_vert is None:
            raise ValueError("mechanism problems need the auxiliary load one_vert")
        self.fixed_dofs = np.unique(np.asarray(self.fixed_dofs, dtype=np.int64))
        if self.fixed_dofs.size == 0:
            raise ValueError("at least one displacement constraint is required")
        self.kernels = ElementKernels(self.grid, self.material)

    @property
    def force(self):
        return self.loads.force

    @property
    def beta(self):
        return self.material.beta

    def assemble(self, design, vol_plus=None):
        return assemble(self.grid, design, self.material, vol_plus, self.loads,
                        self.fixed_dofs, kernels=self.kernels, solver=self.solver)

    def cost(self, system, d1=None):
        if d1 is None:
            d1 = system.solve(self.force)
        if self.kind == COMPLIANCE:
            return float(self.force @ d1)
        return -float(self.one_vert @ d1)

    def analyze(self, design, vol_plus=None):
        """Assemble, solve and evaluate cost and energy field for ``design``."""
        system = self.assemble(design, vol_plus)
        d1 = system.solve(self.force)
        D = self.kernels.D
        m = self.material.m
        s1 = system.element_strains(d1)
        frac = None if vol_plus is None else np.asarray(vol_plus) / self.grid.element_volume
        if self.kind == COMPLIANCE:
            energy = compliance_energy(design, s1, D, m, system.mixed, frac)
            return State(system, d1, d1, float(self.force @ d1), energy)
        d2 = system.solve(self.one_vert)
        s2 = system.element_strains(d2)
        energy = mechanism_energy(design, s1, s2, D, m, system.mixed, frac)
        return State(system, d1, d2, -float(self.one_vert @ d1), energy)


def _near(a, b, scale):
    return np.abs(a - b) <= 1e-9 * scale


def _dofs(nodes, dim, comps):
    nodes = np.asarray(nodes, dtype=np.int64)
    return np.concatenate([nodes * dim + c for c in comps])


def cantilever_2d(nx=96, ny=48, lengths=(2.0, 1.0), material=None, load_height=0.1,
                  traction=1.0, solver="direct"):
    """Plane-strain cantilever: left edge clamped, downward load on the lower right edge."""
    L, H = lengths
    # the loaded strip is at least one element tall so coarse grids stay loaded
    height = max(load_height * H, H / ny)
    specs = {
        "clamp": lambda x: _near(x[:, 0], 0.0, L),
        "load": lambda x: _near(x[:, 0], L, L) & (x[:, 1] <= height + 1e-9 * H),
    }
    grid = StructuredGrid((nx, ny), (L, H), specs)
    mat = material or Material()
    f = traction_load(grid, grid.tags["load"], (0.0, -traction / height))
    fixed = _dofs(grid.tags["clamp"], 2, (0, 1))
    return TopologyProblem(grid, mat, fixed, LoadCase(f), COMPLIANCE, solver=solver,
                           name="cantilever2d")


def cantilever_3d(nx=24, ny=12, nz=6, lengths=(2.0, 1.0, 0.5), material=None,
                  load_height=0.1, traction=1.0, solver="direct"):
    """Half cantilever (symmetry plane z = 0) with a line-like load at the lower right."""
    L, H, W = lengths
    height = max(load_height * H, H / ny)
    specs = {
        "clamp": lambda x: _near(x[:, 0], 0.0, L),
        "symmetry": lambda x: _near(x[:, 2], 0.0, W),
        "load": lambda x: _near(x[:, 0], L, L) & (x[:, 1] <= height + 1e-9 * H),
    }
    grid = StructuredGrid((nx, ny, nz), lengths, specs)
    mat = material or Material()
    f = traction_load(grid, grid.tags["load"], (0.0, -traction / height, 0.0))
    fixed = np.concatenate([_dofs(grid.tags["clamp"], 3, (0, 1, 2)),
                            _dofs(grid.tags["symmetry"], 3, (2,))])
    return TopologyProblem(grid, mat, fixed, LoadCase(f), COMPLIANCE, solver=solver,
                           name="cantilever3d")


def bridge_3d(nx=60, ny=51, nz=10, lengths=(1.0, 0.85, 1.0 / 6.0), material=None,
              support_width=0.1, traction=1.0, solver="direct"):
    """Quarter arch bridge.

    Mid-span symmetry at ``x = 0`` and mid-width symmetry at ``z = 0``;
    uniform downward deck load on the top face; pinned abutment on the
    bottom face for ``x >= (1 - support_width) * Lx``.
    """
    Lx, Ly, Lz = lengths
    specs = {
        "span_symmetry": lambda x: _near(x[:, 0], 0.0, Lx),
        "width_symmetry": lambda x: _near(x[:, 2], 0.0, Lz),
        "deck": lambda x: _near(x[:, 1], Ly, Ly),
        "support": lambda x: _near(x[:, 1], 0.0, Ly) & (x[:, 0] >= (1 - support_width) * Lx - 1e-9),
    }
    grid = StructuredGrid((nx, ny, nz), lengths, specs)
    mat = material or Material()
    f = traction_load(grid, grid.tags["deck"], (0.0, -traction, 0.0))
    fixed = np.concatenate([
        _dofs(grid.tags["span_symmetry"], 3, (0,)),
        _dofs(grid.tags["width_symmetry"], 3, (2,)),
        _dofs(grid.tags["support"], 3, (0, 1, 2)),
    ])
    return TopologyProblem(grid, mat, fixed, LoadCase(f), COMPLIANCE, solver=solver,
                           name="bridge3d")


GRIPPER_MATERIAL = Material(E=210e9, nu=0.31, alpha=1e-2, m=3)


def gripper_2d(nx=80, ny=40, lengths=(1.0e-4, 5.0e-5), material=None, k_in=3.19e14,
               k_out=3.19e13, f_in=3.2e13, f_out=3.2e10, port=0.1, solver="direct"):
    """Half gripper with the symmetry axis along ``y = 0``.

    Input port: left edge, ``y <= port * H``, pushed in +x through a spring
    ``k_in``.  Support: left edge, ``y >= (1 - 2 port) H``, clamped.  Output
    (jaw): right edge, ``port H <= y <= 2 port H``, restrained by the gripped
    object spring ``k_out`` in y; the auxiliary load ``one_vert`` acts in -y
    (closing), so minimizing ``-one_vert . d`` maximizes the jaw closing.
    Spring and traction values are per unit area.
    """
    L, H = lengths
    tol = 1e-9 * H
    specs = {
        "symmetry": lambda x: _near(x[:, 1], 0.0, H),
        "input": lambda x: _near(x[:, 0], 0.0, L) & (x[:, 1] <= port * H + tol),
        "support": lambda x: _near(x[:, 0], 0.0, L) & (x[:, 1] >= (1 - 2 * port) * H - tol),
        "output": lambda x: _near(x[:, 0], L, L) & (x[:, 1] >= port * H - tol)
        & (x[:, 1] <= 2 * port * H + tol),
    }
    grid = StructuredGrid((nx, ny), lengths, specs)
    mat = material or GRIPPER_MATERIAL
    f = traction_load(grid, grid.tags["input"], (f_in, 0.0))
    one_vert = traction_load(grid, grid.tags["output"], (0.0, -f_out))
    springs = [Spring(grid.tags["input"], k_in, 0), Spring(grid.tags["output"], k_out, 1)]
    fixed = np.concatenate([_dofs(grid.tags["symmetry"], 2, (1,)),
                            _dofs(grid.tags["support"], 2, (0, 1))])
    return TopologyProblem(grid, mat, fixed, LoadCase(f, springs), MECHANISM, one_vert,
                           solver=solver, name="gripper2d")


PRESETS = {
    "cantilever2d": cantilever_2d,
    "cantilever3d": cantilever_3d,
    "bridge3d": bridge_3d,
    "gripper2d": gripper_2d,
}
