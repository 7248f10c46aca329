import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtdtopo.elasticity import Material
from rtdtopo.mesh import DesignField, build_grid
from rtdtopo.problems import TopologyProblem, cantilever_2d
from rtdtopo.sensitivity import (COMPLIANCE, MECHANISM, compliance_energy,
                                 fd_sensitivity_oracle, lagrangian_rtd, mechanism_energy,
                                 rtd_per_unit_exchange, rtd_perimeter, rtd_volume)

TWO_PHASE = np.array([1, 1, 0, 1, 1, 1, 1, 0, 1], dtype=bool)


def _cantilever(alpha):
    return cantilever_2d(3, 3, lengths=(1.0, 1.0), material=Material(E=1.0, nu=0.3, alpha=alpha),
                         load_height=1.0 / 3.0)


def _mechanism(alpha):
    c = _cantilever(alpha)
    g = c.grid
    one_vert = np.zeros(2 * g.n_nodes)
    one_vert[2 * g.node_index(3, 3) + 1] = -1.0
    return TopologyProblem(g, c.material, c.fixed_dofs, c.loads, MECHANISM, one_vert)


def test_volume_rtd_signs():
    assert rtd_volume("hard") == -1.0
    assert rtd_volume("soft") == 1.0
    assert rtd_volume("hard") + rtd_volume("soft") == 0.0
    assert rtd_volume("hard", "soft") == 1.0
    with pytest.raises(ValueError):
        rtd_volume("neither")


@pytest.mark.parametrize("which", ["hard", "soft", "interface"])
def test_perimeter_rtd_is_one(which):
    assert rtd_perimeter(which) == 1.0


def test_compliance_energy_single_element_value():
    # chi = 1, m = 5, beta = 0.0631 and nominal density 1 give 2 m (1 - beta)
    g = build_grid((1, 1), (1.0, 1.0))
    design = DesignField.full(g, 0.0631)
    strain = np.array([[np.sqrt(2.0), 0.0, 0.0]])
    e = compliance_energy(design, strain, np.eye(3), 5)
    assert e.kind == COMPLIANCE
    assert e.values[0] == pytest.approx(9.369, abs=1e-12)


def test_compliance_energy_zero_strain():
    g = build_grid((2, 2), (1.0, 1.0))
    e = compliance_energy(DesignField.full(g, 0.1), np.zeros((4, 3)), np.eye(3), 5)
    np.testing.assert_array_equal(e.values, 0.0)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_mechanism_energy_symmetric_in_states(a, b):
    g = build_grid((1, 1), (1.0, 1.0))
    design = DesignField.full(g, 0.2)
    D = np.array([[2.0, 0.5, 0.0], [0.5, 2.0, 0.0], [0.0, 0.0, 0.7]])
    s1, s2 = np.array([a]), np.array([b])
    e12 = mechanism_energy(design, s1, s2, D, 3).values
    e21 = mechanism_energy(design, s2, s1, D, 3).values
    np.testing.assert_allclose(e12, e21, rtol=1e-12, atol=1e-12)
    # same state twice: the pseudo-energy is minus the compliance energy
    same = mechanism_energy(design, s1, s1, D, 3).values
    comp = compliance_energy(design, s1, D, 3).values
    np.testing.assert_allclose(same, -comp, rtol=1e-12, atol=1e-12)


def test_soft_phase_prefactor():
    g = build_grid((2, 1), (2.0, 1.0))
    beta = 0.3
    design = DesignField.from_mask(g, np.array([True, False]), beta)
    strain = np.tile([np.sqrt(2.0), 0.0, 0.0], (2, 1))
    e = compliance_energy(design, strain, np.eye(3), 3).values
    assert e[1] / e[0] == pytest.approx(beta ** 2, rel=1e-12)


def test_uniform_strain_gives_uniform_energy():
    g = build_grid((4, 3), (1.0, 1.0))
    strain = np.tile([0.3, -0.1, 0.2], (g.n_elements, 1))
    e = compliance_energy(DesignField.full(g, 0.1), strain, np.eye(3), 5).values
    np.testing.assert_allclose(e, e[0], rtol=1e-14)


def test_per_unit_exchange_sign():
    p = _cantilever(1e-6)
    design = DesignField.full(p.grid, p.beta)
    energy = p.analyze(design).energy
    # removing stiff material raises compliance
    assert np.all(rtd_per_unit_exchange(energy) < 0)
    dL = lagrangian_rtd(energy, design, 0.0)
    assert np.all(dL > 0)


@pytest.mark.parametrize("alpha,hard", [(1e-6, np.ones(9, bool)), (1e-2, TWO_PHASE)])
def test_fd_matches_compliance_rtd(alpha, hard):
    p = _cantilever(alpha)
    design = DesignField.from_mask(p.grid, hard, p.beta)
    rtd = rtd_per_unit_exchange(p.analyze(design).energy)
    fd = np.array([fd_sensitivity_oracle(p, design, e) for e in range(9)])
    np.testing.assert_allclose(fd, rtd, rtol=1e-4)


@pytest.mark.parametrize("alpha,hard", [(1e-6, np.ones(9, bool)), (1e-6, TWO_PHASE),
                                        (1e-2, TWO_PHASE)])
def test_fd_matches_mechanism_rtd(alpha, hard):
    p = _mechanism(alpha)
    design = DesignField.from_mask(p.grid, hard, p.beta)
    energy = p.analyze(design).energy
    assert energy.kind == MECHANISM
    fd = np.array([fd_sensitivity_oracle(p, design, e) for e in range(9)])
    np.testing.assert_allclose(fd, rtd_per_unit_exchange(energy), rtol=1e-4)


def test_fd_large_step_warns():
    p = _cantilever(1e-2)
    design = DesignField.full(p.grid, p.beta)
    with pytest.warns(RuntimeWarning):
        fd_sensitivity_oracle(p, design, 0, delta=1e-2)


def test_unloaded_problem_has_zero_energy():
    c = _cantilever(1e-6)
    c.loads.force[:] = 0.0
    design = DesignField.full(c.grid, c.beta)
    state = c.analyze(design)
    assert state.cost == 0.0
    np.testing.assert_array_equal(state.energy.values, 0.0)
