"""Level-set baseline driven by the same relaxed topological derivative.

A nodal level-set function ``phi`` in ``[-1, 1]`` is advanced by the
pointwise pseudo-time update::

    phi <- clip(phi - k (1 / delta_chi) dL/dchi, -1, 1)
    lam <- lam + rho C,    C = t - |Omega^-| / |Omega|

with ``dL/dchi = dJ/dchi delta_chi + lam sgn(delta_chi)`` evaluated on the
smoothed, shifted and normalized energy field used by the closed-form
optimizer.  The topology is ``chi = H_beta(phi)`` cut with the same
marching-simplex geometry.  There is no reinitialization.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_scalar
from .optimizer import (MAX_ITER, TOL_CHI, TOL_LAMBDA, IterationLog, NonConvergenceWarning,
                        OptimizerState, _record, cut, energy_hat, initialize, make_schedule,
                        phase_change)
from .smoothing import SmoothingOperator

AUTO_STEP = 0.1


@dataclass
class LevelSetState:
    """Closed-form state plus the nodal level set and step parameters."""

    opt: OptimizerState
    phi: np.ndarray
    k: object = "auto"
    rho: float = 1.0

    @property
    def lam_hat(self):
        return self.opt.lam_hat


def nodal_rtd(xi_tau_hat, lam_hat, phi, beta):
    """Nodal ``dL/dchi`` and ``delta_chi`` from the smoothed normalized energy.

    ``dJ/dchi`` per unit exchange is ``-xi / (1 - beta)``; nodes with
    ``phi >= 0`` are hard, so ``delta_chi = -(1 - beta)`` there.
    """
    xi_tau_hat = np.asarray(xi_tau_hat, dtype=float)
    dchi = np.where(np.asarray(phi) >= 0.0, -(1.0 - beta), 1.0 - beta)
    dL = -xi_tau_hat / (1.0 - beta) * dchi + lam_hat * np.sign(dchi)
    return dL, dchi


def hj_update(phi, dL_dchi, delta_chi, k):
    """``clip(phi - k dL_dchi / delta_chi, -1, 1)``."""
    k = check_scalar(k, "k", 0.0, None)
    step = np.asarray(dL_dchi, dtype=float) / np.asarray(delta_chi, dtype=float)
    out = np.asarray(phi, dtype=float) - k * step
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite level-set update")
    return np.clip(out, -1.0, 1.0)


def auto_step(dL_dchi, delta_chi, max_change=AUTO_STEP):
    """Step size giving a largest pointwise change of ``max_change``."""
    peak = np.max(np.abs(np.asarray(dL_dchi) / np.asarray(delta_chi)))
    return max_change / peak if peak > 0 else 0.0


def augmented_lagrangian_update(lam, soft_fraction, t, rho=1.0):
    """``lam + rho (t - soft_fraction)``."""
    return lam + rho * (t - soft_fraction)


def lagrangian(problem, cost, soft_frac, lam, t):
    """``L = J + lam |Omega| C`` with ``lam`` per unit volume in energy units."""
    return cost + lam * problem.grid.volume * (t - soft_frac)


def _soft_frac(opt):
    return 1.0 - opt.vol_plus.sum() / opt.problem.grid.volume


def hj_iteration(state, t, smoother, update_lambda=True):
    """One HJ sweep, re-analysis and (optionally) multiplier update.

    Returns ``(chi_change, lam_change, constraint, phi)``; the level set
    takes the place of the closed-form discrimination field in the records.
    """
    opt = state.opt
    problem = opt.problem
    xi_tau = smoother.apply(energy_hat(opt))
    dL, dchi = nodal_rtd(xi_tau, opt.lam_hat, state.phi, problem.beta)
    k = auto_step(dL, dchi) if state.k == "auto" else state.k
    state.phi = hj_update(state.phi, dL, dchi, k)
    design, vol_plus, _ = cut(problem.grid, state.phi, problem.beta)
    change = phase_change(problem.grid, opt.vol_plus, vol_plus, problem.beta)
    opt.analysis = problem.analyze(design, vol_plus)
    opt.design, opt.vol_plus, opt.t = design, vol_plus, t
    C = t - _soft_frac(opt)
    lam_change = 0.0
    if update_lambda:
        new = augmented_lagrangian_update(opt.lam_hat, _soft_frac(opt), t, state.rho)
        lam_change = new - opt.lam_hat
        opt.lam_hat = new
    return change, lam_change, C, state.phi.copy()


def levelset_step(state, t, smoother, tol_chi=TOL_CHI, tol_lambda=TOL_LAMBDA,
                  max_iter=MAX_ITER):
    """Iterate HJ sweeps at time ``t`` until both ``chi`` and ``lam`` settle."""
    logs = []
    converged = False
    psi_tau = None
    for i in range(max_iter):
        change, dlam, C, psi_tau = hj_iteration(state, t, smoother)
        opt = state.opt
        logs.append(IterationLog(i + 1, change, opt.lam, C, opt.analysis.cost))
        if change <= tol_chi and abs(dlam) <= tol_lambda:
            converged = True
            break
    if not converged:
        warnings.warn(f"level-set step t={t:.5f} did not converge in {max_iter} iterations",
                      NonConvergenceWarning, stacklevel=2)
    return converged, logs, psi_tau


def init_levelset(problem, k="auto", rho=1.0):
    """All-hard start: ``phi = 1`` everywhere and the closed-form initialization."""
    if k != "auto":
        check_scalar(k, "k", 0.0, None, lo_inclusive=False)
    check_scalar(rho, "rho", 0.0, None, lo_inclusive=False)
    opt = initialize(problem)
    return LevelSetState(opt, np.ones(problem.grid.n_nodes), k, rho)


def run_levelset(problem, schedule, tau=1.0, k="auto", rho=1.0, tol_chi=TOL_CHI,
                 tol_lambda=TOL_LAMBDA, max_iter=MAX_ITER, smoother=None, callback=None):
    """Level-set baseline over a schedule; records match :func:`optimizer.run`."""
    smoother = smoother or SmoothingOperator(problem.grid, tau)
    state = init_levelset(problem, k, rho)
    history = []
    for n, t in enumerate(schedule):
        t0 = time.perf_counter()
        converged, logs, psi_tau = levelset_step(state, t, smoother, tol_chi, tol_lambda,
                                                 max_iter)
        rec = _record(n, state.opt, converged, logs, psi_tau,
                      1e3 * (time.perf_counter() - t0))
        history.append(rec)
        if callback is not None:
            callback(rec)
    return history


class LevelSetTopologyOptimizer(BaseEstimator):
    """Estimator wrapper around :func:`run_levelset`.

    Parameters
    ----------
    tau : float or sequence of float
        Smoothing length in element sizes.
    k : float or "auto"
        HJ step size; ``"auto"`` limits the pointwise change of ``phi`` to 0.1.
    rho : float
        Augmented Lagrangian penalty on the normalized multiplier.
    """

    def __init__(self, tau=1.0, k="auto", rho=1.0, n_steps=40, K=-4.5, t_final=1.0,
                 t_stop=None, tol_chi=TOL_CHI, tol_lambda=TOL_LAMBDA, max_iter=MAX_ITER):
        self.tau = tau
        self.k = k
        self.rho = rho
        self.n_steps = n_steps
        self.K = K
        self.t_final = t_final
        self.t_stop = t_stop
        self.tol_chi = tol_chi
        self.tol_lambda = tol_lambda
        self.max_iter = max_iter

    def schedule(self):
        s = make_schedule(self.n_steps, self.K, 0.0, self.t_final)
        return s.truncate(self.t_stop) if self.t_stop is not None else s

    def fit(self, problem, y=None):
        self.history_ = run_levelset(problem, self.schedule(), self.tau, self.k, self.rho,
                                     self.tol_chi, self.tol_lambda, int(self.max_iter))
        last = self.history_[-1]
        self.chi_ = last.chi
        self.cost_ = last.cost
        return self
