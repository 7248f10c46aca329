"""Closed-form topology optimizer in pseudo-time.

For every time ``t`` of a schedule the volume-constrained problem is solved
by the fixed-point cutting iteration::

    chi^(i+1) = H_beta[ xi_hat_tau(chi^(i)) - lambda_hat ]

where ``lambda_hat`` is found at every iteration by a bracketed regula falsi
search so that the soft-phase fraction equals ``t``.  The energy field is
shifted and normalized with constants frozen at the all-hard start.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_scalar
from .geometry import CUT, HARD, hard_volumes
from .mesh import DesignField
from .smoothing import SmoothingOperator

TOL_CHI = 1e-1
TOL_LAMBDA = 1e-1
TOL_C = 1e-5
MAX_ITER = 500
RELAX = "harmonic"


class InfeasibleVolumeError(ValueError):
    """No level of the field reaches the requested soft fraction."""


class NonConvergenceWarning(RuntimeWarning):
    """A time step hit the iteration cap."""


# --------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class TimeSchedule:
    """Strictly increasing pseudo-times in ``[0, 1]``."""

    times: tuple
    n: int = None
    K: float = None
    t0: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("a schedule needs at least one time")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("schedule times must lie in [0, 1]")
        if np.any(np.diff(t) <= 0):
            raise ValueError("schedule times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def __getitem__(self, i):
        return self.times[i]

    def truncate(self, t_stop):
        """Keep the times below ``t_stop`` and append ``t_stop`` itself."""
        t_stop = check_scalar(t_stop, "t_stop", 0.0, 1.0)
        kept = tuple(t for t in self.times if t < t_stop) + (t_stop,)
        return TimeSchedule(kept, self.n, self.K, self.t0, self.T)


def make_schedule(n=40, K=-4.5, t0=0.0, T=1.0):
    """Exponentially spaced pseudo-times.

    ``t_i = t0 + (T - t0) / (1 - e^K) * (1 - e^(K i / n))`` for ``i = 0..n``.
    Negative ``K`` front-loads the steps.  ``K = 0`` is the uniform limit.
    """
    n = int(check_scalar(n, "n", 1, None, target_type=int))
    K = check_scalar(K, "K")
    t0 = check_scalar(t0, "t0", 0.0, 1.0)
    T = check_scalar(T, "T", 0.0, 1.0)
    if not t0 < T:
        raise ValueError(f"need t0 < T, got t0={t0}, T={T}")
    i = np.arange(n + 1)
    if K == 0.0:
        warnings.warn("K = 0: using uniform spacing", RuntimeWarning, stacklevel=2)
        t = t0 + (T - t0) * i / n
    else:
        t = t0 + (T - t0) / (-np.expm1(K)) * (-np.expm1(K * i / n))
    t[0], t[-1] = t0, T
    return TimeSchedule(tuple(float(v) for v in t), n, K, t0, T)


# --------------------------------------------------------------------------
# state and records


@dataclass
class IterationLog:
    iteration: int
    chi_change: float
    lam: float
    constraint: float
    cost: float


@dataclass
class StepRecord:
    """Converged result of one time step."""

    step: int
    t: float
    lam: float
    cost: float
    vol_hard_frac: float
    vol_soft_frac: float
    iterations: int
    wall_ms: float
    converged: bool
    chi: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    psi_tau: np.ndarray = field(repr=False)
    vol_plus: np.ndarray = field(repr=False)
    log: list = field(default_factory=list, repr=False)


@dataclass
class OptimizerState:
    """Mutable state of a closed-form run.

    ``lam_hat`` is the normalized multiplier; ``lam`` converts it back.
    """

    problem: object
    design: DesignField
    analysis: object
    vol_plus: np.ndarray
    shift: float
    norm: float
    lam_hat: float = 0.0
    t: float = 0.0
    xi_hat_prev: np.ndarray = field(default=None, repr=False)

    @property
    def lam(self):
        return self.lam_hat * self.norm + self.shift


def initialize(problem):
    """All-hard start with ``lambda = 0`` and frozen shift/normalization constants."""
    design = DesignField.full(problem.grid, problem.beta)
    analysis = problem.analyze(design)
    xi = analysis.energy.values
    shift = float(xi.min())
    norm = float(abs(xi.max() - xi.min()))
    if not norm > 0.0:
        warnings.warn("uniform initial energy field; normalization set to 1",
                      RuntimeWarning, stacklevel=2)
        norm = 1.0
    vol_plus = np.full(problem.grid.n_elements, problem.grid.element_volume)
    state = OptimizerState(problem, design, analysis, vol_plus, shift, norm)
    state.lam_hat = -shift / norm
    return state


def shift_normalize(xi, hard, shift, norm, lam=None):
    """Shift on the hard phase only, then normalize everywhere.

    ``hard`` is a boolean phase mask or a per-element hard volume fraction;
    a cut element with fraction ``f`` receives the shift on its hard part
    only, ``f * shift``.  Returns ``xi_hat`` and, when ``lam`` is given,
    ``(xi_hat, lam_hat)``.
    """
    xi = np.asarray(xi, dtype=float)
    frac = np.asarray(hard, dtype=float)
    if xi.shape != frac.shape:
        raise ValueError("xi and phase mask shapes differ")
    out = (xi - frac * shift) / norm
    if lam is None:
        return out
    return out, (lam - shift) / norm


def cut(grid, psi, beta, iso=0.0):
    """Cut the nodal field at ``iso``.

    Returns ``(design, vol_plus, phase)``.  Cut elements keep their exact
    hard volume in ``vol_plus`` (for the mixed stiffness) and are stored as
    hard when their centroid value ``mean(psi_corners) - iso`` is ``>= 0``.
    """
    vol_plus, phase = hard_volumes(grid, psi, iso)
    hard = phase == HARD
    cut_mask = phase == CUT
    if cut_mask.any():
        centre = np.asarray(psi)[grid.element_nodes[cut_mask]].mean(axis=1) - iso
        hard[cut_mask] = centre >= 0.0
    design = DesignField.from_mask(grid, hard, beta)
    return design, vol_plus, phase


def phase_change(grid, vol_plus_old, vol_plus_new, beta):
    """``||chi_new - chi_old||_L2 / |Omega|^(1/2)`` from per-element hard volumes.

    The two-valued field differs by ``1 - beta`` on the region that changed
    phase; per element that region is taken as ``|vol_new - vol_old|``, which
    is exact for whole-element flips and for an interface moving one way
    through a cut element.  Unlike comparing stored element values it does
    not see the stored bit of a cut element flip when its interface barely
    moves.  Dividing by ``|Omega|^(1/2)`` makes the tolerance unit-free.
    """
    dv = np.abs(np.asarray(vol_plus_new, float) - np.asarray(vol_plus_old, float))
    return float((1.0 - beta) * np.sqrt(dv.sum() / grid.volume))


def _soft_fraction(grid, psi, lam):
    vol, _ = hard_volumes(grid, psi, lam)
    return 1.0 - vol.sum() / grid.volume


def bisect_lambda(grid, xi_tau_hat, t, tol_c=TOL_C, lam0=None, max_eval=200):
    """Level ``lambda_hat`` whose cut has soft fraction ``t``.

    Bracket search warm-starts at ``lam0`` and grows geometrically inside
    ``[min - delta, max + delta]``; the root is refined by the Illinois
    variant of regula falsi.  Returns ``(lam_hat, phi, n_evals)`` with
    ``phi = t - |Omega^-| / |Omega|``.

    The soft fraction is continuous and non-decreasing in ``lambda_hat``
    because cut simplices interpolate linearly, so the loop stops on
    ``|phi| <= tol_c``; a bracket narrower than round-off ends it otherwise.
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InfeasibleVolumeError(f"time {t} is outside [0, 1]")
    x = np.asarray(xi_tau_hat, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("smoothed field is not finite")
    lo_lim, hi_lim = float(x.min()), float(x.max())
    span = hi_lim - lo_lim
    delta = 1e-3 * span if span > 0 else 1e-3 * max(1.0, abs(lo_lim))
    if t == 0.0:
        return lo_lim, 0.0, 0
    if t == 1.0:
        return hi_lim + delta, 0.0, 0
    lo_lim -= delta
    hi_lim += delta

    def phi(lam):
        return t - _soft_fraction(grid, x, lam)

    n = 0
    if lam0 is None or not np.isfinite(lam0):
        a, b = lo_lim, hi_lim
        fa, fb = t, t - 1.0
    else:
        lam0 = min(max(lam0, lo_lim), hi_lim)
        w = 1e-2 * max(span, delta)
        f0 = phi(lam0)
        n += 1
        if abs(f0) <= tol_c:
            return lam0, f0, n
        a = b = lam0
        fa = fb = f0
        while (fa < 0.0) or (fb > 0.0):
            if fa < 0.0:
                b, fb = a, fa
                a = max(a - w, lo_lim)
                fa = t if a == lo_lim else phi(a)
            else:
                a, fa = b, fb
                b = min(b + w, hi_lim)
                fb = t - 1.0 if b == hi_lim else phi(b)
            n += 1
            w *= 2.0

    side = 0
    tiny = 1e-14 * max(1.0, abs(a), abs(b))
    lam, f = a, fa
    while n < max_eval:
        lam = b - fb * (b - a) / (fb - fa) if fb != fa else 0.5 * (a + b)
        if not a < lam < b:
            lam = 0.5 * (a + b)
        f = phi(lam)
        n += 1
        if abs(f) <= tol_c or b - a <= tiny:
            return lam, f, n
        if f > 0.0:
            a, fa = lam, f
            if side == 1:
                fb *= 0.5
            side = 1
        else:
            b, fb = lam, f
            if side == -1:
                fa *= 0.5
            side = -1
    warnings.warn(f"volume search stopped after {n} evaluations with |phi|={abs(f):.2e}",
                  RuntimeWarning, stacklevel=2)
    return lam, f, n


def energy_hat(state):
    """Shifted and normalized energy field of the current design."""
    frac = state.vol_plus / state.problem.grid.element_volume
    return shift_normalize(state.analysis.energy.values, frac, state.shift, state.norm)


def check_relax(relax):
    """Validate an averaging weight: ``"harmonic"`` or a float in ``(0, 1]``."""
    if relax == "harmonic":
        return relax
    return check_scalar(relax, "relax", 0.0, 1.0, lo_inclusive=False)


def step(state, t_next, smoother, tol_chi=TOL_CHI, tol_c=TOL_C, max_iter=MAX_ITER, relax=1.0):
    """Advance ``state`` to ``t_next`` by the fixed-point cutting iteration.

    Each iteration costs one state solve: the analysis of the new design is
    kept for the next iteration, so the recorded cost belongs to the
    returned design.

    The cut is taken from an average of the normalized energy fields,
    ``w xi_hat + (1 - w) xi_bar``, where ``xi_bar`` is the running average
    (seeded with the previous step's).  ``relax="harmonic"`` uses
    ``w = 1 / (i + 2)`` at iteration ``i``, i.e. the plain mean of all
    fields seen in the step; a float uses a fixed weight and ``1`` disables
    averaging.  A design whose own energy field reproduces it is a fixed
    point under every choice.  Returns ``(converged, logs, psi_tau)``.
    """
    relax = check_relax(relax)
    problem = state.problem
    grid = problem.grid
    logs = []
    converged = False
    psi_tau = None
    for i in range(max_iter):
        xi_hat = energy_hat(state)
        w = 1.0 / (i + 2) if relax == "harmonic" else relax
        if w < 1.0 and state.xi_hat_prev is not None:
            xi_hat = w * xi_hat + (1.0 - w) * state.xi_hat_prev
        state.xi_hat_prev = xi_hat
        xi_tau = smoother.apply(xi_hat)
        lam_hat, phi, _ = bisect_lambda(grid, xi_tau, t_next, tol_c, lam0=state.lam_hat)
        design, vol_plus, _ = cut(grid, xi_tau, problem.beta, lam_hat)
        change = phase_change(grid, state.vol_plus, vol_plus, problem.beta)
        state.analysis = problem.analyze(design, vol_plus)
        state.design, state.vol_plus, state.lam_hat, state.t = design, vol_plus, lam_hat, t_next
        psi_tau = xi_tau - lam_hat
        logs.append(IterationLog(i + 1, change, state.lam, phi, state.analysis.cost))
        if change <= tol_chi:
            converged = True
            break
    if not converged:
        warnings.warn(f"step t={t_next:.5f} did not converge in {max_iter} iterations",
                      NonConvergenceWarning, stacklevel=2)
    return converged, logs, psi_tau


def _record(k, state, converged, logs, psi_tau, wall_ms):
    grid = state.problem.grid
    hard_frac = float(state.vol_plus.sum() / grid.volume)
    return StepRecord(
        step=k, t=float(state.t), lam=float(state.lam), cost=float(state.analysis.cost),
        vol_hard_frac=hard_frac, vol_soft_frac=1.0 - hard_frac, iterations=len(logs),
        wall_ms=wall_ms, converged=converged, chi=state.design.chi.copy(),
        xi=state.analysis.energy.values.copy(), psi_tau=psi_tau,
        vol_plus=state.vol_plus.copy(), log=logs,
    )


def run(problem, schedule, tau=1.0, tol_chi=TOL_CHI, tol_c=TOL_C, max_iter=MAX_ITER,
        relax=RELAX, smoother=None, callback=None):
    """Closed-form optimizer over a whole schedule; one record per time."""
    smoother = smoother or SmoothingOperator(problem.grid, tau)
    state = initialize(problem)
    history = []
    for k, t in enumerate(schedule):
        t0 = time.perf_counter()
        converged, logs, psi_tau = step(state, t, smoother, tol_chi, tol_c, max_iter, relax)
        rec = _record(k, state, converged, logs, psi_tau, 1e3 * (time.perf_counter() - t0))
        history.append(rec)
        if callback is not None:
            callback(rec)
    return history


class ClosedFormTopologyOptimizer(BaseEstimator):
    """Estimator wrapper around :func:`run`.

    ``fit(problem)`` runs the schedule and stores ``history_``, ``design_``
    (final characteristic function) and ``cost_``.

    Parameters
    ----------
    tau : float or sequence of float
        Smoothing length in element sizes.
    n_steps, K, t_final : schedule generator parameters.
    t_stop : float, optional
        Truncation time appended to the schedule.
    relax : "harmonic" or float
        Weight of the current energy field in the iteration averaging;
        ``"harmonic"`` averages all fields of a step equally, ``1`` disables
        averaging.
    """

    def __init__(self, tau=1.0, n_steps=40, K=-4.5, t_final=1.0, t_stop=None,
                 tol_chi=TOL_CHI, tol_c=TOL_C, max_iter=MAX_ITER, relax=RELAX):
        self.tau = tau
        self.n_steps = n_steps
        self.K = K
        self.t_final = t_final
        self.t_stop = t_stop
        self.tol_chi = tol_chi
        self.tol_c = tol_c
        self.max_iter = max_iter
        self.relax = relax

    def schedule(self):
        s = make_schedule(self.n_steps, self.K, 0.0, self.t_final)
        return s.truncate(self.t_stop) if self.t_stop is not None else s

    def fit(self, problem, y=None):
        check_scalar(self.tol_chi, "tol_chi", 0.0, None, lo_inclusive=False)
        check_scalar(self.tol_c, "tol_c", 0.0, None, lo_inclusive=False)
        check_relax(self.relax)
        self.history_ = run(problem, self.schedule(), self.tau, self.tol_chi, self.tol_c,
                            int(self.max_iter), self.relax)
        last = self.history_[-1]
        self.design_ = DesignField(problem.grid, last.chi, problem.beta)
        self.cost_ = last.cost
        return self
