"""Two-step inertial PDHG, Douglas-Rachford and ADMM.

PDHG and Douglas-Rachford are proximal point methods for a suitable
operator, so they reuse :func:`inertial_prox.core.ppa_step` on a stacked
map. ADMM carries its own state because the inertial correction is applied
to the dual variable inside the iteration rather than to a resolvent input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .core import (
    EngineState,
    InertialParams,
    RunConfig,
    RunRecord,
    StopMetric,
    drive,
    ppa_step,
    run,
)
from .operators import DouglasRachfordOperator, power_norm, soft_threshold

ProxMap = Callable[[np.ndarray, float], np.ndarray]


# --- PDHG ----------------------------------------------------------------------


@dataclass(frozen=True)
class PdhgProblem:
    """``min_u max_v f(u) + <K u, v> - g(v)`` with step sizes ``tau``, ``sigma``.

    ``prox_f(y, tau)`` and ``prox_g(y, sigma)`` are the usual proximal maps.
    Construction fails unless ``tau sigma ||K||^2 < 1``.
    """

    prox_f: ProxMap
    prox_g: ProxMap
    K: np.ndarray
    tau: float
    sigma: float

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        object.__setattr__(self, "K", K)
        if self.tau <= 0 or self.sigma <= 0:
            raise ValueError("tau and sigma must be > 0")
        nk = power_norm(K)
        if self.tau * self.sigma * nk**2 >= 1.0:
            raise ValueError(
                f"step sizes violate tau*sigma*||K||^2 < 1 (got {self.tau * self.sigma * nk**2:.4g})"
            )

    @property
    def n_primal(self) -> int:
        return self.K.shape[1]

    @property
    def n_dual(self) -> int:
        return self.K.shape[0]

    def preconditioner(self) -> np.ndarray:
        """Block metric ``[[I/tau, -K^T], [-K, I/sigma]]``."""
        n, m = self.n_primal, self.n_dual
        return np.block([
            [np.eye(n) / self.tau, -self.K.T],
            [-self.K, np.eye(m) / self.sigma],
        ])


class PdhgMap:
    """One PDHG sweep on the stacked vector ``(u_hat, v_hat)``."""

    def __init__(self, problem: PdhgProblem):
        self.problem = problem
        self.dim = problem.n_primal + problem.n_dual

    def __call__(self, y):
        p = self.problem
        y = np.asarray(y, dtype=float)
        u_hat, v_hat = y[: p.n_primal], y[p.n_primal :]
        u = p.prox_f(u_hat - p.tau * (p.K.T @ v_hat), p.tau)
        v = p.prox_g(v_hat + p.sigma * (p.K @ (2.0 * u - u_hat)), p.sigma)
        return np.concatenate([u, v])


def pdhg_step(problem: PdhgProblem, state: EngineState, params: InertialParams) -> EngineState:
    return ppa_step(PdhgMap(problem), state, params)


def run_pdhg(problem: PdhgProblem, u0, v0, params: InertialParams,
             config: Optional[RunConfig] = None) -> RunRecord:
    """Inertial PDHG; stops on the step norm unless told otherwise."""
    if config is None:
        config = RunConfig(stop_metric=StopMetric.STEP_NORM)
    x0 = np.concatenate([np.asarray(u0, dtype=float), np.asarray(v0, dtype=float)])
    return run(PdhgMap(problem), x0, params, config)


# --- Douglas-Rachford -------------------------------------------------------------


def dr_step(J_A, J_B, state: EngineState, params: InertialParams) -> EngineState:
    """``v+ = G(u)``, then ``u+`` by two-step extrapolation of the ``v`` sequence.

    In engine terms ``x_curr`` holds ``v_n`` and ``y_curr`` holds ``u_n``.
    """
    return ppa_step(DouglasRachfordOperator(J_A, J_B), state, params)


def run_dr(J_A, J_B, u0, params: InertialParams, config: RunConfig) -> RunRecord:
    return run(DouglasRachfordOperator(J_A, J_B), u0, params, config)


# --- ADMM ----------------------------------------------------------------------


@dataclass(frozen=True)
class AdmmProblem:
    """``min f(x) + g(z) s.t. A x + B z = c`` given its two subproblem solvers.

    ``x_subproblem(v_hat, z, lam)`` minimizes
    ``f(x) + <v_hat, A x + B z - c> + lam/2 ||A x + B z - c||^2`` over ``x``;
    ``prox_g_composite(eta_hat, x, lam)`` does the same over ``z`` for ``g``.
    """

    x_subproblem: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    prox_g_composite: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        c = np.asarray(self.c, dtype=float)
        if A.shape[0] != B.shape[0] or c.shape != (A.shape[0],):
            raise ValueError(f"inconsistent shapes A{A.shape}, B{B.shape}, c{c.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    def residual(self, x, z) -> np.ndarray:
        return self.A @ x + self.B @ z - self.c


@dataclass(frozen=True)
class AdmmState:
    x: np.ndarray
    z: np.ndarray
    v_hat: np.ndarray
    v_hat_prev: np.ndarray
    v_hat_prev2: np.ndarray
    x_prev: np.ndarray
    iter: int = 0

    @classmethod
    def initial(cls, x0, z0, v0) -> "AdmmState":
        x0, z0, v0 = (np.array(a, dtype=float) for a in (x0, z0, v0))
        return cls(x0, z0, v0, v0.copy(), v0.copy(), x0.copy(), 0)


def inertial_dual(state: AdmmState, x_new, A, params: InertialParams) -> np.ndarray:
    """The extrapolated multiplier ``eta_hat_n``.

    Plain ``v_hat_n`` on the first two iterations, after that
    ``v_hat_n + theta (v_hat_n - v_hat_{n-1} + lam A (x_{n+1} - x_n))
    + delta (v_hat_{n-1} - v_hat_{n-2} + lam A (x_n - x_{n-1}))``.
    """
    if state.iter < 2:
        return state.v_hat
    lam = params.lam
    first = state.v_hat - state.v_hat_prev + lam * (A @ (x_new - state.x))
    second = state.v_hat_prev - state.v_hat_prev2 + lam * (A @ (state.x - state.x_prev))
    return state.v_hat + params.theta * first + params.delta * second


def admm_step(problem: AdmmProblem, state: AdmmState, params: InertialParams) -> AdmmState:
    """One iteration of two-step inertial ADMM."""
    lam = params.lam
    x_new = np.asarray(problem.x_subproblem(state.v_hat, state.z, lam), dtype=float)
    eta = inertial_dual(state, x_new, problem.A, params)
    z_new = np.asarray(problem.prox_g_composite(eta, x_new, lam), dtype=float)
    v_new = eta + lam * (problem.A @ x_new + problem.B @ z_new - problem.c)
    return AdmmState(x_new, z_new, v_new, state.v_hat, state.v_hat_prev, state.x, state.iter + 1)


class LeastSquaresXUpdate:
    """x-subproblem for ``f(x) = 0.5 ||F x - b||^2``.

    Solves ``(F^T F + lam A^T A) x = A^T (lam (c - B z) - v_hat) + F^T b``.
    """

    def __init__(self, F, b, A, B, c):
        self.F = np.asarray(F, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.c = np.asarray(c, dtype=float)
        self._ftb = self.F.T @ self.b
        self._cache: dict[float, tuple] = {}

    def __call__(self, v_hat, z, lam):
        if lam not in self._cache:
            M = self.F.T @ self.F + lam * (self.A.T @ self.A)
            self._cache[lam] = sla.cho_factor(M)
        # same operation order as the closed-form TV step, so the two agree bitwise
        rhs = self.A.T @ (lam * (self.c - self.B @ z) - v_hat) + self._ftb
        return sla.cho_solve(self._cache[lam], rhs)


class L1ZUpdate:
    """z-subproblem for ``g = gamma ||.||_1`` with ``B = -I``.

    ``argmin_z gamma ||z||_1 + <eta, A x - z - c> + lam/2 ||A x - z - c||^2``
    is ``S_{gamma/lam}(A x - c + eta/lam)``.
    """

    def __init__(self, gamma: float, A, c):
        self.gamma = float(gamma)
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.c = np.asarray(c, dtype=float)

    def __call__(self, eta, x, lam):
        return soft_threshold(self.A @ x - self.c + eta / lam, self.gamma / lam)


def run_admm(
    problem: AdmmProblem,
    x0,
    z0,
    v0,
    params: InertialParams,
    config: RunConfig,
    metric: Optional[Callable[[AdmmState, AdmmState], float]] = None,
) -> RunRecord:
    """Run inertial ADMM; default residual is ``||A x_n + B z_n - c||^2``."""
    if metric is None:
        def metric(old, new):
            r = problem.residual(new.x, new.z)
            return float(r @ r)
    return drive(
        AdmmState.initial(x0, z0, v0),
        lambda s: admm_step(problem, s, params),
        metric,
        config,
        point=lambda s: s.x,
    )


# --- TV-regularized least squares ---------------------------------------------------


@dataclass(frozen=True)
class TvLsInstance:
    """``min_x 0.5 ||F x - b||^2 + gamma ||D x||_1`` with a planted ``x_true``.

    Row ``i`` of ``D`` is ``e_i - e_{i+1}``.
    """

    F: np.ndarray
    b: np.ndarray
    D: np.ndarray
    gamma: float
    x_true: np.ndarray

    @property
    def n(self) -> int:
        return self.F.shape[1]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def p(self) -> int:
        return self.F.shape[0]

    def objective(self, x) -> float:
        r = self.F @ x - self.b
        return 0.5 * float(r @ r) + self.gamma * float(np.abs(self.D @ x).sum())


def tv_factorization(instance: TvLsInstance, lam: float):
    """Cholesky factor of ``F^T F + lam D^T D``."""
    M = instance.F.T @ instance.F + lam * (instance.D.T @ instance.D)
    try:
        return sla.cho_factor(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("F^T F + lam D^T D is numerically singular") from exc


def tv_admm_step(instance: TvLsInstance, state: AdmmState, params: InertialParams,
                 cached_factorization=None) -> AdmmState:
    """Closed-form inertial ADMM step for TV least squares (``A=D, B=-I, c=0``)."""
    lam = params.lam
    D = instance.D
    if cached_factorization is None:
        cached_factorization = tv_factorization(instance, lam)
    x_new = sla.cho_solve(cached_factorization, D.T @ (lam * state.z - state.v_hat) + instance.F.T @ instance.b)
    eta = inertial_dual(state, x_new, D, params)
    dx = D @ x_new
    z_new = soft_threshold(dx + eta / lam, instance.gamma / lam)
    v_new = eta + lam * (dx - z_new)
    return AdmmState(x_new, z_new, v_new, state.v_hat, state.v_hat_prev, state.x, state.iter + 1)


def tv_admm_problem(instance: TvLsInstance) -> AdmmProblem:
    """The same problem in generic ADMM form."""
    m = instance.m
    B = -np.eye(m)
    c = np.zeros(m)
    return AdmmProblem(
        x_subproblem=LeastSquaresXUpdate(instance.F, instance.b, instance.D, B, c),
        prox_g_composite=L1ZUpdate(instance.gamma, instance.D, c),
        A=instance.D,
        B=B,
        c=c,
    )


def run_tv_admm(instance: TvLsInstance, params: InertialParams, config: RunConfig,
                x0=None, z0=None, v0=None) -> RunRecord:
    """Inertial ADMM on TV least squares, residual ``||D x_n - z_n||^2``.

    Starts from zeros unless initial points are given.
    """
    x0 = np.zeros(instance.n) if x0 is None else x0
    z0 = np.zeros(instance.m) if z0 is None else z0
    v0 = np.zeros(instance.m) if v0 is None else v0
    factor = tv_factorization(instance, params.lam)

    def metric(old, new):
        r = instance.D @ new.x - new.z
        return float(r @ r)

    return drive(
        AdmmState.initial(x0, z0, v0),
        lambda s: tv_admm_step(instance, s, params, factor),
        metric,
        config,
        point=lambda s: s.x,
    )
