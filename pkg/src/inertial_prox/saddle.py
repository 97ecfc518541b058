"""Inertial proximal point methods for convex-concave saddle problems.

The proximal method of multipliers for ``min f(u) s.t. A u = b`` is the
proximal point method applied to the saddle operator of the Lagrangian
``f(u) + <v, A u - b>``. Its resolvent acts on the stacked vector
``(u, v)``:

    u+ = argmin_u f(u) + <v_hat, A u - b> + lam/2 ||A u - b||^2 + ||u - u_hat||^2 / (2 lam)
    v+ = v_hat + lam (A u+ - b)

so every step here is a :func:`inertial_prox.core.ppa_step` on that map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .core import EngineState, InertialParams, RunConfig, RunRecord, ppa_step, run
from .operators import Resolvent, power_norm, soft_threshold

SaddleOracle = Callable[[np.ndarray, np.ndarray, float], tuple]
SubproblemSolver = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


class InnerSolverError(RuntimeError):
    """Raised when an inner subproblem solve misses its tolerance."""

    def __init__(self, message: str, result: "InnerResult"):
        super().__init__(message)
        self.result = result


class SaddleResolvent(Resolvent):
    """Stacked saddle prox built from a caller-supplied exact oracle.

    ``oracle(u_hat, v_hat, lam)`` must return the saddle point ``(u, v)`` of
    ``phi(u, v) + ||u - u_hat||^2/(2 lam) - ||v - v_hat||^2/(2 lam)``.
    """

    def __init__(self, oracle: SaddleOracle, n_primal: int, n_dual: int, lam: float):
        self.oracle = oracle
        self.n_primal, self.n_dual = int(n_primal), int(n_dual)
        self.dim = self.n_primal + self.n_dual
        self.lam = float(lam)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        u, v = self.oracle(y[: self.n_primal], y[self.n_primal :], self.lam)
        return np.concatenate([u, v])


def saddle_step(resolvent: SaddleResolvent, state: EngineState, params: InertialParams) -> EngineState:
    return ppa_step(resolvent, state, params)


@dataclass(frozen=True)
class LagrangianProblem:
    """``min f(u) s.t. A u = b`` with an oracle for the PMM u-subproblem.

    ``objective_prox_solver(v_hat, u_hat, lam)`` returns the minimizer of
    ``f(u) + <v_hat, A u - b> + lam/2 ||A u - b||^2 + ||u - u_hat||^2/(2 lam)``.
    """

    A: np.ndarray
    b: np.ndarray
    objective_prox_solver: SubproblemSolver

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if b.shape != (A.shape[0],):
            raise ValueError(f"inconsistent shapes A{A.shape}, b{b.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n_primal(self) -> int:
        return self.A.shape[1]

    @property
    def n_dual(self) -> int:
        return self.A.shape[0]


class PmmResolvent(SaddleResolvent):
    """Resolvent of the Lagrangian saddle operator, evaluated the PMM way."""

    def __init__(self, problem: LagrangianProblem, lam: float):
        self.problem = problem
        super().__init__(self._oracle, problem.n_primal, problem.n_dual, lam)

    def _oracle(self, u_hat, v_hat, lam):
        p = self.problem
        u = np.asarray(p.objective_prox_solver(v_hat, u_hat, lam), dtype=float)
        return u, v_hat + lam * (p.A @ u - p.b)


def pmm_step(problem: LagrangianProblem, state: EngineState, params: InertialParams) -> EngineState:
    """One step of the two-step inertial proximal method of multipliers."""
    return ppa_step(PmmResolvent(problem, params.lam), state, params)


class QuadraticSubproblem:
    """Exact u-subproblem for ``f(u) = 0.5 ||F u - g||^2``.

    Normal equations ``(F^T F + lam A^T A + I/lam) u = F^T g - A^T v_hat +
    lam A^T b + u_hat/lam``, factored once per ``lam``.
    """

    def __init__(self, F, g, A, b):
        self.F = np.asarray(F, dtype=float)
        self.g = np.asarray(g, dtype=float)
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self._cache: dict[float, tuple] = {}

    def _factor(self, lam: float):
        if lam not in self._cache:
            M = self.F.T @ self.F + lam * (self.A.T @ self.A) + np.eye(self.F.shape[1]) / lam
            self._cache[lam] = sla.cho_factor(M)
        return self._cache[lam]

    def __call__(self, v_hat, u_hat, lam):
        rhs = self.F.T @ self.g - self.A.T @ v_hat + lam * (self.A.T @ self.b) + u_hat / lam
        return sla.cho_solve(self._factor(lam), rhs)


# --- basis pursuit -------------------------------------------------------------


@dataclass(frozen=True)
class BasisPursuitInstance:
    """``min ||u||_1 s.t. A u = b`` with a planted sparse solution."""

    A: np.ndarray
    b: np.ndarray
    u_true: np.ndarray
    sparsity: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class InnerResult:
    u: np.ndarray
    iterations: int
    converged: bool
    residual: float  # norm of the prox-gradient mapping at exit
    objective_trace: Optional[list[float]] = field(default=None, repr=False)


def _bp_objective(u, A, b, v_hat, u_hat, lam):
    r = A @ u - b
    return (
        np.abs(u).sum()
        + v_hat @ r
        + 0.5 * lam * (r @ r)
        + (u - u_hat) @ (u - u_hat) / (2.0 * lam)
    )


def solve_bp_subproblem(
    A,
    b,
    v_hat,
    u_hat,
    lam: float,
    inner_tol: float = 1e-10,
    inner_max_iter: int = 2000,
    norm_A: Optional[float] = None,
    trace: bool = False,
) -> InnerResult:
    """Strongly convex FISTA for the basis-pursuit PMM subproblem.

    Minimizes ``||u||_1 + s(u)`` with the smooth part
    ``s(u) = <v_hat, A u - b> + lam/2 ||A u - b||^2 + ||u - u_hat||^2/(2 lam)``,
    which is ``1/lam``-strongly convex with ``L = lam ||A||^2 + 1/lam``.
    Momentum is the constant ``(sqrt(L) - sqrt(mu)) / (sqrt(L) + sqrt(mu))``;
    whenever a step would raise the objective the momentum is dropped for
    that step, so the objective is monotone.

    The result is flagged ``converged=False`` if ``inner_max_iter`` is hit
    before the prox-gradient mapping norm drops to ``inner_tol``.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    v_hat = np.asarray(v_hat, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    if norm_A is None:
        norm_A = power_norm(A)
    L = lam * norm_A**2 + 1.0 / lam
    mu = 1.0 / lam
    q = (np.sqrt(L) - np.sqrt(mu)) / (np.sqrt(L) + np.sqrt(mu))
    step = 1.0 / L
    lin = A.T @ v_hat - lam * (A.T @ b)

    def grad(w):
        return lin + lam * (A.T @ (A @ w)) + (w - u_hat) / lam

    def objective(w):
        return _bp_objective(w, A, b, v_hat, u_hat, lam)

    u = u_hat.copy()
    w = u
    f_u = objective(u)
    history = [f_u] if trace else None
    gm = np.inf
    k = 0
    converged = False
    for k in range(1, inner_max_iter + 1):
        u_new = soft_threshold(w - step * grad(w), step)
        f_new = objective(u_new)
        if f_new > f_u and w is not u:
            w = u
            u_new = soft_threshold(w - step * grad(w), step)
            f_new = objective(u_new)
        gm = L * float(np.linalg.norm(w - u_new))
        w = u_new + q * (u_new - u)
        u, f_u = u_new, f_new
        if history is not None:
            history.append(f_u)
        if gm <= inner_tol:
            converged = True
            break
    return InnerResult(u, k, converged, gm, history)


class BasisPursuitSubproblem:
    """``objective_prox_solver`` for ``f = ||.||_1`` backed by FISTA.

    Raises :class:`InnerSolverError` when the inner tolerance is missed.
    """

    def __init__(self, A, b, inner_tol: float = 1e-10, inner_max_iter: int = 2000):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self.inner_tol = inner_tol
        self.inner_max_iter = inner_max_iter
        self.norm_A = power_norm(self.A)

    def __call__(self, v_hat, u_hat, lam):
        res = solve_bp_subproblem(
            self.A, self.b, v_hat, u_hat, lam,
            inner_tol=self.inner_tol, inner_max_iter=self.inner_max_iter, norm_A=self.norm_A,
        )
        if not res.converged:
            raise InnerSolverError(
                f"inner FISTA stopped after {res.iterations} iterations with "
                f"prox-gradient residual {res.residual:.3e} > {self.inner_tol:.1e}",
                res,
            )
        return res.u


def basis_pursuit_problem(instance: BasisPursuitInstance, inner_tol: float = 1e-10,
                          inner_max_iter: int = 2000) -> LagrangianProblem:
    solver = BasisPursuitSubproblem(instance.A, instance.b, inner_tol, inner_max_iter)
    return LagrangianProblem(instance.A, instance.b, solver)


def run_pmm_basis_pursuit(
    instance: BasisPursuitInstance,
    params: InertialParams,
    config: RunConfig,
    inner_tol: float = 1e-10,
    inner_max_iter: int = 2000,
) -> RunRecord:
    """Inertial PMM on basis pursuit from ``x_0 = 0``.

    With the default stop metric the residual is ``||y_n - x_{n+1}||`` on the
    stacked primal-dual vector.
    """
    problem = basis_pursuit_problem(instance, inner_tol, inner_max_iter)
    x0 = np.zeros(problem.n_primal + problem.n_dual)
    return run(PmmResolvent(problem, params.lam), x0, params, config)
