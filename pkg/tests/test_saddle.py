import numpy as np
import pytest

from inertial_prox.bench import gen_basis_pursuit
from inertial_prox.core import EngineState, InertialParams, RunConfig, Status, inertial_extrapolate, run
from inertial_prox.operators import soft_threshold
from inertial_prox.saddle import (
    BasisPursuitSubproblem,
    InnerSolverError,
    LagrangianProblem,
    PmmResolvent,
    QuadraticSubproblem,
    SaddleResolvent,
    basis_pursuit_problem,
    pmm_step,
    run_pmm_basis_pursuit,
    saddle_step,
    solve_bp_subproblem,
)


def quadratic_setup(rng, N=6, M=3, P=8):
    F = rng.standard_normal((P, N))
    g = rng.standard_normal(P)
    A = rng.standard_normal((M, N))
    b = rng.standard_normal(M)
    return F, g, A, b


def block_saddle_oracle(F, g, A, b):
    """Exact saddle prox of the Lagrangian of 0.5||Fu - g||^2 s.t. Au = b.

    Solves the optimality system of the stacked resolvent directly:
    u - u_hat + lam (F^T (F u - g) + A^T v) = 0 and v - v_hat - lam (A u - b) = 0.
    """
    N, M = F.shape[1], A.shape[0]

    def oracle(u_hat, v_hat, lam):
        K = np.block([
            [np.eye(N) + lam * F.T @ F, lam * A.T],
            [-lam * A, np.eye(M)],
        ])
        rhs = np.concatenate([u_hat + lam * F.T @ g, v_hat - lam * b])
        sol = np.linalg.solve(K, rhs)
        return sol[:N], sol[N:]

    return oracle


# --- PMM on a quadratic objective ----------------------------------------------------------


def test_pmm_matches_block_saddle_step(rng):
    F, g, A, b = quadratic_setup(rng)
    N, M = F.shape[1], A.shape[0]
    lam = 0.7
    problem = LagrangianProblem(A, b, QuadraticSubproblem(F, g, A, b))
    ref = SaddleResolvent(block_saddle_oracle(F, g, A, b), N, M, lam)
    for params in [InertialParams(0.0, 0.0, lam), InertialParams(0.2, -0.1, lam)]:
        s_pmm = s_ref = EngineState.initial(rng.standard_normal(N + M))
        for _ in range(30):
            s_pmm = pmm_step(problem, s_pmm, params)
            s_ref = saddle_step(ref, s_ref, params)
            assert np.allclose(s_pmm.x_curr, s_ref.x_curr, rtol=0, atol=1e-10)
            assert np.allclose(s_pmm.y_curr, s_ref.y_curr, rtol=0, atol=1e-10)


def test_pmm_reduces_to_augmented_lagrangian_method(rng):
    F, g, A, b = quadratic_setup(rng)
    N = F.shape[1]
    lam = 1.3
    problem = LagrangianProblem(A, b, QuadraticSubproblem(F, g, A, b))
    state = EngineState.initial(np.zeros(N + A.shape[0]))
    u, v = np.zeros(N), np.zeros(A.shape[0])
    for _ in range(25):
        state = pmm_step(problem, state, InertialParams(0.0, 0.0, lam))
        # proximal augmented Lagrangian step solved by dense normal equations
        H = F.T @ F + lam * A.T @ A + np.eye(N) / lam
        u = np.linalg.solve(H, F.T @ g - A.T @ v + lam * A.T @ b + u / lam)
        v = v + lam * (A @ u - b)
        assert np.allclose(state.x_curr, np.concatenate([u, v]), rtol=0, atol=1e-10)


def test_pmm_converges_to_constrained_minimizer(rng):
    F, g, A, b = quadratic_setup(rng)
    N, M = F.shape[1], A.shape[0]
    # KKT system of min 0.5||Fu - g||^2 s.t. Au = b
    kkt = np.block([[F.T @ F, A.T], [A, np.zeros((M, M))]])
    sol = np.linalg.solve(kkt, np.concatenate([F.T @ g, b]))
    problem = LagrangianProblem(A, b, QuadraticSubproblem(F, g, A, b))
    rec = run(PmmResolvent(problem, 1.0), np.zeros(N + M), InertialParams(0.1, -0.05),
              RunConfig(max_iter=5000, tol=1e-12))
    assert rec.status is Status.CONVERGED
    assert np.allclose(rec.final_point, sol, atol=1e-8)


def test_kkt_point_is_fixed(rng):
    N, M = 5, 2
    A = rng.standard_normal((M, N))
    u_star = rng.standard_normal(N)
    v_star = rng.standard_normal(M)
    b = A @ u_star
    # f(u) = 0.5 ||u - c||^2 with c chosen so that grad f(u*) + A^T v* = 0
    c = u_star + A.T @ v_star
    problem = LagrangianProblem(A, b, QuadraticSubproblem(np.eye(N), c, A, b))
    state = EngineState.initial(np.concatenate([u_star, v_star]))
    for _ in range(5):
        state = pmm_step(problem, state, InertialParams(0.1, -0.1, 0.5))
    assert np.linalg.norm(state.x_curr[:N] - u_star) <= 1e-8
    assert np.linalg.norm(state.x_curr[N:] - v_star) <= 1e-8


def test_dual_unchanged_when_primal_feasible(rng):
    A = rng.standard_normal((2, 4))
    u_feas = rng.standard_normal(4)
    b = A @ u_feas
    problem = LagrangianProblem(A, b, lambda v_hat, u_hat, lam: u_feas)
    v_hat = rng.standard_normal(2)
    out = PmmResolvent(problem, 0.3)(np.concatenate([np.zeros(4), v_hat]))
    assert np.array_equal(out[4:], v_hat)


def test_stacked_update_is_shared_extrapolation(rng):
    F, g, A, b = quadratic_setup(rng)
    problem = LagrangianProblem(A, b, QuadraticSubproblem(F, g, A, b))
    params = InertialParams(0.25, -0.02, 0.9)
    state = EngineState.initial(rng.standard_normal(F.shape[1] + A.shape[0]))
    for _ in range(4):
        state = pmm_step(problem, state, params)
    assert np.array_equal(state.y_curr, inertial_extrapolate(state.x_curr, state.x_prev, state.x_prev2, params))


def test_lagrangian_problem_shape_check():
    with pytest.raises(ValueError):
        LagrangianProblem(np.ones((2, 3)), np.ones(3), lambda *a: None)


# --- basis pursuit inner solver ---------------------------------------------------------------


def test_inner_solver_without_constraints_is_soft_threshold(rng):
    u_hat = rng.standard_normal(8) * 2
    for lam in [0.1, 1.0, 5.0]:
        res = solve_bp_subproblem(np.zeros((3, 8)), np.zeros(3), np.zeros(3), u_hat, lam)
        assert res.converged
        assert np.allclose(res.u, soft_threshold(u_hat, lam), atol=1e-10)


def test_inner_solver_stops_immediately_at_minimizer(rng):
    A = rng.standard_normal((3, 6))
    res = solve_bp_subproblem(A, np.zeros(3), np.zeros(3), np.zeros(6), 0.5)
    assert res.converged and res.iterations == 1
    assert np.array_equal(res.u, np.zeros(6))


def plain_prox_gradient(A, b, v_hat, u_hat, lam, iters=200000):
    L = lam * np.linalg.norm(A, 2) ** 2 + 1 / lam
    u = u_hat.copy()
    for _ in range(iters):
        grad = A.T @ v_hat + lam * A.T @ (A @ u - b) + (u - u_hat) / lam
        u = soft_threshold(u - grad / L, 1 / L)
    return u


def test_inner_solver_matches_plain_prox_gradient(rng):
    A = rng.standard_normal((2, 4))
    b = rng.standard_normal(2)
    v_hat = rng.standard_normal(2)
    u_hat = rng.standard_normal(4)
    for lam in [0.3, 2.0]:
        res = solve_bp_subproblem(A, b, v_hat, u_hat, lam, inner_tol=1e-12, inner_max_iter=20000)
        assert res.converged
        oracle = plain_prox_gradient(A, b, v_hat, u_hat, lam, iters=20000)
        assert np.allclose(res.u, oracle, atol=1e-6)


def test_inner_objective_is_monotone(rng):
    A = rng.standard_normal((6, 12))
    b = rng.standard_normal(6)
    res = solve_bp_subproblem(A, b, rng.standard_normal(6), rng.standard_normal(12), 3.0, trace=True)
    diffs = np.diff(res.objective_trace)
    assert np.all(diffs <= 1e-12 * max(1.0, abs(res.objective_trace[0])))


def test_inner_failure_is_flagged_and_raised(rng):
    A = rng.standard_normal((6, 12))
    b = rng.standard_normal(6)
    res = solve_bp_subproblem(A, b, np.zeros(6), np.zeros(12), 10.0, inner_tol=1e-14, inner_max_iter=2)
    assert not res.converged and res.iterations == 2
    solver = BasisPursuitSubproblem(A, b, inner_tol=1e-14, inner_max_iter=2)
    with pytest.raises(InnerSolverError) as info:
        solver(np.zeros(6), np.zeros(12), 10.0)
    assert info.value.result.iterations == 2


def test_inner_solver_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        solve_bp_subproblem(np.eye(2), np.zeros(2), np.zeros(2), np.zeros(2), 0.0)


# --- full basis pursuit runs ------------------------------------------------------------------


@pytest.mark.parametrize("theta, delta", [(0.1, -0.14412), (0.1, 0.0), (0.0, 0.0)])
def test_basis_pursuit_recovers_planted_solution(theta, delta):
    inst = gen_basis_pursuit(40, 20, sparsity=3, seed=1)
    rec = run_pmm_basis_pursuit(inst, InertialParams(theta, delta, 1.0), RunConfig(max_iter=500, tol=1e-6))
    assert rec.status is Status.CONVERGED
    assert np.allclose(rec.final_point[:40], inst.u_true, atol=1e-5)


def test_basis_pursuit_residual_is_stacked_extrapolation_gap():
    inst = gen_basis_pursuit(30, 10, sparsity=2, seed=3)
    params = InertialParams(0.1, -0.1, 10.0)
    rec = run_pmm_basis_pursuit(inst, params, RunConfig(max_iter=3, tol=1e-30, record_iterates=True))
    J = PmmResolvent(basis_pursuit_problem(inst), params.lam)
    state = EngineState.initial(np.zeros(40))
    for k in range(3):
        new = pmm_step(basis_pursuit_problem(inst), state, params)
        assert rec.residuals[k] == pytest.approx(np.linalg.norm(state.y_curr - new.x_curr), rel=1e-9, abs=1e-14)
        assert np.allclose(new.x_curr, J(state.y_curr), atol=1e-12)
        state = new
