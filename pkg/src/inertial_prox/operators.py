"""Resolvents, proximal maps and projections on R^d.

Everything here is immutable after construction. Checks (rank,
orthonormality, monotonicity) happen once in ``__init__`` so that
``__call__`` stays a plain linear-algebra evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class Resolvent:
    """A single-valued firmly nonexpansive map ``x -> (I + lam A)^{-1} x``."""

    dim: int

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def soft_threshold(z, tau: float) -> np.ndarray:
    """Elementwise ``max(|z| - tau, 0) * sign(z)``, the prox of ``tau ||.||_1``."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def power_norm(A, max_iter: int = 100, tol: float = 1e-12) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    v = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    # a second deterministic component avoids starting orthogonal to the top vector
    v = v + np.cos(np.arange(A.shape[1]))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = np.sqrt(nw)
        v = w / nw
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(est)


class IdentityResolvent(Resolvent):
    """Resolvent of the zero operator."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __call__(self, x):
        return np.array(x, dtype=float)


@dataclass(frozen=True)
class LinearMonotoneProblem:
    """The operator ``A(x) = Q x`` with ``Q + Q^T`` positive semidefinite."""

    Q: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        sym = 0.5 * (Q + Q.T)
        lo = np.linalg.eigvalsh(sym).min() if Q.size else 0.0
        if lo < -1e-10 * max(1.0, np.abs(sym).max()):
            raise ValueError(f"x -> Qx is not monotone (min eigenvalue of sym part {lo:.3e})")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]


class LinearResolvent(Resolvent):
    """``x -> (I + lam Q)^{-1} x`` with a cached factorization."""

    def __init__(self, problem: LinearMonotoneProblem):
        self.problem = problem
        self.dim = problem.dim
        M = np.eye(self.dim) + problem.lam * problem.Q
        if np.linalg.cond(M) > 1e14:
            raise ValueError("I + lam Q is numerically singular")
        self._symmetric = np.array_equal(problem.Q, problem.Q.T)
        if self._symmetric:
            self._factor = sla.cho_factor(M)
        else:
            self._factor = sla.lu_factor(M)

    def __call__(self, x):
        if self._symmetric:
            return sla.cho_solve(self._factor, np.asarray(x, dtype=float))
        return sla.lu_solve(self._factor, np.asarray(x, dtype=float))


def resolvent_linear(problem: LinearMonotoneProblem) -> LinearResolvent:
    return LinearResolvent(problem)


class L1Resolvent(Resolvent):
    """Resolvent of ``lam * d||.||_1``, i.e. soft-thresholding at ``lam``."""

    def __init__(self, dim: int, lam: float = 1.0):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.dim = int(dim)
        self.lam = float(lam)

    def __call__(self, x):
        return soft_threshold(x, self.lam)


class QuadraticProx(Resolvent):
    """Prox of ``f(x) = 0.5 ||F x - b||^2`` with step ``weight``.

    Solves ``(weight F^T F + I) x = y + weight F^T b``; the matrix is factored
    once.
    """

    def __init__(self, F, b, weight: float):
        F = np.asarray(F, dtype=float)
        b = np.asarray(b, dtype=float)
        if F.ndim != 2 or b.shape != (F.shape[0],):
            raise ValueError(f"inconsistent shapes F{F.shape}, b{b.shape}")
        if weight <= 0:
            raise ValueError("weight must be > 0")
        self.dim = F.shape[1]
        self.weight = float(weight)
        M = weight * (F.T @ F) + np.eye(self.dim)
        try:
            self._factor = sla.cho_factor(M)
        except np.linalg.LinAlgError as exc:
            raise ValueError("weight F^T F + I is numerically singular") from exc
        self._shift = weight * (F.T @ b)

    def __call__(self, y):
        return sla.cho_solve(self._factor, np.asarray(y, dtype=float) + self._shift)


def prox_quadratic(y, F, b, weight: float) -> np.ndarray:
    """``argmin_x 0.5 ||F x - b||^2 + ||x - y||^2 / (2 weight)``."""
    return QuadraticProx(F, b, weight)(y)


class AffineProjector(Resolvent):
    """Projection onto ``{x : A x = b}`` for a full-row-rank ``A``."""

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.shape != (A.shape[0],):
            raise ValueError(f"inconsistent shapes A{A.shape}, b{b.shape}")
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise ValueError("A must have full row rank")
        self.A, self.b = A, b
        self.dim = A.shape[1]
        self._factor = sla.cho_factor(A @ A.T)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x - self.A.T @ sla.cho_solve(self._factor, self.A @ x - self.b)


def project_affine(x, A, b) -> np.ndarray:
    return AffineProjector(A, b)(x)


class SubspaceProjector(Resolvent):
    """Orthogonal projection onto the span of an orthonormal family."""

    def __init__(self, basis, tol: float = 1e-10):
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        gram = B @ B.T
        if not np.allclose(gram, np.eye(B.shape[0]), rtol=0.0, atol=tol):
            raise ValueError("basis vectors are not orthonormal")
        self.basis = B
        self.dim = B.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.basis.T @ (self.basis @ x)


def project_subspace(x, basis) -> np.ndarray:
    return SubspaceProjector(basis)(x)


def dr_operator(x, J_A, J_B) -> np.ndarray:
    """Douglas-Rachford map ``J_A(2 J_B x - x) + x - J_B x``."""
    x = np.asarray(x, dtype=float)
    jb = J_B(x)
    return J_A(2.0 * jb - x) + x - jb


class DouglasRachfordOperator(Resolvent):
    """The DR map as a resolvent in its own right.

    Its fixed points ``u`` encode zeros of ``A + B`` through the shadow
    ``J_B(u)``.
    """

    def __init__(self, J_A, J_B):
        da, db = getattr(J_A, "dim", None), getattr(J_B, "dim", None)
        if da is not None and db is not None and da != db:
            raise ValueError(f"resolvent dimensions differ: {da} vs {db}")
        self.J_A, self.J_B = J_A, J_B
        self.dim = da if da is not None else db

    def __call__(self, x):
        return dr_operator(x, self.J_A, self.J_B)

    def shadow(self, x) -> np.ndarray:
        return self.J_B(np.asarray(x, dtype=float))
