"""Instance generators, method registry and comparison runs.

Random instances come from numpy's PCG64 bit generator with its ziggurat
normal sampler (``Generator.standard_normal``). ``GENERATOR_VERSION`` names
that pair plus the draw order used below; bump it whenever either changes.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import InertialParams, RunConfig, RunRecord, run
from .operators import LinearMonotoneProblem, LinearResolvent, SubspaceProjector
from .saddle import BasisPursuitInstance, run_pmm_basis_pursuit
from .splitting import TvLsInstance, run_dr, run_tv_admm

GENERATOR_VERSION = "pcg64-ziggurat/1"
THREADS_ENV = "INERTIAL_PROX_THREADS"

# (N, M, p) for the four TV cases and (N, M) for the basis pursuit sizes
TV_CASES = {1: (100, 99, 5), 2: (200, 199, 10), 3: (300, 299, 20), 4: (400, 399, 40)}
BP_SIZES = [(200, 50), (200, 100), (500, 50), (500, 100)]


def make_rng(seed: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def gen_basis_pursuit(N: int, M: int, sparsity: Optional[int] = None, seed: int = 0) -> BasisPursuitInstance:
    """Gaussian ``A`` (M x N), planted sparse ``u*`` and ``b = A u*``.

    Default sparsity is ``max(1, round(M/5))``.
    """
    if not (0 < M < N):
        raise ValueError(f"need 0 < M < N, got N={N}, M={M}")
    if sparsity is None:
        sparsity = max(1, round(M / 5))
    if not 0 < sparsity <= N:
        raise ValueError(f"need 0 < sparsity <= N, got {sparsity}")
    rng = make_rng(seed)
    A = rng.standard_normal((M, N))
    support = rng.choice(N, size=sparsity, replace=False)
    u = np.zeros(N)
    u[support] = rng.standard_normal(sparsity)
    return BasisPursuitInstance(A=A, b=A @ u, u_true=u, sparsity=int(sparsity))


def difference_matrix(N: int) -> np.ndarray:
    """``(N-1) x N`` forward differences, ``(D x)_i = x_i - x_{i+1}``."""
    if N < 2:
        raise ValueError(f"difference matrix needs N >= 2, got {N}")
    D = np.zeros((N - 1, N))
    idx = np.arange(N - 1)
    D[idx, idx] = 1.0
    D[idx, idx + 1] = -1.0
    return D


def gen_tv_ls(
    N: int,
    M: Optional[int] = None,
    p: int = 5,
    noise_scale: Optional[float] = None,
    pieces: int = 5,
    seed: int = 0,
    gamma: float = 0.01,
) -> TvLsInstance:
    """Piecewise-constant ``x*``, Gaussian ``F`` and ``b = F x* + noise``.

    ``noise_scale`` defaults to ``0.01 ||F x*|| / sqrt(p)``.
    """
    if M is None:
        M = N - 1
    if M != N - 1:
        raise ValueError(f"TV instances need M = N - 1, got N={N}, M={M}")
    if p < 1 or pieces < 1 or pieces > N:
        raise ValueError(f"need p >= 1 and 1 <= pieces <= N, got p={p}, pieces={pieces}")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    rng = make_rng(seed)
    breaks = np.sort(rng.choice(np.arange(1, N), size=pieces - 1, replace=False))
    levels = rng.standard_normal(pieces)
    x_true = np.repeat(levels, np.diff(np.concatenate([[0], breaks, [N]])))
    F = rng.standard_normal((p, N))
    noise = rng.standard_normal(p)
    clean = F @ x_true
    if noise_scale is None:
        noise_scale = 0.01 * float(np.linalg.norm(clean)) / math.sqrt(p)
    b = clean + noise_scale * noise if noise_scale else clean
    return TvLsInstance(F=F, b=b, D=difference_matrix(N), gamma=float(gamma), x_true=x_true)


@dataclass(frozen=True)
class FeasibilityInstance:
    """Two lines through the origin in R^2; their intersection is ``{0}``."""

    angle: float
    P1: SubspaceProjector
    P2: SubspaceProjector
    x0: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))


def gen_two_subspace(angle: float) -> FeasibilityInstance:
    if not 0.0 < angle < math.pi / 2:
        raise ValueError(f"angle must lie strictly inside (0, pi/2), got {angle}")
    P1 = SubspaceProjector([[1.0, 0.0]])
    P2 = SubspaceProjector([[math.cos(angle), math.sin(angle)]])
    return FeasibilityInstance(float(angle), P1, P2)


@dataclass(frozen=True)
class LinearInstance:
    """``0 = Q x`` with ``Q`` positive definite on its symmetric part; ``x* = 0``."""

    Q: np.ndarray
    x0: np.ndarray

    @property
    def x_star(self) -> np.ndarray:
        return np.zeros(self.Q.shape[0])

    def problem(self, lam: float) -> LinearMonotoneProblem:
        return LinearMonotoneProblem(self.Q, lam)


def gen_linear_monotone(dim: int, seed: int = 0, skew: float = 0.0, x0: Union[str, Sequence[float]] = "random") -> LinearInstance:
    """Random ``Q = G G^T / dim + 0.1 I`` plus an optional skew part.

    A skew-symmetric part keeps ``x -> Qx`` monotone while making it
    non-symmetric.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = make_rng(seed)
    G = rng.standard_normal((dim, dim))
    Q = G @ G.T / dim + 0.1 * np.eye(dim)
    K = rng.standard_normal((dim, dim))
    if skew:
        Q = Q + skew * (K - K.T)
    start = rng.standard_normal(dim)
    if isinstance(x0, str):
        if x0 == "zeros":
            start = np.zeros(dim)
        elif x0 != "random":
            raise ValueError(f"x0 must be 'random', 'zeros' or a vector, got {x0!r}")
    else:
        start = np.asarray(x0, dtype=float)
        if start.shape != (dim,):
            raise ValueError(f"x0 must have length {dim}")
    return LinearInstance(Q, start)


# --- methods and reports ------------------------------------------------------------


class Family(str, enum.Enum):
    PMM = "PMM"
    TV_ADMM = "TvAdmm"
    DR = "DR"
    PDHG = "PDHG"
    GENERIC_PPA = "GenericPPA"


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: InertialParams
    family: Family

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))


def standard_methods(family: Family, lam: Optional[float] = None) -> list[MethodSpec]:
    """Two-step method, its one-step (delta = 0) and plain (theta = delta = 0) baselines.

    Default inertial weights: ``delta = -0.14412`` for
    basis pursuit, ``delta = -1e-3`` for TV, ``delta = -0.05`` elsewhere.
    """
    family = Family(family)
    defaults = {
        Family.PMM: (1e-4, -0.14412),
        Family.TV_ADMM: (0.1, -1e-3),
    }
    lam_default, delta = defaults.get(family, (1.0, -0.05))
    lam = lam_default if lam is None else lam
    return [
        MethodSpec("two-step", InertialParams(0.1, delta, lam), family),
        MethodSpec("one-step", InertialParams(0.1, 0.0, lam), family),
        MethodSpec("plain", InertialParams(0.0, 0.0, lam), family),
    ]


_FAMILY_OF = {
    BasisPursuitInstance: Family.PMM,
    TvLsInstance: Family.TV_ADMM,
    FeasibilityInstance: Family.DR,
    LinearInstance: Family.GENERIC_PPA,
}


def family_of(instance) -> Family:
    try:
        return _FAMILY_OF[type(instance)]
    except KeyError:
        raise TypeError(f"no benchmark family for {type(instance).__name__}") from None


def describe(instance) -> str:
    if isinstance(instance, BasisPursuitInstance):
        M, N = instance.A.shape
        return f"basis_pursuit N={N} M={M} sparsity={instance.sparsity}"
    if isinstance(instance, TvLsInstance):
        return f"tv_ls N={instance.n} M={instance.m} p={instance.p} gamma={instance.gamma}"
    if isinstance(instance, FeasibilityInstance):
        return f"feasibility angle={instance.angle!r}"
    if isinstance(instance, LinearInstance):
        return f"linear_monotone dim={instance.Q.shape[0]}"
    raise TypeError(f"unknown instance type {type(instance).__name__}")


def run_method(instance, method: MethodSpec, config: RunConfig) -> RunRecord:
    """Run one method on one instance from the instance's canonical start."""
    expected = family_of(instance)
    if method.family is not expected:
        raise ValueError(f"method {method.name!r} ({method.family.value}) cannot run on a {expected.value} instance")
    params = method.params
    if isinstance(instance, BasisPursuitInstance):
        return run_pmm_basis_pursuit(instance, params, config)
    if isinstance(instance, TvLsInstance):
        return run_tv_admm(instance, params, config)
    if isinstance(instance, FeasibilityInstance):
        return run_dr(instance.P1, instance.P2, instance.x0, params, config)
    resolvent = LinearResolvent(instance.problem(params.lam))
    return run(resolvent, instance.x0, params, config)


@dataclass
class ReportRow:
    method: str
    iterations: int
    final_residual: float
    wall_time: float
    status: str


@dataclass
class ComparisonReport:
    rows: list[ReportRow]
    instance: str
    seed: Optional[int] = None


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def run_comparison(instance, methods: Sequence[MethodSpec], config: RunConfig,
                   seed: Optional[int] = None, threads: Optional[int] = None) -> ComparisonReport:
    """Run every method on the same instance and collect one row per method.

    Rows keep the order of ``methods`` whatever the thread count. A method
    that diverges is reported with its status rather than aborting the report.
    """
    expected = family_of(instance)
    for m in methods:
        if m.family is not expected:
            raise ValueError(f"method {m.name!r} is not applicable to {expected.value} instances")

    def one(method: MethodSpec) -> ReportRow:
        rec = run_method(instance, method, config)
        return ReportRow(method.name, rec.iterations_used, rec.final_residual, rec.wall_time, rec.status.value)

    workers = max(1, min(threads or thread_count(), len(methods) or 1))
    if workers == 1:
        rows = [one(m) for m in methods]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, methods))
    return ComparisonReport(rows=rows, instance=describe(instance), seed=seed)
