"""Two-step inertial proximal point engine.

The iteration is

    x_{n+1} = (1 - rho) y_n + rho J(y_n)
    y_{n+1} = x_{n+1} + theta (x_{n+1} - x_n) + delta (x_n - x_{n-1})

where ``J`` is the resolvent ``(I + lam A)^{-1}`` of a maximal monotone
operator ``A``. The engine never sees ``A`` itself, only ``J``.

Convergence (and the Lyapunov / rate certificates below) holds for ``rho = 1``
and ``(delta, theta)`` in the region

    0 <= theta < 1/3,   (3 theta - 1) / (3 + 4 theta) < delta <= 0.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

ResolventLike = Callable[[np.ndarray], np.ndarray]


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter_reached"
    DIVERGED = "diverged"


class StopMetric(str, enum.Enum):
    EXTRAPOLATION_RESIDUAL = "extrapolation_residual"  # ||y_n - x_{n+1}||
    STEP_NORM = "step_norm"  # ||x_{n+1} - x_n||
    CUSTOM = "custom"


class RegionCheck(NamedTuple):
    ok: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok


def delta_lower_bound(theta: float) -> float:
    """Open lower bound ``(3 theta - 1) / (3 + 4 theta)`` on delta."""
    return (3.0 * theta - 1.0) / (3.0 + 4.0 * theta)


def validate_params(theta: float, delta: float) -> RegionCheck:
    """Check ``(theta, delta)`` against the admissible region.

    The lower bound on delta is strict: on the boundary ``c2 = 0`` and the
    rate bound is void.

    Raises
    ------
    ValueError
        If either input is not a finite real.
    """
    if not (math.isfinite(theta) and math.isfinite(delta)):
        raise ValueError(f"theta and delta must be finite, got ({theta}, {delta})")
    if theta < 0:
        return RegionCheck(False, "theta must be >= 0")
    if theta >= 1.0 / 3.0:
        return RegionCheck(False, "theta must be < 1/3")
    if delta > 0:
        return RegionCheck(False, "delta must be <= 0")
    lower = delta_lower_bound(theta)
    if delta <= lower:
        return RegionCheck(False, f"delta below lower bound: need delta > {lower!r}")
    c1, c2 = _raw_coefficients(theta, delta)
    if c1 <= 0 or c2 <= 0:
        # within rounding of the boundary the computed c2 cancels to <= 0
        return RegionCheck(False, f"delta below lower bound: need delta > {lower!r} (numerically on the boundary)")
    return RegionCheck(True)


class Coefficients(NamedTuple):
    c1: float
    c2: float


def coefficients(theta: float, delta: float, strict: bool = True) -> Coefficients:
    """Lyapunov coefficients ``c1`` and ``c2``.

    With ``strict=False`` the formulas are evaluated for any finite pair, which
    is what the region-soundness checks need; the values are then not
    guaranteed positive.
    """
    if strict:
        check = validate_params(theta, delta)
        if not check:
            raise ValueError(f"invalid inertial parameters: {check.reason}")
    return _raw_coefficients(theta, delta)


def _raw_coefficients(theta: float, delta: float) -> Coefficients:
    ad = abs(delta)
    c1 = -(3.0 * theta - 1.0 + (1.0 + theta) * (ad - delta))
    c2 = 1.0 - 3.0 * theta - 2.0 * ad - 2.0 * theta * ad + 2.0 * theta * delta + delta
    return Coefficients(c1, c2)


@dataclass(frozen=True)
class InertialParams:
    """Inertial weights, proximal parameter and relaxation factor.

    ``check_region=False`` skips the region test (lam and rho are still
    checked); it exists so that out-of-region behaviour can be explored
    deliberately.
    """

    theta: float
    delta: float
    lam: float = 1.0
    rho: float = 1.0
    check_region: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        for name in ("theta", "delta", "lam", "rho"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.check_region:
            check = validate_params(self.theta, self.delta)
            if not check:
                raise ValueError(f"invalid inertial parameters: {check.reason}")

    @property
    def coefficients(self) -> Coefficients:
        return coefficients(self.theta, self.delta, strict=False)


def inertial_extrapolate(x_curr, x_prev, x_prev2, params: InertialParams) -> np.ndarray:
    """Return ``x_curr + theta (x_curr - x_prev) + delta (x_prev - x_prev2)``."""
    x_curr, x_prev, x_prev2 = (np.asarray(v, dtype=float) for v in (x_curr, x_prev, x_prev2))
    if not (x_curr.shape == x_prev.shape == x_prev2.shape):
        raise ValueError(
            f"dimension mismatch: {x_curr.shape}, {x_prev.shape}, {x_prev2.shape}"
        )
    return x_curr + params.theta * (x_curr - x_prev) + params.delta * (x_prev - x_prev2)


@dataclass(frozen=True)
class EngineState:
    """Rolling window ``(x_{n-2}, x_{n-1}, x_n, y_n)`` and counter ``n``."""

    x_prev2: np.ndarray
    x_prev: np.ndarray
    x_curr: np.ndarray
    y_curr: np.ndarray
    iter: int = 0

    @classmethod
    def initial(cls, x0) -> "EngineState":
        """Start with ``x_{-2} = x_{-1} = x_0 = y_0``."""
        x0 = np.array(x0, dtype=float)
        if x0.ndim != 1:
            raise ValueError("x0 must be a 1-D vector")
        return cls(x0.copy(), x0.copy(), x0.copy(), x0.copy(), 0)

    @property
    def dim(self) -> int:
        return self.x_curr.shape[0]


def ppa_step(resolvent: ResolventLike, state: EngineState, params: InertialParams) -> EngineState:
    """One iteration of the two-step inertial proximal point method."""
    dim = getattr(resolvent, "dim", None)
    if dim is not None and dim != state.dim:
        raise ValueError(f"resolvent acts on R^{dim}, state lives in R^{state.dim}")
    y = state.y_curr
    j = np.asarray(resolvent(y), dtype=float)
    if params.rho == 1.0:
        x_next = j
    else:
        x_next = (1.0 - params.rho) * y + params.rho * j
    y_next = inertial_extrapolate(x_next, state.x_curr, state.x_prev, params)
    return EngineState(state.x_prev, state.x_curr, x_next, y_next, state.iter + 1)


# --- certificates ------------------------------------------------------------


def _sq(v: np.ndarray) -> float:
    return float(np.dot(v, v))


def lyapunov_values(x_n, x_prev, x_prev2, x_star, params: InertialParams) -> tuple[float, float]:
    """Return ``(Gamma_n, bar Gamma_n)`` for the window ending at ``x_n``."""
    x_n, x_prev, x_prev2, x_star = (np.asarray(v, dtype=float) for v in (x_n, x_prev, x_prev2, x_star))
    if not (x_n.shape == x_prev.shape == x_prev2.shape == x_star.shape):
        raise ValueError("dimension mismatch")
    th, de = params.theta, params.delta
    gamma = (
        _sq(x_n - x_star)
        - th * _sq(x_prev - x_star)
        - de * _sq(x_prev2 - x_star)
        + (1.0 - abs(de) - th) * _sq(x_n - x_prev)
    )
    gamma_bar = gamma + params.coefficients.c1 * _sq(x_prev - x_prev2)
    return gamma, gamma_bar


def rate_bound(params: InertialParams, x0, x_star, n: int) -> float:
    """Upper bound on ``min_{0<=j<=n-2} ||x_{j+1} - y_j||^2`` after ``n`` steps."""
    if n < 2:
        raise ValueError(f"rate bound needs n >= 2, got {n}")
    if params.rho != 1.0:
        raise ValueError("rate bound only holds for rho = 1")
    th, de = params.theta, params.delta
    c2 = params.coefficients.c2
    if c2 <= 0:
        raise ValueError(f"rate bound undefined for c2 = {c2} <= 0")
    r0 = _sq(np.asarray(x0, dtype=float) - np.asarray(x_star, dtype=float))
    return 3.0 * (1.0 + th**2 + de**2) * (1.0 / c2) * (1.0 - th - de) * r0 / (n - 1)


@dataclass
class LyapunovTrace:
    x_star: np.ndarray
    gamma: list[float] = field(default_factory=list)
    gamma_bar: list[float] = field(default_factory=list)


# --- runs --------------------------------------------------------------------


@dataclass
class RunConfig:
    max_iter: int = 1000
    tol: float = 1e-6
    stop_metric: StopMetric = StopMetric.EXTRAPOLATION_RESIDUAL
    custom_metric: Optional[Callable[[Any, Any], float]] = None
    record_iterates: bool = False
    x_star: Optional[np.ndarray] = None  # enables Lyapunov recording

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ValueError(f"tol must be a finite positive real, got {self.tol}")
        self.stop_metric = StopMetric(self.stop_metric)
        if self.stop_metric is StopMetric.CUSTOM and self.custom_metric is None:
            raise ValueError("custom stop metric requested without custom_metric")


@dataclass
class RunRecord:
    residuals: list[float]
    iterations_used: int
    status: Status
    wall_time: float
    final_point: np.ndarray
    final_state: Any = None
    lyapunov: Optional[LyapunovTrace] = None
    iterates: Optional[list[np.ndarray]] = None

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def drive(
    state,
    step: Callable[[Any], Any],
    measure: Callable[[Any, Any], float],
    config: RunConfig,
    point: Callable[[Any], np.ndarray],
    observe: Optional[Callable[[Any], None]] = None,
) -> RunRecord:
    """Iterate ``step`` until ``measure(old, new) <= config.tol``.

    ``point`` extracts the vector reported as the current iterate. A step that
    produces a non-finite iterate or residual halts the run with status
    DIVERGED; the record then ends at the last finite state.
    """
    residuals: list[float] = []
    iterates = [point(state).copy()] if config.record_iterates else None
    status = Status.MAX_ITER
    t0 = time.perf_counter()
    for _ in range(config.max_iter):
        new = step(state)
        res = float(measure(state, new))
        if not (np.all(np.isfinite(point(new))) and math.isfinite(res)):
            status = Status.DIVERGED
            break
        state = new
        # residual is stored before the stopping test
        residuals.append(res)
        if iterates is not None:
            iterates.append(point(state).copy())
        if observe is not None:
            observe(state)
        if res <= config.tol:
            status = Status.CONVERGED
            break
    wall = time.perf_counter() - t0
    return RunRecord(
        residuals=residuals,
        iterations_used=len(residuals),
        status=status,
        wall_time=wall,
        final_point=point(state).copy(),
        final_state=state,
        iterates=iterates,
    )


def _engine_metric(config: RunConfig) -> Callable[[EngineState, EngineState], float]:
    if config.stop_metric is StopMetric.EXTRAPOLATION_RESIDUAL:
        return lambda old, new: float(np.linalg.norm(old.y_curr - new.x_curr))
    if config.stop_metric is StopMetric.STEP_NORM:
        return lambda old, new: float(np.linalg.norm(new.x_curr - old.x_curr))
    return config.custom_metric


def run(resolvent: ResolventLike, x0, params: InertialParams, config: RunConfig) -> RunRecord:
    """Run the engine from ``x_{-2} = x_{-1} = x_0 = y_0 = x0``."""
    state = EngineState.initial(x0)
    if not np.all(np.isfinite(state.x_curr)):
        raise ValueError("x0 must be finite")

    trace = None
    observe = None
    if config.x_star is not None:
        if params.rho != 1.0:
            raise ValueError("Lyapunov certificates only hold for rho = 1")
        x_star = np.asarray(config.x_star, dtype=float)
        trace = LyapunovTrace(x_star=x_star)

        def observe(s: EngineState):
            g, gb = lyapunov_values(s.x_curr, s.x_prev, s.x_prev2, x_star, params)
            trace.gamma.append(g)
            trace.gamma_bar.append(gb)

        observe(state)

    record = drive(
        state,
        lambda s: ppa_step(resolvent, s, params),
        _engine_metric(config),
        config,
        point=lambda s: s.x_curr,
        observe=observe,
    )
    record.lyapunov = trace
    return record


@dataclass
class CertificateReport:
    """Worst-case margins of the Lyapunov and rate certificates.

    A margin is ``allowed - observed``; negative means violated. Violation
    indices are the iteration ``n`` where the first failure occurred.
    """

    monotone_margin: float
    monotone_violation: Optional[int]
    rate_margin: float
    rate_violation: Optional[int]

    @property
    def ok(self) -> bool:
        return self.monotone_violation is None and self.rate_violation is None


def check_certificates(
    record: RunRecord, params: InertialParams, x0, x_star, rel_tol: float = 1e-10
) -> CertificateReport:
    """Check bar Gamma monotonicity and the O(1/n) bound along a finished run.

    ``record`` must come from :func:`run` with ``x_star`` set and the
    extrapolation residual as stop metric (its residuals are the
    ``||x_{j+1} - y_j||`` the bound is about).
    """
    if record.lyapunov is None:
        raise ValueError("run was not recorded against a reference solution")
    gb = record.lyapunov.gamma_bar
    slack = rel_tol * max(1.0, gb[0])
    mono_margin = math.inf
    mono_bad = None
    for n in range(len(gb) - 1):
        m = gb[n] + slack - gb[n + 1]
        mono_margin = min(mono_margin, m)
        if m < 0 and mono_bad is None:
            mono_bad = n + 1

    rate_margin = math.inf
    rate_bad = None
    if params.coefficients.c2 <= 0:
        rate_margin = -math.inf
        rate_bad = 0
    else:
        running_min = math.inf
        for n in range(2, record.iterations_used + 2):
            running_min = min(running_min, record.residuals[n - 2] ** 2)
            m = rate_bound(params, x0, x_star, n) - running_min
            rate_margin = min(rate_margin, m)
            if m < 0 and rate_bad is None:
                rate_bad = n
    return CertificateReport(mono_margin, mono_bad, rate_margin, rate_bad)
