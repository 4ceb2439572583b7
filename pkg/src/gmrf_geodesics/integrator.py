"""Geodesic integration in the random-field parameter manifold.

The geodesic equations reduce to the first-order system

    gamma' = alpha,      alpha'_k = -alpha^T Gamma^k alpha

on the 6-dim state (position, velocity).  The system is advanced with
classical fixed-step RK4.  In ``random_field`` mode each outer iteration
generates a fresh field outcome by MCMC at the current position,
estimates the patch statistics, builds the connection, and performs one
step with the connection held fixed across the four stages; in
``gaussian_analytic`` mode (beta identically 0) the closed-form
connection of the Gaussian submanifold is used and no simulation runs.

Two arc lengths are accumulated per step: the coordinate length
sum ||alpha|| * h (the headline geodesic distance) and the metric length
sum sqrt(alpha^T g alpha) * h as a secondary column.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameterError, NonFiniteStateError, SingularMetricError
from .geometry import (
    ChristoffelTensor,
    christoffel_symbols,
    curvature_report,
    inverse_metric,
    metric_derivatives,
    metric_tensor,
)
from .lattice import FieldLattice, ParamPoint, init_field, metropolis_sweep, resample_iid
from .patches import compute_patch_stats

__all__ = [
    "Mode",
    "ChristoffelRefresh",
    "TangentVector",
    "IntegratorConfig",
    "GeodesicTrace",
    "DispersionMetrics",
    "TRACE_COLUMNS",
    "gaussian_christoffels",
    "rk4_step",
    "integrate_geodesic",
    "reverse_replay",
    "dispersion_metrics",
    "save_trace",
    "load_trace",
]


class Mode(str, enum.Enum):
    RANDOM_FIELD = "random_field"
    GAUSSIAN_ANALYTIC = "gaussian_analytic"


class ChristoffelRefresh(str, enum.Enum):
    """When the connection coefficients are (re)evaluated within a step.

    PER_STEP evaluates them once per outer iteration and holds them fixed
    across the four RK4 stages (the simulation algorithm's structure; the
    only possibility in random_field mode, where each evaluation costs a
    full MCMC run).  PER_STAGE re-evaluates the closed-form connection at
    every stage point, recovering the full 4th-order accuracy of RK4;
    it is the default for gaussian_analytic mode.
    """

    PER_STEP = "per_step"
    PER_STAGE = "per_stage"


@dataclass(frozen=True)
class TangentVector:
    """Velocity (a1, a2, a3) in the (mu, sigma2, beta) directions."""

    a1: float
    a2: float
    a3: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a1, self.a2, self.a3)):
            raise InvalidParameterError(f"velocity components must be finite, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3], dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.a1**2 + self.a2**2 + self.a3**2)

    def __neg__(self) -> "TangentVector":
        return TangentVector(-self.a1, -self.a2, -self.a3)


@dataclass(frozen=True)
class IntegratorConfig:
    """Knobs of one geodesic run.

    The step size is h = (t_end - t_start) / n_steps.  ``seed`` feeds the
    lattice RNG in random_field mode (gaussian_analytic runs are fully
    deterministic and ignore it).  ``warm_start`` evolves the previous
    outcome at each new position; False redraws an i.i.d. field first.
    ``sigma2_floor`` terminates the run (instead of clamping) when the
    variance coordinate falls to it.  ``christoffel_refresh`` defaults to
    PER_STAGE in gaussian_analytic mode and PER_STEP in random_field mode
    (the only supported choice there).
    """

    t_start: float = 0.0
    t_end: float = 10.0
    n_steps: int = 1000
    lattice_height: int = 128
    lattice_width: int = 128
    mcmc_sweeps: int = 100
    seed: int = 0
    lambda_reg: float = 0.001
    mode: Mode = Mode.RANDOM_FIELD
    warm_start: bool = True
    sigma2_floor: float = 1e-3
    christoffel_refresh: ChristoffelRefresh | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_steps < 1:
            raise InvalidParameterError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.t_end > self.t_start:
            raise InvalidParameterError("t_end must exceed t_start")
        if self.sigma2_floor <= 0.0:
            raise InvalidParameterError(f"sigma2_floor must be > 0, got {self.sigma2_floor}")
        if self.mcmc_sweeps < 1:
            raise InvalidParameterError(f"mcmc_sweeps must be >= 1, got {self.mcmc_sweeps}")
        if self.lattice_height < 3 or self.lattice_width < 3:
            raise InvalidParameterError("lattice must be at least 3x3")
        if self.lambda_reg < 0.0:
            raise InvalidParameterError(f"lambda_reg must be >= 0, got {self.lambda_reg}")
        refresh = self.christoffel_refresh
        if refresh is None:
            refresh = (
                ChristoffelRefresh.PER_STAGE
                if self.mode is Mode.GAUSSIAN_ANALYTIC
                else ChristoffelRefresh.PER_STEP
            )
        refresh = ChristoffelRefresh(refresh)
        if self.mode is Mode.RANDOM_FIELD and refresh is ChristoffelRefresh.PER_STAGE:
            raise InvalidParameterError(
                "random_field mode evaluates the connection once per iteration;"
                " per_stage refresh is not supported there"
            )
        object.__setattr__(self, "christoffel_refresh", refresh)

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps


TRACE_COLUMNS = (
    "t", "mu", "sigma2", "beta", "alpha1", "alpha2", "alpha3",
    "entropy", "curvature", "arc_length", "metric_length",
)


@dataclass
class GeodesicTrace:
    """Per-step record of one integration.

    Column arrays share one length: the initial state plus one row per
    completed iteration (n_steps + 1 on full success, fewer when
    terminated early).  ``entropy`` and ``curvature`` in random_field
    mode come from the patch statistics of the iteration that produced
    the row's step; the final row carries the last iteration's values.
    ``arc_length`` is nondecreasing and its last entry is
    ``total_length``.
    """

    mode: Mode
    t: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    beta: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    entropy: np.ndarray
    curvature: np.ndarray
    arc_length: np.ndarray
    metric_length: np.ndarray
    terminated_early: bool = False
    termination_reason: str = ""

    def __len__(self) -> int:
        return self.t.size

    @property
    def total_length(self) -> float:
        return float(self.arc_length[-1])

    @property
    def total_metric_length(self) -> float:
        return float(self.metric_length[-1])

    def start_point(self) -> ParamPoint:
        return ParamPoint(float(self.mu[0]), float(self.sigma2[0]), float(self.beta[0]))

    def endpoint(self) -> ParamPoint:
        return ParamPoint(float(self.mu[-1]), float(self.sigma2[-1]), float(self.beta[-1]))

    def initial_velocity(self) -> TangentVector:
        return TangentVector(float(self.alpha1[0]), float(self.alpha2[0]), float(self.alpha3[0]))

    def final_velocity(self) -> TangentVector:
        return TangentVector(float(self.alpha1[-1]), float(self.alpha2[-1]), float(self.alpha3[-1]))


def _rows_to_trace(mode, rows, terminated, reason) -> GeodesicTrace:
    data = np.array(rows, dtype=float).reshape(len(rows), len(TRACE_COLUMNS))
    cols = {name: data[:, k] for k, name in enumerate(TRACE_COLUMNS)}
    return GeodesicTrace(mode=mode, terminated_early=terminated, termination_reason=reason, **cols)


# --------------------------------------------------------------------------
# Stepping
# --------------------------------------------------------------------------

def _geodesic_acceleration(vel: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """alpha'_k = -alpha^T Gamma^k alpha for the three upper indices."""
    return -np.einsum("i,kij,j->k", vel, gamma, vel)


def rk4_step(
    theta: ParamPoint,
    alpha: TangentVector,
    gamma_tensor: ChristoffelTensor,
    h: float,
) -> tuple[ParamPoint, TangentVector]:
    """One classical RK4 step of the 6-dim geodesic system.

    The connection is held fixed across the four stages (it is evaluated
    once per outer iteration by the caller), so the stage accelerations
    depend only on the stage velocities.

    Raises:
        InvalidParameterError: if h <= 0 or the step leaves the valid
            parameter domain (sigma2 <= 0).
        NonFiniteStateError: if any output component is NaN or infinite.
    """
    if h <= 0.0:
        raise InvalidParameterError(f"step size must be > 0, got {h}")
    gamma = gamma_tensor.gamma
    pos = theta.as_array()
    vel = alpha.as_array()

    k1v = vel
    k1a = _geodesic_acceleration(vel, gamma)
    v2 = vel + 0.5 * h * k1a
    k2a = _geodesic_acceleration(v2, gamma)
    v3 = vel + 0.5 * h * k2a
    k3a = _geodesic_acceleration(v3, gamma)
    v4 = vel + h * k3a
    k4a = _geodesic_acceleration(v4, gamma)

    new_pos = pos + (h / 6.0) * (k1v + 2.0 * v2 + 2.0 * v3 + v4)
    new_vel = vel + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    if not (np.all(np.isfinite(new_pos)) and np.all(np.isfinite(new_vel))):
        raise NonFiniteStateError("RK4 step produced NaN/Inf state")
    return (
        ParamPoint(float(new_pos[0]), float(new_pos[1]), float(new_pos[2])),
        TangentVector(float(new_vel[0]), float(new_vel[1]), float(new_vel[2])),
    )


def gaussian_christoffels(sigma2: float) -> ChristoffelTensor:
    """Closed-form connection of the Gaussian (beta = 0) submanifold:
    Gamma^mu_{mu,s2} = -1/(2 s2), Gamma^s2_{mu,mu} = 1,
    Gamma^s2_{s2,s2} = -1/s2; every beta component vanishes."""
    gamma = np.zeros((3, 3, 3))
    gamma[0, 0, 1] = gamma[0, 1, 0] = -0.5 / sigma2
    gamma[1, 0, 0] = 1.0
    gamma[1, 1, 1] = -1.0 / sigma2
    return ChristoffelTensor(gamma)


# On the beta = 0 slice the second fundamental form equals the metric, so
# the shape operator of the active 2x2 block is -I and its determinant is
# the constant below.
_SUBMANIFOLD_CURVATURE = 1.0

# A fixed-step scheme that multiplies the velocity a thousandfold in one
# step has left its stability region; the state it would produce carries
# no information about the geodesic.
_MAX_STEP_AMPLIFICATION = 1e3


class _StageDomainError(Exception):
    """Internal: a stage point left the valid sigma2 domain."""


def _gaussian_entropy(sigma2: float) -> float:
    return 0.5 * math.log(2.0 * math.pi * math.e * sigma2)


def _gaussian_rk4(mu, s2, a1, a2, h, floor, per_stage):
    """Scalar RK4 step of the submanifold system
    mu' = a1, s2' = a2, a1' = a1 a2 / s2, a2' = -a1^2 + a2^2 / s2."""

    if per_stage:
        def f(s2_, v1, v2):
            if s2_ <= floor:
                raise _StageDomainError(f"stage sigma2 {s2_:.6g} at or below floor {floor:g}")
            return (v1, v2, v1 * v2 / s2_, -v1 * v1 + v2 * v2 / s2_)

        k1 = f(s2, a1, a2)
        k2 = f(s2 + 0.5 * h * k1[1], a1 + 0.5 * h * k1[2], a2 + 0.5 * h * k1[3])
        k3 = f(s2 + 0.5 * h * k2[1], a1 + 0.5 * h * k2[2], a2 + 0.5 * h * k2[3])
        k4 = f(s2 + h * k3[1], a1 + h * k3[2], a2 + h * k3[3])
    else:
        inv_s2 = 1.0 / s2  # connection frozen at the step's start point

        def f(v1, v2):
            return (v1, v2, v1 * v2 * inv_s2, -v1 * v1 + v2 * v2 * inv_s2)

        k1 = f(a1, a2)
        k2 = f(a1 + 0.5 * h * k1[2], a2 + 0.5 * h * k1[3])
        k3 = f(a1 + 0.5 * h * k2[2], a2 + 0.5 * h * k2[3])
        k4 = f(a1 + h * k3[2], a2 + h * k3[3])

    mu += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    s2 += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    a1 += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    a2 += h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
    return mu, s2, a1, a2


def _integrate_gaussian(config: IntegratorConfig, theta0: ParamPoint, alpha0: TangentVector) -> GeodesicTrace:
    if theta0.beta != 0.0 or alpha0.a3 != 0.0:
        raise InvalidParameterError(
            "gaussian_analytic mode lives on the beta = 0 submanifold:"
            " theta0.beta and alpha0.a3 must both be 0"
        )
    h = config.step
    floor = config.sigma2_floor
    per_stage = config.christoffel_refresh is ChristoffelRefresh.PER_STAGE
    mu, s2, a1, a2 = theta0.mu, theta0.sigma2, alpha0.a1, alpha0.a2
    arc = metric_arc = 0.0
    rows: list[tuple] = []
    terminated = False
    reason = ""

    def record(t):
        rows.append((t, mu, s2, 0.0, a1, a2, 0.0,
                     _gaussian_entropy(s2), _SUBMANIFOLD_CURVATURE, arc, metric_arc))

    for i in range(config.n_steps):
        record(config.t_start + i * h)
        speed = math.hypot(a1, a2)
        metric_speed = math.sqrt(a1 * a1 / s2 + a2 * a2 / (2.0 * s2 * s2))
        try:
            nmu, ns2, na1, na2 = _gaussian_rk4(mu, s2, a1, a2, h, floor, per_stage)
        except _StageDomainError as exc:
            terminated, reason = True, f"step {i}: {exc}"
            break
        if not all(math.isfinite(v) for v in (nmu, ns2, na1, na2)):
            terminated, reason = True, f"step {i}: state became non-finite"
            break
        if ns2 <= floor:
            # leave the trace at the last in-domain state
            terminated, reason = True, f"step {i}: sigma2 {ns2:.6g} fell to the floor {floor:g}"
            break
        arc += speed * h
        metric_arc += metric_speed * h
        mu, s2, a1, a2 = nmu, ns2, na1, na2
    else:
        record(config.t_start + config.n_steps * h)

    return _rows_to_trace(Mode.GAUSSIAN_ANALYTIC, rows, terminated, reason)


def _integrate_random_field(config: IntegratorConfig, theta0: ParamPoint, alpha0: TangentVector) -> GeodesicTrace:
    h = config.step
    floor = config.sigma2_floor
    field_ = init_field(config.lattice_height, config.lattice_width, theta0, config.seed)
    pos = theta0.as_array()
    vel = alpha0.as_array()
    arc = metric_arc = 0.0
    entropy_val = curvature_val = float("nan")
    rows: list[tuple] = []
    terminated = False
    reason = ""

    def record(t):
        rows.append((t, pos[0], pos[1], pos[2], vel[0], vel[1], vel[2],
                     entropy_val, curvature_val, arc, metric_arc))

    for i in range(config.n_steps):
        theta_i = ParamPoint(float(pos[0]), float(pos[1]), float(pos[2]))
        failure = None
        gam = None
        metric_speed2 = 0.0
        try:
            if not config.warm_start:
                resample_iid(field_, theta_i)
            metropolis_sweep(field_, theta_i, config.mcmc_sweeps)
            stats = compute_patch_stats(field_)
            g = metric_tensor(theta_i, stats)
            ginv = inverse_metric(g, config.lambda_reg)
            dg_ds2, dg_db = metric_derivatives(theta_i, stats)
            gam = christoffel_symbols(g, ginv, dg_ds2, dg_db)
            report = curvature_report(theta_i, stats, config.lambda_reg)
            entropy_val = report.entropy
            curvature_val = report.gaussian_curvature
            metric_speed2 = float(vel @ g.g @ vel)
        except (SingularMetricError, InvalidParameterError, NonFiniteStateError) as exc:
            failure = f"step {i}: {exc}"
        record(config.t_start + i * h)
        if failure is not None:
            terminated, reason = True, failure
            break
        try:
            new_theta, new_vel = rk4_step(theta_i, TangentVector(*vel), gam, h)
        except (InvalidParameterError, NonFiniteStateError) as exc:
            terminated, reason = True, f"step {i}: {exc}"
            break
        if new_theta.sigma2 <= floor:
            # leave the trace at the last in-domain state
            terminated, reason = True, f"step {i}: sigma2 {new_theta.sigma2:.6g} fell to the floor {floor:g}"
            break
        arc += float(np.linalg.norm(vel)) * h
        metric_arc += math.sqrt(max(metric_speed2, 0.0)) * h
        pos = new_theta.as_array()
        vel = new_vel.as_array()
    else:
        record(config.t_start + config.n_steps * h)

    return _rows_to_trace(Mode.RANDOM_FIELD, rows, terminated, reason)


def integrate_geodesic(config: IntegratorConfig, theta0: ParamPoint, alpha0: TangentVector) -> GeodesicTrace:
    """Integrate a geodesic from (theta0, alpha0) over [t_start, t_end].

    Returns the full trace on success, or a partial trace with
    ``terminated_early`` set when sigma2 reaches the floor, the state
    becomes non-finite, or the metric turns singular.  Runs with the same
    config are bit-identical.

    Raises:
        InvalidParameterError: if theta0.sigma2 is not above the floor, or
            the initial conditions leave the gaussian_analytic submanifold.
    """
    if theta0.sigma2 <= config.sigma2_floor:
        raise InvalidParameterError(
            f"theta0.sigma2 ({theta0.sigma2}) must exceed sigma2_floor ({config.sigma2_floor})"
        )
    if config.mode is Mode.GAUSSIAN_ANALYTIC:
        return _integrate_gaussian(config, theta0, alpha0)
    return _integrate_random_field(config, theta0, alpha0)


_REVERSE_STREAM_TAG = 1


def derive_reverse_seed(seed: int) -> int:
    """Deterministic seed for the time-reversed run's fresh MCMC stream."""
    return int(np.random.SeedSequence([int(seed), _REVERSE_STREAM_TAG]).generate_state(1)[0])


def reverse_replay(config: IntegratorConfig, forward: GeodesicTrace) -> GeodesicTrace:
    """Integrate backwards: start at the forward endpoint with the negated
    final velocity, same config but a fresh (derived) MCMC seed.

    The replay covers exactly the parameter interval the forward trace
    completed (relevant when it terminated early), so a reverse run of a
    k-step forward trace takes k steps of the same size.

    Raises:
        InvalidParameterError: if the forward trace has no completed step.
    """
    if len(forward) < 2:
        raise InvalidParameterError("forward trace has no completed step to reverse")
    reverse_config = replace(config, seed=derive_reverse_seed(config.seed))
    covered_steps = len(forward) - 1
    if covered_steps != config.n_steps:
        reverse_config = replace(
            reverse_config,
            n_steps=covered_steps,
            t_end=config.t_start + covered_steps * config.step,
        )
    return integrate_geodesic(reverse_config, forward.endpoint(), -forward.final_velocity())


@dataclass(frozen=True)
class DispersionMetrics:
    """How far a time-reversed run strays from retracing the forward one."""

    geo_ab: float
    geo_ba: float
    length_gap: float
    endpoint_gap: float
    euclid_ab: float


def _param_distance(a: ParamPoint, b: ParamPoint, dims: int) -> float:
    d = a.as_array()[:dims] - b.as_array()[:dims]
    return float(np.linalg.norm(d))


def dispersion_metrics(forward: GeodesicTrace, reverse: GeodesicTrace) -> DispersionMetrics:
    """Forward/reverse lengths, their gap, the A-return miss of the
    reverse endpoint (always in all three coordinates), and the straight
    parameter-space distance A->B (2D on the gaussian submanifold, 3D
    otherwise)."""
    if len(forward) == 0 or len(reverse) == 0:
        raise InvalidParameterError("both traces must be nonempty")
    euclid_dims = 2 if forward.mode is Mode.GAUSSIAN_ANALYTIC else 3
    geo_ab = forward.total_length
    geo_ba = reverse.total_length
    return DispersionMetrics(
        geo_ab=geo_ab,
        geo_ba=geo_ba,
        length_gap=abs(geo_ab - geo_ba),
        endpoint_gap=_param_distance(reverse.endpoint(), forward.start_point(), 3),
        euclid_ab=_param_distance(forward.endpoint(), forward.start_point(), euclid_dims),
    )


# --------------------------------------------------------------------------
# Trace CSV
# --------------------------------------------------------------------------

def save_trace(trace: GeodesicTrace, path) -> None:
    """Write the trace as CSV: fixed header, one row per record, 12
    significant digits, '.' decimal separator regardless of locale."""
    lines = [",".join(TRACE_COLUMNS)]
    columns = [getattr(trace, name) for name in TRACE_COLUMNS]
    for k in range(len(trace)):
        lines.append(",".join(f"{col[k]:.12g}" for col in columns))
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_trace(path, mode: Mode = Mode.RANDOM_FIELD) -> GeodesicTrace:
    """Read a trace CSV written by save_trace.

    The CSV does not carry the mode or termination metadata; ``mode`` is
    taken from the caller (it only affects the dimensionality used by
    dispersion_metrics).
    """
    with open(str(path), "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.split(",") != list(TRACE_COLUMNS):
            raise InvalidParameterError(f"unexpected trace header in {path}: {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(TRACE_COLUMNS):
        raise InvalidParameterError(f"expected {len(TRACE_COLUMNS)} columns in {path}")
    cols = {name: data[:, k] for k, name in enumerate(TRACE_COLUMNS)}
    return GeodesicTrace(mode=Mode(mode), terminated_early=False, termination_reason="", **cols)
