"""Outer-loop receding-horizon controller over a stacked double integrator.

The prediction model treats x, y, z and yaw as independent double integrators
driven by piecewise-constant accelerations, so every predicted position and
velocity is affine in the stacked input vector. Costs are therefore exact
quadratics; only the barrier constraints are nonlinear.

Decision vector layout: ``U.reshape(N, 4)[i] = (ax, ay, az, yaw_accel)`` for
prediction step ``i``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import cbf
from .aero import TunnelGeometry
from .cbf import CbfParams
from .dynamics import UavState, euler_rates
from .optimizer import Constraint, NlpProblem, SolveStatus, SolverOptions, solve

INF = math.inf


class Mode(str, enum.Enum):
    NAIVE = "Naive"
    HC = "HC"
    CBF = "CBF"


class Case(str, enum.Enum):
    BOUND_REGION = "BoundRegion"
    MIN_STANDOFF = "MinStandoff"
    CLOSE_PROXIMITY = "CloseProximity"


@dataclass(frozen=True)
class MpcState:
    position: np.ndarray
    velocity: np.ndarray
    yaw: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))
                and math.isfinite(self.yaw) and math.isfinite(self.yaw_rate)):
            raise ValueError("MPC state must be finite")

    @classmethod
    def from_uav(cls, state: UavState) -> "MpcState":
        rates = euler_rates(state.attitude, state.body_rates)
        return cls(state.position, state.velocity, float(state.attitude[2]), float(rates[2]))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, [self.yaw, self.yaw_rate]])


@dataclass(frozen=True)
class MpcInput:
    accel: np.ndarray
    yaw_accel: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float).reshape(3))

    def as_array(self) -> np.ndarray:
        return np.append(self.accel, self.yaw_accel)

    @classmethod
    def from_array(cls, u) -> "MpcInput":
        u = np.asarray(u, dtype=float)
        return cls(u[:3], float(u[3]))


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights and box bounds of the optimal control problem.

    State bounds are ordered ``(px, py, pz, vx, vy, vz, yaw, yaw_rate)`` and
    input bounds ``(ax, ay, az, yaw_accel)``. Weights are per-axis diagonals.
    Yaw weights are not part of the position/velocity costs; they only keep the
    yaw channel well posed.
    """

    horizon: int = 10
    t_s: float = 0.1
    w1: tuple[float, float, float] = (10.0, 10.0, 10.0)
    ws1: tuple[float, float, float] = (50.0, 50.0, 50.0)
    w2: tuple[float, float, float] = (2.0, 2.0, 2.0)
    ws2: tuple[float, float, float] = (10.0, 10.0, 10.0)
    w_yaw: float = 1.0
    ws_yaw: float = 5.0
    w_yaw_rate: float = 0.2
    ws_yaw_rate: float = 1.0
    x_min: tuple[float, ...] = (-INF, -INF, -INF, -2.0, -2.0, -2.0, -INF, -INF)
    x_max: tuple[float, ...] = (INF, INF, INF, 2.0, 2.0, 2.0, INF, INF)
    u_min: tuple[float, ...] = (-3.0, -3.0, -3.0, -2.0)
    u_max: tuple[float, ...] = (3.0, 3.0, 3.0, 2.0)
    mode: Mode = Mode.NAIVE
    case: Case = Case.BOUND_REGION
    max_iter: int = 50
    tol_opt: float = 1e-6
    tol_feas: float = 1e-6

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "case", Case(self.case))
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not self.t_s > 0:
            raise ValueError("t_s must be positive")
        for name in ("w1", "ws1", "w2", "ws2"):
            w = getattr(self, name)
            if len(w) != 3 or any(v < 0 for v in w):
                raise ValueError(f"{name} must be three non-negative weights")
        if min(self.w_yaw, self.ws_yaw, self.w_yaw_rate, self.ws_yaw_rate) < 0:
            raise ValueError("yaw weights must be non-negative")
        if len(self.x_min) != 8 or len(self.x_max) != 8:
            raise ValueError("state bounds need 8 entries")
        if len(self.u_min) != 4 or len(self.u_max) != 4:
            raise ValueError("input bounds need 4 entries")
        if any(lo > hi for lo, hi in zip(self.x_min, self.x_max)):
            raise ValueError("x_min exceeds x_max")
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min exceeds u_max")
        if not (self.max_iter >= 1 and self.tol_opt > 0 and self.tol_feas > 0):
            raise ValueError("solver settings must be positive")

    @property
    def dim(self) -> int:
        return 4 * self.horizon

    def solver_options(self) -> SolverOptions:
        return SolverOptions(max_iter=self.max_iter, tol_opt=self.tol_opt, tol_feas=self.tol_feas)


@dataclass(frozen=True)
class ReferenceWindow:
    positions: np.ndarray  # (N+1, 3)
    velocities: np.ndarray  # (N+1, 3)
    yaws: np.ndarray  # (N+1,)

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        yaw = np.asarray(self.yaws, dtype=float).reshape(-1)
        if pos.ndim != 2 or pos.shape[1] != 3 or vel.shape != pos.shape or yaw.shape[0] != pos.shape[0]:
            raise ValueError("reference window arrays must share length N+1")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "yaws", yaw)

    @property
    def horizon(self) -> int:
        return self.positions.shape[0] - 1

    @classmethod
    def static(cls, position, horizon: int, yaw: float = 0.0) -> "ReferenceWindow":
        pos = np.tile(np.asarray(position, dtype=float), (horizon + 1, 1))
        return cls(pos, np.zeros_like(pos), np.full(horizon + 1, yaw))


# ---------------------------------------------------------------------------
# Prediction model


def predict(state: MpcState, inputs: Sequence, t_s: float) -> list[MpcState]:
    """Roll the double integrator forward under piecewise-constant inputs."""
    out = [state]
    p, v = state.position.copy(), state.velocity.copy()
    yaw, yaw_rate = state.yaw, state.yaw_rate
    for u in inputs:
        u = u.as_array() if isinstance(u, MpcInput) else np.asarray(u, dtype=float)
        a = u[:3]
        p = p + v * t_s + 0.5 * a * t_s * t_s
        v = v + a * t_s
        yaw = yaw + yaw_rate * t_s + 0.5 * u[3] * t_s * t_s
        yaw_rate = yaw_rate + u[3] * t_s
        out.append(MpcState(p, v, yaw, yaw_rate))
    return out


@functools.lru_cache(maxsize=32)
def prediction_matrices(horizon: int, t_s: float) -> tuple[np.ndarray, np.ndarray]:
    """``(P, V)`` with ``pos_i = p0 + i t_s v0 + P[i] @ a`` and ``vel_i = v0 + V[i] @ a``."""
    i = np.arange(horizon + 1)[:, None]
    j = np.arange(horizon)[None, :]
    lower = j < i
    P = np.where(lower, t_s * t_s * (i - j - 0.5), 0.0)
    V = np.where(lower, t_s, 0.0)
    P.setflags(write=False)
    V.setflags(write=False)
    return P, V


class Rollout:
    """Affine map from the decision vector to predicted positions and velocities.

    Columns of the (N+1, 4) outputs are x, y, z, yaw.
    """

    def __init__(self, state: MpcState, horizon: int, t_s: float):
        self.horizon = horizon
        self.t_s = t_s
        self.P, self.V = prediction_matrices(horizon, t_s)
        steps = np.arange(horizon + 1)[:, None] * t_s
        p0 = np.append(state.position, state.yaw)
        v0 = np.append(state.velocity, state.yaw_rate)
        self.free_pos = p0[None, :] + steps * v0[None, :]
        self.free_vel = np.tile(v0, (horizon + 1, 1))

    def positions(self, U: np.ndarray) -> np.ndarray:
        return self.free_pos + self.P @ U.reshape(self.horizon, 4)

    def velocities(self, U: np.ndarray) -> np.ndarray:
        return self.free_vel + self.V @ U.reshape(self.horizon, 4)

    def chain(self, dh_dp: np.ndarray, dh_dv: np.ndarray) -> np.ndarray:
        """Jacobians of per-step scalars w.r.t. U.

        ``dh_dp``/``dh_dv`` have shape ``(..., N+1, 3)`` (derivatives w.r.t. the
        translational position/velocity at each step). Returns ``(..., N+1, 4N)``.
        """
        lead = dh_dp.shape[:-1]
        out = np.zeros(lead + (self.horizon, 4))
        # out[..., i, j, c] = dh_dp[..., i, c] P[i, j] + dh_dv[..., i, c] V[i, j]
        out[..., :3] = dh_dp[..., :, None, :] * self.P[:, :, None] + dh_dv[..., :, None, :] * self.V[:, :, None]
        return out.reshape(lead + (4 * self.horizon,))


# ---------------------------------------------------------------------------
# Costs


def _as_arrays(predicted) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(predicted, tuple) and len(predicted) == 2:
        return np.asarray(predicted[0], dtype=float), np.asarray(predicted[1], dtype=float)
    pos = np.array([s.position for s in predicted])
    vel = np.array([s.velocity for s in predicted])
    return pos, vel


def _stage_weights(stage, terminal, n_plus_1: int) -> np.ndarray:
    w = np.tile(np.asarray(stage, dtype=float), (n_plus_1, 1))
    w[-1] = terminal
    return w


def tracking_cost(predicted, reference: ReferenceWindow, config: MpcConfig) -> float:
    """Weighted position error: stage weight ``w1`` for steps 0..N-1, ``ws1`` at step N."""
    pos, _ = _as_arrays(predicted)
    if pos.shape[0] != reference.positions.shape[0]:
        raise ValueError("predicted and reference lengths differ")
    err = pos[:, :3] - reference.positions
    return float(np.sum(_stage_weights(config.w1, config.ws1, err.shape[0]) * err * err))


def velocity_cost(predicted, config: MpcConfig) -> float:
    """Weighted velocity magnitude: ``w2`` for steps 0..N-1, ``ws2`` at step N."""
    _, vel = _as_arrays(predicted)
    vel = vel[:, :3]
    return float(np.sum(_stage_weights(config.w2, config.ws2, vel.shape[0]) * vel * vel))


def _weight_arrays(config: MpcConfig) -> tuple[np.ndarray, np.ndarray]:
    n1 = config.horizon + 1
    wp = _stage_weights((*config.w1, config.w_yaw), (*config.ws1, config.ws_yaw), n1)
    wv = _stage_weights((*config.w2, config.w_yaw_rate), (*config.ws2, config.ws_yaw_rate), n1)
    return wp, wv


@functools.lru_cache(maxsize=32)
def _cost_hessian(config: MpcConfig) -> np.ndarray:
    P, V = prediction_matrices(config.horizon, config.t_s)
    wp, wv = _weight_arrays(config)
    N = config.horizon
    H = np.zeros((4 * N, 4 * N))
    for c in range(4):
        Hc = 2.0 * (P.T @ (wp[:, c, None] * P) + V.T @ (wv[:, c, None] * V))
        H[c::4, c::4] = Hc
    H.setflags(write=False)
    return H


class _Objective:
    def __init__(self, rollout: Rollout, reference: ReferenceWindow, config: MpcConfig):
        self.r = rollout
        self.ref = np.column_stack([reference.positions, reference.yaws])
        self.wp, self.wv = _weight_arrays(config)

    def value(self, U: np.ndarray) -> float:
        e = self.r.positions(U) - self.ref
        v = self.r.velocities(U)
        return float(np.sum(self.wp * e * e) + np.sum(self.wv * v * v))

    def gradient(self, U: np.ndarray) -> np.ndarray:
        e = self.r.positions(U) - self.ref
        v = self.r.velocities(U)
        g = 2.0 * (self.r.P.T @ (self.wp * e) + self.r.V.T @ (self.wv * v))
        return g.reshape(-1)


# ---------------------------------------------------------------------------
# Constraints


def state_bound_constraints(rollout: Rollout, config: MpcConfig) -> list[Constraint]:
    """Box bounds on predicted states at steps 1..N as linear inequalities.

    A velocity that already lies outside its box cannot be brought back in one
    step, so each velocity bound is widened to what maximal deceleration can
    reach by step ``i``; otherwise one overshoot would make the problem
    infeasible.
    """
    rows_A, rows_b = [], []
    N = config.horizon
    P, V = rollout.P, rollout.V
    steps = np.arange(1, N + 1) * config.t_s
    # state index -> (matrix, free-term array, channel)
    spec = [(P, rollout.free_pos, c) for c in range(3)] + [(V, rollout.free_vel, c) for c in range(3)]
    spec += [(P, rollout.free_pos, 3), (V, rollout.free_vel, 3)]
    for k, (M, free, ch) in enumerate(spec):
        lo, hi = config.x_min[k], config.x_max[k]
        is_velocity = M is V
        v0 = free[0, ch]
        for bound, sign in ((hi, -1.0), (lo, 1.0)):
            if not math.isfinite(bound):
                continue
            bounds = np.full(N, bound)
            if is_velocity:
                if sign < 0:
                    bounds = np.maximum(bound, v0 + config.u_min[ch] * steps)
                else:
                    bounds = np.minimum(bound, v0 + config.u_max[ch] * steps)
            # sign * (free + M U - bound) >= 0
            A = np.zeros((N, N, 4))
            A[:, :, ch] = sign * M[1:]
            rows_A.append(A.reshape(N, 4 * N))
            rows_b.append(sign * (free[1:, ch] - bounds))
    if not rows_A:
        return []
    A = np.vstack(rows_A)
    b = np.concatenate(rows_b)
    return [Constraint(lambda U, A=A, b=b: A @ U + b, lambda U, A=A: A)]


@dataclass
class ConstraintSet:
    constraints: list[Constraint]
    rows: int
    infeasible_at_start: bool = False
    barrier_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""


def _wall_axes(geometry: TunnelGeometry) -> list[tuple[int, float, float]]:
    # (axis, wall coordinate, sign of the inward normal) for floor, ceiling, left, right
    return [(2, 0.0, 1.0), (2, geometry.height, -1.0), (1, 0.0, 1.0), (1, geometry.width, -1.0)]


def _barrier_block(rollout: Rollout, values_and_grads, params: CbfParams, n_barriers: int) -> Constraint:
    t_s = rollout.t_s
    gamma, z, lam = params.gamma, params.z_exp, params.lam

    def fun(U):
        h, _, _ = values_and_grads(U)
        return cbf.invariance_residual(h[:, :-1], h[:, 1:], t_s, params).reshape(-1)

    def jac(U):
        h, dh_dp, dh_dv = values_and_grads(U)
        Jh = rollout.chain(dh_dp, dh_dv)  # (B, N+1, 4N)
        coef_now = -1.0 / t_s + gamma * z * h[:, :-1] ** (z - 1)
        J = coef_now[..., None] * Jh[:, :-1] + Jh[:, 1:] / t_s
        return J.reshape(n_barriers * rollout.horizon, -1)

    return Constraint(fun, jac)


def assemble_constraints(
    config: MpcConfig,
    rollout: Rollout,
    reference: ReferenceWindow,
    geometry: TunnelGeometry,
    cbf_params: CbfParams,
) -> ConstraintSet:
    """Mode- and case-specific inequalities (box bounds excluded).

    HC constrains predicted positions at steps 1..N geometrically. CBF imposes
    the discrete invariance residual at steps 0..N-1 of the predicted rollout.
    """
    N = config.horizon
    if config.mode is Mode.NAIVE:
        return ConstraintSet([], 0)

    if config.mode is Mode.HC:
        if config.case is Case.BOUND_REGION:
            ref = reference.positions[1:]
            r = cbf_params.r

            def fun(U):
                rel = rollout.positions(U)[1:, :3] - ref
                return r - np.sqrt(np.sum(rel * rel, axis=1))

            def jac(U):
                rel = rollout.positions(U)[1:, :3] - ref
                dist = np.sqrt(np.sum(rel * rel, axis=1))
                n = np.where(dist[:, None] > 0, rel / np.maximum(dist, 1e-12)[:, None], 0.0)
                J = np.zeros((N, N, 4))
                J[:, :, :3] = -n[:, None, :] * rollout.P[1:, :, None]
                return J.reshape(N, 4 * N)

            return ConstraintSet([Constraint(fun, jac)], N)

        rows_A, rows_b = [], []
        for axis, coord, sign in _wall_axes(geometry):
            # sign * (p_axis - coord) - d_s >= 0
            A = np.zeros((N, N, 4))
            A[:, :, axis] = sign * rollout.P[1:]
            rows_A.append(A.reshape(N, 4 * N))
            rows_b.append(sign * (rollout.free_pos[1:, axis] - coord) - cbf_params.d_s)
        A = np.vstack(rows_A)
        b = np.concatenate(rows_b)
        return ConstraintSet([Constraint(lambda U: A @ U + b, lambda U: A)], A.shape[0])

    # CBF
    measured_pos = rollout.free_pos[0, :3]
    measured_vel = rollout.free_vel[0, :3]
    if config.case is Case.BOUND_REGION:
        ref_p = reference.positions
        ref_v = reference.velocities
        try:
            h0 = np.array([cbf.h_bounding(measured_pos - ref_p[0], measured_vel, ref_v[0], cbf_params)])
            bad = ""
        except cbf.BarrierViolation as exc:
            h0, bad = np.array([-math.inf]), str(exc)

        def vg(U):
            pos = rollout.positions(U)[:, :3]
            vel = rollout.velocities(U)[:, :3]
            h, dh_dp, dh_dv = cbf.h_bounding_ext(pos - ref_p, vel - ref_v, cbf_params)
            return h[None], dh_dp[None], dh_dv[None]

        block = _barrier_block(rollout, vg, cbf_params, 1)
        return ConstraintSet([block], N, infeasible_at_start=bool(bad), barrier_values=h0, message=bad)

    axes = _wall_axes(geometry)
    h0, bad = [], ""
    for axis, coord, sign in axes:
        d = np.zeros(3)
        d[axis] = measured_pos[axis] - coord
        try:
            h0.append(cbf.h_wall(d, measured_vel, cbf_params))
        except cbf.BarrierViolation as exc:
            h0.append(-math.inf)
            bad = str(exc)
    axis_idx = np.array([a for a, _, _ in axes])
    coords = np.array([c for _, c, _ in axes])
    selector = np.zeros((len(axes), 3))
    selector[np.arange(len(axes)), axis_idx] = 1.0

    def vg(U):
        pos = rollout.positions(U)[:, :3]
        vel = rollout.velocities(U)[:, :3]
        d = selector[:, None, :] * (pos[None, :, :] - coords[:, None, None] * selector[:, None, :])
        h, dh_dd, dh_dv = cbf.h_wall_ext(d, np.broadcast_to(vel, d.shape), cbf_params)
        # d only moves along its own axis
        return h, dh_dd * selector[:, None, :], dh_dv

    block = _barrier_block(rollout, vg, cbf_params, len(axes))
    return ConstraintSet(
        [block], len(axes) * N, infeasible_at_start=bool(bad), barrier_values=np.array(h0), message=bad
    )


# ---------------------------------------------------------------------------
# One receding-horizon step


@dataclass
class MpcDiagnostics:
    status: str
    iterations: int = 0
    objective: float = math.nan
    max_violation: float = 0.0
    fallback: bool = False
    infeasible_at_start: bool = False
    recovery: bool = False
    relaxed: bool = False
    barrier_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    solution: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""


def braking_input(state: MpcState, config: MpcConfig, a_max: float, frame_velocity=None) -> MpcInput:
    """Decelerate at ``a_max`` relative to a frame moving with ``frame_velocity``
    (the ground by default), clipped to the input box."""
    rel = state.velocity if frame_velocity is None else state.velocity - np.asarray(frame_velocity, dtype=float)
    speed = float(np.linalg.norm(rel))
    accel = -a_max * rel / speed if speed > 1e-9 else np.zeros(3)
    u = np.clip(np.append(accel, 0.0), config.u_min, config.u_max)
    return MpcInput.from_array(u)


def braking_sequence(state: MpcState, config: MpcConfig, a_max: float, frame_velocity=None) -> np.ndarray:
    """Decision vector that brakes at up to ``a_max`` (relative to the frame) until at rest, then holds."""
    frame = np.zeros(3) if frame_velocity is None else np.asarray(frame_velocity, dtype=float)
    rel = state.velocity - frame
    U = np.zeros((config.horizon, 4))
    for i in range(config.horizon):
        speed = float(np.linalg.norm(rel))
        accel = -rel / config.t_s if speed <= a_max * config.t_s else -a_max * rel / speed
        U[i, :3] = np.clip(accel, config.u_min[:3], config.u_max[:3])
        rel = rel + U[i, :3] * config.t_s
    return U.reshape(-1)


def _violation_at(problem: NlpProblem, U: np.ndarray) -> float:
    worst = 0.0
    for c in problem.inequality_constraints:
        vals = np.atleast_1d(c.fun(U))
        if vals.size:
            worst = max(worst, float(-np.min(vals)))
    return worst if math.isfinite(worst) else math.inf


def build_problem(
    state: MpcState,
    reference: ReferenceWindow,
    config: MpcConfig,
    cbf_params: CbfParams,
    geometry: TunnelGeometry,
) -> tuple[NlpProblem, ConstraintSet, Rollout]:
    if reference.horizon != config.horizon:
        raise ValueError(f"reference horizon {reference.horizon} != config horizon {config.horizon}")
    rollout = Rollout(state, config.horizon, config.t_s)
    objective = _Objective(rollout, reference, config)
    cset = assemble_constraints(config, rollout, reference, geometry, cbf_params)
    lower = np.tile(np.asarray(config.u_min, dtype=float), config.horizon)
    upper = np.tile(np.asarray(config.u_max, dtype=float), config.horizon)
    problem = NlpProblem(
        dim=config.dim,
        objective=objective.value,
        gradient=objective.gradient,
        inequality_constraints=state_bound_constraints(rollout, config) + cset.constraints,
        lower=lower,
        upper=upper,
        hessian0=_cost_hessian(config),
    )
    return problem, cset, rollout


def solve_step(
    state: MpcState,
    reference: ReferenceWindow,
    config: MpcConfig,
    cbf_params: CbfParams,
    geometry: TunnelGeometry,
    warm_start: np.ndarray | None = None,
) -> tuple[MpcInput, MpcDiagnostics]:
    """Solve the finite-horizon problem and return its first input.

    If the solver ends infeasible from a state inside the safe set, the maximal
    braking input is returned instead and the diagnostics carry
    ``fallback=True``. If the barrier is already violated at the measured state,
    braking cannot restore it; the least-violation input found by the elastic
    solver is applied and the diagnostics carry ``recovery=True``.
    """
    problem, cset, _ = build_problem(state, reference, config, cbf_params, geometry)
    # in the moving safe region the barrier sees velocity relative to its center
    frame = reference.velocities[0] if config.case is Case.BOUND_REGION else None
    x0 = np.zeros(config.dim) if warm_start is None else np.asarray(warm_start, dtype=float)
    if problem.inequality_constraints and not cset.infeasible_at_start:
        # a start that runs into a wall linearises badly; braking usually stays clear
        brake = braking_sequence(state, config, cbf_params.a_max, frame)
        if _violation_at(problem, x0) > config.tol_feas and _violation_at(problem, brake) < _violation_at(problem, x0):
            x0 = brake
    sol = solve(problem, x0, config.solver_options())
    diag = MpcDiagnostics(
        status=sol.status.value,
        iterations=sol.iterations,
        objective=sol.objective_value,
        max_violation=sol.max_constraint_violation,
        infeasible_at_start=cset.infeasible_at_start,
        relaxed=sol.relaxed,
        barrier_values=cset.barrier_values,
        solution=sol.x_opt,
        message=sol.message if not cset.message else f"{cset.message}; {sol.message}",
    )
    if sol.status is SolveStatus.INFEASIBLE:
        if cset.infeasible_at_start and np.all(np.isfinite(sol.x_opt)):
            diag.recovery = True
            return MpcInput.from_array(sol.x_opt[:4]), diag
        diag.fallback = True
        return braking_input(state, config, cbf_params.a_max, frame), diag
    return MpcInput.from_array(sol.x_opt[:4]), diag


def shift_warm_start(solution: np.ndarray, horizon: int) -> np.ndarray:
    U = np.asarray(solution, dtype=float).reshape(horizon, 4)
    return np.vstack([U[1:], U[-1:]]).reshape(-1)


class MpcController:
    """Stateful wrapper that carries the shifted warm start between steps."""

    def __init__(self, config: MpcConfig, cbf_params: CbfParams, geometry: TunnelGeometry):
        self.config = config
        self.cbf_params = cbf_params
        self.geometry = geometry
        self._warm: np.ndarray | None = None

    def reset(self) -> None:
        self._warm = None

    def step(self, state: MpcState, reference: ReferenceWindow) -> tuple[MpcInput, MpcDiagnostics]:
        u, diag = solve_step(state, reference, self.config, self.cbf_params, self.geometry, self._warm)
        if diag.solution.size == self.config.dim:
            self._warm = shift_warm_start(diag.solution, self.config.horizon)
        else:
            self._warm = None
        return u, diag
