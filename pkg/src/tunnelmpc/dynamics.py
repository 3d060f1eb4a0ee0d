"""Rigid-body quadrotor plant and the inner-loop PID attitude/thrust controller.

The plant follows the usual Newton-Euler split: translational motion in the
inertial frame (z up, gravity along -z) and rotational motion in the body
frame. Attitude is carried as ZYX Euler angles (roll, pitch, yaw); the tilt
limit keeps the vehicle far away from gimbal lock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

GRAVITY = 9.81

Vec = NDArray[np.float64]


def _vec3(value, name: str) -> Vec:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class UavParams:
    """Vehicle constants. Defaults describe a 1.5 kg quadrotor with 0.24 m props."""

    mass: float = 1.5
    inertia_diag: tuple[float, float, float] = (0.1, 0.1, 0.2)
    arm_length: float = 0.20
    prop_radius: float = 0.12
    max_tilt: float = math.pi / 10
    gravity: float = GRAVITY
    thrust_to_weight: float = 2.0

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if len(self.inertia_diag) != 3 or not all(i > 0 for i in self.inertia_diag):
            raise ValueError("inertia_diag must hold three positive values")
        if not self.prop_radius > 0:
            raise ValueError("prop_radius must be positive")
        if not 0 < self.max_tilt < math.pi / 2:
            raise ValueError("max_tilt must lie in (0, pi/2)")
        if not self.arm_length > 0:
            raise ValueError("arm_length must be positive")
        if not self.gravity > 0:
            raise ValueError("gravity must be positive")
        if not self.thrust_to_weight > 1:
            raise ValueError("thrust_to_weight must exceed 1")

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity

    @property
    def thrust_max(self) -> float:
        return self.thrust_to_weight * self.mass * self.gravity

    @property
    def inertia(self) -> Vec:
        return np.asarray(self.inertia_diag, dtype=float)


@dataclass(frozen=True)
class UavState:
    position: Vec = field(default_factory=lambda: np.zeros(3))
    velocity: Vec = field(default_factory=lambda: np.zeros(3))
    attitude: Vec = field(default_factory=lambda: np.zeros(3))
    body_rates: Vec = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for name in ("position", "velocity", "attitude", "body_rates"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))

    def as_vector(self) -> Vec:
        return np.concatenate([self.position, self.velocity, self.attitude, self.body_rates])

    @classmethod
    def from_vector(cls, x: Vec) -> "UavState":
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy(), x[9:12].copy())


@dataclass(frozen=True)
class Wrench:
    """External force (inertial frame, N) and torque (body frame, N·m)."""

    force: Vec = field(default_factory=lambda: np.zeros(3))
    torque: Vec = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        object.__setattr__(self, "force", _vec3(self.force, "force"))
        object.__setattr__(self, "torque", _vec3(self.torque, "torque"))
        if not (np.all(np.isfinite(self.force)) and np.all(np.isfinite(self.torque))):
            raise ValueError("wrench components must be finite")

    @classmethod
    def zero(cls) -> "Wrench":
        return cls()

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.torque + other.torque)


@dataclass(frozen=True)
class PidGains:
    """Per-axis attitude gains (roll, pitch, yaw) and vertical-velocity thrust gains.

    Attitude torques are ``kp*e + ki*∫e + kd*(rate_d - rate)`` in N·m with no
    inertia scaling. The thrust loop corrects the feed-forward thrust with a PID
    on the vertical-velocity error, in units of acceleration (scaled by mass).
    """

    kp: tuple[float, float, float] = (60.0, 60.0, 30.0)
    ki: tuple[float, float, float] = (0.5, 0.5, 0.2)
    kd: tuple[float, float, float] = (4.8, 4.8, 4.0)
    kp_t: float = 4.0
    ki_t: float = 1.0
    kd_t: float = 0.0
    integrator_limit: float = 0.5

    def __post_init__(self) -> None:
        for name in ("kp", "ki", "kd"):
            gains = getattr(self, name)
            if len(gains) != 3 or any(g < 0 for g in gains):
                raise ValueError(f"{name} must be three non-negative gains")
        if min(self.kp_t, self.ki_t, self.kd_t) < 0:
            raise ValueError("thrust gains must be non-negative")
        if not self.integrator_limit > 0:
            raise ValueError("integrator_limit must be positive")


@dataclass(frozen=True)
class PidState:
    """Controller memory threaded explicitly through :func:`inner_loop_step`."""

    att_integral: Vec = field(default_factory=lambda: np.zeros(3))
    vz_integral: float = 0.0
    vz_error_prev: float = 0.0
    vz_ref: float = 0.0
    yaw_ref: float = 0.0
    yaw_rate_ref: float = 0.0

    def synced(self, state: UavState) -> "PidState":
        """Re-anchor the integrated references on the measured state.

        Called whenever a new outer-loop command arrives so that the inner loop
        tracks the command relative to where the vehicle actually is.
        """
        return replace(
            self,
            vz_ref=float(state.velocity[2]),
            vz_error_prev=0.0,
            yaw_ref=float(state.attitude[2]),
            yaw_rate_ref=float(euler_rates(state.attitude, state.body_rates)[2]),
        )


def rotation_matrix(attitude) -> Vec:
    """Body-to-inertial rotation for ZYX (yaw-pitch-roll) Euler angles."""
    phi, theta, psi = (float(a) for a in attitude)
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
            [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
            [-st, ct * sf, ct * cf],
        ]
    )


def euler_rates(attitude, body_rates) -> Vec:
    """Map body rates to ZYX Euler-angle rates."""
    phi, theta = float(attitude[0]), float(attitude[1])
    p, q, r = (float(w) for w in body_rates)
    cf, sf = math.cos(phi), math.sin(phi)
    ct, tt = math.cos(theta), math.tan(theta)
    return np.array(
        [
            p + sf * tt * q + cf * tt * r,
            cf * q - sf * r,
            (sf * q + cf * r) / ct,
        ]
    )


def _derivative(x: Vec, thrust: float, torque: Vec, force_ext: Vec, params: UavParams, inertia: Vec) -> Vec:
    phi, theta, psi = x[6], x[7], x[8]
    p, q, r = x[9], x[10], x[11]
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    # third column of the rotation matrix: body z axis in the inertial frame
    bz = (cp * st * cf + sp * sf, sp * st * cf - cp * sf, ct * cf)
    a = thrust / params.mass
    m = params.mass
    ix, iy, iz = inertia
    tt = st / ct
    return np.array(
        [
            x[3],
            x[4],
            x[5],
            a * bz[0] + force_ext[0] / m,
            a * bz[1] + force_ext[1] / m,
            a * bz[2] - params.gravity + force_ext[2] / m,
            p + sf * tt * q + cf * tt * r,
            cf * q - sf * r,
            (sf * q + cf * r) / ct,
            (torque[0] - (iz - iy) * q * r) / ix,
            (torque[1] - (ix - iz) * r * p) / iy,
            (torque[2] - (iy - ix) * p * q) / iz,
        ]
    )


def step_plant(
    state: UavState,
    thrust: float,
    torque,
    disturbance: Wrench,
    params: UavParams,
    dt: float,
) -> UavState:
    """Advance the full plant by ``dt`` with one classical RK4 step.

    Inputs and the disturbance wrench are held constant over the step.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if thrust < 0:
        raise ValueError("thrust must be non-negative")
    tau = np.asarray(torque, dtype=float) + disturbance.torque
    force = disturbance.force
    inertia = params.inertia
    x = state.as_vector()
    k1 = _derivative(x, thrust, tau, force, params, inertia)
    k2 = _derivative(x + 0.5 * dt * k1, thrust, tau, force, params, inertia)
    k3 = _derivative(x + 0.5 * dt * k2, thrust, tau, force, params, inertia)
    k4 = _derivative(x + dt * k3, thrust, tau, force, params, inertia)
    return UavState.from_vector(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def accel_to_attitude_thrust(accel_cmd, yaw: float, params: UavParams) -> tuple[float, float, float]:
    """Invert the decoupled tilt-to-acceleration map.

    Horizontal commands are rotated into the yaw-aligned frame, where a pitch
    ``theta`` yields ``g*tan(theta)`` forward and a roll ``phi`` yields
    ``-g*tan(phi)`` sideways. Returns ``(roll_d, pitch_d, thrust_d)`` with the
    angles clamped to the tilt limit and thrust to ``[0, thrust_max]``.
    """
    ax, ay, az = (float(a) for a in accel_cmd)
    g = params.gravity
    c, s = math.cos(yaw), math.sin(yaw)
    a_fwd = c * ax + s * ay
    a_left = -s * ax + c * ay
    lim = params.max_tilt
    pitch_d = min(max(math.atan(a_fwd / g), -lim), lim)
    roll_d = min(max(math.atan(-a_left / g), -lim), lim)
    thrust_d = min(max(params.mass * (az + g), 0.0), params.thrust_max)
    return roll_d, pitch_d, thrust_d


def attitude_thrust_to_accel(roll: float, pitch: float, thrust: float, yaw: float, params: UavParams) -> Vec:
    """Forward counterpart of :func:`accel_to_attitude_thrust`."""
    g = params.gravity
    a_fwd = g * math.tan(pitch)
    a_left = -g * math.tan(roll)
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * a_fwd - s * a_left, s * a_fwd + c * a_left, thrust / params.mass - g])


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def inner_loop_step(
    state: UavState,
    u_cmd,
    gains: PidGains,
    params: UavParams,
    dt: float,
    pid: PidState | None = None,
) -> tuple[float, Vec, PidState]:
    """One tick of the cascaded attitude/thrust PID.

    ``u_cmd`` is the outer-loop input ``(ax, ay, az, yaw_accel)``. Returns the
    collective thrust, the body torque and the updated controller memory.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    pid = pid if pid is not None else PidState().synced(state)
    u = np.asarray(u_cmd, dtype=float)

    yaw_rate_ref = pid.yaw_rate_ref + u[3] * dt
    yaw_ref = _wrap(pid.yaw_ref + yaw_rate_ref * dt)
    roll_d, pitch_d, thrust_d = accel_to_attitude_thrust(u[:3], yaw_ref, params)

    err = np.array(
        [
            roll_d - state.attitude[0],
            pitch_d - state.attitude[1],
            _wrap(yaw_ref - state.attitude[2]),
        ]
    )
    lim = gains.integrator_limit
    integral = np.clip(pid.att_integral + err * dt, -lim, lim)
    rate_ref = np.array([0.0, 0.0, yaw_rate_ref])
    torque = (
        np.asarray(gains.kp) * err
        + np.asarray(gains.ki) * integral
        + np.asarray(gains.kd) * (rate_ref - state.body_rates)
    )

    vz_ref = pid.vz_ref + u[2] * dt
    vz_err = vz_ref - state.velocity[2]
    vz_integral = float(np.clip(pid.vz_integral + vz_err * dt, -lim, lim))
    correction = gains.kp_t * vz_err + gains.ki_t * vz_integral + gains.kd_t * (vz_err - pid.vz_error_prev) / dt
    tilt = math.cos(state.attitude[0]) * math.cos(state.attitude[1])
    thrust = (thrust_d + params.mass * correction) / max(tilt, 0.5)
    thrust = min(max(thrust, 0.0), params.thrust_max)

    new_pid = PidState(
        att_integral=integral,
        vz_integral=vz_integral,
        vz_error_prev=float(vz_err),
        vz_ref=float(vz_ref),
        yaw_ref=yaw_ref,
        yaw_rate_ref=float(yaw_rate_ref),
    )
    return thrust, torque, new_pid


def mechanical_energy(state: UavState, params: UavParams) -> float:
    v = state.velocity
    w = state.body_rates
    kinetic = 0.5 * params.mass * float(v @ v) + 0.5 * float(w @ (params.inertia * w))
    return kinetic + params.mass * params.gravity * float(state.position[2])
