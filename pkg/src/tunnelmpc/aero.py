"""Near-surface aerodynamic disturbances inside a rectangular tunnel.

Tunnel frame: x runs along the tunnel axis (open ends), the sidewalls sit at
``y = 0`` (left) and ``y = width`` (right), the floor at ``z = 0`` and the
ceiling at ``z = height``.

Ground and ceiling effects are thrust-ratio models turned into a net vertical
force against the nominal hover thrust. The sidewall effect is a random pull
toward the wall whose statistics come from bench measurements; the lateral
distance law is a linear ramp to zero at ``cutoff_mult`` propeller diameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import UavParams, UavState, Wrench
from .exceptions import AeroSingularityError

WALLS = ("floor", "ceiling", "left", "right")


@dataclass(frozen=True)
class CeilingCoeffs:
    a1: float = 2.0
    a2: float = 0.04

    def __post_init__(self) -> None:
        if not self.a1 > 0:
            raise ValueError("a1 must be positive")
        if self.a2 < 0:
            raise ValueError("a2 must be non-negative")


@dataclass(frozen=True)
class SidewallParams:
    mean_xy: float = 0.052
    std_xy: float = 0.022
    mean_z: float = 0.062
    std_z: float = 0.065
    cutoff_mult: float = 2.0

    def __post_init__(self) -> None:
        if min(self.std_xy, self.std_z) < 0:
            raise ValueError("standard deviations must be non-negative")
        if min(self.mean_xy, self.mean_z) < 0:
            raise ValueError("force magnitudes must be non-negative")
        if not self.cutoff_mult > 0:
            raise ValueError("cutoff_mult must be positive")

    def cutoff(self, prop_radius: float) -> float:
        return self.cutoff_mult * 2.0 * prop_radius


@dataclass(frozen=True)
class TunnelGeometry:
    width: float = 2.0
    height: float = 2.0
    length: float = 20.0

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0 and self.length > 0):
            raise ValueError("tunnel dimensions must be positive")

    def wall_distances(self, position) -> np.ndarray:
        """Distances to (floor, ceiling, left, right)."""
        y, z = float(position[1]), float(position[2])
        return np.array([z, self.height - z, y, self.width - y])

    def wall_vectors(self, position) -> np.ndarray:
        """Perpendicular wall-to-point vectors, one row per wall in ``WALLS`` order."""
        y, z = float(position[1]), float(position[2])
        return np.array(
            [
                [0.0, 0.0, z],
                [0.0, 0.0, z - self.height],
                [0.0, y, 0.0],
                [0.0, y - self.width, 0.0],
            ]
        )

    def center(self, x: float | None = None) -> np.ndarray:
        return np.array([self.length / 2 if x is None else x, self.width / 2, self.height / 2])


# Inward-pointing unit normals in WALLS order.
WALL_NORMALS = np.array(
    [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]]
)


@dataclass(frozen=True)
class AeroConfig:
    """Switches and coefficients for the composite tunnel disturbance."""

    ground: bool = True
    ceiling: bool = True
    sidewall: bool = True
    ceiling_coeffs: CeilingCoeffs = CeilingCoeffs()
    sidewall_params: SidewallParams = SidewallParams()
    corner_gain: float = 1.0
    torque_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.corner_gain < 0:
            raise ValueError("corner_gain must be non-negative")
        if self.torque_gain < 0:
            raise ValueError("torque_gain must be non-negative")


def ground_effect_ratio(z: float, prop_radius: float) -> float:
    """Thrust ratio ``T_GE / T_inf = 1 / (1 - (R / 4z)^2)`` at height ``z``."""
    if z <= prop_radius / 4.0:
        raise AeroSingularityError(
            f"inside ground-effect singularity: z={z:.6g} <= R/4={prop_radius / 4:.6g}"
        )
    return 1.0 / (1.0 - (prop_radius / (4.0 * z)) ** 2)


def ceiling_effect_ratio(dz: float, prop_radius: float, coeffs: CeilingCoeffs) -> float:
    """Thrust ratio ``1 / (1 - (1/a1) (R / (a2 + dz))^2)`` at distance ``dz`` below the ceiling."""
    gap = coeffs.a2 + dz
    denom = 1.0 - (prop_radius / gap) ** 2 / coeffs.a1 if gap > 0 else -1.0
    if denom <= 0.0:
        raise AeroSingularityError(f"inside ceiling-effect singularity: dz={dz:.6g}")
    return 1.0 / denom


def ceiling_singular_distance(prop_radius: float, coeffs: CeilingCoeffs) -> float:
    return prop_radius / math.sqrt(coeffs.a1) - coeffs.a2


def _proximity(wall_distance: float, params: SidewallParams, prop_radius: float) -> float:
    cutoff = params.cutoff(prop_radius)
    if wall_distance >= cutoff:
        return 0.0
    return 1.0 - max(wall_distance, 0.0) / cutoff


def sidewall_force(
    wall_distance: float,
    wall_normal,
    params: SidewallParams,
    prop_radius: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Random pull toward a vertical wall.

    ``wall_normal`` points from the wall into the tunnel. No random numbers are
    drawn beyond the cutoff distance.
    """
    if wall_distance < 0:
        raise ValueError("wall_distance must be non-negative")
    ramp = _proximity(wall_distance, params, prop_radius)
    if ramp == 0.0:
        return np.zeros(3)
    normal = np.asarray(wall_normal, dtype=float)
    pull = min(max(rng.normal(params.mean_xy, params.std_xy), 0.0), params.mean_xy + 3.0 * params.std_xy)
    z_cap = params.mean_z + 3.0 * params.std_z
    vertical = min(max(rng.normal(0.0, params.std_z), -z_cap), z_cap)
    force = -pull * normal
    force[2] += vertical
    return ramp * force


def sidewall_mean_force(wall_distance: float, wall_normal, params: SidewallParams, prop_radius: float) -> np.ndarray:
    """Expected value of :func:`sidewall_force` (clamping bias ignored)."""
    ramp = _proximity(wall_distance, params, prop_radius)
    return -ramp * params.mean_xy * np.asarray(wall_normal, dtype=float)


def _vertical_force(z: float, dz: float, params: UavParams, cfg: AeroConfig, hover_thrust: float) -> float:
    fz = 0.0
    if cfg.ground:
        fz += hover_thrust * (ground_effect_ratio(z, params.prop_radius) - 1.0)
    if cfg.ceiling:
        fz += hover_thrust * (ceiling_effect_ratio(dz, params.prop_radius, cfg.ceiling_coeffs) - 1.0)
    return fz


def _check_inside(position, geometry: TunnelGeometry) -> np.ndarray:
    d = geometry.wall_distances(position)
    if np.any(d <= 0.0):
        raise AeroSingularityError(f"position {np.asarray(position)} is outside the tunnel cross-section")
    return d


def _in_corner(d: np.ndarray, cutoff: float) -> bool:
    return min(d[0], d[1]) < cutoff and min(d[2], d[3]) < cutoff


def tunnel_disturbance(
    state: UavState,
    geometry: TunnelGeometry,
    params: UavParams,
    cfg: AeroConfig,
    hover_thrust: float,
    rng: np.random.Generator,
) -> Wrench:
    """Superposed ground, ceiling and sidewall disturbance acting on the vehicle.

    Raises :class:`AeroSingularityError` when either thrust-ratio model is
    singular or the vehicle is outside the cross-section.
    """
    d = _check_inside(state.position, geometry)
    force = np.zeros(3)
    force[2] = _vertical_force(d[0], d[1], params, cfg, hover_thrust)

    sw = cfg.sidewall_params
    torque_std = 0.0
    if cfg.sidewall:
        for idx in (2, 3):
            ramp = _proximity(d[idx], sw, params.prop_radius)
            if ramp > 0.0:
                force += sidewall_force(d[idx], WALL_NORMALS[idx], sw, params.prop_radius, rng)
                torque_std += ramp * math.hypot(sw.std_xy, sw.std_z)

    if cfg.corner_gain != 1.0 and _in_corner(d, sw.cutoff(params.prop_radius)):
        force *= cfg.corner_gain

    torque = np.zeros(3)
    if torque_std > 0.0 and cfg.torque_gain > 0.0:
        torque = rng.normal(0.0, cfg.torque_gain * torque_std * params.arm_length, size=3)
    return Wrench(force, torque)


def tunnel_mean_force(position, geometry: TunnelGeometry, params: UavParams, cfg: AeroConfig, hover_thrust: float) -> np.ndarray:
    """Deterministic part of :func:`tunnel_disturbance` (sidewall pull at its mean)."""
    d = _check_inside(position, geometry)
    force = np.zeros(3)
    force[2] = _vertical_force(d[0], d[1], params, cfg, hover_thrust)
    if cfg.sidewall:
        for idx in (2, 3):
            force += sidewall_mean_force(d[idx], WALL_NORMALS[idx], cfg.sidewall_params, params.prop_radius)
    if cfg.corner_gain != 1.0 and _in_corner(d, cfg.sidewall_params.cutoff(params.prop_radius)):
        force *= cfg.corner_gain
    return force


def wind_disturbance(d_m: float, rng: np.random.Generator) -> np.ndarray:
    """One gust: uniform direction on the sphere, magnitude uniform on ``[0, d_m]``."""
    if d_m < 0:
        raise ValueError("d_m must be non-negative")
    if d_m == 0:
        return np.zeros(3)
    direction = rng.normal(size=3)
    norm = np.linalg.norm(direction)
    while norm < 1e-12:
        direction = rng.normal(size=3)
        norm = np.linalg.norm(direction)
    return direction / norm * rng.uniform(0.0, d_m)


class WindProcess:
    """Piecewise-constant gusts, redrawn every ``hold_time`` seconds."""

    def __init__(self, d_m: float, rng: np.random.Generator, hold_time: float = 1.0):
        if not hold_time > 0:
            raise ValueError("hold_time must be positive")
        self.d_m = d_m
        self.hold_time = hold_time
        self._rng = rng
        self._index = -1
        self._value = np.zeros(3)

    def __call__(self, t: float) -> np.ndarray:
        index = int(math.floor(t / self.hold_time + 1e-9))
        while self._index < index:
            self._value = wind_disturbance(self.d_m, self._rng)
            self._index += 1
        return self._value


def effect_field(
    geometry: TunnelGeometry,
    params: UavParams,
    cfg: AeroConfig,
    ny: int = 41,
    nz: int = 41,
) -> list[tuple[float, float, float, float, float]]:
    """Mean disturbance force over a cross-section grid as ``(y, z, fx, fy, fz)`` rows.

    Grid points at or inside a singular distance report NaN forces.
    """
    rows = []
    hover = params.hover_thrust
    for y in np.linspace(0.0, geometry.width, ny):
        for z in np.linspace(0.0, geometry.height, nz):
            try:
                f = tunnel_mean_force((geometry.length / 2, y, z), geometry, params, cfg, hover)
            except AeroSingularityError:
                f = np.full(3, np.nan)
            rows.append((float(y), float(z), float(f[0]), float(f[1]), float(f[2])))
    return rows
