"""Braking-distance control barrier functions and their discrete invariance test.

All three barriers share one shape: ``sqrt(2 a_max * clearance) + closing-speed
term``. A barrier is positive while the vehicle can still brake to rest before
the boundary of its safe set, and zero on that boundary.

The ``*_grad`` helpers return ``(dh/dp, dh/dv)`` and accept stacked inputs of
shape ``(..., 3)``; the MPC uses them to build constraint Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import BarrierViolation

_EPS = 1e-12


@dataclass(frozen=True)
class CbfParams:
    a_max: float = 3.0
    gamma: float = 3.0
    z_exp: int = 3
    lam: float = 8.0
    d_s: float = 0.24
    r: float = 0.5

    def __post_init__(self) -> None:
        if not self.a_max > 0:
            raise ValueError("a_max must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if int(self.z_exp) != self.z_exp or self.z_exp < 1 or self.z_exp % 2 != 1:
            raise ValueError("z_exp must be an odd positive integer")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.d_s < 0:
            raise ValueError("d_s must be non-negative")
        if not self.r > 0:
            raise ValueError("r must be positive")


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def h_point_obstacle(p_rel, vel, params: CbfParams) -> float:
    """Barrier keeping the vehicle outside a ball of radius ``d_s`` around an obstacle.

    ``p_rel`` points from the obstacle to the vehicle.
    """
    p = np.asarray(p_rel, dtype=float)
    v = np.asarray(vel, dtype=float)
    dist = float(np.linalg.norm(p))
    if dist <= params.d_s:
        raise BarrierViolation(f"distance {dist:.6g} within standoff d_s={params.d_s}")
    return float(np.sqrt(2.0 * params.a_max * (dist - params.d_s)) + p @ v / dist)


def h_wall(d, vel, params: CbfParams) -> float:
    """Barrier keeping the vehicle at least ``d_s`` from a plane.

    ``d`` is the perpendicular vector from the wall to the vehicle.
    """
    d = np.asarray(d, dtype=float)
    dist = float(np.linalg.norm(d))
    if dist <= params.d_s:
        raise BarrierViolation(f"wall distance {dist:.6g} within standoff d_s={params.d_s}")
    return float(np.sqrt(2.0 * params.a_max * (dist - params.d_s)) + d @ np.asarray(vel, dtype=float) / dist)


def h_bounding(p_rel, vel, vel_target, params: CbfParams) -> float:
    """Barrier keeping the vehicle inside a sphere of radius ``r`` around a moving center.

    ``p_rel`` points from the sphere center to the vehicle and ``vel_target`` is
    the center's velocity. At the exact center the radial term is taken as 0.
    """
    p = np.asarray(p_rel, dtype=float)
    dv = np.asarray(vel, dtype=float) - np.asarray(vel_target, dtype=float)
    dist = float(np.linalg.norm(p))
    if dist >= params.r:
        raise BarrierViolation(f"distance {dist:.6g} outside safe region r={params.r}")
    radial = float(p @ dv / dist) if dist > 0.0 else 0.0
    return float(np.sqrt(2.0 * params.a_max * (params.r - dist)) - radial)


def invariance_residual(h_now, h_next, dt: float, params: CbfParams):
    """Forward-difference form of ``dh/dt + gamma (h^z - lambda) >= 0``.

    Works elementwise on arrays; the constraint holds where the result is >= 0.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return (h_next - h_now) / dt + params.gamma * (h_now ** params.z_exp - params.lam)


def expanded_invariance_point(p_rel, vel, u, params: CbfParams) -> float:
    """Continuous-time invariance condition for the point barrier, multiplied through by ``|p|``.

    Analytic cross-check for :func:`invariance_residual`; its sign matches
    ``dh/dt + gamma h^z`` for a double integrator driven by ``u``.
    """
    p = np.asarray(p_rel, dtype=float)
    v = np.asarray(vel, dtype=float)
    u = np.asarray(u, dtype=float)
    dist = float(np.linalg.norm(p))
    if dist <= params.d_s:
        raise BarrierViolation(f"distance {dist:.6g} within standoff d_s={params.d_s}")
    root = np.sqrt(2.0 * params.a_max * (dist - params.d_s))
    h = root + p @ v / dist
    return float(
        params.a_max * (v @ p) / root
        - (p @ v / dist) ** 2
        + v @ v
        + p @ u
        + params.gamma * h ** params.z_exp * dist
    )


# ---------------------------------------------------------------------------
# Vectorised forms with a smooth continuation past the boundary.
#
# The optimizer probes trial rollouts that may leave the safe set. There the
# square-root clearance term is replaced by its tangent line at ``clear_eps``
# so values and gradients stay finite and keep pointing back into the set.


def _root_and_slope(clearance: np.ndarray, a_max: float, clear_eps: float) -> tuple[np.ndarray, np.ndarray]:
    safe = np.maximum(clearance, clear_eps)
    root = np.sqrt(2.0 * a_max * safe)
    slope = a_max / root
    root = np.where(clearance >= clear_eps, root, root + slope * (clearance - clear_eps))
    return root, slope


def h_wall_ext(d: np.ndarray, vel: np.ndarray, params: CbfParams, clear_eps: float = 1e-4):
    """Stacked wall barrier values and gradients ``(h, dh/dd, dh/dv)``."""
    dist = np.maximum(_norm(d), _EPS)
    n = d / dist[..., None]
    root, slope = _root_and_slope(dist - params.d_s, params.a_max, clear_eps)
    radial = np.sum(n * vel, axis=-1)
    h = root + radial
    # d/dd of n.v = (v - (n.v) n) / |d|
    dh_dd = slope[..., None] * n + (vel - radial[..., None] * n) / dist[..., None]
    return h, dh_dd, n


def h_point_ext(p_rel: np.ndarray, vel: np.ndarray, params: CbfParams, clear_eps: float = 1e-4):
    return h_wall_ext(p_rel, vel, params, clear_eps)


def h_bounding_ext(p_rel: np.ndarray, rel_vel: np.ndarray, params: CbfParams, clear_eps: float = 1e-4):
    """Stacked bounding barrier values and gradients ``(h, dh/dp, dh/dv)``.

    ``rel_vel`` is the vehicle velocity minus the center velocity.
    """
    dist = _norm(p_rel)
    safe_dist = np.maximum(dist, _EPS)
    n = np.where((dist > 0.0)[..., None], p_rel / safe_dist[..., None], 0.0)
    root, slope = _root_and_slope(params.r - dist, params.a_max, clear_eps)
    radial = np.sum(n * rel_vel, axis=-1)
    h = root - radial
    dh_dp = -slope[..., None] * n - np.where(
        (dist > 0.0)[..., None], (rel_vel - radial[..., None] * n) / safe_dist[..., None], 0.0
    )
    return h, dh_dp, -n


def h_point_obstacle_grad(p_rel, vel, params: CbfParams) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p_rel, dtype=float)
    if np.any(_norm(p) <= params.d_s):
        raise BarrierViolation("gradient requested inside standoff")
    _, dh_dp, dh_dv = h_point_ext(p, np.asarray(vel, dtype=float), params)
    return dh_dp, dh_dv


def h_wall_grad(d, vel, params: CbfParams) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(d, dtype=float)
    if np.any(_norm(d) <= params.d_s):
        raise BarrierViolation("gradient requested inside standoff")
    _, dh_dd, dh_dv = h_wall_ext(d, np.asarray(vel, dtype=float), params)
    return dh_dd, dh_dv


def h_bounding_grad(p_rel, vel, vel_target, params: CbfParams) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p_rel, dtype=float)
    if np.any(_norm(p) >= params.r):
        raise BarrierViolation("gradient requested outside safe region")
    rel = np.asarray(vel, dtype=float) - np.asarray(vel_target, dtype=float)
    _, dh_dp, dh_dv = h_bounding_ext(p, rel, params)
    return dh_dp, dh_dv


# ---------------------------------------------------------------------------
# Double-integrator invariance harness


@dataclass(frozen=True)
class HarnessResult:
    lam: float
    d_m: float
    min_h: np.ndarray  # per-episode minimum barrier value
    violations: int  # episodes in which h dropped below zero

    @property
    def min_h_overall(self) -> float:
        return float(np.min(self.min_h))


def _wall_h(dist: np.ndarray, vel: np.ndarray, params: CbfParams) -> np.ndarray:
    # signed square root past the standoff keeps violated states finite and negative
    clear = dist - params.d_s
    return np.sign(clear) * np.sqrt(2.0 * params.a_max * np.abs(clear)) + vel


def _min_admissible_accel(dist, vel, target, dt, params: CbfParams) -> np.ndarray:
    """Smallest acceleration whose nominal next-step barrier value reaches ``target``.

    For a wall at distance ``dist`` approached along one axis the next barrier
    value ``sqrt(2a (c0 + u dt^2/2)) + v + u dt`` is increasing in ``u``, so the
    threshold follows from a quadratic in the square-root term.
    """
    a = params.a_max
    c0 = dist + vel * dt - params.d_s
    k = 2.0 * c0 / dt + target - vel
    q = 0.5 * a * dt * (np.sqrt(np.maximum(1.0 + 4.0 * k / (a * dt), 0.0)) - 1.0)
    u_root = (q * q / (2.0 * a) - c0) * 2.0 / dt**2
    u_domain = -2.0 * c0 / dt**2
    return np.where(k >= 0.0, u_root, u_domain)


def invariance_harness(
    params: CbfParams,
    d_m: float,
    episodes: int = 10_000,
    steps: int = 200,
    dt: float = 0.1,
    seed: int = 0,
    gust_hold: int = 10,
) -> HarnessResult:
    """Stress the wall barrier on a one-axis double integrator.

    Each episode starts well clear of a wall and is driven by a random,
    wall-seeking nominal controller. Every step the nominal input is raised to
    the smallest value (within ``[-a_max, a_max]``) that keeps the forward
    invariance residual non-negative for the undisturbed prediction, or to
    ``a_max`` when no admissible input exists. The true state then evolves with
    an additive acceleration disturbance in ``[-d_m, d_m]`` held for
    ``gust_hold`` steps. Randomness depends only on ``seed``, so runs with
    different ``lam`` see identical episodes.
    """
    rng = np.random.default_rng(seed)
    a = params.a_max
    dist = params.d_s + rng.uniform(0.5, 2.0, episodes)
    vel = rng.uniform(-0.5, 0.5, episodes)
    aggression = rng.uniform(0.2, 1.0, episodes)
    u_noise = rng.uniform(-0.5, 0.5, (steps, episodes)) * a
    gusts = rng.uniform(-d_m, d_m, (steps // gust_hold + 1, episodes))

    h = _wall_h(dist, vel, params)
    min_h = h.copy()
    for k in range(steps):
        target = h - dt * params.gamma * (h**params.z_exp - params.lam)
        u_des = -aggression * a + u_noise[k]
        u_min = _min_admissible_accel(dist, vel, target, dt, params)
        u = np.clip(np.maximum(u_des, u_min), -a, a)
        acc = u + gusts[k // gust_hold]
        dist = dist + vel * dt + 0.5 * acc * dt * dt
        vel = vel + acc * dt
        h = _wall_h(dist, vel, params)
        np.minimum(min_h, h, out=min_h)
    violations = int(np.count_nonzero(min_h < 0.0))
    return HarnessResult(lam=params.lam, d_m=d_m, min_h=min_h, violations=violations)


def calibrate_lambda(
    params: CbfParams,
    d_m: float,
    episodes: int = 10_000,
    steps: int = 200,
    dt: float = 0.1,
    seed: int = 0,
    lam_max: float = 8.0,
    tol: float = 0.01,
) -> tuple[float, list[tuple[float, int]]]:
    """Smallest violation-free ``lambda`` on the harness, by bisection.

    Returns the calibrated value (rounded up to ``tol``) and the search trace
    as ``(lambda, violations)`` pairs.
    """
    trace: list[tuple[float, int]] = []

    def violations(lam: float) -> int:
        res = invariance_harness(replace(params, lam=lam), d_m, episodes, steps, dt, seed)
        trace.append((lam, res.violations))
        return res.violations

    if violations(0.0) == 0:
        return 0.0, trace
    if violations(lam_max) > 0:
        raise ValueError(f"no violation-free lambda up to {lam_max} for d_m={d_m}")
    lo, hi = 0.0, lam_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if violations(mid) == 0:
            hi = mid
        else:
            lo = mid
    return float(np.ceil(hi / tol) * tol), trace
