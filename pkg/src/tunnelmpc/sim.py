"""Closed-loop scenario engine: reference generators, the cascaded MPC/PID loop,
per-step logging, metrics and the controller benchmark.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import cbf
from .aero import AeroConfig, TunnelGeometry, WindProcess, WALLS, tunnel_disturbance
from .cbf import CbfParams
from .dynamics import PidGains, PidState, UavParams, UavState, Wrench, inner_loop_step, step_plant
from .exceptions import AeroSingularityError, ConfigError
from .mpc import Case, MpcConfig, MpcController, MpcInput, MpcState, Mode, ReferenceWindow

COLLISION = "collision"


@dataclass(frozen=True)
class TrajectorySpec:
    """Parameters of the reference generators.

    ``weave_*`` shape the Case I path, ``standoff_*`` the Case II setpoint
    ladder and ``proximity_*`` the Case III path.
    """

    weave_x_amplitude: float = 1.28
    weave_x_period: float = 5.03
    weave_y_amplitude: float = 0.5
    weave_y_period: float = 3.14
    weave_z_amplitude: float = 0.5
    weave_z_period: float = 3.5
    weave_ramp: float = 3.0
    standoff_wall: str = "floor"
    standoff_start: float = 1.0
    standoff_step: float = 0.05
    standoff_dwell: float = 5.0
    proximity_clearance: float = 0.1
    proximity_transition: float = 4.0

    def __post_init__(self) -> None:
        if self.standoff_wall not in WALLS:
            raise ValueError(f"standoff_wall must be one of {WALLS}")
        if not min(self.weave_x_period, self.weave_y_period, self.weave_z_period, self.weave_ramp) > 0:
            raise ValueError("weave periods and ramp must be positive")
        if not (self.standoff_step > 0 and self.standoff_dwell > 0 and self.standoff_start > 0):
            raise ValueError("standoff ladder parameters must be positive")
        if not (self.proximity_clearance > 0 and self.proximity_transition > 0):
            raise ValueError("proximity parameters must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    case: Case = Case.BOUND_REGION
    controller: Mode = Mode.NAIVE
    geometry: TunnelGeometry = TunnelGeometry()
    uav: UavParams = UavParams()
    mpc: MpcConfig = MpcConfig()
    cbf: CbfParams = CbfParams()
    aero: AeroConfig = AeroConfig()
    pid: PidGains = PidGains()
    trajectory: TrajectorySpec = TrajectorySpec()
    d_m: float = 0.8
    wind_hold: float = 1.0
    total_time: float = 100.0
    inner_dt: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "controller", Mode(self.controller))
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")
        if self.d_m < 0:
            raise ValueError("d_m must be non-negative")
        if not self.inner_dt > 0:
            raise ValueError("inner_dt must be positive")
        ratio = self.mpc.t_s / self.inner_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("mpc.t_s must be an integer multiple of inner_dt")

    @property
    def steps(self) -> int:
        return int(round(self.total_time / self.mpc.t_s))

    @property
    def substeps(self) -> int:
        return int(round(self.mpc.t_s / self.inner_dt))

    def mpc_config(self) -> MpcConfig:
        return replace(self.mpc, mode=self.controller, case=self.case)


def config_to_dict(obj):
    """Plain JSON-ready view of a (nested) config dataclass."""
    if is_dataclass(obj):
        return {f.name: config_to_dict(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (Case, Mode)):
        return obj.value
    if isinstance(obj, tuple):
        return [config_to_dict(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def config_hash(config: ScenarioConfig) -> str:
    text = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def run_seed(config: ScenarioConfig) -> int:
    """Per-run stream seed: the base seed mixed with a stable hash of case and controller."""
    tag = f"{config.case.value}:{config.controller.value}".encode()
    return (int(config.seed) ^ zlib.crc32(tag)) & 0xFFFFFFFF


# ---------------------------------------------------------------------------
# Reference trajectories


@dataclass(frozen=True)
class ReferenceTrajectory:
    t_s: float
    positions: np.ndarray  # (K+1, 3), sample k at time k*t_s
    velocities: np.ndarray
    yaws: np.ndarray
    dwell_starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    dwell_standoffs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def window(self, k: int, horizon: int) -> ReferenceWindow:
        idx = np.minimum(np.arange(k, k + horizon + 1), self.positions.shape[0] - 1)
        return ReferenceWindow(self.positions[idx], self.velocities[idx], self.yaws[idx])

    @property
    def dwell_count(self) -> int:
        return int(self.dwell_starts.size)


def _smooth_step(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _case_one(t: np.ndarray, geometry: TunnelGeometry, spec: TrajectorySpec) -> np.ndarray:
    """Weave about the tunnel centerline; every component starts at rest."""
    cx, cy, cz = geometry.center()
    ramp = _smooth_step(t / spec.weave_ramp)
    x = cx - spec.weave_x_amplitude * np.cos(2 * np.pi * t / spec.weave_x_period)
    y = cy + ramp * spec.weave_y_amplitude * np.sin(2 * np.pi * t / spec.weave_y_period)
    z = cz + ramp * spec.weave_z_amplitude * np.sin(2 * np.pi * t / spec.weave_z_period)
    return np.column_stack([x, y, z])


def _case_two(t: np.ndarray, geometry: TunnelGeometry, spec: TrajectorySpec, t_s: float):
    wall = WALLS.index(spec.standoff_wall)
    center = geometry.center()
    dwell_steps = int(round(spec.standoff_dwell / t_s))
    n_dwell = int(math.floor(t[-1] / spec.standoff_dwell + 1e-9))
    k = np.arange(t.size)
    level = np.minimum(k // dwell_steps, max(n_dwell - 1, 0))
    standoffs = spec.standoff_start - spec.standoff_step * np.arange(max(n_dwell, 1))
    if np.any(standoffs <= 0):
        raise ConfigError("trajectory: standoff ladder reaches the wall; shorten total_time or the step")
    d = standoffs[level]
    pos = np.tile(center, (t.size, 1))
    axis = 2 if wall < 2 else 1
    extent = geometry.height if axis == 2 else geometry.width
    pos[:, axis] = d if wall in (0, 2) else extent - d
    starts = np.arange(n_dwell) * dwell_steps
    return pos, starts, standoffs[:n_dwell]


def _case_three(t: np.ndarray, geometry: TunnelGeometry, spec: TrajectorySpec) -> np.ndarray:
    """Center start, then floor pass, sidewall pass and ceiling pass, in that order."""
    c = spec.proximity_clearance
    cx, cy, cz = geometry.center()
    x0 = geometry.length * 0.1
    # waypoints in (y, z); x sweeps the middle 80 % of the tunnel at constant speed
    waypoints = [
        (cy, cz),
        (cy, c),
        (c, cz),
        (cy, geometry.height - c),
    ]
    hold = (t[-1] - spec.proximity_transition * (len(waypoints) - 1)) / len(waypoints)
    hold = max(hold, 0.0)
    yz = np.empty((t.size, 2))
    yz[:] = waypoints[0]
    tk = hold
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        s = _smooth_step((t - tk) / spec.proximity_transition)[:, None]
        active = t >= tk
        yz[active] = (np.asarray(a) + s * (np.asarray(b) - np.asarray(a)))[active]
        tk += spec.proximity_transition + hold
    x = x0 + (geometry.length - 2.0 * x0) * t / max(t[-1], 1e-12)
    return np.column_stack([x, yz])


def generate_reference(
    case: Case, geometry: TunnelGeometry, spec: TrajectorySpec, total_time: float, t_s: float
) -> ReferenceTrajectory:
    """Sampled reference over ``[0, total_time]`` plus a horizon-length tail."""
    case = Case(case)
    n = int(round(total_time / t_s))
    t = np.arange(n + 1) * t_s
    starts = np.zeros(0, dtype=int)
    standoffs = np.zeros(0)
    if case is Case.BOUND_REGION:
        pos = _case_one(t, geometry, spec)
    elif case is Case.MIN_STANDOFF:
        pos, starts, standoffs = _case_two(t, geometry, spec, t_s)
    else:
        pos = _case_three(t, geometry, spec)
    d = np.column_stack([pos[:, 2], geometry.height - pos[:, 2], pos[:, 1], geometry.width - pos[:, 1]])
    if np.any(d <= 0) or np.any(pos[:, 0] < 0) or np.any(pos[:, 0] > geometry.length):
        raise ConfigError("trajectory: reference leaves the tunnel")
    vel = np.gradient(pos, t_s, axis=0) if n > 0 else np.zeros_like(pos)
    return ReferenceTrajectory(t_s, pos, vel, np.zeros(n + 1), starts, standoffs)


# ---------------------------------------------------------------------------
# Closed loop


@dataclass(frozen=True)
class StepRecord:
    time: float
    plant_state: UavState
    mpc_input: MpcInput
    reference_position: np.ndarray
    h_values: np.ndarray
    wall_distances: np.ndarray
    disturbance: Wrench
    solver_status: str

    @property
    def h_min(self) -> float:
        return float(np.min(self.h_values)) if self.h_values.size else math.nan


@dataclass(frozen=True)
class RunMetrics:
    T_e: float
    c_e: float
    c_s: float
    min_wall_distance: np.ndarray
    boundary_violations: int
    collided: bool

    def to_dict(self) -> dict:
        return {
            "T_e": self.T_e,
            "c_e": self.c_e,
            "c_s": self.c_s,
            "min_wall_distance": dict(zip(WALLS, (float(v) for v in self.min_wall_distance))),
            "boundary_violations": self.boundary_violations,
            "collided": self.collided,
        }


def barrier_values(case: Case, state: MpcState, ref_pos, ref_vel, geometry: TunnelGeometry, params: CbfParams) -> np.ndarray:
    """Monitoring barrier values at a measured state (continued past the boundary)."""
    if Case(case) is Case.BOUND_REGION:
        h, _, _ = cbf.h_bounding_ext(state.position - ref_pos, state.velocity - ref_vel, params)
        return np.atleast_1d(h)
    d = geometry.wall_vectors(state.position)
    h, _, _ = cbf.h_wall_ext(d, np.broadcast_to(state.velocity, d.shape), params)
    return h


def _collided(distances: np.ndarray, prop_radius: float) -> bool:
    return bool(np.any(distances <= prop_radius / 4.0))


def run_scenario(config: ScenarioConfig, reference: ReferenceTrajectory | None = None):
    """Simulate one closed-loop run; returns ``(records, metrics)``.

    The run stops at the first collision: a wall distance at or below a quarter
    propeller radius, or a thrust-ratio singularity. A final record with status
    ``collision`` then marks the time of contact.
    """
    geometry, params = config.geometry, config.uav
    mcfg = config.mpc_config()
    ref = reference or generate_reference(config.case, geometry, config.trajectory, config.total_time, mcfg.t_s)
    rng = np.random.default_rng(run_seed(config))
    wind = WindProcess(config.d_m, rng, config.wind_hold)
    controller = MpcController(mcfg, config.cbf, geometry)
    hover = params.hover_thrust
    dt = config.inner_dt

    state = UavState(ref.positions[0], np.zeros(3), np.zeros(3), np.zeros(3))
    pid = PidState().synced(state)
    records: list[StepRecord] = []
    collided = False
    k = 0
    for k in range(config.steps):
        t = k * mcfg.t_s
        window = ref.window(k, mcfg.horizon)
        mstate = MpcState.from_uav(state)
        u, diag = controller.step(mstate, window)
        status = "fallback" if diag.fallback else "recovery" if diag.recovery else diag.status
        start = state
        h = barrier_values(config.case, mstate, window.positions[0], window.velocities[0], geometry, config.cbf)

        pid = pid.synced(state)
        u_arr = u.as_array()
        force_sum = np.zeros(3)
        torque_sum = np.zeros(3)
        n_sub = 0
        for j in range(config.substeps):
            thrust, torque, pid = inner_loop_step(state, u_arr, config.pid, params, dt, pid)
            try:
                aero = tunnel_disturbance(state, geometry, params, config.aero, hover, rng)
            except AeroSingularityError:
                collided = True
                break
            dist = Wrench(aero.force + params.mass * wind(t + j * dt), aero.torque)
            force_sum += dist.force
            torque_sum += dist.torque
            n_sub += 1
            state = step_plant(state, thrust, torque, dist, params, dt)
            if _collided(geometry.wall_distances(state.position), params.prop_radius):
                collided = True
                break
        n_sub = max(n_sub, 1)
        records.append(
            StepRecord(
                time=t,
                plant_state=start,
                mpc_input=u,
                reference_position=window.positions[0].copy(),
                h_values=h,
                wall_distances=geometry.wall_distances(start.position),
                disturbance=Wrench(force_sum / n_sub, torque_sum / n_sub),
                solver_status=status,
            )
        )
        if collided:
            break

    if collided:
        t_end = (k + 1) * mcfg.t_s
        window = ref.window(min(k + 1, ref.positions.shape[0] - 1), mcfg.horizon)
        try:
            mstate = MpcState.from_uav(state)
            h = barrier_values(config.case, mstate, window.positions[0], window.velocities[0], geometry, config.cbf)
        except ValueError:
            h = np.full(1 if config.case is Case.BOUND_REGION else 4, -math.inf)
        records.append(
            StepRecord(
                time=t_end,
                plant_state=state,
                mpc_input=MpcInput(np.zeros(3), 0.0),
                reference_position=window.positions[0].copy(),
                h_values=h,
                wall_distances=geometry.wall_distances(state.position),
                disturbance=Wrench.zero(),
                solver_status=COLLISION,
            )
        )
    return records, compute_metrics(records, config)


# ---------------------------------------------------------------------------
# Metrics


def compute_metrics(records: Sequence[StepRecord], config: ScenarioConfig) -> RunMetrics:
    """Aggregate metrics. The terminal collision record only counts toward
    the wall distances and the collision flag."""
    if not records:
        raise ValueError("no records")
    live = [r for r in records if r.solver_status != COLLISION]
    collided = any(r.solver_status == COLLISION for r in records)
    dists = np.array([r.wall_distances for r in records])
    min_dist = dists.min(axis=0)
    if not live:
        return RunMetrics(0.0, 0.0, 0.0, min_dist, 0, collided)
    pos = np.array([r.plant_state.position for r in live])
    ref = np.array([r.reference_position for r in live])
    err2 = np.sum((pos - ref) ** 2, axis=1)
    T_e = float(np.sqrt(np.mean(err2)))
    u = np.array([r.mpc_input.as_array() for r in live])
    c_e = float(np.sum(u * u))
    c_s = float(np.sum(np.abs(np.diff(u, axis=0)))) if len(live) > 1 else 0.0
    violations = 0
    if Case(config.case) is Case.BOUND_REGION:
        violations = int(np.count_nonzero(np.sqrt(err2) >= config.cbf.r))
    return RunMetrics(T_e, c_e, c_s, min_dist, violations, collided)


@dataclass(frozen=True)
class DwellResult:
    commanded: float
    mean_distance: float
    std: float
    passed: bool


@dataclass(frozen=True)
class StandoffResult:
    wall: str
    dwells: tuple[DwellResult, ...]
    min_stable_standoff: float


def standoff_analysis(
    records: Sequence[StepRecord], config: ScenarioConfig, reference: ReferenceTrajectory | None = None, std_limit: float = 0.05
) -> StandoffResult:
    """Walk the setpoint ladder and find the closest stable standoff.

    A dwell passes when it completes without collision and the position
    standard deviation over the dwell stays below ``std_limit``. The result is
    the mean measured wall distance of the last passing dwell before the first
    failing one (NaN if the very first dwell fails).
    """
    ref = reference or generate_reference(config.case, config.geometry, config.trajectory, config.total_time, config.mpc.t_s)
    wall = config.trajectory.standoff_wall
    widx = WALLS.index(wall)
    steps = int(round(config.trajectory.standoff_dwell / config.mpc.t_s))
    live = [r for r in records if r.solver_status != COLLISION]
    pos = np.array([r.plant_state.position for r in live]).reshape(-1, 3)
    dist = np.array([r.wall_distances[widx] for r in live])
    dwells = []
    best = math.nan
    failed = False
    for start, commanded in zip(ref.dwell_starts, ref.dwell_standoffs):
        end = start + steps
        complete = end <= len(live)
        seg = pos[start:end]
        if seg.shape[0] == 0:
            dwells.append(DwellResult(float(commanded), math.nan, math.nan, False))
            failed = True
            continue
        std = float(np.sqrt(np.sum(np.var(seg, axis=0))))
        mean_d = float(np.mean(dist[start:end]))
        passed = complete and std < std_limit
        dwells.append(DwellResult(float(commanded), mean_d, std, passed))
        if not failed:
            if passed:
                best = mean_d
            else:
                failed = True
    return StandoffResult(wall, tuple(dwells), best)


# ---------------------------------------------------------------------------
# Serialization

CSV_COLUMNS = (
    "time", "px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw",
    "ux", "uy", "uz", "uyaw", "refx", "refy", "refz", "h_min",
    "d_floor", "d_ceiling", "d_left", "d_right", "dist_fx", "dist_fy", "dist_fz", "solver_status",
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def records_to_csv(records: Iterable[StepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        s = r.plant_state
        row = [r.time, *s.position, *s.velocity, *s.attitude, *r.mpc_input.as_array(), *r.reference_position, r.h_min,
               *r.wall_distances, *r.disturbance.force]
        w.writerow([_fmt(v) for v in row] + [r.solver_status])
    return buf.getvalue()


def records_from_csv(text: str) -> list[StepRecord]:
    """Rebuild step records from a CSV log (body rates and torques are not logged)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    out = []
    for row in reader:
        v = [float(x) for x in row[:-1]]
        state = UavState(np.array(v[1:4]), np.array(v[4:7]), np.array(v[7:10]), np.zeros(3))
        out.append(
            StepRecord(
                time=v[0],
                plant_state=state,
                mpc_input=MpcInput(np.array(v[10:13]), v[13]),
                reference_position=np.array(v[14:17]),
                h_values=np.array([v[17]]),
                wall_distances=np.array(v[18:22]),
                disturbance=Wrench(np.array(v[22:25]), np.zeros(3)),
                solver_status=row[-1],
            )
        )
    return out


def metrics_to_json(metrics: RunMetrics, config: ScenarioConfig, extra: dict | None = None) -> str:
    payload = {
        **metrics.to_dict(),
        "config_hash": config_hash(config),
        "seed": int(config.seed),
        "case": config.case.value,
        "controller": config.controller.value,
    }
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)!r}")


# ---------------------------------------------------------------------------
# Benchmark

CONTROLLERS = (Mode.NAIVE, Mode.HC, Mode.CBF)
CASES = (Case.BOUND_REGION, Case.MIN_STANDOFF, Case.CLOSE_PROXIMITY)
STANDOFF_WALLS = ("floor", "ceiling", "left")


@dataclass(frozen=True)
class RunSummary:
    """One benchmark cell. Case II cells fly the standoff ladder against every
    wall in ``STANDOFF_WALLS``; ``metrics`` then belong to the configured wall's
    run and ``standoffs``/``wall_minima`` hold the per-wall results."""

    case: str
    controller: str
    seed: int
    metrics: RunMetrics
    standoffs: dict = field(default_factory=dict)
    wall_minima: dict = field(default_factory=dict)
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "controller": self.controller,
            "seed": self.seed,
            "failed": self.failed,
            "standoffs": dict(self.standoffs),
            "wall_minima": dict(self.wall_minima),
            **self.metrics.to_dict(),
        }


def case_config(base: ScenarioConfig, case: Case, controller: Mode, seed: int, wall: str | None = None) -> ScenarioConfig:
    cfg = replace(base, case=case, controller=controller, seed=seed)
    if wall is not None:
        cfg = replace(cfg, trajectory=replace(cfg.trajectory, standoff_wall=wall))
    return cfg


def _failed_metrics() -> RunMetrics:
    nan = math.nan
    return RunMetrics(nan, nan, nan, np.full(4, nan), 0, True)


def _run_summary(cfg: ScenarioConfig) -> RunSummary:
    # a crashed run is reported as a collided row rather than aborting the suite
    if cfg.case is not Case.MIN_STANDOFF:
        try:
            _, metrics = run_scenario(cfg)
        except Exception:
            return RunSummary(cfg.case.value, cfg.controller.value, cfg.seed, _failed_metrics(), failed=True)
        return RunSummary(cfg.case.value, cfg.controller.value, cfg.seed, metrics)
    standoffs, minima = {}, {}
    metrics, failed = None, False
    for wall in STANDOFF_WALLS:
        wcfg = replace(cfg, trajectory=replace(cfg.trajectory, standoff_wall=wall))
        try:
            records, m = run_scenario(wcfg)
            standoffs[wall] = standoff_analysis(records, wcfg).min_stable_standoff
        except Exception:
            m, failed = _failed_metrics(), True
            standoffs[wall] = math.nan
        minima[wall] = float(m.min_wall_distance[WALLS.index(wall)])
        if wall == cfg.trajectory.standoff_wall or metrics is None:
            metrics = m
    return RunSummary(cfg.case.value, cfg.controller.value, cfg.seed, metrics, standoffs, minima, failed)


def benchmark_configs(base: ScenarioConfig, seeds: Sequence[int], cases=CASES, controllers=CONTROLLERS) -> list[ScenarioConfig]:
    return [
        case_config(base, Case(case), Mode(controller), seed)
        for case in cases
        for controller in controllers
        for seed in seeds
    ]


def benchmark_suite(base: ScenarioConfig, seeds: Sequence[int], jobs: int = 1, cases=CASES, controllers=CONTROLLERS):
    """Run every case/controller/seed combination.

    Returns ``(summaries, table)`` where ``table`` maps row labels to
    ``{controller: (mean, std)}``.
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    cfgs = benchmark_configs(base, seeds, cases, controllers)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_summary, cfgs))
    else:
        summaries = [_run_summary(c) for c in cfgs]
    return summaries, aggregate(summaries)


def _mean_std(values) -> tuple[float, float]:
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std())


def aggregate(summaries: Sequence[RunSummary]) -> dict[str, dict[str, tuple[float, float]]]:
    table: dict[str, dict[str, tuple[float, float]]] = {}
    controllers = [m.value for m in CONTROLLERS]

    def put(label, ctrl, values):
        table.setdefault(label, {})[ctrl] = _mean_std(values)

    for ctrl in controllers:
        one = [s for s in summaries if s.case == Case.BOUND_REGION.value and s.controller == ctrl]
        if one:
            put("Case I: T_e (m)", ctrl, [s.metrics.T_e for s in one])
            put("Case I: boundary violations", ctrl, [s.metrics.boundary_violations for s in one])
            put("Case I: c_e", ctrl, [s.metrics.c_e for s in one])
            put("Case I: c_s", ctrl, [s.metrics.c_s for s in one])
        two = [s for s in summaries if s.case == Case.MIN_STANDOFF.value and s.controller == ctrl]
        for wall, label in (("floor", "ground"), ("ceiling", "ceiling"), ("left", "sidewall")):
            if two:
                put(f"Case II: {label} standoff (m)", ctrl, [s.standoffs.get(wall, math.nan) for s in two])
                put(f"Case II: {label} min distance (m)", ctrl, [s.wall_minima.get(wall, math.nan) for s in two])
        three = [s for s in summaries if s.case == Case.CLOSE_PROXIMITY.value and s.controller == ctrl]
        if three:
            put("Case III: T_e (m)", ctrl, [s.metrics.T_e for s in three])
            put("Case III: c_e", ctrl, [s.metrics.c_e for s in three])
            put("Case III: c_s", ctrl, [s.metrics.c_s for s in three])
            put("Case III: collision rate", ctrl, [float(s.metrics.collided) for s in three])
    return table


def render_table(table: dict[str, dict[str, tuple[float, float]]]) -> str:
    controllers = [m.value for m in CONTROLLERS]
    width = max([len(k) for k in table] + [10])
    lines = [f"{'metric':<{width}}  " + "  ".join(f"{c:>18}" for c in controllers)]
    lines.append("-" * len(lines[0]))
    for label, row in table.items():
        cells = []
        for c in controllers:
            mean, std = row.get(c, (math.nan, math.nan))
            cells.append(f"{mean:>9.4g} ± {std:<6.3g}")
        lines.append(f"{label:<{width}}  " + "  ".join(f"{x:>18}" for x in cells))
    return "\n".join(lines) + "\n"
