"""Deterministic 2-D exploration simulator.

Each tick senses the ground truth into the belief grid, rebuilds the distance
fields and frontier clusters, picks a frontier goal, computes the potential
field velocity, filters it (or only clips it in baseline mode) and integrates
single-integrator kinematics.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from .barrier import barrier_value
from .config import METRIC_PREFIX, RunConfig
from .filter import CLIP_REPORT_RTOL, FilterCase, FilterResult, apply_filter, speed_ceiling
from .grid import (CellState, FrontierClusterSet, OccupancyGrid, SdfSample, SignedDistanceField,
                   compute_frontier_sdf, compute_obstacle_sdf, extract_frontier_clusters,
                   extract_frontier_edges,
                   parse_grid_lines, sample, uncertainty_density)
from .nominal import Goal, apf_velocity, select_goal

BUNDLED_SCENARIOS = ("corridor", "rooms", "open_hall")

TRACE_COLUMNS = ("tick", "t", "px", "py", "udx", "udy", "usx", "usy", "h1", "h2", "sdf_obs",
                 "sdf_unk", "rho", "gamma2", "case", "lambda1", "lambda2", "slack",
                 "speed_clipped", "intervention")

# start jitter (meters) and the extra clearance a jittered start must have
_START_JITTER = 0.3
_START_MARGIN = 0.1
# a goal that has not come 0.05 m closer within this many ticks is abandoned
_STALL_TICKS = 50
_STALL_PROGRESS = 0.05
# smallest frontier ribbon offered as a goal (cells)
_EDGE_MIN_CELLS = 3
# how long an abandoned goal stays excluded (ticks)
_EXCLUDE_TICKS = 300
# unchecked tail of the line-of-sight test toward a frontier goal (meters)
_GOAL_END_MARGIN = 0.3


# ---------------------------------------------------------------------------
# world, sensor, state


@dataclass(frozen=True)
class World:
    truth: OccupancyGrid
    robot_radius: float = 0.22

    def __post_init__(self):
        if np.any(self.truth.cells == CellState.UNKNOWN):
            raise ValueError("ground truth must contain only free and occupied cells")
        if not (self.robot_radius > 0):
            raise ValueError(f"robot_radius must be positive, got {self.robot_radius}")

    def in_bounds(self, pos) -> bool:
        r = self.truth.resolution
        ox, oy = self.truth.origin
        return (ox - 0.5 * r <= pos[0] < ox + (self.truth.width - 0.5) * r
                and oy - 0.5 * r <= pos[1] < oy + (self.truth.height - 0.5) * r)

    def in_contact(self, pos) -> bool:
        """Whether the robot disc overlaps any occupied cell square."""
        g = self.truth
        r = g.resolution
        fx = (pos[0] - g.origin[0]) / r
        fy = (pos[1] - g.origin[1]) / r
        rr = self.robot_radius / r
        x0 = max(math.floor(fx - rr + 0.5), 0)
        x1 = min(math.floor(fx + rr + 0.5), g.width - 1)
        y0 = max(math.floor(fy - rr + 0.5), 0)
        y1 = min(math.floor(fy + rr + 0.5), g.height - 1)
        if x1 < x0 or y1 < y0:
            return False
        occ = g.cells[y0:y1 + 1, x0:x1 + 1] == CellState.OCCUPIED
        if not occ.any():
            return False
        ix = np.arange(x0, x1 + 1)
        iy = np.arange(y0, y1 + 1)
        # nearest point of each cell square [i - 0.5, i + 0.5] to the disc center
        dx = np.clip(fx, ix - 0.5, ix + 0.5) - fx
        dy = np.clip(fy, iy - 0.5, iy + 0.5) - fy
        d2 = dy[:, None] ** 2 + dx[None, :] ** 2
        return bool(np.any(occ & (d2 < rr * rr)))


@dataclass(frozen=True)
class SensorModel:
    range: float = 3.0
    ray_count: int = 180
    fov_deg: float = 360.0

    def __post_init__(self):
        if not (self.range > 0):
            raise ValueError(f"sensor range must be positive, got {self.range}")
        if self.ray_count < 8:
            raise ValueError(f"ray_count must be >= 8, got {self.ray_count}")
        if not (0 < self.fov_deg <= 360):
            raise ValueError(f"fov_deg must lie in (0, 360], got {self.fov_deg}")

    def ray_angles(self, heading: float = 0.0, offset: float = 0.0) -> np.ndarray:
        """Uniformly spaced ray directions centered on ``heading``."""
        fov = math.radians(self.fov_deg)
        k = np.arange(self.ray_count, dtype=np.float64)
        if self.fov_deg >= 360:
            return heading + offset + k * (2.0 * math.pi / self.ray_count)
        return heading + offset - 0.5 * fov + k * (fov / (self.ray_count - 1))


@dataclass
class RobotState:
    position: np.ndarray
    commands: list = field(default_factory=list)


def sense_and_update(world: World, belief: np.ndarray, pos, sensor: SensorModel,
                     heading: float = 0.0, offset: float = 0.0) -> int:
    """Ray-cast from ``pos`` into ``belief`` (an int8 cell array, updated in place).

    Returns the number of cells whose state changed. Known cells only ever
    change from unknown, and every observation copies the ground truth.
    """
    g = world.truth
    r = g.resolution
    gx = (float(pos[0]) - g.origin[0]) / r + 0.5
    gy = (float(pos[1]) - g.origin[1]) / r + 0.5
    angles = sensor.ray_angles(heading, offset)
    return _kernels.raycast(g.cells, belief, gx, gy, sensor.range / r, angles)


def step(state: RobotState, u_safe, dt: float) -> RobotState:
    """Explicit Euler step of the single integrator."""
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    u = np.asarray(u_safe, dtype=np.float64)
    pos = np.array([state.position[0] + u[0] * dt, state.position[1] + u[1] * dt])
    return RobotState(pos, state.commands + [u.copy()])


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    name: str
    world: World
    start: np.ndarray


def parse_scenario(text: str, name: str = "scenario", robot_radius: float = 0.22) -> Scenario:
    """Grid text followed by one ``start_x start_y`` line (meters)."""
    grid, rest = parse_grid_lines(text.splitlines())
    if len(rest) != 1:
        raise ValueError(f"{name}: expected one 'start_x start_y' line after the grid, found {len(rest)}")
    try:
        sx, sy = (float(v) for v in rest[0].split())
    except ValueError:
        raise ValueError(f"{name}: bad start line {rest[0]!r}") from None
    world = World(grid, robot_radius)
    start = np.array([sx, sy])
    if not world.in_bounds(start):
        raise ValueError(f"{name}: start {tuple(start)} lies outside the grid")
    if world.in_contact(start):
        raise ValueError(f"{name}: start {tuple(start)} overlaps an obstacle")
    return Scenario(name, world, start)


def load_scenario(name_or_path: str, robot_radius: float = 0.22) -> Scenario:
    """Load a bundled scenario by name, or a scenario file by path."""
    if name_or_path in BUNDLED_SCENARIOS:
        text = resources.files("dualcbf").joinpath("scenarios", f"{name_or_path}.txt").read_text()
        return parse_scenario(text, name_or_path, robot_radius)
    path = Path(name_or_path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario {name_or_path!r} is neither a bundled name "
                                f"({', '.join(BUNDLED_SCENARIOS)}) nor an existing file")
    return parse_scenario(path.read_text(), path.stem, robot_radius)


def _jittered_start(scenario: Scenario, rng: np.random.Generator, min_clearance: float) -> np.ndarray:
    truth_sdf = compute_obstacle_sdf(scenario.world.truth)
    for _ in range(200):
        cand = scenario.start + rng.uniform(-_START_JITTER, _START_JITTER, size=2)
        if (scenario.world.in_bounds(cand) and not scenario.world.in_contact(cand)
                and sample(truth_sdf, cand).value >= min_clearance):
            return cand
    return scenario.start.copy()


# ---------------------------------------------------------------------------
# trace and metrics


@dataclass(frozen=True)
class TickRecord:
    tick: int
    t: float
    px: float
    py: float
    udx: float
    udy: float
    usx: float
    usy: float
    h1: float
    h2: float | None
    sdf_obs: float
    sdf_unk: float | None
    rho: float | None
    gamma2: float | None
    case: str
    lambda1: float
    lambda2: float
    slack: float
    speed_clipped: bool
    intervention: bool
    known_cells: int = 0

    @property
    def frontier_present(self) -> bool:
        return self.sdf_unk is not None


@dataclass
class TickTrace:
    resolution: float
    dt: float
    d_safe: float
    d_stop: float
    filter_enabled: bool
    records: list[TickRecord] = field(default_factory=list)
    final_position: tuple[float, float] | None = None
    contacts: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in self.records:
            writer.writerow([_cell(getattr(rec, name)) for name in TRACE_COLUMNS])
        return buf.getvalue()


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class EpisodeMetrics:
    explored_area: float
    path_length: float
    avg_speed: float
    min_clearance: float
    obstacle_violation_ticks: int
    frontier_violation_ticks: int
    intervention_rate: float
    speed_clips: int
    avg_slack: float
    max_slack: float
    avg_gamma2: float | None
    ticks_evaluated: int
    obstacle_active_ticks: int
    frontier_active_ticks: int
    infeasible_count: int
    min_h1: float
    min_h2: float | None
    contacts: int
    ticks: int = 0
    exploration_time: float = 0.0

    def as_lines(self, prefix: str = METRIC_PREFIX) -> str:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            out.append(f"{prefix}{f.name} = {'' if value is None else _cell(value)}\n")
        return "".join(out)


def compute_metrics(trace: TickTrace) -> EpisodeMetrics:
    """Episode summary from a logged trace."""
    recs = trace.records
    if not recs:
        raise ValueError("cannot compute metrics of an empty trace")
    n = len(recs)
    pts = [(r.px, r.py) for r in recs]
    if trace.final_position is not None:
        pts.append(tuple(trace.final_position))
    path = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        path += math.hypot(x1 - x0, y1 - y0)
    duration = n * trace.dt
    gammas = [r.gamma2 for r in recs if r.gamma2 is not None]
    h2s = [r.h2 for r in recs if r.h2 is not None]
    slacks = [r.slack for r in recs]
    return EpisodeMetrics(
        explored_area=recs[-1].known_cells * trace.resolution ** 2,
        path_length=path,
        avg_speed=path / duration,
        min_clearance=min(r.sdf_obs for r in recs),
        obstacle_violation_ticks=sum(r.sdf_obs < trace.d_safe for r in recs),
        frontier_violation_ticks=sum(r.sdf_unk is not None and r.sdf_unk < trace.d_stop for r in recs),
        intervention_rate=sum(r.intervention for r in recs) / n,
        speed_clips=sum(r.speed_clipped for r in recs),
        avg_slack=sum(slacks) / n,
        max_slack=max(slacks),
        avg_gamma2=sum(gammas) / len(gammas) if gammas else None,
        ticks_evaluated=sum(r.case != "" for r in recs),
        obstacle_active_ticks=sum(r.lambda1 > 0 for r in recs),
        frontier_active_ticks=sum(r.lambda2 > 0 for r in recs),
        infeasible_count=sum(r.case in (FilterCase.SOFT_FALLBACK.value, FilterCase.FAIL_SAFE_STOP.value)
                             for r in recs),
        min_h1=min(r.h1 for r in recs),
        min_h2=min(h2s) if h2s else None,
        contacts=trace.contacts,
        ticks=n,
        exploration_time=duration,
    )


# ---------------------------------------------------------------------------
# episode loop


@dataclass(frozen=True)
class TickContext:
    """Everything computed during one tick, passed to ``on_tick`` observers."""

    tick: int
    position: np.ndarray
    next_position: np.ndarray
    obstacle_sdf: SignedDistanceField
    frontier_sdf: SignedDistanceField | None
    obs: SdfSample
    frontier: SdfSample | None
    u_des: np.ndarray
    u_safe: np.ndarray
    result: FilterResult | None
    record: TickRecord


class _GoalKeeper:
    """Holds the current goal between ticks.

    A held goal follows its frontier piece as the map grows. Goals that are
    reached, or that stop getting closer, are excluded for a while so the
    next-nearest piece is tried instead.
    """

    def __init__(self, reached_radius: float, line_of_sight: Callable[[np.ndarray, np.ndarray], bool]):
        self.reached_radius = reached_radius
        self.line_of_sight = line_of_sight
        self.hold_radius = 2.0 * reached_radius
        self.excluded: list[tuple[np.ndarray, int]] = []
        self.goal: Goal | None = None
        self.best_dist = math.inf
        self.since_progress = 0

    def _is_excluded(self, point, tick: int) -> bool:
        return any(until > tick and math.hypot(point[0] - p[0], point[1] - p[1]) <= self.hold_radius
                   for p, until in self.excluded)

    def _exclude(self, tick: int) -> None:
        self.excluded.append((self.goal.position.copy(), tick + _EXCLUDE_TICKS))
        self._release()

    def _release(self) -> None:
        self.goal = None
        self.best_dist = math.inf
        self.since_progress = 0

    def update(self, candidates: FrontierClusterSet, pos, tick: int) -> Goal | None:
        self.excluded = [(p, until) for p, until in self.excluded if until > tick]
        for _ in range(len(candidates) + 1):
            keep = tuple(c for c in candidates if not self._is_excluded(c.centroid, tick))
            visible = tuple(c for c in keep if self.line_of_sight(pos, c.centroid))
            if self.goal is not None:
                tracked = self._track(candidates)
                if tracked is None or (visible and not self.line_of_sight(pos, tracked.position)):
                    self._release()
                else:
                    self.goal = tracked
            if self.goal is None:
                self.goal = select_goal(FrontierClusterSet(visible or keep), pos)
                if self.goal is None:
                    return None
            d = math.hypot(self.goal.position[0] - pos[0], self.goal.position[1] - pos[1])
            if d < self.best_dist - _STALL_PROGRESS:
                self.best_dist = d
                self.since_progress = 0
            else:
                self.since_progress += 1
            if d <= self.reached_radius or self.since_progress > _STALL_TICKS:
                self._exclude(tick)
                continue
            return self.goal
        return None

    def _track(self, candidates: FrontierClusterSet) -> Goal | None:
        best, best_d = None, self.hold_radius
        for i, c in enumerate(candidates):
            d = math.hypot(c.centroid[0] - self.goal.position[0], c.centroid[1] - self.goal.position[1])
            if d <= best_d:
                best, best_d = Goal(np.array(c.centroid, dtype=np.float64), c.size, i), d
        return best


def _clear_line(belief: np.ndarray, obstacle_sdf: SignedDistanceField, start, end,
                clearance: float, end_margin: float) -> bool:
    """Whether the segment runs through known-free cells with ``clearance`` to obstacles.

    The last ``end_margin`` meters are not checked (frontier goals sit on unknown cells).
    """
    r = obstacle_sdf.resolution
    ox, oy = obstacle_sdf.origin
    dx, dy = end[0] - start[0], end[1] - start[1]
    length = math.hypot(dx, dy) - end_margin
    if length <= 0.0:
        return True
    n = int(math.ceil(length / (0.5 * r))) + 1
    t = np.linspace(0.0, length, n) / (length + end_margin)
    ix = np.floor((start[0] + t * dx - ox) / r + 0.5).astype(np.intp)
    iy = np.floor((start[1] + t * dy - oy) / r + 0.5).astype(np.intp)
    h, w = belief.shape
    if ix.min() < 0 or iy.min() < 0 or ix.max() >= w or iy.max() >= h:
        return False
    return bool(np.all(belief[iy, ix] == CellState.FREE)
                and np.all(obstacle_sdf.values[iy, ix] >= clearance))


def _heading(u, previous: float) -> float:
    if math.hypot(u[0], u[1]) > 1e-9:
        return math.atan2(u[1], u[0])
    return previous



def run_episode(config: RunConfig, scenario: Scenario | None = None,
                on_tick: Callable[[TickContext], None] | None = None) -> tuple[EpisodeMetrics, TickTrace]:
    """Simulate one episode; deterministic in ``(config, scenario)``."""
    if scenario is None:
        scenario = load_scenario(config.scenario, config.robot_radius)
    world = scenario.world
    truth = world.truth
    sensor = SensorModel(config.sensor_range, config.ray_count, config.fov_deg)
    obstacle_spec = config.obstacle_spec()
    frontier_spec = config.frontier_spec()
    schedule = config.gamma_schedule()
    params = config.filter_params()
    apf = config.apf_params()

    rng = np.random.default_rng(config.seed)
    pos = _jittered_start(scenario, rng, max(config.d_safe, world.robot_radius) + _START_MARGIN)
    ray_offset = float(rng.uniform(0.0, 2.0 * math.pi / sensor.ray_count))
    heading = 0.0

    belief = np.full(truth.cells.shape, int(CellState.UNKNOWN), dtype=np.int8)
    trace = TickTrace(truth.resolution, config.dt, config.d_safe, config.d_stop, config.filter_enabled)
    sdf_box = [None]
    keeper = _GoalKeeper(config.goal_reached_radius, lambda a, b: _clear_line(
        belief, sdf_box[0], a, b, config.d_safe, _GOAL_END_MARGIN))
    known = 0
    obs_sdf = front_sdf = None
    clusters = edges = FrontierClusterSet()
    belief_grid = None

    for k in range(config.ticks):
        changed = sense_and_update(world, belief, pos, sensor, heading, ray_offset)
        if changed:
            known = int(np.count_nonzero(belief != CellState.UNKNOWN))
        if changed or obs_sdf is None:
            belief_grid = OccupancyGrid(belief, truth.resolution, truth.origin)
            obs_sdf = compute_obstacle_sdf(belief_grid)
            clusters = extract_frontier_clusters(belief_grid, config.n_min)
            front_sdf = compute_frontier_sdf(belief_grid, clusters)
            edges = extract_frontier_edges(belief_grid, clusters, _EDGE_MIN_CELLS)
            sdf_box[0] = obs_sdf

        obs = sample(obs_sdf, pos)
        front = sample(front_sdf, pos) if front_sdf is not None else None
        rho = uncertainty_density(belief_grid, pos, config.sensor_range) if front is not None else None

        goal = keeper.update(edges, pos, k)
        u_des = apf_velocity(pos, goal, obs, apf)

        result = None
        if config.filter_enabled:
            result = apply_filter(u_des, obs, front, rho, obstacle_spec, frontier_spec, schedule, params)
            u = result.u_safe
            rec = TickRecord(
                k, k * config.dt, float(pos[0]), float(pos[1]), float(u_des[0]), float(u_des[1]),
                float(u[0]), float(u[1]), result.h1, result.h2, obs.value,
                front.value if front is not None else None, rho, result.gamma2, result.case.value,
                result.lambda1, result.lambda2, result.slack, result.speed_clipped,
                result.intervened(params.intervention_tol), known)
        else:
            u = speed_ceiling(u_des, config.v_max)
            clipped = math.hypot(u_des[0], u_des[1]) > config.v_max * (1.0 + CLIP_REPORT_RTOL)
            rec = TickRecord(
                k, k * config.dt, float(pos[0]), float(pos[1]), float(u_des[0]), float(u_des[1]),
                float(u[0]), float(u[1]), barrier_value(obstacle_spec, obs.value),
                barrier_value(frontier_spec, front.value) if front is not None else None,
                obs.value, front.value if front is not None else None, rho, None, "",
                0.0, 0.0, 0.0, clipped, False, known)
        trace.records.append(rec)

        new_pos = np.array([pos[0] + u[0] * config.dt, pos[1] + u[1] * config.dt])
        if on_tick is not None:
            on_tick(TickContext(k, pos, new_pos, obs_sdf, front_sdf, obs, front, u_des, u, result, rec))
        heading = _heading(u, heading)
        pos = new_pos
        if world.in_contact(pos) or not world.in_bounds(pos):
            trace.contacts += 1
            break

    trace.final_position = (float(pos[0]), float(pos[1]))
    return compute_metrics(trace), trace


def summary_text(config: RunConfig, metrics: EpisodeMetrics) -> str:
    """Flat key-value summary: config echo (loadable) followed by ``metric.*`` lines."""
    return config.echo() + metrics.as_lines()


def episode_dir(config: RunConfig, scenario_name: str | None = None, mode: str | None = None) -> Path:
    """``<out_dir>/<scenario>_<seed>_<mode>``; ``mode`` defaults to filtered/baseline."""
    name = scenario_name or Path(config.scenario).stem
    if mode is None:
        mode = "filtered" if config.filter_enabled else "baseline"
    return Path(config.out_dir) / f"{name}_{config.seed}_{mode}"


def write_episode(config: RunConfig, metrics: EpisodeMetrics, trace: TickTrace,
                  scenario_name: str | None = None, mode: str | None = None) -> Path:
    out = episode_dir(config, scenario_name, mode)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace.to_csv())
    (out / "summary.txt").write_text(summary_text(config, metrics))
    return out


def read_summary_metrics(path) -> dict[str, str]:
    """The ``metric.*`` entries of a summary file, prefix stripped."""
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition("=")
        key = key.strip()
        if key.startswith(METRIC_PREFIX):
            out[key[len(METRIC_PREFIX):]] = value.strip()
    return out
