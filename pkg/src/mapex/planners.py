"""Exploration policies: frontier baselines, a greedy predicted-gain
policy, and the external-policy protocol client.

Frontier planning runs on a world-frame four-state map (the observed
coarse map inflated by the robot radius): frontier cells are free cells
with an unknown 4-neighbour, grouped 8-connected, targeted by breadth-
first shortest path. A small local controller turns the path into one of
the six discrete actions, with a safety veto that simulates the candidate
action (and its deceleration tail) against the inflated fine ego map, so
obstacle-adjacent manoeuvres degrade to gentler actions instead of hitting
walls.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (ACTION_COUNT, FORWARD, FORWARD_LEFT, FORWARD_RIGHT,
                       HOVER, TURN_LEFT, TURN_RIGHT, MotionTable, Pose,
                       wrap_angle)
from .episode import Observation
from .grid import FREE, NON_FLIGHT, OCCUPIED, UNKNOWN, Grid2D
from .occupancy import inflate
from .protocol import ExternalPolicyClient, make_endpoint

# Heading-error bands of the local controller (radians): below the first
# bound drive straight, between them combine turn and translation, above
# turn in place.
FORWARD_BAND_RAD = 0.35
TURN_BAND_RAD = 1.0

_N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass
class Frontier:
    """A connected group of free cells bordering unknown space."""

    cells: np.ndarray                 # (n, 2) row/col
    centroid: tuple[int, int]
    path_cost: float = math.inf


def detect_frontiers(grid: Grid2D) -> list[Frontier]:
    """Find frontier components: free cells 4-adjacent to unknown, grouped
    with 8-connectivity. Non-flight cells never join a frontier."""
    from scipy import ndimage
    cells = grid.cells
    free = cells == FREE
    unknown = cells == UNKNOWN
    near_unknown = np.zeros_like(free)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    mask = free & near_unknown
    labels, count = ndimage.label(mask, structure=np.ones((3, 3)))
    frontiers = []
    for lab in range(1, count + 1):
        members = np.argwhere(labels == lab)
        mean = members.mean(axis=0)
        d2 = ((members - mean) ** 2).sum(axis=1)
        best = int(np.lexsort((members[:, 1], members[:, 0], d2))[0])
        centroid = (int(members[best, 0]), int(members[best, 1]))
        frontiers.append(Frontier(members, centroid))
    frontiers.sort(key=lambda f: (f.cells[:, 0].min(), f.cells[:, 1].min(),
                                  f.centroid))
    return frontiers


def _bfs_distances(traversable: np.ndarray, seed: tuple[int, int]) -> np.ndarray:
    """Uniform-cost grid distances (4-connected) from a seed; -1 unreachable."""
    h, w = traversable.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if not (0 <= seed[0] < h and 0 <= seed[1] < w):
        return dist
    dist[seed] = 0
    queue = deque([seed])
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in _N4:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and traversable[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist


def _select_goal(grid: Grid2D, robot_cell):
    """Nearest reachable frontier by breadth-first distance over free
    cells, costed by its closest member. Returns (goal_cell, frontier) or
    None when nothing is reachable."""
    traversable = grid.cells == FREE
    if grid.in_bounds(*robot_cell):
        traversable[robot_cell] = True  # the robot may sit inside the margin
    dist = _bfs_distances(traversable, robot_cell)
    best = None
    for frontier in detect_frontiers(grid):
        reachable = [(int(dist[r, c]), int(r), int(c))
                     for r, c in frontier.cells if dist[r, c] >= 0]
        if not reachable:
            continue
        d, r, c = min(reachable)
        frontier.path_cost = float(d)
        goal = frontier.centroid if dist[frontier.centroid] == d else (r, c)
        if best is None or d < best[0]:
            best = (d, goal, frontier)
    if best is None:
        return None
    return best[1], best[2]


def _next_waypoint(grid: Grid2D, robot_cell, goal, lookahead: int = 3):
    """Walk the shortest path from the robot toward the goal and return the
    waypoint ``lookahead`` cells along it (world coordinates)."""
    traversable = grid.cells == FREE
    traversable[robot_cell] = True
    dist = _bfs_distances(traversable, goal)
    if dist[robot_cell] < 0:
        return None
    cell = robot_cell
    for _ in range(lookahead):
        if cell == goal:
            break
        nxt = None
        d = dist[cell]
        for dr, dc in _N4:
            nr, nc = cell[0] + dr, cell[1] + dc
            if (0 <= nr < grid.height and 0 <= nc < grid.width
                    and 0 <= dist[nr, nc] < d):
                d = dist[nr, nc]
                nxt = (nr, nc)
        if nxt is None:
            break
        cell = nxt
    return grid.center_of(*cell)


def _heading_action(heading_error: float) -> int:
    if abs(heading_error) <= FORWARD_BAND_RAD:
        return FORWARD
    if abs(heading_error) <= TURN_BAND_RAD:
        return FORWARD_LEFT if heading_error > 0 else FORWARD_RIGHT
    return TURN_LEFT if heading_error > 0 else TURN_RIGHT


def action_is_safe(high_ego: Grid2D, table: MotionTable, last_action: int,
                   action: int, sample_step_m: float = 0.02) -> bool:
    """Simulate an action (plus its deceleration tail) in the inflated fine
    ego map; unsafe if the swept centre line touches occupied or non-flight."""
    m1, r1 = table.entry(action, last_action)
    m2, r2 = table.entry(HOVER, action)
    pts = [(0.0, 0.0)]
    x = y = 0.0
    for dist, heading in ((m1, r1), (m2, r1 + r2)):
        if dist <= 0:
            continue
        n = max(1, int(math.ceil(dist / sample_step_m)))
        for i in range(1, n + 1):
            t = dist * i / n
            pts.append((x + t * math.cos(heading), y + t * math.sin(heading)))
        x, y = pts[-1]
    start = high_ego.cell_of(0.0, 0.0)
    for px, py in pts:
        cell = high_ego.cell_of(px, py)
        if cell == start:
            continue
        if not high_ego.in_bounds(*cell):
            return False
        if high_ego.cells[cell] in (OCCUPIED, NON_FLIGHT):
            return False
    return True


_FALLBACKS = {
    FORWARD: (FORWARD, FORWARD_LEFT, FORWARD_RIGHT, TURN_LEFT, TURN_RIGHT, HOVER),
    FORWARD_LEFT: (FORWARD_LEFT, TURN_LEFT, FORWARD, HOVER),
    FORWARD_RIGHT: (FORWARD_RIGHT, TURN_RIGHT, FORWARD, HOVER),
    TURN_LEFT: (TURN_LEFT, HOVER),
    TURN_RIGHT: (TURN_RIGHT, HOVER),
    HOVER: (HOVER,),
}


def _steer(pose: Pose, waypoint, last_action: int,
           table: MotionTable | None, safety_ego: Grid2D | None) -> int:
    heading_error = wrap_angle(math.atan2(waypoint[1] - pose.y,
                                          waypoint[0] - pose.x) - pose.yaw)
    desired = _heading_action(heading_error)
    if table is None or safety_ego is None:
        return desired
    for candidate in _FALLBACKS[desired]:
        if action_is_safe(safety_ego, table, last_action, candidate):
            return candidate
    return HOVER


def plan_nearest_frontier(grid: Grid2D, pose: Pose, last_action: int = HOVER,
                          table: MotionTable | None = None,
                          safety_ego: Grid2D | None = None) -> int | None:
    """Next action toward the nearest frontier on a four-state planning
    map; None when no frontier is reachable (exploration complete)."""
    robot_cell = grid.cell_of(pose.x, pose.y)
    if not grid.in_bounds(*robot_cell):
        return None
    selected = _select_goal(grid, robot_cell)
    if selected is None:
        return None
    goal, _ = selected
    waypoint = _next_waypoint(grid, robot_cell, goal)
    if waypoint is None:
        return None
    return _steer(pose, waypoint, last_action, table, safety_ego)


def plan_frontier_pred(grid: Grid2D, predicted: Grid2D, pose: Pose,
                       **kwargs) -> int | None:
    """Frontier goal selection on the observed map; the predicted map only
    changes when exploration stops (coverage is scored on predictions by
    the episode), not which goal is chosen."""
    return plan_nearest_frontier(grid, pose, **kwargs)


_WEDGE_CACHE: dict = {}


def _wedge_geometry(shape, resolution_m):
    key = (shape, resolution_m)
    if key not in _WEDGE_CACHE:
        h, w = shape
        dy = (np.arange(h) - h // 2)[:, None] * resolution_m
        dx = (np.arange(w) - w // 2)[None, :] * resolution_m
        _WEDGE_CACHE[key] = (np.broadcast_to(dx, (h, w)),
                             np.broadcast_to(dy, (h, w)))
    return _WEDGE_CACHE[key]


def plan_greedy_pred(obs: Observation, table: MotionTable | None = None,
                     sensor=None) -> int:
    """One-step lookahead on the observation alone: among non-colliding
    actions, pick the one whose post-action sensor wedge covers the most
    unknown cells of the prediction map; ties break toward the lowest
    action index, and if nothing is safe, hover."""
    from .sensor import SensorConfig
    table = table or MotionTable.default()
    sensor = sensor or SensorConfig()
    pred = obs.pred_ego
    dx, dy = _wedge_geometry(pred.cells.shape, pred.resolution_m)
    unknown = pred.cells == UNKNOWN
    dist2 = dx * dx + dy * dy

    best_action = HOVER
    best_gain = -1
    for action in range(ACTION_COUNT):
        if not action_is_safe(obs.high_ego, table, obs.last_action, action):
            continue
        move, rot = table.entry(action, obs.last_action)
        ox = move * math.cos(rot)
        oy = move * math.sin(rot)
        rx = dx - ox
        ry = dy - oy
        within = (rx * rx + ry * ry) <= sensor.max_range_m ** 2
        angles = np.arctan2(ry, rx) - rot
        angles = (angles + math.pi) % (2.0 * math.pi) - math.pi
        wedge = within & (np.abs(angles) <= sensor.fov_rad / 2.0)
        gain = int((wedge & unknown).sum())
        if gain > best_gain:
            best_gain = gain
            best_action = action
    if best_gain < 0:
        return HOVER
    return best_action


def plan_external(obs: Observation, client: ExternalPolicyClient) -> int:
    """Ask an external policy for the next action over the wire protocol."""
    return client.request_action(obs.high_ego.cells, obs.pred_ego.cells,
                                 obs.last_action)


# -- policy objects (one per episode) -----------------------------------------

class FrontierPolicy:
    """Nearest-frontier exploration on the observed map, never colliding
    with anything it has not seen.

    Unknown cells are treated as worst-case walls: both path cells and the
    action-level veto come from the observed map with unknown read as
    occupied, inflated by the robot radius, and the veto applies the same
    pose-level collision predicate the environment itself uses. Because
    no generated wall can hide inside a cell that was observed free, an
    action the veto accepts cannot collide with ground truth. The robot
    therefore approaches a frontier up to the safety band, looks into the
    unknown to extend the map, and only then drives on. Frontiers that
    stay unresolved after facing them (occluded slivers) are blacklisted
    so exploration moves on.
    """

    coverage_source = "observed"

    _FACE_LIMIT = 40  # a bit over one full in-place revolution

    _STALL_LIMIT = 220  # steps without any new observed cell -> give up

    def __init__(self):
        self._goal: tuple[int, int] | None = None
        self._waypoint: tuple[float, float] | None = None
        self._turn_sign = 0
        self._face_count = 0
        self._step = 0
        self._best_cov = -1.0
        self._best_cov_step = 0
        self._blacklist: set[tuple[int, int]] | None = None
        self._bad_vantage: dict[tuple[int, int], int] = {}
        self._fail_counts: dict[tuple[int, int], int] = {}

    def next_action(self, env) -> int | None:
        low = env.observed_low
        radius = env.config.robot_radius_m
        if self._blacklist is None:
            self._blacklist = set()

        worst_base = low.copy()
        worst_base.cells[worst_base.cells == UNKNOWN] = OCCUPIED
        worst = inflate(worst_base, radius)
        traversable = (low.cells == FREE) & (worst.cells == FREE)

        pose = env.pose
        robot_cell = low.cell_of(pose.x, pose.y)
        if not low.in_bounds(*robot_cell):
            return None
        traversable[robot_cell] = True

        fmask = _frontier_mask(low)
        for cell in self._blacklist:
            fmask[cell] = False
        if not fmask.any():
            return None

        # Global stall guard: exploration that stops producing new
        # observations for a long stretch is done for this policy's
        # purposes (any remaining unknown space is out of safe reach).
        self._step += 1
        if env.coverage_observed > self._best_cov + 1e-12:
            self._best_cov = env.coverage_observed
            self._best_cov_step = self._step
        elif self._step - self._best_cov_step > self._STALL_LIMIT:
            return None

        # Two distance fields: how close each free cell is to a frontier,
        # and how far each provably-safe cell is from the robot. The goal
        # is the reachable safe cell closest to a frontier.
        free = low.cells == FREE
        free[robot_cell] = True
        dist_f = _bfs_distances_multi(free, np.argwhere(fmask))
        dist_r = _bfs_distances(traversable, robot_cell)
        reachable = traversable & (dist_r >= 0) & (dist_f >= 0)
        if not reachable.any():
            return None

        # Vantage points where a full spin resolved nothing are avoided for
        # a while, so the same frontier gets looked at from somewhere else.
        self._bad_vantage = {c: s for c, s in self._bad_vantage.items()
                             if self._step - s < 300}
        if self._bad_vantage:
            bad = np.zeros(reachable.shape, dtype=bool)
            for (r, c) in self._bad_vantage:
                bad[max(0, r - 2):r + 3, max(0, c - 2):c + 3] = True
            masked = reachable & ~bad
            if masked.any():
                reachable = masked
            else:
                self._bad_vantage.clear()

        goal = self._goal
        if goal is not None and reachable[goal]:
            best_f = dist_f[reachable].min()
            if dist_f[goal] > best_f + 2:
                goal = None  # a clearly better spot opened up
        else:
            goal = None
        if goal is None:
            goal = self._pick_goal(env, low, reachable, dist_f, dist_r, fmask)
            self._face_count = 0
            self._waypoint = None
        self._goal = goal

        if robot_cell == goal:
            # As close as currently safe: spin in place. A full turn scans
            # everything in range, so whatever blocks the next cell gets
            # seen if it is visible at all; once the band recedes the goal
            # advances.
            self._face_count += 1
            if self._face_count > self._FACE_LIMIT:
                self._spin_failed(low, goal, dist_f, fmask)
                return HOVER
            for candidate in (TURN_LEFT, TURN_RIGHT, HOVER):
                if _action_acceptable(env, worst, candidate):
                    return candidate
            return HOVER

        self._face_count = 0
        # Track one waypoint in world coordinates until it is reached:
        # re-deriving it every step lets map growth flip the BFS path
        # between tie-equivalent routes, which can ring the controller
        # between opposite turns forever.
        waypoint = self._waypoint
        if waypoint is not None:
            wp_cell = low.cell_of(*waypoint)
            if (math.hypot(waypoint[0] - pose.x, waypoint[1] - pose.y) < 0.15
                    or not low.in_bounds(*wp_cell) or not traversable[wp_cell]):
                waypoint = None
        if waypoint is None:
            back = _descent_path(dist_r, goal, _cell_mask(dist_r.shape, robot_cell))
            if back is None:
                self._goal = None
                return HOVER
            path = back[::-1]  # robot first
            # Carrot one cell ahead: the straight line into a 4-adjacent
            # cell cannot cut through any third cell, so the veto agrees
            # with the planned path.
            waypoint = low.center_of(*path[min(1, len(path) - 1)])
        self._waypoint = waypoint

        heading_error = wrap_angle(
            math.atan2(waypoint[1] - pose.y, waypoint[0] - pose.x) - pose.yaw)
        if abs(heading_error) <= TURN_BAND_RAD:
            self._turn_sign = 0
            desired = _heading_action(heading_error)
        else:
            # Commit to one turning direction until roughly aligned, so the
            # heading sweeps monotonically instead of dithering.
            if self._turn_sign == 0:
                self._turn_sign = 1 if heading_error > 0 else -1
            desired = TURN_LEFT if self._turn_sign > 0 else TURN_RIGHT
        for candidate in _fallback_chain(desired, heading_error):
            if _action_acceptable(env, worst, candidate):
                return candidate
        return HOVER  # lands on the previously vetted coast point

    def _pick_goal(self, env, low, reachable, dist_f, dist_r, fmask):
        """Pick the vantage cell to spin at: among the near-minimal
        frontier-distance candidates, prefer the one with line of sight
        (on the observed map) to the most unknown cells behind live
        frontiers; a blind vantage wastes a whole spin."""
        cand = np.argwhere(reachable)
        order = np.lexsort((cand[:, 1], cand[:, 0],
                            dist_r[cand[:, 0], cand[:, 1]],
                            dist_f[cand[:, 0], cand[:, 1]]))
        cand = cand[order]
        fallback = (int(cand[0, 0]), int(cand[0, 1]))
        best_f = dist_f[fallback]
        max_range = env.config.sensor.max_range_m - 0.5
        pool = cand[dist_f[cand[:, 0], cand[:, 1]] <= best_f + 6][:48]

        members = np.argwhere(fmask)
        if len(members) > 24:
            robot = cand[dist_r[cand[:, 0], cand[:, 1]] == 0]
            anchor = robot[0] if len(robot) else cand[0]
            near = np.abs(members - anchor).sum(axis=1).argsort()[:24]
            members = members[near]
        targets = [_unknown_behind(low, (int(m[0]), int(m[1]))) for m in members]

        best = fallback
        best_seen = 0
        for r, c in pool:
            p0 = low.center_of(int(r), int(c))
            seen = 0
            for target in targets:
                p1 = low.center_of(*target)
                if (math.hypot(p1[0] - p0[0], p1[1] - p0[1]) <= max_range
                        and _los_clear(low, p0, p1)):
                    seen += 1
            if seen > best_seen:
                best = (int(r), int(c))
                best_seen = seen
        return best

    def _spin_failed(self, low, goal, dist_f, fmask) -> None:
        """A full spin at ``goal`` resolved nothing: avoid this vantage.
        Only spins that actually had line of sight to the target count
        against the frontier itself; a blind vantage says nothing about
        whether the frontier can be resolved from elsewhere."""
        self._bad_vantage[goal] = self._step
        towards = _descent_path(dist_f, goal, fmask)
        member = towards[-1] if towards else goal
        target = _unknown_behind(low, member)
        if _los_clear(low, low.center_of(*goal), low.center_of(*target)):
            self._fail_counts[member] = self._fail_counts.get(member, 0) + 1
            if self._fail_counts[member] >= 2:
                for cell in np.argwhere(fmask & _dilate8(_cell_mask(fmask.shape, member))):
                    self._blacklist.add((int(cell[0]), int(cell[1])))
                del self._fail_counts[member]
        self._goal = None
        self._waypoint = None
        self._face_count = 0

    def _turn_toward(self, env, worst, heading_error: float) -> int:
        # Deadband wider than half a turn increment, so alternating
        # left/right turns cannot ring around zero forever.
        if abs(heading_error) <= 0.12:
            return HOVER
        order = ((TURN_LEFT, TURN_RIGHT) if heading_error > 0
                 else (TURN_RIGHT, TURN_LEFT))
        for candidate in (*order, HOVER):
            if _action_acceptable(env, worst, candidate):
                return candidate
        return HOVER

    def close(self) -> None:
        pass


def _action_acceptable(env, worst: Grid2D, action: int) -> bool:
    """Worst-case mirror of the environment's collision predicate.

    Actions that do not translate the vehicle are always acceptable (the
    current pose is collision-free by induction); translating actions must
    clear both the commanded pose and its deceleration tail on the
    worst-case map, where unknown reads as occupied.
    """
    from .dynamics import apply_action, check_collision
    table = env.motion_table
    m1, _ = table.entry(action, env.last_action)
    m2, _ = table.entry(HOVER, action)
    if m1 == 0.0 and m2 == 0.0:
        return True
    radius = env.config.robot_radius_m
    new_pose = apply_action(env.pose, action, env.last_action, table)
    coast = apply_action(new_pose, HOVER, action, table)
    return not (check_collision(new_pose, worst, radius)
                or check_collision(coast, worst, radius))


def _fallback_chain(desired: int, heading_error: float) -> tuple[int, ...]:
    """Degrade a desired action toward gentler ones, turning toward the
    target side first."""
    if heading_error >= 0:
        turns = (TURN_LEFT, TURN_RIGHT)
        fwd_turns = (FORWARD_LEFT, FORWARD_RIGHT)
    else:
        turns = (TURN_RIGHT, TURN_LEFT)
        fwd_turns = (FORWARD_RIGHT, FORWARD_LEFT)
    if desired == FORWARD:
        return (FORWARD, *fwd_turns, *turns, HOVER)
    if desired in (FORWARD_LEFT, FORWARD_RIGHT):
        return (desired, turns[0], FORWARD, turns[1], HOVER)
    if desired in (TURN_LEFT, TURN_RIGHT):
        return (desired, turns[1], HOVER)
    return (HOVER,)


def _frontier_mask(grid: Grid2D) -> np.ndarray:
    free = grid.cells == FREE
    unknown = grid.cells == UNKNOWN
    near = np.zeros_like(free)
    near[1:, :] |= unknown[:-1, :]
    near[:-1, :] |= unknown[1:, :]
    near[:, 1:] |= unknown[:, :-1]
    near[:, :-1] |= unknown[:, 1:]
    return free & near


def _dilate8(mask: np.ndarray) -> np.ndarray:
    from scipy import ndimage
    return ndimage.binary_dilation(mask, structure=np.ones((3, 3)))


def _cell_mask(shape, cell) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[cell] = True
    return mask


def _unknown_behind(grid: Grid2D, member) -> tuple[int, int]:
    """The unknown 4-neighbour a frontier member borders (the member
    itself if, by a race with map updates, none remains)."""
    for dr, dc in _N4:
        nr, nc = member[0] + dr, member[1] + dc
        if grid.in_bounds(nr, nc) and grid.cells[nr, nc] == UNKNOWN:
            return (nr, nc)
    return tuple(member)


def _los_clear(grid: Grid2D, p0, p1, step_m: float = 0.05) -> bool:
    """Straight-line visibility on the observed map: blocked only by
    observed-occupied cells (unknown is transparent)."""
    dist = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    n = max(1, int(math.ceil(dist / step_m)))
    for i in range(1, n):
        x = p0[0] + (p1[0] - p0[0]) * i / n
        y = p0[1] + (p1[1] - p0[1]) * i / n
        cell = grid.cell_of(x, y)
        if grid.in_bounds(*cell) and grid.cells[cell] == OCCUPIED:
            return False
    return True


def _bfs_distances_multi(traversable: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Multi-source uniform-cost distances; seeds must lie on traversable
    cells. -1 marks unreachable cells."""
    h, w = traversable.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    queue = deque()
    for r, c in seeds:
        if traversable[r, c] and dist[r, c] < 0:
            dist[r, c] = 0
            queue.append((int(r), int(c)))
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in _N4:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and traversable[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist


def _descent_path(dist: np.ndarray, start, sources: np.ndarray):
    """Follow a distance field downhill from ``start`` to a source cell;
    returns the cell sequence including both ends, or None."""
    h, w = dist.shape
    cur = start
    if dist[cur] < 0:
        return None
    path = [cur]
    while not sources[cur]:
        d = dist[cur]
        nxt = None
        for dr, dc in _N4:
            nr, nc = cur[0] + dr, cur[1] + dc
            if 0 <= nr < h and 0 <= nc < w and 0 <= dist[nr, nc] < d:
                nxt = (nr, nc)
                break
        if nxt is None:
            return None
        cur = nxt
        path.append(cur)
        if len(path) > h * w:
            return None
    return path


class FrontierPredPolicy(FrontierPolicy):
    """Frontier goals on the observed map, termination on predicted
    coverage (the episode handles the coverage source)."""

    coverage_source = "predicted"


class GreedyPredPolicy:
    """Scripted stand-in exercising the observation/reward seam."""

    coverage_source = "predicted"

    def next_action(self, env) -> int:
        return plan_greedy_pred(env.last_observation, env.motion_table,
                                env.config.sensor)

    def close(self) -> None:
        pass


class ExternalPolicy:
    """Routes observations to an external process or socket."""

    coverage_source = "predicted"

    def __init__(self, client: ExternalPolicyClient):
        self.client = client

    def next_action(self, env) -> int:
        return plan_external(env.last_observation, self.client)

    def close(self) -> None:
        self.client.close()


def make_policy(name: str, timeout_s: float = 2.0):
    """Build a policy from a CLI-style name: ``frontier``, ``frontier_pred``,
    ``greedy_pred``, ``external:<command>`` or ``tcp:<host>:<port>``."""
    if name == "frontier":
        return FrontierPolicy()
    if name == "frontier_pred":
        return FrontierPredPolicy()
    if name == "greedy_pred":
        return GreedyPredPolicy()
    if name.startswith(("external:", "tcp:")):
        return ExternalPolicy(ExternalPolicyClient(make_endpoint(name), timeout_s))
    raise ValueError(f"unknown planner: {name!r}")
