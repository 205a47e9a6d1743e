"""Scripted pedestrian controllers for headless runs and property suites.

Three archetypes: a cautious signal-follower, a risky straight-line
crosser, and a wandering explorer. Policies observe the world through
Observation, which deliberately carries only what a human player could
see on screen — positions, speeds, headings, indicator lights, walk
signals — and never a vehicle's behavior label.

Policy randomness comes from a dedicated generator seeded independently
of the world RNG, so a policy can never perturb traffic by consuming
draws, and vice versa.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .geometry import Rect, Vec2
from .scenario import ScenarioConfig, build_geometry
from .world import GAIT_IDLE, InputCommand, WorldState, to_ticks

POLICY_KINDS = ("cautious", "risky", "explorer")

#: clockwise corner cycle (matching the scoring loop around the block)
_NEXT_CORNER = {"NE": "SE", "SE": "SW", "SW": "NW", "NW": "NE"}

#: arm of the crosswalk connecting a corner to the next clockwise corner
_CROSSING_ARM = {"NE": "E", "SE": "S", "SW": "W", "NW": "N"}

_ARRIVE_M = 0.25


@dataclass(frozen=True, slots=True)
class VehicleObs:
    vehicle_id: int
    x: float
    y: float
    heading: tuple[float, float]
    speed_mps: float
    indicator_on: bool


@dataclass(frozen=True, slots=True)
class Observation:
    """Player-visible world projection. No behavior labels, by contract."""

    position: Vec2
    heading: tuple[float, float]
    speed_mps: float
    gait: str
    surface: str
    walk_signals: dict[str, bool]
    vehicles: tuple[VehicleObs, ...]
    score: int
    time_remaining_s: float


def make_observation(world: WorldState) -> Observation:
    ped = world.pedestrian
    vehicles = []
    for v in world.vehicles:
        x, y, ux, uy = world.geom.routes[v.route_id].line.pose_at(v.s_m)
        vehicles.append(VehicleObs(v.vehicle_id, x, y, (ux, uy), v.speed_mps, v.indicator_on))
    remaining = max(0.0, (world.duration_ticks - world.clock.tick) / 60.0)
    return Observation(
        position=ped.position,
        heading=ped.heading,
        speed_mps=ped.speed_mps,
        gait=ped.gait,
        surface=ped.surface,
        walk_signals={arm: world.signals.walk(arm) for arm in ("N", "S", "E", "W")},
        vehicles=tuple(vehicles),
        score=world.score,
        time_remaining_s=remaining,
    )


@dataclass(slots=True)
class PolicyState:
    kind: str
    rng: random.Random
    config: ScenarioConfig
    zones: dict[str, Rect]
    crosswalks: dict[str, Rect]
    bounds: Rect
    corner: str  # corner the policy is working from
    stage: str = "stage"  # cautious: stage -> wait -> cross
    waypoint: Vec2 | None = None  # explorer target
    prev_walk: bool = False
    ticks_since_flip: int | None = None


def make_policy(kind: str, policy_seed: int, config: ScenarioConfig) -> PolicyState:
    if kind not in POLICY_KINDS:
        raise ValueError(f"unknown policy {kind!r}; expected one of {', '.join(POLICY_KINDS)}")
    geom = build_geometry(config.map)
    return PolicyState(
        kind=kind,
        rng=random.Random(policy_seed),
        config=config,
        zones=dict(geom.zones),
        crosswalks=dict(geom.crosswalks),
        bounds=geom.bounds,
        corner=config.start_corner,
    )


def policy_step(state: PolicyState, obs: Observation) -> tuple[PolicyState, InputCommand]:
    """One decision tick. Deterministic in (state, obs)."""
    if state.kind == "cautious":
        cmd = _cautious_step(state, obs)
    elif state.kind == "risky":
        cmd = _risky_step(state, obs)
    else:
        cmd = _explorer_step(state, obs)
    return state, cmd


# --------------------------------------------------------------------------
# cautious


def _cautious_step(state: PolicyState, obs: Observation) -> InputCommand:
    """Stage at the crosswalk, wait for a fresh walk signal with no
    approaching threat, then walk straight across; advance clockwise."""
    arm = _CROSSING_ARM[state.corner]
    entry, exit_ = _crossing_points(state, state.corner)
    walk = obs.walk_signals[arm]

    # walk-signal edge detector (policies cannot see phase timers)
    if walk and not state.prev_walk:
        state.ticks_since_flip = 0
    elif walk and state.ticks_since_flip is not None:
        state.ticks_since_flip += 1
    elif not walk:
        state.ticks_since_flip = None
    state.prev_walk = walk

    if state.stage == "stage":
        if obs.position.distance_to(entry) <= _ARRIVE_M:
            state.stage = "wait"
            return InputCommand()
        return _walk_toward(obs.position, entry)

    if state.stage == "wait":
        if (
            walk
            and state.ticks_since_flip is not None
            and state.ticks_since_flip <= _start_window_ticks(state, entry, exit_)
            and not _threat_present(state, obs, arm)
        ):
            state.stage = "cross"
            return _walk_toward(obs.position, exit_)
        return InputCommand()

    # crossing: commit to the far side, then rotate to the next corner
    if obs.position.distance_to(exit_) <= _ARRIVE_M:
        state.corner = _NEXT_CORNER[state.corner]
        state.stage = "stage"
        return InputCommand()
    return _walk_toward(obs.position, exit_)


def _crossing_points(state: PolicyState, corner: str) -> tuple[Vec2, Vec2]:
    """Staging point (near side) and landing point (far side) of the
    crosswalk that leads clockwise out of corner, half a metre onto the
    pavement so arrival also means zone re-entry."""
    arm = _CROSSING_ARM[corner]
    rect = state.crosswalks[arm]
    margin = 0.5
    cx, cy = (rect.x0 + rect.x1) / 2.0, (rect.y0 + rect.y1) / 2.0
    if arm in ("N", "S"):  # crossing runs east-west
        near_e = Vec2(rect.x1 + margin, cy)
        near_w = Vec2(rect.x0 - margin, cy)
        return (near_e, near_w) if "E" in corner else (near_w, near_e)
    near_n = Vec2(cx, rect.y1 + margin)
    near_s = Vec2(cx, rect.y0 - margin)
    return (near_n, near_s) if "N" in corner else (near_s, near_n)


def _start_window_ticks(state: PolicyState, entry: Vec2, exit_: Vec2) -> int:
    """Only begin crossing early enough in the green to finish with margin."""
    cfg = state.config
    crossing_s = entry.distance_to(exit_) / cfg.walk_speed_mps
    window_s = cfg.signal_green_s - crossing_s - 1.0
    return max(0, to_ticks(window_s))


def _threat_present(state: PolicyState, obs: Observation, arm: str) -> bool:
    """A moving vehicle is a threat when its forward path enters the
    crosswalk closer than its stopping-infeasible distance
    (v^2/(2*decel_max) + buffer) plus two seconds of travel margin.

    Vehicles merely passing beside the crosswalk (parallel green-light
    traffic) never enter it, so aiming at the rectangle rather than
    proximity to it is what keeps the policy deadlock-free.
    """
    cfg = state.config
    rect = state.crosswalks[arm]
    pad = cfg.pedestrian_radius_m
    inflated = Rect(rect.x0 - pad, rect.y0 - pad, rect.x1 + pad, rect.y1 + pad)
    for v in obs.vehicles:
        if v.speed_mps <= 0.1:
            continue  # held vehicles are not approaching
        t_enter = _ray_rect_entry(v.x, v.y, v.heading[0], v.heading[1], inflated)
        if t_enter is None:
            continue
        threat = (
            v.speed_mps * v.speed_mps / (2.0 * cfg.decel_max_mps2)
            + cfg.buffer_m
            + 2.0 * v.speed_mps
        )
        if t_enter < threat:
            return True
    return False


def _ray_rect_entry(ox: float, oy: float, dx: float, dy: float, rect: Rect) -> float | None:
    """Distance along the ray to the rect (0 if inside), None on a miss."""
    t0, t1 = 0.0, float("inf")
    for o, d, lo, hi in ((ox, dx, rect.x0, rect.x1), (oy, dy, rect.y0, rect.y1)):
        if abs(d) < 1e-12:
            if o < lo or o > hi:
                return None
            continue
        ta, tb = (lo - o) / d, (hi - o) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return t0


# --------------------------------------------------------------------------
# risky


def _risky_step(state: PolicyState, obs: Observation) -> InputCommand:
    """Sprint for the next clockwise corner zone; signals and traffic are
    someone else's problem."""
    target = state.zones[_NEXT_CORNER[state.corner]].center()
    if obs.position.distance_to(target) <= _ARRIVE_M:
        state.corner = _NEXT_CORNER[state.corner]
        target = state.zones[_NEXT_CORNER[state.corner]].center()
    return _run_toward(obs.position, target)


# --------------------------------------------------------------------------
# explorer


def _explorer_step(state: PolicyState, obs: Observation) -> InputCommand:
    """Wander: walk to a uniformly random point, re-roll on arrival."""
    if state.waypoint is None or obs.position.distance_to(state.waypoint) <= _ARRIVE_M:
        state.waypoint = Vec2(
            state.rng.uniform(state.bounds.x0, state.bounds.x1),
            state.rng.uniform(state.bounds.y0, state.bounds.y1),
        )
    return _walk_toward(obs.position, state.waypoint)


# --------------------------------------------------------------------------


def _walk_toward(position: Vec2, target: Vec2) -> InputCommand:
    return InputCommand(move_x=target.x - position.x, move_y=target.y - position.y, run=False)


def _run_toward(position: Vec2, target: Vec2) -> InputCommand:
    return InputCommand(move_x=target.x - position.x, move_y=target.y - position.y, run=True)
