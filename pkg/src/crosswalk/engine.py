"""Simulation engine: a fixed-order, fixed-timestep world update.

step() is the only way the world changes. Each tick runs, in order:
signal update, vehicle spawning, pedestrian kinematics, vehicle agents,
indicator updates, collision check, zone scoring, and the session timer.
The order is part of the engine contract — reordering would change replay
output — so keep it in sync with the numbered sections of step().

Everything here is a pure function of (world, input) in the value sense:
the world object is mutated in place for speed, but two worlds with equal
state fed equal inputs produce equal state and equal events, bit for bit.
"""

from __future__ import annotations

import math
import random

from . import events as ev
from .geometry import Vec2, disc_overlaps_oriented_rect, normalize_direction
from .scenario import Route, ScenarioConfig, ScenarioValidationError, build_geometry, validate
from .world import (
    BEHAVIOR_AV,
    BEHAVIOR_NON_YIELDING,
    BEHAVIOR_YIELDING,
    DT,
    GAIT_IDLE,
    GAIT_RUN,
    GAIT_WALK,
    MODE_BRAKING,
    MODE_CRUISE,
    MODE_STOPPED,
    STATUS_ENDED,
    InputCommand,
    PedestrianState,
    SignalController,
    SimClock,
    VehicleState,
    WorldState,
    to_ticks,
)

#: slack when testing whether a stopped vehicle is still "before" its stop
#: line — discrete braking may creep a couple of millimetres past the target
_LINE_EPS_M = 0.05

#: below this, a vehicle in a stopping maneuver is at rest; needs-based
#: braking otherwise decays speed asymptotically and never exactly stops
_REST_EPS_MPS = 1e-3


def init_world(config: ScenarioConfig, seed: int) -> WorldState:
    """Build the starting world for a validated config and a seed."""
    violations = validate(config)
    if violations:
        raise ScenarioValidationError(violations)
    geom = build_geometry(config.map)
    start_zone = geom.zones[config.start_corner]
    start = start_zone.center()
    heading = normalize_direction(-start.x, -start.y)  # face the intersection
    world = WorldState(
        config=config,
        geom=geom,
        rng=random.Random(seed),
        clock=SimClock(tick=0),
        pedestrian=PedestrianState(
            position=start,
            heading=heading if heading != (0.0, 0.0) else (0.0, -1.0),
            surface=geom.surface_at(start),
        ),
        signals=SignalController(
            green_ticks=to_ticks(config.signal_green_s),
            all_red_ticks=to_ticks(config.signal_all_red_s),
        ),
        duration_ticks=to_ticks(config.duration_s),
    )
    _schedule_next_spawn(world)
    return world


def step(world: WorldState, input_cmd: InputCommand) -> tuple[WorldState, list[ev.SimEvent]]:
    """Advance one tick. Ended worlds are absorbing: no mutation, no events."""
    if world.status == STATUS_ENDED:
        return world, []

    world.clock.tick += 1
    tick = world.clock.tick
    out: list[ev.SimEvent] = []

    # (1) signals
    if world.signals.advance():
        out.append(ev.SignalPhaseChanged(tick, world.signals.phase))

    # (2) vehicle spawning
    spawned = spawn_update(world)
    if spawned is not None:
        out.append(ev.VehicleSpawned(tick, spawned.vehicle_id, spawned.behavior, spawned.route_id))

    # (3) pedestrian
    out.extend(_pedestrian_update(world, input_cmd))

    # (4) vehicle agents
    for vehicle in world.vehicles:
        out.extend(update_vehicle(world, vehicle, DT))
    world.vehicles = [
        v for v in world.vehicles
        if v.rear_s(world.config.vehicle_length_m) <= world.geom.routes[v.route_id].line.total_length
    ]

    # (5) indicators
    for vehicle in world.vehicles:
        changed = update_indicator(world, vehicle)
        if changed is not None:
            out.append(changed)

    # (6) collision — ends the session immediately; scoring and the timer
    # never see this tick, so final_score is the score at the moment of impact
    hit = detect_any_collision(world)
    if hit is not None:
        out.append(ev.Collision(tick, hit.vehicle_id))
        out.append(ev.SessionEnded(tick, ev.END_REASON_HIT, world.score))
        world.status = STATUS_ENDED
        world.end_reason = ev.END_REASON_HIT
        return world, out

    # (7) corner zones and score
    out.extend(zone_update(world))

    # (8) timer
    if tick >= world.duration_ticks:
        out.append(ev.SessionEnded(tick, ev.END_REASON_TIMER, world.score))
        world.status = STATUS_ENDED
        world.end_reason = ev.END_REASON_TIMER

    return world, out


# --------------------------------------------------------------------------
# pedestrian


def apply_pedestrian_input(
    ped: PedestrianState, input_cmd: InputCommand, config: ScenarioConfig, world: WorldState
) -> None:
    """Kinematic move: velocity = direction x gait speed, clamped to bounds."""
    mx, my = input_cmd.normalized()
    if mx == 0.0 and my == 0.0:
        ped.gait = GAIT_IDLE
        ped.speed_mps = 0.0
        return
    speed = config.run_speed_mps if input_cmd.run else config.walk_speed_mps
    bounds = world.geom.bounds
    x = min(max(ped.position.x + mx * speed * DT, bounds.x0), bounds.x1)
    y = min(max(ped.position.y + my * speed * DT, bounds.y0), bounds.y1)
    ped.position = Vec2(x, y)
    ped.heading = (mx, my)
    ped.speed_mps = speed
    ped.gait = GAIT_RUN if input_cmd.run else GAIT_WALK


def _pedestrian_update(world: WorldState, input_cmd: InputCommand) -> list[ev.SimEvent]:
    ped = world.pedestrian
    gait_before = ped.gait
    surface_before = ped.surface
    apply_pedestrian_input(ped, input_cmd, world.config, world)
    ped.surface = world.geom.surface_at(ped.position)
    out: list[ev.SimEvent] = []
    if ped.surface != surface_before:
        out.append(ev.SurfaceChanged(world.clock.tick, surface_before, ped.surface))
    if ped.gait != gait_before:
        out.append(ev.GaitChanged(world.clock.tick, ped.gait))
    return out


# --------------------------------------------------------------------------
# vehicles


def stopping_feasible(speed_mps: float, gap_m: float, decel_mps2: float, buffer_m: float) -> bool:
    """Can a vehicle at speed stop within gap, leaving buffer to spare?"""
    return gap_m >= speed_mps * speed_mps / (2.0 * decel_mps2) + buffer_m


def pedestrian_conflict_gap(
    vehicle: VehicleState, route: Route, ped: PedestrianState, config: ScenarioConfig
) -> float | None:
    """Longitudinal gap from the vehicle front to the pedestrian's nearest
    edge, if the pedestrian stands in the vehicle's swept lane corridor
    ahead of it within lookahead. None means no conflict.
    """
    s_ped, lateral = route.line.project(ped.position)
    half_corridor = route_corridor_halfwidth(config)
    if lateral > half_corridor:
        return None
    front = vehicle.front_s(config.vehicle_length_m)
    gap = (s_ped - config.pedestrian_radius_m) - front
    if gap < 0.0 or gap > config.lookahead_m:
        return None
    return gap


def route_corridor_halfwidth(config: ScenarioConfig) -> float:
    """Lane half-width plus the pedestrian's radius: the lateral band a
    pedestrian must clear for a vehicle to pass without yielding."""
    return config.map.road_half_width_m / 2.0 + config.pedestrian_radius_m


def update_vehicle(world: WorldState, vehicle: VehicleState, dt_s: float) -> list[ev.SimEvent]:
    """One tick of the vehicle agent: pick the strongest active braking
    demand (pedestrian conflict, red signal, lead vehicle), else cruise."""
    cfg = world.config
    route = world.geom.routes[vehicle.route_id]
    v = vehicle.speed_mps
    front = vehicle.front_s(cfg.vehicle_length_m)

    demand = 0.0  # requested deceleration, m/s^2
    holding = False  # a trigger pins the vehicle in place even at speed 0
    emergency = False

    # pedestrian conflict: yield behaviors brake whenever a conflict exists,
    # comfortably if that still stops in time, flat-out otherwise
    if vehicle.behavior != BEHAVIOR_NON_YIELDING:
        gap = pedestrian_conflict_gap(vehicle, route, world.pedestrian, cfg)
        if gap is not None:
            holding = True
            if v > 0.0:
                if stopping_feasible(v, gap, cfg.decel_comfort_mps2, cfg.buffer_m):
                    demand = max(demand, cfg.decel_comfort_mps2)
                else:
                    demand = max(demand, cfg.decel_max_mps2)
                    emergency = True

    # red signal: brake with exactly the deceleration that stops at the
    # line, arming once that demand reaches comfortable (any sooner is
    # needless, any later needs more than comfort). A vehicle already
    # braking stays armed below comfort so it settles smoothly at the
    # line; one so close that stopping needs more than decel_max is
    # committed and runs through.
    if not world.signals.vehicle_go(route.axis):
        line_gap = route.s_stop_m - front
        if v <= 0.0:
            if -_LINE_EPS_M < line_gap <= cfg.headway_m:
                holding = True  # parked at the line, waiting out the red
        elif line_gap > 0.0:
            needed = v * v / (2.0 * line_gap)
            armed = needed >= cfg.decel_comfort_mps2 or vehicle.mode != MODE_CRUISE
            if armed and needed <= cfg.decel_max_mps2:
                holding = True
                demand = max(demand, needed)

    # lead vehicle: hold a minimal same-route gap (not a traffic model)
    lead = _lead_vehicle(world, vehicle)
    if lead is not None:
        stop_at = lead.rear_s(cfg.vehicle_length_m) - cfg.headway_m
        lead_gap = stop_at - front
        if lead_gap <= 0.0:
            holding = True
            if v > 0.0:
                demand = max(demand, cfg.decel_max_mps2)
        elif v > 0.0:
            needed = v * v / (2.0 * lead_gap)
            if needed >= cfg.decel_comfort_mps2:
                holding = True
                demand = max(demand, min(needed, cfg.decel_max_mps2))

    out: list[ev.SimEvent] = []
    if emergency and not vehicle.emergency:
        out.append(ev.EmergencyBrake(world.clock.tick, vehicle.vehicle_id))
    vehicle.emergency = emergency

    if demand > 0.0:
        new_v = max(0.0, v - demand * dt_s)
    elif holding:
        new_v = v  # pinned at rest (or coasting into the hold point)
    else:
        new_v = min(cfg.speed_limit_mps, v + cfg.accel_mps2 * dt_s)
    if (demand > 0.0 or holding) and new_v < _REST_EPS_MPS:
        new_v = 0.0

    # semi-implicit Euler: distance uses the updated speed, so discrete
    # braking never travels farther than the continuous v^2/(2a) envelope
    vehicle.s_m += new_v * dt_s
    vehicle.speed_mps = new_v
    if new_v <= 0.0 and holding:
        vehicle.mode = MODE_STOPPED
    elif demand > 0.0:
        vehicle.mode = MODE_BRAKING
    else:
        vehicle.mode = MODE_CRUISE
    return out


def _lead_vehicle(world: WorldState, vehicle: VehicleState) -> VehicleState | None:
    lead: VehicleState | None = None
    for other in world.vehicles:
        if other is vehicle or other.route_id != vehicle.route_id:
            continue
        if other.s_m > vehicle.s_m and (lead is None or other.s_m < lead.s_m):
            lead = other
    return lead


def update_indicator(world: WorldState, vehicle: VehicleState) -> ev.IndicatorChanged | None:
    """Green AV light: on exactly while an autonomous vehicle is within the
    configured radius of the pedestrian (center-to-center, strict <)."""
    cfg = world.config
    on = False
    if cfg.indicator_enabled and vehicle.behavior == BEHAVIOR_AV:
        x, y, _, _ = world.geom.routes[vehicle.route_id].line.pose_at(vehicle.s_m)
        dx = x - world.pedestrian.position.x
        dy = y - world.pedestrian.position.y
        on = math.hypot(dx, dy) < cfg.indicator_radius_m
    if on == vehicle.indicator_on:
        return None
    vehicle.indicator_on = on
    return ev.IndicatorChanged(world.clock.tick, vehicle.vehicle_id, on)


# --------------------------------------------------------------------------
# collision


def detect_collision(
    ped: PedestrianState, vehicle: VehicleState, route: Route, config: ScenarioConfig
) -> bool:
    """Closed-overlap test between the pedestrian disc and the vehicle's
    oriented rectangle at its current route pose."""
    x, y, ux, uy = route.line.pose_at(vehicle.s_m)
    half_len = config.vehicle_length_m / 2.0
    half_wid = config.vehicle_width_m / 2.0
    # cheap reject: beyond bounding radius + ped radius, no overlap possible
    reach = math.hypot(half_len, half_wid) + config.pedestrian_radius_m
    dx = ped.position.x - x
    dy = ped.position.y - y
    if dx * dx + dy * dy > reach * reach:
        return False
    return disc_overlaps_oriented_rect(
        ped.position.x, ped.position.y, config.pedestrian_radius_m,
        x, y, ux, uy, half_len, half_wid,
    )


def detect_any_collision(world: WorldState) -> VehicleState | None:
    for vehicle in world.vehicles:
        route = world.geom.routes[vehicle.route_id]
        if detect_collision(world.pedestrian, vehicle, route, world.config):
            return vehicle
    return None


# --------------------------------------------------------------------------
# zones & score


def zone_update(world: WorldState) -> list[ev.SimEvent]:
    """Corner-zone scoring: entering a different corner than the previous
    entry is worth 100 points; the first entry only seeds the memory."""
    zone = world.geom.zone_at(world.pedestrian.position)
    if zone == world.current_zone:
        return []
    world.current_zone = zone
    if zone is None:
        return []
    tick = world.clock.tick
    out: list[ev.SimEvent] = [ev.ZoneEntered(tick, zone)]
    if world.last_zone is not None and zone != world.last_zone:
        world.score += 100
        out.append(ev.ScoreAwarded(tick, 100, world.score))
    world.last_zone = zone
    return out


# --------------------------------------------------------------------------
# spawning


def spawn_update(world: WorldState) -> VehicleState | None:
    """Drive the seeded spawn schedule; at most one vehicle appears per tick.

    Draws happen when the schedule fires, placement may lag: a spawn that
    would overlap a same-route vehicle waits (FIFO) and retries next tick,
    so the RNG consumption order never depends on traffic.
    """
    cfg = world.config
    # fire the schedule into a single pending slot; while the slot is
    # occupied the next fire simply waits (it is already overdue and will
    # fire the tick after the slot frees)
    if world.pending_spawn is None and world.next_spawn_tick <= world.clock.tick:
        world.pending_spawn = _draw_spawn(world)
        _schedule_next_spawn(world)
    if world.pending_spawn is None:
        return None
    route_id, behavior = world.pending_spawn
    if _spawn_blocked(world, route_id):
        return None
    world.pending_spawn = None
    vehicle = VehicleState(
        vehicle_id=world.next_vehicle_id,
        route_id=route_id,
        behavior=behavior,
        s_m=cfg.vehicle_length_m / 2.0,  # rear flush with the route start
        speed_mps=cfg.speed_limit_mps,
    )
    world.next_vehicle_id += 1
    world.vehicles.append(vehicle)
    return vehicle


def _draw_spawn(world: WorldState) -> tuple[str, str]:
    cfg = world.config
    route_id = world.rng.choice(list(world.geom.routes))
    u_av = world.rng.random()
    u_yield = world.rng.random()
    if u_av < cfg.av_fraction:
        behavior = BEHAVIOR_AV
    elif u_yield < cfg.yielding_fraction:
        behavior = BEHAVIOR_YIELDING
    else:
        behavior = BEHAVIOR_NON_YIELDING
    return route_id, behavior


def _schedule_next_spawn(world: WorldState) -> None:
    cfg = world.config
    n_routes = len(world.geom.routes)
    # per-approach renewal processes with the configured mean, superposed:
    # one global exponential stream at n times the rate, routes drawn uniform
    mean_s = cfg.spawn_interval_mean_s / n_routes
    delay_s = world.rng.expovariate(1.0 / mean_s)
    world.next_spawn_tick = world.clock.tick + max(1, to_ticks(delay_s))


def _spawn_blocked(world: WorldState, route_id: str) -> bool:
    """Entry at the speed limit must leave room to stop behind existing
    traffic: vehicles cannot collide with each other, so a spawn that would
    be forced to interpenetrate the queue tail has to wait instead."""
    cfg = world.config
    v = cfg.speed_limit_mps
    entry_span = (
        cfg.vehicle_length_m + cfg.headway_m + v * v / (2.0 * cfg.decel_max_mps2)
    )
    for other in world.vehicles:
        if other.route_id == route_id and other.rear_s(cfg.vehicle_length_m) < entry_span:
            return True
    return False


def vehicle_pose(world: WorldState, vehicle: VehicleState) -> tuple[float, float, float, float]:
    """(x, y, ux, uy) of the vehicle center on its route."""
    return world.geom.routes[vehicle.route_id].line.pose_at(vehicle.s_m)
