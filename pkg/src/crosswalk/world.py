"""World state: everything the engine mutates, and nothing it computes.

All timing is integer ticks at 60 Hz. Durations configured in seconds are
converted once through to_ticks(); accumulating floats would let two
mathematically equal schedules drift apart, and bit-exact replay is a core
contract of this package.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .geometry import Vec2
from .scenario import ARM_CROSSES, MapGeometry, ScenarioConfig

DT = 1.0 / 60.0
TICKS_PER_SECOND = 60

GAIT_IDLE = "idle"
GAIT_WALK = "walk"
GAIT_RUN = "run"

BEHAVIOR_YIELDING = "yielding"
BEHAVIOR_NON_YIELDING = "non_yielding"
BEHAVIOR_AV = "autonomous_yielding"

MODE_CRUISE = "cruise"
MODE_BRAKING = "braking"
MODE_STOPPED = "stopped"

PHASE_NS_GREEN = "ns_green"
PHASE_EW_GREEN = "ew_green"
PHASE_ALL_RED = "all_red"

STATUS_RUNNING = "running"
STATUS_ENDED = "ended"


def to_ticks(seconds: float) -> int:
    """Seconds -> whole ticks (nearest; a 60 Hz schedule has no sub-tick events)."""
    return round(seconds * TICKS_PER_SECOND)


@dataclass(slots=True)
class SimClock:
    tick: int = 0

    @property
    def elapsed_s(self) -> float:
        return self.tick / TICKS_PER_SECOND


@dataclass(frozen=True, slots=True)
class InputCommand:
    """One tick of pedestrian intent.

    move is a direction only: any non-zero vector is normalized to unit
    length, so diagonal input is not faster than cardinal input and key
    repeat rates cannot modulate speed.
    """

    move_x: float = 0.0
    move_y: float = 0.0
    run: bool = False

    def normalized(self) -> tuple[float, float]:
        norm = (self.move_x * self.move_x + self.move_y * self.move_y) ** 0.5
        if norm <= 1e-12:
            return (0.0, 0.0)
        return (self.move_x / norm, self.move_y / norm)


IDLE_INPUT = InputCommand()


@dataclass(slots=True)
class PedestrianState:
    position: Vec2
    heading: tuple[float, float] = (0.0, -1.0)
    speed_mps: float = 0.0
    gait: str = GAIT_IDLE
    surface: str = "road"


@dataclass(slots=True)
class VehicleState:
    vehicle_id: int
    route_id: str
    behavior: str
    s_m: float  # arc position of the vehicle *center* along its route
    speed_mps: float
    mode: str = MODE_CRUISE
    indicator_on: bool = False
    emergency: bool = False

    def front_s(self, length_m: float) -> float:
        return self.s_m + length_m / 2.0

    def rear_s(self, length_m: float) -> float:
        return self.s_m - length_m / 2.0


@dataclass(slots=True)
class SignalController:
    """Fixed cycle NS-green, all-red, EW-green, all-red."""

    green_ticks: int
    all_red_ticks: int
    slot: int = 0  # 0 ns_green, 1 all_red, 2 ew_green, 3 all_red
    ticks_in_slot: int = 0

    @property
    def phase(self) -> str:
        return (PHASE_NS_GREEN, PHASE_ALL_RED, PHASE_EW_GREEN, PHASE_ALL_RED)[self.slot]

    @property
    def slot_ticks(self) -> int:
        return self.green_ticks if self.slot in (0, 2) else self.all_red_ticks

    def advance(self) -> bool:
        """Advance one tick; True when the phase label just changed."""
        self.ticks_in_slot += 1
        if self.ticks_in_slot < self.slot_ticks:
            return False
        before = self.phase
        self.slot = (self.slot + 1) % 4
        self.ticks_in_slot = 0
        return self.phase != before

    def vehicle_go(self, axis: str) -> bool:
        """Green for traffic on the given road axis ("NS" / "EW")."""
        if axis == "NS":
            return self.slot == 0
        return self.slot == 2

    def walk(self, arm: str) -> bool:
        """Walk indication for the crosswalk on the given arm.

        A crosswalk is walkable while the road it spans has its traffic
        held, i.e. during the cross street's green. All-red is clearance
        time: nobody walks.
        """
        road = ARM_CROSSES[arm]
        return self.vehicle_go("EW" if road == "NS" else "NS")


@dataclass(slots=True)
class WorldState:
    config: ScenarioConfig
    geom: MapGeometry
    rng: random.Random
    clock: SimClock
    pedestrian: PedestrianState
    signals: SignalController
    duration_ticks: int
    vehicles: list[VehicleState] = field(default_factory=list)
    next_vehicle_id: int = 1
    next_spawn_tick: int = 0
    pending_spawn: tuple[str, str] | None = None  # (route_id, behavior)
    score: int = 0
    last_zone: str | None = None
    current_zone: str | None = None
    status: str = STATUS_RUNNING
    end_reason: str | None = None

    @property
    def ended(self) -> bool:
        return self.status == STATUS_ENDED


def world_fingerprint(world: WorldState) -> tuple:
    """Every mutable bit of world as a comparable value.

    Two worlds that stepped through the same inputs must produce equal
    fingerprints - including RNG state, so a divergence shows up even
    before it affects anything visible.
    """
    ped = world.pedestrian
    return (
        world.clock.tick,
        (ped.position.x, ped.position.y, ped.heading, ped.speed_mps, ped.gait, ped.surface),
        tuple(
            (v.vehicle_id, v.route_id, v.behavior, v.s_m, v.speed_mps, v.mode, v.indicator_on, v.emergency)
            for v in world.vehicles
        ),
        (world.signals.slot, world.signals.ticks_in_slot),
        world.next_vehicle_id,
        world.next_spawn_tick,
        world.pending_spawn,
        world.score,
        world.last_zone,
        world.current_zone,
        world.status,
        world.end_reason,
        world.rng.getstate(),
    )


def world_digest(world: WorldState) -> str:
    """Short stable hash of the fingerprint, cheap enough to put in a log."""
    raw = repr(world_fingerprint(world)).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]
