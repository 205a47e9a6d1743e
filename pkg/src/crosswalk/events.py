"""Engine event types.

Every event carries the tick it occurred at. Events serialize to flat dicts
(the telemetry record payloads) via ``to_payload`` and are the unit both the
rubric pipeline and replay verification operate on.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

END_REASON_HIT = "hit"
END_REASON_TIMER = "timer_expired"


@dataclass(frozen=True, slots=True)
class SimEvent:
    tick: int

    #: snake_case discriminator, overridden per subclass
    type_name = "event"

    def to_payload(self) -> dict:
        payload: dict = {"type": self.type_name, "tick": self.tick}
        for f in fields(self):
            if f.name != "tick":
                payload[f.name] = getattr(self, f.name)
        return payload


@dataclass(frozen=True, slots=True)
class ZoneEntered(SimEvent):
    corner: str

    type_name = "zone_entered"


@dataclass(frozen=True, slots=True)
class ScoreAwarded(SimEvent):
    points: int
    total: int

    type_name = "score_awarded"


@dataclass(frozen=True, slots=True)
class VehicleSpawned(SimEvent):
    id: int
    behavior: str
    route_id: str

    type_name = "vehicle_spawned"


@dataclass(frozen=True, slots=True)
class IndicatorChanged(SimEvent):
    id: int
    on: bool

    type_name = "indicator_changed"


@dataclass(frozen=True, slots=True)
class SurfaceChanged(SimEvent):
    # surface labels: "pavement:NE", "crosswalk:N", "road"
    from_surface: str
    to_surface: str

    type_name = "surface_changed"

    def to_payload(self) -> dict:
        return {
            "type": self.type_name,
            "tick": self.tick,
            "from": self.from_surface,
            "to": self.to_surface,
        }


@dataclass(frozen=True, slots=True)
class GaitChanged(SimEvent):
    gait: str

    type_name = "gait_changed"


@dataclass(frozen=True, slots=True)
class EmergencyBrake(SimEvent):
    vehicle_id: int

    type_name = "emergency_brake"


@dataclass(frozen=True, slots=True)
class Collision(SimEvent):
    vehicle_id: int

    type_name = "collision"


@dataclass(frozen=True, slots=True)
class SignalPhaseChanged(SimEvent):
    phase: str

    type_name = "signal_phase_changed"


@dataclass(frozen=True, slots=True)
class SessionEnded(SimEvent):
    reason: str  # END_REASON_HIT | END_REASON_TIMER
    final_score: int

    type_name = "session_ended"
