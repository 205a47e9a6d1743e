"""Session telemetry: append-only logs, replay verification, and rubric
metrics.

A session log is UTF-8, one JSON object per line. The first line is the
session metadata (enough to re-run the session: config snapshot, seed,
engine version); every running tick then contributes one input record
followed by that tick's event records, strictly ordered by tick. The
format is deliberately flat and greppable — researchers should be able to
analyze a study with standard text tools.

Replay is the integrity check: re-simulating from the recorded config,
seed, and inputs must reproduce the recorded event stream bit for bit.
Any single edited record makes the streams diverge, and the first
mismatching tick is reported.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .engine import init_world, pedestrian_conflict_gap, step, stopping_feasible
from .scenario import (
    ARM_CROSSES,
    ScenarioConfig,
    ScenarioValidationError,
    config_from_dict,
    config_to_dict,
)
from .world import (
    GAIT_RUN,
    GAIT_WALK,
    PHASE_EW_GREEN,
    PHASE_NS_GREEN,
    InputCommand,
    TICKS_PER_SECOND,
    WorldState,
    world_digest,
)

OUTCOME_COMPLETED = "completed"
OUTCOME_ABORTED = "aborted"
OUTCOME_HIT = "hit"


class MalformedLogError(Exception):
    """Structurally broken log: bad JSON, missing meta, unordered ticks."""


class LogOrderError(Exception):
    """Append with a tick older than the newest record."""


class VersionMismatchError(Exception):
    """Log written by a different engine version; replay refused."""


@dataclass(frozen=True)
class SessionMeta:
    session_id: str
    scenario_id: int
    scenario_name: str
    seed: int
    policy: str  # "cautious" | "risky" | "explorer" | "human"
    started_at: str  # ISO-8601
    engine_version: str
    config: ScenarioConfig

    def to_record(self) -> dict:
        return {
            "kind": "meta",
            "session_id": self.session_id,
            "scenario_id": self.scenario_id,
            "scenario_name": self.scenario_name,
            "seed": self.seed,
            "policy": self.policy,
            "started_at": self.started_at,
            "engine_version": self.engine_version,
            "config": config_to_dict(self.config),
        }

    @staticmethod
    def from_record(rec: dict) -> "SessionMeta":
        try:
            return SessionMeta(
                session_id=rec["session_id"],
                scenario_id=rec["scenario_id"],
                scenario_name=rec["scenario_name"],
                seed=rec["seed"],
                policy=rec["policy"],
                started_at=rec["started_at"],
                engine_version=rec["engine_version"],
                config=config_from_dict(rec["config"]),
            )
        except (KeyError, TypeError) as exc:
            raise MalformedLogError(f"meta record missing field: {exc}") from exc


def _elapsed(tick: int) -> float:
    return round(tick / TICKS_PER_SECOND, 4)


def input_record(tick: int, cmd: InputCommand) -> dict:
    return {
        "tick": tick,
        "elapsed_s": _elapsed(tick),
        "kind": "input",
        "move_x": cmd.move_x,
        "move_y": cmd.move_y,
        "run": cmd.run,
    }


def event_record(tick: int, payload: dict) -> dict:
    """payload is SimEvent.to_payload(); tick is folded into record order."""
    rec = {"tick": tick, "elapsed_s": _elapsed(tick), "kind": "event"}
    rec.update((k, v) for k, v in payload.items() if k != "tick")
    return rec


def final_record(tick: int, world: WorldState) -> dict:
    """Terminal integrity trailer: a digest over the complete end state.

    Event comparison alone cannot catch an edited input whose effects die
    out before the next event; the digest pins the whole trajectory.
    """
    return {
        "tick": tick,
        "elapsed_s": _elapsed(tick),
        "kind": "meta",
        "final": True,
        "world_digest": world_digest(world),
    }


class TelemetryWriter:
    """One session's append-only log file.

    Appends enforce tick ordering. A storage error does not kill the
    session: the writer goes quiet and re-raises the first error on
    close(), as losing a participant's run to a full disk mid-session
    would be worse than a truncated log.
    """

    def __init__(self, path: str | Path, meta: SessionMeta):
        self.path = Path(path)
        self._last_tick = 0
        self._error: OSError | None = None
        self._file = None
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, "w", encoding="utf-8")
        except OSError as exc:
            self._error = exc
            return
        self._write(meta.to_record())

    def append(self, record: dict) -> None:
        tick = record.get("tick", self._last_tick)
        if tick < self._last_tick:
            raise LogOrderError(f"record tick {tick} precedes tick {self._last_tick}")
        self._last_tick = tick
        self._write(record)

    def _write(self, record: dict) -> None:
        if self._file is None or self._error is not None:
            return
        try:
            self._file.write(json.dumps(record, separators=(",", ":")) + "\n")
        except OSError as exc:
            self._error = exc

    def flush(self) -> None:
        if self._file is not None and self._error is None:
            try:
                self._file.flush()
            except OSError as exc:
                self._error = exc

    def close(self) -> None:
        if self._file is not None:
            try:
                self._file.flush()
                self._file.close()
            except OSError as exc:
                self._error = self._error or exc
            self._file = None
        if self._error is not None:
            exc, self._error = self._error, None
            raise exc


def read_log(path: str | Path) -> tuple[SessionMeta, list[dict]]:
    """Load and structurally validate a session log."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MalformedLogError("empty log file")
    records = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise MalformedLogError(f"line {i}: invalid record ({exc.msg})") from exc
    if not records or records[0].get("kind") != "meta":
        raise MalformedLogError("first record must be session meta")
    meta = SessionMeta.from_record(records[0])
    last = 0
    for i, rec in enumerate(records[1:], start=2):
        tick = rec.get("tick")
        if not isinstance(tick, int):
            raise MalformedLogError(f"line {i}: record without integer tick")
        if tick < last:
            raise MalformedLogError(f"line {i}: tick {tick} out of order (after {last})")
        last = tick
    return meta, records[1:]


# --------------------------------------------------------------------------
# crossings


@dataclass
class Crossing:
    start_tick: int
    end_tick: int
    start_pavement: str
    end_pavement: str | None
    outcome: str
    walk_signal_at_start: bool
    majority_gait: str  # "walk" | "run"
    emergency_brakes_during: int
    #: filled by replay enrichment when the log supports it
    min_vehicle_gap_at_start_m: float | None = None
    provoked: bool = False


def _walk_from_phase(phase: str, arm: str) -> bool:
    road = ARM_CROSSES[arm]
    green_needed = PHASE_EW_GREEN if road == "NS" else PHASE_NS_GREEN
    return phase == green_needed


def derive_crossings(records: list[dict]) -> list[Crossing]:
    """Fold the event stream into crossing attempts.

    An attempt opens when the pedestrian steps from pavement onto a
    crosswalk. It completes at the first zone entry on a different corner,
    aborts when the pedestrian is back on pavement without one (or the log
    ends mid-attempt), and ends as hit on a collision.
    """
    crossings: list[Crossing] = []
    phase = PHASE_NS_GREEN
    gait = "idle"
    last_tick = 0

    open_: Crossing | None = None
    gait_ticks: dict[str, int] | None = None
    gait_since: int = 0

    def account_gait(upto: int) -> None:
        nonlocal gait_since
        if gait_ticks is not None and upto > gait_since:
            gait_ticks[gait] = gait_ticks.get(gait, 0) + (upto - gait_since)
            gait_since = upto

    def close(tick: int, outcome: str, end_pavement: str | None) -> None:
        nonlocal open_, gait_ticks
        assert open_ is not None and gait_ticks is not None
        account_gait(tick)
        open_.end_tick = tick
        open_.outcome = outcome
        open_.end_pavement = end_pavement
        walked = gait_ticks.get(GAIT_WALK, 0)
        ran = gait_ticks.get(GAIT_RUN, 0)
        open_.majority_gait = GAIT_RUN if ran > walked else GAIT_WALK
        crossings.append(open_)
        open_, gait_ticks = None, None

    for rec in records:
        if rec.get("kind") != "event":
            continue
        tick = rec["tick"]
        last_tick = max(last_tick, tick)
        etype = rec.get("type")

        if etype == "signal_phase_changed":
            phase = rec["phase"]
        elif etype == "gait_changed":
            account_gait(tick)
            gait = rec["gait"]
        elif etype == "surface_changed":
            src, dst = rec["from"], rec["to"]
            if open_ is None and src.startswith("pavement:") and dst.startswith("crosswalk:"):
                arm = dst.split(":", 1)[1]
                open_ = Crossing(
                    start_tick=tick,
                    end_tick=tick,
                    start_pavement=src.split(":", 1)[1],
                    end_pavement=None,
                    outcome=OUTCOME_ABORTED,
                    walk_signal_at_start=_walk_from_phase(phase, arm),
                    majority_gait=GAIT_WALK,
                    emergency_brakes_during=0,
                )
                gait_ticks, gait_since = {}, tick
            elif open_ is not None and dst == f"pavement:{open_.start_pavement}":
                # back where it began: an abort. Reaching any *other* pavement
                # does not close the attempt — its zone-entry event follows
                # the surface event within the same tick.
                close(tick, OUTCOME_ABORTED, open_.start_pavement)
        elif etype == "zone_entered" and open_ is not None:
            if rec["corner"] != open_.start_pavement:
                close(tick, OUTCOME_COMPLETED, rec["corner"])
        elif etype == "emergency_brake" and open_ is not None:
            open_.emergency_brakes_during += 1
        elif etype == "collision" and open_ is not None:
            close(tick, OUTCOME_HIT, None)

    if open_ is not None:
        close(last_tick, OUTCOME_ABORTED, None)
    return crossings


# --------------------------------------------------------------------------
# rubric report


@dataclass(frozen=True)
class RubricReport:
    session_id: str
    scenario_id: int
    policy: str
    attempts: int
    safe_crossings: int
    provoked_tests: int
    walked: int
    ran: int
    collisions: int
    final_score: int
    duration_s: float

    def as_dict(self) -> dict:
        return asdict(self)


def compute_rubrics(meta: SessionMeta, records: list[dict]) -> RubricReport:
    """Crossing metrics for one session.

    attempts counts pavement-to-crosswalk transitions; a crossing is safe
    when it completed, began on a walk signal, and triggered no emergency
    braking. Provoked tests (deliberately stepping out where an oncoming
    vehicle cannot stop) need vehicle positions, which events alone do not
    carry — they are recovered by replaying the log when it is replayable,
    and reported as zero otherwise. The subjective-enjoyment rubric has no
    log-computable analogue and is intentionally absent.
    """
    crossings = derive_crossings(records)
    _enrich_via_replay(meta, records, crossings)

    completed = [c for c in crossings if c.outcome == OUTCOME_COMPLETED]
    safe = sum(
        1
        for c in completed
        if c.walk_signal_at_start and c.emergency_brakes_during == 0
    )
    collisions = sum(
        1 for r in records if r.get("kind") == "event" and r.get("type") == "collision"
    )
    final_score = 0
    duration_ticks = 0
    for rec in records:
        if rec.get("kind") != "event":
            duration_ticks = max(duration_ticks, rec.get("tick", 0) or 0)
            continue
        duration_ticks = max(duration_ticks, rec["tick"])
        if rec.get("type") == "session_ended":
            final_score = rec["final_score"]
        elif rec.get("type") == "score_awarded":
            final_score = max(final_score, rec["total"])

    return RubricReport(
        session_id=meta.session_id,
        scenario_id=meta.scenario_id,
        policy=meta.policy,
        attempts=len(crossings),
        safe_crossings=safe,
        provoked_tests=sum(1 for c in crossings if c.provoked),
        walked=sum(1 for c in completed if c.majority_gait == GAIT_WALK),
        ran=sum(1 for c in completed if c.majority_gait == GAIT_RUN),
        collisions=collisions,
        final_score=final_score,
        duration_s=round(duration_ticks / TICKS_PER_SECOND, 4),
    )


def _enrich_via_replay(meta: SessionMeta, records: list[dict], crossings: list[Crossing]) -> None:
    """Fill min_vehicle_gap_at_start_m and the provoked flag by replaying.

    Quietly skips logs that cannot be replayed (hand-assembled event
    fixtures, version drift): those keep gap None / provoked False.
    """
    if not crossings:
        return
    try:
        result = replay(meta, records, probe_ticks={c.start_tick for c in crossings})
    except (MalformedLogError, VersionMismatchError, ScenarioValidationError):
        return
    if not result.ok or result.world_by_tick is None:
        return
    starts = {c.start_tick: c for c in crossings}
    for tick, snapshot in result.world_by_tick.items():
        crossing = starts.get(tick)
        if crossing is None:
            continue
        crossing.min_vehicle_gap_at_start_m = snapshot[0]
        crossing.provoked = snapshot[1]


# --------------------------------------------------------------------------
# replay


@dataclass
class ReplayResult:
    ok: bool
    divergence_tick: int | None
    detail: str
    final_world: WorldState | None
    #: crossing enrichment probe: start tick -> (min conflict gap, provoked)
    world_by_tick: dict[int, tuple[float | None, bool]] | None = None


def replay(meta: SessionMeta, records: list[dict], probe_ticks: set[int] | None = None) -> ReplayResult:
    """Re-simulate from meta (config + seed) feeding the logged inputs and
    compare emitted events against logged events, tick by tick.

    probe_ticks defaults to the crossing start ticks found in the log, so
    rubric enrichment rides along for free.
    """
    if meta.engine_version != __version__:
        raise VersionMismatchError(
            f"log written by engine {meta.engine_version}, this is {__version__}"
        )

    inputs: dict[int, InputCommand] = {}
    logged_events: dict[int, list[dict]] = {}
    logged_digest: tuple[int, str] | None = None
    max_tick = 0
    for rec in records:
        kind = rec.get("kind")
        if kind == "input":
            try:
                inputs[rec["tick"]] = InputCommand(rec["move_x"], rec["move_y"], rec["run"])
            except (KeyError, TypeError) as exc:
                raise MalformedLogError(f"input record missing field: {exc}") from exc
            max_tick = max(max_tick, rec["tick"])
        elif kind == "event":
            logged_events.setdefault(rec["tick"], []).append(rec)
            max_tick = max(max_tick, rec["tick"])
        elif isinstance(rec.get("world_digest"), str):
            logged_digest = (rec.get("tick", 0), rec["world_digest"])

    if probe_ticks is None:
        probe_ticks = {c.start_tick for c in derive_crossings(records)}

    world = init_world(meta.config, meta.seed)
    probes: dict[int, tuple[float | None, bool]] = {}
    last_cmd = InputCommand()
    for tick in range(1, max_tick + 1):
        last_cmd = inputs.get(tick, last_cmd)
        world, events = step(world, last_cmd)
        fresh = [event_record(tick, e.to_payload()) for e in events]
        logged = logged_events.get(tick, [])
        if fresh != logged:
            return ReplayResult(
                ok=False,
                divergence_tick=tick,
                detail=_describe_divergence(tick, logged, fresh),
                final_world=world,
            )
        if tick in probe_ticks:
            probes[tick] = _conflict_probe(world)

    if logged_digest is not None and world_digest(world) != logged_digest[1]:
        return ReplayResult(
            ok=False,
            divergence_tick=logged_digest[0],
            detail=(
                f"tick {logged_digest[0]}: terminal state digest does not match "
                "the recorded inputs"
            ),
            final_world=world,
        )

    return ReplayResult(True, None, "replay matches", world, probes)


def _describe_divergence(tick: int, logged: list[dict], fresh: list[dict]) -> str:
    for a, b in zip(logged, fresh):
        if a != b:
            return f"tick {tick}: logged {a} != replayed {b}"
    if len(logged) > len(fresh):
        return f"tick {tick}: logged extra event {logged[len(fresh)]}"
    return f"tick {tick}: replay produced unlogged event {fresh[len(logged)]}"


def _conflict_probe(world: WorldState) -> tuple[float | None, bool]:
    """Min conflict gap over all vehicles whose corridor holds the
    pedestrian, and whether the nearest such vehicle cannot stop."""
    best: tuple[float, float] | None = None  # (gap, speed)
    for vehicle in world.vehicles:
        route = world.geom.routes[vehicle.route_id]
        gap = pedestrian_conflict_gap(vehicle, route, world.pedestrian, world.config)
        if gap is None:
            continue
        if best is None or gap < best[0]:
            best = (gap, vehicle.speed_mps)
    if best is None:
        return None, False
    gap, speed = best
    provoked = not stopping_feasible(
        speed, gap, world.config.decel_max_mps2, world.config.buffer_m
    )
    return gap, provoked
