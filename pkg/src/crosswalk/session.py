"""Authoritative real-time session service.

The state machine (menu -> running -> game over -> menu) lives in
SessionCore, which is deliberately IO-free: it consumes already-parsed
client messages and clock ticks, and returns the messages to send. The
WebSocket shell around it only pumps bytes and paces the 60 Hz loop, so
every protocol rule is unit-testable without a socket.

The server is authoritative: the only channel a client has into the
world is InputCommand. Snapshots are a projection of what a player may
see — vehicle behavior labels in particular never cross the wire.
"""

from __future__ import annotations

import asyncio
import json
import math
import secrets
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import PROTOCOL_VERSION, __version__
from .engine import init_world, step, vehicle_pose
from .scenario import (
    ScenarioConfig,
    ScenarioParseError,
    ScenarioValidationError,
    builtin_scenarios,
    config_to_dict,
    load_scenario,
)
from .telemetry import SessionMeta, TelemetryWriter, event_record, final_record, input_record
from .world import DT, InputCommand, WorldState, world_digest

PHASE_MENU = "menu"
PHASE_RUNNING = "running"
PHASE_GAME_OVER = "game_over"

#: outbound snapshot cadence: every 2nd tick (30 Hz), interpolated client-side
SNAPSHOT_EVERY = 2


class ProtocolClose(Exception):
    """Raised by the core when the connection must be dropped after the
    attached error message is delivered."""

    def __init__(self, error: dict):
        super().__init__(error.get("message", "protocol violation"))
        self.error = error


def _err(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


def _round3(value: float) -> float:
    return round(value, 3)


def serialize_snapshot(world: WorldState) -> dict:
    """Player-visible projection of a running world, floats at 3 decimals."""
    ped = world.pedestrian
    vehicles = []
    for v in world.vehicles:
        x, y, ux, uy = vehicle_pose(world, v)
        vehicles.append(
            {
                "id": v.vehicle_id,
                "x": _round3(x),
                "y": _round3(y),
                "heading": _round3(math.atan2(uy, ux)),
                "speed": _round3(v.speed_mps),
                "indicator_on": v.indicator_on,
            }
        )
    remaining = max(0.0, (world.duration_ticks - world.clock.tick) / 60.0)
    return {
        "type": "snapshot",
        "tick": world.clock.tick,
        "score": world.score,
        "time_remaining_s": _round3(remaining),
        "pedestrian": {
            "x": _round3(ped.position.x),
            "y": _round3(ped.position.y),
            "gait": ped.gait,
        },
        "vehicles": vehicles,
        "walk_signals": {arm: world.signals.walk(arm) for arm in ("N", "S", "E", "W")},
    }


def serialize_map(world: WorldState) -> dict:
    geom = world.geom
    return {
        "bounds": list(geom.bounds.as_tuple()),
        "road_half_width_m": geom.road_half_width_m,
        "zones": {corner: list(rect.as_tuple()) for corner, rect in geom.zones.items()},
        "crosswalks": {arm: list(rect.as_tuple()) for arm, rect in geom.crosswalks.items()},
        "routes": [
            {
                "id": route.route_id,
                "points": [[p.x, p.y] for p in route.line.points],
                "s_stop_m": route.s_stop_m,
            }
            for route in geom.routes.values()
        ],
    }


@dataclass(frozen=True)
class ScenarioCatalog:
    """Builtins plus any scenario files loaded from --scenario-dir."""

    custom: dict[str, ScenarioConfig]

    def listing(self) -> list[dict]:
        rows = [
            {"id": cfg.id, "name": cfg.name, "indicator": cfg.indicator_enabled}
            for cfg in builtin_scenarios()
        ]
        for key in sorted(self.custom):
            cfg = self.custom[key]
            rows.append({"id": key, "name": cfg.name, "indicator": cfg.indicator_enabled})
        return rows

    def resolve(self, ref: object) -> ScenarioConfig:
        if isinstance(ref, bool):
            raise KeyError(ref)
        if isinstance(ref, int):
            for cfg in builtin_scenarios():
                if cfg.id == ref:
                    return cfg
            raise KeyError(ref)
        if isinstance(ref, str):
            if ref in self.custom:
                return self.custom[ref]
            if ref.isdigit():
                return self.resolve(int(ref))
            raise KeyError(ref)
        raise KeyError(ref)


def load_scenario_dir(path: str | Path) -> dict[str, ScenarioConfig]:
    """Each *.scenario file becomes a catalog entry keyed by its stem."""
    out: dict[str, ScenarioConfig] = {}
    for file in sorted(Path(path).glob("*.scenario")):
        out[file.stem] = load_scenario(file.read_text(encoding="utf-8"))
    return out


class SessionCore:
    """Pure protocol + lifecycle machine for one connection."""

    def __init__(
        self,
        catalog: ScenarioCatalog,
        log_dir: str | Path,
        *,
        entropy: Callable[[], int] | None = None,
        now: Callable[[], str] | None = None,
        participant: str = "",
    ):
        self.catalog = catalog
        self.log_dir = Path(log_dir)
        self.entropy = entropy or (lambda: secrets.randbits(32))
        self.now = now or (lambda: datetime.now(timezone.utc).isoformat())
        self.phase = PHASE_MENU
        self.hello_done = False
        self.participant = participant
        self.world: WorldState | None = None
        self.writer: TelemetryWriter | None = None
        self.session_id: str | None = None
        self.last_seq = -1
        self.current_input = InputCommand()
        self.storage_error: str | None = None

    # -- message handling ---------------------------------------------------

    def handle_text(self, text: str) -> list[dict]:
        try:
            msg = json.loads(text)
        except json.JSONDecodeError:
            raise ProtocolClose(_err("bad-message", "frame is not valid JSON"))
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            raise ProtocolClose(_err("bad-message", "message needs a string 'type'"))
        return self.handle_message(msg)

    def handle_message(self, msg: dict) -> list[dict]:
        mtype = msg["type"]
        if not self.hello_done:
            if mtype != "hello":
                raise ProtocolClose(_err("expected-hello", "first message must be hello"))
            return self._on_hello(msg)
        if mtype == "hello":
            return [_err("wrong-phase", "already greeted")]
        if mtype == "start":
            if self.phase != PHASE_MENU:
                return [_err("wrong-phase", f"start not valid in {self.phase}")]
            return self._on_start(msg)
        if mtype == "input":
            if self.phase != PHASE_RUNNING:
                return [_err("wrong-phase", f"input not valid in {self.phase}")]
            self._on_input(msg)
            return []
        if mtype == "restart":
            if self.phase != PHASE_GAME_OVER:
                return [_err("wrong-phase", f"restart not valid in {self.phase}")]
            self.phase = PHASE_MENU
            self.world = None
            return [self._welcome()]
        raise ProtocolClose(_err("bad-message", f"unknown message type {mtype!r}"))

    def _welcome(self) -> dict:
        return {
            "type": "welcome",
            "protocol_version": PROTOCOL_VERSION,
            "scenarios": self.catalog.listing(),
        }

    def _on_hello(self, msg: dict) -> list[dict]:
        version = msg.get("protocol_version")
        if version != PROTOCOL_VERSION:
            raise ProtocolClose(
                _err("version-mismatch", f"server speaks protocol {PROTOCOL_VERSION}, client sent {version!r}")
            )
        self.hello_done = True
        label = msg.get("participant_label")
        if isinstance(label, str):
            self.participant = label
        return [self._welcome()]

    def _on_start(self, msg: dict) -> list[dict]:
        if "config" in msg:
            if not isinstance(msg["config"], str):
                return [_err("bad-scenario", "inline config must be scenario-document text")]
            try:
                config = load_scenario(msg["config"])
            except (ScenarioParseError, ScenarioValidationError) as exc:
                return [_err("bad-scenario", str(exc))]
        else:
            try:
                config = self.catalog.resolve(msg.get("scenario"))
            except KeyError:
                return [_err("bad-scenario", f"unknown scenario {msg.get('scenario')!r}")]

        seed = msg.get("seed")
        if seed is None:
            seed = self.entropy()
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            return [_err("bad-seed", "seed must be a non-negative integer")]

        self.world = init_world(config, seed)
        self.session_id = uuid.uuid4().hex
        self.last_seq = -1
        self.current_input = InputCommand()
        meta = SessionMeta(
            session_id=self.session_id,
            scenario_id=config.id,
            scenario_name=config.name,
            seed=seed,
            policy="human",
            started_at=self.now(),
            engine_version=__version__,
            config=config,
        )
        self.writer = TelemetryWriter(self.log_dir / f"{self.session_id}.log", meta)
        self.phase = PHASE_RUNNING
        return [
            {
                "type": "started",
                "session_id": self.session_id,
                "seed": seed,
                "config": config_to_dict(config),
                "map": serialize_map(self.world),
            }
        ]

    def _on_input(self, msg: dict) -> None:
        seq = msg.get("seq")
        if not isinstance(seq, int) or seq <= self.last_seq:
            return  # stale or malformed input: latest-wins, silently dropped
        try:
            move_x = float(msg.get("move_x", 0.0))
            move_y = float(msg.get("move_y", 0.0))
        except (TypeError, ValueError):
            return
        if not (math.isfinite(move_x) and math.isfinite(move_y)):
            return
        self.last_seq = seq
        self.current_input = InputCommand(move_x, move_y, run=bool(msg.get("run", False)))

    # -- simulation driving --------------------------------------------------

    def tick(self) -> list[dict]:
        """One 60 Hz tick while running: log input, step, log events,
        snapshot every 2nd tick, and handle session end."""
        if self.phase != PHASE_RUNNING or self.world is None:
            return []
        cmd = self.current_input
        world = self.world
        next_tick = world.clock.tick + 1
        self._log(input_record(next_tick, cmd))
        world, events = step(world, cmd)
        self.world = world
        for event in events:
            self._log(event_record(world.clock.tick, event.to_payload()))

        out: list[dict] = []
        if world.ended:
            self.phase = PHASE_GAME_OVER
            out.append(
                {"type": "ended", "reason": world.end_reason, "final_score": world.score}
            )
            self._log(final_record(world.clock.tick, world))
            self._close_writer()
        elif world.clock.tick % SNAPSHOT_EVERY == 0:
            out.append(serialize_snapshot(world))
        return out

    def on_disconnect(self) -> None:
        if self.phase == PHASE_RUNNING and self.writer is not None and self.world is not None:
            self._log(
                {
                    "kind": "meta",
                    "disconnect": True,
                    "tick": self.world.clock.tick,
                    "world_digest": world_digest(self.world),
                }
            )
        self._close_writer()

    def _log(self, record: dict) -> None:
        if self.writer is not None:
            self.writer.append(record)

    def _close_writer(self) -> None:
        if self.writer is not None:
            try:
                self.writer.close()
            except OSError as exc:
                self.storage_error = str(exc)
            self.writer = None


# --------------------------------------------------------------------------
# websocket shell


def create_app(log_dir: str | Path, scenario_dir: str | Path | None = None, ui_dir: str | Path | None = None):
    """FastAPI application exposing the session protocol at /ws."""
    custom = load_scenario_dir(scenario_dir) if scenario_dir else {}
    catalog = ScenarioCatalog(custom=custom)
    app = FastAPI(title="crosswalk session server", version=__version__)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        core = SessionCore(catalog, log_dir)
        outbox: asyncio.Queue[dict | None] = asyncio.Queue()

        async def sender() -> None:
            while True:
                message = await outbox.get()
                if message is None:
                    return
                await websocket.send_text(json.dumps(message, separators=(",", ":")))

        async def receiver() -> None:
            while True:
                text = await websocket.receive_text()
                try:
                    for response in core.handle_text(text):
                        await outbox.put(response)
                except ProtocolClose as exc:
                    await outbox.put(exc.error)
                    raise

        async def ticker() -> None:
            loop = asyncio.get_running_loop()
            next_at = loop.time()
            while True:
                if core.phase != PHASE_RUNNING:
                    next_at = loop.time()
                    await asyncio.sleep(0.02)
                    continue
                next_at += DT
                delay = next_at - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                elif delay < -0.25:
                    next_at = loop.time()  # fell badly behind; resync, don't spiral
                for message in core.tick():
                    await outbox.put(message)

        send_task = asyncio.create_task(sender())
        work = asyncio.gather(receiver(), ticker())
        try:
            await work
        except (WebSocketDisconnect, ProtocolClose, RuntimeError):
            work.cancel()
        finally:
            core.on_disconnect()
            # drain queued messages (incl. a ProtocolClose error) before closing
            await outbox.put(None)
            try:
                await asyncio.wait_for(send_task, timeout=1.0)
            except Exception:  # client already gone; nothing left to deliver
                send_task.cancel()
            try:
                await websocket.close()
            except Exception:
                pass

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
