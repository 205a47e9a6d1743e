"""Protocol state machine, wire projections, and the websocket shell."""

import json
import tempfile

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crosswalk import PROTOCOL_VERSION
from crosswalk.events import END_REASON_TIMER
from crosswalk.session import (
    PHASE_GAME_OVER,
    PHASE_MENU,
    PHASE_RUNNING,
    ProtocolClose,
    ScenarioCatalog,
    SessionCore,
    SNAPSHOT_EVERY,
    create_app,
    load_scenario_dir,
    serialize_map,
    serialize_snapshot,
)
from crosswalk.telemetry import read_log, replay
from crosswalk.world import BEHAVIOR_AV, BEHAVIOR_NON_YIELDING, BEHAVIOR_YIELDING

SHORT_SESSION_DOC = "duration_s = 0.2\nspawn_interval_mean_s = 1000000\n"


def _core(tmp_path, **kwargs):
    return SessionCore(ScenarioCatalog(custom={}), tmp_path, **kwargs)


def _greeted(tmp_path, **kwargs):
    core = _core(tmp_path, **kwargs)
    core.handle_text(json.dumps({"type": "hello", "protocol_version": PROTOCOL_VERSION}))
    return core


def _started(tmp_path, scenario=1, seed=5, config=None):
    core = _greeted(tmp_path)
    msg = {"type": "start", "seed": seed}
    if config is not None:
        msg["config"] = config
    else:
        msg["scenario"] = scenario
    (started,) = core.handle_message(msg)
    assert started["type"] == "started"
    return core, started


def _send(core, msg):
    return core.handle_text(json.dumps(msg))


# --------------------------------------------------------------------------
# handshake


def test_hello_gets_welcome_with_scenario_listing(tmp_path):
    core = _core(tmp_path)
    (welcome,) = _send(core, {"type": "hello", "protocol_version": PROTOCOL_VERSION})
    assert welcome["type"] == "welcome"
    assert welcome["protocol_version"] == PROTOCOL_VERSION
    ids = [row["id"] for row in welcome["scenarios"]]
    assert ids == [1, 2, 3]
    assert [row["indicator"] for row in welcome["scenarios"]] == [False, False, True]


def test_first_message_must_be_hello(tmp_path):
    core = _core(tmp_path)
    with pytest.raises(ProtocolClose) as exc:
        _send(core, {"type": "start", "scenario": 1})
    assert exc.value.error["code"] == "expected-hello"


def test_protocol_version_gate_closes_connection(tmp_path):
    core = _core(tmp_path)
    with pytest.raises(ProtocolClose) as exc:
        _send(core, {"type": "hello", "protocol_version": PROTOCOL_VERSION + 1})
    assert exc.value.error["code"] == "version-mismatch"


def test_second_hello_is_an_error_but_not_fatal(tmp_path):
    core = _greeted(tmp_path)
    (err,) = _send(core, {"type": "hello", "protocol_version": PROTOCOL_VERSION})
    assert err["type"] == "error"
    assert core.phase == PHASE_MENU  # connection survives


def test_non_json_frame_closes(tmp_path):
    core = _greeted(tmp_path)
    with pytest.raises(ProtocolClose):
        core.handle_text("{not json")


def test_unknown_message_type_closes(tmp_path):
    core = _greeted(tmp_path)
    with pytest.raises(ProtocolClose) as exc:
        _send(core, {"type": "teleport"})
    assert exc.value.error["code"] == "bad-message"


def test_frame_without_string_type_closes(tmp_path):
    core = _greeted(tmp_path)
    with pytest.raises(ProtocolClose):
        core.handle_text(json.dumps(["hello"]))
    core = _greeted(tmp_path)
    with pytest.raises(ProtocolClose):
        core.handle_text(json.dumps({"type": 7}))


# --------------------------------------------------------------------------
# phase rules


def test_input_in_menu_is_wrong_phase(tmp_path):
    core = _greeted(tmp_path)
    (err,) = _send(core, {"type": "input", "seq": 0, "move_x": 1.0, "move_y": 0.0})
    assert (err["type"], err["code"]) == ("error", "wrong-phase")
    assert core.phase == PHASE_MENU


def test_start_while_running_is_wrong_phase(tmp_path):
    core, _ = _started(tmp_path)
    (err,) = _send(core, {"type": "start", "scenario": 2})
    assert err["code"] == "wrong-phase"
    assert core.phase == PHASE_RUNNING


def test_restart_only_valid_after_game_over(tmp_path):
    core = _greeted(tmp_path)
    (err,) = _send(core, {"type": "restart"})
    assert err["code"] == "wrong-phase"

    core, _ = _started(tmp_path, config=SHORT_SESSION_DOC)
    while core.phase == PHASE_RUNNING:
        core.tick()
    assert core.phase == PHASE_GAME_OVER
    (welcome,) = _send(core, {"type": "restart"})
    assert welcome["type"] == "welcome"
    assert core.phase == PHASE_MENU
    # and a fresh start works from there
    (started,) = _send(core, {"type": "start", "scenario": 2, "seed": 9})
    assert started["type"] == "started"


# --------------------------------------------------------------------------
# starting sessions


def test_started_reply_carries_seed_config_and_map(tmp_path):
    core, started = _started(tmp_path, scenario=3, seed=17)
    assert started["seed"] == 17
    assert started["session_id"] == core.session_id
    assert started["config"]["indicator_enabled"] is True
    assert started["config"]["indicator_radius_m"] == 15.0
    world_map = started["map"]
    assert set(world_map["zones"]) == {"NE", "NW", "SE", "SW"}
    assert set(world_map["crosswalks"]) == {"N", "S", "E", "W"}
    assert world_map["bounds"] == [-43.5, -43.5, 43.5, 43.5]
    stops = {r["id"]: r["s_stop_m"] for r in world_map["routes"]}
    assert stops == {"nb": 46.5, "sb": 46.5, "eb": 46.5, "wb": 46.5}


def test_missing_seed_drawn_from_entropy(tmp_path):
    core = _greeted(tmp_path, entropy=lambda: 424242)
    (started,) = _send(core, {"type": "start", "scenario": 1})
    assert started["seed"] == 424242


@pytest.mark.parametrize("seed", [-1, 1.5, "7", True], ids=["negative", "float", "str", "bool"])
def test_invalid_seed_rejected(tmp_path, seed):
    core = _greeted(tmp_path)
    (err,) = core.handle_message({"type": "start", "scenario": 1, "seed": seed})
    assert err["code"] == "bad-seed"
    assert core.phase == PHASE_MENU


def test_unknown_scenario_rejected(tmp_path):
    core = _greeted(tmp_path)
    (err,) = _send(core, {"type": "start", "scenario": 99})
    assert err["code"] == "bad-scenario"
    (err,) = _send(core, {"type": "start", "scenario": "nope"})
    assert err["code"] == "bad-scenario"


def test_inline_config_document(tmp_path):
    core, started = _started(tmp_path, config="yielding_fraction = 1.0\nav_fraction = 1.0\n")
    assert started["config"]["av_fraction"] == 1.0


def test_invalid_inline_config_rejected(tmp_path):
    core = _greeted(tmp_path)
    (err,) = _send(core, {"type": "start", "config": "walk_speed_mps = -3\n"})
    assert err["code"] == "bad-scenario"
    assert "walk_speed_mps" in err["message"]
    (err,) = _send(core, {"type": "start", "config": {"duration_s": 1}})
    assert err["code"] == "bad-scenario"


def test_scenario_catalog_resolves_custom_files(tmp_path):
    (tmp_path / "tiny.scenario").write_text(SHORT_SESSION_DOC)
    custom = load_scenario_dir(tmp_path)
    catalog = ScenarioCatalog(custom=custom)
    assert catalog.resolve("tiny").duration_s == 0.2
    assert catalog.resolve(2).name == "mixed_unmarked"
    assert catalog.resolve("2").id == 2
    with pytest.raises(KeyError):
        catalog.resolve(True)
    rows = catalog.listing()
    assert rows[-1]["id"] == "tiny"


# --------------------------------------------------------------------------
# input handling


def test_input_requires_increasing_seq(tmp_path):
    core, _ = _started(tmp_path)
    _send(core, {"type": "input", "seq": 5, "move_x": 1.0, "move_y": 0.0})
    assert core.current_input.move_x == 1.0
    # stale seq silently dropped
    _send(core, {"type": "input", "seq": 4, "move_x": -1.0, "move_y": 0.0})
    assert core.current_input.move_x == 1.0
    _send(core, {"type": "input", "seq": 6, "move_x": 0.0, "move_y": -1.0, "run": True})
    assert core.current_input.move_y == -1.0
    assert core.current_input.run is True


@pytest.mark.parametrize(
    "patch",
    [
        {"seq": "first"},
        {"move_x": "fast"},
        {"move_x": float("nan")},
        {"move_y": float("inf")},
    ],
    ids=["seq-type", "move-type", "nan", "inf"],
)
def test_degenerate_input_fields_dropped(tmp_path, patch):
    core, _ = _started(tmp_path)
    msg = {"type": "input", "seq": 1, "move_x": 0.0, "move_y": 0.0}
    msg.update(patch)
    assert core.handle_message(msg) == []
    assert core.current_input.move_x == 0.0
    assert core.current_input.move_y == 0.0


# --------------------------------------------------------------------------
# ticking and lifecycle


def test_snapshot_cadence(tmp_path):
    core, _ = _started(tmp_path, config=SHORT_SESSION_DOC)
    kinds = [[m["type"] for m in core.tick()] for _ in range(4)]
    assert kinds == [[], ["snapshot"], [], ["snapshot"]]
    assert SNAPSHOT_EVERY == 2


def test_tick_outside_running_is_inert(tmp_path):
    core = _greeted(tmp_path)
    assert core.tick() == []


def test_session_runs_to_timer_without_any_input(tmp_path):
    core, _ = _started(tmp_path, config=SHORT_SESSION_DOC)
    messages = []
    for _ in range(200):
        messages.extend(core.tick())
        if core.phase != PHASE_RUNNING:
            break
    ended = messages[-1]
    assert ended["type"] == "ended"
    assert ended["reason"] == END_REASON_TIMER
    assert ended["final_score"] == 0
    assert core.world.clock.tick == 12  # 0.2 s at 60 Hz


def test_finished_session_log_replays_clean(tmp_path):
    core, started = _started(tmp_path, config=SHORT_SESSION_DOC, seed=3)
    _send(core, {"type": "input", "seq": 0, "move_x": 0.0, "move_y": -1.0})
    while core.phase == PHASE_RUNNING:
        core.tick()
    meta, records = read_log(tmp_path / f"{started['session_id']}.log")
    assert meta.policy == "human"
    assert meta.seed == 3
    inputs = [r for r in records if r.get("kind") == "input"]
    assert len(inputs) == 12
    assert records[-1].get("final") is True
    result = replay(meta, records)
    assert result.ok is True


def test_disconnect_mid_run_seals_log_with_digest(tmp_path):
    core, started = _started(tmp_path, config=SHORT_SESSION_DOC)
    for _ in range(5):
        core.tick()
    core.on_disconnect()
    _, records = read_log(tmp_path / f"{started['session_id']}.log")
    tail = records[-1]
    assert tail["disconnect"] is True
    assert tail["tick"] == 5
    assert isinstance(tail["world_digest"], str)
    assert core.storage_error is None


def test_storage_failure_is_deferred_and_recorded(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("occupied")
    core = SessionCore(ScenarioCatalog(custom={}), blocker / "logs")
    core.handle_text(json.dumps({"type": "hello", "protocol_version": PROTOCOL_VERSION}))
    (started,) = _send(core, {"type": "start", "config": SHORT_SESSION_DOC, "seed": 1})
    assert started["type"] == "started"  # player session must not be interrupted
    while core.phase == PHASE_RUNNING:
        core.tick()
    assert core.storage_error is not None


# --------------------------------------------------------------------------
# wire projections


def test_snapshot_hides_vehicle_behavior(tmp_path):
    core, _ = _started(tmp_path, scenario=2, seed=0)
    for _ in range(600):
        core.tick()
        if len(core.world.vehicles) >= 2:
            break
    assert core.world.vehicles
    snapshot = serialize_snapshot(core.world)
    assert set(snapshot["vehicles"][0]) == {
        "id", "x", "y", "heading", "speed", "indicator_on",
    }
    wire_text = json.dumps(snapshot)
    for label in (BEHAVIOR_YIELDING, BEHAVIOR_NON_YIELDING, BEHAVIOR_AV):
        assert label not in wire_text


def test_snapshot_shape(tmp_path):
    core, _ = _started(tmp_path, scenario=1, seed=2)
    core.tick()
    snap = serialize_snapshot(core.world)
    assert snap["tick"] == 1
    assert snap["score"] == 0
    assert snap["time_remaining_s"] == pytest.approx(120.0 - 1 / 60.0, abs=1e-3)
    assert set(snap["walk_signals"]) == {"N", "S", "E", "W"}
    assert snap["pedestrian"]["gait"] in ("idle", "walk", "run")
    json.dumps(snap)  # everything must be wire-serializable


def test_map_projection_round_trips_geometry(tmp_path):
    core, _ = _started(tmp_path)
    payload = serialize_map(core.world)
    assert payload["road_half_width_m"] == 3.5
    assert payload["zones"]["NE"] == [3.5, 3.5, 9.5, 9.5]
    assert payload["crosswalks"]["N"] == [-3.5, 3.5, 3.5, 6.5]
    nb = next(r for r in payload["routes"] if r["id"] == "nb")
    assert nb["points"] == [[1.75, -53.5], [1.75, 53.5]]
    json.dumps(payload)


# --------------------------------------------------------------------------
# protocol fuzz: no message sequence may crash or corrupt the phase machine


_FUZZ_MESSAGES = st.one_of(
    st.just({"type": "hello", "protocol_version": PROTOCOL_VERSION}),
    st.just({"type": "hello", "protocol_version": 99}),
    st.builds(
        lambda s, seed: {"type": "start", "scenario": s, "seed": seed},
        st.sampled_from([1, 2, 3, 99, "x"]),
        st.one_of(st.integers(-2, 2**33), st.none()),
    ),
    st.builds(
        lambda x, y, seq, run: {
            "type": "input", "seq": seq, "move_x": x, "move_y": y, "run": run,
        },
        st.floats(allow_nan=True, allow_infinity=True, width=32),
        st.floats(allow_nan=True, allow_infinity=True, width=32),
        st.integers(-1, 10),
        st.booleans(),
    ),
    st.just({"type": "restart"}),
    st.just({"type": "mystery"}),
    st.just({"no_type": 1}),
)


@settings(max_examples=40, deadline=None)
@given(
    msgs=st.lists(_FUZZ_MESSAGES, max_size=12),
    tick_after=st.lists(st.booleans(), max_size=12),
)
def test_any_message_sequence_leaves_core_consistent(msgs, tick_after):
    with tempfile.TemporaryDirectory() as tmp:
        core = SessionCore(ScenarioCatalog(custom={}), tmp)
        for i, msg in enumerate(msgs):
            try:
                replies = core.handle_text(json.dumps(msg))
            except ProtocolClose:
                break
            assert all(isinstance(r, dict) and "type" in r for r in replies)
            if i < len(tick_after) and tick_after[i]:
                for reply in core.tick():
                    json.dumps(reply)
            assert core.phase in (PHASE_MENU, PHASE_RUNNING, PHASE_GAME_OVER)
            assert (core.phase == PHASE_RUNNING) == (
                core.world is not None and not core.world.ended
            )
        core.on_disconnect()


# --------------------------------------------------------------------------
# websocket shell end-to-end


def _ws_client(tmp_path, **kwargs):
    from fastapi.testclient import TestClient

    app = create_app(log_dir=tmp_path, **kwargs)
    return TestClient(app)


def test_websocket_round_trip(tmp_path):
    client = _ws_client(tmp_path)
    with client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"type": "hello", "protocol_version": PROTOCOL_VERSION}))
        welcome = json.loads(ws.receive_text())
        assert welcome["type"] == "welcome"

        ws.send_text(
            json.dumps({"type": "start", "config": SHORT_SESSION_DOC, "seed": 4})
        )
        started = json.loads(ws.receive_text())
        assert started["type"] == "started"

        ws.send_text(
            json.dumps({"type": "input", "seq": 0, "move_x": 0.0, "move_y": -1.0})
        )
        saw_snapshot = False
        for _ in range(600):
            msg = json.loads(ws.receive_text())
            if msg["type"] == "snapshot":
                saw_snapshot = True
            if msg["type"] == "ended":
                assert msg["reason"] == END_REASON_TIMER
                break
        else:
            pytest.fail("session never ended")
        assert saw_snapshot

        ws.send_text(json.dumps({"type": "restart"}))
        assert json.loads(ws.receive_text())["type"] == "welcome"

    logs = list(tmp_path.glob("*.log"))
    assert len(logs) == 1
    meta, records = read_log(logs[0])
    assert replay(meta, records).ok is True


def test_websocket_version_gate_sends_error_then_closes(tmp_path):
    from starlette.websockets import WebSocketDisconnect

    client = _ws_client(tmp_path)
    with pytest.raises(WebSocketDisconnect):
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "hello", "protocol_version": 0}))
            err = json.loads(ws.receive_text())
            assert err["type"] == "error"
            assert err["code"] == "version-mismatch"
            ws.receive_text()  # server hangs up


def test_websocket_serves_custom_scenarios(tmp_path):
    scenario_dir = tmp_path / "scenarios"
    scenario_dir.mkdir()
    (scenario_dir / "quick.scenario").write_text(SHORT_SESSION_DOC)
    log_dir = tmp_path / "logs"
    log_dir.mkdir()
    client = _ws_client(log_dir, scenario_dir=scenario_dir)
    with client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"type": "hello", "protocol_version": PROTOCOL_VERSION}))
        welcome = json.loads(ws.receive_text())
        assert {"id": "quick", "name": "custom", "indicator": False} in welcome["scenarios"] or any(
            row["id"] == "quick" for row in welcome["scenarios"]
        )
        ws.send_text(json.dumps({"type": "start", "scenario": "quick", "seed": 2}))
        started = json.loads(ws.receive_text())
        assert started["type"] == "started"
        assert started["config"]["duration_s"] == 0.2
