import pytest

from crosswalk.geometry import Vec2
from crosswalk.scenario import (
    ARM_CROSSES,
    CORNERS,
    MapConfig,
    RouteSpec,
    ScenarioConfig,
    ScenarioParseError,
    ScenarioValidationError,
    build_geometry,
    builtin_scenario,
    builtin_scenarios,
    config_from_dict,
    config_to_dict,
    load_scenario,
    serialize_scenario,
    validate,
    with_overrides,
)


# --------------------------------------------------------------------------
# presets


def test_builtin_ids_and_names():
    presets = builtin_scenarios()
    assert [cfg.id for cfg in presets] == [1, 2, 3]
    assert all(cfg.name for cfg in presets)


def test_builtin_presets_validate_clean():
    for cfg in builtin_scenarios():
        assert validate(cfg) == []


def test_scenario_3_has_indicator():
    cfg = builtin_scenario(3)
    assert cfg.indicator_enabled is True
    assert cfg.indicator_radius_m == 15.0


def test_scenario_2_hides_everything():
    assert builtin_scenario(2).indicator_enabled is False


def test_scenario_1_sampling_space_excludes_non_yielding():
    # av drawn first, remainder split by yielding_fraction: with the
    # remainder fully yielding there is no probability mass left over
    cfg = builtin_scenario(1)
    assert cfg.av_fraction + (1.0 - cfg.av_fraction) * cfg.yielding_fraction == 1.0


def test_unknown_builtin_id():
    with pytest.raises(KeyError):
        builtin_scenario(9)


# --------------------------------------------------------------------------
# validation


def test_validate_fraction_range():
    bad = with_overrides(ScenarioConfig(), av_fraction=1.5)
    violations = validate(bad)
    assert [v.field for v in violations] == ["av_fraction"]


def test_validate_duration_positive():
    violations = validate(with_overrides(ScenarioConfig(), duration_s=0))
    assert [v.field for v in violations] == ["duration_s"]


def test_validate_collects_all_violations():
    bad = with_overrides(ScenarioConfig(), av_fraction=-0.1, walk_speed_mps=0.0)
    fields = {v.field for v in validate(bad)}
    assert {"av_fraction", "walk_speed_mps"} <= fields


def test_validate_comfort_cannot_exceed_max_decel():
    bad = with_overrides(ScenarioConfig(), decel_comfort_mps2=9.0, decel_max_mps2=8.0)
    assert any(v.field == "decel_comfort_mps2" for v in validate(bad))


def test_validate_walk_speed_cannot_exceed_run_speed():
    bad = with_overrides(ScenarioConfig(), walk_speed_mps=5.0, run_speed_mps=4.0)
    assert any(v.field == "walk_speed_mps" for v in validate(bad))


def test_validate_start_corner():
    bad = with_overrides(ScenarioConfig(), start_corner="north")
    assert any(v.field == "start_corner" for v in validate(bad))


def test_overlapping_explicit_zones_name_both_corners():
    geometry = build_geometry(MapConfig())
    zones = {c: geometry.zones[c].as_tuple() for c in CORNERS}
    zones["NE"] = (3.5, 3.5, 9.5, 9.5)
    zones["NW"] = (0.0, 3.5, 9.0, 9.5)  # slid east into NE
    bad = ScenarioConfig(map=MapConfig(zones=zones))
    violations = validate(bad)
    assert len(violations) == 1
    assert "NE" in violations[0].message and "NW" in violations[0].message


def test_route_must_pass_through_intersection():
    routes = {"far": RouteSpec(((100.0, -50.0), (100.0, 50.0)), 50.0)}
    bad = ScenarioConfig(map=MapConfig(routes=routes))
    assert any("intersection" in v.message for v in validate(bad))


def test_route_stop_line_must_be_interior():
    routes = {"nb": RouteSpec(((1.75, -50.0), (1.75, 50.0)), 120.0)}
    bad = ScenarioConfig(map=MapConfig(routes=routes))
    assert any(v.field.endswith("_stop_m") for v in validate(bad))


# --------------------------------------------------------------------------
# derived geometry


def test_derived_zone_rectangles():
    geom = build_geometry(MapConfig())
    assert geom.zones["NE"].as_tuple() == (3.5, 3.5, 9.5, 9.5)
    assert geom.zones["NW"].as_tuple() == (-9.5, 3.5, -3.5, 9.5)
    assert geom.zones["SE"].as_tuple() == (3.5, -9.5, 9.5, -3.5)
    assert geom.zones["SW"].as_tuple() == (-9.5, -9.5, -3.5, -3.5)


def test_derived_zones_pairwise_disjoint():
    geom = build_geometry(MapConfig())
    corners = sorted(geom.zones)
    for i, a in enumerate(corners):
        for b in corners[i + 1 :]:
            assert not geom.zones[a].overlaps(geom.zones[b])


def test_derived_crosswalks_span_their_road():
    geom = build_geometry(MapConfig())
    assert geom.crosswalks["N"].as_tuple() == (-3.5, 3.5, 3.5, 6.5)
    assert geom.crosswalks["S"].as_tuple() == (-3.5, -6.5, 3.5, -3.5)
    assert geom.crosswalks["E"].as_tuple() == (3.5, -3.5, 6.5, 3.5)
    assert geom.crosswalks["W"].as_tuple() == (-6.5, -3.5, -3.5, 3.5)
    # N/S crosswalks span the north-south road, hence cross it
    assert ARM_CROSSES == {"N": "NS", "S": "NS", "E": "EW", "W": "EW"}


def test_derived_routes():
    geom = build_geometry(MapConfig())
    assert set(geom.routes) == {"nb", "sb", "eb", "wb"}
    nb = geom.routes["nb"]
    assert nb.axis == "NS"
    assert nb.line.points[0] == Vec2(1.75, -53.5)
    assert nb.line.points[-1] == Vec2(1.75, 53.5)
    # stop line: route reach minus (half road + crosswalk + setback)
    assert nb.s_stop_m == pytest.approx(53.5 - (3.5 + 3.0 + 0.5))
    assert geom.routes["eb"].axis == "EW"
    # every route actually crosses the intersection box
    for route in geom.routes.values():
        mid = route.line.point_at(route.line.total_length / 2.0)
        assert abs(mid.x) <= 3.5 or abs(mid.y) <= 3.5


def test_surface_labels():
    geom = build_geometry(MapConfig())
    assert geom.surface_at(Vec2(0.0, 0.0)) == "road"
    assert geom.surface_at(Vec2(0.0, 5.0)) == "crosswalk:N"
    assert geom.surface_at(Vec2(5.0, 0.0)) == "crosswalk:E"
    assert geom.surface_at(Vec2(-5.0, -0.5)) == "crosswalk:W"
    assert geom.surface_at(Vec2(2.0, 8.0)) == "road"  # road band past the crosswalk
    assert geom.surface_at(Vec2(5.0, 5.0)) == "pavement:NE"
    assert geom.surface_at(Vec2(-20.0, -7.0)) == "pavement:SW"


def test_zone_lookup():
    geom = build_geometry(MapConfig())
    assert geom.zone_at(Vec2(6.5, 6.5)) == "NE"
    assert geom.zone_at(Vec2(-4.0, 4.0)) == "NW"
    assert geom.zone_at(Vec2(0.0, 0.0)) is None
    assert geom.zone_at(Vec2(30.0, 30.0)) is None


def test_bounds_cover_routes():
    geom = build_geometry(MapConfig())
    assert geom.bounds.as_tuple() == (-43.5, -43.5, 43.5, 43.5)


# --------------------------------------------------------------------------
# scenario documents


def test_empty_document_is_all_defaults():
    assert load_scenario("") == ScenarioConfig()


def test_minimal_override_document():
    cfg = load_scenario("duration_s = 300\n")
    assert cfg.duration_s == 300.0
    assert cfg == with_overrides(ScenarioConfig(), duration_s=300.0)


def test_comments_and_blank_lines_ignored():
    doc = """
    # session length
    duration_s = 60  # one minute

    av_fraction = 0.25
    """
    cfg = load_scenario(doc)
    assert cfg.duration_s == 60.0
    assert cfg.av_fraction == 0.25


def test_out_of_range_value_names_the_field():
    with pytest.raises(ScenarioValidationError) as excinfo:
        load_scenario("av_fraction = 1.5\n")
    assert [v.field for v in excinfo.value.violations] == ["av_fraction"]


def test_unknown_key_rejected():
    with pytest.raises(ScenarioValidationError) as excinfo:
        load_scenario("durration_s = 120\n")
    assert any("durration_s" == v.field for v in excinfo.value.violations)


def test_malformed_line_reports_line_number():
    with pytest.raises(ScenarioParseError) as excinfo:
        load_scenario("duration_s = 60\nthis is not a key value line\n")
    assert excinfo.value.line_no == 2


def test_unparseable_number_is_a_violation():
    with pytest.raises(ScenarioValidationError) as excinfo:
        load_scenario("duration_s = twelve\n")
    assert any(v.field == "duration_s" for v in excinfo.value.violations)


def test_all_violations_reported_together():
    doc = "av_fraction = 1.5\nyielding_fraction = -1\nbogus_key = 3\n"
    with pytest.raises(ScenarioValidationError) as excinfo:
        load_scenario(doc)
    fields = {v.field for v in excinfo.value.violations}
    assert {"av_fraction", "yielding_fraction", "bogus_key"} <= fields


def test_map_keys_use_dotted_prefix():
    cfg = load_scenario("map.road_half_width_m = 4.0\n")
    assert cfg.map.road_half_width_m == 4.0


def test_explicit_zone_override():
    cfg = load_scenario("map.zone_ne = 4,4,10,10\n")
    geom = build_geometry(cfg.map)
    assert geom.zones["NE"].as_tuple() == (4.0, 4.0, 10.0, 10.0)
    # the other three fall back to their derived rectangles
    assert geom.zones["SW"].as_tuple() == (-9.5, -9.5, -3.5, -3.5)


def test_explicit_route_needs_stop_line():
    with pytest.raises(ScenarioValidationError) as excinfo:
        load_scenario("map.route_main = -50,0; 50,0\n")
    assert any("stop" in v.message for v in excinfo.value.violations)


def test_explicit_route_round_trip():
    doc = "map.route_main = -50,0; 50,0\nmap.route_main_stop_m = 43.0\n"
    cfg = load_scenario(doc)
    assert cfg.map.routes is not None
    assert cfg.map.routes["main"].s_stop_m == 43.0
    assert load_scenario(serialize_scenario(cfg)) == cfg


def test_serialize_load_round_trip_builtins():
    for cfg in builtin_scenarios():
        assert load_scenario(serialize_scenario(cfg)) == cfg


def test_serialize_load_round_trip_custom_map():
    geometry = build_geometry(MapConfig())
    cfg = ScenarioConfig(
        name="custom_map",
        duration_s=42.5,
        map=MapConfig(
            road_half_width_m=4.0,
            zones={c: geometry.zones[c].as_tuple() for c in CORNERS},
            routes={"main": RouteSpec(((-50.0, 2.0), (50.0, 2.0)), 43.0)},
        ),
    )
    assert load_scenario(serialize_scenario(cfg)) == cfg


def test_config_dict_round_trip():
    for cfg in builtin_scenarios():
        assert config_from_dict(config_to_dict(cfg)) == cfg


def test_config_dict_round_trip_with_explicit_map():
    cfg = load_scenario("map.zone_ne = 4,4,10,10\nmap.route_main = -50,0; 50,0\nmap.route_main_stop_m = 43.0\n")
    assert config_from_dict(config_to_dict(cfg)) == cfg
