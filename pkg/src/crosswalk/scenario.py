"""Scenario and map configuration.

Three built-in presets plus external scenario files let researchers change
vehicle mixes, timings, and map geometry without touching code. The file
format is a flat UTF-8 ``key = value`` document with ``#`` comments; key
names match the config fields below (map fields carry a ``map.`` prefix).
Unknown keys are hard errors: a silently ignored typo would corrupt an
experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .geometry import Polyline, Rect, Vec2

CORNERS = ("NE", "NW", "SE", "SW")
ARMS = ("N", "S", "E", "W")

#: crosswalk arm -> the road it crosses ("NS" or "EW")
ARM_CROSSES = {"N": "NS", "S": "NS", "E": "EW", "W": "EW"}


@dataclass(frozen=True)
class RouteSpec:
    """Explicit route override: polyline points and a stop-line arc position."""

    points: tuple[tuple[float, float], ...]
    s_stop_m: float


@dataclass(frozen=True)
class MapConfig:
    road_half_width_m: float = 3.5
    block_extent_m: float = 40.0
    crosswalk_width_m: float = 3.0
    zone_extent_m: float = 6.0
    spawn_margin_m: float = 10.0
    stop_setback_m: float = 0.5
    #: explicit corner-zone rectangles (x0, y0, x1, y1); None = derived
    zones: dict[str, tuple[float, float, float, float]] | None = None
    #: explicit routes; None = derived straight-through approaches
    routes: dict[str, RouteSpec] | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    id: int = 0
    name: str = "custom"
    duration_s: float = 120.0
    spawn_interval_mean_s: float = 2.5
    yielding_fraction: float = 0.5
    av_fraction: float = 0.0
    indicator_enabled: bool = False
    indicator_radius_m: float = 15.0
    speed_limit_mps: float = 13.0
    accel_mps2: float = 2.5
    decel_comfort_mps2: float = 3.0
    decel_max_mps2: float = 8.0
    buffer_m: float = 1.0
    headway_m: float = 2.0
    lookahead_m: float = 50.0
    walk_speed_mps: float = 1.4
    run_speed_mps: float = 4.0
    pedestrian_radius_m: float = 0.3
    vehicle_length_m: float = 4.5
    vehicle_width_m: float = 1.8
    signal_green_s: float = 12.0
    signal_all_red_s: float = 4.0
    start_corner: str = "NE"
    map: MapConfig = field(default_factory=MapConfig)


def builtin_scenarios() -> tuple[ScenarioConfig, ScenarioConfig, ScenarioConfig]:
    """The three preset scenarios, ids 1-3.

    1. every vehicle yields to pedestrians (70% human yielding, 30% AV)
    2. half the vehicles never yield; nothing marks which half
    3. half AVs (always yield) with the proximity indicator, half non-yielding
    """
    return (
        ScenarioConfig(id=1, name="all_yield", av_fraction=0.3, yielding_fraction=1.0),
        ScenarioConfig(id=2, name="mixed_unmarked", av_fraction=0.0, yielding_fraction=0.5),
        ScenarioConfig(
            id=3,
            name="av_indicator",
            av_fraction=0.5,
            yielding_fraction=0.0,
            indicator_enabled=True,
            indicator_radius_m=15.0,
        ),
    )


def builtin_scenario(scenario_id: int) -> ScenarioConfig:
    for cfg in builtin_scenarios():
        if cfg.id == scenario_id:
            return cfg
    raise KeyError(f"no builtin scenario with id {scenario_id}")


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


class ScenarioParseError(Exception):
    """Structurally malformed scenario document."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ScenarioValidationError(Exception):
    """Carries every violation found, not just the first."""

    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


_POSITIVE_FIELDS = (
    "duration_s",
    "spawn_interval_mean_s",
    "indicator_radius_m",
    "speed_limit_mps",
    "accel_mps2",
    "decel_comfort_mps2",
    "decel_max_mps2",
    "headway_m",
    "lookahead_m",
    "walk_speed_mps",
    "run_speed_mps",
    "pedestrian_radius_m",
    "vehicle_length_m",
    "vehicle_width_m",
    "signal_green_s",
    "signal_all_red_s",
)

_POSITIVE_MAP_FIELDS = (
    "road_half_width_m",
    "block_extent_m",
    "crosswalk_width_m",
    "zone_extent_m",
)


def validate(config: ScenarioConfig) -> list[Violation]:
    """Return every invariant violation in config; empty list means valid."""
    out: list[Violation] = []
    for name in ("yielding_fraction", "av_fraction"):
        value = getattr(config, name)
        if not 0.0 <= value <= 1.0:
            out.append(Violation(name, f"must be in [0, 1], got {value}"))
    for name in _POSITIVE_FIELDS:
        value = getattr(config, name)
        if not value > 0.0:
            out.append(Violation(name, f"must be > 0, got {value}"))
    if config.buffer_m < 0.0:
        out.append(Violation("buffer_m", f"must be >= 0, got {config.buffer_m}"))
    if config.decel_comfort_mps2 > config.decel_max_mps2 > 0:
        out.append(
            Violation(
                "decel_comfort_mps2",
                "comfortable deceleration exceeds the maximum deceleration",
            )
        )
    if 0 < config.run_speed_mps < config.walk_speed_mps:
        out.append(Violation("walk_speed_mps", "walk speed exceeds run speed"))
    if config.start_corner not in CORNERS:
        out.append(
            Violation("start_corner", f"must be one of {'/'.join(CORNERS)}, got {config.start_corner!r}")
        )
    out.extend(_validate_map(config.map))
    return out


def _validate_map(m: MapConfig) -> list[Violation]:
    out: list[Violation] = []
    for name in _POSITIVE_MAP_FIELDS:
        value = getattr(m, name)
        if not value > 0.0:
            out.append(Violation(f"map.{name}", f"must be > 0, got {value}"))
    for name in ("spawn_margin_m", "stop_setback_m"):
        value = getattr(m, name)
        if value < 0.0:
            out.append(Violation(f"map.{name}", f"must be >= 0, got {value}"))
    if m.zone_extent_m > m.block_extent_m > 0:
        out.append(Violation("map.zone_extent_m", "zone extends past the block"))
    if out:
        return out  # geometry below assumes sane scalars

    geom = build_geometry(m)
    corners = sorted(geom.zones)
    for i, a in enumerate(corners):
        for b in corners[i + 1 :]:
            if geom.zones[a].overlaps(geom.zones[b]):
                out.append(
                    Violation(
                        f"map.zone_{a.lower()}",
                        f"zone {a} overlaps zone {b}",
                    )
                )
    box = Rect(-m.road_half_width_m, -m.road_half_width_m, m.road_half_width_m, m.road_half_width_m)
    for route in geom.routes.values():
        if len(route.line.points) < 2:
            out.append(Violation(f"map.route_{route.route_id}", "needs at least 2 points"))
            continue
        if not 0.0 < route.s_stop_m < route.line.total_length:
            out.append(
                Violation(
                    f"map.route_{route.route_id}_stop_m",
                    f"stop line at {route.s_stop_m} outside (0, {route.line.total_length:.1f})",
                )
            )
        if not route.line.intersects_rect(box):
            out.append(
                Violation(
                    f"map.route_{route.route_id}",
                    "route never passes through the intersection box",
                )
            )
    return out


# --------------------------------------------------------------------------
# derived geometry


@dataclass(frozen=True)
class Route:
    route_id: str
    line: Polyline
    s_stop_m: float
    #: road axis this route runs along, "NS" or "EW" (signal compliance)
    axis: str


@dataclass(frozen=True)
class MapGeometry:
    bounds: Rect
    road_half_width_m: float
    zones: dict[str, Rect]
    crosswalks: dict[str, Rect]
    routes: dict[str, Route]

    def surface_at(self, p: Vec2) -> str:
        """Surface label under p: "pavement:<corner>", "crosswalk:<arm>", "road"."""
        for arm, rect in self.crosswalks.items():
            if rect.contains(p):
                return f"crosswalk:{arm}"
        rhw = self.road_half_width_m
        if abs(p.x) <= rhw or abs(p.y) <= rhw:
            return "road"
        corner = ("N" if p.y > 0 else "S") + ("E" if p.x > 0 else "W")
        return f"pavement:{corner}"

    def zone_at(self, p: Vec2) -> str | None:
        for corner, rect in self.zones.items():
            if rect.contains(p):
                return corner
        return None


def build_geometry(m: MapConfig) -> MapGeometry:
    """Realize the parametric four-way intersection (or explicit overrides)."""
    rhw = m.road_half_width_m
    extent = rhw + m.block_extent_m
    cw = m.crosswalk_width_m
    z = m.zone_extent_m

    if m.zones is not None:
        zones = {corner: Rect(*m.zones[corner]) for corner in m.zones}
    else:
        zones = {
            "NE": Rect(rhw, rhw, rhw + z, rhw + z),
            "NW": Rect(-rhw - z, rhw, -rhw, rhw + z),
            "SE": Rect(rhw, -rhw - z, rhw + z, -rhw),
            "SW": Rect(-rhw - z, -rhw - z, -rhw, -rhw),
        }

    crosswalks = {
        "N": Rect(-rhw, rhw, rhw, rhw + cw),
        "S": Rect(-rhw, -rhw - cw, rhw, -rhw),
        "E": Rect(rhw, -rhw, rhw + cw, rhw),
        "W": Rect(-rhw - cw, -rhw, -rhw, rhw),
    }

    if m.routes is not None:
        routes = {
            rid: Route(
                rid,
                Polyline.from_points([Vec2(x, y) for x, y in rs.points]),
                rs.s_stop_m,
                _dominant_axis(rs.points),
            )
            for rid, rs in m.routes.items()
        }
    else:
        lane = rhw / 2.0
        reach = extent + m.spawn_margin_m
        # stop line sits just before the first crosswalk on the approach
        s_stop = reach - (rhw + cw + m.stop_setback_m)
        routes = {
            "nb": Route("nb", _line(lane, -reach, lane, reach), s_stop, "NS"),
            "sb": Route("sb", _line(-lane, reach, -lane, -reach), s_stop, "NS"),
            "eb": Route("eb", _line(-reach, -lane, reach, -lane), s_stop, "EW"),
            "wb": Route("wb", _line(reach, lane, -reach, lane), s_stop, "EW"),
        }

    bounds = Rect(-extent, -extent, extent, extent)
    return MapGeometry(bounds, rhw, zones, crosswalks, routes)


def _line(x0: float, y0: float, x1: float, y1: float) -> Polyline:
    return Polyline.from_points([Vec2(x0, y0), Vec2(x1, y1)])


def _dominant_axis(points: tuple[tuple[float, float], ...]) -> str:
    dx = abs(points[-1][0] - points[0][0])
    dy = abs(points[-1][1] - points[0][1])
    return "EW" if dx >= dy else "NS"


# --------------------------------------------------------------------------
# scenario file format

_SCALAR_FIELDS = {
    f.name: f.type for f in fields(ScenarioConfig) if f.name not in ("map",)
}
_MAP_SCALAR_FIELDS = {
    f.name: f.type for f in fields(MapConfig) if f.name not in ("zones", "routes")
}
_ZONE_KEYS = {f"zone_{c.lower()}": c for c in CORNERS}


def load_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document.

    Missing keys take defaults; unknown keys and out-of-range values are
    collected and raised together as ScenarioValidationError. Structural
    problems (a line that is not ``key = value``) raise ScenarioParseError
    with the offending line number.
    """
    violations: list[Violation] = []
    scalars: dict[str, object] = {}
    map_scalars: dict[str, object] = {}
    zones: dict[str, tuple[float, float, float, float]] = {}
    route_points: dict[str, tuple[tuple[float, float], ...]] = {}
    route_stops: dict[str, float] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError(line_no, f"expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ScenarioParseError(line_no, "empty key")
        _apply_key(
            key, value, line_no, scalars, map_scalars, zones, route_points, route_stops, violations
        )

    map_kwargs: dict[str, object] = dict(map_scalars)
    if zones:
        # partial explicit zones fall back to the derived rectangle
        derived = build_geometry(MapConfig(**map_scalars)).zones  # type: ignore[arg-type]
        full = {c: derived[c].as_tuple() for c in CORNERS}
        full.update(zones)
        map_kwargs["zones"] = full
    if route_points or route_stops:
        specs: dict[str, RouteSpec] = {}
        for rid, pts in route_points.items():
            if rid not in route_stops:
                violations.append(
                    Violation(f"map.route_{rid}_stop_m", "explicit route is missing its stop line")
                )
                continue
            specs[rid] = RouteSpec(pts, route_stops[rid])
        for rid in route_stops:
            if rid not in route_points:
                violations.append(
                    Violation(f"map.route_{rid}", "stop line given for an undefined route")
                )
        if specs:
            map_kwargs["routes"] = specs

    config = ScenarioConfig(**scalars, map=MapConfig(**map_kwargs))  # type: ignore[arg-type]
    violations.extend(validate(config))
    if violations:
        raise ScenarioValidationError(violations)
    return config


def _apply_key(
    key: str,
    value: str,
    line_no: int,
    scalars: dict[str, object],
    map_scalars: dict[str, object],
    zones: dict[str, tuple[float, float, float, float]],
    route_points: dict[str, tuple[tuple[float, float], ...]],
    route_stops: dict[str, float],
    violations: list[Violation],
) -> None:
    if key in _SCALAR_FIELDS:
        parsed = _parse_scalar(key, _SCALAR_FIELDS[key], value, violations)
        if parsed is not None:
            scalars[key] = parsed
        return
    if key.startswith("map."):
        sub = key[4:]
        if sub in _MAP_SCALAR_FIELDS:
            parsed = _parse_scalar(key, _MAP_SCALAR_FIELDS[sub], value, violations)
            if parsed is not None:
                map_scalars[sub] = parsed
            return
        if sub in _ZONE_KEYS:
            try:
                parts = tuple(float(v) for v in value.split(","))
                if len(parts) != 4:
                    raise ValueError
                zones[_ZONE_KEYS[sub]] = parts  # type: ignore[assignment]
            except ValueError:
                violations.append(Violation(key, f"expected 'x0,y0,x1,y1', got {value!r}"))
            return
        if sub.startswith("route_") and sub.endswith("_stop_m"):
            rid = sub[len("route_") : -len("_stop_m")]
            try:
                route_stops[rid] = float(value)
            except ValueError:
                violations.append(Violation(key, f"expected a number, got {value!r}"))
            return
        if sub.startswith("route_"):
            rid = sub[len("route_") :]
            try:
                pts = []
                for chunk in value.split(";"):
                    x, y = chunk.split(",")
                    pts.append((float(x), float(y)))
                if len(pts) < 2:
                    raise ValueError
                route_points[rid] = tuple(pts)
            except ValueError:
                violations.append(Violation(key, f"expected 'x,y; x,y; ...', got {value!r}"))
            return
    violations.append(Violation(key, f"unknown key (line {line_no})"))


def _parse_scalar(key: str, type_name: str, value: str, violations: list[Violation]):
    base = str(type_name)
    try:
        if "bool" in base:
            if value.lower() in ("true", "false"):
                return value.lower() == "true"
            raise ValueError
        if "int" in base:
            return int(value)
        if "float" in base:
            return float(value)
        return value  # str
    except ValueError:
        violations.append(Violation(key, f"cannot parse {value!r} as {base}"))
        return None


def serialize_scenario(config: ScenarioConfig) -> str:
    """Render config as a scenario document; load(serialize(c)) == c."""
    lines = []
    for name in _SCALAR_FIELDS:
        value = getattr(config, name)
        lines.append(f"{name} = {_format_value(value)}")
    m = config.map
    for name in _MAP_SCALAR_FIELDS:
        lines.append(f"map.{name} = {_format_value(getattr(m, name))}")
    if m.zones is not None:
        for key, corner in _ZONE_KEYS.items():
            rect = m.zones[corner]
            lines.append(f"map.{key} = " + ",".join(repr(v) for v in rect))
    if m.routes is not None:
        for rid, rs in sorted(m.routes.items()):
            pts = "; ".join(f"{repr(x)},{repr(y)}" for x, y in rs.points)
            lines.append(f"map.route_{rid} = {pts}")
            lines.append(f"map.route_{rid}_stop_m = {repr(rs.s_stop_m)}")
    return "\n".join(lines) + "\n"


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def config_to_dict(config: ScenarioConfig) -> dict:
    """Flat JSON-friendly snapshot (telemetry meta, wire echo)."""
    out: dict = {name: getattr(config, name) for name in _SCALAR_FIELDS}
    m = config.map
    out["map"] = {name: getattr(m, name) for name in _MAP_SCALAR_FIELDS}
    if m.zones is not None:
        out["map"]["zones"] = {c: list(r) for c, r in m.zones.items()}
    if m.routes is not None:
        out["map"]["routes"] = {
            rid: {"points": [list(p) for p in rs.points], "s_stop_m": rs.s_stop_m}
            for rid, rs in m.routes.items()
        }
    return out


def config_from_dict(data: dict) -> ScenarioConfig:
    """Inverse of config_to_dict (telemetry replay path)."""
    scalars = {k: v for k, v in data.items() if k != "map"}
    map_data = dict(data.get("map", {}))
    zones = map_data.pop("zones", None)
    routes = map_data.pop("routes", None)
    map_kwargs: dict[str, object] = dict(map_data)
    if zones is not None:
        map_kwargs["zones"] = {c: tuple(r) for c, r in zones.items()}
    if routes is not None:
        map_kwargs["routes"] = {
            rid: RouteSpec(tuple(tuple(p) for p in rs["points"]), rs["s_stop_m"])
            for rid, rs in routes.items()
        }
    return ScenarioConfig(**scalars, map=MapConfig(**map_kwargs))  # type: ignore[arg-type]


def with_overrides(config: ScenarioConfig, **kwargs) -> ScenarioConfig:
    """Non-destructive field override helper (CLI duration flag, tests)."""
    return replace(config, **kwargs)
