"""Planar geometry primitives: vectors, rectangles, polyline routes.

Everything is ground-plane 2D. Rectangle containment and disc overlap are
closed (boundary counts as inside), so a grazing contact is a contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, k: float) -> Vec2:
        return Vec2(self.x * k, self.y * k)

    def length(self) -> float:
        return math.hypot(self.x, self.y)

    def distance_to(self, other: Vec2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


def normalize_direction(x: float, y: float) -> tuple[float, float]:
    """Scale (x, y) to unit length, or (0, 0) if it is (numerically) zero."""
    norm = math.hypot(x, y)
    if norm < 1e-12:
        return 0.0, 0.0
    return x / norm, y / norm


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle given by its min and max corners."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"degenerate rect: {self}")

    def contains(self, p: Vec2) -> bool:
        return self.x0 <= p.x <= self.x1 and self.y0 <= p.y <= self.y1

    def overlaps(self, other: Rect) -> bool:
        return (
            self.x0 <= other.x1
            and other.x0 <= self.x1
            and self.y0 <= other.y1
            and other.y0 <= self.y1
        )

    def center(self) -> Vec2:
        return Vec2((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True, slots=True)
class Segment:
    """Precomputed polyline segment: origin, unit direction, length."""

    ox: float
    oy: float
    ux: float
    uy: float
    length: float


@dataclass(frozen=True, slots=True)
class Polyline:
    """Arc-length parameterized open polyline with >= 2 points."""

    points: tuple[Vec2, ...]
    segments: tuple[Segment, ...]
    total_length: float

    @staticmethod
    def from_points(points: list[Vec2] | tuple[Vec2, ...]) -> Polyline:
        if len(points) < 2:
            raise ValueError("polyline needs at least 2 points")
        segs: list[Segment] = []
        total = 0.0
        for a, b in zip(points, points[1:]):
            dx, dy = b.x - a.x, b.y - a.y
            length = math.hypot(dx, dy)
            if length < 1e-9:
                raise ValueError("polyline has a zero-length segment")
            segs.append(Segment(a.x, a.y, dx / length, dy / length, length))
            total += length
        return Polyline(tuple(points), tuple(segs), total)

    def point_at(self, s: float) -> Vec2:
        """Point at arc length s, clamped to the polyline's extent."""
        x, y, _, _ = self.pose_at(s)
        return Vec2(x, y)

    def pose_at(self, s: float) -> tuple[float, float, float, float]:
        """(x, y, ux, uy) at arc length s; s is clamped to [0, total_length]."""
        if s <= 0.0:
            seg = self.segments[0]
            return seg.ox, seg.oy, seg.ux, seg.uy
        remaining = s
        for seg in self.segments:
            if remaining <= seg.length:
                return (
                    seg.ox + seg.ux * remaining,
                    seg.oy + seg.uy * remaining,
                    seg.ux,
                    seg.uy,
                )
            remaining -= seg.length
        seg = self.segments[-1]
        return (
            seg.ox + seg.ux * seg.length,
            seg.oy + seg.uy * seg.length,
            seg.ux,
            seg.uy,
        )

    def project(self, p: Vec2) -> tuple[float, float]:
        """Project p onto the polyline.

        Returns (arc length of the closest point, lateral distance to it).
        """
        best_s = 0.0
        best_d2 = math.inf
        acc = 0.0
        for seg in self.segments:
            t = (p.x - seg.ox) * seg.ux + (p.y - seg.oy) * seg.uy
            if t < 0.0:
                t = 0.0
            elif t > seg.length:
                t = seg.length
            cx = seg.ox + seg.ux * t
            cy = seg.oy + seg.uy * t
            d2 = (p.x - cx) ** 2 + (p.y - cy) ** 2
            if d2 < best_d2:
                best_d2 = d2
                best_s = acc + t
            acc += seg.length
        return best_s, math.sqrt(best_d2)

    def intersects_rect(self, rect: Rect, step: float = 0.25) -> bool:
        """True if any sampled point of the polyline lies inside rect."""
        s = 0.0
        while s <= self.total_length:
            if rect.contains(self.point_at(s)):
                return True
            s += step
        return rect.contains(self.points[-1])


def disc_overlaps_oriented_rect(
    px: float,
    py: float,
    radius: float,
    cx: float,
    cy: float,
    ux: float,
    uy: float,
    half_length: float,
    half_width: float,
) -> bool:
    """Closed overlap test between a disc and an oriented rectangle.

    The rectangle is centered at (cx, cy) with its long axis along the unit
    vector (ux, uy).
    """
    dx = px - cx
    dy = py - cy
    local_long = dx * ux + dy * uy
    local_lat = -dx * uy + dy * ux
    qx = min(max(local_long, -half_length), half_length)
    qy = min(max(local_lat, -half_width), half_width)
    ex = local_long - qx
    ey = local_lat - qy
    return ex * ex + ey * ey <= radius * radius
