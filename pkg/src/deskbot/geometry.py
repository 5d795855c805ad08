"""Planar geometry helpers.

All angles are radians, counterclockwise-positive, wrapped to (-pi, pi].
Points are plain (x, y) tuples; nothing here allocates beyond tuples.
"""

from __future__ import annotations

import math

Point = tuple[float, float]

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


def norm(v: Point) -> float:
    return math.hypot(v[0], v[1])


def sub(a: Point, b: Point) -> Point:
    return (a[0] - b[0], a[1] - b[1])


def add(a: Point, b: Point) -> Point:
    return (a[0] + b[0], a[1] + b[1])


def scale(v: Point, k: float) -> Point:
    return (v[0] * k, v[1] * k)


def dot(a: Point, b: Point) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a: Point, b: Point) -> float:
    """z-component of the 3-D cross product; positive when b is left of a."""
    return a[0] * b[1] - a[1] * b[0]


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def heading_vector(heading: float) -> Point:
    return (math.cos(heading), math.sin(heading))


def segment_intersection_param(
    a0: Point, a1: Point, b0: Point, b1: Point
) -> float | None:
    """Parameter t in [0, 1] along a0->a1 of its first crossing of b0->b1.

    Returns None when the segments do not intersect. Collinear overlap is
    treated as a hit at the earliest touching parameter.
    """
    d = sub(a1, a0)
    e = sub(b1, b0)
    denom = cross(d, e)
    diff = sub(b0, a0)
    if abs(denom) < 1e-12:
        if abs(cross(diff, d)) > 1e-12:
            return None  # parallel, not collinear
        # Collinear: project b endpoints onto a.
        dd = dot(d, d)
        if dd < 1e-18:
            return None
        t0 = dot(diff, d) / dd
        t1 = dot(sub(b1, a0), d) / dd
        lo, hi = min(t0, t1), max(t0, t1)
        if hi < 0.0 or lo > 1.0:
            return None
        return max(lo, 0.0)
    t = cross(diff, e) / denom
    u = cross(diff, d) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return t
    return None


def ray_segment_distance(
    origin: Point, direction: Point, b0: Point, b1: Point, max_range: float
) -> float | None:
    """Distance along a unit-direction ray to segment b0->b1, or None.

    Only hits within (0, max_range] count.
    """
    end = add(origin, scale(direction, max_range))
    t = segment_intersection_param(origin, end, b0, b1)
    if t is None:
        return None
    d = t * max_range
    return d if d > 1e-12 else None


def ray_circle_distance(
    origin: Point, direction: Point, center: Point, radius: float, max_range: float
) -> float | None:
    """Distance along a unit-direction ray to a circle, or None.

    Returns the first crossing in (0, max_range]. An origin already inside
    the circle reports a hit at distance ~0 only if the ray exits forward
    through more circle; we report the near intersection clamped to > 0.
    """
    oc = sub(center, origin)
    proj = dot(oc, direction)
    closest2 = dot(oc, oc) - proj * proj
    r2 = radius * radius
    if closest2 > r2:
        return None
    half = math.sqrt(max(r2 - closest2, 0.0))
    t_near = proj - half
    t_far = proj + half
    if t_far <= 1e-12:
        return None  # circle entirely behind
    t = t_near if t_near > 1e-12 else min(t_far, max_range)
    if t > max_range:
        return None
    return t


def point_in_convex_polygon(p: Point, vertices: tuple[Point, ...]) -> bool:
    """Membership test for a convex polygon given in CCW order (inclusive)."""
    n = len(vertices)
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        if cross(sub(b, a), sub(p, a)) < -1e-9:
            return False
    return True


def circle_in_convex_polygon(
    center: Point, radius: float, vertices: tuple[Point, ...]
) -> bool:
    """True when the whole circle lies inside a CCW convex polygon."""
    n = len(vertices)
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        edge = sub(b, a)
        length = norm(edge)
        if length < 1e-12:
            continue
        # Signed distance of center from edge line; positive = inside.
        d = cross(edge, sub(center, a)) / length
        if d < radius - 1e-9:
            return False
    return True


def is_convex_ccw(vertices: tuple[Point, ...]) -> bool:
    """True for a simple convex polygon whose vertices wind CCW."""
    n = len(vertices)
    if n < 3:
        return False
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        c = vertices[(i + 2) % n]
        if cross(sub(b, a), sub(c, b)) < -1e-9:
            return False
    return True
