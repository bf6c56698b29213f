"""Planar primitives, 2x2 matrices and the numeric tolerance policy."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import InvalidParameter


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def scale(self, c: float) -> "Vec2":
        return Vec2(c * self.x, c * self.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class Mat2:
    a: float
    b: float
    c: float
    d: float

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "Mat2":
        det = self.det
        if det == 0:
            raise InvalidParameter("singular matrix")
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def __call__(self, v) -> Vec2:
        return mat_apply(self, v)

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)


IDENTITY = Mat2(1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances used by validation, ray hits and deduplication.

    Passed explicitly to the functions that need them; there is no global
    mutable default.
    """

    eps_glue: float = 1e-9
    eps_hit: float = 1e-9
    eps_dedup: float = 1e-9

    def __post_init__(self):
        for name in ("eps_glue", "eps_hit", "eps_dedup"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be strictly positive")
        if self.eps_hit > self.eps_glue:
            raise InvalidParameter("eps_hit must not exceed eps_glue")


DEFAULT_POLICY = NumericPolicy()


def mat_apply(M: Mat2, v) -> Vec2:
    x, y = v
    return Vec2(M.a * x + M.b * y, M.c * x + M.d * y)


def horocycle(s: float) -> Mat2:
    """Upper triangular unipotent ``(1 s; 0 1)``."""
    return Mat2(1.0, float(s), 0.0, 1.0)


def geodesic(t: float) -> Mat2:
    return Mat2(math.exp(t), 0.0, 0.0, math.exp(-t))


def rescale(c: float) -> Mat2:
    if not c > 0:
        raise InvalidParameter(f"rescale factor must be positive, got {c}")
    return Mat2(float(c), 0.0, 0.0, float(c))


def rotate(theta: float) -> Mat2:
    co, si = math.cos(theta), math.sin(theta)
    if abs(co) < 1e-16:
        co = 0.0
    if abs(si) < 1e-16:
        si = 0.0
    return Mat2(co, -si, si, co)


def diag(p: float, q: float) -> Mat2:
    return Mat2(float(p), 0.0, 0.0, float(q))


_SPECIAL = {
    "horocycle": horocycle,
    "geodesic": geodesic,
    "rescale": rescale,
    "rotate": rotate,
}


def special_element(name: str, param: float) -> Mat2:
    try:
        factory = _SPECIAL[name]
    except KeyError:
        raise InvalidParameter(f"unknown group element {name!r}") from None
    return factory(param)


def cross(u, v) -> float:
    return u[0] * v[1] - u[1] * v[0]


def dot(u, v) -> float:
    return u[0] * v[0] + u[1] * v[1]


def polygon_area(pts) -> float:
    """Signed shoelace area (positive for counterclockwise order)."""
    n = len(pts)
    s = 0.0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def angle_between(u, v) -> float:
    """Counterclockwise angle in [0, 2pi) turning u onto v."""
    a = math.atan2(cross(u, v), dot(u, v))
    if a < 0:
        a += 2 * math.pi
    return a
