"""Bundled scenes with closed-form reference profiles and densities.

Four fixtures:

* ``disk``  -- unit disk, zero rim height, unit source: the classic open
  table.  Profile 1-|x|, density |x|/2.
* ``ex1``   -- quarter disk glued to a rectangle, sand exits only through
  the rectangle bottom.  Mass from the quarter disk funnels through one
  corner: straight-line transport fails and no integrable density exists.
* ``ex2``   -- rectangle plus two 45-degree sectors meeting at one corner.
  Transport paths branch at the corner, so the density is non-unique: a
  one-parameter family v + w solves the balance equations.
* ``ex3``   -- rectangle, square and sector; straight-line transport holds
  but every sector ray terminates at the reflex corner, which sits on the
  closure of the exit set, so the density is again non-unique.

The rectangle helper ``rect`` (open bottom, walls elsewhere) is a minimal
well-separated case used by tests.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Scene, arc_points, load_scene

__all__ = ["FIXTURE_IDS", "scene_config", "load_fixture",
           "disk_u", "disk_v", "ex1_u", "ex2_u", "ex2_v", "ex2_w",
           "ex3_u", "ex3_branches", "c_const", "c_ramp", "rect_u", "rect_v"]

FIXTURE_IDS = ("disk", "ex1", "ex2", "ex3", "rect")

SQ2 = math.sqrt(0.5)


class _PolyBuilder:
    def __init__(self):
        self.chunks = []
        self.count = 0
        self.marks = {}

    def mark(self, name):
        self.marks[name] = self.count

    def point(self, x, y):
        self.chunks.append(np.array([[x, y]], dtype=float))
        self.count += 1

    def arc(self, center, radius, from_deg, to_deg, step_deg):
        pts = arc_points(center, radius, from_deg, to_deg, step_deg)
        self.chunks.append(pts)
        self.count += len(pts)

    def vertices(self):
        return np.concatenate(self.chunks, axis=0)


def scene_config(fixture: str, *, h: float = 1.0 / 128.0,
                 h_b: float = math.pi / 180.0,
                 arc_deg: float = 1.0) -> dict:
    """Scene configuration dict for a bundled fixture."""
    if fixture == "disk":
        b = _PolyBuilder()
        b.mark("rim")
        b.arc((0.0, 0.0), 1.0, 0.0, 360.0, arc_deg)
        b.mark("end")
        pieces = [{"edges": [0, b.count], "value": 0.0}]
        verts = b.vertices()
    elif fixture == "rect":
        verts = np.array([[-1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0]])
        pieces = [{"edges": [0, 1], "value": 0.0},
                  {"edges": [1, 4], "value": "wall"}]
    elif fixture == "ex1":
        b = _PolyBuilder()
        b.point(-1.0, -1.0)          # exit edge start
        b.point(0.0, -1.0)           # wall up the axis
        b.point(0.0, 0.0)
        b.mark("arc0")
        b.arc((0.0, 0.0), 1.0, 0.0, 90.0, arc_deg)   # (1,0) .. just below (0,1)
        b.mark("arc1")
        b.point(0.0, 1.0)
        b.point(-1.0, 1.0)
        pieces = [{"edges": [0, 1], "value": 0.0},
                  {"edges": [1, b.count], "value": "wall"}]
        verts = b.vertices()
    elif fixture == "ex2":
        b = _PolyBuilder()
        b.point(-1.0, -1.0)
        b.mark("arc_lo")
        b.arc((0.0, 0.0), 1.0, -90.0, -45.0, arc_deg)  # open arc, datum 0
        b.mark("arc_lo_end")
        b.point(SQ2, -SQ2)
        b.point(0.0, 0.0)
        b.mark("arc_hi")
        b.arc((0.0, 0.0), 1.0, 45.0, 90.0, arc_deg)
        b.point(0.0, 1.0)
        b.point(-1.0, 1.0)
        verts = b.vertices()
        m = b.marks
        pieces = [{"edges": [0, 1], "value": 0.0},                    # bottom
                  {"edges": [1, m["arc_lo_end"]], "value": 0.0},      # arc
                  {"edges": [m["arc_lo_end"], b.count], "value": "wall"}]
    elif fixture == "ex3":
        b = _PolyBuilder()
        b.point(-1.0, -1.0)
        b.arc((0.0, 0.0), 1.0, -90.0, -45.0, arc_deg)
        b.mark("s3")
        b.point(SQ2, -SQ2)
        b.mark("s2")
        b.point(0.0, 0.0)
        b.point(1.0, 0.0)
        b.mark("s4")
        b.point(1.0, 1.0)
        b.mark("s1top")
        b.point(0.0, 1.0)
        b.mark("s5")
        b.point(-1.0, 1.0)
        verts = b.vertices()
        m = b.marks
        pieces = [
            {"edges": [0, m["s3"]], "value": 0.0},
            {"edges": [m["s3"], m["s2"]],
             "value": {"expr": "1-sqrt(x*x+y*y)"}},
            {"edges": [m["s2"], m["s4"]], "value": 1.0},
            {"edges": [m["s4"], m["s1top"]], "value": {"expr": "x"}},
            {"edges": [m["s1top"], m["s5"]], "value": 0.0},
            {"edges": [m["s5"], b.count], "value": {"expr": "1-abs(y)"}},
        ]
    else:
        raise ValueError(f"unknown fixture {fixture!r}")
    return {
        "domain": {"vertices": [[float(a), float(c)] for a, c in verts],
                   "arc_resolution_deg": arc_deg},
        "datum": {"pieces": pieces},
        "source": {"kind": "constant", "value": 1.0},
        "gauge": {"kind": "euclidean"},
        "grid": {"h": h, "h_b": h_b},
    }


def load_fixture(fixture: str, *, h: float = 1.0 / 128.0,
                 h_b: float = math.pi / 180.0, arc_deg: float = 1.0,
                 tol_overrides: dict | None = None) -> Scene:
    return load_scene(scene_config(fixture, h=h, h_b=h_b, arc_deg=arc_deg),
                      tol_overrides=tol_overrides)


# ---------------------------------------------------------------------------
# Closed-form references


def _xy(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[..., 0], pts[..., 1]


def disk_u(pts) -> np.ndarray:
    x, y = _xy(pts)
    return 1.0 - np.hypot(x, y)


def disk_v(pts) -> np.ndarray:
    x, y = _xy(pts)
    return 0.5 * np.hypot(x, y)


def rect_u(pts) -> np.ndarray:
    return np.asarray(pts, dtype=float)[..., 1]


def rect_v(pts) -> np.ndarray:
    return 1.0 - np.asarray(pts, dtype=float)[..., 1]


def ex1_u(pts) -> np.ndarray:
    """Geodesic profile: 1 + x2 on the rectangle, 1 + |x| on the quarter disk."""
    x, y = _xy(pts)
    r = np.hypot(x, y)
    return np.where(x <= 0.0, 1.0 + y, 1.0 + r)


def ex2_u(pts) -> np.ndarray:
    """Geodesic profile: 1 + x2 / 1 + |x| / 1 - |x| on the three parts."""
    x, y = _xy(pts)
    r = np.hypot(x, y)
    out = np.where(x <= 0.0, 1.0 + y,
                   np.where(y >= 0.0, 1.0 + r, 1.0 - r))
    return out


def ex2_v(pts) -> np.ndarray:
    """Reference density on the ex2 parts (zero-height exits on bottom+arc).

    Rectangle: 1 - x2 (columns drain to the bottom edge, empty at the top
    wall).  Upper sector: (1-r^2)/(2r).  Lower sector: r/2.
    """
    x, y = _xy(pts)
    r = np.maximum(np.hypot(x, y), 1e-12)
    return np.where(x <= 0.0, 1.0 - y,
                    np.where(y >= 0.0, (1.0 - r * r) / (2.0 * r), 0.5 * r))


def ex2_w(pts, c_fn) -> np.ndarray:
    """Divergence-free extra density c(theta)/r on the lower sector."""
    x, y = _xy(pts)
    r = np.maximum(np.hypot(x, y), 1e-12)
    theta = np.arctan2(y, x)
    lower = (x >= 0.0) & (y <= 0.0)
    w = np.where(lower, c_fn(np.clip(theta, -np.pi / 2, -np.pi / 4)) / r, 0.0)
    return w


def c_const(theta) -> np.ndarray:
    """Constant angular profile with total mass pi/8 over (-pi/2, -pi/4)."""
    return np.full_like(np.asarray(theta, dtype=float), 0.5)


def c_ramp(theta) -> np.ndarray:
    """Linear angular profile with the same total mass pi/8."""
    th = np.asarray(theta, dtype=float)
    return (4.0 / np.pi) * (th + np.pi / 2.0)


def ex3_u(pts) -> np.ndarray:
    """Five-branch profile: 1-|x2| (rectangle), 1-|x| (sector) and the
    pointwise minimum of 1+x2, 2-x1, |x-(0,1)| on the square."""
    x, y = _xy(pts)
    r = np.hypot(x, y)
    corner = np.hypot(x, 1.0 - y)
    square = np.minimum(np.minimum(1.0 + y, 2.0 - x), corner)
    out = np.where(x <= 0.0, 1.0 - np.abs(y),
                   np.where(y <= -x, 1.0 - r, square))
    # on the sliver -x < y <= 0, x > 0 nothing is interior; keep sector value
    return out


def ex3_branches(pts, margin: float) -> dict[str, np.ndarray]:
    """Branch-membership masks, each region shrunk by ``margin``.

    Keys: rect, sector, sq_bottom, sq_right, sq_corner.  Square-branch
    membership requires the branch value to undercut both competitors by
    ``margin``, which shrinks each region by at least that much.
    """
    x, y = _xy(pts)
    r = np.hypot(x, y)
    corner = np.hypot(x, 1.0 - y)
    b_bot = 1.0 + y
    b_right = 2.0 - x
    in_square = (x >= margin) & (y >= margin) & (x <= 1.0 - margin) & \
        (y <= 1.0 - margin)
    return {
        "rect": (x <= -margin) & (np.abs(y) <= 1.0 - margin) &
                (x >= -1.0 + margin),
        "sector": (x >= margin) & (y <= -x - margin * math.sqrt(2.0)) &
                  (r <= 1.0 - margin),
        "sq_bottom": in_square & (b_bot <= b_right - margin) &
                     (b_bot <= corner - margin),
        "sq_right": in_square & (b_right <= b_bot - margin) &
                    (b_right <= corner - margin),
        "sq_corner": in_square & (corner <= b_bot - margin) &
                     (corner <= b_right - margin),
    }
