"""Scene model: polygonal domain, boundary datum with walls, source, grid.

The domain boundary is one closed, simple, counterclockwise polyline;
curved pieces are polylined by the loader.  The boundary datum assigns to
each edge either a constant height, a closed-form expression in the point
coordinates, or WALL (impassable, +inf).  Heights are sampled along the
boundary at spacing <= h_b with lower-semicontinuous values at piece
junctions (the minimum of the two one-sided values).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Grid, ScalarField, fmt_float
from .gauge import Gauge

__all__ = [
    "Boundary", "BoundaryDatum", "DatumPiece", "BoundarySamples", "Source",
    "Scene", "Tolerances", "ConfigError", "GeometryError", "load_scene",
    "arc_points",
]

_CHUNK = 4096

INTERIOR, BOUNDARY, EXTERIOR = 0, 1, 2


class GeometryError(ValueError):
    """Invalid boundary geometry (open, self-intersecting, misoriented)."""


class ConfigError(ValueError):
    """Invalid scene configuration."""


def arc_points(center, radius: float, from_deg: float, to_deg: float,
               step_deg: float = 1.0) -> np.ndarray:
    """Polyline vertices along a circular arc, end angle excluded.

    The caller (or the next boundary element) supplies the final vertex, so
    consecutive elements chain without duplicates.
    """
    cx, cy = float(center[0]), float(center[1])
    span = to_deg - from_deg
    n = max(1, int(math.ceil(abs(span) / step_deg - 1e-9)))
    ang = np.deg2rad(from_deg + span * np.arange(n) / n)
    return np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)],
                    axis=-1)


# ---------------------------------------------------------------------------
# Boundary polyline


class Boundary:
    """Closed simple CCW polyline with vectorized geometric queries."""

    def __init__(self, vertices) -> None:
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("boundary needs at least 3 planar vertices")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        self.vertices = v
        self.edge_start = v
        self.edge_vec = np.roll(v, -1, axis=0) - v
        self.edge_len = np.hypot(self.edge_vec[:, 0], self.edge_vec[:, 1])
        if np.any(self.edge_len < 1e-12):
            raise GeometryError("consecutive boundary vertices coincide")
        self.cum_arclen = np.concatenate([[0.0], np.cumsum(self.edge_len)])
        self.perimeter = float(self.cum_arclen[-1])
        if self.signed_area() <= 0.0:
            raise GeometryError("boundary must be counterclockwise")
        self._check_simple()

    @property
    def n_edges(self) -> int:
        return len(self.vertices)

    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def area(self) -> float:
        return abs(self.signed_area())

    def bbox(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return (float(v[:, 0].min()), float(v[:, 1].min()),
                float(v[:, 0].max()), float(v[:, 1].max()))

    def diameter(self, gauge: Gauge | None = None) -> float:
        """Largest vertex-to-vertex distance, in the polar gauge metric if
        a gauge is supplied, Euclidean otherwise."""
        v = self.vertices
        diff = v[None, :, :] - v[:, None, :]
        if gauge is None:
            d = np.hypot(diff[..., 0], diff[..., 1])
        else:
            d = gauge.polar_value(diff)
        return float(d.max())

    def _check_simple(self) -> None:
        e0 = self.edge_start
        ev = self.edge_vec
        n = self.n_edges
        for i in range(n):
            js = np.arange(n)
            # skip self and the two arclength-adjacent edges
            js = js[(js != i) & (js != (i - 1) % n) & (js != (i + 1) % n)]
            hit = _proper_crossings(e0[i], e0[i] + ev[i], e0[js], ev[js],
                                    t_lo=1e-12, t_hi=1e-12)
            if np.any(hit):
                raise GeometryError(f"boundary self-intersects near edge {i}")

    # -- point queries (vectorized, chunked) ---------------------------

    def distance(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.empty(len(pts))
        for lo in range(0, len(pts), _CHUNK):
            out[lo:lo + _CHUNK] = self._distance_chunk(pts[lo:lo + _CHUNK])
        return out

    def _distance_chunk(self, p: np.ndarray) -> np.ndarray:
        rel = p[:, None, :] - self.edge_start[None, :, :]
        ev = self.edge_vec[None, :, :]
        ll = (self.edge_len ** 2)[None, :]
        t = np.clip(np.einsum("pek,pek->pe", rel, np.broadcast_to(ev, rel.shape)) / ll, 0.0, 1.0)
        foot = self.edge_start[None, :, :] + t[..., None] * ev
        d = np.hypot(p[:, None, 0] - foot[..., 0], p[:, None, 1] - foot[..., 1])
        return d.min(axis=1)

    def nearest_point(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.empty_like(pts)
        for lo in range(0, len(pts), _CHUNK):
            p = pts[lo:lo + _CHUNK]
            rel = p[:, None, :] - self.edge_start[None, :, :]
            ev = self.edge_vec[None, :, :]
            ll = (self.edge_len ** 2)[None, :]
            t = np.clip(np.einsum("pek,pek->pe", rel, np.broadcast_to(ev, rel.shape)) / ll, 0.0, 1.0)
            foot = self.edge_start[None, :, :] + t[..., None] * ev
            d = np.hypot(p[:, None, 0] - foot[..., 0],
                         p[:, None, 1] - foot[..., 1])
            best = d.argmin(axis=1)
            out[lo:lo + _CHUNK] = foot[np.arange(len(p)), best]
        return out

    def inside(self, pts) -> np.ndarray:
        """Even-odd point-in-polygon test (boundary points unspecified)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.empty(len(pts), dtype=bool)
        x0 = self.edge_start[:, 0]
        y0 = self.edge_start[:, 1]
        x1 = x0 + self.edge_vec[:, 0]
        y1 = y0 + self.edge_vec[:, 1]
        for lo in range(0, len(pts), _CHUNK):
            p = pts[lo:lo + _CHUNK]
            px = p[:, 0][:, None]
            py = p[:, 1][:, None]
            straddle = (y0[None, :] > py) != (y1[None, :] > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x0[None, :] + (py - y0[None, :]) * \
                    (self.edge_vec[:, 0][None, :] /
                     np.where(self.edge_vec[:, 1][None, :] == 0.0, np.nan,
                              self.edge_vec[:, 1][None, :]))
            crossings = straddle & (px < xint)
            out[lo:lo + _CHUNK] = (crossings.sum(axis=1) % 2).astype(bool)
        return out

    def classify(self, pts, band: float) -> np.ndarray:
        """0 interior, 1 within `band` of the boundary, 2 exterior."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        cls = np.full(len(pts), EXTERIOR, dtype=np.int8)
        d = self.distance(pts)
        near = d <= band
        cls[near] = BOUNDARY
        far = ~near
        if np.any(far):
            ins = self.inside(pts[far])
            cls[far] = np.where(ins, INTERIOR, EXTERIOR)
        return cls

    def not_exterior(self, pts, band: float) -> np.ndarray:
        """Cheap variant of classify != EXTERIOR: the distance test runs
        only on the points that fail the insideness test."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        ok = self.inside(pts)
        out = np.nonzero(~ok)[0]
        if len(out):
            ok[out] = self.distance(pts[out]) <= band
        return ok

    # -- segment queries ------------------------------------------------

    def segments_cross(self, starts, ends, t_lo: float = 1e-9) -> np.ndarray:
        """True where the segment properly crosses some boundary edge.

        Crossings within parameter ``t_lo`` of the segment start are
        ignored, so segments may begin on the boundary itself.
        """
        starts = np.asarray(starts, dtype=float).reshape(-1, 2)
        ends = np.asarray(ends, dtype=float).reshape(-1, 2)
        out = np.zeros(len(starts), dtype=bool)
        for lo in range(0, len(starts), _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            out[sl] = _segments_cross_edges(
                starts[sl], ends[sl], self.edge_start, self.edge_vec,
                t_lo=t_lo)
        return out

    def first_crossing(self, start, direction, s_max: float,
                       s_lo: float = 0.0) -> float | None:
        """Smallest s in (s_lo, s_max] where start + s*direction meets an
        edge, or None."""
        start = np.asarray(start, dtype=float)
        d = np.asarray(direction, dtype=float)
        e0 = self.edge_start
        ev = self.edge_vec
        denom = d[0] * ev[:, 1] - d[1] * ev[:, 0]
        rel = e0 - start[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (rel[:, 0] * ev[:, 1] - rel[:, 1] * ev[:, 0]) / denom
            u = (rel[:, 0] * d[1] - rel[:, 1] * d[0]) / denom
        ok = (np.abs(denom) > 1e-14) & (s > s_lo) & (s <= s_max) & \
            (u >= -1e-12) & (u <= 1.0 + 1e-12)
        if not np.any(ok):
            return None
        return float(s[ok].min())

    def edge_and_param_at(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Nearest edge index and clamped parameter along it, per point."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        idx = np.empty(len(pts), dtype=int)
        par = np.empty(len(pts))
        for lo in range(0, len(pts), _CHUNK):
            p = pts[lo:lo + _CHUNK]
            rel = p[:, None, :] - self.edge_start[None, :, :]
            ev = self.edge_vec[None, :, :]
            ll = (self.edge_len ** 2)[None, :]
            t = np.clip(np.einsum("pek,pek->pe", rel, np.broadcast_to(ev, rel.shape)) / ll, 0.0, 1.0)
            foot = self.edge_start[None, :, :] + t[..., None] * ev
            d = np.hypot(p[:, None, 0] - foot[..., 0],
                         p[:, None, 1] - foot[..., 1])
            best = d.argmin(axis=1)
            idx[lo:lo + _CHUNK] = best
            par[lo:lo + _CHUNK] = t[np.arange(len(p)), best]
        return idx, par


def _proper_crossings(s0, s1, e0, ev, t_lo: float, t_hi: float) -> np.ndarray:
    """Proper crossing of one segment against many edges."""
    s0 = np.asarray(s0, dtype=float)
    v = np.asarray(s1, dtype=float) - s0
    denom = v[0] * ev[:, 1] - v[1] * ev[:, 0]
    rel = e0 - s0[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[:, 0] * ev[:, 1] - rel[:, 1] * ev[:, 0]) / denom
        u = (rel[:, 0] * v[1] - rel[:, 1] * v[0]) / denom
    return (np.abs(denom) > 1e-14) & (t > t_lo) & (t < 1.0 - t_hi) & \
        (u > 1e-12) & (u < 1.0 - 1e-12)


def _segments_cross_edges(starts, ends, e0, ev, t_lo: float) -> np.ndarray:
    v = ends - starts                                    # (K,2)
    denom = v[:, 0][:, None] * ev[:, 1][None, :] - \
        v[:, 1][:, None] * ev[:, 0][None, :]             # (K,E)
    relx = e0[None, :, 0] - starts[:, 0][:, None]
    rely = e0[None, :, 1] - starts[:, 1][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (relx * ev[None, :, 1] - rely * ev[None, :, 0]) / denom
        u = (relx * v[:, 1][:, None] - rely * v[:, 0][:, None]) / denom
    hit = (np.abs(denom) > 1e-14) & (t > t_lo) & (t < 1.0 - 1e-12) & \
        (u >= -1e-12) & (u <= 1.0 + 1e-12)
    return np.any(hit, axis=1)


# ---------------------------------------------------------------------------
# Boundary datum

_EXPR_NAMES = {
    "sqrt": np.sqrt, "abs": np.abs, "sin": np.sin, "cos": np.cos,
    "tan": np.tan, "exp": np.exp, "log": np.log, "hypot": np.hypot,
    "atan2": np.arctan2, "minimum": np.minimum, "maximum": np.maximum,
    "pi": np.pi,
}


@dataclass
class DatumPiece:
    """Height (or WALL) on the half-open edge range [lo, hi)."""

    lo: int
    hi: int
    kind: str                  # "const" | "expr" | "wall"
    value: float = 0.0
    expr: str | None = None
    _code: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("const", "expr", "wall"):
            raise ConfigError(f"unknown datum piece kind {self.kind!r}")
        if self.kind == "expr":
            if not self.expr:
                raise ConfigError("expression piece without expression")
            self._code = compile(self.expr, "<datum>", "eval")

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.kind == "wall":
            return np.full(pts.shape[:-1], np.inf)
        if self.kind == "const":
            return np.full(pts.shape[:-1], self.value)
        ns = dict(_EXPR_NAMES)
        ns["x"] = pts[..., 0]
        ns["y"] = pts[..., 1]
        out = eval(self._code, {"__builtins__": {}}, ns)  # noqa: S307
        return np.broadcast_to(np.asarray(out, dtype=float),
                               pts.shape[:-1]).copy()


class BoundaryDatum:
    """Piecewise boundary heights covering every edge exactly once."""

    def __init__(self, pieces: list[DatumPiece], n_edges: int) -> None:
        owner = np.full(n_edges, -1, dtype=int)
        for k, piece in enumerate(pieces):
            if not (0 <= piece.lo < piece.hi <= n_edges):
                raise ConfigError(
                    f"piece edge range [{piece.lo},{piece.hi}) out of bounds")
            if np.any(owner[piece.lo:piece.hi] >= 0):
                raise ConfigError("datum pieces overlap")
            owner[piece.lo:piece.hi] = k
        if np.any(owner < 0):
            raise ConfigError("datum pieces do not cover every edge")
        if all(p.kind == "wall" for p in pieces):
            raise ConfigError("boundary datum is wall everywhere")
        self.pieces = pieces
        self.owner = owner

    def piece_of_edge(self, e: int) -> DatumPiece:
        return self.pieces[self.owner[e]]

    def value_at(self, edge: int, pts: np.ndarray) -> np.ndarray:
        return self.piece_of_edge(edge).eval(pts)


@dataclass
class BoundarySamples:
    """Datum sampled along the boundary, lower-semicontinuous at junctions.

    WALL samples carry value +inf and wall=True; they never participate in
    minimizations."""

    points: np.ndarray          # (M, 2)
    values: np.ndarray          # (M,), +inf on walls
    wall: np.ndarray            # (M,) bool
    edge: np.ndarray            # (M,) int
    arclen: np.ndarray          # (M,)
    piece: np.ndarray           # (M,) int
    lipschitz: float            # slope bound of the sampled datum off walls
    spacing: float              # max arclength gap between adjacent samples

    def __len__(self) -> int:
        return len(self.values)

    @property
    def finite(self) -> np.ndarray:
        return ~self.wall


def _build_samples(boundary: Boundary, datum: BoundaryDatum,
                   h_b: float) -> BoundarySamples:
    pts, vals, wall, edges, arcs, pieces = [], [], [], [], [], []
    n = boundary.n_edges
    for e in range(n):
        length = boundary.edge_len[e]
        m = max(1, int(math.ceil(length / h_b - 1e-9)))
        t = np.arange(m) / m
        p = boundary.edge_start[e][None, :] + t[:, None] * boundary.edge_vec[e][None, :]
        piece = datum.piece_of_edge(e)
        v = piece.eval(p)
        # vertex sample: lower semicontinuity across the junction
        prev_piece = datum.piece_of_edge((e - 1) % n)
        v_prev = float(prev_piece.eval(p[0]))
        v[0] = min(v[0], v_prev)
        pts.append(p)
        vals.append(v)
        wall.append(~np.isfinite(v))
        edges.append(np.full(m, e, dtype=int))
        arcs.append(boundary.cum_arclen[e] + t * length)
        pieces.append(np.full(m, datum.owner[e], dtype=int))
    pts = np.concatenate(pts)
    vals = np.concatenate(vals)
    wall = np.concatenate(wall)
    edges = np.concatenate(edges)
    arcs = np.concatenate(arcs)
    pieces = np.concatenate(pieces)
    if np.all(wall):
        raise ConfigError("sampled boundary datum is wall everywhere")
    # slope of the sampled datum between consecutive non-wall samples of one
    # piece, the scale for projection tolerances
    lip = 0.0
    same = (pieces[1:] == pieces[:-1]) & ~wall[1:] & ~wall[:-1]
    if np.any(same):
        dv = np.abs(vals[1:][same] - vals[:-1][same])
        ds = (arcs[1:] - arcs[:-1])[same]
        lip = float((dv / np.maximum(ds, 1e-300)).max())
    gaps = np.diff(np.concatenate([arcs, [boundary.perimeter]]))
    return BoundarySamples(pts, vals, wall, edges, arcs, pieces, lip,
                           float(gaps.max()))


# ---------------------------------------------------------------------------
# Source


class Source:
    """Nonnegative mass source; sampled on the scene grid.

    Kinds: ``constant`` (value), ``disk`` (center/radius/amplitude),
    ``grid`` (explicit node values, or a field CSV path whose grid must
    match the scene grid bit-exactly).
    """

    def __init__(self, kind: str, *, value: float = 0.0, center=None,
                 radius: float = 0.0, amplitude: float = 1.0,
                 values: np.ndarray | None = None, path: str | None = None):
        if kind not in ("constant", "disk", "grid"):
            raise ConfigError(f"unknown source kind {kind!r}")
        self.kind = kind
        self.value = float(value)
        self.center = None if center is None else np.asarray(center, float)
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.values = None if values is None else np.asarray(values, float)
        self.path = path
        if kind == "constant" and self.value < 0.0:
            raise ConfigError("constant source must be nonnegative")
        if kind == "disk" and (self.radius <= 0.0 or self.amplitude < 0.0):
            raise ConfigError("disk source needs radius > 0, amplitude >= 0")
        if kind == "grid" and self.values is None and self.path is None:
            raise ConfigError("grid source needs values or a file path")
        if self.values is not None and np.any(self.values[np.isfinite(self.values)] < 0.0):
            raise ConfigError("grid source has negative samples")

    @classmethod
    def from_config(cls, cfg: dict) -> "Source":
        kind = cfg.get("kind")
        if kind == "constant":
            return cls("constant", value=cfg["value"])
        if kind == "disk":
            return cls("disk", center=cfg["center"], radius=cfg["radius"],
                       amplitude=cfg.get("amplitude", 1.0))
        if kind == "grid":
            return cls("grid", path=cfg.get("path"),
                       values=cfg.get("values"))
        raise ConfigError(f"unknown source kind {kind!r}")

    def sample_on(self, grid: Grid, interior: np.ndarray) -> np.ndarray:
        """Node values, zero outside the interior mask."""
        if self.kind == "constant":
            f = np.full(grid.shape, self.value)
        elif self.kind == "disk":
            pts = grid.points()
            r = np.hypot(pts[:, 0] - self.center[0],
                         pts[:, 1] - self.center[1]).reshape(grid.shape)
            f = np.where(r <= self.radius, self.amplitude, 0.0)
        else:
            if self.values is not None:
                f = np.asarray(self.values, dtype=float)
                if f.shape != grid.shape:
                    raise ConfigError("grid source shape mismatch")
            else:
                fld = ScalarField.load_csv(self.path)
                if not fld.grid.matches(grid):
                    raise ConfigError(
                        "grid source file does not match the scene grid")
                f = fld.values
            f = np.where(np.isfinite(f), f, 0.0)
        return np.where(interior, f, 0.0)


# ---------------------------------------------------------------------------
# Tolerances


@dataclass
class Tolerances:
    """Resolution-scaled thresholds; `*_factor` entries multiply h."""

    eps_ridge: float = 0.2       # direction-set diameter flagging a ridge
    ray_factor: float = 4.0      # linear-growth tolerance along rays
    agree_factor: float = 4.0    # straight-line vs geodesic agreement
    h6_factor: float = 4.0       # endpoint / exit-set separation margin
    j_factor: float = 2.0        # endpoint-in-support margin
    c_grid: float = 8.0          # generic O(h) comparison constant
    proj_factor: float = 2.0     # projection-set padding (x h x (1 + Lip))
    tol_weak: float = 0.05       # relative weak-form residual bound
    n_tests: int = 32            # random test bumps per verification
    seed: int = 0                # RNG seed for test-bump sampling

    def replace(self, overrides: dict | None) -> "Tolerances":
        if not overrides:
            return self
        out = Tolerances(**{**self.__dict__})
        for k, v in overrides.items():
            if not hasattr(out, k):
                raise ConfigError(f"unknown tolerance {k!r}")
            cur = getattr(out, k)
            setattr(out, k, type(cur)(v))
        return out


# ---------------------------------------------------------------------------
# Scene


class Scene:
    """Immutable problem instance plus cached grid-level geometry."""

    def __init__(self, boundary: Boundary, datum: BoundaryDatum,
                 source: Source, gauge: Gauge, h: float, h_b: float,
                 tol: Tolerances | None = None):
        if h <= 0.0 or h_b <= 0.0:
            raise ConfigError("grid spacings must be positive")
        self.boundary = boundary
        self.datum = datum
        self.source = source
        self.gauge = gauge
        self.h = float(h)
        self.h_b = float(h_b)
        self.tol = tol or Tolerances()
        self._grid: Grid | None = None
        self._classes: np.ndarray | None = None
        self._samples: BoundarySamples | None = None
        self._fcache: dict[int, np.ndarray] = {}
        self._bdist: np.ndarray | None = None

    # -- lazy geometry --------------------------------------------------

    @property
    def grid(self) -> Grid:
        if self._grid is None:
            xmin, ymin, xmax, ymax = self.boundary.bbox()
            nx = int(math.ceil((xmax - xmin) / self.h - 1e-9)) + 1
            ny = int(math.ceil((ymax - ymin) / self.h - 1e-9)) + 1
            self._grid = Grid(xmin, ymin, self.h, nx, ny)
        return self._grid

    @property
    def classes(self) -> np.ndarray:
        """Node classification grid: interior / boundary band / exterior."""
        if self._classes is None:
            pts = self.grid.points()
            self._classes = self.boundary.classify(
                pts, band=self.h_b / 2.0).reshape(self.grid.shape)
        return self._classes

    @property
    def interior(self) -> np.ndarray:
        return self.classes == INTERIOR

    @property
    def samples(self) -> BoundarySamples:
        if self._samples is None:
            self._samples = _build_samples(self.boundary, self.datum,
                                           self.h_b)
        return self._samples

    def boundary_distance_grid(self) -> np.ndarray:
        """Distance from every grid node to the boundary polyline."""
        if self._bdist is None:
            self._bdist = self.boundary.distance(
                self.grid.points()).reshape(self.grid.shape)
        return self._bdist

    def source_field(self, source: Source | None = None) -> np.ndarray:
        src = source if source is not None else self.source
        key = id(src)
        if key not in self._fcache:
            self._fcache[key] = src.sample_on(self.grid, self.interior)
        return self._fcache[key]

    def support_mask(self, source: Source | None = None) -> np.ndarray:
        """Nodes where the sampled source is strictly positive."""
        return self.source_field(source) > 0.0

    # -- derived tolerances ----------------------------------------------

    @property
    def eps_proj(self) -> float:
        return self.tol.proj_factor * self.h * (1.0 + self.samples.lipschitz)

    @property
    def eps_ray(self) -> float:
        return self.tol.ray_factor * self.h

    # -- predicates --------------------------------------------------------

    def contains(self, point) -> str:
        cls = int(self.boundary.classify(np.asarray(point, float)[None, :],
                                         band=self.h_b / 2.0)[0])
        return ("interior", "boundary", "exterior")[cls]

    def segments_clear(self, starts, ends, n_probes: int = 3) -> np.ndarray:
        """Fast visibility core: no proper edge crossing and interior-side
        probe points along each segment not exterior."""
        starts = np.asarray(starts, dtype=float).reshape(-1, 2)
        ends = np.asarray(ends, dtype=float).reshape(-1, 2)
        ok = ~self.boundary.segments_cross(starts, ends)
        if np.any(ok) and n_probes > 0:
            idx = np.nonzero(ok)[0]
            fr = (np.arange(n_probes) + 1.0) / (n_probes + 1.0)
            probes = starts[idx, None, :] + fr[None, :, None] * \
                (ends[idx] - starts[idx])[:, None, :]
            good = self.boundary.not_exterior(probes.reshape(-1, 2),
                                              band=self.h_b / 2.0)
            bad = ~good.reshape(len(idx), n_probes).all(axis=1)
            ok[idx[bad]] = False
        return ok

    def open_segment_in_domain(self, y, x) -> bool:
        """True iff the open segment ]y, x[ stays inside the open domain.

        Decided by exact segment/edge crossing tests plus dense sampling of
        the segment at spacing h/4 (no sampled point may be exterior).
        """
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        length = float(np.hypot(*(x - y)))
        if length < 1e-15:
            return True
        if bool(self.boundary.segments_cross(y[None, :], x[None, :])[0]):
            return False
        n = max(2, int(math.ceil(length / (self.h / 4.0))))
        t = np.arange(1, n) / n
        pts = y[None, :] + t[:, None] * (x - y)[None, :]
        cls = self.boundary.classify(pts, band=self.h_b / 2.0)
        return not bool(np.any(cls == EXTERIOR))

    def to_config(self) -> dict:
        pieces = []
        for p in self.datum.pieces:
            if p.kind == "wall":
                val = "wall"
            elif p.kind == "expr":
                val = {"expr": p.expr}
            else:
                val = p.value
            pieces.append({"edges": [p.lo, p.hi], "value": val})
        src = self.source
        if src.kind == "constant":
            scfg = {"kind": "constant", "value": src.value}
        elif src.kind == "disk":
            scfg = {"kind": "disk", "center": list(map(float, src.center)),
                    "radius": src.radius, "amplitude": src.amplitude}
        else:
            scfg = {"kind": "grid", "path": src.path}
        return {
            "domain": {"vertices": [[float(a), float(b)]
                                    for a, b in self.boundary.vertices]},
            "datum": {"pieces": pieces},
            "source": scfg,
            "gauge": self.gauge.to_config(),
            "grid": {"h": self.h, "h_b": self.h_b},
        }


# ---------------------------------------------------------------------------
# Loader


def _expand_vertices(elements, step_deg: float) -> np.ndarray:
    chunks = []
    for el in elements:
        if isinstance(el, dict):
            chunks.append(arc_points(el["center"], float(el["radius"]),
                                     float(el["from_deg"]),
                                     float(el["to_deg"]), step_deg))
        else:
            chunks.append(np.asarray(el, dtype=float)[None, :])
    return np.concatenate(chunks, axis=0)


def _piece_from_config(cfg: dict) -> DatumPiece:
    lo, hi = int(cfg["edges"][0]), int(cfg["edges"][1])
    val = cfg["value"]
    if isinstance(val, str):
        if val != "wall":
            raise ConfigError(f"unknown datum value {val!r}")
        return DatumPiece(lo, hi, "wall")
    if isinstance(val, dict):
        return DatumPiece(lo, hi, "expr", expr=val["expr"])
    return DatumPiece(lo, hi, "const", value=float(val))


def load_scene(config, *, h: float | None = None, h_b: float | None = None,
               tol_overrides: dict | None = None) -> Scene:
    """Build a Scene from a config dict or a JSON file path."""
    if isinstance(config, (str, bytes)) or hasattr(config, "read"):
        with open(config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    else:
        cfg = config
    try:
        dom = cfg["domain"]
        step = float(dom.get("arc_resolution_deg", 1.0))
        boundary = Boundary(_expand_vertices(dom["vertices"], step))
        pieces = [_piece_from_config(p) for p in cfg["datum"]["pieces"]]
        datum = BoundaryDatum(pieces, boundary.n_edges)
        source = Source.from_config(cfg["source"])
        gauge = Gauge.from_config(cfg.get("gauge", {"kind": "euclidean"}))
        grid_cfg = cfg.get("grid", {})
        hh = h if h is not None else float(grid_cfg.get("h", 1.0 / 128.0))
        hb = h_b if h_b is not None else float(
            grid_cfg.get("h_b", math.pi / 180.0))
        tol = Tolerances().replace(cfg.get("tolerances"))
        tol = tol.replace(tol_overrides)
    except KeyError as exc:
        raise ConfigError(f"missing scene config key: {exc}") from exc
    return Scene(boundary, datum, source, gauge, hh, hb, tol)
