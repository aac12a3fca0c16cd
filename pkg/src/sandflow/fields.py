"""Regular grids and grid-sampled scalar fields.

Fields store one value per grid node, ``nan`` marking nodes outside the
domain.  The CSV on-disk format is lossless and diff-friendly: a header
line ``# grid x0 y0 h nx ny`` (floats with 17 significant digits), a
column-name line, then one row per defined node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Grid", "ScalarField", "FieldFormatError", "fmt_float"]

_FMT = "%.17g"


def fmt_float(x: float) -> str:
    return _FMT % float(x)


class FieldFormatError(ValueError):
    """Malformed field file or mismatched grid header."""


@dataclass(frozen=True)
class Grid:
    """Axis-aligned node lattice: node (i, j) sits at (x0 + i*h, y0 + j*h)."""

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def points(self) -> np.ndarray:
        """All node coordinates, shape (nx*ny, 2), i-major order."""
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=-1)

    def node_xy(self, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
        return np.stack([self.x0 + self.h * ii, self.y0 + self.h * jj],
                        axis=-1)

    def index_of(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-node indices (rounded); may fall outside the lattice."""
        pts = np.asarray(pts, dtype=float)
        ii = np.rint((pts[..., 0] - self.x0) / self.h).astype(int)
        jj = np.rint((pts[..., 1] - self.y0) / self.h).astype(int)
        return ii, jj

    def header(self) -> str:
        return "# grid %s %s %s %d %d" % (
            fmt_float(self.x0), fmt_float(self.y0), fmt_float(self.h),
            self.nx, self.ny)

    def matches(self, other: "Grid") -> bool:
        """Bit-exact header equality, the precondition for field exchange."""
        return (fmt_float(self.x0) == fmt_float(other.x0)
                and fmt_float(self.y0) == fmt_float(other.y0)
                and fmt_float(self.h) == fmt_float(other.h)
                and self.nx == other.nx and self.ny == other.ny)


@dataclass
class ScalarField:
    """Grid-sampled function; nan on nodes outside its domain of definition."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")

    @classmethod
    def full(cls, grid: Grid, fill: float = np.nan) -> "ScalarField":
        return cls(grid, np.full(grid.shape, fill, dtype=float))

    @classmethod
    def from_function(cls, grid: Grid, fn, mask: np.ndarray | None = None
                      ) -> "ScalarField":
        pts = grid.points()
        vals = np.asarray(fn(pts), dtype=float).reshape(grid.shape)
        if mask is not None:
            vals = np.where(mask, vals, np.nan)
        return cls(grid, vals)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)

    def interp(self, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation; nan outside the lattice or where a
        contributing corner (weight above round-off) is undefined."""
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        g = self.grid
        fx = (flat[:, 0] - g.x0) / g.h
        fy = (flat[:, 1] - g.y0) / g.h
        out = np.full(flat.shape[0], np.nan)
        ok = (fx >= -1e-9) & (fx <= g.nx - 1 + 1e-9) & \
             (fy >= -1e-9) & (fy <= g.ny - 1 + 1e-9)
        if np.any(ok):
            fxo = np.clip(fx[ok], 0.0, g.nx - 1.0)
            fyo = np.clip(fy[ok], 0.0, g.ny - 1.0)
            i0 = np.minimum(fxo.astype(int), g.nx - 2)
            j0 = np.minimum(fyo.astype(int), g.ny - 2)
            tx = fxo - i0
            ty = fyo - j0
            v = self.values
            corners = np.stack([v[i0, j0], v[i0 + 1, j0],
                                v[i0, j0 + 1], v[i0 + 1, j0 + 1]], axis=-1)
            w = np.stack([(1 - tx) * (1 - ty), tx * (1 - ty),
                          (1 - tx) * ty, tx * ty], axis=-1)
            bad = ~np.isfinite(corners)
            # Corners with negligible weight may be undefined (queries on a
            # grid line next to the domain edge); anything heavier poisons
            # the result.
            poisoned = np.any(bad & (w > 1e-9), axis=-1)
            w = np.where(bad, 0.0, w)
            vals = np.einsum("ij,ij->i", np.where(bad, 0.0, corners), w)
            wsum = w.sum(axis=-1)
            vals = np.where((wsum > 1e-12) & ~poisoned, vals / np.maximum(wsum, 1e-300), np.nan)
            out[ok] = vals
        return out.reshape(pts.shape[:-1])

    def central_gradient(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-node central differences, one-sided next to undefined
        neighbours, nan where no finite neighbour pair exists."""
        v = self.values
        h = self.grid.h
        gx = _axis_gradient(v, h, axis=0)
        gy = _axis_gradient(v, h, axis=1)
        return gx, gy

    def l1(self) -> float:
        """Grid quadrature of |field| over its defined nodes."""
        return float(np.nansum(np.abs(self.values)) * self.grid.h ** 2)

    # -- persistence --------------------------------------------------

    def save_csv(self, path, name: str = "value") -> None:
        g = self.grid
        ii, jj = np.nonzero(self.defined)
        xs = g.x0 + g.h * ii
        ys = g.y0 + g.h * jj
        vals = self.values[ii, jj]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(g.header() + "\n")
            fh.write(f"x,y,{name}\n")
            for x, y, v in zip(xs, ys, vals):
                fh.write("%s,%s,%s\n" % (fmt_float(x), fmt_float(y),
                                         fmt_float(v)))

    @classmethod
    def load_csv(cls, path) -> "ScalarField":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 7 or header[0] != "#" or header[1] != "grid":
                raise FieldFormatError(f"{path}: missing grid header")
            x0, y0, h = (float(header[k]) for k in (2, 3, 4))
            nx, ny = int(header[5]), int(header[6])
            fh.readline()  # column names
            grid = Grid(x0, y0, h, nx, ny)
            vals = np.full(grid.shape, np.nan)
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                sx, sy, sv = line.split(",")
                i = int(round((float(sx) - x0) / h))
                j = int(round((float(sy) - y0) / h))
                if not (0 <= i < nx and 0 <= j < ny):
                    raise FieldFormatError(f"{path}: row off the grid: {line}")
                vals[i, j] = float(sv)
        return cls(grid, vals)


def _axis_gradient(v: np.ndarray, h: float, axis: int) -> np.ndarray:
    fwd = np.full_like(v, np.nan)
    bwd = np.full_like(v, np.nan)
    sl_all = [slice(None), slice(None)]

    def sl(a, b):
        s = list(sl_all)
        s[axis] = slice(a, b)
        return tuple(s)

    fwd[sl(0, -1)] = v[sl(1, None)]
    bwd[sl(1, None)] = v[sl(0, -1)]
    have_f = np.isfinite(fwd)
    have_b = np.isfinite(bwd)
    out = np.full_like(v, np.nan)
    both = have_f & have_b
    out[both] = (fwd[both] - bwd[both]) / (2.0 * h)
    fonly = have_f & ~have_b & np.isfinite(v)
    out[fonly] = (fwd[fonly] - v[fonly]) / h
    bonly = have_b & ~have_f & np.isfinite(v)
    out[bonly] = (v[bonly] - bwd[bonly]) / h
    return out
