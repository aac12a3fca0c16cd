"""Ray-bundle decomposition, cross-section density and transported mass.

Along each transport ray the cross-section density alpha solves
``d(log alpha)/dt = div d`` with alpha = 1 at the reference point; it is
the transverse width of an infinitesimal bundle of rays.  The transport
density at a node integrates source * alpha forward along the node's ray,

    v(x) = integral_0^b(x) f(x + t d) * alpha(x + t d) / alpha(x) dt,

and the minimal admissible profile propagates the maximal profile
backwards from the source support with unit-slope decay.

Everything here presumes straight non-branching rays; callers must have
certified that hypothesis first (build_slices refuses otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .eikonal import _OFFSETS, REASON_NONE, LaxHopf, RayField, SolverError
from .fields import ScalarField
from .geometry import Scene, Source

__all__ = ["RaySlices", "HypothesisError", "build_slices", "div_d_field",
           "alpha_along_ray", "transport_density", "minimal_profile",
           "disintegration_area"]


class HypothesisError(RuntimeError):
    """Operation requires a certified hypothesis that does not hold."""


@dataclass
class RaySlices:
    """Disjoint transversal-strip decomposition seeded on grid lines.

    Every usable node seeds the grid line through it most transverse to
    its ray direction (the axis of largest |d| component, ties toward the
    first axis).  A seed owns the segment of its ray within half a spacing
    of its line in the transverse coordinate; with |d_axis| maximal the
    segment crosses the strip once, the strips of one line tile the strip
    band, and distinct lines are disjoint, so the whole family is a valid
    (if fine-grained) ray-bundle decomposition of the domain minus the
    ridge.
    """

    seed_axis: np.ndarray = field(repr=False)   # -1 none, else 0 / 1
    seed_line: np.ndarray = field(repr=False)   # grid line index per seed
    t_lo: np.ndarray = field(repr=False)        # owned segment start (<=0)
    t_hi: np.ndarray = field(repr=False)        # owned segment end (>=0)
    covered: np.ndarray = field(repr=False)
    coverage: float = 0.0
    n_slices: int = 0

    def seeds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.seed_axis >= 0)


def build_slices(scene: Scene, rf: RayField, *, h5_certified: bool
                 ) -> RaySlices:
    """Transversal-strip decomposition (refuses without straight rays)."""
    if not h5_certified:
        raise HypothesisError(
            "ray-bundle decomposition requires certified straight-line "
            "transport (H5)")
    grid = scene.grid
    nx, ny = grid.shape
    interior = scene.interior
    usable = interior & ~rf.ridge & (rf.p_index >= 0) & \
        np.isfinite(rf.d[..., 0])
    absd = np.abs(rf.d)
    axis = np.where(absd[..., 0] >= absd[..., 1], 0, 1)

    seed_axis = np.full((nx, ny), -1, dtype=np.int8)
    seed_line = np.full((nx, ny), -1, dtype=int)
    t_lo = np.full((nx, ny), np.nan)
    t_hi = np.full((nx, ny), np.nan)
    ii, jj = np.nonzero(usable)
    ax = axis[ii, jj]
    seed_axis[ii, jj] = ax
    seed_line[ii, jj] = np.where(ax == 0, ii, jj)
    dj = np.abs(np.where(ax == 0, rf.d[ii, jj, 0], rf.d[ii, jj, 1]))
    half = scene.h / (2.0 * np.maximum(dj, 1e-12))
    t_lo[ii, jj] = np.maximum(rf.a[ii, jj], -half)
    t_hi[ii, jj] = np.minimum(rf.b[ii, jj], half)
    lines0 = np.unique(seed_line[(seed_axis == 0)])
    lines1 = np.unique(seed_line[(seed_axis == 1)])
    coverage = float(usable.sum()) / max(1, int(interior.sum()))
    return RaySlices(seed_axis, seed_line, t_lo, t_hi, usable, coverage,
                     len(lines0) + len(lines1))


def div_d_field(scene: Scene, rf: RayField) -> ScalarField:
    """Central-difference divergence of the ray direction field.

    Defined only where the four axis neighbours carry clean directions and
    nothing within two cells is ridge-flagged; the integrators reuse the
    nearest valid sample along each ray across the gaps.
    """
    d = rf.d
    h = scene.h
    good = scene.interior & ~rf.ridge & np.isfinite(d[..., 0])
    bad = ~good
    # keep clear of flagged nodes: 2-cell Chebyshev dilation of the ridge
    near_ridge = _dilate(rf.ridge, 2)
    div = np.full(scene.grid.shape, np.nan)
    ok = good & ~near_ridge
    ok[[0, -1], :] = False
    ok[:, [0, -1]] = False
    ii, jj = np.nonzero(ok)
    nb_ok = good[ii + 1, jj] & good[ii - 1, jj] & good[ii, jj + 1] & \
        good[ii, jj - 1]
    ii, jj = ii[nb_ok], jj[nb_ok]
    div[ii, jj] = (d[ii + 1, jj, 0] - d[ii - 1, jj, 0]
                   + d[ii, jj + 1, 1] - d[ii, jj - 1, 1]) / (2.0 * h)
    return ScalarField(scene.grid, div)


def _dilate(mask: np.ndarray, cells: int) -> np.ndarray:
    out = mask.copy()
    for _ in range(cells):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        grown[1:, 1:] |= out[:-1, :-1]
        grown[1:, :-1] |= out[:-1, 1:]
        grown[:-1, 1:] |= out[1:, :-1]
        grown[:-1, :-1] |= out[1:, 1:]
        out = grown
    return out


def _ray_march_integrals(scene: Scene, x, dd, extent, divd: ScalarField,
                         f_vals: np.ndarray | None,
                         step: float | None = None):
    """March rays from their reference points accumulating
    integral alpha dt and (optionally) integral f*alpha dt, with alpha
    normalized to 1 at t=0.  ``extent`` >= 0 is the march length along dd.

    Log-alpha is integrated by trapezoid on div d sampled bilinearly every
    h/2, carrying the last valid sample across undefined stretches.
    Returns (int_alpha, int_f_alpha, alpha_end).
    """
    n = len(x)
    if step is None:
        step = scene.h / 2.0
    f_field = None
    if f_vals is not None:
        f_field = ScalarField(scene.grid, f_vals)

    t = np.zeros(n)
    log_a = np.zeros(n)
    alpha_prev = np.ones(n)
    dv0 = divd.interp(x)
    dv_prev = np.where(np.isfinite(dv0), dv0, 0.0)  # last valid-or-carried
    int_alpha = np.zeros(n)
    int_fa = np.zeros(n)
    f_prev = None
    if f_field is not None:
        f_prev = f_field.interp(x)
        f_prev = np.where(np.isfinite(f_prev), f_prev, 0.0)
    alive = np.nonzero(extent > 1e-15)[0]
    max_iter = int(math.ceil(float(extent.max(initial=0.0)) / step)) + 2
    for _ in range(max_iter):
        if not len(alive):
            break
        dt = np.minimum(step, extent[alive] - t[alive])
        pos = x[alive] + (t[alive] + dt)[:, None] * dd[alive]
        dv = divd.interp(pos)
        dv = np.where(np.isfinite(dv), dv, dv_prev[alive])
        log_a[alive] += 0.5 * (dv_prev[alive] + dv) * dt
        alpha = np.exp(log_a[alive])
        int_alpha[alive] += 0.5 * (alpha_prev[alive] + alpha) * dt
        if f_field is not None:
            fv = f_field.interp(pos)
            fv = np.where(np.isfinite(fv), fv, 0.0)
            int_fa[alive] += 0.5 * (f_prev[alive] * alpha_prev[alive]
                                    + fv * alpha) * dt
            f_prev[alive] = fv
        dv_prev[alive] = dv
        alpha_prev[alive] = alpha
        t[alive] += dt
        alive = alive[extent[alive] - t[alive] > 1e-12]
    return int_alpha, int_fa, alpha_prev


def alpha_along_ray(scene: Scene, rf: RayField, divd: ScalarField, seed,
                    ts) -> np.ndarray:
    """Cross-section density along one ray, normalized to 1 at the seed.

    ``ts`` are signed offsets along the ray direction; they must lie in
    the open extent (a(seed), b(seed))."""
    seed = np.asarray(seed, dtype=float)
    gi, gj = scene.grid.index_of(seed)
    a, b = rf.a[gi, gj], rf.b[gi, gj]
    dd = rf.d[gi, gj]
    if not np.isfinite(a) or not np.isfinite(dd[0]) or rf.ridge[gi, gj]:
        raise SolverError("alpha undefined: seed has no clean ray")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts <= a - 1e-12) or np.any(ts >= b + 1e-12):
        raise ValueError("t outside the ray extent")
    step = scene.h / 2.0
    out = np.empty(len(ts))
    for k, tval in enumerate(ts):
        n = max(1, int(math.ceil(abs(tval) / step)))
        tg = np.linspace(0.0, tval, n + 1)
        dv = divd.interp(seed[None, :] + tg[:, None] * dd[None, :])
        dv = _carry_fill(dv)
        log_a = np.trapezoid(dv, tg)
        out[k] = math.exp(log_a)
    return out


def _carry_fill(vals: np.ndarray) -> np.ndarray:
    """Replace nan entries with the nearest valid value along the array."""
    out = vals.copy()
    good = np.isfinite(out)
    if not good.any():
        return np.zeros_like(out)
    idx = np.nonzero(good)[0]
    filled = np.interp(np.arange(len(out)), idx, out[idx])
    out[~good] = filled[~good]
    return out


def transport_density(scene: Scene, lh: LaxHopf, rf: RayField,
                      slices: RaySlices, source: Source | None = None,
                      f_values: np.ndarray | None = None) -> ScalarField:
    """Transported-mass density field via forward ray quadrature.

    Ridge nodes get density zero (they carry no forward ray and have zero
    area in the limit).  ``f_values`` overrides the source with raw node
    values (used for linear combinations of sources)."""
    grid = scene.grid
    interior = scene.interior
    if f_values is None:
        f_values = scene.source_field(source)
    divd = div_d_field(scene, rf)

    v = np.full(grid.shape, np.nan)
    ii, jj = np.nonzero(rf.nontrivial & interior)
    pts = grid.points().reshape(grid.shape + (2,))
    x = pts[ii, jj]
    dd = rf.d[ii, jj]
    b = rf.b[ii, jj]
    _, int_fa, alpha_end = _ray_march_integrals(scene, x, dd, b, divd,
                                                f_values)
    v[ii, jj] = int_fa
    v[interior & (rf.ridge | (rf.reason == REASON_NONE))] = 0.0
    if rf.alpha_end is None:
        rf.alpha_end = np.full(grid.shape, np.nan)
    rf.alpha_end[ii, jj] = alpha_end
    rf.alpha_end[interior & rf.ridge] = 1.0
    return ScalarField(grid, v)


def disintegration_area(scene: Scene, rf: RayField, slices: RaySlices
                        ) -> float:
    """Quadrature of the constant 1 through the bundle decomposition:
    sum over seeds of (integral of alpha over the owned ray segment) times
    the transverse seed weight h*|d_axis|.  Reproduces the domain area when
    the strips tile and alpha tracks the bundle cross-section."""
    divd = div_d_field(scene, rf)
    si, sj = slices.seeds()
    pts = scene.grid.points().reshape(scene.grid.shape + (2,))
    x = pts[si, sj]
    dd = rf.d[si, sj]
    lo = slices.t_lo[si, sj]
    hi = slices.t_hi[si, sj]
    fwd, _, _ = _ray_march_integrals(scene, x, dd, np.maximum(hi, 0.0),
                                     divd, None, step=scene.h / 8.0)
    bwd, _, _ = _ray_march_integrals(scene, x, -dd, np.maximum(-lo, 0.0),
                                     divd_neg(divd), None,
                                     step=scene.h / 8.0)
    ax = slices.seed_axis[si, sj]
    w = np.abs(rf.d[si, sj, 0] * (ax == 0) + rf.d[si, sj, 1] * (ax == 1))
    return float(np.sum((fwd + bwd) * w) * scene.h)


def divd_neg(divd: ScalarField) -> ScalarField:
    """Divergence field of the reversed direction field."""
    return ScalarField(divd.grid, -divd.values)


def minimal_profile(scene: Scene, lh: LaxHopf, source: Source | None = None
                    ) -> ScalarField | None:
    """Smallest admissible profile: the maximal profile on the source
    support, propagated outwards with unit-gauge decay.

    Returns None when the source vanishes identically (the profile is
    unbounded below; every admissible profile solves the problem then).
    """
    grid = scene.grid
    interior = scene.interior
    support = scene.support_mask(source) & interior & lh.u.defined
    if not support.any():
        return None
    nx, ny = grid.shape
    ids = np.full((nx, ny), -1, dtype=int)
    nodes = np.nonzero(interior)
    n_nodes = len(nodes[0])
    ids[nodes] = np.arange(n_nodes)
    polar = scene.gauge.polar()

    def shift_ids(ai, aj):
        out = np.full_like(ids, -1)
        i0, i1 = max(0, -ai), min(nx, nx - ai)
        j0, j1 = max(0, -aj), min(ny, ny - aj)
        out[i0:i1, j0:j1] = ids[i0 + ai:i1 + ai, j0 + aj:j1 + aj]
        return out

    rows, cols, wts = [], [], []
    for di, dj in _OFFSETS:
        # graph edge (from -> to) carries the decay cost of the step
        # to -> from of a path leaving `to`, so relaxation runs outwards
        w = float(polar.value(np.array([di * grid.h, dj * grid.h])))
        nb = shift_ids(di, dj)
        ok = (ids >= 0) & (nb >= 0)
        rows.append(nb[ok])
        cols.append(ids[ok])
        wts.append(np.full(int(ok.sum()), w))
    cmax = float(np.nanmax(lh.u.values[support]))
    sup_ids = ids[support]
    sup_off = cmax - lh.u.values[support]
    super_id = n_nodes
    rows.append(np.full(len(sup_ids), super_id))
    cols.append(sup_ids)
    wts.append(sup_off)
    g = coo_matrix((np.concatenate(wts),
                    (np.concatenate(rows), np.concatenate(cols))),
                   shape=(n_nodes + 1, n_nodes + 1)).tocsr()
    dist = _csgraph_dijkstra(g, directed=True, indices=super_id)
    dist = dist[:n_nodes]
    if not np.all(np.isfinite(dist)):
        raise SolverError("interior node unreachable from the source "
                          "support")
    vals = np.full((nx, ny), np.nan)
    vals[nodes] = cmax - dist
    return ScalarField(grid, vals)
