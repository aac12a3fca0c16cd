"""Maximal profile, transport-ray geometry and boundary exit sets.

Two evaluation modes for the maximal profile:

* direct: at each node, minimum of (height + polar-gauge distance) over
  the boundary samples visible along a straight open segment.  Exact when
  transport paths are straight segments.
* geodesic: label-correcting shortest paths on a 16-neighbour grid graph
  with polar-gauge edge weights, seeded from the finite boundary samples.
  Valid without any straightness assumption, with O(h) metrication error.

The solver always reports the two modes' maximal discrepancy; hypothesis
certification (see verify) decides which is authoritative.  Nodes whose
every visible sample is a wall take the geodesic value.

Transport rays are marched on the direct field: forward extent b(x) is the
largest t with u(x + t d(x)) = u(x) + t within tolerance.  Rays that run
out of the lattice are finished against the exact boundary: if linear
growth persists up to the crossing point, the endpoint is that boundary
point (an exit endpoint); otherwise the ray ends in the interior.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .fields import Grid, ScalarField
from .geometry import BOUNDARY, EXTERIOR, INTERIOR, Scene

__all__ = ["LaxHopf", "RayField", "BoundarySets", "SolverError",
           "lax_hopf", "direct_eval", "project", "ray_field",
           "boundary_sets"]

_CHUNK = 2048

# ray-march endpoint reasons
REASON_NONE, REASON_INTERIOR, REASON_BOUNDARY = 0, 1, 2

_OFFSETS = np.array([
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (2, 1), (2, -1), (-2, 1), (-2, -1),
    (1, 2), (1, -2), (-1, 2), (-1, -2),
], dtype=int)


class SolverError(RuntimeError):
    """Internal inconsistency (unreachable node, empty projection set)."""


# ---------------------------------------------------------------------------
# Direct mode


def tie_tolerance(scene: Scene, euclid_dist: np.ndarray) -> np.ndarray:
    """Value jitter of a sampled-boundary minimum at the given distance.

    The discrete minimizer can sit up to half a sample spacing away from
    the true one laterally, inflating the value by ~(h_b/2)^2 / (2 dist);
    candidates within twice that of the minimum are genuine ties, anything
    above is sampling noise and must not flag multiplicity.
    """
    hb = scene.h_b
    return (hb / 2.0) ** 2 / np.maximum(euclid_dist, hb) + 1e-12


def direct_eval(scene: Scene, pts: np.ndarray, *, want_ties: bool = False):
    """Visible-sample envelope at arbitrary points.

    Returns (values, argmin sample index, wall_locked[, tie data]).  The
    value at a point is the minimum of height + polar distance over
    non-wall samples whose open segment to the point stays in the domain;
    wall_locked marks points with no such sample (value nan there).

    With ``want_ties`` also returns, per point, the multiplicity flag (the
    visible near-tie direction set has Euclidean diameter above eps_ridge)
    computed with the sampling-jitter tie tolerance.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    smp = scene.samples
    polar = scene.gauge.polar()
    n = len(pts)
    u = np.full(n, np.nan)
    amin = np.full(n, -1, dtype=int)
    locked = np.zeros(n, dtype=bool)
    ridge = np.zeros(n, dtype=bool)
    for lo in range(0, n, _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, n))
        p = pts[sl]
        diff = p[:, None, :] - smp.points[None, :, :]
        vals = smp.values[None, :] + polar.value(diff)
        vals[:, smp.wall] = np.inf
        work = vals.copy()
        rows_u = np.full(len(p), np.nan)
        rows_a = np.full(len(p), -1, dtype=int)
        rows_lock = np.zeros(len(p), dtype=bool)
        alive = np.arange(len(p))
        while len(alive):
            best = np.argmin(work[alive], axis=1)
            bestv = work[alive, best]
            dead = ~np.isfinite(bestv)
            rows_lock[alive[dead]] = True
            alive = alive[~dead]
            best = best[~dead]
            if not len(alive):
                break
            vis = scene.segments_clear(smp.points[best], p[alive])
            hit = alive[vis]
            rows_u[hit] = work[hit, best[vis]]
            rows_a[hit] = best[vis]
            work[alive[~vis], best[~vis]] = np.inf
            alive = alive[~vis]
        u[sl] = rows_u
        amin[sl] = rows_a
        locked[sl] = rows_lock
        if want_ties:
            ridge[sl] = _tie_multiplicity(scene, p, vals, diff, rows_u)
    if want_ties:
        return u, amin, locked, ridge
    return u, amin, locked


def _tie_multiplicity(scene: Scene, p, vals, diff, u_row) -> np.ndarray:
    """Multiplicity flag per point from the visible near-tie set.

    A point is flagged when its ties form either several clusters along the
    boundary or one cluster of large arclength extent, and the tie
    directions have Euclidean diameter above eps_ridge.  A single short
    cluster is one smeared projection (boundary-sampling granularity),
    never a ridge.
    """
    smp = scene.samples
    polar = scene.gauge.polar()
    edist = np.hypot(diff[..., 0], diff[..., 1])
    tol = tie_tolerance(scene, edist)
    ties = np.isfinite(vals) & (vals <= u_row[:, None] + tol)
    counts = ties.sum(axis=1)
    flags = np.zeros(len(p), dtype=bool)
    cand = np.nonzero(counts > 1)[0]
    if not len(cand):
        return flags
    rows, cols = np.nonzero(ties[cand])
    rows = cand[rows]
    keep = scene.segments_clear(smp.points[cols], p[rows])
    rows, cols = rows[keep], cols[keep]
    if not len(rows):
        return flags
    arc = smp.arclen[cols]
    order = np.lexsort((arc, rows))
    rows, cols, arc = rows[order], cols[order], arc[order]
    starts = np.nonzero(np.r_[True, rows[1:] != rows[:-1]])[0]
    ends = np.r_[starts[1:], len(rows)]
    perim = scene.boundary.perimeter
    gap_thr = 2.5 * smp.spacing
    eps = scene.tol.eps_ridge
    for s0, s1 in zip(starts, ends):
        if s1 - s0 < 2:
            continue
        r = rows[s0]
        a = arc[s0:s1]
        gaps = np.diff(a)
        wrap = a[0] + perim - a[-1]
        gmax = max(gaps.max(initial=0.0), wrap)
        nclus = int((gaps > gap_thr).sum()) + (1 if wrap > gap_thr else 0)
        extent = perim - gmax
        if nclus < 2 and extent <= 4.0 * scene.h_b:
            continue
        dd = diff[r, cols[s0:s1]]
        gl = polar.value(dd)
        good = gl > 1e-12
        if good.sum() < 2:
            continue
        dirs = dd[good] / gl[good][:, None]
        dx = dirs[:, None, :] - dirs[None, :, :]
        diam = float(np.hypot(dx[..., 0], dx[..., 1]).max())
        if diam >= eps:
            flags[r] = True
    return flags


# ---------------------------------------------------------------------------
# Geodesic mode


def _geodesic(scene: Scene):
    """Multi-source shortest paths on the 16-neighbour interior graph.

    Returns (values (nx,ny), source sample index (nx,ny)).
    """
    grid = scene.grid
    interior = scene.interior
    nx, ny = grid.shape
    ids = np.full((nx, ny), -1, dtype=int)
    nodes = np.nonzero(interior)
    n_nodes = len(nodes[0])
    ids[nodes] = np.arange(n_nodes)

    def shift_bool(mask, ai, aj):
        out = np.zeros_like(mask)
        i0, i1 = max(0, -ai), min(nx, nx - ai)
        j0, j1 = max(0, -aj), min(ny, ny - aj)
        out[i0:i1, j0:j1] = mask[i0 + ai:i1 + ai, j0 + aj:j1 + aj]
        return out

    def shift_ids(ai, aj):
        out = np.full_like(ids, -1)
        i0, i1 = max(0, -ai), min(nx, nx - ai)
        j0, j1 = max(0, -aj), min(ny, ny - aj)
        out[i0:i1, j0:j1] = ids[i0 + ai:i1 + ai, j0 + aj:j1 + aj]
        return out

    polar = scene.gauge.polar()
    rows, cols, wts = [], [], []
    for di, dj in _OFFSETS:
        w = float(polar.value(np.array([di * grid.h, dj * grid.h])))
        ok = interior & shift_bool(interior, di, dj)
        if abs(di) + abs(dj) == 3:
            # knight move: at least one lattice point flanking the segment
            # midpoint must be interior, so edges cannot hop across walls
            if abs(di) == 2:
                mids = ((di // 2, 0), (di // 2, dj))
            else:
                mids = ((0, dj // 2), (di, dj // 2))
            ok &= shift_bool(interior, *mids[0]) | \
                shift_bool(interior, *mids[1])
        dst_idx = shift_ids(di, dj)[ok]
        src_idx = ids[ok]
        rows.append(src_idx)
        cols.append(dst_idx)
        wts.append(np.full(len(src_idx), w))

    # seed edges: a virtual super-source feeds every node near a finite
    # boundary sample with weight height + polar distance
    smp = scene.samples
    fin = np.nonzero(smp.finite)[0]
    seed_best = np.full(n_nodes, np.inf)
    seed_src = np.full(n_nodes, -1, dtype=int)
    reach = int(math.ceil(2.0 * max(scene.h, scene.h_b) / grid.h)) + 1
    for k in fin:
        y = smp.points[k]
        ci = int(round((y[0] - grid.x0) / grid.h))
        cj = int(round((y[1] - grid.y0) / grid.h))
        i0, i1 = max(0, ci - reach), min(nx, ci + reach + 1)
        j0, j1 = max(0, cj - reach), min(ny, cj + reach + 1)
        if i0 >= i1 or j0 >= j1:
            continue
        sub = interior[i0:i1, j0:j1]
        if not sub.any():
            continue
        ii, jj = np.nonzero(sub)
        nodes_xy = grid.node_xy(ii + i0, jj + j0)
        w = smp.values[k] + polar.value(nodes_xy - y[None, :])
        clear = scene.segments_clear(np.broadcast_to(y, nodes_xy.shape),
                                     nodes_xy, n_probes=1)
        nid = ids[ii + i0, jj + j0]
        better = clear & (w < seed_best[nid])
        seed_best[nid[better]] = w[better]
        seed_src[nid[better]] = k
    seeded = np.nonzero(np.isfinite(seed_best))[0]
    if not len(seeded):
        raise SolverError("no boundary sample reaches the interior lattice")
    super_id = n_nodes
    rows.append(np.full(len(seeded), super_id))
    cols.append(seeded)
    wts.append(seed_best[seeded])

    g = coo_matrix((np.concatenate(wts),
                    (np.concatenate(rows), np.concatenate(cols))),
                   shape=(n_nodes + 1, n_nodes + 1)).tocsr()
    dist, pred = _csgraph_dijkstra(g, directed=True, indices=super_id,
                                   return_predecessors=True)
    dist = dist[:n_nodes]
    pred = pred[:n_nodes]
    if not np.all(np.isfinite(dist)):
        bad = int(np.argmax(~np.isfinite(dist)))
        bi, bj = nodes[0][bad], nodes[1][bad]
        raise SolverError(
            f"interior node ({grid.x0 + grid.h * bi:.6g}, "
            f"{grid.y0 + grid.h * bj:.6g}) unreachable in geodesic mode")

    # first node after the super-source, by pointer jumping
    first = np.arange(n_nodes)
    for _ in range(64):
        up = pred[first]
        done = up == super_id
        if np.all(done):
            break
        first = np.where(done, first, up)
    src_of = seed_src[first]

    vals = np.full((nx, ny), np.nan)
    vals[nodes] = dist
    src = np.full((nx, ny), -1, dtype=int)
    src[nodes] = src_of
    return vals, src


# ---------------------------------------------------------------------------
# Public results


@dataclass
class LaxHopf:
    """Maximal profile in both evaluation modes."""

    u: ScalarField                       # authoritative (direct, patched)
    direct: ScalarField                  # nan where wall-locked
    geodesic: ScalarField | None
    wall_locked: np.ndarray = field(repr=False)
    argmin_index: np.ndarray = field(repr=False, default=None)
    multiplicity: np.ndarray = field(repr=False, default=None)
    geo_source: np.ndarray | None = field(repr=False, default=None)
    discrepancy: float = 0.0

    def boundary_values(self, scene: Scene) -> np.ndarray:
        """Profile evaluated at the boundary samples (direct mode)."""
        vals, _, locked = direct_eval(scene, scene.samples.points)
        return np.where(locked, np.nan, vals)


@dataclass
class RayField:
    """Per-node transport ray data on the interior lattice."""

    p_index: np.ndarray      # argmin boundary sample per node, -1 undefined
    p_point: np.ndarray      # (nx,ny,2) initial point of the ray
    d: np.ndarray            # (nx,ny,2) unit-polar-gauge direction
    a: np.ndarray            # backward extent (<= 0)
    b: np.ndarray            # forward extent (>= 0)
    q: np.ndarray            # (nx,ny,2) forward endpoint
    ridge: np.ndarray        # multiplicity flag
    reason: np.ndarray       # REASON_* per node
    alpha_end: np.ndarray | None = None   # filled by the transport stage

    @property
    def nontrivial(self) -> np.ndarray:
        return (self.reason != REASON_NONE) & ~self.ridge


@dataclass
class BoundarySets:
    """Exit sets as boundary-sample masks plus ray endpoints on the wall."""

    gamma_phi: np.ndarray        # samples that start some ray (argmin-based)
    gamma_f: np.ndarray          # subset whose rays meet the source support
    gamma_phi_closure: np.ndarray  # padded near-tie closure proxy
    j_points: np.ndarray         # (K,2) ray endpoints on the boundary
    j_multiplicity: np.ndarray   # rays per endpoint


# ---------------------------------------------------------------------------
# Operations


def lax_hopf(scene: Scene, *, geodesic: bool = True) -> LaxHopf:
    """Compute the maximal profile in direct and (optionally) geodesic mode."""
    grid = scene.grid
    interior = scene.interior
    pts = grid.points()[interior.ravel()]
    vals, amin, locked, ridge = direct_eval(scene, pts, want_ties=True)

    direct = np.full(grid.shape, np.nan)
    direct[interior] = vals
    lockg = np.zeros(grid.shape, dtype=bool)
    lockg[interior] = locked

    geo_field = None
    geo_src = None
    disc = 0.0
    u = direct.copy()
    if geodesic:
        gvals, geo_src = _geodesic(scene)
        geo_field = ScalarField(grid, gvals)
        both = np.isfinite(direct) & np.isfinite(gvals)
        if np.any(both):
            disc = float(np.abs(direct[both] - gvals[both]).max())
        u = np.where(lockg, gvals, direct)
        if np.any(lockg & ~np.isfinite(gvals)):
            raise SolverError("wall-locked node unreachable in geodesic mode")
    elif np.any(lockg):
        raise SolverError(
            "wall-locked nodes present; geodesic mode required")

    amin_g = np.full(grid.shape, -1, dtype=int)
    amin_g[interior] = amin
    ridge_g = np.zeros(grid.shape, dtype=bool)
    ridge_g[interior] = ridge
    return LaxHopf(ScalarField(grid, u), ScalarField(grid, direct),
                   geo_field, lockg, amin_g, ridge_g, geo_src, disc)


def project(scene: Scene, lh: LaxHopf, x) -> np.ndarray:
    """Projection set of one interior point: indices of visible samples
    within eps_proj of the minimum."""
    x = np.asarray(x, dtype=float)
    smp = scene.samples
    polar = scene.gauge.polar()
    vals = smp.values + polar.value(x[None, :] - smp.points)
    vals[smp.wall] = np.inf
    u0, _, locked = direct_eval(scene, x[None, :])
    if locked[0]:
        raise SolverError(f"no visible non-wall sample at {tuple(x)}")
    cand = np.nonzero(vals <= u0[0] + scene.eps_proj)[0]
    keep = scene.segments_clear(smp.points[cand],
                                np.broadcast_to(x, (len(cand), 2)))
    out = cand[keep]
    if not len(out):
        raise SolverError(f"empty projection set at {tuple(x)}")
    return out


def _refine_projection(scene: Scene, x: np.ndarray, amin: np.ndarray
                       ) -> np.ndarray:
    """Continuous local refinement of the projection point.

    The argmin boundary sample is laterally quantized by the sample
    spacing, which skews ray directions for nodes close to the boundary.
    Minimize height + polar distance over a fine subdivision of the two
    boundary spans flanking the argmin sample (the datum is evaluated
    exactly there) and return the improved projection points.
    """
    smp = scene.samples
    datum = scene.datum
    polar = scene.gauge.polar()
    m = len(smp)
    t_sub = 16
    km1 = (amin - 1) % m
    kp1 = (amin + 1) % m
    fr = np.arange(1, 2 * t_sub) / (2.0 * t_sub)   # subdivision of both spans
    # span A: sample k-1 -> k on edge(k-1); span B: k -> k+1 on edge(k)
    cand_pts = [smp.points[amin]]
    cand_vals = [smp.values[amin]]
    for lo_idx, hi_idx, edge_of in ((km1, amin, km1), (amin, kp1, amin)):
        y0 = smp.points[lo_idx]
        y1 = smp.points[hi_idx]
        pts = y0[:, None, :] + fr[None, :, None] * (y1 - y0)[:, None, :]
        vals = np.empty(pts.shape[:2])
        owner = datum.owner[smp.edge[edge_of]]
        for pc in np.unique(owner):
            sel = owner == pc
            vals[sel] = datum.pieces[pc].eval(pts[sel])
        cand_pts.append(pts)
        cand_vals.append(vals)
    allpts = np.concatenate([cand_pts[0][:, None, :], cand_pts[1],
                             cand_pts[2]], axis=1)
    allvals = np.concatenate([np.asarray(cand_vals[0])[:, None],
                              cand_vals[1], cand_vals[2]], axis=1)
    total = allvals + polar.value(x[:, None, :] - allpts)
    best = np.nanargmin(np.where(np.isfinite(total), total, np.inf), axis=1)
    return allpts[np.arange(len(x)), best]


def ray_field(scene: Scene, lh: LaxHopf) -> RayField:
    """March transport rays through every non-ridge interior node."""
    grid = scene.grid
    interior = scene.interior
    smp = scene.samples
    polar = scene.gauge.polar()
    nx, ny = grid.shape

    p_index = lh.argmin_index.copy()
    ridge = lh.multiplicity.copy()
    p_index[lh.wall_locked] = -1
    ridge |= lh.wall_locked

    pts = grid.points().reshape(nx, ny, 2)
    p_point = np.full((nx, ny, 2), np.nan)
    d = np.full((nx, ny, 2), np.nan)
    a = np.full((nx, ny), np.nan)
    b = np.full((nx, ny), np.nan)
    q = np.full((nx, ny, 2), np.nan)
    reason = np.zeros((nx, ny), dtype=np.int8)

    act = interior & (p_index >= 0) & ~ridge
    ii, jj = np.nonzero(act)
    x = pts[ii, jj]
    py = _refine_projection(scene, x, p_index[ii, jj])
    rel = x - py
    glen = polar.value(rel)
    good = glen > 1e-12
    # nodes sitting numerically on their own projection: treat as ridge
    ridge[ii[~good], jj[~good]] = True
    ii, jj, x, py, rel, glen = (arr[good] for arr in (ii, jj, x, py, rel, glen))
    dd = rel / glen[:, None]
    p_point[ii, jj] = py
    d[ii, jj] = dd
    a[ii, jj] = -glen

    u0 = lh.u.values[ii, jj]
    bb, reas, qq = _march(scene, lh, x, dd, u0)
    b[ii, jj] = bb
    reason[ii, jj] = reas
    q[ii, jj] = qq

    # ridge nodes: zero forward extent, endpoint at the node itself
    ri, rj = np.nonzero(interior & ridge)
    b[ri, rj] = 0.0
    a[ri, rj] = np.where(np.isfinite(a[ri, rj]), a[ri, rj], 0.0)
    q[ri, rj] = pts[ri, rj]
    reason[ri, rj] = REASON_INTERIOR

    return RayField(p_index, p_point, d, a, b, q, ridge & interior, reason)


def _march(scene: Scene, lh: LaxHopf, x, dd, u0):
    """Forward linear-growth march for a batch of rays.

    Returns (b, reason, q).  Marches on the bilinear field in steps h/2,
    bisects the violating step to h/16; rays that run off the defined
    lattice are finished against the exact boundary with direct-mode probes.
    """
    h = scene.h
    eps_ray = scene.eps_ray
    step = h / 2.0
    n = len(x)
    s = np.zeros(n)
    state = np.zeros(n, dtype=np.int8)   # 0 marching, 1 growth stop, 2 fell off
    alive = np.arange(n)
    max_iter = int(math.ceil(scene.boundary.diameter() / step)) + 4
    for _ in range(max_iter):
        if not len(alive):
            break
        probe = x[alive] + (s[alive] + step)[:, None] * dd[alive]
        val = lh.u.interp(probe)
        miss = ~np.isfinite(val)
        if np.any(miss):
            # exact envelope evaluation where the lattice has no bilinear
            # cell (close to the boundary); nan only truly off the domain
            dv, _, dlock = direct_eval(scene, probe[miss])
            val[miss] = np.where(dlock, np.nan, dv)
        dev = np.abs(val - u0[alive] - (s[alive] + step))
        off = ~np.isfinite(val)
        bad = np.isfinite(val) & (dev > eps_ray)
        ok = ~off & ~bad
        s[alive[ok]] += step
        state[alive[off]] = 2
        state[alive[bad]] = 1
        alive = alive[ok]
    state[alive] = 1  # exhausted iterations: treat as growth stop

    # growth stop: bisect the last half-step down to h/16
    stop = np.nonzero(state == 1)[0]
    if len(stop):
        lo = s[stop].copy()
        hi = lo + step
        width = step
        while width > h / 16.0:
            mid = 0.5 * (lo + hi)
            val = lh.u.interp(x[stop] + mid[:, None] * dd[stop])
            miss = ~np.isfinite(val)
            if np.any(miss):
                dv, _, dlock = direct_eval(scene,
                                           (x[stop] + mid[:, None]
                                            * dd[stop])[miss])
                val[miss] = np.where(dlock, np.nan, dv)
            dev = np.abs(val - u0[stop] - mid)
            good = np.isfinite(val) & (dev <= eps_ray)
            lo = np.where(good, mid, lo)
            hi = np.where(good, hi, mid)
            width *= 0.5
        s[stop] = lo

    reason = np.full(n, REASON_INTERIOR, dtype=np.int8)
    q = x + s[:, None] * dd

    # fell off the lattice: finish against the exact boundary
    fell = np.nonzero(state == 2)[0]
    if len(fell):
        is_bdry = np.zeros(len(fell), dtype=bool)
        cross_s = np.full(len(fell), np.nan)
        probe_pts, probe_row, probe_s = [], [], []
        for k, idx in enumerate(fell):
            sc = scene.boundary.first_crossing(
                x[idx], dd[idx], s_max=s[idx] + 8.0 * h, s_lo=s[idx] - 1e-12)
            if sc is None:
                continue
            cross_s[k] = sc
            for fr in (0.5, 0.9):
                sp = s[idx] + fr * (sc - s[idx])
                probe_row.append(k)
                probe_s.append(sp)
                probe_pts.append(x[idx] + sp * dd[idx])
        if probe_row:
            pv, _, plocked = direct_eval(scene, np.asarray(probe_pts))
            prow = np.asarray(probe_row)
            dev = np.abs(pv - u0[fell[prow]] - np.asarray(probe_s))
            bad = plocked | ~np.isfinite(pv) | (dev > 2.0 * h)
            ok_rows = np.setdiff1d(np.nonzero(np.isfinite(cross_s))[0],
                                   np.unique(prow[bad]))
            is_bdry[ok_rows] = True
        hit = fell[is_bdry]
        s[hit] = cross_s[is_bdry]
        q[hit] = x[hit] + s[hit][:, None] * dd[hit]
        reason[fell[is_bdry]] = REASON_BOUNDARY
        # the rest keep their last good s as an interior stop

    return s, reason, q


def boundary_sets(scene: Scene, lh: LaxHopf, rf: RayField) -> BoundarySets:
    """Exit sets and boundary ray endpoints."""
    smp = scene.samples
    interior = scene.interior
    m = len(smp)

    gamma_phi = np.zeros(m, dtype=bool)
    idx = rf.p_index[interior & (rf.p_index >= 0)]
    gamma_phi[np.unique(idx)] = True

    support = scene.support_mask()
    gamma_f = np.zeros(m, dtype=bool)
    idxf = rf.p_index[interior & (rf.p_index >= 0) & support]
    gamma_f[np.unique(idxf)] = True

    gamma_closure = _gamma_closure(scene, lh) | gamma_phi

    sel = (rf.reason == REASON_BOUNDARY) & ~rf.ridge & \
        (rf.b >= 2.0 * scene.h)
    jp = rf.q[sel]
    if len(jp):
        # merge endpoints within one cell
        key = np.round(jp / scene.h).astype(int)
        _, first, counts = np.unique(key, axis=0, return_index=True,
                                     return_counts=True)
        j_points = jp[first]
        j_mult = counts
    else:
        j_points = np.zeros((0, 2))
        j_mult = np.zeros(0, dtype=int)
    return BoundarySets(gamma_phi, gamma_f, gamma_closure, j_points, j_mult)


def _gamma_closure(scene: Scene, lh: LaxHopf) -> np.ndarray:
    """Samples within eps_proj of optimal for some node, tested for
    visibility from their best node: a grid-scale closure proxy of the
    exit set."""
    grid = scene.grid
    interior = scene.interior
    smp = scene.samples
    polar = scene.gauge.polar()
    pts = grid.points()[interior.ravel()]
    uvals = lh.u.values[interior]
    m = len(smp)
    best_slack = np.full(m, np.inf)
    best_node = np.full(m, -1, dtype=int)
    for lo in range(0, len(pts), _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, len(pts)))
        p = pts[sl]
        vals = smp.values[None, :] + polar.value(p[:, None, :]
                                                 - smp.points[None, :, :])
        slack = vals - uvals[sl][:, None]
        slack[:, smp.wall] = np.inf
        rowmin = slack.min(axis=0)
        rowarg = slack.argmin(axis=0)
        upd = rowmin < best_slack
        best_slack[upd] = rowmin[upd]
        best_node[upd] = rowarg[upd] + lo
    cand = np.nonzero(best_slack <= scene.eps_proj)[0]
    if not len(cand):
        return np.zeros(m, dtype=bool)
    keep = scene.segments_clear(smp.points[cand], pts[best_node[cand]])
    out = np.zeros(m, dtype=bool)
    out[cand[keep]] = True
    return out
