"""Hypothesis certification and solution verification.

Certifies the two geometric hypotheses (straight visible transport
segments; separation of boundary ray endpoints from the exit set),
verifies candidate profile/density pairs against the balance laws in
weak form with compactly supported bump test functions, decides the
uniqueness predicate (does the source support cover the ray endpoints),
and checks the stability bound between densities of two sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .eikonal import (REASON_NONE, BoundarySets, LaxHopf, RayField,
                      direct_eval, tie_tolerance)
from .fields import ScalarField
from .geometry import Scene, Source
from .transport import RaySlices, _dilate, transport_density

__all__ = [
    "BumpTestFunction", "H5Result", "H6Result", "UniquenessResult",
    "SolutionReport", "check_h5", "check_h6", "weak_residual",
    "verify_solution", "uniqueness_predicate", "minimizer_check",
    "stability_check", "sample_bumps", "singular_mask",
]

_CHUNK = 2048


class BumpTestFunction:
    """Smooth radial bump exp(1/(s-1)), s = |x-c|^2/r^2, supported in
    B(c, r).

    Construction fails unless the support keeps two cells clear of the
    active exit set (the test space excludes functions touching its
    closure); the rest of the boundary may be crossed freely.
    """

    def __init__(self, center, radius: float, scene: Scene,
                 gamma_f_points: np.ndarray, amplitude: float = 1.0):
        if radius <= 0.0 or amplitude == 0.0:
            raise ValueError("degenerate test bump")
        self.c = np.asarray(center, dtype=float)
        self.r = float(radius)
        self.amplitude = float(amplitude)
        if len(gamma_f_points):
            gap = np.hypot(*(gamma_f_points - self.c[None, :]).T).min()
            if gap <= self.r + 2.0 * scene.h:
                raise ValueError(
                    "test bump support reaches the active exit set")

    def value(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        s = ((pts - self.c) ** 2).sum(axis=-1) / self.r ** 2
        out = np.zeros(s.shape)
        inside = s < 1.0 - 1e-12
        with np.errstate(divide="ignore"):
            out[inside] = np.exp(1.0 / (s[inside] - 1.0))
        return self.amplitude * out

    def grad(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        rel = pts - self.c
        s = (rel ** 2).sum(axis=-1) / self.r ** 2
        out = np.zeros(pts.shape)
        inside = s < 1.0 - 1e-12
        with np.errstate(divide="ignore"):
            f = np.exp(1.0 / (s[inside] - 1.0))
        coef = -2.0 * f / (self.r ** 2 * (s[inside] - 1.0) ** 2)
        out[inside] = coef[:, None] * rel[inside]
        return self.amplitude * out


def sample_bumps(scene: Scene, gamma_f_points: np.ndarray, n: int,
                 rng: np.random.Generator) -> list[BumpTestFunction]:
    """Rejection-sample admissible bumps: support clear of the exit band,
    overlapping the domain interior."""
    xmin, ymin, xmax, ymax = scene.boundary.bbox()
    diam = scene.boundary.diameter()
    interior_pts = scene.grid.points()[scene.interior.ravel()]
    tree = cKDTree(interior_pts)
    out: list[BumpTestFunction] = []
    for _ in range(400 * n):
        if len(out) == n:
            break
        c = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        r = rng.uniform(4.0 * scene.h, diam / 8.0)
        if tree.query(c)[0] > 0.5 * r:
            continue
        try:
            out.append(BumpTestFunction(c, r, scene, gamma_f_points))
        except ValueError:
            continue
    if len(out) < n:
        raise RuntimeError("could not sample enough admissible test bumps")
    return out


# ---------------------------------------------------------------------------
# Gradient-quality masks


def singular_mask(scene: Scene, u: ScalarField,
                  extra: np.ndarray | None = None,
                  boundary_margin: float | None = None) -> np.ndarray:
    """Nodes where the discrete gradient of u is unreliable.

    Flags sharp direction jumps between neighbours (ridges), smeared-ridge
    nodes (tiny gradient next to unit gradients), anything supplied in
    ``extra``, and optionally everything within ``boundary_margin`` of the
    boundary; the union is dilated two cells.
    """
    gx, gy = u.central_gradient()
    mag = scene.gauge.value(np.stack([gx, gy], axis=-1))
    emag = np.hypot(gx, gy)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(emag > 1e-12, gx / emag, np.nan)
        uy = np.where(emag > 1e-12, gy / emag, np.nan)
    strong = mag >= 0.5
    flags = ~np.isfinite(mag) & u.defined

    def shifted(arr, ai, aj):
        out = np.full_like(arr, np.nan)
        nx, ny = arr.shape
        i0, i1 = max(0, -ai), min(nx, nx - ai)
        j0, j1 = max(0, -aj), min(ny, ny - aj)
        out[i0:i1, j0:j1] = arr[i0 + ai:i1 + ai, j0 + aj:j1 + aj]
        return out

    high_nb = np.zeros_like(strong)
    jump = np.zeros_like(strong)
    for ai, aj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        mnb = shifted(mag, ai, aj)
        high_nb |= mnb > 0.75
        cos = ux * shifted(ux, ai, aj) + uy * shifted(uy, ai, aj)
        jump |= strong & (shifted(mag, ai, aj) >= 0.5) & (cos < 0.5)
    smeared = (mag < 0.5) & high_nb
    flags |= smeared | jump
    if extra is not None:
        flags |= extra
    mask = _dilate(flags, 2)
    if boundary_margin is not None:
        mask |= scene.boundary_distance_grid() <= boundary_margin
    return mask


# ---------------------------------------------------------------------------
# Hypothesis checks


@dataclass
class H5Result:
    passed: bool
    witnesses: list = dc_field(default_factory=list)   # (cell xy, sample xy)
    n_wall_locked: int = 0
    max_disagreement: float = 0.0
    n_segment_violations: int = 0

    def to_json(self) -> dict:
        return {
            "pass": bool(self.passed),
            "witnesses": [[list(map(float, a)),
                           None if b is None else list(map(float, b))]
                          for a, b in self.witnesses],
            "wall_locked": int(self.n_wall_locked),
            "max_mode_disagreement": float(self.max_disagreement),
            "segment_violations": int(self.n_segment_violations),
        }


def check_h5(scene: Scene, lh: LaxHopf, max_witnesses: int = 50) -> H5Result:
    """Straight-segment transport check.

    Fails when (a) some node sees no non-wall sample along a straight
    segment, (b) straight-line and geodesic profiles disagree beyond
    tolerance, or (c) some near-optimal projection's open segment leaves
    the domain.  Reports up to ``max_witnesses`` witness pairs, each
    re-confirmed with the dense open-segment test.
    """
    if lh.geodesic is None:
        raise ValueError("geodesic profile required to certify H5")
    grid = scene.grid
    interior = scene.interior
    smp = scene.samples
    polar = scene.gauge.polar()
    pts_all = grid.points().reshape(grid.shape + (2,))
    witnesses: list = []

    def geo_src_point(i, j):
        if lh.geo_source is not None and lh.geo_source[i, j] >= 0:
            return smp.points[lh.geo_source[i, j]]
        return None

    locked = lh.wall_locked & interior
    n_locked = int(locked.sum())
    if n_locked:
        ii, jj = np.nonzero(locked)
        for i, j in zip(ii[:max_witnesses], jj[:max_witnesses]):
            witnesses.append((pts_all[i, j], geo_src_point(i, j)))

    both = np.isfinite(lh.direct.values) & np.isfinite(lh.geodesic.values) \
        & interior
    diff = np.zeros(grid.shape)
    diff[both] = np.abs(lh.direct.values[both] - lh.geodesic.values[both])
    max_disc = float(diff.max(initial=0.0))
    tol = scene.tol.agree_factor * scene.h
    bad = diff > tol
    if bad.any() and len(witnesses) < max_witnesses:
        ii, jj = np.nonzero(bad)
        order = np.argsort(-diff[ii, jj])
        for k in order[:max_witnesses - len(witnesses)]:
            i, j = ii[k], jj[k]
            # the shorter straight chord the geodesic refuses must bend:
            # report the geodesic's own initial sample as the witness mate
            witnesses.append((pts_all[i, j], geo_src_point(i, j)))

    # tied projections whose straight open segment leaves the domain
    n_seg = 0
    cells = grid.points()[interior.ravel()]
    uvals = lh.u.values[interior]
    for lo in range(0, len(cells), _CHUNK):
        if len(witnesses) >= max_witnesses:
            break
        sl = slice(lo, min(lo + _CHUNK, len(cells)))
        p = cells[sl]
        diffp = p[:, None, :] - smp.points[None, :, :]
        vals = smp.values[None, :] + polar.value(diffp)
        tol_tie = tie_tolerance(scene, np.hypot(diffp[..., 0],
                                                diffp[..., 1]))
        cand = np.isfinite(vals) & (vals <= uvals[sl][:, None] + tol_tie)
        rows, cols = np.nonzero(cand)
        if not len(rows):
            continue
        clear = scene.segments_clear(smp.points[cols], p[rows])
        viol = ~clear
        if viol.any():
            for r, cidx in zip(rows[viol], cols[viol]):
                if scene.open_segment_in_domain(smp.points[cidx], p[r]):
                    continue  # fast test was conservative; dense test rules
                n_seg += 1
                if len(witnesses) < max_witnesses:
                    witnesses.append((p[r], smp.points[cidx]))
    passed = (n_locked == 0) and (max_disc <= tol) and (n_seg == 0)
    return H5Result(passed, witnesses, n_locked, max_disc, n_seg)


@dataclass
class H6Result:
    passed: bool
    min_distance: float
    pair: tuple | None = None      # (endpoint xy, exit-sample xy)
    vacuous: bool = False

    def to_json(self) -> dict:
        return {
            "pass": bool(self.passed),
            "min_distance": (None if not np.isfinite(self.min_distance)
                             else float(self.min_distance)),
            "pair": (None if self.pair is None else
                     [list(map(float, self.pair[0])),
                      list(map(float, self.pair[1]))]),
            "vacuous": bool(self.vacuous),
        }


def check_h6(scene: Scene, bsets: BoundarySets) -> H6Result:
    """Separation of boundary ray endpoints from the exit-set closure."""
    if not len(bsets.j_points):
        return H6Result(True, math.inf, None, vacuous=True)
    gamma = scene.samples.points[bsets.gamma_phi_closure]
    if not len(gamma):
        return H6Result(True, math.inf, None, vacuous=True)
    tree = cKDTree(gamma)
    dist, idx = tree.query(bsets.j_points)
    k = int(np.argmin(dist))
    dmin = float(dist[k])
    pair = (bsets.j_points[k], gamma[idx[k]])
    return H6Result(dmin > scene.tol.h6_factor * scene.h, dmin, pair)


# ---------------------------------------------------------------------------
# Weak residuals and solution verification


def weak_residual(scene: Scene, u: ScalarField, v: ScalarField,
                  psi: BumpTestFunction,
                  flux_mask: np.ndarray | None = None,
                  source: Source | None = None,
                  f_values: np.ndarray | None = None
                  ) -> tuple[float, float]:
    """Residual of the mass-balance identity against one test bump.

    residual = | sum v <Drho(grad_h u), grad psi> h^2 - sum f psi h^2 |
    over interior nodes, nodes in ``flux_mask`` excluded from the first
    sum.  scale = sum |f psi| h^2 + sum |v| |grad psi| h^2.
    """
    grid = scene.grid
    interior = scene.interior
    if f_values is None:
        f_values = scene.source_field(source)
    gx, gy = u.central_gradient()
    g = np.stack([gx, gy], axis=-1)
    mag = scene.gauge.value(g)
    pts = grid.points().reshape(grid.shape + (2,))
    psi_v = psi.value(pts)
    psi_g = psi.grad(pts)
    h2 = scene.h ** 2

    ok1 = interior & np.isfinite(v.values) & (mag > 1e-12) & \
        np.isfinite(mag)
    if flux_mask is not None:
        ok1 &= ~flux_mask
    drho = np.zeros(grid.shape + (2,))
    if ok1.any():
        drho[ok1] = scene.gauge.gradient(g[ok1])
    flux = np.where(ok1, v.values * (drho[..., 0] * psi_g[..., 0]
                                     + drho[..., 1] * psi_g[..., 1]), 0.0)
    sum1 = float(flux.sum() * h2)
    okf = interior
    sum2 = float((f_values * psi_v)[okf].sum() * h2)
    residual = abs(sum1 - sum2)
    gnorm = np.hypot(psi_g[..., 0], psi_g[..., 1])
    scale = float(np.abs(f_values * psi_v)[okf].sum() * h2
                  + np.nansum(np.where(interior & np.isfinite(v.values),
                                       np.abs(v.values) * gnorm, 0.0)) * h2)
    return residual, scale


@dataclass
class SolutionReport:
    positive: bool
    gradient_bound: bool
    below_rim: bool
    matches_rim_on_exit: bool
    complementarity: bool
    weak: list = dc_field(default_factory=list)
    weak_pass: bool = True
    details: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (self.positive and self.gradient_bound and self.below_rim
                and self.matches_rim_on_exit and self.complementarity
                and self.weak_pass)

    def to_json(self) -> dict:
        return {
            "pass": bool(self.passed),
            "positive": bool(self.positive),
            "gradient_bound": bool(self.gradient_bound),
            "below_rim": bool(self.below_rim),
            "matches_rim_on_exit": bool(self.matches_rim_on_exit),
            "complementarity": bool(self.complementarity),
            "weak": [{"id": k, "center": list(map(float, w["center"])),
                      "radius": float(w["radius"]),
                      "residual": float(w["residual"]),
                      "scale": float(w["scale"]),
                      "pass": bool(w["pass"])}
                     for k, w in enumerate(self.weak)],
            "weak_pass": bool(self.weak_pass),
            "details": self.details,
        }


def _boundary_node_lookup(scene: Scene, u: ScalarField):
    """For each boundary sample: nearest defined interior node and its
    polar-gauge distance; nan where none is close."""
    interior_pts = scene.grid.points()[
        (scene.interior & u.defined).ravel()]
    vals = u.values[scene.interior & u.defined]
    tree = cKDTree(interior_pts)
    smp = scene.samples
    dist, idx = tree.query(smp.points,
                           distance_upper_bound=3.0 * max(scene.h,
                                                          scene.h_b))
    found = np.isfinite(dist)
    uv = np.full(len(smp), np.nan)
    gd_to = np.full(len(smp), np.nan)
    gd_from = np.full(len(smp), np.nan)
    polar = scene.gauge.polar()
    if found.any():
        uv[found] = vals[idx[found]]
        rel = interior_pts[idx[found]] - smp.points[found]
        gd_to[found] = polar.value(rel)
        gd_from[found] = polar.value(-rel)
    return uv, gd_to, gd_from


def verify_solution(scene: Scene, u: ScalarField, v: ScalarField,
                    bsets: BoundarySets, n_tests: int | None = None,
                    rng: np.random.Generator | None = None,
                    ridge_mask: np.ndarray | None = None,
                    source: Source | None = None) -> SolutionReport:
    """Check a candidate (profile, density) pair against all conditions:
    admissibility, complementarity, and the weak balance identity over
    random test bumps."""
    tol = scene.tol
    ch = tol.c_grid * scene.h
    interior = scene.interior

    if n_tests is None:
        n_tests = tol.n_tests
    if rng is None:
        rng = np.random.default_rng(tol.seed)

    defined = interior & u.defined & v.defined
    details: dict = {}

    vmin = float(np.nanmin(np.where(defined, v.values, np.nan)))
    positive = vmin >= -1e-12
    details["v_min"] = vmin

    margin = max(2.0 * scene.h, 2.5 * scene.h_b)
    point_mask = singular_mask(scene, u, extra=ridge_mask,
                               boundary_margin=margin)
    gx, gy = u.central_gradient()
    mag = scene.gauge.value(np.stack([gx, gy], axis=-1))
    core = defined & ~point_mask & np.isfinite(mag)
    grad_excess = float(np.max(np.where(core, mag, 0.0), initial=0.0) - 1.0)
    gradient_bound = grad_excess <= ch
    details["grad_excess"] = grad_excess

    # boundary comparisons through the nearest defined node
    smp = scene.samples
    uv, gd_to, gd_from = _boundary_node_lookup(scene, u)
    fin = smp.finite & np.isfinite(uv)
    below = uv[fin] <= smp.values[fin] + gd_to[fin] + ch
    below_rim = bool(np.all(below))
    details["rim_violations"] = int((~below).sum())
    on_gamma = bsets.gamma_f & fin
    if on_gamma.any():
        gap = np.abs(uv[on_gamma] - smp.values[on_gamma])
        slack = np.maximum(gd_to[on_gamma], gd_from[on_gamma]) + ch
        matches = bool(np.all(gap <= slack))
        details["exit_gap_max"] = float(gap.max())
    else:
        matches = True
    matches_rim_on_exit = matches

    comp = np.where(core, (1.0 - mag) * v.values, 0.0)
    comp_bound = ch * np.maximum(1.0, np.where(defined, v.values, 0.0))
    comp_bad = core & (comp > comp_bound)
    complementarity = not bool(comp_bad.any())
    details["complementarity_violations"] = int(comp_bad.sum())

    flux_mask = singular_mask(scene, u, extra=ridge_mask)
    flux_mask &= scene.boundary_distance_grid() > 4.0 * scene.h
    gamma_pts = smp.points[bsets.gamma_f]
    bumps = sample_bumps(scene, gamma_pts, n_tests, rng)
    weak = []
    weak_pass = True
    for psi in bumps:
        res, scl = weak_residual(scene, u, v, psi, flux_mask=flux_mask,
                                 source=source)
        ok = res <= tol.tol_weak * max(scl, 1e-14)
        weak_pass &= ok
        weak.append({"center": psi.c, "radius": psi.r, "residual": res,
                     "scale": scl, "pass": ok})
    return SolutionReport(positive, gradient_bound, below_rim,
                          matches_rim_on_exit, complementarity, weak,
                          weak_pass, details)


# ---------------------------------------------------------------------------
# Uniqueness, minimizers, stability


@dataclass
class UniquenessResult:
    unique: bool
    uncovered: np.ndarray          # (K,2) endpoints far from the support
    max_gap: float
    trivial_source: bool = False

    def to_json(self) -> dict:
        return {
            "verdict": "unique" if self.unique else "non_unique",
            "uncovered": [list(map(float, p)) for p in self.uncovered],
            "max_gap": float(self.max_gap),
            "trivial_source": bool(self.trivial_source),
        }


def uniqueness_predicate(scene: Scene, rf: RayField,
                         source: Source | None = None) -> UniquenessResult:
    """Unique profile iff every ray endpoint sits inside the sampled
    source support (within the endpoint margin)."""
    interior = scene.interior
    support = scene.support_mask(source) & interior
    if not support.any():
        return UniquenessResult(False, np.zeros((0, 2)), math.inf,
                                trivial_source=True)
    qsel = interior & (rf.reason != REASON_NONE)
    qs = rf.q[qsel]
    sup_pts = scene.grid.points()[support.ravel()]
    tree = cKDTree(sup_pts)
    dist, _ = tree.query(qs)
    delta = scene.tol.j_factor * scene.h
    bad = dist > delta
    if not bad.any():
        return UniquenessResult(True, np.zeros((0, 2)), float(dist.max()))
    order = np.argsort(-dist[bad])
    uncovered = qs[bad][order[:50]]
    return UniquenessResult(False, uncovered, float(dist.max()))


def minimizer_check(scene: Scene, u: ScalarField, u_phi: ScalarField,
                    bsets: BoundarySets, source: Source | None = None
                    ) -> tuple[bool, dict]:
    """Membership in the admissible class plus agreement with the maximal
    profile on the source support: the minimizer characterization."""
    tol = scene.tol
    ch = tol.c_grid * scene.h
    interior = scene.interior
    margin = max(2.0 * scene.h, 2.5 * scene.h_b)
    mask = singular_mask(scene, u, boundary_margin=margin)
    gx, gy = u.central_gradient()
    mag = scene.gauge.value(np.stack([gx, gy], axis=-1))
    core = interior & u.defined & ~mask & np.isfinite(mag)
    grad_ok = bool(np.max(np.where(core, mag, 0.0), initial=0.0) <= 1.0 + ch)

    smp = scene.samples
    uv, gd_to, gd_from = _boundary_node_lookup(scene, u)
    fin = smp.finite & np.isfinite(uv)
    below_ok = bool(np.all(uv[fin] <= smp.values[fin] + gd_to[fin] + ch))
    on_gamma = bsets.gamma_f & fin
    exit_ok = True
    if on_gamma.any():
        gap = np.abs(uv[on_gamma] - smp.values[on_gamma])
        exit_ok = bool(np.all(gap <= np.maximum(gd_to[on_gamma],
                                                gd_from[on_gamma]) + ch))

    support = scene.support_mask(source) & interior & u.defined & \
        u_phi.defined
    agree = True
    agree_gap = 0.0
    if support.any():
        agap = np.abs(u.values[support] - u_phi.values[support])
        agree_gap = float(agap.max())
        agree = agree_gap <= ch
    ok = grad_ok and below_ok and exit_ok and agree
    return ok, {"grad_ok": grad_ok, "below_ok": below_ok,
                "exit_ok": exit_ok, "support_agreement": agree,
                "support_gap": agree_gap}


def stability_check(scene: Scene, lh: LaxHopf, rf: RayField,
                    slices: RaySlices, f1: Source | np.ndarray,
                    f2: Source | np.ndarray) -> tuple[float, float, bool]:
    """L1 stability of the density in the source;
    lhs = |v1 - v2|_L1, rhs = diam * |f1 - f2|_L1 + C h."""
    def as_values(f):
        if isinstance(f, Source):
            return scene.source_field(f)
        return np.where(scene.interior, np.asarray(f, dtype=float), 0.0)

    df = as_values(f1) - as_values(f2)
    vdiff = transport_density(scene, lh, rf, slices, f_values=df)
    lhs = vdiff.l1()
    diam = scene.boundary.diameter(scene.gauge)
    rhs = diam * float(np.abs(df).sum() * scene.h ** 2) + \
        scene.tol.c_grid * scene.h
    return lhs, rhs, lhs <= rhs
