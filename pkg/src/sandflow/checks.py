"""Scripted assertions for the bundled example scenes.

Each fixture has a list of expected structural outcomes (which hypothesis
checks pass, which closed forms the computed fields must match, which
candidate pairs must verify).  ``run_example`` materializes the scene and
its closed-form reference fields into an output directory, runs the
pipeline, evaluates the assertions and returns a machine-usable summary.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from . import fixtures, pipeline, verify
from .fields import ScalarField
from .fixtures import (c_const, c_ramp, disk_u, disk_v, ex1_u, ex2_u, ex2_v,
                       ex2_w, ex3_branches, ex3_u, rect_u, rect_v)
from .geometry import Scene

__all__ = ["run_example", "ExampleOutcome"]


class ExampleOutcome:
    def __init__(self):
        self.checks: list[tuple[str, bool, str]] = []
        self.solution = None

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def lines(self) -> list[str]:
        return ["%s %s%s" % ("PASS" if ok else "FAIL", name,
                             f"  ({detail})" if detail else "")
                for name, ok, detail in self.checks]


def _interior_pts(scene: Scene) -> np.ndarray:
    return scene.grid.points().reshape(scene.grid.shape + (2,))


def _sup_err(scene: Scene, fld: ScalarField, oracle_fn,
             mask: np.ndarray | None = None) -> float:
    pts = _interior_pts(scene)
    sel = scene.interior & fld.defined
    if mask is not None:
        sel &= mask
    if not sel.any():
        return math.nan
    return float(np.abs(fld.values[sel] - oracle_fn(pts[sel])).max())


def _l1_err(scene: Scene, fld: ScalarField, oracle_fn) -> float:
    pts = _interior_pts(scene)
    sel = scene.interior & fld.defined
    return float(np.abs(fld.values[sel] - oracle_fn(pts[sel])).sum()
                 * scene.h ** 2)


def _external_pair(scene: Scene, u_fn, v_fn) -> tuple[ScalarField,
                                                      ScalarField]:
    grid = scene.grid
    mask = scene.interior
    u = ScalarField.from_function(grid, u_fn, mask=mask)
    v = ScalarField.from_function(grid, v_fn, mask=mask)
    return u, v


def run_example(fixture: str, out_dir: str | None = None, *,
                h: float = 1.0 / 128.0, seed: int = 0,
                arc_deg: float = 1.0, h_b: float | None = None,
                scene: Scene | None = None,
                solution: pipeline.Solution | None = None
                ) -> ExampleOutcome:
    """Materialize, solve and check one bundled fixture."""
    if fixture not in fixtures.FIXTURE_IDS:
        raise ValueError(f"unknown fixture {fixture!r}")
    if scene is None:
        kw = {} if h_b is None else {"h_b": h_b}
        scene = fixtures.load_fixture(fixture, h=h, arc_deg=arc_deg, **kw)
    out = ExampleOutcome()
    sol = solution if solution is not None else \
        pipeline.solve_scene(scene, seed=seed)
    out.solution = sol
    ch4 = 4.0 * scene.h

    if fixture == "disk":
        out.add("h5", sol.h5.passed)
        out.add("h6", sol.h6.passed and sol.h6.vacuous,
                "no boundary ray endpoints")
        e_u = _sup_err(scene, sol.lh.u, disk_u)
        out.add("profile_sup", e_u <= 2.0 * scene.h, f"{e_u:.2e}")
        e_v = _l1_err(scene, sol.v_f, disk_v)
        out.add("density_l1", e_v <= 5.0 * scene.h, f"{e_v:.2e}")
        out.add("uniqueness", sol.uniqueness.unique)
        e_f = float(np.nanmax(np.abs(sol.u_f.values - sol.lh.u.values)))
        out.add("minimal_equals_maximal",
                e_f <= scene.tol.c_grid * scene.h, f"{e_f:.2e}")
        out.add("pair_verifies", sol.pair_report.passed)
    elif fixture == "rect":
        out.add("h5", sol.h5.passed)
        out.add("h6", sol.h6.passed and not sol.h6.vacuous,
                f"min distance {sol.h6.min_distance:.3f}")
        out.add("h6_distance", abs(sol.h6.min_distance - 1.0) <= 0.1,
                f"{sol.h6.min_distance:.3f}")
        e_u = _sup_err(scene, sol.lh.u, rect_u)
        out.add("profile_sup", e_u <= 2.0 * scene.h, f"{e_u:.2e}")
        e_v = _l1_err(scene, sol.v_f, rect_v)
        out.add("density_l1", e_v <= 5.0 * scene.h, f"{e_v:.2e}")
    elif fixture == "ex1":
        out.add("h5_fails", not sol.h5.passed,
                f"{len(sol.h5.witnesses)} witnesses")
        out.add("h5_witnesses", len(sol.h5.witnesses) >= 1)
        e_u = _sup_err(scene, sol.lh.geodesic, ex1_u)
        out.add("geodesic_profile_sup", e_u <= ch4, f"{e_u:.2e}")
    elif fixture == "ex2":
        out.add("h5_fails", not sol.h5.passed)
        e_u = _sup_err(scene, sol.lh.geodesic, ex2_u)
        out.add("geodesic_profile_sup", e_u <= ch4, f"{e_u:.2e}")
        for name, cf in (("const", c_const), ("ramp", c_ramp)):
            u_ext, v_ext = _external_pair(
                scene, ex2_u, lambda p, cf=cf: ex2_v(p) + ex2_w(p, cf))
            rep = verify.verify_solution(
                scene, u_ext, v_ext, sol.bsets,
                rng=np.random.default_rng(seed))
            out.add(f"pair_accepted_{name}", rep.passed,
                    _report_stats(rep))
    elif fixture == "ex3":
        out.add("h5", sol.h5.passed)
        out.add("h6_fails", not sol.h6.passed)
        if sol.h6.pair is not None:
            d0 = float(np.hypot(*sol.h6.pair[0]))
            d1 = float(np.hypot(*sol.h6.pair[1]))
            out.add("h6_pair_near_origin", max(d0, d1) <= 0.1,
                    f"endpoint {sol.h6.pair[0]}, exit {sol.h6.pair[1]}")
        else:
            out.add("h6_pair_near_origin", False, "no pair reported")
        pts = _interior_pts(scene)
        branches = ex3_branches(pts, margin=2.0 * scene.h)
        worst = 0.0
        for name, mask in branches.items():
            sel = scene.interior & mask & sol.lh.u.defined
            if not sel.any():
                continue
            err = float(np.abs(sol.lh.u.values[sel] - ex3_u(pts[sel])).max())
            worst = max(worst, err)
            out.add(f"branch_{name}", err <= ch4, f"{err:.2e}")
        gamma_ok, gamma_detail = _ex3_gamma_check(scene, sol)
        out.add("exit_sets", gamma_ok, gamma_detail)
        out.add("pair_verifies", sol.pair_report.passed,
                _report_stats(sol.pair_report))
        u_ext = sol.lh.u
        v_ext = ScalarField(
            scene.grid,
            np.where(np.isfinite(sol.v_f.values),
                     sol.v_f.values + _ex3_w(pts), np.nan))
        rep = verify.verify_solution(scene, u_ext, v_ext, sol.bsets,
                                     rng=np.random.default_rng(seed),
                                     ridge_mask=sol.rf.ridge)
        out.add("pair_plus_circulation_verifies", rep.passed,
                _report_stats(rep))
    if out_dir is not None:
        _materialize(fixture, scene, sol, out, out_dir)
    return out


def _report_stats(rep: verify.SolutionReport) -> str:
    if not rep.weak:
        return "no weak tests"
    worst = max(w["residual"] / max(w["scale"], 1e-14) for w in rep.weak)
    return f"worst weak ratio {worst:.3f}"


def _ex3_w(pts: np.ndarray) -> np.ndarray:
    """Sector circulation density with constant angular profile 1/2."""
    return fixtures.ex2_w(pts, lambda th: np.full_like(th, 0.5))


def _ex3_gamma_check(scene: Scene, sol) -> tuple[bool, str]:
    """Computed exit sets must sit on the open pieces and cover their
    resolvable part within about one sample spacing."""
    smp = scene.samples
    open_pieces = {0, 2, 4}     # bottom+arc, inner square edges, upper lid
    piece_ok = bool(np.all(np.isin(smp.piece[sol.bsets.gamma_phi],
                                   list(open_pieces))))
    same = bool(np.all(sol.bsets.gamma_phi == sol.bsets.gamma_f))

    # resolvable: rays at least one cell long, clear of piece junctions
    res = np.zeros(len(smp), dtype=bool)
    x, y = smp.points[:, 0], smp.points[:, 1]
    rmin = 2.0 * math.sqrt(scene.h)
    res |= (smp.piece == 0)
    res |= (smp.piece == 4)
    res |= (smp.piece == 2) & (np.abs(y) < 1e-9) & (x >= rmin)
    res |= (smp.piece == 2) & (np.abs(x - 1.0) < 1e-9) & (y <= 1.0 - rmin)
    verts = np.array([[0.0, -1.0], [math.sqrt(0.5), -math.sqrt(0.5)],
                      [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0],
                      [-1.0, 1.0], [-1.0, -1.0]])
    dv = np.min(np.hypot(x[:, None] - verts[None, :, 0],
                         y[:, None] - verts[None, :, 1]), axis=1)
    res &= dv > 4.0 * scene.h
    got = smp.points[sol.bsets.gamma_phi]
    if not len(got):
        return False, "empty exit set"
    from scipy.spatial import cKDTree
    gap = cKDTree(got).query(smp.points[res])[0]
    covered = float(gap.max(initial=0.0))
    ok = piece_ok and same and covered <= 1.5 * scene.h_b
    return ok, (f"pieces_ok={piece_ok} same={same} "
                f"cover_gap={covered:.4f}")


def _materialize(fixture: str, scene: Scene, sol, out: ExampleOutcome,
                 out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    cfg = fixtures.scene_config(fixture, h=scene.h, h_b=scene.h_b)
    with open(os.path.join(out_dir, "scene.json"), "w",
              encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=1, sort_keys=True)
        fh.write("\n")
    pipeline.write_fields_csv(sol, os.path.join(out_dir, "fields.csv"))
    pipeline.report_json(sol, os.path.join(out_dir, "report.json"))
    oracles = {
        "disk": (disk_u, disk_v),
        "rect": (rect_u, rect_v),
        "ex1": (ex1_u, None),
        "ex2": (ex2_u, lambda p: ex2_v(p) + ex2_w(p, c_const)),
        "ex3": (ex3_u, None),
    }[fixture]
    names = ("oracle_u.csv", "oracle_v.csv")
    for fn, name in zip(oracles, names):
        if fn is None:
            continue
        fld = ScalarField.from_function(scene.grid, fn, mask=scene.interior)
        fld.save_csv(os.path.join(out_dir, name),
                     name.split(".")[0].replace("oracle_", ""))
    with open(os.path.join(out_dir, "checks.txt"), "w",
              encoding="utf-8") as fh:
        for line in out.lines():
            fh.write(line + "\n")
