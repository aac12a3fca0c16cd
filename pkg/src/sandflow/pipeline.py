"""End-to-end solve: profile, hypotheses, rays, density, minimal profile.

The stages run in dependency order and stop early when straight-line
transport fails certification (the later stages presume it).  Results are
collected in a Solution object that can serialize the standard field
table and the machine-readable report.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import eikonal, transport, verify
from .fields import ScalarField, fmt_float
from .geometry import Scene

__all__ = ["Solution", "solve_scene", "write_fields_csv", "report_json"]

FIELD_COLUMNS = ("u_phi", "u_f", "v_f", "d1", "d2", "a", "b", "ridge_flag",
                 "alpha_end")


@dataclass
class Solution:
    scene: Scene
    lh: eikonal.LaxHopf
    h5: verify.H5Result | None = None
    rf: eikonal.RayField | None = None
    bsets: eikonal.BoundarySets | None = None
    h6: verify.H6Result | None = None
    slices: transport.RaySlices | None = None
    v_f: ScalarField | None = None
    u_f: ScalarField | None = None
    uniqueness: verify.UniquenessResult | None = None
    pair_report: verify.SolutionReport | None = None
    notes: dict = field(default_factory=dict)

    @property
    def hypotheses_ok(self) -> bool:
        return (self.h5 is not None and self.h5.passed
                and self.h6 is not None and self.h6.passed)

    def report(self) -> dict:
        rep: dict = {
            "h5": self.h5.to_json() if self.h5 else None,
            "h6": self.h6.to_json() if self.h6 else None,
            "uniqueness": (self.uniqueness.to_json()
                           if self.uniqueness else None),
            "weak": (self.pair_report.to_json()["weak"]
                     if self.pair_report else []),
            "invariants": self._invariants(),
        }
        if self.pair_report is not None:
            rep["pair_check"] = self.pair_report.to_json()
        return rep

    def _invariants(self) -> list:
        inv = [{"name": "mode_discrepancy",
                "value": float(self.lh.discrepancy)}]
        interior = self.scene.interior
        n_int = max(1, int(interior.sum()))
        if self.rf is not None:
            inv.append({"name": "ridge_fraction",
                        "value": float((self.rf.ridge & interior).sum())
                        / n_int})
        if self.slices is not None:
            inv.append({"name": "slice_coverage",
                        "value": float(self.slices.coverage)})
        for k, v in self.notes.items():
            inv.append({"name": k, "value": v})
        return inv


def solve_scene(scene: Scene, *, geodesic: bool = True,
                assume_h5: bool | None = None,
                run_transport: bool = True,
                run_verify: bool = True,
                seed: int | None = None) -> Solution:
    """Run the full pipeline on a scene.

    ``assume_h5`` overrides certification (used for internal convergence
    studies that skip the geodesic mode); normally the straight-segment
    check decides whether the transport stages run.
    """
    lh = eikonal.lax_hopf(scene, geodesic=geodesic)
    sol = Solution(scene, lh)
    if geodesic:
        sol.h5 = verify.check_h5(scene, lh)
        h5_ok = sol.h5.passed
    else:
        if assume_h5 is None:
            raise ValueError("direct-only solve needs an explicit "
                             "assume_h5 decision")
        h5_ok = bool(assume_h5)
    sol.rf = eikonal.ray_field(scene, lh)
    sol.bsets = eikonal.boundary_sets(scene, lh, sol.rf)
    sol.h6 = verify.check_h6(scene, sol.bsets)
    if not (h5_ok and run_transport):
        return sol
    sol.slices = transport.build_slices(scene, sol.rf, h5_certified=True)
    sol.v_f = transport.transport_density(scene, lh, sol.rf, sol.slices)
    sol.u_f = transport.minimal_profile(scene, lh)
    sol.uniqueness = verify.uniqueness_predicate(scene, sol.rf)
    if run_verify:
        rng = np.random.default_rng(scene.tol.seed if seed is None else seed)
        sol.pair_report = verify.verify_solution(
            scene, lh.u, sol.v_f, sol.bsets, rng=rng,
            ridge_mask=sol.rf.ridge)
    return sol


def write_fields_csv(sol: Solution, path) -> None:
    """One row per interior node: coordinates, profiles, density and ray
    data, in fixed node order with fixed float formatting."""
    scene = sol.scene
    grid = scene.grid
    interior = scene.interior
    ii, jj = np.nonzero(interior)
    xs = grid.x0 + grid.h * ii
    ys = grid.y0 + grid.h * jj

    def col(arr):
        if arr is None:
            return np.full(len(ii), np.nan)
        return arr[ii, jj]

    cols = {
        "u_phi": col(sol.lh.u.values),
        "u_f": col(sol.u_f.values if sol.u_f is not None else None),
        "v_f": col(sol.v_f.values if sol.v_f is not None else None),
        "d1": col(sol.rf.d[..., 0] if sol.rf is not None else None),
        "d2": col(sol.rf.d[..., 1] if sol.rf is not None else None),
        "a": col(sol.rf.a if sol.rf is not None else None),
        "b": col(sol.rf.b if sol.rf is not None else None),
        "ridge_flag": (col(sol.rf.ridge.astype(float))
                       if sol.rf is not None else np.zeros(len(ii))),
        "alpha_end": col(sol.rf.alpha_end if sol.rf is not None
                         and sol.rf.alpha_end is not None else None),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(grid.header() + "\n")
        fh.write("x,y," + ",".join(FIELD_COLUMNS) + "\n")
        for k in range(len(ii)):
            row = [fmt_float(xs[k]), fmt_float(ys[k])]
            row += [fmt_float(cols[name][k]) for name in FIELD_COLUMNS]
            fh.write(",".join(row) + "\n")


def report_json(sol: Solution, path) -> None:
    import json
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sol.report(), fh, indent=1, sort_keys=True)
        fh.write("\n")
