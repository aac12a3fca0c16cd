"""Gauge functions of smooth convex bodies and their polar duals.

A gauge is the Minkowski functional of a compact convex body K with 0 in
its interior: ``rho(xi) = inf{t >= 0 : xi in t*K}``.  The polar gauge
``rho0`` is the support function of K, i.e. the gauge of the polar body.
Distances in the solver are always measured with ``rho0``; the gradient
constraint on profiles is ``rho(Du) <= 1``.

Supported families have closed-form values, gradients and polars:
Euclidean ball, axis-aligned ellipses, and p-norm balls with 1 < p < inf.
All evaluators accept arrays of shape (..., 2).
"""

from __future__ import annotations

import numpy as np

__all__ = ["Gauge", "GaugeError", "euclidean", "ellipse", "pnorm"]

_POLAR_XCHECK_DIRS = 16
_POLAR_XCHECK_SAMPLES = 100_000
_POLAR_XCHECK_TOL = 1e-6


class GaugeError(ValueError):
    """Invalid gauge parameters or evaluation at a non-differentiability."""


class Gauge:
    """Gauge of a C^1 convex body in the plane.

    Use the module-level constructors ``euclidean``, ``ellipse`` and
    ``pnorm``, or ``Gauge.from_config``.  Instances are immutable and all
    evaluations are pure.
    """

    __slots__ = ("kind", "a", "b", "p", "_polar", "_c1", "_c2")

    def __init__(self, kind: str, *, a: float = 1.0, b: float = 1.0,
                 p: float = 2.0, _checked: bool = False):
        if kind not in ("euclidean", "ellipse", "pnorm"):
            raise GaugeError(f"unknown gauge kind {kind!r}")
        if kind == "ellipse" and (a <= 0.0 or b <= 0.0):
            raise GaugeError("ellipse semi-axes must be positive")
        if kind == "pnorm" and not (1.0 < p < np.inf):
            raise GaugeError("p-norm exponent must lie in (1, inf)")
        self.kind = kind
        self.a = float(a)
        self.b = float(b)
        self.p = float(p)
        self._polar: Gauge | None = None
        self._c1: float | None = None
        self._c2: float | None = None
        if not _checked:
            self._crosscheck_polar()

    # -- construction ------------------------------------------------

    @classmethod
    def from_config(cls, cfg: dict) -> "Gauge":
        kind = cfg.get("kind", "euclidean")
        if kind == "euclidean":
            return cls("euclidean")
        if kind == "ellipse":
            return cls("ellipse", a=float(cfg["a"]), b=float(cfg["b"]))
        if kind == "pnorm":
            return cls("pnorm", p=float(cfg["p"]))
        raise GaugeError(f"unknown gauge kind {kind!r}")

    def to_config(self) -> dict:
        if self.kind == "euclidean":
            return {"kind": "euclidean"}
        if self.kind == "ellipse":
            return {"kind": "ellipse", "a": self.a, "b": self.b}
        return {"kind": "pnorm", "p": self.p}

    def polar(self) -> "Gauge":
        """Gauge of the polar body; its value is the polar gauge rho0."""
        if self._polar is None:
            if self.kind == "euclidean":
                dual = Gauge("euclidean", _checked=True)
            elif self.kind == "ellipse":
                dual = Gauge("ellipse", a=1.0 / self.a, b=1.0 / self.b,
                             _checked=True)
            else:
                q = self.p / (self.p - 1.0)
                dual = Gauge("pnorm", p=q, _checked=True)
            dual._polar = self
            self._polar = dual
        return self._polar

    def _crosscheck_polar(self) -> None:
        # Guards the analytic polar against derivation slips: the polar
        # value must match the sampled support function max{<xi,x>: x in K}.
        theta = np.linspace(0.0, 2.0 * np.pi, _POLAR_XCHECK_SAMPLES,
                            endpoint=False)
        ring = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        bdry = ring / self.value(ring)[:, None]
        probes = np.linspace(0.0, 2.0 * np.pi, _POLAR_XCHECK_DIRS,
                             endpoint=False) + 0.1234
        xi = np.stack([np.cos(probes), np.sin(probes)], axis=-1)
        sampled = (xi @ bdry.T).max(axis=1)
        analytic = self.polar_value(xi)
        err = np.abs(sampled - analytic).max()
        if err > _POLAR_XCHECK_TOL:
            raise GaugeError(
                f"analytic polar disagrees with sampled support function "
                f"by {err:.3e}")

    # -- evaluation ---------------------------------------------------

    def value(self, xi) -> np.ndarray:
        """rho(xi), positively 1-homogeneous, zero only at the origin."""
        xi = np.asarray(xi, dtype=float)
        x, y = xi[..., 0], xi[..., 1]
        if self.kind == "euclidean":
            return np.hypot(x, y)
        if self.kind == "ellipse":
            return np.hypot(x / self.a, y / self.b)
        ax, ay = np.abs(x), np.abs(y)
        m = np.maximum(ax, ay)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = m * ((ax / m) ** self.p + (ay / m) ** self.p) ** (1.0 / self.p)
        return np.where(m > 0.0, r, 0.0)

    def polar_value(self, xi) -> np.ndarray:
        """rho0(xi) = max{<xi,x> : x in K}, the distance gauge."""
        return self.polar().value(xi)

    def gradient(self, xi) -> np.ndarray:
        """D rho at xi != 0; lies on the boundary of the polar body.

        Satisfies <Drho(xi), xi> = rho(xi) and rho0(Drho(xi)) = 1, and is
        constant along rays from the origin.  Raises ``GaugeError`` on any
        zero input: callers must treat such points (ridge points) themselves.
        """
        xi = np.asarray(xi, dtype=float)
        r = self.value(xi)
        if np.any(r == 0.0):
            raise GaugeError("gauge gradient undefined at the origin")
        x, y = xi[..., 0], xi[..., 1]
        if self.kind == "euclidean":
            g = np.stack([x / r, y / r], axis=-1)
        elif self.kind == "ellipse":
            g = np.stack([x / (self.a**2 * r), y / (self.b**2 * r)], axis=-1)
        else:
            rp = r ** (self.p - 1.0)
            gx = np.sign(x) * np.abs(x) ** (self.p - 1.0) / rp
            gy = np.sign(y) * np.abs(y) ** (self.p - 1.0) / rp
            g = np.stack([gx, gy], axis=-1)
        return g

    def euclid_bounds(self) -> tuple[float, float]:
        """Constants (c1, c2) with c1*|xi| <= value(xi) <= c2*|xi|."""
        if self._c1 is None:
            theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
            ring = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            vals = self.value(ring)
            self._c1, self._c2 = float(vals.min()), float(vals.max())
        return self._c1, self._c2

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "euclidean" or (
            self.kind == "ellipse" and self.a == 1.0 and self.b == 1.0)

    def __repr__(self) -> str:
        if self.kind == "euclidean":
            return "Gauge(euclidean)"
        if self.kind == "ellipse":
            return f"Gauge(ellipse, a={self.a}, b={self.b})"
        return f"Gauge(pnorm, p={self.p})"


def euclidean() -> Gauge:
    return Gauge("euclidean")


def ellipse(a: float, b: float) -> Gauge:
    return Gauge("ellipse", a=a, b=b)


def pnorm(p: float) -> Gauge:
    return Gauge("pnorm", p=p)
