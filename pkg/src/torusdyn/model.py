"""Vector fields, coordinate changes and symmetries of the coupled-rotator model.

The model is a chain of four phase rotators with reversible nearest-neighbour
coupling (Pikovsky-Topaj coupling); only the three phase differences
``psi1, psi2, psi3`` are dynamical.  A linear change of variables plus a time
reparameterization reduces the flow to a non-autonomous, 2pi-time-periodic
system for two angles ``(xi, eta)`` on the torus.  Everything downstream
(Poincare maps, orbit finding, manifolds) works in these reduced coordinates.

All angles are normalized to [0, 2pi) at type boundaries; intermediate
arithmetic may leave that range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class ModelError(ValueError):
    """Invalid model parameter or state."""


def wrap(a):
    """Reduce an angle (scalar or array) to [0, 2pi)."""
    return np.mod(a, TWO_PI)


def wrap_pm(d):
    """Reduce an angle difference to (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(d), TWO_PI)


def torus_dist(a, b):
    """Shortest distance on the 2-torus, componentwise wrapped then hypot.

    ``a`` and ``b`` are length-2 sequences or (..., 2) arrays.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = wrap_pm(a - b)
    return np.hypot(d[..., 0], d[..., 1]) if d.ndim > 1 else float(np.hypot(d[0], d[1]))


@dataclass(frozen=True)
class Params:
    """Coupling strength; the reduced field's denominator needs epsilon < 2."""

    epsilon: float

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 2.0) or not math.isfinite(self.epsilon):
            raise ModelError(f"epsilon must lie in [0, 2), got {self.epsilon}")


@dataclass(frozen=True)
class Angles3:
    """Phase differences (psi1, psi2, psi3), normalized to [0, 2pi)."""

    psi1: float
    psi2: float
    psi3: float

    def __post_init__(self):
        for name in ("psi1", "psi2", "psi3"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ModelError(f"{name} must be finite")
            object.__setattr__(self, name, float(wrap(v)))

    def as_array(self) -> np.ndarray:
        return np.array([self.psi1, self.psi2, self.psi3])


@dataclass(frozen=True)
class ReducedPoint3:
    """Reduced coordinates (xi, eta, rho); rho doubles as the new time."""

    xi: float
    eta: float
    rho: float

    def __post_init__(self):
        for name in ("xi", "eta", "rho"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ModelError(f"{name} must be finite")
            object.__setattr__(self, name, float(wrap(v)))

    def as_array(self) -> np.ndarray:
        return np.array([self.xi, self.eta, self.rho])


@dataclass(frozen=True)
class TorusPoint2:
    """A point (xi, eta) on the cross-section torus."""

    xi: float
    eta: float

    def __post_init__(self):
        for name in ("xi", "eta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ModelError(f"{name} must be finite")
            object.__setattr__(self, name, float(wrap(v)))

    def as_array(self) -> np.ndarray:
        return np.array([self.xi, self.eta])

    @classmethod
    def from_array(cls, a) -> "TorusPoint2":
        return cls(float(a[0]), float(a[1]))


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

def vf_original(psi: Angles3, p: Params) -> np.ndarray:
    """Rates of change of the three phase differences."""
    e = p.epsilon
    s1, s2, s3 = math.sin(psi.psi1), math.sin(psi.psi2), math.sin(psi.psi3)
    return np.array(
        [
            1.0 - 2.0 * e * s1 + e * s2,
            1.0 - 2.0 * e * s2 + e * s1 + e * s3,
            1.0 - 2.0 * e * s3 + e * s2,
        ]
    )


def vf_reduced3(rp: ReducedPoint3, p: Params) -> np.ndarray:
    """Autonomous reduced field for (xi, eta, rho), before the time change."""
    e = p.epsilon
    cr = math.cos(rp.rho - rp.eta)
    return np.array(
        [
            2.0 * e * math.sin(rp.xi) * math.sin(rp.eta),
            1.0 - e * cr - 2.0 * e * math.cos(rp.xi) * math.cos(rp.eta),
            2.0 + e * cr,
        ]
    )


def vf_reduced(pt, t, p: Params) -> np.ndarray:
    """Non-autonomous reduced field on the torus; 2pi-periodic in t, xi, eta.

    ``pt`` may be a TorusPoint2, a length-2 sequence, or an (..., 2) array;
    ``t`` may be unreduced (only t mod 2pi matters).
    """
    e = p.epsilon
    a = pt.as_array() if isinstance(pt, TorusPoint2) else np.asarray(pt, dtype=float)
    xi = a[..., 0]
    eta = a[..., 1]
    d = 2.0 + e * np.cos(t - eta)
    f1 = 2.0 * e * np.sin(xi) * np.sin(eta) / d
    f2 = (1.0 - e * np.cos(t - eta) - 2.0 * e * np.cos(xi) * np.cos(eta)) / d
    return np.stack([f1, f2], axis=-1)


def jac_reduced(pt, t, p: Params) -> np.ndarray:
    """Analytic Jacobian of vf_reduced with respect to (xi, eta)."""
    e = p.epsilon
    a = pt.as_array() if isinstance(pt, TorusPoint2) else np.asarray(pt, dtype=float)
    xi, eta = float(a[0]), float(a[1])
    sx, cx = math.sin(xi), math.cos(xi)
    sy, cy = math.sin(eta), math.cos(eta)
    ct = math.cos(t - eta)
    st = math.sin(t - eta)
    d = 2.0 + e * ct
    n1 = 2.0 * e * sx * sy
    n2 = 1.0 - e * ct - 2.0 * e * cx * cy
    # d(D)/d(eta) = e*st
    j11 = 2.0 * e * cx * sy / d
    j12 = 2.0 * e * sx * cy / d - n1 * e * st / (d * d)
    j21 = 2.0 * e * sx * cy / d
    j22 = (-e * st + 2.0 * e * cx * sy) / d - n2 * e * st / (d * d)
    return np.array([[j11, j12], [j21, j22]])


def divergence_reduced(pt, t, p: Params) -> float:
    """Analytic trace of the linearized reduced field at (pt, t)."""
    e = p.epsilon
    a = pt.as_array() if isinstance(pt, TorusPoint2) else np.asarray(pt, dtype=float)
    xi, eta = float(a[0]), float(a[1])
    sx = math.sin(xi)
    cx = math.cos(xi)
    sy = math.sin(eta)
    cy = math.cos(eta)
    ct = math.cos(t - eta)
    st = math.sin(t - eta)
    d = 2.0 + e * ct
    n2 = 1.0 - e * ct - 2.0 * e * cx * cy
    return (4.0 * e * cx * sy - e * st) / d - n2 * e * st / (d * d)


# ---------------------------------------------------------------------------
# coordinate changes
# ---------------------------------------------------------------------------

def to_reduced(psi: Angles3) -> ReducedPoint3:
    """Linear change from phase differences to (xi, eta, rho)."""
    xi = 0.5 * (psi.psi1 - psi.psi3)
    eta = 0.5 * (psi.psi1 + psi.psi3 - math.pi)
    rho = eta + psi.psi2 - math.pi
    return ReducedPoint3(xi, eta, rho)


def from_reduced(rp: ReducedPoint3) -> Angles3:
    """Right inverse of to_reduced, modulo 2pi."""
    psi1 = rp.eta + rp.xi + 0.5 * math.pi
    psi3 = rp.eta - rp.xi + 0.5 * math.pi
    psi2 = rp.rho - rp.eta + math.pi
    return Angles3(psi1, psi2, psi3)


# ---------------------------------------------------------------------------
# involutions and symmetries
# ---------------------------------------------------------------------------

def involution_r3(psi: Angles3) -> Angles3:
    """Time-reversing involution in the original phase differences."""
    return Angles3(math.pi - psi.psi3, math.pi - psi.psi2, math.pi - psi.psi1)


def involution_r(pt: TorusPoint2) -> TorusPoint2:
    """Time-reversing involution on the torus: (xi, eta) -> (xi, -eta)."""
    return TorusPoint2(pt.xi, -pt.eta)


def sigma(pt: TorusPoint2) -> TorusPoint2:
    """Half-period shift symmetry: (xi, eta) -> (pi - xi, pi + eta)."""
    return TorusPoint2(math.pi - pt.xi, math.pi + pt.eta)


def symmetry_s(pt: TorusPoint2) -> TorusPoint2:
    """Reflection symmetry: (xi, eta) -> (-xi, eta)."""
    return TorusPoint2(-pt.xi, pt.eta)


def involution_r_arr(pts: np.ndarray) -> np.ndarray:
    out = np.array(pts, dtype=float, copy=True)
    out[..., 1] = wrap(-out[..., 1])
    out[..., 0] = wrap(out[..., 0])
    return out


def sigma_arr(pts: np.ndarray) -> np.ndarray:
    out = np.empty_like(np.asarray(pts, dtype=float))
    pts = np.asarray(pts, dtype=float)
    out[..., 0] = wrap(math.pi - pts[..., 0])
    out[..., 1] = wrap(math.pi + pts[..., 1])
    return out


def symmetry_s_arr(pts: np.ndarray) -> np.ndarray:
    out = np.array(pts, dtype=float, copy=True)
    out[..., 0] = wrap(-out[..., 0])
    out[..., 1] = wrap(out[..., 1])
    return out


# differentials of sigma and S (both reflect xi)
DSIGMA = np.array([[-1.0, 0.0], [0.0, 1.0]])
DS = np.array([[-1.0, 0.0], [0.0, 1.0]])
