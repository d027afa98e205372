"""The Poincare map T of the time-2pi flow and its orientation-reversing
square root.

T is the time-shift map over one forcing period; its square root Tstar is the
half-period shift composed with the symmetry sigma, so Tstar^2 = T as a
composition contract.  Inverses are realized by backward integration, never
by inverting forward results.  Derivatives are composed by the chain rule
across iterates, with the constant reflection differential inserted for the
sigma / S factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import flow
from .flow import DEFAULT_SETTINGS, IntegratorSettings
from .model import (
    DS,
    DSIGMA,
    Params,
    TorusPoint2,
    involution_r_arr,
    sigma_arr,
    symmetry_s_arr,
    torus_dist,
    wrap,
)

KINDS = ("T", "Tstar", "Tinverse", "TstarInverse")

# which base map inverts / reverses orientation
_INVERSE_KIND = {"T": "Tinverse", "Tinverse": "T",
                 "Tstar": "TstarInverse", "TstarInverse": "Tstar"}


@dataclass(frozen=True)
class MapSpec:
    """A selected iterate of the period map family.

    ``compose_s`` post-composes the reflection S after the q iterates, which
    is the orientation-reversing relative used when analyzing points on the
    invariant lines xi = 0, pi (S commutes with T, so for odd q this equals
    (S o T)^q).
    """

    kind: str
    power: int = 1
    p: Params = Params(0.0)
    s: IntegratorSettings = DEFAULT_SETTINGS
    compose_s: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.power < 1:
            raise ValueError("power must be >= 1")

    def inverse(self) -> "MapSpec":
        return replace(self, kind=_INVERSE_KIND[self.kind])

    @property
    def orientation_reversing(self) -> bool:
        odd_star = self.kind in ("Tstar", "TstarInverse") and self.power % 2 == 1
        return odd_star != self.compose_s


def _apply_factor_array(kind: str, pts: np.ndarray, p: Params,
                        s: IntegratorSettings) -> np.ndarray:
    """One application of the base map to an (N, 2) array."""
    if kind == "T":
        return flow.advance_array(pts, 0.0, 2.0 * math.pi, p, s)
    if kind == "Tinverse":
        return flow.advance_array(pts, 0.0, -2.0 * math.pi, p, s)
    if kind == "Tstar":
        return sigma_arr(flow.advance_array(pts, 0.0, math.pi, p, s))
    if kind == "TstarInverse":
        return flow.advance_array(sigma_arr(pts), math.pi, 0.0, p, s)
    raise ValueError(kind)


def _apply_factor_array_derivative(kind: str, pts: np.ndarray, p: Params,
                                   s: IntegratorSettings):
    if kind == "T":
        out, jac, _ = flow.advance_array_with_variational(pts, 0.0, 2.0 * math.pi, p, s)
        return out, jac
    if kind == "Tinverse":
        out, jac, _ = flow.advance_array_with_variational(pts, 0.0, -2.0 * math.pi, p, s)
        return out, jac
    if kind == "Tstar":
        out, jac, _ = flow.advance_array_with_variational(pts, 0.0, math.pi, p, s)
        return sigma_arr(out), DSIGMA @ jac
    if kind == "TstarInverse":
        out, jac, _ = flow.advance_array_with_variational(
            sigma_arr(pts), math.pi, 0.0, p, s
        )
        return out, jac @ DSIGMA
    raise ValueError(kind)


def apply_array(m: MapSpec, pts) -> np.ndarray:
    """q-th iterate of the selected map on an (..., 2) array of points.

    The state is renormalized to the torus after every factor so long
    iterate counts do not accumulate angle drift.
    """
    a = np.asarray(pts, dtype=float)
    out = wrap(a)
    for _ in range(m.power):
        out = _apply_factor_array(m.kind, out, m.p, m.s)
    if m.compose_s:
        out = symmetry_s_arr(out)
    return out


def apply(m: MapSpec, pt: TorusPoint2) -> TorusPoint2:
    return TorusPoint2.from_array(apply_array(m, pt.as_array()))


def apply_array_with_derivative(m: MapSpec, pts):
    """q-th iterate with its derivative, chained across the factors."""
    a = np.asarray(pts, dtype=float)
    shape = a.shape
    out = wrap(a).reshape(-1, 2)
    total = np.broadcast_to(np.eye(2), (out.shape[0], 2, 2)).copy()
    for _ in range(m.power):
        out, jac = _apply_factor_array_derivative(m.kind, out, m.p, m.s)
        total = jac @ total
    if m.compose_s:
        out = symmetry_s_arr(out)
        total = DS @ total
    return out.reshape(shape), total.reshape(shape[:-1] + (2, 2))


def apply_with_derivative(m: MapSpec, pt: TorusPoint2):
    out, jac = apply_array_with_derivative(m, pt.as_array())
    return TorusPoint2.from_array(out), jac


def verify_identities(p: Params, sample_count: int = 1000,
                      s: IntegratorSettings = DEFAULT_SETTINGS,
                      seed: int = 0) -> dict:
    """Max torus-distance deviation of the structural identities over a
    random sample: the square-root identity, the two reversibility
    conjugacies, the half-period shift conjugacy, S-equivariance, and the
    invariant/swapped symmetry lines."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 2.0 * math.pi, (sample_count, 2))
    t = MapSpec("T", 1, p, s)
    tinv = MapSpec("Tinverse", 1, p, s)
    tstar = MapSpec("Tstar", 1, p, s)
    tstar_inv = MapSpec("TstarInverse", 1, p, s)

    report = {}
    # Tstar(Tstar(x)) == T(x)
    report["tstar_squared"] = float(
        torus_dist(apply_array(tstar, apply_array(tstar, pts)),
                   apply_array(t, pts)).max()
    )
    # R o T o R == T^-1
    lhs = involution_r_arr(apply_array(t, involution_r_arr(pts)))
    report["r_t_r"] = float(torus_dist(lhs, apply_array(tinv, pts)).max())
    # R o Tstar o R == Tstar^-1
    lhs = involution_r_arr(apply_array(tstar, involution_r_arr(pts)))
    report["r_tstar_r"] = float(torus_dist(lhs, apply_array(tstar_inv, pts)).max())
    # T_{pi->2pi} == sigma o T_{0->pi} o sigma
    lhs = flow.advance_array(pts, math.pi, 2.0 * math.pi, p, s)
    rhs = sigma_arr(flow.advance_array(sigma_arr(pts), 0.0, math.pi, p, s))
    report["half_shift_conjugacy"] = float(torus_dist(lhs, rhs).max())
    # S o T == T o S
    lhs = symmetry_s_arr(apply_array(t, pts))
    rhs = apply_array(t, symmetry_s_arr(pts))
    report["s_equivariance"] = float(torus_dist(lhs, rhs).max())
    # T keeps the lines xi = 0, pi; Tstar swaps them
    etas = rng.uniform(0.0, 2.0 * math.pi, sample_count)
    for xi0, tag in ((0.0, "line0"), (math.pi, "line_pi")):
        line = np.stack([np.full_like(etas, xi0), etas], axis=-1)
        img_t = apply_array(t, line)
        img_star = apply_array(tstar, line)
        dev_t = np.abs(np.sin(0.5 * (img_t[:, 0] - xi0))).max() * 2.0
        dev_star = np.abs(np.sin(0.5 * (img_star[:, 0] - (math.pi - xi0)))).max() * 2.0
        report[f"t_keeps_{tag}"] = float(dev_t)
        report[f"tstar_swaps_{tag}"] = float(dev_star)
    return report
