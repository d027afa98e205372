"""One-dimensional stable/unstable manifolds of saddle periodic points and
their heteroclinic intersections.

A separatrix branch is grown by iterating a short fundamental segment along
the leading eigenvector under the period map (backward map for stable
branches), inserting points adaptively so that the polyline keeps a bounded
spacing and turning angle.  Transverse errors of the interpolation-based
insertion are contracted by the dynamics along the manifold, which is what
makes this curve-advancement scheme stable over many foldings.

Crossings between two branches are found with a torus-aware segment sweep;
each crossing carries the absolute angle between the local tangents, and
angles below a threshold mark near-tangencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .flow import DEFAULT_SETTINGS, SCAN_SETTINGS, IntegratorSettings
from .model import TWO_PI, Params, TorusPoint2, torus_dist, wrap, wrap_pm
from .orbit_finder import OrbitRecord
from .poincare import MapSpec, apply_array, apply_array_with_derivative


class ManifoldError(RuntimeError):
    pass


# growth control defaults
H_MAX = 1e-3
THETA_MAX = 0.2
SEED_DELTA = 1e-6
ANGLE_TANGENT_TOL = 5e-3


@dataclass
class Separatrix:
    """An ordered polyline along one branch of a saddle separatrix.

    ``points`` are lifted coordinates (continuous in the plane, starting at
    the saddle); use wrapped() for torus representatives.
    """

    owner: OrbitRecord
    stability: str          # "stable" | "unstable"
    side: int               # +1 | -1 along the eigenvector
    points: np.ndarray
    arclength: float
    on_symmetry_line: bool = False
    terminated: str = ""    # "budget" | "stalled" | "max_points"

    def wrapped(self) -> np.ndarray:
        return wrap(self.points)


@dataclass(frozen=True)
class HetCrossing:
    """A transverse or near-tangent intersection of two separatrices."""

    location: TorusPoint2
    angle: float
    from_orbit: OrbitRecord
    to_orbit: OrbitRecord

    @property
    def near_tangency(self) -> bool:
        return self.angle < ANGLE_TANGENT_TOL


def _principal_direction(owner: OrbitRecord, stability: str,
                         s: IntegratorSettings):
    """Leading eigenpair of the period-map derivative for the chosen branch.

    Returns (map spec to iterate, eigenvector, growth multiplier > 1).
    """
    if owner.type != "saddle":
        raise ManifoldError(f"owner must be a saddle, got {owner.type!r}")
    p = owner.epsilon
    m_fwd = MapSpec("T", owner.q, p, s)
    _, jac = apply_array_with_derivative(m_fwd, owner.point.as_array())
    lams, vecs = np.linalg.eig(jac)
    lams = lams.real
    vecs = vecs.real
    order = np.argsort(np.abs(lams))
    if stability == "unstable":
        lam = lams[order[1]]
        v = vecs[:, order[1]]
        m = m_fwd
        growth = lam
    elif stability == "stable":
        lam = lams[order[0]]
        v = vecs[:, order[0]]
        m = MapSpec("Tinverse", owner.q, p, s)
        growth = 1.0 / lam
    else:
        raise ValueError("stability must be 'stable' or 'unstable'")
    if growth < 0.0:
        # negative multiplier flips the branch; iterate the doubled map
        m = replace(m, power=2 * m.power)
        growth = growth * growth
    v = v / np.hypot(v[0], v[1])
    return m, v, float(growth)


def _lift_to(prev: np.ndarray, pt_wrapped: np.ndarray) -> np.ndarray:
    return prev + wrap_pm(pt_wrapped - wrap(prev))


def grow(owner: OrbitRecord, stability: str, side: int,
         budget_arclength: float = 50.0, *,
         s: IntegratorSettings = SCAN_SETTINGS,
         h_max: float = H_MAX, theta_max: float = THETA_MAX,
         delta: float = SEED_DELTA, max_points: int = 200_000) -> Separatrix:
    """Grow one separatrix branch to the requested arclength budget.

    Branches whose eigenvector lies along an invariant symmetry line
    xi in {0, pi} are represented exactly as straight segments of that line
    (they cannot split off it).
    """
    if side not in (-1, 1):
        raise ValueError("side must be +1 or -1")
    m, v, growth = _principal_direction(owner, stability, s)
    base = owner.point.as_array()

    on_line = (
        min(abs(wrap_pm(base[0])), abs(wrap_pm(base[0] - math.pi))) < 1e-8
        and abs(v[0]) < 1e-8
    )
    if on_line:
        return _grow_on_line(owner, stability, side, budget_arclength, m, h_max)

    a = base + side * delta * v
    # fundamental segment [a, M(a)] in lifted coordinates
    b = _lift_to(a, apply_array(m, a))
    seg = np.array([a, b])
    pts = [seg[0], seg[1]]
    total = float(np.hypot(*(seg[1] - seg[0])))
    stall_len = 0.25 * h_max
    terminated = ""
    prev_len = total
    while True:
        new_pts, new_len = _advance_segment(m, seg, pts, h_max, theta_max)
        if not new_pts:
            terminated = "stalled"
            break
        pts.extend(new_pts)
        total += new_len
        if total >= budget_arclength:
            terminated = "budget"
            break
        if len(pts) >= max_points:
            terminated = "max_points"
            break
        # a level that is both tiny and no longer expanding has converged
        # onto an attracting endpoint
        if new_len < stall_len and new_len <= prev_len:
            terminated = "stalled"
            break
        prev_len = new_len
        seg = np.array([pts[len(pts) - len(new_pts) - 1], *new_pts])
    arr = np.array(pts)
    return Separatrix(owner, stability, side, arr,
                      float(_polyline_length(arr)), False, terminated)


def _grow_on_line(owner, stability, side, budget, m, h_max) -> Separatrix:
    """Exact representation of a separatrix that lies on an invariant line:
    the segment of the line from the saddle to the next fixed point of the
    restricted map (or the budget, whichever is shorter)."""
    base = owner.point.as_array()
    xi0 = 0.0 if abs(wrap_pm(base[0])) < abs(wrap_pm(base[0] - math.pi)) else math.pi
    n = 4096
    etas = base[1] + side * np.linspace(0.0, TWO_PI, n, endpoint=False)
    line_pts = np.stack([np.full(n, xi0), etas], axis=-1)
    img = apply_array(m, line_pts)
    disp = wrap_pm(img[:, 1] - etas)
    # walk away from the saddle until the restricted displacement changes sign
    end = n - 1
    for i in range(2, n):
        if disp[i] * disp[1] < 0.0:
            end = i
            break
    length = min(budget, abs(etas[end] - etas[0]))
    npts = max(2, int(math.ceil(length / h_max)) + 1)
    etas_out = base[1] + side * np.linspace(0.0, length, npts)
    arr = np.stack([np.full(npts, xi0), etas_out], axis=-1)
    return Separatrix(owner, stability, side, arr, float(length), True, "line")


def _advance_segment(m: MapSpec, seg: np.ndarray, pts: list,
                     h_max: float, theta_max: float):
    """Map the latest fundamental piece forward with adaptive insertion.

    ``seg`` is the preimage polyline; new points are images of points
    interpolated along it.  Returns (new points list, their arclength).
    """
    ssd = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(seg, axis=0).T))])
    span = ssd[-1]
    if span <= 0.0:
        return [], 0.0

    def interp(sv: float) -> np.ndarray:
        i = min(np.searchsorted(ssd, sv) - 1, len(ssd) - 2)
        i = max(i, 0)
        w = (sv - ssd[i]) / max(ssd[i + 1] - ssd[i], 1e-300)
        return seg[i] + w * (seg[i + 1] - seg[i])

    new_pts = []
    new_len = 0.0
    sv = 0.0
    ds = span / 8.0
    ds_min = span * 1e-7
    while sv < span:
        ds = min(ds, span - sv)
        cand_s = sv + ds
        prev = pts[-1] if not new_pts else new_pts[-1]
        cand = _lift_to(prev, apply_array(m, wrap(interp(cand_s))))
        gap = float(np.hypot(*(cand - prev)))
        prev2 = (pts[-2] if len(pts) >= 2 else None) if not new_pts else \
            (new_pts[-2] if len(new_pts) >= 2 else pts[-1])
        ok = gap <= h_max
        if ok and prev2 is not None and gap > 1e-14:
            d1 = prev - prev2
            d2 = cand - prev
            n1 = np.hypot(*d1)
            n2 = np.hypot(*d2)
            if n1 > 1e-14:
                cosang = float(np.clip((d1 @ d2) / (n1 * n2), -1.0, 1.0))
                ok = math.acos(cosang) <= theta_max
        if ok or ds <= ds_min:
            new_pts.append(cand)
            new_len += gap
            sv = cand_s
            if gap < 0.25 * h_max:
                ds *= 2.0
        else:
            ds *= 0.5
    return new_pts, new_len


def _polyline_length(arr: np.ndarray) -> float:
    return float(np.hypot(*np.diff(arr, axis=0).T).sum())


# ---------------------------------------------------------------------------
# torus-aware segment intersection sweep
# ---------------------------------------------------------------------------

def _torus_segments(points: np.ndarray) -> np.ndarray:
    """Split a lifted polyline into wrapped segments fully inside the
    fundamental square.  Returns (n, 4) rows (x0, y0, dx, dy)."""
    p = points[:-1]
    d = np.diff(points, axis=0)
    base = wrap(p)
    segs = []
    end = base + d
    inside = np.all((end >= 0.0) & (end <= TWO_PI), axis=1) & \
        np.all((base >= 0.0) & (base <= TWO_PI), axis=1)
    segs.append(np.concatenate([base[inside], d[inside]], axis=1))
    for b, dd in zip(base[~inside], d[~inside]):
        ts = [0.0, 1.0]
        for c in range(2):
            if dd[c] > 0:
                t = (TWO_PI - b[c]) / dd[c]
            elif dd[c] < 0:
                t = -b[c] / dd[c]
            else:
                continue
            if 0.0 < t < 1.0:
                ts.append(t)
        ts.sort()
        for t0, t1 in zip(ts[:-1], ts[1:]):
            if t1 - t0 < 1e-15:
                continue
            mid = b + 0.5 * (t0 + t1) * dd
            start = wrap(mid) - 0.5 * (t1 - t0) * dd
            segs.append(np.concatenate([start, (t1 - t0) * dd])[None, :])
    return np.concatenate(segs, axis=0) if segs else np.empty((0, 4))


def _segment_pairs(sa: np.ndarray, sb: np.ndarray, cell: float):
    """Candidate index pairs whose cells (3x3 neighborhood) coincide."""
    n_cells = max(1, int(TWO_PI / cell))
    mida = (sa[:, :2] + 0.5 * sa[:, 2:]) / cell
    midb = (sb[:, :2] + 0.5 * sb[:, 2:]) / cell
    ca = np.floor(mida).astype(np.int64) % n_cells
    cb = np.floor(midb).astype(np.int64) % n_cells
    keyb = cb[:, 0] * n_cells + cb[:, 1]
    order = np.argsort(keyb, kind="stable")
    keyb_sorted = keyb[order]
    pairs_a = []
    pairs_b = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            key = ((ca[:, 0] + dx) % n_cells) * n_cells + (ca[:, 1] + dy) % n_cells
            lo = np.searchsorted(keyb_sorted, key, side="left")
            hi = np.searchsorted(keyb_sorted, key, side="right")
            cnt = hi - lo
            if cnt.sum() == 0:
                continue
            ia = np.repeat(np.arange(len(sa)), cnt)
            off = np.concatenate([np.arange(c) for c in cnt if c > 0]) if cnt.max() > 0 else np.empty(0, np.int64)
            ib = order[np.repeat(lo, cnt) + off]
            pairs_a.append(ia)
            pairs_b.append(ib)
    if not pairs_a:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(pairs_a), np.concatenate(pairs_b)


def crossings(a: Separatrix, b: Separatrix, *,
              angle_tol: float = ANGLE_TANGENT_TOL) -> list:
    """All intersections between two separatrix polylines on the torus.

    Crossing locations come from the exact parametric solve on the segment
    pairs; the angle is the absolute angle between the local tangent
    directions, in [0, pi/2].
    """
    sa = _torus_segments(np.asarray(a.points))
    sb = _torus_segments(np.asarray(b.points))
    if len(sa) == 0 or len(sb) == 0:
        return []
    cell = max(np.abs(sa[:, 2:]).max(), np.abs(sb[:, 2:]).max(), 1e-3) * 2.0
    ia, ib = _segment_pairs(sa, sb, cell)
    if len(ia) == 0:
        return []
    p1 = sa[ia, :2]
    r = sa[ia, 2:]
    p2 = sb[ib, :2]
    s2 = sb[ib, 2:]
    # allow the neighbor-shift copies across the periodic seam
    out = []
    seen = set()
    for shift_x in (-TWO_PI, 0.0, TWO_PI):
        for shift_y in (-TWO_PI, 0.0, TWO_PI):
            q = p2 + np.array([shift_x, shift_y])
            denom = r[:, 0] * s2[:, 1] - r[:, 1] * s2[:, 0]
            dp = q - p1
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (dp[:, 0] * s2[:, 1] - dp[:, 1] * s2[:, 0]) / denom
                u = (dp[:, 0] * r[:, 1] - dp[:, 1] * r[:, 0]) / denom
            hit = (np.abs(denom) > 1e-300) & (t >= 0.0) & (t <= 1.0) & \
                (u >= 0.0) & (u <= 1.0)
            for idx in np.flatnonzero(hit):
                loc = wrap(p1[idx] + t[idx] * r[idx])
                key = (round(loc[0] / 1e-7), round(loc[1] / 1e-7))
                if key in seen:
                    continue
                seen.add(key)
                rr = r[idx]
                ss = s2[idx]
                cross_mag = abs(rr[0] * ss[1] - rr[1] * ss[0])
                norm = np.hypot(*rr) * np.hypot(*ss)
                ang = math.asin(min(1.0, cross_mag / max(norm, 1e-300)))
                u_orbit = a.owner if a.stability == "unstable" else b.owner
                s_orbit = b.owner if b.stability == "stable" else a.owner
                out.append(HetCrossing(TorusPoint2.from_array(loc), float(ang),
                                       u_orbit, s_orbit))
    out.sort(key=lambda c: (c.location.xi, c.location.eta))
    return out


def first_tangency_scan(pair_builder, eps_lo: float, eps_hi: float, *,
                        tol: float = 2e-3) -> float:
    """Bisect epsilon on the emptiness of the crossing list.

    ``pair_builder(eps)`` grows and returns the two separatrices to test.
    The crossing list must be empty at exactly one end of the range.
    """
    def has_crossings(eps):
        a, b = pair_builder(eps)
        return len(crossings(a, b)) > 0

    c_lo = has_crossings(eps_lo)
    c_hi = has_crossings(eps_hi)
    if c_lo == c_hi:
        raise ManifoldError(
            f"crossings {'exist' if c_lo else 'absent'} at both ends of "
            f"[{eps_lo}, {eps_hi}]"
        )
    lo, hi = eps_lo, eps_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if has_crossings(mid) == c_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
