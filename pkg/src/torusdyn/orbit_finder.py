"""Finding, refining, classifying and continuing symmetric periodic orbits.

R-symmetric periodic orbits are located through intersections of the image
curves T^k({eta = 0, pi}) with those fixed circles of the involution: a point
x on a fixed circle whose k-th image lands on a fixed circle satisfies
T^{2k}(x) = x.  Tangencies of the image curve with the circles mark the birth
of new orbit families as the coupling strength varies; these are bracketed by
root counting and polished with a fold solver.

Newton refinement always uses the variational derivative of the map, never
finite differences, so it stays usable close to parabolic points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import poincare
from .flow import DEFAULT_SETTINGS, SCAN_SETTINGS, IntegratorSettings
from .model import (
    TWO_PI,
    Params,
    TorusPoint2,
    involution_r,
    symmetry_s,
    torus_dist,
    wrap,
    wrap_pm,
)
from .poincare import MapSpec, apply_array, apply_array_with_derivative


class OrbitError(RuntimeError):
    pass


class RefineError(OrbitError):
    """Newton refinement did not converge."""


class SingularJacobianError(RefineError):
    """Derivative of (map - identity) numerically singular (near-parabolic)."""


class AmbiguousTypeError(OrbitError):
    """Multipliers fall in the tolerance gap between types; not guessed."""


class NoBracketError(OrbitError):
    """Root count does not change over the requested parameter range."""


# taxonomy tolerances
PARABOLIC_DELTA = 1e-4
ELLIPTIC_TOL = 1e-6

LINE_ETA = {"eta0": 0.0, "etaPi": math.pi}


@dataclass(frozen=True)
class FixLine:
    """One circle of the fixed set of the involution R."""

    which: str  # "eta0" | "etaPi"

    def __post_init__(self):
        if self.which not in LINE_ETA:
            raise ValueError(f"which must be 'eta0' or 'etaPi', got {self.which!r}")

    @property
    def eta(self) -> float:
        return LINE_ETA[self.which]

    def points(self, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.stack([wrap(xi), np.full_like(xi, self.eta)], axis=-1)


@dataclass(frozen=True)
class ScanRoot:
    """Intersection or near-tangency of T^k(source line) with a fixed circle."""

    xi: float
    target: str            # "eta0" | "etaPi"
    kind: str              # "crossing" | "tangency"
    gap: float = 0.0       # signed eta-distance at the extremum (tangency only)

    def point(self, line: FixLine) -> TorusPoint2:
        return TorusPoint2(self.xi, line.eta)


@dataclass(frozen=True)
class ScanResult:
    roots: tuple
    whole_line_targets: tuple = ()

    def crossings(self, target=None):
        return [r for r in self.roots
                if r.kind == "crossing" and (target is None or r.target == target)]

    def tangencies(self, target=None):
        return [r for r in self.roots
                if r.kind == "tangency" and (target is None or r.target == target)]

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)


# sentinel for the degenerate case where the image coincides with a circle
WHOLE_LINE = "whole-line-coincidence"


@dataclass(frozen=True)
class OrbitRecord:
    """A refined periodic point with its multiplier data and symmetry flags."""

    point: TorusPoint2
    q: int
    epsilon: Params
    multipliers: tuple
    jacobian: float
    type: str
    r_symmetric: bool
    s_symmetric: bool
    half_period_flag: bool     # True: the T-orbit is a length-q Tstar orbit (odd q)
    orbit_points: tuple = ()   # the q points of the T-orbit


@dataclass
class Branch:
    """A periodic-orbit family continued in epsilon."""

    records: list = field(default_factory=list)
    terminal_event: str = ""

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon.epsilon for r in self.records])

    @property
    def jacobians(self) -> np.ndarray:
        return np.array([r.jacobian for r in self.records])


@dataclass(frozen=True)
class BirthEvent:
    """A tangency of T^k(source line) with Fix R: birth of symmetric orbits."""

    epsilon: float
    k: int
    line: FixLine
    tangencies: tuple        # of ScanRoot (positions at the tangency parameter)
    roots_above: bool        # True if the crossings exist for eps > epsilon


# ---------------------------------------------------------------------------
# scanning for symmetric orbits
# ---------------------------------------------------------------------------

def _signed_gap(eta_img: np.ndarray, target_eta: float) -> np.ndarray:
    return wrap_pm(eta_img - target_eta)


def _map_line(k: int, line: FixLine, p: Params, xi: np.ndarray,
              s: IntegratorSettings) -> np.ndarray:
    m = MapSpec("T", k, p, s)
    return apply_array(m, line.points(xi))


def _scalar_gap_fn(k: int, line: FixLine, p: Params, target_eta: float,
                   s: IntegratorSettings):
    m = MapSpec("T", k, p, s)

    def g(x: float) -> float:
        img = apply_array(m, np.array([[x, line.eta]]))
        return float(wrap_pm(img[0, 1] - target_eta))

    return g


def symmetric_scan(k: int, line: FixLine, p: Params, grid_n: int = 2048,
                   s: IntegratorSettings = SCAN_SETTINGS, *,
                   xi_lo: float = 0.0, xi_hi: float = TWO_PI,
                   tang_window: float = 0.08,
                   root_xtol: float = 1e-10) -> ScanResult:
    """Locate intersections and near-tangencies of T^k(line) with Fix R.

    Samples the signed eta-distance of the image of (xi, line.eta) from each
    fixed circle on a xi-grid, brackets the sign changes, refines roots to
    ``root_xtol``, and chases near-tangency minima below ``tang_window``
    (resolving sub-grid root pairs).  Returns the whole-line sentinel target
    list when the image coincides with a circle along >90% of the samples.
    """
    if grid_n < 256:
        raise ValueError("grid_n must be >= 256")
    closed = math.isclose(xi_hi - xi_lo, TWO_PI)
    xi = np.linspace(xi_lo, xi_hi, grid_n, endpoint=not closed)
    img = _map_line(k, line, p, xi, s)
    roots = []
    whole = []
    for target, target_eta in LINE_ETA.items():
        g = _signed_gap(img[:, 1], target_eta)
        if np.mean(np.abs(g) < 1e-9) > 0.9:
            whole.append(target)
            continue
        gfn = _scalar_gap_fn(k, line, p, target_eta, s)
        xs = np.concatenate([xi, [xi_lo + TWO_PI]]) if closed else xi
        gs = np.concatenate([g, [g[0]]]) if closed else g
        n = len(xs)
        used = np.zeros(n, dtype=bool)
        for i in range(n - 1):
            a, b = gs[i], gs[i + 1]
            if a == 0.0:
                roots.append(ScanRoot(float(wrap(xs[i])), target, "crossing"))
                used[i] = True
                continue
            if a * b < 0.0 and abs(a) + abs(b) < 1.0:
                x0 = optimize.brentq(gfn, xs[i], xs[i + 1], xtol=root_xtol)
                roots.append(ScanRoot(float(wrap(x0)), target, "crossing"))
                used[i] = used[i + 1] = True
        # near-tangency minima of |g| without a bracketed sign change;
        # on a closed scan the minima search wraps around the seam
        idx_last = n - 2 if closed else n - 1
        for i in range(0 if closed else 1, idx_last + 1):
            im = i - 1 if i > 0 else (idx_last if closed else 0)
            ip = i + 1
            if used[im] or used[i] or used[ip]:
                continue
            if abs(gs[i]) < tang_window and abs(gs[i]) <= abs(gs[im]) \
                    and abs(gs[i]) < abs(gs[ip]):
                sign = 1.0 if gs[i] > 0 else -1.0
                lo_b = xs[i] - (xs[1] - xs[0]) if i == 0 else xs[im]
                res = optimize.minimize_scalar(
                    lambda x: sign * gfn(x), bounds=(lo_b, xs[ip]),
                    method="bounded", options={"xatol": 1e-9},
                )
                x_ext, g_ext = float(res.x), sign * float(res.fun)
                if g_ext * gs[i] < 0.0:
                    # the dip crosses zero between grid points: two roots
                    for lo, hi in ((lo_b, x_ext), (x_ext, xs[ip])):
                        try:
                            x0 = optimize.brentq(gfn, lo, hi, xtol=root_xtol)
                        except ValueError:
                            continue
                        roots.append(ScanRoot(float(wrap(x0)), target, "crossing"))
                else:
                    roots.append(
                        ScanRoot(float(wrap(x_ext)), target, "tangency", gap=g_ext)
                    )
    roots.sort(key=lambda r: (r.target, r.xi))
    return ScanResult(tuple(roots), tuple(whole))


def _count_crossings(k, line, p_eps, grid_n, s, xi_lo, xi_hi, targets):
    res = symmetric_scan(k, line, Params(p_eps), grid_n, s,
                         xi_lo=xi_lo, xi_hi=xi_hi)
    return sum(1 for r in res.crossings() if targets is None or r.target in targets), res


def detect_birth_epsilon(k: int, line: FixLine, eps_lo: float, eps_hi: float, *,
                         targets=None, grid_n: int = 2048,
                         s: IntegratorSettings = SCAN_SETTINGS,
                         tol: float = 1e-4, polish: bool = True,
                         xi_lo: float = 0.0, xi_hi: float = TWO_PI) -> BirthEvent:
    """Bisect the coupling strength on a change of the crossing count.

    ``targets`` restricts which fixed circle the intersections are counted
    on (default: both).  The returned event carries the tangency positions
    and, when ``polish`` is set, a fold-refined parameter value (well below
    the bisection tolerance).
    """
    c_lo, res_lo = _count_crossings(k, line, eps_lo, grid_n, s, xi_lo, xi_hi, targets)
    c_hi, res_hi = _count_crossings(k, line, eps_hi, grid_n, s, xi_lo, xi_hi, targets)
    if c_lo == c_hi:
        raise NoBracketError(
            f"crossing count is {c_lo} at both ends of [{eps_lo}, {eps_hi}]"
        )
    roots_above = c_hi > c_lo
    lo, hi = eps_lo, eps_hi
    res_few, res_many = (res_lo, res_hi) if roots_above else (res_hi, res_lo)
    c_few = min(c_lo, c_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        c_mid, res_mid = _count_crossings(k, line, mid, grid_n, s, xi_lo, xi_hi, targets)
        few_side = c_mid == c_few
        if few_side == roots_above:
            lo = mid
        else:
            hi = mid
        if few_side:
            res_few = res_mid
        else:
            res_many = res_mid
    eps_star = 0.5 * (lo + hi)
    tangs = _birth_locations(res_few, res_many, targets)
    if polish and tangs:
        eps_star, tangs = _polish_tangency(k, line, eps_star, tangs, s, tol)
    return BirthEvent(float(eps_star), k, line, tuple(tangs), roots_above)


def _birth_locations(res_few, res_many, targets, match_tol=0.02,
                     cluster_gap=0.3) -> list:
    """Pair up the crossings that exist on only one side of a birth bracket;
    each pair's midpoint approximates a tangency location."""
    locs = []
    for target in LINE_ETA:
        if targets is not None and target not in targets:
            continue
        old = np.array([r.xi for r in res_few.crossings(target)])
        new = [r.xi for r in res_many.crossings(target)
               if old.size == 0 or np.abs(wrap_pm(old - r.xi)).min() > match_tol]
        if not new:
            continue
        new = np.sort(np.asarray(new))
        # cluster the new crossings: members of one birth pair sit close
        clusters = [[new[0]]]
        for x in new[1:]:
            if x - clusters[-1][-1] < cluster_gap:
                clusters[-1].append(x)
            else:
                clusters.append([x])
        # wrap-around merge
        if len(clusters) > 1 and (new[0] + TWO_PI - new[-1]) < cluster_gap:
            clusters[0] = [x - TWO_PI for x in clusters.pop()] + clusters[0]
        for cl in clusters:
            locs.append(ScanRoot(float(wrap(np.mean(cl))), target, "tangency"))
    return locs


def _polish_tangency(k, line, eps0, tangs, s, tol):
    """Fold refinement: solve g = 0, dg/dxi = 0 in (xi, eps) per tangency.

    Tangencies pinned on the reflection-symmetric lines xi in {0, pi} reduce
    to a one-parameter root solve in eps.
    """
    polished = []
    eps_vals = []
    for r in tangs:
        pinned = None
        for x_pin in (0.0, math.pi):
            if abs(wrap_pm(r.xi - x_pin)) < 1e-3:
                pinned = x_pin
                break
        target_eta = LINE_ETA[r.target]

        def g_of(x, e):
            gfn = _scalar_gap_fn(k, line, Params(e), target_eta, s)
            return gfn(x)

        try:
            if pinned is not None:
                ge = lambda e: g_of(pinned, e)
                de = max(4.0 * tol, 2e-4)
                a, b = eps0 - de, eps0 + de
                fa, fb = ge(a), ge(b)
                if fa * fb < 0:
                    e_star = optimize.brentq(ge, a, b, xtol=1e-9)
                else:
                    # secant fallback from the insufficient bracket
                    e_star = optimize.newton(ge, eps0, tol=1e-9, maxiter=30)
                x_star = pinned
            else:
                x_star, e_star = _fold_newton(g_of, r.xi, eps0)
        except (RuntimeError, ValueError):
            polished.append(r)
            eps_vals.append(eps0)
            continue
        polished.append(ScanRoot(float(wrap(x_star)), r.target, "tangency",
                                 gap=g_of(x_star, e_star)))
        eps_vals.append(float(e_star))
    return float(np.mean(eps_vals)), polished


def _fold_newton(g_of, x0, e0, hx=1e-5, he=1e-6, max_iter=25):
    """Newton on F(x, e) = (g, dg/dx) with finite-difference derivatives."""
    x, e = float(x0), float(e0)
    for _ in range(max_iter):
        g0 = g_of(x, e)
        gp = g_of(x + hx, e)
        gm = g_of(x - hx, e)
        gx = (gp - gm) / (2 * hx)
        gxx = (gp - 2 * g0 + gm) / (hx * hx)
        ge = (g_of(x, e + he) - g_of(x, e - he)) / (2 * he)
        gxe = (g_of(x + hx, e + he) - g_of(x - hx, e + he)
               - g_of(x + hx, e - he) + g_of(x - hx, e - he)) / (4 * hx * he)
        jac = np.array([[gx, ge], [gxx, gxe]])
        rhs = np.array([g0, gx])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("singular fold system") from exc
        x -= step[0]
        e -= step[1]
        if abs(step[0]) < 1e-10 and abs(step[1]) < 1e-10:
            break
    return x, e


# ---------------------------------------------------------------------------
# Newton refinement and classification
# ---------------------------------------------------------------------------

def refine(m: MapSpec, guess: TorusPoint2, *, tol: float = 1e-11,
           max_iter: int = 40, max_step: float = 0.5,
           return_jacobian: bool = False):
    """Newton iteration on F(x) = map(x) - x with torus-aware differences."""
    x = guess.as_array()
    jac = None
    for _ in range(max_iter):
        img, jac = apply_array_with_derivative(m, x)
        f = wrap_pm(img - x)
        if float(np.hypot(f[0], f[1])) < tol:
            pt = TorusPoint2.from_array(x)
            return (pt, jac) if return_jacobian else pt
        a = jac - np.eye(2)
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        scale = np.abs(a).max()
        if abs(det) < 1e-14 * max(1.0, scale * scale):
            raise SingularJacobianError(
                f"singular Newton system at {x} (det {det:.3e})"
            )
        step = -np.linalg.solve(a, f)
        norm = float(np.hypot(step[0], step[1]))
        if norm > max_step:
            step *= max_step / norm
        x = wrap(x + step)
    raise RefineError(f"no convergence after {max_iter} iterations near {x}")


def classify_multipliers(l1: complex, l2: complex, *,
                         delta: float = PARABOLIC_DELTA,
                         ell_tol: float = ELLIPTIC_TOL) -> str:
    """Type from the multiplier pair; raises AmbiguousTypeError in the
    tolerance gaps rather than guessing."""
    lams = sorted((complex(l1), complex(l2)), key=abs, reverse=True)
    m1, m2 = abs(lams[0]), abs(lams[1])
    if lams[0].imag != 0.0 or lams[1].imag != 0.0:
        if abs(m1 - 1.0) < ell_tol:
            return "elliptic"
        if abs(lams[0].imag) < delta and abs(m1 - 1.0) < delta:
            raise AmbiguousTypeError(
                f"multipliers {lams} within the parabolic tolerance gap"
            )
        return "sink" if m1 < 1.0 else "source"
    in_band = [abs(m - 1.0) < delta for m in (m1, m2)]
    if all(in_band):
        return "parabolic"
    if m1 > 1.0 + delta and m2 < 1.0 - delta:
        return "saddle"
    if m2 > 1.0 + delta:
        return "source"
    if m1 < 1.0 - delta:
        return "sink"
    raise AmbiguousTypeError(
        f"multipliers {lams} within the parabolic tolerance gap"
    )


def orbit_of(pt: TorusPoint2, q: int, p: Params,
             s: IntegratorSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """The q points of the T-orbit of pt, starting at pt."""
    m = MapSpec("T", 1, p, s)
    pts = [pt.as_array()]
    for _ in range(q - 1):
        pts.append(apply_array(m, pts[-1]))
    return np.array(pts)


def classify(pt: TorusPoint2, q: int, p: Params,
             s: IntegratorSettings = DEFAULT_SETTINGS, *,
             resid_tol: float = 1e-9, sym_tol: float = 1e-8,
             on_ambiguous: str = "raise") -> OrbitRecord:
    """Build the OrbitRecord of a refined period-q point of T.

    Multiplier pairs inside the taxonomy tolerance gaps raise
    AmbiguousTypeError by default; with on_ambiguous='label' the record is
    returned with type 'ambiguous' instead (used by reporting pipelines).
    """
    m = MapSpec("T", q, p, s)
    img, jac = apply_array_with_derivative(m, pt.as_array())
    resid = float(torus_dist(img, pt.as_array()))
    if resid > resid_tol:
        raise OrbitError(f"not a period-{q} point: residual {resid:.3e}")
    lams = np.linalg.eigvals(jac)
    lams = sorted((complex(lams[0]), complex(lams[1])), key=abs, reverse=True)
    jdet = float(np.linalg.det(jac))
    try:
        otype = classify_multipliers(lams[0], lams[1])
    except AmbiguousTypeError:
        if on_ambiguous != "label":
            raise
        otype = "ambiguous"
    orbit = orbit_of(pt, q, p, s)
    r_img = involution_r(pt).as_array()
    r_symmetric = bool(torus_dist(np.broadcast_to(r_img, orbit.shape), orbit).min()
                       < sym_tol)
    on_lines = np.all(np.minimum(np.abs(wrap_pm(orbit[:, 0])),
                                 np.abs(wrap_pm(orbit[:, 0] - math.pi))) < sym_tol)
    s_closed = all(
        torus_dist(np.broadcast_to(symmetry_s(TorusPoint2.from_array(o)).as_array(),
                                   orbit.shape), orbit).min() < sym_tol
        for o in orbit
    )
    star_img = apply_array(MapSpec("Tstar", 1, p, s), pt.as_array())
    half_flag = bool(torus_dist(np.broadcast_to(star_img, orbit.shape), orbit).min()
                     < sym_tol)
    return OrbitRecord(
        point=pt, q=q, epsilon=p,
        multipliers=(lams[0], lams[1]), jacobian=jdet, type=otype,
        r_symmetric=r_symmetric, s_symmetric=bool(on_lines or s_closed),
        half_period_flag=half_flag,
        orbit_points=tuple(TorusPoint2.from_array(o) for o in orbit),
    )


def find_period_q_points(p: Params, q: int, *, grid_n: int = 48,
                         s: IntegratorSettings = DEFAULT_SETTINGS,
                         window=None, seed_resid: float = 0.35,
                         dedupe_tol: float = 1e-6, max_seeds: int = 400,
                         classify_strict: bool = False) -> list:
    """Global (or windowed) search for period-q points of T.

    Coarse residual screening on a seed grid, Newton refinement, and orbit
    deduplication.  Returns one record per orbit; points whose type is
    ambiguous get type 'ambiguous' unless ``classify_strict``.
    """
    if window is None:
        lo = np.array([0.0, 0.0])
        hi = np.array([TWO_PI, TWO_PI])
    else:
        c, r = window
        lo = np.asarray(c, dtype=float) - r
        hi = np.asarray(c, dtype=float) + r
    g1 = np.linspace(lo[0], hi[0], grid_n, endpoint=False)
    g2 = np.linspace(lo[1], hi[1], grid_n, endpoint=False)
    xx, yy = np.meshgrid(g1, g2, indexing="ij")
    seeds = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    m = MapSpec("T", q, p, s)
    img = apply_array(m, seeds)
    resid = torus_dist(img, wrap(seeds))
    order = np.argsort(resid)
    order = order[resid[order] < seed_resid][:max_seeds]
    points = []
    for idx in order:
        try:
            pt = refine(m, TorusPoint2.from_array(wrap(seeds[idx])))
        except (RefineError, OrbitError):
            continue
        a = pt.as_array()
        if window is not None:
            d = wrap_pm(a - 0.5 * (lo + hi))
            if np.any(np.abs(d) > (hi - lo) * 0.5 + 1e-9):
                continue
        if any(torus_dist(a, q0) < dedupe_tol for q0 in points):
            continue
        points.append(a)
    # group into orbits
    records = []
    claimed = np.zeros(len(points), dtype=bool)
    for i, a in enumerate(points):
        if claimed[i]:
            continue
        orb = orbit_of(TorusPoint2.from_array(a), q, p, s)
        for j in range(i, len(points)):
            if not claimed[j] and torus_dist(
                np.broadcast_to(points[j], orb.shape), orb
            ).min() < 10 * dedupe_tol:
                claimed[j] = True
        records.append(classify(
            TorusPoint2.from_array(a), q, p, s,
            on_ambiguous="raise" if classify_strict else "label",
        ))
    return records


def continue_branch(rec: OrbitRecord, eps_to: float, *, step: float = 1e-3,
                    min_step: float = 1e-6,
                    s: IntegratorSettings = DEFAULT_SETTINGS,
                    max_records: int = 5000, jump_tol: float = 0.2) -> Branch:
    """Predictor-corrector continuation of a periodic orbit in epsilon.

    Terminates at eps_to or where Newton correction keeps failing after step
    halving below ``min_step`` (a fold or collision); the terminal event is
    annotated on the branch, never raised.
    """
    branch = Branch(records=[rec])
    direction = 1.0 if eps_to >= rec.epsilon.epsilon else -1.0
    cur = abs(step)
    while True:
        last = branch.records[-1]
        eps_now = last.epsilon.epsilon
        if math.isclose(eps_now, eps_to, abs_tol=1e-12) or \
                (eps_to - eps_now) * direction <= 0:
            branch.terminal_event = "reached_end"
            return branch
        eps_next = eps_now + direction * cur
        if (eps_next - eps_to) * direction > 0:
            eps_next = eps_to
        # secant predictor when two records are available
        if len(branch.records) >= 2:
            prev = branch.records[-2]
            d_eps = eps_now - prev.epsilon.epsilon
            if abs(d_eps) > 1e-15:
                slope = wrap_pm(last.point.as_array() - prev.point.as_array()) / d_eps
            else:
                slope = np.zeros(2)
            guess = wrap(last.point.as_array() + slope * (eps_next - eps_now))
        else:
            guess = last.point.as_array()
        p_next = Params(eps_next)
        m = MapSpec("T", rec.q, p_next, s)
        ok = False
        try:
            pt = refine(m, TorusPoint2.from_array(guess))
            if torus_dist(pt.as_array(), last.point.as_array()) < max(
                jump_tol, 10 * cur
            ):
                ok = True
        except (RefineError, OrbitError):
            ok = False
        if ok:
            branch.records.append(
                classify(pt, rec.q, p_next, s, on_ambiguous="label")
            )
            if len(branch.records) >= max_records:
                branch.terminal_event = "max_records"
                return branch
            if cur < abs(step):
                cur = min(abs(step), 2 * cur)
        else:
            cur *= 0.5
            if cur < min_step:
                branch.terminal_event = "fold_or_collision"
                return branch
