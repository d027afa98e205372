"""Pure-numpy integrator kernels (fallback backend).

Same fixed-step Runge-Kutta algorithms as the compiled extension in
``_kernels.pyx``, vectorized over a batch of initial conditions.  The stage
times repeat for every point, so their cos/sin are precomputed once per call;
``cos(t - eta)`` and ``sin(t - eta)`` are then recovered from angle-difference
identities, leaving two sincos evaluations (state angles) per stage.

Modes for the diagnostic kernels:
  mode 0: state only
  mode 1: state + divergence quadrature z' = div(xi, eta, t)
  mode 2: state + 2x2 variational matrix + divergence quadrature
"""

from __future__ import annotations

import numpy as np

from ._tableau import tableau

COMPILED = False


def _stage_times_trig(t0: float, h: float, steps: int, C: np.ndarray):
    n = np.arange(steps)[:, None]
    t = t0 + (n + C[None, :]) * h
    return np.cos(t), np.sin(t)


def _rhs(xi, eta, eps, ct, st, mode, v=None):
    """Field (and optionally Jacobian entries / divergence) at one stage.

    ct, st are cos/sin of the stage time; v is (v11, v12, v21, v22) arrays.
    Returns (f1, f2[, dz[, dv...]]).
    """
    sx = np.sin(xi)
    cx = np.cos(xi)
    sy = np.sin(eta)
    cy = np.cos(eta)
    cty = ct * cy + st * sy      # cos(t - eta)
    sty = st * cy - ct * sy      # sin(t - eta)
    d = 2.0 + eps * cty
    inv = 1.0 / d
    n1 = 2.0 * eps * sx * sy
    n2 = 1.0 - eps * cty - 2.0 * eps * cx * cy
    f1 = n1 * inv
    f2 = n2 * inv
    if mode == 0:
        return f1, f2
    inv2 = inv * inv
    est = eps * sty
    j11 = 2.0 * eps * cx * sy * inv
    j12 = 2.0 * eps * sx * cy * inv - n1 * est * inv2
    j21 = 2.0 * eps * sx * cy * inv
    j22 = (-est + 2.0 * eps * cx * sy) * inv - n2 * est * inv2
    dz = j11 + j22
    if mode == 1:
        return f1, f2, dz
    v11, v12, v21, v22 = v
    dv11 = j11 * v11 + j12 * v21
    dv12 = j11 * v12 + j12 * v22
    dv21 = j21 * v11 + j22 * v21
    dv22 = j21 * v12 + j22 * v22
    return f1, f2, dz, dv11, dv12, dv21, dv22


def advance_batch(xi, eta, t0, t1, eps, steps, order="dp5"):
    """Integrate the reduced field from t0 to t1 for a batch of points."""
    A, B, C, _ = tableau(order)
    ns = len(B)
    xi = np.array(xi, dtype=float, copy=True)
    eta = np.array(eta, dtype=float, copy=True)
    if steps <= 0 or t1 == t0:
        return xi, eta
    h = (t1 - t0) / steps
    ct_all, st_all = _stage_times_trig(t0, h, steps, C)
    kx = [None] * ns
    ky = [None] * ns
    for n in range(steps):
        for i in range(ns):
            x = xi
            y = eta
            if i:
                ax = A[i]
                x = xi + h * sum(ax[j] * kx[j] for j in range(i) if ax[j] != 0.0)
                y = eta + h * sum(ax[j] * ky[j] for j in range(i) if ax[j] != 0.0)
            kx[i], ky[i] = _rhs(x, y, eps, ct_all[n, i], st_all[n, i], 0)
        xi = xi + h * sum(B[i] * kx[i] for i in range(ns) if B[i] != 0.0)
        eta = eta + h * sum(B[i] * ky[i] for i in range(ns) if B[i] != 0.0)
    return xi, eta


def advance_div_batch(xi, eta, t0, t1, eps, steps, order="dp5"):
    """As advance_batch, also integrating the divergence quadrature z."""
    A, B, C = tableau(order)[:3]
    ns = len(B)
    xi = np.array(xi, dtype=float, copy=True)
    eta = np.array(eta, dtype=float, copy=True)
    z = np.zeros(xi.shape)
    if steps <= 0 or t1 == t0:
        return xi, eta, z
    h = (t1 - t0) / steps
    ct_all, st_all = _stage_times_trig(t0, h, steps, C)
    k = [None] * ns
    for n in range(steps):
        for i in range(ns):
            if i:
                ax = A[i]
                acc = [0.0] * 3
                for j in range(i):
                    if ax[j] != 0.0:
                        for c in range(3):
                            acc[c] = acc[c] + ax[j] * k[j][c]
                st3 = (xi + h * acc[0], eta + h * acc[1], z + h * acc[2])
            else:
                st3 = (xi, eta, z)
            k[i] = _rhs(st3[0], st3[1], eps, ct_all[n, i], st_all[n, i], 1)
        acc = [0.0] * 3
        for i in range(ns):
            if B[i] != 0.0:
                for c in range(3):
                    acc[c] = acc[c] + B[i] * k[i][c]
        xi = xi + h * acc[0]
        eta = eta + h * acc[1]
        z = z + h * acc[2]
    return xi, eta, z


def advance_var_batch(xi, eta, t0, t1, eps, steps, order="dp5"):
    """As advance_batch, also integrating the variational matrix and the
    divergence quadrature.  Returns (xi, eta, v11, v12, v21, v22, z)."""
    A, B, C, _ = tableau(order)
    ns = len(B)
    xi = np.array(xi, dtype=float, copy=True)
    eta = np.array(eta, dtype=float, copy=True)
    shape = xi.shape
    v11 = np.ones(shape)
    v12 = np.zeros(shape)
    v21 = np.zeros(shape)
    v22 = np.ones(shape)
    z = np.zeros(shape)
    if steps <= 0 or t1 == t0:
        return xi, eta, v11, v12, v21, v22, z
    h = (t1 - t0) / steps
    ct_all, st_all = _stage_times_trig(t0, h, steps, C)
    k = [None] * ns
    for n in range(steps):
        for i in range(ns):
            if i:
                ax = A[i]
                acc = [0.0] * 7
                for j in range(i):
                    if ax[j] != 0.0:
                        for c in range(7):
                            acc[c] = acc[c] + ax[j] * k[j][c]
                st8 = (
                    xi + h * acc[0],
                    eta + h * acc[1],
                    z + h * acc[2],
                    v11 + h * acc[3],
                    v12 + h * acc[4],
                    v21 + h * acc[5],
                    v22 + h * acc[6],
                )
            else:
                st8 = (xi, eta, z, v11, v12, v21, v22)
            f1, f2, dz, dv11, dv12, dv21, dv22 = _rhs(
                st8[0], st8[1], eps, ct_all[n, i], st_all[n, i], 2,
                (st8[3], st8[4], st8[5], st8[6]),
            )
            k[i] = (f1, f2, dz, dv11, dv12, dv21, dv22)
        upd = [0.0] * 7
        for i in range(ns):
            if B[i] != 0.0:
                for c in range(7):
                    upd[c] = upd[c] + B[i] * k[i][c]
        xi = xi + h * upd[0]
        eta = eta + h * upd[1]
        z = z + h * upd[2]
        v11 = v11 + h * upd[3]
        v12 = v12 + h * upd[4]
        v21 = v21 + h * upd[5]
        v22 = v22 + h * upd[6]
    return xi, eta, v11, v12, v21, v22, z


def iterate_map_batch(
    xi,
    eta,
    eps,
    n_iter,
    keep_from,
    steps,
    order="dp5",
    forward=True,
    mode=0,
):
    """Apply the period map (forward or backward) n_iter times.

    Iterates with index >= keep_from (0-based, counted after application) are
    recorded.  Returns (kept, div_sum, logdet_sum) where kept has shape
    (n_kept, n_points, 2); div_sum / logdet_sum are per-point accumulations
    over the kept iterates (None unless requested by mode).
    """
    two_pi = 2.0 * np.pi
    t1 = two_pi if forward else -two_pi
    xi = np.array(xi, dtype=float, copy=True)
    eta = np.array(eta, dtype=float, copy=True)
    n_pts = xi.shape[0]
    n_keep = max(0, n_iter - keep_from)
    kept = np.empty((n_keep, n_pts, 2))
    div_sum = np.zeros(n_pts) if mode >= 1 else None
    logdet_sum = np.zeros(n_pts) if mode >= 2 else None
    k = 0
    for it in range(n_iter):
        if mode == 0:
            xi, eta = advance_batch(xi, eta, 0.0, t1, eps, steps, order)
        elif mode == 1:
            xi, eta, z = advance_div_batch(xi, eta, 0.0, t1, eps, steps, order)
        else:
            xi, eta, v11, v12, v21, v22, z = advance_var_batch(
                xi, eta, 0.0, t1, eps, steps, order
            )
        xi = np.mod(xi, two_pi)
        eta = np.mod(eta, two_pi)
        if it >= keep_from:
            kept[k, :, 0] = xi
            kept[k, :, 1] = eta
            if mode >= 1:
                div_sum += z
            if mode >= 2:
                logdet_sum += np.log(np.abs(v11 * v22 - v12 * v21))
            k += 1
    return kept, div_sum, logdet_sum
