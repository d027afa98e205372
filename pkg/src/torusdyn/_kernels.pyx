# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integrator kernels (hot inner loops).

Mirrors the algorithms of ``_kernels_py`` exactly: same tableaus, same stage
ordering, same precomputed stage-time trig, so the two backends agree to
floating-point roundoff.

Points are processed in blocks with the point index innermost, which lets the
trig calls pipeline across independent points instead of serializing along
the Runge-Kutta stage chain (about 3x faster than point-at-a-time marching).
Per point, the arithmetic sequence is identical to the point-at-a-time
version, so results do not depend on the block layout.  Loops run without
the GIL so callers may split batches across threads.

Component modes for the map-iteration kernel:
  mode 0: state (xi, eta)
  mode 1: state + divergence quadrature z
  mode 2: state + z + 2x2 variational matrix
"""

import numpy as np

from ._tableau import tableau as _tableau_py

COMPILED = True

DEF BLOCK = 256
DEF MAXSTAGE = 8

cdef extern from "math.h" nogil:
    double sin(double x)
    double cos(double x)
    double log(double x)
    double fabs(double x)
    double floor(double x)


cdef inline double _wrap2pi(double a, double two_pi) nogil:
    return a - two_pi * floor(a / two_pi)


# ---------------------------------------------------------------------------
# block steppers: advance npts (<= BLOCK) points through `steps` fixed steps
# ---------------------------------------------------------------------------

cdef void _block_advance(double *x, double *y, int npts, double eps, double h,
                         int steps, int ns, const double[:, ::1] A,
                         const double[::1] B, const double[::1] ct,
                         const double[::1] st) nogil:
    cdef double kx[MAXSTAGE][BLOCK]
    cdef double ky[MAXSTAGE][BLOCK]
    cdef double xs[BLOCK]
    cdef double ys[BLOCK]
    cdef double sx[BLOCK]
    cdef double cx[BLOCK]
    cdef double sy[BLOCK]
    cdef double cy[BLOCK]
    cdef double accx[BLOCK]
    cdef double accy[BLOCK]
    cdef int n, i, j, p
    cdef double a, ctt, stt, cty, inv
    for n in range(steps):
        for i in range(ns):
            for p in range(npts):
                accx[p] = 0.0
                accy[p] = 0.0
            for j in range(i):
                a = A[i, j]
                if a != 0.0:
                    for p in range(npts):
                        accx[p] += a * kx[j][p]
                        accy[p] += a * ky[j][p]
            for p in range(npts):
                xs[p] = x[p] + h * accx[p]
                ys[p] = y[p] + h * accy[p]
            for p in range(npts):
                sx[p] = sin(xs[p])
                cx[p] = cos(xs[p])
                sy[p] = sin(ys[p])
                cy[p] = cos(ys[p])
            ctt = ct[n * ns + i]
            stt = st[n * ns + i]
            for p in range(npts):
                cty = ctt * cy[p] + stt * sy[p]
                inv = 1.0 / (2.0 + eps * cty)
                kx[i][p] = 2.0 * eps * sx[p] * sy[p] * inv
                ky[i][p] = (1.0 - eps * cty - 2.0 * eps * cx[p] * cy[p]) * inv
        for p in range(npts):
            accx[p] = 0.0
            accy[p] = 0.0
        for i in range(ns):
            a = B[i]
            if a != 0.0:
                for p in range(npts):
                    accx[p] += a * kx[i][p]
                    accy[p] += a * ky[i][p]
        for p in range(npts):
            x[p] += h * accx[p]
            y[p] += h * accy[p]


cdef void _block_advance_div(double *x, double *y, double *z, int npts, double eps,
                             double h, int steps, int ns, const double[:, ::1] A,
                             const double[::1] B, const double[::1] ct,
                             const double[::1] st) nogil:
    cdef double kx[MAXSTAGE][BLOCK]
    cdef double ky[MAXSTAGE][BLOCK]
    cdef double kz[MAXSTAGE][BLOCK]
    cdef double xs[BLOCK]
    cdef double ys[BLOCK]
    cdef double sx[BLOCK]
    cdef double cx[BLOCK]
    cdef double sy[BLOCK]
    cdef double cy[BLOCK]
    cdef double accx[BLOCK]
    cdef double accy[BLOCK]
    cdef double accz[BLOCK]
    cdef int n, i, j, p
    cdef double a, ctt, stt, cty, sty, inv, inv2, n1, n2, est, j11, j22
    for n in range(steps):
        for i in range(ns):
            for p in range(npts):
                accx[p] = 0.0
                accy[p] = 0.0
                accz[p] = 0.0
            for j in range(i):
                a = A[i, j]
                if a != 0.0:
                    for p in range(npts):
                        accx[p] += a * kx[j][p]
                        accy[p] += a * ky[j][p]
                        accz[p] += a * kz[j][p]
            for p in range(npts):
                xs[p] = x[p] + h * accx[p]
                ys[p] = y[p] + h * accy[p]
            for p in range(npts):
                sx[p] = sin(xs[p])
                cx[p] = cos(xs[p])
                sy[p] = sin(ys[p])
                cy[p] = cos(ys[p])
            ctt = ct[n * ns + i]
            stt = st[n * ns + i]
            for p in range(npts):
                cty = ctt * cy[p] + stt * sy[p]
                sty = stt * cy[p] - ctt * sy[p]
                inv = 1.0 / (2.0 + eps * cty)
                inv2 = inv * inv
                n1 = 2.0 * eps * sx[p] * sy[p]
                n2 = 1.0 - eps * cty - 2.0 * eps * cx[p] * cy[p]
                est = eps * sty
                kx[i][p] = n1 * inv
                ky[i][p] = n2 * inv
                j11 = 2.0 * eps * cx[p] * sy[p] * inv
                j22 = (-est + 2.0 * eps * cx[p] * sy[p]) * inv - n2 * est * inv2
                kz[i][p] = j11 + j22
        for p in range(npts):
            accx[p] = 0.0
            accy[p] = 0.0
            accz[p] = 0.0
        for i in range(ns):
            a = B[i]
            if a != 0.0:
                for p in range(npts):
                    accx[p] += a * kx[i][p]
                    accy[p] += a * ky[i][p]
                    accz[p] += a * kz[i][p]
        for p in range(npts):
            x[p] += h * accx[p]
            y[p] += h * accy[p]
            z[p] += h * accz[p]


cdef void _block_advance_var(double *x, double *y, double *z, double *v11, double *v12,
                             double *v21, double *v22, int npts, double eps, double h,
                             int steps, int ns, const double[:, ::1] A,
                             const double[::1] B, const double[::1] ct,
                             const double[::1] st) nogil:
    # components ordered x y z v11 v12 v21 v22
    cdef double k[MAXSTAGE][7][BLOCK]
    cdef double stg[7][BLOCK]
    cdef double acc[7][BLOCK]
    cdef double sx[BLOCK]
    cdef double cx[BLOCK]
    cdef double sy[BLOCK]
    cdef double cy[BLOCK]
    cdef int n, i, j, p, c
    cdef double a, ctt, stt, cty, sty, d, inv, inv2, n1, n2, est
    cdef double j11, j12, j21, j22
    for n in range(steps):
        for i in range(ns):
            for c in range(7):
                for p in range(npts):
                    acc[c][p] = 0.0
            for j in range(i):
                a = A[i, j]
                if a != 0.0:
                    for c in range(7):
                        for p in range(npts):
                            acc[c][p] += a * k[j][c][p]
            for p in range(npts):
                stg[0][p] = x[p] + h * acc[0][p]
                stg[1][p] = y[p] + h * acc[1][p]
                stg[3][p] = v11[p] + h * acc[3][p]
                stg[4][p] = v12[p] + h * acc[4][p]
                stg[5][p] = v21[p] + h * acc[5][p]
                stg[6][p] = v22[p] + h * acc[6][p]
            for p in range(npts):
                sx[p] = sin(stg[0][p])
                cx[p] = cos(stg[0][p])
                sy[p] = sin(stg[1][p])
                cy[p] = cos(stg[1][p])
            ctt = ct[n * ns + i]
            stt = st[n * ns + i]
            for p in range(npts):
                cty = ctt * cy[p] + stt * sy[p]
                sty = stt * cy[p] - ctt * sy[p]
                d = 2.0 + eps * cty
                inv = 1.0 / d
                inv2 = inv * inv
                n1 = 2.0 * eps * sx[p] * sy[p]
                n2 = 1.0 - eps * cty - 2.0 * eps * cx[p] * cy[p]
                est = eps * sty
                k[i][0][p] = n1 * inv
                k[i][1][p] = n2 * inv
                j11 = 2.0 * eps * cx[p] * sy[p] * inv
                j12 = 2.0 * eps * sx[p] * cy[p] * inv - n1 * est * inv2
                j21 = 2.0 * eps * sx[p] * cy[p] * inv
                j22 = (-est + 2.0 * eps * cx[p] * sy[p]) * inv - n2 * est * inv2
                k[i][2][p] = j11 + j22
                k[i][3][p] = j11 * stg[3][p] + j12 * stg[5][p]
                k[i][4][p] = j11 * stg[4][p] + j12 * stg[6][p]
                k[i][5][p] = j21 * stg[3][p] + j22 * stg[5][p]
                k[i][6][p] = j21 * stg[4][p] + j22 * stg[6][p]
        for c in range(7):
            for p in range(npts):
                acc[c][p] = 0.0
        for i in range(ns):
            a = B[i]
            if a != 0.0:
                for c in range(7):
                    for p in range(npts):
                        acc[c][p] += a * k[i][c][p]
        for p in range(npts):
            x[p] += h * acc[0][p]
            y[p] += h * acc[1][p]
            z[p] += h * acc[2][p]
            v11[p] += h * acc[3][p]
            v12[p] += h * acc[4][p]
            v21[p] += h * acc[5][p]
            v22[p] += h * acc[6][p]


# ---------------------------------------------------------------------------
# python-facing batch entry points
# ---------------------------------------------------------------------------

def _pick(order):
    A, B, C, _ = _tableau_py(order)
    return (
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(B, dtype=np.float64),
        np.ascontiguousarray(C, dtype=np.float64),
    )


def _stage_trig(double t0, double h, int steps, C):
    n = np.arange(steps)[:, None]
    t = t0 + (n + np.asarray(C)[None, :]) * h
    return (
        np.ascontiguousarray(np.cos(t).ravel()),
        np.ascontiguousarray(np.sin(t).ravel()),
    )


def advance_batch(xi, eta, double t0, double t1, double eps, int steps, order="dp5"):
    A, B, C = _pick(order)
    x = np.array(xi, dtype=np.float64, copy=True).ravel()
    y = np.array(eta, dtype=np.float64, copy=True).ravel()
    if steps <= 0 or t1 == t0:
        return x, y
    cdef double h = (t1 - t0) / steps
    ct, st = _stage_trig(t0, h, steps, C)
    cdef double[::1] xv = x
    cdef double[::1] yv = y
    cdef const double[:, ::1] Av = A
    cdef const double[::1] Bv = B
    cdef const double[::1] ctv = ct
    cdef const double[::1] stv = st
    cdef int ns = B.shape[0]
    cdef Py_ssize_t p0, npts = x.shape[0]
    cdef int nb, nst = steps
    cdef double e = eps
    with nogil:
        p0 = 0
        while p0 < npts:
            nb = BLOCK if npts - p0 > BLOCK else <int> (npts - p0)
            _block_advance(&xv[p0], &yv[p0], nb, e, h, nst, ns, Av, Bv, ctv, stv)
            p0 += nb
    return x, y


def advance_var_batch(xi, eta, double t0, double t1, double eps, int steps, order="dp5"):
    A, B, C = _pick(order)
    x = np.array(xi, dtype=np.float64, copy=True).ravel()
    y = np.array(eta, dtype=np.float64, copy=True).ravel()
    cdef Py_ssize_t npts = x.shape[0]
    z = np.zeros(npts)
    v11 = np.ones(npts)
    v12 = np.zeros(npts)
    v21 = np.zeros(npts)
    v22 = np.ones(npts)
    if steps <= 0 or t1 == t0:
        return x, y, v11, v12, v21, v22, z
    cdef double h = (t1 - t0) / steps
    ct, st = _stage_trig(t0, h, steps, C)
    cdef double[::1] xv = x
    cdef double[::1] yv = y
    cdef double[::1] zv = z
    cdef double[::1] av11 = v11
    cdef double[::1] av12 = v12
    cdef double[::1] av21 = v21
    cdef double[::1] av22 = v22
    cdef const double[:, ::1] Av = A
    cdef const double[::1] Bv = B
    cdef const double[::1] ctv = ct
    cdef const double[::1] stv = st
    cdef int ns = B.shape[0]
    cdef Py_ssize_t p0
    cdef int nb, nst = steps
    cdef double e = eps
    with nogil:
        p0 = 0
        while p0 < npts:
            nb = BLOCK if npts - p0 > BLOCK else <int> (npts - p0)
            _block_advance_var(&xv[p0], &yv[p0], &zv[p0], &av11[p0], &av12[p0],
                               &av21[p0], &av22[p0], nb, e, h, nst, ns,
                               Av, Bv, ctv, stv)
            p0 += nb
    return x, y, v11, v12, v21, v22, z


def advance_div_batch(xi, eta, double t0, double t1, double eps, int steps, order="dp5"):
    A, B, C = _pick(order)
    x = np.array(xi, dtype=np.float64, copy=True).ravel()
    y = np.array(eta, dtype=np.float64, copy=True).ravel()
    cdef Py_ssize_t npts = x.shape[0]
    z = np.zeros(npts)
    if steps <= 0 or t1 == t0:
        return x, y, z
    cdef double h = (t1 - t0) / steps
    ct, st = _stage_trig(t0, h, steps, C)
    cdef double[::1] xv = x
    cdef double[::1] yv = y
    cdef double[::1] zv = z
    cdef const double[:, ::1] Av = A
    cdef const double[::1] Bv = B
    cdef const double[::1] ctv = ct
    cdef const double[::1] stv = st
    cdef int ns = B.shape[0]
    cdef Py_ssize_t p0
    cdef int nb, nst = steps
    cdef double e = eps
    with nogil:
        p0 = 0
        while p0 < npts:
            nb = BLOCK if npts - p0 > BLOCK else <int> (npts - p0)
            _block_advance_div(&xv[p0], &yv[p0], &zv[p0], nb, e, h, nst, ns,
                               Av, Bv, ctv, stv)
            p0 += nb
    return x, y, z


def iterate_map_batch(xi, eta, double eps, int n_iter, int keep_from, int steps,
                      order="dp5", forward=True, int mode=0):
    cdef double two_pi = 2.0 * np.pi
    cdef double t1 = two_pi if forward else -two_pi
    A, B, C = _pick(order)
    cdef double h = t1 / steps
    ct, st = _stage_trig(0.0, h, steps, C)
    cdef const double[:, ::1] Av = A
    cdef const double[::1] Bv = B
    cdef const double[::1] ctv = ct
    cdef const double[::1] stv = st
    cdef int ns = B.shape[0]

    x = np.array(xi, dtype=np.float64, copy=True).ravel()
    y = np.array(eta, dtype=np.float64, copy=True).ravel()
    cdef Py_ssize_t npts = x.shape[0]
    cdef int n_keep = n_iter - keep_from
    if n_keep < 0:
        n_keep = 0
    kept = np.empty((n_keep, npts, 2))
    div_sum = np.zeros(npts) if mode >= 1 else None
    logdet_sum = np.zeros(npts) if mode >= 2 else None

    cdef double[::1] xv = x
    cdef double[::1] yv = y
    cdef double[:, :, ::1] keptv = kept
    cdef double[::1] divv = div_sum if mode >= 1 else None
    cdef double[::1] ldv = logdet_sum if mode >= 2 else None
    cdef double zb[BLOCK]
    cdef double v11b[BLOCK]
    cdef double v12b[BLOCK]
    cdef double v21b[BLOCK]
    cdef double v22b[BLOCK]
    cdef Py_ssize_t p0
    cdef int it, k, p, nb, md = mode, kf = keep_from, nit = n_iter, nst = steps
    cdef double det, e = eps
    with nogil:
        p0 = 0
        while p0 < npts:
            nb = BLOCK if npts - p0 > BLOCK else <int> (npts - p0)
            k = 0
            for it in range(nit):
                if md == 0:
                    _block_advance(&xv[p0], &yv[p0], nb, e, h, nst, ns, Av, Bv, ctv, stv)
                elif md == 1:
                    for p in range(nb):
                        zb[p] = 0.0
                    _block_advance_div(&xv[p0], &yv[p0], &zb[0], nb, e, h, nst, ns,
                                       Av, Bv, ctv, stv)
                else:
                    for p in range(nb):
                        zb[p] = 0.0
                        v11b[p] = 1.0
                        v12b[p] = 0.0
                        v21b[p] = 0.0
                        v22b[p] = 1.0
                    _block_advance_var(&xv[p0], &yv[p0], &zb[0], &v11b[0], &v12b[0],
                                       &v21b[0], &v22b[0], nb, e, h, nst, ns,
                                       Av, Bv, ctv, stv)
                for p in range(nb):
                    xv[p0 + p] = _wrap2pi(xv[p0 + p], two_pi)
                    yv[p0 + p] = _wrap2pi(yv[p0 + p], two_pi)
                if it >= kf:
                    for p in range(nb):
                        keptv[k, p0 + p, 0] = xv[p0 + p]
                        keptv[k, p0 + p, 1] = yv[p0 + p]
                    if md >= 1:
                        for p in range(nb):
                            divv[p0 + p] += zb[p]
                    if md >= 2:
                        for p in range(nb):
                            det = v11b[p] * v22b[p] - v12b[p] * v21b[p]
                            ldv[p0 + p] += log(fabs(det))
                    k += 1
            p0 += nb
    return kept, div_sum, logdet_sum
