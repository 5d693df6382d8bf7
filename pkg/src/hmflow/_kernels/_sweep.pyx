# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Gauss-Seidel sweep kernels for the space-time lattice.

One call performs a full serial sweep over all levels k = 1..K, updating
each node in place to the weighted Frechet mean of its backward/forward
temporal neighbors and its 2*dim spatial neighbors.  Kind dispatch is by
integer tag; the weighted mean per kind mirrors the pure-numpy fallback:
closed forms for flat and tree targets, damped tangent fixed points for
the curved ones.  The spatial weight at the terminal level is a separate
parameter: the truncated exponentially-weighted objective carries no
Dirichlet term there, while the implicit-Euler inner problem does.
"""

from libc.math cimport fmod, sqrt, fabs, cos, sin, acos, cosh, sinh, acosh

import numpy as np

DEF PDMAX = 16
DEF NBMAX = 6
DEF PI = 3.141592653589793238462643383279502884
DEF TWOPI = 6.283185307179586476925286766559005768
DEF MEAN_TOL = 1e-10
DEF MEAN_DAMP = 0.5
DEF MEAN_MAXIT = 200

KIND_EUCLIDEAN = 0
KIND_CIRCLE = 1
KIND_SPHERE = 2
KIND_HYPERBOLIC = 3
KIND_SPIDER = 4
MAX_POINT_DIM = PDMAX


cdef inline double _wrap(double a) noexcept nogil:
    cdef double w = fmod(a + PI, TWOPI)
    if w < 0:
        w += TWOPI
    return w - PI


cdef inline void _mean_euclidean(double* pts, double* wts, int m, int pd,
                                 double* out) noexcept nogil:
    cdef int i, d
    cdef double total = 0.0
    for d in range(pd):
        out[d] = 0.0
    for i in range(m):
        total += wts[i]
        for d in range(pd):
            out[d] += wts[i] * pts[i * pd + d]
    for d in range(pd):
        out[d] /= total


cdef inline void _mean_circle(double* pts, double* wts, int m,
                              double cur, double* out) noexcept nogil:
    cdef int i, it
    cdef double total = 0.0, s, mid = cur
    for i in range(m):
        total += wts[i]
    for it in range(MEAN_MAXIT):
        s = 0.0
        for i in range(m):
            s += wts[i] * _wrap(pts[i] - mid)
        s /= total
        mid += MEAN_DAMP * s
        if fabs(s) <= MEAN_TOL:
            break
    mid = fmod(mid, TWOPI)
    if mid < 0:
        mid += TWOPI
    out[0] = mid


cdef inline void _sphere_normalize(double* p) noexcept nogil:
    cdef double n = sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    p[0] /= n
    p[1] /= n
    p[2] /= n


cdef inline void _mean_sphere(double* pts, double* wts, int m,
                              double* cur, double* out) noexcept nogil:
    cdef int i, it, d
    cdef double total = 0.0
    cdef double mpt[3]
    cdef double step[3]
    cdef double u[3]
    cdef double c, nu, theta, coef, ns, s
    for i in range(m):
        total += wts[i]
    for d in range(3):
        mpt[d] = cur[d]
    for it in range(MEAN_MAXIT):
        step[0] = step[1] = step[2] = 0.0
        for i in range(m):
            c = mpt[0] * pts[3 * i] + mpt[1] * pts[3 * i + 1] + mpt[2] * pts[3 * i + 2]
            if c > 1.0:
                c = 1.0
            elif c < -1.0:
                c = -1.0
            nu = 0.0
            for d in range(3):
                u[d] = pts[3 * i + d] - c * mpt[d]
                nu += u[d] * u[d]
            nu = sqrt(nu)
            theta = acos(c)
            coef = 1.0 if nu <= 1e-300 else theta / nu
            for d in range(3):
                step[d] += wts[i] * coef * u[d]
        ns = 0.0
        for d in range(3):
            step[d] /= total
            ns += step[d] * step[d]
        ns = sqrt(ns)
        s = MEAN_DAMP * ns
        if s > 1e-300:
            c = cos(s)
            for d in range(3):
                mpt[d] = c * mpt[d] + sin(s) * (step[d] / ns)
            _sphere_normalize(mpt)
        if ns <= MEAN_TOL:
            break
    for d in range(3):
        out[d] = mpt[d]


cdef inline double _mdot(double* a, double* b) noexcept nogil:
    return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline void _hyp_normalize(double* p) noexcept nogil:
    cdef double n2 = -_mdot(p, p)
    cdef double s
    if n2 < 1e-300:
        n2 = 1e-300
    s = sqrt(n2)
    p[0] /= s
    p[1] /= s
    p[2] /= s
    if p[0] < 0:
        p[0] = -p[0]
        p[1] = -p[1]
        p[2] = -p[2]


cdef inline void _mean_hyperbolic(double* pts, double* wts, int m,
                                  double* cur, double* out) noexcept nogil:
    cdef int i, it, d
    cdef double total = 0.0
    cdef double mpt[3]
    cdef double step[3]
    cdef double c, su, theta, coef, ns, s
    for i in range(m):
        total += wts[i]
    for d in range(3):
        mpt[d] = cur[d]
    for it in range(MEAN_MAXIT):
        step[0] = step[1] = step[2] = 0.0
        for i in range(m):
            c = -(-mpt[0] * pts[3 * i] + mpt[1] * pts[3 * i + 1]
                  + mpt[2] * pts[3 * i + 2])
            if c < 1.0:
                c = 1.0
            su = sqrt(c * c - 1.0) if c > 1.0 else 0.0
            theta = acosh(c)
            coef = 1.0 if su <= 1e-300 else theta / su
            for d in range(3):
                step[d] += wts[i] * coef * (pts[3 * i + d] - c * mpt[d])
        for d in range(3):
            step[d] /= total
        ns = _mdot(step, step)
        if ns < 0.0:
            ns = 0.0
        ns = sqrt(ns)
        s = MEAN_DAMP * ns
        if s > 1e-300:
            c = cosh(s)
            for d in range(3):
                mpt[d] = c * mpt[d] + sinh(s) * (step[d] / ns)
            _hyp_normalize(mpt)
        if ns <= MEAN_TOL:
            break
    for d in range(3):
        out[d] = mpt[d]


cdef inline void _mean_spider(double* pts, double* wts, int m, int rays,
                              double* out) noexcept nogil:
    cdef int i, r
    cdef double total = 0.0
    cdef double best_val = 0.0, best_x = 0.0, x, val, srd
    cdef int best_ray = 0
    cdef bint first = True
    for i in range(m):
        total += wts[i]
    for r in range(rays):
        x = 0.0
        for i in range(m):
            srd = pts[2 * i + 1] if pts[2 * i] == <double> r else -pts[2 * i + 1]
            x += wts[i] * srd
        x /= total
        if x < 0.0:
            x = 0.0
        val = 0.0
        for i in range(m):
            srd = pts[2 * i + 1] if pts[2 * i] == <double> r else -pts[2 * i + 1]
            val += wts[i] * (x - srd) * (x - srd)
        if first or val < best_val:
            first = False
            best_val = val
            best_ray = r
            best_x = x
    if best_x <= 0.0:
        out[0] = 0.0
        out[1] = 0.0
    else:
        out[0] = <double> best_ray
        out[1] = best_x


cdef inline void _node_mean(int kind, int rays, double* pts, double* wts,
                            int m, int pd, double* cur, double* out) noexcept nogil:
    if kind == 0:
        _mean_euclidean(pts, wts, m, pd, out)
    elif kind == 1:
        _mean_circle(pts, wts, m, cur[0], out)
    elif kind == 2:
        _mean_sphere(pts, wts, m, cur, out)
    elif kind == 3:
        _mean_hyperbolic(pts, wts, m, cur, out)
    else:
        _mean_spider(pts, wts, m, rays, out)


def sweep_spacetime(double[:, :, ::1] vals, int kind, int rays, int dim,
                    int n1, int n2, double wb, double wf, double ws,
                    double ws_last):
    """One serial Gauss-Seidel sweep in place over levels 1..K."""
    cdef int n_levels = vals.shape[0]
    cdef int n = vals.shape[1]
    cdef int pd = vals.shape[2]
    cdef int k_max = n_levels - 1
    cdef int k, i, i1, i2, j, d, m
    cdef int nbr[4]
    cdef int n_spatial = 2 * dim
    cdef double w_spat
    cdef double pts[96]   # NBMAX * PDMAX
    cdef double wts[NBMAX]
    cdef double out[PDMAX]
    if pd > PDMAX:
        raise ValueError("point_dim too large for the compiled kernel")

    with nogil:
        for k in range(1, k_max + 1):
            w_spat = ws if k < k_max else ws_last
            for i in range(n):
                if dim == 1:
                    nbr[0] = i + 1 if i + 1 < n1 else 0
                    nbr[1] = i - 1 if i > 0 else n1 - 1
                else:
                    i1 = i // n2
                    i2 = i - i1 * n2
                    nbr[0] = ((i1 + 1) % n1) * n2 + i2
                    nbr[1] = ((i1 - 1 + n1) % n1) * n2 + i2
                    nbr[2] = i1 * n2 + ((i2 + 1) % n2)
                    nbr[3] = i1 * n2 + ((i2 - 1 + n2) % n2)
                m = 0
                for d in range(pd):
                    pts[m * pd + d] = vals[k - 1, i, d]
                wts[m] = wb
                m += 1
                if k < k_max and wf > 0.0:
                    for d in range(pd):
                        pts[m * pd + d] = vals[k + 1, i, d]
                    wts[m] = wf
                    m += 1
                if w_spat > 0.0:
                    for j in range(n_spatial):
                        for d in range(pd):
                            pts[m * pd + d] = vals[k, nbr[j], d]
                        wts[m] = w_spat
                        m += 1
                _node_mean(kind, rays, pts, wts, m, pd, &vals[k, i, 0], out)
                for d in range(pd):
                    vals[k, i, d] = out[d]


def node_mean(int kind, int rays, double[:, ::1] pts, double[::1] wts,
              double[::1] cur):
    """Weighted mean of a small point stack; debug/testing entry point."""
    cdef int m = pts.shape[0]
    cdef int pd = pts.shape[1]
    cdef double cpts[96]
    cdef double cwts[NBMAX]
    cdef double out[PDMAX]
    cdef double ccur[PDMAX]
    cdef int i, d
    if m > NBMAX or pd > PDMAX:
        raise ValueError("stack too large for the compiled kernel")
    for i in range(m):
        cwts[i] = wts[i]
        for d in range(pd):
            cpts[i * pd + d] = pts[i, d]
    for d in range(pd):
        ccur[d] = cur[d]
    _node_mean(kind, rays, cpts, cwts, m, pd, ccur, out)
    res = np.empty(pd)
    for d in range(pd):
        res[d] = out[d]
    return res
