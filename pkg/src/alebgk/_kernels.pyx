# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Signatures mirror ``alebgk._fallback``.

Every kernel processes a half-open slice ``[lo, hi)`` of its work list and
writes only the output slots owned by that slice. Reductions run in
ascending neighbour / node order, so results do not depend on how the
work list is split between threads.
"""
import numpy as np

from libc.math cimport exp, fabs, sqrt, M_PI
from libc.stdlib cimport free, malloc

ctypedef long long idx_t


cdef inline double _neg(double a) nogil:
    return a if a < 0.0 else 0.0


def advect(const idx_t[::1] rows, idx_t lo, idx_t hi,
           const idx_t[::1] ptr, const idx_t[::1] nbr,
           const double[:, :, ::1] frame, const double[:, ::1] rot,
           const double[:, ::1] nodes, const double[:, ::1] U,
           const double[:, :, ::1] f, double[:, :, ::1] f_tilde,
           double dt, double[::1] rate):
    cdef idx_t nnode = nodes.shape[0]
    cdef idx_t ncomp = f.shape[1]
    cdef int dims = nodes.shape[1]
    cdef idx_t r, i, j, p, k, c
    cdef double n0, n1, n2, t0, t1, t2, b0, b1, b2
    cdef double nU, tU, bU, ab, bb, gb, cn, ct, cb, coef, rmax
    cdef double *Q
    cdef double *acc
    cdef double *ck
    cdef double *vx
    cdef double *vy
    cdef double *vz
    cdef const double *fi
    cdef const double *fj
    cdef double *qc
    if hi <= lo:
        return
    Q = <double *> malloc(ncomp * nnode * sizeof(double))
    acc = <double *> malloc(nnode * sizeof(double))
    ck = <double *> malloc(nnode * sizeof(double))
    vx = <double *> malloc(3 * nnode * sizeof(double))
    vy = vx + nnode
    vz = vy + nnode
    try:
        with nogil:
            for k in range(nnode):
                vx[k] = nodes[k, 0]
                vy[k] = nodes[k, 1]
                vz[k] = nodes[k, 2] if dims == 3 else 0.0
            for r in range(lo, hi):
                i = rows[r]
                for k in range(ncomp * nnode):
                    Q[k] = 0.0
                for k in range(nnode):
                    acc[k] = 0.0
                for p in range(ptr[i], ptr[i + 1]):
                    j = nbr[p]
                    ab = 2.0 * rot[p, 0]
                    bb = rot[p, 1]
                    n0 = frame[p, 0, 0]
                    n1 = frame[p, 0, 1]
                    t0 = frame[p, 1, 0]
                    t1 = frame[p, 1, 1]
                    if dims == 2:
                        nU = n0 * U[i, 0] + n1 * U[i, 1]
                        tU = t0 * U[i, 0] + t1 * U[i, 1]
                        for k in range(nnode):
                            cn = n0 * vx[k] + n1 * vy[k] - nU
                            ct = bb * (t0 * vx[k] + t1 * vy[k] - tU)
                            coef = ab * _neg(cn) + 2.0 * _neg(ct)
                            ck[k] = coef
                            acc[k] -= coef
                    else:
                        gb = rot[p, 2]
                        n2 = frame[p, 0, 2]
                        t2 = frame[p, 1, 2]
                        b0 = frame[p, 2, 0]
                        b1 = frame[p, 2, 1]
                        b2 = frame[p, 2, 2]
                        nU = n0 * U[i, 0] + n1 * U[i, 1] + n2 * U[i, 2]
                        tU = t0 * U[i, 0] + t1 * U[i, 1] + t2 * U[i, 2]
                        bU = b0 * U[i, 0] + b1 * U[i, 1] + b2 * U[i, 2]
                        for k in range(nnode):
                            cn = n0 * vx[k] + n1 * vy[k] + n2 * vz[k] - nU
                            ct = bb * (t0 * vx[k] + t1 * vy[k] + t2 * vz[k] - tU)
                            cb = gb * (b0 * vx[k] + b1 * vy[k] + b2 * vz[k] - bU)
                            coef = ab * _neg(cn) + 2.0 * _neg(ct) + 2.0 * _neg(cb)
                            ck[k] = coef
                            acc[k] -= coef
                    for c in range(ncomp):
                        fi = &f[i, c, 0]
                        fj = &f[j, c, 0]
                        qc = Q + c * nnode
                        for k in range(nnode):
                            qc[k] += ck[k] * (fj[k] - fi[k])
                rmax = 0.0
                for k in range(nnode):
                    if acc[k] > rmax:
                        rmax = acc[k]
                for c in range(ncomp):
                    for k in range(nnode):
                        f_tilde[i, c, k] = f[i, c, k] - dt * Q[c * nnode + k]
                rate[i] = rmax
    finally:
        free(Q)
        free(acc)
        free(ck)
        free(vx)


def moments(const idx_t[::1] rows, idx_t lo, idx_t hi,
            const double[:, ::1] nodes, const double[:, :, ::1] f, double dvol,
            double[::1] rho, double[:, ::1] U, double[::1] e3):
    """Density, velocity and ``3 rho R T`` from f (or the pair g1, g2)."""
    cdef idx_t nnode = nodes.shape[0]
    cdef idx_t ncomp = f.shape[1]
    cdef int dims = nodes.shape[1]
    cdef idx_t r, i, k
    cdef int d
    cdef double m0, m1[3], u[3], s, cd, g2sum
    with nogil:
        for r in range(lo, hi):
            i = rows[r]
            m0 = 0.0
            for d in range(dims):
                m1[d] = 0.0
            for k in range(nnode):
                m0 += f[i, 0, k]
                for d in range(dims):
                    m1[d] += nodes[k, d] * f[i, 0, k]
            m0 *= dvol
            rho[i] = m0
            if m0 <= 0.0:
                e3[i] = 0.0
                for d in range(dims):
                    U[i, d] = 0.0
                continue
            for d in range(dims):
                u[d] = m1[d] * dvol / m0
                U[i, d] = u[d]
            s = 0.0
            g2sum = 0.0
            for k in range(nnode):
                cd = 0.0
                for d in range(dims):
                    cd += (nodes[k, d] - u[d]) * (nodes[k, d] - u[d])
                s += cd * f[i, 0, k]
                if ncomp == 2:
                    g2sum += f[i, 1, k]
            e3[i] = (s + g2sum) * dvol


def relax(const idx_t[::1] rows, idx_t lo, idx_t hi,
          const double[:, ::1] nodes, const double[::1] rho, const double[:, ::1] U,
          const double[::1] T, const double[::1] tau, double R, double dt,
          const double[:, :, ::1] f_tilde, double[:, :, ::1] f):
    """Closed-form implicit relaxation over the flat (row, node) range."""
    cdef idx_t nnode = nodes.shape[0]
    cdef idx_t ncomp = f.shape[1]
    cdef int dims = nodes.shape[1]
    cdef idx_t q, r, i, k
    cdef int d
    cdef double pref = 0.0, inv2RT = 0.0, wt = 0.0, wm = 0.0, RT = 0.0
    cdef double cd, M
    cdef idx_t last = -1
    with nogil:
        for q in range(lo, hi):
            r = q // nnode
            k = q - r * nnode
            i = rows[r]
            if i != last:
                last = i
                RT = R * T[i]
                if dims == 3:
                    pref = rho[i] / (2.0 * M_PI * RT) / sqrt(2.0 * M_PI * RT)
                else:
                    pref = rho[i] / (2.0 * M_PI * RT)
                inv2RT = 1.0 / (2.0 * RT)
                wt = tau[i] / (tau[i] + dt)
                wm = dt / (tau[i] + dt)
            cd = 0.0
            for d in range(dims):
                cd += (nodes[k, d] - U[i, d]) * (nodes[k, d] - U[i, d])
            M = pref * exp(-cd * inv2RT)
            f[i, 0, k] = wt * f_tilde[i, 0, k] + wm * M
            if ncomp == 2:
                f[i, 1, k] = wt * f_tilde[i, 1, k] + wm * RT * M


def interp(const idx_t[::1] rows, idx_t lo, idx_t hi,
           const idx_t[::1] ptr, const idx_t[::1] nbr, const double[::1] coef,
           const double[:, :, ::1] src, double[:, :, ::1] out):
    """``out[rows[r]] = sum_p coef[p] * src[nbr[p]]`` for stencil rows r."""
    cdef idx_t nnode = src.shape[2]
    cdef idx_t ncomp = src.shape[1]
    cdef idx_t r, i, p, j, k, c
    cdef double w
    with nogil:
        for r in range(lo, hi):
            i = rows[r]
            for c in range(ncomp):
                for k in range(nnode):
                    out[i, c, k] = 0.0
            for p in range(ptr[r], ptr[r + 1]):
                j = nbr[p]
                w = coef[p]
                for c in range(ncomp):
                    for k in range(nnode):
                        out[i, c, k] += w * src[j, c, k]


cdef inline idx_t _scan(const double[:, ::1] x, idx_t i, const idx_t[:, ::1] cells,
                        const idx_t[::1] nvox, const idx_t[::1] cell_start,
                        const idx_t[::1] cell_items, double h2,
                        idx_t *out) nogil:
    """Neighbours of i within sqrt(h2); writes them to out when not NULL."""
    cdef int dims = x.shape[1]
    cdef idx_t cnt = 0
    cdef int a, b, e, d
    cdef idx_t ci[3], cc, q, j
    cdef int lim2 = 1 if dims == 3 else 0
    cdef int lo2 = -1 if dims == 3 else 0
    cdef double dist2, dd
    for a in range(-1, 2):
        ci[0] = cells[i, 0] + a
        if ci[0] < 0 or ci[0] >= nvox[0]:
            continue
        for b in range(-1, 2):
            ci[1] = cells[i, 1] + b
            if ci[1] < 0 or ci[1] >= nvox[1]:
                continue
            for e in range(lo2, lim2 + 1):
                if dims == 3:
                    ci[2] = cells[i, 2] + e
                    if ci[2] < 0 or ci[2] >= nvox[2]:
                        continue
                    cc = (ci[0] * nvox[1] + ci[1]) * nvox[2] + ci[2]
                else:
                    cc = ci[0] * nvox[1] + ci[1]
                for q in range(cell_start[cc], cell_start[cc + 1]):
                    j = cell_items[q]
                    if j == i:
                        continue
                    dist2 = 0.0
                    for d in range(dims):
                        dd = x[j, d] - x[i, d]
                        dist2 += dd * dd
                    if dist2 <= h2:
                        if out != NULL:
                            out[cnt] = j
                        cnt += 1
    return cnt


def neighbor_count(const double[:, ::1] x, const idx_t[:, ::1] cells, const idx_t[::1] nvox,
                   const idx_t[::1] cell_start, const idx_t[::1] cell_items, double h2,
                   idx_t lo, idx_t hi, idx_t[::1] counts):
    cdef idx_t i
    with nogil:
        for i in range(lo, hi):
            counts[i] = _scan(x, i, cells, nvox, cell_start, cell_items, h2, NULL)


def neighbor_fill(const double[:, ::1] x, const idx_t[:, ::1] cells, const idx_t[::1] nvox,
                  const idx_t[::1] cell_start, const idx_t[::1] cell_items, double h2,
                  idx_t lo, idx_t hi, const idx_t[::1] ptr, idx_t[::1] nbr):
    cdef idx_t i, a, b, n, key
    cdef idx_t *row
    with nogil:
        for i in range(lo, hi):
            row = &nbr[ptr[i]]
            n = _scan(x, i, cells, nvox, cell_start, cell_items, h2, row)
            # insertion sort: rows are short and nearly ordered
            for a in range(1, n):
                key = row[a]
                b = a - 1
                while b >= 0 and row[b] > key:
                    row[b + 1] = row[b]
                    b -= 1
                row[b + 1] = key
