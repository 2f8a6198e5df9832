# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the off-diagonal boundary-element integrals.

Same contract as :func:`hsse._assembly_py.offdiag_blocks`; the pair loop
runs without the GIL. Arguments of the Hankel functions are real here, so
``H2_n(x) = J_n(x) - i Y_n(x)`` is built from the real Bessel routines of
``scipy.special.cython_special``, which are much cheaper than the
complex-argument ``hankel2``.
"""

import numpy as np

from libc.math cimport sqrt
from scipy.special.cython_special cimport j0, j1, y0, y1

NAME = "compiled"


cdef inline void _radial(double r, double ks, double kp, double c_im,
                         double complex *a, double complex *da,
                         double complex *b, double complex *db) noexcept nogil:
    cdef double ratio2 = (kp / ks) * (kp / ks)
    cdef double zs = ks * r
    cdef double zp = kp * r
    cdef double complex h0s = j0(zs) - 1j * y0(zs)
    cdef double complex h1s = j1(zs) - 1j * y1(zs)
    cdef double complex h0p = j0(zp) - 1j * y0(zp)
    cdef double complex h1p = j1(zp) - 1j * y1(zp)
    cdef double complex h2s = 2.0 * h1s / zs - h0s
    cdef double complex h2p = 2.0 * h1p / zp - h0p
    cdef double complex psi = h0s - h1s / zs + ratio2 * h1p / zp
    cdef double complex chi = h2s - ratio2 * h2p
    # common factor -i / (4 mu)
    cdef double complex c = 1j * c_im
    a[0] = c * psi
    da[0] = c * (-ks * h1s + chi / r)
    b[0] = c * chi
    db[0] = c * (ks * h1s - ratio2 * kp * h1p - 2.0 * chi / r)


cdef void _pair(int ia, int ib, bint indirect,
                const double[:, ::1] colloc, const double[:, ::1] cnormals,
                const double[:, ::1] midpoints, const double[:, ::1] tangents,
                const double[:, ::1] enormals, const double[::1] lengths,
                double ks, double kp, double c_im, double lam, double mu,
                const double[::1] gx, const double[::1] gw,
                double complex[:, :, :, ::1] g, double complex[:, :, :, ::1] h) noexcept nogil:
    cdef int q, i, j
    cdef double half = 0.5 * lengths[ib]
    cdef double yx, yy, dx, dy, r, w, rx, ry, nx, ny, rn
    cdef double complex a, da, b, db, bor, c_rn, c_nr, c_rrr, val
    cdef double rh[2]
    cdef double nn[2]
    cdef double complex gs[2][2]
    cdef double complex hs[2][2]
    for i in range(2):
        for j in range(2):
            gs[i][j] = 0
            hs[i][j] = 0
    if indirect:
        nx = cnormals[ia, 0]
        ny = cnormals[ia, 1]
    else:
        nx = enormals[ib, 0]
        ny = enormals[ib, 1]
    for q in range(gx.shape[0]):
        yx = midpoints[ib, 0] + gx[q] * half * tangents[ib, 0]
        yy = midpoints[ib, 1] + gx[q] * half * tangents[ib, 1]
        dx = colloc[ia, 0] - yx
        dy = colloc[ia, 1] - yy
        r = sqrt(dx * dx + dy * dy)
        w = gw[q] * half
        _radial(r, ks, kp, c_im, &a, &da, &b, &db)
        rx = dx / r
        ry = dy / r
        gs[0][0] += w * (a + b * rx * rx)
        gs[0][1] += w * (b * rx * ry)
        gs[1][0] += w * (b * ry * rx)
        gs[1][1] += w * (a + b * ry * ry)
        if not indirect:
            # direct flavour: separation y - x, normal of the element
            rx = -rx
            ry = -ry
        rh[0] = rx
        rh[1] = ry
        nn[0] = nx
        nn[1] = ny
        rn = rx * nx + ry * ny
        bor = b / r
        c_rn = mu * (da + bor)
        c_nr = lam * (da + db + bor) + 2.0 * mu * bor
        c_rrr = 2.0 * mu * (db - 2.0 * bor) * rn
        for i in range(2):
            for j in range(2):
                val = c_rn * rh[i] * nn[j] + c_nr * nn[i] * rh[j] + c_rrr * rh[i] * rh[j]
                if i == j:
                    val = val + c_rn * rn
                if indirect:
                    hs[i][j] += w * val
                else:
                    hs[j][i] += w * val
    for i in range(2):
        for j in range(2):
            g[ia, ib, i, j] = gs[i][j]
            h[ia, ib, i, j] = hs[i][j]


def offdiag_blocks(colloc, cnormals, midpoints, tangents, enormals, lengths,
                   double omega, double alpha, double beta, double rho, bint indirect,
                   double near_factor, gx_far, gw_far, gx_near, gw_near):
    """Element integrals of ``G`` and ``H`` for every collocation/element pair
    except the self pairs (left as zero). See the NumPy backend for the layout.
    """
    cdef const double[:, ::1] c_v = np.ascontiguousarray(colloc, dtype=np.float64)
    cdef const double[:, ::1] cn_v = np.ascontiguousarray(cnormals, dtype=np.float64)
    cdef const double[:, ::1] m_v = np.ascontiguousarray(midpoints, dtype=np.float64)
    cdef const double[:, ::1] t_v = np.ascontiguousarray(tangents, dtype=np.float64)
    cdef const double[:, ::1] en_v = np.ascontiguousarray(enormals, dtype=np.float64)
    cdef const double[::1] l_v = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef const double[::1] gxf = np.ascontiguousarray(gx_far, dtype=np.float64)
    cdef const double[::1] gwf = np.ascontiguousarray(gw_far, dtype=np.float64)
    cdef const double[::1] gxn = np.ascontiguousarray(gx_near, dtype=np.float64)
    cdef const double[::1] gwn = np.ascontiguousarray(gw_near, dtype=np.float64)
    cdef int nc = c_v.shape[0]
    cdef int ne = m_v.shape[0]
    g_arr = np.zeros((nc, ne, 2, 2), dtype=np.complex128)
    h_arr = np.zeros((nc, ne, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] g = g_arr
    cdef double complex[:, :, :, ::1] h = h_arr
    cdef double mu = rho * beta * beta
    cdef double lam = rho * alpha * alpha - 2.0 * mu
    cdef double ks = omega / beta
    cdef double kp = omega / alpha
    cdef double c_im = -0.25 / mu
    cdef bint square = nc == ne
    cdef int ia, ib
    cdef double dx, dy
    with nogil:
        for ia in range(nc):
            for ib in range(ne):
                if square and ia == ib:
                    continue
                dx = c_v[ia, 0] - m_v[ib, 0]
                dy = c_v[ia, 1] - m_v[ib, 1]
                if sqrt(dx * dx + dy * dy) < near_factor * l_v[ib]:
                    _pair(ia, ib, indirect, c_v, cn_v, m_v, t_v, en_v, l_v,
                          ks, kp, c_im, lam, mu, gxn, gwn, g, h)
                else:
                    _pair(ia, ib, indirect, c_v, cn_v, m_v, t_v, en_v, l_v,
                          ks, kp, c_im, lam, mu, gxf, gwf, g, h)
    g_out = g_arr.transpose(0, 2, 1, 3).reshape(2 * nc, 2 * ne)
    h_out = h_arr.transpose(0, 2, 1, 3).reshape(2 * nc, 2 * ne)
    return g_out, h_out
