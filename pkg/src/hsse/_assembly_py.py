"""Pure NumPy backend for the off-diagonal boundary-element integrals."""

import numpy as np

from .kernels import Material, displacement_kernel, traction_kernel

NAME = "python"

# quadrature-point pairs evaluated per vectorised batch (bounds peak memory)
BATCH = 200_000


def offdiag_blocks(colloc, cnormals, midpoints, tangents, enormals, lengths,
                   omega, alpha, beta, rho, indirect, near_factor,
                   gx_far, gw_far, gx_near, gw_near):
    """Element integrals of ``G`` and ``H`` for every collocation/element pair
    except the self pairs (left as zero).

    Row ``2a + p`` is collocation point ``a``; column ``2b + q`` is element
    ``b``. For the direct flavour the traction kernel is taken with the load
    at the collocation point and the normal of the integration element, and
    its 2x2 block is transposed; the indirect flavour places the load on the
    element and the normal at the collocation point.
    """
    mat = Material(rho, alpha, beta)
    nc, ne = len(colloc), len(midpoints)
    g = np.zeros((nc, ne, 2, 2), dtype=complex)
    h = np.zeros((nc, ne, 2, 2), dtype=complex)

    dist = np.hypot(colloc[:, None, 0] - midpoints[None, :, 0],
                    colloc[:, None, 1] - midpoints[None, :, 1])
    near = dist < near_factor * lengths[None, :]
    self_pair = np.zeros((nc, ne), dtype=bool)
    if nc == ne:
        self_pair[np.arange(nc), np.arange(nc)] = True

    for mask, gx, gw in ((~near & ~self_pair, gx_far, gw_far),
                         (near & ~self_pair, gx_near, gw_near)):
        ia_all, ib_all = np.nonzero(mask)
        step = max(1, BATCH // len(gx))
        for start in range(0, ia_all.size, step):
            ia, ib = ia_all[start:start + step], ib_all[start:start + step]
            g[ia, ib], h[ia, ib] = _pair_integrals(
                ia, ib, colloc, cnormals, midpoints, tangents, enormals, lengths,
                omega, mat, indirect, gx, gw)

    g = g.transpose(0, 2, 1, 3).reshape(2 * nc, 2 * ne)
    h = h.transpose(0, 2, 1, 3).reshape(2 * nc, 2 * ne)
    return g, h


def _pair_integrals(ia, ib, colloc, cnormals, midpoints, tangents, enormals, lengths,
                    omega, mat, indirect, gx, gw):
    half = 0.5 * lengths[ib]
    # quadrature points y = mid + s * half * tangent, shape (pairs, q, 2)
    y = midpoints[ib, None, :] + (gx[None, :, None] * half[:, None, None]) * tangents[ib, None, :]
    w = gw[None, :] * half[:, None]
    x = colloc[ia, None, :]
    gk = displacement_kernel(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1], omega, mat)
    g = np.einsum("pq,pqij->pij", w, gk)
    if indirect:
        n = cnormals[ia, None, :]
        hk = traction_kernel(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1],
                             n[..., 0], n[..., 1], omega, mat)
        h = np.einsum("pq,pqij->pij", w, hk)
    else:
        n = enormals[ib, None, :]
        hk = traction_kernel(y[..., 0] - x[..., 0], y[..., 1] - x[..., 1],
                             n[..., 0], n[..., 1], omega, mat)
        h = np.einsum("pq,pqji->pij", w, hk)
    return g, h
