"""Plane-strain bilinear quadrilateral model of the near-field box.

The box ``[-W, W] x [-D, 0]`` minus the canyon notch is meshed with 4-node
quads. Its bottom and lateral sides form the coupling surface ``S``; every
other degree of freedom (including the traction-free top and canyon
surfaces) is interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bem import Box, Geometry, contact_contour
from .errors import AssemblyError, DomainError, MeshError
from .kernels import Material

_G = 1.0 / np.sqrt(3.0)
GAUSS_2x2 = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])


@dataclass(frozen=True)
class FemMesh:
    """Quad mesh with its coupling-surface partition.

    Attributes
    ----------
    nodes : (n, 2) float array
    quads : (ne, 4) int array, counter-clockwise connectivity
    surface_nodes : node indices on ``S`` ordered like the contact polyline
    free_surface_nodes : node indices on the traction-free top boundary,
        ordered from ``(-W, 0)`` to ``(W, 0)`` along the surface
    h : grid spacing actually used
    box : the (grid-snapped) box
    """

    nodes: np.ndarray
    quads: np.ndarray
    surface_nodes: np.ndarray
    free_surface_nodes: np.ndarray
    h: float
    box: Box

    @property
    def n_dofs(self):
        return 2 * len(self.nodes)

    @property
    def surface_dofs(self):
        s = self.surface_nodes
        return np.column_stack([2 * s, 2 * s + 1]).ravel()

    @property
    def interior_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.surface_dofs] = False
        return np.nonzero(mask)[0]

    @property
    def area(self):
        x = self.nodes[self.quads]
        xs, ys = x[..., 0], x[..., 1]
        return float(0.5 * np.sum(xs * np.roll(ys, -1, 1) - np.roll(xs, -1, 1) * ys))


@dataclass(frozen=True)
class PartitionedFemSystem:
    k_II: sp.csr_matrix
    k_IS: sp.csr_matrix
    k_SI: sp.csr_matrix
    k_SS: sp.csr_matrix
    f_I: np.ndarray
    f_S: np.ndarray


def _grid_index(x, y, h, x0, y0):
    return int(round((x - x0) / h)), int(round((y - y0) / h))


def _lookup(nodes, pts, tol):
    idx = []
    for p in pts:
        d = np.hypot(nodes[:, 0] - p[0], nodes[:, 1] - p[1])
        i = int(np.argmin(d))
        if d[i] > tol:
            raise MeshError(f"no mesh node at {tuple(p)}")
        idx.append(i)
    return np.array(idx, dtype=int)


def _cartesian(geometry, W, D, h):
    nx, ny = int(round(2 * W / h)), int(round(D / h))
    xs = -W + h * np.arange(nx + 1)
    ys = -D + h * np.arange(ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    nid = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    quads = np.column_stack([
        nid[:-1, :-1].ravel(), nid[:-1, 1:].ravel(), nid[1:, 1:].ravel(), nid[1:, :-1].ravel()
    ])
    if geometry.kind == "rectangular":
        L = geometry.L
        c = nodes[quads].mean(axis=1)
        keep = ~((np.abs(c[:, 0]) < L) & (c[:, 1] > -L))
        quads = quads[keep]
        used = np.unique(quads)
        remap = -np.ones(len(nodes), dtype=int)
        remap[used] = np.arange(used.size)
        nodes = nodes[used]
        quads = remap[quads]
    return nodes, quads


def _ring(geometry, box, h):
    L = geometry.L
    outer = contact_contour(box, h)
    rad = np.hypot(outer[:, 0], outer[:, 1])
    inner = L * outer / rad[:, None]
    inner[0] = (-L, 0.0)
    inner[-1] = (L, 0.0)
    nr = max(1, int(np.ceil(np.max(rad - L) / h - 1e-9)))
    frac = np.arange(nr + 1) / nr
    # node (k, j): k along the contour, j from the canyon (0) to S (nr)
    pts = inner[:, None, :] + frac[None, :, None] * (outer - inner)[:, None, :]
    nk = len(outer)
    nodes = pts.reshape(-1, 2)
    nid = np.arange(nk * (nr + 1)).reshape(nk, nr + 1)
    quads = np.column_stack([
        nid[:-1, :-1].ravel(), nid[:-1, 1:].ravel(), nid[1:, 1:].ravel(), nid[1:, :-1].ravel()
    ])
    surface = nid[:, nr]
    free = np.concatenate([nid[0, ::-1], nid[1:, 0], nid[-1, 1:]])
    return nodes, quads, surface, free


def _signed_jacobians(nodes, quads):
    x = nodes[quads]
    dets = []
    for xi, eta in GAUSS_2x2:
        dn = _shape_derivatives(xi, eta)
        jac = np.einsum("ka,eac->ekc", dn, x)
        dets.append(jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0])
    return np.array(dets).T


def mesh_canyon_domain(geometry: Geometry, box: Box | None = None, h: float | None = None) -> FemMesh:
    """Structured quad mesh of the box minus the canyon notch.

    The spacing is snapped to ``L / m`` with integer ``m`` and the box to
    multiples of it, so canyon corners and box corners fall on grid lines.
    Flat and rectangular geometries use a Cartesian grid; the semicircular
    canyon uses a ring mesh spanned between the canyon arc and the coupling
    surface along rays through the origin.
    """
    L = geometry.L
    if box is None:
        box = Box(2.0 * L, 2.5 * L)
    if h is None:
        h = geometry.elem_size
    if h > L / 8 + 1e-12:
        raise MeshError(f"h={h} exceeds L/8={L / 8}")
    if box.half_width < 2 * L - 1e-12 or box.depth < (0 if geometry.kind == "flat" else L) + L - 1e-12:
        raise MeshError("box must enclose the canyon with a margin of at least L")
    m = int(np.ceil(L / h - 1e-9))
    h = L / m
    box = Box(round(box.half_width / h) * h, round(box.depth / h) * h)

    if geometry.kind == "semicircular":
        nodes, quads, surface, free = _ring(geometry, box, h)
    else:
        nodes, quads = _cartesian(geometry, box.half_width, box.depth, h)
        tol = 1e-9 * h
        surface = _lookup(nodes, contact_contour(box, h), tol)
        W = box.half_width
        if geometry.kind == "flat":
            top = np.nonzero(np.abs(nodes[:, 1]) < tol)[0]
            free = top[np.argsort(nodes[top, 0])]
        else:
            from .bem import canyon_profile
            prof = canyon_profile(Geometry("rectangular", L, 4.0, h))
            left = _lookup(nodes, _line(-W, -L, h), tol)
            right = _lookup(nodes, _line(L, W, h), tol)
            free = np.concatenate([left[:-1], _lookup(nodes, prof, tol), right[1:]])

    det = _signed_jacobians(nodes, quads)
    if np.any(det <= 0):
        bad = int(np.nonzero(np.any(det <= 0, axis=1))[0][0])
        raise MeshError(f"degenerate quad {bad} (non-positive Jacobian)")
    return FemMesh(nodes, quads, np.asarray(surface), np.asarray(free), h, box)


def _line(x0, x1, h):
    n = int(round((x1 - x0) / h))
    return np.column_stack([x0 + h * np.arange(n + 1), np.zeros(n + 1)])


def _shape_functions(xi, eta):
    return 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                            (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])


def _shape_derivatives(xi, eta):
    """``dN_a / d(xi, eta)`` as a (2, 4) array."""
    return 0.25 * np.array([
        [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
        [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
    ])


def elasticity_matrix(mat: Material):
    lam, mu = mat.lam, mat.mu
    return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def element_matrices(coords, mat: Material):
    """Stiffness and consistent mass of quads with corner ``coords`` (ne, 4, 2).

    Returns two (ne, 8, 8) arrays with dofs ordered ``u1x, u1y, u2x, ...``.
    """
    coords = np.asarray(coords, dtype=float)
    ne = coords.shape[0]
    dmat = elasticity_matrix(mat)
    ke = np.zeros((ne, 8, 8))
    me = np.zeros((ne, 8, 8))
    for xi, eta in GAUSS_2x2:
        dn = _shape_derivatives(xi, eta)
        jac = np.einsum("ka,eac->ekc", dn, coords)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(det <= 0):
            raise AssemblyError(f"element {int(np.argmin(det))} has non-positive Jacobian")
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        dndx = np.einsum("eck,ka->eca", inv, dn)  # (ne, 2, 4)
        b = np.zeros((ne, 3, 8))
        b[:, 0, 0::2] = dndx[:, 0]
        b[:, 1, 1::2] = dndx[:, 1]
        b[:, 2, 0::2] = dndx[:, 1]
        b[:, 2, 1::2] = dndx[:, 0]
        ke += np.einsum("eia,ij,ejb,e->eab", b, dmat, b, det)
        n = _shape_functions(xi, eta)
        nn = np.outer(n, n)
        me[:, 0::2, 0::2] += mat.rho * nn[None] * det[:, None, None]
        me[:, 1::2, 1::2] += mat.rho * nn[None] * det[:, None, None]
    return ke, me


def _element_dofs(quads):
    return np.stack([2 * quads, 2 * quads + 1], axis=-1).reshape(len(quads), 8)


MASS_KINDS = ("consistent", "lumped", "blended")


def assemble_global(mesh: FemMesh, mat: Material, mass: str = "consistent"):
    """Global sparse stiffness and mass matrices (CSR, real).

    ``mass`` selects the consistent matrix, its row-sum lumped diagonal, or
    their equal-weight average. The average cancels most of the leading
    phase error of bilinear elements, which matters on coarse meshes.
    """
    if mass not in MASS_KINDS:
        raise DomainError(f"unknown mass kind {mass!r}")
    ke, me = element_matrices(mesh.nodes[mesh.quads], mat)
    dofs = _element_dofs(mesh.quads)
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    shape = (mesh.n_dofs, mesh.n_dofs)
    k = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=shape).tocsr()
    m = sp.coo_matrix((me.ravel(), (rows, cols)), shape=shape).tocsr()
    if mass != "consistent":
        lumped = sp.diags(np.asarray(m.sum(axis=1)).ravel(), format="csr")
        m = lumped if mass == "lumped" else (0.5 * (m + lumped)).tocsr()
    k.sort_indices()
    m.sort_indices()
    return k, m


def partition(mesh: FemMesh, k, m, omega):
    if omega < 0:
        raise DomainError(f"omega must be non-negative, got {omega}")
    dyn = (k - omega**2 * m).astype(complex).tocsr()
    i, s = mesh.interior_dofs, mesh.surface_dofs
    return PartitionedFemSystem(
        dyn[i][:, i], dyn[i][:, s], dyn[s][:, i], dyn[s][:, s],
        np.zeros(i.size, dtype=complex), np.zeros(s.size, dtype=complex),
    )


def assemble_partitioned(mesh: FemMesh, omega: float, mat: Material) -> PartitionedFemSystem:
    """Dynamic stiffness ``K - omega**2 M`` split on interior/surface dofs."""
    k, m = assemble_global(mesh, mat)
    return partition(mesh, k, m, omega)


def body_force_load(mesh: FemMesh, force):
    """Consistent nodal load of a body force ``force(x, y) -> (fx, fy)``."""
    coords = mesh.nodes[mesh.quads]
    f = np.zeros(mesh.n_dofs)
    dofs = _element_dofs(mesh.quads)
    for xi, eta in GAUSS_2x2:
        n = _shape_functions(xi, eta)
        dn = _shape_derivatives(xi, eta)
        jac = np.einsum("ka,eac->ekc", dn, coords)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        xg = np.einsum("a,eac->ec", n, coords)
        fx, fy = force(xg[:, 0], xg[:, 1])
        fe = np.zeros((len(coords), 8))
        fe[:, 0::2] = n[None] * (fx * det)[:, None]
        fe[:, 1::2] = n[None] * (fy * det)[:, None]
        np.add.at(f, dofs, fe)
    return f
