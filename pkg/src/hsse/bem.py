"""Constant-element boundary discretisation and operator assembly.

Both flavours store their matrices row-by-collocation point ("natural"
layout): row ``2a + p`` is the equation written at collocation point ``a``
for component ``p``, column ``2b + q`` multiplies the unknown of element
``b`` in component ``q``.

* Direct:   ``h @ u = g @ t`` where ``h`` already contains the free term
  ``C = I/2`` on its diagonal.
* Indirect: ``u = g @ phi`` and ``t = h @ phi`` where ``h`` contains the
  ``phi / 2`` jump term.

Because the full-plane Green's tensor is symmetric in its indices and in
its arguments, ``g`` is the same matrix for both flavours in this layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import AssemblyError, DomainError, MeshError
from .kernels import Material, radial_terms

GAUSS_FAR = 8
GAUSS_NEAR = 16
NEAR_FACTOR = 2.0
# halvings of the boundary elements next to the box/free-surface corners
CORNER_LEVELS = 3
_SELF_POINTS = 16

_gx_far, _gw_far = np.polynomial.legendre.leggauss(GAUSS_FAR)
_gx_near, _gw_near = np.polynomial.legendre.leggauss(GAUSS_NEAR)


@dataclass(frozen=True)
class Geometry:
    """Canyon descriptor.

    Attributes
    ----------
    kind : {"flat", "semicircular", "rectangular"}
    L : float
        Characteristic dimension: radius of the semicircle, half-width and
        depth of the rectangle (m).
    truncation : float
        Free surface extends to ``+-truncation * L``.
    elem_size : float
        Target element size (m).
    """

    kind: str = "semicircular"
    L: float = 1.0
    truncation: float = 7.0
    elem_size: float = 0.125

    def __post_init__(self):
        if self.kind not in ("flat", "semicircular", "rectangular"):
            raise MeshError(f"unknown canyon kind {self.kind!r}")
        if not self.L > 0:
            raise MeshError("L must be positive")
        if not self.elem_size > 0:
            raise MeshError("elem_size must be positive")
        if self.elem_size > self.L / 4 + 1e-12:
            raise MeshError(
                f"elem_size={self.elem_size} exceeds L/4={self.L / 4}: geometry under-resolved"
            )
        if self.truncation < 4:
            raise MeshError(f"truncation must be >= 4, got {self.truncation}")


@dataclass(frozen=True)
class Box:
    """Finite-element box ``[-half_width, half_width] x [-depth, 0]`` (m)."""

    half_width: float
    depth: float


@dataclass(frozen=True)
class BoundaryMesh:
    """Open or closed polyline of straight constant elements.

    Normals point out of the boundary-element (half-space) domain. For an
    open polyline traversed from left to right with the solid below, this
    is the left-hand normal of each element.

    ``contact`` flags the elements on the coupling surface shared with a
    finite-element model; the rest are traction-free surface elements.
    """

    nodes: np.ndarray
    elements: np.ndarray
    contact: np.ndarray = None
    closed: bool = False
    midpoints: np.ndarray = field(init=False, repr=False)
    tangents: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        elements = np.asarray(self.elements, dtype=int)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshError("nodes must have shape (n, 2)")
        if elements.ndim != 2 or elements.shape[1] != 2 or len(elements) == 0:
            raise MeshError("elements must have shape (N, 2), N >= 1")
        a = nodes[elements[:, 0]]
        b = nodes[elements[:, 1]]
        d = b - a
        lengths = np.hypot(d[:, 0], d[:, 1])
        if np.any(lengths <= 0):
            raise MeshError(f"zero-length element(s) {np.nonzero(lengths <= 0)[0].tolist()}")
        tangents = d / lengths[:, None]
        contact = self.contact
        if contact is None:
            contact = np.zeros(len(elements), dtype=bool)
        contact = np.asarray(contact, dtype=bool)
        if contact.shape != (len(elements),):
            raise MeshError("contact mask must have one flag per element")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "contact", contact)
        object.__setattr__(self, "midpoints", 0.5 * (a + b))
        object.__setattr__(self, "tangents", tangents)
        object.__setattr__(self, "normals", np.column_stack([-tangents[:, 1], tangents[:, 0]]))
        object.__setattr__(self, "lengths", lengths)

    def __len__(self):
        return len(self.elements)

    @classmethod
    def from_polyline(cls, points, contact=None, closed=False):
        pts = np.asarray(points, dtype=float)
        n = len(pts)
        idx = np.arange(n - 1)
        elements = np.column_stack([idx, idx + 1])
        if closed:
            elements = np.vstack([elements, [n - 1, 0]])
        return cls(pts, elements, contact, closed)


def _segment(p, q, n):
    """``n`` equal subdivisions of ``p -> q`` excluding the end point."""
    t = np.arange(n)[:, None] / n
    return np.asarray(p, float) + t * (np.asarray(q, float) - np.asarray(p, float))


def _count(length, h):
    return max(1, int(np.ceil(length / h - 1e-9)))


def canyon_profile(geometry):
    """Nodes of the canyon notch from ``(-L, 0)`` to ``(L, 0)`` inclusive."""
    L, h = geometry.L, geometry.elem_size
    if geometry.kind == "flat":
        n = _count(2 * L, h)
        return np.vstack([_segment((-L, 0), (L, 0), n), [[L, 0.0]]])
    if geometry.kind == "semicircular":
        n = _count(np.pi * L, h)
        th = np.pi + np.pi * np.arange(n + 1) / n
        pts = L * np.column_stack([np.cos(th), np.sin(th)])
        pts[0] = (-L, 0.0)
        pts[-1] = (L, 0.0)
        if n % 2 == 0:
            pts[n // 2] = (0.0, -L)
        return pts
    nw, nb = _count(L, h), _count(2 * L, h)
    return np.vstack([
        _segment((-L, 0), (-L, -L), nw),
        _segment((-L, -L), (L, -L), nb),
        _segment((L, -L), (L, 0), nw),
        [[L, 0.0]],
    ])


def build_surface_mesh(geometry: Geometry) -> BoundaryMesh:
    """Free surface from ``-truncation*L`` to ``+truncation*L`` with the
    canyon notch carved at the origin. All elements are traction-free
    surface elements."""
    L, h, T = geometry.L, geometry.elem_size, geometry.truncation * geometry.L
    nf = _count(T - L, h)
    left = _segment((-T, 0), (-L, 0), nf)
    right = _segment((L, 0), (T, 0), nf)
    pts = np.vstack([left, canyon_profile(geometry)[:-1], right, [[T, 0.0]]])
    return BoundaryMesh.from_polyline(pts)


def contact_contour(box: Box, h: float):
    """Nodes of the coupling surface: down the left side, along the bottom,
    up the right side, from ``(-W, 0)`` to ``(W, 0)`` inclusive.

    This generator is shared by the boundary-element and finite-element
    meshes so that the two are conformal by construction.
    """
    W, D = box.half_width, box.depth
    ns, nb = _count(D, h), _count(2 * W, h)
    return np.vstack([
        _segment((-W, 0), (-W, -D), ns),
        _segment((-W, -D), (W, -D), nb),
        _segment((W, -D), (W, 0), ns),
        [[W, 0.0]],
    ])


def _graded(p, q, levels, at_start):
    """Subdivision of ``p -> q`` halving towards one end, ``levels`` times."""
    t = np.concatenate([[0.0], 0.5 ** np.arange(levels, 0, -1)])
    if not at_start:
        t = 1.0 - t[::-1][:-1]
        t = np.concatenate([[0.0], t])
    p, q = np.asarray(p, float), np.asarray(q, float)
    return p + t[:, None] * (q - p)


def build_contact_mesh(box: Box, h: float, truncation: float,
                       corner_levels: int = CORNER_LEVELS) -> BoundaryMesh:
    """Boundary of the half-space exterior to the finite-element box.

    Traction-free surface from ``-truncation`` to ``-W`` (absolute
    coordinates), the coupling contour around the box, then free surface
    from ``W`` to ``truncation``. The four elements touching the two
    surface corners ``(+-W, 0)`` are split geometrically towards the corner
    ``corner_levels`` times; constant elements otherwise leave a
    mesh-independent error in the corner traction.
    """
    W = box.half_width
    if truncation <= W:
        raise MeshError("truncation must extend beyond the finite-element box")
    if corner_levels < 0:
        raise MeshError("corner_levels must be non-negative")
    nf = _count(truncation - W, h)
    contour = contact_contour(box, h)
    left = _segment((-truncation, 0), (-W, 0), nf)
    right = _segment((W, 0), (truncation, 0), nf)
    pts = np.vstack([left, contour[:-1], right, [[truncation, 0.0]]])
    contact = np.zeros(len(pts) - 1, dtype=bool)
    contact[nf:nf + len(contour) - 1] = True
    if corner_levels:
        corners = {nf, nf + len(contour) - 1}
        new_pts, new_contact = [], []
        for e in range(len(pts) - 1):
            if e in corners or e + 1 in corners:
                sub = _graded(pts[e], pts[e + 1], corner_levels, at_start=e in corners)
            else:
                sub = pts[e:e + 1]
            new_pts.append(sub)
            new_contact.extend([contact[e]] * len(sub))
        pts = np.vstack(new_pts + [pts[-1:]])
        contact = np.array(new_contact)
    return BoundaryMesh.from_polyline(pts, contact)


@dataclass(frozen=True)
class BemOperators:
    """Assembled boundary-element matrices (natural layout, see module doc)."""

    g: np.ndarray
    h: np.ndarray
    free_term: np.ndarray
    flavor: str
    contact: np.ndarray = None
    omega: float = 0.0

    def __post_init__(self):
        if self.flavor not in ("Direct", "Indirect"):
            raise DomainError(f"flavor must be 'Direct' or 'Indirect', got {self.flavor!r}")
        if self.g.shape != self.h.shape or self.g.shape[0] != self.g.shape[1]:
            raise DomainError("g and h must be square and of equal shape")
        if self.contact is None:
            object.__setattr__(self, "contact", np.ones(self.g.shape[0] // 2, dtype=bool))

    @property
    def n_elements(self):
        return self.g.shape[0] // 2


def _self_integrals(lengths, omega, mat):
    """Integral of ``A`` and ``B`` over a straight element, collocated at its
    midpoint. The ``log r`` part of ``A`` is integrated in closed form; the
    remainder is integrated on each half with ``s = (l/2) u**2`` so that the
    ``r**2 log r`` behaviour at the collocation point becomes smooth."""
    ks = omega / mat.beta
    kp = omega / mat.alpha
    c = -0.25j / mat.mu
    log_coef = c * (-1j / np.pi) * (1.0 + (kp / ks) ** 2)
    u, w = np.polynomial.legendre.leggauss(_SELF_POINTS)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    half = 0.5 * lengths[:, None]
    s = half * u[None, :] ** 2
    jac = 2.0 * half * u[None, :]
    a, _, b, _ = radial_terms(s, omega, mat)
    a_reg = a - log_coef * np.log(s)
    int_a = 2.0 * np.sum(w * jac * a_reg, axis=1)
    int_a += log_coef * lengths * (np.log(0.5 * lengths) - 1.0)
    int_b = 2.0 * np.sum(w * jac * b, axis=1)
    return int_a, int_b


def assemble_operators(mesh: BoundaryMesh, omega: float, mat: Material,
                       flavor: str = "Direct", backend=None) -> BemOperators:
    """Assemble ``g`` and ``h`` for every collocation point/element pair.

    Regular integrals use 8-point Gauss-Legendre, switching to 16 points when
    the collocation point is closer than two element lengths to the element
    midpoint. Self integrals of ``g`` split off the logarithm analytically;
    the self integral of ``h`` vanishes on a straight element collocated at
    its midpoint, leaving only the free/jump term ``I/2``.
    """
    if flavor not in ("Direct", "Indirect"):
        raise DomainError(f"flavor must be 'Direct' or 'Indirect', got {flavor!r}")
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    be = backend or _backend.backend
    n = len(mesh)
    g, h = be.offdiag_blocks(
        mesh.midpoints, mesh.normals, mesh.midpoints, mesh.tangents, mesh.normals,
        mesh.lengths, float(omega), mat.alpha, mat.beta, mat.rho,
        1 if flavor == "Indirect" else 0, NEAR_FACTOR,
        _gx_far, _gw_far, _gx_near, _gw_near,
    )
    int_a, int_b = _self_integrals(mesh.lengths, omega, mat)
    tt = mesh.tangents[:, :, None] * mesh.tangents[:, None, :]
    gself = int_a[:, None, None] * np.eye(2) + int_b[:, None, None] * tt
    free_term = np.broadcast_to(0.5 * np.eye(2), (n, 2, 2)).copy()
    for k in range(n):
        sl = slice(2 * k, 2 * k + 2)
        g[sl, sl] = gself[k]
        h[sl, sl] = free_term[k]

    bad = ~(np.isfinite(g) & np.isfinite(h))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise AssemblyError(
            f"non-finite integral for collocation point {r // 2}, element {c // 2}"
        )
    return BemOperators(g, h, free_term, flavor, mesh.contact.copy(), float(omega))


def _dof_index(mask):
    idx = np.nonzero(mask)[0]
    return np.column_stack([2 * idx, 2 * idx + 1]).ravel()


def condense(ops: BemOperators):
    """Eliminate the traction-free elements, leaving operators on the
    contact elements only.

    Returns ``(g_bar, h_bar)`` such that ``h_bar @ u_S = g_bar @ t_S`` for the
    direct flavour and ``u_S = g_bar @ phi_S``, ``t_S = h_bar @ phi_S`` for the
    indirect flavour.
    """
    s = _dof_index(ops.contact)
    f = _dof_index(~ops.contact)
    g, h = ops.g, ops.h
    if f.size == 0:
        return g[np.ix_(s, s)], h[np.ix_(s, s)]
    if ops.flavor == "Direct":
        # rows on F: h_FS u_S + h_FF u_F = g_FS t_S
        x = np.linalg.solve(h[np.ix_(f, f)], np.hstack([h[np.ix_(f, s)], g[np.ix_(f, s)]]))
        ns = s.size
        h_bar = h[np.ix_(s, s)] - h[np.ix_(s, f)] @ x[:, :ns]
        g_bar = g[np.ix_(s, s)] - h[np.ix_(s, f)] @ x[:, ns:]
    else:
        # t_F = h_FS phi_S + h_FF phi_F = 0
        x = np.linalg.solve(h[np.ix_(f, f)], h[np.ix_(f, s)])
        h_bar = h[np.ix_(s, s)] - h[np.ix_(s, f)] @ x
        g_bar = g[np.ix_(s, s)] - g[np.ix_(s, f)] @ x
    return g_bar, h_bar


def recover_free_surface(ops: BemOperators, u_s):
    """Scattered displacement on the traction-free elements given the
    scattered displacement ``u_s`` (interleaved x/y) on the contact elements."""
    s = _dof_index(ops.contact)
    f = _dof_index(~ops.contact)
    if f.size == 0:
        return np.zeros(0, dtype=complex)
    g, h = ops.g, ops.h
    g_bar, h_bar = condense(ops)
    if ops.flavor == "Direct":
        t_s = np.linalg.solve(g_bar, h_bar @ u_s)
        return np.linalg.solve(h[np.ix_(f, f)], g[np.ix_(f, s)] @ t_s - h[np.ix_(f, s)] @ u_s)
    phi_s = np.linalg.solve(g_bar, u_s)
    phi_f = -np.linalg.solve(h[np.ix_(f, f)], h[np.ix_(f, s)] @ phi_s)
    return g[np.ix_(f, s)] @ phi_s + g[np.ix_(f, f)] @ phi_f


def indirect_field(mesh: BoundaryMesh, phi, points, omega, mat, n_gauss=GAUSS_NEAR):
    """Displacement at arbitrary ``points`` radiated by constant source
    densities ``phi`` (interleaved x/y per element)."""
    from .kernels import displacement_kernel

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    phi = np.asarray(phi).reshape(-1, 2)
    half = 0.5 * mesh.lengths
    y = mesh.midpoints[:, None, :] + gx[None, :, None] * half[:, None, None] * mesh.tangents[:, None, :]
    w = gw[None, :] * half[:, None]
    d = pts[:, None, None, :] - y[None, :, :, :]
    gk = displacement_kernel(d[..., 0], d[..., 1], omega, mat)
    return np.einsum("eq,peqij,ej->pi", w, gk, phi)
