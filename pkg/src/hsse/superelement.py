"""Half-space super-element: stiffness assembly, symmetrisation, compression
and banded storage accounting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .bem import BemOperators, BoundaryMesh, condense
from .errors import DomainError, FactorizationError, MeshError

# condition number above which the displacement operator is treated as singular
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class CouplingMatrices:
    """``r_u`` maps finite-element surface displacements to element values
    (shape ``2N x 2M``); ``r_t`` maps element tractions to consistent nodal
    forces (shape ``2M x 2N``)."""

    r_u: np.ndarray
    r_t: np.ndarray


@dataclass(frozen=True)
class HsseMatrix:
    k: np.ndarray
    flavor: str
    omega: float

    @property
    def n(self):
        return self.k.shape[0]


@dataclass(frozen=True)
class CompressionSpec:
    """``method`` is ``"Threshold"`` (value = fraction of the largest modulus)
    or ``"HalfBand"`` (value = relative half-bandwidth)."""

    method: str
    value: float

    def __post_init__(self):
        if self.method not in ("Threshold", "HalfBand"):
            raise DomainError(f"unknown compression method {self.method!r}")
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"compression value must lie in [0, 1], got {self.value}")


@dataclass(frozen=True)
class CompressionReport:
    rhbw: float
    rst: float
    nnz: int
    n: int


def _contact_polyline(mesh: BoundaryMesh):
    idx = np.nonzero(mesh.contact)[0]
    if idx.size == 0:
        raise MeshError("boundary mesh has no contact elements")
    if np.any(np.diff(idx) != 1):
        raise MeshError("contact elements must be contiguous")
    el = mesh.elements[idx]
    if np.any(el[1:, 0] != el[:-1, 1]):
        raise MeshError("contact elements do not form a connected polyline")
    pts = mesh.nodes[np.concatenate([el[:, 0], el[-1:, 1]])]
    seg = np.hypot(*np.diff(pts, axis=0).T)
    return pts, np.concatenate([[0.0], np.cumsum(seg)])


def _arc_coordinate(pts, arc, q, tol):
    """Arc-length coordinate of point ``q`` projected on the polyline."""
    a, b = pts[:-1], pts[1:]
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", q - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    proj = a + t[:, None] * d
    dist = np.hypot(*(proj - q).T)
    i = int(np.argmin(dist))
    if dist[i] > tol:
        raise MeshError(f"finite-element node {tuple(q)} is {dist[i]:.3e} off the contact surface")
    return arc[i] + t[i] * (arc[i + 1] - arc[i])


def _hat_values(nodes_s, s):
    """Piecewise-linear interpolation weights at ``s`` (constant beyond the ends)."""
    w = np.zeros(len(nodes_s))
    if s <= nodes_s[0]:
        w[0] = 1.0
    elif s >= nodes_s[-1]:
        w[-1] = 1.0
    else:
        j = int(np.searchsorted(nodes_s, s, side="right")) - 1
        f = (s - nodes_s[j]) / (nodes_s[j + 1] - nodes_s[j])
        w[j], w[j + 1] = 1.0 - f, f
    return w


def coupling_matrices(bem_mesh: BoundaryMesh, fem_surface_nodes) -> CouplingMatrices:
    """Interpolation and force-lumping matrices between the contact elements
    of ``bem_mesh`` and an ordered list of finite-element surface nodes lying
    on the same polyline.

    ``r_u`` samples the piecewise-linear finite-element trace at element
    midpoints. ``r_t`` integrates each nodal shape function against the
    constant element tractions; with nodes at the element end points this is
    half the element length to each flanking node.
    """
    pts, arc = _contact_polyline(bem_mesh)
    fem = np.asarray(fem_surface_nodes, dtype=float)
    scale = max(1.0, float(np.max(np.abs(pts))))
    s_nodes = np.array([_arc_coordinate(pts, arc, q, 1e-9 * scale) for q in fem])
    if np.any(np.diff(s_nodes) <= 0):
        raise MeshError("finite-element surface nodes must be ordered along the contact surface")

    m = len(fem)
    ne = len(arc) - 1
    r_u = np.zeros((ne, m))
    r_t = np.zeros((m, ne))
    for e in range(ne):
        s0, s1 = arc[e], arc[e + 1]
        r_u[e] = _hat_values(s_nodes, 0.5 * (s0 + s1))
        brk = np.concatenate([[s0], s_nodes[(s_nodes > s0) & (s_nodes < s1)], [s1]])
        vals = np.array([_hat_values(s_nodes, s) for s in brk])
        r_t[:, e] = np.sum(0.5 * np.diff(brk)[:, None] * (vals[:-1] + vals[1:]), axis=0)
    eye = np.eye(2)
    return CouplingMatrices(np.kron(r_u, eye), np.kron(r_t, eye))


def assemble_khs(ops: BemOperators, coupling: CouplingMatrices) -> HsseMatrix:
    """Dense super-element stiffness ``K = r_t @ D @ r_u``.

    ``D`` maps contact displacements to contact tractions after the
    traction-free elements have been condensed out: ``D = G^-1 H`` for the
    direct flavour and ``D = H G^-1`` for the indirect flavour (natural row
    layout).
    """
    g_bar, h_bar = condense(ops)
    if coupling.r_u.shape[0] != g_bar.shape[0] or coupling.r_t.shape[1] != g_bar.shape[0]:
        raise DomainError(
            f"coupling matrices {coupling.r_u.shape}/{coupling.r_t.shape} do not conform "
            f"to operators of size {g_bar.shape[0]}"
        )
    cond = np.linalg.cond(g_bar)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise FactorizationError("displacement operator is singular", cond)
    if ops.flavor == "Direct":
        dtn = np.linalg.solve(g_bar, h_bar)
    else:
        dtn = np.linalg.solve(g_bar.T, h_bar.T).T
    k = coupling.r_t @ dtn @ coupling.r_u
    return HsseMatrix(k, ops.flavor, ops.omega)


def _unwrap(k):
    if isinstance(k, HsseMatrix):
        return k.k, lambda a: HsseMatrix(a, k.flavor, k.omega)
    return np.asarray(k), lambda a: a


def symmetrize(k):
    """Arithmetic-mean symmetrisation ``(K + K^T) / 2``."""
    a, wrap = _unwrap(k)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("symmetrize needs a square matrix")
    return wrap(0.5 * (a + a.T))


def relative_storage(rhbw: float) -> float:
    """Band storage relative to the full matrix, ``2 rhbw - rhbw**2``."""
    if not 0.0 <= rhbw <= 1.0:
        raise DomainError(f"relative half-bandwidth must lie in [0, 1], got {rhbw}")
    return 2.0 * rhbw - rhbw * rhbw


def measure_rhbw(k) -> float:
    """Widest nonzero off-diagonal distance divided by ``n - 1``."""
    a, _ = _unwrap(k)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise DomainError("measure_rhbw needs a square matrix")
    if n < 2:
        return 0.0
    i, j = np.nonzero(a)
    if i.size == 0:
        return 0.0
    return float(np.max(np.abs(i - j))) / (n - 1)


def _report(a):
    rhbw = measure_rhbw(a)
    return CompressionReport(rhbw, relative_storage(rhbw), int(np.count_nonzero(a)), a.shape[0])


def compress_threshold(k, tau: float):
    """Zero every entry whose modulus is below ``tau`` times the largest
    modulus. Diagonal entries are always kept."""
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"threshold must lie in [0, 1], got {tau}")
    a, wrap = _unwrap(k)
    mod = np.abs(a)
    drop = mod < tau * mod.max(initial=0.0)
    np.fill_diagonal(drop, False)
    out = a.copy()
    out[drop] = 0
    return wrap(out), _report(out)


def half_bandwidth(n: int, rhbw: float) -> int:
    return int(np.floor(rhbw * (n - 1) + 0.5))


def compress_halfband(k, rhbw: float):
    """Zero every entry farther than ``round(rhbw * (n - 1))`` from the diagonal."""
    if not 0.0 <= rhbw <= 1.0:
        raise DomainError(f"relative half-bandwidth must lie in [0, 1], got {rhbw}")
    a, wrap = _unwrap(k)
    n = a.shape[0]
    b = half_bandwidth(n, rhbw)
    i, j = np.indices(a.shape)
    out = np.where(np.abs(i - j) > b, 0, a).astype(a.dtype)
    return wrap(out), _report(out)


def compress(k, spec: CompressionSpec | None):
    if spec is None:
        a, _ = _unwrap(k)
        return k, _report(a)
    if spec.method == "Threshold":
        return compress_threshold(k, spec.value)
    return compress_halfband(k, spec.value)


class BandedMatrix:
    """Row-major band storage: ``data[i, j - i + b]`` holds ``A[i, j]`` for
    ``|i - j| <= b``. Padding slots outside the square are not counted as
    storage words.
    """

    def __init__(self, data, b):
        self.data = np.asarray(data)
        self.b = int(b)
        self.n = self.data.shape[0]
        if self.data.shape[1] != 2 * self.b + 1:
            raise DomainError("band data must have 2b+1 columns")

    @classmethod
    def from_dense(cls, a, b=None):
        a = np.asarray(a)
        n = a.shape[0]
        if b is None:
            i, j = np.nonzero(a)
            b = int(np.max(np.abs(i - j))) if i.size else 0
        i, j = np.indices(a.shape)
        if np.any(a[np.abs(i - j) > b]):
            raise DomainError(f"matrix has entries outside half-bandwidth {b}")
        data = np.zeros((n, 2 * b + 1), dtype=a.dtype)
        for off in range(-b, b + 1):
            rows = np.arange(max(0, -off), min(n, n - off))
            data[rows, off + b] = a[rows, rows + off]
        return cls(data, b)

    @property
    def words(self):
        """Number of in-band entries (complex words) actually stored."""
        n, b = self.n, min(self.b, self.n - 1)
        return n * (2 * b + 1) - b * (b + 1)

    @property
    def relative_words(self):
        return self.words / self.n**2

    def to_dense(self):
        a = np.zeros((self.n, self.n), dtype=self.data.dtype)
        for off in range(-self.b, self.b + 1):
            rows = np.arange(max(0, -off), min(self.n, self.n - off))
            a[rows, rows + off] = self.data[rows, off + self.b]
        return a

    def to_lapack(self):
        """LAPACK general-band layout ``ab[b + i - j, j]`` for ``solve_banded``."""
        ab = np.zeros((2 * self.b + 1, self.n), dtype=self.data.dtype)
        for off in range(-self.b, self.b + 1):
            rows = np.arange(max(0, -off), min(self.n, self.n - off))
            ab[self.b - off, rows + off] = self.data[rows, off + self.b]
        return ab

    def matvec(self, x):
        x = np.asarray(x)
        y = np.zeros(self.n, dtype=np.result_type(self.data, x))
        for off in range(-self.b, self.b + 1):
            rows = np.arange(max(0, -off), min(self.n, self.n - off))
            y[rows] += self.data[rows, off + self.b] * x[rows + off]
        return y

    def solve(self, rhs):
        return solve_banded((self.b, self.b), self.to_lapack(), rhs)
