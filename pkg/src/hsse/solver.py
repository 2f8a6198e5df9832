"""Coupled FEM/super-element solution of canyon scattering, transfer
functions, Ricker synthesis and compression error metrics."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bem import (Box, Geometry, BoundaryMesh, assemble_operators, build_contact_mesh,
                  build_surface_mesh, recover_free_surface)
from .errors import DomainError, FactorizationError, SynthesisError
from .fem import FemMesh, assemble_global, mesh_canyon_domain
from .kernels import Material, PlaneWave, free_field_many
from .superelement import (CompressionReport, CompressionSpec, HsseMatrix,
                           assemble_khs, compress, coupling_matrices, symmetrize)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run one canyon/incidence case.

    ``geometry.truncation`` is measured in multiples of ``L`` from the origin.
    ``box`` defaults to half-width ``2L`` and depth ``2.5L`` (1.5L below the
    deepest canyon point); ``fem_h`` defaults to ``geometry.elem_size``.
    ``mass`` is passed to :func:`hsse.fem.assemble_global`.
    """

    geometry: Geometry = field(default_factory=Geometry)
    material: Material = field(default_factory=Material)
    wave: PlaneWave = field(default_factory=PlaneWave)
    etas: tuple = (1.0,)
    compression: CompressionSpec | None = None
    flavor: str = "Direct"
    box: Box | None = None
    fem_h: float | None = None
    symmetrize: bool = True
    receiver_span: float = 3.0
    mass: str = "blended"

    def __post_init__(self):
        etas = np.asarray(self.etas, dtype=float)
        if etas.ndim != 1 or etas.size == 0:
            raise DomainError("etas must be a non-empty sequence")
        if np.any(etas < 0) or np.any(np.diff(etas) <= 0):
            raise DomainError("etas must be non-negative and strictly increasing")
        object.__setattr__(self, "etas", tuple(float(e) for e in etas))
        if self.flavor not in ("Direct", "Indirect"):
            raise DomainError(f"unknown flavor {self.flavor!r}")

    @property
    def L(self):
        return self.geometry.L


@dataclass(frozen=True)
class SurfaceResponse:
    """Total surface displacement at the receivers, divided by the incident
    amplitude. ``u`` has shape ``(n_receivers, 2)``."""

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    free: np.ndarray
    eta: float
    report: CompressionReport | None = None

    @property
    def scattered(self):
        return self.u - self.free


@dataclass(frozen=True)
class TransferFunction:
    """Per-frequency surface response; ``ux``/``uy`` are ``(n_eta, n_receivers)``."""

    x_over_L: np.ndarray
    etas: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    omegas: np.ndarray


@dataclass(frozen=True)
class RickerPulse:
    """``r(t) = (1 - 2a^2) exp(-a^2)``, ``a = pi (t - t_s) / t_p``."""

    t_p: float
    t_s: float

    def __post_init__(self):
        if not self.t_p > 0:
            raise DomainError("t_p must be positive")
        if self.t_s < 3.0 * self.t_p - 1e-12:
            raise DomainError("t_s must be at least 3 t_p")

    @classmethod
    def for_eta(cls, eta_peak, L, beta):
        """Pulse whose spectral peak sits at dimensionless frequency ``eta_peak``."""
        t_p = 2.0 * L / (beta * eta_peak)
        return cls(t_p, 3.0 * t_p)


@dataclass(frozen=True)
class Seismogram:
    """``traces`` has shape ``(n_receivers, n_t, 2)`` (ux, uy)."""

    dt: float
    x_over_L: np.ndarray
    traces: np.ndarray

    @property
    def time(self):
        return self.dt * np.arange(self.traces.shape[1])


def eta_to_omega(eta, L, beta):
    """``omega = eta * pi * beta / L``."""
    if np.any(np.asarray(eta) < 0):
        raise DomainError("eta must be non-negative")
    return eta * np.pi * beta / L


def effective_load(k_hs, u0_S, f0_S):
    """Surface right-hand side ``-f0 + K_HS u0``.

    ``f0_S`` are the free-field tractions on the boundary-element normals
    (pointing into the finite-element box) lumped to nodal forces.
    """
    k = k_hs.k if isinstance(k_hs, HsseMatrix) else np.asarray(k_hs)
    u0_S = np.asarray(u0_S)
    f0_S = np.asarray(f0_S)
    if k.shape[1] != u0_S.shape[0] or k.shape[0] != f0_S.shape[0]:
        raise DomainError(f"load vectors {u0_S.shape}/{f0_S.shape} do not conform to {k.shape}")
    return -f0_S + k @ u0_S


class CanyonModel:
    """Frequency-independent parts of a scenario: meshes, coupling matrices
    and finite-element matrices. Safe to share between threads."""

    def __init__(self, scenario: Scenario):
        self.scenario = sc = scenario
        g = sc.geometry
        box = sc.box or Box(2.0 * g.L, 2.5 * g.L)
        self.fem: FemMesh = mesh_canyon_domain(g, box, sc.fem_h or g.elem_size)
        self.box = self.fem.box
        self.bem: BoundaryMesh = build_contact_mesh(self.box, self.fem.h, g.truncation * g.L)
        self.coupling = coupling_matrices(self.bem, self.fem.nodes[self.fem.surface_nodes])
        self.k_fem, self.m_fem = assemble_global(self.fem, sc.material, sc.mass)
        self._receivers()

    def _receivers(self):
        sc = self.scenario
        L = sc.L
        span = sc.receiver_span * L
        # finite-element surface nodes; one node per abscissa (the topmost)
        fs = self.fem.free_surface_nodes
        xy = self.fem.nodes[fs]
        order = np.lexsort((-xy[:, 1], np.round(xy[:, 0] / (1e-9 * L))))
        keep = []
        last = None
        for i in order:
            key = round(xy[i, 0] / (1e-9 * L))
            if key != last:
                keep.append(i)
                last = key
        fem_nodes = fs[keep]
        fem_nodes = fem_nodes[np.abs(self.fem.nodes[fem_nodes, 0]) <= span * (1 + 1e-12)]
        free_el = np.nonzero(~self.bem.contact)[0]
        mid = self.bem.midpoints[free_el]
        # graded corner elements are skipped so receivers keep a uniform spacing
        length = self.bem.lengths[free_el]
        sel = ((np.abs(mid[:, 0]) > self.box.half_width) & (np.abs(mid[:, 0]) <= span)
               & (length >= (1 - 1e-9) * length.max()))
        self.rec_fem = fem_nodes
        self.rec_bem = np.nonzero(sel)[0]  # position within the free elements
        pts = np.vstack([self.fem.nodes[fem_nodes], mid[sel]])
        self.rec_order = np.argsort(pts[:, 0], kind="stable")
        self.rec_points = pts[self.rec_order]

    @cached_property
    def _perm(self):
        """Permutation ``[interior dofs, surface dofs]`` of the global system."""
        return np.concatenate([self.fem.interior_dofs, self.fem.surface_dofs])

    def hsse(self, omega, flavor=None):
        """Super-element stiffness at ``omega`` (symmetrised if the scenario asks)
        together with the boundary-element operators it came from."""
        sc = self.scenario
        ops = assemble_operators(self.bem, omega, sc.material, flavor or sc.flavor)
        khs = assemble_khs(ops, self.coupling)
        if sc.symmetrize:
            khs = symmetrize(khs)
        return khs, ops

    def solve(self, omega, khs, ops, wave=None):
        """Total and free-field surface response for a (possibly compressed)
        super-element, both divided by the incident amplitude."""
        return self.solve_many(omega, khs, ops, [wave or self.scenario.wave])[0]

    def solve_many(self, omega, khs, ops, waves):
        """Like :meth:`solve` for several incident waves sharing one
        factorisation of the coupled system."""
        mat = self.scenario.material
        fem = self.fem
        s_dofs = fem.surface_dofs
        n = fem.n_dofs
        dyn = (self.k_fem - omega**2 * self.m_fem).astype(complex)
        k = khs.k
        rows, cols = np.nonzero(k)
        add = sp.coo_matrix((k[rows, cols], (s_dofs[rows], s_dofs[cols])), shape=(n, n))
        try:
            lu = spla.splu((dyn + add).tocsc())
        except RuntimeError as exc:
            raise FactorizationError(f"coupled system is singular: {exc}") from exc

        s_nodes = fem.nodes[fem.surface_nodes]
        cidx = np.nonzero(self.bem.contact)[0]
        free_el = np.nonzero(~self.bem.contact)[0]
        mids = self.bem.midpoints[free_el[self.rec_bem]]
        out = []
        for wave in waves:
            u0_nodes, _ = free_field_many(s_nodes, omega, wave, mat)
            u0_S = u0_nodes.ravel()
            _, t0 = free_field_many(self.bem.midpoints[cidx], omega, wave, mat,
                                    self.bem.normals[cidx])
            f0_S = self.coupling.r_t @ t0.ravel()
            rhs = np.zeros(n, dtype=complex)
            rhs[s_dofs] = effective_load(khs, u0_S, f0_S)
            u = lu.solve(rhs)
            if not np.all(np.isfinite(u)):
                raise FactorizationError("coupled system solution is not finite")
            u = u.reshape(-1, 2)

            us_contact = self.coupling.r_u @ (u[fem.surface_nodes].ravel() - u0_S)
            us_free = recover_free_surface(ops, us_contact).reshape(-1, 2)
            u0_bem, _ = free_field_many(mids, omega, wave, mat)
            u0_fem, _ = free_field_many(fem.nodes[self.rec_fem], omega, wave, mat)
            total = np.vstack([u[self.rec_fem], us_free[self.rec_bem] + u0_bem])
            free = np.vstack([u0_fem, u0_bem])
            out.append((total[self.rec_order] / wave.amplitude,
                        free[self.rec_order] / wave.amplitude))
        return out

    def static_response(self, wave=None):
        wave = wave or self.scenario.wave
        u0, _ = free_field_many(self.rec_points, 0.0, wave, self.scenario.material)
        return u0 / wave.amplitude


def solve_frequency(scenario: Scenario, eta: float, model: CanyonModel | None = None,
                    wave: PlaneWave | None = None) -> SurfaceResponse:
    """Total surface displacement at one dimensionless frequency."""
    return solve_frequency_many(scenario, eta, [wave or scenario.wave], model)[0]


def solve_frequency_many(scenario: Scenario, eta: float, waves, model: CanyonModel | None = None):
    """:func:`solve_frequency` for several incident waves; the super-element
    and the coupled factorisation are computed once."""
    model = model or CanyonModel(scenario)
    pts = model.rec_points
    L = scenario.L
    omega = eta_to_omega(eta, L, scenario.material.beta)
    x, y = pts[:, 0] / L, pts[:, 1] / L
    if omega == 0:
        res = []
        for wave in waves:
            u0 = model.static_response(wave)
            res.append(SurfaceResponse(x, y, u0, u0, eta))
        return res
    khs, ops = model.hsse(omega)
    khs, report = compress(khs, scenario.compression)
    return [SurfaceResponse(x, y, total, free, eta, report)
            for total, free in model.solve_many(omega, khs, ops, waves)]


def _sweep(scenario, model, waves, threads):
    def one(eta):
        return solve_frequency_many(scenario, eta, waves, model)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, scenario.etas))
    return [one(e) for e in scenario.etas]


def _collect(scenario, res):
    etas = np.array(scenario.etas)
    return TransferFunction(
        res[0].x,
        etas,
        np.array([r.u[:, 0] for r in res]),
        np.array([r.u[:, 1] for r in res]),
        eta_to_omega(etas, scenario.L, scenario.material.beta),
    )


def transfer_function(scenario: Scenario, model: CanyonModel | None = None,
                      threads: int = 1) -> TransferFunction:
    """``solve_frequency`` mapped over the scenario's frequency grid.

    Frequencies run concurrently when ``threads > 1``; results are collected
    in grid order, so the output does not depend on the thread count.
    """
    return transfer_functions(scenario, [scenario.wave], model, threads)[0]


def transfer_functions(scenario: Scenario, waves, model: CanyonModel | None = None,
                       threads: int = 1):
    """One :class:`TransferFunction` per incident wave in ``waves``."""
    model = model or CanyonModel(scenario)
    res = _sweep(scenario, model, list(waves), threads)
    return [_collect(scenario, [r[i] for r in res]) for i in range(len(waves))]


def ricker_time(t, pulse: RickerPulse):
    a2 = (np.pi * (np.asarray(t, dtype=float) - pulse.t_s) / pulse.t_p) ** 2
    return (1.0 - 2.0 * a2) * np.exp(-a2)


def ricker_spectrum(omega, pulse: RickerPulse):
    """Fourier transform ``int r(t) exp(-i omega t) dt`` of the pulse."""
    omega = np.asarray(omega, dtype=float)
    c = np.pi / pulse.t_p
    return (np.sqrt(np.pi) / c) * (omega**2 / (2 * c * c)) * np.exp(
        -(omega**2) / (4 * c * c)) * np.exp(-1j * omega * pulse.t_s)


def synthesize_seismograms(tf: TransferFunction, pulse: RickerPulse) -> Seismogram:
    """Time histories for a Ricker-pulse incident wave.

    The frequency grid must be uniform and start at zero. The spectrum is
    zero-padded to a power-of-two length and inverted with a real FFT, which
    imposes conjugate symmetry.
    """
    w = np.asarray(tf.omegas, dtype=float)
    if w.size < 2 or w[0] != 0.0:
        raise SynthesisError("frequency grid must start at zero and hold at least two samples")
    dw = np.diff(w)
    if not np.allclose(dw, dw[0], rtol=1e-9, atol=0.0):
        raise SynthesisError("frequency grid must be uniform")
    dw = dw[0]
    nt = 1 << int(np.ceil(np.log2(2 * (w.size - 1))))
    dt = 2.0 * np.pi / (dw * nt)
    spec = ricker_spectrum(w, pulse)
    traces = np.zeros((len(tf.x_over_L), nt, 2))
    for c, comp in enumerate((tf.ux, tf.uy)):
        x = np.zeros((len(tf.x_over_L), nt // 2 + 1), dtype=complex)
        x[:, :w.size] = (comp * spec[:, None]).T
        x[:, 0] = x[:, 0].real
        x[:, -1] = x[:, -1].real
        traces[:, :, c] = np.fft.irfft(x, n=nt, axis=1) / dt
    return Seismogram(dt, np.asarray(tf.x_over_L), traces)


def relative_error(u, u_ref):
    """``||u - u_ref||_2 / ||u_ref||_2``."""
    u = np.asarray(u).ravel()
    u_ref = np.asarray(u_ref).ravel()
    if u.shape != u_ref.shape:
        raise DomainError(f"length mismatch {u.shape} vs {u_ref.shape}")
    ref = np.linalg.norm(u_ref)
    if ref == 0:
        raise DomainError("reference vector is zero")
    return float(np.linalg.norm(u - u_ref) / ref)


def component_errors(u, u_ref):
    """Relative error of the horizontal and vertical components and of both
    pooled together, for ``(n, 2)`` response arrays."""
    u = np.asarray(u)
    u_ref = np.asarray(u_ref)
    return (relative_error(u[:, 0], u_ref[:, 0]), relative_error(u[:, 1], u_ref[:, 1]),
            relative_error(u, u_ref))


def bem_surface_response(geometry: Geometry, omega, mat: Material, wave: PlaneWave):
    """Pure boundary-element solution of the canyon problem (no finite
    elements): the scattered traction cancels the free-field traction on the
    canyon surface. Returns element midpoints and total displacements, both
    ``(N, 2)``, divided by the incident amplitude. Used as an independent
    cross-check of the coupled model."""
    mesh = build_surface_mesh(geometry)
    ops = assemble_operators(mesh, omega, mat, "Direct")
    _, t0 = free_field_many(mesh.midpoints, omega, wave, mat, mesh.normals)
    # outward normal of the solid is mesh.normals; zero total traction
    us = np.linalg.solve(ops.h, ops.g @ (-t0.ravel()))
    u0, _ = free_field_many(mesh.midpoints, omega, wave, mat)
    return mesh.midpoints, (us.reshape(-1, 2) + u0) / wave.amplitude
