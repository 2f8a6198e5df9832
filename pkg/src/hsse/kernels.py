"""Frequency-domain plane-strain elastodynamic kernels.

Time dependence is ``exp(+i omega t)`` throughout the package, so outgoing
cylindrical waves are carried by Hankel functions of the second kind.

The displacement Green's tensor of the full plane is written as::

    G_ij(r) = A(r) delta_ij + B(r) rhat_i rhat_j,      r = x - xi

with::

    A = -i / (4 mu) * [H0(ks r) - H1(ks r) / (ks r) + (kp / ks)**2 H1(kp r) / (kp r)]
    B = -i / (4 mu) * [H2(ks r) - (kp / ks)**2 H2(kp r)]

and ``ks = omega / beta``, ``kp = omega / alpha``. Tractions follow from the
isotropic constitutive law applied to the derivatives of ``A`` and ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import hankel2

from .errors import DomainError, SingularEvaluationError

_TWO_D = np.eye(2)


@dataclass(frozen=True)
class Material:
    """Homogeneous isotropic elastic half-space.

    Attributes
    ----------
    rho : float
        Mass density (kg/m^3).
    alpha : float
        P-wave speed (m/s).
    beta : float
        S-wave speed (m/s).
    """

    rho: float = 1.0
    alpha: float = 2.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.rho > 0 and self.beta > 0):
            raise DomainError("density and shear-wave speed must be positive")
        if not self.alpha > self.beta * np.sqrt(2.0):
            raise DomainError(
                f"alpha={self.alpha} must exceed beta*sqrt(2)={self.beta * np.sqrt(2.0):.6g}"
            )

    @property
    def mu(self) -> float:
        return self.rho * self.beta**2

    @property
    def lam(self) -> float:
        return self.rho * (self.alpha**2 - 2.0 * self.beta**2)

    @property
    def poisson(self) -> float:
        return self.lam / (2.0 * (self.lam + self.mu))


@dataclass(frozen=True)
class PlaneWave:
    """Incident plane wave travelling upward toward the free surface ``y = 0``.

    ``angle`` is measured from the vertical in degrees; positive angles
    propagate toward ``+x``. ``amplitude`` is the displacement amplitude.
    """

    kind: str = "SV"
    angle: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("P", "SV"):
            raise DomainError(f"wave kind must be 'P' or 'SV', got {self.kind!r}")
        if not 0.0 <= self.angle < 90.0:
            raise DomainError(f"incidence angle must lie in [0, 90), got {self.angle}")
        if not self.amplitude > 0:
            raise DomainError("amplitude must be positive")


@dataclass(frozen=True)
class KernelTensor:
    """Displacement (``g``) and traction (``h``) kernels for one source/receiver pair."""

    g: np.ndarray
    h: np.ndarray
    omega: float


@dataclass(frozen=True)
class FieldVector:
    """Displacement ``u`` and traction ``t`` (on a given normal) at a point."""

    u: np.ndarray
    t: np.ndarray


def radial_terms(r, omega, mat):
    """Radial factors of the Green's tensor and their derivatives.

    Parameters
    ----------
    r : array_like
        Source-receiver distances, all strictly positive.
    omega : float
        Circular frequency (rad/s), strictly positive.
    mat : Material

    Returns
    -------
    a, da, b, db : ndarray of complex
        ``A(r)``, ``dA/dr``, ``B(r)``, ``dB/dr``.
    """
    r = np.asarray(r, dtype=float)
    ks = omega / mat.beta
    kp = omega / mat.alpha
    ratio2 = (kp / ks) ** 2
    zs = ks * r
    zp = kp * r
    h0s = hankel2(0, zs)
    h1s = hankel2(1, zs)
    h1p = hankel2(1, zp)
    h0p = hankel2(0, zp)
    h2s = 2.0 * h1s / zs - h0s
    h2p = 2.0 * h1p / zp - h0p

    psi = h0s - h1s / zs + ratio2 * h1p / zp
    chi = h2s - ratio2 * h2p
    dpsi = -ks * h1s + chi / r
    dchi = ks * h1s - ratio2 * kp * h1p - 2.0 * chi / r

    c = -0.25j / mat.mu
    return c * psi, c * dpsi, c * chi, c * dchi


def displacement_kernel(dx, dy, omega, mat):
    """Vectorised ``G_ij`` for separation vectors ``(dx, dy) = x - xi``.

    Returns an array of shape ``dx.shape + (2, 2)``.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    r = np.hypot(dx, dy)
    a, _, b, _ = radial_terms(r, omega, mat)
    rh = np.stack([dx / r, dy / r], axis=-1)
    # form rh_i rh_j first so the tensor is bitwise symmetric
    out = b[..., None, None] * (rh[..., :, None] * rh[..., None, :])
    out = out + a[..., None, None] * _TWO_D
    return out


def traction_kernel(dx, dy, nx, ny, omega, mat):
    """Vectorised ``H_ij``: traction component ``i`` on normal ``n`` at ``x``
    due to a unit load in direction ``j`` at ``xi``; ``(dx, dy) = x - xi``.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    r = np.hypot(dx, dy)
    a, da, b, db = radial_terms(r, omega, mat)
    rh = np.stack([dx / r, dy / r], axis=-1)
    n = np.stack(np.broadcast_arrays(np.asarray(nx, float), np.asarray(ny, float)), axis=-1)
    n = np.broadcast_to(n, rh.shape)
    rn = np.sum(rh * n, axis=-1)
    bor = b / r
    lam, mu = mat.lam, mat.mu

    c_rn = mu * (da + bor)
    c_nr = lam * (da + db + bor) + 2.0 * mu * bor
    c_rrr = 2.0 * mu * (db - 2.0 * bor) * rn

    r_n = rh[..., :, None] * n[..., None, :]
    n_r = n[..., :, None] * rh[..., None, :]
    r_r = rh[..., :, None] * rh[..., None, :]
    out = (c_rn * rn)[..., None, None] * _TWO_D
    out = out + c_rn[..., None, None] * r_n
    out = out + c_nr[..., None, None] * n_r
    out = out + c_rrr[..., None, None] * r_r
    return out


def _check_pair(x, xi, omega):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    d = x - xi
    scale = max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(xi))))
    if np.hypot(d[0], d[1]) <= 1e-14 * scale:
        raise SingularEvaluationError(f"coincident source and receiver at {tuple(x)}")
    return d


def greens_u(x, xi, omega, mat):
    """Displacement Green's tensor ``G_ij(x, xi, omega)`` (2x2 complex)."""
    d = _check_pair(x, xi, omega)
    return displacement_kernel(d[0], d[1], omega, mat)


def greens_t(x, xi, n, omega, mat):
    """Traction Green's tensor ``H_ij(x, xi, n)`` on the unit normal ``n`` at ``x``."""
    d = _check_pair(x, xi, omega)
    n = np.asarray(n, dtype=float)
    if abs(np.hypot(n[0], n[1]) - 1.0) > 1e-10:
        raise DomainError(f"normal {tuple(n)} is not a unit vector")
    return traction_kernel(d[0], d[1], n[0], n[1], omega, mat)


def kernel_tensor(x, xi, n, omega, mat):
    return KernelTensor(greens_u(x, xi, omega, mat), greens_t(x, xi, n, omega, mat), omega)


# -- free field -------------------------------------------------------------


def _vertical_slowness(p, c):
    """Vertical slowness of a downgoing wave; evanescent waves decay downward."""
    d = 1.0 / c**2 - p**2
    if d >= 0:
        return complex(np.sqrt(d))
    return -1j * np.sqrt(-d)


def _component_traction(s, pol, mat):
    """Traction on ``n = (0, 1)`` of ``pol * exp(-i w s.x)``, divided by ``-i w``."""
    lam, mu = mat.lam, mat.mu
    div = s[0] * pol[0] + s[1] * pol[1]
    return np.array(
        [mu * (s[1] * pol[0] + s[0] * pol[1]), lam * div + 2.0 * mu * s[1] * pol[1]]
    )


def free_field_components(wave, mat):
    """Plane-wave decomposition of the flat half-space free field.

    Returns
    -------
    list of (amplitude, polarization, slowness)
        The incident wave followed by the reflected P and SV waves, such that
        ``u(x) = sum(a * pol * exp(-1j * omega * slowness @ x))``. Reflection
        amplitudes are frequency independent. Beyond the critical angle the
        reflected P slowness is complex with decay into the half-space.
    """
    th = np.radians(wave.angle)
    c_inc = mat.alpha if wave.kind == "P" else mat.beta
    s_inc = np.array([np.sin(th), np.cos(th)], dtype=complex) / c_inc
    if wave.kind == "P":
        pol_inc = np.array([np.sin(th), np.cos(th)], dtype=complex)
    else:
        pol_inc = np.array([np.cos(th), -np.sin(th)], dtype=complex)
    p = np.sin(th) / c_inc

    qp = _vertical_slowness(p, mat.alpha)
    qs = _vertical_slowness(p, mat.beta)
    s_rp = np.array([p, -qp], dtype=complex)
    s_rs = np.array([p, -qs], dtype=complex)
    pol_rp = mat.alpha * s_rp
    pol_rs = mat.beta * np.array([qs, p], dtype=complex)

    lhs = np.column_stack(
        [_component_traction(s_rp, pol_rp, mat), _component_traction(s_rs, pol_rs, mat)]
    )
    rhs = -wave.amplitude * _component_traction(s_inc, pol_inc, mat)
    r_p, r_s = np.linalg.solve(lhs, rhs)
    return [
        (complex(wave.amplitude), pol_inc, s_inc),
        (complex(r_p), pol_rp, s_rp),
        (complex(r_s), pol_rs, s_rs),
    ]


def free_field_many(points, omega, wave, mat, normals=None):
    """Vectorised free field at ``points`` of shape ``(m, 2)``.

    Returns displacements ``(m, 2)`` and tractions ``(m, 2)`` on ``normals``
    (default ``(0, 1)``).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    scale = max(1.0, float(np.max(np.abs(pts))))
    if np.any(pts[:, 1] > 1e-12 * scale):
        raise DomainError("free field is defined only in the half-space y <= 0")
    if omega < 0:
        raise DomainError(f"omega must be non-negative, got {omega}")
    if normals is None:
        normals = np.tile([0.0, 1.0], (len(pts), 1))
    normals = np.broadcast_to(np.asarray(normals, dtype=float), pts.shape)

    u = np.zeros(pts.shape, dtype=complex)
    t = np.zeros(pts.shape, dtype=complex)
    if omega == 0:
        for amp, pol, _ in free_field_components(wave, mat):
            u += amp * pol
        return u, t

    lam, mu = mat.lam, mat.mu
    for amp, pol, s in free_field_components(wave, mat):
        phase = amp * np.exp(-1j * omega * (pts @ s))
        u += phase[:, None] * pol
        div = s @ pol
        # sigma_ij / (-i w phase) = lam div delta_ij + mu (s_j pol_i + s_i pol_j)
        sig = lam * div * _TWO_D + mu * (np.outer(pol, s) + np.outer(s, pol))
        t += (-1j * omega * phase)[:, None] * (normals @ sig.T)
    return u, t


def free_field(x, omega, wave, mat, normal=(0.0, 1.0)):
    """Total free field (incident plus reflected) at one point.

    At ``omega == 0`` the static limit is returned: a uniform translation by
    the zero-frequency superposition of the incident and reflected waves,
    with zero traction.
    """
    u, t = free_field_many(np.asarray(x, dtype=float)[None, :], omega, wave, mat,
                           np.asarray(normal, dtype=float)[None, :])
    return FieldVector(u[0], t[0])
