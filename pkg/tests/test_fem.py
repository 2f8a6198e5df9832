"""Bilinear quad elements, meshes and global assembly."""

import numpy as np
import pytest
import sympy as sy

from hsse.bem import Box, Geometry, contact_contour
from hsse.errors import AssemblyError, DomainError, MeshError
from hsse.fem import (assemble_global, assemble_partitioned, body_force_load, element_matrices,
                      mesh_canyon_domain)
from hsse.kernels import Material

MAT = Material()


def _symbolic_element(a, b):
    """Exact plane-strain stiffness and mass of an ``a`` by ``b`` rectangle."""
    x, y = sy.symbols("x y")
    lam, mu, rho = sy.nsimplify(MAT.lam), sy.nsimplify(MAT.mu), sy.nsimplify(MAT.rho)
    n = [(1 - x / a) * (1 - y / b), x / a * (1 - y / b), x / a * y / b, (1 - x / a) * y / b]
    bmat = sy.zeros(3, 8)
    for k, nk in enumerate(n):
        bmat[0, 2 * k] = sy.diff(nk, x)
        bmat[1, 2 * k + 1] = sy.diff(nk, y)
        bmat[2, 2 * k] = sy.diff(nk, y)
        bmat[2, 2 * k + 1] = sy.diff(nk, x)
    d = sy.Matrix([[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0], [0, 0, mu]])
    ke = (bmat.T * d * bmat).applyfunc(lambda e: sy.integrate(e, (x, 0, a), (y, 0, b)))
    nmat = sy.zeros(2, 8)
    for k, nk in enumerate(n):
        nmat[0, 2 * k] = nk
        nmat[1, 2 * k + 1] = nk
    me = (rho * nmat.T * nmat).applyfunc(lambda e: sy.integrate(e, (x, 0, a), (y, 0, b)))
    return np.array(ke, dtype=float), np.array(me, dtype=float)


@pytest.mark.parametrize("a, b", [(1, 1), (sy.Rational(1, 2), sy.Rational(3, 4))])
def test_element_matrices_match_exact_integration(a, b):
    ke_ref, me_ref = _symbolic_element(a, b)
    fa, fb = float(a), float(b)
    coords = np.array([[[0, 0], [fa, 0], [fa, fb], [0, fb]]], dtype=float)
    ke, me = element_matrices(coords, MAT)
    np.testing.assert_allclose(ke[0], ke_ref, rtol=1e-12, atol=1e-12 * np.abs(ke_ref).max())
    np.testing.assert_allclose(me[0], me_ref, rtol=1e-12, atol=1e-12 * np.abs(me_ref).max())


def test_element_stiffness_has_three_rigid_modes():
    coords = np.array([[[0.1, -0.2], [1.3, 0.0], [1.1, 0.9], [-0.1, 0.7]]])
    ke, _ = element_matrices(coords, MAT)
    x = coords[0]
    modes = [np.tile([1.0, 0.0], 4), np.tile([0.0, 1.0], 4),
             np.column_stack([-x[:, 1], x[:, 0]]).ravel()]
    for v in modes:
        assert np.abs(ke[0] @ v).max() < 1e-12 * np.abs(ke[0]).max()
    eig = np.linalg.eigvalsh(ke[0])
    assert np.sum(eig < 1e-10 * eig.max()) == 3


def test_inverted_element_rejected():
    coords = np.array([[[0, 0], [0, 1], [1, 1], [1, 0]]], dtype=float)
    with pytest.raises(AssemblyError):
        element_matrices(coords, MAT)


@pytest.mark.parametrize("kind", ["flat", "semicircular", "rectangular"])
def test_patch_test_linear_field(kind):
    """A linear displacement field is an exact static solution, so the
    stiffness residual vanishes at every node not on the mesh boundary."""
    mesh = mesh_canyon_domain(Geometry(kind, 1.0, 7.0, 0.125))
    k, _ = assemble_global(mesh, MAT)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    u = np.column_stack([0.3 + 0.2 * x - 0.7 * y, -0.1 + 0.5 * x + 0.4 * y]).ravel()
    r = (k @ u).reshape(-1, 2)
    boundary = np.zeros(len(mesh.nodes), bool)
    boundary[mesh.surface_nodes] = True
    boundary[mesh.free_surface_nodes] = True
    assert np.abs(r[~boundary]).max() < 1e-10 * np.abs(k).max()


@pytest.mark.parametrize("kind", ["flat", "semicircular", "rectangular"])
@pytest.mark.parametrize("mass", ["consistent", "lumped", "blended"])
def test_mass_total_equals_density_times_area(kind, mass):
    mesh = mesh_canyon_domain(Geometry(kind, 1.0, 7.0, 0.125))
    _, m = assemble_global(mesh, MAT, mass=mass)
    ones_x = np.tile([1.0, 0.0], len(mesh.nodes))
    assert np.isclose(ones_x @ (m @ ones_x), MAT.rho * mesh.area, rtol=1e-12)
    if mass == "lumped":
        assert m.nnz == mesh.n_dofs


def test_mesh_areas():
    box = Box(2.0, 2.5)
    flat = mesh_canyon_domain(Geometry("flat", 1.0, 7.0, 0.125), box)
    assert np.isclose(flat.area, 4.0 * 2.5)
    rect = mesh_canyon_domain(Geometry("rectangular", 1.0, 7.0, 0.125), box)
    assert np.isclose(rect.area, 10.0 - 2.0)
    semi = mesh_canyon_domain(Geometry("semicircular", 1.0, 7.0, 0.0625), box)
    # chords under-fill the half disc by O(h^2)
    assert abs(semi.area - (10.0 - np.pi / 2)) < 5e-3


@pytest.mark.parametrize("kind", ["flat", "semicircular", "rectangular"])
def test_surface_nodes_follow_the_contact_contour(kind):
    mesh = mesh_canyon_domain(Geometry(kind, 1.0, 7.0, 0.125))
    ref = contact_contour(mesh.box, mesh.h)
    np.testing.assert_allclose(mesh.nodes[mesh.surface_nodes], ref, atol=1e-12)
    free = mesh.nodes[mesh.free_surface_nodes]
    assert np.allclose(free[0], [-mesh.box.half_width, 0]) and np.allclose(free[-1], [mesh.box.half_width, 0])
    steps = np.hypot(*np.diff(free, axis=0).T)
    assert steps.max() < 1.0001 * mesh.h * (np.pi / 2 if kind == "semicircular" else 1.0)


def test_spacing_snaps_to_the_canyon():
    mesh = mesh_canyon_domain(Geometry("rectangular", 1.0, 7.0, 0.125), h=0.12)
    assert np.isclose(mesh.h, 1 / 9)


def test_mesh_errors():
    with pytest.raises(MeshError):
        mesh_canyon_domain(Geometry("flat", 1.0, 7.0, 0.125), h=0.5)
    with pytest.raises(MeshError):
        mesh_canyon_domain(Geometry("rectangular", 1.0, 7.0, 0.125), Box(1.5, 2.5))
    with pytest.raises(DomainError):
        assemble_global(mesh_canyon_domain(Geometry("flat", 1.0, 7.0, 0.125)), MAT, mass="diagonal")
    with pytest.raises(DomainError):
        assemble_partitioned(mesh_canyon_domain(Geometry("flat", 1.0, 7.0, 0.125)), -1.0, MAT)


def test_partition_blocks_reassemble_the_dynamic_matrix():
    mesh = mesh_canyon_domain(Geometry("rectangular", 1.0, 7.0, 0.125))
    omega = 1.7
    part = assemble_partitioned(mesh, omega, MAT)
    k, m = assemble_global(mesh, MAT)
    full = (k - omega**2 * m).toarray()
    i, s = mesh.interior_dofs, mesh.surface_dofs
    np.testing.assert_allclose(part.k_II.toarray(), full[np.ix_(i, i)])
    np.testing.assert_allclose(part.k_IS.toarray(), full[np.ix_(i, s)])
    np.testing.assert_allclose(part.k_SS.toarray(), full[np.ix_(s, s)])
    assert i.size + s.size == mesh.n_dofs


def test_body_force_load_totals():
    mesh = mesh_canyon_domain(Geometry("semicircular", 1.0, 7.0, 0.125))
    f = body_force_load(mesh, lambda x, y: (np.full_like(x, 2.0), 3.0 * x))
    fx, fy = f[0::2].sum(), f[1::2].sum()
    assert np.isclose(fx, 2.0 * mesh.area)
    # the mesh is symmetric about x = 0 so the first moment vanishes
    assert abs(fy) < 1e-10
