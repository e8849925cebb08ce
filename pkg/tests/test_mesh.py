import math
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_atlas import build_mesh, integrate, principal_eigenpair, solve_poisson
from nonlocal_atlas.errors import ParameterError
from nonlocal_atlas.mesh import apply_laplacian, cell_gradient_squared

from oracles import fd_eigenvalue_1d, torsion_square_centre


def test_build_rejects_bad_input():
    with pytest.raises(ParameterError):
        build_mesh(3, 1.0, 64)
    with pytest.raises(ParameterError):
        build_mesh(1, -1.0, 64)
    with pytest.raises(ParameterError):
        build_mesh(1, 1.0, 4)


def test_metadata_shape():
    m = build_mesh(2, (1.0, 2.0), (16, 20))
    meta = m.metadata()
    assert meta["dim"] == 2 and list(meta["n"]) == [16, 20]
    assert m.size == 320
    assert meta["h"][1] == pytest.approx(2.0 / 21)


def test_eigenvalue_matches_discrete_formula(mesh):
    eig = principal_eigenpair(mesh)
    assert eig.eigenvalue == pytest.approx(fd_eigenvalue_1d(1024), rel=1e-12)
    x = mesh.coordinates.ravel()
    ref = np.sin(math.pi * x)
    assert np.max(np.abs(eig.eigenfunction - ref / ref.max())) < 1e-10
    assert np.all(eig.eigenfunction > 0) and eig.eigenfunction.max() == 1.0


def test_torsion_1d_exact_at_nodes(mesh):
    # the 3-point stencil is exact on quadratics
    x = mesh.coordinates.ravel()
    v = solve_poisson(mesh, np.ones(mesh.size))
    assert np.max(np.abs(v - x * (1 - x) / 2)) < 1e-12


def test_torsion_square_centre():
    m = build_mesh(2, 1.0, 63)
    v = solve_poisson(m, np.ones(m.size))
    assert v.max() == pytest.approx(torsion_square_centre(), rel=1e-3)


def test_integrate_and_dirichlet_form(mesh):
    x = mesh.coordinates.ravel()
    u = np.sin(math.pi * x)
    assert integrate(mesh, u) == pytest.approx(2 / math.pi, rel=1e-6)
    # staggered gradients reproduce the discrete form uᵀAu exactly
    form = mesh.cell_weight * cell_gradient_squared(mesh, u).sum()
    assert form == pytest.approx(float(u @ (mesh.laplacian @ u)) * mesh.h[0], rel=1e-12)


@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0))
def test_poincare_inequality(c1, c2):
    m = build_mesh(1, 1.0, 128)
    x = m.coordinates.ravel()
    u = c1 * x * (1 - x) + c2 * np.sin(3 * math.pi * x) ** 2
    lam1 = m.eigenpair.eigenvalue
    grad = m.cell_weight * cell_gradient_squared(m, u).sum()
    assert grad >= lam1 * integrate(m, u**2) * (1 - 1e-12)


@given(st.integers(0, 2**31 - 1))
def test_poisson_maximum_principle(seed):
    m = build_mesh(1, 1.0, 64)
    rhs = np.random.default_rng(seed).uniform(0.0, 1.0, m.size)
    u = solve_poisson(m, rhs)
    assert np.all(u >= 0)
    assert np.max(np.abs(apply_laplacian(m, u) - rhs)) < 1e-9


def test_shared_factorization_is_thread_safe(mesh):
    rhs = [np.random.default_rng(k).uniform(size=mesh.size) for k in range(8)]
    serial = [solve_poisson(mesh, r) for r in rhs]
    out = [None] * 8

    def work(k):
        out[k] = solve_poisson(mesh, rhs[k])

    threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for a, b in zip(serial, out):
        np.testing.assert_array_equal(a, b)
