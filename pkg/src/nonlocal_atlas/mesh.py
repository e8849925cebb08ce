"""Finite-difference discretization of the Dirichlet Laplacian on boxes.

Fields are plain 1-D float arrays holding values at the interior nodes of a
:class:`Mesh` (boundary values are implicitly zero). Two-dimensional fields
are flattened in C order from shape ``(nx, ny)``.

The operator exposed everywhere is the *negative* Laplacian, so the
assembled matrix is symmetric positive definite.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, DomainError, ParameterError

__all__ = [
    "Mesh",
    "EigenPair",
    "build_mesh",
    "apply_laplacian",
    "solve_poisson",
    "principal_eigenpair",
    "integrate",
    "gradient_magnitude",
    "cell_gradient_squared",
    "TOL_EIG",
    "TOL_LIN",
]

TOL_EIG = 1e-10
TOL_LIN = 1e-12
MIN_NODES = 10


def _second_difference(n, h):
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform grid on an interval ``(0, l)`` or a rectangle ``(0, lx) x (0, ly)``.

    Attributes
    ----------
    dim : int
        1 or 2.
    extents : tuple of float
        Side lengths.
    n : tuple of int
        Interior node counts per axis.
    h : tuple of float
        Node spacing per axis, ``extent / (n + 1)``.
    """

    dim: int
    extents: tuple
    n: tuple
    h: tuple
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def shape(self):
        return tuple(self.n)

    @property
    def size(self):
        return int(np.prod(self.n))

    @property
    def measure(self):
        return float(np.prod(self.extents))

    @property
    def hmax(self):
        return max(self.h)

    @cached_property
    def weights(self):
        """Trapezoid weights on the full grid, boundary nodes included."""
        per_axis = []
        for n, h in zip(self.n, self.h):
            w = np.full(n + 2, h)
            w[0] = w[-1] = 0.5 * h
            per_axis.append(w)
        if self.dim == 1:
            return per_axis[0]
        return np.outer(per_axis[0], per_axis[1])

    @cached_property
    def interior_weights(self):
        w = self.weights
        if self.dim == 1:
            return w[1:-1].copy()
        return w[1:-1, 1:-1].ravel()

    @cached_property
    def cell_weight(self):
        return float(np.prod(self.h))

    @cached_property
    def axes(self):
        """Interior node coordinates per axis."""
        return tuple(h * np.arange(1, n + 1) for n, h in zip(self.n, self.h))

    @cached_property
    def coordinates(self):
        """Interior node coordinates, shape ``(size,)`` or ``(size, 2)``."""
        if self.dim == 1:
            return self.axes[0]
        X, Y = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def laplacian(self):
        """Sparse matrix of the discrete negative Laplacian."""
        if self.dim == 1:
            return _second_difference(self.n[0], self.h[0]).tocsc()
        Dx = _second_difference(self.n[0], self.h[0])
        Dy = _second_difference(self.n[1], self.h[1])
        Ix = sp.identity(self.n[0], format="csr")
        Iy = sp.identity(self.n[1], format="csr")
        return (sp.kron(Dx, Iy) + sp.kron(Ix, Dy)).tocsc()

    @cached_property
    def laplacian_norm(self):
        return float(sum(4.0 / h**2 for h in self.h))

    @cached_property
    def _lu(self):
        return splu(self.laplacian)

    def lu_solve(self, rhs):
        # SuperLU handles are not safe to share between threads
        with self._lock:
            return self._lu.solve(rhs)

    @cached_property
    def eigenpair(self):
        """Principal eigenpair with default tolerances, computed once."""
        return principal_eigenpair(self)

    @cached_property
    def torsion(self):
        """Torsion function: the solution of ``-Δv = 1``."""
        return solve_poisson(self, np.ones(self.size))

    def check_field(self, u, name="field"):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise DomainError(
                f"{name} has shape {u.shape}, mesh expects ({self.size},)"
            )
        return u

    def as_grid(self, u):
        """Field values reshaped to the node grid, boundary zeros included."""
        u = self.check_field(u)
        return np.pad(u.reshape(self.shape), 1)

    def metadata(self):
        return {
            "dim": self.dim,
            "extents": list(self.extents),
            "n": list(self.n),
            "h": list(self.h),
        }


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Principal Dirichlet eigenpair with ``max(phi) == 1``."""

    eigenvalue: float
    eigenfunction: np.ndarray
    iterations: int
    residual: float


def build_mesh(dim, extents, n):
    """Build a uniform box mesh.

    Parameters
    ----------
    dim : int
        1 or 2.
    extents : float or sequence of float
        Interval length, or the two rectangle sides.
    n : int or sequence of int
        Interior node count per axis (at least 10).

    Examples
    --------
    >>> m = build_mesh(1, 1.0, 1024)
    >>> m.size, m.h[0] == 1 / 1025
    (1024, True)
    """
    if dim not in (1, 2):
        raise ParameterError(f"dim must be 1 or 2, got {dim}")
    extents = tuple(float(e) for e in np.atleast_1d(extents))
    n = tuple(int(k) for k in np.atleast_1d(n))
    if len(extents) == 1 and dim == 2:
        extents = extents * 2
    if len(n) == 1 and dim == 2:
        n = n * 2
    if len(extents) != dim or len(n) != dim:
        raise ParameterError("extents and node counts must match the dimension")
    if any(not np.isfinite(e) or e <= 0 for e in extents):
        raise ParameterError(f"extents must be positive, got {extents}")
    if any(k < MIN_NODES for k in n):
        raise ParameterError(f"need at least {MIN_NODES} interior nodes per axis, got {n}")
    h = tuple(e / (k + 1) for e, k in zip(extents, n))
    return Mesh(dim=dim, extents=extents, n=n, h=h)


def apply_laplacian(mesh, u):
    """Discrete ``-Δu`` at the interior nodes."""
    return mesh.laplacian @ mesh.check_field(u)


def solve_poisson(mesh, rhs, tol=TOL_LIN):
    """Solve ``-Δu = rhs`` with homogeneous Dirichlet data.

    The solve is a direct sparse LU factorization cached on the mesh. The
    result is accepted when the normwise backward error
    ``|A u - rhs| / (|A| |u| + |rhs|)`` is at most ``tol``.
    """
    rhs = mesh.check_field(rhs, "rhs")
    u = mesh.lu_solve(rhs)
    r = np.max(np.abs(mesh.laplacian @ u - rhs), initial=0.0)
    scale = mesh.laplacian_norm * np.max(np.abs(u), initial=0.0) + np.max(
        np.abs(rhs), initial=0.0
    )
    if r > tol * scale:
        raise ConvergenceError(f"Poisson solve backward error {r / scale:.3e} > {tol:.1e}", 1)
    return u


def principal_eigenpair(mesh, tol=1e-12, tol_eig=TOL_EIG, max_iters=10_000):
    """Smallest eigenvalue of ``-Δ`` and its positive eigenfunction.

    Inverse power iteration with Rayleigh-quotient estimates. Iteration
    stops once successive estimates agree to ``tol`` (relative) and the
    eigen-residual satisfies ``|Aφ - λφ| <= tol_eig * λ`` in backward-error
    form.
    """
    x = np.ones(mesh.size)
    lam_old = np.inf
    A = mesh.laplacian
    for it in range(1, max_iters + 1):
        y = mesh.lu_solve(x)
        y /= np.max(np.abs(y))
        Ay = A @ y
        lam = float(y @ Ay / (y @ y))
        res = np.max(np.abs(Ay - lam * y))
        floor = np.finfo(float).eps * mesh.laplacian_norm
        moved = np.max(np.abs(y - x)) if it > 1 else np.inf
        # the vector converges only linearly (ratio λ₁/λ₂), so check it too
        if abs(lam - lam_old) <= tol * lam and moved <= tol and res <= tol_eig * lam + floor:
            break
        lam_old, x = lam, y
    else:
        raise ConvergenceError(f"inverse power iteration stalled after {max_iters} steps", max_iters)
    if y[np.argmax(np.abs(y))] < 0:
        y = -y
    y = y / np.max(y)
    if np.any(y <= 0):
        raise ConvergenceError("principal eigenfunction is not positive", it)
    return EigenPair(eigenvalue=lam, eigenfunction=y, iterations=it, residual=float(res))


def integrate(mesh, values):
    """Trapezoid quadrature of a nodal field (boundary values zero)."""
    values = mesh.check_field(values)
    return float(mesh.interior_weights @ values)


def gradient_magnitude(mesh, u):
    """Pointwise ``|∇u|`` at interior nodes by central differences.

    Neighbours outside the interior take the zero boundary value.
    """
    g = mesh.as_grid(u)
    if mesh.dim == 1:
        return np.abs(g[2:] - g[:-2]) / (2 * mesh.h[0])
    gx = (g[2:, 1:-1] - g[:-2, 1:-1]) / (2 * mesh.h[0])
    gy = (g[1:-1, 2:] - g[1:-1, :-2]) / (2 * mesh.h[1])
    return np.hypot(gx, gy).ravel()


def cell_gradient_squared(mesh, u):
    """``|∇u|^2`` on grid cells from staggered differences.

    In 1D the cells are the ``n + 1`` grid edges. In 2D each cell averages
    the squared differences along its two x-edges and two y-edges. Summing
    against ``mesh.cell_weight`` reproduces ``u · (-Δu)`` quadrature exactly,
    which is the discrete Dirichlet form.
    """
    g = mesh.as_grid(u)
    if mesh.dim == 1:
        return (np.diff(g) / mesh.h[0]) ** 2
    dx2 = (np.diff(g, axis=0) / mesh.h[0]) ** 2
    dy2 = (np.diff(g, axis=1) / mesh.h[1]) ** 2
    cx = 0.5 * (dx2[:, :-1] + dx2[:, 1:])
    cy = 0.5 * (dy2[:-1, :] + dy2[1:, :])
    return (cx + cy).ravel()
