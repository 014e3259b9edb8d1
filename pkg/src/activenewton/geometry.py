"""Manifolds cut out by smooth equations.

A manifold is stored as a tuple of scalar constraints ``h_i(x) = 0``.
Everything here is a pure function of the manifold and the query point;
tangent and normal bases come from an SVD of the constraint Jacobian, so
their orientation is arbitrary and callers must not rely on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NoConvergence, RankDeficient

__all__ = [
    "SmoothScalarFn",
    "Manifold",
    "affine",
    "quadratic",
    "sphere",
    "coordinate",
    "constraint_values",
    "constraint_jacobian",
    "tangent_basis",
    "normal_basis",
    "split_bases",
    "project_to_manifold",
    "licq_margin",
    "RANK_RTOL",
]

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class SmoothScalarFn:
    """A C2 scalar function with its gradient and Hessian."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    name: str = ""


def affine(a, b=0.0, name=""):
    """``h(x) = <a, x> - b``."""
    a = np.array(a, dtype=float)
    b = float(b)
    n = a.size
    zeros = np.zeros((n, n))
    return SmoothScalarFn(
        value=lambda x: float(a @ x - b),
        gradient=lambda x: a.copy(),
        hessian=lambda x: zeros.copy(),
        name=name or f"affine({a.tolist()}, {b})",
    )


def quadratic(A, b=None, c=0.0, name=""):
    """``h(x) = 0.5 x'Ax + <b, x> + c`` with ``A`` symmetrized."""
    A = np.array(A, dtype=float)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    b = np.zeros(n) if b is None else np.array(b, dtype=float)
    c = float(c)
    return SmoothScalarFn(
        value=lambda x: float(0.5 * x @ A @ x + b @ x + c),
        gradient=lambda x: A @ x + b,
        hessian=lambda x: A.copy(),
        name=name or "quadratic",
    )


def sphere(center, radius=1.0, name=""):
    """``h(x) = |x - center|^2 - radius^2``; the circle when ``n == 2``."""
    center = np.array(center, dtype=float)
    n = center.size
    r2 = float(radius) ** 2
    two_eye = 2.0 * np.eye(n)
    return SmoothScalarFn(
        value=lambda x: float((x - center) @ (x - center) - r2),
        gradient=lambda x: 2.0 * (x - center),
        hessian=lambda x: two_eye.copy(),
        name=name or f"sphere({center.tolist()}, {radius})",
    )


def coordinate(i, n, value=0.0, sign=1.0):
    """``h(x) = sign * (x_i - value)``, an axis-aligned hyperplane."""
    a = np.zeros(n)
    a[i] = sign
    return affine(a, sign * value, name=f"{'-' if sign < 0 else ''}x[{i}]={value}")


@dataclass(frozen=True)
class Manifold:
    """The set ``{x in R^n : h_i(x) = 0 for all i}``.

    ``constraints`` may be empty, in which case the manifold is all of R^n.
    """

    ambient_dim: int
    constraints: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.ambient_dim < 1:
            raise DimensionMismatch("ambient_dim must be positive")
        if len(self.constraints) > self.ambient_dim:
            raise DimensionMismatch(
                f"{len(self.constraints)} constraints exceed ambient dimension "
                f"{self.ambient_dim}"
            )

    @property
    def codim(self) -> int:
        return len(self.constraints)

    @property
    def dim(self) -> int:
        return self.ambient_dim - len(self.constraints)


def _point(M: Manifold, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != M.ambient_dim:
        raise DimensionMismatch(
            f"expected a point in R^{M.ambient_dim}, got shape {x.shape}"
        )
    return x


def constraint_values(M: Manifold, x) -> np.ndarray:
    x = _point(M, x)
    return np.array([h.value(x) for h in M.constraints], dtype=float)


def constraint_jacobian(M: Manifold, x) -> np.ndarray:
    """Rows are the constraint gradients at ``x``; shape ``(m, n)``."""
    x = _point(M, x)
    if not M.constraints:
        return np.zeros((0, M.ambient_dim))
    return np.vstack([np.asarray(h.gradient(x), dtype=float) for h in M.constraints])


def split_bases(M: Manifold, x, rtol=RANK_RTOL):
    """Orthonormal ``(tangent, normal)`` bases at ``x``.

    Raises RankDeficient when the smallest singular value of the Jacobian
    falls below ``rtol`` times the largest.
    """
    J = constraint_jacobian(M, x)
    n, m = M.ambient_dim, M.codim
    if m == 0:
        return np.eye(n), np.zeros((n, 0))
    _, s, Vt = np.linalg.svd(J, full_matrices=True)
    if s[0] == 0.0 or s[-1] < rtol * s[0]:
        raise RankDeficient(
            f"constraint Jacobian has singular values {s.tolist()} (LICQ fails)"
        )
    return Vt[m:].T.copy(), Vt[:m].T.copy()


def tangent_basis(M: Manifold, x, rtol=RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the null space of the constraint Jacobian."""
    return split_bases(M, x, rtol)[0]


def normal_basis(M: Manifold, x, rtol=RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the row space of the constraint Jacobian."""
    return split_bases(M, x, rtol)[1]


def licq_margin(M: Manifold, x) -> float:
    """Smallest singular value of the Jacobian, ``inf`` when ``m == 0``."""
    if M.codim == 0:
        return float("inf")
    J = constraint_jacobian(M, x)
    return float(np.linalg.svd(J, compute_uv=False)[-1])


def _stationarity(M, y, x0, rtol):
    T = tangent_basis(M, y, rtol)
    return np.abs(T.T @ (y - x0)).max(initial=0.0)


def project_to_manifold(M: Manifold, x0, tol=1e-12, max_iter=50, rtol=RANK_RTOL):
    """Nearest point of ``M`` to ``x0``, assuming ``x0`` is close to ``M``.

    Newton's method on the optimality system

        y - x0 - J(y)' mu = 0,   h(y) = 0

    in ``(y, mu)`` started from ``(x0, 0)``.  When the Newton matrix is
    singular a Gauss-Newton feasibility step ``y -= J'(JJ')^{-1} h`` is taken
    instead.  Converged when every ``|h_i(y)|`` and the tangential part of
    ``y - x0`` are at most ``tol``.
    """
    x0 = _point(M, x0)
    n, m = M.ambient_dim, M.codim
    if m == 0:
        return x0.copy()
    y = x0.copy()
    mu = np.zeros(m)
    for _ in range(max_iter + 1):
        h = constraint_values(M, y)
        J = constraint_jacobian(M, y)
        if np.abs(h).max() <= tol and _stationarity(M, y, x0, rtol) <= tol:
            return y
        r = y - x0 - J.T @ mu
        H = sum(mi * c.hessian(y) for mi, c in zip(mu, M.constraints))
        K = np.block([[np.eye(n) - H, -J.T], [J, np.zeros((m, m))]])
        try:
            step = np.linalg.solve(K, -np.concatenate([r, h]))
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
            y = y + step[:n]
            mu = mu + step[n:]
        except np.linalg.LinAlgError:
            split_bases(M, y, rtol)  # raises RankDeficient if LICQ fails here
            y = y - J.T @ np.linalg.solve(J @ J.T, h)
            mu = np.linalg.lstsq(J.T, y - x0, rcond=None)[0]
    raise NoConvergence(
        f"projection onto manifold did not converge in {max_iter} iterations"
    )
