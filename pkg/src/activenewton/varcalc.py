"""Second-order calculus for the normal-space map of a manifold.

For ``M = {h = 0}`` with linearly independent constraint gradients, a pair
``(w, z)`` is tangent to the graph of ``N_M`` at ``(u, v)`` exactly when

    w lies in T_M(u)   and   z - H w lies in N_M(u),

where ``H = sum_i lambda_i * hess h_i(u)`` and ``lambda`` represents ``v``
in the normal space.  The same condition decides membership in the
coderivative, so graphical derivative and coderivative coincide.  Both
tests are exposed separately so that equality can be checked directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, PreconditionViolated
from .geometry import (
    RANK_RTOL,
    Manifold,
    constraint_jacobian,
    constraint_values,
    split_bases,
)

__all__ = [
    "MultiplierResult",
    "multiplier_from_normal",
    "weighted_hessian",
    "graph_tangent_member",
    "graph_normal_member",
    "transversality_margin",
    "kkt_margin",
]


@dataclass(frozen=True)
class MultiplierResult:
    lambda_: np.ndarray
    residual_norm: float


def multiplier_from_normal(M: Manifold, x, v, rtol=RANK_RTOL) -> MultiplierResult:
    """Least-squares multipliers of ``v`` over the constraint gradients.

    Returns the (minimum-norm) minimizer of ``|v - J(x)' lambda|`` and the
    attained residual.  Raises RankDeficient if LICQ fails at ``x``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (M.ambient_dim,):
        raise DimensionMismatch(f"normal vector has shape {v.shape}")
    if M.codim == 0:
        return MultiplierResult(np.zeros(0), float(np.linalg.norm(v)))
    split_bases(M, x, rtol)
    J = constraint_jacobian(M, x)
    lam = np.linalg.lstsq(J.T, v, rcond=None)[0]
    return MultiplierResult(lam, float(np.linalg.norm(v - J.T @ lam)))


def weighted_hessian(M: Manifold, x, lam) -> np.ndarray:
    """``sum_i lam_i * hess h_i(x)``, symmetrized."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != M.codim:
        raise DimensionMismatch(
            f"expected {M.codim} multipliers, got {lam.size}"
        )
    x = np.asarray(x, dtype=float)
    H = np.zeros((M.ambient_dim, M.ambient_dim))
    for li, h in zip(lam, M.constraints):
        if li != 0.0:
            H += li * np.asarray(h.hessian(x), dtype=float)
    return 0.5 * (H + H.T)


def _check_base_pair(M, u, v, tol):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.codim and np.abs(constraint_values(M, u)).max() > tol:
        raise PreconditionViolated("u is not on the manifold")
    mult = multiplier_from_normal(M, u, v)
    if mult.residual_norm > tol * (1.0 + np.linalg.norm(v)):
        raise PreconditionViolated(
            f"v is not normal at u (residual {mult.residual_norm:.3e})"
        )
    return u, mult.lambda_


def _tangent_condition(M, u, v, w, z, tol, basis):
    u, lam = _check_base_pair(M, u, v, tol)
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    J = constraint_jacobian(M, u)
    nw = np.linalg.norm(w)
    if np.linalg.norm(J @ w) > tol * (1.0 + nw):
        return False
    H = weighted_hessian(M, u, lam)
    B = split_bases(M, u)[0] if basis is None else np.asarray(basis, dtype=float)
    slack = tol * (1.0 + np.linalg.norm(z) + np.linalg.norm(H, 2) * nw)
    return bool(np.linalg.norm(B.T @ (z - H @ w)) <= slack)


def graph_tangent_member(M: Manifold, u, v, w, z, tol=1e-8, basis=None) -> bool:
    """Decide whether ``(w, z)`` is tangent to gph N_M at ``(u, v)``.

    ``basis`` optionally replaces the tangent basis at ``u`` (any
    orthonormal basis of T_M(u) gives the same answer).
    """
    return _tangent_condition(M, u, v, w, z, tol, basis)


def graph_normal_member(M: Manifold, u, v, z, w, tol=1e-8, basis=None) -> bool:
    """Decide whether ``z`` belongs to the coderivative of N_M at ``(u|v)``
    applied to ``w``.

    For manifold normal maps the coderivative equals the graphical
    derivative, so the decision rule is the tangent condition above.
    """
    return _tangent_condition(M, u, v, w, z, tol, basis)


def transversality_margin(M: Manifold, F_jacobian_at, u, lam, basis=None) -> float:
    """Smallest singular value of the reduced matrix ``B' DL(u) B``.

    ``DL = DF(u) + weighted_hessian(M, u, lam)`` and ``B`` is an orthonormal
    tangent basis at ``u``.  A positive value certifies transversality of
    ``F + N_M`` at ``u``.
    """
    u = np.asarray(u, dtype=float)
    B = split_bases(M, u)[0] if basis is None else np.asarray(basis, dtype=float)
    if B.shape[1] == 0:
        return float("inf")
    DL = np.atleast_2d(np.asarray(F_jacobian_at(u), dtype=float)) + weighted_hessian(
        M, u, lam
    )
    return float(np.linalg.svd(B.T @ DL @ B, compute_uv=False)[-1])


def kkt_margin(M: Manifold, F_jacobian_at, u, lam) -> float:
    """Smallest singular value of the full KKT matrix ``[[DL, J'], [J, 0]]``."""
    u = np.asarray(u, dtype=float)
    m = M.codim
    J = constraint_jacobian(M, u)
    DL = np.atleast_2d(np.asarray(F_jacobian_at(u), dtype=float)) + weighted_hessian(
        M, u, lam
    )
    K = np.block([[DL, J.T], [J, np.zeros((m, m))]])
    return float(np.linalg.svd(K, compute_uv=False)[-1])
