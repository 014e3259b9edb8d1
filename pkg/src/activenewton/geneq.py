"""Generalized equations ``0 in F(u) + Psi(u)``.

Convex sets with projections, the operator parts ``Psi`` with their
resolvents, the forward-backward map and the graph restoration built on
it, plus the residual and gap functions used to monitor variational
inequalities.

Constraint indices are 0-based.  Every inequality is written ``g_i <= 0``
and the manifold of an active set uses ``h_i = g_i``, so multipliers of
``-F`` over active gradients are the usual nonnegative KKT multipliers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import nnls

from .errors import (
    DimensionMismatch,
    InfeasiblePoint,
    NoConvergence,
    PreconditionViolated,
    RankDeficient,
    Unsupported,
)
from .geometry import (
    Manifold,
    SmoothScalarFn,
    affine,
    constraint_values,
    project_to_manifold,
    sphere,
)
from .varcalc import multiplier_from_normal

__all__ = [
    "Box",
    "Orthant",
    "Ball",
    "Polyhedron",
    "SmoothIneq",
    "Zero",
    "NormalCone",
    "NormalSpace",
    "ScaledL1",
    "KnownSolution",
    "GenEqProblem",
    "project_convex",
    "constraint_functions",
    "active_set",
    "manifold_from_active",
    "resolvent",
    "in_operator",
    "forward_backward",
    "restore_to_graph",
    "natural_residual",
    "regularized_gap",
    "d_gap",
    "nondegeneracy_check",
    "active_multipliers",
    "set_to_dict",
    "set_from_dict",
]


# ---------------------------------------------------------------- convex sets


@dataclass(frozen=True)
class Box:
    """``lower <= x <= upper``.  Index ``i`` is the lower bound on ``x_i``,
    index ``n + i`` the upper bound."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("box bounds must be vectors of equal length")
        if np.any(lo > hi):
            raise PreconditionViolated("box requires lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size


@dataclass(frozen=True)
class Orthant:
    """The nonnegative orthant; index ``i`` is the constraint ``-x_i <= 0``."""

    n: int

    @property
    def dim(self):
        return self.n


@dataclass(frozen=True)
class Ball:
    """``|x - center|^2 - radius^2 <= 0``; its single index is 0."""

    center: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=float))
        if not self.radius > 0:
            raise PreconditionViolated("ball radius must be positive")

    @property
    def dim(self):
        return self.center.size


@dataclass(frozen=True)
class Polyhedron:
    """``A x <= b``; row ``i`` is index ``i``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise DimensionMismatch("polyhedron rows and right-hand side disagree")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class SmoothIneq:
    """``g_i(x) <= 0`` for smooth ``g_i``.

    Projection is an active-set search over local manifold projections; it
    is only trusted when the caller declares the region ``convex``.
    """

    n: int
    g: tuple
    convex: bool = True

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))

    @property
    def dim(self):
        return self.n


def constraint_functions(K) -> list[SmoothScalarFn]:
    """The inequality functions ``g_i`` describing ``K``, in index order."""
    if isinstance(K, Orthant):
        return [affine(-np.eye(K.n)[i], 0.0, name=f"-x[{i}]") for i in range(K.n)]
    if isinstance(K, Box):
        n = K.dim
        E = np.eye(n)
        lows = [affine(-E[i], -K.lower[i], name=f"x[{i}]>={K.lower[i]}") for i in range(n)]
        highs = [affine(E[i], K.upper[i], name=f"x[{i}]<={K.upper[i]}") for i in range(n)]
        return lows + highs
    if isinstance(K, Ball):
        return [sphere(K.center, K.radius)]
    if isinstance(K, Polyhedron):
        return [affine(a, bi, name=f"row{i}") for i, (a, bi) in enumerate(zip(K.A, K.b))]
    if isinstance(K, SmoothIneq):
        return list(K.g)
    raise TypeError(f"unknown convex set {K!r}")


def _check_dim(K, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (K.dim,):
        raise DimensionMismatch(f"expected a point in R^{K.dim}, got shape {x.shape}")
    return x


def contains(K, x, tol=1e-10) -> bool:
    x = _check_dim(K, x)
    g = np.array([gi.value(x) for gi in constraint_functions(K)])
    if isinstance(K, Ball):
        return bool(np.linalg.norm(x - K.center) <= K.radius + tol)
    return bool(g.size == 0 or g.max() <= tol)


def _project_polyhedron(K: Polyhedron, x):
    A, b = K.A, K.b
    rows = A.shape[0]
    if np.all(A @ x <= b):
        return x.copy()
    scale = 1.0 + np.abs(b).max(initial=0.0) + np.abs(A).max(initial=0.0) * np.abs(x).max()
    feas = 1e-10 * scale
    for size in range(1, min(rows, K.dim) + 1):
        for idx in itertools.combinations(range(rows), size):
            Ai = A[list(idx)]
            G = Ai @ Ai.T
            if np.linalg.matrix_rank(G) < size:
                continue
            mu = np.linalg.solve(G, Ai @ x - b[list(idx)])
            if np.any(mu < -feas):
                continue
            p = x - Ai.T @ mu
            if np.all(A @ p <= b + feas):
                return p
    raise Unsupported("no KKT point found while projecting onto polyhedron")


def _project_smooth(K: SmoothIneq, x):
    if not K.convex:
        raise Unsupported("projection onto a nonconvex smooth set is only local")
    g = constraint_functions(K)
    if all(gi.value(x) <= 0.0 for gi in g):
        return x.copy()
    for size in range(1, min(len(g), K.n) + 1):
        for idx in itertools.combinations(range(len(g)), size):
            M = Manifold(K.n, [g[i] for i in idx])
            try:
                p = project_to_manifold(M, x)
                mult = multiplier_from_normal(M, p, x - p)
            except (RankDeficient, NoConvergence):
                continue
            if np.any(mult.lambda_ < -1e-10) or mult.residual_norm > 1e-8 * (1 + np.linalg.norm(x)):
                continue
            if all(gi.value(p) <= 1e-10 for gi in g):
                return p
    raise Unsupported("no KKT point found while projecting onto smooth set")


def project_convex(K, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``K``."""
    x = _check_dim(K, x)
    if isinstance(K, Orthant):
        return np.maximum(x, 0.0)
    if isinstance(K, Box):
        return np.clip(x, K.lower, K.upper)
    if isinstance(K, Ball):
        d = x - K.center
        r = np.linalg.norm(d)
        return x.copy() if r <= K.radius else K.center + (K.radius / r) * d
    if isinstance(K, Polyhedron):
        return _project_polyhedron(K, x)
    if isinstance(K, SmoothIneq):
        return _project_smooth(K, x)
    raise TypeError(f"unknown convex set {K!r}")


def active_set(K, y, tol=1e-6) -> frozenset:
    """Indices of the constraints of ``K`` holding with equality at ``y``."""
    y = _check_dim(K, y)
    if isinstance(K, Orthant):
        return frozenset(int(i) for i in np.flatnonzero(np.abs(y) <= tol))
    if isinstance(K, Box):
        n = K.dim
        lo = np.flatnonzero(np.abs(y - K.lower) <= tol)
        hi = np.flatnonzero(np.abs(y - K.upper) <= tol)
        return frozenset([int(i) for i in lo] + [int(n + i) for i in hi])
    if isinstance(K, Ball):
        on = abs(np.linalg.norm(y - K.center) - K.radius) <= tol
        return frozenset({0}) if on else frozenset()
    g = constraint_functions(K)
    return frozenset(i for i, gi in enumerate(g) if abs(gi.value(y)) <= tol)


def manifold_from_active(K, I) -> Manifold:
    """Manifold ``{g_i = 0, i in I}`` for an index set of ``K``."""
    g = constraint_functions(K)
    return Manifold(K.dim, [g[i] for i in sorted(I)])


def active_multipliers(K, I, x, v):
    """Least-squares multipliers of ``v`` over the active gradients at ``x``.

    Returns ``(mu, residual)``.  Raises RankDeficient when the active
    gradients are linearly dependent.
    """
    M = manifold_from_active(K, I)
    res = multiplier_from_normal(M, x, v)
    return res.lambda_, res.residual_norm


def nondegeneracy_check(K, F_value, ubar, tol=1e-8, active=None, activity_tol=1e-6) -> bool:
    """Strict complementarity at ``ubar``: ``-F(ubar)`` is a strictly positive
    combination of the active constraint gradients.

    ``active`` overrides the index set detected at ``ubar``.
    """
    ubar = _check_dim(K, ubar)
    I = active_set(K, ubar, activity_tol) if active is None else frozenset(active)
    if not I:
        return True
    mu, _ = active_multipliers(K, I, ubar, -np.asarray(F_value(ubar), dtype=float))
    return bool(np.all(mu >= tol))


# ------------------------------------------------------------- operator parts


@dataclass(frozen=True)
class Zero:
    """``Psi = 0``: the generalized equation is ``F(u) = 0``."""


@dataclass(frozen=True)
class NormalCone:
    K: object


@dataclass(frozen=True)
class NormalSpace:
    M: Manifold


@dataclass(frozen=True)
class ScaledL1:
    """Subdifferential of ``gamma * |u|_1``."""

    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise PreconditionViolated("L1 weight must be positive")


@dataclass(frozen=True)
class KnownSolution:
    u: np.ndarray
    multipliers: Optional[np.ndarray] = None


@dataclass(frozen=True)
class GenEqProblem:
    """``0 in F(u) + psi(u)`` with ``F`` given by value and Jacobian."""

    F_value: Callable[[np.ndarray], np.ndarray]
    F_jacobian: Callable[[np.ndarray], np.ndarray]
    psi: object = field(default_factory=Zero)
    dim: int = 1
    known_solution: Optional[KnownSolution] = None
    name: str = ""

    def F(self, u) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.F_value(np.asarray(u, dtype=float)), dtype=float))

    def DF(self, u) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.F_jacobian(np.asarray(u, dtype=float)), dtype=float))


def resolvent(psi, step, x) -> np.ndarray:
    """``(I + step * psi)^{-1}(x)``."""
    if not step > 0:
        raise PreconditionViolated("resolvent step must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(psi, Zero):
        return x.copy()
    if isinstance(psi, NormalCone):
        return project_convex(psi.K, x)
    if isinstance(psi, NormalSpace):
        return project_to_manifold(psi.M, x)
    if isinstance(psi, ScaledL1):
        t = step * psi.gamma
        return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    raise TypeError(f"unknown operator part {psi!r}")


def in_operator(psi, r, v, tol=1e-10) -> bool:
    """Check ``v in psi(r)`` with slack ``tol * (1 + |v|)``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    slack = tol * (1.0 + np.linalg.norm(v))
    if isinstance(psi, Zero):
        return bool(np.linalg.norm(v) <= slack)
    if isinstance(psi, ScaledL1):
        g = psi.gamma
        nz = r != 0.0
        ok_nz = np.abs(v[nz] - g * np.sign(r[nz])) <= slack
        ok_z = np.abs(v[~nz]) <= g + slack
        return bool(ok_nz.all() and ok_z.all())
    if isinstance(psi, NormalSpace):
        M = psi.M
        if M.codim and np.abs(constraint_values(M, r)).max() > 1e-10:
            return False
        return multiplier_from_normal(M, r, v).residual_norm <= slack
    if isinstance(psi, NormalCone):
        K = psi.K
        if not contains(K, r, 1e-10):
            return False
        I = sorted(active_set(K, r, 1e-10))
        if not I:
            return bool(np.linalg.norm(v) <= slack)
        g = constraint_functions(K)
        G = np.column_stack([g[i].gradient(r) for i in I])
        _, resid = nnls(G, v)
        return bool(resid <= slack)
    raise TypeError(f"unknown operator part {psi!r}")


def forward_backward(problem: GenEqProblem, step, u) -> np.ndarray:
    """``(I + step*psi)^{-1}(u - step*F(u))``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return resolvent(problem.psi, step, u - step * problem.F(u))


def restore_to_graph(problem: GenEqProblem, step, u):
    """Map ``u`` to a pair ``(u+, v+)`` on the graph of ``F + psi``.

    ``u+`` is the forward-backward point and
    ``v+ = (u - u+)/step - F(u) + F(u+)``, so ``v+ - F(u+)`` lies in
    ``psi(u+)``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    up = forward_backward(problem, step, u)
    vp = (u - up) / step - problem.F(u) + problem.F(up)
    return up, vp


def natural_residual(problem: GenEqProblem, a, u) -> float:
    """``|u - Q(u)|`` with forward-backward step ``1/a``."""
    if not a > 0:
        raise PreconditionViolated("a must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return float(np.linalg.norm(u - forward_backward(problem, 1.0 / a, u)))


def _theta(problem, a, u):
    Fu = problem.F(u)
    y = forward_backward(problem, 1.0 / a, u)
    d = u - y
    return float(Fu @ d - 0.5 * a * (d @ d))


def _cone_set(problem):
    if not isinstance(problem.psi, NormalCone):
        raise Unsupported("gap functions need a normal-cone operator part")
    return problem.psi.K


def regularized_gap(problem: GenEqProblem, a, u, tol=1e-10) -> float:
    """``sup_{y in K} <F(u), u - y> - (a/2)|u - y|^2`` for ``u`` in ``K``.

    The supremum is attained at ``Proj_K(u - F(u)/a)``.
    """
    K = _cone_set(problem)
    if not a > 0:
        raise PreconditionViolated("a must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not contains(K, u, tol):
        raise InfeasiblePoint("regularized gap needs a feasible point")
    return _theta(problem, a, u)


def d_gap(problem: GenEqProblem, a=1.0, b=0.5, u=None) -> float:
    """Difference of regularized gaps, oriented to be nonnegative.

    With ``0 < b < a`` the gap with the smaller parameter dominates, so the
    value returned is ``theta_b(u) - theta_a(u) >= 0``; it vanishes exactly
    at solutions and needs no feasibility of ``u``.
    """
    _cone_set(problem)
    if not 0 < b < a:
        raise PreconditionViolated("D-gap requires 0 < b < a")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return _theta(problem, b, u) - _theta(problem, a, u)


# ------------------------------------------------------------ serialization


def set_to_dict(K) -> dict:
    if isinstance(K, Orthant):
        return {"type": "orthant", "n": K.n}
    if isinstance(K, Box):
        return {"type": "box", "lower": K.lower.tolist(), "upper": K.upper.tolist()}
    if isinstance(K, Ball):
        return {"type": "ball", "center": K.center.tolist(), "radius": float(K.radius)}
    if isinstance(K, Polyhedron):
        return {"type": "polyhedron", "A": K.A.tolist(), "b": K.b.tolist()}
    raise Unsupported(f"no JSON encoding for {type(K).__name__}")


def set_from_dict(d: dict):
    kind = d.get("type")
    if kind == "orthant":
        return Orthant(int(d["n"]))
    if kind == "box":
        return Box(d["lower"], d["upper"])
    if kind == "ball":
        return Ball(d["center"], float(d.get("radius", 1.0)))
    if kind == "polyhedron":
        return Polyhedron(d["A"], d["b"])
    raise ValueError(f"unknown convex set type {kind!r}")
