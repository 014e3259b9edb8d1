"""Test problems with known solutions and brute-force oracles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import Degenerate, PreconditionViolated, ResampleLimit
from .geneq import (
    Ball,
    Box,
    GenEqProblem,
    KnownSolution,
    NormalCone,
    NormalSpace,
    Orthant,
    Zero,
    active_multipliers,
    active_set,
)
from .geometry import Manifold, affine, coordinate, sphere

__all__ = [
    "KINDS",
    "ProblemSpec",
    "build",
    "default_start",
    "lcp_bruteforce",
    "box_vi_bruteforce",
    "random_orthant_vi",
    "builtin",
    "spec_to_dict",
    "spec_from_dict",
]

KINDS = (
    "disk-nlp",
    "sphere-vi",
    "orthant-vi",
    "box-vi",
    "scalar-root",
    "subspace-newton",
    "singular-demo",
)


@dataclass(frozen=True)
class ProblemSpec:
    """A named problem instance.

    ``params`` holds the kind-specific parameters (plain lists and floats so
    the instance round-trips through JSON); ``start`` optionally overrides the
    default starting point.
    """

    kind: str
    params: dict = field(default_factory=dict)
    name: str = ""
    seed: Optional[int] = None
    start: Optional[tuple] = None


# ------------------------------------------------------------------ oracles


def lcp_bruteforce(A, b, tol=1e-10):
    """Solve ``u >= 0, Au + b >= 0, u'(Au + b) = 0`` by enumerating all
    ``2^n`` zero patterns of ``u``.

    Raises Degenerate when no pattern, or more than one, yields a solution.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = b.size
    if n > 10:
        raise PreconditionViolated("brute force is limited to n <= 10")
    found = []
    for mask in itertools.product((False, True), repeat=n):
        J = np.flatnonzero(mask)  # free components
        u = np.zeros(n)
        if J.size:
            try:
                u[J] = np.linalg.solve(A[np.ix_(J, J)], -b[J])
            except np.linalg.LinAlgError as exc:
                raise Degenerate(f"singular principal submatrix on {J.tolist()}") from exc
        w = A @ u + b
        I = np.flatnonzero(~np.array(mask))
        if np.all(u >= -tol) and np.all(w[I] >= -tol):
            found.append(u)
    if len(found) != 1:
        raise Degenerate(f"{len(found)} complementary solutions found")
    return found[0]


def box_vi_bruteforce(lower, upper, A, b, tol=1e-10):
    """Solve VI(box, Au + b) by enumerating the ``3^n`` lower/upper/free
    patterns."""
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = b.size
    if n > 8:
        raise PreconditionViolated("brute force is limited to n <= 8")
    found = []
    for pattern in itertools.product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        u = np.where(pattern == 0, lo, hi)
        J = np.flatnonzero(pattern == 2)
        if J.size:
            fixed = np.flatnonzero(pattern != 2)
            rhs = -b[J] - A[np.ix_(J, fixed)] @ u[fixed]
            try:
                u[J] = np.linalg.solve(A[np.ix_(J, J)], rhs)
            except np.linalg.LinAlgError as exc:
                raise Degenerate(f"singular principal submatrix on {J.tolist()}") from exc
        w = A @ u + b
        ok = (
            np.all(u >= lo - tol)
            and np.all(u <= hi + tol)
            and np.all(w[pattern == 0] >= -tol)
            and np.all(w[pattern == 1] <= tol)
        )
        if ok:
            found.append(u)
    if len(found) != 1:
        raise Degenerate(f"{len(found)} box-VI solutions found")
    return found[0]


def _lcp_nondegenerate(A, b, u, margin):
    w = A @ u + b
    free = u > margin
    return bool(np.all(free | (u <= 0.0)) and np.all(w[~free] >= margin) and np.all(u[free] >= margin))


def random_orthant_vi(n, seed, margin=1e-3, max_resample=100) -> ProblemSpec:
    """Random strictly complementary VI on the orthant with SPD matrix.

    ``A = G'G + I`` and ``b`` have standard normal entries drawn from
    ``numpy.random.default_rng(seed)``; draws are rejected until the
    oracle solution has active multipliers and inactive components at
    least ``margin``.
    """
    if not 1 <= n <= 6:
        raise PreconditionViolated("random instances are limited to 1 <= n <= 6")
    rng = np.random.default_rng(seed)
    for _ in range(max_resample):
        G = rng.standard_normal((n, n))
        A = G.T @ G + np.eye(n)
        b = rng.standard_normal(n)
        try:
            u = lcp_bruteforce(A, b)
        except Degenerate:
            continue
        if _lcp_nondegenerate(A, b, u, margin):
            return ProblemSpec(
                "orthant-vi",
                {"A": A.tolist(), "b": b.tolist()},
                name=f"random-orthant-vi-n{n}-s{seed}",
                seed=seed,
            )
    raise ResampleLimit(f"no nondegenerate instance in {max_resample} draws")


# ------------------------------------------------------------------ builders


def _vec(params, key, default):
    return np.asarray(params.get(key, default), dtype=float).reshape(-1)


def _disk_nlp(p):
    c = _vec(p, "c", [3.0, 4.0])
    nc = np.linalg.norm(c)
    if nc == 0:
        raise PreconditionViolated("disk NLP needs c != 0")
    n = c.size
    return GenEqProblem(
        F_value=lambda u: -c,
        F_jacobian=lambda u: np.zeros((n, n)),
        psi=NormalCone(Ball(np.zeros(n), 1.0)),
        dim=n,
        known_solution=KnownSolution(c / nc, np.array([nc / 2.0])),
    )


def _sphere_vi(p):
    target = _vec(p, "p", [0.0, 0.0, 2.0])
    r = np.linalg.norm(target)
    if not r > 1:
        raise PreconditionViolated("sphere VI needs |p| > 1")
    n = target.size
    return GenEqProblem(
        F_value=lambda u: u - target,
        F_jacobian=lambda u: np.eye(n),
        psi=NormalSpace(Manifold(n, [sphere(np.zeros(n), 1.0)])),
        dim=n,
        known_solution=KnownSolution(target / r, np.array([(r - 1.0) / 2.0])),
    )


def _affine_known(K, F, u):
    I = active_set(K, u, 1e-9)
    lam, _ = active_multipliers(K, I, u, -F(u))
    return KnownSolution(u, lam)


def _orthant_vi(p):
    A = np.atleast_2d(np.asarray(p.get("A", np.eye(2)), dtype=float))
    b = _vec(p, "b", [-1.0, 1.0])
    n = b.size
    u = lcp_bruteforce(A, b)
    K = Orthant(n)
    F = lambda v: A @ v + b
    return GenEqProblem(
        F_value=F,
        F_jacobian=lambda v: A,
        psi=NormalCone(K),
        dim=n,
        known_solution=_affine_known(K, F, u),
    )


def _box_vi(p):
    A = np.atleast_2d(np.asarray(p.get("A", np.eye(2)), dtype=float))
    b = _vec(p, "b", [-2.0, 0.5])
    n = b.size
    lo = _vec(p, "lower", np.zeros(n))
    hi = _vec(p, "upper", np.ones(n))
    u = box_vi_bruteforce(lo, hi, A, b)
    K = Box(lo, hi)
    F = lambda v: A @ v + b
    return GenEqProblem(
        F_value=F,
        F_jacobian=lambda v: A,
        psi=NormalCone(K),
        dim=n,
        known_solution=_affine_known(K, F, u),
    )


def _scalar_root(p):
    t = float(p.get("target", 2.0))
    if not t > 0:
        raise PreconditionViolated("scalar root needs target > 0")
    return GenEqProblem(
        F_value=lambda u: u * u - t,
        F_jacobian=lambda u: np.diag(2.0 * u),
        psi=Zero(),
        dim=1,
        known_solution=KnownSolution(np.array([np.sqrt(t)]), np.zeros(0)),
    )


def _subspace_newton(p):
    # F(u) = u + u^3 - (s + s^3) + q with s in L and q orthogonal to L,
    # so s solves F(u) in -N_L(u), u in L.
    basis = np.atleast_2d(np.asarray(p.get("basis", [[1, 0], [0, 1], [0, 0]]), dtype=float))
    n, k = basis.shape
    Q, _ = np.linalg.qr(basis)
    coords = _vec(p, "coords", [1.0, 2.0][:k] + [0.0] * max(0, k - 2))
    load = _vec(p, "load", [0.0, 0.0, 7.0][:n] + [0.0] * max(0, n - 3))
    s = basis @ coords
    q = load - Q @ (Q.T @ load)
    normals = np.linalg.svd(Q, full_matrices=True)[0][:, k:]
    M = Manifold(n, [affine(nrm, 0.0, name=f"normal{i}") for i, nrm in enumerate(normals.T)])
    shift = s + s**3 - q
    lam = -normals.T @ q
    return GenEqProblem(
        F_value=lambda u: u + u**3 - shift,
        F_jacobian=lambda u: np.diag(1.0 + 3.0 * u**2),
        psi=NormalSpace(M),
        dim=n,
        known_solution=KnownSolution(s, lam),
    )


def _singular_demo(p):
    # F vanishes along the plane x3 = 0; every point of the plane solves,
    # so the reduced Jacobian is zero and transversality fails.
    n = 3
    M = Manifold(n, [coordinate(2, n)])
    e3 = np.array([0.0, 0.0, 1.0])
    return GenEqProblem(
        F_value=lambda u: e3.copy(),
        F_jacobian=lambda u: np.zeros((n, n)),
        psi=NormalSpace(M),
        dim=n,
        known_solution=KnownSolution(np.zeros(n), np.array([-1.0])),
    )


_BUILDERS = {
    "disk-nlp": _disk_nlp,
    "sphere-vi": _sphere_vi,
    "orthant-vi": _orthant_vi,
    "box-vi": _box_vi,
    "scalar-root": _scalar_root,
    "subspace-newton": _subspace_newton,
    "singular-demo": _singular_demo,
}


def build(spec: ProblemSpec) -> GenEqProblem:
    """Construct the generalized equation described by ``spec``."""
    try:
        builder = _BUILDERS[spec.kind]
    except KeyError:
        raise PreconditionViolated(f"unknown problem kind {spec.kind!r}") from None
    params = dict(spec.params)
    if spec.kind == "orthant-vi" and "A" not in params and "n" in params:
        params = dict(random_orthant_vi(int(params["n"]), spec.seed).params)
    problem = builder(params)
    return GenEqProblem(
        problem.F_value,
        problem.F_jacobian,
        problem.psi,
        problem.dim,
        problem.known_solution,
        name=spec.name or spec.kind,
    )


def default_start(spec: ProblemSpec) -> np.ndarray:
    if spec.start is not None:
        return np.asarray(spec.start, dtype=float)
    if spec.kind == "scalar-root":
        return np.array([1.5])
    if spec.kind == "sphere-vi":
        return np.array([np.sin(0.3), 0.0, np.cos(0.3)])
    if spec.kind == "subspace-newton":
        return np.array([1.3, 1.7, 0.2])
    if spec.kind == "singular-demo":
        return np.array([0.5, -0.3, 0.4])
    return np.zeros(build(spec).dim)


def builtin(name: str) -> ProblemSpec:
    """Built-in instances addressable by name from the command line."""
    table = {
        "disk-nlp": ProblemSpec("disk-nlp", {"c": [3.0, 4.0]}, name="disk-nlp"),
        "sphere-vi": ProblemSpec("sphere-vi", {"p": [0.0, 0.0, 2.0]}, name="sphere-vi"),
        "orthant-vi": ProblemSpec(
            "orthant-vi", {"A": [[1.0, 0.0], [0.0, 1.0]], "b": [-1.0, 1.0]}, name="orthant-vi"
        ),
        "box-vi": ProblemSpec("box-vi", {}, name="box-vi"),
        "scalar-root": ProblemSpec("scalar-root", {"target": 2.0}, name="scalar-root"),
        "subspace-newton": ProblemSpec("subspace-newton", {}, name="subspace-newton"),
        "singular-demo": ProblemSpec("singular-demo", {}, name="singular-demo"),
    }
    try:
        return table[name]
    except KeyError:
        raise PreconditionViolated(f"unknown built-in problem {name!r}") from None


def spec_to_dict(spec: ProblemSpec) -> dict:
    d = {"kind": spec.kind, "params": spec.params}
    if spec.name:
        d["name"] = spec.name
    if spec.seed is not None:
        d["seed"] = spec.seed
    if spec.start is not None:
        d["start"] = list(spec.start)
    return d


def spec_from_dict(d: dict) -> ProblemSpec:
    if not isinstance(d, dict) or "kind" not in d:
        raise PreconditionViolated("problem spec needs a 'kind' field")
    if d["kind"] not in KINDS:
        raise PreconditionViolated(f"unknown problem kind {d['kind']!r}")
    params = d.get("params", {})
    if not isinstance(params, dict):
        raise PreconditionViolated("'params' must be an object")
    start = d.get("start")
    return ProblemSpec(
        kind=d["kind"],
        params=params,
        name=d.get("name", ""),
        seed=d.get("seed"),
        start=tuple(float(s) for s in start) if start is not None else None,
    )
