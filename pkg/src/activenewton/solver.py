"""Active-set Newton methods.

Two phases:

* identification: the projection iteration ``u <- Proj_K(u - F(u)/a)``
  runs until the active set of the projected points stops changing and
  the multipliers at the projected point are strictly positive;
* Newton: on the identified manifold ``M`` solve the tangent-restricted
  linearization of ``F + N_M``, project the result back onto ``M`` and
  re-estimate multipliers by least squares.  Locally this converges
  quadratically.

``semi_linearize_intersection`` is the underlying geometric step for two
transversal manifolds: intersect the affine tangent space of one with the
other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    IdentificationStall,
    InsufficientData,
    NoConvergence,
    PreconditionViolated,
    RankDeficient,
    SingularLinearization,
    Unsupported,
)
from .geneq import (
    GenEqProblem,
    NormalCone,
    NormalSpace,
    Zero,
    active_multipliers,
    active_set,
    manifold_from_active,
    natural_residual,
    nondegeneracy_check,
    project_convex,
)
from .geometry import (
    Manifold,
    constraint_jacobian,
    constraint_values,
    project_to_manifold,
    split_bases,
)
from .varcalc import multiplier_from_normal, transversality_margin, weighted_hessian

__all__ = [
    "Status",
    "Phase",
    "NewtonOptions",
    "IdentifyOptions",
    "IterateRecord",
    "SolverReport",
    "semi_linearize_intersection",
    "newton_step_manifold",
    "restore",
    "lagrangian_residual",
    "run_newton_phase",
    "identify_phase",
    "solve_two_phase",
    "fit_convergence_order",
    "usable_errors",
    "log_log_slope",
    "problem_manifold",
    "perturbed_start",
]


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    TRANSVERSALITY_FAIL = "TransversalityFail"
    IDENTIFICATION_STALL = "IdentificationStall"
    DIVERGED = "Diverged"


class Phase(str, enum.Enum):
    IDENTIFY = "Identify"
    NEWTON = "Newton"


@dataclass(frozen=True)
class NewtonOptions:
    tol_residual: float = 1e-12
    tol_step: float = 1e-15
    max_iter: int = 50
    safeguard: bool = True
    transversality_tol: float = 1e-10

    def __post_init__(self):
        if not (self.tol_residual > 0 and self.tol_step > 0):
            raise PreconditionViolated("tolerances must be positive")
        if self.max_iter < 1:
            raise PreconditionViolated("max_iter must be at least 1")


@dataclass(frozen=True)
class IdentifyOptions:
    """Settings for the projection phase and the phase switch."""

    a: float = 1.0
    max_iter: int = 10_000
    stability_window: int = 3
    activity_tol: float = 1e-6
    nondegeneracy_tol: float = 1e-8
    max_round_trips: int = 3
    vi_tol: float = 1e-8

    def __post_init__(self):
        if not self.a > 0:
            raise PreconditionViolated("a must be positive")
        if self.stability_window < 1 or self.max_iter < 1:
            raise PreconditionViolated("window and max_iter must be positive")


@dataclass
class IterateRecord:
    k: int
    u: np.ndarray
    lambda_: np.ndarray
    residual: float
    active_set: frozenset
    dist_to_solution: Optional[float]
    phase: Phase


@dataclass
class SolverReport:
    history: list = field(default_factory=list)
    status: Status = Status.MAX_ITER
    fitted_order: Optional[float] = None
    switch_iteration: Optional[int] = None
    manifold: Optional[Manifold] = None
    message: str = ""

    @property
    def u(self) -> np.ndarray:
        return self.history[-1].u

    @property
    def lambda_(self) -> np.ndarray:
        return self.history[-1].lambda_

    @property
    def residual(self) -> float:
        return self.history[-1].residual

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


# ------------------------------------------------------------ convergence order


def fit_convergence_order(errors) -> float:
    """Least-squares slope of ``log e[k+1]`` against ``log e[k]``.

    Needs at least three strictly decreasing errors inside ``(0, 1e-2)``.
    """
    e = np.asarray(errors, dtype=float)
    if e.size < 3:
        raise InsufficientData("need at least three errors")
    if np.any(e <= 0) or np.any(e >= 1e-2):
        raise InsufficientData("errors must lie in (0, 1e-2)")
    if np.any(np.diff(e) >= 0):
        raise InsufficientData("errors must be strictly decreasing")
    return log_log_slope(e)


def usable_errors(errors, upper=1e-2, floor=1e-14):
    """Trailing strictly decreasing run of errors inside ``(floor, upper)``.

    Errors at or below ``floor`` sit at rounding level and would distort the
    slope, so they are dropped.  Returns ``None`` if fewer than three remain.
    """
    kept = [float(e) for e in errors if floor < e < upper]
    run = []
    for e in kept:
        if run and e >= run[-1]:
            run = []
        run.append(e)
    return run if len(run) >= 3 else None


def log_log_slope(errors) -> float:
    """Slope of ``log e[k+1]`` against ``log e[k]`` without range checks."""
    e = np.asarray(errors, dtype=float)
    return float(np.polyfit(np.log(e[:-1]), np.log(e[1:]), 1)[0])


def _fit_or_none(errors, upper=1e-2):
    run = usable_errors(errors, upper=upper)
    return None if run is None else log_log_slope(run)


# ------------------------------------------------------------ semi-linearization


def semi_linearize_intersection(X: Manifold, Y: Manifold, x, tol=1e-12, max_iter=50):
    """Intersect the affine tangent space ``x + T_X(x)`` with ``Y``.

    Newton's method in tangent coordinates ``t`` on ``h_Y(x + B t) = 0``
    started from ``t = 0``; exact after one step when ``Y`` is affine.
    Near a transversal intersection point ``z`` the result is within
    ``O(|x - z|^2)`` of ``z``.
    """
    x = np.asarray(x, dtype=float)
    n = X.ambient_dim
    if Y.ambient_dim != n or X.dim + Y.dim != n:
        raise PreconditionViolated("need dim X + dim Y = n in a common space")
    if X.codim and np.abs(constraint_values(X, x)).max() > tol:
        raise PreconditionViolated("x is not on X")
    B = split_bases(X, x)[0]
    if B.shape[1] == 0:
        return x.copy()
    t = np.zeros(B.shape[1])
    for _ in range(max_iter + 1):
        y = x + B @ t
        h = constraint_values(Y, y)
        if np.abs(h).max() <= tol:
            return y
        A = constraint_jacobian(Y, y) @ B
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= 1e-12 * max(1.0, s[0]):
            raise SingularLinearization(
                "tangent space of X meets Y non-transversally at this point"
            )
        t = t - np.linalg.solve(A, h)
    raise NoConvergence("semi-linearization inner Newton did not converge")


# ------------------------------------------------------------ Newton phase


def lagrangian_residual(problem: GenEqProblem, M: Manifold, u, lam) -> float:
    """``|F(u) + J(u)' lam| + |h(u)|``."""
    u = np.asarray(u, dtype=float)
    L = problem.F(u) + constraint_jacobian(M, u).T @ np.asarray(lam, dtype=float)
    return float(np.linalg.norm(L) + np.linalg.norm(constraint_values(M, u)))


def newton_step_manifold(problem: GenEqProblem, M: Manifold, u, lam, basis=None, sing_tol=1e-12):
    """One tangent-restricted Newton step on ``F + N_M``.

    Solves ``s in T_M(u)``, ``L(u) + DL(u) s in N_M(u)`` for the Lagrangian
    ``L = F + sum lam_i grad h_i``, and updates the multipliers by the least
    squares correction of the linearized stationarity equation.  Returns
    ``(u + s, lam + delta)``.
    """
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    J = constraint_jacobian(M, u)
    B = split_bases(M, u)[0] if basis is None else np.asarray(basis, dtype=float)
    L = problem.F(u) + J.T @ lam
    DL = problem.DF(u) + weighted_hessian(M, u, lam)
    k = B.shape[1]
    if k:
        R = B.T @ DL @ B
        sv = np.linalg.svd(R, compute_uv=False)
        if sv[-1] <= sing_tol * max(1.0, np.linalg.norm(DL, 2)):
            raise SingularLinearization(
                f"reduced Lagrangian Jacobian is singular (sigma_min={sv[-1]:.3e})"
            )
        s = B @ np.linalg.solve(R, -B.T @ L)
    else:
        s = np.zeros_like(u)
    if M.codim:
        delta = np.linalg.lstsq(J.T, -(L + DL @ s), rcond=None)[0]
    else:
        delta = np.zeros(0)
    return u + s, lam + delta


def restore(problem: GenEqProblem, M: Manifold, w):
    """Project ``w`` onto ``M`` and refit multipliers of ``-F`` there."""
    u = project_to_manifold(M, np.asarray(w, dtype=float))
    lam = multiplier_from_normal(M, u, -problem.F(u)).lambda_
    return u, lam


def _dist(problem, u):
    ks = problem.known_solution
    if ks is None:
        return None
    return float(np.linalg.norm(np.asarray(u) - np.asarray(ks.u)))


def run_newton_phase(problem: GenEqProblem, M: Manifold, u0, lambda0=None, opts=None) -> SolverReport:
    """Newton iteration with projection/multiplier restoration on ``M``."""
    opts = opts or NewtonOptions()
    u = np.asarray(u0, dtype=float).copy()
    lam = (
        multiplier_from_normal(M, u, -problem.F(u)).lambda_
        if lambda0 is None
        else np.asarray(lambda0, dtype=float).reshape(-1).copy()
    )
    full = frozenset(range(M.codim))

    def record(k, u, lam):
        res = lagrangian_residual(problem, M, u, lam)
        history.append(
            IterateRecord(k, u.copy(), lam.copy(), res, full, _dist(problem, u), Phase.NEWTON)
        )
        return res

    history: list = []
    res = record(0, u, lam)
    status, message = Status.MAX_ITER, ""
    growth = 0
    for k in range(1, opts.max_iter + 1):
        if res <= opts.tol_residual:
            status = Status.CONVERGED
            break
        try:
            w, _ = newton_step_manifold(problem, M, u, lam)
        except SingularLinearization as exc:
            status, message = Status.TRANSVERSALITY_FAIL, str(exc)
            break
        try:
            u_new, lam = restore(problem, M, w)
        except (NoConvergence, RankDeficient) as exc:
            if not opts.safeguard:
                raise
            status, message = Status.DIVERGED, f"restoration failed: {exc}"
            break
        step = float(np.linalg.norm(u_new - u))
        u = u_new
        prev, res = res, record(k, u, lam)
        if res <= opts.tol_residual:
            status = Status.CONVERGED
            break
        if step <= opts.tol_step:
            message = "step below tolerance before residual"
            break
        growth = growth + 1 if res > 2.0 * prev else 0
        if opts.safeguard and (growth >= 2 or not np.isfinite(res)):
            status, message = Status.DIVERGED, "residual doubled twice"
            break
    else:
        if res <= opts.tol_residual:
            status = Status.CONVERGED

    if status is Status.CONVERGED:
        try:
            margin = transversality_margin(M, problem.DF, u, lam)
        except RankDeficient:
            margin = 0.0
        if margin <= opts.transversality_tol:
            status = Status.TRANSVERSALITY_FAIL
            message = f"solution not isolated: transversality margin {margin:.3e}"

    errs = [
        r.dist_to_solution if r.dist_to_solution is not None else r.residual
        for r in history
    ]
    return SolverReport(
        history=history,
        status=status,
        fitted_order=_fit_or_none(errs),
        manifold=M,
        message=message,
    )


# ------------------------------------------------------------ identification


def identify_phase(problem: GenEqProblem, a=1.0, u0=None, opts=None):
    """Projection iterations until the active manifold is identified.

    Returns ``(M, u_start, records)``.  The set is accepted once the active
    set of ``y_k = Proj_K(u_k - F(u_k)/a)`` has been the same for
    ``stability_window`` consecutive iterations and the multipliers of
    ``-F(y_k)`` on it are strictly positive.  The activity tolerance
    shrinks with the natural residual, down to ``1e-10``.
    """
    if not isinstance(problem.psi, NormalCone):
        raise Unsupported("identification needs a normal-cone operator part")
    opts = opts or IdentifyOptions(a=a)
    if not a > 0:
        raise PreconditionViolated("a must be positive")
    K = problem.psi.K
    u = np.asarray(u0, dtype=float).copy()
    records = []
    streak, last = 0, None
    for k in range(opts.max_iter):
        Fu = problem.F(u)
        y = project_convex(K, u - Fu / a)
        res = float(np.linalg.norm(u - y))
        tol = min(opts.activity_tol, max(1e-10, res))
        I = active_set(K, y, tol)
        try:
            lam, _ = active_multipliers(K, I, y, a * (u - y) - Fu)
        except RankDeficient:
            lam = np.full(len(I), np.nan)
        records.append(IterateRecord(k, y, lam, res, I, _dist(problem, y), Phase.IDENTIFY))
        streak = streak + 1 if I == last else 1
        last = I
        if streak >= opts.stability_window:
            try:
                ok = nondegeneracy_check(K, problem.F, y, opts.nondegeneracy_tol, active=I)
            except RankDeficient:
                ok = False
            if ok:
                M = manifold_from_active(K, I)
                return M, project_to_manifold(M, y), records
        u = y
    raise IdentificationStall(
        f"no stable nondegenerate active set after {opts.max_iter} iterations", records
    )


def problem_manifold(problem: GenEqProblem, u=None, tol=1e-8) -> Manifold:
    """The manifold the Newton phase runs on near ``u`` (default: the known
    solution)."""
    psi = problem.psi
    if isinstance(psi, Zero):
        return Manifold(problem.dim, ())
    if isinstance(psi, NormalSpace):
        return psi.M
    if isinstance(psi, NormalCone):
        if u is None:
            if problem.known_solution is None:
                raise PreconditionViolated("no point given and no known solution")
            u = problem.known_solution.u
        return manifold_from_active(psi.K, active_set(psi.K, np.asarray(u, dtype=float), tol))
    raise Unsupported(f"no active manifold for {type(psi).__name__}")


def perturbed_start(problem: GenEqProblem, M: Manifold, distance, rng):
    """A point of ``M`` roughly ``distance`` from the known solution, reached
    by a random tangent displacement followed by projection, together with
    its least-squares multipliers."""
    ubar = np.asarray(problem.known_solution.u, dtype=float)
    T = split_bases(M, ubar)[0]
    d = T @ rng.standard_normal(T.shape[1]) if T.shape[1] else np.zeros_like(ubar)
    nd = np.linalg.norm(d)
    if nd == 0:
        return restore(problem, M, ubar)
    return restore(problem, M, ubar + distance * d / nd)


def _renumber(records, start, labels=None):
    # labels maps manifold constraint positions back to indices of K
    out = []
    for i, r in enumerate(records):
        if labels is not None:
            r = replace(r, active_set=frozenset(labels[j] for j in r.active_set))
        out.append(replace(r, k=start + i))
    return out


def solve_two_phase(problem: GenEqProblem, u0, opts=None, identify=None) -> SolverReport:
    """Identification followed by the Newton phase.

    Normal-cone problems run the projection phase first; if the Newton
    phase fails, hits a singular linearization or lands on a point that is
    not a solution of the variational inequality, the projection phase resumes from its last
    iterate with a tighter activity tolerance and a longer stability
    window, at most ``identify.max_round_trips`` times.  Zero and
    normal-space operator parts go straight to the Newton phase.
    """
    opts = opts or NewtonOptions()
    identify = identify or IdentifyOptions()
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    psi = problem.psi

    if isinstance(psi, (Zero, NormalSpace)):
        M = problem_manifold(problem)
        u, lam = restore(problem, M, u0)
        rep = run_newton_phase(problem, M, u, lam, opts)
        rep.switch_iteration = 0
        return rep
    if not isinstance(psi, NormalCone):
        raise Unsupported(f"two-phase solve does not handle {type(psi).__name__}")

    history: list = []
    u = u0
    idopts = identify
    rep = None
    for trip in range(identify.max_round_trips + 1):
        try:
            M, u_start, recs = identify_phase(problem, idopts.a, u, idopts)
        except IdentificationStall as exc:
            history += _renumber(exc.records, len(history))
            return SolverReport(
                history=history,
                status=Status.IDENTIFICATION_STALL,
                message=str(exc),
            )
        history += _renumber(recs, len(history))
        switch = len(history)
        u = recs[-1].u
        lam0 = multiplier_from_normal(M, u_start, -problem.F(u_start)).lambda_
        rep = run_newton_phase(problem, M, u_start, lam0, opts)
        history += _renumber(rep.history, len(history), sorted(recs[-1].active_set))
        rep.history = history
        rep.switch_iteration = switch
        # a singular linearization may just mean the set was identified too
        # early, so it also triggers another round trip
        if rep.status is Status.CONVERGED:
            nr = natural_residual(problem, idopts.a, rep.u)
            if nr <= idopts.vi_tol * (1.0 + np.linalg.norm(rep.u)):
                return rep
            rep.status = Status.MAX_ITER
            rep.message = f"Newton limit is not a solution (natural residual {nr:.3e})"
        idopts = replace(
            idopts,
            activity_tol=max(1e-10, idopts.activity_tol * 1e-2),
            stability_window=4 * idopts.stability_window,
        )
    return rep
