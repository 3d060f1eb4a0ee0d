"""Dense SLSQP-style solver for small inequality-constrained NLPs.

Problem form::

    minimize    f(x)
    subject to  c(x) >= 0          (stacked inequality blocks)
                lower <= x <= upper

Each iteration solves a strictly convex QP built from a damped-BFGS Hessian
approximation and linearised constraints, then takes a backtracking step on
the l1 exact-penalty merit function. The QP is solved with the dual active-set
method of Goldfarb and Idnani, which needs no feasible starting point and
detects inconsistent linearisations; those fall back to an elastic QP.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import DomainError

log = logging.getLogger(__name__)

Array = np.ndarray


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass
class Constraint:
    """A block of inequality constraints ``fun(x) >= 0``.

    ``fun`` may return a scalar or a 1-D array. ``jac`` returns the matching
    Jacobian (a gradient vector for scalar blocks); when omitted it is formed
    by central differences.
    """

    fun: Callable[[Array], float | Array]
    jac: Callable[[Array], Array] | None = None


@dataclass
class NlpProblem:
    dim: int
    objective: Callable[[Array], float]
    gradient: Callable[[Array], Array] | None = None
    inequality_constraints: Sequence[Constraint] = ()
    lower: Array | None = None
    upper: Array | None = None
    hessian0: Array | None = None  # initial and reset value of the BFGS matrix

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        self.lower = np.full(self.dim, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(self.dim, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
            raise ValueError("bounds must have length dim")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        self.inequality_constraints = [
            c if isinstance(c, Constraint) else Constraint(c) for c in self.inequality_constraints
        ]


@dataclass
class SolverOptions:
    max_iter: int = 50
    tol_opt: float = 1e-6
    tol_feas: float = 1e-6
    max_line_search: int = 12
    debug: bool = False


@dataclass
class NlpSolution:
    x_opt: Array
    objective_value: float
    status: SolveStatus
    iterations: int
    max_constraint_violation: float
    constraint_values: Array = field(repr=False, default_factory=lambda: np.zeros(0))
    multipliers: Array = field(repr=False, default_factory=lambda: np.zeros(0))
    relaxed: bool = False
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status is SolveStatus.CONVERGED


@dataclass
class QpResult:
    step: Array
    multipliers: Array  # one per general constraint row
    relaxed: bool = False
    iterations: int = 0


class QpInfeasible(Exception):
    pass


def finite_difference_gradient(f: Callable[[Array], float], x, step: float = 1e-6) -> Array:
    """Central-difference gradient with per-coordinate step ``max(step, step*|x_i|)``."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    xp = x.copy()
    for i in range(x.size):
        h = max(step, step * abs(x[i]))
        xp[i] = x[i] + h
        fp = f(xp)
        xp[i] = x[i] - h
        fm = f(xp)
        xp[i] = x[i]
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value when perturbing coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def _fd_jacobian(fun: Callable[[Array], Array], x: Array, step: float = 1e-6) -> Array:
    x = np.asarray(x, dtype=float)
    cols = []
    xp = x.copy()
    for i in range(x.size):
        h = max(step, step * abs(x[i]))
        xp[i] = x[i] + h
        fp = np.atleast_1d(fun(xp))
        xp[i] = x[i] - h
        fm = np.atleast_1d(fun(xp))
        xp[i] = x[i]
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# QP subproblem


def _goldfarb_idnani(G_factor, a: Array, C: Array, b: Array, tol: float = 1e-10, max_iter: int = 500):
    """Solve ``min 1/2 x'Gx + a'x  s.t.  C x >= b`` for positive definite ``G``.

    Dual active-set method. The inverse of the active block of
    ``K = C G^{-1} C'`` is updated in place as rows enter or leave the active
    set. Returns ``(x, u, iterations)`` with ``u`` the multipliers of all rows
    of ``C``. Raises :class:`QpInfeasible` if the constraints are inconsistent.
    """
    n = a.size
    m = C.shape[0]
    Ginv = cho_solve(G_factor, np.eye(n), check_finite=False)
    x = -(Ginv @ a)
    u_all = np.zeros(m)
    if m == 0:
        return x, u_all, 0
    GiC = Ginv @ C.T  # columns G^{-1} c_i
    row_scale = np.maximum(np.sqrt(np.einsum("ij,ij->i", C, C)), 1.0)
    C_scaled, b_scaled = C / row_scale[:, None], b / row_scale
    active: list[int] = []
    u = np.zeros(0)
    Minv = np.zeros((0, 0))
    iterations = 0
    inactive = np.ones(m, dtype=bool)
    while True:
        s = C_scaled @ x - b_scaled
        s[~inactive] = np.inf
        p = int(s.argmin())
        if s[p] >= -tol:
            break
        k_p = C @ GiC[:, p]  # column p of K = C G^{-1} C'
        u_p = 0.0
        while True:
            iterations += 1
            if iterations > max_iter:
                raise QpInfeasible("active-set iteration limit reached")
            if active:
                k_ap = k_p[active]
                r = Minv @ k_ap
                z = GiC[:, p] - GiC[:, active] @ r
                zn = float(k_p[p] - k_ap @ r)
                pos = r > 1e-12
                if pos.any():
                    ratios = np.full(r.size, np.inf)
                    ratios[pos] = u[pos] / r[pos]
                    drop = int(ratios.argmin())
                    t1 = float(ratios[drop])
                else:
                    drop, t1 = -1, math.inf
            else:
                r = np.zeros(0)
                z = GiC[:, p]
                zn = float(k_p[p])
                drop, t1 = -1, math.inf
            # zn is the squared G-norm of z; relative to K[p, p] it measures how
            # much of row p is independent of the active rows
            full = zn > 1e-10 * k_p[p]
            t2 = -(float(C[p] @ x) - b[p]) / zn if full else math.inf
            if math.isinf(t1) and math.isinf(t2):
                raise QpInfeasible(f"constraint {p} cannot be satisfied")
            t = min(t1, t2)
            if not math.isinf(t2):
                x = x + t * z
            u = u - t * r
            u_p += t
            if t == t2:
                # grow the inverse by one row and column (Schur complement zn)
                q = len(active)
                grown = np.empty((q + 1, q + 1))
                grown[:q, :q] = Minv + r[:, None] * (r / zn)
                grown[:q, q] = -r / zn
                grown[q, :q] = -r / zn
                grown[q, q] = 1.0 / zn
                Minv = grown
                active.append(p)
                u = np.concatenate((u, (u_p,)))
                inactive[p] = False
                break
            # drop the blocking constraint and retry the same violated row
            keep = np.arange(len(active)) != drop
            e = Minv[keep, drop]
            Minv = Minv[keep][:, keep] - e[:, None] * (e / Minv[drop, drop])
            removed = active.pop(drop)
            u = u[keep]
            inactive[removed] = True
    u_all[active] = np.maximum(u, 0.0)
    return x, u_all, iterations


def _factor(H: Array):
    try:
        return cho_factor(H, lower=True)
    except LinAlgError:
        n = H.shape[0]
        shift = 1e-8 * max(1.0, float(np.max(np.abs(np.diag(H)))))
        for _ in range(12):
            try:
                return cho_factor(H + shift * np.eye(n), lower=True)
            except LinAlgError:
                shift *= 10.0
        return cho_factor(np.eye(n), lower=True)


def _bound_rows(lower: Array, upper: Array) -> tuple[Array, Array]:
    n = lower.size
    eye = np.eye(n)
    lo = np.isfinite(lower)
    hi = np.isfinite(upper)
    C = np.vstack([eye[lo], -eye[hi]])
    b = np.concatenate([lower[lo], -upper[hi]])
    return C, b


def qp_subproblem(
    hessian: Array,
    grad: Array,
    constraint_jacobian: Array | None = None,
    constraint_values: Array | None = None,
    lower: Array | None = None,
    upper: Array | None = None,
    elastic_penalty: float | None = None,
) -> QpResult:
    """Search direction of one SQP iteration.

    Solves ``min 1/2 d'Hd + g'd  s.t.  J d + c >= 0,  lower <= d <= upper``.
    If the linearised constraints are inconsistent, each general row gets an
    elastic slack ``s >= 0`` penalised linearly (plus a tiny quadratic term to
    keep the QP strictly convex) and the result is flagged ``relaxed``.
    """
    H = np.asarray(hessian, dtype=float)
    g = np.asarray(grad, dtype=float)
    n = g.size
    J = np.zeros((0, n)) if constraint_jacobian is None else np.atleast_2d(np.asarray(constraint_jacobian, dtype=float))
    c = np.zeros(0) if constraint_values is None else np.atleast_1d(np.asarray(constraint_values, dtype=float))
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    m = c.size
    # equilibrate general rows; barrier linearisations can span many decades
    scale = np.linalg.norm(J, axis=1) if m else np.zeros(0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    J = J / scale[:, None]
    c = c / scale

    Cb, bb = _bound_rows(lower, upper)
    C = np.vstack([J, Cb])
    b = np.concatenate([-c, bb])
    factor = _factor(H)
    try:
        d, u, it = _goldfarb_idnani(factor, g, C, b)
        return QpResult(d, u[:m] / scale, relaxed=False, iterations=it)
    except QpInfeasible:
        pass

    # elastic mode over (d, s)
    rho = elastic_penalty if elastic_penalty is not None else 1e3 * max(1.0, float(np.max(np.abs(g))))
    eps = 1e-6 * max(1.0, float(np.max(np.abs(np.diag(H)))))
    He = np.zeros((n + m, n + m))
    He[:n, :n] = H
    He[n:, n:] = eps * np.eye(m)
    ge = np.concatenate([g, np.full(m, rho)])
    Ce = np.vstack(
        [
            np.hstack([J, np.eye(m)]),
            np.hstack([np.zeros((m, n)), np.eye(m)]),
            np.hstack([Cb, np.zeros((Cb.shape[0], m))]),
        ]
    )
    be = np.concatenate([-c, np.zeros(m), bb])
    d, u, it = _goldfarb_idnani(_factor(He), ge, Ce, be)
    return QpResult(d[:n], u[:m] / scale, relaxed=True, iterations=it)


# ---------------------------------------------------------------------------
# SQP driver


class _Evaluator:
    def __init__(self, problem: NlpProblem):
        self.p = problem

    def objective(self, x: Array) -> float:
        f = float(self.p.objective(x))
        if not math.isfinite(f):
            raise FloatingPointError("objective returned a non-finite value")
        return f

    def gradient(self, x: Array) -> Array:
        if self.p.gradient is not None:
            return np.asarray(self.p.gradient(x), dtype=float)
        return finite_difference_gradient(self.p.objective, x)

    def constraints(self, x: Array) -> Array:
        if not self.p.inequality_constraints:
            return np.zeros(0)
        vals = np.concatenate([np.atleast_1d(np.asarray(c.fun(x), dtype=float)) for c in self.p.inequality_constraints])
        if not np.all(np.isfinite(vals)):
            raise DomainError("constraint returned a non-finite value")
        return vals

    def jacobian(self, x: Array) -> Array:
        if not self.p.inequality_constraints:
            return np.zeros((0, self.p.dim))
        blocks = []
        for c in self.p.inequality_constraints:
            if c.jac is not None:
                blocks.append(np.atleast_2d(np.asarray(c.jac(x), dtype=float)).reshape(-1, self.p.dim))
            else:
                blocks.append(_fd_jacobian(c.fun, x))
        return np.vstack(blocks)


def _violation(c: Array) -> float:
    return float(np.max(-c, initial=0.0))


def solve(problem: NlpProblem, x0, opts: SolverOptions | None = None) -> NlpSolution:
    """Minimise ``problem`` from ``x0``.

    Returns the final iterate when it converged, otherwise the best iterate
    seen (feasible with lowest objective, else least infeasible).
    """
    opts = opts or SolverOptions()
    ev = _Evaluator(problem)
    n = problem.dim
    lower, upper = problem.lower, problem.upper
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != n:
        raise ValueError(f"x0 has length {x.size}, expected {n}")
    x = np.clip(x, lower, upper)

    try:
        f = ev.objective(x)
        c = ev.constraints(x)
    except DomainError as exc:
        return NlpSolution(
            x, math.nan, SolveStatus.INFEASIBLE, 0, math.inf, message=f"domain error at x0: {exc}"
        )
    g = ev.gradient(x)
    J = ev.jacobian(x)
    m = c.size

    B0 = np.eye(n) if problem.hessian0 is None else np.array(problem.hessian0, dtype=float)
    B = B0.copy()
    rho = np.zeros(m)
    mult = np.zeros(m)
    best = (x.copy(), f, c.copy())
    relaxed_any = False
    status = SolveStatus.MAX_ITERATIONS
    message = "iteration limit reached"
    reset_pending = False
    relaxed_streak, last_relaxed_violation = 0, math.inf

    def better(fc: float, cc: Array) -> bool:
        bv, cv = _violation(best[2]), _violation(cc)
        if cv <= opts.tol_feas and bv <= opts.tol_feas:
            return fc < best[1]
        return cv < bv

    it = 0
    while it < opts.max_iter:
        it += 1
        try:
            qp = qp_subproblem(B, g, J, c, lower - x, upper - x)
        except QpInfeasible as exc:
            # only reachable when the elastic QP cycles; retry once from B0
            if reset_pending:
                message = f"QP subproblem failed: {exc}"
                break
            B, reset_pending = B0.copy(), True
            continue
        d = qp.step
        relaxed_any |= qp.relaxed
        mult = qp.multipliers

        # a tenth of tol_opt: BFGS curvature errors amplify the distance to the optimum
        step_small = float(np.max(np.abs(d), initial=0.0)) <= 0.1 * opts.tol_opt * max(1.0, float(np.max(np.abs(x))))
        if step_small and _violation(c) <= opts.tol_feas:
            status, message = SolveStatus.CONVERGED, "step below tolerance"
            break
        # predicted change of the Lagrangian is below what a tol_opt-sized step would give
        predicted = abs(float(g @ d)) + (float(np.abs(mult) @ np.abs(c)) if m else 0.0)
        if not qp.relaxed and _violation(c) <= opts.tol_feas and predicted <= opts.tol_opt**2:
            status, message = SolveStatus.CONVERGED, "predicted change below tolerance"
            break
        if qp.relaxed:
            stalled = relaxed_streak > 0 and _violation(c) >= 0.99 * last_relaxed_violation
            relaxed_streak += 1
            last_relaxed_violation = min(last_relaxed_violation, _violation(c))
            if step_small or (stalled and relaxed_streak >= 3):
                message = "linearised constraints stay inconsistent"
                break
        else:
            relaxed_streak, last_relaxed_violation = 0, math.inf

        rho = np.maximum(np.abs(mult), 0.5 * (rho + np.abs(mult))) if m else rho

        def merit(fv: float, cv: Array) -> float:
            return fv + float(rho @ np.maximum(-cv, 0.0)) if m else fv

        phi0 = merit(f, c)
        lin = c + J @ d if m else c
        slope = float(g @ d) + (float(rho @ (np.maximum(-lin, 0.0) - np.maximum(-c, 0.0))) if m else 0.0)

        alpha = 1.0
        accepted = False
        for _ in range(opts.max_line_search):
            xt = np.clip(x + alpha * d, lower, upper)
            try:
                ft = ev.objective(xt)
                ct = ev.constraints(xt)
                phit = merit(ft, ct)
            except DomainError:
                phit = math.inf
            if phit <= phi0 + 1e-4 * alpha * min(slope, 0.0) and (slope < 0 or phit < phi0 or alpha * np.max(np.abs(d), initial=0.0) < 1e-14):
                accepted = True
                break
            if math.isfinite(phit) and slope < 0:
                denom = 2.0 * (phit - phi0 - alpha * slope)
                trial = -slope * alpha * alpha / denom if denom > 0 else 0.5 * alpha
                alpha = min(max(trial, 0.1 * alpha), 0.5 * alpha)
            else:
                alpha *= 0.5

        if not accepted:
            if reset_pending:
                message = "line search failed after Hessian reset"
                break
            B = B0.copy()
            reset_pending = True
            continue
        reset_pending = False

        if opts.debug:
            assert phit <= phi0 + 1e-12 * max(1.0, abs(phi0)), "merit increased on an accepted step"

        gt = ev.gradient(xt)
        Jt = ev.jacobian(xt)
        s = xt - x
        y = (gt - Jt.T @ mult) - (g - J.T @ mult) if m else gt - g
        Bs = B @ s
        sBs = float(s @ Bs)
        sy = float(s @ y)
        if sBs > 1e-16 and math.isfinite(sy):
            if sy < 0.2 * sBs:
                theta = 0.8 * sBs / (sBs - sy)
                y = theta * y + (1.0 - theta) * Bs
                sy = float(s @ y)
            if sy > 1e-14 * sBs and np.all(np.isfinite(y)):
                B = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
                # squared Cholesky pivots bracket the spectrum: cheap conditioning check
                try:
                    piv = np.diag(np.linalg.cholesky(B)) ** 2
                    ill = piv.min() < 1e-10 * piv.max()
                except LinAlgError:
                    ill = True
                if ill:
                    B = B0.copy()
            else:
                B = B0.copy()
        elif not math.isfinite(sy):
            B = B0.copy()

        f_prev = f
        x, f, c, g, J = xt, ft, ct, gt, Jt
        if better(f, c):
            best = (x.copy(), f, c.copy())

        small_move = float(np.max(np.abs(s), initial=0.0)) <= opts.tol_opt * max(1.0, float(np.max(np.abs(x))))
        if _violation(c) <= opts.tol_feas and small_move and abs(f - f_prev) <= opts.tol_opt * max(1.0, abs(f)):
            status, message = SolveStatus.CONVERGED, "iterate stationary"
            break

    if status is not SolveStatus.CONVERGED:
        if better(f, c):
            best = (x.copy(), f, c.copy())
        x, f, c = best
        if _violation(c) > opts.tol_feas:
            status = SolveStatus.INFEASIBLE
            message = f"{message}; least-infeasible iterate returned"
    return NlpSolution(
        x_opt=x,
        objective_value=f,
        status=status,
        iterations=it,
        max_constraint_violation=_violation(c),
        constraint_values=c,
        multipliers=mult,
        relaxed=relaxed_any,
        message=message,
    )
