"""Small LMI feasibility problems: PSD constraints (with margin) and affine equalities.

Expressions are explicit sums of ``L @ X @ R`` terms plus a constant, so the same
object can be handed to the conic backend and evaluated with plain numpy by the
verifier, which never looks at the backend's own residuals.

Strict inequalities ``F(x) > 0`` are realized as ``F(x) >= psd_margin * I``;
equalities are accepted when every entry is within ``eq_tol``.

Example:
    >>> prob = LmiProblem()
    >>> p = prob.add_variable("p", (1, 1), symmetric=True)
    >>> prob.add_psd(p, "p>0")
    >>> prob.add_psd(p - 0.25 * p, "decay")
    >>> solve(prob).status
    'feasible'
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LmiError

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
MARGINAL = "numerically-marginal"


@dataclass(frozen=True)
class Term:
    """``left @ X @ right`` (or ``left @ X.T @ right`` when ``transpose``)."""

    var: str
    left: np.ndarray
    right: np.ndarray
    transpose: bool = False


class AffineExpr:
    """Affine matrix expression in the declared variables."""

    __array_priority__ = 100  # so ndarray @ expr defers to __rmatmul__

    def __init__(self, shape, terms=(), constant=None):
        self.shape = (int(shape[0]), int(shape[1]))
        self.terms = tuple(terms)
        self.constant = None if constant is None else np.asarray(constant, dtype=float).reshape(self.shape)

    @classmethod
    def of_variable(cls, name, shape):
        rows, cols = shape
        return cls(shape, [Term(name, np.eye(rows), np.eye(cols))])

    @classmethod
    def const(cls, value):
        value = np.atleast_2d(np.asarray(value, dtype=float))
        return cls(value.shape, (), value)

    # -- algebra -------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, AffineExpr):
            return other
        other = np.asarray(other, dtype=float)
        if other.ndim == 0:
            other = np.full(self.shape, float(other))
        return AffineExpr.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        if other.shape != self.shape:
            raise LmiError(f"shape mismatch in sum: {self.shape} vs {other.shape}")
        if self.constant is None:
            c = other.constant
        elif other.constant is None:
            c = self.constant
        else:
            c = self.constant + other.constant
        return AffineExpr(self.shape, self.terms + other.terms, c)

    __radd__ = __add__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0 * self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, scalar):
        s = float(scalar)
        terms = [replace(t, left=s * t.left) for t in self.terms]
        c = None if self.constant is None else s * self.constant
        return AffineExpr(self.shape, terms, c)

    __rmul__ = __mul__

    def __matmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[0] != self.shape[1]:
            raise LmiError(f"cannot right-multiply {self.shape} by {M.shape}")
        terms = [replace(t, right=t.right @ M) for t in self.terms]
        c = None if self.constant is None else self.constant @ M
        return AffineExpr((self.shape[0], M.shape[1]), terms, c)

    def __rmatmul__(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[1] != self.shape[0]:
            raise LmiError(f"cannot left-multiply {self.shape} by {M.shape}")
        terms = [replace(t, left=M @ t.left) for t in self.terms]
        c = None if self.constant is None else M @ self.constant
        return AffineExpr((M.shape[0], self.shape[1]), terms, c)

    @property
    def T(self):
        terms = [Term(t.var, t.right.T, t.left.T, not t.transpose) for t in self.terms]
        c = None if self.constant is None else self.constant.T
        return AffineExpr((self.shape[1], self.shape[0]), terms, c)

    def variables(self):
        return {t.var for t in self.terms}

    def is_homogeneous(self):
        return self.constant is None or not np.any(self.constant)

    # -- evaluation ----------------------------------------------------------
    def evaluate(self, values):
        out = np.zeros(self.shape) if self.constant is None else self.constant.copy()
        for t in self.terms:
            if t.var not in values:
                raise LmiError(f"missing assignment for variable {t.var!r}")
            X = np.asarray(values[t.var], dtype=float)
            out += t.left @ (X.T if t.transpose else X) @ t.right
        return out

    def to_cvxpy(self, cvx_vars):
        import cvxpy as cp

        expr = cp.Constant(np.zeros(self.shape)) if self.constant is None else cp.Constant(self.constant)
        for t in self.terms:
            X = cvx_vars[t.var]
            expr = expr + t.left @ (X.T if t.transpose else X) @ t.right
        return expr

    def to_dict(self):
        return {
            "shape": list(self.shape),
            "constant": None if self.constant is None else self.constant.tolist(),
            "terms": [
                {"var": t.var, "left": t.left.tolist(), "right": t.right.tolist(), "transpose": t.transpose}
                for t in self.terms
            ],
        }


def bmat(blocks) -> AffineExpr:
    """Block matrix from a grid of AffineExpr / arrays; every row shares a height."""
    heights = []
    for row in blocks:
        hs = {b.shape[0] for b in row if isinstance(b, AffineExpr)}
        hs |= {np.atleast_2d(b).shape[0] for b in row if not isinstance(b, AffineExpr)}
        if len(hs) != 1:
            raise LmiError("inconsistent block heights")
        heights.append(hs.pop())
    widths = []
    for j in range(len(blocks[0])):
        ws = {(b.shape[1] if isinstance(b, AffineExpr) else np.atleast_2d(b).shape[1]) for b in (r[j] for r in blocks)}
        if len(ws) != 1:
            raise LmiError("inconsistent block widths")
        widths.append(ws.pop())
    R, C = sum(heights), sum(widths)
    out = AffineExpr((R, C), (), None)
    r0 = 0
    for i, row in enumerate(blocks):
        c0 = 0
        for j, b in enumerate(row):
            b = b if isinstance(b, AffineExpr) else AffineExpr.const(b)
            Ei = np.zeros((R, heights[i]))
            Ei[r0 : r0 + heights[i]] = np.eye(heights[i])
            Fj = np.zeros((widths[j], C))
            Fj[:, c0 : c0 + widths[j]] = np.eye(widths[j])
            out = out + (Ei @ b @ Fj)
            c0 += widths[j]
        r0 += heights[i]
    return out


@dataclass(frozen=True)
class Variable:
    name: str
    shape: tuple
    symmetric: bool = False


@dataclass
class PsdConstraint:
    expr: AffineExpr
    name: str
    congruence: np.ndarray | None = None  # solver-side D in D F D^T; verification ignores it


@dataclass
class EqualityConstraint:
    expr: AffineExpr
    name: str
    native: bool = False  # solver-side ``== 0`` instead of the |.| <= eq_tol box


@dataclass
class SolverOptions:
    psd_margin: float = 1e-10
    eq_tol: float = 1e-6
    conditioning_reg: float = 0.0
    max_iter: int = 500
    seed: int = 0
    # solver-side bound X~ <= normalization*psd_margin*I on symmetric variables of homogeneous
    # problems, i.e. a condition-number budget for the certificate (None: off)
    normalization: float | None = 1e10
    solver: str = "CLARABEL"

    def __post_init__(self):
        if not self.psd_margin > 0:
            raise LmiError("psd_margin must be positive")
        if not self.eq_tol > 0:
            raise LmiError("eq_tol must be positive")
        if self.conditioning_reg < 0:
            raise LmiError("conditioning_reg must be nonnegative")


@dataclass
class LmiProblem:
    variables: list = field(default_factory=list)
    psd_constraints: list = field(default_factory=list)
    equality_constraints: list = field(default_factory=list)
    options: SolverOptions = field(default_factory=SolverOptions)
    scalings: dict = field(default_factory=dict)
    left_factors: dict = field(default_factory=dict)

    def add_variable(self, name, shape, symmetric=False) -> AffineExpr:
        if any(v.name == name for v in self.variables):
            raise LmiError(f"variable {name!r} declared twice")
        shape = (int(shape[0]), int(shape[1]))
        if symmetric and shape[0] != shape[1]:
            raise LmiError("symmetric variables must be square")
        self.variables.append(Variable(name, shape, symmetric))
        return AffineExpr.of_variable(name, shape)

    def variable(self, name) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise LmiError(f"unknown variable {name!r}")

    def add_psd(self, expr, name, congruence=None):
        expr = expr if isinstance(expr, AffineExpr) else AffineExpr.const(expr)
        if expr.shape[0] != expr.shape[1]:
            raise LmiError(f"PSD constraint {name!r} is not square: {expr.shape}")
        self._check_refs(expr, name)
        self.psd_constraints.append(PsdConstraint(expr, name, congruence))

    def add_equality(self, expr, name, native=False):
        self._check_refs(expr, name)
        self.equality_constraints.append(EqualityConstraint(expr, name, native))

    def set_scaling(self, name, T, left=None):
        """Solve in X~ with X = T X~ T^T (symmetric X) or X = L X~ T^T (general X).

        ``left`` (rows×k, default identity) restricts a general X to the range of L;
        use it only for directions no constraint can see.
        """
        v = self.variable(name)
        if T is not None:
            T = np.atleast_2d(np.asarray(T, dtype=float))
            if T.shape != (v.shape[1], v.shape[1]):
                raise LmiError(f"scaling for {name!r} must be {v.shape[1]}x{v.shape[1]}")
            self.scalings[name] = T
        if left is not None:
            left = np.atleast_2d(np.asarray(left, dtype=float))
            if v.symmetric or left.shape[0] != v.shape[0]:
                raise LmiError(f"left factor for {name!r} must be a {v.shape[0]}-row matrix on a general variable")
            self.left_factors[name] = left

    def _check_refs(self, expr, name):
        declared = {v.name: v for v in self.variables}
        for t in expr.terms:
            if t.var not in declared:
                raise LmiError(f"constraint {name!r} references undeclared variable {t.var!r}")
            rows, cols = declared[t.var].shape
            if t.transpose:
                rows, cols = cols, rows
            if t.left.shape[1] != rows or t.right.shape[0] != cols:
                raise LmiError(f"constraint {name!r}: term shapes inconsistent with {t.var!r}")

    def is_homogeneous(self):
        exprs = [c.expr for c in self.psd_constraints] + [c.expr for c in self.equality_constraints]
        return all(e.is_homogeneous() for e in exprs)

    def to_dict(self):
        return {
            "variables": [{"name": v.name, "shape": list(v.shape), "symmetric": v.symmetric} for v in self.variables],
            "psd_constraints": [{"name": c.name, "expr": c.expr.to_dict()} for c in self.psd_constraints],
            "equality_constraints": [{"name": c.name, "expr": c.expr.to_dict()} for c in self.equality_constraints],
            "options": {
                "psd_margin": self.options.psd_margin,
                "eq_tol": self.options.eq_tol,
                "conditioning_reg": self.options.conditioning_reg,
                "max_iter": self.options.max_iter,
                "seed": self.options.seed,
                "normalization": self.options.normalization,
            },
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


@dataclass
class ResidualReport:
    psd_min_eig: dict
    psd_asymmetry: dict
    eq_residual: dict

    @property
    def min_eig(self) -> float:
        return min(self.psd_min_eig.values()) if self.psd_min_eig else np.inf

    @property
    def max_eq_residual(self) -> float:
        return max(self.eq_residual.values()) if self.eq_residual else 0.0

    def passes(self, psd_margin, eq_tol) -> bool:
        return self.min_eig >= psd_margin * (1 - 1e-6) and self.max_eq_residual <= eq_tol

    def to_dict(self):
        return {
            "min_eig": self.min_eig,
            "max_eq_residual": self.max_eq_residual,
            "psd_min_eig": self.psd_min_eig,
            "psd_asymmetry": self.psd_asymmetry,
            "eq_residual": self.eq_residual,
        }


@dataclass
class LmiSolution:
    assignments: dict
    status: str
    residuals: ResidualReport | None
    solver_status: str = ""
    psd_margin: float = 0.0
    eq_tol: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def verify_solution(problem: LmiProblem, assignments: dict) -> ResidualReport:
    """Recompute every constraint from scratch with dense eigendecompositions."""
    for v in problem.variables:
        if v.name not in assignments:
            raise LmiError(f"missing assignment for variable {v.name!r}")
        if np.shape(assignments[v.name]) != v.shape:
            raise LmiError(f"assignment for {v.name!r} has shape {np.shape(assignments[v.name])}, want {v.shape}")
    psd_min, asym = {}, {}
    for c in problem.psd_constraints:
        F = c.expr.evaluate(assignments)
        asym[c.name] = float(np.max(np.abs(F - F.T))) if F.size else 0.0
        psd_min[c.name] = float(np.linalg.eigvalsh(0.5 * (F + F.T)).min())
    eq = {}
    for c in problem.equality_constraints:
        E = c.expr.evaluate(assignments)
        eq[c.name] = float(np.max(np.abs(E))) if E.size else 0.0
    return ResidualReport(psd_min, asym, eq)


# solver-side tightening so the nominal re-check survives solver accuracy
_MARGIN_SAFETY = 1.05
_EQ_SAFETY = 0.95


def _classify(report, options):
    if report.passes(options.psd_margin, options.eq_tol):
        return FEASIBLE
    if report.passes(options.psd_margin / 10, options.eq_tol * 10):
        return MARGINAL
    return INFEASIBLE


def solve(problem: LmiProblem) -> LmiSolution:
    """Search for a feasible point with the conic backend, then re-verify independently."""
    import cvxpy as cp

    opts = problem.options
    used = set()
    for c in problem.psd_constraints + problem.equality_constraints:
        used |= c.expr.variables()
    for v in problem.variables:
        if v.name not in used:
            raise LmiError(f"ill-posed problem: variable {v.name!r} appears in no constraint")
    if not problem.psd_constraints and not problem.equality_constraints:
        raise LmiError("ill-posed problem: no constraints")

    # scaled decision variables and their original-space expressions
    tilde, orig = {}, {}
    for v in problem.variables:
        L = problem.left_factors.get(v.name)
        shape = v.shape if L is None else (L.shape[1], v.shape[1])
        Xt = cp.Variable(shape, symmetric=v.symmetric, name=v.name)
        tilde[v.name] = Xt
        orig[v.name] = _unscale(problem, v, Xt)

    cons = []
    for c in problem.psd_constraints:
        F = c.expr.to_cvxpy(orig)
        k = c.expr.shape[0]
        D = np.eye(k) if c.congruence is None else c.congruence
        G = D @ F @ D.T
        cons.append(0.5 * (G + G.T) - opts.psd_margin * _MARGIN_SAFETY * (D @ D.T) >> 0)
    for c in problem.equality_constraints:
        E = c.expr.to_cvxpy(orig)
        cons.append(E == 0 if c.native else cp.abs(E / opts.eq_tol) <= _EQ_SAFETY)
    if opts.normalization is not None and problem.is_homogeneous():
        # bound the solver variable itself; in scaled coordinates this keeps every direction O(1)
        for v in problem.variables:
            if v.symmetric:
                bound = opts.normalization * opts.psd_margin
                cons.append(bound * np.eye(v.shape[0]) - tilde[v.name] >> 0)

    objective = 0
    if opts.conditioning_reg > 0:
        objective = opts.conditioning_reg * sum(cp.trace(orig[v.name]) for v in problem.variables if v.symmetric)
    prob = cp.Problem(cp.Minimize(objective), cons)

    solver_status = _run_backend(prob, opts)
    if any(tilde[v.name].value is None for v in problem.variables):
        return LmiSolution({}, INFEASIBLE, None, solver_status, opts.psd_margin, opts.eq_tol)

    assignments = {}
    for v in problem.variables:
        X = np.asarray(_unscale(problem, v, np.asarray(tilde[v.name].value, dtype=float)), dtype=float)
        X = X.reshape(v.shape)
        if v.symmetric:
            X = 0.5 * (X + X.T)
        assignments[v.name] = X
    report = verify_solution(problem, assignments)
    return LmiSolution(assignments, _classify(report, opts), report, solver_status, opts.psd_margin, opts.eq_tol)


def _unscale(problem, v, Xt):
    T = problem.scalings.get(v.name)
    L = problem.left_factors.get(v.name)
    if v.symmetric:
        return Xt if T is None else T @ Xt @ T.T
    X = Xt if T is None else Xt @ T.T
    return X if L is None else L @ X


def _run_backend(prob, opts) -> str:
    import cvxpy as cp

    attempts = [opts.solver] + [s for s in ("CLARABEL", "SCS") if s != opts.solver]
    last = "not-run"
    for name in attempts:
        if name not in cp.installed_solvers():
            continue
        kwargs = {}
        if name == "CLARABEL":
            kwargs = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, max_iter=opts.max_iter)
        elif name == "SCS":
            kwargs = dict(eps=1e-9, max_iters=max(opts.max_iter, 20000))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                prob.solve(solver=name, **kwargs)
        except (KeyboardInterrupt, SystemExit):
            raise
        except BaseException as exc:  # noqa: BLE001 - Clarabel reports Rust panics as BaseException
            last = f"{name}: error ({type(exc).__name__}: {exc})"
            continue
        last = f"{name}: {prob.status}"
        if prob.status in ("optimal", "optimal_inaccurate"):
            return last
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            return last
    return last
