"""Homogeneous control systems, Lyapunov candidates and Lie derivatives.

A system has the form ``x' = f(x) + G1(x) u + G2(x) w`` with output
``y = h(x) + d u``, scalar control ``u``, disturbance ``w`` in ``R^xi`` and a
constant vector ``d`` with ``|d| = theta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import Compiled, CompiledVector, EvalError, Expr, Num, diff, parse, to_text
from .expr.diff import add as _add, mul as _mul
from .homogeneity import (
    Dilation,
    HomogeneousNorm,
    check_homogeneous,
    homo_norm,
    sphere_points,
)

ExprLike = Expr | str | float | int


def _as_expr(e: ExprLike, variables=None) -> Expr:
    if isinstance(e, Expr):
        return e
    if isinstance(e, (int, float)):
        return Num(float(e))
    return parse(str(e), variables)


def state_vars(n: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(n))


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0


@dataclass(frozen=True)
class HomogeneousSystem:
    dilation: Dilation
    k: float
    f: tuple[Expr, ...]
    G1: tuple[Expr, ...]
    G2: tuple[tuple[Expr, ...], ...]  # n rows, xi columns
    h: tuple[Expr, ...]
    d: tuple[float, ...]
    theta: float | None = None
    name: str = ""

    def __post_init__(self):
        n = self.dilation.n
        if len(self.f) != n or len(self.G1) != n or len(self.G2) != n:
            raise ValueError("f, G1 and G2 must have one entry per state")
        widths = {len(row) for row in self.G2}
        if len(widths) != 1 or 0 in widths:
            raise ValueError("G2 must be a rectangular n x xi matrix with xi >= 1")
        if len(self.h) != len(self.d) or not self.h:
            raise ValueError("h and d must have the same positive length")
        if any(not np.isfinite(v) for v in self.d):
            raise ValueError("d must be finite")
        if self.theta is None:
            object.__setattr__(self, "theta", float(np.linalg.norm(self.d)))
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")

    @classmethod
    def build(
        cls,
        weights: Sequence[float],
        k: float,
        f: Sequence[ExprLike],
        G1: Sequence[ExprLike],
        G2: Sequence[Sequence[ExprLike]],
        h: Sequence[ExprLike],
        d: Sequence[float],
        theta: float | None = None,
        name: str = "",
    ) -> "HomogeneousSystem":
        names = set(state_vars(len(weights)))

        def ex(e):
            return _as_expr(e, names)

        return cls(
            dilation=Dilation(tuple(weights)),
            k=float(k),
            f=tuple(ex(e) for e in f),
            G1=tuple(ex(e) for e in G1),
            G2=tuple(tuple(ex(e) for e in row) for row in G2),
            h=tuple(ex(e) for e in h),
            d=tuple(float(v) for v in d),
            theta=theta,
            name=name,
        )

    @property
    def n(self) -> int:
        return self.dilation.n

    @property
    def xi(self) -> int:
        return len(self.G2[0])

    @property
    def l_out(self) -> int:
        return len(self.h)

    @property
    def r0(self) -> float:
        return self.dilation.r0

    @property
    def variables(self) -> tuple[str, ...]:
        return state_vars(self.n)

    @property
    def d_vec(self) -> np.ndarray:
        return np.asarray(self.d)

    def G2_column(self, j: int) -> tuple[Expr, ...]:
        return tuple(row[j] for row in self.G2)

    def describe(self) -> dict:
        return {
            "weights": list(self.dilation.weights),
            "k": self.k,
            "f": [to_text(e) for e in self.f],
            "G1": [to_text(e) for e in self.G1],
            "G2": [[to_text(e) for e in row] for row in self.G2],
            "h": [to_text(e) for e in self.h],
            "d": list(self.d),
            "theta": self.theta,
        }


@dataclass(frozen=True)
class LyapunovCandidate:
    V: Expr
    nu: float
    degree: float | None = None  # defaults to k + 2 r0

    @classmethod
    def build(cls, V: ExprLike, nu: float, degree: float | None = None):
        return cls(_as_expr(V), float(nu), degree)

    def norm(self, sys: HomogeneousSystem) -> HomogeneousNorm:
        return HomogeneousNorm(sys.dilation, self.nu)

    def expected_degree(self, sys: HomogeneousSystem) -> float:
        return sys.k + 2 * sys.r0


# --------------------------------------------------------------------------
# Lie derivatives


def _dot(coeffs: Sequence[Expr], field_: Sequence[Expr]) -> Expr:
    acc: Expr | None = None
    for a, b in zip(coeffs, field_):
        if _is_zero(a) or _is_zero(b):
            continue
        term = _mul(a, b)
        acc = term if acc is None else _add(acc, term)
    return acc if acc is not None else Num(0.0)


@dataclass
class LieDerivatives:
    """Symbolic ``L_f V``, ``L_G1 V`` and ``L_G2 V`` with batch evaluators.

    Every evaluator returns exactly 0 at the origin.
    """

    grad: tuple[Expr, ...]
    LfV_expr: Expr
    LG1V_expr: Expr
    LG2V_expr: tuple[Expr, ...]
    variables: tuple[str, ...]
    _prog: CompiledVector = field(init=False, repr=False)

    def __post_init__(self):
        self._prog = CompiledVector(
            [self.LfV_expr, self.LG1V_expr, *self.LG2V_expr], self.variables
        )

    def _eval(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros((X.shape[0], len(self._prog)))
        nz = np.any(X != 0, axis=1)
        if np.any(nz):
            out[nz] = self._prog(X[nz])
        return out

    def LfV(self, X) -> np.ndarray:
        return self._eval(X)[:, 0]

    def LG1V(self, X) -> np.ndarray:
        return self._eval(X)[:, 1]

    def LG2V(self, X) -> np.ndarray:
        return self._eval(X)[:, 2:]

    def all(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        out = self._eval(X)
        return out[:, 0], out[:, 1], out[:, 2:]


def lie_derivatives(sys: HomogeneousSystem, lyap: LyapunovCandidate) -> LieDerivatives:
    grad = tuple(diff(lyap.V, v) for v in sys.variables)
    return LieDerivatives(
        grad=grad,
        LfV_expr=_dot(grad, sys.f),
        LG1V_expr=_dot(grad, sys.G1),
        LG2V_expr=tuple(_dot(grad, sys.G2_column(j)) for j in range(sys.xi)),
        variables=sys.variables,
    )


# --------------------------------------------------------------------------
# pointwise evaluation of every system quantity


@dataclass
class PointData:
    """System quantities at a batch of states (origin rows are all zero)."""

    X: np.ndarray
    Gamma: np.ndarray
    V: np.ndarray
    LfV: np.ndarray
    L1: np.ndarray  # L_G1 V
    L2: np.ndarray  # (m, xi)
    h: np.ndarray  # (m, l)
    f: np.ndarray  # (m, n)
    G1: np.ndarray  # (m, n)
    G2: np.ndarray  # (m, n, xi)

    @property
    def L2norm(self) -> np.ndarray:
        return np.linalg.norm(self.L2, axis=1)


class SystemModel:
    """Evaluates ``V``, its Lie derivatives and the plant data in one pass."""

    def __init__(self, sys: HomogeneousSystem, lyap: LyapunovCandidate):
        self.sys = sys
        self.lyap = lyap
        self.norm = lyap.norm(sys)
        self.lie = lie_derivatives(sys, lyap)
        n, xi, lo = sys.n, sys.xi, sys.l_out
        exprs = [lyap.V, self.lie.LfV_expr, self.lie.LG1V_expr, *self.lie.LG2V_expr]
        exprs += list(sys.h) + list(sys.f) + list(sys.G1)
        exprs += [e for row in sys.G2 for e in row]
        self._prog = CompiledVector(exprs, sys.variables)
        o = 3 + xi
        self._slices = {
            "L2": slice(3, o),
            "h": slice(o, o + lo),
            "f": slice(o + lo, o + lo + n),
            "G1": slice(o + lo + n, o + lo + 2 * n),
            "G2": slice(o + lo + 2 * n, o + lo + 2 * n + n * xi),
        }
        self._dyn = CompiledVector(
            list(sys.f) + list(sys.G1) + [e for row in sys.G2 for e in row], sys.variables
        )

    @property
    def variables(self) -> tuple[str, ...]:
        return self.sys.variables

    def evaluate(self, X) -> PointData:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        m = X.shape[0]
        out = np.zeros((m, len(self._prog)))
        nz = np.any(X != 0, axis=1)
        if np.any(nz):
            out[nz] = self._prog(X[nz])
        s = self._slices
        n, xi = self.sys.n, self.sys.xi
        gamma = np.atleast_1d(homo_norm(self.norm, X))
        return PointData(
            X=X,
            Gamma=gamma,
            V=out[:, 0],
            LfV=out[:, 1],
            L1=out[:, 2],
            L2=out[:, s["L2"]],
            h=out[:, s["h"]],
            f=out[:, s["f"]],
            G1=out[:, s["G1"]],
            G2=out[:, s["G2"]].reshape(m, n, xi),
        )

    def dynamics(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``f``, ``G1`` and ``G2`` at ``X`` (zero at the origin)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        m, n, xi = X.shape[0], self.sys.n, self.sys.xi
        out = np.zeros((m, len(self._dyn)))
        nz = np.any(X != 0, axis=1)
        if np.any(nz):
            out[nz] = self._dyn(X[nz])
        return out[:, :n], out[:, n : 2 * n], out[:, 2 * n :].reshape(m, n, xi)

    def V(self, X) -> np.ndarray:
        return self.evaluate(X).V


# --------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    passed: bool
    max_error: float = 0.0
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check]
    synthesizable: bool
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "synthesizable": self.synthesizable,
            "notes": list(self.notes),
            "checks": [
                {"name": c.name, "passed": c.passed, "max_error": c.max_error, "detail": c.detail}
                for c in self.checks
            ],
        }


def _degree_check(name, exprs, degree, sys, samples, tol, seed, vector_field=False) -> Check:
    prog = CompiledVector(list(exprs), sys.variables)
    try:
        rep = check_homogeneous(
            prog, degree, sys.dilation, samples=samples, tol=tol, seed=seed,
            vector_field=vector_field,
        )
    except EvalError as exc:
        return Check(name, False, float("inf"), f"evaluation failed: {exc}")
    detail = f"degree {degree:g}"
    if not rep.passed and rep.worst_point is not None:
        detail += f"; worst at x={rep.worst_point.tolist()}, eps={rep.worst_eps}"
    return Check(name, rep.passed, rep.max_rel_error, detail)


def validate_system(
    sys: HomogeneousSystem,
    lyap: LyapunovCandidate,
    samples: int = 64,
    tol: float = 1e-8,
    seed: int = 0,
    sphere_samples: int = 1024,
) -> ValidationReport:
    """Run every structural and homogeneity check; failures become report entries."""
    checks: list[Check] = []
    k, r0 = sys.k, sys.r0
    checks.append(Check("k > -r0", k > -r0, 0.0, f"k={k:g}, r0={r0:g}"))
    checks.append(_degree_check("degree of f", sys.f, k, sys, samples, tol, seed, True))
    checks.append(_degree_check("degree of G1", sys.G1, -r0, sys, samples, tol, seed, True))
    for j in range(sys.xi):
        checks.append(
            _degree_check(f"degree of G2[:, {j}]", sys.G2_column(j), -r0, sys, samples, tol, seed, True)
        )
    checks.append(_degree_check("degree of h", sys.h, k + r0, sys, samples, tol, seed))

    # h(x).d == 0 identically
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples, sys.n))
    d = sys.d_vec
    try:
        H = CompiledVector(list(sys.h), sys.variables)(X)
        hd = np.abs(H @ d)
        scale = max(float(np.max(np.abs(H))) * float(np.linalg.norm(d)), 1e-300)
        err = float(np.max(hd)) / scale if np.any(d != 0) else 0.0
        checks.append(Check("h(x).d == 0", err <= tol, err))
    except EvalError as exc:
        checks.append(Check("h(x).d == 0", False, float("inf"), str(exc)))
    dd = abs(float(d @ d) - sys.theta**2)
    checks.append(Check("d.d == theta^2", dd <= tol * max(1.0, sys.theta**2), dd))

    origin = np.zeros((1, sys.n))
    for label, exprs in (("f(0) == 0", sys.f), ("h(0) == 0", sys.h)):
        try:
            val = CompiledVector(list(exprs), sys.variables)(origin)
            err = float(np.max(np.abs(val)))
            checks.append(Check(label, err == 0.0, err))
        except EvalError as exc:
            checks.append(Check(label, False, float("inf"), f"not defined at 0: {exc}"))

    vdeg = lyap.degree if lyap.degree is not None else lyap.expected_degree(sys)
    expected = lyap.expected_degree(sys)
    checks.append(
        Check("V degree == k + 2 r0", abs(vdeg - expected) <= 1e-12, abs(vdeg - expected),
              f"declared {vdeg:g}, required {expected:g}")
    )
    checks.append(_degree_check("degree of V", [lyap.V], vdeg, sys, samples, tol, seed))
    try:
        norm = lyap.norm(sys)
        P, _ = sphere_points(norm, sphere_samples, seed)
        vmin = float(np.min(Compiled(lyap.V, sys.variables)(P)))
        checks.append(Check("V > 0 on sphere", vmin > 0, 0.0, f"min V on sphere = {vmin:.6g}"))
    except (EvalError, ValueError) as exc:
        checks.append(Check("V > 0 on sphere", False, float("inf"), str(exc)))

    notes = []
    synthesizable = sys.theta > 0
    if not synthesizable:
        notes.append("fixture-only: synthesis pipeline requires theta>0")
    return ValidationReport(checks, synthesizable, notes)


# --------------------------------------------------------------------------
# fixtures


@dataclass(frozen=True)
class ExampleBundle:
    """A fixture system with its Lyapunov candidate and closed-form pieces."""

    name: str
    system: HomogeneousSystem
    lyapunov: LyapunovCandidate
    exprs: dict[str, Expr]
    params: dict[str, object]

    def compiled(self, key: str) -> Compiled:
        return Compiled(self.exprs[key], self.system.variables)


EX3_VARPI = "-x1^6 + x1^3*x2^3 + apow(x2, 3)*(x1^2 + x2^2)^(3/2)"


def _ex1() -> ExampleBundle:
    sys = HomogeneousSystem.build(
        [1.0], 2.0, f=["x1^3"], G1=["1"], G2=[["1"]], h=["x1"], d=[0.0], name="ex1"
    )
    lyap = LyapunovCandidate.build("x1^4/4", nu=2.0)
    return ExampleBundle("ex1", sys, lyap, {"alpha_star": parse("-6*x1^3")}, {})


def _ex2() -> ExampleBundle:
    sys = HomogeneousSystem.build(
        [1.0], 2.0, f=["x1^3"], G1=["1"], G2=[["1"]], h=["x1"], d=[0.0], name="ex2"
    )
    lyap = LyapunovCandidate.build("x1^2/2", nu=2.0)
    exprs = {
        "alpha_star": parse("-4*x1^3 - 2.5*x1"),
        "E": parse("2*x1^2"),
        "l": parse("4*x1^4"),
        "R1": parse("1/(2*x1^2 + 1.25)"),
        "R2": parse("1"),
    }
    params = {"beta": 2.0, "lambda": 2.0, "gamma": (1.0, 2.0), "gamma0": (1.0, 2.0)}
    return ExampleBundle("ex2", sys, lyap, exprs, params)


def _ex3() -> ExampleBundle:
    sys = HomogeneousSystem.build(
        [1.0, 1.0], 2.0,
        f=["-x1^3 + x2^3", "0"], G1=["0", "1"], G2=[["0"], ["1"]],
        h=["x2^3"], d=[0.0], name="ex3",
    )
    lyap = LyapunovCandidate.build("(x1^4 + x2^4)/4", nu=4.0)
    w = f"({EX3_VARPI})"
    root = f"sqrt({w}^2 + x2^12)"
    exprs = {
        "varpi": parse(EX3_VARPI),
        # rationalized form of -(varpi + root)/x2^3, finite where x2 = 0
        "alpha": parse(f"-x2^9/({root} - {w})"),
        "l_bar": parse(f"2*({root} - {w}) + 4*(apow(x2, 3)*(x1^2 + x2^2)^(3/2) - x2^6)"),
        "R1_bar": parse(f"2*x2^6/({w} + {root})"),
        "l_tilde": parse(
            f"2*({root} - {w}) + 4*(apow(x2, 3)*(x1^2 + x2^2)^(3/2) - x2^6) - x2^6"
        ),
    }
    return ExampleBundle("ex3", sys, lyap, exprs, {"gamma": (1.0, 2.0)})


def _ex4() -> ExampleBundle:
    sys = HomogeneousSystem.build(
        [3.0, 1.0], 0.0,
        f=["-x1 + x2^3", "0"], G1=["0", "1"], G2=[["0"], ["1"]],
        h=["x2", "0"], d=[0.0, 1.0], theta=1.0, name="ex4",
    )
    lyap = LyapunovCandidate.build("(apow(x1, 4/3) + x2^4)^(1/2)", nu=4.0)
    exprs = {
        "LG1V": parse("2*x2^3*(apow(x1, 4/3) + x2^4)^(-1/2)"),
        "f_tilde_2": parse("x2^3*(apow(x1, 4/3) + x2^4)^(-1/2)"),
    }
    params = {
        "q0": "abs(x1) >= 4*apow(x2, 3)",
        "c10": 1.0,
        "pi_coeff": 1.0,
        "kappa": 11.0,
        "beta": 2.0,
        "lambda": 2.0,
    }
    return ExampleBundle("ex4", sys, lyap, exprs, params)


def builtin_examples() -> dict[str, ExampleBundle]:
    return {b.name: b for b in (_ex1(), _ex2(), _ex3(), _ex4())}
