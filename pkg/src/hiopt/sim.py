"""Closed-loop simulation, finite-horizon costs and L2-gain measurement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, solve_ivp

from .expr import CompiledVector, parse
from .lft import PowerKInfinity, lf_transform
from .sysdef import PointData, SystemModel

ORIGIN_EPS = 1e-9

Controller = Callable[[PointData], np.ndarray]


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float | None = None, x=None):
        self.t = t
        self.x = None if x is None else [float(v) for v in x]
        where = f" at t={t:.6g}, x={self.x}" if t is not None else ""
        super().__init__(message + where)


# --------------------------------------------------------------------------
# disturbances


@dataclass(frozen=True)
class DisturbanceSpec:
    """``zero``, ``constant``, ``sinusoid``, ``worst_case`` or ``custom``.

    A sinusoid is ``amplitude * sin(frequency t + phase) * exp(-decay t)``.
    ``worst_case`` uses ``lam`` and the quadratic-family ``gamma``; ``custom``
    holds one expression per component in ``t`` and ``x1..xn``.
    """

    kind: str = "zero"
    value: tuple[float, ...] = ()
    amplitude: tuple[float, ...] = ()
    frequency: float = 1.0
    phase: float = 0.0
    decay: float = 0.0
    lam: float = 2.0
    gamma: PowerKInfinity | None = None
    exprs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sinusoid", "worst_case", "custom"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "worst_case":
            if self.gamma is None:
                raise ValueError("worst_case disturbance needs gamma")
            if not 0 < self.lam <= 2:
                raise ValueError("lambda must lie in (0, 2]")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = list(self.value)
        elif self.kind == "sinusoid":
            d.update(amplitude=list(self.amplitude), frequency=self.frequency,
                     phase=self.phase, decay=self.decay)
        elif self.kind == "worst_case":
            d.update(lam=self.lam, gamma={"a": self.gamma.a, "p": self.gamma.p})
        elif self.kind == "custom":
            d["exprs"] = list(self.exprs)
        return d


def worst_case_w(L2: np.ndarray, gamma: PowerKInfinity, lam: float) -> np.ndarray:
    """``lam (gamma')^{-1}(2|L2|) L2/|L2|`` row-wise (0 where ``L2 = 0``)."""
    L2 = np.atleast_2d(L2)
    n = np.linalg.norm(L2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where(n > 0, lam * gamma.inverse_derivative(2 * n) / np.where(n > 0, n, 1.0), 0.0)
    return L2 * mag[:, None]


def delta_w(L2, w, gamma: PowerKInfinity, lam: float, beta: float) -> np.ndarray:
    """``beta (2 L2.w - lam l_gamma(2|L2|) - lam gamma(|w|/lam))``; never positive."""
    L2 = np.atleast_2d(L2)
    w = np.atleast_2d(w)
    ell = lf_transform(gamma)
    return beta * (
        2 * np.sum(L2 * w, axis=1)
        - lam * ell(2 * np.linalg.norm(L2, axis=1))
        - lam * gamma(np.linalg.norm(w, axis=1) / lam)
    )


class Disturbance:
    """``w(t, pd)`` for a batch of times and states."""

    def __init__(self, spec: DisturbanceSpec, model: SystemModel):
        self.spec = spec
        self.xi = model.sys.xi
        self._custom = None
        if spec.kind == "custom":
            if len(spec.exprs) != self.xi:
                raise ValueError(f"custom disturbance needs {self.xi} expressions")
            names = ("t",) + model.sys.variables
            self._custom = CompiledVector([parse(e, set(names)) for e in spec.exprs], names)
        for vec in (spec.value, spec.amplitude):
            if vec and len(vec) != self.xi:
                raise ValueError(f"disturbance vector must have {self.xi} entries")

    def __call__(self, t, pd: PointData) -> np.ndarray:
        s = self.spec
        m = pd.X.shape[0]
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (m,))
        if s.kind == "zero":
            return np.zeros((m, self.xi))
        if s.kind == "constant":
            return np.tile(np.asarray(s.value, dtype=np.float64), (m, 1))
        if s.kind == "sinusoid":
            amp = np.asarray(s.amplitude or (1.0,) * self.xi, dtype=np.float64)
            env = np.sin(s.frequency * t + s.phase) * np.exp(-s.decay * t)
            return env[:, None] * amp[None, :]
        if s.kind == "worst_case":
            return worst_case_w(pd.L2, s.gamma, s.lam)
        return self._custom(np.column_stack([t, pd.X]))


# --------------------------------------------------------------------------
# controllers


def zero_controller(pd: PointData) -> np.ndarray:
    return np.zeros(pd.X.shape[0])


def expr_controller(expr, variables) -> Controller:
    """Feedback ``u = e(x)`` with ``u(0) = 0``."""
    prog = CompiledVector([parse(expr) if isinstance(expr, str) else expr], tuple(variables))

    def u(pd: PointData) -> np.ndarray:
        out = np.zeros(pd.X.shape[0])
        nz = np.any(pd.X != 0, axis=1)
        if np.any(nz):
            out[nz] = prog(pd.X[nz])[:, 0]
        return out

    return u


def synthesized_controller(ctrl, gain: float = 1.0) -> Controller:
    """``u = gain * alpha*(x)`` from a :class:`SynthesizedController`."""

    def u(pd: PointData) -> np.ndarray:
        return gain * ctrl.pieces(None, pd).alpha_star

    return u


# --------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (N, n)
    u: np.ndarray  # (N,)
    w: np.ndarray  # (N, xi)
    y: np.ndarray  # (N, l)
    V_vals: np.ndarray  # (N,)
    terminated_at_origin: bool = False
    t_origin: float | None = None
    nfev: int = 0
    n_steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.times[-1])


def integrate(
    model: SystemModel,
    controller: Controller,
    dist: DisturbanceSpec,
    x0: Sequence[float],
    T: float,
    tol: float = 1e-9,
    nodes: int = 1000,
    per_step: int = 8,
    method: str = "DOP853",
) -> Trajectory:
    """Integrate ``x' = f + G1 u + G2 w`` on ``[0, T]``.

    Adaptive explicit Runge-Kutta with relative tolerance ``tol`` and absolute
    floor ``tol * 1e-3``. Outputs sit on a grid of at least ``nodes`` points
    that also subdivides every accepted step into ``per_step`` intervals.
    Once ``Gamma(x) < 1e-9`` the state is clamped to the origin.
    """
    if not T > 0:
        raise ValueError("horizon T must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    n = model.sys.n
    if x0.shape != (n,):
        raise ValueError(f"x0 must have {n} entries")
    w_fn = Disturbance(dist, model)
    norm = model.norm

    def rhs(t, x):
        if not np.all(np.isfinite(x)):
            raise IntegrationError("non-finite state", t, x)
        if norm(x) < ORIGIN_EPS:
            return np.zeros(n)
        pd = model.evaluate(x[None, :])
        u = controller(pd)
        w = w_fn(t, pd)
        return pd.f[0] + pd.G1[0] * u[0] + pd.G2[0] @ w[0]

    def at_origin(t, x):
        return norm(x) - ORIGIN_EPS

    at_origin.terminal = True
    at_origin.direction = -1

    if norm(x0) < ORIGIN_EPS:
        sol = None
        t_end, steps, nfev, hit = 0.0, np.array([0.0]), 0, True
    else:
        sol = solve_ivp(
            rhs, (0.0, float(T)), x0, method=method, rtol=tol, atol=tol * 1e-3,
            dense_output=True, events=at_origin,
        )
        if sol.status == -1:
            raise IntegrationError(f"integration failed: {sol.message}", float(sol.t[-1]), sol.y[:, -1])
        hit = sol.status == 1
        t_end = float(sol.t[-1])
        steps = sol.t
        nfev = int(sol.nfev)

    grid = [np.linspace(0.0, T, max(nodes, 2))]
    if len(steps) > 1:
        sub = np.linspace(0.0, 1.0, per_step + 1)[None, :]
        grid.append((steps[:-1, None] + np.diff(steps)[:, None] * sub).ravel())
    if hit:
        grid.append(np.array([t_end]))
    times = np.unique(np.concatenate(grid))
    times = times[(times >= 0) & (times <= T)]

    X = np.zeros((len(times), n))
    live = times <= t_end if hit else np.ones(len(times), dtype=bool)
    if sol is not None:
        X[live] = sol.sol(times[live]).T
    if hit:
        X[times >= t_end] = 0.0
    X[0] = x0

    pd = model.evaluate(X)
    u = controller(pd)
    w = w_fn(times, pd)
    origin = ~np.any(X != 0, axis=1)
    u[origin] = 0.0
    w[origin] = 0.0
    y = pd.h + np.outer(u, model.sys.d_vec)
    return Trajectory(
        times=times, states=X, u=u, w=w, y=y, V_vals=pd.V,
        terminated_at_origin=bool(hit), t_origin=t_end if hit else None,
        nfev=nfev, n_steps=max(len(steps) - 1, 0),
        meta={"tol": tol, "method": method, "disturbance": dist.to_dict()},
    )


# --------------------------------------------------------------------------
# costs


@dataclass
class CostPieces:
    """``E``, ``l``, ``R1``, ``R2`` as batch functions of the state, plus ``gamma0``."""

    E: Callable[[np.ndarray], np.ndarray]
    l: Callable[[np.ndarray], np.ndarray]
    R1: Callable[[np.ndarray], np.ndarray]
    R2: Callable[[np.ndarray], np.ndarray]
    gamma0: PowerKInfinity

    @classmethod
    def from_controller(cls, ctrl) -> "CostPieces":
        return cls(
            E=ctrl.E,
            l=ctrl.l,
            R1=ctrl.R1,
            R2=ctrl.R2,
            gamma0=ctrl.gamma0,
        )

    @classmethod
    def from_exprs(cls, exprs: dict, variables, gamma0: PowerKInfinity) -> "CostPieces":
        """Closed-form pieces; each expression must be defined at the origin."""

        def f(key):
            prog = CompiledVector([exprs[key]], tuple(variables))
            return lambda X: prog(np.atleast_2d(X))[:, 0]

        return cls(E=f("E"), l=f("l"), R1=f("R1"), R2=f("R2"), gamma0=gamma0)


@dataclass
class CostBreakdown:
    T: float
    terminal: float
    int_l: float
    int_uR1u: float
    int_yR2y: float
    int_gamma0: float
    J_T: float
    running_J: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items() if k != "running_J"}


def _window(traj: Trajectory, T: float | None):
    T = traj.T if T is None else float(T)
    if T > traj.T * (1 + 1e-12):
        raise ValueError(f"horizon {T} exceeds trajectory length {traj.T}")
    keep = traj.times <= T
    return T, keep


def cost_integrand(traj: Trajectory, pieces: CostPieces, keep=None):
    keep = np.ones(len(traj.times), dtype=bool) if keep is None else keep
    X = traj.states[keep]
    l = pieces.l(X)
    uR1u = traj.u[keep] ** 2 * pieces.R1(X)
    yR2y = np.sum(traj.y[keep] ** 2, axis=1) * pieces.R2(X)
    g0 = pieces.gamma0(np.linalg.norm(traj.w[keep], axis=1))
    return l, uR1u, yR2y, g0


def evaluate_cost(traj: Trajectory, pieces: CostPieces, T: float | None = None) -> CostBreakdown:
    """``J_T = E(x(T)) + int (l + u R1 u + y'R2 y - gamma0(|w|)) dt``.

    Composite Simpson quadrature on the trajectory grid; ``running_J`` holds
    ``E(x(t))`` plus the integral up to each node.
    """
    T, keep = _window(traj, T)
    t = traj.times[keep]
    l, uR1u, yR2y, g0 = cost_integrand(traj, pieces, keep)
    E = pieces.E(traj.states[keep])
    ints = [float(simpson(v, x=t)) for v in (l, uR1u, yR2y, g0)]
    running = E + cumulative_simpson(l + uR1u + yR2y - g0, x=t, initial=0.0)
    terminal = float(E[-1])
    J = terminal + ints[0] + ints[1] + ints[2] - ints[3]
    return CostBreakdown(T, terminal, *ints, J_T=J, running_J=running)


def output_energy(traj: Trajectory) -> np.ndarray:
    """Running ``int_0^t |y|^2``."""
    return cumulative_simpson(np.sum(traj.y**2, axis=1), x=traj.times, initial=0.0)


# --------------------------------------------------------------------------
# checks


@dataclass
class SubCheck:
    name: str
    passed: bool
    J_T: float
    bound: float
    detail: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CostIdentityReport:
    x0: list[float]
    T: float
    J_min: float
    tol: float
    checks: list[SubCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "x0": self.x0, "T": self.T, "J_min": self.J_min, "tol": self.tol,
            "passed": self.passed, "checks": [c.to_dict() for c in self.checks],
        }


def cost_identity_check(
    ctrl,
    x0: Sequence[float],
    T: float,
    tol: float | None = None,
    int_tol: float = 1e-9,
    sinusoid: DisturbanceSpec | None = None,
    gains: Sequence[float] = (0.5, 2.0),
    method: str = "DOP853",
) -> CostIdentityReport:
    """Finite-horizon optimality checks around ``J_min = 2 beta V(x0)``.

    (a) ``u = alpha*``, ``w = w*``: ``J_T = J_min``;
    (b) ``u = alpha*``, ``w`` zero or sinusoidal: ``J_T <= J_min``;
    (c) ``u = g alpha*`` (``g != 1``), ``w = w*``: ``J_T >= J_min``.
    ``tol`` defaults to ``1e-3 * J_min``.
    """
    model = ctrl.model
    x0 = np.asarray(x0, dtype=np.float64)
    J_min = float(2 * ctrl.beta * model.evaluate(x0).V[0])
    tol = 1e-3 * J_min if tol is None else tol
    pieces = CostPieces.from_controller(ctrl)
    worst = DisturbanceSpec("worst_case", lam=ctrl.lam, gamma=ctrl.gamma)
    sinusoid = sinusoid or DisturbanceSpec(
        "sinusoid", amplitude=(1.0,) * model.sys.xi, frequency=2.0, decay=0.5
    )

    def run(gain, dist):
        traj = integrate(model, synthesized_controller(ctrl, gain), dist, x0, T, int_tol,
                         method=method)
        return evaluate_cost(traj, pieces).J_T

    checks = []
    J = run(1.0, worst)
    checks.append(SubCheck("a: alpha*, w*", abs(J - J_min) <= tol, J, J_min, "|J_T - J_min| <= tol"))
    for label, dist in (("zero", DisturbanceSpec("zero")), ("sinusoid", sinusoid)):
        J = run(1.0, dist)
        checks.append(SubCheck(f"b: alpha*, w={label}", J <= J_min + tol, J, J_min, "J_T <= J_min + tol"))
    for g in gains:
        J = run(g, worst)
        checks.append(SubCheck(f"c: {g:g}*alpha*, w*", J >= J_min - tol, J, J_min, "J_T >= J_min - tol"))
    return CostIdentityReport(x0.tolist(), float(T), J_min, float(tol), checks)


@dataclass
class L2GainReport:
    passed: bool
    y_norm: float
    w_norm: float
    kappa_L: float
    c0: float
    bound: float
    tol: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def l2_gain_check(traj: Trajectory, kappa_L: float, c0: float, tol: float = 1e-6) -> L2GainReport:
    """``||y||_2 <= kappa_L ||w||_2 + c0`` over the trajectory horizon."""
    y_norm = float(np.sqrt(max(simpson(np.sum(traj.y**2, axis=1), x=traj.times), 0.0)))
    w_norm = float(np.sqrt(max(simpson(np.sum(traj.w**2, axis=1), x=traj.times), 0.0)))
    bound = kappa_L * w_norm + c0
    return L2GainReport(y_norm <= bound + tol, y_norm, w_norm, float(kappa_L), float(c0), bound, tol)
