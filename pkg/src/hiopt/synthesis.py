"""Inverse-optimal controller synthesis for homogeneous systems.

Pipeline: ``phi -> alpha_s -> R -> gamma -> f_tilde -> sphere constants ->
kappa -> alpha = (kappa/2) alpha_s -> alpha* = beta alpha -> cost pieces``.
All pointwise quantities are evaluated in batches from a :class:`PointData`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Compiled, EvalError, parse, parse_predicate, to_text
from .expr.predicate import CompiledPredicate
from .homogeneity import (
    EmptyConstraintSet,
    SphereBudget,
    SphereOptimum,
    sphere_optimize,
    sphere_points,
)
from .lft import PowerKInfinity, check_scaling, lf_transform
from .sysdef import (
    HomogeneousSystem,
    LyapunovCandidate,
    PointData,
    SystemModel,
    validate_system,
)

TOL_SWITCH = 1e-9


class SynthesisError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str, points=None):
        self.stage = stage
        self.message = message
        self.points = [list(map(float, p)) for p in (points if points is not None else [])]
        super().__init__(f"[{stage}] {message}")


@dataclass(frozen=True)
class SynthesisConfig:
    c10: float = 1.0
    pi_coeff: float | None = None  # c6 override for pi(s) = c6 s^(k+r0)
    q0_predicate: str | None = None
    beta: float = 2.0
    lam: float = 2.0
    kappa_margin: float = 0.05
    kappa: float | None = None  # explicit gain, checked against the H_kappa certificate
    known_stabilizer: str | None = None
    budget: SphereBudget = field(default_factory=SphereBudget)
    seed: int = 42
    tol_switch: float = TOL_SWITCH

    def __post_init__(self):
        if not self.c10 > 0:
            raise ValueError("c10 must be positive")
        if not self.beta >= 2:
            raise ValueError("beta must be at least 2")
        if not 0 < self.lam <= 2:
            raise ValueError("lambda must lie in (0, 2]")
        if not self.kappa_margin >= 0:
            raise ValueError("kappa_margin must be nonnegative")
        if self.pi_coeff is not None and not self.pi_coeff > 0:
            raise ValueError("pi_coeff must be positive")
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError("kappa must be positive")


# --------------------------------------------------------------------------
# pointwise building blocks


def build_phi(pd: PointData, c6: float, k: float, r0: float) -> np.ndarray:
    """``phi = L_f V + |L_G2 V| c6 Gamma^(k+r0)`` (0 at the origin)."""
    return pd.LfV + pd.L2norm * c6 * pd.Gamma ** (k + r0)


def _switch(pd: PointData, k: float, r0: float, tol_switch: float) -> np.ndarray:
    return np.abs(pd.L1) > tol_switch * pd.Gamma ** (k + r0)


def sontag_gain(phi: np.ndarray, L1: np.ndarray, on: np.ndarray) -> np.ndarray:
    """``(phi + sqrt(phi^2 + L1^4)) / L1^2`` where ``on``, else 0.

    Uses ``L1^2 / (sqrt(phi^2 + L1^4) - phi)`` for ``phi < 0`` to avoid
    cancellation.
    """
    q = np.where(on, L1 * L1, 1.0)
    r = np.hypot(phi, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(phi >= 0, (phi + r) / q, q / (r - phi))
    return np.where(on, s, 0.0)


def sontag_controller(pd, phi, c10, k, r0, tol_switch=TOL_SWITCH) -> np.ndarray:
    on = _switch(pd, k, r0, tol_switch)
    return np.where(on, -(c10 + sontag_gain(phi, pd.L1, on)) * pd.L1, 0.0)


def build_R(pd, phi, c10, theta, k, r0, tol_switch=TOL_SWITCH) -> np.ndarray:
    on = _switch(pd, k, r0, tol_switch)
    return 1.0 / (theta**2 * (c10 + sontag_gain(phi, pd.L1, on)))


def build_gamma(c6: float, c8: float) -> PowerKInfinity:
    """``gamma(s) = (c8/c6) s^2``."""
    return PowerKInfinity(c8 / c6, 2.0)


def ell_of_2L2(gamma: PowerKInfinity, L2norm: np.ndarray) -> np.ndarray:
    return lf_transform(gamma)(2.0 * L2norm)


def build_aux_field(pd: PointData, gamma: PowerKInfinity) -> np.ndarray:
    """``f_tilde = f + G2 l_gamma(2|L2|) L2 / |L2|^2`` (``f`` where ``L2 = 0``)."""
    L2n = pd.L2norm
    ell = ell_of_2L2(gamma, L2n)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(L2n > 0, ell / np.where(L2n > 0, L2n**2, 1.0), 0.0)
    corr = np.einsum("mij,mj->mi", pd.G2, pd.L2 * coef[:, None])
    return pd.f + corr


@dataclass
class Pieces:
    """Every controller and cost quantity at a batch of states."""

    pd: PointData
    phi: np.ndarray
    on: np.ndarray
    alpha_s: np.ndarray
    R: np.ndarray
    ell: np.ndarray  # l_gamma(2 |L2|)
    LftV: np.ndarray  # L_f V + ell
    alpha: np.ndarray | None = None
    alpha_star: np.ndarray | None = None
    hRh: np.ndarray | None = None
    H: np.ndarray | None = None
    l_bar: np.ndarray | None = None
    l: np.ndarray | None = None
    M: np.ndarray | None = None
    M1: np.ndarray | None = None


class SontagDesign:
    """Gain-independent part of the design: ``phi``, ``alpha_s``, ``R``, ``gamma``."""

    def __init__(self, model: SystemModel, c6: float, c10: float, gamma: PowerKInfinity,
                 tol_switch: float = TOL_SWITCH):
        self.model = model
        self.sys = model.sys
        self.c6 = float(c6)
        self.c10 = float(c10)
        self.gamma = gamma
        self.theta = float(self.sys.theta)
        self.tol_switch = tol_switch
        self.deg = self.sys.k + self.sys.r0

    def base(self, X, pd: PointData | None = None) -> Pieces:
        pd = pd if pd is not None else self.model.evaluate(X)
        k, r0 = self.sys.k, self.sys.r0
        phi = build_phi(pd, self.c6, k, r0)
        on = _switch(pd, k, r0, self.tol_switch)
        S = sontag_gain(phi, pd.L1, on)
        alpha_s = np.where(on, -(self.c10 + S) * pd.L1, 0.0)
        with np.errstate(divide="ignore"):
            R = 1.0 / (self.theta**2 * (self.c10 + S))
        ell = ell_of_2L2(self.gamma, pd.L2norm)
        return Pieces(pd, phi, on, alpha_s, R, ell, pd.LfV + ell)

    def full(self, X, kappa: float, beta: float, lam: float, pd: PointData | None = None) -> Pieces:
        p = self.base(X, pd)
        L1 = p.pd.L1
        p.alpha = 0.5 * kappa * p.alpha_s
        p.alpha_star = beta * p.alpha
        p.hRh = p.R * np.sum(p.pd.h**2, axis=1)
        drift = p.LftV + L1 * p.alpha
        p.H = -kappa * drift - p.hRh
        p.l_bar = -2 * beta * drift + beta * (2 - lam) * p.ell - beta * (beta - 2) * L1 * p.alpha
        p.l = p.l_bar - p.hRh / kappa
        q = L1 * L1
        root = np.hypot(p.phi, q)
        p.M = 0.5 * (-p.phi + root)
        p.M1 = 0.5 * (kappa - 1) * (p.phi + root) + 0.5 * kappa * self.c10 * q
        return p


# --------------------------------------------------------------------------
# sphere constants


@dataclass
class SphereConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    rho1: float | None
    rho2: float | None
    rho3: float | None
    rho4: float | None
    rho: float | None
    rho_m: float
    kappa_c: float
    kappa1: float
    c1_aux: float = 0.0  # min -(L_ftilde V + L_G1 V alpha) at kappa = 1
    aux_decrease: float | None = None  # same quantity at the selected kappa
    argpoints: dict[str, list[float]] = field(default_factory=dict)
    q0_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k not in ("argpoints", "q0_counts")}
        out["argpoints"] = dict(self.argpoints)
        out["q0_counts"] = dict(self.q0_counts)
        return out


@dataclass
class Q0Report:
    passed: bool
    switch_points: int
    q0_points: int
    not_in_q0: list[list[float]] = field(default_factory=list)  # P0 points outside Q0
    not_decreasing: list[list[float]] = field(default_factory=list)  # Q0 points with L_ft V >= 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compile_q0(text: str | None, variables) -> CompiledPredicate | None:
    if text is None:
        return None
    return CompiledPredicate(parse_predicate(text, set(variables)), tuple(variables), text)


def validate_Q0(design: SontagDesign, q0: CompiledPredicate | None, sample, max_report: int = 10) -> Q0Report:
    """Check ``P0 in Q0`` and ``cl(Q0) in P-`` on sphere samples."""
    P = sample[0]
    b = design.base(P)
    inside = q0(P) if q0 is not None else np.zeros(len(P), dtype=bool)
    switch = ~b.on
    bad_a = P[switch & ~inside]
    bad_b = P[inside & ~(b.LftV < 0)]
    return Q0Report(
        passed=len(bad_a) == 0 and len(bad_b) == 0,
        switch_points=int(switch.sum()),
        q0_points=int(inside.sum()),
        not_in_q0=bad_a[:max_report].tolist(),
        not_decreasing=bad_b[:max_report].tolist(),
    )


def sontag_condition(design: SontagDesign, sample, band: float = 1e-6, margin: float = 1e-9):
    """Sphere samples with ``|L_G1 V| <= band`` and ``phi > -margin`` (violations)."""
    P = sample[0]
    b = design.base(P)
    near = np.abs(b.pd.L1) <= max(band, design.tol_switch)
    return P[near & ~(b.phi <= -margin)]


def _opt(fn, design, constraint, mode, budget, seed, sample) -> SphereOptimum:
    return sphere_optimize(
        lambda P: fn(design.base(P)), design.model.norm, constraint, mode, budget, seed, sample
    )


def _optional(fn, design, constraint, mode, budget, seed, sample):
    try:
        return _opt(fn, design, constraint, mode, budget, seed, sample)
    except EmptyConstraintSet:
        return None


def estimate_constants(
    design: SontagDesign,
    q0: CompiledPredicate | None,
    config: SynthesisConfig,
    sample,
    c1: float,
    c2: float,
    c9: float,
) -> SphereConstants:
    """Gain-selection constants on ``S`` split by ``Q0``.

    An empty ``S`` intersect ``cl(Q0)`` (or ``S \\ Q0``) makes that case
    vacuous: its bound is 0 and its rho values are ``None``.
    """
    theta = design.theta
    budget, seed = config.budget, config.seed
    inQ = q0 if q0 is not None else (lambda P: np.zeros(len(P), dtype=bool))

    def outQ(P):
        return ~inQ(P)

    arg: dict[str, list[float]] = {}

    def record(name, res):
        if res is not None:
            arg[name] = res.argpoint.tolist()
            return float(res.value)
        return None

    rho1 = record("rho1", _optional(lambda b: -b.LftV, design, inQ, "min", budget, seed, sample))
    rho2 = record("rho2", _optional(lambda b: b.R * np.sum(b.pd.h**2, axis=1), design, inQ, "max", budget, seed, sample))
    rho3 = record("rho3", _optional(lambda b: b.pd.L1**2 / b.R, design, outQ, "min", budget, seed, sample))
    rho4 = record("rho4", _optional(lambda b: b.R * np.sum(b.pd.h**2, axis=1), design, outQ, "max", budget, seed, sample))
    rho = record("rho", _optional(lambda b: b.LftV, design, outQ, "max", budget, seed, sample))
    rho_m = record("rho_m", _opt(lambda b: b.R, design, None, "min", budget, seed, sample))

    if rho1 is not None:
        if not rho1 > 0:
            raise SynthesisError(
                "constants", f"rho1={rho1:.6g} <= 0: cl(Q0) is not inside the decrease set",
                [arg["rho1"]],
            )
        kappa_c = rho2 / rho1
    else:
        kappa_c = 0.0
    if rho3 is not None:
        if not rho3 > 0:
            raise SynthesisError(
                "constants", f"rho3={rho3:.6g} <= 0: L_G1 V vanishes outside Q0", [arg["rho3"]]
            )
        kappa1 = theta**2 * (rho + np.sqrt(rho**2 + 2 * rho3 * rho4 / theta**2)) / rho3
    else:
        kappa1 = 0.0

    c3 = c1 / 2
    c4 = 2 * c2**2 / c1
    c5 = float(np.sqrt(c4 / c3))
    c8 = c2
    c7 = (1.0 / c8) ** (1.0 / design.deg)
    P = sample[0]
    counts = {"sphere": len(P), "in_q0": int(np.sum(inQ(P)))}
    counts["outside_q0"] = counts["sphere"] - counts["in_q0"]
    return SphereConstants(
        c1=c1, c2=c2, c3=c3, c4=c4, c5=c5, c6=design.c6, c7=float(c7), c8=c8, c9=c9,
        rho1=rho1, rho2=rho2, rho3=rho3, rho4=rho4, rho=rho, rho_m=rho_m,
        kappa_c=float(kappa_c), kappa1=float(kappa1), argpoints=arg, q0_counts=counts,
    )


def select_kappa(constants: SphereConstants, config: SynthesisConfig) -> float:
    bounds = (constants.kappa_c, constants.kappa1, 1.0)
    if not all(np.isfinite(b) for b in bounds):
        raise SynthesisError("kappa", f"non-finite gain bounds {bounds}")
    return max(bounds) * (1.0 + config.kappa_margin)


# --------------------------------------------------------------------------
# the synthesized controller


@dataclass
class SynthesizedController:
    design: SontagDesign
    kappa: float
    beta: float
    lam: float
    constants: SphereConstants
    config: SynthesisConfig
    kappa_bound: float
    kappa_below_bound: bool = False
    q0_report: Q0Report | None = None

    @property
    def model(self) -> SystemModel:
        return self.design.model

    @property
    def sys(self) -> HomogeneousSystem:
        return self.design.sys

    @property
    def theta(self) -> float:
        return self.design.theta

    @property
    def gamma(self) -> PowerKInfinity:
        return self.design.gamma

    @property
    def ell_gamma(self) -> PowerKInfinity:
        return lf_transform(self.gamma)

    @property
    def gamma0(self) -> PowerKInfinity:
        """``beta lambda gamma(s / lambda)``."""
        g = self.gamma
        return PowerKInfinity(self.beta * self.lam ** (1 - g.p) * g.a, g.p)

    def pieces(self, X, pd: PointData | None = None) -> Pieces:
        return self.design.full(X, self.kappa, self.beta, self.lam, pd)

    # vectorized accessors
    def alpha_star(self, X) -> np.ndarray:
        return self.pieces(X).alpha_star

    def alpha(self, X) -> np.ndarray:
        return self.pieces(X).alpha

    def alpha_s(self, X) -> np.ndarray:
        return self.design.base(X).alpha_s

    def R(self, X) -> np.ndarray:
        return self.design.base(X).R

    def phi(self, X) -> np.ndarray:
        return self.design.base(X).phi

    def f_tilde(self, X) -> np.ndarray:
        return build_aux_field(self.model.evaluate(X), self.gamma)

    def H_kappa(self, X) -> np.ndarray:
        return self.pieces(X).H

    def l(self, X) -> np.ndarray:
        return self.pieces(X).l

    def l_bar(self, X) -> np.ndarray:
        return self.pieces(X).l_bar

    def M(self, X) -> np.ndarray:
        return self.pieces(X).M

    def M1(self, X) -> np.ndarray:
        return self.pieces(X).M1

    def E(self, X) -> np.ndarray:
        return 2 * self.beta * self.model.evaluate(X).V

    def R1(self, X) -> np.ndarray:
        return self.theta**2 * self.R(X) / self.kappa

    def R2(self, X) -> np.ndarray:
        return self.R(X) / self.kappa

    def closed_form(self) -> dict[str, str]:
        """Printable forms of the symbolic pieces; switched laws are numeric."""
        lie = self.model.lie
        numeric = "numeric (piecewise Sontag-type law)"
        return {
            "V": to_text(self.model.lyap.V),
            "LfV": to_text(lie.LfV_expr),
            "LG1V": to_text(lie.LG1V_expr),
            "LG2V": [to_text(e) for e in lie.LG2V_expr],
            "gamma": f"{self.gamma.a!r}*s^{self.gamma.p!r}",
            "gamma0": f"{self.gamma0.a!r}*s^{self.gamma0.p!r}",
            "alpha_star": numeric,
            "R": numeric,
            "l": numeric,
        }

    def summary(self) -> dict:
        return {
            "kappa": self.kappa,
            "kappa_bound": self.kappa_bound,
            "kappa_below_bound": self.kappa_below_bound,
            "beta": self.beta,
            "lambda": self.lam,
            "c10": self.design.c10,
            "theta": self.theta,
            "gamma": {"a": self.gamma.a, "p": self.gamma.p},
            "gamma0": {"a": self.gamma0.a, "p": self.gamma0.p},
            "constants": self.constants.to_dict(),
            "q0": self.q0_report.to_dict() if self.q0_report else None,
            "expressions": self.closed_form(),
        }


def _stabilizer_values(config, design: SontagDesign, P, pd) -> np.ndarray:
    if config.known_stabilizer is not None:
        alpha_h = parse(config.known_stabilizer, set(design.sys.variables))
        return Compiled(alpha_h, design.sys.variables)(P)
    # bootstrap: half the Sontag law
    return 0.5 * design.base(P, pd).alpha_s


def synthesize(sys: HomogeneousSystem, lyap: LyapunovCandidate, config: SynthesisConfig) -> SynthesizedController:
    if not sys.theta > 0:
        raise SynthesisError("precondition", "non-synthesizable: theta=0")
    report = validate_system(sys, lyap, seed=config.seed)
    if not report.passed:
        names = ", ".join(c.name for c in report.failed())
        raise SynthesisError("validation", f"system validation failed: {names}")
    try:
        return _synthesize(sys, lyap, config)
    except EvalError as exc:
        raise SynthesisError("evaluation", str(exc), [list(exc.point.values())]) from exc


def _synthesize(sys, lyap, config: SynthesisConfig) -> SynthesizedController:
    model = SystemModel(sys, lyap)
    budget, seed = config.budget, config.seed
    sample = sphere_points(model.norm, budget.resolved_samples(sys.n), seed)
    P = sample[0]
    pd = model.evaluate(P)

    # c2 = c8 = max |L_G2 V| on S
    c2_res = sphere_optimize(
        lambda Q: model.evaluate(Q).L2norm, model.norm, None, "max", budget, seed, sample
    )
    c2 = float(c2_res.value)
    if not c2 > 0:
        raise SynthesisError("constants", "L_G2 V vanishes on the sphere; gamma is undefined")

    # c1 for the unperturbed system under the known (or bootstrap) stabilizer;
    # the bootstrap uses c6 = pi_coeff, or phi = L_f V when c6 is not yet known
    boot = SontagDesign(model, config.pi_coeff or 0.0, config.c10, PowerKInfinity(1.0, 2.0),
                        config.tol_switch)

    def unperturbed(Q):
        d = model.evaluate(Q)
        return -(d.LfV + d.L1 * _stabilizer_values(config, boot, Q, d))

    c1_res = sphere_optimize(unperturbed, model.norm, None, "min", budget, seed, sample)
    c1 = float(c1_res.value)
    if not c1 > 0:
        raise SynthesisError(
            "constants", f"c1={c1:.6g} <= 0: stabilizer does not decrease V", [c1_res.argpoint]
        )
    c6 = config.pi_coeff if config.pi_coeff is not None else c1 / (2 * c2)
    gamma = build_gamma(c6, c2)
    if not check_scaling(gamma):
        raise SynthesisError("gamma", "l_gamma is not degree-2 homogeneous")
    design = SontagDesign(model, c6, config.c10, gamma, config.tol_switch)

    bad = sontag_condition(design, sample)
    if len(bad):
        raise SynthesisError(
            "sontag", f"phi >= 0 where L_G1 V = 0 at {len(bad)} sphere points", bad[:10]
        )

    # c9 = max |alpha_h| / min_{phi >= 0} |L_G1 V|
    ah = np.abs(_stabilizer_values(config, boot, P, pd))
    base = design.base(P, pd)
    pos = base.phi >= 0
    c9 = float(ah.max() / np.abs(pd.L1[pos]).min()) if np.any(pos) else 0.0

    q0 = compile_q0(config.q0_predicate, sys.variables)
    q0_report = validate_Q0(design, q0, sample)
    if not q0_report.passed:
        raise SynthesisError(
            "q0", "Q0 does not contain the switch set or leaves the decrease set",
            (q0_report.not_in_q0 + q0_report.not_decreasing)[:10],
        )
    constants = estimate_constants(design, q0, config, sample, c1, c2, c9)
    constants.argpoints["c1"] = c1_res.argpoint.tolist()
    constants.argpoints["c2"] = c2_res.argpoint.tolist()

    aux_trial = -(base.LftV + 0.5 * pd.L1 * base.alpha_s)
    c1_aux = _opt(lambda b: -(b.LftV + 0.5 * b.pd.L1 * b.alpha_s), design, None, "min",
                  budget, seed, sample)
    constants.c1_aux = float(c1_aux.value)
    constants.argpoints["c1_aux"] = c1_aux.argpoint.tolist()

    bound = select_kappa(constants, SynthesisConfig(kappa_margin=0.0))
    kappa = config.kappa if config.kappa is not None else select_kappa(constants, config)
    below = kappa <= bound
    ctrl = SynthesizedController(design, float(kappa), config.beta, config.lam, constants,
                                 config, float(bound), below, q0_report)

    def h_min():
        return sphere_optimize(lambda Q: ctrl.pieces(Q).H, model.norm, None, "min",
                               budget, seed, sample)

    if below:
        res = h_min()
        if not res.value > 0:
            raise SynthesisError(
                "kappa", f"kappa={kappa:g} below bound {bound:.6g} and H_kappa not positive",
                [res.argpoint],
            )
    # auxiliary decrease at the selected gain; monotone in kappa >= 1
    full = ctrl.pieces(P, pd)
    decrease = -(full.LftV + pd.L1 * full.alpha)
    if kappa >= 1 and np.any(decrease < aux_trial.min() * (1 - 1e-6)):
        i = int(np.argmin(decrease))
        raise SynthesisError("aux_decrease", "auxiliary system decrease below c1", [P[i]])
    aux = _opt(lambda b: -(b.LftV + b.pd.L1 * 0.5 * kappa * b.alpha_s), design, None, "min",
               budget, seed, sample)
    if not aux.value > 0:
        raise SynthesisError("aux_decrease", "auxiliary system not decreasing", [aux.argpoint])
    constants.aux_decrease = float(aux.value)
    constants.argpoints["aux_decrease"] = aux.argpoint.tolist()
    return ctrl


def config_from_params(params: dict, **overrides) -> SynthesisConfig:
    """Build a config from a fixture ``params`` dict."""
    keys = {
        "c10": "c10", "pi_coeff": "pi_coeff", "q0": "q0_predicate", "beta": "beta",
        "lambda": "lam", "kappa": "kappa", "kappa_margin": "kappa_margin",
        "known_stabilizer": "known_stabilizer",
    }
    kw = {keys[k]: v for k, v in params.items() if k in keys}
    kw.update(overrides)
    return SynthesisConfig(**kw)


__all__ = [
    "Pieces", "Q0Report", "SontagDesign", "SphereConstants", "SynthesisConfig",
    "SynthesisError", "SynthesizedController", "build_R", "build_aux_field",
    "build_gamma", "build_phi", "config_from_params", "estimate_constants",
    "select_kappa", "sontag_controller", "synthesize", "validate_Q0",
]
