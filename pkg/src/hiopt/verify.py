"""Sampled certificates: positivity on the sphere, dissipation inequalities,
HJI residuals and gain-margin sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .homogeneity import (
    HomogeneousNorm,
    SphereBudget,
    check_homogeneous,
    sphere_optimize,
)
from .lft import PowerKInfinity, lf_transform
from .synthesis import SynthesizedController

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class VerificationReport:
    name: str
    passed: bool
    value: float  # extremal value (min for positivity, max violation for inequalities)
    point: list[float] | None
    tol: float
    budget: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "point": self.point,
            "tol": self.tol,
            "budget": self.budget,
            "details": self.details,
        }


class HomogeneityPrecheckError(ValueError):
    """The function handed to a sphere certificate is not homogeneous."""


def check_pd_on_sphere(
    fnc: ArrayFn,
    norm: HomogeneousNorm,
    degree: float,
    budget: SphereBudget | None = None,
    seed: int = 42,
    name: str = "positive definite",
    homogeneity_tol: float = 1e-6,
) -> VerificationReport:
    """Pass iff the refined sphere minimum of ``fnc`` is positive.

    ``fnc`` must be homogeneous of the positive ``degree``; this is checked
    first so that the sphere minimum certifies positivity on ``R^n \\ {0}``.
    """
    if not degree > 0:
        raise HomogeneityPrecheckError(f"degree must be positive, got {degree}")
    rep = check_homogeneous(fnc, degree, norm.dilation, tol=homogeneity_tol, seed=seed)
    if not rep.passed:
        raise HomogeneityPrecheckError(
            f"not homogeneous of degree {degree}: rel error {rep.max_rel_error:.3g}"
        )
    budget = budget or SphereBudget()
    res = sphere_optimize(fnc, norm, None, "min", budget, seed)
    return VerificationReport(
        name=name,
        passed=bool(res.value > 0),
        value=float(res.value),
        point=res.argpoint.tolist(),
        tol=0.0,
        budget=budget.resolved_samples(norm.n),
        details={"sampled_min": float(res.sampled_value), "n_evals": res.n_evals},
    )


def check_dissipation(
    name: str,
    lhs: np.ndarray,
    rhs: np.ndarray,
    scale: np.ndarray,
    points: np.ndarray,
    tol_abs: float = 1e-9,
) -> VerificationReport:
    """Pass iff ``lhs <= rhs + tol_abs * scale`` at every sample."""
    viol = lhs - rhs - tol_abs * np.maximum(scale, 1e-300)
    i = int(np.argmax(viol)) if len(viol) else 0
    worst = float(viol[i]) if len(viol) else -np.inf
    return VerificationReport(
        name=name,
        passed=bool(worst <= 0),
        value=worst,
        point=points[i].tolist() if len(viol) else None,
        tol=tol_abs,
        budget=len(lhs),
        details={"violations": int(np.sum(viol > 0))},
    )


def closed_loop_vdot(ctrl: SynthesizedController, X, W, gain: float = 1.0):
    """``V' = L_f V + L_G1 V (gain alpha*) + L_G2 V w`` and the pieces at ``X``."""
    p = ctrl.pieces(X)
    vdot = p.pd.LfV + p.pd.L1 * gain * p.alpha_star + np.sum(p.pd.L2 * W, axis=1)
    return vdot, p


def check_iss_dissipation(
    ctrl: SynthesizedController,
    X: np.ndarray,
    W: np.ndarray,
    c1: float | None = None,
    tol_rel: float = 1e-6,
    tol_abs: float = 1e-12,
) -> VerificationReport:
    """``V' <= -c1 Gamma^(2(k+r0)) + gamma(|w|/2)`` at every ``(x, w)`` pair.

    ``c1`` defaults to the closed-loop auxiliary decrease rate at the selected
    gain.
    """
    X = np.atleast_2d(X)
    W = np.asarray(W, dtype=np.float64).reshape(len(X), -1)
    c1 = ctrl.constants.aux_decrease if c1 is None else c1
    deg = 2 * (ctrl.sys.k + ctrl.sys.r0)
    vdot, p = closed_loop_vdot(ctrl, X, W)
    g = p.pd.Gamma**deg
    wn = np.linalg.norm(W, axis=1)
    rhs = -c1 * (1 - tol_rel) * g + ctrl.gamma(wn / 2)
    scale = np.maximum(np.abs(vdot), np.abs(rhs)) + g
    rep = check_dissipation("ISS dissipation", vdot, rhs, scale, np.hstack([X, W]), tol_abs)
    rep.details["c1"] = c1
    return rep


def check_ios_dissipation(
    ctrl: SynthesizedController,
    X: np.ndarray,
    W: np.ndarray,
    x0: Sequence[float] | None = None,
    tol_abs: float = 1e-9,
) -> VerificationReport:
    """``kappa V' + y'Ry/beta <= -H_kappa + kappa gamma(|w|/2)`` with
    ``y = h + d alpha*``.

    For quadratic ``gamma(s) = s^2/mu`` also reports ``kappa_L`` and, given
    ``x0``, the offset ``c0``.
    """
    X = np.atleast_2d(X)
    W = np.asarray(W, dtype=np.float64).reshape(len(X), -1)
    kappa, beta = ctrl.kappa, ctrl.beta
    vdot, p = closed_loop_vdot(ctrl, X, W)
    y = p.pd.h + np.outer(p.alpha_star, ctrl.sys.d_vec)
    yRy = p.R * np.sum(y * y, axis=1)
    lhs = kappa * vdot + yRy / beta
    wn = np.linalg.norm(W, axis=1)
    rhs = -p.H + kappa * ctrl.gamma(wn / 2)
    scale = np.abs(lhs) + np.abs(rhs) + np.abs(p.H)
    rep = check_dissipation("IOS dissipation", lhs, rhs, scale, np.hstack([X, W]), tol_abs)
    rep.details.update(ios_gains(ctrl, x0))
    return rep


def ios_gains(ctrl: SynthesizedController, x0=None) -> dict:
    """``kappa_L = sqrt(kappa beta / (4 rho_m mu))`` and ``c0 = sqrt(kappa beta V(x0) / rho_m)``."""
    g = ctrl.gamma
    rho_m = ctrl.constants.rho_m
    out: dict = {"rho_m": rho_m}
    if abs(g.p - 2.0) > 1e-12:
        out["note"] = "gamma is not quadratic; kappa_L is undefined"
        return out
    mu = 1.0 / g.a
    out["mu"] = mu
    out["kappa_L"] = float(np.sqrt(ctrl.kappa * ctrl.beta / (4 * rho_m * mu)))
    if x0 is not None:
        v0 = float(ctrl.model.evaluate(np.asarray(x0, dtype=np.float64)).V[0])
        out["c0"] = float(np.sqrt(ctrl.kappa * ctrl.beta * v0 / rho_m))
    return out


def hji_residual(LfV, LG1V, LG2V, h, l, R1, R2, gamma0: PowerKInfinity) -> np.ndarray:
    """``L_f V + l - L_G1V^2 / (8 R1) + h'R2h + l_gamma0(|L_G2 V|)`` (diagnostic)."""
    LG2V = np.asarray(LG2V, dtype=np.float64)
    L2n = np.linalg.norm(LG2V.reshape(len(np.atleast_1d(LfV)), -1), axis=1)
    h = np.asarray(h, dtype=np.float64).reshape(len(L2n), -1)
    LG1V = np.asarray(LG1V, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ctrl_term = np.where(LG1V == 0, 0.0, LG1V**2 / (8 * np.asarray(R1)))
    return (
        np.asarray(LfV) + np.asarray(l) - ctrl_term
        + np.asarray(R2) * np.sum(h * h, axis=1) + lf_transform(gamma0)(L2n)
    )


def controller_hji_residual(ctrl: SynthesizedController, X) -> np.ndarray:
    p = ctrl.pieces(X)
    R1 = ctrl.theta**2 * p.R / ctrl.kappa
    R2 = p.R / ctrl.kappa
    return hji_residual(p.pd.LfV, p.pd.L1, p.pd.L2, p.pd.h, p.l, R1, R2, ctrl.gamma0)


@dataclass
class GainMarginResult:
    gain: float
    min_decrease: float
    point: list[float]
    asserted: bool
    passed: bool | None  # None when outside the guaranteed interval

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def gain_margin_sweep(
    ctrl: SynthesizedController,
    gains: Sequence[float],
    budget: SphereBudget | None = None,
    seed: int = 42,
) -> list[GainMarginResult]:
    """Sphere minimum of ``-(L_f V + g L_G1 V alpha*)`` for each gain ``g``.

    Positivity is asserted only for ``g > 1/beta``.
    """
    budget = budget or SphereBudget()
    out = []
    for g in gains:
        if not g > 0:
            raise ValueError("gains must be positive")
        res = sphere_optimize(
            lambda P, g=g: -closed_loop_vdot(ctrl, P, np.zeros((len(P), ctrl.sys.xi)), g)[0],
            ctrl.model.norm, None, "min", budget, seed,
        )
        asserted = g > 1.0 / ctrl.beta
        out.append(
            GainMarginResult(
                gain=float(g),
                min_decrease=float(res.value),
                point=res.argpoint.tolist(),
                asserted=asserted,
                passed=bool(res.value > 0) if asserted else None,
            )
        )
    return out
