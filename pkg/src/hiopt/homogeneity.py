"""Dilations, homogeneous norms and optimization over the unit homogeneous sphere."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Dilation:
    """Weights ``r_i > 0`` of the dilation ``x_i -> eps**r_i * x_i``."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(r) for r in self.weights)
        if len(w) < 1:
            raise ValueError("dilation needs at least one weight")
        if any(not np.isfinite(r) or r <= 0 for r in w):
            raise ValueError(f"dilation weights must be positive, got {w}")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def r0(self) -> float:
        return min(self.weights)

    @property
    def r(self) -> np.ndarray:
        return np.asarray(self.weights)


@dataclass(frozen=True)
class HomogeneousNorm:
    """``Gamma(x) = (sum |x_i|^(nu/r_i))^(1/nu)`` with ``nu > max r_i``."""

    dilation: Dilation
    nu: float

    def __post_init__(self):
        if not self.nu > max(self.dilation.weights):
            raise ValueError(
                f"nu={self.nu} must exceed the largest weight {max(self.dilation.weights)}"
            )

    @property
    def n(self) -> int:
        return self.dilation.n

    def __call__(self, x) -> np.ndarray | float:
        return homo_norm(self, x)


@dataclass(frozen=True)
class SpherePoint:
    coords: np.ndarray
    residual: float


def apply_dilation(d: Dilation, eps, x) -> np.ndarray:
    """``eps**r_i * x_i``; ``eps`` may be a scalar or one value per row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != d.n:
        raise ValueError(f"dimension mismatch: expected {d.n}, got {x.shape[-1]}")
    eps = np.asarray(eps, dtype=np.float64)
    if np.any(~(eps > 0)):
        raise ValueError("dilation parameter eps must be positive")
    if eps.ndim == 1 and x.ndim == 2:
        eps = eps[:, None]
    return eps ** d.r * x


def homo_norm(g: HomogeneousNorm, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != g.n:
        raise ValueError(f"dimension mismatch: expected {g.n}, got {x.shape[-1]}")
    s = np.sum(np.abs(x) ** (g.nu / g.dilation.r), axis=-1)
    out = s ** (1.0 / g.nu)
    return float(out) if out.ndim == 0 else out


def project_to_sphere(g: HomogeneousNorm, direction) -> SpherePoint:
    u = np.asarray(direction, dtype=np.float64)
    gamma = homo_norm(g, u)
    if not gamma > 0:
        raise ValueError("cannot project the zero vector onto the sphere")
    x = apply_dilation(g.dilation, 1.0 / gamma, u)
    return SpherePoint(x, abs(homo_norm(g, x) - 1.0))


def _project_rows(g: HomogeneousNorm, U: np.ndarray) -> np.ndarray:
    gamma = homo_norm(g, U)
    return apply_dilation(g.dilation, 1.0 / np.atleast_1d(gamma), U)


# --------------------------------------------------------------------------
# homogeneity checks


@dataclass
class HomogeneityReport:
    degree: float
    max_rel_error: float
    passed: bool
    worst_point: np.ndarray | None = None
    worst_eps: float | None = None


def check_homogeneous(
    fnc: ArrayFn,
    degree: float,
    d: Dilation,
    samples: int = 64,
    eps_grid=(0.25, 0.5, 2.0, 4.0),
    tol: float = 1e-8,
    seed: int = 0,
    vector_field: bool = False,
    points: np.ndarray | None = None,
) -> HomogeneityReport:
    """Check ``F(D_eps x) = eps**degree F(x)`` at random nonzero points.

    ``fnc`` maps an ``(m, n)`` array to ``(m,)`` or ``(m, p)``. With
    ``vector_field=True`` the output has ``n`` columns and component ``i``
    must scale as ``eps**(degree + r_i)``.
    """
    if points is None:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((samples, d.n))
    else:
        X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    X = X[np.any(X != 0, axis=1)]
    base = np.asarray(fnc(X), dtype=np.float64)
    base2 = base.reshape(len(X), -1)
    if vector_field:
        if base2.shape[1] != d.n:
            raise ValueError("vector field output must have n components")
        expo = degree + d.r
    else:
        expo = np.full(base2.shape[1], float(degree))
    scale = np.max(np.abs(base2)) if base2.size else 0.0
    worst = (0.0, None, None)
    for eps in eps_grid:
        scaled = np.asarray(fnc(apply_dilation(d, eps, X)), dtype=np.float64)
        scaled = scaled.reshape(len(X), -1)
        expected = eps ** expo * base2
        floor = 1e-12 * np.max(eps ** expo) * scale + 1e-300
        denom = np.maximum(np.maximum(np.abs(expected), np.abs(scaled)), floor)
        rel = np.abs(scaled - expected) / denom
        if not np.all(np.isfinite(rel)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(rel), axis=1))[0])
            return HomogeneityReport(degree, float("inf"), False, X[bad], eps)
        i, j = np.unravel_index(np.argmax(rel), rel.shape)
        if rel[i, j] > worst[0]:
            worst = (float(rel[i, j]), X[i].copy(), eps)
    return HomogeneityReport(degree, worst[0], worst[0] <= tol, worst[1], worst[2])


# --------------------------------------------------------------------------
# sphere sampling and optimization


def default_samples(n: int) -> int:
    return 4096 if n <= 3 else 65536


def sphere_points(g: HomogeneousNorm, count: int, seed: int = 42):
    """Sample ``S = {Gamma = 1}``.

    Returns ``(points, directions)``; each point is the projection of the
    Euclidean direction in the same row. The ``2n`` signed axis directions
    always come first, then ``count - 2n`` Gaussian directions.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    n = g.n
    axes = np.vstack([np.eye(n), -np.eye(n)])
    extra = max(count - 2 * n, 0) if n > 1 else 0
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((extra, n))
    U = U[np.linalg.norm(U, axis=1) > 0]
    U = np.vstack([axes, U])
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    return _project_rows(g, U), U


def sphere_sample(g: HomogeneousNorm, count: int, seed: int = 42) -> list[SpherePoint]:
    pts, _ = sphere_points(g, count, seed)
    res = np.abs(homo_norm(g, pts) - 1.0)
    return [SpherePoint(p, float(r)) for p, r in zip(pts, np.atleast_1d(res))]


@dataclass(frozen=True)
class SphereBudget:
    samples: int | None = None  # None: 4096 for n <= 3, else 65536
    top_k: int = 8
    iterations: int = 200
    step: float = 0.05  # initial simplex edge, radians

    def resolved_samples(self, n: int) -> int:
        return self.samples if self.samples is not None else default_samples(n)


@dataclass
class SphereOptimum:
    value: float
    argpoint: np.ndarray
    n_evals: int
    sampled_value: float
    feasible: int = 0
    mode: str = "min"
    extra: dict = field(default_factory=dict)


class EmptyConstraintSet(ValueError):
    """No sampled sphere point satisfies the constraint."""


def _angles(u: np.ndarray) -> np.ndarray:
    n = len(u)
    th = np.empty(n - 1)
    for k in range(n - 2):
        th[k] = np.arctan2(np.linalg.norm(u[k + 1 :]), u[k])
    th[n - 2] = np.arctan2(u[n - 1], u[n - 2])
    return th


def _direction(th: np.ndarray) -> np.ndarray:
    n = len(th) + 1
    u = np.empty(n)
    s = 1.0
    for k in range(n - 1):
        u[k] = s * np.cos(th[k])
        s *= np.sin(th[k])
    u[n - 1] = s
    return u


def sphere_optimize(
    objective: ArrayFn,
    g: HomogeneousNorm,
    constraint: ArrayFn | None = None,
    mode: str = "min",
    budget: SphereBudget | None = None,
    seed: int = 42,
    sample=None,
) -> SphereOptimum:
    """Extremum of ``objective`` over ``S`` (optionally intersected with a
    constraint set).

    Dense sampling picks the ``top_k`` best feasible points, each polished by
    Nelder-Mead in angular coordinates of the direction (re-projected onto
    ``S`` at every evaluation). Infeasible trial points score as ``inf``.
    ``sample`` may pass precomputed ``(points, directions)``.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    budget = budget or SphereBudget()
    sign = 1.0 if mode == "min" else -1.0
    if sample is None:
        sample = sphere_points(g, budget.resolved_samples(g.n), seed)
    P, U = sample
    if constraint is not None:
        keep = np.asarray(constraint(P), dtype=bool)
        P, U = P[keep], U[keep]
    if len(P) == 0:
        raise EmptyConstraintSet("constraint subset of the sphere is empty at this budget")
    vals = sign * np.asarray(objective(P), dtype=np.float64)
    n_evals = len(P)
    if np.any(np.isnan(vals)):
        bad = int(np.flatnonzero(np.isnan(vals))[0])
        raise ValueError(f"objective is NaN at sphere point {P[bad].tolist()}")
    order = np.argsort(vals, kind="stable")
    best_i = int(order[0])
    best_val, best_pt = float(vals[best_i]), P[best_i].copy()
    sampled = best_val

    if g.n > 1 and budget.top_k > 0 and budget.iterations > 0:
        def f(th):
            x = _project_rows(g, _direction(th)[None, :])
            if constraint is not None and not bool(constraint(x)[0]):
                return np.inf
            v = sign * float(objective(x)[0])
            return v if np.isfinite(v) else np.inf

        for idx in order[: budget.top_k]:
            th0 = _angles(U[idx])
            simplex = np.vstack([th0, th0 + budget.step * np.eye(len(th0))])
            res = minimize(
                f,
                th0,
                method="Nelder-Mead",
                options={
                    "maxiter": budget.iterations,
                    "initial_simplex": simplex,
                    "xatol": 1e-12,
                    "fatol": 1e-15,
                },
            )
            n_evals += int(res.nfev)
            if np.isfinite(res.fun) and res.fun < best_val:
                best_val = float(res.fun)
                best_pt = _project_rows(g, _direction(res.x)[None, :])[0]

    return SphereOptimum(
        value=sign * best_val,
        argpoint=best_pt,
        n_evals=n_evals,
        sampled_value=sign * sampled,
        feasible=len(P),
        mode=mode,
    )
