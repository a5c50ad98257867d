"""Legendre-Fenchel transforms of power-law class-K-infinity functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerKInfinity:
    """``gamma(s) = a * s**p`` with ``a > 0``, ``p > 1``."""

    a: float
    p: float

    def __post_init__(self):
        if not (self.a > 0 and np.isfinite(self.a)):
            raise ValueError(f"coefficient a must be positive, got {self.a}")
        if not self.p > 1:
            raise ValueError(f"exponent p must exceed 1, got {self.p}")

    @classmethod
    def quadratic(cls, mu: float) -> "PowerKInfinity":
        """``s**2 / mu``."""
        return cls(1.0 / mu, 2.0)

    def __call__(self, s):
        return self.a * np.power(s, self.p)

    def derivative(self, s):
        return self.a * self.p * np.power(s, self.p - 1.0)

    def inverse_derivative(self, s):
        """``(gamma')^{-1}(s)``."""
        return np.power(np.asarray(s, dtype=np.float64) / (self.a * self.p), 1.0 / (self.p - 1.0))

    def scaled(self, factor: float) -> "PowerKInfinity":
        """``factor * gamma``."""
        return PowerKInfinity(self.a * factor, self.p)

    def compose_scale(self, c: float) -> "PowerKInfinity":
        """``s -> gamma(c * s)``."""
        return PowerKInfinity(self.a * c**self.p, self.p)


def lf_transform(g: PowerKInfinity) -> PowerKInfinity:
    """``l(s) = s (g')^{-1}(s) - g((g')^{-1}(s))`` in closed form."""
    p = g.p
    q = p / (p - 1.0)
    coef = (p - 1.0) * g.a ** (-1.0 / (p - 1.0)) * p ** (-q)
    return PowerKInfinity(coef, q)


def check_scaling(g: PowerKInfinity, tol: float = 1e-12) -> bool:
    """True iff ``l(2 eps s) = eps**2 l(2 s)`` for all ``eps, s > 0``.

    Holds exactly when ``p = 2``; a grid spot check guards the closed form.
    """
    ell = lf_transform(g)
    exact = abs(g.p - 2.0) <= tol
    eps = np.array([0.1, 0.5, 2.0, 7.0])[:, None]
    s = np.array([0.3, 1.0, 3.0])[None, :]
    lhs = ell(2 * eps * s)
    rhs = eps**2 * ell(2 * s)
    numeric = bool(np.all(np.abs(lhs - rhs) <= 1e-10 * np.maximum(np.abs(rhs), 1.0)))
    return exact and numeric


def young_gap(g: PowerKInfinity, a_vec, b_vec) -> float:
    """``g(|a|) + l(|b|) - a.b``; nonnegative up to rounding."""
    a_vec = np.atleast_1d(np.asarray(a_vec, dtype=np.float64))
    b_vec = np.atleast_1d(np.asarray(b_vec, dtype=np.float64))
    if a_vec.shape != b_vec.shape:
        raise ValueError("vectors must have equal dimensions")
    ell = lf_transform(g)
    return float(g(np.linalg.norm(a_vec)) + ell(np.linalg.norm(b_vec)) - a_vec @ b_vec)


def young_argmax(g: PowerKInfinity, b_vec) -> np.ndarray:
    """The unique ``a`` with zero Young gap against ``b``."""
    b_vec = np.atleast_1d(np.asarray(b_vec, dtype=np.float64))
    nb = np.linalg.norm(b_vec)
    if nb == 0:
        return np.zeros_like(b_vec)
    return b_vec * g.inverse_derivative(nb) / nb
