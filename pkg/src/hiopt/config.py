"""JSON project configuration.

Layout::

    {
      "name": "ex4",
      "system":    {"weights": [3, 1], "k": 0, "f": [...], "G1": [...],
                    "G2": [[...], ...], "h": [...], "d": [0, 1], "theta": 1},
      "lyapunov":  {"V": "...", "nu": 4},
      "synthesis": {"c10": 1, "pi_coeff": 1, "q0": "...", "beta": 2,
                    "lambda": 2, "kappa": 11, "kappa_margin": 0.05,
                    "known_stabilizer": null},
      "verify":    {"samples": 4096, "pairs": 10000, "box": 3, "gains": [...]},
      "simulate":  {"x0": [[1, 0.5]], "T": 20, "tol": 1e-9,
                    "controller": "synthesized" | "<expr>",
                    "disturbances": [{"kind": "worst_case"}, ...],
                    "cost": {"E": "...", "l": "...", "R1": "...", "R2": "...",
                             "gamma0": {"a": 1, "p": 2}},
                    "gamma": {"a": 1, "p": 2}, "lambda": 2}
    }

Only ``system`` and ``lyapunov`` are required. Expressions use the grammar of
:mod:`hiopt.expr`; system expressions may only reference ``x1..xn``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ParseError
from .homogeneity import SphereBudget
from .lft import PowerKInfinity
from .sim import DisturbanceSpec
from .synthesis import SynthesisConfig
from .sysdef import HomogeneousSystem, LyapunovCandidate


class ConfigError(ValueError):
    """Malformed or unreadable configuration."""


@dataclass
class ProjectConfig:
    name: str
    system: HomogeneousSystem
    lyapunov: LyapunovCandidate
    synthesis: dict
    verify: dict
    simulate: dict
    raw: dict = field(repr=False, default_factory=dict)

    def synthesis_config(self, seed: int = 42, budget: int | None = None) -> SynthesisConfig:
        s = self.synthesis
        return SynthesisConfig(
            c10=float(s.get("c10", 1.0)),
            pi_coeff=_opt_float(s.get("pi_coeff")),
            q0_predicate=s.get("q0"),
            beta=float(s.get("beta", 2.0)),
            lam=float(s.get("lambda", 2.0)),
            kappa_margin=float(s.get("kappa_margin", 0.05)),
            kappa=_opt_float(s.get("kappa")),
            known_stabilizer=s.get("known_stabilizer"),
            budget=SphereBudget(samples=budget if budget is not None else s.get("samples")),
            seed=seed,
        )

    def disturbances(self, gamma: PowerKInfinity | None = None, lam: float | None = None
                     ) -> list[DisturbanceSpec]:
        """Disturbance specs; ``worst_case`` entries without their own ``gamma``
        fall back to ``simulate.gamma`` and then to the given defaults."""
        specs = self.simulate.get("disturbances") or [{"kind": "zero"}]
        return [disturbance_from_dict(d, self.simulate, gamma, lam) for d in specs]

    def needs_default_gamma(self) -> bool:
        return any(
            d.get("kind") == "worst_case" and "gamma" not in d
            for d in self.simulate.get("disturbances") or []
        ) and "gamma" not in self.simulate


def _opt_float(v):
    return None if v is None else float(v)


def _finite(obj, where="config"):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return
    if isinstance(obj, (int, float)):
        if not math.isfinite(obj):
            raise ConfigError(f"non-finite number in {where}")
        return
    if isinstance(obj, dict):
        for k, v in obj.items():
            _finite(v, f"{where}.{k}")
        return
    if isinstance(obj, list):
        for i, v in enumerate(obj):
            _finite(v, f"{where}[{i}]")


def power_from_dict(d, default=None) -> PowerKInfinity | None:
    if d is None:
        return default
    return PowerKInfinity(float(d["a"]), float(d["p"]))


def disturbance_from_dict(d: dict, sim: dict | None = None,
                          gamma: PowerKInfinity | None = None,
                          lam: float | None = None) -> DisturbanceSpec:
    sim = sim or {}
    kind = d.get("kind", "zero")
    if kind == "worst_case":
        g = power_from_dict(d.get("gamma") or sim.get("gamma"), gamma)
        if g is None:
            raise ConfigError("worst_case disturbance needs gamma (or a synthesized controller)")
        lam = float(d.get("lambda", sim.get("lambda", 2.0 if lam is None else lam)))
        return DisturbanceSpec("worst_case", lam=lam, gamma=g)
    return DisturbanceSpec(
        kind,
        value=tuple(float(v) for v in d.get("value", ())),
        amplitude=tuple(float(v) for v in d.get("amplitude", ())),
        frequency=float(d.get("frequency", 1.0)),
        phase=float(d.get("phase", 0.0)),
        decay=float(d.get("decay", 0.0)),
        exprs=tuple(d.get("exprs", ())),
    )


def from_dict(raw: dict) -> ProjectConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "system" not in raw and isinstance(raw.get("config"), dict):
        raw = raw["config"]  # a run report: re-run its echoed config
    _finite(raw)
    try:
        s = raw["system"]
        ly = raw["lyapunov"]
        weights = [float(w) for w in s["weights"]]
        n = len(weights)
        for key in ("f", "G1", "G2"):
            if len(s[key]) != n:
                raise ConfigError(f"system.{key} must have {n} rows")
        system = HomogeneousSystem.build(
            weights, float(s["k"]), s["f"], s["G1"], s["G2"], s["h"],
            [float(v) for v in s["d"]], _opt_float(s.get("theta")), raw.get("name", ""),
        )
        lyap = LyapunovCandidate.build(ly["V"], float(ly["nu"]), _opt_float(ly.get("degree")))
    except ParseError as exc:
        raise ConfigError(f"expression error: {exc}") from exc
    except KeyError as exc:
        raise ConfigError(f"missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ProjectConfig(
        name=str(raw.get("name", "")),
        system=system,
        lyapunov=lyap,
        synthesis=dict(raw.get("synthesis") or {}),
        verify=dict(raw.get("verify") or {}),
        simulate=dict(raw.get("simulate") or {}),
        raw=raw,
    )


def load_config(path: str | Path) -> ProjectConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return from_dict(raw)
