"""Command-line front end.

Exit codes: 0 pass, 1 domain failure, 2 usage or IO failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ProjectConfig, load_config, power_from_dict
from .expr import EvalError, parse
from .homogeneity import SphereBudget
from .sim import (
    CostPieces,
    IntegrationError,
    evaluate_cost,
    expr_controller,
    integrate,
    l2_gain_check,
    output_energy,
    synthesized_controller,
    zero_controller,
)
from .synthesis import SynthesisError, synthesize
from .sysdef import SystemModel, validate_system
from .verify import (
    HomogeneityPrecheckError,
    check_ios_dissipation,
    check_iss_dissipation,
    check_pd_on_sphere,
    gain_margin_sweep,
    ios_gains,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class DomainFailure(RuntimeError):
    """A pipeline stage rejected its input; maps to exit code 1."""


# --------------------------------------------------------------------------
# output helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_report(command: str, args, cfg: ProjectConfig | None, stages: dict, passed: bool) -> dict:
    return {
        "tool": "hiopt",
        "version": __version__,
        "command": command,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seed": args.seed,
        "budget": args.budget,
        "tol": args.tol,
        "passed": bool(passed),
        "config": cfg.raw if cfg is not None else None,
        "stages": _jsonable(stages),
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def _emit(args, report: dict, lines: list[str]) -> None:
    text = dump_report(report)
    if args.out and not getattr(args, "out_is_dir", False):
        atomic_write(args.out, text)
    if args.json:
        sys.stdout.write(text)
    else:
        for line in lines:
            print(line)


def trajectory_csv(traj, running_J) -> str:
    n = traj.states.shape[1]
    xi = traj.w.shape[1]
    ly = traj.y.shape[1]
    header = (["t"] + [f"x{i + 1}" for i in range(n)] + ["u"]
              + [f"w{i + 1}" for i in range(xi)] + [f"y{i + 1}" for i in range(ly)]
              + ["V", "running_J"])
    data = np.column_stack([traj.times, traj.states, traj.u, traj.w, traj.y, traj.V_vals, running_J])
    rows = [",".join(header)]
    rows += [",".join("%.17g" % v for v in row) for row in data]
    return "\n".join(rows) + "\n"


# --------------------------------------------------------------------------
# pipeline pieces


def _budget(args, cfg: ProjectConfig, key="samples") -> int | None:
    if args.budget is not None:
        return args.budget
    return cfg.verify.get(key, cfg.synthesis.get("samples"))


def _synthesize(cfg: ProjectConfig, args):
    try:
        return synthesize(cfg.system, cfg.lyapunov, cfg.synthesis_config(args.seed, args.budget))
    except SynthesisError as exc:
        raise DomainFailure(f"synthesis failed: {exc}") from exc


def _controller(cfg: ProjectConfig, ctrl):
    spec = cfg.simulate.get("controller", "synthesized")
    if spec == "synthesized":
        return synthesized_controller(ctrl) if ctrl is not None else None
    if spec in (None, "zero"):
        return zero_controller
    return expr_controller(parse(spec, set(cfg.system.variables)), cfg.system.variables)


def _cost_pieces(cfg: ProjectConfig, ctrl):
    cost = cfg.simulate.get("cost")
    if cost:
        exprs = {k: parse(cost[k], set(cfg.system.variables)) for k in ("E", "l", "R1", "R2")}
        g0 = power_from_dict(cost.get("gamma0"), None)
        if g0 is None:
            raise ConfigError("simulate.cost.gamma0 is required")
        return CostPieces.from_exprs(exprs, cfg.system.variables, g0)
    if ctrl is not None:
        return CostPieces.from_controller(ctrl)
    return None


def _needs_synthesis(cfg: ProjectConfig) -> bool:
    return (cfg.simulate.get("controller", "synthesized") == "synthesized"
            or cfg.needs_default_gamma())


def _specs(cfg: ProjectConfig, ctrl):
    if ctrl is None:
        return cfg.disturbances()
    return cfg.disturbances(ctrl.gamma, ctrl.lam)


# --------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    rep = validate_system(cfg.system, cfg.lyapunov, seed=args.seed)
    lines = [f"[{'PASS' if c.passed else 'FAIL'}] {c.name} (max error {c.max_error:.3g})"
             + (f" {c.detail}" if c.detail else "") for c in rep.checks]
    lines += [f"note: {n}" for n in rep.notes]
    lines.append(f"validation {'passed' if rep.passed else 'failed'}; "
                 f"synthesizable={rep.synthesizable}")
    _emit(args, run_report("validate", args, cfg, {"validation": rep.to_dict()}, rep.passed), lines)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_synthesize(args) -> int:
    cfg = load_config(args.config)
    ctrl = _synthesize(cfg, args)
    summary = ctrl.summary()
    c = ctrl.constants
    lines = [f"{k} = {getattr(c, k)!r}" for k in
             ("c1", "c2", "c6", "c8", "c9", "rho1", "rho2", "rho3", "rho4", "rho",
              "rho_m", "kappa_c", "kappa1", "aux_decrease")]
    lines.append(f"kappa = {ctrl.kappa!r} (bound {ctrl.kappa_bound!r}"
                 + (", explicit value below bound, certified by H_kappa > 0" if ctrl.kappa_below_bound else "")
                 + ")")
    _emit(args, run_report("synthesize", args, cfg, {"synthesis": summary}, True), lines)
    return EXIT_OK


def _verify_stages(cfg: ProjectConfig, ctrl, args) -> tuple[dict, list[str], bool]:
    v = cfg.verify
    seed = int(v.get("seed", args.seed))
    bud = SphereBudget(samples=_budget(args, cfg))
    norm = ctrl.model.norm
    deg = 2 * (ctrl.sys.k + ctrl.sys.r0)
    reports = [
        check_pd_on_sphere(ctrl.H_kappa, norm, deg, bud, seed, name="H_kappa positive"),
        check_pd_on_sphere(ctrl.l, norm, deg, bud, seed, name="l positive"),
    ]
    pairs = int(v.get("pairs", 10_000))
    half = float(v.get("box", 3.0))
    rng = np.random.default_rng(seed)
    X = rng.uniform(-half, half, (pairs, ctrl.sys.n))
    W = rng.uniform(-half, half, (pairs, ctrl.sys.xi))
    x0s = cfg.simulate.get("x0") or [[1.0] * ctrl.sys.n]
    reports.append(check_iss_dissipation(ctrl, X, W))
    reports.append(check_ios_dissipation(ctrl, X, W, x0s[0]))
    sweep = gain_margin_sweep(ctrl, v.get("gains", [0.4, 0.6, 1.0, 5.0]), bud, seed)
    stages = {"verification": [r.to_dict() for r in reports],
              "gain_margin": [g.to_dict() for g in sweep]}
    ok = all(r.passed for r in reports) and all(g.passed for g in sweep if g.asserted)
    lines = [f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: extremal value {r.value:.6g}"
             for r in reports]
    lines += [f"[{'PASS' if g.passed else 'FAIL' if g.asserted else 'INFO'}] gain {g.gain:g}: "
              f"min decrease {g.min_decrease:.6g}" for g in sweep]

    if cfg.simulate:
        T = float(cfg.simulate.get("T", 20.0))
        tol = args.tol or float(cfg.simulate.get("tol", 1e-9))
        gains = ios_gains(ctrl, x0s[0])
        l2 = []
        for spec in _specs(cfg, ctrl):
            traj = integrate(ctrl.model, synthesized_controller(ctrl), spec, x0s[0], T, tol)
            if "kappa_L" in gains:
                r = l2_gain_check(traj, gains["kappa_L"], gains["c0"])
                l2.append({"disturbance": spec.to_dict(), **r.to_dict()})
                ok &= r.passed
                lines.append(f"[{'PASS' if r.passed else 'FAIL'}] L2 gain ({spec.kind}): "
                             f"||y||={r.y_norm:.6g} <= {r.bound:.6g}")
        stages["l2_gain"] = l2
    return stages, lines, ok


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    ctrl = _synthesize(cfg, args)
    try:
        stages, lines, ok = _verify_stages(cfg, ctrl, args)
    except HomogeneityPrecheckError as exc:
        raise DomainFailure(f"verification precheck failed: {exc}") from exc
    stages["synthesis"] = ctrl.summary()
    _emit(args, run_report("verify", args, cfg, stages, ok), lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if not cfg.simulate:
        raise ConfigError("config has no simulate block")
    ctrl = _synthesize(cfg, args) if _needs_synthesis(cfg) else None
    model = ctrl.model if ctrl is not None else SystemModel(cfg.system, cfg.lyapunov)
    controller = _controller(cfg, ctrl)
    pieces = _cost_pieces(cfg, ctrl)
    T = float(cfg.simulate.get("T", 20.0))
    tol = args.tol or float(cfg.simulate.get("tol", 1e-9))
    x0s = cfg.simulate.get("x0") or [[1.0] * cfg.system.n]
    specs = _specs(cfg, ctrl)
    out_dir = Path(args.out or f"{cfg.name or 'run'}_trajectories")
    runs, lines = [], []
    for i, x0 in enumerate(x0s):
        for j, spec in enumerate(specs):
            traj = integrate(model, controller, spec, x0, T, tol)
            if pieces is not None:
                cost = evaluate_cost(traj, pieces)
                running, J = cost.running_J, cost.J_T
            else:
                running, J = output_energy(traj), None
            fname = f"traj_{i:03d}_{j:02d}_{spec.kind}.csv"
            atomic_write(out_dir / fname, trajectory_csv(traj, running))
            runs.append({
                "file": fname, "x0": list(map(float, x0)), "disturbance": spec.to_dict(),
                "T": T, "J_T": J, "x_T": traj.states[-1].tolist(),
                "terminated_at_origin": traj.terminated_at_origin, "steps": traj.n_steps,
            })
            lines.append(f"{out_dir / fname}: x(T)={np.round(traj.states[-1], 9).tolist()}"
                         + (f", J_T={J:.10g}" if J is not None else ""))
    report = run_report("simulate", args, cfg, {"trajectories": runs}, True)
    atomic_write(out_dir / "report.json", dump_report(report))
    args.out_is_dir = True
    _emit(args, report, lines)
    return EXIT_OK


def cmd_sweep_gain(args) -> int:
    cfg = load_config(args.config)
    ctrl = _synthesize(cfg, args)
    gains = args.gains or cfg.verify.get("gains", [0.4, 0.6, 1.0, 5.0])
    res = gain_margin_sweep(ctrl, gains, SphereBudget(samples=_budget(args, cfg)), args.seed)
    ok = all(r.passed for r in res if r.asserted)
    lines = [f"g={r.gain:g}: min decrease {r.min_decrease:.6g} "
             + ("(asserted, " + ("pass)" if r.passed else "FAIL)") if r.asserted else "(not asserted)")
             for r in res]
    _emit(args, run_report("sweep-gain", args, cfg, {"gain_margin": [r.to_dict() for r in res]}, ok),
          lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_reproduce(args) -> int:
    from .reproduce import run_suite

    res = run_suite(args.example, seed=args.seed, budget=args.budget)
    crit = res["criteria"]
    ok = all(c.passed for c in crit)
    lines = [c.line() for c in crit]
    if not ok:
        lines.append("failing: " + ", ".join(c.name for c in crit if not c.passed))
    stages = {"criteria": [c.to_dict() for c in crit], "diagnostics": res["diagnostics"]}
    report = run_report(f"reproduce {args.example}", args, None, stages, ok)
    report["example"] = args.example
    _emit(args, report, lines)
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------


def _gains(text: str) -> list[float]:
    try:
        return [float(g) for g in text.split(",") if g.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad gain list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")
    common.add_argument("--budget", type=int, default=None, help="sphere sample budget")
    common.add_argument("--tol", type=float, default=None, help="integrator tolerance")
    common.add_argument("--out", default=None, help="report file (simulate: output directory)")
    common.add_argument("--json", action="store_true", help="print the JSON report to stdout")

    p = argparse.ArgumentParser(prog="hiopt", description=(
        "Inverse-optimal ISS/IOS controller synthesis for homogeneous systems."))
    p.add_argument("--version", action="version", version=f"hiopt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("validate", cmd_validate, "check homogeneity and Lyapunov preconditions"),
        ("synthesize", cmd_synthesize, "synthesize the controller and report constants"),
        ("verify", cmd_verify, "synthesize, then run sampled certificates"),
        ("simulate", cmd_simulate, "integrate closed-loop trajectories to CSV"),
    ):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("config", help="JSON config (or a previous run report)")
        s.set_defaults(func=fn)

    s = sub.add_parser("sweep-gain", parents=[common], help="gain-margin sweep")
    s.add_argument("config")
    s.add_argument("--gains", type=_gains, default=None, help="comma-separated gains")
    s.set_defaults(func=cmd_sweep_gain)

    s = sub.add_parser("reproduce", parents=[common], help="run a built-in fixture suite")
    s.add_argument("example", choices=["ex1", "ex2", "ex3", "ex4"])
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"hiopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainFailure, EvalError, IntegrationError, ValueError) as exc:
        print(f"hiopt: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
