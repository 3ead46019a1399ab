"""Command-line entry point: ``agglearn {theory-curves,simulate,dp-sweep,selfcheck}``.

Every command that writes a file also writes ``<out>.manifest.json`` recording
the command, the fully resolved parameters, the seed, the package version, the
output paths and the wall-clock duration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _csv, losses, theory
from .bagging import AggregateDataset, assign_bags
from .errors import AggLearnError
from .estimator import fit_interpolating, normal_equations
from .privacy import DpConfig, optimal_bag_size
from .simulation import ExperimentConfig, resolve_workers, run_dp_experiment, run_theory_verification

VERSION = "0.1.0"


class ConfigError(AggLearnError, ValueError):
    """Experiment config could not be parsed or validated."""


# ---------------------------------------------------------------------------
# helpers


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    return vals


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _write_outputs(outputs: dict[Path, str], out: Path, command: str, params: dict, seed, t0: float):
    for path, text in outputs.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    manifest = {
        "command": command,
        "parameters": params,
        "seed": seed,
        "version": VERSION,
        "outputs": [str(p) for p in outputs],
        "duration_s": time.perf_counter() - t0,
    }
    with open(_manifest_path(out), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# theory-curves

THEORY_HEADER = (
    "psi", "k", "snr", "rho", "alpha_star", "u_star", "v_star", "bias", "variance", "risk", "status",
)


def theory_curves_csv(psis, ks, snrs, rhos) -> str:
    rows = []
    for psi in psis:
        for k in ks:
            for snr in snrs:
                for p in theory.risk_curve(psi, k, snr, rhos):
                    rows.append(
                        (p.psi, p.k, p.snr, p.rho, p.alpha_star, p.u_star, p.v_star,
                         p.bias, p.variance, p.risk, p.status)
                    )
    return _csv.render(THEORY_HEADER, rows)


def cmd_theory_curves(args, parser) -> int:
    rhos = args.rho if args.rho is not None else list(np.linspace(0.0, 1.0, args.rho_points))
    if not rhos or not args.psi or not args.k or not args.snr:
        parser.error("psi, k, snr and rho grids must all be non-empty")
    if any(not 0 <= r <= 1 for r in rhos) or any(p <= 1 for p in args.psi) or any(s <= 0 for s in args.snr):
        parser.error("need rho in [0, 1], psi > 1 and snr > 0")
    if any(k < 1 for k in args.k):
        parser.error("k must be >= 1")
    t0 = time.perf_counter()
    text = theory_curves_csv(args.psi, args.k, args.snr, rhos)
    params = {"psi": args.psi, "k": args.k, "snr": args.snr, "rho": [float(r) for r in rhos]}
    _write_outputs({args.out: text}, args.out, "theory-curves", params, None, t0)
    return 0


# ---------------------------------------------------------------------------
# simulate

_CONFIG_FIELDS = {"d", "psi", "k", "snr", "rho_grid", "replicates", "seed", "dp"}
_DP_FIELDS = {"epsilon", "C", "sensitivity"}


def load_experiment_config(path: Path) -> dict:
    """Parse and validate a JSON experiment config; unknown fields are rejected."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}; allowed: {sorted(_CONFIG_FIELDS)}")
    missing = {"d", "psi", "k", "snr", "rho_grid"} - set(raw)
    if missing:
        raise ConfigError(f"{path}: missing required field(s) {sorted(missing)}")
    if "dp" in raw:
        if not isinstance(raw["dp"], dict):
            raise ConfigError(f"{path}: field 'dp' must be an object")
        bad = set(raw["dp"]) - _DP_FIELDS
        if bad:
            raise ConfigError(f"{path}: unknown field(s) in 'dp': {sorted(bad)}; allowed: {sorted(_DP_FIELDS)}")
        if not {"epsilon", "C"} <= set(raw["dp"]):
            raise ConfigError(f"{path}: 'dp' needs 'epsilon' and 'C'")
    ks = raw["k"] if isinstance(raw["k"], list) else [raw["k"]]
    cfg = dict(raw, k=ks)
    cfg.setdefault("replicates", 20)
    cfg.setdefault("seed", 0)
    # validate every k eagerly so errors name the field before any computation
    for k in ks:
        _build_config(cfg, k, path)
    return cfg


def _build_config(cfg: dict, k, path="config") -> ExperimentConfig:
    try:
        exp = ExperimentConfig(
            d=cfg["d"], psi=float(cfg["psi"]), k=k, snr=float(cfg["snr"]),
            rho_grid=cfg["rho_grid"], replicates=cfg["replicates"], seed=cfg["seed"],
        )
        if "dp" in cfg:
            dp = cfg["dp"]
            exp = exp.with_dp(float(dp["epsilon"]), float(dp["C"]), dp.get("sensitivity", "paper"))
    except (AggLearnError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return exp


def cmd_simulate(args, parser) -> int:
    try:
        cfg = load_experiment_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"agglearn simulate: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    workers = resolve_workers(args.workers)
    t0 = time.perf_counter()
    outputs = {}
    for k in cfg["k"]:
        exp = _build_config(cfg, k, args.config)
        result = run_dp_experiment(exp, workers) if exp.dp else run_theory_verification(exp, workers)
        path = args.out if len(cfg["k"]) == 1 else args.out.with_name(f"{args.out.stem}_k{k}{args.out.suffix}")
        outputs[path] = result.to_csv()
    _write_outputs(outputs, args.out, "simulate", cfg, cfg["seed"], t0)
    return 0


# ---------------------------------------------------------------------------
# dp-sweep


def dp_sweep_csv(psis, log10_rhos, k_max, epsilon, clip_constant, n=1000, sensitivity="paper") -> str:
    cfg = DpConfig(epsilon, clip_constant, 1, n, sensitivity)
    header = ["log10_rho", "psi", "k_star", "risk_star"] + [f"k{k}_risk" for k in range(1, k_max + 1)]
    rows = []
    for psi in psis:
        for lr in log10_rhos:
            choice = optimal_bag_size(psi, 10.0**lr, cfg, k_max)
            prof = [math.nan if r is None else r for _, r in choice.profile]
            rows.append([lr, psi, choice.k_star, choice.risk_star] + prof)
    return _csv.render(header, rows)


def cmd_dp_sweep(args, parser) -> int:
    if args.k_max < 1 or args.rho_points < 1 or not args.psi:
        parser.error("need k_max >= 1, rho_points >= 1 and a non-empty psi list")
    if not 0 < args.rho_min <= args.rho_max <= 1:
        parser.error("need 0 < rho_min <= rho_max <= 1")
    log10_rhos = list(np.linspace(math.log10(args.rho_min), math.log10(args.rho_max), args.rho_points))
    t0 = time.perf_counter()
    text = dp_sweep_csv(args.psi, log10_rhos, args.k_max, args.epsilon, args.C, args.n, args.sensitivity)
    params = {
        "psi": args.psi, "rho_min": args.rho_min, "rho_max": args.rho_max, "rho_points": args.rho_points,
        "k_max": args.k_max, "epsilon": args.epsilon, "C": args.C, "n": args.n, "sensitivity": args.sensitivity,
    }
    _write_outputs({args.out: text}, args.out, "dp-sweep", params, None, t0)
    return 0


# ---------------------------------------------------------------------------
# selfcheck


def _check(name: str, observed: float, tolerance: float, passed: bool | None = None) -> dict:
    ok = bool(observed <= tolerance) if passed is None else bool(passed)
    return {"name": name, "tolerance": tolerance, "observed": observed, "passed": ok}


def run_selfcheck(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    checks = []

    # instance loss = bag loss + regularizer, squared loss
    worst = 0.0
    jensen = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 9))
        m = int(rng.integers(1, 9))
        bags = assign_bags(m * k, k, rng)
        agg = AggregateDataset(np.zeros((m * k, 1)), rng.normal(size=m), bags)
        f = rng.normal(scale=3.0, size=m * k)
        l_ins = losses.instance_loss(f, agg)
        gap = abs(l_ins - losses.bag_loss(f, agg) - losses.regularizer(f, bags))
        worst = max(worst, gap / max(1.0, l_ins))
        lc = losses.logcosh_loss
        jensen = max(jensen, losses.bag_loss(f, agg, lc) - losses.instance_loss(f, agg, lc))
    checks.append(_check("loss_split_identity", worst, 1e-12))
    checks.append(_check("jensen_direction_logcosh", jensen, 1e-12))

    worst = 0.0
    for _ in range(200):
        a = rng.normal(size=int(rng.integers(1, 12)))
        lhs = np.sum((a - a.mean()) ** 2)
        rhs = np.sum((a[:, None] - a[None, :]) ** 2) / (2 * a.size)
        worst = max(worst, abs(lhs - rhs) / max(1.0, lhs))
    checks.append(_check("pairwise_identity", worst, 1e-12))

    worst_bag = worst_ins = worst_res = 0.0
    for psi in (2.0, 3.0, 4.0, 8.0):
        for k in (1, 2, 3, 5):
            ins = theory.instance_level_limits(psi, k)
            b1 = theory.solve_bias(psi, k, 1.0).bias
            v1 = theory.solve_variance(psi, k, 1.0).variance
            worst_ins = max(worst_ins, abs(b1 - ins[0]), abs(v1 - ins[1]))
            if psi > k:
                bag = theory.bag_level_limits(psi, k)
                v0 = theory.solve_variance(psi, k, 0.0).variance
                worst_bag = max(worst_bag, abs(theory.solve_bias(psi, k, 0.0).bias - bag[0]), abs(v0 - bag[1]))
            for rho in np.linspace(0.05, 1.0, 20):
                p = theory.theory_point(psi, k, rho, 1.0)
                if p.ok:
                    worst_res = max(worst_res, *map(abs, theory.fixed_point_residuals(p)))
    checks.append(_check("endpoint_bag_level", worst_bag, 1e-9))
    checks.append(_check("endpoint_instance_level", worst_ins, 1e-9))
    checks.append(_check("fixed_point_residuals", worst_res, 1e-10))

    thr = theory.snr_threshold(Fraction(4), 2)
    checks.append(_check("snr_threshold_exact", float(abs(thr - Fraction(5, 2))), 0.0))

    bags = assign_bags(60, 3, rng)
    X = rng.normal(size=(60, 5))
    agg = AggregateDataset(X, rng.normal(size=20), bags)
    G, b = normal_equations(agg, 0.4)
    theta = fit_interpolating(agg, 0.4).theta_hat
    checks.append(_check("normal_equation_residual", float(np.linalg.norm(G @ theta - b) / np.linalg.norm(b)), 1e-8))
    return checks


def cmd_selfcheck(args, parser) -> int:
    t0 = time.perf_counter()
    checks = run_selfcheck(args.seed)
    for c in checks:
        flag = "PASS" if c["passed"] else "FAIL"
        print(f"{flag}  {c['name']:<28} observed={c['observed']:.3e}  tol={c['tolerance']:.1e}")
    report = {"passed": all(c["passed"] for c in checks), "checks": checks}
    text = json.dumps(report, indent=2) + "\n"
    if args.out is not None:
        _write_outputs({args.out: text}, args.out, "selfcheck", {"seed": args.seed}, args.seed, t0)
    else:
        print(text, end="")
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agglearn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"agglearn {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory-curves", help="asymptotic bias/variance/risk over a parameter grid")
    p.add_argument("--psi", type=_float_list, required=True, help="comma-separated n/d ratios (> 1)")
    p.add_argument("--k", type=_int_list, required=True, help="comma-separated bag sizes")
    p.add_argument("--snr", type=_float_list, default=[1.0])
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rho", type=_float_list, help="comma-separated rho values")
    g.add_argument("--rho-points", type=int, default=101, help="uniform grid on [0, 1]")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_theory_curves)

    p = sub.add_parser("simulate", help="Monte Carlo check of the theory (or DP pipeline) from a JSON config")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--workers", type=int, help="parallel replicates (default $AGGLEARN_WORKERS or 1)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dp-sweep", help="optimal bag size under label DP versus rho")
    p.add_argument("--psi", type=_float_list, required=True)
    p.add_argument("--rho-min", type=float, default=1e-4)
    p.add_argument("--rho-max", type=float, default=1.0)
    p.add_argument("--rho-points", type=int, default=41, help="log-spaced grid size")
    p.add_argument("--k-max", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--C", type=float, default=2.1, help="clip constant")
    p.add_argument("--n", type=int, default=1000, help="sample size; only sets the clip level")
    p.add_argument("--sensitivity", choices=["paper", "worst_case"], default="paper")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_dp_sweep)

    p = sub.add_parser("selfcheck", help="identity and consistency checks; nonzero exit on failure")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
