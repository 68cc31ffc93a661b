"""Command-line entry point: ``avail-bound bound|simulate|couple|stationary|verify``."""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, bounds, coupling, kernels, renewal
from .bounds import BoundParams
from .config import RunConfig
from .errors import AvailBoundError
from .model import ModelParams
from .stats import ks_against

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class Outputs:
    """Writes artifacts into one directory and records them for the manifest."""

    def __init__(self, directory: Path, formats: set[str]):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.formats = formats
        self.files: dict[str, str] = {}

    def text(self, name: str, content: str) -> None:
        (self.dir / name).write_text(content)
        self.files[name] = hashlib.sha256(content.encode()).hexdigest()

    def json(self, name: str, payload) -> None:
        self.text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def manifest(self, command: str, cfg: RunConfig) -> None:
        payload = {
            "command": command,
            "config_sha256": cfg.digest,
            "seed": cfg.seed,
            "versions": {
                "availbound": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__,
                "kernel_backend": kernels.BACKEND,
            },
            "files": dict(sorted(self.files.items())),
            "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        (self.dir / "manifest.json").write_text(json.dumps(payload, indent=2) + "\n")


def _label(state) -> str:
    return f"{int(state.regime)}_{state.elapsed:g}"


# ---------------------------------------------------------------- commands


def run_bound(cfg: RunConfig, model: ModelParams) -> dict:
    """Window choice, Psi for every configured start, and the coupling constant."""
    mode, alpha = cfg.theta0_mode, cfg.alpha
    fixed = cfg.fixed_window()
    starts = cfg.starts
    if fixed is None:
        choice = bounds.optimize_window(model, alpha, starts[0], cfg.search_spec(), mode)
        R, N = choice.R, choice.N
        searched = len(choice.evaluated)
    else:
        R, N = fixed
        searched = 0
    params = BoundParams(alpha, R, N)
    reports = [bounds.psi(model, x0, params, mode) for x0 in starts]
    z1, z2 = cfg.couple_starts
    return {
        "model": model.describe(),
        "alpha": alpha,
        "window": {"R": R, "N": N, "searched": fixed is None, "points_evaluated": searched},
        "reports": [r.to_dict() for r in reports],
        "coupling_constant": {
            "starts": [str(z1), str(z2)],
            "value": bounds.coupling_constant(model, alpha, z1, z2, params, mode),
        },
    }


def cmd_bound(cfg, model, out, threads):
    out.json("bound.json", run_bound(cfg, model))
    return EXIT_OK


def _write_curve(out, stem, curve):
    if "csv" in out.formats:
        out.text(f"{stem}.csv", curve.to_csv())
    if "json" in out.formats:
        out.json(f"{stem}.json", curve.to_dict())


def cmd_simulate(cfg, model, out, threads):
    for x0 in cfg.starts:
        curve = renewal.availability_curve(model, x0, cfg.grid, cfg.n_traj, cfg.seed,
                                           level=cfg.level, threads=threads)
        _write_curve(out, f"curve_{_label(x0)}", curve)
    return EXIT_OK


def run_couple(cfg, model, threads, bound_value=None):
    z1, z2 = cfg.couple_starts
    return coupling.coupling_stats(model, z1, z2, cfg.alpha, cfg.couple_runs, cfg.seed,
                                   level=cfg.level, bound=bound_value, cap=cfg.cap,
                                   threads=threads)


def cmd_couple(cfg, model, out, threads):
    z1, z2 = cfg.couple_starts
    fixed = cfg.fixed_window()
    bound_value = None
    if fixed is not None:
        bound_value = bounds.coupling_constant(
            model, cfg.alpha, z1, z2, BoundParams(cfg.alpha, *fixed), cfg.theta0_mode)
    else:
        bound_value = run_bound(cfg, model)["coupling_constant"]["value"]
    stats = run_couple(cfg, model, threads, bound_value)
    out.json("couple.json", stats.to_dict())
    if "csv" in out.formats:
        out.text("sigma.csv", "sigma\n" + "".join(f"{float(v)!r}\n" for v in stats.samples))
    return EXIT_OK


def run_stationary(cfg, model, threads):
    curve = renewal.stationary_start_curve(model, cfg.stationary_grid, cfg.stationary_n_traj,
                                           cfg.seed, level=cfg.level, threads=threads)
    A = model.limiting_availability()
    covered = curve.covers(A)
    summary = {"availability": A, "points": int(covered.size),
               "covered": int(covered.sum()), "covered_fraction": float(covered.mean()),
               "flat": bool(covered.mean() >= 0.95)}
    return curve, summary


def cmd_stationary(cfg, model, out, threads):
    curve, summary = run_stationary(cfg, model, threads)
    _write_curve(out, "stationary", curve)
    out.json("stationary_summary.json", summary)
    return EXIT_OK


def ks_suite(cfg, model) -> list[dict]:
    """Marginal checks of the coupling: spliced draws and paired-run periods."""
    results = []
    n, level = cfg.ks_draws, cfg.ks_level
    for x, y in cfg.ks_pairs:
        t1, _ = coupling.splice_draws(model, x, y, n, cfg.seed)
        stat, pval = ks_against(t1, lambda s, x=x: model.work.residual_cdf(x, s))
        results.append({"test": f"splice_first_x{x:g}_y{y:g}", "statistic": stat,
                        "pvalue": pval, "pass": pval > level})
    z1, z2 = cfg.couple_starts
    periods = coupling.paired_cycle_lengths(model, z1, z2, n, cfg.seed)
    for key, sample in periods.items():
        law = model.work if key.startswith("work") else model.repair
        stat, pval = ks_against(sample, law.cdf)
        results.append({"test": f"paired_{key}", "statistic": stat, "pvalue": pval,
                        "pass": pval > level})
    return results


def cmd_verify(cfg, model, out, threads):
    bound = run_bound(cfg, model)
    A = model.limiting_availability()
    scale = cfg.psi_scale
    points, failing = [], []
    for x0, report in zip(cfg.starts, bound["reports"]):
        curve = renewal.availability_curve(model, x0, cfg.grid, cfg.n_traj, cfg.seed,
                                           level=cfg.level, threads=threads)
        _write_curve(out, f"curve_{_label(x0)}", curve)
        psi_used = report["psi"] * scale
        for t, a, hw in zip(curve.grid, curve.a_hat, curve.ci_half_width):
            lhs = abs(float(a) - A) - float(hw)
            rhs = psi_used / (1.0 + float(t)) ** cfg.alpha
            ok = lhs <= rhs
            points.append({"start": str(x0), "t": float(t), "a_hat": float(a),
                           "ci_half_width": float(hw), "adjusted_gap": lhs,
                           "bound": rhs, "pass": ok})
            if not ok:
                failing.append({"start": str(x0), "t": float(t)})

    cstats = run_couple(cfg, model, threads, bound["coupling_constant"]["value"])
    moment_ok = cstats.moment_ci[1] <= bound["coupling_constant"]["value"]
    ks = ks_suite(cfg, model)
    ks_ok = all(r["pass"] for r in ks)
    overall = not failing and moment_ok and ks_ok
    verdict = {
        "overall": "PASS" if overall else "FAIL",
        "limiting_availability": A,
        "psi_scale": scale,
        "criterion": "|a_hat(t) - A| - ci_half_width <= psi_scale * Psi / (1 + t)**alpha",
        "window": bound["window"],
        "points": points,
        "failing": failing,
        "coupling_moment": {**cstats.to_dict(), "pass": moment_ok},
        "ks": ks,
    }
    out.json("bound.json", bound)
    out.json("verify.json", verdict)
    for p in points:
        print(f"{'PASS' if p['pass'] else 'FAIL'} start={p['start']} t={p['t']:g} "
              f"gap={p['adjusted_gap']:.3e} bound={p['bound']:.3e}")
    print(f"{'PASS' if moment_ok else 'FAIL'} coupling moment "
          f"{cstats.moment_ci[1]:.4g} <= {bound['coupling_constant']['value']:.4g}")
    for r in ks:
        print(f"{'PASS' if r['pass'] else 'FAIL'} ks {r['test']} p={r['pvalue']:.3g}")
    print(f"overall: {verdict['overall']}")
    if failing:
        print("failing t: " + ", ".join(f"{f['start']}@{f['t']:g}" for f in failing))
    return EXIT_OK if overall else EXIT_FAIL


COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "couple": cmd_couple,
    "stationary": cmd_stationary,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avail-bound", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="flat key=value config file")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: $AVAIL_BOUND_THREADS or 1)")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        model = cfg.model()
        out = Outputs(Path(args.out) if args.out else cfg.out_dir, cfg.formats)
        threads = args.threads or kernels.default_threads()
        code = COMMANDS[args.command](cfg, model, out, threads)
        out.manifest(args.command, cfg)
        return code
    except AvailBoundError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
