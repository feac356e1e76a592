"""Command-line entry point: ``ldhit {rates,mpp,simulate,asym,ruin} --config PATH``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import asymptotics as asym
from . import config as cfgmod
from .errors import ConfigError, LdhitError
from .geometry import OrthantTarget, half_space_geometry, mpp_orthant
from .rates import RateEvaluator
from .simulation import McRun, RuinSettings, TiltSpec, default_tilt, is_hitting_prob, simulate_ruin

log = logging.getLogger("ldhit")

MC_HEADER = ["s", "estimate", "std_error", "ci_low", "ci_high", "n_traj", "n_hit", "seed"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out_dir: Optional[Path], name: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)
    log.info("wrote %s", out_dir / name)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)) + "\n"


def read_runs(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MC_HEADER:
            raise ConfigError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            McRun(float(r["s"]), float(r["estimate"]), float(r["std_error"]), float(r["ci_low"]),
                  float(r["ci_high"]), int(r["n_traj"]), int(r["n_hit"]), int(r["seed"]))
            for r in reader
        ]


# -- commands ------------------------------------------------------------------


def cmd_rates(cfg, args) -> int:
    model = cfg.build_model()
    ev = RateEvaluator(model)
    d = model.dim
    points = cfg.points or [cfg.g]
    header = ([f"point_{i + 1}" for i in range(d)] + ["Lambda"] + [f"lambda_{i + 1}" for i in range(d)]
              + ["D", "t"] + [f"lambda_opt_{i + 1}" for i in range(d)])
    rows = []
    for p in points:
        if p.size != d:
            raise ConfigError(f"points: entry {p.tolist()} does not have dimension {d}")
        lam = ev.lambda_of_alpha(p)
        primal = ev.second_rate_D(p)
        dual = ev.second_rate_D_dual(p)
        rows.append(list(p) + [ev.rate_Lambda(p)] + list(lam) + [primal.D, primal.t] + list(dual.lambda_opt))
    _emit(_csv_text(header, rows), args.out_dir, "rates.csv")
    return 0


def cmd_mpp(cfg, args) -> int:
    model = cfg.build_model()
    report = mpp_orthant(OrthantTarget(cfg.g, RateEvaluator(model)))
    _emit(_json(report.to_dict()), args.out_dir, "mpp.json")
    report.require_c3()
    return 0


def _tilt(cfg, model) -> TiltSpec:
    if isinstance(cfg.tilt, dict):
        return TiltSpec(cfg.tilt["lambda"], "user_supplied")
    return default_tilt(half_space_geometry(OrthantTarget(cfg.g, RateEvaluator(model))))


def _simulate(cfg, args) -> list:
    model = cfg.build_model()
    return is_hitting_prob(model, cfg.g, _tilt(cfg, model), cfg.s_grid, cfg.n_traj, cfg.max_steps,
                           cfg.seed, args.threads)


def cmd_simulate(cfg, args) -> int:
    runs = _simulate(cfg, args)
    _emit(_csv_text(MC_HEADER, [r.row() for r in runs]), args.out_dir, cfg.simulate_csv)
    return 0


def cmd_asym(cfg, args) -> int:
    model = cfg.build_model()
    d = model.dim
    csv_path = args.out_dir / cfg.simulate_csv if args.out_dir is not None else None
    if csv_path is not None and csv_path.exists():
        runs = read_runs(csv_path)
        log.info("using existing %s", csv_path)
    else:
        runs = _simulate(cfg, args)
        if csv_path is not None:
            _emit(_csv_text(MC_HEADER, [r.row() for r in runs]), args.out_dir, cfg.simulate_csv)

    geom = half_space_geometry(OrthantTarget(cfg.g, RateEvaluator(model)))
    fit = asym.fit_asymptote(runs, d)
    report = {
        "D_G": geom.report.D_G,
        "D_fit": fit.D_fit,
        "D_fit_ci95": list(fit.D_interval()),
        "A_fitted": fit.A_fit,
        "A_fitted_ci95": list(fit.A_interval()),
        "A_estimated": None,
        "sigma2_D": None,
        "a_uG": None,
        "sigma_star_D": None,
        "E_value": None,
        "E_se": None,
    }
    lq = asym.laplace_quantities(geom)
    report.update(sigma2_D=lq.sigma2_D, a_uG=lq.a_uG, sigma_star_D=lq.sigma_star_D)
    if cfg.direct_A:
        e_est = asym.estimate_E_integral(geom, cfg.e_settings(args.threads))
        report.update(A_estimated=asym.constant_A(geom, lq, e_est), E_value=e_est.value, E_se=e_est.se)

    # prediction curve and ratio table use the theoretical D_G with A fitted at that D
    fit_at_D = asym.fit_asymptote(runs, d, fixed_D=geom.report.D_G)
    curve = asym.AsymptoticModel(geom.report.D_G, fit_at_D.A_fit, "fitted", d)
    report["A_fitted_at_D_G"] = fit_at_D.A_fit
    pos = [r for r in runs if r.s > 0]
    table = asym.ratio_table(curve, pos)
    report["ratio_inside_ci_fraction"] = float(np.mean([row["inside_ci"] for row in table])) if table else None

    _emit(_json(report), args.out_dir, "asym.json")
    if args.out_dir is not None:
        _emit(_csv_text(["s", "predicted"], [[r.s, curve.predict(r.s)] for r in pos]), args.out_dir,
              "prediction.csv")
        keys = list(table[0].keys()) if table else ["s"]
        _emit(_csv_text(keys, [[row[k] for k in keys] for row in table]), args.out_dir, "ratio.csv")
    return 0


def cmd_ruin(cfg, args) -> int:
    model = cfg.build_model()
    if cfg.ruin is None:
        raise ConfigError("ruin: section is required for the ruin command")
    u = np.asarray(cfg.ruin["u"], dtype=float)
    tilt = TiltSpec(cfg.tilt["lambda"], "user_supplied") if isinstance(cfg.tilt, dict) else None
    settings = RuinSettings(n_traj=cfg.n_traj, max_steps=cfg.max_steps, seed=cfg.seed,
                            s=float(cfg.ruin.get("s", 1.0)), tilt=tilt, threads=args.threads)
    run = simulate_ruin(model, u, settings)
    _emit(_csv_text(MC_HEADER, [run.row()]), args.out_dir, "ruin.csv")
    return 0


COMMANDS = {
    "rates": cmd_rates,
    "mpp": cmd_mpp,
    "simulate": cmd_simulate,
    "asym": cmd_asym,
    "ruin": cmd_ruin,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldhit", description="Exact asymptotics and IS Monte Carlo for "
                                     "orthant hitting probabilities of random walks.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--threads", type=int, help="worker cap (default: $LDHIT_THREADS or all cores)")
    parser.add_argument("--out", help="output directory (default: configured, else stdout)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        cfg = cfgmod.load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed: must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads: must be positive")
        out = args.out if args.out is not None else cfg.out_dir
        args.out_dir = Path(out) if out is not None else None
        return COMMANDS[args.command](cfg, args)
    except LdhitError as exc:
        print(f"ldhit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
