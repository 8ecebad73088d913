"""Command-line interface.

Subcommands:
  estimate         read a data CSV, write an estimated covariance matrix
  sweep            run a Monte Carlo sweep from a spec file
  calibrate-gamma  estimate the entrywise-noise tail constant by simulation
  packing          build and certify a packing family, write the certificate
  rates            tabulate the minimax rate functions over an n grid
  plotdata         aggregate sweep records into two-column series files

Exit codes: 0 success, 1 usage or validation error, 2 runtime error,
3 check failure (--check-oracle violations, or packing --require with a
negative certificate margin).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import harness, packing
from .estimators import calibrate_gamma, hard_threshold, sample_covariance, soft_threshold
from .harness import SpecFileError, parse_spec, with_base_seed
from .matrix import InvalidParameterError, SymMatrix, write_matrix_text
from .models import GenerationError
from .oracle import RateParams, minimax_rate_frobenius, minimax_rate_l1, rate_feasibility


class UsageError(Exception):
    pass


class CheckFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse errors to exit code 1
        raise UsageError(message)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SPARSECOV_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"bad SPARSECOV_THREADS value {env!r}") from exc
    return 1


def _read_data_csv(path: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: expected comma-separated floats") from exc
    if not rows:
        raise UsageError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise UsageError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.array(rows)


def _cmd_estimate(args) -> int:
    data = _read_data_csv(args.data)
    sigma_star = sample_covariance(data, center=args.center)
    if args.estimator == "sample":
        out = sigma_star
    else:
        if args.tau is not None:
            tau = args.tau
        elif args.gamma is not None:
            tau = args.multiplier * args.gamma * math.sqrt(math.log(data.shape[1]) / data.shape[0])
        else:
            raise UsageError("thresholding needs --tau or --gamma")
        if tau <= 0:
            raise UsageError("threshold must be positive")
        out = soft_threshold(sigma_star, tau) if args.estimator == "soft" else hard_threshold(sigma_star, tau)
    Path(args.out).write_text(write_matrix_text(out))
    return 0


def _cmd_sweep(args) -> int:
    try:
        spec = parse_spec(Path(args.spec).read_text())
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except SpecFileError as exc:
        raise UsageError(f"bad spec file: {exc}") from exc
    if args.seed is not None:
        spec = with_base_seed(spec, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    records = harness.run_sweep(spec, threads=_threads(args))
    elapsed = time.perf_counter() - start
    if args.format == "json":
        (out_dir / "records.json").write_text(harness.records_to_json(records))
    else:
        (out_dir / "records.csv").write_text(harness.records_to_csv(records))
    summary = harness.summary(spec, records, elapsed)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.check_oracle:
        bad = [
            r
            for r in records
            if r.loss_name == "frobenius"
            and r.estimator == "soft"
            and not r.error
            and r.tau_condition_ok
            and not r.oracle_ok
        ]
        if bad:
            print(f"oracle check FAILED: {len(bad)} violating records", file=sys.stderr)
            raise CheckFailure(f"{len(bad)} records violate the oracle bound")
        print("oracle check passed: 0 violations")
    return 0


def _cmd_calibrate(args) -> int:
    gamma = calibrate_gamma(args.p, args.n, trials=args.trials, quantile=args.quantile, seed=args.seed or 0)
    payload = {"p": args.p, "n": args.n, "trials": args.trials, "quantile": args.quantile,
               "seed": args.seed or 0, "gamma": gamma}
    text = json.dumps(payload, indent=2) + "\n" if args.format == "json" else f"{gamma:.17g}\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_packing(args) -> int:
    config = packing.PackingConfig(
        p=args.p, k=args.k, n=args.n, variant=args.variant, base_amplitude=args.base_amplitude
    )
    family = packing.build_packing(
        config, target_card=args.target_card, max_attempts=args.max_attempts, seed=args.seed or 0
    )
    psi = packing.guaranteed_separation(config, family.amplitude) if args.psi is None else args.psi
    text = packing.certificate_json(family, n=args.n, psi=psi)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.require:
        cert = packing.certify(family, n=args.n, psi=psi)
        if family.below_target or cert.separation_margin < 0 or cert.kl_budget_margin < 0:
            raise CheckFailure(
                f"certificate failed: below_target={family.below_target}, "
                f"separation_margin={cert.separation_margin:.6g}, "
                f"kl_budget_margin={cert.kl_budget_margin:.6g}"
            )
    return 0


def _fit_exponent(ns, values) -> float:
    """Slope of log(value) against log(n); exactly 0 for a constant row."""
    if min(values) == max(values):
        return 0.0
    lx = np.log(np.asarray(ns, dtype=float))
    ly = np.log(np.asarray(values, dtype=float))
    return float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / np.sum((lx - lx.mean()) ** 2))


def _cmd_rates(args) -> int:
    ns = [int(tok) for tok in args.n.split(",") if tok.strip()]
    if len(ns) < 1:
        raise UsageError("need at least one n value")
    rows = []
    for n in ns:
        params = RateParams(n=n, p=args.p, radius=args.radius, q=args.q, c0=args.c0)
        conditions = rate_feasibility(params, args.c_max)
        row = {
            "n": n,
            "p": args.p,
            "radius": args.radius,
            "q": args.q,
            "rate_frobenius": minimax_rate_frobenius(params),
            "rate_l1": minimax_rate_l1(params) if args.q <= 1.0 else None,
            "frobenius_budget_ok": conditions.frobenius_budget_ok,
            "l1_budget_ok": conditions.l1_budget_ok,
            "support_floor_ok": conditions.support_floor_ok,
        }
        rows.append(row)
    payload: dict = {"table": rows}
    if len(ns) >= 2:
        payload["exponent_in_n"] = {
            "rate_frobenius": _fit_exponent(ns, [r["rate_frobenius"] for r in rows]),
        }
        if args.q <= 1.0:
            payload["exponent_in_n"]["rate_l1"] = _fit_exponent(ns, [r["rate_l1"] for r in rows])
    if args.format == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        cols = list(rows[0])
        lines = [",".join(cols)]
        for row in rows:
            lines.append(",".join(harness._fmt(row[c]) for c in cols))
        text = "\n".join(lines) + "\n"
        if "exponent_in_n" in payload:
            for key, val in payload["exponent_in_n"].items():
                text += f"# exponent_in_n {key} = {harness._fmt(val)}\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _parse_records_csv(path: str) -> list[harness.ExperimentRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split(",") != list(harness.CSV_COLUMNS):
        raise UsageError(f"{path}: not a records CSV (bad header)")
    typed = {f.name: f.type for f in dataclasses.fields(harness.ExperimentRecord)}
    records = []
    for line in lines[1:]:
        vals = line.split(",")
        kwargs = {}
        for col, raw in zip(harness.CSV_COLUMNS, vals):
            t = typed[col]
            if t == "int":
                kwargs[col] = int(raw)
            elif t == "float":
                kwargs[col] = float(raw) if raw else math.nan
            elif t.startswith("bool"):
                kwargs[col] = None if raw == "" else raw == "true"
            else:
                kwargs[col] = raw
        records.append(harness.ExperimentRecord(wall_time_s=0.0, **kwargs))
    return records


def _cmd_plotdata(args) -> int:
    records = _parse_records_csv(args.records)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files, manifest = harness.plot_series(records, x_axis=args.x_axis, use_squared=args.squared)
    for fname, content in files.items():
        (out_dir / fname).write_text(content)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="sparsecov", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate a covariance matrix from a data CSV")
    p_est.add_argument("--data", required=True, help="CSV of observations, one row per sample")
    p_est.add_argument("--out", required=True, help="output matrix text file")
    p_est.add_argument("--estimator", choices=("sample", "soft", "hard"), default="soft")
    p_est.add_argument("--tau", type=float, default=None, help="explicit threshold")
    p_est.add_argument("--multiplier", type=float, default=2.0)
    p_est.add_argument("--gamma", type=float, default=None)
    p_est.add_argument("--center", action="store_true", help="subtract the sample mean (divisor n-1)")
    p_est.set_defaults(func=_cmd_estimate)

    p_sweep = sub.add_parser("sweep", help="run a Monte Carlo sweep")
    p_sweep.add_argument("--spec", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--seed", type=int, default=None, help="override the spec base seed")
    p_sweep.add_argument("--threads", type=int, default=None)
    p_sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sweep.add_argument("--check-oracle", action="store_true",
                         help="exit 3 if any tau-condition trial violates the oracle bound")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cal = sub.add_parser("calibrate-gamma", help="simulate the noise tail constant")
    p_cal.add_argument("--p", type=int, required=True)
    p_cal.add_argument("--n", type=int, required=True)
    p_cal.add_argument("--trials", type=int, default=500)
    p_cal.add_argument("--quantile", type=float, default=0.99)
    p_cal.add_argument("--seed", type=int, default=None)
    p_cal.add_argument("--format", choices=("plain", "json"), default="plain")
    p_cal.add_argument("--out", default=None)
    p_cal.set_defaults(func=_cmd_calibrate)

    p_pack = sub.add_parser("packing", help="build and certify a packing family")
    p_pack.add_argument("--p", type=int, required=True)
    p_pack.add_argument("--k", type=int, required=True)
    p_pack.add_argument("--n", type=int, required=True)
    p_pack.add_argument("--variant", choices=("banded", "first_row"), required=True)
    p_pack.add_argument("--base-amplitude", type=float, default=0.1)
    p_pack.add_argument("--target-card", type=int, default=64)
    p_pack.add_argument("--max-attempts", type=int, default=None)
    p_pack.add_argument("--seed", type=int, default=None)
    p_pack.add_argument("--psi", type=float, default=None,
                        help="separation to certify against (default: the guaranteed one)")
    p_pack.add_argument("--require", action="store_true",
                        help="exit 3 unless both certificate margins are nonnegative")
    p_pack.add_argument("--out", default=None)
    p_pack.set_defaults(func=_cmd_packing)

    p_rates = sub.add_parser("rates", help="tabulate minimax rate functions")
    p_rates.add_argument("--p", type=int, required=True)
    p_rates.add_argument("--radius", type=float, required=True)
    p_rates.add_argument("--q", type=float, required=True)
    p_rates.add_argument("--n", required=True, help="comma-separated n values")
    p_rates.add_argument("--c0", type=float, default=math.e / 4.0)
    p_rates.add_argument("--c-max", type=float, default=1.0)
    p_rates.add_argument("--format", choices=("csv", "json"), default="json")
    p_rates.add_argument("--out", default=None)
    p_rates.set_defaults(func=_cmd_rates)

    p_plot = sub.add_parser("plotdata", help="aggregate records into plot series")
    p_plot.add_argument("--records", required=True, help="records CSV from a sweep")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--x-axis", choices=harness.X_AXES, default="n")
    p_plot.add_argument("--squared", action="store_true")
    p_plot.set_defaults(func=_cmd_plotdata)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SpecFileError, InvalidParameterError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 3
    except (OSError, GenerationError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
