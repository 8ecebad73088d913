"""Monte Carlo sweep harness: declarative experiment specs, deterministic
seeded execution, CSV/JSON records, rate fitting, and plot-ready series.

Determinism contract: identical spec and base seed produce byte-identical
records CSV within one build, independent of the number of worker
processes.  Every (grid point, trial) cell derives its own seed from the
base seed and its coordinates, and records are emitted in canonical order
(grid point, trial, estimator, loss).  Wall-clock timings are kept on the
record objects and in the summary but never serialized into the CSV.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .estimators import (
    ThresholdConfig,
    calibrate_gamma,
    hard_threshold,
    max_entrywise_deviation,
    sample_covariance,
    soft_threshold,
)
from .gaussian import GaussianModel
from .matrix import InvalidParameterError, SparsityClass, SymMatrix, frobenius_sq, op_l1_norm
from .models import GenerationError, ModelGenerator, generate_model
from .oracle import oracle_l0, penalty_from_threshold
from .rng import derive_seed

ESTIMATORS = ("sample", "soft", "hard")
LOSSES = ("frobenius", "op_l1")

# Tags keeping the derived seed streams disjoint.
_SEED_MODEL = 1
_SEED_MODEL_PER_TRIAL = 2
_SEED_DATA = 3
_SEED_CALIBRATE = 4


@dataclass(frozen=True)
class ExperimentSpec:
    """One declarative sweep over a grid of (n, p) pairs."""

    grid: tuple[tuple[int, int], ...]
    sparsity: SparsityClass
    generator: ModelGenerator
    estimators: tuple[str, ...] = ("sample", "soft", "hard")
    losses: tuple[str, ...] = ("frobenius", "op_l1")
    trials: int = 100
    base_seed: int = 0
    multiplier: float = 2.0
    gamma: float | None = None  # None: calibrate per grid point
    delta: float = 1.0
    calibrate_trials: int = 200
    calibrate_quantile: float = 0.99
    regenerate_model: bool = False

    def __post_init__(self) -> None:
        if not self.grid:
            raise InvalidParameterError("grid must be nonempty")
        for n, p in self.grid:
            if n < 2 or p < 2:
                raise InvalidParameterError(f"grid point (n={n}, p={p}) needs n >= 2 and p >= 2")
        if self.trials < 1:
            raise InvalidParameterError("trials must be at least 1")
        if not self.estimators or any(e not in ESTIMATORS for e in self.estimators):
            raise InvalidParameterError(f"estimators must be a nonempty subset of {ESTIMATORS}")
        if not self.losses or any(l not in LOSSES for l in self.losses):
            raise InvalidParameterError(f"losses must be a nonempty subset of {LOSSES}")
        if self.gamma is not None and self.gamma <= 0.0:
            raise InvalidParameterError("gamma must be positive when given")


@dataclass(frozen=True)
class ExperimentRecord:
    grid_index: int
    n: int
    p: int
    class_variant: str
    q: float
    radius: float
    generator: str
    decay: float
    estimator: str
    loss_name: str
    trial: int
    seed: int
    multiplier: float
    gamma: float
    delta: float
    tau: float
    tau_within_cap: bool
    tau_condition_ok: bool
    loss: float
    loss_sq: float
    oracle_bound: float
    oracle_ok: bool | None
    error: str
    wall_time_s: float = field(compare=False)


# Column order of the records CSV; wall_time_s is deliberately absent so
# that equal seeds give byte-identical files.
CSV_COLUMNS = tuple(f.name for f in fields(ExperimentRecord) if f.name != "wall_time_s")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def records_to_csv(records: list[ExperimentRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, col)) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def records_to_json(records: list[ExperimentRecord]) -> str:
    rows = [{col: getattr(rec, col) for col in CSV_COLUMNS} for rec in records]
    return json.dumps(rows, indent=1) + "\n"


def _gamma_for_point(spec: ExperimentSpec, grid_index: int) -> float:
    if spec.gamma is not None:
        return spec.gamma
    n, p = spec.grid[grid_index]
    return calibrate_gamma(
        p,
        n,
        trials=spec.calibrate_trials,
        quantile=spec.calibrate_quantile,
        seed=derive_seed(spec.base_seed, _SEED_CALIBRATE, grid_index),
    )


def _model_for_cell(spec: ExperimentSpec, grid_index: int, trial: int) -> SymMatrix:
    n, p = spec.grid[grid_index]
    if spec.regenerate_model:
        seed = derive_seed(spec.base_seed, _SEED_MODEL_PER_TRIAL, grid_index, trial)
    else:
        # keyed on p, not the grid index: grid points sharing a dimension
        # share the model, so loss-vs-n columns compare like with like
        seed = derive_seed(spec.base_seed, _SEED_MODEL, p)
    return generate_model(p, spec.sparsity, spec.generator, seed)


def _error_records(spec, grid_index, trial, seed, gamma, tau, message) -> list[ExperimentRecord]:
    n, p = spec.grid[grid_index]
    out = []
    for est in spec.estimators:
        for loss_name in spec.losses:
            out.append(
                ExperimentRecord(
                    grid_index=grid_index, n=n, p=p,
                    class_variant=spec.sparsity.variant, q=spec.sparsity.q,
                    radius=spec.sparsity.radius, generator=spec.generator.kind,
                    decay=spec.generator.decay, estimator=est, loss_name=loss_name,
                    trial=trial, seed=seed, multiplier=spec.multiplier, gamma=gamma,
                    delta=spec.delta, tau=tau, tau_within_cap=tau <= spec.delta,
                    tau_condition_ok=False, loss=math.nan, loss_sq=math.nan,
                    oracle_bound=math.nan, oracle_ok=None, error=message,
                    wall_time_s=0.0,
                )
            )
    return out


def run_cell(spec: ExperimentSpec, grid_index: int, trial: int, gamma: float,
             model: SymMatrix | None = None) -> list[ExperimentRecord]:
    """All records for one (grid point, trial) cell; order is canonical."""
    n, p = spec.grid[grid_index]
    cfg = ThresholdConfig(multiplier=spec.multiplier, gamma=gamma, n=n, p=p, delta=spec.delta)
    tau = cfg.tau
    seed = derive_seed(spec.base_seed, _SEED_DATA, grid_index, trial)
    start = time.perf_counter()
    try:
        if model is None:
            model = _model_for_cell(spec, grid_index, trial)
        data = GaussianModel(model).sample(n, seed)
    except (GenerationError, InvalidParameterError) as exc:
        return _error_records(spec, grid_index, trial, seed, gamma, tau, str(exc))

    sigma_star = sample_covariance(data)
    maxdev = max_entrywise_deviation(sigma_star, model)
    tau_condition = tau > 2.0 * maxdev
    bound = oracle_l0(model, penalty_from_threshold(tau)).value
    estimates = {}
    for est in spec.estimators:
        if est == "sample":
            estimates[est] = sigma_star
        elif est == "soft":
            estimates[est] = soft_threshold(sigma_star, tau)
        else:
            estimates[est] = hard_threshold(sigma_star, tau)

    records = []
    elapsed = time.perf_counter() - start
    for est in spec.estimators:
        diff = SymMatrix(estimates[est].array - model.array)
        losses = {}
        if "frobenius" in spec.losses:
            sq = frobenius_sq(diff)
            losses["frobenius"] = (math.sqrt(sq), sq)
        if "op_l1" in spec.losses:
            l1 = op_l1_norm(diff)
            losses["op_l1"] = (l1, l1 * l1)
        for loss_name in spec.losses:
            loss, loss_sq = losses[loss_name]
            records.append(
                ExperimentRecord(
                    grid_index=grid_index, n=n, p=p,
                    class_variant=spec.sparsity.variant, q=spec.sparsity.q,
                    radius=spec.sparsity.radius, generator=spec.generator.kind,
                    decay=spec.generator.decay, estimator=est, loss_name=loss_name,
                    trial=trial, seed=seed, multiplier=spec.multiplier, gamma=gamma,
                    delta=spec.delta, tau=tau, tau_within_cap=cfg.tau_within_cap,
                    tau_condition_ok=tau_condition, loss=loss, loss_sq=loss_sq,
                    oracle_bound=bound,
                    oracle_ok=(loss_sq <= bound) if loss_name == "frobenius" else None,
                    error="",
                    wall_time_s=elapsed,
                )
            )
    return records


def _run_point(args) -> list[ExperimentRecord]:
    spec, grid_index, gamma = args
    model = None
    if not spec.regenerate_model:
        try:
            model = _model_for_cell(spec, grid_index, 0)
        except (GenerationError, InvalidParameterError) as exc:
            n, p = spec.grid[grid_index]
            cfg = ThresholdConfig(spec.multiplier, gamma, n, p, spec.delta)
            out = []
            for trial in range(spec.trials):
                seed = derive_seed(spec.base_seed, _SEED_DATA, grid_index, trial)
                out.extend(_error_records(spec, grid_index, trial, seed, gamma, cfg.tau, str(exc)))
            return out
    out = []
    for trial in range(spec.trials):
        out.extend(run_cell(spec, grid_index, trial, gamma, model))
    return out


def run_sweep(spec: ExperimentSpec, threads: int = 1) -> list[ExperimentRecord]:
    """Execute the sweep; output order and content depend only on the spec."""
    gammas = [_gamma_for_point(spec, gi) for gi in range(len(spec.grid))]
    jobs = [(spec, gi, gammas[gi]) for gi in range(len(spec.grid))]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_point = list(pool.map(_run_point, jobs))
    else:
        per_point = [_run_point(job) for job in jobs]
    records = [rec for point in per_point for rec in point]
    return records


def summary(spec: ExperimentSpec, records: list[ExperimentRecord], elapsed_s: float) -> dict:
    """Aggregate view of the records; written as JSON next to the CSV."""
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for rec in records:
        groups.setdefault((rec.grid_index, rec.estimator, rec.loss_name), []).append(rec)
    cells = []
    for (gi, est, loss_name), recs in sorted(groups.items()):
        ok = [r for r in recs if not r.error]
        n_ok = len(ok)
        mean_loss = float(np.mean([r.loss for r in ok])) if ok else math.nan
        mean_sq = float(np.mean([r.loss_sq for r in ok])) if ok else math.nan
        oracle_rate = (
            float(np.mean([1.0 if r.oracle_ok else 0.0 for r in ok]))
            if ok and loss_name == "frobenius"
            else None
        )
        cells.append(
            {
                "grid_index": gi,
                "n": spec.grid[gi][0],
                "p": spec.grid[gi][1],
                "estimator": est,
                "loss": loss_name,
                "records": len(recs),
                "errors": len(recs) - n_ok,
                "mean_loss": mean_loss,
                "mean_loss_sq": mean_sq,
                "oracle_ok_rate": oracle_rate,
                "tau_condition_rate": float(np.mean([1.0 if r.tau_condition_ok else 0.0 for r in ok])) if ok else None,
                "tau": ok[0].tau if ok else None,
                "gamma": recs[0].gamma,
            }
        )
    return {
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "grid": [list(gp) for gp in spec.grid],
        "estimators": list(spec.estimators),
        "losses": list(spec.losses),
        "total_records": len(records),
        "elapsed_s": elapsed_s,
        "cells": cells,
    }


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------

X_AXES = ("n", "p", "radius", "logp_over_n")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    n_points: int


def _x_value(rec: ExperimentRecord, x_axis: str) -> float:
    if x_axis == "n":
        return float(rec.n)
    if x_axis == "p":
        return float(rec.p)
    if x_axis == "radius":
        return float(rec.radius)
    if x_axis == "logp_over_n":
        return math.log(rec.p) / rec.n
    raise InvalidParameterError(f"unknown x axis {x_axis!r}")


def ols_loglog(xs: np.ndarray, ys: np.ndarray) -> RateFit:
    """Least squares of log(y) on log(x) with classical standard errors."""
    if len(xs) < 3:
        raise InvalidParameterError("need at least 3 distinct x values")
    lx = np.log(xs)
    ly = np.log(ys)
    mx = float(np.mean(lx))
    my = float(np.mean(ly))
    sxx = float(np.sum((lx - mx) ** 2))
    if sxx == 0.0:
        raise InvalidParameterError("x values are degenerate")
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    dof = len(xs) - 2
    s2 = float(np.sum(resid**2) / dof) if dof > 0 else 0.0
    return RateFit(
        slope=slope,
        intercept=intercept,
        slope_stderr=math.sqrt(s2 / sxx),
        intercept_stderr=math.sqrt(s2 * (1.0 / len(xs) + mx * mx / sxx)),
        n_points=len(xs),
    )


def aggregate_series(
    records: list[ExperimentRecord],
    x_axis: str,
    estimator: str = "soft",
    loss_name: str = "frobenius",
    use_squared: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean loss per distinct x value, for one estimator and loss."""
    buckets: dict[float, list[float]] = {}
    for rec in records:
        if rec.estimator != estimator or rec.loss_name != loss_name or rec.error:
            continue
        x = _x_value(rec, x_axis)
        buckets.setdefault(x, []).append(rec.loss_sq if use_squared else rec.loss)
    if not buckets:
        raise InvalidParameterError("no records match the requested series")
    xs = np.array(sorted(buckets))
    ys = np.array([float(np.mean(buckets[x])) for x in xs])
    return xs, ys


def fit_rate(
    records: list[ExperimentRecord],
    x_axis: str,
    estimator: str = "soft",
    loss_name: str = "frobenius",
    use_squared: bool = True,
) -> RateFit:
    """Log-log OLS of the mean loss against the chosen axis quantity."""
    xs, ys = aggregate_series(records, x_axis, estimator, loss_name, use_squared)
    return ols_loglog(xs, ys)


def plot_series(
    records: list[ExperimentRecord],
    x_axis: str,
    use_squared: bool = False,
) -> tuple[dict[str, str], dict]:
    """Two-column series per (estimator, loss), plus a manifest.

    Returns ({filename: content}, manifest_dict); callers write the files.
    No plotting engine is involved, the series feed any external tool.
    """
    names = sorted({(r.estimator, r.loss_name) for r in records if not r.error})
    files: dict[str, str] = {}
    entries = []
    for est, loss_name in names:
        xs, ys = aggregate_series(records, x_axis, est, loss_name, use_squared)
        fname = f"{est}_{loss_name}{'_sq' if use_squared else ''}.dat"
        files[fname] = "".join(f"{_fmt(float(x))} {_fmt(float(y))}\n" for x, y in zip(xs, ys))
        entries.append({"file": fname, "estimator": est, "loss": loss_name,
                        "x_axis": x_axis, "squared": use_squared, "points": len(xs)})
    return files, {"series": entries}


# ---------------------------------------------------------------------------
# Spec file format
# ---------------------------------------------------------------------------

# Flat "key = value" lines, comments with '#', plus one repeated section:
#
#     trials = 200
#     base_seed = 42
#     variant = global
#     q = 0
#     radius = 10
#     generator = exact_sparse
#     estimators = sample, soft, hard
#     losses = frobenius, op_l1
#     multiplier = 2.0
#     gamma = calibrate
#     [grid]
#     n=100 p=50
#     n=200 p=50
#
# Unknown keys are errors.

_SPEC_DEFAULTS = {
    "trials": "100",
    "base_seed": "0",
    "variant": "global",
    "q": "0",
    "radius": "10",
    "generator": "exact_sparse",
    "decay": "2.0",
    "magnitude_low": "0.25",
    "magnitude_high": "0.6",
    "dominance_margin": "0.95",
    "support_pairs": "",
    "row_mass": "0.5",
    "estimators": "sample, soft, hard",
    "losses": "frobenius, op_l1",
    "multiplier": "2.0",
    "gamma": "calibrate",
    "delta": "1.0",
    "calibrate_trials": "200",
    "calibrate_quantile": "0.99",
    "regenerate_model": "false",
}


class SpecFileError(ValueError):
    """A sweep spec file is malformed."""


def _parse_bool(raw: str, key: str) -> bool:
    if raw.lower() in ("true", "yes", "1"):
        return True
    if raw.lower() in ("false", "no", "0"):
        return False
    raise SpecFileError(f"bad boolean for {key!r}: {raw!r}")


def parse_spec(text: str) -> ExperimentSpec:
    values = dict(_SPEC_DEFAULTS)
    grid: list[tuple[int, int]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section != "grid":
                raise SpecFileError(f"line {lineno}: unknown section [{section}]")
            continue
        if section == "grid":
            entry = dict(
                item.split("=", 1)
                for item in line.replace(" =", "=").replace("= ", "=").split()
                if "=" in item
            )
            if set(entry) != {"n", "p"}:
                raise SpecFileError(f"line {lineno}: grid lines must read 'n=<int> p=<int>'")
            try:
                grid.append((int(entry["n"]), int(entry["p"])))
            except ValueError as exc:
                raise SpecFileError(f"line {lineno}: bad grid integers") from exc
            continue
        if "=" not in line:
            raise SpecFileError(f"line {lineno}: expected 'key = value'")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if key not in values:
            raise SpecFileError(f"line {lineno}: unknown key {key!r}")
        values[key] = raw_value.strip()

    if not grid:
        raise SpecFileError("spec has no [grid] section with at least one point")
    try:
        sparsity = SparsityClass(
            variant=values["variant"], q=float(values["q"]), radius=float(values["radius"])
        )
        generator_cfg = ModelGenerator(
            kind=values["generator"],
            decay=float(values["decay"]),
            magnitude_low=float(values["magnitude_low"]),
            magnitude_high=float(values["magnitude_high"]),
            dominance_margin=float(values["dominance_margin"]),
            support_pairs=int(values["support_pairs"]) if values["support_pairs"] else None,
            row_mass=float(values["row_mass"]),
        )
        gamma_raw = values["gamma"]
        spec = ExperimentSpec(
            grid=tuple(grid),
            sparsity=sparsity,
            generator=generator_cfg,
            estimators=tuple(e.strip() for e in values["estimators"].split(",") if e.strip()),
            losses=tuple(l.strip() for l in values["losses"].split(",") if l.strip()),
            trials=int(values["trials"]),
            base_seed=int(values["base_seed"]),
            multiplier=float(values["multiplier"]),
            gamma=None if gamma_raw == "calibrate" else float(gamma_raw),
            delta=float(values["delta"]),
            calibrate_trials=int(values["calibrate_trials"]),
            calibrate_quantile=float(values["calibrate_quantile"]),
            regenerate_model=_parse_bool(values["regenerate_model"], "regenerate_model"),
        )
    except InvalidParameterError as exc:
        raise SpecFileError(str(exc)) from exc
    except ValueError as exc:
        raise SpecFileError(f"bad value in spec: {exc}") from exc
    return spec


def with_base_seed(spec: ExperimentSpec, seed: int) -> ExperimentSpec:
    return replace(spec, base_seed=seed)
