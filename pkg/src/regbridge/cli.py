"""Command-line driver.

Three subcommands:

* ``test``      run the adequacy test on a CSV file and emit a JSON report
* ``simulate``  draw a synthetic dataset and write it as CSV
* ``verify``    run a shipped Monte Carlo verification experiment

Exit codes: 0 for a completed run (the test's accept/reject decision never
drives the exit code), 1 for I/O or validation problems, 3 for a singular
design or a degenerate fit, 4 for a verification experiment that ran but
missed its tolerance.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from functools import partial
from importlib import resources

import numpy as np

from .adequacy import AdequacyResult, run_adequacy_test
from .bridge import omega_sq, write_bridge_csv
from .dataset import (AddQuadratic, AffineQuantile, ColumnSchema,
                      GaussianCopula, Heteroscedastic, IdentityQuantile,
                      IndependenceCopula, NoiseSpec, SyntheticModel, Dataset,
                      exchangeable_correlation, load_csv, sample_alternative,
                      sample_h0, write_csv)
from .covmodel import verify_gram_identity
from .errors import (DegenerateModelError, ParseError, RegBridgeError,
                     SchemaError, SingularDesignError, ValidationError)
from .fixtures import (get_gram_case, get_model, load_experiment_defaults,
                       quadratic_breach)
from .limitsim import write_null_samples_csv
from .mclab import (SizePowerResult, VerificationReport, size_power_study,
                    verify_bridge_covariance, verify_field_covariance,
                    verify_sum_covariance)

__all__ = ["main", "TestReport", "canonical_json"]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SINGULAR = 3
EXIT_TOLERANCE = 4

_EXPERIMENTS = ("field", "sums", "bridges", "size", "power", "gram-identity")


def canonical_json(obj) -> str:
    """Deterministic JSON rendering: sorted keys, fixed layout, newline end."""
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _load_report_schema() -> dict:
    text = resources.files("regbridge").joinpath(
        "data/test_report.schema.json").read_text()
    return json.loads(text)


# ======================================================================
# test subcommand
# ======================================================================

@dataclass(frozen=True, eq=False)
class TestReport:
    """JSON-able summary of one adequacy test run."""

    data: Dataset
    result: AdequacyResult
    grid_m: int
    replicates: int
    seed: int

    def to_json_dict(self) -> dict:
        data, res = self.data, self.result
        names = data.regressor_names
        bridges = []
        for b in res.bridges:
            bridges.append({
                "column": names[b.column],
                "omega_sq_share": omega_sq([b]),
                "max_abs": float(np.max(np.abs(b.values))),
            })
        intercept = (None if data.intercept_column is None
                     else names[data.intercept_column])
        return {
            "n": data.n,
            "p": data.p,
            "response": data.response_name,
            "order_columns": [names[j] for j in data.order_columns],
            "intercept": intercept,
            "theta_hat": [float(v) for v in res.fit.theta_hat],
            "sigma2_hat": float(res.fit.sigma2_hat),
            "omega_sq": float(res.statistic),
            "p_value": float(res.p_value),
            "level": float(res.level),
            "reject": bool(res.reject),
            "null_quantiles": res.null_quantiles(),
            "grid_m": self.grid_m,
            "replicates": self.replicates,
            "seed": self.seed,
            "clip_count": int(res.null.clip_count),
            "bridges": bridges,
        }

    def validated_json(self) -> str:
        import jsonschema

        payload = self.to_json_dict()
        jsonschema.validate(payload, _load_report_schema())
        return canonical_json(payload)


def _parse_columns(raw: str) -> tuple[str, ...]:
    cols = tuple(c.strip() for c in raw.split(",") if c.strip())
    if not cols:
        raise ValidationError("--order-columns needs at least one name")
    return cols


def cmd_test(args) -> int:
    intercept = None if args.intercept.lower() == "none" else args.intercept
    if intercept is None:
        print("warning: no intercept column declared; the bridges are not "
              "pinned at t=1 and the statistic tends to run conservative",
              file=sys.stderr)
    schema = ColumnSchema(order=_parse_columns(args.order_columns),
                          response=args.response, intercept=intercept)
    data = load_csv(args.input, schema)
    result = run_adequacy_test(data, grid_m=args.grid,
                               replicates=args.replicates,
                               seed=args.seed, level=args.level)
    report = TestReport(data=data, result=result, grid_m=args.grid,
                        replicates=args.replicates, seed=args.seed)
    text = report.validated_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    if args.emit_bridges:
        os.makedirs(args.emit_bridges, exist_ok=True)
        for b in result.bridges:
            name = data.regressor_names[b.column]
            write_bridge_csv(b, os.path.join(args.emit_bridges,
                                             f"bridge_{name}.csv"))
    if args.emit_null:
        write_null_samples_csv(result.null, args.emit_null)
    return EXIT_OK


# ======================================================================
# simulate subcommand
# ======================================================================

def _het_scale(block: np.ndarray, coef: float, column: int) -> np.ndarray:
    """Noise scale sqrt(1 + coef * x^2) along the chosen ordering column."""
    return np.sqrt(1.0 + coef * np.asarray(block)[:, column] ** 2)


def _build_model(args) -> SyntheticModel:
    d = args.order_dim
    if d < 1:
        raise ValidationError("--order-dim must be >= 1")
    if args.copula == "independence":
        copula = IndependenceCopula(d)
    elif args.copula == "gaussian":
        copula = GaussianCopula(exchangeable_correlation(d, args.rho))
    else:
        raise ValidationError(
            f"unknown --copula {args.copula!r} (use independence or gaussian)")
    if args.quantile == "identity":
        qs = tuple(IdentityQuantile() for _ in range(d))
    elif args.quantile == "affine":
        qs = tuple(AffineQuantile(shift=args.q_shift, scale=args.q_scale)
                   for _ in range(d))
    else:
        raise ValidationError(
            f"unknown --quantile {args.quantile!r} (use identity or affine)")
    if args.theta is None:
        theta = tuple([1.0] * d + [0.0])
    else:
        theta = tuple(float(v) for v in args.theta.split(","))
    if args.noise not in ("normal", "uniform"):
        raise ValidationError(
            f"unknown --noise {args.noise!r} (use normal or uniform)")
    return SyntheticModel(copula=copula, quantile_funcs=qs, theta=theta,
                          noise=NoiseSpec(args.noise, args.noise_var))


def cmd_simulate(args) -> int:
    model = _build_model(args)
    if args.model == "h0":
        data = sample_h0(model, args.n, args.seed)
    elif args.model == "add-quadratic":
        breach = AddQuadratic(coef=args.coef, column=args.breach_column)
        data = sample_alternative(model, breach, args.n, args.seed)
    elif args.model == "heteroscedastic":
        breach = Heteroscedastic(
            scale=partial(_het_scale, coef=args.coef, column=args.breach_column))
        data = sample_alternative(model, breach, args.n, args.seed)
    else:
        raise ValidationError(
            f"unknown --model {args.model!r} "
            "(use h0, add-quadratic, or heteroscedastic)")
    write_csv(data, args.out)
    return EXIT_OK


# ======================================================================
# verify subcommand
# ======================================================================

def _merged(cfg: dict, args, keys: dict) -> dict:
    """Fixture defaults with non-None CLI overrides applied."""
    out = dict(cfg)
    for cli_name, cfg_name in keys.items():
        value = getattr(args, cli_name)
        if value is not None:
            out[cfg_name] = value
    return out


def _size_band(level: float, nominal: float, halfwidth: float) -> float:
    """Rate tolerance around `level`, scaled like a binomial deviation.

    Shrinks to 0 at level 1 (every p-value is <= 1, so the rate must be
    exactly 1 there) and reproduces `halfwidth` at the nominal level.
    """
    return halfwidth * math.sqrt(level * (1.0 - level)
                                 / (nominal * (1.0 - nominal)))


def _run_cell_experiment(name: str, cfg: dict):
    model = get_model(cfg["model"])
    if name == "field":
        return verify_field_covariance(model, cfg["n"], cfg["replicates"],
                                       np.asarray(cfg["queries"], dtype=float),
                                       cfg["seed"], cfg["tolerance"])
    if name == "sums":
        return verify_sum_covariance(model, cfg["n"], cfg["replicates"],
                                     np.asarray(cfg["levels"], dtype=float),
                                     cfg["seed"], cfg["tolerance"])
    if name == "bridges":
        return verify_bridge_covariance(model, cfg["n"], cfg["replicates"],
                                        np.asarray(cfg["levels"], dtype=float),
                                        cfg["seed"], cfg["tolerance"])
    raise ValidationError(f"unknown experiment {name!r}")


def cmd_verify(args) -> int:
    if args.experiment not in _EXPERIMENTS:
        raise ValidationError(
            f"unknown experiment {args.experiment!r}; choose from "
            f"{', '.join(_EXPERIMENTS)}")
    defaults = load_experiment_defaults()
    name = args.experiment
    overrides = {"n": "n", "replicates": "replicates", "seed": "seed",
                 "inner_replicates": "inner_replicates", "alpha": "level",
                 "grid": "grid_m"}

    reports: list[dict] = []
    passed = True
    lines: list[str] = []

    if name in ("field", "sums", "bridges"):
        cases = defaults[name].get("cases") or [defaults[name]]
        for cfg in cases:
            cfg = _merged(cfg, args, overrides)
            rep = _run_cell_experiment(name, cfg)
            reports.append(rep.to_json_dict())
            passed &= rep.passed
            lines.append(
                f"{name}[{cfg['model']}]: max |emp - target| = "
                f"{rep.max_abs_error:.4f} (tolerance {rep.tolerance:g}) "
                f"{'PASS' if rep.passed else 'FAIL'}")
            if args.emit_table:
                path = args.emit_table
                if len(cases) > 1:
                    root, ext = os.path.splitext(path)
                    path = f"{root}_{cfg['model']}{ext or '.csv'}"
                rep.write_cells_csv(path)
    elif name == "size":
        cfg = _merged(defaults[name], args, overrides)
        if args.n is not None:
            cfg["n_values"] = [args.n]
        study = size_power_study(get_model(cfg["model"]), None,
                                 cfg["n_values"], cfg["level"],
                                 cfg["replicates"], cfg["seed"],
                                 inner_replicates=cfg["inner_replicates"],
                                 grid_m=cfg["grid_m"], n_jobs=args.n_jobs)
        band = _size_band(cfg["level"], cfg["nominal_level"],
                          cfg["band_halfwidth_at_nominal"])
        checks = []
        for n, rate in zip(study.n_values, study.rates):
            ok = abs(rate - cfg["level"]) <= band
            passed &= ok
            checks.append(f"n={n}: rate {rate:.4f} vs level {cfg['level']:g} "
                          f"(band +/-{band:.4f}) {'PASS' if ok else 'FAIL'}")
        out = study.to_json_dict()
        out["checks"] = checks
        out["passed"] = passed
        reports.append(out)
        lines.extend(checks)
    elif name == "power":
        cfg = _merged(defaults[name], args, overrides)
        if args.n is not None:
            cfg["n_values"] = [args.n]
        breach_cfg = cfg["breach"]
        if breach_cfg["kind"] != "add-quadratic":
            raise ValidationError(f"unknown breach kind {breach_cfg['kind']!r}")
        breach = quadratic_breach(breach_cfg["coef"], breach_cfg["column"])
        study = size_power_study(get_model(cfg["model"]), breach,
                                 cfg["n_values"], cfg["level"],
                                 cfg["replicates"], cfg["seed"],
                                 inner_replicates=cfg["inner_replicates"],
                                 grid_m=cfg["grid_m"], n_jobs=args.n_jobs)
        rates = study.rates
        mono = all(b >= a for a, b in zip(rates, rates[1:]))
        floor = cfg["min_rate_ratio"] * cfg["level"]
        exceeds = rates[-1] > floor
        passed = mono and exceeds
        checks = [
            "rates " + " -> ".join(f"{r:.4f}" for r in rates)
            + f" nondecreasing {'PASS' if mono else 'FAIL'}",
            f"rate at n={study.n_values[-1]} is {rates[-1]:.4f} > {floor:g} "
            f"{'PASS' if exceeds else 'FAIL'}",
        ]
        out = study.to_json_dict()
        out["checks"] = checks
        out["passed"] = passed
        reports.append(out)
        lines.extend(checks)
    else:  # gram-identity
        cfg = defaults[name]
        tol = cfg["tolerance"]
        cells = []
        worst = 0.0
        for case in cfg["cases"]:
            err = verify_gram_identity(get_gram_case(case), 0)
            worst = max(worst, err)
            cells.append({"case": case, "max_abs_error": err})
            lines.append(f"gram-identity[{case}]: max error {err:.2e} "
                         f"{'PASS' if err <= tol else 'FAIL'}")
        passed = worst <= tol
        reports.append({"experiment": name, "tolerance": tol,
                        "max_abs_error": worst, "passed": passed,
                        "cells": cells})

    for line in lines:
        print(line)
    if args.out:
        payload = reports[0] if len(reports) == 1 else {"experiment": name,
                                                        "cases": reports}
        with open(args.out, "w") as fh:
            fh.write(canonical_json(payload))
    print(f"experiment {name!r}: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_TOLERANCE


# ======================================================================
# parser and entry point
# ======================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regbridge",
        description="Linear-model adequacy testing via residual partial-sum "
                    "bridges ordered by each regressor.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser(
        "test", help="run the adequacy test on a CSV file")
    p_test.add_argument("--input", required=True, help="CSV file with a header row")
    p_test.add_argument("--response", required=True, help="response column name")
    p_test.add_argument("--order-columns", required=True,
                        help="comma-separated ordering regressor names")
    p_test.add_argument("--intercept", default="none",
                        help="all-ones column name, or 'none' (default)")
    p_test.add_argument("--grid", type=int, default=100,
                        help="grid size M for the null simulation (default 100)")
    p_test.add_argument("--replicates", type=int, default=10000,
                        help="null-simulation replicates (default 10000)")
    p_test.add_argument("--seed", type=int, default=0, help="simulation seed")
    p_test.add_argument("--level", type=float, default=0.05,
                        help="rejection level for the report (default 0.05)")
    p_test.add_argument("--out", default=None,
                        help="write the JSON report here instead of stdout")
    p_test.add_argument("--emit-bridges", default=None, metavar="DIR",
                        help="write per-column bridge node CSVs to DIR")
    p_test.add_argument("--emit-null", default=None, metavar="PATH",
                        help="write the sorted null samples as CSV")
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser("simulate", help="write a synthetic dataset as CSV")
    p_sim.add_argument("--model", default="h0",
                       help="h0, add-quadratic, or heteroscedastic")
    p_sim.add_argument("--n", type=int, required=True, help="sample size")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.add_argument("--order-dim", type=int, default=1,
                       help="number of ordering regressors (default 1)")
    p_sim.add_argument("--theta", default=None,
                       help="comma-separated coefficients, intercept last "
                            "(default: unit slopes, zero intercept)")
    p_sim.add_argument("--copula", default="independence",
                       help="independence or gaussian")
    p_sim.add_argument("--rho", type=float, default=0.3,
                       help="exchangeable correlation for --copula gaussian")
    p_sim.add_argument("--quantile", default="identity",
                       help="identity or affine margin transform")
    p_sim.add_argument("--q-shift", type=float, default=0.0)
    p_sim.add_argument("--q-scale", type=float, default=1.0)
    p_sim.add_argument("--noise", default="normal", help="normal or uniform")
    p_sim.add_argument("--noise-var", type=float, default=1.0)
    p_sim.add_argument("--coef", type=float, default=1.0,
                       help="breach strength for the alternative models")
    p_sim.add_argument("--breach-column", type=int, default=0,
                       help="0-based ordering column the breach acts on")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser(
        "verify", help="run a shipped Monte Carlo verification experiment")
    p_ver.add_argument("--experiment", required=True,
                       help=", ".join(_EXPERIMENTS))
    p_ver.add_argument("--n", type=int, default=None,
                       help="override the fixture sample size")
    p_ver.add_argument("--replicates", type=int, default=None,
                       help="override the fixture replicate count")
    p_ver.add_argument("--inner-replicates", type=int, default=None,
                       help="override the nested null-simulation replicates")
    p_ver.add_argument("--seed", type=int, default=None,
                       help="override the fixture seed")
    p_ver.add_argument("--grid", type=int, default=None,
                       help="override the null-simulation grid size")
    p_ver.add_argument("--alpha", type=float, default=None,
                       help="override the rejection level (size/power)")
    p_ver.add_argument("--n-jobs", type=int, default=1,
                       help="process count for size/power replicates")
    p_ver.add_argument("--out", default=None, help="write a JSON report here")
    p_ver.add_argument("--emit-table", default=None, metavar="PATH",
                       help="write the cell table as CSV")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SingularDesignError, DegenerateModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (SchemaError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RegBridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
