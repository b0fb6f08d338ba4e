"""Command-line interface: fit, solve, verify, sweep and mms subcommands.

Scenarios are JSON files; see the README for the schema.  Exit codes:
0 success, 1 a gated verification check failed, 2 invalid input or
configuration, 3 boundary data in the unproven regime, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .errors import (
    ConfigError,
    InconsistentModelError,
    InvalidDomainError,
    InvalidInputError,
    OutOfRangeError,
    RootBracketError,
    SingularEvaluationError,
    SolverFailureError,
    UnsupportedRegimeError,
)
from .geometry import DomainSpec, FourierCurve, build_grid
from .models import (
    BoundaryData,
    ModelParams,
    ProblemCase,
    boundary_data_of,
    classify_case,
    compatibility,
    fit_model,
)
from .solver import SolveOptions, manufactured_field, mms_convergence, solve_dirichlet, write_field
from .verify import CSV_COLUMNS, evaluate_checks, full_report

_TOP_KEYS = {
    "boundary_data", "model_params", "domain", "perturbation",
    "resolution", "solver", "sweep", "mms", "output",
}
_DEFAULT_NS = 65
_DEFAULT_NTHETA = 64


def _fmt(v) -> str:
    return f"{v:.12g}"


def _need(mapping, keys, where):
    if not isinstance(mapping, dict) or set(mapping) != set(keys):
        raise ConfigError(f"{where} must have exactly the keys {sorted(keys)}")


@dataclass
class Scenario:
    cfg: dict
    data: BoundaryData
    params: Optional[ModelParams]
    ns: int
    ntheta: int
    eps: float
    options: SolveOptions
    output: dict

    def domain(self, eps: Optional[float] = None) -> DomainSpec:
        return _make_domain(self.cfg, self.params, self.eps if eps is None else eps)


def _make_domain(cfg, params, eps) -> DomainSpec:
    if "domain" in cfg:
        spec = DomainSpec.from_dict(cfg["domain"])
    elif params is not None:
        spec = DomainSpec.circles(params.r_i, params.r_o)
    else:
        raise ConfigError("config needs a 'domain' (or model parameters to default to circles)")
    pert = cfg.get("perturbation")
    if pert is None and eps == 0.0:
        return spec
    if pert is None:
        pert = {"target": "inner", "harmonic": 3, "kind": "cos", "amplitude": 0.0}
    _need(pert, {"target", "harmonic", "kind", "amplitude"}, "'perturbation'")
    target, kind = pert["target"], pert["kind"]
    harmonic = int(pert["harmonic"])
    if target not in ("inner", "outer") or kind not in ("cos", "sin") or harmonic < 1:
        raise ConfigError("perturbation needs target inner/outer, kind cos/sin, harmonic >= 1")
    curve = spec.inner if target == "inner" else spec.outer
    coeffs = list(curve.cos_coeffs if kind == "cos" else curve.sin_coeffs)
    while len(coeffs) < harmonic:
        coeffs.append(0.0)
    coeffs[harmonic - 1] += float(eps)
    kw = {"cos_coeffs": tuple(coeffs)} if kind == "cos" else {"sin_coeffs": tuple(coeffs)}
    base = {"cos_coeffs": curve.cos_coeffs, "sin_coeffs": curve.sin_coeffs}
    base.update(kw)
    new_curve = FourierCurve(c0=curve.c0, **base)
    if target == "inner":
        return DomainSpec(inner=new_curve, outer=spec.outer)
    return DomainSpec(inner=spec.inner, outer=new_curve)


def _load_scenario(args) -> Scenario:
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    has_data = "boundary_data" in cfg
    has_params = "model_params" in cfg
    if has_data == has_params:
        raise ConfigError("config needs exactly one of 'boundary_data' or 'model_params'")
    if has_params:
        _need(cfg["model_params"], {"L", "M", "r_i", "r_o"}, "'model_params'")
        params = ModelParams(**{k: float(v) for k, v in cfg["model_params"].items()})
        data = boundary_data_of(params)
    else:
        _need(cfg["boundary_data"], {"a", "b", "alpha", "beta"}, "'boundary_data'")
        data = BoundaryData(**{k: float(v) for k, v in cfg["boundary_data"].items()})
        params = None

    res = cfg.get("resolution", {})
    if not isinstance(res, dict) or set(res) - {"ns", "ntheta"}:
        raise ConfigError("'resolution' allows only 'ns' and 'ntheta'")
    ns = int(res.get("ns", _DEFAULT_NS))
    ntheta = int(res.get("ntheta", _DEFAULT_NTHETA))
    if args.ns is not None:
        ns = args.ns
    if args.ntheta is not None:
        ntheta = args.ntheta

    sol = cfg.get("solver", {})
    if not isinstance(sol, dict) or set(sol) - {"tol", "method", "max_iter"}:
        raise ConfigError("'solver' allows only 'tol', 'method' and 'max_iter'")
    options = SolveOptions(**sol)

    eps = 0.0
    if "perturbation" in cfg:
        _need(cfg["perturbation"], {"target", "harmonic", "kind", "amplitude"},
              "'perturbation'")
        eps = float(cfg["perturbation"]["amplitude"])
    if getattr(args, "eps", None) is not None:
        eps = args.eps

    output = cfg.get("output", {})
    if not isinstance(output, dict) or set(output) - {"report", "csv", "field"}:
        raise ConfigError("'output' allows only 'report', 'csv' and 'field'")
    return Scenario(cfg=cfg, data=data, params=params, ns=ns, ntheta=ntheta,
                    eps=eps, options=options, output=output)


def _threads() -> int:
    raw = os.environ.get("SERRIN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SERRIN_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def cmd_fit(args) -> int:
    s = _load_scenario(args)
    case = classify_case(s.data)
    params = fit_model(s.data)
    print(f"case: {case}")
    for name in ("L", "M", "r_i", "r_o"):
        print(f"{name} = {_fmt(getattr(params, name))}")
    print(f"|F(M)| = {abs(compatibility(s.data, params.M)):.3e}")
    return 0


def cmd_solve(args) -> int:
    s = _load_scenario(args)
    spec = s.domain()
    grid = build_grid(spec, s.ns, s.ntheta)
    field, stats = solve_dirichlet(grid, -2.0, s.data.a, s.data.b, s.options)
    path = s.output.get("field", "field.dat")
    write_field(field, path)
    print(f"unknowns: {stats.unknowns}")
    print(f"method: {stats.method}")
    print(f"residual: {stats.residual:.3e}")
    print(f"seconds: {stats.seconds:.3f}")
    print(f"field: {path}")
    return 0


def cmd_verify(args) -> int:
    s = _load_scenario(args)
    report = full_report(s.domain(), s.data, s.ns, s.ntheta, s.options)
    checks, ok = evaluate_checks(report, expect_asymmetric=args.expect_asymmetric)
    print(f"case: {report.case}")
    print(f"note: {report.regime_note}")
    for c in checks:
        print(c.describe())
    if "report" in s.output:
        with open(s.output["report"], "w", newline="\n") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"report: {s.output['report']}")
    if "csv" in s.output:
        _write_csv(s.output["csv"], [report.csv_row(eps=s.eps)])
        print(f"csv: {s.output['csv']}")
    failed = sum(1 for c in checks if c.gated and not (c.passed or c.waived))
    print(f"verification: {'PASS' if ok else f'FAIL ({failed} checks)'}")
    case = classify_case(s.data)
    if case is ProblemCase.DECREASING_UNCOVERED:
        return 3
    if case is ProblemCase.INADMISSIBLE:
        return 2
    return 0 if ok else 1


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)


def cmd_sweep(args) -> int:
    s = _load_scenario(args)
    sw = s.cfg.get("sweep")
    if sw is None:
        raise ConfigError("sweep command needs a 'sweep' config block")
    _need(sw, {"parameter", "values"}, "'sweep'")
    parameter = sw["parameter"]
    values = sw["values"]
    if parameter not in ("eps", "ns", "ntheta"):
        raise ConfigError("sweep parameter must be one of eps, ns, ntheta")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep values must be a nonempty list")
    values = [float(v) for v in values]

    def run_one(v):
        eps, ns, ntheta = s.eps, s.ns, s.ntheta
        if parameter == "eps":
            eps = v
        elif parameter == "ns":
            ns = int(v)
        else:
            ntheta = int(v)
        try:
            report = full_report(s.domain(eps=eps), s.data, ns, ntheta, s.options)
            return report.csv_row(eps=eps)
        except Exception as e:  # recorded in-row; the sweep continues
            case = str(classify_case(s.data))
            row = [case, str(ns), str(ntheta), _fmt(eps)] + [""] * 10
            row.append(f"{type(e).__name__}: {e}")
            return row

    workers = min(_threads(), len(values))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_one, values))
    else:
        rows = [run_one(v) for v in values]
    path = s.output.get("csv", "sweep.csv")
    _write_csv(path, rows)
    for v, row in zip(values, rows):
        tail = f"error={row[-1]}" if row[-1] else f"sd_inner={row[4]} sd_outer={row[5]}"
        print(f"{parameter}={_fmt(v)}: case={row[0]} {tail}")
    print(f"csv: {path}")
    return 0


def cmd_mms(args) -> int:
    s = _load_scenario(args)
    mc = s.cfg.get("mms")
    if mc is None:
        raise ConfigError("mms command needs an 'mms' config block")
    if not isinstance(mc, dict) or set(mc) - {"sizes", "exact"}:
        raise ConfigError("'mms' allows only 'sizes' and 'exact'")
    sizes = mc.get("sizes", [33, 65, 129])
    kind = mc.get("exact", "model")
    params = None
    if kind in ("model", "saddle"):
        params = s.params if s.params is not None else fit_model(s.data)
    exact = manufactured_field(kind, params)
    result = mms_convergence(s.domain(), exact, sizes, s.options)
    print(f"exact field: {exact.name}")
    for n, h, li, l2 in zip(result.sizes, result.hs, result.linf, result.l2):
        print(f"n={n:<5d} h={h:.6e} linf={li:.6e} l2={l2:.6e}")
    print(result.describe())
    if "csv" in s.output:
        with open(s.output["csv"], "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "h", "linf", "l2"])
            for n, h, li, l2 in zip(result.sizes, result.hs, result.linf, result.l2):
                writer.writerow([n, _fmt(h), _fmt(li), _fmt(l2)])
        print(f"csv: {s.output['csv']}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serrin",
        description="Fit, solve and verify the overdetermined torsion problem "
                    "on doubly connected planar domains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("fit", cmd_fit, "fit the radial model to boundary data"),
        ("solve", cmd_solve, "solve the Dirichlet problem and write the field"),
        ("verify", cmd_verify, "run the identity checks and report"),
        ("sweep", cmd_sweep, "run verification over a parameter sweep"),
        ("mms", cmd_mms, "manufactured-solution convergence study"),
    ]
    for name, func, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to a JSON scenario config")
        p.add_argument("--ns", type=int, default=None, help="override grid rows")
        p.add_argument("--ntheta", type=int, default=None, help="override grid columns")
        p.add_argument("--eps", type=float, default=None,
                       help="override the perturbation amplitude")
        if name == "verify":
            p.add_argument("--expect-asymmetric", action="store_true",
                           help="treat Neumann constancy failures as expected")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, InvalidDomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except UnsupportedRegimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3 if e.case is ProblemCase.DECREASING_UNCOVERED else 2
    except (RootBracketError, SolverFailureError, SingularEvaluationError,
            OutOfRangeError, InconsistentModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
