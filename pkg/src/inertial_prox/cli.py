"""Command-line front end.

Exit codes: 0 ok, 2 parameter rejected, 3 max iterations reached,
4 diverged, 5 certificate failure, 64 usage / malformed config, 74 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from . import bench
from .core import (
    InertialParams,
    RunConfig,
    Status,
    check_certificates,
    coefficients,
    delta_lower_bound,
    run,
    validate_params,
)
from .operators import LinearResolvent

EXIT_OK = 0
EXIT_PARAMS = 2
EXIT_MAX_ITER = 3
EXIT_DIVERGED = 4
EXIT_CERTIFICATE = 5
EXIT_USAGE = 64
EXIT_IO = 74

STATUS_EXIT = {Status.CONVERGED: EXIT_OK, Status.MAX_ITER: EXIT_MAX_ITER, Status.DIVERGED: EXIT_DIVERGED}

FAMILIES = {
    "basis_pursuit": (bench.Family.PMM, {"N", "M"}, {"sparsity"}),
    "tv_ls": (bench.Family.TV_ADMM, {"N", "p"}, {"M", "gamma", "pieces", "noise_scale"}),
    "feasibility": (bench.Family.DR, {"angle"}, set()),
    "linear_monotone": (bench.Family.GENERIC_PPA, {"dim"}, {"skew"}),
}
TOP_REQUIRED = {"family", "dims", "methods"}
TOP_OPTIONAL = {"seed", "tol", "max_iter", "output_path", "x0"}
METHOD_REQUIRED = {"name", "theta", "delta", "lambda"}
METHOD_OPTIONAL = {"rho"}


class UsageError(Exception):
    pass


class ParamError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class ExperimentConfig:
    family: str
    dims: dict
    methods: list[dict]
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 1000
    output_path: str = "."
    x0: Any = "random"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        _check_keys(doc, TOP_REQUIRED, TOP_OPTIONAL, "config")
        family = doc["family"]
        if family not in FAMILIES:
            raise UsageError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}")
        _, dims_req, dims_opt = FAMILIES[family]
        dims = doc["dims"]
        if not isinstance(dims, dict):
            raise UsageError("dims must be an object")
        _check_keys(dims, dims_req, dims_opt, "dims")
        for k, v in dims.items():
            _check_number(v, f"dims.{k}")
        methods = doc["methods"]
        if not isinstance(methods, list):
            raise UsageError("methods must be a list")
        for i, m in enumerate(methods):
            if not isinstance(m, dict):
                raise UsageError(f"methods[{i}] must be an object")
            _check_keys(m, METHOD_REQUIRED, METHOD_OPTIONAL, f"methods[{i}]")
            if not isinstance(m["name"], str):
                raise UsageError(f"methods[{i}].name must be a string")
            for k in ("theta", "delta", "lambda", "rho"):
                if k in m:
                    _check_number(m[k], f"methods[{i}].{k}")
        cfg = cls(family=family, dims=dims, methods=methods)
        for key in TOP_OPTIONAL:
            if key in doc:
                setattr(cfg, key, doc[key])
        _check_number(cfg.tol, "tol")
        for key in ("seed", "max_iter"):
            val = getattr(cfg, key)
            if isinstance(val, bool) or not isinstance(val, int):
                raise UsageError(f"{key} must be an integer")
        if not isinstance(cfg.output_path, str):
            raise UsageError("output_path must be a string")
        if cfg.x0 not in ("random", "zeros"):
            if not isinstance(cfg.x0, list):
                raise UsageError("x0 must be 'random', 'zeros' or a list of numbers")
            for v in cfg.x0:
                _check_number(v, "x0")
        return cfg

    def run_config(self, **kw) -> RunConfig:
        try:
            return RunConfig(max_iter=self.max_iter, tol=self.tol, **kw)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def method_specs(self, check_region: bool = True) -> list[bench.MethodSpec]:
        fam = FAMILIES[self.family][0]
        specs = []
        for m in self.methods:
            try:
                params = InertialParams(
                    float(m["theta"]), float(m["delta"]), float(m["lambda"]),
                    float(m.get("rho", 1.0)), check_region=check_region,
                )
            except ValueError as exc:
                raise ParamError(f"method {m['name']!r}: {exc}") from exc
            specs.append(bench.MethodSpec(m["name"], params, fam))
        return specs

    def instance(self):
        d = self.dims
        try:
            if self.family == "basis_pursuit":
                sp = d.get("sparsity")
                return bench.gen_basis_pursuit(int(d["N"]), int(d["M"]), None if sp is None else int(sp), self.seed)
            if self.family == "tv_ls":
                kw = {k: d[k] for k in ("noise_scale", "gamma") if k in d}
                return bench.gen_tv_ls(
                    int(d["N"]), int(d["M"]) if "M" in d else None, int(d["p"]),
                    pieces=int(d.get("pieces", 5)), seed=self.seed, **kw,
                )
            if self.family == "feasibility":
                return bench.gen_two_subspace(float(d["angle"]))
            return bench.gen_linear_monotone(int(d["dim"]), self.seed, float(d.get("skew", 0.0)), self.x0)
        except ValueError as exc:
            raise UsageError(f"cannot build instance: {exc}") from exc


def _check_keys(obj: dict, required: set, optional: set, where: str):
    missing = required - obj.keys()
    if missing:
        raise UsageError(f"{where}: missing keys {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise UsageError(f"{where}: unknown keys {sorted(unknown)}")


def _check_number(v, where: str):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise UsageError(f"{where} must be a finite number")


def _fmt(x: float) -> str:
    return repr(float(x))


def _load(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_json(text)


def _outdir(cfg: ExperimentConfig, override: Optional[str]) -> Path:
    out = Path(override or cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params_dict(p: InertialParams) -> dict:
    return {"theta": p.theta, "delta": p.delta, "lambda": p.lam, "rho": p.rho}


# --- commands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    theta, delta = args.theta, args.delta
    try:
        check = validate_params(theta, delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    c1, c2 = coefficients(theta, delta, strict=False)
    print(f"theta = {_fmt(theta)}")
    print(f"delta = {_fmt(delta)}")
    if 0 <= theta < 1 / 3:
        print(f"admissible delta interval: ({_fmt(delta_lower_bound(theta))}, 0]")
    else:
        print("admissible delta interval: empty (theta must lie in [0, 1/3))")
    print(f"c1 = {_fmt(c1)}")
    print(f"c2 = {_fmt(c2)}")
    if check:
        print("valid")
        return EXIT_OK
    print(f"rejected: {check.reason}")
    return EXIT_PARAMS


def cmd_run(args) -> int:
    cfg = _load(args.config)
    specs = cfg.method_specs(check_region=not args.no_validate)
    if not specs:
        raise UsageError("run needs at least one method")
    if args.method is not None:
        specs = [s for s in specs if s.name == args.method]
        if not specs:
            raise UsageError(f"no method named {args.method!r}")
    spec = specs[0]
    instance = cfg.instance()
    with_ref = cfg.family == "linear_monotone" and spec.params.rho == 1.0
    if cfg.family == "linear_monotone":
        rc = cfg.run_config(record_iterates=False, x_star=instance.x_star if with_ref else None)
        record = run(LinearResolvent(instance.problem(spec.params.lam)), instance.x0, spec.params, rc)
    else:
        record = bench.run_method(instance, spec, cfg.run_config())

    out = _outdir(cfg, args.out)
    summary = {
        "method": spec.name,
        "family": cfg.family,
        "instance": bench.describe(instance),
        "params": _params_dict(spec.params),
        "seed": cfg.seed,
        "generator": bench.GENERATOR_VERSION,
        "status": record.status.value,
        "iterations": record.iterations_used,
        "final_residual": record.final_residual if record.residuals else None,
        "wall_time_s": record.wall_time,
    }
    (out / "record.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    with open(out / "residuals.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if with_ref:
            w.writerow(["iter", "residual", "gamma", "gamma_bar"])
            trace = record.lyapunov
            for i, r in enumerate(record.residuals):
                w.writerow([i, _fmt(r), _fmt(trace.gamma[i + 1]), _fmt(trace.gamma_bar[i + 1])])
        else:
            w.writerow(["iter", "residual"])
            for i, r in enumerate(record.residuals):
                w.writerow([i, _fmt(r)])
    print(f"{spec.name}: {record.status.value} after {record.iterations_used} iterations")
    return STATUS_EXIT[record.status]


BENCH_HEADER = ["method", "iterations", "final_residual", "wall_time_s", "status"]


def cmd_bench(args) -> int:
    cfg = _load(args.config)
    specs = cfg.method_specs(check_region=not args.no_validate)
    instance = cfg.instance()
    report = bench.run_comparison(instance, specs, cfg.run_config(), seed=cfg.seed)
    out = _outdir(cfg, args.out)
    with open(out / "bench.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        for row in report.rows:
            w.writerow([row.method, row.iterations, _fmt(row.final_residual), _fmt(row.wall_time), row.status])
    print(f"# {report.instance} seed={report.seed}")
    for row in report.rows:
        print(f"{row.method:>16s}  {row.iterations:6d}  {row.final_residual:.3e}  {row.status}")
    return EXIT_OK


def cmd_certify(args) -> int:
    cfg = _load(args.config)
    if cfg.family != "linear_monotone":
        raise UsageError("certify needs the linear_monotone family (known solution x* = 0)")
    specs = cfg.method_specs(check_region=not args.no_validate)
    for s in specs:
        if s.params.rho != 1.0:
            raise ParamError(f"method {s.name!r}: certificates only hold for rho = 1")
    instance = cfg.instance()
    failed = False
    for s in specs:
        rc = cfg.run_config(x_star=instance.x_star)
        rec = run(LinearResolvent(instance.problem(s.params.lam)), instance.x0, s.params, rc)
        rep = check_certificates(rec, s.params, instance.x0, instance.x_star)
        print(f"{s.name}: {rec.iterations_used} iterations ({rec.status.value})")
        print(f"  lyapunov monotonicity worst margin: {rep.monotone_margin:.6e}"
              + ("" if rep.monotone_violation is None else f"  VIOLATED at n={rep.monotone_violation}"))
        print(f"  rate bound worst margin: {rep.rate_margin:.6e}"
              + ("" if rep.rate_violation is None else f"  VIOLATED at n={rep.rate_violation}"))
        failed = failed or not rep.ok
    return EXIT_CERTIFICATE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="inertial-prox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check (theta, delta) against the admissible region")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.set_defaults(func=cmd_validate)

    for name, func, text in (
        ("run", cmd_run, "run one method and write record.json + residuals.csv"),
        ("bench", cmd_bench, "compare all configured methods and write bench.csv"),
        ("certify", cmd_certify, "check the Lyapunov and rate certificates"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--no-validate", action="store_true",
                       help="accept inertial parameters outside the admissible region")
        if name != "certify":
            p.add_argument("--out", help="output directory (overrides output_path)")
        if name == "run":
            p.add_argument("--method", help="name of the method to run (default: first)")
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParamError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
