"""Command-line front end: one subcommand per check, JSON reports on stdout.

Exit status is 0 when every check passes, 1 when a check fails and 2 on
malformed input.  A human-readable summary goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from . import gaussian, measures, moments
from .fraction_algebra import bound_certificate, frac_eval, parse_frac
from .gaussian import CovarianceSpec, SpecError, WickDegreeError
from .measures import Box, CylinderSet, MeasureError
from .moments import FunctionalError, GaussianFunctional, QuadratureError, TableFunctional
from .poly import Monomial, PolySyntaxError, parse_poly
from .rational import as_fraction, to_jsonable

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class CheckFailed(Exception):
    """A computation that ran but refuted the property being checked."""


@dataclass
class Backend:
    spec: CovarianceSpec | None = None
    table: TableFunctional | None = None

    def functional(self) -> moments.MomentFunctional:
        if self.spec is not None and self.table is not None:
            raise InputError("ambiguous_backend", "give exactly one of a covariance spec and a moment table")
        if self.spec is not None:
            return GaussianFunctional(self.spec)
        if self.table is not None:
            return self.table
        raise InputError("missing_backend", "this check needs --spec or --table")

    def measure(self) -> measures.CylinderMeasure:
        return self.functional().cylinder_measure()

    def require_spec(self) -> CovarianceSpec:
        if self.spec is None:
            raise InputError("missing_backend", "this check needs a covariance spec (--spec)")
        return self.spec


# parameter helpers -----------------------------------------------------------


def _need(params: dict, key: str) -> Any:
    if params.get(key) is None:
        raise InputError("missing_parameter", f"parameter {key!r} is required")
    return params[key]


def _seed(params: dict) -> int:
    if params.get("seed") is None:
        raise InputError("missing_seed", "Monte-Carlo checks require an explicit seed")
    return int(params["seed"])


def _indices(value) -> tuple[int, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        return measures.index_set(int(v) for v in value)
    except (ValueError, MeasureError) as exc:
        raise InputError("bad_indices", str(exc)) from None


def _poly(params: dict, key: str = "poly"):
    return parse_poly(str(_need(params, key)))


def _character(text: str | dict | None) -> dict[int, Fraction]:
    if not text:
        return {}
    if isinstance(text, dict):
        return {int(k): as_fraction(v) for k, v in text.items()}
    out = {}
    for item in text.split(","):
        k, _, v = item.partition("=")
        out[int(k.strip().lstrip("x"))] = as_fraction(v.strip())
    return out


def _report(check: str, params: dict, result: dict, passed: bool, residuals=(), seed=None) -> dict:
    shown = {k: v for k, v in sorted(params.items()) if v is not None and k not in ("func",)}
    return {
        "check": check,
        "params": to_jsonable(shown),
        "result": to_jsonable(result),
        "pass": bool(passed),
        "residuals": [r.to_dict() if hasattr(r, "to_dict") else to_jsonable(r) for r in residuals],
        "provenance": {"seed": seed},
    }


# checks ---------------------------------------------------------------------------


def do_eval(params: dict, backend: Backend) -> dict:
    f = _poly(params)
    value = backend.functional().evaluate(f)
    return _report("eval", params, {"poly": str(f), "value": value}, True)


def do_wick(params: dict, backend: Backend) -> dict:
    spec = backend.require_spec()
    f = _poly(params)
    if len(f) != 1:
        raise InputError("not_a_monomial", f"{f} is not a single monomial")
    (mono, coef), = f.terms.items()
    idx = tuple(sorted(mono.support)) or (1,)
    cov = spec.covariance(idx)
    exps = mono.dense(idx)
    cap = int(params.get("cap") or gaussian.DEFAULT_WICK_CAP)
    rec = coef * gaussian.wick_recursive(cov, exps, cap)
    enum = coef * gaussian.wick_enumerate(cov, exps, cap)
    r = abs(rec - enum)
    res = measures.Residual("recursive-vs-enumerate", r, 0, r == 0)
    return _report("wick", params, {"monomial": str(f), "recursive": rec, "enumerate": enum}, r == 0, [res])


def do_carleman(params: dict, backend: Backend) -> dict:
    var = int(_need(params, "var"))
    horizon = int(_need(params, "horizon"))
    try:
        rep = moments.carleman_report(backend.functional(), var, horizon)
    except FunctionalError as exc:
        raise CheckFailed(str(exc)) from None
    passed = all(r >= 1 for r in rep.lower_bound_ratios)
    return _report("carleman", params, rep.to_dict(), passed)


def do_classify(params: dict, backend: Backend) -> dict:
    verdict = gaussian.classify_sigma_additivity(backend.require_spec())
    return _report("classify", params, verdict.to_dict(), True)


def do_consistency(params: dict, backend: Backend) -> dict:
    big = _indices(_need(params, "indices"))
    small = _indices(params.get("sub") or big[:1])
    degree = int(_need(params, "degree"))
    try:
        rep = measures.check_consistency(backend.measure(), small, big, degree)
    except MeasureError as exc:
        raise InputError("bad_indices", str(exc)) from None
    bad = [r.name for r in rep.failures()]
    result = dict(rep.result, compared=len(rep.residuals), mismatched=bad)
    return _report("consistency", params, result, rep.passed, rep.residuals)


def _load_boxes(params: dict) -> tuple[tuple[int, ...], Box, list[Box]]:
    raw = _need(params, "boxes")
    if isinstance(raw, (str, Path)):
        raw = _read_json(raw)
    try:
        whole = CylinderSet.from_json(raw["whole"])
        cells = [CylinderSet.from_json(c) for c in raw["partition"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("bad_boxes", f"malformed box file: {exc}") from None
    if any(c.indices != whole.indices for c in cells):
        raise InputError("bad_boxes", "all partition cells must share the whole box's generating indices")
    return whole.indices, whole.box, [c.box for c in cells]


def do_axioms(params: dict, backend: Backend) -> dict:
    idx, whole, cells = _load_boxes(params)
    mu = backend.measure()
    marg = mu.marginal(idx)
    needs_mc = not (isinstance(marg, gaussian.GaussianMarginal) and marg.is_diagonal)
    seed = _seed(params) if needs_mc else params.get("seed")
    samples = int(params.get("samples") or 100_000)
    try:
        rep = measures.check_axioms(mu, idx, cells, whole, seed, samples=samples)
    except measures.PartitionError as exc:
        raise InputError("bad_partition", str(exc)) from None
    norm = measures.check_normalization(mu, idx)
    residuals = norm.residuals + rep.residuals
    return _report("axioms", params, rep.result, all(r.passed for r in residuals), residuals, seed)


def do_hankel(params: dict, backend: Backend) -> dict:
    idx = _indices(_need(params, "indices"))
    degree = int(_need(params, "degree"))
    mm = moments.moment_matrix(backend.functional(), idx, degree)
    res = moments.psd_check(mm)
    return _report("hankel", params, {"matrix": mm.to_dict(), "psd": res.to_dict()}, res.psd)


def do_quad(params: dict, backend: Backend) -> dict:
    if params.get("moments") is not None:
        raw = params["moments"]
        seq = raw.split(",") if isinstance(raw, str) else list(raw)
        m = [as_fraction(x.strip() if isinstance(x, str) else x) for x in seq]
        atoms = int(params.get("atoms") or len(m) // 2)
        var = int(params.get("var") or 1)
        functional = TableFunctional((var,), len(m) - 1,
                                     {Monomial.var(var, k): v for k, v in enumerate(m)})
    else:
        functional = backend.functional()
        var = int(_need(params, "var"))
        atoms = int(_need(params, "atoms"))
        m = [functional.moment(Monomial.var(var, k)) for k in range(2 * atoms)]
    try:
        nu = moments.quadrature_1d(m, atoms)
    except QuadratureError as exc:
        raise CheckFailed(str(exc)) from None
    degree = int(params.get("degree") if params.get("degree") is not None else 2 * atoms - 1)
    rep = moments.verify_representation(nu, functional, (var,), degree)
    return _report("quad", params, {"atoms": nu.to_dict(), "exactness_degree": 2 * atoms - 1},
                   rep.passed, rep.residuals)


def do_fourier(params: dict, backend: Backend) -> dict:
    spec = backend.require_spec()
    y = _poly(params)
    try:
        coeffs = y.linear_coefficients()
    except ValueError as exc:
        raise InputError("not_linear", str(exc)) from None
    value = gaussian.fourier(spec, coeffs)
    result: dict[str, Any] = {"y": str(y), "value": value}
    residuals, passed, seed = [], True, params.get("seed")
    if params.get("samples"):
        seed = _seed(params)
        idx = tuple(sorted(coeffs)) or (1,)
        pts = gaussian.sample(spec, idx, int(params["samples"]), seed)
        emp, se = gaussian.empirical_characteristic(pts, idx, coeffs)
        r = abs(emp - value)
        residuals.append(measures.Residual("empirical", r, 4 * se, r <= 4 * se, {"empirical": emp}))
        passed = r <= 4 * se
    return _report("fourier", params, result, passed, residuals, seed)


def do_chebyshev(params: dict, backend: Backend) -> dict:
    t = _poly(params)
    a = as_fraction(_need(params, "a"))
    functional = backend.functional()
    bound = measures.chebyshev_bound(functional, t, a)
    result: dict[str, Any] = {"t": str(t), "a": a, "bound": bound}
    residuals, seed = [], params.get("seed")
    mu = functional.cylinder_measure()
    if params.get("eps") is not None:
        result["delta"] = measures.continuity_witness(mu, params["eps"], a)
    exact_tail = isinstance(functional, GaussianFunctional)
    if exact_tail or params.get("samples"):
        if not exact_tail:
            seed = _seed(params)
        tail = measures.tail_probability(mu, t, a, samples=int(params.get("samples") or 100_000), seed=seed)
        slack = 4 * tail.stderr
        excess = max(0.0, tail.value - float(bound))
        result["tail_probability"] = tail.describe()
        residuals.append(measures.Residual("tail<=bound", excess, slack, excess <= slack))
    return _report("chebyshev", params, result, all(r.passed for r in residuals), residuals, seed)


def do_frac(params: dict, backend: Backend) -> dict:
    try:
        u = parse_frac(str(_need(params, "frac")))
    except ValueError as exc:
        raise InputError("syntax_error", str(exc)) from None
    bound = bound_certificate(u)
    result: dict[str, Any] = {"canonical": str(u), "bound": "Unbounded" if bound == math.inf else bound}
    if params.get("at"):
        result["value"] = frac_eval(u, _character(params["at"]))
    return _report("frac", params, result, True)


CHECKS: dict[str, Callable[[dict, Backend], dict]] = {
    "eval": do_eval,
    "wick": do_wick,
    "carleman": do_carleman,
    "classify": do_classify,
    "consistency": do_consistency,
    "axioms": do_axioms,
    "hankel": do_hankel,
    "quad": do_quad,
    "fourier": do_fourier,
    "chebyshev": do_chebyshev,
    "frac": do_frac,
}


# input handling -------------------------------------------------------------------


def _read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError("file_not_found", f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError("malformed_json", f"{path}: {exc}") from None


def _load_backend(spec_obj, table_obj) -> Backend:
    b = Backend()
    if spec_obj is not None:
        b.spec = CovarianceSpec.from_json(spec_obj)
    if table_obj is not None:
        b.table = TableFunctional.from_json(table_obj)
    return b


def _error_report(check: str, code: str, message: str) -> dict:
    return {"check": check, "pass": False, "error": {"code": code, "message": message}}


def run_check(check: str, params: dict, backend_loader: Callable[[], Backend]) -> tuple[dict, int]:
    """Run one check; never raises, returns ``(report, exit_code)``."""
    try:
        backend = backend_loader()
        report = CHECKS[check](params, backend)
        return report, EXIT_OK if report["pass"] else EXIT_FAIL
    except InputError as exc:
        return _error_report(check, exc.code, str(exc)), EXIT_INPUT
    except CheckFailed as exc:
        rep = _report(check, params, {"failure": str(exc)}, False)
        return rep, EXIT_FAIL
    except PolySyntaxError as exc:
        return _error_report(check, "syntax_error", str(exc)), EXIT_INPUT
    except gaussian.ZeroTailError as exc:
        return _error_report(check, "zero_tail", str(exc)), EXIT_INPUT
    except SpecError as exc:
        return _error_report(check, "invalid_spec", str(exc)), EXIT_INPUT
    except WickDegreeError as exc:
        return _error_report(check, "wick_cap", str(exc)), EXIT_INPUT
    except measures.MarginalUnavailable as exc:
        return _error_report(check, "unavailable", str(exc)), EXIT_INPUT
    except (FunctionalError, MeasureError) as exc:
        return _error_report(check, "invalid_input", str(exc)), EXIT_INPUT
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        return _error_report(check, "invalid_input", f"{type(exc).__name__}: {exc}"), EXIT_INPUT


def run_problem(problem: dict, jobs: int = 1) -> tuple[list[dict], int]:
    """Run every check of a problem file; reports sorted by check name."""
    if not isinstance(problem, dict) or not isinstance(problem.get("checks"), list):
        raise InputError("bad_problem", "problem file needs a 'checks' list")
    polys = problem.get("polynomials", {})
    spec_obj, table_obj = problem.get("covariance"), problem.get("moment_table")

    def task(entry: dict) -> tuple[str, dict, int]:
        name = str(entry.get("name") or entry.get("check"))
        kind = entry.get("check")
        if kind not in CHECKS:
            return name, dict(_error_report(str(kind), "unknown_check", f"unknown check {kind!r}"), name=name), EXIT_INPUT
        params = dict(entry.get("params", {}))
        if "seed" in entry:
            params["seed"] = entry["seed"]
        for key in ("poly",):
            if isinstance(params.get(key), str) and params[key] in polys:
                params[key] = polys[params[key]]
        backend_name = entry.get("backend")

        def loader() -> Backend:
            if backend_name == "covariance":
                return _load_backend(spec_obj, None)
            if backend_name == "moment_table":
                return _load_backend(None, table_obj)
            return _load_backend(spec_obj, table_obj)

        report, code = run_check(kind, params, loader)
        report["name"] = name
        return name, report, code

    entries = [e for e in problem["checks"] if isinstance(e, dict)]
    if len(entries) != len(problem["checks"]):
        raise InputError("bad_problem", "every check must be an object")
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(task, entries))
    results.sort(key=lambda r: r[0])
    reports = [r for _, r, _ in results]
    codes = [c for _, _, c in results]
    code = EXIT_INPUT if EXIT_INPUT in codes else EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK
    return reports, code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cylmoment", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="covariance spec JSON file")
    common.add_argument("--table", help="moment table JSON file")
    common.add_argument("--poly", help="polynomial in the x1, x2, ... grammar")
    common.add_argument("--poly-file", help="file holding the polynomial")
    common.add_argument("--var", type=int)
    common.add_argument("--horizon", type=int)
    common.add_argument("--indices")
    common.add_argument("--sub", help="sub-index set F for consistency (default: first index)")
    common.add_argument("--degree", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--a", help="threshold for chebyshev")
    common.add_argument("--eps", help="epsilon for the continuity witness")
    common.add_argument("--boxes", help="JSON file with 'whole' and 'partition' cylinder sets")
    common.add_argument("--moments", help="comma-separated moments m0,m1,... for quad")
    common.add_argument("--atoms", type=int)
    common.add_argument("--frac", help="fraction like 'x1 / (1+x1^2)'")
    common.add_argument("--at", help="character like '1=2,2=1/2'")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", help="write the JSON report here instead of stdout")

    for name in CHECKS:
        sub.add_parser(name, parents=[common], help=f"run the {name} check")
    run = sub.add_parser("run", parents=[common], help="run every check of a problem file")
    run.add_argument("--problem", required=True)
    return parser


def _emit(payload: Any, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _summarize(reports: list[dict]) -> None:
    for rep in reports:
        label = rep.get("name", rep["check"])
        if "error" in rep:
            status = f"ERROR {rep['error']['code']}: {rep['error']['message']}"
        else:
            status = "PASS" if rep["pass"] else "FAIL"
        print(f"{label}: {status}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        try:
            reports, code = run_problem(_read_json(args.problem), args.jobs)
        except InputError as exc:
            reports, code = [_error_report("run", exc.code, str(exc))], EXIT_INPUT
        _emit(reports, args.out)
        _summarize(reports)
        return code

    params = {k: v for k, v in vars(args).items()
              if k not in ("command", "spec", "table", "poly_file", "jobs", "out")}
    if args.poly_file:
        try:
            params["poly"] = Path(args.poly_file).read_text().strip()
        except FileNotFoundError:
            params["poly"] = None
            report = _error_report(args.command, "file_not_found", f"no such file: {args.poly_file}")
            _emit(report, args.out)
            _summarize([report])
            return EXIT_INPUT

    def loader() -> Backend:
        spec_obj = _read_json(args.spec) if args.spec else None
        table_obj = _read_json(args.table) if args.table else None
        return _load_backend(spec_obj, table_obj)

    report, code = run_check(args.command, params, loader)
    _emit(report, args.out)
    _summarize([report])
    return code


if __name__ == "__main__":
    sys.exit(main())
