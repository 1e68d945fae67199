"""Command-line interface: file ingestion, dispatch, report serialization.

Commands:
  check-einstein <metric>   run the conformal-Einstein decision
  tensors <metric>          dump concomitants at a point
  verify-invariants <metric>  run the per-point property suite
  catalog                   list built-in metrics and conformal factors

<metric> is either a file path or ``catalog:<name>``.  Exit codes: 0 pass,
1 not conformally Einstein, 2 inconclusive/degenerate, 3 input error,
4 internal invariant violation.  EINCHECK_WORKERS bounds the evaluation pool.
"""

from __future__ import annotations

import argparse
import sys

from .einstein import DEFAULT_TOLERANCE, decide, invariant_residuals
from .errors import (
    DegenerateWeylError,
    EincheckError,
    InvariantViolationError,
    MetricFileError,
    ParseError,
)
from .expr import parse
from .metricfile import (
    catalog_conformal_factors,
    catalog_names,
    load_catalog_metric,
    load_metric,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_DEGENERATE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4

_INVARIANT_THRESHOLD = 1e-6


def _format_real(value):
    return format(float(value), ".17g")


def render_tree(node, indent=0):
    """Deterministic structured serialization: JSON layout, insertion-ordered
    keys, reals at 17 significant digits."""
    pad = "  " * indent
    if isinstance(node, dict):
        if not node:
            return "{}"
        body = ",\n".join(
            f'{pad}  "{key}": {render_tree(value, indent + 1)}' for key, value in node.items()
        )
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(node, (list, tuple)):
        if not len(node):
            return "[]"
        body = ",\n".join(f"{pad}  {render_tree(item, indent + 1)}" for item in node)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(node, bool):
        return "true" if node else "false"
    if isinstance(node, float):
        return _format_real(node)
    if isinstance(node, int):
        return str(node)
    if node is None:
        return "null"
    return '"' + str(node).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _resolve_metric(token):
    if token.startswith("catalog:"):
        return load_catalog_metric(token[len("catalog:") :])
    return load_metric(token)


def _resolve_conformal(token, mfile):
    if token is None:
        return None, None
    if token == "file":
        if mfile.conformal_factor_source is None:
            raise MetricFileError(f"metric '{mfile.name}' declares no conformal factor")
        source = mfile.conformal_factor_source
    elif token.startswith("catalog:"):
        factors = catalog_conformal_factors()
        key = token[len("catalog:") :]
        if key not in factors:
            raise MetricFileError(
                f"no catalog conformal factor '{key}' (available: {', '.join(sorted(factors))})"
            )
        source = factors[key]
    else:
        source = token
    return parse(source, mfile.coordinates, mfile.parameters.keys()), source


def _parse_points(token):
    points = []
    for chunk in token.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 4:
            raise MetricFileError(f"point '{chunk}' needs 4 coordinates")
        try:
            points.append(tuple(float(p) for p in parts))
        except ValueError:
            raise MetricFileError(f"point '{chunk}' has non-numeric coordinates") from None
    if not points:
        raise MetricFileError("no points given")
    return tuple(points)


def _point_label(point):
    return ", ".join(_format_real(x) for x in point)


def _report_tree(report, conformal_source):
    verdicts = []
    for v in report.verdicts:
        entry = {"point": list(v.point), "status": v.status, "weyl_scalar": v.cdotc_value}
        if v.e_ab_residual is not None:
            entry["e_residual"] = v.e_ab_residual
            entry["c_ricci_antisym_residual"] = v.c_ricci_antisym_residual
            entry["c_ricci_tracefree_residual"] = v.c_ricci_tracefree_residual
            entry["crosscheck_residual"] = v.crosscheck_residual
        verdicts.append(entry)
    return {
        "command": "check-einstein",
        "metric": report.metric_id,
        "conformal_factor": conformal_source,
        "tolerance": report.tolerance,
        "aggregate": report.aggregate,
        "note": "verdict is local to the sampled points; no global claim",
        "points": verdicts,
        "point_errors": [
            {"point": list(p), "error": msg} for p, msg in report.point_errors
        ],
        "max_e_residual": report.max_e_residual,
        "max_c_ricci_residual": report.max_c_ricci_residual,
        "max_crosscheck_residual": report.max_crosscheck_residual,
    }


def _print_report_text(report, conformal_source, out):
    out.write(f"metric: {report.metric_id}\n")
    if conformal_source:
        out.write(f"conformal factor: {conformal_source}\n")
    out.write(f"tolerance: {_format_real(report.tolerance)}\n")
    for v in report.verdicts:
        line = f"  point ({_point_label(v.point)}): {v.status}"
        if v.e_ab_residual is not None:
            line += (
                f"  E={_format_real(v.e_ab_residual)}"
                f"  antisym={_format_real(v.c_ricci_antisym_residual)}"
                f"  tracefree={_format_real(v.c_ricci_tracefree_residual)}"
            )
        out.write(line + "\n")
    for point, msg in report.point_errors:
        out.write(f"  point ({_point_label(point)}): evaluation error: {msg}\n")
    out.write(f"verdict: {report.aggregate} (at the sampled points)\n")


def _verdict_exit(report):
    if report.aggregate == "conformally-einstein":
        return EXIT_PASS
    if report.aggregate == "not-conformally-einstein":
        return EXIT_FAIL
    return EXIT_DEGENERATE


def _cmd_check_einstein(args, out):
    mfile = _resolve_metric(args.metric)
    factor, source = _resolve_conformal(args.conformal, mfile)
    points = _parse_points(args.points) if args.points else mfile.points_or(None)
    report = decide(
        mfile.spec, points, tolerance=args.tolerance, conformal=factor, workers=args.workers
    )
    if args.format == "structured":
        out.write(render_tree(_report_tree(report, source)) + "\n")
    else:
        _print_report_text(report, source, out)
    return _verdict_exit(report)


_SHOW_CHOICES = (
    "christoffel",
    "riemann",
    "ricci",
    "scalar",
    "schouten",
    "weyl",
    "weyl-scalar",
    "lambda",
    "c-transition",
    "c-riemann",
    "c-ricci",
    "c-scalar",
    "bach",
    "e",
)

_NEEDS_LAMBDA = {"lambda", "c-transition", "c-riemann", "c-ricci", "c-scalar", "e"}


def _tensor_values(spec, point, names, conformal):
    """Constant terms of the requested concomitants at one point."""
    from .conformal import c_connection, lambda_field
    from .einstein import e_tensor

    frame = spec.frame_at(point, conformal=conformal)
    values = {}
    plain = {
        "christoffel": lambda: frame.christoffel,
        "riemann": lambda: frame.riemann,
        "ricci": lambda: frame.ricci,
        "scalar": lambda: frame.scalar_R.value,
        "schouten": lambda: frame.schouten,
        "weyl": lambda: frame.weyl_down,
        "weyl-scalar": lambda: frame.cdotc.value,
        "bach": lambda: frame.bach,
    }
    lam = cframe = None
    for name in names:
        if name in plain:
            values[name] = plain[name]()
            continue
        if lam is None:
            lam = lambda_field(frame)  # raises DegenerateWeylError when C.C = 0
            cframe = c_connection(frame, lam)
        values[name] = {
            "lambda": lambda: lam,
            "c-transition": lambda: cframe.c_transition,
            "c-riemann": lambda: cframe.c_riemann,
            "c-ricci": lambda: cframe.c_ricci,
            "c-scalar": lambda: cframe.c_scalar,
            "e": lambda: e_tensor(frame, lam),
        }[name]()
    return values


def _valence_labels(tensor):
    # entries print with coordinate positions; contravariant slots first
    return tensor.p, tensor.q


def _tensor_tree(name, value, coords):
    if isinstance(value, float):
        return {"name": name, "value": value}
    comps = {}
    import itertools

    consts = value.constants()
    for index in itertools.product(range(4), repeat=value.rank):
        entry = consts[index]
        if entry != 0.0:
            comps[",".join(coords[i] for i in index)] = float(entry)
    return {
        "name": name,
        "valence": list(value.valence),
        "nonzero_components": comps,
    }


def _cmd_tensors(args, out):
    mfile = _resolve_metric(args.metric)
    factor, source = _resolve_conformal(args.conformal, mfile)
    points = _parse_points(args.at)
    names = [n.strip() for n in args.show.split(",") if n.strip()]
    for name in names:
        if name not in _SHOW_CHOICES:
            raise MetricFileError(
                f"unknown concomitant '{name}' (choose from {', '.join(_SHOW_CHOICES)})"
            )
    degenerate = False
    blocks = []
    for point in points:
        try:
            values = _tensor_values(mfile.spec, point, names, factor)
        except DegenerateWeylError as err:
            degenerate = True
            blocks.append((point, None, str(err)))
            continue
        blocks.append((point, values, None))

    if args.format == "structured":
        tree = {
            "command": "tensors",
            "metric": mfile.name,
            "conformal_factor": source,
            "points": [
                {
                    "point": list(point),
                    "status": "degenerate" if values is None else "ok",
                    **(
                        {"error": err}
                        if values is None
                        else {
                            "tensors": [
                                _tensor_tree(name, values[name], mfile.coordinates)
                                for name in names
                            ]
                        }
                    ),
                }
                for point, values, err in blocks
            ],
        }
        out.write(render_tree(tree) + "\n")
    else:
        import itertools

        for point, values, err in blocks:
            out.write(f"at ({_point_label(point)}):\n")
            if values is None:
                out.write(f"  degenerate: {err}\n")
                continue
            for name in names:
                value = values[name]
                if isinstance(value, float):
                    out.write(f"  {name} = {_format_real(value)}\n")
                    continue
                consts = value.constants()
                shown = 0
                for index in itertools.product(range(4), repeat=value.rank):
                    if consts[index] != 0.0:
                        label = ",".join(mfile.coordinates[i] for i in index)
                        out.write(f"  {name}[{label}] = {_format_real(consts[index])}\n")
                        shown += 1
                if not shown:
                    out.write(f"  {name} = 0 (all components)\n")
    return EXIT_DEGENERATE if degenerate else EXIT_PASS


def _cmd_verify_invariants(args, out):
    mfile = _resolve_metric(args.metric)
    factor, source = _resolve_conformal(args.conformal, mfile)
    points = _parse_points(args.points) if args.points else mfile.points_or(None)
    worst = 0.0
    trees = []
    for point in points:
        residuals = invariant_residuals(mfile.spec, point, conformal=factor)
        out.write(f"at ({_point_label(point)}):\n")
        for name, value in residuals.items():
            if name == "weyl_degenerate":
                out.write(f"  {name:<26} {'yes' if value else 'no'}\n")
                continue
            out.write(f"  {name:<26} {_format_real(value)}\n")
            worst = max(worst, value)
        trees.append(residuals)
    ok = worst <= _INVARIANT_THRESHOLD
    out.write(f"worst residual: {_format_real(worst)} -> {'ok' if ok else 'VIOLATION'}\n")
    return EXIT_PASS if ok else EXIT_INTERNAL


def _cmd_catalog(args, out):
    factors = catalog_conformal_factors()
    if args.format == "structured":
        tree = {
            "command": "catalog",
            "metrics": list(catalog_names()),
            "conformal_factors": {k: factors[k] for k in sorted(factors)},
        }
        out.write(render_tree(tree) + "\n")
        return EXIT_PASS
    out.write("catalog metrics:\n")
    for name in catalog_names():
        mfile = load_catalog_metric(name)
        params = ", ".join(f"{k}={v:g}" for k, v in mfile.parameters.items()) or "none"
        out.write(f"  {name:<26} coords: {', '.join(mfile.coordinates)}; parameters: {params}\n")
    out.write("conformal factors (use --conformal catalog:<name>):\n")
    for key in sorted(factors):
        out.write(f"  {key:<26} {factors[key]}\n")
    return EXIT_PASS


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eincheck",
        description="Numerical conformal-Einstein test and tensor-concomitant toolbox",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check-einstein", help="decide conformal-Einstein at sample points")
    check.add_argument("metric", help="metric file path or catalog:<name>")
    check.add_argument("--points", help="semicolon-separated points 't,r,theta,phi'")
    check.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    check.add_argument(
        "--conformal",
        help="conformal factor: an expression, catalog:<name>, or 'file' for the metric file's own",
    )
    check.add_argument("--format", choices=("text", "structured"), default="text")
    check.add_argument("--workers", type=int, default=None)
    check.set_defaults(func=_cmd_check_einstein)

    tens = sub.add_parser("tensors", help="print concomitants at given points")
    tens.add_argument("metric")
    tens.add_argument("--at", required=True, help="point(s), semicolon separated")
    tens.add_argument("--show", required=True, help=f"comma list from: {', '.join(_SHOW_CHOICES)}")
    tens.add_argument("--conformal")
    tens.add_argument("--format", choices=("text", "structured"), default="text")
    tens.set_defaults(func=_cmd_tensors)

    verify = sub.add_parser("verify-invariants", help="run the per-point property suite")
    verify.add_argument("metric")
    verify.add_argument("--points")
    verify.add_argument("--conformal")
    verify.set_defaults(func=_cmd_verify_invariants)

    cat = sub.add_parser("catalog", help="list built-in metrics and conformal factors")
    cat.add_argument("--format", choices=("text", "structured"), default="text")
    cat.set_defaults(func=_cmd_catalog)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except InvariantViolationError as err:
        print(f"eincheck: internal invariant violation: {err}", file=sys.stderr)
        return EXIT_INTERNAL
    except DegenerateWeylError as err:
        print(f"eincheck: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (MetricFileError, ParseError) as err:
        print(f"eincheck: {err}", file=sys.stderr)
        return EXIT_INPUT
    except EincheckError as err:
        print(f"eincheck: {err}", file=sys.stderr)
        return EXIT_INPUT


def entry():
    raise SystemExit(main())
