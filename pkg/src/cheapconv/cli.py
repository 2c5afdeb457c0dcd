"""Command-line front end.

    cheapconv build wrn --depth 40 --width 2 -o wrn40_2.yaml
    cheapconv describe wrn40_2.yaml
    cheapconv cost wrn40_2.yaml --input 3x32x32
    cheapconv substitute wrn40_2.yaml --recipe "G(N/8)" -o student.yaml
    cheapconv enumerate wrn40_2.yaml --recipes students.txt --metrics at.csv --format md --pareto
    cheapconv pareto table.csv --format svg -o front.svg
    cheapconv verify
"""

from __future__ import annotations

import argparse
import sys

from . import archfile, report, verify
from .cost import BN_CONVENTIONS, format_mult_adds_m, format_params_k, network_cost
from .errors import CheapConvError
from .ir import build_resnet, build_wrn, validate
from .transform import parse_recipe, substitute


def _read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def _write(data: bytes, path):
    if path in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(path, "wb") as f:
            f.write(data)


def _shape(text: str):
    parts = text.lower().replace("×", "x").split("x")
    try:
        c, h, w = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected CxHxW, e.g. 3x32x32, got {text!r}") from None
    if min(c, h, w) < 1:
        raise argparse.ArgumentTypeError("input dimensions must be positive")
    return c, h, w


def cmd_build(args):
    if args.family == "wrn":
        net = build_wrn(args.depth, args.width, args.classes)
    else:
        scale = args.width_scale.split(",") if args.width_scale else [1, 1, 1, 1]
        net = build_resnet(args.variant, scale, args.classes)
    _write(archfile.dumps(net).encode(), args.output)
    return 0


def cmd_describe(args):
    net = archfile.load(args.arch)
    print(f"name: {net.name}")
    s = net.stem
    print(f"stem: conv {s.kernel_h}x{s.kernel_w} {s.in_channels}->{s.out_channels} stride {s.stride}"
          + (f", pool {net.pool.kernel}x{net.pool.kernel}/{net.pool.stride}" if net.pool else ""))
    for i, stage in enumerate(net.stages, start=1):
        kinds = sorted({b.kind.value for b in stage.blocks})
        print(f"stage{i}: {len(stage.blocks)} x {'/'.join(kinds)} blocks, "
              f"{stage.in_channels}->{stage.out_channels}, stride {stage.stride}")
    print(f"head: linear {net.head.in_features}->{net.head.num_classes}"
          + (" + bias" if net.head.bias else ""))
    problems = validate(net)
    if problems:
        print(f"{len(problems)} problem(s):")
        for p in problems:
            print(f"  {p}")
        return 1
    print("valid")
    return 0


def cmd_cost(args):
    net = archfile.load(args.arch)
    rep = network_cost(net, args.input, bn_mult_adds=args.bn_mult_adds)
    if args.format == "csv":
        _write(rep.to_csv().encode(), args.output)
        return 0
    lines = [f"{net.name} on {args.input[0]}x{args.input[1]}x{args.input[2]}",
             f"  conv params  {rep.conv_params:>14,d}",
             f"  bn params    {rep.bn_params:>14,d}",
             f"  head params  {rep.head_params:>14,d}",
             f"  total params {rep.total_params:>14,d}  ({format_params_k(rep.total_params)}K)",
             f"  mult-adds    {rep.mult_adds:>14,d}  ({format_mult_adds_m(rep.mult_adds)}M)"]
    _write(("\n".join(lines) + "\n").encode(), args.output)
    return 0


def cmd_substitute(args):
    net = archfile.load(args.arch)
    out = substitute(net, parse_recipe(args.recipe))
    _write(archfile.dumps(out).encode(), args.output)
    return 0


def _emit(table, args):
    kwargs = {}
    if args.format in ("md", "markdown", "svg"):
        kwargs["metric_name"] = args.metric_name
    if args.format == "svg" and args.title:
        kwargs["title"] = args.title
    _write(report.emit(table, args.format, **kwargs), args.output)


def cmd_enumerate(args):
    base = archfile.load(args.arch)
    entries = report.read_entries(_read(args.recipes))
    metrics = report.read_metrics_csv(_read(args.metrics)) if args.metrics else None
    table = report.enumerate_recipes(base, entries, metrics, input_shape=args.input,
                                     objective=args.objective, bn_mult_adds=args.bn_mult_adds)
    for entry, msg in table.errors:
        print(f"warning: skipped {entry}: {msg}", file=sys.stderr)
    if args.pareto:
        table = report.pareto_front(table)
    elif metrics is not None or table.objective == "params_only":
        table = report.mark_dominance(table)
    _emit(table, args)
    return 0


def cmd_pareto(args):
    table = report.from_csv(_read(args.table), objective=args.objective)
    _emit(report.pareto_front(table), args)
    return 0


def cmd_verify(args):
    results = verify.run_all(seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def _add_output_opts(p, default_format="csv"):
    p.add_argument("--format", choices=["csv", "md", "markdown", "svg"], default=default_format)
    p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
    p.add_argument("--metric-name", default="Metric", help="column / axis name for the metric")
    p.add_argument("--title", default="", help="plot title (svg only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cheapconv",
                                     description="Cost and compare cheap-convolution student networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write an architecture file for a standard network")
    fam = p.add_subparsers(dest="family", required=True)
    w = fam.add_parser("wrn", help="wide residual network")
    w.add_argument("--depth", type=int, default=40)
    w.add_argument("--width", type=int, default=2)
    w.add_argument("--classes", type=int, default=10)
    w.add_argument("-o", "--output", default=None)
    r = fam.add_parser("resnet", help="ImageNet ResNet-18/34")
    r.add_argument("--variant", choices=["resnet18", "resnet34"], default="resnet34")
    r.add_argument("--width-scale", default=None, help="per-stage multipliers, e.g. 1,1/2,1/2,1/2")
    r.add_argument("--classes", type=int, default=1000)
    r.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("describe", help="summarize and validate an architecture file")
    p.add_argument("arch")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("cost", help="parameter and mult-add report")
    p.add_argument("arch")
    p.add_argument("--input", type=_shape, default=(3, 32, 32), help="CxHxW (default 3x32x32)")
    p.add_argument("--bn-mult-adds", choices=BN_CONVENTIONS, default="boundary")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("substitute", help="apply a block recipe")
    p.add_argument("arch")
    p.add_argument("--recipe", required=True, help='e.g. "G(N/8)" or "BG(2,M/4)"')
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_substitute)

    p = sub.add_parser("enumerate", help="cost a list of recipes over a base network")
    p.add_argument("arch")
    p.add_argument("--recipes", required=True, help="file with one recipe per line")
    p.add_argument("--metrics", default=None, help="CSV with header label,metric")
    p.add_argument("--input", type=_shape, default=(3, 32, 32))
    p.add_argument("--objective", choices=report.OBJECTIVES, default=None)
    p.add_argument("--bn-mult-adds", choices=BN_CONVENTIONS, default="boundary")
    p.add_argument("--pareto", action="store_true", help="keep only the non-dominated rows")
    _add_output_opts(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("pareto", help="filter a table CSV (as written by enumerate) to its front")
    p.add_argument("table")
    p.add_argument("--objective", choices=report.OBJECTIVES, default="params_vs_metric")
    _add_output_opts(p)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("verify", help="run the gradient and convolution self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CheapConvError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
