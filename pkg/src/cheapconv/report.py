"""Recipe enumeration, Pareto filtering and table/plot emission."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .cost import network_cost, round_half_up
from .errors import CheapConvError, ReportError, TransformError
from .ir import NetworkSpec, build_wrn
from .transform import BlockRecipe, parse_recipe, substitute

OBJECTIVES = ("params_vs_metric", "multadds_vs_metric", "params_only")
FORMATS = ("csv", "markdown", "svg")

_WRN_NAME = re.compile(r"^WRN-(\d+)-(\d+)(?:/|$)")
_ARCH_PREFIX = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*/(.*)$")


@dataclass(frozen=True)
class ParetoRow:
    label: str
    params: int
    mult_adds: int
    metric: Optional[float] = None
    dominated: bool = False


@dataclass(frozen=True)
class ParetoTable:
    rows: Tuple[ParetoRow, ...] = ()
    objective: str = "params_vs_metric"
    errors: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ReportError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")

    def __len__(self):
        return len(self.rows)

    def by_label(self) -> Dict[str, ParetoRow]:
        return {r.label: r for r in self.rows}


# ---------------------------------------------------------------------------
# labels


def wrn_dims(network: NetworkSpec) -> Optional[Tuple[int, int]]:
    m = _WRN_NAME.match(network.name)
    return (int(m.group(1)), int(m.group(2))) if m else None


def parse_entry(text: str) -> Tuple[Optional[Tuple[int, int]], BlockRecipe]:
    """Split ``"16-2/S"`` into ``((16, 2), S)``; plain recipes get ``None``."""
    m = _ARCH_PREFIX.match(text)
    if m:
        return (int(m.group(1)), int(m.group(2))), parse_recipe(m.group(3))
    return None, parse_recipe(text)


def canonical_label(text: str, base: NetworkSpec) -> str:
    """Normalized row label for an enumeration entry over ``base``.

    WRN bases always get a ``depth-width/`` prefix so that ``"G(N/8)"`` and
    ``"40-2/G( N/8 )"`` name the same row.
    """
    arch, recipe = parse_entry(text)
    dims = wrn_dims(base)
    if arch is not None and dims is None:
        raise TransformError(f"entry {text!r} names a WRN depth-width but the base "
                             f"network {base.name!r} is not a WRN")
    if dims is None:
        return recipe.label
    d, w = arch or dims
    return f"{d}-{w}/{recipe.label}"


def _network_for(entry, base: NetworkSpec) -> Tuple[str, NetworkSpec]:
    if isinstance(entry, BlockRecipe):
        entry = entry.label
    arch, recipe = parse_entry(entry)
    label = canonical_label(entry, base)
    net = base
    if arch is not None and arch != wrn_dims(base):
        net = build_wrn(arch[0], arch[1], base.head.num_classes)
    return label, substitute(net, recipe)


# ---------------------------------------------------------------------------
# enumeration and dominance


def enumerate_recipes(base: NetworkSpec, entries: Iterable, metrics: Optional[Mapping[str, float]] = None,
                      input_shape=(3, 32, 32), objective: Optional[str] = None,
                      bn_mult_adds: str = "boundary") -> ParetoTable:
    """Cost every entry (recipe or ``depth-width/recipe`` string) over ``base``.

    A failing entry is recorded in ``table.errors`` and skipped.  ``metrics``
    maps labels (any spelling the recipe parser accepts) to an external
    metric such as test error.
    """
    joined: Dict[str, float] = {}
    for key, value in (metrics or {}).items():
        joined[canonical_label(key, base)] = float(value)

    rows, errors = [], []
    for entry in entries:
        text = entry.label if isinstance(entry, BlockRecipe) else str(entry)
        try:
            label, net = _network_for(entry, base)
            report = network_cost(net, input_shape, bn_mult_adds=bn_mult_adds)
        except CheapConvError as exc:
            errors.append((text, str(exc)))
            continue
        rows.append(ParetoRow(label, report.total_params, report.mult_adds, joined.get(label)))
    if objective is None:
        objective = "params_vs_metric" if rows and all(r.metric is not None for r in rows) \
            else "params_only"
    return ParetoTable(tuple(rows), objective, tuple(errors))


def objective_values(row: ParetoRow, objective: str) -> Tuple[float, ...]:
    if objective == "params_only":
        return (row.params,)
    if row.metric is None:
        raise ReportError(f"row {row.label!r} has no metric but objective is {objective}")
    x = row.params if objective == "params_vs_metric" else row.mult_adds
    return (x, row.metric)


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """``a`` dominates ``b`` when it is no worse everywhere and better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def mark_dominance(table: ParetoTable) -> ParetoTable:
    """Same rows with ``dominated`` flags set (all objectives minimized)."""
    if table.objective != "params_only":
        missing = [r.label for r in table.rows if r.metric is None]
        if missing:
            raise ReportError(f"objective {table.objective} needs a metric on every row; "
                              f"missing for {', '.join(missing)}")
    points = [objective_values(r, table.objective) for r in table.rows]
    rows = []
    for i, r in enumerate(table.rows):
        dom = any(dominates(p, points[i]) for j, p in enumerate(points) if j != i)
        rows.append(replace(r, dominated=dom))
    return replace(table, rows=tuple(rows))


def pareto_front(table: ParetoTable) -> ParetoTable:
    """Non-dominated rows, sorted by ascending parameter count."""
    marked = mark_dominance(table)
    front = sorted((r for r in marked.rows if not r.dominated),
                   key=lambda r: (r.params, r.mult_adds, r.label))
    return replace(marked, rows=tuple(front))


# ---------------------------------------------------------------------------
# metrics files


def read_metrics_csv(text: str) -> Dict[str, float]:
    """Parse a ``label,metric`` CSV into a dict."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["label", "metric"]:
        raise ReportError("metrics CSV must start with the header 'label,metric'")
    out = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) < 2:
            raise ReportError(f"metrics CSV line {lineno}: expected label,metric")
        # unquoted labels such as BG(2,2) split into extra fields
        label = ",".join(row[:-1]).strip()
        try:
            out[label] = float(row[-1])
        except ValueError:
            raise ReportError(f"metrics CSV line {lineno}: {row[-1]!r} is not a number") from None
    return out


def read_entries(text: str) -> list:
    """Recipe list file: one entry per line, ``#`` starts a comment."""
    entries = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            entries.append(line)
    return entries


# ---------------------------------------------------------------------------
# emission

CSV_HEADER = ["label", "params", "mult_adds", "metric", "dominated"]


def _fmt_metric(m: Optional[float]) -> str:
    return "" if m is None else repr(float(m))


def to_csv(table: ParetoTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in table.rows:
        w.writerow([r.label, r.params, r.mult_adds, _fmt_metric(r.metric),
                    "true" if r.dominated else "false"])
    return buf.getvalue()


def from_csv(text: str, objective: str = "params_vs_metric") -> ParetoTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ReportError(f"table CSV header must be {','.join(CSV_HEADER)}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        try:
            label, params, madds, metric, dom = rec
            rows.append(ParetoRow(label, int(params), int(madds),
                                  float(metric) if metric else None, dom == "true"))
        except ValueError:
            raise ReportError(f"table CSV line {lineno} is malformed: {rec!r}") from None
    return ParetoTable(tuple(rows), objective)


def to_markdown(table: ParetoTable, metric_name: str = "Metric") -> str:
    rows = table.rows
    big = any(r.params >= 10 ** 7 for r in rows)
    if big:
        p_head, p_fmt = "Params (M)", lambda n: round_half_up(n, 10 ** 6, 1)
        m_head, m_fmt = "MAdds (G)", lambda n: round_half_up(n, 10 ** 9, 3)
    else:
        p_head, p_fmt = "Params (K)", lambda n: round_half_up(n, 1000, 1)
        m_head, m_fmt = "MAdds (M)", lambda n: round_half_up(n, 10 ** 6, 1)
    split = bool(rows) and all("/" in r.label for r in rows)
    has_metric = any(r.metric is not None for r in rows)

    head = (["D-W", "Block"] if split else ["Model"]) + [p_head, m_head]
    align = ["---"] * len(head[:-2]) + ["---:", "---:"]
    if has_metric:
        head.append(metric_name)
        align.append("---:")
    head.append("Front")
    align.append(":---:")
    lines = ["| " + " | ".join(head) + " |", "| " + " | ".join(align) + " |"]
    for r in rows:
        cells = r.label.split("/", 1) if split else [r.label]
        cells += [p_fmt(r.params), m_fmt(r.mult_adds)]
        if has_metric:
            cells.append("" if r.metric is None else repr(r.metric))
        cells.append("" if r.dominated else "*")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def to_svg(table: ParetoTable, title: str = "", metric_name: str = "Metric") -> str:
    """Scatter on a log-scaled x axis: dominated points hollow, front joined."""
    if not table.rows:
        raise ReportError("cannot plot an empty table")
    import matplotlib
    from matplotlib.figure import Figure

    marked = mark_dominance(table)
    obj = marked.objective
    xs = [r.mult_adds if obj == "multadds_vs_metric" else r.params for r in marked.rows]
    if obj == "params_only":
        ys = [r.mult_adds for r in marked.rows]
        xlabel, ylabel = "Parameters", "Mult-adds"
    else:
        ys = [r.metric for r in marked.rows]
        xlabel = "Mult-adds" if obj == "multadds_vs_metric" else "Parameters"
        ylabel = metric_name

    with matplotlib.rc_context({"svg.hashsalt": "cheapconv", "svg.fonttype": "none"}):
        fig = Figure(figsize=(7, 4.5))
        ax = fig.add_subplot()
        ax.set_xscale("log")
        if obj == "params_only":
            ax.set_yscale("log")
        front = sorted((x, y) for x, y, r in zip(xs, ys, marked.rows) if not r.dominated)
        ax.plot([p[0] for p in front], [p[1] for p in front], "-", color="tab:blue",
                linewidth=1, zorder=1)
        for x, y, r in zip(xs, ys, marked.rows):
            face = "none" if r.dominated else "tab:blue"
            ax.scatter([x], [y], s=28, facecolors=face, edgecolors="tab:blue", zorder=2)
            ax.annotate(r.label, (x, y), xytext=(3, 3), textcoords="offset points", fontsize=6)
        ax.set_xlabel(xlabel + " (log scale)")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def emit(table: ParetoTable, fmt: str, **kwargs) -> bytes:
    if fmt in ("md",):
        fmt = "markdown"
    if fmt == "csv":
        return to_csv(table).encode()
    if fmt == "markdown":
        return to_markdown(table, **kwargs).encode()
    if fmt == "svg":
        return to_svg(table, **kwargs).encode()
    raise ReportError(f"unknown format {fmt!r}; expected one of csv, md, svg")

