"""
Error against parameters
========================

Join published attention-transfer errors to the enumerated student costs
and keep the students nobody beats on both axes.
"""

from pathlib import Path

from cheapconv import build_wrn, report

data = Path(__file__).resolve().parents[1] / "data"
entries = report.read_entries((data / "wrn40_2_students.txt").read_text())
errors = report.read_metrics_csv((data / "cifar10_at_error.csv").read_text())

table = report.mark_dominance(report.enumerate_recipes(build_wrn(40, 2, 10), entries, errors))
print(report.to_markdown(table, metric_name="AT error (%)"))

# The reduced 16-2 network loses to a bottlenecked, grouped 40-2 that is
# less than half its size.
rows = table.by_label()
print("16-2/S dominated:", rows["16-2/S"].dominated)

front = report.pareto_front(table)
print("front:", ", ".join(r.label for r in front.rows))

out = Path("pareto_front.svg")
out.write_bytes(report.emit(table, "svg", title="WRN-40-2 students",
                            metric_name="AT error (%)"))
print("wrote", out)
