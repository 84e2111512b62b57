"""
Rich tables for CLI reports
"""

from typing import Dict, Iterable, List, Mapping, Tuple

from rich.table import Table
from rich.text import Text

from ..align import AlignmentFit
from ..evaluation import MetricReport
from ..losses import GradientCheck
from .colors import ReportColors


def _score(value: float) -> Text:
    return Text(f"{value:.4f}", style=ReportColors.get_score_style(value))


def metric_table(report: MetricReport, title: str = "Blind-spot metrics") -> Table:
    table = Table(title=title, title_style=ReportColors.TITLE, header_style=ReportColors.HEADER)
    table.add_column("metric")
    table.add_column("value", justify="right")
    table.add_row("IoU", _score(report.iou))
    table.add_row("recall", _score(report.recall))
    if report.precision_applicable:
        table.add_row("precision", _score(report.precision))
    else:
        table.add_row("precision", Text("n/a (sparse ground truth)", style=ReportColors.MUTED))
    table.add_row("FN rate", f"{report.fn_rate:.4f}")
    table.add_row("TP / FP / FN / TN", f"{report.tp} / {report.fp} / {report.fn} / {report.tn}")
    table.add_row("frames", str(report.frames))
    if report.threshold is not None:
        table.add_row("threshold", f"{report.threshold:g}")
    return table


def alignment_table(fit: AlignmentFit, accepted: bool, threshold: float) -> Table:
    table = Table(title="Depth alignment", title_style=ReportColors.TITLE,
                  header_style=ReportColors.HEADER)
    table.add_column("field")
    table.add_column("value", justify="right")
    table.add_row("domain", fit.domain.value)
    table.add_row("landmarks", str(fit.n))
    table.add_row("scale", f"{fit.scale:.6g}")
    table.add_row("shift", f"{fit.shift:.6g}")
    table.add_row("pearson r", f"{fit.pearson_r:.4f}")
    decision = "accept" if accepted else "reject"
    table.add_row(f"gate (r ≥ {threshold:g})",
                  Text(decision, style=ReportColors.get_decision_style(accepted)))
    return table


def gradient_table(checks: Iterable[GradientCheck]) -> Table:
    """One row per loss: instances, failures and the worst relative error"""
    summary: Dict[str, List[GradientCheck]] = {}
    for check in checks:
        summary.setdefault(check.loss, []).append(check)

    table = Table(title="Gradient checks", title_style=ReportColors.TITLE,
                  header_style=ReportColors.HEADER)
    table.add_column("loss")
    table.add_column("instances", justify="right")
    table.add_column("failed", justify="right")
    table.add_column("max rel. error", justify="right")
    for loss, items in summary.items():
        failed = sum(not c.passed for c in items)
        table.add_row(
            loss,
            str(len(items)),
            Text(str(failed), style=ReportColors.get_decision_style(failed == 0)),
            f"{max(c.max_rel_error for c in items):.2e}",
        )
    return table


def oracle_table(rows: Iterable[Mapping[str, float]]) -> Table:
    table = Table(title="Generated vs. ray-cast blind spots", title_style=ReportColors.TITLE,
                  header_style=ReportColors.HEADER)
    columns: List[Tuple[str, str]] = [
        ("window", "T"),
        ("frames", "frames"),
        ("iou_tframe", "IoU vs T-frame"),
        ("iou_tframe_tolerant", "IoU ±1 px"),
        ("precision_true", "precision vs true"),
        ("recall_true", "recall vs true"),
        ("fn_rate_true", "FN rate vs true"),
        ("oracle_recall", "T-frame / true"),
    ]
    for _, header in columns:
        table.add_column(header, justify="right")
    for row in rows:
        cells = []
        for key, _ in columns:
            value = row[key]
            if key in ("window", "frames"):
                cells.append(str(int(value)))
            elif key in ("iou_tframe", "iou_tframe_tolerant", "precision_true"):
                cells.append(_score(value))
            else:
                cells.append(f"{value:.4f}")
        table.add_row(*cells)
    return table


def profile_table(ranked: Iterable[Tuple[str, Mapping[str, float]]]) -> Table:
    """One row per operation, in the order given (slowest first from the profiler)"""
    table = Table(title="Timing", title_style=ReportColors.TITLE, header_style=ReportColors.HEADER)
    table.add_column("operation")
    table.add_column("calls", justify="right")
    table.add_column("avg ms", justify="right")
    table.add_column("max ms", justify="right")
    table.add_column("total s", justify="right")
    for name, entry in ranked:
        table.add_row(
            name,
            str(entry["call_count"]),
            f"{entry['avg_time'] * 1000:.2f}",
            f"{entry['max_time'] * 1000:.2f}",
            f"{entry['total_time']:.3f}",
        )
    return table
