"""Text renderings of a MetricsReport."""
from typing import List, Tuple

from app.models import MetricsReport

COLUMNS: List[Tuple[str, str, str]] = [
    ("MOTA", "mota", "{:.3f}"),
    ("MOTP", "motp", "{:.3f}"),
    ("IDF1", "idf1", "{:.3f}"),
    ("MT", "mt", "{:.3f}"),
    ("ML", "ml", "{:.3f}"),
    ("FP", "fp", "{:d}"),
    ("FN", "fn", "{:d}"),
    ("IDS", "ids", "{:d}"),
    ("TP", "tp", "{:d}"),
    ("GT", "gt_count", "{:d}"),
    ("PRED", "num_predictions", "{:d}"),
    ("IDTP", "idtp", "{:d}"),
    ("IDFP", "idfp", "{:d}"),
    ("IDFN", "idfn", "{:d}"),
]


def _cells(report: MetricsReport) -> List[str]:
    return [fmt.format(getattr(report, attr)) for _, attr, fmt in COLUMNS]


def render_summary(report: MetricsReport) -> str:
    """One line of ``NAME=value`` pairs, e.g. ``MOTA=1.000 IDF1=1.000 ...``."""
    return " ".join(f"{name}={cell}" for (name, _, _), cell in zip(COLUMNS, _cells(report)))


def render_table(report: MetricsReport) -> str:
    """Header and value rows, right-aligned per column."""
    cells = _cells(report)
    widths = [max(len(name), len(cell)) for (name, _, _), cell in zip(COLUMNS, cells)]
    header = "  ".join(name.rjust(w) for (name, _, _), w in zip(COLUMNS, widths))
    values = "  ".join(cell.rjust(w) for cell, w in zip(cells, widths))
    return f"{header}\n{values}"


def render_csv(report: MetricsReport) -> str:
    header = ",".join(attr for _, attr, _ in COLUMNS)
    values = ",".join(_csv_cell(getattr(report, attr)) for _, attr, _ in COLUMNS)
    return f"{header}\n{values}"


def _csv_cell(value) -> str:
    return f"{value:.6f}" if isinstance(value, float) else str(value)
