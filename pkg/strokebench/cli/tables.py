"""Plain-text tables for stdout, three decimals throughout."""
from __future__ import annotations

import io
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from rich import box
from rich.console import Console
from rich.table import Table

from ..core.protocol import METRICS

Column = Tuple[str, str]


def fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def fmt_p(value: float) -> str:
    return f"{value:.3g}" if value < 0.001 else f"{value:.3f}"


def build_table(title: str, columns: Sequence[Column], rows: Iterable[Mapping[str, Any]]) -> Table:
    table = Table(title=title, box=box.SIMPLE, title_justify="left")
    for key, header in columns:
        table.add_column(header, justify="left" if key in ("method", "a", "b", "image_id", "subset") else "right")
    for row in rows:
        table.add_row(*[fmt_p(row[key]) if key == "p" else fmt(row.get(key)) for key, _ in columns])
    return table


def render(tables: Sequence[Table], width: int = 120) -> str:
    """Render without colour or terminal detection so output is stable."""
    buffer = io.StringIO()
    console = Console(file=buffer, width=width, color_system=None, force_terminal=False, highlight=False)
    for table in tables:
        console.print(table)
    return buffer.getvalue()


def records_table(records: Sequence[Mapping[str, Any]]) -> Table:
    columns: List[Column] = [("image_id", "image"), ("method", "method"), ("seed", "seed")]
    columns += [(m, m.upper().replace("_", "-")) for m in METRICS]
    columns += [("tau", "tau")]
    return build_table("Per-image scores", columns, records)


def report_tables(tables: Mapping[str, Any], metric: str) -> List[Table]:
    per_method_rows = []
    for row in tables["per_method"]:
        flat: Dict[str, Any] = {"method": row["method"]}
        for m in METRICS:
            flat[m] = f"{row[f'{m}_mean']:.3f} ± {row[f'{m}_std']:.3f}"
        per_method_rows.append(flat)
    rendered = [
        build_table(
            "Per-method mean ± std across images",
            [("method", "method")] + [(m, m.upper().replace("_", "-")) for m in METRICS],
            per_method_rows,
        ),
        build_table(
            f"Core vs thin ({metric})",
            [("method", "method"), ("core_mean", "core"), ("thin_mean", "thin"), ("gap", "gap")],
            tables["core_thin"],
        ),
        build_table(
            f"Robustness ({metric})",
            [
                ("method", "method"),
                ("mean", "mean"),
                ("median", "median"),
                ("iqr", "IQR"),
                ("min", "min"),
                ("max", "max"),
                ("wins", "wins"),
            ],
            tables["robustness"],
        ),
    ]
    if tables["pairwise"]:
        rendered.append(comparison_table(tables["pairwise"], f"Pairwise Wilcoxon ({metric})"))
    return rendered


def comparison_table(rows: Sequence[Mapping[str, Any]], title: str = "Paired comparison") -> Table:
    return build_table(
        title,
        [
            ("a", "A"),
            ("b", "B"),
            ("w", "W"),
            ("p", "p"),
            ("alpha_corr", "alpha"),
            ("significant", "significant"),
            ("mean_delta", "mean Δ"),
            ("std_delta", "std Δ"),
            ("median_delta", "median Δ"),
        ],
        rows,
    )


def characterization_tables(result: Mapping[str, Any]) -> List[Table]:
    images = [
        {
            "image_id": row["image_id"],
            "coverage": row["coverage"] * 100.0,
            "width": "undefined width"
            if not row["width_defined"]
            else f"{row['mean_width']:.3f} ± {row['std_width']:.3f}",
        }
        for row in result["images"]
    ]
    summary = []
    for subset, stats in result["summary"].items():
        width: Optional[str] = None
        if stats["width_mean"] is not None:
            width = f"{stats['width_mean']:.3f} ± {stats['width_std']:.3f}"
        summary.append(
            {
                "subset": subset,
                "n": stats["n"],
                "mean": stats["coverage_mean"] * 100.0,
                "median": stats["coverage_median"] * 100.0,
                "min": stats["coverage_min"] * 100.0,
                "max": stats["coverage_max"] * 100.0,
                "width": width,
            }
        )
    return [
        build_table(
            "Stroke statistics",
            [("image_id", "image"), ("coverage", "coverage %"), ("width", "width px")],
            images,
        ),
        build_table(
            "Subset summary",
            [
                ("subset", "subset"),
                ("n", "n"),
                ("mean", "coverage % mean"),
                ("median", "median"),
                ("min", "min"),
                ("max", "max"),
                ("width", "width px"),
            ],
            summary,
        ),
    ]


def loss_check_table(rows: Sequence[Mapping[str, Any]]) -> Table:
    return build_table(
        "Gradient check against central differences",
        [("method", "loss"), ("max_error", "max |error|"), ("passed", "passed")],
        [{**row, "max_error": f"{row['max_error']:.2e}"} for row in rows],
    )


__all__ = [
    "characterization_tables",
    "comparison_table",
    "loss_check_table",
    "records_table",
    "render",
    "report_tables",
]
