"""
Plain-text tables for console output.
"""

from typing import Any, List, Sequence

import numpy as np


def _cell(value: Any, digits: int) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.{digits}g}"
    return str(value)


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]], digits: int = 10) -> str:
    """Left-aligned first column, right-aligned numbers, rule under the header."""
    cells: List[List[str]] = [[_cell(v, digits) for v in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, text in enumerate(row):
            widths[i] = max(widths[i], len(text))

    def line(values: Sequence[str]) -> str:
        first = values[0].ljust(widths[0])
        rest = [v.rjust(w) for v, w in zip(values[1:], widths[1:])]
        return "  ".join([first, *rest])

    out = [line(list(headers)), "-" * (sum(widths) + 2 * (len(widths) - 1))]
    out.extend(line(row) for row in cells)
    return "\n".join(out)


def format_matrix(labels: Sequence[str], matrix, title: str = "", digits: int = 8) -> str:
    """Square matrix with time labels on both axes."""
    matrix = np.asarray(matrix, dtype=float)
    rows = [[label, *matrix[i]] for i, label in enumerate(labels)]
    table = format_table([title or "t \\ s", *labels], rows, digits)
    return table
