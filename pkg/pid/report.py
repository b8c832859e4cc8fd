import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
from openpyxl import Workbook, load_workbook
from openpyxl.styles import Font

from pid.measures import CHAIN_ORDER, Decomposition, MeasureKind

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 9

EXCEL_COLUMNS = ['source', 'measure', 'R', 'U1', 'U2', 'S', 'I_total', 'flag', 'published']
EXCEL_WIDTHS = {'A': 30, 'B': 10, 'C': 14, 'D': 14, 'E': 14, 'F': 14, 'G': 14, 'H': 14, 'I': 12}


def _clean(value: Any) -> Any:
    """JSON-ready copy: floats at 9 significant digits, non-finite floats as strings."""
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return value


@dataclass
class ReportDocument:
    """
    Result of one command: metadata (seed, resolutions, budgets), a results
    table and the approximation flag of every reported measure. The runtime
    is logged but kept out of the JSON so equal seeds give identical output.
    """
    command: str
    metadata: Dict[str, Any] = field(default_factory=dict)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    flags: Dict[str, str] = field(default_factory=dict)
    runtime: Optional[float] = None

    def to_json(self) -> str:
        payload = {'command': self.command, 'metadata': self.metadata, 'rows': self.rows, 'flags': self.flags}
        return json.dumps(_clean(payload), sort_keys=True, indent=2, ensure_ascii=False)

    def render_text(self) -> str:
        lines = [f"pid {self.command}"]
        for key in sorted(self.metadata):
            lines.append(f"  {key}: {self.metadata[key]}")
        if self.rows:
            columns = list(self.rows[0])
            cells = [[_format_cell(row.get(c)) for c in columns] for row in self.rows]
            widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
            lines.append("  " + "  ".join(c.ljust(w) for c, w in zip(columns, widths)))
            for row in cells:
                lines.append("  " + "  ".join(v.ljust(w) for v, w in zip(row, widths)))
        if self.flags:
            lines.append("  flags: " + ", ".join(f"{k}={v}" for k, v in self.flags.items()))
        return "\n".join(lines)


def _format_cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, (float, np.floating)):
        return f"{value:.4f}" if math.isfinite(value) else str(value)
    return str(value)


def decomposition_rows(source: str, decompositions: Mapping[MeasureKind, Decomposition],
                       published: Optional[Mapping[str, Optional[float]]] = None) -> List[Dict[str, Any]]:
    """One row per measure; U/S are None when the system does not have two sources."""
    rows = []
    for kind in CHAIN_ORDER:
        if kind not in decompositions:
            continue
        d = decompositions[kind]
        unique = d.unique or (None, None)
        row = {
            'source': source,
            'measure': kind.symbol,
            'R': d.redundancy,
            'U1': unique[0],
            'U2': unique[1],
            'S': d.synergy,
            'I_total': d.total,
            'flag': d.flags[0] if d.flags else '',
        }
        if published is not None:
            row['published'] = published.get(kind.value)
        rows.append(row)
    return rows


def sampling_metadata(decompositions: Mapping[MeasureKind, Decomposition]) -> Dict[str, Dict[str, Any]]:
    """Grid resolution and sample counts actually used by the sampled measures, keyed by symbol."""
    return {kind.symbol: dict(d.details) for kind, d in decompositions.items() if 'grid_resolution' in d.details}


def save_to_excel(rows: List[Dict[str, Any]], filepath: str):
    """
    Saves decomposition rows to an Excel file, updating the file if present.
    Deduplicates on (source, measure); a new row replaces the stored one.
    """
    existing = {}
    if os.path.exists(filepath):
        try:
            wb = load_workbook(filepath)
            ws = wb.active
            for values in ws.iter_rows(min_row=2, values_only=True):
                if values[0] is None:
                    continue
                row = dict(zip(EXCEL_COLUMNS, values))
                existing[(row['source'], row['measure'])] = row
            logger.info(f"Loaded {len(existing)} existing rows from {filepath}")
        except Exception as e:
            logger.warning(f"Could not read existing file, creating new: {e}")

    new_count = sum(1 for row in rows if (row['source'], row['measure']) not in existing)
    for row in rows:
        existing[(row['source'], row['measure'])] = row
    logger.info(f"Added {new_count} new rows, replaced {len(rows) - new_count}")

    order = {kind.symbol: i for i, kind in enumerate(CHAIN_ORDER)}

    def sort_key(row):
        return (str(row['source']), order.get(row['measure'], len(order)), str(row['measure']))

    wb = Workbook()
    ws = wb.active
    ws.title = "Decompositions"
    ws.append(EXCEL_COLUMNS)
    bold_font = Font(bold=True)
    for cell in ws[1]:
        cell.font = bold_font
    for row in sorted(existing.values(), key=sort_key):
        ws.append([_excel_value(row.get(column)) for column in EXCEL_COLUMNS])
    for column, width in EXCEL_WIDTHS.items():
        ws.column_dimensions[column].width = width

    wb.save(filepath)
    logger.info(f"Saved {len(existing)} total rows to {filepath}")


def _excel_value(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value
