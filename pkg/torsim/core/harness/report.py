from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from torsim import __version__
from torsim.core.harness.aggregate import RUN_COLUMNS
from torsim.core.sim.models import PacketRecord


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def render_csv(rows: Sequence[Dict[str, Any]], header_lines: Iterable[str] = ()) -> str:
    buffer = io.StringIO()
    buffer.write(f"# torsim {__version__}\n")
    for line in header_lines:
        buffer.write(f"# {line}\n")
    writer = csv.DictWriter(buffer, fieldnames=RUN_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({column: format_cell(row.get(column)) for column in RUN_COLUMNS})
    return buffer.getvalue()


def write_csv(
    rows: Sequence[Dict[str, Any]], path: Path, header_lines: Iterable[str] = ()
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(rows, header_lines), encoding="utf-8")
    return path


def write_packets(records: Iterable[PacketRecord], path: Path) -> int:
    """Newline-delimited JSON, one consumed packet per line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_dict(), ensure_ascii=True))
            handle.write("\n")
            count += 1
    return count


def read_csv_rows(text: str) -> List[Dict[str, str]]:
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))
