"""Iteration tables, verification tables and their exporters."""

import csv
import io
import json
import logging
import os
import sys
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Union

from .exceptions import ExportError
from .mesh import TriMesh, format_mesh_dump
from .models import IterationRecord, TableFormat, VerificationRecord

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "case", "bc", "N", "lambda", "alpha", "kappa", "iterations", "converged", "final_residual",
)
VERIFICATION_COLUMNS = ("check", "point", "measured", "passed", "detail")


def _record(item) -> IterationRecord:
    return item if isinstance(item, IterationRecord) else item.record


def _number(value: Optional[float]) -> str:
    return "" if value is None else f"{value:g}"


def _csv_table(records: Sequence[IterationRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.case.value,
            r.bc.value,
            r.n,
            _number(r.lam),
            _number(r.alpha),
            _number(r.kappa),
            r.iterations,
            str(r.converged).lower(),
            f"{r.final_residual:.6e}",
        ])
    return buffer.getvalue()


def _markdown_table(records: Sequence[IterationRecord]) -> str:
    """Rows are (kappa, alpha, lambda) in order of first appearance, columns N.

    A count that did not converge is marked with an asterisk.
    """
    ns = sorted({r.n for r in records})
    rows: Dict[tuple, Dict[int, str]] = {}
    for r in records:
        cell = f"{r.iterations}" + ("" if r.converged else "*")
        rows.setdefault((r.kappa, r.alpha, r.lam), {})[r.n] = cell

    header = ["kappa", "alpha", "lambda \\ N"] + [str(n) for n in ns]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for (kappa, alpha, lam), cells in rows.items():
        values = [_number(kappa) or "-", _number(alpha) or "-", _number(lam)]
        values += [cells.get(n, "") for n in ns]
        lines.append("| " + " | ".join(values) + " |")
    return "\n".join(lines) + "\n"


def emit_table(results: Sequence, format: Union[TableFormat, str] = TableFormat.CSV) -> str:
    """Render iteration results (records or cell results) deterministically."""
    records = [_record(item) for item in results]
    if TableFormat(format) == TableFormat.MARKDOWN:
        return _markdown_table(records)
    return _csv_table(records)


def emit_verification_table(records: Sequence[VerificationRecord]) -> str:
    """CSV with one row per check and parameter point."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(VERIFICATION_COLUMNS)
    for r in records:
        point = ";".join(f"{k}={v:g}" for k, v in r.point.items())
        writer.writerow([r.check, point, f"{r.measured:.10e}", str(r.passed).lower(), r.detail])
    return buffer.getvalue()


def reports_to_json(results: Sequence) -> str:
    """JSON object mapping each cell key to its Krylov report."""
    data = {result.point.key: result.report.to_dict() for result in results}
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# =============================================================================
# Exporters
# =============================================================================


class TableExporter(ABC):
    """Abstract base class for text exporters."""

    @abstractmethod
    def export(self, text: str) -> None:
        """Write one rendered table or document."""

    @abstractmethod
    def shutdown(self) -> None:
        """Release resources."""


class StreamTableExporter(TableExporter):
    """Writes to a text stream, stdout by default."""

    def __init__(self, stream: Optional[TextIO] = None) -> None:
        self._stream = stream

    def export(self, text: str) -> None:
        stream = self._stream or sys.stdout
        stream.write(text)
        stream.flush()

    def shutdown(self) -> None:
        pass


class FileTableExporter(TableExporter):
    """Writes a file atomically through a temporary sibling."""

    def __init__(self, path: Union[str, Path]) -> None:
        self._path = str(path)

    @property
    def path(self) -> str:
        return self._path

    def export(self, text: str) -> None:
        parent_dir = os.path.dirname(self._path)
        try:
            if parent_dir:
                os.makedirs(parent_dir, exist_ok=True)
            fd, tmp_path = tempfile.mkstemp(dir=parent_dir or ".", prefix=".table_", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as f:
                    f.write(text)
                os.replace(tmp_path, self._path)
            finally:
                if os.path.exists(tmp_path):
                    os.unlink(tmp_path)
        except OSError as exc:
            raise ExportError(f"Failed to write {self._path}: {exc}", path=self._path) from exc
        logger.debug("Wrote %d bytes to %s", len(text), self._path)

    def shutdown(self) -> None:
        pass


class CompositeTableExporter(TableExporter):
    """Fan-out exporter; fails only when every backend fails."""

    def __init__(self, exporters: List[TableExporter]) -> None:
        self._exporters = list(exporters)

    def export(self, text: str) -> None:
        errors: List[str] = []
        for exporter in self._exporters:
            try:
                exporter.export(text)
            except Exception as exc:
                logger.warning("Exporter %s failed: %s", type(exporter).__name__, exc)
                errors.append(str(exc))
        if errors and len(errors) == len(self._exporters):
            raise ExportError(f"All exporters failed: {'; '.join(errors)}")

    def shutdown(self) -> None:
        for exporter in self._exporters:
            try:
                exporter.shutdown()
            except Exception as exc:
                logger.warning("Exporter shutdown failed: %s", exc)


def write_reports(results: Sequence, path: Union[str, Path]) -> None:
    FileTableExporter(path).export(reports_to_json(results))


def write_mesh_dump(mesh: TriMesh, path: Union[str, Path]) -> None:
    FileTableExporter(path).export(format_mesh_dump(mesh))
