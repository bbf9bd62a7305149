"""Таблица результатов сетки: CSV, а также xlsx и docx."""
from __future__ import annotations

import csv
import os
from typing import Sequence

from docx import Document
from openpyxl import Workbook

from .grid import GridRow

CSV_HEADER = ("config_label", "l_total", "l_c", "contrastive_accuracy", "probe_accuracy")


def _cells(row: GridRow) -> list:
    return [row.config_label, row.l_total, row.l_c, row.contrastive_accuracy, row.probe_accuracy]


def _ensure_dir(path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def write_csv(rows: Sequence[GridRow], path: str) -> str:
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(["" if v is None else v for v in _cells(row)])
    return path


def read_csv(path: str) -> list[GridRow]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: неожиданный заголовок {reader.fieldnames}")
        return [
            GridRow(
                config_label=r["config_label"],
                **{k: (float(r[k]) if r[k] else None) for k in CSV_HEADER[1:]},
            )
            for r in reader
        ]


def write_xlsx(rows: Sequence[GridRow], path: str, title: str = "Результаты") -> str:
    _ensure_dir(path)
    wb = Workbook()
    ws = wb.active
    ws.title = title[:31]
    ws.append(list(CSV_HEADER) + ["error"])
    for row in rows:
        ws.append(_cells(row) + [row.error or ""])
    wb.save(path)
    return path


def write_docx(rows: Sequence[GridRow], path: str, title: str = "Сетка абляций") -> str:
    _ensure_dir(path)
    doc = Document()
    doc.add_heading(title, 0)
    table = doc.add_table(rows=1, cols=len(CSV_HEADER))
    for cell, name in zip(table.rows[0].cells, CSV_HEADER):
        cell.text = name
    for row in rows:
        cells = table.add_row().cells
        cells[0].text = row.config_label
        for cell, value in zip(cells[1:], _cells(row)[1:]):
            cell.text = "—" if value is None else f"{value:.4f}"
    failed = [row for row in rows if row.failed]
    if failed:
        doc.add_heading("Ошибки", 1)
        for row in failed:
            p = doc.add_paragraph()
            p.add_run(row.config_label).bold = True
            p.add_run(f": {row.error}")
    doc.save(path)
    return path
