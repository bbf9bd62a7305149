"""Преобразование CSV-таблицы сетки в xlsx и/или docx.
Пример:
  #   python scripts/export_table.py runs/grid/clustering.csv --xlsx --docx
"""
import argparse
import os
import sys
from typing import List, Optional

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from backend.ccc.repro import read_csv, write_docx, write_xlsx  # type: ignore  # noqa: E402


def main(argv: Optional[List[str]] = None) -> int:
    p = argparse.ArgumentParser(description="Экспорт таблицы результатов")
    p.add_argument("csv")
    p.add_argument("--xlsx", action="store_true")
    p.add_argument("--docx", action="store_true")
    args = p.parse_args(argv)
    if not os.path.exists(args.csv):
        print(f"[!] Файл {args.csv!r} не найден")
        return 1
    rows = read_csv(args.csv)
    stem = os.path.splitext(args.csv)[0]
    if args.xlsx:
        print(f"[OK] {write_xlsx(rows, stem + '.xlsx')}")
    if args.docx:
        print(f"[OK] {write_docx(rows, stem + '.docx', title=os.path.basename(stem))}")
    if not (args.xlsx or args.docx):
        print("[!] Укажите --xlsx и/или --docx")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
