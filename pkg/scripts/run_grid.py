"""Прогон сетки абляций и сохранение таблицы результатов.
Примеры:
  # Сетка CF×SF (12 ячеек + baseline), 300 шагов на ячейку
  #   python scripts/run_grid.py --preset clustering --config configs/baseline.json --out runs/grid_clustering
  # Быстрый прогон с укороченным обучением и отчётами xlsx/docx
  #   python scripts/run_grid.py --preset augmentation --config configs/baseline.json --steps 20 --xlsx --docx
"""
import argparse
import os
import sys
from typing import List, Optional

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from backend.ccc import setup_logging  # type: ignore  # noqa: E402
from backend.ccc.repro import PRESETS, preset_cells, run_grid, write_csv, write_docx, write_xlsx  # type: ignore  # noqa: E402
from backend.ccc.trainer import load_config  # type: ignore  # noqa: E402


def main(argv: Optional[List[str]] = None) -> int:
    p = argparse.ArgumentParser(description="Сетка абляций (игрушечный масштаб)")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--config", required=True, help="базовая конфигурация JSON")
    p.add_argument("--out", default="runs/grid")
    p.add_argument("--corpus", help="каталог корпуса (перекрывает paths.corpus_dir)")
    p.add_argument("--steps", type=int, help="шагов на ячейку")
    p.add_argument("--no-probe", action="store_true")
    p.add_argument("--xlsx", action="store_true")
    p.add_argument("--docx", action="store_true")
    args = p.parse_args(argv)
    setup_logging()

    base = load_config(args.config)
    if args.steps is not None:
        base.lr_schedule.total_updates = args.steps
        base.lr_schedule.warmup_updates = min(base.lr_schedule.warmup_updates, args.steps)
    cells = preset_cells(args.preset, base)
    rows = run_grid(cells, args.out, corpus_dir=args.corpus, probe=not args.no_probe)

    csv_path = write_csv(rows, os.path.join(args.out, f"{args.preset}.csv"))
    print(f"[OK] Таблица: {csv_path}")
    if args.xlsx:
        print(f"[OK] {write_xlsx(rows, os.path.join(args.out, f'{args.preset}.xlsx'))}")
    if args.docx:
        print(f"[OK] {write_docx(rows, os.path.join(args.out, f'{args.preset}.docx'), title=args.preset)}")
    failed = [r for r in rows if r.failed]
    for row in failed:
        print(f"[!] {row.config_label}: {row.error}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
