"""Сетка абляций и экспорт таблиц результатов."""
from .exports import CSV_HEADER, read_csv, write_csv, write_docx, write_xlsx
from .grid import (
    BASELINE_LABEL,
    PRESETS,
    AblationGrid,
    GridCell,
    GridRow,
    augmentation_cell,
    baseline_cell,
    ccc_cell,
    clustering_cell,
    config_label,
    preset_cells,
    run_grid,
    slug,
)

__all__ = [
    "AblationGrid",
    "BASELINE_LABEL",
    "CSV_HEADER",
    "GridCell",
    "GridRow",
    "PRESETS",
    "augmentation_cell",
    "baseline_cell",
    "ccc_cell",
    "clustering_cell",
    "config_label",
    "preset_cells",
    "read_csv",
    "run_grid",
    "slug",
    "write_csv",
    "write_docx",
    "write_xlsx",
]
