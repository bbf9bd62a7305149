"""Сетка абляций в масштабе игрушечной модели.

Каждая ячейка запускает отдельное предобучение с одинаковым зерном; итоговая
таблица содержит l_total, l_c, точность контрастной задачи и точность зонда.
"""
from __future__ import annotations

import copy
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..loss import NEG_INFINITY, format_sf
from ..trainer import TrainConfig, pretrain, probe_cmd
from ..trainer.synthetic import LABELS_FILE

logger = logging.getLogger(__name__)

BASELINE_LABEL = "Baseline wav2vec 2.0"
AUGMENTATIONS = {
    # рецепт, (alpha, beta, gamma)
    "I": ("I", (1.0, 0.5, 0.5)),
    "II*": ("II", (0.0, 1.0, 1.0)),
    "II": ("II", (1.0, 0.5, 0.5)),
}
CCC_WEIGHTS = (1.0, 0.5, 0.5)


@dataclass
class GridCell:
    label: str
    config: TrainConfig


@dataclass
class GridRow:
    config_label: str
    l_total: Optional[float] = None
    l_c: Optional[float] = None
    contrastive_accuracy: Optional[float] = None
    probe_accuracy: Optional[float] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def config_label(config: TrainConfig) -> str:
    """Подпись строки таблицы по конфигурации"""
    loss = config.loss
    clustering = loss.clustering
    cross = loss.beta > 0 or loss.gamma > 0
    if clustering.bypassed:
        recipe = config.augment.recipe
        if recipe == "I":
            return "Augmentation I"
        if recipe == "II":
            return "Augmentation II (*)" if loss.alpha == 0 else "Augmentation II"
        return BASELINE_LABEL
    sf = format_sf(loss.sf)
    if not cross:
        return f"CF ({clustering.cf}), SF ({sf})"
    return f"CCC - CF({clustering.cf}), SF({sf})" + (" - pooled" if clustering.pooled else "")


def _cell(base: TrainConfig, recipe: str, weights, cf: int = 1, sf: Optional[float] = 1.0, pooled: bool = False) -> GridCell:
    config = copy.deepcopy(base)
    config.augment.recipe = recipe
    config.loss.alpha, config.loss.beta, config.loss.gamma = weights
    config.loss.clustering.cf = cf
    config.loss.clustering.pooled = pooled
    config.loss.sf = sf
    config.validate()
    return GridCell(config_label(config), config)


def baseline_cell(base: TrainConfig) -> GridCell:
    return _cell(base, "identity", (1.0, 0.0, 0.0))


def augmentation_cell(base: TrainConfig, name: str) -> GridCell:
    recipe, weights = AUGMENTATIONS[name]
    return _cell(base, recipe, weights)


def clustering_cell(base: TrainConfig, cf: int, sf: Optional[float]) -> GridCell:
    return _cell(base, "identity", (1.0, 0.0, 0.0), cf, sf)


def ccc_cell(base: TrainConfig, cf: int, sf: Optional[float], pooled: bool) -> GridCell:
    return _cell(base, "II", CCC_WEIGHTS, cf, sf, pooled)


@dataclass
class AblationGrid:
    cf_values: tuple = (8, 16, 24)
    sf_values: tuple = (NEG_INFINITY, 0.1, 0.3, 0.5)
    augmentations: tuple = ()
    pooled: tuple = (False,)
    ccc: bool = False
    include_baseline: bool = True
    extra: list = field(default_factory=list)

    def cells(self, base: TrainConfig) -> list[GridCell]:
        cells = [baseline_cell(base)] if self.include_baseline else []
        cells += [augmentation_cell(base, name) for name in self.augmentations]
        cells += [clustering_cell(base, cf, sf) for cf, sf in self.extra]
        for cf in self.cf_values:
            for sf in self.sf_values:
                if self.ccc:
                    cells += [ccc_cell(base, cf, sf, pooled) for pooled in self.pooled]
                else:
                    cells.append(clustering_cell(base, cf, sf))
        return cells


PRESETS = {
    "augmentation": AblationGrid(cf_values=(), sf_values=(), augmentations=("I", "II*", "II")),
    "clustering": AblationGrid(),
    "ccc": AblationGrid(
        cf_values=(8, 16),
        sf_values=(0.3, 0.5),
        augmentations=("II",),
        pooled=(False, True),
        ccc=True,
        include_baseline=False,
        extra=[(16, 0.3)],
    ),
}


def preset_cells(name: str, base: TrainConfig) -> list[GridCell]:
    if name not in PRESETS:
        raise KeyError(f"неизвестная сетка {name!r} (есть {', '.join(PRESETS)})")
    return PRESETS[name].cells(base)


def slug(label: str) -> str:
    return re.sub(r"[^0-9A-Za-z]+", "_", label.replace("-∞", "neg_inf")).strip("_").lower()


def run_grid(
    cells: Sequence[GridCell],
    out_dir: str,
    *,
    corpus_dir: Optional[str] = None,
    samples=None,
    probe: bool = True,
) -> list[GridRow]:
    """Последовательно обучить каждую ячейку; упавшая ячейка записывается, сетка продолжается"""
    rows = []
    for index, cell in enumerate(cells, start=1):
        config = copy.deepcopy(cell.config)
        config.paths.out_dir = os.path.join(out_dir, slug(cell.label))
        if corpus_dir:
            config.paths.corpus_dir = corpus_dir
        logger.info("Ячейка %d/%d: %s", index, len(cells), cell.label)
        try:
            result = pretrain(config, samples=samples)
            last = result.last or {}
            row = GridRow(
                config_label=cell.label,
                l_total=last.get("l_total"),
                l_c=last.get("l_c"),
                contrastive_accuracy=last.get("contrastive_accuracy"),
            )
            labels_dir = config.paths.corpus_dir
            if probe and os.path.exists(os.path.join(labels_dir, LABELS_FILE)):
                row.probe_accuracy = probe_cmd(result.checkpoint_path, labels_dir, seed=config.seed).accuracy
        except Exception as exc:  # noqa: BLE001 - ячейка не должна останавливать сетку
            logger.warning("Ячейка %s завершилась ошибкой: %s", cell.label, exc)
            row = GridRow(config_label=cell.label, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return rows
