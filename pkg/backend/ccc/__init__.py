"""ccc: кросс-контрастное предобучение wav2vec 2.0 с кластеризацией негативов.

Пакет разбит по задачам: autodiff (ядро обратного дифференцирования),
audio (WAV, батчи, метрики), augment, model, clustering, loss, trainer,
repro (сетка абляций и таблицы).
"""
import logging
import logging.config
import os
from typing import Optional

from config import Config

__version__ = "0.1.0"

LOG_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"


def setup_logging(path: Optional[str] = None, level: Optional[str] = None) -> None:
    """Настроить логирование из ini-файла или базовым форматом"""
    path = path or Config.CCC_LOG_CONFIG
    if path and os.path.exists(path):
        logging.config.fileConfig(path, disable_existing_loggers=False)
    else:
        logging.basicConfig(format=LOG_FORMAT)
    logging.getLogger("backend.ccc").setLevel((level or Config.CCC_LOG_LEVEL).upper())
