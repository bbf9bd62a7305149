"""Типизированные ошибки пакета ccc.

Ошибки неверных аргументов дополнительно наследуют ``ValueError``,
чтобы вызывающий код мог перехватывать их обобщённо.
"""


class CCCError(Exception):
    """Базовая ошибка пакета"""


class ShapeError(CCCError, ValueError):
    """Несогласованные формы тензоров (сообщение называет узел графа)"""


class NonFiniteError(CCCError, FloatingPointError):
    """NaN/Inf в выходе операции (строгий режим)"""


class GradientError(CCCError, ValueError):
    """Обратный проход невозможен (например, нескалярная функция потерь)"""


class AudioError(CCCError, ValueError):
    """Некорректный звуковой фрагмент"""


class WavFormatError(AudioError):
    """Файл не является поддерживаемым RIFF/WAVE"""


class NotMonoError(WavFormatError):
    pass


class NotPCM16Error(WavFormatError):
    pass


class TruncatedWavError(WavFormatError):
    pass


class BatchError(CCCError, ValueError):
    """Ошибка формирования мини-батча"""


class AugmentError(CCCError, ValueError):
    """Ошибка аугментации"""


class MaskError(CCCError, ValueError):
    """Ошибка построения маски"""


class QuantizerError(CCCError, ValueError):
    """Ошибка квантователя"""


class ClusteringError(CCCError, ValueError):
    """Ошибка модуля кластеризации"""


class LossError(CCCError, ValueError):
    """Ошибка вычисления функции потерь"""


class ConfigError(CCCError, ValueError):
    """Некорректная конфигурация"""


class CheckpointError(CCCError):
    """Не удалось прочитать или записать контрольную точку"""


class TrainingAborted(CCCError):
    """Обучение остановлено: функция потерь стала NaN/Inf"""

    def __init__(self, message: str, *, step: int, batch_id: str, dump_path: str | None = None):
        super().__init__(message)
        self.step = step
        self.batch_id = batch_id
        self.dump_path = dump_path


class ProbeError(CCCError, ValueError):
    """Линейный зонд невозможен (например, меньше двух классов)"""
