"""Чтение и запись WAV (RIFF/WAVE, PCM16, моно)."""
from __future__ import annotations

import logging
import os
import struct
import wave
from concurrent.futures import ThreadPoolExecutor
from glob import glob
from typing import Optional

import numpy as np

from ..errors import NotMonoError, NotPCM16Error, TruncatedWavError, WavFormatError
from .batching import AudioSample

logger = logging.getLogger(__name__)

PCM16_SCALE = 32768.0
WAVE_FORMAT_PCM = 1
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def read_format_code(path: str) -> Optional[int]:
    """Код формата из чанка fmt (для EXTENSIBLE: код подформата); None, если это не RIFF/WAVE"""
    with open(path, "rb") as handle:
        head = handle.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            return None
        while True:
            header = handle.read(8)
            if len(header) < 8:
                return None
            chunk_id, size = struct.unpack("<4sI", header)
            if chunk_id == b"fmt ":
                body = handle.read(min(size, 40))
                if len(body) < 2:
                    return None
                code = struct.unpack("<H", body[:2])[0]
                if code == WAVE_FORMAT_EXTENSIBLE and len(body) >= 26:
                    code = struct.unpack("<H", body[24:26])[0]
                return code
            handle.seek(size + (size & 1), os.SEEK_CUR)


def load_wav(path: str, sample_id: Optional[str] = None) -> AudioSample:
    """Прочитать PCM16 моно; отсчёты делятся на 32768."""
    sample_id = sample_id or os.path.splitext(os.path.basename(path))[0]
    try:
        with wave.open(path, "rb") as wav_file:
            channels = wav_file.getnchannels()
            width = wav_file.getsampwidth()
            rate = wav_file.getframerate()
            declared = wav_file.getnframes()
            raw = wav_file.readframes(declared)
    except (wave.Error, EOFError) as exc:
        code = read_format_code(path)
        if code is not None and code != WAVE_FORMAT_PCM:
            raise NotPCM16Error(f"{path}: код формата {code}, ожидается PCM ({WAVE_FORMAT_PCM})") from exc
        raise WavFormatError(f"{path}: не RIFF/WAVE PCM ({exc})") from exc
    if channels != 1:
        raise NotMonoError(f"{path}: каналов {channels}, ожидается 1")
    if width != 2:
        raise NotPCM16Error(f"{path}: {8 * width} бит на отсчёт, ожидается 16")
    if len(raw) != declared * 2 or declared == 0:
        raise TruncatedWavError(f"{path}: заявлено {declared} отсчётов, прочитано {len(raw) // 2}")
    ints = np.frombuffer(raw, dtype="<i2")
    return AudioSample(ints.astype(np.float32) / np.float32(PCM16_SCALE), rate, sample_id)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(samples, dtype=np.float64) * PCM16_SCALE), -32768, 32767).astype("<i2")


def save_wav(sample: AudioSample, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with wave.open(path, "wb") as wav_file:
        wav_file.setnchannels(1)
        wav_file.setsampwidth(2)
        wav_file.setframerate(int(sample.sample_rate_hz))
        wav_file.writeframes(to_pcm16(sample.samples).tobytes())
    return path


def list_wavs(directory: str) -> list[str]:
    return sorted(glob(os.path.join(directory, "*.wav")))


def load_directory(directory: str, workers: int = 4) -> list[AudioSample]:
    """Загрузить все *.wav каталога параллельно; порядок по имени файла."""
    paths = list_wavs(directory)
    if not paths:
        logger.warning("В каталоге %s нет WAV-файлов", directory)
        return []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        samples = list(pool.map(load_wav, paths))
    logger.info("Загружено %d фрагментов из %s", len(samples), directory)
    return samples
