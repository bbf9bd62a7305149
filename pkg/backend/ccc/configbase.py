"""Общая основа для секций конфигурации (dataclass <-> JSON)."""
from __future__ import annotations

import dataclasses
import typing
from typing import Any, ClassVar, Mapping

from .errors import ConfigError


class ConfigSection:
    """Миксин для dataclass-конфигураций.

    ``from_dict`` отклоняет неизвестные ключи, вложенные секции собираются
    рекурсивно. Поля с ``metadata={"serialize": False}`` в JSON не попадают.
    """

    section_name: ClassVar[str] = "config"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None):
        data = dict(data or {})
        hints = typing.get_type_hints(cls)
        fields = {f.name: f for f in dataclasses.fields(cls) if f.metadata.get("serialize", True)}
        unknown = sorted(set(data) - set(fields))
        if unknown:
            raise ConfigError(f"{cls.section_name}: неизвестные поля: {', '.join(unknown)}")
        kwargs = {}
        for name, value in data.items():
            target = hints.get(name)
            if isinstance(target, type) and issubclass(target, ConfigSection):
                value = target.from_dict(value)
            else:
                value = cls._decode_field(name, value)
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def _decode_field(cls, name: str, value: Any) -> Any:
        return value

    def _encode_field(self, name: str, value: Any) -> Any:
        return value

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            if not f.metadata.get("serialize", True):
                continue
            value = getattr(self, f.name)
            if isinstance(value, ConfigSection):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = self._encode_field(f.name, value)
        return out

    def problems(self) -> list[str]:
        """Список нарушенных инвариантов секции (пустой, если всё верно)"""
        return []

    def _collect_problems(self, prefix: str = "") -> list[str]:
        found = [prefix + p for p in self.problems()]
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, ConfigSection):
                found.extend(value._collect_problems(f"{prefix}{f.name}."))
        return found

    def validate(self):
        found = self._collect_problems()
        if found:
            raise ConfigError(f"{self.section_name}: некорректные поля: {'; '.join(found)}")
        return self
