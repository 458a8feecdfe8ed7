"""Bundled base prompts used for crafting and verification experiments."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

__all__ = ["PromptSet", "DEFAULT_PROMPTS"]


@dataclass(frozen=True)
class PromptSet:
    entries: tuple[tuple[str, str], ...]  # (id, text)

    def __post_init__(self):
        if not self.entries:
            raise ConfigError("prompt set must be non-empty")
        ids = [pid for pid, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("prompt ids must be unique")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def text(self, pid: str) -> str:
        for key, text in self.entries:
            if key == pid:
                return text
        raise ConfigError(f"no prompt with id {pid!r}")


DEFAULT_PROMPTS = PromptSet(
    (
        ("p01", "A photo of a cat."),
        ("p02", "A bird flying in the sky."),
        ("p03", "A bunch of purple grapes."),
        ("p04", "A close-up of a cat's face."),
        ("p05", "A bird soaring above the clouds."),
        ("p06", "Purple grapes on a vine."),
        ("p07", "A cat lying in the sun."),
        ("p08", "A bird gliding through a clear sky."),
        ("p09", "A cluster of purple grapes on a table."),
        ("p10", "A cat playing with a ball of yarn."),
    )
)
