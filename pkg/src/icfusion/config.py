"""Fusion configuration and its flat key-value file format.

Grammar, one entry per line::

    line    := blank | comment | entry
    comment := '#' anything
    entry   := key '=' value
    value   := empty | int (',' int)*

Whitespace around keys, values and commas is ignored. Keys are unique.
Recognised keys (defaults in parentheses):

    levels                 pyramid level ids          (3,4,5)
    c_rgb                  RGB width per level        (128,256,512)
    c_ir                   IR width per level         (512,1024,2048)
    input_size             nominal square input       (640)
    msfd_shuffle_groups    MSFD projection shuffle    (4)
    msfd_groups            MSFD projection conv groups (4)
    ccsg_shuffle_groups    shuffle-gate shuffle       (2)
    ccsg_groups            shuffle-gate conv groups   (2)
    tail_shuffle_groups    output projection shuffle  (2)
    tail_groups            output projection groups   (2)

Level ``l`` has stride ``2**l`` relative to the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

DEFAULT_LEVELS = (3, 4, 5)
DEFAULT_C_RGB = (128, 256, 512)
DEFAULT_C_IR = (512, 1024, 2048)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LevelConfig:
    level: int
    c_rgb: int
    c_ir: int
    msfd_shuffle_groups: int = 4
    msfd_groups: int = 4
    ccsg_shuffle_groups: int = 2
    ccsg_groups: int = 2
    tail_shuffle_groups: int = 2
    tail_groups: int = 2

    @property
    def stride(self) -> int:
        return 2 ** self.level

    def scaled(self, factor: int) -> LevelConfig:
        """Same groups, every channel width multiplied by ``factor``."""
        return LevelConfig(self.level, self.c_rgb * factor, self.c_ir * factor,
                           self.msfd_shuffle_groups, self.msfd_groups,
                           self.ccsg_shuffle_groups, self.ccsg_groups,
                           self.tail_shuffle_groups, self.tail_groups)


@dataclass(frozen=True)
class FusionConfig:
    levels: tuple[LevelConfig, ...] = field(default_factory=tuple)
    input_size: int = 640

    def spatial(self, level: LevelConfig) -> int:
        if self.input_size % level.stride:
            raise ConfigError(f"input size {self.input_size} not divisible by stride {level.stride}")
        return self.input_size // level.stride

    def level(self, level_id: int) -> LevelConfig:
        for lc in self.levels:
            if lc.level == level_id:
                return lc
        raise ConfigError(f"no level {level_id} in config")

    def scaled(self, factor: int) -> FusionConfig:
        return FusionConfig(tuple(lc.scaled(factor) for lc in self.levels), self.input_size)


_GROUP_KEYS = [f.name for f in fields(LevelConfig) if f.name not in ("level", "c_rgb", "c_ir")]
_KNOWN = {"levels", "c_rgb", "c_ir", "input_size", *_GROUP_KEYS}


def default_config(**group_overrides) -> FusionConfig:
    return build_config(dict(group_overrides))


def build_config(values: dict) -> FusionConfig:
    levels = tuple(values.get("levels", DEFAULT_LEVELS))
    c_rgb = tuple(values.get("c_rgb", DEFAULT_C_RGB))
    c_ir = tuple(values.get("c_ir", DEFAULT_C_IR))
    if not (len(levels) == len(c_rgb) == len(c_ir)):
        raise ConfigError("levels, c_rgb and c_ir must have the same length")
    if len(set(levels)) != len(levels):
        raise ConfigError("duplicate level id")
    groups = {}
    for key in _GROUP_KEYS:
        if key in values:
            (groups[key],) = _scalar(key, values[key])
    try:
        lcs = tuple(LevelConfig(int(l), int(r), int(i), **groups)
                    for l, r, i in zip(levels, c_rgb, c_ir))
    except TypeError as err:
        raise ConfigError(str(err)) from None
    (input_size,) = _scalar("input_size", values.get("input_size", 640))
    for lc in lcs:
        if min(lc.c_rgb, lc.c_ir, lc.level) < 1:
            raise ConfigError(f"non-positive width or level id in {lc}")
    return FusionConfig(lcs, input_size)


def _scalar(key, value):
    if isinstance(value, (tuple, list)):
        if len(value) != 1:
            raise ConfigError(f"{key} takes a single integer")
        value = value[0]
    return (int(value),)


def parse_config(text: str) -> FusionConfig:
    values: dict[str, tuple[int, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _KNOWN:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = tuple(int(v) for v in value.split(",")) if value.strip() else ()
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} must be integers, got {value.strip()!r}") from None
    return build_config(values)


def load_config(path: str | Path) -> FusionConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: FusionConfig) -> str:
    first = cfg.levels[0] if cfg.levels else LevelConfig(0, 1, 1)
    lines = [
        "levels = " + ",".join(str(lc.level) for lc in cfg.levels),
        "c_rgb = " + ",".join(str(lc.c_rgb) for lc in cfg.levels),
        "c_ir = " + ",".join(str(lc.c_ir) for lc in cfg.levels),
        f"input_size = {cfg.input_size}",
    ]
    lines += [f"{key} = {getattr(first, key)}" for key in _GROUP_KEYS]
    return "\n".join(lines) + "\n"
