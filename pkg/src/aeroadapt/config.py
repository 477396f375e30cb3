"""Key-value text configuration files (`key = value`, `#` comments)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(path: Union[str, Path, None]) -> dict[str, str]:
    if path is None:
        return {}
    return parse_config_text(Path(path).read_text())


def get_int(cfg: dict[str, str], key: str, default: int) -> int:
    return int(cfg[key]) if key in cfg else default


def get_float(cfg: dict[str, str], key: str, default: float) -> float:
    return float(cfg[key]) if key in cfg else default


def get_bool(cfg: dict[str, str], key: str, default: bool) -> bool:
    if key not in cfg:
        return default
    value = cfg[key].lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"config key {key!r}: not a boolean: {cfg[key]!r}")


def get_str(cfg: dict[str, str], key: str, default: Optional[str] = None
            ) -> Optional[str]:
    return cfg.get(key, default)


def get_int_list(cfg: dict[str, str], key: str, default: list[int]) -> list[int]:
    if key not in cfg:
        return list(default)
    return [int(v) for v in cfg[key].replace(",", " ").split()]
