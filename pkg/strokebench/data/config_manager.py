"""User defaults for strokebench, persisted as JSON."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

LOGGER = logging.getLogger(__name__)

CONFIG_DIR = Path(os.path.expanduser("~/.config/strokebench"))
CONFIG_FILE = CONFIG_DIR / "config.json"
THREADS_ENV = "STROKEBENCH_THREADS"


@dataclass
class ToolConfig:
    """Defaults applied when a command-line flag is not given."""

    threads: int = 0
    seeds: List[int] = field(default_factory=lambda: [42, 123, 7])
    gray_weights: Tuple[float, float, float] = (0.299, 0.587, 0.114)
    band_variant: str = "both"
    metric: str = "f1"
    adaptive_block: int = 51
    adaptive_c: float = 15.0
    sauvola_window: int = 51
    sauvola_k: float = 0.2
    sauvola_r: float = 128.0
    tolerance_base: int = 1536
    master_seed: int = 0
    variants: int = 10

    def to_dict(self) -> Dict[str, Any]:
        return {
            "threads": self.threads,
            "seeds": list(self.seeds),
            "gray_weights": list(self.gray_weights),
            "band_variant": self.band_variant,
            "metric": self.metric,
            "adaptive_block": self.adaptive_block,
            "adaptive_c": self.adaptive_c,
            "sauvola_window": self.sauvola_window,
            "sauvola_k": self.sauvola_k,
            "sauvola_r": self.sauvola_r,
            "tolerance_base": self.tolerance_base,
            "master_seed": self.master_seed,
            "variants": self.variants,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ToolConfig":
        defaults = cls()
        weights = data.get("gray_weights", defaults.gray_weights)
        if len(weights) != 3:
            raise ValueError(f"gray_weights needs three values, got {list(weights)}")
        return cls(
            threads=int(data.get("threads", defaults.threads)),
            seeds=[int(s) for s in data.get("seeds", defaults.seeds)],
            gray_weights=tuple(float(w) for w in weights),
            band_variant=data.get("band_variant", defaults.band_variant),
            metric=data.get("metric", defaults.metric),
            adaptive_block=int(data.get("adaptive_block", defaults.adaptive_block)),
            adaptive_c=float(data.get("adaptive_c", defaults.adaptive_c)),
            sauvola_window=int(data.get("sauvola_window", defaults.sauvola_window)),
            sauvola_k=float(data.get("sauvola_k", defaults.sauvola_k)),
            sauvola_r=float(data.get("sauvola_r", defaults.sauvola_r)),
            tolerance_base=int(data.get("tolerance_base", defaults.tolerance_base)),
            master_seed=int(data.get("master_seed", defaults.master_seed)),
            variants=int(data.get("variants", defaults.variants)),
        )


def ensure_config_directory() -> None:
    CONFIG_DIR.mkdir(parents=True, exist_ok=True)


def load_config(path: Optional[Path] = None) -> ToolConfig:
    config_file = path or CONFIG_FILE
    if path is None:
        ensure_config_directory()
    if not config_file.exists():
        return ToolConfig()

    try:
        with config_file.open("r", encoding="utf-8") as file:
            data = json.load(file)
    except (json.JSONDecodeError, OSError):
        # Keep the broken file around and fall back to defaults.
        corrupted_path = config_file.with_suffix(".corrupted")
        LOGGER.warning("Config file %s is unreadable; moved to %s", config_file, corrupted_path)
        try:
            config_file.rename(corrupted_path)
        except OSError:
            pass
        return ToolConfig()

    try:
        return ToolConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"Invalid config file {config_file}: {exc}") from exc


def save_config(config: ToolConfig, path: Optional[Path] = None) -> None:
    config_file = path or CONFIG_FILE
    if path is None:
        ensure_config_directory()
    else:
        config_file.parent.mkdir(parents=True, exist_ok=True)
    with config_file.open("w", encoding="utf-8") as file:
        json.dump(config.to_dict(), file, indent=2)


def resolve_threads(flag: Optional[int], config: ToolConfig) -> int:
    """CLI flag, then ``STROKEBENCH_THREADS``, then the config file, then CPU count."""
    if flag is not None:
        threads = flag
    elif os.environ.get(THREADS_ENV):
        raw = os.environ[THREADS_ENV]
        try:
            threads = int(raw)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    else:
        threads = config.threads
    if threads < 0:
        raise ValueError(f"Thread count must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


__all__ = [
    "CONFIG_FILE",
    "THREADS_ENV",
    "ToolConfig",
    "load_config",
    "resolve_threads",
    "save_config",
]
