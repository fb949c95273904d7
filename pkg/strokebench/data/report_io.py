"""Reading and writing report JSON."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List

from ..core.protocol import MetricRecord, RunManifest, SplitSpec

LOGGER = logging.getLogger(__name__)

DECIMALS = 6


def round_floats(value: Any, decimals: int = DECIMALS) -> Any:
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return round(value, decimals)
    if isinstance(value, dict):
        return {key: round_floats(item, decimals) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(item, decimals) for item in value]
    return value


def dumps_report(report: Dict[str, Any]) -> str:
    return json.dumps(round_floats(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path: Path, report: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report), encoding="utf-8")
    LOGGER.info("Wrote %s", path)


def read_json(path: Path) -> Dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as file:
            data = json.load(file)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path} does not hold a JSON object")
    return data


def load_records(path: Path) -> List[MetricRecord]:
    data = read_json(path)
    if "records" not in data:
        raise ValueError(f"{path} has no 'records' section")
    try:
        return [MetricRecord.from_dict(item) for item in data["records"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path} holds a malformed record: {exc}") from exc


def load_manifest(path: Path) -> RunManifest:
    """Accept a bare manifest or a full report carrying one."""
    data = read_json(path)
    return RunManifest.from_dict(data.get("manifest", data))


def load_split(path: Path) -> SplitSpec:
    """Accept a bare split, a manifest, or a full report."""
    data = read_json(path)
    data = data.get("manifest", data)
    return SplitSpec.from_dict(data.get("split", data))


__all__ = [
    "DECIMALS",
    "dumps_report",
    "load_manifest",
    "load_records",
    "load_split",
    "read_json",
    "round_floats",
    "write_json",
]
