"""Reproducibility manifests and the CSV writer they stamp.

A manifest captures everything that determines the numbers: resolved
config, master seed, tool version and calibrated constants. Its hash is
embedded in every CSV it produced; the timestamp is recorded but excluded
from the hash so reruns of the same experiment hash identically.
"""
from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field


def tool_version() -> str:
    try:
        from importlib.metadata import version
        return version("levybool")
    except Exception:
        return "0.1.0"


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ExperimentManifest:
    config: dict
    master_seed: int
    tool_version: str = field(default_factory=tool_version)
    calibrated_constants: dict | None = None
    timestamp: str = field(
        default_factory=lambda: datetime.datetime.now(
            datetime.timezone.utc).isoformat())

    @property
    def config_hash(self) -> str:
        payload = {
            "config": self.config,
            "master_seed": self.master_seed,
            "tool_version": self.tool_version,
            "calibrated_constants": self.calibrated_constants,
        }
        return hashlib.sha256(_canonical(payload).encode("utf8")).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "master_seed": self.master_seed,
            "tool_version": self.tool_version,
            "calibrated_constants": self.calibrated_constants,
            "timestamp": self.timestamp,
            "config_hash": self.config_hash,
        }

    def write(self, path) -> None:
        with open(path, "w", encoding="utf8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def format_value(v) -> str:
    """Shortest round-trip decimal for floats; plain text otherwise."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns: list[str], rows, manifest: ExperimentManifest) -> None:
    """Comma-separated with a header row; `#` comment lines carry the
    manifest hash so every table is traceable to its configuration."""
    lines = [f"# config_hash={manifest.config_hash}",
             ",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="utf8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
