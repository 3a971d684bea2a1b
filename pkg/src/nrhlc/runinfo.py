"""Run manifests embedded in every artifact a command writes."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, _kernels


def corpus_hash(spec: dict) -> str:
    """sha256 of the corpus manifest file, or of the synthetic corpus parameters."""
    if spec.get("kind") == "manifest":
        data = Path(spec["path"]).read_bytes()
    else:
        data = json.dumps(spec, sort_keys=True).encode()
    return hashlib.sha256(data).hexdigest()


def code_version() -> str:
    return f"nrhlc {__version__} ({_kernels.BACKEND} kernels)"


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None = None
    corpus_sha256: str | None = None
    code_version: str = field(default_factory=code_version)
    outputs: list = field(default_factory=list)   # paths relative to the output directory

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
