"""Run manifests: digests of inputs and outputs for every command."""

import hashlib
import json
import logging
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Union

from spellforge.config import settings
from spellforge.models import OutputRecord, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
PathLike = Union[str, Path]


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def stable_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form of ``payload``."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _jsonable(config: Mapping[str, Any]) -> Dict[str, Any]:
    return {k: str(v) if isinstance(v, Path) else v for k, v in config.items()}


class ManifestRecorder:
    """Collects what a command read and wrote, then writes ``manifest.json``.

    ``manifest_id`` is known before any output exists, so outputs can embed it.
    It covers the command, the options, the seeds and the input digests;
    timestamps and output paths do not enter it.
    """

    def __init__(
        self,
        command: str,
        config: Optional[Mapping[str, Any]] = None,
        seeds: Optional[Mapping[str, int]] = None,
        inputs: Sequence[Optional[PathLike]] = (),
    ):
        self._started = time.perf_counter()
        config = _jsonable(config or {})
        digests = {Path(p).name: file_sha256(p) for p in inputs if p is not None and Path(p).is_file()}
        seeds = {k: int(v) for k, v in (seeds or {}).items()}
        config_hash = stable_hash(config)
        manifest_id = stable_hash(
            {"command": command, "config": config_hash, "seeds": seeds, "inputs": digests}
        )[:16]
        self.manifest = RunManifest(
            manifest_id=manifest_id,
            command=command,
            tool=settings.app_name,
            tool_version=settings.app_version,
            config_hash=config_hash,
            config=config,
            seeds=seeds,
            inputs=digests,
        )
        logger.info("Starting %s %s v%s (manifest %s)", command, settings.app_name, settings.app_version, manifest_id)

    @property
    def manifest_id(self) -> str:
        return self.manifest.manifest_id

    def finish(
        self,
        out_dir: PathLike,
        outputs: Iterable[PathLike],
        extra: Optional[Mapping[str, Any]] = None,
        name: str = MANIFEST_FILE,
    ) -> Path:
        out_dir = Path(out_dir)
        records = []
        for path in sorted({Path(p) for p in outputs}):
            try:
                relative = str(path.relative_to(out_dir))
            except ValueError:
                relative = str(path)
            records.append(OutputRecord(path=relative, sha256=file_sha256(path), bytes=path.stat().st_size))
        self.manifest.outputs = records
        self.manifest.extra.update(extra or {})
        self.manifest.finished_at = datetime.now(timezone.utc)
        self.manifest.elapsed_seconds = round(time.perf_counter() - self._started, 3)
        path = out_dir / name
        path.write_text(self.manifest.model_dump_json(indent=2), encoding="utf-8")
        logger.info(
            "Finished %s in %.1fs: %d output file(s) in %s",
            self.manifest.command, self.manifest.elapsed_seconds, len(records), out_dir,
        )
        return path
