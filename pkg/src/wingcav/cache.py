"""Content-addressed result cache keyed by the resolved configuration.

Entries are written atomically (temp file + rename) next to a sha256
checksum; a checksum mismatch is treated as a miss with a warning so a
corrupted entry is recomputed rather than served.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import warnings
from pathlib import Path

from . import __version__
from .errors import CacheCorruption

log = logging.getLogger(__name__)

ENV_CACHE_DIR = "WINGCAV_CACHE"


def run_id(stage: str, resolved_config: dict) -> str:
    """Hash of (schema version, stage, resolved config, code version)."""
    payload = json.dumps(
        {
            "schema_version": resolved_config["run"]["schema_version"],
            "stage": stage,
            "config": resolved_config,
            "code": __version__,
        },
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def resolve_cache_dir(flag_value: str | None) -> Path | None:
    """Caching is enabled by the --cache flag or the environment override."""
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(ENV_CACHE_DIR)
    return Path(env) if env else None


class ResultCache:
    def __init__(self, directory: Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _paths(self, rid: str):
        return self.dir / f"{rid}.csv", self.dir / f"{rid}.csv.sha256"

    def lookup(self, rid: str) -> bytes | None:
        data_path, sum_path = self._paths(rid)
        if not data_path.exists() or not sum_path.exists():
            return None
        data = data_path.read_bytes()
        expect = sum_path.read_text().strip()
        actual = hashlib.sha256(data).hexdigest()
        if actual != expect:
            warnings.warn(CacheCorruption(
                f"checksum mismatch for {data_path.name}; recomputing"))
            log.warning("cache entry %s corrupt, treating as miss", rid)
            return None
        return data

    def store(self, rid: str, data: bytes):
        data_path, sum_path = self._paths(rid)
        digest = hashlib.sha256(data).hexdigest()
        for target, payload in ((data_path, data), (sum_path, (digest + "\n").encode())):
            fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{rid}.")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(payload)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
