# cli/manifest.py
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from numcore.fileio import atomic_write_json, canonical_json_bytes, sha256_file, sha256_hex
from cli.settings import RUN_LOG

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
WORKBOOK = "report.xlsx"

# not byte-reproducible: timestamps in the log, zip metadata in the workbook
UNCHECKED = {MANIFEST, RUN_LOG, WORKBOOK}


def artifact_checksums(out_dir: Path) -> Dict[str, str]:
    """sha256 of every file under out_dir (posix relative paths), sorted."""
    out_dir = Path(out_dir)
    sums = {}
    for path in sorted(p for p in out_dir.rglob("*") if p.is_file()):
        if path.name in UNCHECKED or path.name.startswith("."):
            continue
        sums[path.relative_to(out_dir).as_posix()] = sha256_file(path)
    return sums


def write_manifest(out_dir: Path, command: str, config: Dict[str, Any],
                   seed: Optional[int] = None, extra: Optional[Dict[str, Any]] = None) -> Path:
    manifest = {
        "command": command,
        "config_hash": sha256_hex(canonical_json_bytes(config)),
        "config": config,
        "seed": seed,
        "artifacts": artifact_checksums(out_dir),
    }
    if extra:
        manifest["extra"] = extra
    path = atomic_write_json(Path(out_dir) / MANIFEST, manifest)
    logger.info("wrote %s (%d artifacts)", path, len(manifest["artifacts"]))
    return path
