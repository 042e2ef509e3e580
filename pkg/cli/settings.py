# cli/settings.py
import logging
import os
from pathlib import Path

from dotenv import load_dotenv

from numcore.errors import ConfigError

load_dotenv()


# ============================================================
# Environment
# ============================================================
DEFAULT_OUT = "runs"
DEFAULT_LOG_LEVEL = "INFO"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
RUN_LOG = "run.log"


def output_root() -> Path:
    return Path(os.getenv("LOOKUP_LAB_OUT") or DEFAULT_OUT)


def workers() -> int:
    raw = os.getenv("LOOKUP_LAB_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"LOOKUP_LAB_WORKERS must be an integer, got {raw!r}") from None
    if n == 0:
        raise ConfigError("LOOKUP_LAB_WORKERS must not be 0")
    return n


def log_level() -> str:
    return (os.getenv("LOOKUP_LAB_LOG_LEVEL") or DEFAULT_LOG_LEVEL).upper()


# ============================================================
# Logging
# ============================================================
def configure_logging(level: str | None = None) -> None:
    level = (level or log_level()).upper()
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigError(f"unknown log level {level!r}")
    logging.basicConfig(level=level, format=LOG_FORMAT)


def attach_run_log(out_dir: Path) -> logging.Handler:
    """Mirror the root logger into <out_dir>/run.log. Returns the handler for detaching."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / RUN_LOG, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    logging.getLogger().removeHandler(handler)
    handler.close()
