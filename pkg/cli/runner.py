# cli/runner.py
"""
Independent jobs (one per seed or per ablation cell) run through joblib.

Each job owns its model, its Rng and its output directory. A numerical
failure inside a job is recorded and does not stop the others.
"""
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

from joblib import Parallel, delayed

from numcore.errors import NumericalError

logger = logging.getLogger(__name__)


@dataclass
class JobOutcome:
    key: str
    status: str = "ok"
    value: Any = None
    reason: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> Dict[str, Any]:
        return {"key": self.key, "status": self.status, "reason": self.reason}


def _guarded(key: str, fn: Callable, kwargs: Dict[str, Any]) -> JobOutcome:
    try:
        return JobOutcome(key, value=fn(**kwargs))
    except NumericalError as e:
        logger.warning("job %s diverged: %s", key, e)
        return JobOutcome(key, status="diverged", reason=str(e))


def run_jobs(fn: Callable, jobs: Sequence[Dict[str, Any]], keys: Sequence[str], n_jobs: int = 1) -> List[JobOutcome]:
    """Call fn(**kwargs) once per job; results come back in job order."""
    if len(jobs) != len(keys):
        raise ValueError("one key per job")
    logger.info("running %d job(s) with n_jobs=%d", len(jobs), n_jobs)
    return list(Parallel(n_jobs=n_jobs)(delayed(_guarded)(k, fn, kw) for k, kw in zip(keys, jobs)))
