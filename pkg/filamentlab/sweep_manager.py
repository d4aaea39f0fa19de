import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Callable, Dict, Hashable, Optional

from config import config

logger = logging.getLogger(__name__)


class SweepManager:
    """
    Runs independent simulations (one per sweep entry) on a bounded worker pool.
    Each entry moves through pending -> processing -> completed | failed; results
    are handed back after every worker has finished.
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max(1, int(max_workers or config.MAX_WORKERS))
        self.results: Dict[Hashable, Any] = {}
        self.errors: Dict[Hashable, Exception] = {}
        self.status: Dict[Hashable, str] = {}
        self._lock = threading.Lock()
        logger.info(f"🚀 SweepManager initialized with {self.max_workers} workers")

    def _set_status(self, key: Hashable, value: str):
        with self._lock:
            self.status[key] = value

    def _run_entry(self, key: Hashable, task: Callable[[], Any]) -> Any:
        self._set_status(key, "processing")
        logger.info(f"🔄 Sweep entry {key} started")
        try:
            result = task()
        except Exception as e:
            logger.error(f"❌ Sweep entry {key} failed: {str(e)}")
            with self._lock:
                self.status[key] = "failed"
                self.errors[key] = e
            raise
        with self._lock:
            self.results[key] = result
            self.status[key] = "completed"
        logger.info(f"✅ Sweep entry {key} completed")
        return result

    def run(self, tasks: Dict[Hashable, Callable[[], Any]]) -> Dict[Hashable, Any]:
        """
        Execute every task and wait for all of them.

        Args:
            tasks: key -> zero-argument callable

        Returns:
            key -> result, in the order of `tasks`

        Raises:
            the first failure (by task order) once all workers are done
        """
        for key in tasks:
            self._set_status(key, "pending")

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = {executor.submit(self._run_entry, key, task): key for key, task in tasks.items()}
            for future in as_completed(futures):
                future.exception()

        stats = self.get_stats()
        logger.info(f"📊 Sweep finished: {stats}")
        for key in tasks:
            if key in self.errors:
                raise self.errors[key]
        return {key: self.results[key] for key in tasks}

    def get_status(self, key: Hashable) -> str:
        return self.status.get(key, "not_started")

    def get_stats(self) -> Dict[str, int]:
        statuses = list(self.status.values())
        return {
            "total": len(statuses),
            "completed": statuses.count("completed"),
            "processing": statuses.count("processing"),
            "pending": statuses.count("pending"),
            "failed": statuses.count("failed"),
        }
