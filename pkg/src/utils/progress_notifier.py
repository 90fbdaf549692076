"""
Progress Notifier
Reports progress of long-running simulation stages (diagonalisation, per-p runs,
output writing) to an optional callback, falling back to the log.
"""

import logging
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, List, Optional


class ProgressStage(Enum):
    """Progress stages for notifications"""
    STARTING = "start"
    DIAGONALIZING = "diag"
    SIMULATING = "sim"
    ANALYZING = "analyze"
    WRITING = "write"
    COMPLETED = "done"
    WARNING = "warn"
    ERROR = "error"


@dataclass
class ProgressUpdate:
    stage: ProgressStage
    message: str
    detail: Optional[str] = None
    done: Optional[int] = None
    total: Optional[int] = None

    def format(self) -> str:
        text = f"[{self.stage.value}] {self.message}"
        if self.done is not None and self.total:
            text += f" ({self.done}/{self.total})"
        if self.detail:
            text += f" - {self.detail}"
        return text


class ProgressNotifier:
    """
    Collects progress updates and forwards them to a callback.

    Safe to call from worker threads; the callback itself runs under a lock.
    """

    def __init__(self, callback: Optional[Callable[[str], Any]] = None):
        self.callback = callback
        self.updates: List[ProgressUpdate] = []
        self._lock = threading.Lock()

    def notify(self, stage: ProgressStage, message: str, detail: Optional[str] = None,
               done: Optional[int] = None, total: Optional[int] = None) -> None:
        update = ProgressUpdate(stage, message, detail, done, total)
        with self._lock:
            self.updates.append(update)
            if self.callback is None:
                level = logging.WARNING if stage in (ProgressStage.WARNING, ProgressStage.ERROR) else logging.INFO
                logging.log(level, f"[PROGRESS] {update.format()}")
                return
            try:
                self.callback(update.format())
            except Exception as e:
                logging.error(f"[PROGRESS] Failed to send notification: {e}")


# Global instance for use across modules
_global_notifier: Optional[ProgressNotifier] = None


def get_progress_notifier() -> ProgressNotifier:
    """Get the global progress notifier instance."""
    global _global_notifier
    if _global_notifier is None:
        _global_notifier = ProgressNotifier()
    return _global_notifier
