"""Experiment worker emitting Qt signals."""
import logging
import traceback
from pathlib import Path

from PyQt5.QtCore import QObject, pyqtSignal

from core.commands import run_command
from core.errors import CancelledError, ConvergenceError, LabError
from models.enums import Command
from models.experiment_task import ExperimentTask

logger = logging.getLogger(__name__)


class ExperimentWorker(QObject):
    """
    Worker class running one experiment subcommand.

    Runs synchronously in the calling thread and re-emits solver progress
    records, log lines and the final outcome as signals.
    """

    # Signals
    progress_updated = pyqtSignal(float)  # Progress percentage (0-100)
    progress_record = pyqtSignal(dict)  # Structured solver record
    log_message = pyqtSignal(str)
    task_completed = pyqtSignal(dict)  # Final summary
    task_failed = pyqtSignal(str, int)  # Error message, exit code

    def __init__(self, task: ExperimentTask, parent=None):
        """
        Initialize worker.

        Args:
            task: ExperimentTask to run
            parent: Parent QObject
        """
        super().__init__(parent)
        self.task = task
        self.is_running = False
        self._stop_requested = False

    def start(self):
        """Run the task's subcommand to completion."""
        config = self.task.config
        if self.task.tol is not None:
            config.set('solver.tol', self.task.tol)
        is_valid, error_msg = config.validate()
        if not is_valid:
            self.task_failed.emit(error_msg, 3)
            return

        self.is_running = True
        self._stop_requested = False
        try:
            summary, written = run_command(config, self.task.resume, self._on_record, self.log_message.emit)
        except LabError as e:
            self.is_running = False
            if isinstance(e, ConvergenceError) and isinstance(e.partial, list):
                self.task.outputs = [Path(p) for p in e.partial]
            logger.debug("task %s failed: %s", self.task.name, e)
            self.task_failed.emit(str(e), e.exit_code)
            return
        except Exception as e:
            self.is_running = False
            error_msg = f"{type(e).__name__}: {e}"
            logger.error("task %s crashed\n%s", self.task.name, traceback.format_exc())
            self.task_failed.emit(error_msg, 3 if isinstance(e, ValueError) else 1)
            return

        self.is_running = False
        self.task.outputs = list(written)
        self.progress_updated.emit(100.0)
        self.task_completed.emit(summary)

    def stop(self):
        """Request the running solver to stop at its next progress record."""
        if self.is_running:
            self._stop_requested = True

    def _on_record(self, record: dict):
        if self._stop_requested:
            raise CancelledError("Cancelled by user")
        self.task.records += 1
        self.progress_record.emit(record)
        progress = self._estimate_progress(record)
        if progress is not None:
            self.progress_updated.emit(progress)

    def _estimate_progress(self, record: dict):
        """
        Map a solver record to a progress percentage.

        Args:
            record: Structured solver record
        """
        solver = self.task.config.solver
        stage = record.get('stage')
        if stage == 'flow' and self.task.config.command == Command.FLOW and solver.T > 0:
            return min(100.0, 100.0 * record.get('t', 0.0) / solver.T)
        if stage in ('continuation', 'approx'):
            total = len(solver.epsilons)
            return min(100.0, 100.0 * record.get('step', 0) / total) if total else None
        return None
