"""Experiment queue for sequential batch runs."""
import logging
from typing import List, Optional

from PyQt5.QtCore import QObject, pyqtSignal

from core.worker import ExperimentWorker
from models.enums import TaskStatus
from models.experiment_task import ExperimentTask

logger = logging.getLogger(__name__)


class ExperimentQueue(QObject):
    """
    Manages a queue of experiment runs.

    Tasks run one after another; a failed task does not stop the queue.
    """

    # Signals
    queue_started = pyqtSignal()
    queue_completed = pyqtSignal()
    task_started = pyqtSignal(object)  # ExperimentTask
    task_progress = pyqtSignal(object, float)  # task, progress
    task_record = pyqtSignal(object, dict)  # task, solver record
    task_log = pyqtSignal(object, str)
    task_completed = pyqtSignal(object)
    task_failed = pyqtSignal(object, str, int)  # task, error message, exit code

    def __init__(self, parent=None):
        """
        Initialize the queue.

        Args:
            parent: Parent QObject
        """
        super().__init__(parent)
        self.tasks: List[ExperimentTask] = []
        self.current_worker: Optional[ExperimentWorker] = None
        self.current_task_index: int = -1
        self.is_running = False

    def add_task(self, task: ExperimentTask):
        self.tasks.append(task)

    def add_tasks(self, tasks: List[ExperimentTask]):
        self.tasks.extend(tasks)

    def start(self):
        """Run every pending task in order."""
        if self.is_running or not self.tasks:
            return

        self.is_running = True
        self.queue_started.emit()
        self.current_task_index = -1
        self._process_next_task()

    def stop(self):
        """Stop processing; the running task is cancelled at its next record."""
        self.is_running = False
        if self.current_worker:
            self.current_worker.stop()

    def _process_next_task(self):
        # Tasks run synchronously, so the queue is drained in a loop.
        while self.is_running:
            next_task = None
            for i, task in enumerate(self.tasks):
                if task.status == TaskStatus.PENDING:
                    next_task = task
                    self.current_task_index = i
                    break

            if next_task is None:
                self.is_running = False
                self.queue_completed.emit()
                return
            self._start_task(next_task)

    def _start_task(self, task: ExperimentTask):
        """
        Run one task.

        Args:
            task: ExperimentTask to run
        """
        task.set_processing()
        self.task_started.emit(task)
        logger.info("running %s (%s)", task.name, task.config.command.value)

        self.current_worker = ExperimentWorker(task)
        self.current_worker.progress_updated.connect(lambda progress: self._on_task_progress(task, progress))
        self.current_worker.progress_record.connect(lambda record: self.task_record.emit(task, record))
        self.current_worker.log_message.connect(lambda message: self.task_log.emit(task, message))
        self.current_worker.task_completed.connect(lambda summary: self._on_task_completed(task, summary))
        self.current_worker.task_failed.connect(lambda error, code: self._on_task_failed(task, error, code))
        self.current_worker.start()

        self.current_worker.deleteLater()
        self.current_worker = None

    def _on_task_progress(self, task: ExperimentTask, progress: float):
        task.progress = progress
        self.task_progress.emit(task, progress)

    def _on_task_completed(self, task: ExperimentTask, summary: dict):
        task.set_done(summary)
        self.task_completed.emit(task)

    def _on_task_failed(self, task: ExperimentTask, error_message: str, exit_code: int):
        if not self.is_running and error_message == "Cancelled by user":
            task.set_cancelled()
        else:
            task.set_error(error_message, exit_code)
        self.task_failed.emit(task, error_message, exit_code)

    def retry_task(self, task: ExperimentTask):
        """
        Retry a failed task.

        Args:
            task: ExperimentTask to retry
        """
        if task in self.tasks and task.status == TaskStatus.ERROR:
            task.reset()
            if not self.is_running:
                self.start()

    @property
    def pending_count(self) -> int:
        return sum(1 for task in self.tasks if task.status == TaskStatus.PENDING)

    @property
    def processing_count(self) -> int:
        return sum(1 for task in self.tasks if task.status == TaskStatus.PROCESSING)

    @property
    def completed_count(self) -> int:
        return sum(1 for task in self.tasks if task.status == TaskStatus.DONE)

    @property
    def failed_count(self) -> int:
        return sum(1 for task in self.tasks if task.status == TaskStatus.ERROR)

    @property
    def exit_code(self) -> int:
        """Largest exit code over finished tasks (0 when all succeeded)."""
        return max((task.exit_code for task in self.tasks if task.status == TaskStatus.ERROR), default=0)

    @property
    def total_progress(self) -> float:
        """
        Calculate overall progress percentage.

        Returns:
            Progress percentage (0-100)
        """
        if not self.tasks:
            return 0.0

        total = 0.0
        for task in self.tasks:
            if task.status == TaskStatus.DONE:
                total += 100.0
            elif task.status == TaskStatus.PROCESSING:
                total += task.progress
        return total / len(self.tasks)
