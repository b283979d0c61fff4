"""Experiment task data model."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, TYPE_CHECKING

from .enums import TaskStatus

if TYPE_CHECKING:
    from config.settings import RunConfig


@dataclass(eq=False)
class ExperimentTask:
    """
    Represents a single queued experiment run.

    Attributes:
        config: Validated run document
        resume: Checkpoint whose metric seeds the run (None = preset metric)
        tol: Tolerance override from the command line
        status: Current processing status
        progress: Progress percentage (0-100)
        error_message: Error description if status is ERROR
        exit_code: Process exit code implied by the outcome
        result: Final structured report
        outputs: Files written by the run
        records: Number of progress records received
    """

    config: 'RunConfig'
    resume: Optional[Path] = None
    tol: Optional[float] = None
    status: TaskStatus = TaskStatus.PENDING
    progress: float = 0.0
    error_message: str = ""
    exit_code: int = 0
    result: Dict[str, Any] = field(default_factory=dict)
    outputs: List[Path] = field(default_factory=list)
    records: int = 0

    def __post_init__(self):
        """Convert string paths to Path objects."""
        if isinstance(self.resume, str):
            self.resume = Path(self.resume)

    @property
    def name(self) -> str:
        """Report file stem of the run."""
        return self.config.name

    @property
    def is_complete(self) -> bool:
        """Check if task is complete (done or error)."""
        return self.status in (TaskStatus.DONE, TaskStatus.ERROR, TaskStatus.CANCELLED)

    @property
    def is_processing(self) -> bool:
        return self.status == TaskStatus.PROCESSING

    def reset(self):
        """Reset task to pending state."""
        self.status = TaskStatus.PENDING
        self.progress = 0.0
        self.error_message = ""
        self.exit_code = 0
        self.result = {}
        self.outputs = []
        self.records = 0

    def set_error(self, message: str, exit_code: int = 1):
        """Set task to error state with message."""
        self.status = TaskStatus.ERROR
        self.error_message = message
        self.exit_code = exit_code
        self.progress = 0.0

    def set_processing(self):
        self.status = TaskStatus.PROCESSING
        self.progress = 0.0
        self.error_message = ""

    def set_done(self, result: Optional[Dict[str, Any]] = None):
        """Set task to done state with its final report."""
        self.status = TaskStatus.DONE
        self.progress = 100.0
        self.error_message = ""
        self.exit_code = 0
        if result is not None:
            self.result = result

    def set_cancelled(self):
        self.status = TaskStatus.CANCELLED
        self.error_message = "Cancelled by user"
