"""
Test the experiment task lifecycle and the sequential queue.
"""
import json
import sys
import tempfile
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from PyQt5.QtCore import QCoreApplication

from config.settings import RunConfig
from core.queue_manager import ExperimentQueue
from core.spectral import build_torus
from main import build_parser, build_tasks
from models.enums import TaskStatus
from models.experiment_task import ExperimentTask
from models.fields import HermitianField
from utils.checkpoint import save_checkpoint

app = QCoreApplication.instance() or QCoreApplication([])


def _config(command: str, directory: str, **blocks) -> RunConfig:
    data = {'command': command, 'geometry': {'grid': 8}, 'outputs': {'directory': directory}}
    for name, block in blocks.items():
        data.setdefault(name, {}).update(block)
    return RunConfig(data)


def test_task_lifecycle():
    task = ExperimentTask(RunConfig(), resume='state.ckpt')
    assert isinstance(task.resume, Path)
    assert task.name == 'continue-eps'
    task.set_processing()
    assert task.is_processing and not task.is_complete
    task.set_error("boom", 2)
    assert task.is_complete and task.exit_code == 2
    task.reset()
    assert task.status == TaskStatus.PENDING and task.exit_code == 0
    task.set_done({'ok': True})
    assert task.progress == 100.0 and task.result == {'ok': True}


def test_queue_runs_tasks_in_order():
    with tempfile.TemporaryDirectory() as tmp:
        queue = ExperimentQueue()
        started, records = [], []
        queue.task_started.connect(lambda task: started.append(task.name))
        queue.task_record.connect(lambda task, record: records.append(record))
        tasks = [
            ExperimentTask(_config('classes', tmp)),
            ExperimentTask(_config('continue-eps', tmp, solver={'schedule': [1.0, 0.5]})),
        ]
        queue.add_tasks(tasks)
        queue.start()

        assert started == ['classes', 'continue-eps']
        assert all(task.status == TaskStatus.DONE for task in tasks)
        assert queue.exit_code == 0
        assert queue.total_progress == 100.0
        assert records

        summary = json.loads((Path(tmp) / 'classes.json').read_text())
        assert summary['command'] == 'classes'
        assert summary['converged'] is True
        assert abs(summary['result']['characteristic']['degree']) < 1e-12
        names = sorted(p.name for p in tasks[1].outputs)
        assert names == ['continue-eps.ckpt', 'continue-eps.csv', 'continue-eps.json']


def test_failures_set_exit_codes():
    with tempfile.TemporaryDirectory() as tmp:
        queue = ExperimentQueue()
        failures = []
        queue.task_failed.connect(lambda task, error, code: failures.append(code))
        invalid = ExperimentTask(_config('bogomolov', tmp))
        missing = ExperimentTask(_config('solve-he', tmp), resume=Path(tmp) / 'absent.ckpt')
        fine = ExperimentTask(_config('classes', tmp))
        queue.add_tasks([invalid, missing, fine])
        queue.start()

        assert invalid.status == TaskStatus.ERROR and invalid.exit_code == 3
        assert 'geometry.n' in invalid.error_message
        assert missing.status == TaskStatus.ERROR and missing.exit_code == 3
        assert fine.status == TaskStatus.DONE
        assert failures == [3, 3]
        assert queue.exit_code == 3
        assert queue.failed_count == 2 and queue.completed_count == 1


def test_retry_after_the_checkpoint_appears():
    with tempfile.TemporaryDirectory() as tmp:
        start = Path(tmp) / 'start.ckpt'
        task = ExperimentTask(_config('solve-he', tmp), resume=start)
        queue = ExperimentQueue()
        queue.add_task(task)
        queue.start()
        assert task.status == TaskStatus.ERROR and task.exit_code == 3

        geometry = build_torus(1, 1.0, 8)
        save_checkpoint(start, geometry, 2, {'metric': HermitianField.identity(geometry, 2)})
        queue.retry_task(task)
        assert task.status == TaskStatus.DONE, task.error_message
        assert queue.exit_code == 0 and not queue.is_running

        queue.retry_task(task)
        assert task.status == TaskStatus.DONE


def test_command_line_builds_tasks():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / 'run.json'
        path.write_text(json.dumps({'version': 1, 'geometry': {'grid': 8}}), encoding='utf-8')
        args = build_parser().parse_args(['probe', '--config', str(path), '--config', str(path),
                                          '--out', tmp, '--tol', '1e-7'])
        tasks = build_tasks(args)
    assert len(tasks) == 2
    assert all(task.config.command.value == 'probe' for task in tasks)
    assert tasks[0].config.solver.tol == 1e-7
    assert tasks[0].config.outputs.directory == tmp


if __name__ == "__main__":
    tests = [test_task_lifecycle, test_queue_runs_tasks_in_order, test_failures_set_exit_codes,
             test_retry_after_the_checkpoint_appears, test_command_line_builds_tasks]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
