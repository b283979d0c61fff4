"""
Higgs Torus Lab - Main Entry Point

Command-line runner for numerical experiments with Higgs bundles and projectively
flat bundles on flat complex tori. Each subcommand runs one or more run documents
through the experiment queue and writes CSV/JSON reports and checkpoints.

Exit codes: 0 success, 2 non-convergence, 3 invalid input.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from PyQt5.QtCore import QCoreApplication

from config.settings import RunConfig, load_config
from core.errors import ConfigError, LabError
from core.queue_manager import ExperimentQueue
from models.enums import Command
from models.experiment_task import ExperimentTask
from utils.validators import validate_file_path

logger = logging.getLogger(__name__)

HELP = {
    Command.SOLVE_HE: "Hermitian-Einstein metric of a Higgs bundle",
    Command.CONTINUE_EPS: "continuation of the perturbed equation along an epsilon schedule",
    Command.FLOW: "Hermitian-Yang-Mills heat flow",
    Command.HARMONIC: "harmonic metric of a projectively flat bundle",
    Command.CLASSES: "Chern numbers or odd and Bott-Chern classes",
    Command.BOGOMOLOV: "Bogomolov-Gieseker identity on a complex surface",
    Command.PROBE: "heuristic semistability probe",
    Command.ROUNDTRIP: "round trip through both directions of the correspondence",
    Command.EXTENSION: "harmonic representative of an extension class",
    Command.H0CHECK: "parallel versus holomorphic sections",
    Command.APPROX: "flowed approximate projective flatness along epsilon",
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per subcommand."""
    parser = argparse.ArgumentParser(prog='higgs_torus_lab', description=__doc__.strip().splitlines()[0])
    parser.add_argument('-v', '--verbose', action='store_true', help="debug logging")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for command in Command:
        sub = subparsers.add_parser(command.value, help=HELP[command])
        sub.add_argument('--config', action='append', type=Path, default=[],
                         help="run document (repeat to queue several runs)")
        sub.add_argument('--out', type=Path, help="output directory (overrides outputs.directory)")
        sub.add_argument('--tol', type=float, help="solver tolerance (overrides solver.tol)")
        sub.add_argument('--resume', type=Path, help="checkpoint whose metric starts the run")
    return parser


def build_tasks(args: argparse.Namespace) -> List[ExperimentTask]:
    """
    Turn parsed arguments into queued tasks.

    Raises:
        ConfigError: Unreadable or invalid run document
    """
    overrides = {'command': args.command}
    if args.out is not None:
        overrides['outputs.directory'] = str(args.out)
    if args.tol is not None:
        if args.tol <= 0:
            raise ConfigError("must be positive", '--tol')
        overrides['solver.tol'] = args.tol
    if args.resume is not None and not validate_file_path(args.resume):
        raise ConfigError(f"checkpoint not found: {args.resume}", '--resume')

    if not args.config:
        config = RunConfig()
        for key, value in overrides.items():
            config.set(key, value)
        config.check()
        configs = [config]
    else:
        configs = [load_config(path, overrides) for path in args.config]
    return [ExperimentTask(config, resume=args.resume, tol=args.tol) for config in configs]


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        tasks = build_tasks(args)
    except LabError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return e.exit_code

    app = QCoreApplication.instance() or QCoreApplication(sys.argv[:1])
    app.setApplicationName("Higgs Torus Lab")

    queue = ExperimentQueue()
    queue.task_log.connect(lambda task, message: print(message))
    queue.task_completed.connect(
        lambda task: print(f"{task.name}: done ({len(task.outputs)} files in {task.config.outputs.directory})"))
    queue.task_failed.connect(
        lambda task, error, code: print(f"ERROR: {task.name}: {error}", file=sys.stderr))
    queue.add_tasks(tasks)
    queue.start()
    return queue.exit_code


if __name__ == '__main__':
    sys.exit(main())
