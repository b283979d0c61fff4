"""Run configuration management."""
import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.errors import ConfigError
from core.newton_krylov import NewtonOptions
from core.perturbed import default_schedule
from core.spectral import build_torus
from models.enums import Command, Integrator, ProblemKind
from models.geometry import TorusGeometry
from utils.presets import PRESETS
from utils.validators import validate_grid, validate_metric, validate_rank, validate_schedule

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1

# blocks whose content is free-form
OPEN_KEYS = {'bundle.params', 'bundle.extension'}

HIGGS_COMMANDS = {Command.SOLVE_HE, Command.FLOW, Command.PROBE, Command.APPROX,
                  Command.BOGOMOLOV, Command.EXTENSION, Command.H0CHECK}
FLAT_COMMANDS = {Command.HARMONIC}


@dataclass
class GeometrySettings:
    """
    Torus block.

    Attributes:
        n: Complex dimension (1 or 2)
        periods: Period per complex coordinate
        grid: Grid size per complex coordinate
        metric: Constant metric g_{αβ̄} as nested lists, identity when None
        dealias: Dealias form products
    """

    n: int = 1
    periods: List[float] = field(default_factory=lambda: [1.0])
    grid: List[int] = field(default_factory=lambda: [16])
    metric: Optional[List[List[float]]] = None
    dealias: bool = True

    def to_dict(self) -> dict:
        return {'n': self.n, 'periods': list(self.periods), 'grid': list(self.grid),
                'metric': self.metric, 'dealias': self.dealias}

    @classmethod
    def from_dict(cls, data: dict) -> 'GeometrySettings':
        n = int(data.get('n', 1))
        return cls(
            n=n,
            periods=list(np.broadcast_to(data.get('periods', 1.0), (n,)).astype(float)),
            grid=[int(N) for N in np.broadcast_to(data.get('grid', 16), (n,))],
            metric=data.get('metric'),
            dealias=bool(data.get('dealias', True)),
        )

    def metric_matrix(self) -> np.ndarray:
        if self.metric is None:
            return np.eye(self.n, dtype=complex)
        return np.asarray(self.metric, dtype=complex)

    def validate(self) -> Tuple[bool, str]:
        if self.n not in (1, 2):
            return False, f"n must be 1 or 2, got {self.n}"
        is_valid, error_msg = validate_grid(self.grid, self.periods)
        if not is_valid:
            return False, error_msg
        return validate_metric(self.metric_matrix(), self.n)

    def build(self) -> TorusGeometry:
        return build_torus(self.n, self.periods, self.grid, self.metric_matrix(), self.dealias)


@dataclass
class BundleSettings:
    """
    Bundle block.

    Attributes:
        kind: 'higgs' or 'projflat'
        rank: Rank r
        preset: Initial data preset
        params: Preset parameters
        metric: 'identity' or 'preset' (metric supplied by the preset when it has one)
        extension: Extension data for the extension command (constant, seed, amplitude)
    """

    kind: ProblemKind = ProblemKind.HIGGS
    rank: int = 2
    preset: str = 'trivial'
    params: Dict[str, Any] = field(default_factory=dict)
    metric: str = 'preset'
    extension: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'rank': self.rank, 'preset': self.preset,
                'params': dict(self.params), 'metric': self.metric, 'extension': dict(self.extension)}

    @classmethod
    def from_dict(cls, data: dict) -> 'BundleSettings':
        try:
            kind = ProblemKind(data.get('kind', ProblemKind.HIGGS.value))
        except ValueError as e:
            raise ConfigError(f"unknown bundle kind '{data.get('kind')}'", 'bundle.kind') from e
        return cls(
            kind=kind,
            rank=data.get('rank', 2),
            preset=data.get('preset', 'trivial'),
            params=dict(data.get('params', {})),
            metric=data.get('metric', 'preset'),
            extension=dict(data.get('extension', {})),
        )

    def validate(self) -> Tuple[bool, str]:
        if not validate_rank(self.rank):
            return False, f"rank must be a positive integer, got {self.rank}"
        if self.preset not in PRESETS:
            return False, f"unknown preset '{self.preset}'"
        if self.metric not in ('identity', 'preset'):
            return False, "metric must be 'identity' or 'preset'"
        return True, ""


@dataclass
class SolverSettings:
    """
    Solver block.

    Attributes:
        schedule: Strictly decreasing ε values, 2^-k for k = 0..10 when None
        tol: Newton tolerance
        max_iter: Newton iteration limit
        eps_min: Smallest ε before the ε = 0 polish of metric searches
        dt: Flow time step
        T: Flow final time
        cfl: CFL number of the explicit integrator
        integrator: 'exponential' or 'explicit'
        record_every: Flow recording cadence
        j: Index of the odd class v_{2j+1}
        t0: Flow time of the approximate-flatness experiment
        check_grid: Second resolution for the semistability check
        kmax: Fourier truncation of the section kernels
    """

    schedule: Optional[List[float]] = None
    tol: float = 1e-9
    max_iter: int = 30
    eps_min: float = 1e-4
    dt: float = 1e-2
    T: float = 2.0
    cfl: float = 0.2
    integrator: Integrator = Integrator.EXPONENTIAL
    record_every: int = 1
    j: int = 0
    t0: float = 2.0
    check_grid: Optional[int] = None
    kmax: Optional[int] = None

    def to_dict(self) -> dict:
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data['integrator'] = self.integrator.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'SolverSettings':
        defaults = cls()
        values = {k: data.get(k, getattr(defaults, k)) for k in cls.__dataclass_fields__}
        try:
            values['integrator'] = Integrator(values['integrator'])
        except ValueError as e:
            raise ConfigError(f"unknown integrator '{values['integrator']}'", 'solver.integrator') from e
        return cls(**values)

    @property
    def epsilons(self) -> List[float]:
        return list(self.schedule) if self.schedule is not None else default_schedule()

    def newton_options(self) -> NewtonOptions:
        return NewtonOptions(tol=self.tol, max_iter=self.max_iter)

    def validate(self) -> Tuple[bool, str]:
        is_valid, error_msg = validate_schedule(self.epsilons)
        if not is_valid:
            return False, error_msg
        if self.tol <= 0:
            return False, "tol must be positive"
        if self.max_iter < 1:
            return False, "max_iter must be at least 1"
        if self.dt <= 0 or self.T < 0:
            return False, "dt must be positive and T non-negative"
        if self.cfl <= 0:
            return False, "cfl must be positive"
        if self.j < 0:
            return False, "j must be non-negative"
        if not 0.0 < self.eps_min <= 1.0:
            return False, "eps_min must lie in (0, 1]"
        return True, ""


@dataclass
class OutputSettings:
    """
    Outputs block.

    Attributes:
        directory: Output directory
        name: File stem (the command name when None)
        checkpoint_every: Checkpoint cadence in recorded steps, 0 for final only
        csv: Write per-step CSV
        dat: Write gnuplot columns
    """

    directory: str = 'results'
    name: Optional[str] = None
    checkpoint_every: int = 0
    csv: bool = True
    dat: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: dict) -> 'OutputSettings':
        defaults = cls()
        return cls(**{k: data.get(k, getattr(defaults, k)) for k in cls.__dataclass_fields__})

    def validate(self) -> Tuple[bool, str]:
        if self.checkpoint_every < 0:
            return False, "checkpoint_every must be non-negative"
        return True, ""


class RunConfig:
    """
    Run document with JSON persistence.

    Holds the raw document merged over DEFAULT_CONFIG and exposes each block as
    a settings dataclass.
    """

    DEFAULT_CONFIG = {
        'version': CONFIG_VERSION,
        'command': Command.CONTINUE_EPS.value,
        'geometry': GeometrySettings().to_dict(),
        'bundle': BundleSettings().to_dict(),
        'solver': SolverSettings().to_dict(),
        'outputs': OutputSettings().to_dict(),
    }

    def __init__(self, data: Optional[Dict[str, Any]] = None, config_path: Optional[Path] = None):
        """
        Initialize a run configuration.

        Args:
            data: Parsed document (defaults only when None)
            config_path: File the document came from
        """
        self.config_path = Path(config_path) if config_path else None
        self.config: Dict[str, Any] = copy.deepcopy(self.DEFAULT_CONFIG)
        if data:
            check_keys(data, self.DEFAULT_CONFIG)
            for key, value in data.items():
                if isinstance(value, dict) and isinstance(self.config.get(key), dict):
                    self.config[key].update(value)
                else:
                    self.config[key] = value

    def save(self, path: Optional[Path] = None):
        """Save the document to file."""
        path = Path(path) if path else self.config_path
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=2)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a value by dotted key, e.g. ``solver.tol``.

        Args:
            key: Dotted key
            default: Value returned when the key is absent
        """
        node: Any = self.config
        for part in key.split('.'):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any):
        """Set a value by dotted key."""
        parts = key.split('.')
        node = self.config
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    @property
    def command(self) -> Command:
        try:
            return Command(self.get('command'))
        except ValueError as e:
            raise ConfigError(f"unknown command '{self.get('command')}'", 'command') from e

    @property
    def geometry(self) -> GeometrySettings:
        return GeometrySettings.from_dict(self.config['geometry'])

    @property
    def bundle(self) -> BundleSettings:
        return BundleSettings.from_dict(self.config['bundle'])

    @property
    def solver(self) -> SolverSettings:
        return SolverSettings.from_dict(self.config['solver'])

    @property
    def outputs(self) -> OutputSettings:
        return OutputSettings.from_dict(self.config['outputs'])

    @property
    def name(self) -> str:
        return self.outputs.name or self.command.value

    def validate(self) -> Tuple[bool, str]:
        """
        Validate every block and their consistency.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if self.get('version') != CONFIG_VERSION:
            return False, f"version: unsupported config version {self.get('version')}, expected {CONFIG_VERSION}"
        command = self.command
        blocks = (('geometry', self.geometry), ('bundle', self.bundle),
                  ('solver', self.solver), ('outputs', self.outputs))
        for name, block in blocks:
            is_valid, error_msg = block.validate()
            if not is_valid:
                return False, f"{name}: {error_msg}"

        geometry, bundle = self.geometry, self.bundle
        if command == Command.BOGOMOLOV and geometry.n != 2:
            return False, "geometry.n: the bogomolov command needs n = 2"
        if command in HIGGS_COMMANDS and bundle.kind != ProblemKind.HIGGS:
            return False, f"bundle.kind: the {command.value} command needs a Higgs bundle"
        if command in FLAT_COMMANDS and bundle.kind != ProblemKind.PROJFLAT:
            return False, f"bundle.kind: the {command.value} command needs a projectively flat bundle"
        if bundle.preset == 'atiyah' and bundle.rank != 2:
            return False, "bundle.rank: the atiyah preset has rank 2"
        check_grid = self.solver.check_grid
        if check_grid is not None and (check_grid < 8 or check_grid % 2):
            return False, "solver.check_grid: must be an even grid size of at least 8"
        return True, ""

    def check(self):
        """
        Validate and raise on the first problem.

        Raises:
            ConfigError: Carrying the dotted key of the offending entry
        """
        is_valid, error_msg = self.validate()
        if not is_valid:
            key, _, message = error_msg.partition(': ')
            raise ConfigError(message or error_msg, key if message else None)


def check_keys(data: Dict[str, Any], reference: Dict[str, Any], prefix: str = ''):
    """
    Reject keys absent from the reference document.

    Raises:
        ConfigError: Naming the first unknown key by its dotted path
    """
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in reference:
            raise ConfigError("unknown key", path)
        if path in OPEN_KEYS:
            continue
        if isinstance(value, dict) and isinstance(reference[key], dict):
            check_keys(value, reference[key], path + '.')


def load_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load, default-fill and validate a run document.

    Args:
        path: UTF-8 JSON file
        overrides: Dotted keys applied before validation (command-line flags)

    Returns:
        RunConfig

    Raises:
        ConfigError: Unreadable file, parse error, unknown key or invalid content
    """
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read config: {e}", str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}", str(path)) from e
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object", str(path))

    config = RunConfig(data, path)
    for key, value in (overrides or {}).items():
        config.set(key, value)
    config.check()
    logger.debug("loaded config %s (%s)", path, config.command.value)
    return config
