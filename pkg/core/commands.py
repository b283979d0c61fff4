"""Runners for the experiment subcommands."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from config.settings import RunConfig
from core.chern_weil import bogomolov_residual, bott_chern_rep, chern_numbers, kamber_tondeur
from core.correspondence import (extension_flat_connection, h0_equality_check, harmonic_extension_rep,
                                 hom_operators, roundtrip_check)
from core.errors import CheckpointError, ConvergenceError, RankMismatchError
from core.experiments import approx_projflat_experiment, semistability_probe
from core.field_algebra import hom_action
from core.hym_flow import hym_flow, ymh_gauge_transport
from core.perturbed import (c0_bound_check, epsilon_continuation, harmonic_metric, hermitian_einstein_metric,
                            integral_identity_residual)
from core.spectral import random_smooth, spectral_d
from models.bundles import HiggsBundle, HomStructure, ProjFlatBundle
from models.enums import Command, ProblemKind
from models.fields import HermitianField, MatrixFormField
from models.geometry import TorusGeometry
from models.reports import plain
from utils.checkpoint import load_checkpoint, save_checkpoint
from utils.presets import PresetData, build_preset
from utils.report_writer import emit_report

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[Dict], None]
LogCallback = Callable[[str], None]
Structure = Union[HiggsBundle, ProjFlatBundle]

# pointwise acceptance never asks for more than the packed Newton norm can deliver
ACCEPT_FLOOR = 1e-8


@dataclass(eq=False)
class RunContext:
    """
    Everything a subcommand needs.

    Attributes:
        config: Validated run document
        geometry: Torus built from the geometry block
        data: Preset structure with seed and effective parameters
        metric: Starting metric (resumed, preset-supplied or identity)
        progress: Structured progress callable
        log: Human-readable message callable
    """

    config: RunConfig
    geometry: TorusGeometry
    data: PresetData
    metric: HermitianField
    progress: Optional[ProgressCallback] = None
    log: Optional[LogCallback] = None

    @property
    def structure(self) -> Structure:
        return self.data.structure

    @property
    def out_dir(self) -> Path:
        return Path(self.config.outputs.directory)

    def say(self, message: str):
        logger.info(message)
        if self.log:
            self.log(message)


@dataclass(eq=False)
class CommandResult:
    """
    Output of one subcommand before it is written.

    Attributes:
        summary: Final structured report
        rows: Per-step records
        kind: Column layout of the rows
        fields: Fields stored in the final checkpoint
        tables: Additional per-step tables keyed by file suffix, as (rows, kind)
        snapshots: Intermediate checkpoints as (label, metric)
        failure: Non-convergence message; the report is still written
    """

    summary: Dict[str, Any]
    rows: Optional[List[Dict[str, Any]]] = None
    kind: Optional[str] = None
    fields: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, Tuple[List[Dict[str, Any]], str]] = field(default_factory=dict)
    snapshots: List[Tuple[str, HermitianField]] = field(default_factory=list)
    failure: Optional[str] = None


def prepare(config: RunConfig, resume: Optional[Path] = None,
            progress: Optional[ProgressCallback] = None, log: Optional[LogCallback] = None) -> RunContext:
    """
    Build geometry, structure and starting metric of a run.

    Raises:
        ConfigError: Preset parameters do not fit the bundle block
        CheckpointError: Resume file unusable for this run
        PreconditionError: Preset data violate the structure equations
    """
    geometry = config.geometry.build()
    bundle = config.bundle
    data = build_preset(geometry, bundle.kind, bundle.rank, bundle.preset, bundle.params)

    if resume is not None:
        checkpoint = load_checkpoint(resume, geometry)
        metric = checkpoint.fields.get('metric')
        if not isinstance(metric, HermitianField):
            raise CheckpointError(f"checkpoint {resume} holds no metric")
        if metric.rank != data.structure.rank:
            raise CheckpointError(f"checkpoint metric has rank {metric.rank}, bundle rank is {data.structure.rank}")
    elif bundle.metric == 'preset' and data.metric is not None:
        metric = data.metric
    else:
        metric = HermitianField.identity(geometry, data.structure.rank)
    return RunContext(config, geometry, data, metric, progress, log)


def _structure_fields(structure: Structure) -> Dict[str, MatrixFormField]:
    if isinstance(structure, HiggsBundle):
        return {'a': structure.a, 'theta': structure.theta}
    return {'gamma': structure.gamma}


def _acceptance(ctx: RunContext) -> float:
    return max(ctx.config.solver.tol, ACCEPT_FLOOR)


def _snapshots(ctx: RunContext, labelled: List[Tuple[str, HermitianField]]) -> List[Tuple[str, HermitianField]]:
    every = ctx.config.outputs.checkpoint_every
    if every <= 0:
        return []
    return [item for index, item in enumerate(labelled, start=1) if index % every == 0]


# ----------------------------------------------------------------------------
# subcommands

def run_solve_he(ctx: RunContext) -> CommandResult:
    """Hermitian-Einstein metric of a Higgs bundle."""
    solver = ctx.config.solver
    result = hermitian_einstein_metric(ctx.structure, ctx.metric, _acceptance(ctx), solver.eps_min,
                                       solver.schedule, solver.newton_options(), ctx.progress)
    summary = result.to_dict()
    fields = {}
    if result.metric is not None:
        fields['metric'] = result.metric
        summary['characteristic'] = chern_numbers(ctx.structure, result.metric).to_dict()
    return CommandResult(summary, result.path.rows() if result.path else [], 'epsilon', fields,
                         failure=None if result.converged else result.message)


def run_continue_eps(ctx: RunContext) -> CommandResult:
    """ε-continuation of the perturbed equation."""
    solver = ctx.config.solver
    structure = ctx.structure
    problem = ctx.config.bundle.kind
    path = epsilon_continuation(problem, structure, solver.epsilons, ctx.metric,
                                solver.newton_options(), ctx.progress)
    summary = {
        'regime': path.regime,
        'complete': path.complete,
        'error': path.error,
        'reference_sup': path.reference_sup,
        'c0_bounds': c0_bound_check(path),
    }
    if problem == ProblemKind.PROJFLAT:
        summary['integral_identity'] = [
            dict(integral_identity_residual(structure, path.reference, H, eps), epsilon=eps)
            for eps, H in zip(path.epsilons, path.solutions)]
    fields = {'metric': path.solutions[-1]} if path.solutions else {}
    labelled = [(f"eps{index}", H) for index, H in enumerate(path.solutions)]
    return CommandResult(plain(summary), path.rows(), 'epsilon', fields,
                         snapshots=_snapshots(ctx, labelled), failure=path.error)


def run_flow(ctx: RunContext) -> CommandResult:
    """HYM heat flow with its gauge-transported pair representation."""
    solver = ctx.config.solver
    trajectory = hym_flow(ctx.metric, ctx.structure, solver.dt, solver.T, solver.integrator, solver.cfl,
                          record_every=solver.record_every, progress=ctx.progress)
    pairs = ymh_gauge_transport(trajectory)
    final = trajectory.final
    summary = plain({
        'integrator': trajectory.integrator,
        'halvings': trajectory.halvings,
        'energy_monotone': trajectory.energy_monotone,
        'psi_sup_monotone': trajectory.psi_sup_monotone,
        'final': final.to_row(),
        'pair_max_residual': pairs.max_residual,
        'pair_energy_monotone': pairs.energy_monotone,
    })
    pair_rows = [{'t': p.t, 'conjugation_residual': p.conjugation_residual, 'ymh': p.ymh,
                  'ymh_metric': p.ymh_metric} for p in pairs.states]
    labelled = [(f"t{index}", state.H) for index, state in enumerate(trajectory.states)]
    return CommandResult(summary, [s.to_row() for s in trajectory.states], 'flow', {'metric': final.H},
                         tables={'pair': (pair_rows, 'pair')}, snapshots=_snapshots(ctx, labelled))


def run_harmonic(ctx: RunContext) -> CommandResult:
    """Harmonic metric of a projectively flat bundle."""
    solver = ctx.config.solver
    result = harmonic_metric(ctx.structure, ctx.metric, _acceptance(ctx), solver.eps_min, solver.schedule,
                             solver.newton_options(), ctx.progress)
    fields = {'metric': result.metric} if result.metric is not None else {}
    return CommandResult(result.to_dict(), result.path.rows() if result.path else [], 'epsilon', fields,
                         failure=None if result.converged else result.message)


def run_classes(ctx: RunContext) -> CommandResult:
    """Chern numbers (Higgs) or odd and Bott-Chern classes (flat) at the starting metric."""
    structure, H = ctx.structure, ctx.metric
    identity = HermitianField.identity(ctx.geometry, structure.rank)
    if isinstance(structure, HiggsBundle):
        report = chern_numbers(structure, H)
        reference = chern_numbers(structure, identity)
        drift = max(abs((getattr(report, k) or 0.0) - (getattr(reference, k) or 0.0))
                    for k in ('degree', 'ch2', 'c1_squared', 'c2'))
        summary = {'characteristic': report.to_dict(), 'metric_drift': drift}
        return CommandResult(plain(summary))

    j = ctx.config.solver.j
    odd = kamber_tondeur(structure, H, j)
    odd_identity = kamber_tondeur(structure, identity, j)
    drift = max((abs(odd.periods[k] - odd_identity.periods.get(k, 0.0)) for k in odd.periods), default=0.0)
    bott_chern = bott_chern_rep(structure, H, identity)
    summary = {'odd_class': odd.to_dict(), 'period_drift': drift, 'bott_chern': bott_chern.to_dict()}
    return CommandResult(plain(summary))


def run_bogomolov(ctx: RunContext) -> CommandResult:
    """Both sides of the Bogomolov-Gieseker identity on a complex surface."""
    report = bogomolov_residual(ctx.structure, ctx.metric)
    summary = report.to_dict()
    summary['characteristic'] = chern_numbers(ctx.structure, ctx.metric).to_dict()
    return CommandResult(summary)


def run_probe(ctx: RunContext) -> CommandResult:
    """Heuristic semistability probe."""
    solver = ctx.config.solver
    report = semistability_probe(ctx.structure, solver.epsilons, ctx.metric, solver.check_grid,
                                 solver.newton_options(), ctx.progress)
    rows = [{'epsilon': eps, 'psi_sup': psi, 'eps_log_sup': eps_log, 'log_sup': log_sup, 'log_l2': log_l2}
            for eps, psi, eps_log, log_sup, log_l2 in zip(report.epsilons, report.psi_sup, report.eps_log_sup,
                                                          report.log_sup, report.log_l2)]
    ctx.say(f"probe verdict: {report.verdict}")
    return CommandResult(report.to_dict(), rows, 'epsilon')


def run_roundtrip(ctx: RunContext) -> CommandResult:
    """Higgs → projectively flat → Higgs (or the reverse) composition."""
    solver = ctx.config.solver
    report = roundtrip_check(ctx.structure, ctx.metric, _acceptance(ctx), solver.newton_options(), ctx.progress)
    return CommandResult(report.to_dict(), failure="; ".join(report.notes) if report.partial else None)


def extension_beta(structure: HomStructure, params: Dict[str, Any]) -> MatrixFormField:
    """
    D''-closed Hom(Q, S)-valued 1-form from extension parameters.

    ``constant`` gives one column per direction dz̄^α (rank(S) complex entries each,
    strings such as "1+2j" allowed); ``seed``, ``bandlimit`` and ``amplitude`` add the
    exact part D''f of a random smooth section f.
    """
    geometry = structure.geometry
    rows, cols = structure.section_shape
    beta = MatrixFormField.zeros(geometry, rows, cols)
    constant = params.get('constant')
    if constant is not None:
        matrix = np.array([[complex(v) for v in row] for row in constant], dtype=complex)
        if matrix.shape != (rows, geometry.n):
            raise RankMismatchError(f"extension constant has shape {matrix.shape}, expected {(rows, geometry.n)}")
        for alpha in range(geometry.n):
            column = np.broadcast_to(matrix[:, alpha:alpha + 1], geometry.shape + (rows, cols))
            beta = beta + MatrixFormField.single(geometry, ((), (alpha,)), column)

    amplitude = float(params.get('amplitude', 0.0))
    if amplitude > 0:
        rng = np.random.default_rng(int(params.get('seed', 0)))
        f = MatrixFormField.scalar(geometry, random_smooth(geometry, rng, int(params.get('bandlimit', 1)),
                                                           amplitude, (rows, cols)))
        double_prime, _ = hom_operators(structure)
        beta = beta + spectral_d(f, (0, 1)) + hom_action(double_prime[0], double_prime[1], f)
    return beta


def run_extension(ctx: RunContext) -> CommandResult:
    """Harmonic representative of an extension class and the flat connection it defines."""
    structure = HomStructure.of_bundle(ctx.structure, ctx.metric)
    beta = extension_beta(structure, ctx.config.bundle.extension)
    result = harmonic_extension_rep(beta, structure, tol=min(ctx.config.solver.tol, 1e-10))
    flat = extension_flat_connection(structure, result.beta)
    summary = result.to_dict()
    summary['flatness'] = flat.residuals['flatness']
    return CommandResult(summary, fields={'beta': result.beta, 'gamma': flat.gamma})


def run_h0check(ctx: RunContext) -> CommandResult:
    """Parallel sections of D versus D''-holomorphic sections."""
    report = h0_equality_check(ctx.structure, ctx.metric, ctx.config.solver.kmax)
    return CommandResult(report.to_dict())


def run_approx(ctx: RunContext) -> CommandResult:
    """Flowed approximate projective flatness along ε."""
    solver = ctx.config.solver
    report = approx_projflat_experiment(ctx.structure, solver.epsilons, solver.t0, solver.dt, ctx.metric,
                                        solver.newton_options(), ctx.progress)
    rows = [{'epsilon': eps, 'value': value} for eps, value in zip(report.epsilons, report.values)]
    return CommandResult(report.to_dict(), rows, 'approx')


COMMANDS: Dict[Command, Callable[[RunContext], CommandResult]] = {
    Command.SOLVE_HE: run_solve_he,
    Command.CONTINUE_EPS: run_continue_eps,
    Command.FLOW: run_flow,
    Command.HARMONIC: run_harmonic,
    Command.CLASSES: run_classes,
    Command.BOGOMOLOV: run_bogomolov,
    Command.PROBE: run_probe,
    Command.ROUNDTRIP: run_roundtrip,
    Command.EXTENSION: run_extension,
    Command.H0CHECK: run_h0check,
    Command.APPROX: run_approx,
}


# ----------------------------------------------------------------------------
# output

def write_outputs(ctx: RunContext, result: CommandResult) -> List[Path]:
    """Write reports and checkpoints of a finished (or partially finished) run."""
    config = ctx.config
    outputs = config.outputs
    name = config.name
    out_dir = ctx.out_dir
    data = ctx.data

    summary = {
        'command': config.command.value,
        'version': config.get('version'),
        'geometry': config.geometry.to_dict(),
        'bundle': dict(config.bundle.to_dict(), params=data.params, seed=data.seed),
        'converged': result.failure is None,
        'failure': result.failure,
        'result': result.summary,
    }
    written = emit_report(out_dir, name, summary, result.rows, result.kind, outputs.csv, outputs.dat)
    for suffix, (rows, kind) in result.tables.items():
        written += emit_report(out_dir, f"{name}_{suffix}", {'command': config.command.value, 'table': suffix},
                               rows, kind, outputs.csv, outputs.dat)[1:]

    meta = {'command': config.command.value, 'seed': data.seed, 'params': plain(data.params)}
    rank = data.structure.rank
    for label, metric in result.snapshots:
        written.append(save_checkpoint(out_dir / f"{name}_{label}.ckpt", ctx.geometry, rank,
                                       dict(_structure_fields(data.structure), metric=metric), meta))
    if result.fields:
        fields = dict(_structure_fields(data.structure))
        fields.update(result.fields)
        written.append(save_checkpoint(out_dir / f"{name}.ckpt", ctx.geometry, rank, fields, meta))
    return written


def run_command(config: RunConfig, resume: Optional[Path] = None,
                progress: Optional[ProgressCallback] = None,
                log: Optional[LogCallback] = None) -> Tuple[Dict[str, Any], List[Path]]:
    """
    Run the subcommand named by a configuration and write its outputs.

    Args:
        config: Validated run document
        resume: Checkpoint whose metric replaces the starting metric
        progress: Structured progress callable
        log: Human-readable message callable

    Returns:
        Tuple of (final summary, paths written)

    Raises:
        ConvergenceError: The solver did not converge; reports were written first
        LabError: Invalid input (see the exit code of the subclass)
    """
    ctx = prepare(config, resume, progress, log)
    command = config.command
    ctx.say(f"{command.value}: {ctx.data.structure.__class__.__name__} rank {ctx.data.structure.rank} "
            f"on n={ctx.geometry.n} grid {ctx.geometry.grid}")
    result = COMMANDS[command](ctx)
    written = write_outputs(ctx, result)
    if result.failure is not None:
        raise ConvergenceError(f"{command.value}: {result.failure}", diagnostics=result.summary,
                               partial=[str(p) for p in written])
    ctx.say(f"{command.value}: done, {len(written)} files written")
    return plain(result.summary), written


__all__ = ['RunContext', 'CommandResult', 'COMMANDS', 'prepare', 'extension_beta', 'write_outputs',
           'run_command']
