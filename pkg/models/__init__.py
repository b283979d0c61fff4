"""Models package."""
from models.enums import TaskStatus, ProblemKind, FieldRole, Integrator, Regime, Verdict, Command
from models.geometry import TorusGeometry
from models.fields import MatrixFormField, HermitianField
from models.bundles import HiggsBundle, ProjFlatBundle, HomStructure
from models.experiment_task import ExperimentTask

__all__ = [
    'TaskStatus', 'ProblemKind', 'FieldRole', 'Integrator', 'Regime', 'Verdict', 'Command',
    'TorusGeometry', 'MatrixFormField', 'HermitianField', 'HiggsBundle', 'ProjFlatBundle', 'HomStructure',
    'ExperimentTask',
]
