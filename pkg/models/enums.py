"""Enumerations for experiments and field data."""
from enum import Enum, auto


class TaskStatus(Enum):
    """Status of a queued experiment."""
    PENDING = auto()
    PROCESSING = auto()
    DONE = auto()
    ERROR = auto()
    CANCELLED = auto()

    def __str__(self):
        return self.name.capitalize()


class ProblemKind(str, Enum):
    """Which perturbed equation a continuation path solves."""
    HIGGS = "higgs"
    PROJFLAT = "projflat"

    def __str__(self):
        return self.value


class FieldRole(str, Enum):
    """Interpretation of a Hermitian matrix field."""
    METRIC = "metric"
    ENDOMORPHISM = "endomorphism"

    def __str__(self):
        return self.value


class Integrator(str, Enum):
    """Time stepping scheme of the heat flow."""
    EXPONENTIAL = "exponential"
    EXPLICIT = "explicit"

    def __str__(self):
        return self.value


class Regime(str, Enum):
    """Growth regime of ε‖log h_ε‖ along a continuation path."""
    BOUNDED = "bounded"
    GROWING = "growing"
    UNDECIDED = "undecided"

    def __str__(self):
        return self.value


class Verdict(str, Enum):
    """Outcome of the semistability probe."""
    STABLE_LIKE = "stable-like"
    SEMISTABLE_LIKE = "semistable-like"
    UNSTABLE_LIKE = "unstable-like"
    INCONCLUSIVE = "inconclusive"

    def __str__(self):
        return self.value


class Command(str, Enum):
    """Experiment subcommands understood by the runner."""
    SOLVE_HE = "solve-he"
    CONTINUE_EPS = "continue-eps"
    FLOW = "flow"
    HARMONIC = "harmonic"
    CLASSES = "classes"
    BOGOMOLOV = "bogomolov"
    PROBE = "probe"
    ROUNDTRIP = "roundtrip"
    EXTENSION = "extension"
    H0CHECK = "h0check"
    APPROX = "approx"

    def __str__(self):
        return self.value
