"""Matrix-valued form fields and Hermitian matrix fields on a torus grid."""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Set, Tuple

import numpy as np

from models.enums import FieldRole
from models.geometry import TorusGeometry
from utils import hermitian

FormKey = Tuple[Tuple[int, ...], Tuple[int, ...]]

SCALAR_KEY: FormKey = ((), ())


@dataclass(eq=False)
class MatrixFormField:
    """
    Matrix-valued differential form on the torus.

    A form is stored as a map from a pair of sorted multi-indices (I, J) to the
    coefficient of dz^I ∧ dz̄^J, a complex array of shape grid + (rows, cols).
    Absent keys are zero, so mixed-type forms such as connections are allowed.

    Attributes:
        geometry: Underlying torus
        components: Coefficient arrays by (I, J)
        matrix_shape: (rows, cols) of every coefficient
        flags: Diagnostics attached by the operation that produced the field
    """

    geometry: TorusGeometry
    components: Dict[FormKey, np.ndarray] = field(default_factory=dict)
    matrix_shape: Tuple[int, int] = (1, 1)
    flags: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def zeros(cls, geometry: TorusGeometry, rank: int, cols: Optional[int] = None) -> 'MatrixFormField':
        """Zero form with r×r (or r×cols) coefficients."""
        return cls(geometry, {}, (rank, cols if cols is not None else rank))

    @classmethod
    def scalar(cls, geometry: TorusGeometry, values: np.ndarray) -> 'MatrixFormField':
        """
        Wrap a grid of matrices (or numbers) as a (0,0) form.

        Args:
            geometry: Underlying torus
            values: Array of grid shape, or grid shape + (rows, cols)
        """
        values = np.asarray(values, dtype=complex)
        if values.ndim == len(geometry.shape):
            values = values[..., None, None]
        return cls(geometry, {SCALAR_KEY: values}, values.shape[-2:])

    @classmethod
    def single(cls, geometry: TorusGeometry, key: FormKey, values: np.ndarray) -> 'MatrixFormField':
        """Form with a single component dz^I ∧ dz̄^J."""
        values = np.asarray(values, dtype=complex)
        if values.ndim == len(geometry.shape):
            values = values[..., None, None]
        values = np.broadcast_to(values, geometry.shape + values.shape[-2:]).copy()
        key = (tuple(key[0]), tuple(key[1]))
        return cls(geometry, {key: values}, values.shape[-2:])

    @property
    def rank(self) -> int:
        """Number of rows of the coefficients."""
        return self.matrix_shape[0]

    @property
    def is_square(self) -> bool:
        return self.matrix_shape[0] == self.matrix_shape[1]

    @property
    def bidegrees(self) -> Set[Tuple[int, int]]:
        """Set of (p, q) types with a stored component."""
        return {(len(I), len(J)) for I, J in self.components}

    @property
    def degree(self) -> int:
        """
        Total degree of a homogeneous form (0 for the empty form).

        Raises:
            ValueError: If components of different total degree are present
        """
        degrees = {p + q for p, q in self.bidegrees}
        if len(degrees) > 1:
            raise ValueError(f"form has mixed total degrees {sorted(degrees)}")
        return degrees.pop() if degrees else 0

    def coefficient(self, key: FormKey) -> np.ndarray:
        """Coefficient of dz^I ∧ dz̄^J (zeros if absent)."""
        key = (tuple(key[0]), tuple(key[1]))
        if key in self.components:
            return self.components[key]
        return np.zeros(self.geometry.shape + self.matrix_shape, dtype=complex)

    @property
    def values(self) -> np.ndarray:
        """Coefficient of a (0,0) form."""
        return self.coefficient(SCALAR_KEY)

    def part(self, p: int, q: int) -> 'MatrixFormField':
        """Components of type (p, q)."""
        comps = {k: v for k, v in self.components.items() if len(k[0]) == p and len(k[1]) == q}
        return MatrixFormField(self.geometry, comps, self.matrix_shape)

    def degree_part(self, d: int) -> 'MatrixFormField':
        """Components of total degree d."""
        comps = {k: v for k, v in self.components.items() if len(k[0]) + len(k[1]) == d}
        return MatrixFormField(self.geometry, comps, self.matrix_shape)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> 'MatrixFormField':
        """Apply ``fn`` to every coefficient array."""
        comps = {k: fn(v) for k, v in self.components.items()}
        shape = next(iter(comps.values())).shape[-2:] if comps else self.matrix_shape
        return MatrixFormField(self.geometry, comps, tuple(shape))

    def left_multiply(self, matrices: np.ndarray) -> 'MatrixFormField':
        """Pointwise product M·f for a grid of matrices M."""
        out = self.map(lambda v: np.matmul(matrices, v))
        out.matrix_shape = (matrices.shape[-2], self.matrix_shape[1])
        return out

    def right_multiply(self, matrices: np.ndarray) -> 'MatrixFormField':
        """Pointwise product f·M for a grid of matrices M."""
        out = self.map(lambda v: np.matmul(v, matrices))
        out.matrix_shape = (self.matrix_shape[0], matrices.shape[-1])
        return out

    def trace(self) -> 'MatrixFormField':
        """Pointwise trace, as a rank-1 form."""
        return self.map(lambda v: np.trace(v, axis1=-2, axis2=-1)[..., None, None])

    def tensor_identity(self, rank: int) -> 'MatrixFormField':
        """Scalar (rank-1) form times the r×r identity."""
        eye = np.eye(rank, dtype=complex)
        return self.map(lambda v: v[..., 0:1, 0:1] * eye)

    def conj(self) -> 'MatrixFormField':
        """Entrywise complex conjugate of the coefficients (form indices untouched)."""
        return self.map(np.conj)

    def copy(self) -> 'MatrixFormField':
        return MatrixFormField(self.geometry, {k: v.copy() for k, v in self.components.items()},
                               self.matrix_shape, dict(self.flags))

    def sup_norm(self) -> float:
        """Largest coefficient entry modulus."""
        if not self.components:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in self.components.values()))

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.sup_norm() <= tol

    def _combine(self, other: 'MatrixFormField', sign: float) -> 'MatrixFormField':
        if self.matrix_shape != other.matrix_shape:
            from core.errors import RankMismatchError
            raise RankMismatchError(f"shapes {self.matrix_shape} and {other.matrix_shape} differ")
        comps = {k: v.copy() for k, v in self.components.items()}
        for k, v in other.components.items():
            if k in comps:
                comps[k] = comps[k] + sign * v
            else:
                comps[k] = sign * v
        return MatrixFormField(self.geometry, comps, self.matrix_shape)

    def __add__(self, other: 'MatrixFormField') -> 'MatrixFormField':
        return self._combine(other, 1.0)

    def __sub__(self, other: 'MatrixFormField') -> 'MatrixFormField':
        return self._combine(other, -1.0)

    def __neg__(self) -> 'MatrixFormField':
        return self.map(lambda v: -v)

    def __mul__(self, scalar) -> 'MatrixFormField':
        return self.map(lambda v: scalar * v)

    __rmul__ = __mul__


@dataclass(eq=False)
class HermitianField:
    """
    Grid of r×r matrices playing the role of a metric or an endomorphism.

    Metric-role values are Hermitian positive definite. Endomorphism-role values
    such as h = K⁻¹H are self-adjoint with respect to ``reference`` (K·h is
    Hermitian); a missing reference means the identity metric.

    Attributes:
        geometry: Underlying torus
        values: Array grid + (r, r)
        role: Metric or endomorphism
        reference: Metric the endomorphism is self-adjoint for
    """

    geometry: TorusGeometry
    values: np.ndarray
    role: FieldRole = FieldRole.METRIC
    reference: Optional['HermitianField'] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim == len(self.geometry.shape):
            self.values = self.values[..., None, None]

    @classmethod
    def identity(cls, geometry: TorusGeometry, rank: int) -> 'HermitianField':
        """Identity metric."""
        values = np.broadcast_to(np.eye(rank, dtype=complex), geometry.shape + (rank, rank)).copy()
        return cls(geometry, values)

    @classmethod
    def constant(cls, geometry: TorusGeometry, matrix: np.ndarray,
                 role: FieldRole = FieldRole.METRIC) -> 'HermitianField':
        matrix = np.asarray(matrix, dtype=complex)
        values = np.broadcast_to(matrix, geometry.shape + matrix.shape).copy()
        return cls(geometry, values, role)

    @property
    def rank(self) -> int:
        return self.values.shape[-1]

    def symmetric_values(self) -> np.ndarray:
        """
        Hermitian representative of the field.

        For an endomorphism h self-adjoint with respect to K this is K^{1/2} h K^{-1/2};
        otherwise the values themselves.
        """
        if self.reference is None:
            return hermitian.hermitian_part(self.values)
        root = hermitian.sqrtm_h(self.reference.values)
        inv_root = hermitian.inv_sqrtm_h(self.reference.values)
        return hermitian.hermitian_part(root @ self.values @ inv_root)

    def from_symmetric(self, symmetric: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`symmetric_values` for new Hermitian data."""
        if self.reference is None:
            return symmetric
        root = hermitian.sqrtm_h(self.reference.values)
        inv_root = hermitian.inv_sqrtm_h(self.reference.values)
        return inv_root @ symmetric @ root

    def eigenvalues(self) -> np.ndarray:
        """Pointwise eigenvalues, ascending."""
        w, _ = hermitian.eigh(self.symmetric_values())
        return w

    def condition_number(self) -> float:
        """Largest pointwise condition number."""
        return hermitian.condition_number(self.symmetric_values())

    def determinant(self) -> np.ndarray:
        """Pointwise determinant (real for self-adjoint data)."""
        return np.real(np.linalg.det(self.values))

    def inverse(self) -> np.ndarray:
        """Pointwise inverse matrices."""
        return np.linalg.inv(self.values)

    def as_form(self) -> MatrixFormField:
        """View as a (0,0) matrix form."""
        return MatrixFormField.scalar(self.geometry, self.values)

    def copy(self) -> 'HermitianField':
        return HermitianField(self.geometry, self.values.copy(), self.role, self.reference)

    def validate(self, hermitian_tol: float = 1e-10) -> Tuple[bool, str]:
        """
        Validate Hermitian symmetry and, for metrics, positivity.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if self.values.shape[:-2] != self.geometry.shape:
            return False, f"grid shape {self.values.shape[:-2]} does not match geometry {self.geometry.shape}"
        if self.values.shape[-1] != self.values.shape[-2]:
            return False, "values must be square matrices"
        if not np.all(np.isfinite(self.values)):
            return False, "values contain non-finite entries"

        if self.reference is None:
            sym = self.values
        else:
            sym = self.reference.values @ self.values
        asym = float(np.max(np.abs(sym - hermitian.dagger(sym))))
        scale = 1.0 + float(np.max(np.abs(sym)))
        if asym > hermitian_tol * scale:
            return False, f"field is not self-adjoint (defect {asym:.3e})"

        if self.role == FieldRole.METRIC:
            w = self.eigenvalues()
            if np.any(w <= 0.0):
                return False, f"metric is not positive definite (min eigenvalue {w.min():.3e})"

        return True, ""
