"""Graded algebra, metric adjoints, Hermitian calculus and inner products of matrix forms."""
import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from core.errors import FormDegreeError, GridError, RankMismatchError
from core.spectral import integrate, to_coarse, to_fine
from models.enums import FieldRole
from models.fields import SCALAR_KEY, FormKey, HermitianField, MatrixFormField
from utils import hermitian

logger = logging.getLogger(__name__)

ILL_CONDITIONED = 1e12


def _merge(first: Tuple[int, ...], second: Tuple[int, ...]) -> Tuple[int, Optional[Tuple[int, ...]]]:
    """Sign of sorting first + second, and the sorted index (0 on repetition)."""
    if set(first) & set(second):
        return 0, None
    seq = first + second
    inversions = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return (-1) ** inversions, tuple(sorted(seq))


def wedge_key(left: FormKey, right: FormKey) -> Tuple[int, Optional[FormKey]]:
    """
    Basis product (dz^I∧dz̄^J) ∧ (dz^K∧dz̄^L) = sign · dz^{IK}∧dz̄^{JL}.

    Returns:
        Tuple of (sign, key); sign 0 when the product vanishes
    """
    (I, J), (K, L) = left, right
    s1, IK = _merge(I, K)
    s2, JL = _merge(J, L)
    if s1 == 0 or s2 == 0:
        return 0, None
    sign = s1 * s2 * (-1) ** (len(J) * len(K))
    return sign, (IK, JL)


def _check_pair(a: MatrixFormField, b: MatrixFormField):
    if not a.geometry.compatible(b.geometry):
        raise GridError("operands live on different tori")
    if a.matrix_shape[1] != b.matrix_shape[0]:
        raise RankMismatchError(f"cannot multiply {a.matrix_shape} by {b.matrix_shape} coefficients")


def wedge(a: MatrixFormField, b: MatrixFormField) -> MatrixFormField:
    """Graded wedge product with pointwise matrix multiplication, dealiased."""
    _check_pair(a, b)
    geometry = a.geometry
    n = geometry.n
    out_shape = (a.matrix_shape[0], b.matrix_shape[1])
    fine_a = {k: to_fine(v, geometry) for k, v in a.components.items()}
    fine_b = {k: to_fine(v, geometry) for k, v in b.components.items()}

    acc: Dict[FormKey, np.ndarray] = {}
    overflow = False
    for ka, va in fine_a.items():
        for kb, vb in fine_b.items():
            if len(ka[0]) + len(kb[0]) > n or len(ka[1]) + len(kb[1]) > n:
                overflow = True
                continue
            sign, key = wedge_key(ka, kb)
            if sign == 0:
                continue
            product = np.matmul(va, vb)
            if key in acc:
                acc[key] = acc[key] + sign * product
            else:
                acc[key] = sign * product

    out = MatrixFormField(geometry, {k: to_coarse(v, geometry) for k, v in acc.items()}, out_shape)
    if overflow:
        out.flags['degree_overflow'] = True
    return out


def algebra(a: MatrixFormField, b: MatrixFormField, op: str = 'wedge') -> MatrixFormField:
    """
    Product of two matrix forms.

    Args:
        a: Left operand
        b: Right operand
        op: 'wedge', 'bracket' (a∧b − (−1)^{|a||b|} b∧a) or 'compose' ((0,0) only)

    Returns:
        MatrixFormField
    """
    if op == 'wedge':
        return wedge(a, b)
    if op == 'compose':
        if a.bidegrees - {(0, 0)} or b.bidegrees - {(0, 0)}:
            raise FormDegreeError("compose needs (0,0) operands")
        return wedge(a, b)
    if op == 'bracket':
        if not (a.is_square and b.is_square):
            raise RankMismatchError("bracket needs square coefficients")
        sign = (-1) ** (a.degree * b.degree)
        return wedge(a, b) - sign * wedge(b, a)
    raise ValueError(f"unknown algebra operation '{op}'")


def bracket(a: MatrixFormField, b: MatrixFormField) -> MatrixFormField:
    """Graded commutator [a, b]."""
    return algebra(a, b, 'bracket')


def hom_action(left: MatrixFormField, right: MatrixFormField, x: MatrixFormField) -> MatrixFormField:
    """Action of a pair of End-valued forms on a Hom-valued form: left∧x − (−1)^{|x|} x∧right."""
    sign = (-1) ** x.degree
    return wedge(left, x) - sign * wedge(x, right)


def adjoint_wrt(a: MatrixFormField, H: Optional[HermitianField] = None,
                source: Optional[HermitianField] = None) -> MatrixFormField:
    """
    Metric adjoint of a matrix form.

    f dz^I∧dz̄^J ↦ (−1)^{|I||J|} H_s⁻¹ f^† H dz^J∧dz̄^I, where H is the metric on the
    target and H_s on the source of the coefficients (both H for square fields).

    Args:
        a: Form to adjoin
        H: Target metric (identity when None)
        source: Source metric for rectangular (Hom-valued) forms

    Returns:
        MatrixFormField; flagged ``ill_conditioned`` when cond(H) > 1e12
    """
    H_src = source if source is not None else H
    comps = {}
    for (I, J), values in a.components.items():
        adj = hermitian.dagger(values)
        if H is not None:
            adj = np.matmul(adj, H.values)
        if H_src is not None:
            adj = np.linalg.solve(H_src.values, adj)
        comps[(J, I)] = (-1) ** (len(I) * len(J)) * adj
    out = MatrixFormField(a.geometry, comps, (a.matrix_shape[1], a.matrix_shape[0]))
    for metric in {id(m): m for m in (H, H_src) if m is not None}.values():
        cond = metric.condition_number()
        if cond > ILL_CONDITIONED:
            logger.warning("adjoint taken with ill-conditioned metric (cond %.3e)", cond)
            out.flags['ill_conditioned'] = cond
    return out


# ----------------------------------------------------------------------------
# Hermitian functional calculus

def herm_function(x: HermitianField, fn: Callable[[np.ndarray], np.ndarray]) -> HermitianField:
    """Apply a scalar function to a self-adjoint field through its spectrum."""
    sym = hermitian.apply_function(x.symmetric_values(), fn)
    return HermitianField(x.geometry, x.from_symmetric(sym), x.role, x.reference)


def herm_log_exp(x: HermitianField, which: str) -> HermitianField:
    """
    Principal logarithm or exponential of a self-adjoint field.

    Args:
        x: Field (metric or endomorphism self-adjoint for its reference)
        which: 'log' or 'exp'

    Returns:
        HermitianField in the endomorphism role (log) or the role of ``x`` (exp)

    Raises:
        ValueError: Non-positive eigenvalue under log
    """
    if which == 'log':
        sym = hermitian.logm_h(x.symmetric_values())
        return HermitianField(x.geometry, x.from_symmetric(sym), FieldRole.ENDOMORPHISM, x.reference)
    if which == 'exp':
        sym = hermitian.expm_h(x.symmetric_values())
        return HermitianField(x.geometry, x.from_symmetric(sym), x.role, x.reference)
    raise ValueError(f"which must be 'log' or 'exp', got '{which}'")


def herm_sqrt(x: HermitianField) -> HermitianField:
    """Positive square root of a positive self-adjoint field."""
    return herm_function(x, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def relative_endomorphism(K: HermitianField, H: HermitianField) -> HermitianField:
    """h = K⁻¹H, self-adjoint with respect to K."""
    return HermitianField(K.geometry, np.linalg.solve(K.values, H.values), FieldRole.ENDOMORPHISM, K)


def metric_from_sigma(K: HermitianField, sigma: np.ndarray) -> HermitianField:
    """H = K^{1/2} e^σ K^{1/2} for a grid of Hermitian σ."""
    root = hermitian.sqrtm_h(K.values)
    values = hermitian.hermitian_part(root @ hermitian.expm_h(sigma) @ root)
    return HermitianField(K.geometry, values)


def sigma_from_metric(K: HermitianField, H: HermitianField) -> np.ndarray:
    """Inverse of :func:`metric_from_sigma`: σ = log(K^{-1/2} H K^{-1/2})."""
    inv_root = hermitian.inv_sqrtm_h(K.values)
    return hermitian.logm_h(inv_root @ H.values @ inv_root)


def identity(geometry, rank: int) -> MatrixFormField:
    """Identity endomorphism as a (0,0) form."""
    return HermitianField.identity(geometry, rank).as_form()


def scalar_multiple(form: MatrixFormField, rank: int) -> MatrixFormField:
    """Rank-1 form times the r×r identity."""
    return form.tensor_identity(rank)


def trace(form: MatrixFormField) -> MatrixFormField:
    """Pointwise trace."""
    return form.trace()


def trace_free(form: MatrixFormField) -> MatrixFormField:
    """f − (1/r) tr f · Id."""
    r = form.rank
    return form - scalar_multiple(trace(form), r) * (1.0 / r)


def condition_number(H: HermitianField) -> float:
    return H.condition_number()


# ----------------------------------------------------------------------------
# inner products

def basis_gram(left: FormKey, right: FormKey, metric_inverse: np.ndarray) -> complex:
    """
    Pointwise inner product ⟨dz^I∧dz̄^J, dz^K∧dz̄^L⟩.

    Built from ⟨dz^α, dz^β⟩ = 2g^{βα} and ⟨dz̄^α, dz̄^β⟩ = 2g^{αβ} by Gram determinants.
    """
    (I, J), (K, L) = left, right
    if len(I) != len(K) or len(J) != len(L):
        return 0j
    value = 1.0 + 0j
    if I:
        value *= np.linalg.det(np.array([[2.0 * metric_inverse[k, i] for k in K] for i in I]))
    if J:
        value *= np.linalg.det(np.array([[2.0 * metric_inverse[j, l] for l in L] for j in J]))
    return complex(value)


def inner_density(a: MatrixFormField, b: MatrixFormField, H: Optional[HermitianField] = None,
                  source: Optional[HermitianField] = None) -> np.ndarray:
    """
    Pointwise ⟨a, b⟩ = Σ gram · tr(a_{IJ} H_s⁻¹ b_{KL}^† H).

    Args:
        a: Left form
        b: Right form
        H: Metric on the coefficient target (identity when None)
        source: Metric on the coefficient source for Hom-valued forms

    Returns:
        Complex array of grid shape
    """
    if a.bidegrees and b.bidegrees and a.bidegrees != b.bidegrees:
        raise FormDegreeError(f"inner product of types {sorted(a.bidegrees)} and {sorted(b.bidegrees)}")
    if a.matrix_shape != b.matrix_shape:
        raise RankMismatchError(f"shapes {a.matrix_shape} and {b.matrix_shape} differ")
    geometry = a.geometry
    H_src = source if source is not None else H
    ginv = geometry.metric_inverse
    density = np.zeros(geometry.shape, dtype=complex)
    for ka, va in a.components.items():
        for kb, vb in b.components.items():
            g = basis_gram(ka, kb, ginv)
            if g == 0:
                continue
            adj = hermitian.dagger(vb)
            if H is not None:
                adj = np.matmul(adj, H.values)
            if H_src is not None:
                adj = np.linalg.solve(H_src.values, adj)
            density = density + g * np.einsum('...ij,...ji->...', va, adj)
    return density


def inner_norms(a: MatrixFormField, b: MatrixFormField, H: Optional[HermitianField] = None,
                source: Optional[HermitianField] = None) -> Tuple[np.ndarray, complex, float]:
    """
    Pointwise inner product with its integral and sup.

    Returns:
        Tuple of (density, ∫ density ω^n/n!, sup |density|)
    """
    density = inner_density(a, b, H, source)
    total = integrate(density, a.geometry)
    return density, total, float(np.max(np.abs(density)))


def pointwise_norm(a: MatrixFormField, H: Optional[HermitianField] = None,
                   source: Optional[HermitianField] = None) -> np.ndarray:
    """Pointwise |a|_H as a real array."""
    return np.sqrt(np.clip(np.real(inner_density(a, a, H, source)), 0.0, None))


def theta_weights(eigenvalues: np.ndarray) -> np.ndarray:
    """Θ weights (e^{λa−λb}−1)/(λa−λb) on eigenvalue pairs, 1 on the diagonal."""
    return hermitian.theta_weights(eigenvalues)


__all__ = [
    'SCALAR_KEY', 'wedge', 'wedge_key', 'algebra', 'bracket', 'hom_action', 'adjoint_wrt',
    'herm_function', 'herm_log_exp', 'herm_sqrt', 'relative_endomorphism', 'metric_from_sigma',
    'sigma_from_metric', 'identity', 'scalar_multiple', 'trace', 'trace_free', 'condition_number',
    'basis_gram', 'inner_density', 'inner_norms', 'pointwise_norm', 'theta_weights',
]
