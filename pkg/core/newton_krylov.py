"""Jacobian-free Newton-Krylov iteration with backtracking for Hermitian unknowns."""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from core.errors import ConvergenceError

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[Dict], None]


class HermitianPacker:
    """
    Real-vector view of a grid of Hermitian matrices.

    Stores the real parts of the upper triangle and the imaginary parts of the
    strict upper triangle. With ``trace_free`` the last diagonal entry is
    dropped and recovered as minus the sum of the others.
    """

    def __init__(self, grid_shape, rank: int, trace_free: bool = False):
        self.grid_shape = tuple(grid_shape)
        self.rank = rank
        self.trace_free = trace_free
        rows, cols = np.triu_indices(rank)
        keep = rows != cols
        if trace_free:
            diag = rows == cols
            keep_diag = diag & (rows < rank - 1)
            self._real = (rows[keep | keep_diag], cols[keep | keep_diag])
        else:
            self._real = (rows, cols)
        self._imag = (rows[keep], cols[keep])
        self.points = int(np.prod(self.grid_shape))

    @property
    def size(self) -> int:
        return self.points * (len(self._real[0]) + len(self._imag[0]))

    def project(self, matrices: np.ndarray) -> np.ndarray:
        """Hermitian part, trace removed when packing trace-free data."""
        sym = 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))
        if self.trace_free:
            tr = np.trace(sym, axis1=-2, axis2=-1)
            sym = sym - (tr / self.rank)[..., None, None] * np.eye(self.rank)
        return sym

    def pack(self, matrices: np.ndarray) -> np.ndarray:
        sym = self.project(matrices)
        re = np.real(sym[..., self._real[0], self._real[1]]).reshape(self.points, len(self._real[0]))
        im = np.imag(sym[..., self._imag[0], self._imag[1]]).reshape(self.points, len(self._imag[0]))
        return np.concatenate([re, im], axis=1).ravel()

    def unpack(self, vector: np.ndarray) -> np.ndarray:
        n_re = len(self._real[0])
        table = np.asarray(vector, dtype=float).reshape(self.points, n_re + len(self._imag[0]))
        out = np.zeros((self.points, self.rank, self.rank), dtype=complex)
        out[:, self._real[0], self._real[1]] += table[:, :n_re]
        out[:, self._imag[0], self._imag[1]] += 1j * table[:, n_re:]
        strict = self._imag
        out[:, strict[1], strict[0]] = np.conj(out[:, strict[0], strict[1]])
        if self.trace_free:
            last = self.rank - 1
            out[:, last, last] = -np.real(np.trace(out, axis1=-2, axis2=-1))
        return out.reshape(self.grid_shape + (self.rank, self.rank))


def pointwise_sup(matrices: np.ndarray) -> float:
    """Sup over the grid of the pointwise Frobenius norm."""
    return float(np.max(np.sqrt(np.sum(np.abs(matrices) ** 2, axis=(-2, -1)))))


@dataclass
class NewtonOptions:
    """Tolerances and limits of the Newton-Krylov iteration."""

    tol: float = 1e-9
    max_iter: int = 30
    gmres_restart: int = 30
    gmres_maxiter: int = 10
    forcing_max: float = 1e-2
    fd_step: float = 1e-4
    ls_red: float = 0.5
    ls_min: float = 1.0 / 64.0
    ls_on: float = 0.99999


@dataclass(eq=False)
class NewtonResult:
    """Outcome of a Newton-Krylov solve."""

    x: np.ndarray
    residual: float
    history: List[float] = field(default_factory=list)
    iterations: int = 0
    krylov_iterations: List[int] = field(default_factory=list)
    step_lengths: List[float] = field(default_factory=list)
    converged: bool = False


def newton_krylov(residual: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                  measure: Callable[[np.ndarray], float],
                  precondition: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                  options: Optional[NewtonOptions] = None,
                  progress: Optional[ProgressCallback] = None,
                  stage: str = 'newton') -> NewtonResult:
    """
    Solve residual(x) = 0 by inexact Newton steps.

    Jacobian actions are central finite differences; inner solves use restarted
    GMRES with forcing term min(forcing_max, ‖F‖). A step that does not reduce
    the residual is halved down to ``ls_min`` and then accepted anyway.

    Args:
        residual: Map from packed unknowns to packed residual
        x0: Starting vector
        measure: Convergence measure of a packed residual
        precondition: Approximate inverse Jacobian action
        options: Iteration limits
        progress: Callable receiving one record per iteration
        stage: Label attached to progress records

    Returns:
        NewtonResult

    Raises:
        ConvergenceError: No convergence within ``max_iter`` iterations
    """
    options = options or NewtonOptions()
    x = np.array(x0, dtype=float)
    f = residual(x)
    err = measure(f)
    result = NewtonResult(x=x, residual=err, history=[err])
    size = x.size

    if size == 0:
        result.converged = True
        return result

    for it in range(options.max_iter):
        if err <= options.tol:
            break
        if not np.isfinite(err):
            break

        base_x, base_f = x, f

        def jacobian_action(v, base_x=base_x):
            scale = float(np.max(np.abs(v)))
            if scale == 0.0:
                return np.zeros_like(v)
            tau = options.fd_step / scale
            return (residual(base_x + tau * v) - residual(base_x - tau * v)) / (2.0 * tau)

        A = LinearOperator((size, size), matvec=jacobian_action, dtype=float)
        M = None
        if precondition is not None:
            M = LinearOperator((size, size), matvec=precondition, dtype=float)

        inner = []
        eta = min(options.forcing_max, float(np.linalg.norm(base_f)))
        dx, info = gmres(A, -base_f, rtol=eta, atol=0.0, restart=options.gmres_restart,
                         maxiter=options.gmres_maxiter, M=M,
                         callback=lambda r: inner.append(r), callback_type='pr_norm')
        if info != 0:
            logger.debug("%s: GMRES stopped with info %d", stage, info)

        step = 1.0
        while True:
            trial = base_x + step * dx
            f_trial = residual(trial)
            err_trial = measure(f_trial)
            if np.isfinite(err_trial) and err_trial < err * options.ls_on:
                break
            if step <= options.ls_min:
                logger.debug("%s: line search failed, continuing anyway", stage)
                break
            step *= options.ls_red

        x, f, err = trial, f_trial, err_trial
        result.history.append(err)
        result.krylov_iterations.append(len(inner))
        result.step_lengths.append(step)
        result.iterations = it + 1
        logger.debug("%s: iteration %d residual %.3e (step %.3g, %d Krylov)", stage, it + 1, err, step, len(inner))
        if progress:
            progress({'stage': stage, 'step': it + 1, 'residual': err,
                      'step_length': step, 'krylov_iterations': len(inner)})

    result.x = x
    result.residual = err
    result.converged = bool(err <= options.tol)
    if not result.converged:
        raise ConvergenceError(
            f"{stage}: residual {err:.3e} above tolerance {options.tol:.1e} after {result.iterations} iterations",
            residual_history=result.history,
            diagnostics={'krylov_iterations': result.krylov_iterations, 'step_lengths': result.step_lengths},
            partial=result,
        )
    return result
