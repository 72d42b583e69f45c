"""Dense complex linear algebra kernel.

Thin, validated wrappers over numpy/LAPACK. Every operator in the package is
ultimately a complex128 ndarray; these helpers enforce finiteness and shape
contracts and report eigen-residuals instead of trusting them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised on incompatible operand shapes."""


class EigenConvergenceError(np.linalg.LinAlgError):
    """Raised when the eigensolver fails or its pairs miss the residual tolerance."""

    def __init__(self, message, best_residual=np.inf):
        super().__init__(message)
        self.best_residual = best_residual


def as_scalar(z) -> complex:
    """Coerce ``z`` to a finite Python complex."""
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValueError(f"non-finite scalar {z!r}")
    return z


def as_matrix(A, copy=False) -> np.ndarray:
    """Coerce ``A`` to a finite 2-d complex128 array."""
    A = np.array(A, dtype=np.complex128, copy=copy) if copy else np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def op_norm(A) -> float:
    """Operator (spectral) norm, i.e. the largest singular value of ``A``."""
    A = as_matrix(A)
    if A.size == 0:
        raise ValueError("empty matrix")
    # LAPACK gesdd is deterministic for a fixed input; relative accuracy ~1e-15.
    return float(np.linalg.norm(A, 2))


def adjoint(A) -> np.ndarray:
    return as_matrix(A).conj().T


def mat_mul(A, B) -> np.ndarray:
    A, B = as_matrix(A), as_matrix(B)
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def mat_add(A, B) -> np.ndarray:
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape:
        raise ShapeError(f"cannot add {A.shape} and {B.shape}")
    return A + B


def scale(A, c) -> np.ndarray:
    return as_scalar(c) * as_matrix(A)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a general square matrix with their measured residuals.

    ``eigenvectors[:, k]`` has unit Euclidean norm and
    ``residuals[k] = ||A v_k - eigenvalues[k] v_k||``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    trace_defect: float

    def __len__(self):
        return len(self.eigenvalues)

    def select(self, mask):
        mask = np.asarray(mask, dtype=bool)
        return EigenDecomposition(self.eigenvalues[mask], self.eigenvectors[:, mask],
                                  self.residuals[mask], self.trace_defect)


def eig_general(A, tol=1e-8) -> EigenDecomposition:
    """Eigendecomposition of a (possibly non-normal) square matrix.

    Parameters
    ----------
    A : (d, d) array_like
    tol : float
        Absolute bound, scaled by ``max(1, ||A||_F)``, that every reported
        eigenpair residual and the trace identity must meet.

    Raises
    ------
    EigenConvergenceError
        If LAPACK does not converge or the residual/trace checks fail. The
        exception carries the best residual seen.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"eig_general needs a square matrix, got {A.shape}")
    d = A.shape[0]
    if d == 0:
        empty = np.zeros(0, dtype=np.complex128)
        return EigenDecomposition(empty, np.zeros((0, 0), np.complex128), np.zeros(0), 0.0)
    try:
        w, vr = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"eigensolver did not converge: {exc}") from exc
    vr = vr / np.linalg.norm(vr, axis=0, keepdims=True)
    residuals = np.linalg.norm(A @ vr - vr * w[None, :], axis=0)
    trace_defect = float(abs(w.sum() - np.trace(A)))
    scale_ = max(1.0, float(np.linalg.norm(A)))
    if residuals.max() > tol * scale_:
        raise EigenConvergenceError(
            f"eigenpair residual {residuals.max():.3e} exceeds {tol * scale_:.3e}",
            best_residual=float(residuals.min()))
    if trace_defect > tol * scale_ * d:
        raise EigenConvergenceError(
            f"eigenvalue sum misses the trace by {trace_defect:.3e}",
            best_residual=float(residuals.min()))
    return EigenDecomposition(w, vr, residuals, trace_defect)


def null_space(A, tol):
    """Orthonormal basis of the approximate kernel of ``A``.

    Returns ``(Q, s)`` where the columns of ``Q`` are right singular vectors
    with singular value ``<= tol`` and ``s`` are those singular values (which
    equal the residuals ``||A q||``).
    """
    A = as_matrix(A)
    _, s, vh = np.linalg.svd(A)
    # pad: a wide matrix has extra kernel directions with zero singular value
    s_full = np.zeros(A.shape[1])
    s_full[: len(s)] = s
    keep = s_full <= tol
    return vh.conj().T[:, keep], s_full[keep], s_full
