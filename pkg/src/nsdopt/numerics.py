"""Dense linear algebra, spectral routines, Chebyshev polynomials and ball projections."""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

logger = logging.getLogger(__name__)

# |λ| ≤ ZERO_EIGENVALUE_RTOL · λ_1 counts as a zero eigenvalue.
ZERO_EIGENVALUE_RTOL = 1e-9
RESIDUAL_RTOL = 1e-9
SYMMETRY_ATOL = 1e-12


class EigendecompositionError(Exception):
    """Raised when the eigensolver fails or its residual check does not pass."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DisconnectedSupportError(Exception):
    """Raised when a matrix has more than one numerically zero eigenvalue."""

    pass


class SymmetricMatrix(BaseModel):
    """Dense symmetric matrix.

    Construction rejects asymmetric input and stores the exact average of the
    matrix and its transpose, so entry(i, j) == entry(j, i) bit for bit.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _symmetrize(cls, value: Any) -> np.ndarray:
        matrix = np.array(value, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        if np.max(np.abs(matrix - matrix.T), initial=0.0) > SYMMETRY_ATOL * scale:
            raise ValueError("matrix is not symmetric")
        matrix = 0.5 * (matrix + matrix.T)
        matrix.setflags(write=False)
        return matrix

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def entry(self, i: int, j: int) -> float:
        return float(self.entries[i, j])


class SpectralSummary(BaseModel):
    """Full spectrum of a symmetric matrix, eigenvalues ascending."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalues: np.ndarray
    """Ascending eigenvalues; the largest is called λ_1 elsewhere."""

    eigenvectors: np.ndarray
    """Orthonormal eigenvectors stored as columns."""

    residual: float
    """max_i ‖M v_i − λ_i v_i‖₂ measured after the solve."""

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def zero_count(self) -> int:
        """Number of eigenvalues that are numerically zero."""
        threshold = ZERO_EIGENVALUE_RTOL * max(self.lambda_max, 0.0)
        return int(np.sum(np.abs(self.eigenvalues) <= threshold))

    def smallest_nonzero(self) -> float:
        threshold = ZERO_EIGENVALUE_RTOL * max(self.lambda_max, 0.0)
        nonzero = self.eigenvalues[np.abs(self.eigenvalues) > threshold]
        if nonzero.size == 0:
            raise DisconnectedSupportError("matrix has no non-zero eigenvalue")
        return float(np.min(nonzero))


def _as_array(matrix: SymmetricMatrix | np.ndarray) -> np.ndarray:
    if isinstance(matrix, SymmetricMatrix):
        return matrix.entries
    return SymmetricMatrix(entries=matrix).entries


def symmetric_eigendecomposition(matrix: SymmetricMatrix | np.ndarray) -> SpectralSummary:
    """Compute the full spectrum of a symmetric matrix.

    Uses LAPACK's symmetric solver (deterministic for a fixed input) and then
    verifies every pair: ‖M v − λ v‖₂ ≤ 1e-9 · max(1, λ_1).

    Raises:
        EigendecompositionError: If the solver does not converge or the residual
            check fails. The measured residual is attached to the error.
    """
    entries = _as_array(matrix)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(entries)
    except np.linalg.LinAlgError as e:
        raise EigendecompositionError(f"eigensolver did not converge: {e}") from e

    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    if eigenvalues.size == 0:
        return SpectralSummary(eigenvalues=eigenvalues, eigenvectors=eigenvectors, residual=0.0)

    residuals = np.linalg.norm(entries @ eigenvectors - eigenvectors * eigenvalues, axis=0)
    residual = float(np.max(residuals))
    tolerance = RESIDUAL_RTOL * max(1.0, float(np.max(np.abs(eigenvalues))))
    if residual > tolerance:
        raise EigendecompositionError(
            f"eigenpair residual {residual:.3e} exceeds tolerance {tolerance:.3e}",
            residual=residual,
        )
    return SpectralSummary(eigenvalues=eigenvalues, eigenvectors=eigenvectors, residual=residual)


def eigengap(matrix: Any) -> float:
    """Normalized eigengap λ_{n-1}/λ_1 of a gossip-like matrix.

    Accepts a `GossipMatrix` (anything with a ``spectrum`` attribute), a
    `SpectralSummary`, a `SymmetricMatrix` or a plain array. A 1×1 matrix has
    eigengap 1 by convention.

    Raises:
        DisconnectedSupportError: If more than one eigenvalue is numerically zero.
    """
    if isinstance(matrix, SpectralSummary):
        spectrum = matrix
    elif hasattr(matrix, "spectrum"):
        spectrum = matrix.spectrum
    else:
        spectrum = symmetric_eigendecomposition(matrix)

    if spectrum.eigenvalues.size == 1:
        return 1.0
    if spectrum.lambda_max <= 0.0:
        raise DisconnectedSupportError("matrix is zero; its support has no edges")
    zeros = spectrum.zero_count()
    if zeros > 1:
        raise DisconnectedSupportError(
            f"matrix has {zeros} zero eigenvalues; its support graph is disconnected"
        )
    return spectrum.smallest_nonzero() / spectrum.lambda_max


def chebyshev_t(k: int, x: float | np.ndarray) -> float | np.ndarray:
    """Degree-k Chebyshev polynomial of the first kind.

    Evaluated with T_0 = 1, T_1 = x, T_{k+1} = 2x T_k − T_{k-1}; works
    elementwise on arrays.
    """
    if k < 0:
        raise ValueError(f"degree must be non-negative, got {k}")
    x = np.asarray(x, dtype=float)
    previous = np.ones_like(x)
    if k == 0:
        return previous if previous.ndim else float(previous)
    current = x.copy()
    for _ in range(k - 1):
        previous, current = current, 2.0 * x * current - previous
    return current if current.ndim else float(current)


def project_ball(x: np.ndarray, center: np.ndarray | float, radius: float) -> np.ndarray:
    """Euclidean projection of ``x`` onto the ball B₂(center, radius)."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    x = np.asarray(x, dtype=float)
    center = np.broadcast_to(np.asarray(center, dtype=float), x.shape)
    offset = x - center
    norm = float(np.linalg.norm(offset))
    if norm <= radius:
        return x.copy()
    return center + (radius / norm) * offset
