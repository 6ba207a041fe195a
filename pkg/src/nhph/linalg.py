"""Dense complex linear algebra with explicit tolerances.

Every routine here works on small dense ``complex128`` arrays and checks its
own output (residuals, reconstruction errors) before handing it back, so that
callers further up never have to second-guess a decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as sla

RANK_TOL = 1e-10
DEGENERACY_TOL = 1e-8
INVERSE_RESIDUAL = 1e-8

SortMode = Literal["modulus", "real"]


class LinalgError(ValueError):
    """Base class for numerical failures raised by this package."""


class DegenerateEigenvalueError(LinalgError):
    """The two largest eigenvalue moduli coincide within tolerance."""


class SingularMatrixError(LinalgError):
    """A matrix that has to be inverted is rank deficient."""


class EigenSolverError(LinalgError):
    """The eigensolver output failed its residual check."""


def as_cmatrix(m, square: bool = False) -> np.ndarray:
    """Validate ``m`` as a finite 2-d complex matrix and return a copy."""
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues with matching right and left eigenvectors (as columns).

    ``left_vectors[:, i]`` is ``w_i`` with ``w_i^H A = lambda_i w_i^H``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    sorted_by: SortMode

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _sort_order(values: np.ndarray, sort: SortMode) -> np.ndarray:
    if sort == "modulus":
        return np.lexsort((values.imag, values.real, -np.abs(values)))
    if sort == "real":
        return np.lexsort((np.abs(values.imag), values.real))
    raise ValueError(f"unknown sort mode {sort!r}")


def eig_full(m, sort: SortMode = "modulus", tol: float = 1e-10) -> EigenDecomposition:
    """Full complex spectrum with left and right eigenvectors.

    Parameters
    ----------
    m : array_like
        Square matrix.
    sort : {"modulus", "real"}
        ``"modulus"`` sorts by descending ``|lambda|``; ``"real"`` by ascending
        real part (ties broken by ``|Im lambda|``).
    tol : float
        Residual bound relative to the 2-norm of ``m``.

    Raises
    ------
    EigenSolverError
        If LAPACK fails or a residual ``|A v - lambda v|`` exceeds ``tol * |A|``.
    """
    a = as_cmatrix(m, square=True)
    try:
        w, vl, vr = sla.eig(a, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(str(exc)) from exc
    order = _sort_order(w, sort)
    w, vl, vr = w[order], vl[:, order], vr[:, order]

    scale = max(np.linalg.norm(a, 2), np.finfo(float).tiny)
    right_res = np.linalg.norm(a @ vr - vr * w, axis=0)
    left_res = np.linalg.norm(vl.conj().T @ a - w[:, None] * vl.conj().T, axis=1)
    worst = max(right_res.max(), left_res.max())
    if worst > tol * scale:
        raise EigenSolverError(f"eigenpair residual {worst:.3e} exceeds {tol:.1e} * |A|")
    return EigenDecomposition(w, vr, vl, sort)


def dominant_eigenpair(m, tol: float = DEGENERACY_TOL):
    """Largest-modulus eigenvalue with its right and left eigenvectors.

    The vectors are scaled so that ``left.conj() @ right == 1``. The right
    vector is additionally phase-fixed so its largest entry is real positive.

    Raises
    ------
    DegenerateEigenvalueError
        If the relative modulus gap between the two leading eigenvalues is
        below ``tol``.
    """
    dec = eig_full(m, sort="modulus")
    w = dec.eigenvalues
    lead = abs(w[0])
    if lead == 0.0:
        raise DegenerateEigenvalueError("matrix is nilpotent; no dominant eigenvalue")
    if len(w) > 1 and (lead - abs(w[1])) / lead < tol:
        raise DegenerateEigenvalueError(
            f"dominant modulus is degenerate: |{w[0]:.6g}| vs |{w[1]:.6g}|"
        )
    r = dec.right_vectors[:, 0]
    l = dec.left_vectors[:, 0]
    pivot = np.argmax(np.abs(r))
    r = r * (abs(r[pivot]) / r[pivot])
    overlap = np.vdot(l, r)
    if abs(overlap) < 1e-14:
        raise EigenSolverError("left and right dominant vectors are orthogonal")
    l = l / np.conj(overlap)
    return w[0], r, l


def singular_values(m) -> np.ndarray:
    return sla.svdvals(as_cmatrix(m))


def rank_tol(m, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    s = singular_values(m)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def condition_number(m) -> float:
    s = singular_values(m)
    return float(np.inf) if s[-1] == 0.0 else float(s[0] / s[-1])


def solve_or_invert(m, rhs=None, tol: float = RANK_TOL) -> np.ndarray:
    """Solve ``m x = rhs`` or, with ``rhs=None``, return ``m^{-1}``.

    Full rank is checked first with :func:`rank_tol`; the solution residual is
    then verified against ``INVERSE_RESIDUAL``.
    """
    a = as_cmatrix(m, square=True)
    n = a.shape[0]
    if rank_tol(a, tol) < n:
        raise SingularMatrixError(f"matrix of size {n} is rank deficient at tol={tol:.1e}")
    b = np.eye(n, dtype=complex) if rhs is None else np.asarray(rhs, dtype=complex)
    x = sla.solve(a, b)
    scale = max(1.0, np.abs(b).max())
    residual = np.abs(a @ x - b).max() / scale
    if residual > INVERSE_RESIDUAL:
        raise SingularMatrixError(f"solve residual {residual:.3e} too large")
    return x


def svd(m):
    """Thin SVD ``m = U @ diag(s) @ Vh`` with descending singular values.

    Falls back to the slower but more robust ``gesvd`` driver when the
    divide-and-conquer routine does not converge.
    """
    a = as_cmatrix(m)
    try:
        u, s, vh = sla.svd(a, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vh = sla.svd(a, full_matrices=False, lapack_driver="gesvd")
    return u, s, vh


def orthonormal_range(m, tol: float = RANK_TOL) -> np.ndarray:
    """Columns spanning the image of ``m``."""
    u, s, _ = svd(m)
    r = 0 if s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return u[:, :r]


def orthonormal_complement(m, tol: float = RANK_TOL) -> np.ndarray:
    """Columns spanning the orthogonal complement of the image of ``m``."""
    a = as_cmatrix(m)
    u, s, _ = sla.svd(a, full_matrices=True)
    r = 0 if s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return u[:, r:]
