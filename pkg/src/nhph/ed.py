"""Exact diagonalization of ``H = sum_i Pi_i`` on short open or periodic chains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .linalg import EigenSolverError
from .mps import modification_operator
from .parent import LocalProjector, build_projector
from .mps import StatePair

BoundaryKind = Literal["open", "periodic"]

CHAIN_CAP = 3**8
SIMILARITY_CAP = 3**7
CLUSTER_TOL = 1e-7


class SizeCapError(ValueError):
    """Requested Hilbert space exceeds the dense-diagonalization cap."""


@dataclass(frozen=True, eq=False)
class ChainHamiltonian:
    n_sites: int
    k: int
    boundary: BoundaryKind
    matrix: np.ndarray
    d: int = 3


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    ground_energy: complex
    degeneracy: int
    gap: float
    cluster_tol: float = CLUSTER_TOL
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            **self.meta,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "ground": {
                "energy": [float(self.ground_energy.real), float(self.ground_energy.imag)],
                "degeneracy": int(self.degeneracy),
            },
            "gap": float(self.gap),
        }


def _site_permutation(n: int, d: int, shift: int) -> np.ndarray:
    """Index map moving site ``j`` of a basis label to site ``(j + shift) % n``."""
    labels = np.arange(d**n).reshape((d,) * n)
    moved = np.moveaxis(labels, list(range(n)), [(j + shift) % n for j in range(n)])
    return moved.reshape(-1)


def build_chain(p: LocalProjector, n: int, boundary: BoundaryKind = "open") -> ChainHamiltonian:
    """Dense ``sum_i Pi_i`` with ``n - k + 1`` (open) or ``n`` (periodic) terms."""
    d, k = p.d, p.k
    if n < k:
        raise ValueError(f"chain of {n} sites is shorter than the interaction span {k}")
    if d**n > CHAIN_CAP:
        raise SizeCapError(f"d^n = {d**n} exceeds the cap {CHAIN_CAP}")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    term = np.kron(p.matrix, np.eye(d ** (n - k)))
    starts = range(n) if boundary == "periodic" else range(n - k + 1)
    h = np.zeros((d**n, d**n), dtype=complex)
    for s in starts:
        perm = _site_permutation(n, d, s)
        h += term[np.ix_(perm, perm)]
    return ChainHamiltonian(n, k, boundary, h, d)


def sort_spectrum(values: np.ndarray) -> np.ndarray:
    """Ascending real part; ties by ``|Im|`` then ``Im``."""
    values = np.asarray(values)
    rounded = np.round(values.real, 10)
    return values[np.lexsort((values.imag, np.round(np.abs(values.imag), 10), rounded))]


def analyze_spectrum(values: np.ndarray, cluster_tol: float = CLUSTER_TOL) -> SpectrumReport:
    w = sort_spectrum(values)
    ground = w[0]
    in_cluster = np.abs(w - ground) < cluster_tol
    degeneracy = int(in_cluster.sum())
    rest = w[~in_cluster]
    gap = float(rest.real.min() - ground.real) if len(rest) else float("nan")
    return SpectrumReport(w, complex(ground), degeneracy, gap, cluster_tol)


def full_spectrum(h: ChainHamiltonian, cluster_tol: float = CLUSTER_TOL) -> SpectrumReport:
    try:
        w = sla.eigvals(h.matrix, overwrite_a=False, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(str(exc)) from exc
    report = analyze_spectrum(w, cluster_tol)
    meta = {"n": h.n_sites, "k": h.k, "boundary": h.boundary}
    return SpectrumReport(report.eigenvalues, report.ground_energy, report.degeneracy,
                          report.gap, cluster_tol, meta)


def match_spectra(a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> float:
    """Max distance between two spectra paired by sorted order.

    Falls back to an optimal assignment when the sorted pairing is worse than
    ``tol`` (ordering of near-degenerate complex values is ambiguous).
    """
    a, b = sort_spectrum(a), sort_spectrum(b)
    if a.shape != b.shape:
        raise ValueError("spectra have different sizes")
    dist = float(np.abs(a - b).max())
    if dist <= tol:
        return dist
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def conjugation_defect(values: np.ndarray) -> float:
    """How far a spectrum is from being closed under complex conjugation."""
    return match_spectra(values, np.conj(values), tol=0.0)


def obc_similarity_check(mu: float, n: int, k: int) -> float:
    """Spectral distance between ``H_OBC(mu)`` and ``M H_OBC(1) M^{-1}``."""
    if 3**n > SIMILARITY_CAP:
        raise SizeCapError(f"3^n = {3**n} exceeds the cap {SIMILARITY_CAP}")
    h_mu = build_chain(build_projector(StatePair.asymmetric_aklt(mu), k), n, "open").matrix
    h_1 = build_chain(build_projector(StatePair.asymmetric_aklt(1.0), k), n, "open").matrix
    m = modification_operator(mu, n)
    similar = (m[:, None] * h_1) / m[None, :]
    return match_spectra(sla.eigvals(h_mu), sla.eigvals(similar))


@dataclass(frozen=True)
class ScalingFit:
    extrapolated_gap: float
    residual: float
    coefficients: tuple
    abscissa: str = "1/N"


def gap_scaling(gaps: Sequence[tuple]) -> ScalingFit:
    """Least-squares ``gap(x) = a + b x + c x^2`` with ``x = 1/N``; returns ``a``."""
    if len(gaps) < 3:
        raise ValueError("quadratic extrapolation needs at least 3 points")
    n = np.array([g[0] for g in gaps], dtype=float)
    y = np.array([g[1] for g in gaps], dtype=float)
    x = 1.0 / n
    design = np.vstack([np.ones_like(x), x, x**2]).T
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.linalg.norm(design @ coef - y))
    return ScalingFit(float(coef[0]), residual, tuple(float(c) for c in coef))
