"""Non-Hermitian parent Hamiltonians built from a pair of uniform MPS.

The local term on ``k`` sites is ``Pi = I - T_R G^{-1} T_L^H`` with
``G = T_L^H T_R``. ``T_R`` and ``T_L`` are the ``d^k x D^2`` blocked maps of
the right and left states; column ``(alpha, beta)`` of ``T`` is the chain
product ``A[i_1] ... A[i_k]`` evaluated at that virtual boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Optional

import numpy as np

from .linalg import (
    RANK_TOL,
    SingularMatrixError,
    condition_number,
    orthonormal_complement,
    orthonormal_range,
    rank_tol,
    singular_values,
    solve_or_invert,
)
from .mps import StatePair, UniformMPS, block
from .spin import SQRT2, anticommutator, pi_rotation_y, spin_one

Side = Literal["right", "left"]


class NoParentHamiltonianError(SingularMatrixError):
    """The metric ``T_L^H T_R`` is singular: no parent Hamiltonian at this ``k``."""


@dataclass(frozen=True, eq=False)
class BlockedMap:
    matrix: np.ndarray
    k: int
    side: Side = "right"

    @property
    def rank(self) -> int:
        return rank_tol(self.matrix)


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """``G = T_L^H T_R``; ``scale`` is ``|T_L|_2 |T_R|_2`` when known.

    Invertibility is judged against ``scale`` so that a metric that is
    uniformly tiny compared with its factors still counts as singular.
    """

    matrix: np.ndarray
    condition_estimate: float
    scale: Optional[float] = None

    @property
    def invertible(self) -> bool:
        s = singular_values(self.matrix)
        ref = s[0] if self.scale is None else self.scale
        return bool(ref > 0 and s[-1] > RANK_TOL * ref)


@dataclass(frozen=True, eq=False)
class LocalProjector:
    """Local Hamiltonian term ``Pi``; ``I - Pi`` is the (oblique) projector ``P``."""

    matrix: np.ndarray
    k: int
    d: int = 3
    mu: Optional[float] = None

    @property
    def complement(self) -> np.ndarray:
        return np.eye(self.matrix.shape[0]) - self.matrix

    def adjoint(self) -> "LocalProjector":
        return LocalProjector(self.matrix.conj().T, self.k, self.d, self.mu)

    def to_dict(self) -> dict:
        m = self.matrix
        return {
            "k": self.k,
            "d": self.d,
            "mu": self.mu,
            "matrix": np.stack([m.real, m.imag], axis=-1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LocalProjector":
        raw = np.asarray(data["matrix"], dtype=float)
        return cls(raw[..., 0] + 1j * raw[..., 1], int(data["k"]), int(data["d"]), data.get("mu"))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def blocked_map(state: UniformMPS, k: int, side: Side = "right") -> BlockedMap:
    if state.d**k < state.D**2:
        raise ValueError(f"d^k = {state.d**k} is smaller than D^2 = {state.D**2}")
    t = block(state, k).tensor.reshape(state.d**k, state.D**2)
    return BlockedMap(t, k, side)


def metric(left: BlockedMap, right: BlockedMap) -> MetricMatrix:
    if left.matrix.shape != right.matrix.shape:
        raise ValueError("blocked maps must have equal shapes")
    g = left.matrix.conj().T @ right.matrix
    scale = float(np.linalg.norm(left.matrix, 2) * np.linalg.norm(right.matrix, 2))
    return MetricMatrix(g, condition_number(g), scale)


def fixed_point_metric(e_inf: np.ndarray, dim: int) -> MetricMatrix:
    """Metric at the RG fixed point, reshuffled from ``E^inf``.

    ``G[(alpha alpha'), (beta beta')] = E^inf[(alpha beta), (alpha' beta')]``.
    """
    g = np.asarray(e_inf).reshape(dim, dim, dim, dim).transpose(0, 2, 1, 3).reshape(dim**2, dim**2)
    return MetricMatrix(g, condition_number(g))


def fixed_point_maps(e_inf: np.ndarray, dim: int):
    """A pair of maps realising the fixed-point metric: ``T_R = I``, ``T_L^H = G^inf``."""
    g = fixed_point_metric(e_inf, dim).matrix
    return BlockedMap(g.conj().T, 0, "left"), BlockedMap(np.eye(dim**2, dtype=complex), 0, "right")


def projector_from_maps(left: BlockedMap, right: BlockedMap) -> np.ndarray:
    """``Pi = I - T_R G^{-1} T_L^H``; the metric is solved, never inverted explicitly."""
    g = metric(left, right)
    if not g.invertible:
        raise NoParentHamiltonianError("no nH-PH at this k: metric is singular")
    try:
        c_tl = solve_or_invert(g.matrix, left.matrix.conj().T)
    except SingularMatrixError as exc:
        raise NoParentHamiltonianError(f"no nH-PH at this k: metric is singular ({exc})") from exc
    n = right.matrix.shape[0]
    return np.eye(n, dtype=complex) - right.matrix @ c_tl


def build_projector(pair: StatePair, k: int) -> LocalProjector:
    tr = blocked_map(pair.right, k, "right")
    tl = blocked_map(pair.left, k, "left")
    return LocalProjector(projector_from_maps(tl, tr), k, pair.right.d, pair.mu)


def criterion_direct_sum(left: BlockedMap, right: BlockedMap, tol: float = RANK_TOL) -> bool:
    """Do ``im T_R`` and ``(im T_L)^perp`` together span the whole local space?"""
    n = right.matrix.shape[0]
    basis_r = orthonormal_range(right.matrix, tol)
    perp_l = orthonormal_complement(left.matrix, tol)
    if basis_r.shape[1] + perp_l.shape[1] != n:
        return False
    return rank_tol(np.hstack([basis_r, perp_l]), tol) == n


def criterion_biorthogonal(left: BlockedMap, right: BlockedMap, tol: float = 1e-10) -> bool:
    """Bi-orthogonalize with ``U_R = G^{-1}``, ``U_L = I`` and check ``T_L'^H T_R' = I``."""
    met = metric(left, right)
    if not met.invertible:
        return False
    g = met.matrix
    try:
        u_r = solve_or_invert(g)
    except SingularMatrixError:
        return False
    g_prime = left.matrix.conj().T @ (right.matrix @ u_r)
    return bool(np.abs(g_prime - np.eye(g.shape[0])).max() < tol)


@lru_cache(maxsize=None)
def _lambda_basis() -> tuple:
    s = spin_one()
    eye = s.identity
    sxz = anticommutator(s.Sx, s.Sz)
    syz = anticommutator(s.Sy, s.Sz)
    sxy = anticommutator(s.Sx, s.Sy)
    sz2 = s.Sz @ s.Sz
    mats = (
        (s.Sx + sxz) / 2,
        (s.Sx - sxz) / 2,
        (s.Sy + syz) / 2,
        (s.Sy - syz) / 2,
        sxy / SQRT2,
        (s.Sz + 3 * sz2) / (2 * SQRT2) - eye / SQRT2,
        (s.Sx @ s.Sx - s.Sy @ s.Sy) / SQRT2,
        (3 * s.Sz - 3 * sz2 + 2 * eye) / (2 * np.sqrt(6)),
        eye / np.sqrt(3),
    )
    for m in mats:
        m.setflags(write=False)
    return mats


def spin1_lambda_basis() -> list:
    """Nine 3x3 matrices orthonormal under ``Tr[a^H b]``."""
    return list(_lambda_basis())


def expand_lambda(p: LocalProjector) -> np.ndarray:
    """Coefficients ``O[m, n] = Tr[(lambda_m x lambda_n)^H Pi]`` of a two-site operator."""
    if p.k != 2 or p.d != 3 or p.matrix.shape != (9, 9):
        raise ValueError("lambda expansion needs a k=2 spin-1 operator")
    lam = np.array(_lambda_basis())
    pt = p.matrix.reshape(3, 3, 3, 3)
    # Tr[(a x b)^H P] = sum conj(a[i,j]) conj(b[k,l]) P[(i k),(j l)]
    return np.einsum("mij,nkl,ikjl->mn", lam.conj(), lam.conj(), pt)


def from_lambda(coeffs: np.ndarray) -> np.ndarray:
    lam = np.array(_lambda_basis())
    return np.einsum("mn,mij,nkl->ikjl", coeffs, lam, lam).reshape(9, 9)


def hamiltonian_k2(mu: float) -> LocalProjector:
    """Two-site term written directly with spin operators."""
    mu = float(mu)
    if not np.isfinite(mu) or mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    s = spin_one()
    kr = np.kron
    eye = s.identity
    sp, sm, sz = s.Splus, s.Sminus, s.Sz
    spz = anticommutator(sp, sz)
    smz = anticommutator(sm, sz)
    sz2 = sz @ sz
    h = (
        5 / 12 * (mu / 2 * kr(sm, sp) + 1 / (2 * mu) * kr(sp, sm) + kr(sz, sz))
        + 1 / 6 * (mu**2 / 4 * kr(sm @ sm, sp @ sp) + 1 / (4 * mu**2) * kr(sp @ sp, sm @ sm)
                   - kr(sz2, eye) - kr(eye, sz2))
        + 1 / 24 * (mu * kr(smz, spz) + 1 / mu * kr(spz, smz))
        + 1 / 4 * kr(sz2, sz2)
        + 2 / 3 * np.eye(9)
    )
    return LocalProjector(h, 2, 3, mu)


def site_swap(d: int = 3) -> np.ndarray:
    """Permutation exchanging the two sites of a ``d x d`` product space."""
    n = d * d
    swap = np.zeros((n, n))
    for i in range(d):
        for j in range(d):
            swap[j * d + i, i * d + j] = 1.0
    return swap


def pt_transform(op: np.ndarray) -> np.ndarray:
    """Conjugate a two-site spin-1 operator by parity (site swap) times time reversal.

    Time reversal is ``exp(i pi S_y) K``, so ``T O T^{-1} = U conj(O) U^H`` with
    ``U = exp(i pi S_y)`` on both sites.
    """
    u1 = pi_rotation_y().conj().T  # exp(+i pi S_y) = exp(-i pi S_y)^H
    u = np.kron(u1, u1)
    swap = site_swap(3)
    w = swap @ u
    return w @ np.conj(op) @ w.conj().T


def projector_residuals(p: LocalProjector, pair: StatePair) -> dict:
    """Annihilation and idempotence residuals (max-abs norms)."""
    tr = blocked_map(pair.right, p.k).matrix
    tl = blocked_map(pair.left, p.k).matrix
    comp = p.complement
    return {
        "right_annihilation": float(np.abs(p.matrix @ tr).max()),
        "left_annihilation": float(np.abs(tl.conj().T @ p.matrix).max()),
        "idempotence": float(np.abs(comp @ comp - comp).max()),
    }
