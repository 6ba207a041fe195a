"""Translation-invariant MPS, the asymmetric AKLT family and transfer matrices.

Conventions
-----------
* Tensors are indexed ``A[i, alpha, beta]`` (physical, left virtual, right
  virtual). For spin 1 the physical order is ``S_z = (+1, 0, -1)``; the
  virtual basis is ``(up, down)``.
* A transfer matrix built from a bra state ``a`` and ket state ``b`` is
  ``E[(alpha beta), (alpha' beta')] = sum_i conj(a[i])[alpha, alpha'] b[i][beta, beta']``,
  i.e. ``sum_i kron(conj(a[i]), b[i])`` with the bra index slow.
* States are never normalized implicitly; expectation values divide out the
  dominant transfer eigenvalue.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .linalg import (
    DEGENERACY_TOL,
    RANK_TOL,
    LinalgError,
    dominant_eigenpair,
    rank_tol,
    svd,
)
from .spin import pi_rotation_y

MATERIALIZE_CAP = 3**10


class NotInjectiveError(LinalgError):
    """The blocked map never reaches full rank D^2 within the allowed range."""


@dataclass(frozen=True, eq=False)
class UniformMPS:
    """Uniform MPS defined by a single rank-3 tensor ``[physical, left, right]``."""

    tensor: np.ndarray
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.tensor, dtype=complex)
        if t.ndim != 3 or t.shape[1] != t.shape[2]:
            raise ValueError(f"tensor must have shape (d, D, D), got {t.shape}")
        if t.shape[0] < 2 or t.shape[1] < 1:
            raise ValueError("need d >= 2 and D >= 1")
        if not np.all(np.isfinite(t)):
            raise ValueError("tensor has non-finite entries")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def d(self) -> int:
        return self.tensor.shape[0]

    @property
    def D(self) -> int:
        return self.tensor.shape[1]

    def to_dict(self) -> dict:
        t = self.tensor
        return {
            "d": self.d,
            "D": self.D,
            "tensor": np.stack([t.real, t.imag], axis=-1).tolist(),
            "labels": dict(self.labels),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UniformMPS":
        raw = np.asarray(data["tensor"], dtype=float)
        t = raw[..., 0] + 1j * raw[..., 1]
        if t.shape != (data["d"], data["D"], data["D"]):
            raise ValueError(f"tensor shape {t.shape} disagrees with d={data['d']}, D={data['D']}")
        return cls(t, dict(data.get("labels", {})))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "UniformMPS":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class StatePair:
    """Right ground state ``|R>`` and left ground state ``|L>`` (stored as a ket)."""

    right: UniformMPS
    left: UniformMPS
    mu: Optional[float] = None

    def __post_init__(self):
        if self.right.d != self.left.d or self.right.D != self.left.D:
            raise ValueError("left and right states must share d and D")

    @classmethod
    def asymmetric_aklt(cls, mu: float) -> "StatePair":
        right = asymmetric_aklt(mu)
        return cls(right=right, left=left_partner(right), mu=float(mu))


@dataclass(frozen=True, eq=False)
class TransferObject:
    matrix: np.ndarray
    bra_dim: int
    ket_dim: int


def asymmetric_aklt(mu: float) -> UniformMPS:
    """Asymmetric AKLT tensor with valence bond ``|up down> - mu |down up>``."""
    mu = float(mu)
    if not np.isfinite(mu) or mu <= 0:
        raise ValueError(f"mu must be positive and finite, got {mu}")
    a = np.zeros((3, 2, 2), dtype=complex)
    a[0, 1, 0] = -np.sqrt(mu)
    a[2, 0, 1] = np.sqrt(mu)
    a[1, 0, 0] = 1 / np.sqrt(2)
    a[1, 1, 1] = -mu / np.sqrt(2)
    return UniformMPS(a, {"family": "asymmetric_aklt", "mu": mu})


def product_state(d: int, index: int = 0) -> UniformMPS:
    t = np.zeros((d, 1, 1), dtype=complex)
    t[index, 0, 0] = 1.0
    return UniformMPS(t, {"family": "product", "index": index})


def left_partner(right: UniformMPS) -> UniformMPS:
    """Parity partner: every ``A[i]`` is replaced by its transpose."""
    return UniformMPS(np.transpose(right.tensor, (0, 2, 1)), dict(right.labels, parity="transposed"))


def gauge_transform(state: UniformMPS, x: np.ndarray) -> UniformMPS:
    """``A[i] -> X A[i] X^{-1}``; the represented state is unchanged."""
    xinv = np.linalg.inv(x)
    return UniformMPS(np.einsum("ab,ibc,cd->iad", x, state.tensor, xinv), dict(state.labels))


def block(state: UniformMPS, k: int) -> UniformMPS:
    """Merge ``k`` consecutive sites into one with physical dimension ``d^k``.

    The merged physical index is row-major over ``(i_1, ..., i_k)``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    a = state.tensor
    out = a
    for _ in range(k - 1):
        out = np.einsum("pab,qbc->pqac", out, a).reshape(-1, state.D, state.D)
    return UniformMPS(out, dict(state.labels, blocked=k))


def transfer_matrix(bra: UniformMPS, ket: UniformMPS) -> TransferObject:
    if bra.d != ket.d:
        raise ValueError(f"physical dimensions differ: {bra.d} vs {ket.d}")
    a, b = bra.tensor, ket.tensor
    e = np.einsum("iab,icd->acbd", a.conj(), b).reshape(bra.D * ket.D, bra.D * ket.D)
    return TransferObject(e, bra.D, ket.D)


def operator_transfer(bra: UniformMPS, ket: UniformMPS, op, span: int) -> np.ndarray:
    """Transfer matrix over ``span`` sites with ``op`` (bra index first) inserted."""
    if span < 1:
        raise ValueError("span must be >= 1")
    ba, bb = block(bra, span).tensor, block(ket, span).tensor
    op = np.asarray(op, dtype=complex)
    if op.shape != (ba.shape[0], ba.shape[0]):
        raise ValueError(f"operator shape {op.shape} does not match d^span = {ba.shape[0]}")
    m = np.einsum("st,sab,tcd->acbd", op, ba.conj(), bb)
    return m.reshape(bra.D * ket.D, bra.D * ket.D)


def rg_fixed_point(e: TransferObject, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """``lim (E / lambda)^n`` as the spectral projector ``r l^H`` with ``l^H r = 1``."""
    _, r, l = dominant_eigenpair(e.matrix, tol)
    return np.outer(r, l.conj())


def fixed_point_by_squaring(e: TransferObject, max_squarings: int = 60, tol: float = 1e-14) -> np.ndarray:
    """Independent route to the fixed point: repeated squaring of ``E / lambda``.

    Squaring stops as soon as the iterate is idempotent to ``tol``; going
    further only amplifies the rounding error in the unit eigenvalue.
    """
    lam, _, _ = dominant_eigenpair(e.matrix)
    m = e.matrix / lam
    for _ in range(max_squarings):
        m2 = m @ m
        done = np.abs(m2 - m).max() < tol * max(1.0, np.abs(m).max())
        m = m2
        if done:
            break
    return m


def _environment(bra: UniformMPS, ket: UniformMPS, tol: float):
    return dominant_eigenpair(transfer_matrix(bra, ket).matrix, tol)


def expectation(bra: UniformMPS, ket: UniformMPS, op, span: int, tol: float = DEGENERACY_TOL) -> complex:
    """Thermodynamic-limit ``<bra| op |ket> / <bra|ket>`` for a ``span``-site operator."""
    lam, r, l = _environment(bra, ket, tol)
    m = operator_transfer(bra, ket, op, span)
    return complex(l.conj() @ m @ r / lam**span)


def expectation_lr(pair: StatePair, op, span: int, tol: float = DEGENERACY_TOL) -> complex:
    return expectation(pair.left, pair.right, op, span, tol)


def expectation_rr(state: UniformMPS, op, span: int, tol: float = DEGENERACY_TOL) -> complex:
    return expectation(state, state, op, span, tol)


def string_expectation(
    bra: UniformMPS,
    ket: UniformMPS,
    end_op,
    bulk_op,
    length: int,
    tol: float = DEGENERACY_TOL,
) -> complex:
    """``<end_op (bulk_op)^(length-2) end_op>`` over ``length`` consecutive sites."""
    if length < 2:
        raise ValueError("string length must be >= 2")
    lam, r, l = _environment(bra, ket, tol)
    e_end = operator_transfer(bra, ket, end_op, 1) / lam
    e_bulk = operator_transfer(bra, ket, bulk_op, 1) / lam
    v = e_end @ r
    for _ in range(length - 2):
        v = e_bulk @ v
    return complex(l.conj() @ e_end @ v)


Boundary = Union[str, Sequence[np.ndarray]]


def materialize(state: UniformMPS, n: int, boundary: Boundary = "periodic") -> np.ndarray:
    """Coefficient vector of an ``n``-site chain, row-major over ``(i_1..i_n)``.

    ``boundary`` is ``"periodic"`` (trace) or a pair ``(l, r)`` of virtual
    boundary vectors giving coefficients ``l^T A[i_1] ... A[i_n] r``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if state.d**n > MATERIALIZE_CAP:
        raise ValueError(f"d^n = {state.d**n} exceeds the cap {MATERIALIZE_CAP}")
    m = block(state, n).tensor
    if isinstance(boundary, str):
        if boundary != "periodic":
            raise ValueError(f"unknown boundary {boundary!r}")
        return np.trace(m, axis1=1, axis2=2)
    l, r = (np.asarray(v, dtype=complex) for v in boundary)
    return np.einsum("a,pab,b->p", l, m, r)


def blocked_rank(state: UniformMPS, k: int) -> int:
    t = block(state, k).tensor.reshape(state.d**k, state.D**2)
    return rank_tol(t, RANK_TOL)


def injectivity_blocking(state: UniformMPS, k_max: int) -> int:
    """Smallest ``k`` for which the ``k``-site map reaches rank ``D^2``."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    target = state.D**2
    for k in range(1, k_max + 1):
        if state.d**k >= target and blocked_rank(state, k) == target:
            return k
    raise NotInjectiveError(f"blocked map stays below rank {target} up to k={k_max}")


def normalized(state: UniformMPS) -> UniformMPS:
    """Rescale so that the dominant eigenvalue of the RR transfer matrix is 1."""
    lam, _, _ = dominant_eigenpair(transfer_matrix(state, state).matrix)
    return UniformMPS(state.tensor / np.sqrt(abs(lam)), dict(state.labels))


def _psd_root(m: np.ndarray, what: str):
    m = 0.5 * (m + m.conj().T)
    if np.trace(m).real < 0:
        m = -m
    w, v = np.linalg.eigh(m)
    if w[0] <= 1e-12 * w[-1]:
        raise NotInjectiveError(f"{what} fixed point is not positive definite")
    return w, v


def canonical_form(state: UniformMPS):
    """Vidal form of an injective uniform MPS.

    Returns
    -------
    gamma : ndarray, shape (d, D, D)
    weights : ndarray, shape (D,)
        Schmidt values, descending, unit square sum.

    ``B[i] = gamma[i] @ diag(weights)`` is right-orthonormal
    (``sum_i B B^H = I``) and ``diag(weights) @ gamma[i]`` is left-orthonormal.
    """
    a = normalized(state).tensor
    dim = state.D
    t = np.einsum("iab,icd->acbd", a, a.conj()).reshape(dim * dim, dim * dim)
    _, r, l = dominant_eigenpair(t)
    rw, rv = _psd_root(r.reshape(dim, dim), "right")
    lw, lv = _psd_root(l.reshape(dim, dim), "left")
    x = rv * np.sqrt(rw)
    y = np.sqrt(lw)[:, None] * lv.conj().T
    u, s, vh = svd(y @ x)
    xinv = (rv / np.sqrt(rw)).conj().T
    yinv = lv / np.sqrt(lw)
    gamma = np.einsum("ab,bc,icd,de,ef->iaf", vh, xinv, a, yinv, u)
    weights = s / np.linalg.norm(s)
    # normalization of gamma follows from B = gamma diag(weights) being isometric
    b = gamma * weights[None, None, :]
    scale = np.sqrt(np.trace(np.einsum("iab,icb->ac", b, b.conj())).real / dim)
    return gamma / scale, weights


def pt_gauge(state: UniformMPS):
    """Find ``M`` and ``c`` with ``sum_j R_ij conj(A[j]) = c M^{-1} A[i]^T M``.

    ``R = exp(-i pi S_y)``. Solved as a homogeneous linear system in ``M``
    for candidate values of ``c`` taken from trace invariants; the candidate
    with the smallest relative residual wins.

    Returns ``(M, c, residual)``.
    """
    if state.d != 3:
        raise ValueError("PT check is defined for spin-1 tensors")
    a = state.tensor
    dim = state.D
    x = np.einsum("ij,jab->iab", pi_rotation_y(), a.conj())
    at = np.transpose(a, (0, 2, 1))
    eye = np.eye(dim)

    candidates = []
    tr_a = np.array([np.trace(m) for m in at])
    i = int(np.argmax(np.abs(tr_a)))
    if abs(tr_a[i]) > 1e-12:
        candidates.append(np.trace(x[i]) / tr_a[i])
    pairs = [(p, q) for p in range(3) for q in range(3)]
    tr_aa = np.array([np.trace(at[p] @ at[q]) for p, q in pairs])
    j = int(np.argmax(np.abs(tr_aa)))
    if abs(tr_aa[j]) > 1e-12:
        p, q = pairs[j]
        c2 = np.trace(x[p] @ x[q]) / tr_aa[j]
        candidates.extend([np.sqrt(c2), -np.sqrt(c2)])
    if not candidates:
        raise LinalgError("no trace invariant available to fix the proportionality constant")

    best = None
    for c in candidates:
        # M X_i - c A_i^T M = 0, row-major vec: vec(M X) = kron(I, X^T) vec(M)
        k = np.vstack([np.kron(eye, x[n].T) - c * np.kron(at[n], eye) for n in range(3)])
        _, s, vh = svd(k)
        res = s[-1] / max(s[0], 1e-300)
        if best is None or res < best[2]:
            best = (vh[-1].conj().reshape(dim, dim), c, res)
    return best


def modification_operator(mu: float, n: int, d: int = 3) -> np.ndarray:
    """Diagonal of ``prod_j mu^(j S_j^z)`` on ``n`` spin-1 sites (``j = 1..n``)."""
    sz = np.array([1.0, 0.0, -1.0]) if d == 3 else np.linspace((d - 1) / 2, -(d - 1) / 2, d)
    diag = np.ones(1)
    for j in range(1, n + 1):
        diag = np.kron(diag, float(mu) ** (j * sz))
    return diag
