"""Multi-site imaginary-time evolution (iTEBD) for non-Hermitian local projectors.

A ``k``-site unit cell holds tensors ``X_i = T_i G_i`` (site tensor with its
right Schmidt weights already absorbed) and the weight vectors ``G_i``.
``weights[i]`` lives on the bond to the right of site ``i``; the bond left of
site 0 carries ``weights[k-1]``.

One window update applies ``exp(-dtau Pi)`` to ``k`` neighbouring sites and
re-splits the block by a chain of SVDs from the right. The leftmost tensor is
recovered by contracting the evolved block with the conjugates of the new
right-orthonormal tensors, so no Schmidt weight is ever inverted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .linalg import LinalgError, svd
from .mps import UniformMPS, canonical_form
from .parent import LocalProjector

WEIGHT_FLOOR = 1e-14


class BondCollapseError(LinalgError):
    """Every Schmidt weight on a bond fell below the floor."""


@dataclass(eq=False)
class UnitCellState:
    site_tensors: List[np.ndarray]
    schmidt_weights: List[np.ndarray]
    d_max: int

    def __post_init__(self):
        if len(self.site_tensors) != len(self.schmidt_weights):
            raise ValueError("need one weight vector per site tensor")
        k = len(self.site_tensors)
        for i, x in enumerate(self.site_tensors):
            right = self.site_tensors[(i + 1) % k]
            if x.shape[2] != right.shape[1] or x.shape[2] != len(self.schmidt_weights[i]):
                raise ValueError(f"inconsistent bond dimension to the right of site {i}")

    @property
    def k(self) -> int:
        return len(self.site_tensors)

    @property
    def d(self) -> int:
        return self.site_tensors[0].shape[0]

    def copy(self) -> "UnitCellState":
        return UnitCellState([x.copy() for x in self.site_tensors],
                             [g.copy() for g in self.schmidt_weights], self.d_max)

    def padded_weights(self) -> np.ndarray:
        out = np.zeros((self.k, self.d_max))
        for i, g in enumerate(self.schmidt_weights):
            out[i, : len(g)] = g
        return out

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "D_max": self.d_max,
            "site_tensors": [np.stack([x.real, x.imag], axis=-1).tolist() for x in self.site_tensors],
            "schmidt_weights": [g.tolist() for g in self.schmidt_weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UnitCellState":
        xs = []
        for raw in data["site_tensors"]:
            a = np.asarray(raw, dtype=float)
            xs.append(a[..., 0] + 1j * a[..., 1])
        gs = [np.asarray(g, dtype=float) for g in data["schmidt_weights"]]
        return cls(xs, gs, int(data["D_max"]))


@dataclass(frozen=True, eq=False)
class EvolutionGate:
    matrix: np.ndarray
    dtau: float
    source: LocalProjector


@dataclass
class ConvergenceTrace:
    steps: int = 0
    e_history: List[float] = field(default_factory=list)
    e_tol: float = 1e-14
    converged: bool = False
    seed: Optional[int] = None
    dtau: float = 5e-3
    check_interval: int = 1
    adjoint: bool = False

    def to_dict(self, tail: Optional[int] = None) -> dict:
        hist = self.e_history if tail is None else self.e_history[-tail:]
        return {
            "steps": self.steps,
            "e_history": [float(e) for e in hist],
            "e_tol": self.e_tol,
            "converged": self.converged,
            "seed": self.seed,
            "dtau": self.dtau,
            "check_interval": self.check_interval,
            "adjoint": self.adjoint,
        }


def make_gate(p: LocalProjector, dtau: float, tol: float = 1e-10) -> EvolutionGate:
    """``exp(-dtau Pi) = I + (exp(-dtau) - 1) Pi``, valid because ``Pi^2 = Pi``."""
    if dtau < 0:
        raise ValueError("dtau must be non-negative")
    pi = p.matrix
    if np.abs(pi @ pi - pi).max() > tol:
        raise ValueError("local term is not idempotent; closed-form exponential does not apply")
    gate = np.eye(pi.shape[0], dtype=complex) + np.expm1(-dtau) * pi
    return EvolutionGate(gate, float(dtau), p)


def _fast_svd(m):
    # the window matrix is already a contiguous complex array; skip validation
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return svd(m)


def _truncate(s: np.ndarray, d_max: int) -> int:
    keep = min(d_max, int(np.count_nonzero(s > WEIGHT_FLOOR)))
    if keep == 0:
        raise BondCollapseError("all Schmidt weights fell below the floor")
    return keep


def _update_window(xs, lam_left, gate, d_max):
    """Evolve ``k`` tensors under ``gate``; returns new tensors and the ``k-1`` inner weights."""
    k = len(xs)
    d = xs[0].shape[0]
    dl = xs[0].shape[1]
    th = xs[0].transpose(1, 0, 2).reshape(dl * d, -1)
    for x in xs[1:]:
        th = th @ x.transpose(1, 0, 2).reshape(x.shape[1], -1)
        th = th.reshape(-1, x.shape[2])
    dr = th.shape[1]
    dk = d**k
    # physical legs to the front, apply gate, back to (Dl, d^k, Dr)
    th = th.reshape(dl, dk, dr).transpose(1, 0, 2).reshape(dk, dl * dr)
    th = (gate @ th).reshape(dk, dl, dr).transpose(1, 0, 2)

    full = lam_left[:, None, None] * th
    norm = np.linalg.norm(full)
    if not np.isfinite(norm) or norm == 0.0:
        raise BondCollapseError("evolved block vanished")
    th = th / norm
    cur = full / norm

    new = [None] * k
    weights = [None] * (k - 1)
    right = dr
    for j in range(k - 1, 0, -1):
        u, s, vh = _fast_svd(cur.reshape(dl * d**j, d * right))
        keep = _truncate(s / np.linalg.norm(s), d_max)
        u, s, vh = u[:, :keep], s[:keep], vh[:keep]
        s = s / np.linalg.norm(s)
        new[j] = vh.reshape(keep, d, right).transpose(1, 0, 2)
        weights[j - 1] = s
        cur = (u * s).reshape(dl, d**j, keep)
        right = keep

    # X_0' = theta . conj(X_1' ... X_{k-1}'), contracted over physical legs and the right bond
    rest = new[1].transpose(1, 0, 2).reshape(new[1].shape[1], -1)
    for x in new[2:]:
        rest = rest.reshape(-1, x.shape[1]) @ x.transpose(1, 0, 2).reshape(x.shape[1], -1)
    chi = new[1].shape[1]
    rest = rest.reshape(chi, -1)
    x0 = th.reshape(dl, d, -1) @ rest.conj().T
    new[0] = x0.transpose(1, 0, 2)
    return new, weights


def itebd_sweep(state: UnitCellState, gate: EvolutionGate) -> UnitCellState:
    """One imaginary-time step: the window update at each of the ``k`` offsets."""
    k = state.k
    xs = list(state.site_tensors)
    gs = list(state.schmidt_weights)
    g = gate.matrix
    if g.shape[0] != state.d**k:
        raise ValueError(f"gate acts on {g.shape[0]} states, cell window has {state.d**k}")
    for offset in range(k):
        idx = [(offset + j) % k for j in range(k)]
        new, inner = _update_window([xs[i] for i in idx], gs[(offset - 1) % k], g, state.d_max)
        for j, i in enumerate(idx):
            xs[i] = new[j]
        for j in range(k - 1):
            gs[idx[j]] = inner[j]
    return UnitCellState(xs, gs, state.d_max)


def random_state(k: int, d: int, d_max: int, seed: Optional[int]) -> UnitCellState:
    rng = np.random.default_rng(seed)
    xs = [rng.uniform(-1, 1, (d, d_max, d_max)) + 1j * rng.uniform(-1, 1, (d, d_max, d_max))
          for _ in range(k)]
    gs = [np.full(d_max, 1.0 / np.sqrt(d_max)) for _ in range(k)]
    return UnitCellState(xs, gs, d_max)


def from_uniform(state: UniformMPS, k: int, d_max: Optional[int] = None) -> UnitCellState:
    """Exact canonical ``k``-site cell of a one-site uniform MPS."""
    gamma, weights = canonical_form(state)
    d_max = state.D if d_max is None else d_max
    if state.D > d_max:
        raise ValueError(f"bond dimension {state.D} exceeds D_max={d_max}")
    x = gamma * weights[None, None, :]
    return UnitCellState([x.copy() for _ in range(k)], [weights.copy() for _ in range(k)], d_max)


def to_uniform(state: UnitCellState) -> UniformMPS:
    """Flatten the cell into one tensor over the merged ``d^k`` physical index.

    The product ``X_1 ... X_k`` is used directly; it differs from the
    square-root-symmetric split only by a virtual gauge, so it represents the
    same state and needs no weight inversion.
    """
    xs = state.site_tensors
    d = state.d
    dl = xs[0].shape[1]
    th = xs[0].transpose(1, 0, 2).reshape(dl * d, -1)
    for x in xs[1:]:
        th = (th @ x.transpose(1, 0, 2).reshape(x.shape[1], -1)).reshape(-1, x.shape[2])
    dr = th.shape[1]
    t = th.reshape(dl, d**state.k, dr).transpose(1, 0, 2)
    return UniformMPS(t, {"source": "itebd", "cell": state.k})


def find_ground_state(
    p: LocalProjector,
    d_max: int = 12,
    dtau: float = 5e-3,
    e_tol: float = 1e-14,
    max_steps: int = 200_000,
    adjoint: bool = False,
    seed: Optional[int] = 0,
    init: Optional[UnitCellState] = None,
    check_interval: int = 10,
    callback: Optional[Callable[[int, UnitCellState, ConvergenceTrace], None]] = None,
):
    """Evolve in imaginary time until the Schmidt weights stop moving.

    The weights are compared every ``check_interval`` steps, i.e. across an
    imaginary-time increment ``check_interval * dtau``; the run is converged
    once ``e = sum_ij (s_ij(new) - s_ij(old))^2`` drops below ``e_tol``.
    ``adjoint=True`` evolves with ``Pi^H`` instead of ``Pi``.

    Returns ``(state, trace)``; a run that exhausts ``max_steps`` is returned
    with ``trace.converged = False``.
    """
    if d_max < 2:
        raise ValueError("d_max must be >= 2")
    if dtau <= 0 or e_tol <= 0:
        raise ValueError("dtau and e_tol must be positive")
    if check_interval < 1:
        raise ValueError("check_interval must be >= 1")
    term = p.adjoint() if adjoint else p
    gate = make_gate(term, dtau)
    state = random_state(p.k, p.d, d_max, seed) if init is None else init.copy()
    trace = ConvergenceTrace(e_tol=e_tol, seed=seed, dtau=dtau,
                             check_interval=check_interval, adjoint=adjoint)
    reference = state.padded_weights()
    for step in range(1, max_steps + 1):
        state = itebd_sweep(state, gate)
        trace.steps = step
        if step % check_interval:
            continue
        current = state.padded_weights()
        e = float(np.sum((current - reference) ** 2))
        reference = current
        trace.e_history.append(e)
        if callback is not None:
            callback(step, state, trace)
        if e < e_tol:
            trace.converged = True
            break
    return state, trace


def save_checkpoint(path, state: UnitCellState, trace: ConvergenceTrace, tail: int = 100, meta=None):
    data = {**(meta or {}), **state.to_dict(), "dtau": trace.dtau, "step": trace.steps,
            "seed": trace.seed, "trace": trace.to_dict(tail=tail)}
    Path(path).write_text(json.dumps(data, indent=1))


def load_checkpoint(path):
    """Returns ``(state, data)`` where ``data`` is the raw checkpoint dictionary."""
    data = json.loads(Path(path).read_text())
    return UnitCellState.from_dict(data), data
