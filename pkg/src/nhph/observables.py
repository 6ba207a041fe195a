"""Order parameters and string order of the deformed chain, plus entanglement and fidelity measures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .linalg import DEGENERACY_TOL
from .mps import (
    StatePair,
    UniformMPS,
    canonical_form,
    expectation,
    normalized,
    string_expectation,
    transfer_matrix,
)
from .spin import spin_one, string_phase

Mode = Literal["LR", "RR"]


def order_operators() -> dict:
    """Two-site operators ``O_AF``, ``O_left``, ``O_right`` and ``O_chiral``."""
    s = spin_one()
    o_left = 0.5 * np.kron(s.Splus, s.Sminus)
    o_right = 0.5 * np.kron(s.Sminus, s.Splus)
    return {
        "af": np.kron(s.Sz, s.Sz),
        "left": o_left,
        "right": o_right,
        "chiral": o_right - o_left,
    }


@dataclass(frozen=True)
class OrderSweepRow:
    mu: float
    o_af: complex
    o_left: complex
    o_right: complex
    o_chiral: complex
    mode: Mode


def _bra_ket(mu: float, mode: Mode):
    pair = StatePair.asymmetric_aklt(mu)
    if mode == "LR":
        return pair.left, pair.right
    if mode == "RR":
        return pair.right, pair.right
    raise ValueError(f"mode must be 'LR' or 'RR', got {mode!r}")


def order_parameters(mu: float, mode: Mode = "LR", tol: float = DEGENERACY_TOL) -> OrderSweepRow:
    bra, ket = _bra_ket(mu, mode)
    ops = order_operators()
    af = expectation(bra, ket, ops["af"], 2, tol)
    left = expectation(bra, ket, ops["left"], 2, tol)
    right = expectation(bra, ket, ops["right"], 2, tol)
    return OrderSweepRow(float(mu), af, left, right, right - left, mode)


def string_order(mu: float, m: int, mode: Mode = "LR", tol: float = DEGENERACY_TOL) -> complex:
    """``<S^z_i exp(i pi sum S^z) S^z_j>`` over a string of ``m`` sites (``m >= 2``)."""
    bra, ket = _bra_ket(mu, mode)
    return string_expectation(bra, ket, spin_one().Sz, string_phase(), m, tol)


def entanglement_spectrum(state: UniformMPS) -> np.ndarray:
    """Squared Schmidt values of a half-infinite cut, descending, summing to 1."""
    _, weights = canonical_form(state)
    p = weights**2
    return p / p.sum()


def infidelity(reference: UniformMPS, candidate: UniformMPS, sites: int = 1) -> float:
    """Per-site infidelity ``1 - |lambda|^(1/sites)`` of the mixed transfer matrix.

    Both states are first rescaled to unit RR dominant eigenvalue. ``sites`` is
    the number of physical sites carried by one tensor (for blocked states).
    Only the largest modulus is needed, so modulus-degenerate mixed spectra
    are accepted.
    """
    if reference.d != candidate.d:
        raise ValueError("states live on different physical spaces")
    e = transfer_matrix(normalized(reference), normalized(candidate)).matrix
    lead = float(np.abs(np.linalg.eigvals(e)).max())
    eta = 1.0 - lead ** (1.0 / sites)
    return float(min(max(eta, 0.0), 1.0))
