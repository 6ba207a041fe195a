"""Spin-1 operators in the S_z basis ordered (+1, 0, -1)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SpinOperatorSet:
    Sx: np.ndarray
    Sy: np.ndarray
    Sz: np.ndarray
    Splus: np.ndarray
    Sminus: np.ndarray

    @property
    def identity(self) -> np.ndarray:
        return np.eye(3, dtype=complex)


@lru_cache(maxsize=None)
def spin_one() -> SpinOperatorSet:
    sp = np.array([[0, SQRT2, 0], [0, 0, SQRT2], [0, 0, 0]], dtype=complex)
    sm = sp.T.copy()
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / SQRT2
    sy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / SQRT2
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    for m in (sp, sm, sx, sy, sz):
        m.setflags(write=False)
    return SpinOperatorSet(Sx=sx, Sy=sy, Sz=sz, Splus=sp, Sminus=sm)


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``S^{ab} = S^a S^b + S^b S^a``."""
    return a @ b + b @ a


def string_phase() -> np.ndarray:
    """``exp(i pi S_z)`` written out exactly."""
    return np.diag([-1.0, 1.0, -1.0]).astype(complex)


def pi_rotation_y() -> np.ndarray:
    """``exp(-i pi S_y)``, exact for spin 1: ``|m> -> (-1)^(1-m) |-m>``."""
    return np.array([[0, 0, 1], [0, -1, 0], [1, 0, 0]], dtype=complex)
