"""Pauli strings on up to 64 spins as (x-mask, z-mask, phase) triples.

A string stands for ``i**phase * X^x_mask * Z^z_mask``: Z acts first, then X.
Basis states are integers whose bit ``j`` is set when spin ``j`` is flipped away
from the all-up vacuum, so ``Z_j`` gives ``-1`` on a set bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable

import numpy as np

MAX_SPINS = 64

_PHASES = (1, 1j, -1, -1j)


class PauliWidthError(ValueError):
    pass


def popcount(v: int) -> int:
    return int(v).bit_count()


@dataclass(frozen=True)
class PauliString:
    n: int
    x_mask: int = 0
    z_mask: int = 0
    phase: int = 0  # power of i, kept in 0..3

    def __post_init__(self):
        if not 0 < self.n <= MAX_SPINS:
            raise PauliWidthError(f"width {self.n} outside 1..{MAX_SPINS}")
        limit = 1 << self.n
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise PauliWidthError(f"mask wider than {self.n} bits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def from_x(cls, n: int, links: Iterable[int]) -> "PauliString":
        return cls(n, x_mask=_links_to_mask(links))

    @classmethod
    def from_z(cls, n: int, links: Iterable[int]) -> "PauliString":
        return cls(n, z_mask=_links_to_mask(links))

    @property
    def phase_value(self) -> complex:
        return _PHASES[self.phase]

    @property
    def sign(self) -> int:
        """Real sign of a Hermitian string with no overlapping X/Z sites."""
        if self.phase % 2:
            raise ValueError("string carries an imaginary phase")
        return 1 if self.phase == 0 else -1

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    @property
    def is_hermitian(self) -> bool:
        return (self.phase - popcount(self.x_mask & self.z_mask)) % 2 == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.n
        states = np.arange(dim, dtype=np.uint64)
        out, ph = apply_many(self, states)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[out.astype(np.int64), np.arange(dim)] = ph
        return mat


def _links_to_mask(links: Iterable[int]) -> int:
    return reduce(lambda a, j: a ^ (1 << j), links, 0)


def _check_width(P: PauliString, Q: PauliString) -> None:
    if P.n != Q.n:
        raise PauliWidthError(f"width mismatch: {P.n} vs {Q.n}")


def apply(P: PauliString, bits: int) -> tuple[int, int]:
    """Act on a basis state; returns the new state and a phase exponent (power of i)."""
    phase = P.phase + 2 * (popcount(P.z_mask & bits) & 1)
    return bits ^ P.x_mask, phase % 4


def apply_many(P: PauliString, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`apply` over an array of uint64 states; phases as complex."""
    states = np.asarray(states, dtype=np.uint64)
    parity = np.bitwise_count(states & np.uint64(P.z_mask)) & 1
    signs = 1 - 2 * parity.astype(np.int8)
    return states ^ np.uint64(P.x_mask), P.phase_value * signs


def z_signs(z_mask: int, states: np.ndarray) -> np.ndarray:
    """``(-1)**|z_mask & b|`` for every state, as float64."""
    parity = np.bitwise_count(np.asarray(states, dtype=np.uint64) & np.uint64(z_mask)) & 1
    return 1.0 - 2.0 * parity


def commutes(P: PauliString, Q: PauliString) -> bool:
    _check_width(P, Q)
    return (popcount(P.x_mask & Q.z_mask) + popcount(P.z_mask & Q.x_mask)) % 2 == 0


def multiply(P: PauliString, Q: PauliString) -> PauliString:
    _check_width(P, Q)
    # Z^zp X^xq = (-1)^{|zp & xq|} X^xq Z^zp
    phase = P.phase + Q.phase + 2 * popcount(P.z_mask & Q.x_mask)
    return PauliString(P.n, P.x_mask ^ Q.x_mask, P.z_mask ^ Q.z_mask, phase)


def string_weight(P: PauliString) -> int:
    return popcount(P.x_mask)
