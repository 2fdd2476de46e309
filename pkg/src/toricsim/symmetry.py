"""Zero-momentum basis of lattice translations.

A uniform Hamiltonian commutes with every translation of the torus, and so does
the string vacuum.  Evolution from a translation-invariant state therefore stays
in the span of the orbit states ``|r~> = N_r**-0.5 * sum_{s in orbit(r)} |s>``,
which is about ``L**2`` times smaller than the full space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import TorusLattice
from .model import BlockOperator, HamiltonianSpec
from .pauli import z_signs

MAX_LINKS = 26


def translation_permutations(lat: TorusLattice) -> list[np.ndarray]:
    """One link permutation per translation ``(a, b)``; entry ``j`` is the image of link ``j``."""
    perms = []
    for a in range(lat.L):
        for b in range(lat.L):
            perm = np.empty(lat.n, dtype=np.int64)
            for j in range(lat.n):
                x, y, d = lat.link_coords(j)
                perm[j] = lat.link_index(x + a, y + b, d)
            perms.append(perm)
    return perms


def permute_bits(states: np.ndarray, perm: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.uint64)
    out = np.zeros_like(states)
    for j, k in enumerate(perm):
        out |= ((states >> np.uint64(j)) & np.uint64(1)) << np.uint64(k)
    return out


@dataclass
class TranslationBasis:
    """Orbit representatives (smallest bitmask of each orbit) and orbit sizes."""

    lattice: TorusLattice
    states: np.ndarray  # sorted representatives
    orbit_sizes: np.ndarray
    _rep_table: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def representative(self, bits: np.ndarray) -> np.ndarray:
        return self._rep_table[np.asarray(bits, dtype=np.int64)]

    def index_of_states(self, bits: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.states, self.representative(bits))

    def from_full(self, psi: np.ndarray) -> np.ndarray:
        """Coordinates of an invariant full-space vector."""
        return np.sqrt(self.orbit_sizes) * np.asarray(psi)[self.states.astype(np.int64)]

    def to_full(self, v: np.ndarray) -> np.ndarray:
        idx = self.index_of_states(np.arange(1 << self.lattice.n))
        return (np.asarray(v) / np.sqrt(self.orbit_sizes))[idx]

    def overlap(self, phi_states: np.ndarray, phi: np.ndarray, v: np.ndarray) -> complex:
        """``<phi|v>`` for an invariant ``phi`` given on the sorted bitmasks ``phi_states``."""
        phi_states = np.asarray(phi_states, dtype=np.uint64)
        pos = np.searchsorted(phi_states, self.states)
        pos[pos == len(phi_states)] = 0
        present = phi_states[pos] == self.states
        amps = np.where(present, np.asarray(phi)[pos], 0.0)
        return complex(np.vdot(np.sqrt(self.orbit_sizes) * amps, v))


def translation_basis(lat: TorusLattice) -> TranslationBasis:
    if lat.n > MAX_LINKS:
        raise ValueError(f"translation basis needs the full 2**n table; n={lat.n} is too large")
    every = np.arange(1 << lat.n, dtype=np.uint64)
    rep = every.copy()
    for perm in translation_permutations(lat)[1:]:
        np.minimum(rep, permute_bits(every, perm), out=rep)
    reps, sizes = np.unique(rep, return_counts=True)
    return TranslationBasis(lat, reps, sizes.astype(float), rep)


def compile_symmetric(H: HamiltonianSpec, basis: TranslationBasis) -> BlockOperator:
    """Matrix of a translation-invariant ``H`` in the orbit basis.

    ``<r~|H|s~> = sum_t h_t(s -> r) sqrt(N_r / N_s)`` summed over terms ``t`` whose
    image of the representative ``r`` lies in the orbit of ``s``.
    """
    states = basis.states
    sqrt_n = np.sqrt(basis.orbit_sizes)
    diag = np.full(basis.dim, H.constant, dtype=float)
    hops = []
    for P, c in H.terms:
        if P.x_mask == 0:
            diag += (c * P.sign) * z_signs(P.z_mask, states)
            continue
        target = states ^ np.uint64(P.x_mask)
        src = basis.index_of_states(target)
        # Hermiticity lets us act on the row representative; X and Z masks never overlap here
        w = (c * P.sign) * z_signs(P.z_mask, states) * sqrt_n / sqrt_n[src]
        hops.append((src.astype(np.int32), w))
    return BlockOperator(basis.dim, diag, hops)
