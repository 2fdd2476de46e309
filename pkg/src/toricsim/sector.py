"""Conserved blocks of the interpolating Hamiltonian.

Every star operator and both dual Z-loops commute with all terms of ``H(tau)``,
so the computational basis splits into blocks labelled by the star charges and
two winding parities.  The winding ``(i, j)`` of a state is read from the w-loops:
``i`` from ``w2`` (which crosses ``t1``), ``j`` from ``w1`` (which crosses ``t2``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .lattice import TorusLattice
from .model import BlockOperator, HamiltonianSpec, compile_operator
from .pauli import PauliString, commutes, popcount, z_signs

WINDINGS = ((0, 0), (0, 1), (1, 0), (1, 1))


class SectorError(ValueError):
    pass


class NotBlockDiagonalError(SectorError):
    pass


@dataclass(frozen=True)
class SectorLabel:
    winding: tuple[int, int] = (0, 0)
    star_charges: tuple[int, ...] | None = None  # None means all +1

    def __post_init__(self):
        if tuple(self.winding) not in WINDINGS:
            raise SectorError(f"winding must be in {WINDINGS}, got {self.winding!r}")
        object.__setattr__(self, "winding", tuple(int(w) for w in self.winding))
        if self.star_charges is not None:
            charges = tuple(int(c) for c in self.star_charges)
            if any(c not in (1, -1) for c in charges):
                raise SectorError("star charges must be +1 or -1")
            if int(np.prod(charges)) != 1:
                raise SectorError("product of star charges must be +1")
            object.__setattr__(self, "star_charges", None if all(c == 1 for c in charges) else charges)

    @property
    def neutral(self) -> bool:
        return self.star_charges is None

    def charges(self, num_stars: int) -> tuple[int, ...]:
        return (1,) * num_stars if self.star_charges is None else self.star_charges

    def to_dict(self) -> dict:
        return {"winding": list(self.winding), "star_charges": self.star_charges}


@dataclass(frozen=True)
class SectorBasis:
    lattice: TorusLattice
    label: SectorLabel
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, bits: int) -> int:
        i = int(np.searchsorted(self.states, np.uint64(bits)))
        if i == self.dim or int(self.states[i]) != bits:
            raise KeyError(bits)
        return i

    def __contains__(self, bits: int) -> bool:
        try:
            self.index_of(bits)
        except KeyError:
            return False
        return True

    def basis_vector(self, bits: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index_of(bits)] = 1.0
        return v

    def embed(self, v: np.ndarray) -> np.ndarray:
        """Lift a block vector into the full ``2**n`` space."""
        full = np.zeros(1 << self.lattice.n, dtype=np.result_type(v, float))
        full[self.states.astype(np.int64)] = v
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.states.astype(np.int64)]

    def to_dict(self, first: int = 16) -> dict:
        return {
            "L": self.lattice.L,
            "label": self.label.to_dict(),
            "dim": self.dim,
            "states": [hex(int(s)) for s in self.states[:first]],
        }


def star_charges(lat: TorusLattice, bits: int) -> tuple[int, ...]:
    return tuple(1 - 2 * (popcount(m & bits) & 1) for m in lat.star_masks)


def winding(lat: TorusLattice, bits: int) -> tuple[int, int]:
    w1, w2 = lat.w_masks
    return popcount(w2 & bits) & 1, popcount(w1 & bits) & 1


def classify(lat: TorusLattice, bits: int) -> SectorLabel:
    return SectorLabel(winding(lat, bits), star_charges(lat, bits))


def classify_many(lat: TorusLattice, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per state: whether every star charge is +1, and the winding code ``2*i + j``."""
    states = np.asarray(states, dtype=np.uint64)
    neutral = np.ones(len(states), dtype=bool)
    for m in lat.star_masks:
        neutral &= (np.bitwise_count(states & np.uint64(m)) & 1) == 0
    w1, w2 = lat.w_masks
    i = np.bitwise_count(states & np.uint64(w2)) & 1
    j = np.bitwise_count(states & np.uint64(w1)) & 1
    return neutral, (2 * i + j).astype(np.int8)


def closure(masks) -> np.ndarray:
    """All XOR combinations of the given masks (assumed independent), unsorted."""
    out = np.zeros(1, dtype=np.uint64)
    for m in masks:
        out = np.concatenate([out, out ^ np.uint64(m)])
    return out


def _charged_representative(lat: TorusLattice, charges: tuple[int, ...]) -> int:
    # pair up the -1 stars and join each pair by an open string: right, then up
    L = lat.L
    defects = [s for s, c in enumerate(charges) if c == -1]
    bits = 0
    for a, b in zip(defects[::2], defects[1::2]):
        ya, xa = divmod(a, L)
        yb, xb = divmod(b, L)
        x, y = xa, ya
        while x != xb:
            bits ^= 1 << lat.link_index(x, y, 0)
            x = (x + 1) % L
        while y != yb:
            bits ^= 1 << lat.link_index(x, y, 1)
            y = (y + 1) % L
    return bits


def enumerate_sector(lat: TorusLattice, label: SectorLabel = SectorLabel()) -> SectorBasis:
    """All basis states of one block, ascending.

    The block is a coset of the group generated by the plaquette flips; one
    plaquette is dropped because the product of all of them is the identity.
    """
    states = closure(lat.plaquette_masks[:-1]) ^ np.uint64(coset_representative(lat, label))
    states.sort()
    return SectorBasis(lat, label, states)


def coset_representative(lat: TorusLattice, label: SectorLabel) -> int:
    charges = label.charges(lat.num_stars)
    if len(charges) != lat.num_stars:
        raise SectorError(f"expected {lat.num_stars} star charges, got {len(charges)}")
    rep = 0 if label.neutral else _charged_representative(lat, charges)
    i, j = label.winding
    ri, rj = winding(lat, rep)
    t1, t2 = lat.t_masks
    if ri != i:
        rep ^= t1
    if rj != j:
        rep ^= t2
    return rep


def _span_coordinates(generators, target: int) -> int | None:
    """Bits ``c`` with ``XOR_{k in c} generators[k] == target``, or None outside the span."""
    pivots: dict[int, tuple[int, int]] = {}  # leading bit -> (reduced vector, coordinate combination)
    for k, g in enumerate(generators):
        vec, comb = g, 1 << k
        while vec:
            top = vec.bit_length() - 1
            if top not in pivots:
                pivots[top] = (vec, comb)
                break
            pv, pc = pivots[top]
            vec, comb = vec ^ pv, comb ^ pc
    vec, comb = target, 0
    while vec:
        top = vec.bit_length() - 1
        if top not in pivots:
            return None
        pv, pc = pivots[top]
        vec, comb = vec ^ pv, comb ^ pc
    return comb


@dataclass(frozen=True)
class CoordinateBasis:
    """One block in plaquette coordinates: index ``c`` is ``rep ^ XOR_{k in c} B_k``.

    Every plaquette flip is then a constant XOR on the index, so the block
    operator needs no index arrays.  The order is not ascending in bitmask; use
    :class:`SectorBasis` where the canonical order matters.
    """

    lattice: TorusLattice
    label: SectorLabel
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def generators(self) -> tuple[int, ...]:
        return self.lattice.plaquette_masks[:-1]


def coordinate_basis(lat: TorusLattice, label: SectorLabel = SectorLabel()) -> CoordinateBasis:
    states = closure(lat.plaquette_masks[:-1]) ^ np.uint64(coset_representative(lat, label))
    return CoordinateBasis(lat, label, states)


def compile_coordinate(H: HamiltonianSpec, basis: CoordinateBasis) -> BlockOperator:
    """Block operator of a sector-preserving ``H`` whose X-terms carry no Z factor."""
    check_block_diagonal(H, basis.lattice)
    diag = np.full(basis.dim, H.constant, dtype=float)
    xor_hops: dict[int, float] = {}
    for P, c in H.terms:
        if P.x_mask == 0:
            diag += (c * P.sign) * z_signs(P.z_mask, basis.states)
            continue
        if P.z_mask:
            raise ValueError("coordinate blocks only take pure X or pure Z terms")
        coords = _span_coordinates(basis.generators, P.x_mask)
        if coords is None:
            raise NotBlockDiagonalError(f"term x={P.x_mask:#x} leaves the block")
        xor_hops[coords] = xor_hops.get(coords, 0.0) + c * P.sign
    return BlockOperator(basis.dim, diag, [], sorted(xor_hops.items()))


def conserved_operators(lat: TorusLattice) -> list[PauliString]:
    n = lat.n
    ops = [PauliString(n, z_mask=m) for m in lat.star_masks]
    ops += [PauliString(n, z_mask=m) for m in lat.w_masks]
    return ops


def check_block_diagonal(H: HamiltonianSpec, lat: TorusLattice) -> None:
    for P, _ in H.terms:
        for C in conserved_operators(lat):
            if not commutes(P, C):
                raise NotBlockDiagonalError(
                    f"term x={P.x_mask:#x} z={P.z_mask:#x} does not conserve the sector labels"
                )


def project_hamiltonian(H: HamiltonianSpec, basis: SectorBasis) -> BlockOperator:
    if H.n != basis.lattice.n:
        raise SectorError("Hamiltonian and basis widths differ")
    check_block_diagonal(H, basis.lattice)
    return compile_operator(H, basis.states)


def neutral_blocks(lat: TorusLattice) -> dict[tuple[int, int], SectorBasis]:
    return {w: enumerate_sector(lat, SectorLabel(w)) for w in WINDINGS}


def all_charge_labels(lat: TorusLattice):
    """Every consistent (winding, charges) label; only practical for small L."""
    k = lat.num_stars
    for flips in itertools.product((1, -1), repeat=k - 1):
        last = int(np.prod(flips))
        for w in WINDINGS:
            yield SectorLabel(w, flips + (last,))
