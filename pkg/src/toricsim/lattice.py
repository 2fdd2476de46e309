"""Square lattice on the torus with spins living on links.

Links are indexed as ``2 * (x + L * y) + d`` where ``d = 0`` is the horizontal
link leaving site ``(x, y)`` towards ``(x + 1, y)`` and ``d = 1`` the vertical
link leaving it towards ``(x, y + 1)``.  Plaquette ``(x, y)`` has its lower-left
corner at site ``(x, y)``.  Plaquettes and sites are numbered ``x + L * y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from operator import xor
from typing import Sequence

HORIZONTAL = 0
VERTICAL = 1


class LatticeError(ValueError):
    pass


def _mask(links: Sequence[int]) -> int:
    return reduce(xor, (1 << j for j in links), 0)


@dataclass(frozen=True)
class TorusLattice:
    L: int
    n: int = field(init=False)
    plaquettes: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    stars: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    t_loops: tuple[tuple[int, ...], tuple[int, ...]] = field(init=False, repr=False)
    w_loops: tuple[tuple[int, ...], tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.L, int) or self.L < 2:
            raise LatticeError(f"torus needs L >= 2, got {self.L!r}")
        L = self.L
        li = self.link_index
        plaqs = []
        stars = []
        for y in range(L):
            for x in range(L):
                plaqs.append((li(x, y, 0), li(x, y, 1), li(x, y + 1, 0), li(x + 1, y, 1)))
                stars.append((li(x, y, 0), li(x, y, 1), li(x - 1, y, 0), li(x, y - 1, 1)))
        t1 = tuple(li(x, 0, HORIZONTAL) for x in range(L))
        t2 = tuple(li(0, y, VERTICAL) for y in range(L))
        w1 = tuple(li(x, 0, VERTICAL) for x in range(L))
        w2 = tuple(li(0, y, HORIZONTAL) for y in range(L))
        object.__setattr__(self, "n", 2 * L * L)
        object.__setattr__(self, "plaquettes", tuple(plaqs))
        object.__setattr__(self, "stars", tuple(stars))
        object.__setattr__(self, "t_loops", (t1, t2))
        object.__setattr__(self, "w_loops", (w1, w2))

    def link_index(self, x: int, y: int, d: int) -> int:
        if d not in (HORIZONTAL, VERTICAL):
            raise LatticeError(f"direction must be 0 or 1, got {d!r}")
        L = self.L
        return 2 * ((x % L) + L * (y % L)) + d

    def link_coords(self, j: int) -> tuple[int, int, int]:
        if not 0 <= j < self.n:
            raise LatticeError(f"link {j} out of range for n={self.n}")
        cell, d = divmod(j, 2)
        y, x = divmod(cell, self.L)
        return x, y, d

    def site_id(self, s) -> int:
        """Accept either an integer id or an ``(x, y)`` pair."""
        L = self.L
        if isinstance(s, tuple):
            x, y = s
            if not (0 <= x < L and 0 <= y < L):
                raise LatticeError(f"coordinates {s} outside the {L}x{L} torus")
            return x + L * y
        if not 0 <= s < L * L:
            raise LatticeError(f"id {s} outside [0, {L * L})")
        return int(s)

    @property
    def num_plaquettes(self) -> int:
        return self.L * self.L

    @property
    def num_stars(self) -> int:
        return self.L * self.L

    @property
    def plaquette_masks(self) -> tuple[int, ...]:
        return tuple(_mask(p) for p in self.plaquettes)

    @property
    def star_masks(self) -> tuple[int, ...]:
        return tuple(_mask(s) for s in self.stars)

    @property
    def t_masks(self) -> tuple[int, int]:
        return _mask(self.t_loops[0]), _mask(self.t_loops[1])

    @property
    def w_masks(self) -> tuple[int, int]:
        return _mask(self.w_loops[0]), _mask(self.w_loops[1])

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "n": self.n,
            "plaquettes": [sorted(p) for p in self.plaquettes],
            "stars": [sorted(s) for s in self.stars],
            "t_loops": [list(t) for t in self.t_loops],
            "w_loops": [list(w) for w in self.w_loops],
        }


def build_torus(L: int) -> TorusLattice:
    return TorusLattice(L)


def plaquette_links(lat: TorusLattice, p) -> frozenset[int]:
    return frozenset(lat.plaquettes[lat.site_id(p)])


def star_links(lat: TorusLattice, s) -> frozenset[int]:
    return frozenset(lat.stars[lat.site_id(s)])


def loops(lat: TorusLattice) -> tuple[frozenset[int], ...]:
    """Return ``(t1, t2, w1, w2)``.

    ``t1``/``t2`` are the incontractible X-loops along a row / a column; ``w1``/``w2``
    are the dual Z-loops, ``w2`` crossing ``t1`` once and ``w1`` crossing ``t2`` once.
    """
    t1, t2 = lat.t_loops
    w1, w2 = lat.w_loops
    return frozenset(t1), frozenset(t2), frozenset(w1), frozenset(w2)
