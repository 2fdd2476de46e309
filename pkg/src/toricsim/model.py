"""Hamiltonians of the toric-code interpolation, its gauge limit and the dual Ising model.

Every Hamiltonian is a :class:`HamiltonianSpec`: a list of real-weighted Pauli
strings plus a scalar offset.  :func:`compile_operator` turns one into a
matrix-free operator over either the full ``2**n`` space or a sorted list of
basis states closed under its terms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.linalg import LinearOperator

from .lattice import HORIZONTAL, VERTICAL, TorusLattice
from .pauli import PauliString, z_signs

Term = tuple[PauliString, float]


class ParameterError(ValueError):
    pass


class BasisClosureError(ValueError):
    """A term maps a basis state outside the basis it is projected on."""


@dataclass(frozen=True)
class HamiltonianSpec:
    n: int
    terms: tuple[Term, ...] = ()
    constant: float = 0.0

    def __post_init__(self):
        for P, c in self.terms:
            if P.n != self.n:
                raise ParameterError(f"term of width {P.n} in a width-{self.n} Hamiltonian")
            if not math.isfinite(c):
                raise ParameterError("non-finite coefficient")
            if P.phase not in (0, 2) or P.x_mask & P.z_mask:
                raise ParameterError("terms must be real X/Z strings with sign +-1")
        if not math.isfinite(self.constant):
            raise ParameterError("non-finite constant")

    def __add__(self, other: "HamiltonianSpec") -> "HamiltonianSpec":
        if other.n != self.n:
            raise ParameterError("width mismatch")
        return HamiltonianSpec(self.n, self.terms + other.terms, self.constant + other.constant)

    def scaled(self, a: float) -> "HamiltonianSpec":
        if a == 0:
            return HamiltonianSpec(self.n)
        return HamiltonianSpec(self.n, tuple((P, a * c) for P, c in self.terms), a * self.constant)

    def to_dense(self) -> np.ndarray:
        """Term-by-term dense sum; independent of :func:`compile_operator`."""
        if self.n > 14:
            raise ValueError("dense build refused above 14 spins")
        dim = 1 << self.n
        mat = self.constant * np.eye(dim, dtype=complex)
        for P, c in self.terms:
            mat += c * P.to_dense()
        return mat

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "constant": self.constant,
            "terms": [
                {"x": hex(P.x_mask), "z": hex(P.z_mask), "sign": P.sign, "coeff": c}
                for P, c in self.terms
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        n = int(d["n"])
        terms = tuple(
            (PauliString(n, int(t["x"], 16), int(t["z"], 16), 0 if t.get("sign", 1) > 0 else 2),
             float(t["coeff"]))
            for t in d["terms"]
        )
        return cls(n, terms, float(d.get("constant", 0.0)))

    @classmethod
    def from_json(cls, text: str) -> "HamiltonianSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ModelParams:
    U: float = 20.0
    g: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        for name in ("U", "g", "xi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class Schedule:
    """Interpolating function ``f: [0, 1] -> [0, 1]`` with ``f(0) = 0`` and ``f(1) = 1``."""

    kind: Literal["linear", "trig-smooth"] = "linear"

    def __post_init__(self):
        if self.kind not in ("linear", "trig-smooth"):
            raise ParameterError(f"unknown schedule {self.kind!r}")

    def __call__(self, tau: float) -> float:
        if self.kind == "linear":
            return float(tau)
        return math.sin(0.5 * math.pi * tau) ** 2

    def derivative(self, tau: float) -> float:
        if self.kind == "linear":
            return 1.0
        return 0.5 * math.pi * math.sin(math.pi * tau)


def _check_tau(tau: float) -> None:
    if not 0.0 <= tau <= 1.0:
        raise ParameterError(f"tau must lie in [0, 1], got {tau!r}")


def _x_terms(n: int, masks: Sequence[int], c: float) -> tuple[Term, ...]:
    if c == 0:
        return ()
    return tuple((PauliString(n, x_mask=m), c) for m in masks)


def _z_terms(n: int, masks: Sequence[int], c: float) -> tuple[Term, ...]:
    if c == 0:
        return ()
    return tuple((PauliString(n, z_mask=m), c) for m in masks)


def _single_links(n: int) -> list[int]:
    return [1 << j for j in range(n)]


def plaquette_term(lat: TorusLattice, g: float) -> HamiltonianSpec:
    """``-g * sum_p B_p``; no positivity check so schedules can scale it to zero."""
    return HamiltonianSpec(lat.n, _x_terms(lat.n, lat.plaquette_masks, -g))


def star_term(lat: TorusLattice, U: float) -> HamiltonianSpec:
    return HamiltonianSpec(lat.n, _z_terms(lat.n, lat.star_masks, -U))


def field_term(lat: TorusLattice, xi: float) -> HamiltonianSpec:
    if xi == 0:
        return HamiltonianSpec(lat.n)
    return HamiltonianSpec(lat.n, _z_terms(lat.n, _single_links(lat.n), -xi), xi * lat.n)


def x_field(lat: TorusLattice, strength: float) -> HamiltonianSpec:
    """Uniform transverse field ``-V * sum_j X_j`` used as a 1-local perturbation."""
    return HamiltonianSpec(lat.n, _x_terms(lat.n, _single_links(lat.n), -strength))


def kitaev_hamiltonian(lat: TorusLattice, g: float, U: float) -> HamiltonianSpec:
    if g <= 0 or U <= 0:
        raise ParameterError("g and U must be positive")
    return plaquette_term(lat, g) + star_term(lat, U)


def field_hamiltonian(lat: TorusLattice, xi: float) -> HamiltonianSpec:
    if xi <= 0:
        raise ParameterError("xi must be positive")
    return field_term(lat, xi)


def interpolated_hamiltonian(
    lat: TorusLattice, params: ModelParams, schedule: Schedule, tau: float
) -> HamiltonianSpec:
    _check_tau(tau)
    f = schedule(tau)
    return (
        star_term(lat, params.U)
        + field_term(lat, params.xi * (1.0 - f))
        + plaquette_term(lat, params.g * f)
    )


def hamiltonian_derivative(
    lat: TorusLattice, params: ModelParams, schedule: Schedule, tau: float
) -> HamiltonianSpec:
    """``dH/dtau = f'(tau) * (H_g - H_xi)``, offset included."""
    _check_tau(tau)
    df = schedule.derivative(tau)
    return (plaquette_term(lat, params.g) + field_term(lat, -params.xi)).scaled(df)


def gauge_hamiltonian(lat: TorusLattice, lam1: float, lam2: float) -> HamiltonianSpec:
    if lam1 < 0 or lam2 < 0:
        raise ParameterError("gauge couplings must be non-negative")
    return HamiltonianSpec(
        lat.n,
        _z_terms(lat.n, _single_links(lat.n), -lam1) + _x_terms(lat.n, lat.plaquette_masks, -lam2),
    )


def dual_variables(lat: TorusLattice):
    """Dual spin operators on the plaquette lattice.

    ``mu_x[p] = B_p``.  ``mu_z_right[p]`` is the Z-string crossing the vertical links
    ``v(1..x, y)`` (the dual path from plaquette ``p`` back to the column next to
    ``t2``), ``mu_z_up[p]`` crosses ``h(x, 1..y)``.  Adjacent products give single
    link operators: ``mu_z_up[p] * mu_z_up[p - y] = Z(h(x, y))`` for ``y >= 1``.
    """
    L, n = lat.L, lat.n
    mu_x, right, up = [], [], []
    for p, m in enumerate(lat.plaquette_masks):
        y, x = divmod(p, L)
        mu_x.append(PauliString(n, x_mask=m))
        right.append(PauliString.from_z(n, [lat.link_index(k, y, VERTICAL) for k in range(1, x + 1)]))
        up.append(PauliString.from_z(n, [lat.link_index(x, k, HORIZONTAL) for k in range(1, y + 1)]))
    return mu_x, right, up


def ising_bonds(L: int) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds ``(p, p + x)`` and ``(p, p + y)``; 2L^2 of them, repeats kept."""
    bonds = []
    for y in range(L):
        for x in range(L):
            p = x + L * y
            bonds.append((p, (x + 1) % L + L * y))
            bonds.append((p, x + L * ((y + 1) % L)))
    return bonds


def ising_hamiltonian(L: int, lam1: float, lam2: float) -> HamiltonianSpec:
    if L < 2:
        raise ParameterError("Ising torus needs L >= 2")
    if lam1 < 0 or lam2 < 0:
        raise ParameterError("couplings must be non-negative")
    n = L * L
    transverse = _x_terms(n, _single_links(n), -lam2)
    bonds = _z_terms(n, [(1 << a) | (1 << b) for a, b in ising_bonds(L)], -lam1)
    return HamiltonianSpec(n, transverse + bonds)


def hadamard_conjugate(H: HamiltonianSpec) -> HamiltonianSpec:
    """Swap X and Z on every site; real X/Z strings keep their sign."""
    return HamiltonianSpec(
        H.n,
        tuple((PauliString(H.n, P.z_mask, P.x_mask, P.phase), c) for P, c in H.terms),
        H.constant,
    )


# --------------------------------------------------------------------------
# matrix-free application
# --------------------------------------------------------------------------


@njit(cache=True)
def _gather_kernel(diag, src, w, xor_masks, xor_coeffs, v, y):
    for i in range(v.shape[0]):
        acc = diag[i] * v[i]
        for k in range(src.shape[0]):
            acc += w[k, i] * v[src[k, i]]
        for k in range(xor_masks.shape[0]):
            acc += xor_coeffs[k] * v[i ^ xor_masks[k]]
        y[i] = acc


@dataclass
class BlockOperator:
    """``y = diag * v + sum_k weights_k * v[sources_k] + sum_k c_k * v[i ^ mask_k]``.

    The XOR form only appears on the full space, for terms whose weight does not
    depend on the state.
    """

    dim: int
    diag: np.ndarray
    hops: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    xor_hops: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        self._packed = None

    @property
    def dtype(self):
        return np.result_type(self.diag, *[w for _, w in self.hops], *[c for _, c in self.xor_hops])

    def _pack(self):
        if self._packed is None:
            if self.hops:
                src = np.stack([h[0] for h in self.hops])
                w = np.stack([np.asarray(h[1], dtype=float) for h in self.hops])
            else:
                src = np.zeros((0, self.dim), dtype=np.int32)
                w = np.zeros((0, self.dim))
            masks = np.array([m for m, _ in self.xor_hops], dtype=np.int64)
            coeffs = np.array([c for _, c in self.xor_hops], dtype=float)
            self._packed = (np.asarray(self.diag, dtype=float), src, w, masks, coeffs)
        return self._packed

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"vector of length {v.shape[0]} for an operator of dim {self.dim}")
        if v.ndim == 2:
            return np.stack([self.matvec(v[:, k]) for k in range(v.shape[1])], axis=1)
        if v.dtype not in (np.float64, np.complex128):
            v = v.astype(np.complex128 if np.iscomplexobj(v) else np.float64)
        v = np.ascontiguousarray(v)
        y = np.empty_like(v)
        _gather_kernel(*self._pack(), v, y)
        return y

    __call__ = matvec

    def expectation(self, v: np.ndarray) -> complex:
        return np.vdot(v, self.matvec(v))

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dim, self.dim), matvec=self.matvec, matmat=self.matvec, dtype=self.dtype)

    def to_sparse(self) -> sp.csr_matrix:
        rows = [np.arange(self.dim)]
        cols = [np.arange(self.dim)]
        vals = [self.diag]
        for src, w in self.hops:
            rows.append(np.arange(self.dim))
            cols.append(src)
            vals.append(w)
        for mask, c in self.xor_hops:
            rows.append(np.arange(self.dim))
            cols.append(np.arange(self.dim) ^ mask)
            vals.append(np.full(self.dim, c))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.dim, self.dim)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def scaled_parts(self, c: float) -> tuple[np.ndarray, list, list]:
        return (
            c * self.diag,
            [(src, c * w) for src, w in self.hops],
            [(m, c * w) for m, w in self.xor_hops],
        )


def _lookup(states: np.ndarray, targets: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(states, targets)
    idx[idx == len(states)] = 0
    if not np.array_equal(states[idx], targets):
        raise BasisClosureError("term leaves the basis")
    return idx


def compile_operator(H: HamiltonianSpec, states: np.ndarray | None = None) -> BlockOperator:
    """Compile ``H`` on the sorted basis ``states`` (full space when ``None``).

    Terms sharing an X-mask are merged into one hop.
    """
    if states is None:
        if H.n > 30:
            raise ValueError("full space too large")
        states = np.arange(1 << H.n, dtype=np.uint64)
        full = True
    else:
        states = np.asarray(states, dtype=np.uint64)
        full = False
    dim = len(states)
    index_dtype = np.int32 if dim < 2**31 else np.int64
    diag = np.full(dim, H.constant, dtype=float)
    groups: dict[int, list[Term]] = {}
    for P, c in H.terms:
        if P.x_mask == 0:
            diag += (c * P.sign) * z_signs(P.z_mask, states)
        else:
            groups.setdefault(P.x_mask, []).append((P, c))
    hops, xor_hops = [], []
    for x_mask, terms in groups.items():
        src_states = states ^ np.uint64(x_mask)
        if full and all(P.z_mask == 0 for P, _ in terms):
            xor_hops.append((x_mask, float(sum(c * P.sign for P, c in terms))))
            continue
        w = sum((c * P.sign) * z_signs(P.z_mask, src_states) for P, c in terms)
        src = src_states.astype(np.int64) if full else _lookup(states, src_states)
        hops.append((src.astype(index_dtype), w))
    return BlockOperator(dim, diag, hops, xor_hops)


def apply_hamiltonian(H: HamiltonianSpec, psi: np.ndarray, states: np.ndarray | None = None) -> np.ndarray:
    expected = (1 << H.n) if states is None else len(states)
    if len(psi) != expected:
        raise ValueError(f"state of length {len(psi)} does not match basis dimension {expected}")
    return compile_operator(H, states).matvec(psi)
