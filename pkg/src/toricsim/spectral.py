"""Low-lying spectra, gaps along the schedule, and adiabatic-theorem diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .lattice import TorusLattice, build_torus
from .model import (
    BlockOperator,
    ModelParams,
    Schedule,
    compile_operator,
    field_term,
    gauge_hamiltonian,
    hadamard_conjugate,
    hamiltonian_derivative,
    interpolated_hamiltonian,
    ising_hamiltonian,
    plaquette_term,
    star_term,
)
from .sector import (
    CoordinateBasis,
    SectorBasis,
    SectorLabel,
    compile_coordinate,
    coordinate_basis,
    enumerate_sector,
    project_hamiltonian,
)
from .symmetry import TranslationBasis, compile_symmetric

DENSE_LIMIT = 1024
DEFAULT_TOL = 1e-10
DEGENERACY_TOL = 1e-8
COORDINATE_FROM_L = 5


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float = math.inf):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class DegenerateStateError(RuntimeError):
    pass


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    residuals: np.ndarray

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(), "residuals": self.residuals.tolist()}


def _residuals(op: BlockOperator, vals, vecs) -> np.ndarray:
    Hv = op.matvec(vecs)
    return np.linalg.norm(Hv - vecs * vals[None, :], axis=0)


def low_spectrum(
    op: BlockOperator,
    m: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    maxiter: int | None = None,
    ncv: int | None = None,
) -> SpectralResult:
    """The ``m`` lowest eigenpairs of a real symmetric block operator.

    Small blocks are diagonalised densely; larger ones go through implicitly
    restarted Lanczos from a seeded start vector.  Every returned pair is checked
    against ``tol`` on ``||Hv - Ev||``.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if m >= op.dim and op.dim > DENSE_LIMIT:
        raise ValueError(f"m={m} must be below the block dimension {op.dim}")
    if np.iscomplexobj(op.diag) or any(np.iscomplexobj(w) for _, w in op.hops):
        raise TypeError("only real symmetric operators are supported")
    if op.dim <= DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(op.to_dense(), subset_by_index=[0, min(m, op.dim) - 1])
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(op.dim)
        ncv = min(op.dim, ncv or max(2 * m + 1, 24))
        try:
            vals, vecs = eigsh(op.as_linear_operator(), k=m, which="SA", v0=v0, ncv=ncv, tol=0, maxiter=maxiter)
        except ArpackNoConvergence as err:
            best = _residuals(op, err.eigenvalues, err.eigenvectors).max() if len(err.eigenvalues) else math.inf
            raise ConvergenceError("Lanczos did not converge", best) from err
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    # fix the sign of each vector so repeated runs agree bit for bit
    for k in range(vecs.shape[1]):
        i = np.argmax(np.abs(vecs[:, k]) > 1e-8)
        if vecs[i, k] < 0:
            vecs[:, k] *= -1
    res = _residuals(op, vals, vecs)
    if res.max() > tol:
        raise ConvergenceError(f"residual above tolerance {tol:g}", float(res.max()))
    return SpectralResult(np.asarray(vals), vecs, res)


def ground_state_phi0(lat: TorusLattice, basis: SectorBasis | None = None) -> np.ndarray:
    """Equal superposition of every contractible closed-string configuration."""
    if basis is None:
        basis = enumerate_sector(lat)
    if basis.label != SectorLabel((0, 0)):
        raise ValueError("phi0 lives in the neutral (0, 0) block")
    return np.full(basis.dim, basis.dim ** -0.5)


# --------------------------------------------------------------------------
# gaps along the schedule
# --------------------------------------------------------------------------


def _compiler(states):
    """Pick the matrix-element rule that goes with the basis type."""
    if isinstance(states, TranslationBasis):
        return lambda H: compile_symmetric(H, states)
    if isinstance(states, CoordinateBasis):
        return lambda H: compile_coordinate(H, states)
    return lambda H: compile_operator(H, states)


class SweepOperator:
    """``H(tau)`` on one basis, assembled from precompiled parts.

    ``H(tau) = H_U + (1 - f) H_xi + f H_g (+ V)``; each part is compiled once.
    """

    def __init__(self, lat, params: ModelParams, schedule: Schedule, states=None, perturbation=None):
        self.lat = lat
        self.params = params
        self.schedule = schedule
        self.states = states
        build = _compiler(states)
        self.star = build(star_term(lat, params.U))
        self.field = build(field_term(lat, params.xi))
        self.plaq = build(plaquette_term(lat, params.g))
        self.pert = None if perturbation is None else build(perturbation)
        self.dim = self.star.dim

    def coefficients(self, tau: float) -> tuple[float, float]:
        f = self.schedule(tau)
        return 1.0 - f, f

    def linear(self, c_star: float, c_field: float, c_plaq: float, c_pert: float) -> BlockOperator:
        diag = c_star * self.star.diag + c_field * self.field.diag
        parts = [(self.plaq, c_plaq)] + ([(self.pert, c_pert)] if self.pert is not None else [])
        hops, xor_hops = [], []
        for op, c in parts:
            d, h, x = op.scaled_parts(c)
            diag = diag + d
            hops += h
            xor_hops += x
        return BlockOperator(self.dim, diag, hops, xor_hops)

    def at(self, tau: float) -> BlockOperator:
        a, b = self.coefficients(tau)
        return self.linear(1.0, a, b, 1.0)

    def mix(self, taus, weights) -> BlockOperator:
        """``sum_k weights[k] * H(taus[k])``."""
        cs = [0.0, 0.0, 0.0, 0.0]
        for t, w in zip(taus, weights):
            a, b = self.coefficients(t)
            cs[0] += w
            cs[1] += w * a
            cs[2] += w * b
            cs[3] += w
        return self.linear(*cs)

    def derivative(self) -> BlockOperator:
        """``(H_g - H_xi)``; multiply by ``f'(tau)`` for ``dH/dtau``."""
        return BlockOperator(self.dim, self.plaq.diag - self.field.diag, list(self.plaq.hops), list(self.plaq.xor_hops))


def sector_operator(lat, params, schedule, winding=(0, 0), coordinates: bool | None = None):
    """Basis and :class:`SweepOperator` for one neutral winding block.

    ``coordinates`` selects the plaquette-coordinate order, which needs no index
    arrays; by default it is used from ``L = 5`` on, where those arrays would not fit.
    """
    label = SectorLabel(winding)
    if coordinates is None:
        coordinates = lat.L >= COORDINATE_FROM_L
    if coordinates:
        basis = coordinate_basis(lat, label)
        return basis, SweepOperator(lat, params, schedule, basis)
    basis = enumerate_sector(lat, label)
    # the symmetry check is on H at one generic tau; every tau has the same term set
    project_hamiltonian(interpolated_hamiltonian(lat, params, schedule, 0.5), basis)
    return basis, SweepOperator(lat, params, schedule, basis.states)


@dataclass
class GapScan:
    L: int
    taus: np.ndarray
    gaps: np.ndarray
    tau_min: float
    gap_min: float
    coupling_ratio: float  # lambda1 / lambda2 at tau_min
    excited_splitting: float  # E2 - E1 at tau_min, checks non-degeneracy
    params: ModelParams
    schedule: Schedule

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "tau_min": self.tau_min,
            "gap_min": self.gap_min,
            "coupling_ratio": self.coupling_ratio,
            "excited_splitting": self.excited_splitting,
            "taus": self.taus.tolist(),
            "gaps": self.gaps.tolist(),
        }


def coupling_ratio(params: ModelParams, schedule: Schedule, tau: float) -> float:
    """``lambda1 / lambda2 = xi (1 - f) / (g f)`` of the equivalent gauge theory."""
    f = schedule(tau)
    return math.inf if f == 0 else params.xi * (1.0 - f) / (params.g * f)


def golden_section(fun, a: float, b: float, xtol: float = 1e-4) -> tuple[float, float]:
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def gap_scan(
    lat: TorusLattice,
    params: ModelParams,
    schedule: Schedule,
    grid=None,
    tol: float = DEFAULT_TOL,
    xtol: float = 1e-4,
    refine: bool = True,
) -> GapScan:
    grid = np.linspace(0.0, 1.0, 41) if grid is None else np.asarray(grid, dtype=float)
    if grid.min() < 0 or grid.max() > 1:
        raise ValueError("grid must lie inside [0, 1]")
    _, sweep = sector_operator(lat, params, schedule)

    def spectrum(tau, m=2):
        try:
            return low_spectrum(sweep.at(tau), m, tol).eigenvalues
        except ConvergenceError as err:
            raise ConvergenceError(f"at tau={tau:.6f}: {err}", err.best_residual) from err

    def gap(tau):
        e = spectrum(tau)
        return e[1] - e[0]

    gaps = np.array([gap(t) for t in grid])
    k = int(np.argmin(gaps))
    tau_min, gap_min = float(grid[k]), float(gaps[k])
    if refine and len(grid) > 2:
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        t, g = golden_section(gap, lo, hi, xtol)
        if g < gap_min:
            tau_min, gap_min = t, g
    e = spectrum(tau_min, 3)
    return GapScan(
        lat.L, grid, gaps, tau_min, float(gap_min), coupling_ratio(params, schedule, tau_min),
        float(e[2] - e[1]), params, schedule,
    )


# --------------------------------------------------------------------------
# adiabatic-theorem quantities
# --------------------------------------------------------------------------


def hdot_matrix_element(lat, params, schedule, tau, psi_i, psi_j, states=None) -> complex:
    """``<psi_i| dH/dtau |psi_j>``; vectors live on ``states`` (full space if ``None``)."""
    dH = compile_operator(hamiltonian_derivative(lat, params, schedule, tau), states)
    return complex(np.vdot(psi_i, dH.matvec(psi_j)))


def transition_bound(element: complex, e_i: float, e_j: float) -> float:
    """``|<i|dH|j> / (E_i - E_j)**2|**2``."""
    if e_i == e_j:
        raise ZeroDivisionError("degenerate levels: the adiabatic bound is undefined")
    return abs(element / (e_i - e_j) ** 2) ** 2


def phi_dot_norm(lat, params, schedule, tau: float, dtau: float = 1e-4, tol: float = DEFAULT_TOL) -> float:
    """Finite-difference ``||d phi / d tau||`` of the neutral-block ground state."""
    _, sweep = sector_operator(lat, params, schedule)
    t2 = tau + dtau if tau + dtau <= 1.0 else tau - dtau

    def ground(t):
        r = low_spectrum(sweep.at(t), 2, tol)
        if r.gap < DEGENERACY_TOL:
            raise DegenerateStateError(f"ground state degenerate at tau={t}")
        return r.ground_state

    a, b = ground(tau), ground(t2)
    ov = np.vdot(a, b)
    b = b * (abs(ov) / ov if ov != 0 else 1.0)
    return float(np.linalg.norm(b - a) / dtau)


# --------------------------------------------------------------------------
# duality check
# --------------------------------------------------------------------------


@dataclass
class DualityReport:
    L: int
    lam1: float
    lam2: float
    gauge_levels: np.ndarray
    ising_levels: np.ndarray
    tol: float
    gauge_dim: int
    ising_dim: int

    @property
    def differences(self) -> np.ndarray:
        return np.abs(self.gauge_levels - self.ising_levels)

    @property
    def max_difference(self) -> float:
        return float(self.differences.max()) if len(self.differences) else math.inf

    @property
    def passed(self) -> bool:
        return self.gauge_dim == self.ising_dim and self.max_difference <= self.tol

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "lambda1": self.lam1,
            "lambda2": self.lam2,
            "gauge_dim": self.gauge_dim,
            "ising_dim": self.ising_dim,
            "gauge_levels": self.gauge_levels.tolist(),
            "ising_levels": self.ising_levels.tolist(),
            "max_difference": self.max_difference,
            "tol": self.tol,
            "passed": self.passed,
        }


def even_parity_states(n: int) -> np.ndarray:
    states = np.arange(1 << n, dtype=np.uint64)
    return states[(np.bitwise_count(states) & 1) == 0]


def ising_even_operator(L: int, lam1: float, lam2: float) -> BlockOperator:
    """Ising Hamiltonian on the ``prod mu_x = +1`` sector.

    After a Hadamard on every dual site the global flip becomes the parity of the
    bit string, so the sector is the even-weight computational states.
    """
    H = hadamard_conjugate(ising_hamiltonian(L, lam1, lam2))
    return compile_operator(H, even_parity_states(L * L))


def duality_spectrum_check(L: int, lam1: float, lam2: float, m: int = 8, tol: float = 1e-9) -> DualityReport:
    if L not in (2, 3):
        raise ValueError("the duality check is defined for L in {2, 3}")
    lat = build_torus(L)
    basis = enumerate_sector(lat)
    gauge = project_hamiltonian(gauge_hamiltonian(lat, lam1, lam2), basis)
    ising = ising_even_operator(L, lam1, lam2)
    if gauge.dim != ising.dim:
        return DualityReport(L, lam1, lam2, np.array([]), np.array([]), tol, gauge.dim, ising.dim)
    m = min(m, gauge.dim)
    # residual tolerance scaled to the operator norm so the check tests the levels, not the solver
    solver_tol = 1e-9 * max(1.0, lam1 + lam2) * lat.n
    g = low_spectrum(gauge, m, solver_tol).eigenvalues
    i = low_spectrum(ising, m, solver_tol).eigenvalues
    return DualityReport(L, lam1, lam2, g, i, tol, gauge.dim, ising.dim)
