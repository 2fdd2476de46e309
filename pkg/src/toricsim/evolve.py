"""Schrödinger propagation of the adiabatic sweep and the perturbed-leakage experiment."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .lattice import TorusLattice, build_torus
from .model import HamiltonianSpec, ModelParams, Schedule, x_field
from .sector import WINDINGS, classify_many, enumerate_sector
from .propagators import KrylovError, MagnusStepper, StepControlError
from .spectral import SweepOperator, ground_state_phi0, low_spectrum
from .symmetry import translation_basis

NORM_DRIFT_LIMIT = 1e-8
FULL_SPACE_MAX_L = 3


class IntegratorError(RuntimeError):
    pass


@dataclass(frozen=True)
class Perturbation:
    """``-V * sum_j X_j``: the 1-local transverse field (``k = 1``)."""

    strength: float
    k: int = 1

    def __post_init__(self):
        if self.strength < 0:
            raise ValueError("perturbation strength must be non-negative")
        if self.k != 1:
            raise ValueError("only the 1-local X field is implemented")

    def hamiltonian(self, lat: TorusLattice) -> HamiltonianSpec:
        return x_field(lat, self.strength)


def default_checkpoints(k: int = 21) -> tuple[float, ...]:
    return tuple(np.linspace(0.0, 1.0, k).tolist())


@dataclass(frozen=True)
class SweepConfig:
    L: int = 2
    params: ModelParams = ModelParams()
    schedule: Schedule = Schedule("trig-smooth")
    T: float = 20.0
    tol: float = 1e-10
    checkpoints: tuple[float, ...] = field(default_factory=default_checkpoints)
    perturbation: Perturbation | None = None
    space: str = "auto"  # "sector", "symmetric", "full" or "auto"

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("total time T must be positive")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        cps = tuple(sorted(float(t) for t in self.checkpoints))
        if not cps or cps[0] < 0 or cps[-1] > 1:
            raise ValueError("checkpoints must lie in [0, 1]")
        object.__setattr__(self, "checkpoints", cps)
        if self.space not in ("auto", "sector", "symmetric", "full"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.resolved_space == "sector" and self.perturbation and self.perturbation.strength > 0:
            raise ValueError("a perturbation breaks the sector; run it in the symmetric or full space")

    @property
    def resolved_space(self) -> str:
        if self.space != "auto":
            return self.space
        perturbed = self.perturbation is not None and self.perturbation.strength > 0
        return "symmetric" if perturbed else "sector"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        if "params" in d:
            d["params"] = ModelParams(**d["params"])
        if "schedule" in d:
            s = d["schedule"]
            d["schedule"] = Schedule(s["kind"] if isinstance(s, dict) else s)
        if d.get("perturbation") is not None:
            d["perturbation"] = Perturbation(**d["perturbation"])
        if "checkpoints" in d:
            cp = d["checkpoints"]
            d["checkpoints"] = default_checkpoints(cp) if isinstance(cp, int) else tuple(cp)
        return cls(**d)


@dataclass
class Checkpoint:
    tau: float
    fidelity: float
    energy: float
    weights: dict[str, float]
    norm: float


@dataclass
class SweepResult:
    config: SweepConfig
    checkpoints: list[Checkpoint]
    delta: float
    final_fidelity: float
    space: str
    dim: int
    matvecs: int
    steps: int
    wall_time: float

    @property
    def max_leakage(self) -> float:
        """Largest weight found in a neutral block other than (0, 0)."""
        return max(sum(c.weights[k] for k in ("01", "10", "11")) for c in self.checkpoints)

    @property
    def max_norm_drift(self) -> float:
        return max(abs(c.norm - 1.0) for c in self.checkpoints)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "space": self.space,
            "dim": self.dim,
            "delta": self.delta,
            "final_fidelity": self.final_fidelity,
            "max_leakage": self.max_leakage,
            "max_norm_drift": self.max_norm_drift,
            "matvecs": self.matvecs,
            "steps": self.steps,
            "wall_time": self.wall_time,
            "checkpoints": [asdict(c) for c in self.checkpoints],
        }


def _weight_key(code: int) -> str:
    i, j = WINDINGS[[2 * a + b for a, b in WINDINGS].index(code)]
    return f"{i}{j}"


class SectorWeights:
    """Probability per neutral winding block, plus the mass in charged states."""

    def __init__(self, lat: TorusLattice, states: np.ndarray | None = None):
        if states is None:
            states = np.arange(1 << lat.n, dtype=np.uint64)
        neutral, code = classify_many(lat, states)
        self.groups = {_weight_key(c): np.flatnonzero(neutral & (code == c)) for c in range(4)}
        self.charged = np.flatnonzero(~neutral)

    def __call__(self, psi: np.ndarray) -> dict[str, float]:
        p = np.abs(psi) ** 2
        total = p.sum()
        w = {k: float(p[idx].sum() / total) for k, idx in self.groups.items()}
        w["charged"] = float(p[self.charged].sum() / total)
        return w


def sector_weights(psi: np.ndarray, lat: TorusLattice, states: np.ndarray | None = None) -> dict[str, float]:
    return SectorWeights(lat, states)(psi)


def integrate(sweep: SweepOperator, T: float, psi0: np.ndarray, taus, tol: float):
    """Propagate ``i d psi / d tau = T H(tau) psi`` through each of ``taus``.

    Returns the states at ``taus`` and the stepper (for its counters).
    """

    def combine(a, b, wa, wb):
        return sweep.mix((a, b), (T * wa, T * wb)).matvec

    stepper = MagnusStepper(combine, tol)
    psi = np.asarray(psi0, dtype=complex)
    out = [psi]
    for a, b in zip(taus[:-1], taus[1:]):
        if b > a:
            try:
                psi = stepper.run(psi, a, b)
            except (StepControlError, KrylovError) as err:
                raise IntegratorError(str(err)) from err
        drift = abs(np.linalg.norm(psi) - np.linalg.norm(psi0))
        if drift > NORM_DRIFT_LIMIT:
            raise IntegratorError(f"norm drift {drift:.2e} at tau={b}")
        out.append(psi)
    return out, stepper


def propagate(config: SweepConfig, psi0: np.ndarray | None = None) -> SweepResult:
    start = time.perf_counter()
    lat = build_torus(config.L)
    space = config.resolved_space
    block = enumerate_sector(lat)
    if space != "sector" and config.L > FULL_SPACE_MAX_L:
        raise ValueError(f"{space}-space propagation is limited to L <= {FULL_SPACE_MAX_L}")
    if space == "full":
        states = None
        overlap_with = lambda phi, v: np.vdot(block.embed(phi), v)  # noqa: E731
    elif space == "symmetric":
        states = translation_basis(lat)
        overlap_with = lambda phi, v: states.overlap(block.states, phi, v)  # noqa: E731
    else:
        states = block.states
        overlap_with = np.vdot
    pert = None
    if config.perturbation is not None and config.perturbation.strength > 0:
        pert = config.perturbation.hamiltonian(lat)
    sweep = SweepOperator(lat, config.params, config.schedule, states, pert)
    # reference path: the unperturbed neutral (0, 0) block
    ref = sweep if space == "sector" else SweepOperator(lat, config.params, config.schedule, block.states)

    if psi0 is None:
        psi0 = np.zeros(sweep.dim, dtype=complex)
        psi0[0] = 1.0  # the string vacuum is the smallest bitmask in either basis
    taus = list(config.checkpoints)
    if taus[0] != 0.0:
        taus = [0.0] + taus
    psis, stepper = integrate(sweep, config.T, psi0, taus, config.tol)
    weigh = SectorWeights(lat, states.states if space == "symmetric" else states)

    checkpoints = []
    for tau, psi in zip(taus, psis):
        if tau not in config.checkpoints:
            continue
        norm = float(np.linalg.norm(psi))
        unit = psi / norm
        phi = low_spectrum(ref.at(tau), 1).ground_state
        checkpoints.append(
            Checkpoint(
                tau=tau,
                fidelity=float(min(1.0, abs(overlap_with(phi, unit)))),
                energy=float(np.vdot(unit, sweep.at(tau).matvec(unit)).real),
                weights=weigh(psi),
                norm=norm,
            )
        )
    final = psis[-1] / np.linalg.norm(psis[-1])
    overlap = min(1.0, abs(overlap_with(ground_state_phi0(lat, block), final)))
    if taus[-1] != 1.0:
        warnings.warn("last checkpoint is not tau = 1; delta refers to the last checkpoint")
    return SweepResult(
        config=config,
        checkpoints=checkpoints,
        delta=adiabatic_error(overlap),
        final_fidelity=float(overlap),
        space=space,
        dim=sweep.dim,
        matvecs=stepper.matvecs,
        steps=stepper.steps,
        wall_time=time.perf_counter() - start,
    )


def adiabatic_error(overlap: float) -> float:
    """``min_theta ||psi - e^{i theta} phi|| = sqrt(2 - 2 |<phi|psi>|)`` for unit vectors."""
    return math.sqrt(max(0.0, 2.0 - 2.0 * overlap))


def protection_bound(V: float, xi: float, L: int, k: int = 1) -> float:
    """Upper bound ``|(V / xi)**(L / k) * L|**2`` on inter-sector transfer.

    Raises ``ValueError`` when ``V >= xi``: the bound is only claimed below the tension.
    """
    if V < 0 or xi <= 0 or k < 1:
        raise ValueError("need V >= 0, xi > 0, k >= 1")
    if V >= xi:
        raise ValueError(f"bound not claimed for V={V} >= xi={xi}")
    return abs((V / xi) ** (L / k) * L) ** 2


@dataclass
class ProtectionRow:
    L: int
    V: float
    bound: float | None
    measured: float
    passed: bool | None
    delta: float
    max_norm_drift: float


def perturbed_protection_experiment(
    L: int,
    strengths,
    params: ModelParams = ModelParams(U=10.0),
    schedule: Schedule = Schedule("trig-smooth"),
    T: float = 10.0,
    tol: float = 1e-9,
    checkpoints=None,
    space: str = "symmetric",
) -> list[ProtectionRow]:
    """Leakage out of the (0, 0) winding block under a uniform X field.

    The default orbit basis is exact for the uniform field and the string vacuum;
    ``space="full"`` runs the same sweep on all ``2**n`` states.
    """
    if L not in (2, 3):
        raise ValueError("perturbed runs need the full or symmetric space: L must be 2 or 3")
    rows = []
    for V in strengths:
        cfg = SweepConfig(
            L=L, params=params, schedule=schedule, T=T, tol=tol,
            checkpoints=checkpoints or default_checkpoints(), perturbation=Perturbation(V),
            space=space,
        )
        res = propagate(cfg)
        try:
            bound = protection_bound(V, params.xi, L)
        except ValueError:
            warnings.warn(f"V={V} >= xi={params.xi}: bound comparison not claimed")
            bound = None
        measured = res.max_leakage
        rows.append(
            ProtectionRow(L, V, bound, measured, None if bound is None else measured <= bound,
                          res.delta, res.max_norm_drift)
        )
    return rows
