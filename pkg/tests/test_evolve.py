import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from toricsim.evolve import (
    Perturbation,
    SweepConfig,
    adiabatic_error,
    default_checkpoints,
    propagate,
    protection_bound,
    sector_weights,
)
from toricsim.lattice import build_torus
from toricsim.model import ModelParams, Schedule, interpolated_hamiltonian, x_field
from toricsim.propagators import MagnusStepper, expm_apply, lanczos_expm
from toricsim.sector import enumerate_sector
from toricsim.spectral import ground_state_phi0, low_spectrum, sector_operator
from toricsim.symmetry import compile_symmetric, translation_basis

LAT2 = build_torus(2)
P = ModelParams(U=10.0)


def dense_sweep(config, dim_states=None):
    """Reference: DOP853 on dense matrices at tight tolerance."""
    lat = build_torus(config.L)
    H0 = lambda t: interpolated_hamiltonian(lat, config.params, config.schedule, t)  # noqa: E731
    V = None
    if config.perturbation is not None:
        V = x_field(lat, config.perturbation.strength).to_dense().real
    parts = [H0(0.0).to_dense().real, H0(1.0).to_dense().real]

    def H(t):
        f = config.schedule(t)
        # H is affine in f
        M = (1 - f) * parts[0] + f * parts[1]
        return M if V is None else M + V

    if dim_states is not None:
        idx = dim_states.astype(np.int64)
        Hsub = lambda t: H(t)[np.ix_(idx, idx)]  # noqa: E731
    else:
        Hsub = H
    dim = Hsub(0.0).shape[0]
    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0
    sol = solve_ivp(
        lambda t, y: -1j * config.T * (Hsub(t) @ y), (0.0, 1.0), psi0,
        method="DOP853", rtol=1e-13, atol=1e-13, t_eval=list(config.checkpoints),
    )
    return sol.y.T


@pytest.mark.parametrize("space", ["sector", "full"])
def test_propagation_matches_dense_oracle(space):
    cfg = SweepConfig(L=2, params=P, T=3.0, tol=1e-11, checkpoints=(0.0, 0.5, 1.0), space=space)
    res = propagate(cfg)
    block = enumerate_sector(LAT2)
    ref = dense_sweep(cfg, None if space == "full" else block.states)
    phi0 = ground_state_phi0(LAT2, block)
    if space == "full":
        phi0 = block.embed(phi0)
    assert abs(np.vdot(phi0, ref[-1])) == pytest.approx(res.final_fidelity, abs=1e-8)
    for cp, psi in zip(res.checkpoints, ref):
        Hd = interpolated_hamiltonian(LAT2, P, cfg.schedule, cp.tau).to_dense().real
        if space != "full":
            Hd = Hd[np.ix_(block.states.astype(int), block.states.astype(int))]
        assert cp.energy == pytest.approx(np.vdot(psi, Hd @ psi).real, abs=1e-8)


def test_perturbed_propagation_matches_dense_oracle():
    cfg = SweepConfig(
        L=2, params=P, T=4.0, tol=1e-11, checkpoints=(0.0, 0.5, 1.0),
        perturbation=Perturbation(0.4), space="full",
    )
    res = propagate(cfg)
    ref = dense_sweep(cfg)
    for cp, psi in zip(res.checkpoints, ref):
        w = sector_weights(psi, LAT2)
        for k, v in cp.weights.items():
            assert v == pytest.approx(w[k], abs=1e-8)


def test_symmetric_space_agrees_with_full_space():
    kw = dict(L=2, params=P, T=6.0, tol=1e-10, checkpoints=(0.0, 0.3, 0.7, 1.0), perturbation=Perturbation(0.3))
    full = propagate(SweepConfig(space="full", **kw))
    sym = propagate(SweepConfig(space="symmetric", **kw))
    assert sym.dim < full.dim
    assert sym.delta == pytest.approx(full.delta, abs=1e-9)
    for a, b in zip(full.checkpoints, sym.checkpoints):
        assert a.fidelity == pytest.approx(b.fidelity, abs=1e-9)
        assert a.energy == pytest.approx(b.energy, abs=1e-9)
        for k in a.weights:
            assert a.weights[k] == pytest.approx(b.weights[k], abs=1e-10)


def test_orbit_basis_is_an_invariant_subspace():
    lat = build_torus(2)
    basis = translation_basis(lat)
    H = interpolated_hamiltonian(lat, P, Schedule(), 0.6) + x_field(lat, 0.2)
    dense = H.to_dense().real
    cols = np.stack([basis.to_full(e) for e in np.eye(basis.dim)], axis=1)
    assert basis.orbit_sizes.sum() == 2**lat.n
    assert np.allclose(cols.T @ cols, np.eye(basis.dim), atol=1e-14)
    assert np.allclose(dense @ cols, cols @ compile_symmetric(H, basis).to_dense(), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 3.0), st.integers(0, 2**31))
def test_lanczos_exponential_matches_expm_multiply(dt, seed):
    op = sector_operator(build_torus(3), P, Schedule())[1].at(0.5)
    v = np.random.default_rng(seed).standard_normal(op.dim).astype(complex)
    got, _ = expm_apply(op.matvec, v, dt, 1e-12)
    ref = expm_multiply(-1j * dt * op.to_sparse(), v)
    assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(v)
    assert np.linalg.norm(got) == pytest.approx(np.linalg.norm(v), rel=1e-12)


def test_lanczos_zero_vector():
    out, k = lanczos_expm(lambda v: v, np.zeros(4), 1.0, 1e-10)
    assert k == 0 and not out.any()


def test_eigenstate_only_picks_up_a_phase():
    op = sector_operator(LAT2, P, Schedule())[1].at(0.3)
    r = low_spectrum(op, 1)
    stepper = MagnusStepper(lambda a, b, wa, wb: (lambda v: (wa + wb) * op.matvec(v)), 1e-12)
    psi = stepper.run(r.ground_state.astype(complex), 0.0, 2.5)
    expected = np.exp(-1j * 2.5 * r.eigenvalues[0]) * r.ground_state
    assert np.linalg.norm(psi - expected) < 1e-9


def test_unperturbed_sweep_never_leaves_the_block_l2_full():
    res = propagate(SweepConfig(L=2, params=P, T=5.0, tol=1e-10, space="full", schedule=Schedule("linear")))
    for cp in res.checkpoints:
        assert cp.weights["00"] == pytest.approx(1.0, abs=1e-10)
        assert cp.norm == pytest.approx(1.0, abs=1e-12)
    assert res.max_leakage <= 1e-10


def test_norm_is_conserved():
    res = propagate(SweepConfig(L=2, params=P, T=8.0, tol=1e-9, perturbation=Perturbation(0.5)))
    assert res.max_norm_drift < 1e-10


def test_adiabatic_error_shrinks_with_time():
    deltas = [propagate(SweepConfig(L=2, params=P, T=T, tol=1e-10)).delta for T in (5.0, 10.0, 20.0)]
    assert deltas[0] > deltas[1] > deltas[2]


def test_fidelity_starts_at_one():
    res = propagate(SweepConfig(L=2, params=P, T=1.0))
    assert res.checkpoints[0].fidelity == pytest.approx(1.0, abs=1e-12)


def test_adiabatic_error_formula():
    assert adiabatic_error(1.0) == 0.0
    assert adiabatic_error(0.0) == pytest.approx(math.sqrt(2))
    assert adiabatic_error(1 + 1e-15) == 0.0


def test_protection_bound_values():
    assert protection_bound(0.25, 1.0, 2) == pytest.approx(0.0625**2 * 4)
    assert protection_bound(0.5, 1.0, 2) == pytest.approx(0.25)
    assert protection_bound(0.5, 1.0, 3) == pytest.approx((0.125 * 3) ** 2)
    assert protection_bound(0.0, 1.0, 3) == 0.0
    with pytest.raises(ValueError):
        protection_bound(1.0, 1.0, 2)


def test_sector_weights_of_winding_states():
    t1, t2 = LAT2.t_masks
    psi = np.zeros(256)
    psi[[0, t1, t2, t1 ^ t2, 1]] = 1.0
    w = sector_weights(psi, LAT2)
    assert w == pytest.approx({"00": 0.2, "10": 0.2, "01": 0.2, "11": 0.2, "charged": 0.2})


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        SweepConfig(T=0)
    with pytest.raises(ValueError):
        SweepConfig(space="nowhere")
    with pytest.raises(ValueError):
        SweepConfig(perturbation=Perturbation(0.1), space="sector")
    with pytest.raises(ValueError):
        SweepConfig(checkpoints=(0.0, 1.5))
    cfg = SweepConfig(L=3, T=7.0, perturbation=Perturbation(0.2), checkpoints=default_checkpoints(5))
    assert cfg.resolved_space == "symmetric"
    assert SweepConfig.from_dict(cfg.to_dict()) == cfg


def test_full_space_refused_beyond_l3():
    with pytest.raises(ValueError):
        propagate(SweepConfig(L=4, space="full", T=1.0))
