import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toricsim.lattice import build_torus
from toricsim.model import (
    HamiltonianSpec,
    ModelParams,
    Schedule,
    compile_operator,
    gauge_hamiltonian,
    interpolated_hamiltonian,
    ising_hamiltonian,
    star_term,
)
from toricsim.pauli import PauliString
from toricsim.sector import enumerate_sector, neutral_blocks, project_hamiltonian
from toricsim.spectral import (
    ConvergenceError,
    SweepOperator,
    coupling_ratio,
    duality_spectrum_check,
    gap_scan,
    golden_section,
    ground_state_phi0,
    hdot_matrix_element,
    low_spectrum,
    phi_dot_norm,
    sector_operator,
    transition_bound,
)

LAT2 = build_torus(2)
LAT3 = build_torus(3)
P = ModelParams(U=20.0, g=1.0, xi=1.0)


def block_op(lat, tau, params=P, schedule=Schedule()):
    return sector_operator(lat, params, schedule)[1].at(tau)


def test_gap_at_field_end_is_one_plaquette_string():
    for xi in (0.5, 1.0, 2.0):
        e = low_spectrum(block_op(LAT2, 0.0, ModelParams(xi=xi)), 2).eigenvalues
        assert e[1] - e[0] == pytest.approx(8 * xi, abs=1e-10)


def test_gap_at_kitaev_end_flips_two_plaquettes():
    for g in (0.5, 1.0, 3.0):
        e = low_spectrum(block_op(LAT3, 1.0, ModelParams(g=g)), 2).eigenvalues
        assert e[1] - e[0] == pytest.approx(4 * g, abs=1e-10)


def test_full_space_l2_is_four_fold_degenerate():
    H = interpolated_hamiltonian(LAT2, P, Schedule(), 1.0)
    e = np.linalg.eigvalsh(H.to_dense().real)
    ground = e[0]
    assert np.sum(np.abs(e - ground) <= 1e-10) == 4
    assert e[4] - ground > 1.0


@pytest.mark.parametrize("lat", [LAT2, LAT3])
def test_kitaev_ground_state_is_uniform(lat):
    basis = enumerate_sector(lat)
    r = low_spectrum(block_op(lat, 1.0), 1)
    assert abs(np.vdot(ground_state_phi0(lat, basis), r.ground_state)) >= 1 - 1e-10


def test_phi0_is_stabilised():
    basis = enumerate_sector(LAT3)
    phi = ground_state_phi0(LAT3, basis)
    for m in LAT3.plaquette_masks:
        Bp = compile_operator(HamiltonianSpec(LAT3.n, ((PauliString(LAT3.n, m), 1.0),)), basis.states)
        assert np.vdot(phi, Bp.matvec(phi)).real == pytest.approx(1.0)
    stars = project_hamiltonian(star_term(LAT3, -1.0), basis)
    assert np.vdot(phi, stars.matvec(phi)).real == pytest.approx(LAT3.L**2)


def test_lanczos_matches_dense_l3():
    op = block_op(LAT3, 0.4)
    dense = np.linalg.eigvalsh(op.to_dense())[:6]
    # force the iterative path on a block above the dense limit
    import toricsim.spectral as spectral

    limit = spectral.DENSE_LIMIT
    spectral.DENSE_LIMIT = 16
    try:
        r = low_spectrum(op, 6)
    finally:
        spectral.DENSE_LIMIT = limit
    assert np.allclose(r.eigenvalues, dense, atol=1e-9)
    assert r.residuals.max() <= 1e-10


def test_deterministic_for_fixed_seed():
    op = block_op(LAT3, 0.3)
    import toricsim.spectral as spectral

    limit = spectral.DENSE_LIMIT
    spectral.DENSE_LIMIT = 16
    try:
        a = low_spectrum(op, 3, seed=7)
        b = low_spectrum(op, 3, seed=7)
    finally:
        spectral.DENSE_LIMIT = limit
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_nonconvergence_is_reported():
    op = block_op(build_torus(4), 0.5)
    with pytest.raises(ConvergenceError) as info:
        low_spectrum(op, 4, maxiter=1)
    assert info.value.best_residual > 0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 2**31))
def test_variational_bound(tau, seed):
    op = block_op(LAT2, tau)
    e0 = low_spectrum(op, 1).eigenvalues[0]
    v = np.random.default_rng(seed).standard_normal(op.dim)
    v /= np.linalg.norm(v)
    assert np.vdot(v, op.matvec(v)).real >= e0 - 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0))
def test_neutral_ground_state_is_nondegenerate(tau):
    e = low_spectrum(block_op(LAT3, tau), 2).eigenvalues
    assert e[1] - e[0] > 1e-3


def test_hdot_vanishes_between_sectors():
    blocks = neutral_blocks(LAT2)
    a, b = blocks[(0, 0)], blocks[(1, 0)]
    rng = np.random.default_rng(0)
    psi_i = a.embed(rng.standard_normal(a.dim))
    psi_j = b.embed(rng.standard_normal(b.dim))
    assert hdot_matrix_element(LAT2, P, Schedule("trig-smooth"), 0.4, psi_i, psi_j) == 0


def test_hdot_matches_finite_difference_of_energy():
    # Hellmann-Feynman: dE0/dtau = <phi|dH/dtau|phi>
    sched = Schedule("trig-smooth")
    basis, sweep = sector_operator(LAT3, P, sched)
    tau, h = 0.45, 1e-5
    phi = low_spectrum(sweep.at(tau), 1).ground_state
    e = [low_spectrum(sweep.at(t), 1).eigenvalues[0] for t in (tau - h, tau + h)]
    hf = hdot_matrix_element(LAT3, P, sched, tau, phi, phi, basis.states).real
    assert hf == pytest.approx((e[1] - e[0]) / (2 * h), rel=1e-6)


def test_transition_bound_refuses_degenerate_levels():
    assert transition_bound(2.0, 1.0, 0.0) == 4.0
    with pytest.raises(ZeroDivisionError):
        transition_bound(1.0, 0.5, 0.5)


def test_phi_dot_norm_vanishes_at_endpoints_of_trig_schedule():
    sched = Schedule("trig-smooth")
    mid = phi_dot_norm(LAT2, P, sched, 0.5)
    assert mid > 1e-3
    assert phi_dot_norm(LAT2, P, sched, 0.0, dtau=1e-5) < 1e-3 * mid


def test_phi_dot_norm_matches_perturbation_sum():
    # ||d phi|| ** 2 = sum_k |<k|dH|0>| ** 2 / (E_k - E_0) ** 2
    sched = Schedule()
    basis, sweep = sector_operator(LAT2, P, sched)
    tau = 0.4
    vals, vecs = np.linalg.eigh(sweep.at(tau).to_dense())
    dH = sweep.derivative().to_dense() * sched.derivative(tau)
    amps = vecs[:, 1:].T @ dH @ vecs[:, 0]
    expected = math.sqrt(np.sum((amps / (vals[1:] - vals[0])) ** 2))
    assert phi_dot_norm(LAT2, P, sched, tau, dtau=1e-6) == pytest.approx(expected, rel=1e-4)


def test_sweep_operator_matches_hamiltonian():
    sched = Schedule("trig-smooth")
    sweep = SweepOperator(LAT2, P, sched)
    for tau in (0.0, 0.37, 1.0):
        dense = interpolated_hamiltonian(LAT2, P, sched, tau).to_dense().real
        assert np.allclose(sweep.at(tau).to_dense(), dense, atol=1e-12)
    mixed = sweep.mix((0.2, 0.7), (0.3, 1.1)).to_dense()
    ref = 0.3 * sweep.at(0.2).to_dense() + 1.1 * sweep.at(0.7).to_dense()
    assert np.allclose(mixed, ref, atol=1e-12)


def test_gap_scan_l2_against_dense_grid():
    sched = Schedule()
    scan = gap_scan(LAT2, P, sched, grid=np.linspace(0, 1, 21))
    basis = enumerate_sector(LAT2)
    fine = np.linspace(0, 1, 2001)
    gaps = []
    for t in fine:
        e = np.linalg.eigvalsh(project_hamiltonian(interpolated_hamiltonian(LAT2, P, sched, t), basis).to_dense())
        gaps.append(e[1] - e[0])
    assert scan.gap_min == pytest.approx(min(gaps), abs=1e-6)
    assert scan.tau_min == pytest.approx(fine[int(np.argmin(gaps))], abs=2e-3)
    assert scan.excited_splitting >= 0
    assert scan.coupling_ratio == pytest.approx(coupling_ratio(P, sched, scan.tau_min))


def test_coupling_ratio_limits():
    assert coupling_ratio(P, Schedule(), 0.0) == math.inf
    assert coupling_ratio(P, Schedule(), 1.0) == 0.0
    assert coupling_ratio(P, Schedule(), 0.5) == pytest.approx(1.0)


def test_golden_section_on_parabola():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2 + 1, 0.0, 1.0, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert fx == pytest.approx(1.0)


@pytest.mark.parametrize("L", [2, 3])
@pytest.mark.parametrize("ratio", [0.1, 0.43, 1.0, 3.0])
def test_duality_levels_agree(L, ratio):
    rep = duality_spectrum_check(L, ratio, 1.0)
    assert rep.gauge_dim == rep.ising_dim == 2 ** (L * L - 1)
    assert rep.passed, rep.differences


def test_duality_against_dense_ising_l2():
    lam1, lam2 = 0.43, 1.0
    H = ising_hamiltonian(2, lam1, lam2).to_dense().real
    flip = reduce(np.kron, [np.array([[0, 1], [1, 0]])] * 4)
    # even sector of the global flip built directly in the Z basis
    P_even = 0.5 * (np.eye(16) + flip)
    vals = np.linalg.eigvalsh(H + 1e3 * (np.eye(16) - P_even))[:8]
    gauge = project_hamiltonian(gauge_hamiltonian(LAT2, lam1, lam2), enumerate_sector(LAT2)).to_dense()
    assert np.allclose(np.linalg.eigvalsh(gauge), vals, atol=1e-9)
