import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sykbattery.battery import (
    BatteryState,
    ChargingProtocol,
    DensityMatrix,
    PopulationRecord,
    Propagator,
    UndefinedRatioError,
    efficiency,
    ergotropy,
    evolve,
    half_battery_hamiltonian,
    passive_energy,
    population_matrix,
    populations,
    reduced_state,
    stored_energy,
)
from sykbattery.operators import QubitRegister, discharged_state, h0
from sykbattery.syk import DisorderSeed, apply_sparsity, draw_couplings

import oracles


def random_protocol(n, seed, p=1.0, j=1.0, tau_c=10.0):
    s = DisorderSeed(seed, 0)
    t = draw_couplings(n, j, s)
    if p < 1.0:
        t = apply_sparsity(t, p, s)
    return ChargingProtocol(1.0, t, tau_c)


def random_state(n, rng):
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return BatteryState(QubitRegister(n), v / np.linalg.norm(v))


def test_protocol_guards():
    t = draw_couplings(4, 1.0, DisorderSeed(0))
    with pytest.raises(ValueError):
        ChargingProtocol(0.0, t, 1.0)
    with pytest.raises(ValueError):
        ChargingProtocol(1.0, t, -1.0)


def test_evolve_time_zero_returns_state_exactly():
    protocol = random_protocol(4, 3)
    state0 = discharged_state(QubitRegister(4))
    out = evolve(protocol, state0, 0.0)
    assert out is state0


def test_evolve_guards():
    protocol = random_protocol(4, 3, tau_c=2.0)
    state0 = discharged_state(QubitRegister(4))
    with pytest.raises(ValueError):
        evolve(protocol, state0, -0.1)
    with pytest.raises(ValueError):
        evolve(protocol, state0, 2.5)


def test_evolve_unitary_and_energy_conserving():
    protocol = random_protocol(5, 8, p=0.6)
    state0 = discharged_state(QubitRegister(5))
    prop = Propagator(protocol.tensor)
    e0 = prop.energy_expectation(state0.amplitudes)
    for t in (0.3, 1.7, 6.0):
        st_t = evolve(protocol, state0, t)
        assert abs(np.linalg.norm(st_t.amplitudes) - 1.0) < 1e-12
        drift = abs(prop.energy_expectation(st_t.amplitudes) - e0)
        assert drift < 1e-10 * max(1.0, abs(e0))


def test_evolve_matches_step_doubling_series_oracle():
    from sykbattery.syk import hamiltonian_matrix

    protocol = random_protocol(4, 11, p=0.8)
    state0 = discharged_state(QubitRegister(4))
    t = 1.7
    out = evolve(protocol, state0, t).amplitudes
    h = hamiltonian_matrix(protocol.tensor)
    expected = oracles.step_doubling_expm(h, t) @ state0.amplitudes
    assert np.linalg.norm(out - expected) < 1e-8
    scipy_linalg = pytest.importorskip("scipy.linalg")
    pade = scipy_linalg.expm(-1j * t * h) @ state0.amplitudes
    assert np.linalg.norm(out - pade) < 1e-8


def test_evolve_grid_matches_single_times():
    protocol = random_protocol(4, 2, p=0.5)
    state0 = discharged_state(QubitRegister(4))
    times = np.array([0.0, 0.4, 2.2])
    grid = Propagator(protocol.tensor).evolve_grid(state0.amplitudes, times)
    assert np.array_equal(grid[:, 0], state0.amplitudes)
    for a, t in enumerate(times[1:], start=1):
        single = evolve(protocol, state0, float(t)).amplitudes
        assert np.linalg.norm(grid[:, a] - single) < 1e-12


def test_populations_of_discharged_state():
    for n in (2, 3, 5):
        rec = populations(discharged_state(QubitRegister(n)), 1.0)
        assert rec.populations[0] == pytest.approx(1.0, abs=1e-12)
        assert rec.populations[1:].max() < 1e-12
        assert np.array_equal(rec.shifted_levels, 2 * np.arange(n + 1))


def test_populations_sum_to_one_and_match_projector_oracle():
    rng = np.random.default_rng(17)
    for n in (3, 4):
        state = random_state(n, rng)
        rec = populations(state, 1.0)
        assert abs(rec.populations.sum() - 1.0) < 1e-10
        expected = oracles.projector_populations(state.amplitudes, n)
        assert np.abs(rec.populations - expected).max() < 1e-10


def test_population_record_validation():
    with pytest.raises(ValueError):
        PopulationRecord(0.0, np.array([0, 2]), np.array([0.7, 0.7]))


def test_energy_from_populations_matches_expectation_route():
    rng = np.random.default_rng(23)
    n = 4
    protocol = random_protocol(n, 5)
    state = random_state(n, rng)
    rec = populations(state, protocol.omega0)
    level_energies = (rec.shifted_levels - n) * protocol.omega0
    via_populations = float(level_energies @ rec.populations) + n * protocol.omega0
    direct = stored_energy(protocol, state, n)
    assert abs(via_populations - direct) < 1e-10


def test_stored_energy_zero_at_discharge_exactly():
    for n in (2, 4, 6, 8):
        protocol = random_protocol(n, 1)
        state0 = discharged_state(QubitRegister(n))
        assert stored_energy(protocol, state0, n) == 0.0
        assert stored_energy(protocol, state0, n // 2) == 0.0


def test_stored_energy_upper_bound():
    rng = np.random.default_rng(29)
    protocol = random_protocol(4, 9)
    for _ in range(50):
        state = random_state(4, rng)
        assert stored_energy(protocol, state, 4) <= 2.0 * 4 * protocol.omega0 + 1e-12


def test_stored_energy_subset_guard():
    protocol = random_protocol(4, 9)
    state = discharged_state(QubitRegister(4))
    with pytest.raises(ValueError):
        stored_energy(protocol, state, 5)
    with pytest.raises(ValueError):
        stored_energy(protocol, state, 0)


def test_reduced_state_product_and_entangled():
    # product state stays pure
    state = discharged_state(QubitRegister(4))
    rho = reduced_state(state, 2)
    purity = float(np.trace(rho.matrix @ rho.matrix).real)
    assert abs(purity - 1.0) < 1e-12
    # Bell pair traces to the maximally mixed single qubit
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1.0 / np.sqrt(2.0)
    rho_bell = reduced_state(BatteryState(QubitRegister(2), bell), 1)
    assert np.abs(rho_bell.matrix - np.eye(2) / 2.0).max() < 1e-12


def test_reduced_state_matches_element_loop_oracle():
    rng = np.random.default_rng(31)
    state = random_state(4, rng)
    rho = reduced_state(state, 2)
    expected = oracles.element_loop_partial_trace(state.amplitudes, 4, 2)
    assert np.abs(rho.matrix - expected).max() < 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31), keep=st.integers(1, 3))
def test_reduced_state_trace_preserving_and_psd(seed, keep):
    rng = np.random.default_rng(seed)
    state = random_state(4, rng)
    rho = reduced_state(state, keep)
    assert abs(np.trace(rho.matrix).real - 1.0) < 1e-12
    eigs = np.linalg.eigvalsh(rho.matrix)
    assert eigs.min() > -1e-12
    purity = float(np.trace(rho.matrix @ rho.matrix).real)
    assert 1.0 / rho.dim - 1e-12 <= purity <= 1.0 + 1e-12


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(2, np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex))
    with pytest.raises(ValueError):
        DensityMatrix(2, np.diag([0.7, 0.7]).astype(complex))


def test_ergotropy_passive_state_is_zero():
    # populations already decreasing along increasing energy
    h = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    assert abs(ergotropy(rho, h)) < 1e-13


def test_ergotropy_inverted_qubit():
    omega0 = 1.3
    h = omega0 * np.array([[0.0, -1.0j], [1.0j, 0.0]])
    plus_y = np.array([1.0, 1.0j]) / np.sqrt(2.0)
    rho = np.outer(plus_y, plus_y.conj())
    assert abs(ergotropy(rho, h) - 2.0 * omega0) < 1e-12


def test_ergotropy_partially_excited_qubit():
    # populations (0.3 ground, 0.7 excited): extractable work (0.7-0.3)*2*omega0
    omega0 = 0.9
    h = np.diag([-omega0, omega0]).astype(complex)
    rho = np.diag([0.3, 0.7]).astype(complex)
    assert abs(ergotropy(rho, h) - 0.8 * omega0) < 1e-12


def test_ergotropy_matches_exhaustive_permutation_oracle():
    rng = np.random.default_rng(41)
    for _ in range(100):
        dim = 6
        w = rng.dirichlet(np.ones(dim))
        basis = np.linalg.qr(rng.standard_normal((dim, dim))
                             + 1j * rng.standard_normal((dim, dim)))[0]
        rho = basis @ np.diag(w) @ basis.conj().T
        rho = (rho + rho.conj().T) / 2.0
        h = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        h = (h + h.conj().T) / 2.0
        r = np.linalg.eigvalsh(rho)
        e = np.linalg.eigvalsh(h)
        oracle = oracles.exhaustive_passive_energy(r, e)
        assert passive_energy(r, e) == oracle
        energy = float(np.einsum("ij,ji->", h, rho).real)
        assert abs(ergotropy(rho, h) - (energy - oracle)) < 1e-12


def test_ergotropy_bounds_and_degenerate_pairing():
    rng = np.random.default_rng(43)
    h = np.diag([-1.0, 0.0, 0.0, 1.0]).astype(complex)
    for _ in range(30):
        w = rng.dirichlet(np.ones(4))
        basis = np.linalg.qr(rng.standard_normal((4, 4))
                             + 1j * rng.standard_normal((4, 4)))[0]
        rho = basis @ np.diag(w) @ basis.conj().T
        rho = (rho + rho.conj().T) / 2.0
        value = ergotropy(rho, h)
        energy = float(np.einsum("ij,ji->", h, rho).real)
        assert -1e-12 <= value <= energy - (-1.0) + 1e-12
    # relabeling degenerate eigenvectors cannot change the passive energy
    r = np.array([0.4, 0.3, 0.2, 0.1])
    assert passive_energy(r, np.array([-1.0, 0.0, 0.0, 1.0])) == \
        passive_energy(r, np.array([-1.0, 0.0, 0.0, 1.0])[::-1])


def test_ergotropy_contract_errors():
    h = np.diag([0.0, 1.0]).astype(complex)
    with pytest.raises(ValueError):
        ergotropy(np.diag([0.6, 0.6]).astype(complex), h)
    with pytest.raises(ValueError):
        ergotropy(np.diag([1.2, -0.2]).astype(complex), h)
    with pytest.raises(ValueError):
        ergotropy(np.diag([0.5, 0.5]).astype(complex), np.array([[0, 1], [0, 0]],
                                                               dtype=complex))
    with pytest.raises(ValueError):
        ergotropy(np.eye(4).astype(complex) / 4.0, h)


def test_half_battery_hamiltonian_matches_h0():
    m = half_battery_hamiltonian(8, 1.5)
    expected = h0(QubitRegister(4), 1.5).matrix
    assert np.array_equal(m, expected)
    with pytest.raises(ValueError):
        half_battery_hamiltonian(5, 1.0)


def test_efficiency_in_unit_interval_on_pipeline_states():
    protocol = random_protocol(4, 19, p=0.7, tau_c=8.0)
    state0 = discharged_state(QubitRegister(4))
    prop = Propagator(protocol.tensor)
    for t in (0.5, 1.0, 2.0, 5.0, 8.0):
        state = BatteryState(QubitRegister(4),
                             prop.evolve_grid(state0.amplitudes, [t])[:, 0])
        e = efficiency(protocol, t, state)
        assert 0.0 <= e <= 1.0


def test_efficiency_undefined_at_discharge():
    protocol = random_protocol(4, 19)
    with pytest.raises(UndefinedRatioError):
        efficiency(protocol, 0.0, discharged_state(QubitRegister(4)))


def test_efficiency_requires_even_register():
    protocol = random_protocol(5, 19)
    state = discharged_state(QubitRegister(5))
    with pytest.raises(ValueError):
        efficiency(protocol, 1.0, state)


def test_population_matrix_batches_match_single():
    protocol = random_protocol(3, 7)
    state0 = discharged_state(QubitRegister(3))
    times = np.array([0.0, 1.0, 3.0])
    grid = Propagator(protocol.tensor).evolve_grid(state0.amplitudes, times)
    batch = population_matrix(grid, 3)
    for a in range(3):
        single = population_matrix(grid[:, a], 3)
        assert np.abs(batch[:, a] - single).max() < 1e-14
