import numpy as np
import pytest

from sykbattery.operators import (
    BatteryState,
    QubitRegister,
    charge,
    charge_diagonal,
    discharged_state,
    h0,
    jw_annihilation,
    jw_creation,
    pauli,
    sigma_y_expectations,
)

import oracles


def test_register_guards():
    assert QubitRegister(3).dim == 8
    with pytest.raises(ValueError):
        QubitRegister(0)
    with pytest.raises(ValueError):
        QubitRegister(15)


def test_single_qubit_pauli_values():
    reg = QubitRegister(1)
    assert np.array_equal(pauli(1, "z", reg).matrix, np.diag([1.0 + 0j, -1.0]))
    assert np.array_equal(pauli(1, "x", reg).matrix,
                          np.array([[0, 1], [1, 0]], dtype=complex))


def test_pauli_involution_and_site_placement():
    reg = QubitRegister(2)
    sx1 = pauli(1, "x", reg).matrix
    assert np.allclose(sx1, np.kron(oracles.SX, np.eye(2)))
    assert np.allclose(sx1 @ sx1, np.eye(4))
    for site in (1, 2, 3):
        for axis in "xyz":
            m = pauli(site, axis, QubitRegister(3)).matrix
            assert np.abs(m @ m - np.eye(8)).max() < 1e-14


def test_paulis_on_different_sites_commute():
    reg = QubitRegister(3)
    for a1 in "xyz":
        for a2 in "xyz":
            m1 = pauli(1, a1, reg).matrix
            m2 = pauli(3, a2, reg).matrix
            assert np.abs(m1 @ m2 - m2 @ m1).max() < 1e-14


def test_pauli_site_out_of_range():
    reg = QubitRegister(2)
    with pytest.raises(ValueError):
        pauli(3, "x", reg)
    with pytest.raises(ValueError):
        pauli(0, "y", reg)
    with pytest.raises(ValueError):
        pauli(1, "w", reg)


def test_annihilation_single_site_matrix():
    # sigma_minus in the (up, down) basis ordering
    m = jw_annihilation(1, QubitRegister(1)).matrix
    assert np.array_equal(m, np.array([[0, 0], [1, 0]], dtype=complex))


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_canonical_anticommutation_relations(n):
    reg = QubitRegister(n)
    cs = [jw_annihilation(i, reg).matrix for i in range(1, n + 1)]
    cds = [jw_creation(i, reg).matrix for i in range(1, n + 1)]
    eye = np.eye(reg.dim)
    for i in range(n):
        assert np.abs(cds[i] - cs[i].conj().T).max() == 0.0
        for j in range(n):
            mixed = cs[i] @ cds[j] + cds[j] @ cs[i]
            expected = eye if i == j else 0.0 * eye
            assert np.abs(mixed - expected).max() < 1e-13
            assert np.abs(cs[i] @ cs[j] + cs[j] @ cs[i]).max() < 1e-13


def test_jw_matches_kron_oracle():
    reg = QubitRegister(3)
    for site in (1, 2, 3):
        assert np.abs(jw_annihilation(site, reg).matrix
                      - oracles.dense_annihilation(site, 3)).max() == 0.0


def test_h0_spectrum_binomial_degeneracies():
    assert np.allclose(np.linalg.eigvalsh(h0(QubitRegister(1), 1.0).matrix), [-1, 1])
    ev3 = np.linalg.eigvalsh(h0(QubitRegister(3), 1.0).matrix)
    assert np.allclose(ev3, [-3, -1, -1, -1, 1, 1, 1, 3])
    ev4 = np.linalg.eigvalsh(h0(QubitRegister(4), 1.0).matrix)
    assert np.sum(np.abs(ev4) < 1e-9) == 6  # C(4, 2)
    assert np.isclose(ev4.min(), -4.0)


def test_h0_rejects_nonpositive_splitting():
    with pytest.raises(ValueError):
        h0(QubitRegister(2), 0.0)


def test_charge_eigenvalues_and_multiplicities():
    q2 = np.linalg.eigvalsh(charge(QubitRegister(2)).matrix)
    assert np.allclose(np.sort(q2), [0, 1, 1, 2])
    reg = QubitRegister(3)
    direct = sum(
        jw_creation(i, reg).matrix @ jw_annihilation(i, reg).matrix
        for i in range(1, 4)
    )
    assert np.abs(charge(reg).matrix - direct).max() < 1e-13


def test_charge_diagonal_counts_occupied_sites():
    q = charge_diagonal(QubitRegister(2))
    # basis |s1 s2>: occupied = spin-up = bit 0
    assert list(q) == [2, 1, 1, 0]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7, 8])
def test_discharged_state_energy(n):
    reg = QubitRegister(n)
    state = discharged_state(reg)
    assert abs(np.linalg.norm(state.amplitudes) - 1.0) < 1e-12
    hm = h0(reg, 1.0).matrix
    energy = np.vdot(state.amplitudes, hm @ state.amplitudes).real
    assert abs(energy - (-n)) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_discharged_state_is_exact_nondegenerate_ground_state(n):
    reg = QubitRegister(n)
    state = discharged_state(reg)
    hm = h0(reg, 1.0).matrix
    residual = hm @ state.amplitudes - (-n) * state.amplitudes
    assert np.abs(residual).max() < 1e-13
    vals, vecs = np.linalg.eigh(hm)
    assert np.sum(vals < -n + 1e-9) == 1
    overlaps = np.abs(vecs.conj().T @ state.amplitudes)
    assert overlaps[vals > -n + 1e-9].max() < 1e-14


def test_discharged_state_documented_phase():
    # single cell: (|up> - i |down>)/sqrt(2)
    amps = discharged_state(QubitRegister(1)).amplitudes
    assert np.allclose(amps, np.array([1.0, -1.0j]) / np.sqrt(2.0))


def test_battery_state_norm_guard():
    reg = QubitRegister(2)
    with pytest.raises(ValueError):
        BatteryState(reg, np.array([1.0, 1.0, 0.0, 0.0], dtype=complex))


def test_sigma_y_expectations_against_dense_operators():
    rng = np.random.default_rng(3)
    n = 4
    reg = QubitRegister(n)
    psi = rng.standard_normal(reg.dim) + 1j * rng.standard_normal(reg.dim)
    psi /= np.linalg.norm(psi)
    sy = sigma_y_expectations(psi, n)
    for site in range(1, n + 1):
        dense = oracles.dense_pauli(site, "y", n)
        assert abs(sy[site - 1] - np.vdot(psi, dense @ psi).real) < 1e-12
