"""Charging protocol and battery figures of merit.

The battery starts in the ground state of the cell Hamiltonian (level
splitting omega0 along sigma^y) and is driven by the interaction Hamiltonian
alone for a duration tau_c. All evolution goes through one spectral
decomposition per realization, performed charge sector by charge sector
(the interaction conserves total fermion number, so this is exact).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import BatteryState, DenseOperator, QubitRegister, h0, sigma_y_expectations
from .syk import CouplingTensor, sector_hamiltonian, sector_states

# stored half-battery energies below this multiple of omega0 make the
# ergotropy/energy ratio meaningless
ENERGY_FLOOR = 1e-10


class UndefinedRatioError(ValueError):
    """Stored energy below the numerical floor; the efficiency is undefined."""


@dataclass(frozen=True)
class ChargingProtocol:
    """Quench parameters: cell splitting, interaction tensor, duration."""

    omega0: float
    tensor: CouplingTensor
    tau_c: float

    def __post_init__(self) -> None:
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.tau_c < 0:
            raise ValueError(f"tau_c must be non-negative, got {self.tau_c}")

    @property
    def register(self) -> QubitRegister:
        return QubitRegister(self.tensor.n_sites)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace state of a (sub)register."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = self.matrix
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} does not match dim {self.dim}")
        dev = np.abs(m - m.conj().T).max()
        if dev > 1e-12:
            raise ValueError(f"density matrix not hermitian: max dev {dev:.3e}")
        tr = m.trace()
        if abs(tr - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace deviates from 1 by {abs(tr - 1.0):.3e}")


@dataclass(frozen=True)
class PopulationRecord:
    """Occupation of the cell-Hamiltonian levels at one instant.

    Levels are reported with the spectrum shifted upward so the ground level
    carries label 0: ``shifted_levels[m] = 2 m`` corresponds to energy
    ``(2 m - N) omega0``.
    """

    time: float
    shifted_levels: np.ndarray
    populations: np.ndarray

    def __post_init__(self) -> None:
        p = self.populations
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"populations sum to {p.sum()!r}, not 1")
        if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
            raise ValueError("populations outside [0, 1]")


class Propagator:
    """Spectral-decomposition evolution under the interaction Hamiltonian.

    Diagonalizes each charge-sector block once; any time is then a phase
    multiplication in the eigenbasis.
    """

    def __init__(self, tensor: CouplingTensor):
        self.n_sites = tensor.n_sites
        self._sectors = []
        for m in range(self.n_sites + 1):
            states = sector_states(self.n_sites, m)
            vals, vecs = np.linalg.eigh(sector_hamiltonian(tensor, m))
            self._sectors.append((states, vals, vecs))

    def evolve_grid(self, amplitudes: np.ndarray, times) -> np.ndarray:
        """Evolved amplitudes at each time; shape (2^N, len(times))."""
        t = np.asarray(times, dtype=float)
        out = np.empty((len(amplitudes), t.size), dtype=complex)
        for states, vals, vecs in self._sectors:
            coef = vecs.conj().T @ amplitudes[states]
            phases = np.exp(-1j * vals[:, None] * t[None, :])
            out[states] = vecs @ (coef[:, None] * phases)
        # exp(-i H 0) is the identity; make the t = 0 column exact
        zero = t == 0.0
        if zero.any():
            out[:, zero] = amplitudes[:, None]
        return out

    def energy_expectation(self, amplitudes: np.ndarray) -> float:
        """<H_1> of a state (conserved under the evolution)."""
        total = 0.0
        for states, vals, vecs in self._sectors:
            coef = vecs.conj().T @ amplitudes[states]
            total += float(np.sum(vals * np.abs(coef) ** 2))
        return total


def evolve(protocol: ChargingProtocol, state0: BatteryState, t: float) -> BatteryState:
    """State at time t of the charging quench, exp(-i H_1 t) |state0>."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if t > protocol.tau_c:
        raise ValueError(f"time {t} exceeds the protocol duration {protocol.tau_c}")
    if t == 0.0:
        return state0
    amps = Propagator(protocol.tensor).evolve_grid(state0.amplitudes, [t])[:, 0]
    return BatteryState(state0.register, amps)


def y_basis_amplitudes(amplitudes: np.ndarray, n_sites: int) -> np.ndarray:
    """Rewrite amplitudes in the product eigenbasis of sigma^y.

    Index bit 0 selects the +1 eigenstate of sigma^y on that site. Accepts
    shape (2^N,) or (2^N, T).
    """
    single = amplitudes.ndim == 1
    psi = amplitudes.reshape(-1, 1) if single else amplitudes
    dim, t = psi.shape
    out = psi.astype(complex)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for site in range(1, n_sites + 1):
        pre = 1 << (site - 1)
        post = dim // (pre * 2)
        blk = out.reshape(pre, 2, post, t)
        up = blk[:, 0, :, :]
        dn = blk[:, 1, :, :]
        plus = (up - 1j * dn) * inv_sqrt2
        minus = (up + 1j * dn) * inv_sqrt2
        out = np.stack((plus, minus), axis=1).reshape(dim, t)
    return out[:, 0] if single else out


def population_matrix(amplitudes: np.ndarray, n_sites: int) -> np.ndarray:
    """Level populations for a batch of states; shape (N + 1, T).

    Row m is the weight on the cell-Hamiltonian eigenspace with shifted
    label 2 m.
    """
    single = amplitudes.ndim == 1
    amps_y = y_basis_amplitudes(amplitudes, n_sites)
    if single:
        amps_y = amps_y[:, None]
    dim = amps_y.shape[0]
    b = np.arange(dim, dtype=np.int64)
    m_plus = n_sites - np.bitwise_count(b).astype(np.int64)
    weights = np.abs(amps_y) ** 2
    out = np.empty((n_sites + 1, amps_y.shape[1]))
    for col in range(amps_y.shape[1]):
        out[:, col] = np.bincount(m_plus, weights=weights[:, col],
                                  minlength=n_sites + 1)
    return out[:, 0] if single else out


def populations(state: BatteryState, omega0: float, time: float = 0.0) -> PopulationRecord:
    """Project a state onto the degenerate levels of the cell Hamiltonian."""
    n = state.register.n_sites
    probs = population_matrix(state.amplitudes, n)
    return PopulationRecord(
        time=time,
        shifted_levels=2 * np.arange(n + 1),
        populations=probs,
    )


def stored_energy(protocol: ChargingProtocol, state_at_tau: BatteryState,
                  subset_size: int | None = None) -> float:
    """Energy gained by the first ``subset_size`` cells relative to discharge.

    ``<H_0^(subset)> + subset_size * omega0``; the subscript restriction
    truncates the cell sum, it is not a reduced-state expectation (both give
    the same number since H_0 is a sum of local terms).
    """
    n = state_at_tau.register.n_sites
    if subset_size is None:
        subset_size = n
    if not 1 <= subset_size <= n:
        raise ValueError(f"subset_size must be in [1, {n}], got {subset_size}")
    sy = sigma_y_expectations(state_at_tau.amplitudes, n)
    return float(protocol.omega0 * (sy[:subset_size].sum() + subset_size))


def reduced_state(state: BatteryState, keep_sites: int) -> DensityMatrix:
    """Partial trace onto the first ``keep_sites`` cells."""
    n = state.register.n_sites
    if not 1 <= keep_sites <= n:
        raise ValueError(f"keep_sites must be in [1, {n}], got {keep_sites}")
    dim_keep = 1 << keep_sites
    block = state.amplitudes.reshape(dim_keep, -1)
    rho = block @ block.conj().T
    return DensityMatrix(dim_keep, rho)


def passive_energy(rho_eigenvalues: np.ndarray, h_eigenvalues: np.ndarray) -> float:
    """Energy of the passive rearrangement: populations descending along
    energies ascending."""
    r_desc = np.sort(np.asarray(rho_eigenvalues, dtype=float))[::-1]
    e_asc = np.sort(np.asarray(h_eigenvalues, dtype=float))
    return float(np.dot(r_desc, e_asc))


def ergotropy(rho, h_sub) -> float:
    """Maximum unitarily extractable work from ``rho`` under ``h_sub``."""
    rho_m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    h_m = h_sub.matrix if isinstance(h_sub, DenseOperator) else np.asarray(h_sub)
    if rho_m.shape != h_m.shape:
        raise ValueError(
            f"dimension mismatch: rho {rho_m.shape} vs hamiltonian {h_m.shape}"
        )
    if np.abs(h_m - h_m.conj().T).max() > 1e-10:
        raise ValueError("hamiltonian must be hermitian")
    tr = rho_m.trace()
    if abs(tr - 1.0) > 1e-12:
        raise ValueError(f"rho trace deviates from 1 by {abs(tr - 1.0):.3e}")
    r = np.linalg.eigvalsh(rho_m)
    if r[0] < -1e-12:
        raise ValueError(f"rho has negative eigenvalue {r[0]:.3e}")
    e_h = np.linalg.eigvalsh(h_m)
    energy = float(np.einsum("ij,ji->", h_m, rho_m).real)
    return energy - passive_energy(r, e_h)


def half_battery_hamiltonian(n_sites: int, omega0: float) -> np.ndarray:
    """Cell Hamiltonian truncated to the first N/2 cells, as a dense matrix."""
    if n_sites % 2 != 0:
        raise ValueError(f"half-battery quantities need even n_sites, got {n_sites}")
    return h0(QubitRegister(n_sites // 2), omega0).matrix


def efficiency(protocol: ChargingProtocol, tau_c: float,
               state_at_tau: BatteryState) -> float:
    """Extractable-work fraction of the energy stored in half of the battery.

    Raises :class:`UndefinedRatioError` when the stored half-battery energy
    sits below the numerical floor; ensemble drivers record and exclude such
    realizations.
    """
    n = state_at_tau.register.n_sites
    if n % 2 != 0:
        raise ValueError(f"efficiency is defined for even n_sites, got {n}")
    half = n // 2
    stored = stored_energy(protocol, state_at_tau, half)
    if abs(stored) < ENERGY_FLOOR * protocol.omega0:
        raise UndefinedRatioError(
            f"half-battery stored energy {stored:.3e} below the floor at "
            f"tau_c = {tau_c}"
        )
    rho = reduced_state(state_at_tau, half)
    work = ergotropy(rho, half_battery_hamiltonian(n, protocol.omega0))
    return work / stored
