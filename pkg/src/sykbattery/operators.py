"""Qubit-register operator algebra for the battery model.

Basis convention used throughout the package: computational sigma-z product
basis with site 1 stored in the most significant bit. A basis index
``b`` encodes the configuration ``|s_1 s_2 ... s_N>`` with ``s_i = 0`` for
spin-up and ``s_i = 1`` for spin-down, so ``b = sum_i s_i 2^(N-i)``.

Under the Jordan-Wigner mapping implemented here, spin-up corresponds to an
occupied fermionic mode (``n_i = sigma^+ sigma^- = |up><up|``), hence the
occupation of site ``i`` in basis state ``b`` is ``1 - bit_i(b)``.

The single-site state annihilated by the lowering operator along y is fixed
to the global phase ``(|up> - i |down>)/sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # (sx - i sy)/2
_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

MAX_SITES = 14


@dataclass(frozen=True)
class QubitRegister:
    """Fixed-size register of two-level cells (one per fermionic mode)."""

    n_sites: int

    def __post_init__(self) -> None:
        if not isinstance(self.n_sites, (int, np.integer)):
            raise ValueError(f"n_sites must be an integer, got {self.n_sites!r}")
        if not 1 <= self.n_sites <= MAX_SITES:
            raise ValueError(
                f"n_sites must be in [1, {MAX_SITES}], got {self.n_sites}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def site_mask(self, site: int) -> int:
        """Bit mask selecting ``site`` (1-based, site 1 = MSB)."""
        self._check_site(site)
        return 1 << (self.n_sites - site)

    def string_mask(self, site: int) -> int:
        """Bit mask selecting all sites strictly before ``site``."""
        self._check_site(site)
        return ((1 << self.n_sites) - 1) & ~((1 << (self.n_sites - site + 1)) - 1)

    def _check_site(self, site: int) -> None:
        if not 1 <= site <= self.n_sites:
            raise ValueError(
                f"site must be in [1, {self.n_sites}], got {site}"
            )


@dataclass(frozen=True)
class DenseOperator:
    """Dense matrix acting on the full register Hilbert space."""

    register: QubitRegister
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self) -> None:
        m = self.matrix
        if m.shape != (self.register.dim, self.register.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match register dim {self.register.dim}"
            )
        if self.hermitian:
            dev = np.abs(m - m.conj().T).max()
            if dev >= 1e-12:
                raise ValueError(f"hermitian flag set but max|M - M^dag| = {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.register.dim


@dataclass(frozen=True)
class BatteryState:
    """Normalized pure state of the register."""

    register: QubitRegister
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (self.register.dim,):
            raise ValueError(
                f"amplitude vector length {self.amplitudes.shape} does not match "
                f"register dim {self.register.dim}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state norm deviates from 1 by {abs(norm - 1.0):.3e}")


def _kron_chain(mats) -> np.ndarray:
    return reduce(np.kron, mats)


def pauli(site: int, axis: str, register: QubitRegister) -> DenseOperator:
    """Pauli operator on one site, identity elsewhere."""
    if axis not in _PAULI:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    register._check_site(site)
    n = register.n_sites
    eye_pre = np.eye(1 << (site - 1), dtype=complex)
    eye_post = np.eye(1 << (n - site), dtype=complex)
    m = np.kron(np.kron(eye_pre, _PAULI[axis]), eye_post)
    return DenseOperator(register, m, hermitian=True)


def jw_annihilation(site: int, register: QubitRegister) -> DenseOperator:
    """Fermionic annihilation operator via the Jordan-Wigner string.

    ``c_i = (prod_{m<i} sigma^z_m) sigma^-_i`` with sigma^- = (sx - i sy)/2.
    """
    register._check_site(site)
    mats = [SIGMA_Z] * (site - 1) + [SIGMA_MINUS]
    mats += [np.eye(2, dtype=complex)] * (register.n_sites - site)
    return DenseOperator(register, _kron_chain(mats))


def jw_creation(site: int, register: QubitRegister) -> DenseOperator:
    """Conjugate transpose of :func:`jw_annihilation`."""
    c = jw_annihilation(site, register)
    return DenseOperator(register, c.matrix.conj().T.copy())


def h0(register: QubitRegister, omega0: float) -> DenseOperator:
    """Battery Hamiltonian: level splitting omega0 times the sum of sigma^y."""
    if omega0 <= 0:
        raise ValueError(f"omega0 must be positive, got {omega0}")
    m = np.zeros((register.dim, register.dim), dtype=complex)
    for site in range(1, register.n_sites + 1):
        m += pauli(site, "y", register).matrix
    return DenseOperator(register, omega0 * m, hermitian=True)


def charge_diagonal(register: QubitRegister) -> np.ndarray:
    """Eigenvalues of the total fermion number, indexed by basis state."""
    b = np.arange(register.dim, dtype=np.uint32)
    return (register.n_sites - np.bitwise_count(b)).astype(np.int64)


def charge(register: QubitRegister) -> DenseOperator:
    """Total fermion number operator (diagonal in the computational basis)."""
    q = charge_diagonal(register).astype(complex)
    return DenseOperator(register, np.diag(q), hermitian=True)


def discharged_state(register: QubitRegister) -> BatteryState:
    """Ground state of :func:`h0`: every cell in the -1 eigenstate of sigma^y.

    In the computational basis the amplitude of configuration ``b`` is
    ``2^(-N/2) (-i)^(number of down spins in b)``.
    """
    n = register.n_sites
    b = np.arange(register.dim, dtype=np.uint32)
    phases = np.power(-1.0j, np.bitwise_count(b).astype(np.int64))
    amps = phases / np.sqrt(float(register.dim))
    return BatteryState(register, amps.astype(complex))


def expectation(op: DenseOperator, state: BatteryState) -> float:
    """Real expectation value of a Hermitian operator."""
    val = np.vdot(state.amplitudes, op.matrix @ state.amplitudes)
    return float(val.real)


def sigma_y_expectations(state_matrix: np.ndarray, n_sites: int) -> np.ndarray:
    """Per-site <sigma^y> for a batch of states.

    ``state_matrix`` has shape (2^N,) or (2^N, T); returns (N,) or (N, T).
    Works directly on the tensor-product structure, no dense operators.
    """
    single = state_matrix.ndim == 1
    psi = state_matrix.reshape(-1, 1) if single else state_matrix
    dim, t = psi.shape
    out = np.empty((n_sites, t), dtype=float)
    for site in range(1, n_sites + 1):
        pre = 1 << (site - 1)
        post = dim // (pre * 2)
        blk = psi.reshape(pre, 2, post, t)
        z = np.einsum("abt,abt->t", blk[:, 0, :, :].conj(), blk[:, 1, :, :])
        out[site - 1] = 2.0 * z.imag
    return out[:, 0] if single else out
