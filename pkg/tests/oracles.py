"""Independent reference implementations used to cross-check the package.

Everything here is built from first principles (dense kron chains, explicit
index loops, series expansions) and deliberately avoids the code paths under
test.
"""

from functools import reduce
from itertools import permutations

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SMINUS = np.array([[0, 0], [1, 0]], dtype=complex)
EYE2 = np.eye(2, dtype=complex)


def kron_chain(mats):
    return reduce(np.kron, mats)


def dense_annihilation(site, n_sites):
    """Jordan-Wigner annihilation operator built as an explicit kron chain."""
    mats = [SZ] * (site - 1) + [SMINUS] + [EYE2] * (n_sites - site)
    return kron_chain(mats)


def dense_pauli(site, axis, n_sites):
    sigma = {"x": SX, "y": SY, "z": SZ}[axis]
    mats = [EYE2] * (site - 1) + [sigma] + [EYE2] * (n_sites - site)
    return kron_chain(mats)


def brute_force_hamiltonian(tensor):
    """Interaction Hamiltonian as the literal sum over all index orderings."""
    n = tensor.n_sites
    dim = 1 << n
    c = {i: dense_annihilation(i, n) for i in range(1, n + 1)}
    cd = {i: c[i].conj().T for i in c}
    h = np.zeros((dim, dim), dtype=complex)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            for k in range(1, n + 1):
                for l in range(1, n + 1):
                    coupling = tensor.entry(i, j, k, l)
                    if coupling != 0:
                        h += coupling * (cd[i] @ cd[j] @ c[k] @ c[l])
    return h


def step_doubling_expm(matrix, t):
    """exp(-i * matrix * t) by scaled Taylor series plus repeated squaring."""
    a = -1j * t * matrix
    norm = np.linalg.norm(a, ord=np.inf)
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-30) / 0.25))))
    small = a / (2 ** squarings)
    result = np.eye(matrix.shape[0], dtype=complex)
    term = np.eye(matrix.shape[0], dtype=complex)
    for order in range(1, 60):
        term = term @ small / order
        result = result + term
        if np.abs(term).max() < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def exhaustive_passive_energy(rho_eigs, h_eigs):
    """Minimum of sum_k r[perm(k)] e[k] over every pairing permutation."""
    e_asc = np.sort(np.asarray(h_eigs, dtype=float))
    best = None
    for perm in permutations(range(len(rho_eigs))):
        value = float(np.dot(np.asarray(rho_eigs, dtype=float)[list(perm)], e_asc))
        if best is None or value < best:
            best = value
    return best


def projector_populations(amplitudes, n_sites):
    """Level populations via explicitly constructed eigenspace projectors."""
    eigvecs = {
        0: np.array([1.0, 1.0j]) / np.sqrt(2.0),   # sigma_y eigenvalue +1
        1: np.array([1.0, -1.0j]) / np.sqrt(2.0),  # sigma_y eigenvalue -1
    }
    probs = np.zeros(n_sites + 1)
    for config in range(1 << n_sites):
        bits = [(config >> (n_sites - site)) & 1 for site in range(1, n_sites + 1)]
        vec = kron_chain([eigvecs[b] for b in bits])
        m_plus = sum(1 for b in bits if b == 0)
        probs[m_plus] += abs(np.vdot(vec, amplitudes)) ** 2
    return probs


def element_loop_partial_trace(amplitudes, n_sites, keep_sites):
    """Reduced density matrix via an explicit double loop over bit strings."""
    keep_dim = 1 << keep_sites
    env_dim = 1 << (n_sites - keep_sites)
    rho = np.zeros((keep_dim, keep_dim), dtype=complex)
    for a in range(keep_dim):
        for b in range(keep_dim):
            for env in range(env_dim):
                rho[a, b] += (amplitudes[a * env_dim + env]
                              * np.conj(amplitudes[b * env_dim + env]))
    return rho


def sample_gue(dim, rng):
    """One GUE matrix, eigenvalues only."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return np.linalg.eigvalsh((a + a.conj().T) / 2.0)


def sample_poisson_levels(dim, rng):
    """Spectrum with independent exponential spacings."""
    return np.cumsum(rng.exponential(1.0, size=dim))
