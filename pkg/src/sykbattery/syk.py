"""Random two-body (four-operator) coupling tensors and their Hamiltonians.

The interaction is ``H = sum_{ijkl} J_ijkl c+_i c+_j c_k c_l`` with all four
indices running independently over 1..N. The tensor obeys
``J_ijkl = -J_jikl = -J_ijlk`` and ``J_ijkl = conj(J_klij)``, so one complex
number per canonical index ``((i<j), (k<l))`` with ``(i,j) <= (k,l)``
determines everything; entries with ``(i,j) = (k,l)`` are real.

Couplings are zero-mean Gaussian with ``E[|J|^2] = J^2 / N^3``. Pruning a
canonical index removes it together with its hermitian partner, and the
surviving amplitudes are rescaled by ``1/sqrt(p)`` so the retained-coupling
variance is ``J^2 / (p N^3)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .operators import QubitRegister, DenseOperator

# RNG stream tags; each (master_seed, realization_index, tag, n_sites) tuple
# seeds an independent generator.
_STREAM_COUPLINGS = 0
_STREAM_MASK = 1

# cap on rows x states elements processed per vectorized pass
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class DisorderSeed:
    """Identifies one disorder realization within a reproducible ensemble."""

    master_seed: int
    realization_index: int = 0

    def __post_init__(self) -> None:
        if self.realization_index < 0:
            raise ValueError("realization_index must be non-negative")

    def rng(self, stream: int, *context: int) -> np.random.Generator:
        key = [self.master_seed & 0xFFFFFFFFFFFFFFFF, self.realization_index,
               stream, *context]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@lru_cache(maxsize=32)
def canonical_indices(n_sites: int) -> np.ndarray:
    """All canonical index rows (i, j, k, l), i<j, k<l, (i,j) <= (k,l), 1-based."""
    pairs = [(i, j) for i in range(1, n_sites + 1) for j in range(i + 1, n_sites + 1)]
    rows = [
        (pi[0], pi[1], pk[0], pk[1])
        for a, pi in enumerate(pairs)
        for pk in pairs[a:]
    ]
    arr = np.array(rows, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=32)
def _canonical_lookup(n_sites: int) -> dict:
    return {tuple(int(x) for x in row): pos
            for pos, row in enumerate(canonical_indices(n_sites))}


@dataclass(frozen=True)
class CouplingTensor:
    """Canonical storage of one disorder realization of the coupling tensor.

    ``values[pos]`` is the coupling at ``canonical_indices(n_sites)[pos]``
    after any sparsification rescale; pruned entries are exactly zero and
    flagged in ``kept``.
    """

    n_sites: int
    j_scale: float
    sparsity: float
    values: np.ndarray
    kept: np.ndarray

    def __post_init__(self) -> None:
        m = len(canonical_indices(self.n_sites))
        if self.values.shape != (m,) or self.kept.shape != (m,):
            raise ValueError("values/kept length does not match canonical index count")

    @property
    def n_canonical(self) -> int:
        return len(self.values)

    def entry(self, i: int, j: int, k: int, l: int) -> complex:
        """Reconstructed tensor entry for an arbitrary ordered index tuple."""
        for idx in (i, j, k, l):
            if not 1 <= idx <= self.n_sites:
                raise ValueError(f"index {idx} out of range 1..{self.n_sites}")
        if i == j or k == l:
            return 0.0 + 0.0j
        sign = 1.0
        if i > j:
            i, j = j, i
            sign = -sign
        if k > l:
            k, l = l, k
            sign = -sign
        lookup = _canonical_lookup(self.n_sites)
        if (i, j) <= (k, l):
            return sign * complex(self.values[lookup[(i, j, k, l)]])
        return sign * complex(np.conj(self.values[lookup[(k, l, i, j)]]))

    def to_csv(self, path) -> None:
        """Dump one record per canonical index for cross-implementation diffs."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "k", "l", "re", "im", "kept"])
            for (i, j, k, l), v, kept in zip(
                canonical_indices(self.n_sites), self.values, self.kept
            ):
                writer.writerow(
                    [i, j, k, l, repr(float(v.real)), repr(float(v.imag)),
                     int(bool(kept))]
                )


def diagonal_canonical_mask(n_sites: int) -> np.ndarray:
    """True where the canonical row has (i,j) = (k,l); those entries are real."""
    idx = canonical_indices(n_sites)
    return (idx[:, 0] == idx[:, 2]) & (idx[:, 1] == idx[:, 3])


def draw_couplings(n_sites: int, j_scale: float, seed: DisorderSeed) -> CouplingTensor:
    """Fully connected realization: independent Gaussians on canonical indices."""
    if n_sites < 2:
        raise ValueError(f"n_sites must be at least 2, got {n_sites}")
    if j_scale <= 0:
        raise ValueError(f"j_scale must be positive, got {j_scale}")
    m = len(canonical_indices(n_sites))
    sigma = j_scale * n_sites ** -1.5
    raw = seed.rng(_STREAM_COUPLINGS, n_sites).standard_normal(2 * m)
    re, im = raw[:m], raw[m:]
    values = sigma / np.sqrt(2.0) * (re + 1j * im)
    diag = diagonal_canonical_mask(n_sites)
    # hermiticity forces (i,j)=(k,l) entries real; reuse the real draw at
    # full variance J^2/N^3
    values[diag] = sigma * re[diag]
    return CouplingTensor(
        n_sites=n_sites,
        j_scale=j_scale,
        sparsity=1.0,
        values=values,
        kept=np.ones(m, dtype=bool),
    )


def apply_sparsity(tensor: CouplingTensor, p: float, seed: DisorderSeed) -> CouplingTensor:
    """Keep each canonical coupling with probability p, rescale by 1/sqrt(p).

    The Bernoulli variable lives on the canonical representative, so the
    hermitian partner is pruned with it and the Hamiltonian stays hermitian
    term by term. The mask uniforms do not depend on p: masks drawn from the
    same seed at different p are nested.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"sparsity p must be in (0, 1], got {p}")
    u = seed.rng(_STREAM_MASK, tensor.n_sites).random(tensor.n_canonical)
    kept = tensor.kept & (u < p)
    values = np.where(kept, tensor.values / np.sqrt(p), 0.0 + 0.0j)
    return CouplingTensor(
        n_sites=tensor.n_sites,
        j_scale=tensor.j_scale,
        sparsity=tensor.sparsity * p,
        values=values,
        kept=kept,
    )


@lru_cache(maxsize=32)
def _parity_table(n_sites: int) -> np.ndarray:
    """parity_table[b] = popcount(b) mod 2 for b < 2^n_sites."""
    b = np.arange(1 << n_sites, dtype=np.int64)
    return (np.bitwise_count(b) & 1).astype(np.int8)


@lru_cache(maxsize=32)
def _term_masks(n_sites: int):
    """Per-canonical-row site masks and string masks for the fast builder."""
    reg = QubitRegister(n_sites)
    idx = canonical_indices(n_sites)
    site_mask = np.array(
        [[reg.site_mask(int(s)) for s in row] for row in idx], dtype=np.int64
    )
    string_mask = np.array(
        [[reg.string_mask(int(s)) for s in row] for row in idx], dtype=np.int64
    )
    return site_mask, string_mask


def _scatter_rows(
    acc_re: np.ndarray,
    acc_im: np.ndarray,
    dim: int,
    states: np.ndarray,
    position: np.ndarray | None,
    tensor: CouplingTensor,
    rows: np.ndarray,
    with_conjugate: bool,
) -> None:
    """Apply ``4 J c+_i c+_j c_k c_l`` for the given canonical rows.

    Scatters matrix elements into flat real/imag accumulators; when
    ``with_conjugate`` also scatters the conjugate transpose (the hermitian
    partner term of an off-diagonal canonical row).
    """
    if rows.size == 0:
        return
    n = tensor.n_sites
    parity = _parity_table(n)
    site_mask, string_mask = _term_masks(n)
    coeff = 4.0 * tensor.values[rows]
    m_i, m_j, m_k, m_l = (site_mask[rows, c][:, None] for c in range(4))
    s_i, s_j, s_k, s_l = (string_mask[rows, c][:, None] for c in range(4))

    b0 = states[None, :]
    # operator order c+_i c+_j c_k c_l: rightmost acts first; annihilation
    # requires an occupied mode (bit clear), creation an empty one (bit set)
    valid = (b0 & m_l) == 0
    exp = parity[b0 & s_l]
    b1 = b0 | m_l
    valid &= (b1 & m_k) == 0
    exp = exp ^ parity[b1 & s_k]
    b2 = b1 | m_k
    valid &= (b2 & m_j) != 0
    exp = exp ^ parity[b2 & s_j]
    b3 = b2 & ~m_j
    valid &= (b3 & m_i) != 0
    exp = exp ^ parity[b3 & s_i]
    b4 = b3 & ~m_i

    amp = coeff[:, None] * (1.0 - 2.0 * exp)
    src = np.broadcast_to(b0, amp.shape)[valid]
    dst = b4[valid]
    amp = amp[valid]
    if position is not None:
        src = position[src]
        dst = position[dst]
    lin = dst * dim + src
    size = dim * dim
    acc_re += np.bincount(lin, weights=amp.real, minlength=size)
    acc_im += np.bincount(lin, weights=amp.imag, minlength=size)
    if with_conjugate:
        lin_t = src * dim + dst
        acc_re += np.bincount(lin_t, weights=amp.real, minlength=size)
        acc_im -= np.bincount(lin_t, weights=amp.imag, minlength=size)


def _build_block(states: np.ndarray, position: np.ndarray | None,
                 tensor: CouplingTensor) -> np.ndarray:
    dim = len(states)
    acc_re = np.zeros(dim * dim)
    acc_im = np.zeros(dim * dim)
    diag = diagonal_canonical_mask(tensor.n_sites)
    live = np.nonzero(tensor.kept)[0]
    chunk = max(1, _CHUNK_ELEMENTS // max(1, len(states)))
    for kind_rows, conj in ((live[~diag[live]], True), (live[diag[live]], False)):
        for start in range(0, kind_rows.size, chunk):
            _scatter_rows(acc_re, acc_im, dim, states, position, tensor,
                          kind_rows[start:start + chunk], conj)
    return (acc_re + 1j * acc_im).reshape(dim, dim)


def hamiltonian_matrix(tensor: CouplingTensor) -> np.ndarray:
    """Dense interaction Hamiltonian on the full 2^N space."""
    dim = 1 << tensor.n_sites
    return _build_block(np.arange(dim, dtype=np.int64), None, tensor)


def build_hamiltonian(tensor: CouplingTensor, register: QubitRegister) -> DenseOperator:
    """Assemble the charging Hamiltonian for ``register``."""
    if tensor.n_sites != register.n_sites:
        raise ValueError(
            f"tensor has {tensor.n_sites} sites but register has {register.n_sites}"
        )
    return DenseOperator(register, hamiltonian_matrix(tensor), hermitian=True)


@lru_cache(maxsize=64)
def sector_states(n_sites: int, charge_m: int) -> np.ndarray:
    """Basis states (ascending) with total fermion number ``charge_m``."""
    if not 0 <= charge_m <= n_sites:
        raise ValueError(f"charge sector must be in [0, {n_sites}], got {charge_m}")
    b = np.arange(1 << n_sites, dtype=np.int64)
    states = b[n_sites - np.bitwise_count(b) == charge_m]
    states.setflags(write=False)
    return states


@lru_cache(maxsize=32)
def _sector_positions(n_sites: int) -> np.ndarray:
    """position[b] = row of basis state b inside its own charge sector."""
    dim = 1 << n_sites
    pos = np.empty(dim, dtype=np.int64)
    for m in range(n_sites + 1):
        st = sector_states(n_sites, m)
        pos[st] = np.arange(len(st))
    pos.setflags(write=False)
    return pos


def sector_hamiltonian(tensor: CouplingTensor, charge_m: int) -> np.ndarray:
    """Charge-sector block of the interaction Hamiltonian, built directly.

    Equals the corresponding block of :func:`hamiltonian_matrix` because the
    interaction conserves total fermion number.
    """
    states = sector_states(tensor.n_sites, charge_m)
    return _build_block(states, _sector_positions(tensor.n_sites), tensor)
