"""Spectral chaos diagnostics: gap ratio, critical sparsity, form factor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import DenseOperator, charge_diagonal
from .syk import sector_states

HERMITICITY_TOL = 1e-10
# spacings below this fraction of the spectral width count as degeneracies
DEGENERACY_FRACTION = 1e-12
# the gap ratio is declared collapsed once it drops below this fraction of
# its fully connected value
CRITICAL_FRACTION = 0.99


class NonHermitianError(ValueError):
    """Input operator is not Hermitian within tolerance."""


class SectorMixingError(ValueError):
    """Operator does not commute with the total charge."""


class InsufficientLevelsError(ValueError):
    """Too few distinct eigenvalues for a spacing statistic."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and optionally the matching eigenvector matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    def __post_init__(self) -> None:
        ev = self.eigenvalues
        if ev.ndim != 1:
            raise ValueError("eigenvalues must be a 1-D array")
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be sorted ascending")

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class SffCurve:
    """Disorder-averaged spectral form factor on a time grid."""

    beta: float
    times: np.ndarray
    values: np.ndarray
    n_realizations: int
    stderr: np.ndarray | None = None


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, DenseOperator):
        return op.matrix
    return np.asarray(op)


def diagonalize(op, with_vectors: bool = False) -> Spectrum:
    """Eigendecomposition of a Hermitian operator (dense, LAPACK-backed)."""
    m = _as_matrix(op)
    dev = np.abs(m - m.conj().T).max() if m.size else 0.0
    if dev > HERMITICITY_TOL:
        raise NonHermitianError(
            f"max|M - M^dag| = {dev:.3e} exceeds {HERMITICITY_TOL:.0e}"
        )
    if with_vectors:
        vals, vecs = np.linalg.eigh(m)
        return Spectrum(vals, vecs)
    return Spectrum(np.linalg.eigvalsh(m))


def sector_restrict(op: DenseOperator, charge_m: int) -> np.ndarray:
    """Block of a charge-conserving operator on the charge-m subspace.

    Rows/columns follow ascending basis-state order. Returned as a plain
    matrix: the block dimension C(N, m) is not a register dimension.
    """
    if not isinstance(op, DenseOperator):
        raise TypeError("sector_restrict expects a DenseOperator")
    q = charge_diagonal(op.register)
    offblock = q[:, None] != q[None, :]
    leak = np.abs(op.matrix[offblock]).max() if offblock.any() else 0.0
    if leak > HERMITICITY_TOL:
        raise SectorMixingError(
            f"operator couples charge sectors (max off-block element {leak:.3e})"
        )
    states = sector_states(op.register.n_sites, charge_m)
    return op.matrix[np.ix_(states, states)].copy()


def distinct_levels(eigenvalues: np.ndarray) -> np.ndarray:
    """Collapse exact degeneracies: spacings below the noise floor are merged."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        return ev
    width = ev[-1] - ev[0]
    threshold = DEGENERACY_FRACTION * width
    keep = [ev[0]]
    for e in ev[1:]:
        if e - keep[-1] > threshold:
            keep.append(e)
    return np.array(keep)


def gap_ratio(spectrum) -> float:
    """Mean nearest-neighbor gap ratio min(s_i/s_{i+1}, s_{i+1}/s_i)."""
    ev = spectrum.eigenvalues if isinstance(spectrum, Spectrum) else np.asarray(spectrum)
    levels = distinct_levels(np.sort(ev))
    if len(levels) < 3:
        raise InsufficientLevelsError(
            f"need at least 3 distinct levels, got {len(levels)}"
        )
    s = np.diff(levels)
    r = np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:])
    return float(r.mean())


def sff_terms(eigenvalues: np.ndarray, beta: float, times: np.ndarray):
    """Single-realization pieces of the form factor ratio.

    Returns (numerator(t), denominator): |Z(beta + it)|^2 and Z(beta)^2 with
    Z(tau) = sum_n exp(-tau E_n).
    """
    ev = np.asarray(eigenvalues, dtype=float)
    t = np.asarray(times, dtype=float)
    weights = np.exp(-beta * ev)
    z_t = np.exp(-1j * t[:, None] * ev[None, :]) @ weights.astype(complex)
    num = (z_t * z_t.conj()).real
    den = float(weights.sum()) ** 2
    return num, den


def sff_from_terms(nums: np.ndarray, dens: np.ndarray, beta: float, times,
                   average: str = "ratio_of_means") -> SffCurve:
    """Assemble the averaged curve from per-realization numerators/denominators.

    ``average="ratio_of_means"`` divides the separately averaged numerator
    and denominator (the annealed convention); ``"mean_of_ratios"`` averages
    the per-realization ratio instead. Ratio-of-means uncertainties come from
    a jackknife over realizations.
    """
    if average not in ("ratio_of_means", "mean_of_ratios"):
        raise ValueError(f"unknown average mode {average!r}")
    nums = np.atleast_2d(np.asarray(nums, dtype=float))
    dens = np.asarray(dens, dtype=float).ravel()
    n = len(dens)
    t = np.asarray(times, dtype=float)
    if average == "ratio_of_means":
        values = nums.mean(axis=0) / dens.mean()
        if n > 1:
            loo_num = (nums.sum(axis=0)[None, :] - nums) / (n - 1)
            loo_den = (dens.sum() - dens) / (n - 1)
            loo = loo_num / loo_den[:, None]
            stderr = np.sqrt((n - 1) / n * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
        else:
            stderr = None
    else:
        ratios = nums / dens[:, None]
        values = ratios.mean(axis=0)
        stderr = ratios.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else None
    return SffCurve(beta=beta, times=t, values=values,
                    n_realizations=n, stderr=stderr)


def sff(realizations, beta: float, times, average: str = "ratio_of_means") -> SffCurve:
    """Disorder-averaged spectral form factor over a list of spectra."""
    if len(realizations) == 0:
        raise ValueError("need at least one realization")
    t = np.asarray(times, dtype=float)
    if t.size == 0 or np.any(t < 0):
        raise ValueError("times must be a non-empty grid of non-negative values")
    nums = []
    dens = []
    for spec in realizations:
        ev = spec.eigenvalues if isinstance(spec, Spectrum) else np.asarray(spec)
        num, den = sff_terms(ev, beta, t)
        nums.append(num)
        dens.append(den)
    return sff_from_terms(np.array(nums), np.array(dens), beta, t, average)


@dataclass(frozen=True)
class CriticalSparsityResult:
    """Gap-ratio curve over a sparsity grid plus the interpolated threshold.

    ``p2`` is None when the curve never drops below the critical fraction of
    its fully connected value within the grid.
    """

    p_grid: np.ndarray
    r_mean: np.ndarray
    r_stderr: np.ndarray
    n_eff: np.ndarray
    r_reference: float
    threshold: float
    p2: float | None
    provenance: dict = field(default_factory=dict, compare=False)


def interpolate_crossing(p_grid: np.ndarray, r_mean: np.ndarray,
                         threshold: float) -> float | None:
    """Log-linear interpolation of the first threshold crossing.

    ``p_grid`` must be descending; points with non-finite r are skipped. The
    crossing is bracketed by the last point at or above threshold and the
    first point below it.
    """
    ps = np.asarray(p_grid, dtype=float)
    rs = np.asarray(r_mean, dtype=float)
    finite = np.isfinite(rs)
    ps, rs = ps[finite], rs[finite]
    above = None
    for p, r in zip(ps, rs):
        if r >= threshold:
            above = (p, r)
        else:
            if above is None:
                return float(p)
            p_hi, r_hi = above
            if r_hi == r:
                return float(p)
            frac = (threshold - r) / (r_hi - r)
            return float(np.exp(np.log(p) + frac * (np.log(p_hi) - np.log(p))))
    return None


def default_sparsity_grid(p_min: float = 0.01, points_per_decade: int = 20) -> np.ndarray:
    """Descending log grid from 1.0 down to ``p_min``, including both ends."""
    decades = -np.log10(p_min)
    n = int(round(decades * points_per_decade)) + 1
    return np.logspace(0.0, np.log10(p_min), n)


def find_critical_sparsity(
    n_sites: int,
    j_scale: float,
    p_grid,
    n_dis: int,
    master_seed: int,
    workers: int = 1,
    checkpoint_dir=None,
) -> CriticalSparsityResult:
    """Scan the disorder-averaged gap ratio over a descending sparsity grid.

    The gap ratio is evaluated on the full interaction spectrum. Returns the
    full r(p) curve with standard errors and the log-interpolated sparsity at
    which r first drops below ``CRITICAL_FRACTION`` of its p = 1 value.
    """
    from . import ensemble  # deferred: ensemble registers observables from here

    ps = np.asarray(p_grid, dtype=float)
    if ps.size == 0 or np.any(np.diff(ps) >= 0):
        raise ValueError("p_grid must be strictly descending")
    if ps[0] != 1.0:
        raise ValueError("p_grid must include 1.0 as its first point")
    if n_dis < 1:
        raise ValueError("n_dis must be at least 1")

    r_mean = np.empty(ps.size)
    r_stderr = np.empty(ps.size)
    n_eff = np.empty(ps.size, dtype=int)
    for a, p in enumerate(ps):
        spec = ensemble.EnsembleSpec(
            observable="gap_ratio",
            n_sites=n_sites,
            j_scale=j_scale,
            sparsity=float(p),
            n_dis=n_dis,
            master_seed=master_seed,
        )
        checkpoint = None
        if checkpoint_dir is not None:
            checkpoint = f"{checkpoint_dir}/gap_ratio_{a:03d}.jsonl"
        result = ensemble.run(spec, workers=workers, checkpoint=checkpoint)
        r_mean[a] = result.mean[0]
        r_stderr[a] = result.stderr[0]
        n_eff[a] = result.n_eff[0]

    r_ref = float(r_mean[0])
    threshold = CRITICAL_FRACTION * r_ref
    p2 = interpolate_crossing(ps, r_mean, threshold)
    return CriticalSparsityResult(
        p_grid=ps,
        r_mean=r_mean,
        r_stderr=r_stderr,
        n_eff=n_eff,
        r_reference=r_ref,
        threshold=threshold,
        p2=p2,
        provenance={
            "n_sites": n_sites,
            "j_scale": j_scale,
            "n_dis": n_dis,
            "master_seed": master_seed,
        },
    )
