"""Empirical CDFs, Kolmogorov distance to the normal, and exact small-n oracles.

Since the standard normal CDF is continuous, sup-norm (Kolmogorov)
convergence of the partial-sum CDFs is equivalent to pointwise CDF
convergence, and the sup over an empirical CDF is exactly computable
from the sorted sample. For sums of sign variables the partial-sum law
is binomial, which gives an exact oracle for both the CDF and the
Kolmogorov distance up to n = 64.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lindeberg import ArrayFamily, TriangularRow, iid_family
from .sampling import DistributionSpec, make_rng, sample_block
from .specfun import normal_cdf

# Asymptotic two-sided Kolmogorov band constants c with
# P(sqrt(N) * D_N > c) = 1%, resp. 0.1%.
KOLMOGOROV_99 = 1.63
KOLMOGOROV_999 = 1.95

EXACT_ORACLE_MAX_N = 64

DEFAULT_CHUNK = 16384


@dataclass(frozen=True)
class EmpiricalSample:
    """A sorted sample plus the seed and description that produced it."""

    values: np.ndarray
    source: str = ""
    seed: int = 0

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, dtype=float))
        if vals.size < 1:
            raise ValueError("sample must be nonempty")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.values.size)


def empirical_cdf(sample: EmpiricalSample, t) -> float:
    """Fraction of sample values <= t (right-continuous step function)."""
    n = len(sample)
    idx = np.searchsorted(sample.values, t, side="right")
    out = idx / n
    if np.ndim(out) == 0:
        return float(out)
    return out


def ks_distance_to_normal(sample: EmpiricalSample) -> float:
    """sup_t |F^(t) - Phi(t)|, exact over the sorted sample.

    At each sorted value v_i both one-sided excursions |i/N - Phi(v_i)|
    and |(i-1)/N - Phi(v_i)| contribute; the sup over all of R is
    attained at one of them.
    """
    v = sample.values
    n = v.size
    cdf = normal_cdf(v)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(np.maximum(np.abs(hi - cdf), np.abs(lo - cdf)).max())


def _check_oracle_n(n: int) -> None:
    if not 1 <= n <= EXACT_ORACLE_MAX_N:
        raise ValueError(
            f"exact sign-sum oracle supports 1 <= n <= {EXACT_ORACLE_MAX_N}, got {n}"
        )


def rademacher_exact_cdf(n: int, t: float) -> float:
    """Exact P(sum of n signs / sqrt(n) <= t) via integer binomial sums.

    The numerator is accumulated in exact integer arithmetic and divided
    by 2^n once, so the result is correctly rounded.
    """
    _check_oracle_n(n)
    root = math.sqrt(n)
    total = 0
    for k in range(n + 1):
        if (n - 2 * k) / root <= t:
            total += math.comb(n, k)
    return total / 2**n


def exact_ks_rademacher(n: int) -> float:
    """Exact Kolmogorov distance between the scaled sign-sum law and Phi."""
    _check_oracle_n(n)
    root = math.sqrt(n)
    denom = 2**n
    best = 0.0
    cum = 0
    for k in range(n, -1, -1):  # ascending support: value (n-2k)/sqrt(n)
        weight = math.comb(n, k)
        left = cum / denom
        cum += weight
        right = cum / denom
        phi = float(normal_cdf((n - 2 * k) / root))
        best = max(best, abs(right - phi), abs(left - phi))
    return best


@dataclass(frozen=True)
class ScanRow:
    n: int
    ks_distance: float
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ks_distance": self.ks_distance,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    """Kolmogorov distances of normalized sums over a grid of row sizes."""

    rows: tuple[ScanRow, ...]
    dist: str

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "dist": self.dist}


def row_sum_samples(
    row: TriangularRow,
    n_samples: int,
    seed: int,
    *,
    stream_base: int = 0,
    workers: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Seeded draws of the full row sum, chunked for determinism.

    Chunk c consumes substream ``stream_base + c``, entries drawn
    column-by-column in row order, so results are identical at any
    worker count.
    """
    sizes = [chunk] * (n_samples // chunk)
    if n_samples % chunk:
        sizes.append(n_samples % chunk)

    def run_chunk(c: int) -> np.ndarray:
        rng = make_rng(seed, stream_base + c)
        total = np.zeros(sizes[c])
        for e in row.entries:
            total += sample_block(e, rng, sizes[c])
        return total

    if workers <= 1:
        parts = [run_chunk(c) for c in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(len(sizes))))
    return np.concatenate(parts)


def family_convergence_scan(
    family: ArrayFamily,
    n_grid: list[int],
    n_samples: int,
    seed: int,
    *,
    workers: int = 1,
) -> ConvergenceReport:
    """KS distance to Phi of the row sums, for each row size on the grid."""
    if n_samples < 10_000:
        raise ValueError(f"need at least 1e4 samples, got {n_samples}")
    rows = []
    for task, n in enumerate(n_grid):
        row = family.row(n)
        sums = row_sum_samples(
            row, n_samples, seed, stream_base=task << 32, workers=workers
        )
        sample = EmpiricalSample(sums, source=family.name, seed=seed)
        rows.append(ScanRow(n, ks_distance_to_normal(sample), n_samples, seed))
    return ConvergenceReport(rows=tuple(rows), dist=family.name)


def clt_convergence_scan(
    dist: DistributionSpec,
    n_grid: list[int],
    n_samples: int,
    seed: int,
    *,
    workers: int = 1,
) -> ConvergenceReport:
    """KS distance of (X_1 + ... + X_n) / sqrt(n) to Phi over a grid of n.

    Requires a unit-variance summand law; each grid entry draws
    ``n_samples`` normalized sums with its own substream block.
    """
    if abs(dist.variance - 1.0) > 1e-10:
        raise ValueError(
            f"convergence scan needs a unit-variance law, got variance {dist.variance}"
        )
    report = family_convergence_scan(
        iid_family(dist), n_grid, n_samples, seed, workers=workers
    )
    return ConvergenceReport(rows=report.rows, dist=str(dist))
