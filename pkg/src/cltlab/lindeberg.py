"""Triangular arrays and the Lindeberg condition machinery.

A row is a finite list of independent centered laws whose variances sum
to 1. The Lindeberg tail sum ``sum_i E[X_i^2; |X_i| > delta]`` is the
quantity whose decay (for every delta) is the hypothesis of the
Lindeberg-Feller CLT; the ``spike`` preset is the canonical failure
witness, one term of variance 1/2 whose tail contribution never decays.

The companion normal row matches variances term by term, and the
normal-tail bound chain ``sum_i E[Y_i^2; |Y_i| > delta] <= 3 * delta^-2 *
max_i v_i`` (via E[Y^4] = 3 v^2 and Y^2 <= delta^-2 Y^4 on the tail
event) is what lets the companion row inherit a vanishing tail sum from
the original row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .exchange import estimate_expectation
from .sampling import (
    DistributionSpec,
    normal,
    parse_dist,
    sample_block,
    truncated_second_moment,
)
from .specfun import normal_truncated_second_moment

VARIANCE_SUM_TOL = 1e-10


@dataclass(frozen=True)
class TriangularRow:
    """One row of a triangular array: centered entries, variances summing to 1."""

    entries: tuple[DistributionSpec, ...]
    n_index: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.n_index < 1:
            raise ValueError(f"row label must be positive, got {self.n_index}")

    @property
    def variances(self) -> tuple[float, ...]:
        return tuple(e.variance for e in self.entries)


def validate_row(row: TriangularRow) -> None:
    """Raise unless every entry is centered and the variances sum to 1."""
    if len(row.entries) < 1:
        raise ValueError("row must have at least one entry")
    # The catalog only carries centered laws, so the mean check is
    # structural: anything that is not a DistributionSpec is rejected.
    for e in row.entries:
        if not isinstance(e, DistributionSpec):
            raise ValueError(f"row entry {e!r} is not a distribution spec")
    total = math.fsum(e.variance for e in row.entries)
    if abs(total - 1.0) > VARIANCE_SUM_TOL:
        raise ValueError(
            f"row variances must sum to 1, got {total!r} over {len(row.entries)} entries"
        )


@dataclass(frozen=True)
class ArrayFamily:
    """A rule producing one validated row per row index n."""

    name: str
    make_row: Callable[[int], TriangularRow]

    def row(self, n: int) -> TriangularRow:
        r = self.make_row(n)
        validate_row(r)
        return r


def iid_family(dist: DistributionSpec) -> ArrayFamily:
    """n copies of a unit-variance law, each rescaled by 1/sqrt(n)."""
    if abs(dist.variance - 1.0) > VARIANCE_SUM_TOL:
        raise ValueError(
            f"iid families need a unit-variance base law, got variance {dist.variance}"
        )

    def build(n: int) -> TriangularRow:
        if n < 1:
            raise ValueError(f"row size must be positive, got {n}")
        entry = dist.scaled(1.0 / math.sqrt(n))
        return TriangularRow(entries=(entry,) * n, n_index=n)

    return ArrayFamily(name=f"iid:{dist}", make_row=build)


def spike_family(dist: DistributionSpec) -> ArrayFamily:
    """One variance-1/2 term plus n terms of variance 1/(2n) each.

    The heavy term alone contributes 1/2 to the tail sum for every
    delta < 1/sqrt(2), so the Lindeberg condition fails for all n.
    """
    if abs(dist.variance - 1.0) > VARIANCE_SUM_TOL:
        raise ValueError(
            f"spike families need a unit-variance base law, got variance {dist.variance}"
        )

    def build(n: int) -> TriangularRow:
        if n < 1:
            raise ValueError(f"row size must be positive, got {n}")
        # sqrt(0.5) squares to the double one ulp above 1/2, so the heavy
        # term's tail contribution stays >= 0.5 in float arithmetic too.
        heavy = dist.scaled(math.sqrt(0.5))
        light = dist.scaled(math.sqrt(0.5 / n))
        return TriangularRow(entries=(heavy,) + (light,) * n, n_index=n)

    return ArrayFamily(name=f"spike:{dist}", make_row=build)


def fixed_row_family(entries: list[DistributionSpec], name: str = "custom") -> ArrayFamily:
    """A family that returns the same explicit row for every n."""
    row = TriangularRow(entries=tuple(entries), n_index=max(len(entries), 1))
    validate_row(row)
    return ArrayFamily(name=name, make_row=lambda n: row)


def parse_family(text: str) -> ArrayFamily:
    """Parse ``iid:<dist>`` or ``spike:<dist>`` family descriptions."""
    kind, sep, rest = text.strip().partition(":")
    if not sep or not rest:
        raise ValueError(
            f"bad array {text!r}; use iid:<dist> or spike:<dist>, e.g. iid:rademacher"
        )
    if kind == "iid":
        return iid_family(parse_dist(rest))
    if kind == "spike":
        return spike_family(parse_dist(rest))
    raise ValueError(f"unknown array family {kind!r}; use iid or spike")


def lindeberg_tail_sum(row: TriangularRow, delta: float) -> float:
    """sum_i E[X_i^2; |X_i| > delta], via closed-form truncated moments."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return math.fsum(truncated_second_moment(e, delta) for e in row.entries)


def max_row_variance_bound(row: TriangularRow, epsilon: float) -> tuple[float, float]:
    """(max_i var_i, epsilon^2 + tail_sum(row, epsilon)).

    The first component never exceeds the second: each variance splits
    into the part below epsilon (at most epsilon^2) plus its own tail
    term, which is at most the whole tail sum.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    max_var = max(e.variance for e in row.entries)
    return max_var, epsilon * epsilon + lindeberg_tail_sum(row, epsilon)


def companion_normal_row(row: TriangularRow) -> TriangularRow:
    """The row of centered normals matching the entry variances."""
    return TriangularRow(
        entries=tuple(normal(e.variance) for e in row.entries),
        n_index=row.n_index,
    )


def normal_tail_sum_bound(row: TriangularRow, delta: float) -> tuple[float, float]:
    """(companion tail sum, its bound 3 * delta^-2 * max variance).

    The bound follows from E[Y^4] = 3 v^2 for a centered normal of
    variance v together with Y^2 <= delta^-2 Y^4 on {|Y| > delta}:
    the fourth-moment sum 3 * sum v_i^2 is at most 3 * max_i v_i because
    the variances sum to 1.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    tail = math.fsum(
        normal_truncated_second_moment(e.variance, delta) for e in row.entries
    )
    bound = 3.0 * max(e.variance for e in row.entries) / (delta * delta)
    if tail > bound + VARIANCE_SUM_TOL:
        raise RuntimeError(
            f"normal tail sum {tail} exceeded its analytic bound {bound}"
        )
    return tail, bound


@dataclass(frozen=True)
class LindebergReport:
    """Tail-sum diagnostics for one (row, delta) pair."""

    n_index: int
    delta: float
    tail_sum: float
    max_variance: float
    normal_tail_sum: float
    normal_tail_bound: float

    def to_dict(self) -> dict:
        return {
            "n_index": self.n_index,
            "delta": self.delta,
            "tail_sum": self.tail_sum,
            "max_variance": self.max_variance,
            "normal_tail_sum": self.normal_tail_sum,
            "normal_tail_bound": self.normal_tail_bound,
        }


def lindeberg_report(row: TriangularRow, delta: float) -> LindebergReport:
    """Evaluate the tail sum and the companion-row bound chain for one row."""
    validate_row(row)
    tail = lindeberg_tail_sum(row, delta)
    normal_tail, normal_bound = normal_tail_sum_bound(row, delta)
    return LindebergReport(
        n_index=row.n_index,
        delta=delta,
        tail_sum=tail,
        max_variance=max(e.variance for e in row.entries),
        normal_tail_sum=normal_tail,
        normal_tail_bound=normal_bound,
    )


def decay_verdict(tail_sums: list[float]) -> str:
    """Finite-grid heuristic for the tail sum's limit behavior.

    ``vanishing`` when the sum drops by at least 10x from the smallest to
    the largest row on the grid, ``non-vanishing`` when it stays bounded
    away from 0 across the grid, ``inconclusive`` otherwise. This is
    finite evidence about an asymptotic statement and is labeled as a
    heuristic wherever it is printed.
    """
    if not tail_sums:
        raise ValueError("need at least one tail sum")
    first, last = tail_sums[0], tail_sums[-1]
    if last <= first / 10.0:
        return "vanishing"
    if min(tail_sums) > 0.0:
        return "non-vanishing"
    return "inconclusive"


def moment_identity_check(n_samples: int, seed: int, *, workers: int = 1) -> tuple[float, float]:
    """Monte Carlo (E[Z^2], E[Z^4]) for the package's normal sampler.

    The exact values 1 and 3 are what the normal-tail bound chain rests
    on; this checks the sampler actually delivers them.
    """
    if n_samples < 10_000:
        raise ValueError(f"need at least 1e4 samples, got {n_samples}")
    std_normal = normal(1.0)

    def sampler(rng, count):
        return sample_block(std_normal, rng, count)

    m2 = estimate_expectation(sampler, lambda z: z * z, n_samples, seed, workers=workers)
    m4 = estimate_expectation(
        sampler, lambda z: z * z * z * z, n_samples, seed, stream_base=1 << 32, workers=workers
    )
    return m2.mean, m4.mean
