"""Monte Carlo laboratory for the swap-based proof route to the CLT.

The package turns the one-term-at-a-time swapping argument into
executable machinery: seeded samplers for a catalog of centered laws,
smooth transition functions with certified derivative bounds, hybrid-sum
chains with per-swap error bounds, Lindeberg tail-sum diagnostics for
triangular arrays, and exact small-n oracles for Kolmogorov-distance
convergence checks. Everything that samples is deterministic in
(seed, stream) and independent of worker count.
"""

__version__ = "0.1.0"

from .exchange import (
    ChainSpec,
    MCEstimate,
    NamedTestFn,
    SwapChainReport,
    estimate_expectation,
    hybrid_block,
    per_swap_bound,
    sample_hybrid,
    sandwich_check,
    swap_chain_scan,
)
from .lindeberg import (
    ArrayFamily,
    LindebergReport,
    TriangularRow,
    companion_normal_row,
    iid_family,
    lindeberg_report,
    lindeberg_tail_sum,
    max_row_variance_bound,
    moment_identity_check,
    normal_tail_sum_bound,
    parse_family,
    spike_family,
    validate_row,
)
from .sampling import (
    DistributionSpec,
    RngState,
    exp_centered,
    make_rng,
    normal,
    parse_dist,
    rademacher,
    sample_block,
    sample_dist,
    truncated_second_moment,
    two_point,
    uniform_sym,
)
from .specfun import (
    DerivBoundCert,
    Direction,
    TransitionFn,
    delta_for_epsilon,
    drop_after,
    drop_before,
    eta_for_epsilon,
    normal_cdf,
    normal_truncated_second_moment,
    phi_density,
    transition_bounds,
    transition_eval,
)
from .stats import (
    ConvergenceReport,
    EmpiricalSample,
    clt_convergence_scan,
    empirical_cdf,
    exact_ks_rademacher,
    family_convergence_scan,
    ks_distance_to_normal,
    rademacher_exact_cdf,
    row_sum_samples,
)

__all__ = [name for name in dir() if not name.startswith("_")]
