"""Normal special functions and transition-function certificates."""

import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from cltlab.specfun import (
    CORE_SUP_D1,
    CORE_SUP_D2,
    CORE_SUP_D3,
    certified_core_max,
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

SQRT_2PI = math.sqrt(2.0 * math.pi)


def test_density_at_zero():
    assert phi_density(0.0) == pytest.approx(1.0 / SQRT_2PI, abs=1e-15)
    assert phi_density(0.0) == pytest.approx(0.3989422804, abs=1e-10)


def test_density_even_symmetry():
    assert phi_density(1.0) == phi_density(-1.0)


def test_density_integrates_to_one():
    total, err = quad(phi_density, -8.0, 8.0, epsabs=1e-13)
    assert abs(total - 1.0) <= 1e-10


def test_cdf_at_zero():
    assert normal_cdf(0.0) == 0.5


@pytest.mark.parametrize("x", [0.3, 1.7, 4.2])
def test_cdf_symmetry_identity(x):
    assert normal_cdf(x) + normal_cdf(-x) == pytest.approx(1.0, abs=1e-14)


def test_cdf_against_high_precision_oracle():
    # Independent oracle: 50-digit arbitrary-precision erfc.
    mp.mp.dps = 50
    for x in (-5.0, -2.5, -1.0, 0.0, 0.5, 1.0, 3.0, 6.0):
        exact = float(mp.erfc(-mp.mpf(x) / mp.sqrt(2)) / 2)
        assert abs(float(normal_cdf(x)) - exact) <= 1e-12
    assert normal_cdf(1.0) == pytest.approx(0.8413447461, abs=1e-9)


def test_cdf_nondecreasing_and_matches_quadrature():
    rng = np.random.default_rng(12)
    xs = np.sort(rng.uniform(-6, 6, 200))
    cdf = normal_cdf(xs)
    assert np.all(np.diff(cdf) >= 0)
    for k in range(0, 200, 2):
        a, b = xs[k], xs[k + 1]
        inc, _ = quad(phi_density, a, b, epsabs=1e-13)
        assert abs((cdf[k + 1] - cdf[k]) - inc) <= 1e-10


def test_normal_truncated_second_moment_edges():
    assert normal_truncated_second_moment(1.0, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert normal_truncated_second_moment(0.0, 0.3) == 0.0


def test_normal_truncated_second_moment_vs_quadrature():
    def tail(v, d):
        return 2 * quad(
            lambda t: t * t * math.exp(-t * t / (2 * v)) / math.sqrt(2 * math.pi * v),
            d,
            np.inf,
            epsabs=1e-13,
        )[0]

    for v, d in [(1.0, 1.0), (0.25, 0.5), (2.0, 3.0)]:
        assert normal_truncated_second_moment(v, d) == pytest.approx(tail(v, d), abs=1e-10)


def test_normal_truncated_rejects_negatives():
    with pytest.raises(ValueError):
        normal_truncated_second_moment(-1.0, 0.0)
    with pytest.raises(ValueError):
        normal_truncated_second_moment(1.0, -0.1)


# --- transition functions ---------------------------------------------------


def test_plateau_values():
    f = drop_before(0.0, 0.5)
    assert transition_eval(f, -0.5, 0) == 1.0
    assert transition_eval(f, 0.0, 0) == 0.0
    assert transition_eval(f, -3.0, 0) == 1.0
    assert transition_eval(f, 7.0, 0) == 0.0


def test_midpoint_value_is_half():
    # Core polynomial at s = 1/2: 35/16 - 84/32 + 70/64 - 20/128 = 1/2.
    f = drop_before(0.0, 1.0)
    assert transition_eval(f, -0.5, 0) == 0.5


def test_junction_derivatives_vanish():
    # Binary-exact parameters: both junctions are representable, so the
    # derivatives are exactly zero there.
    for fn in (drop_before(0.0, 0.5), drop_after(-1.25, 0.25), drop_before(2.0, 1.0)):
        for order in (1, 2, 3):
            assert transition_eval(fn, fn.drop_start, order) == 0.0
            assert transition_eval(fn, fn.drop_start + fn.eta, order) == 0.0


def test_junction_derivatives_vanish_to_float_noise():
    # With decimal parameters the true junction need not be representable;
    # at the nearest float the derivative is zero up to rounding of the
    # local coordinate (one ulp in s, scaled by the derivative bound).
    for fn in (drop_before(0.3, 0.7), drop_after(-1.2, 0.2)):
        cert = transition_bounds(fn)
        sups = (cert.sup_f1, cert.sup_f2, cert.sup_f3)
        for order in (1, 2, 3):
            for t in (fn.drop_start, fn.drop_start + fn.eta):
                assert abs(transition_eval(fn, t, order)) <= 1e-9 * sups[order - 1]


def test_order_out_of_range_rejected():
    with pytest.raises(ValueError):
        transition_eval(drop_before(0.0, 1.0), 0.0, 4)
    with pytest.raises(ValueError):
        transition_eval(drop_before(0.0, 1.0), 0.0, -1)


def test_values_in_unit_interval_and_nonincreasing():
    fn = drop_after(0.5, 1.3)
    t = np.linspace(-3, 4, 5001)
    vals = transition_eval(fn, t, 0)
    assert vals.min() >= 0.0 and vals.max() <= 1.0
    assert np.all(np.diff(vals) <= 0.0)


def test_sandwich_against_indicator_pointwise():
    x, eta = 0.2, 0.6
    lo = drop_before(x, eta)
    hi = drop_after(x, eta)
    t = np.linspace(-3, 3, 20001)
    indicator = (t <= x).astype(float)
    assert np.all(transition_eval(lo, t, 0) <= indicator)
    assert np.all(indicator <= transition_eval(hi, t, 0))


def test_bound_cert_values_at_unit_width():
    cert = transition_bounds(drop_before(0.0, 1.0))
    assert cert.sup_f1 == pytest.approx(2.1875, abs=1e-15)
    assert cert.sup_f2 == pytest.approx(3.36 * math.sqrt(5.0), abs=1e-12)
    assert cert.sup_f2 == pytest.approx(7.51324, abs=1e-4)


def test_bound_cert_eta_scaling():
    one = transition_bounds(drop_before(0.0, 1.0))
    two = transition_bounds(drop_before(0.0, 2.0))
    assert two.sup_f3 / one.sup_f3 == pytest.approx(1.0 / 8.0, rel=1e-12)
    assert two.sup_f1 / one.sup_f1 == pytest.approx(1.0 / 2.0, rel=1e-12)
    assert two.sup_f2 / one.sup_f2 == pytest.approx(1.0 / 4.0, rel=1e-12)


def test_certified_maximizer_agrees_with_stored_constants():
    for order, stored in ((1, CORE_SUP_D1), (2, CORE_SUP_D2), (3, CORE_SUP_D3)):
        found = certified_core_max(order)
        assert abs(found - stored) / stored <= 1e-8


@pytest.mark.parametrize("eta", [0.25, 1.0, 3.0])
def test_grid_maxima_never_exceed_cert(eta):
    fn = drop_before(0.1, eta)
    cert = transition_bounds(fn)
    t = np.linspace(fn.drop_start, fn.drop_start + eta, 200_001)
    sups = (cert.sup_f1, cert.sup_f2, cert.sup_f3)
    for order in (1, 2, 3):
        grid_max = np.abs(transition_eval(fn, t, order)).max()
        assert grid_max <= sups[order - 1] * (1 + 1e-12)
        assert grid_max >= sups[order - 1] * (1 - 1e-6)


def test_finite_differences_match_next_order():
    # Central differences: error <= h^2/6 * sup|f^(k+3)| on each piece.
    fn = drop_before(-0.3, 0.8)
    eta = fn.eta
    sup_next = {0: 52.5 / eta**3, 1: 840.0 / eta**4, 2: 10080.0 / eta**5}
    rng = np.random.default_rng(99)
    t = rng.uniform(fn.drop_start - 0.2, fn.drop_start + eta + 0.2, 1000)
    h = 1e-4 * eta
    for order in (0, 1, 2):
        fd = (transition_eval(fn, t + h, order) - transition_eval(fn, t - h, order)) / (2 * h)
        exact = transition_eval(fn, t, order + 1)
        tol = 4.0 * (h * h / 6.0) * sup_next[order] + 1e-12
        assert np.abs(fd - exact).max() <= tol


# --- epsilon selectors -------------------------------------------------------


def test_eta_for_epsilon_value():
    assert eta_for_epsilon(0.01) == pytest.approx(0.0250663, abs=1e-7)


def test_eta_forces_small_cdf_increment():
    for eps in (0.05, 0.01, 0.3):
        eta = eta_for_epsilon(eps)
        for x in np.linspace(-4, 4, 41):
            assert normal_cdf(x + eta) - normal_cdf(x) < eps
            assert normal_cdf(x) - normal_cdf(x - eta) < eps


def test_eta_linear_in_epsilon():
    assert eta_for_epsilon(0.2) == pytest.approx(2 * eta_for_epsilon(0.1), rel=1e-15)


def test_delta_for_epsilon_values():
    assert delta_for_epsilon(0.1, 10.0) == pytest.approx(0.01, rel=1e-15)
    assert delta_for_epsilon(52.5, 52.5) == 1.0
    with pytest.raises(ValueError):
        delta_for_epsilon(0.0, 1.0)
    with pytest.raises(ValueError):
        delta_for_epsilon(0.1, 0.0)


def test_delta_controls_second_derivative_moves():
    fn = drop_before(0.0, 0.5)
    cert = transition_bounds(fn)
    eps = 0.37
    delta = delta_for_epsilon(eps, cert.sup_f3)
    rng = np.random.default_rng(2718)
    u = rng.uniform(-1.5, 1.5, 100_000)
    v = u + rng.uniform(-delta, delta, u.size)
    moves = np.abs(transition_eval(fn, u, 2) - transition_eval(fn, v, 2))
    assert moves.max() <= eps * (1 + 1e-12)
