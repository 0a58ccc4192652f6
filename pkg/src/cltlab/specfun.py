"""Normal special functions and smooth transition functions.

The transition functions are the two one-sided mollified step functions
used to squeeze an indicator ``1{t <= x}`` between smooth test functions:
``drop_before`` falls from 1 to 0 on ``[x - eta, x]`` and stays below the
indicator, ``drop_after`` falls on ``[x, x + eta]`` and stays above it.
Both are built from a single 7th-order smoothstep core, which is the
lowest-degree polynomial whose first three derivatives vanish at both ends
of the unit interval, so the glued function is C^3 on all of R and has
exactly computable derivative suprema.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Suprema over [0, 1] of the k-th derivative magnitude of the smoothstep
# core S(s) = 35 s^4 - 84 s^5 + 70 s^6 - 20 s^7:
#   |S'|   peaks at s = 1/2 with value 140 / 2^6,
#   |S''|  peaks at s = (5 -+ sqrt(5)) / 10,
#   |S'''| peaks at s = 1/2 with value 105/2.
# Each is re-derived by certified_core_max in the test suite.
CORE_SUP_D1 = 2.1875
CORE_SUP_D2 = 3.36 * math.sqrt(5.0)
CORE_SUP_D3 = 52.5


def phi_density(t):
    """Standard normal density exp(-t^2/2) / sqrt(2*pi); accepts arrays."""
    return np.exp(-0.5 * np.square(t)) / SQRT_2PI


def normal_cdf(x):
    """Standard normal CDF, absolute error below 1e-12; accepts arrays."""
    return ndtr(x)


def normal_truncated_second_moment(v: float, delta: float) -> float:
    """E[Y^2; |Y| > delta] for Y centered normal with variance v.

    Closed form v * (2*b*phi(b) + 2*(1 - Phi(b))) with b = delta / sqrt(v);
    a variance-0 law is the constant 0, so the moment is 0.
    """
    if v < 0:
        raise ValueError(f"variance must be nonnegative, got {v}")
    if delta < 0:
        raise ValueError(f"threshold must be nonnegative, got {delta}")
    if v == 0.0:
        return 0.0
    b = delta / math.sqrt(v)
    return v * (2.0 * b * float(phi_density(b)) + 2.0 * (1.0 - float(ndtr(b))))


def _core(s, order: int):
    """k-th derivative of the smoothstep core on [0, 1] (no clamping)."""
    if order == 0:
        return s**4 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))
    if order == 1:
        return 140.0 * s**3 * (1.0 - s) ** 3
    if order == 2:
        return 420.0 * s**2 * (1.0 - s) ** 2 * (1.0 - 2.0 * s)
    if order == 3:
        return 840.0 * s * (1.0 - s) * ((1.0 - 2.0 * s) ** 2 - s * (1.0 - s))
    raise ValueError(f"derivative order must be in 0..3, got {order}")


class Direction(enum.Enum):
    """Which side of the anchor point the function drops on."""

    DROP_BEFORE = "before"  # 1 on (-inf, x - eta], 0 on [x, inf)
    DROP_AFTER = "after"  # 1 on (-inf, x], 0 on [x + eta, inf)


@dataclass(frozen=True)
class TransitionFn:
    """Smooth monotone step-down from 1 to 0 over a width-eta interval."""

    x: float
    eta: float
    direction: Direction

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"drop width eta must be positive, got {self.eta}")

    @property
    def drop_start(self) -> float:
        if self.direction is Direction.DROP_BEFORE:
            return self.x - self.eta
        return self.x

    def __call__(self, t):
        return transition_eval(self, t, 0)

    def __str__(self) -> str:
        kind = "dropbefore" if self.direction is Direction.DROP_BEFORE else "dropafter"
        return f"{kind}:{self.x:g},{self.eta:g}"


def drop_before(x: float, eta: float) -> TransitionFn:
    """Transition equal to 1 up to x - eta and 0 from x on (lower sandwich)."""
    return TransitionFn(x, eta, Direction.DROP_BEFORE)


def drop_after(x: float, eta: float) -> TransitionFn:
    """Transition equal to 1 up to x and 0 from x + eta on (upper sandwich)."""
    return TransitionFn(x, eta, Direction.DROP_AFTER)


def transition_eval(fn: TransitionFn, t, order: int = 0):
    """Evaluate the k-th derivative (k in 0..3) of a transition function.

    The local coordinate is clamped to [0, 1], which makes the plateau
    values exact and keeps the sandwich against the indicator pointwise
    rather than up-to-rounding.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"derivative order must be in 0..3, got {order}")
    t = np.asarray(t, dtype=float)
    s = np.clip((t - fn.drop_start) / fn.eta, 0.0, 1.0)
    core = _core(s, order)
    if order == 0:
        out = 1.0 - core
    else:
        # Interior chain rule; on the plateaus every derivative vanishes.
        out = np.where(
            (s > 0.0) & (s < 1.0), -core / fn.eta**order, 0.0
        )
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class DerivBoundCert:
    """Certified suprema of |f'|, |f''|, |f'''| over all of R."""

    sup_f1: float
    sup_f2: float
    sup_f3: float


def transition_bounds(fn: TransitionFn) -> DerivBoundCert:
    """Derivative suprema for a transition function of drop width eta.

    The core suprema are fixed constants; the drop rescales the k-th
    derivative by eta^-k.
    """
    eta = fn.eta
    return DerivBoundCert(
        sup_f1=CORE_SUP_D1 / eta,
        sup_f2=CORE_SUP_D2 / eta**2,
        sup_f3=CORE_SUP_D3 / eta**3,
    )


def certified_core_max(order: int, refinements: int = 40, points: int = 4097) -> float:
    """Maximize |S^(order)| over [0, 1] by iterated grid refinement.

    Independent of the stored CORE_SUP_* constants; used to certify them.
    Each round keeps a bracket of two grid cells around the current argmax,
    so the bracket width shrinks geometrically and the final grid value is
    exact to far below 1e-8 relative error.
    """
    lo, hi = 0.0, 1.0
    best = 0.0
    for _ in range(refinements):
        s = np.linspace(lo, hi, points)
        vals = np.abs(_core(s, order))
        k = int(np.argmax(vals))
        best = float(vals[k])
        h = (hi - lo) / (points - 1)
        lo = max(0.0, s[k] - h)
        hi = min(1.0, s[k] + h)
    return best


def eta_for_epsilon(epsilon: float) -> float:
    """Drop width making Phi move by less than epsilon over any eta-interval.

    The density is bounded by 1/sqrt(2*pi), so eta = epsilon * sqrt(2*pi)
    gives Phi(x) - Phi(x - eta) < epsilon and Phi(x + eta) - Phi(x) <
    epsilon for every x.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return epsilon * SQRT_2PI


def delta_for_epsilon(epsilon: float, sup_f3: float) -> float:
    """Largest delta with delta * sup|f'''| <= epsilon.

    By the mean value theorem, |u - v| <= delta then forces
    |f''(u) - f''(v)| <= epsilon.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not sup_f3 > 0:
        raise ValueError(f"sup_f3 must be positive, got {sup_f3}")
    return epsilon / sup_f3
