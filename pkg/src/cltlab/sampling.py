"""Deterministic, stream-splittable sampling for a catalog of centered laws.

The generator is counter-based (Philox) and keyed by the pair
``(seed, stream)``, so distinct streams are independent by construction
and never share internal state. Chunked Monte Carlo derives one stream
per work chunk from the chunk index, which makes every estimate in this
package reproducible bit-for-bit at any worker count.

Uniform consumption per draw is fixed and documented per kind:

* ``rademacher``, ``uniform``, ``expcentered``, ``twopoint``: one uniform
  per draw.
* ``normal``: two uniforms per Box-Muller pair (trigonometric form); the
  second normal of each pair is cached on the generator state, so a draw
  served from the cache consumes no uniforms.

Uniform doubles are bit-identical across platforms (integer Philox output
scaled by 2^-53). Transformed draws additionally go through libm
(log/sqrt/cos/sin) and are bit-stable on a given platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .specfun import normal_truncated_second_moment

_MASK64 = (1 << 64) - 1

SQRT3 = math.sqrt(3.0)

KINDS = ("rademacher", "uniform", "expcentered", "twopoint", "normal")

# Outside this range the fourth moment of the two-point law blows up and
# desk-scale Monte Carlo on it is noise.
TWOPOINT_P_MIN = 0.01
TWOPOINT_P_MAX = 0.99


@dataclass(frozen=True)
class DistributionSpec:
    """A sampleable centered law: base kind, optional parameter, scale.

    Every non-normal base law has mean 0 and variance 1; ``normal`` with
    parameter v is sqrt(v) times a standard normal (v = 0 is the constant
    0). The scale multiplies samples, so the scaled variance is
    scale^2 * base_variance.
    """

    kind: str
    param: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(
                f"unknown distribution kind {self.kind!r}; expected one of {KINDS}"
            )
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.kind == "twopoint":
            if self.param is None:
                raise ValueError("twopoint requires a probability parameter p")
            if not (TWOPOINT_P_MIN <= self.param <= TWOPOINT_P_MAX):
                raise ValueError(
                    f"twopoint p must lie in [{TWOPOINT_P_MIN}, {TWOPOINT_P_MAX}],"
                    f" got {self.param}"
                )
        elif self.kind == "normal":
            if self.param is None:
                object.__setattr__(self, "param", 1.0)
            elif self.param < 0:
                raise ValueError(f"normal variance must be >= 0, got {self.param}")
        elif self.param is not None:
            raise ValueError(f"{self.kind} takes no parameter, got {self.param}")

    @property
    def base_variance(self) -> float:
        return self.param if self.kind == "normal" else 1.0

    @property
    def variance(self) -> float:
        return self.scale * self.scale * self.base_variance

    def scaled(self, factor: float) -> "DistributionSpec":
        """Same law with the scale multiplied by ``factor``."""
        return replace(self, scale=self.scale * factor)

    def __str__(self) -> str:
        out = self.kind
        if self.kind == "twopoint" or (self.kind == "normal"):
            out += f":{self.param:g}"
        if self.scale != 1.0:
            out += f"*{self.scale:g}"
        return out


def rademacher(scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec("rademacher", scale=scale)


def uniform_sym(scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec("uniform", scale=scale)


def exp_centered(scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec("expcentered", scale=scale)


def two_point(p: float, scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec("twopoint", param=p, scale=scale)


def normal(v: float = 1.0, scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec("normal", param=v, scale=scale)


def parse_dist(text: str) -> DistributionSpec:
    """Parse ``kind[:param][*scale]``, e.g. ``twopoint:0.1`` or ``uniform*0.25``."""
    body = text.strip().lower()
    scale = 1.0
    if "*" in body:
        body, _, scale_part = body.partition("*")
        try:
            scale = float(scale_part)
        except ValueError:
            raise ValueError(
                f"bad scale {scale_part!r} in {text!r}; use kind[:param][*scale]"
            ) from None
    param = None
    if ":" in body:
        body, _, param_part = body.partition(":")
        try:
            param = float(param_part)
        except ValueError:
            raise ValueError(
                f"bad parameter {param_part!r} in {text!r}; use kind[:param][*scale]"
            ) from None
    return DistributionSpec(body, param=param, scale=scale)


class RngState:
    """Single-owner random stream identified by (seed, stream).

    Not shareable between threads; parallel code derives one RngState per
    work chunk instead. ``counter`` tracks how many uniforms have been
    consumed.
    """

    __slots__ = ("seed", "stream", "counter", "_gen", "_spare_normal")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = self.seed | (self.stream << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self.counter = 0
        self._spare_normal: float | None = None

    def uniform(self) -> float:
        """One double in [0, 1) with 53 random bits."""
        self.counter += 1
        return float(self._gen.random())

    def uniforms(self, count: int) -> np.ndarray:
        """``count`` doubles in [0, 1); same values as ``count`` scalar calls."""
        self.counter += count
        return self._gen.random(count)

    def normals(self, count: int) -> np.ndarray:
        """Standard normal draws via pair-cached Box-Muller.

        Consumption is exactly what ``count`` scalar draws would use: the
        cached spare (if any) is served first, then ceil(remaining / 2)
        fresh uniform pairs.
        """
        out = np.empty(count)
        start = 0
        if self._spare_normal is not None and count > 0:
            out[0] = self._spare_normal
            self._spare_normal = None
            start = 1
        need = count - start
        if need > 0:
            pairs = (need + 1) // 2
            u = self.uniforms(2 * pairs)
            r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
            theta = 2.0 * math.pi * u[1::2]
            z = np.empty(2 * pairs)
            z[0::2] = r * np.cos(theta)
            z[1::2] = r * np.sin(theta)
            out[start:] = z[:need]
            if need % 2 == 1:
                self._spare_normal = float(z[need])
        return out

    def normal(self) -> float:
        return float(self.normals(1)[0])


def make_rng(seed: int, stream: int = 0) -> RngState:
    """Fresh generator for the given seed and substream index."""
    return RngState(seed, stream)


def sample_block(spec: DistributionSpec, rng: RngState, count: int) -> np.ndarray:
    """``count`` independent draws of the scaled law.

    Consumes the same uniforms, in the same order, as ``count`` calls to
    ``sample_dist``.
    """
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    if spec.kind == "rademacher":
        u = rng.uniforms(count)
        vals = np.where(u < 0.5, -1.0, 1.0)
    elif spec.kind == "uniform":
        vals = (2.0 * rng.uniforms(count) - 1.0) * SQRT3
    elif spec.kind == "expcentered":
        vals = -np.log1p(-rng.uniforms(count)) - 1.0
    elif spec.kind == "twopoint":
        p = spec.param
        hi = math.sqrt((1.0 - p) / p)
        lo = -math.sqrt(p / (1.0 - p))
        vals = np.where(rng.uniforms(count) < p, hi, lo)
    else:  # normal
        vals = rng.normals(count) * math.sqrt(spec.param)
    return vals * spec.scale


def sample_dist(spec: DistributionSpec, rng: RngState) -> float:
    """One draw from the scaled law."""
    return float(sample_block(spec, rng, 1)[0])


@lru_cache(maxsize=4096)
def _exp_centered_tail(c: float) -> float:
    """E[B^2; |B| > c] for B = Exp(1) - 1, by adaptive quadrature.

    The density is exp(-(b + 1)) on [-1, inf); absolute error <= 1e-10.
    """
    density = lambda b: b * b * math.exp(-(b + 1.0))
    total = 0.0
    if c < 1.0:
        total += quad(density, -1.0, -c, epsabs=1e-12, epsrel=1e-12)[0]
    total += quad(density, c, np.inf, epsabs=1e-12, epsrel=1e-12)[0]
    return total


def truncated_second_moment(spec: DistributionSpec, c: float) -> float:
    """E[X^2; |X| > c] for the scaled law, exact up to quadrature tolerance.

    Closed forms for all kinds except ``expcentered``, which integrates
    the density (absolute error <= 1e-10).
    """
    if c < 0:
        raise ValueError(f"truncation level must be nonnegative, got {c}")
    s = spec.scale
    if spec.kind == "rademacher":
        return spec.variance if s > c else 0.0
    if spec.kind == "uniform":
        top = s * SQRT3
        if c >= top:
            return 0.0
        return spec.variance * (1.0 - (c / top) ** 3)
    if spec.kind == "twopoint":
        p = spec.param
        hi = s * math.sqrt((1.0 - p) / p)
        lo = s * math.sqrt(p / (1.0 - p))
        total = 0.0
        if hi > c:
            total += hi * hi * p
        if lo > c:
            total += lo * lo * (1.0 - p)
        return total
    if spec.kind == "normal":
        return normal_truncated_second_moment(spec.variance, c)
    # expcentered: reduce to the unscaled law at threshold c / s
    return s * s * _exp_centered_tail(c / s)
