"""Power variations, block statistics and the normal-moment constants."""

from __future__ import annotations

import enum
import math
import warnings
from functools import lru_cache

import numpy as np

from .errors import AccuracyWarning, ConfigError, RangeError


class ScalingMode(str, enum.Enum):
    """How ``f`` treats the length ``L`` of the interval an increment spans.

    ``SCALED`` uses ``L**(1 - p/2) * |x|**p`` (limit driven by volatility);
    ``UNSCALED`` uses ``|x|**p`` (limit driven by jumps or quadratic variation).
    """

    SCALED = "scaled"
    UNSCALED = "unscaled"

    @classmethod
    def parse(cls, value: "ScalingMode | str") -> "ScalingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown scaling mode {value!r}") from None


def integral_power(p: float) -> int:
    """``int(p)`` if p is a positive integer, else 0 (the kernels' fast-path flag)."""
    return int(p) if float(p).is_integer() and p > 0 else 0


def length_scale(p: float, mode: ScalingMode, length: float) -> float:
    if ScalingMode.parse(mode) is ScalingMode.SCALED:
        return length ** (1.0 - p / 2.0)
    return 1.0


def f_power(x, p: float, mode: ScalingMode, length: float):
    """Apply the power function to increment(s) ``x`` spanning ``length``."""
    return length_scale(p, mode, length) * np.abs(x) ** p


def normal_abs_moment(p: float) -> float:
    """E|N|^p for standard normal N: 2^(p/2) Gamma((p+1)/2) / sqrt(pi)."""
    if not p > 0:
        raise ConfigError(f"normal_abs_moment needs p > 0, got {p}")
    return math.exp(
        0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1.0)) - 0.5 * math.log(math.pi)
    )


@lru_cache(maxsize=None)
def _hermite_rule(order: int):
    # probabilists' Hermite: weight exp(-x^2/2), weights sum to sqrt(2 pi)
    x, w = np.polynomial.hermite_e.hermegauss(order)
    return x, w / math.sqrt(2.0 * math.pi)


def _cp_tensor(p: float, order: int) -> float:
    x, w = _hermite_rule(order)
    n1 = x[:, None]
    n2 = x[None, :]
    g = np.abs((n1 + n2) / math.sqrt(2.0)) ** p - 0.5 * (np.abs(n1) ** p + np.abs(n2) ** p)
    return float(2.0 * np.einsum("i,j,ij->", w, w, g * g))


def c_p_constant(p: float, quadrature_order: int = 160) -> float:
    """The pairwise constant c_p = 2 E[(|(N1+N2)/sqrt 2|^p - (|N1|^p + |N2|^p)/2)^2].

    Evaluated by tensor Gauss-Hermite quadrature. The rule is re-run at twice
    the order; if the two disagree by 1e-8 or more an :class:`AccuracyWarning`
    is issued (non-even p has a kink at zero, so convergence is algebraic).
    """
    if not p > 0:
        raise ConfigError(f"c_p_constant needs p > 0, got {p}")
    if quadrature_order < 20:
        raise ConfigError("quadrature_order must be >= 20")
    value = _cp_tensor(p, quadrature_order)
    check = _cp_tensor(p, 2 * quadrature_order)
    if abs(check - value) >= 1e-8:
        warnings.warn(
            f"c_p({p}) quadrature changed by {abs(check - value):.3g} on doubling the order",
            AccuracyWarning,
            stacklevel=2,
        )
    return max(value, 0.0)


def increments(path) -> np.ndarray:
    obs = _observations(path)
    return np.diff(obs)


def _observations(path) -> np.ndarray:
    obs = getattr(path, "observations", path)
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 1 or obs.size < 2:
        raise ConfigError("a path needs at least two observations")
    return obs


def unit_f_values(path, p: float, mode: ScalingMode) -> np.ndarray:
    """f applied to every increment, with interval length 1/n."""
    obs = _observations(path)
    n = obs.size - 1
    return f_power(np.diff(obs), p, mode, 1.0 / n)


def power_variation(path, p: float, mode: ScalingMode) -> float:
    """U_n: sum of f over the n increments."""
    return math.fsum(unit_f_values(path, p, mode))


def _check_block(n: int, i: int, k: int) -> None:
    if k < 1 or i < 0 or i + k > n:
        raise RangeError(f"block [{i}, {i + k}] does not fit in {n} increments")


def block_sum_theta_hat(path, p: float, mode: ScalingMode, i: int, k: int) -> float:
    """Sum of f over the k increments following observation i."""
    obs = _observations(path)
    n = obs.size - 1
    _check_block(n, i, k)
    return math.fsum(f_power(np.diff(obs[i : i + k + 1]), p, mode, 1.0 / n))


def block_increment_power(path, p: float, mode: ScalingMode, i: int, k: int) -> float:
    """f applied to X_{i+k} - X_i, scaled by the block length k/n."""
    obs = _observations(path)
    n = obs.size - 1
    _check_block(n, i, k)
    return float(f_power(obs[i + k] - obs[i], p, mode, k / n))
