"""Conditional-variance estimators built from local comparisons of power variations.

Three universal estimators share one template: within every window of k
consecutive increments, compare f applied to a sum of increments with the
sum of f over the same increments, square, average and aggregate.

* :func:`v_hat`       - the sum over all k increments (one comparison per window);
* :func:`v_tilde`     - sums over pairs of increments;
* :func:`v_universal` - sums over l-subsets, 2 <= l <= k.

``v_universal`` with l = 2 reproduces ``v_tilde`` and with l = k reproduces
``v_hat``. Window i (0-based, i = 0..n-k) covers increments i+1..i+k in the
1-based numbering of the observations.

Two earlier proposals, which are only consistent for continuous paths, are
provided for comparison: :func:`mz_estimator` (a bias-corrected contrast of
neighbouring block sums) and :func:`subsample_estimator`.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, RangeError, SubsetRefusalError
from .statistics import (
    ScalingMode,
    integral_power,
    length_scale,
    power_variation,
    unit_f_values,
)

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10**6
# enumeration is preferred over the polynomial route below this many subset visits
_CHEAP_ENUMERATION = 5 * 10**7
METHODS = ("auto", "enumerate", "polynomial", "sample")


def default_k(n: int) -> int:
    return math.ceil(2.0 * math.sqrt(n))


def default_l(k: int) -> int:
    return max(2, math.ceil(math.sqrt(k)))


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning of the window estimators.

    ``k`` and ``l`` default (``None``) to ceil(2 sqrt n) and ceil(sqrt k) for
    the path at hand. ``subset_budget`` caps the number of l-subsets visited
    per window (0 = exact). ``method`` picks how ``v_universal`` evaluates the
    subset average: ``"auto"``, ``"enumerate"``, ``"polynomial"`` (exact, even
    integer p only) or ``"sample"``.
    """

    p: float = 2.0
    mode: ScalingMode = ScalingMode.SCALED
    k: int | None = None
    l: int | None = None
    subset_budget: int = 0
    subset_seed: int = 0
    method: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "mode", ScalingMode.parse(self.mode))
        if not (self.p > 0 and math.isfinite(self.p)):
            raise ConfigError(f"p must be positive, got {self.p}")
        if self.k is not None and self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.l is not None and self.l < 2:
            raise ConfigError(f"l must be >= 2, got {self.l}")
        if self.k is not None and self.l is not None and self.l > self.k:
            raise ConfigError(f"subset size l={self.l} exceeds window k={self.k}")
        if self.subset_budget < 0:
            raise ConfigError("subset_budget must be >= 0")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")

    def resolve(self, n: int) -> "EstimatorConfig":
        """Fill in default k and l for a path with n increments and check rates."""
        k = self.k if self.k is not None else default_k(n)
        l = self.l if self.l is not None else min(default_l(k), k)
        cfg = replace(self, k=k, l=l)
        if k > n ** 0.8:
            warnings.warn(f"window k={k} is large for n={n} (k > n^0.8)", stacklevel=3)
        if l > k ** 0.9:
            warnings.warn(f"subset size l={l} is large for k={k} (l > k^0.9)", stacklevel=3)
        return cfg

    def as_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass(frozen=True)
class VarianceReport:
    estimator_name: str
    value: float
    config: EstimatorConfig
    seed: int | None
    elapsed: float
    sampled: bool = False
    method: str = "exact"


def _observations(path) -> np.ndarray:
    obs = np.asarray(getattr(path, "observations", path), dtype=float)
    if obs.ndim != 1 or obs.size < 3:
        raise ConfigError("a path needs at least three observations")
    return obs


def _report(name, value, cfg, path, start, **extra) -> VarianceReport:
    return VarianceReport(
        estimator_name=name,
        value=float(value),
        config=cfg,
        seed=getattr(path, "seed", None),
        elapsed=time.perf_counter() - start,
        **extra,
    )


def _window(cfg: EstimatorConfig, n: int, *, max_k: int | None = None) -> EstimatorConfig:
    cfg = cfg.resolve(n)
    limit = n // 2 if max_k is None else max_k
    if not 2 <= cfg.k <= limit:
        raise RangeError(f"window k={cfg.k} out of range [2, {limit}] for n={n}")
    return cfg


def v_hat(path, cfg: EstimatorConfig) -> VarianceReport:
    """n/(k(k-1)) * sum_i (U_block(i) - theta_hat(i))^2, with theta_hat slid in O(n)."""
    start = time.perf_counter()
    obs = _observations(path)
    n = obs.size - 1
    cfg = _window(cfg, n)
    fvals = unit_f_values(obs, cfg.p, cfg.mode)
    block_scale = length_scale(cfg.p, cfg.mode, cfg.k / n)
    total = _kernels.vhat_sum(obs, fvals, cfg.k, float(cfg.p), integral_power(cfg.p), block_scale)
    value = n / (cfg.k * (cfg.k - 1)) * total
    return _report("v_hat", value, cfg, path, start)


def v_tilde(path, cfg: EstimatorConfig) -> VarianceReport:
    """(n/2) * sum_i mean over pairs in window i of (f(a_u + a_v) - f(a_u) - f(a_v))^2.

    Each pair is evaluated once and weighted by the number of windows that
    contain it, which costs O(n k).
    """
    start = time.perf_counter()
    obs = _observations(path)
    n = obs.size - 1
    cfg = _window(cfg, n)
    incr = np.diff(obs)
    fvals = unit_f_values(obs, cfg.p, cfg.mode)
    pair_scale = length_scale(cfg.p, cfg.mode, 2.0 / n)
    total = _kernels.vtilde_pair_sum(
        incr, fvals, cfg.k, float(cfg.p), integral_power(cfg.p), pair_scale
    )
    value = (n / 2.0) * total / math.comb(cfg.k, 2)
    return _report("v_tilde", value, cfg, path, start)


def _binomial_table(k: int, l: int) -> np.ndarray:
    cap = 2**62
    table = np.zeros((k + 1, l + 1), dtype=np.int64)
    for m in range(k + 1):
        for j in range(min(m, l) + 1):
            table[m, j] = min(math.comb(m, j), cap)
    return table


def _choose_method(cfg: EstimatorConfig, count: int, windows: int) -> str:
    even = integral_power(cfg.p) > 0 and int(cfg.p) % 2 == 0
    if cfg.method != "auto":
        if cfg.method == "polynomial" and not even:
            raise ConfigError("the polynomial route needs an even integer p")
        return cfg.method
    limit = cfg.subset_budget if cfg.subset_budget > 0 else ENUMERATION_LIMIT
    if count <= limit and (not even or count * windows <= _CHEAP_ENUMERATION):
        return "enumerate"
    if even:
        return "polynomial"
    if cfg.subset_budget > 0:
        return "sample"
    raise SubsetRefusalError(count, ENUMERATION_LIMIT)


def v_universal(path, cfg: EstimatorConfig) -> VarianceReport:
    """n/(l(l-1)) * sum_i mean over l-subsets S of window i of (f(sum_S a) - sum_S f(a))^2.

    The subset average is exact unless ``method`` resolves to ``"sample"``:
    revolving-door enumeration with running sums, or, for even integer p, a
    generating-function evaluation of the same average that never lists the
    subsets. Sampling draws ``subset_budget`` distinct subsets per window and
    flags the report.
    """
    start = time.perf_counter()
    obs = _observations(path)
    n = obs.size - 1
    cfg = _window(cfg, n)
    k, l = cfg.k, cfg.l
    if l > k:
        raise ConfigError(f"subset size l={l} exceeds window k={k}")
    count = math.comb(k, l)
    windows = n - k + 1
    method = _choose_method(cfg, count, windows)
    incr = np.diff(obs)
    p = float(cfg.p)
    p_int = integral_power(cfg.p)
    sub_scale = length_scale(cfg.p, cfg.mode, l / n)
    sampled = False

    if method == "enumerate":
        limit = cfg.subset_budget if cfg.subset_budget > 0 else ENUMERATION_LIMIT
        if count > limit:
            raise SubsetRefusalError(count, limit)
        fvals = unit_f_values(obs, cfg.p, cfg.mode)
        total = _kernels.universal_enumerate_sum(incr, fvals, k, l, p, p_int, sub_scale, 1.0 / count)
    elif method == "polynomial":
        unit_scale = length_scale(cfg.p, cfg.mode, 1.0 / n)
        log_count = math.lgamma(k + 1) - math.lgamma(l + 1) - math.lgamma(k - l + 1)
        rho = math.exp(-log_count / l)
        total = _kernels.universal_poly_sum(incr, k, l, int(cfg.p), sub_scale, unit_scale, rho)
    else:
        if cfg.subset_budget <= 0:
            raise ConfigError("sampling needs subset_budget > 0")
        budget = min(cfg.subset_budget, count)
        sampled = budget < count
        dedupe = count < 2**62
        binom = _binomial_table(k, l) if dedupe else np.zeros((1, 1), dtype=np.int64)
        seed = int(
            np.random.SeedSequence(cfg.subset_seed, spawn_key=(n, k, l)).generate_state(1)[0]
            & 0x7FFFFFFF
        )
        fvals = unit_f_values(obs, cfg.p, cfg.mode)
        total = _kernels.universal_sample_sum(
            incr, fvals, k, l, p, p_int, sub_scale, budget, seed, binom, dedupe
        )
        method = "sample"
    value = n / (l * (l - 1)) * total
    return _report("v_universal", value, cfg, path, start, sampled=sampled, method=method)


def _block_sums(obs: np.ndarray, cfg: EstimatorConfig, k: int) -> np.ndarray:
    return _kernels.window_sums(unit_f_values(obs, cfg.p, cfg.mode), k)


def qv_baseline(path, cfg: EstimatorConfig, k: int) -> float:
    """QV_n(k) = (1/k) sum_{i=k}^{n-k} (theta_hat[i-k, i] - theta_hat[i, i+k])^2."""
    obs = _observations(path)
    n = obs.size - 1
    if k < 1 or 2 * k > n:
        raise RangeError(f"qv_baseline needs 1 <= k and 2k <= n, got k={k}, n={n}")
    blocks = _block_sums(obs, cfg, k)
    left = blocks[: n - 2 * k + 1]
    right = blocks[k : n - k + 1]
    return _kernels.sum_squares_of_diff(left, right) / k


def mz_estimator(path, cfg: EstimatorConfig) -> VarianceReport:
    """n * T_n with T_n = (2/3) (QV_n(k) - QV_n(2k) / 4)."""
    start = time.perf_counter()
    obs = _observations(path)
    n = obs.size - 1
    cfg = _window(cfg, n, max_k=n // 4)
    t_n = (2.0 / 3.0) * (qv_baseline(obs, cfg, cfg.k) - 0.25 * qv_baseline(obs, cfg, 2 * cfg.k))
    return _report("mz", n * t_n, cfg, path, start)


def subsample_estimator(path, cfg: EstimatorConfig) -> VarianceReport:
    """(1/k) sum_l (k/n)^-1 (U_l - U_n)^2 over the k interleaved subsamples.

    U_l = k * sum_i f(a_{(i-1)k + l}) for i = 1..floor(n/k), with f using the
    unit interval length 1/n.
    """
    start = time.perf_counter()
    obs = _observations(path)
    n = obs.size - 1
    cfg = _window(cfg, n, max_k=n)
    k = cfg.k
    fvals = unit_f_values(obs, cfg.p, cfg.mode)
    u_n = math.fsum(fvals)
    rows = n // k
    u_l = k * fvals[: rows * k].reshape(rows, k).sum(axis=0)
    dev = u_l - u_n
    value = math.fsum(dev * dev) / k / (k / n)
    return _report("subsample", value, cfg, path, start)


ESTIMATORS = {
    "v_hat": v_hat,
    "v_tilde": v_tilde,
    "v_universal": v_universal,
    "mz": mz_estimator,
    "subsample": subsample_estimator,
}


def estimate(name: str, path, cfg: EstimatorConfig) -> VarianceReport:
    try:
        fn = ESTIMATORS[name]
    except KeyError:
        raise ConfigError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATORS)}") from None
    return fn(path, cfg)


__all__ = [
    "EstimatorConfig",
    "VarianceReport",
    "ESTIMATORS",
    "default_k",
    "default_l",
    "estimate",
    "mz_estimator",
    "power_variation",
    "qv_baseline",
    "subsample_estimator",
    "v_hat",
    "v_tilde",
    "v_universal",
]
