"""Simulation of Ito semimartingales with ground truth for variance oracles.

The model is

    dX_t = b(t, X_t, sigma_t) dt + sigma_t dW_t + dJ_t,

with J a compound Poisson process and sigma either constant or a geometric
Ornstein-Uhlenbeck process (Euler on log sigma, driven by a Brownian motion
independent of W). X is observed at i/n, i = 0..n; the fine grid has
``n * substeps`` steps.

Random-number contract
----------------------
``seed`` feeds :class:`numpy.random.SeedSequence`. Stream ``(seed, 0)``
draws the jump count, times and sizes. Brownian paths are built level by
level: stream ``(seed, 1, 0)`` gives W on a grid of ``n * r`` steps, where
``substeps = r * 2**L`` with r odd, and stream ``(seed, 1, j)`` supplies the
bridge midpoints of refinement level j. Streams ``(seed, 2, .)`` do the same
for the volatility driver. Doubling ``substeps`` therefore refines the
same Brownian paths rather than drawing new ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericOverflowError
from .statistics import normal_abs_moment


# --- model presets ---------------------------------------------------------


@dataclass(frozen=True)
class ConstantDrift:
    b: float = 0.0


@dataclass(frozen=True)
class MeanRevertingDrift:
    """b = speed * (level - X)."""

    speed: float
    level: float = 0.0


@dataclass(frozen=True)
class VolScaledDrift:
    """b = coef * sigma^2 (e.g. coef = -1/2 for a log-price martingale correction)."""

    coef: float


Drift = Union[ConstantDrift, MeanRevertingDrift, VolScaledDrift]


@dataclass(frozen=True)
class ConstantVol:
    sigma0: float = 1.0


@dataclass(frozen=True)
class GeometricOU:
    """log sigma mean-reverts to log(mean) at rate kappa with volatility vol_of_vol."""

    kappa: float
    mean: float
    vol_of_vol: float
    sigma0: float


Vol = Union[ConstantVol, GeometricOU]


@dataclass(frozen=True)
class PointMass:
    a: float


@dataclass(frozen=True)
class GaussianSize:
    mean: float = 0.0
    std: float = 1.0


@dataclass(frozen=True)
class TwoPoint:
    """Sizes a or -a with probability 1/2 each."""

    a: float


JumpSize = Union[PointMass, GaussianSize, TwoPoint]


@dataclass(frozen=True)
class NoJumps:
    pass


@dataclass(frozen=True)
class CompoundPoisson:
    intensity: float
    size: JumpSize = field(default_factory=lambda: PointMass(1.0))


Jumps = Union[NoJumps, CompoundPoisson]


@dataclass(frozen=True)
class ModelSpec:
    drift: Drift = field(default_factory=ConstantDrift)
    vol: Vol = field(default_factory=ConstantVol)
    jumps: Jumps = field(default_factory=NoJumps)
    n: int = 1000
    substeps: int = 1
    x0: float = 0.0

    def __post_init__(self):
        validate_spec(self)

    @property
    def delta(self) -> float:
        return 1.0 / self.n


def validate_spec(spec: ModelSpec) -> None:
    if not isinstance(spec.n, (int, np.integer)) or spec.n < 2:
        raise ConfigError(f"n must be an integer >= 2, got {spec.n!r}")
    if not isinstance(spec.substeps, (int, np.integer)) or spec.substeps < 1:
        raise ConfigError(f"substeps must be an integer >= 1, got {spec.substeps!r}")
    if not math.isfinite(spec.x0):
        raise ConfigError("x0 must be finite")
    vol = spec.vol
    if isinstance(vol, ConstantVol):
        if not vol.sigma0 > 0:
            raise ConfigError("constant sigma must be > 0")
    elif isinstance(vol, GeometricOU):
        if not (vol.sigma0 > 0 and vol.mean > 0):
            raise ConfigError("GeometricOU needs sigma0 > 0 and mean > 0")
        if vol.kappa < 0 or vol.vol_of_vol < 0:
            raise ConfigError("GeometricOU needs kappa >= 0 and vol_of_vol >= 0")
    else:
        raise ConfigError(f"unknown volatility preset {vol!r}")
    if not isinstance(spec.drift, (ConstantDrift, MeanRevertingDrift, VolScaledDrift)):
        raise ConfigError(f"unknown drift preset {spec.drift!r}")
    jumps = spec.jumps
    if isinstance(jumps, CompoundPoisson):
        if not jumps.intensity >= 0:
            raise ConfigError("jump intensity must be >= 0")
        size = jumps.size
        if isinstance(size, (PointMass, TwoPoint)):
            if size.a == 0 or not math.isfinite(size.a):
                raise ConfigError("jump size must be finite and nonzero")
        elif isinstance(size, GaussianSize):
            if not size.std >= 0 or (size.std == 0 and size.mean == 0):
                raise ConfigError("Gaussian jump sizes must not be identically zero")
        else:
            raise ConfigError(f"unknown jump size law {size!r}")
    elif not isinstance(jumps, NoJumps):
        raise ConfigError(f"unknown jump preset {jumps!r}")


# --- paths -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimulatedPath:
    """Coarse observations of X plus the hidden ground truth."""

    observations: np.ndarray
    fine_sigma: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    sigma_at_jumps: np.ndarray
    seed: int
    continuous: np.ndarray
    substeps: int = 1

    @property
    def n(self) -> int:
        return self.observations.size - 1

    @property
    def delta(self) -> float:
        return 1.0 / self.n

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)


def _split_substeps(substeps: int) -> tuple[int, int]:
    levels = 0
    while substeps % 2 == 0:
        substeps //= 2
        levels += 1
    return substeps, levels


def _brownian_increments(seed: int, stream: int, base_steps: int, levels: int) -> np.ndarray:
    """Increments of a Brownian motion on [0,1], refined dyadically ``levels`` times."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, 0)))
    h = 1.0 / base_steps
    w = np.empty(base_steps + 1)
    w[0] = 0.0
    np.cumsum(rng.standard_normal(base_steps) * math.sqrt(h), out=w[1:])
    for level in range(1, levels + 1):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, level)))
        h *= 0.5
        mid = 0.5 * (w[:-1] + w[1:]) + math.sqrt(0.5 * h) * rng.standard_normal(w.size - 1)
        finer = np.empty(2 * w.size - 1)
        finer[0::2] = w
        finer[1::2] = mid
        w = finer
    return np.diff(w)


def _draw_jumps(spec: ModelSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    jumps = spec.jumps
    if isinstance(jumps, NoJumps) or jumps.intensity == 0:
        return np.empty(0), np.empty(0)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    count = int(rng.poisson(jumps.intensity))
    times = rng.random(count)
    # open interval (0,1), distinct times; redraws happen with probability ~0
    while count and (np.any(times == 0.0) or np.unique(times).size < count):
        times = rng.random(count)
    times.sort()
    size = jumps.size
    if isinstance(size, PointMass):
        sizes = np.full(count, float(size.a))
    elif isinstance(size, TwoPoint):
        sizes = np.where(rng.random(count) < 0.5, size.a, -size.a).astype(float)
    else:
        sizes = size.mean + size.std * rng.standard_normal(count)
        while np.any(sizes == 0.0):
            zero = sizes == 0.0
            sizes[zero] = size.mean + size.std * rng.standard_normal(int(zero.sum()))
    return times, sizes


def simulate_path(spec: ModelSpec, seed: int) -> SimulatedPath:
    """Simulate one path; deterministic in ``(spec, seed)``."""
    validate_spec(spec)
    seed = int(seed)
    if seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    m = spec.n * spec.substeps
    h = 1.0 / m
    base, levels = _split_substeps(spec.substeps)

    times, sizes = _draw_jumps(spec, seed)
    dw = _brownian_increments(seed, 1, spec.n * base, levels)

    vol = spec.vol
    if isinstance(vol, ConstantVol):
        sigma = np.full(m + 1, float(vol.sigma0))
    else:
        dws = _brownian_increments(seed, 2, spec.n * base, levels)
        sigma = _kernels.log_ou_sigma(
            float(vol.sigma0), float(vol.kappa), math.log(vol.mean), float(vol.vol_of_vol), dws, h
        )
        bad = np.flatnonzero(~np.isfinite(sigma) | (sigma <= 0))
        if bad.size:
            raise NumericOverflowError(int(bad[0]), "sigma")

    # a jump at time S lands on the first fine-grid point >= S
    jump_index = np.minimum(np.ceil(times * m).astype(np.int64), m)
    jump_add = np.zeros(m + 1)
    np.add.at(jump_add, jump_index, sizes)

    drift = spec.drift
    if isinstance(drift, ConstantDrift):
        kind, da, db = _kernels.DRIFT_CONSTANT, float(drift.b), 0.0
    elif isinstance(drift, MeanRevertingDrift):
        kind, da, db = _kernels.DRIFT_MEAN_REVERTING, float(drift.speed), float(drift.level)
    else:
        kind, da, db = _kernels.DRIFT_VOL_SCALED, float(drift.coef), 0.0
    x, xc, bad_step = _kernels.euler_path(float(spec.x0), dw, sigma, jump_add, kind, da, db, h)
    if bad_step >= 0:
        raise NumericOverflowError(int(bad_step))

    stride = spec.substeps
    sigma_idx = np.minimum(np.floor(times * m).astype(np.int64), m)
    return SimulatedPath(
        observations=x[::stride].copy(),
        fine_sigma=sigma,
        jump_times=times,
        jump_sizes=sizes,
        sigma_at_jumps=sigma[sigma_idx],
        seed=seed,
        continuous=xc[::stride].copy(),
        substeps=stride,
    )


# --- ground-truth variances -------------------------------------------------


@dataclass(frozen=True)
class ContinuousPower:
    """Scaled power variation of a continuous path: V = (m_2p - m_p^2) int sigma^2p."""

    p: float


@dataclass(frozen=True)
class JumpPower:
    """Unscaled power variation, p > 3: V = sum p^2 |dX|^(2p-2) sigma^2."""

    p: float


@dataclass(frozen=True)
class Quadratic:
    """Realized variance: V = 2 int sigma^4 + sum 4 |dX|^2 sigma^2."""

    p: float = 2.0


Regime = Union[ContinuousPower, JumpPower, Quadratic]


@dataclass(frozen=True)
class TrueVariance:
    continuous_part: float
    jump_part: float

    @property
    def total(self) -> float:
        return self.continuous_part + self.jump_part


def integrated_power(path: SimulatedPath, q: float) -> float:
    """Left Riemann sum of sigma^q over the fine grid (exact for constant sigma)."""
    sig = np.asarray(path.fine_sigma, dtype=float)
    if sig.size < 2:
        raise ConfigError("path has no fine-grid volatility")
    return math.fsum(sig[:-1] ** q) / (sig.size - 1)


def true_variance(path: SimulatedPath, regime: Regime) -> TrueVariance:
    if isinstance(regime, ContinuousPower):
        p = regime.p
        coef = normal_abs_moment(2 * p) - normal_abs_moment(p) ** 2
        return TrueVariance(coef * integrated_power(path, 2 * p), 0.0)
    if isinstance(regime, JumpPower):
        p = regime.p
        terms = p * p * np.abs(path.jump_sizes) ** (2 * p - 2) * path.sigma_at_jumps**2
        return TrueVariance(0.0, math.fsum(terms))
    if isinstance(regime, Quadratic):
        terms = 4.0 * path.jump_sizes**2 * path.sigma_at_jumps**2
        return TrueVariance(2.0 * integrated_power(path, 4), math.fsum(terms))
    raise ConfigError(f"unknown regime {regime!r}")


def limit_of_power_variation(path: SimulatedPath, regime: Regime) -> float:
    """The probability limit U of the regime's power variation, from ground truth."""
    if isinstance(regime, ContinuousPower):
        return normal_abs_moment(regime.p) * integrated_power(path, regime.p)
    if isinstance(regime, JumpPower):
        return math.fsum(np.abs(path.jump_sizes) ** regime.p)
    if isinstance(regime, Quadratic):
        return integrated_power(path, 2) + math.fsum(path.jump_sizes**2)
    raise ConfigError(f"unknown regime {regime!r}")
