"""Monte Carlo experiments that check estimators against per-path oracles.

Replication ``r`` of an experiment with master seed ``s`` simulates its path
with seed ``replication_seed(s, r)``; a replication is a pure function of
``(spec, r)``, so running them on threads or serially gives identical
tables. Aggregates are computed in replication order.

The conditional variance V is random (it depends on the realized volatility
path and jumps), so every comparison is made per path: each estimate is
paired with the oracle of its own path.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache, partial

import numpy as np
from scipy import stats

from .errors import CondvarError, ConfigError, ReplicationError
from .estimators import EstimatorConfig, default_k, default_l, estimate
from .simulate import (
    CompoundPoisson,
    ConstantVol,
    ContinuousPower,
    JumpPower,
    ModelSpec,
    NoJumps,
    PointMass,
    Quadratic,
    Regime,
    SimulatedPath,
    integrated_power,
    limit_of_power_variation,
    simulate_path,
    true_variance,
)
from .statistics import ScalingMode, c_p_constant, power_variation

logger = logging.getLogger(__name__)

Z_975 = stats.norm.ppf(0.975)
GROUPS = ("all", "jump", "no_jump")


def replication_seed(master_seed: int, index: int) -> int:
    """Seed of replication ``index``: first 63 bits of SeedSequence(master, spawn_key=(index,))."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class EstimatorSpec:
    name: str
    config: EstimatorConfig = field(default_factory=EstimatorConfig)
    label: str | None = None

    @property
    def key(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class ExperimentSpec:
    model: ModelSpec
    estimators: tuple[EstimatorSpec, ...]
    regime: Regime
    replications: int = 100
    master_seed: int = 0
    outputs: frozenset[str] = frozenset({"summary"})
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        keys = [e.key for e in self.estimators]
        if len(set(keys)) != len(keys):
            raise ConfigError(f"estimator labels must be unique, got {keys}")
        unknown = self.outputs - {"summary", "rows", "standardized"}
        if unknown:
            raise ConfigError(f"unknown outputs {sorted(unknown)}")
        want = regime_mode(self.regime)
        for e in self.estimators:
            if e.config.mode is not want or e.config.p != self.regime.p:
                logger.warning(
                    "estimator %s uses p=%s/%s but the regime expects p=%s/%s",
                    e.key, e.config.p, e.config.mode.value, self.regime.p, want.value,
                )


def regime_mode(regime: Regime) -> ScalingMode:
    return ScalingMode.SCALED if isinstance(regime, ContinuousPower) else ScalingMode.UNSCALED


@lru_cache(maxsize=None)
def _c_p(p: float) -> float:
    return c_p_constant(p)


def estimator_oracle(path: SimulatedPath, regime: Regime, name: str) -> tuple[float, str]:
    """Ground-truth limit of estimator ``name`` on ``path``.

    This is the regime's conditional variance, except that the pairwise
    estimator on a continuous path converges to c_p * int sigma^2p instead.
    """
    if name == "v_tilde" and isinstance(regime, ContinuousPower):
        return _c_p(regime.p) * integrated_power(path, 2 * regime.p), "c_p"
    return true_variance(path, regime).total, "V"


def _replication(spec: ExperimentSpec, index: int) -> list[dict]:
    seed = replication_seed(spec.master_seed, index)
    try:
        path = simulate_path(spec.model, seed)
        n = path.n
        p = spec.regime.p
        u_n = power_variation(path, p, regime_mode(spec.regime))
        u_lim = limit_of_power_variation(path, spec.regime)
        rows = []
        for est in spec.estimators:
            report = estimate(est.name, path, est.config)
            oracle, kind = estimator_oracle(path, spec.regime, est.name)
            value = report.value
            root_n = math.sqrt(n)
            rows.append(
                {
                    "rep": index,
                    "seed": seed,
                    "n_jumps": path.n_jumps,
                    "estimator": est.key,
                    "value": value,
                    "oracle": oracle,
                    "oracle_kind": kind,
                    "ratio": value / oracle if oracle > 0 else math.nan,
                    "u_n": u_n,
                    "u_limit": u_lim,
                    "z": root_n * (u_n - u_lim) / math.sqrt(value) if value > 0 else math.nan,
                    "z_oracle": root_n * (u_n - u_lim) / math.sqrt(oracle) if oracle > 0 else math.nan,
                    "n": n,
                    "k": report.config.k,
                    "l": report.config.l,
                    "method": report.method,
                    "sampled": report.sampled,
                }
            )
        return rows
    except CondvarError as exc:
        raise ReplicationError(index, seed, exc) from exc


def run_replications(spec: ExperimentSpec) -> list[dict]:
    """Per-replication rows, ordered by replication then estimator."""
    work = partial(_replication, spec)
    indices = range(spec.replications)
    if spec.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=spec.n_jobs) as pool:
            chunks = list(pool.map(work, indices))
    else:
        chunks = [work(i) for i in indices]
    return [row for chunk in chunks for row in chunk]


def ks_distance(sample) -> float:
    """Kolmogorov-Smirnov distance between a sample and N(0,1)."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        return math.nan
    return float(stats.kstest(sample, "norm").statistic)


def _median(x: np.ndarray) -> float:
    return float(np.median(x)) if x.size else math.nan


def _group_stats(rows: list[dict]) -> dict:
    value = np.array([r["value"] for r in rows], dtype=float)
    oracle = np.array([r["oracle"] for r in rows], dtype=float)
    z = np.array([r["z"] for r in rows], dtype=float)
    z_or = np.array([r["z_oracle"] for r in rows], dtype=float)
    n = np.array([r["n"] for r in rows], dtype=float)
    k = np.array([r["k"] for r in rows], dtype=float)
    count = value.size
    out = {"n_reps": count}
    if count == 0:
        nan = math.nan
        out.update(
            mean=nan, std=nan, mean_oracle=nan, rmse=nan, rel_bias=nan, n_ratio=0,
            mean_ratio=nan, median_ratio=nan, var_ratio=nan, n_zero_oracle=0,
            median_value_over_n=nan, median_value_times_kdelta=nan,
            ks=nan, ks_oracle=nan, coverage=nan, n_excluded=0,
        )
        return out
    err = value - oracle
    pos = oracle > 0
    ratio = value[pos] / oracle[pos]
    usable = np.isfinite(z)
    mean_oracle = float(np.mean(oracle))
    out.update(
        mean=float(np.mean(value)),
        std=float(np.std(value, ddof=1)) if count > 1 else math.nan,
        mean_oracle=mean_oracle,
        rmse=float(np.sqrt(np.mean(err * err))),
        rel_bias=float(np.mean(err) / mean_oracle) if mean_oracle > 0 else math.nan,
        n_ratio=int(ratio.size),
        mean_ratio=float(np.mean(ratio)) if ratio.size else math.nan,
        median_ratio=_median(ratio),
        var_ratio=float(np.var(ratio, ddof=1)) if ratio.size > 1 else math.nan,
        n_zero_oracle=int(count - pos.sum()),
        median_value_over_n=_median(value / n),
        median_value_times_kdelta=_median(value * k / n),
        ks=ks_distance(z[usable]),
        ks_oracle=ks_distance(z_or[np.isfinite(z_or)]),
        coverage=float(np.mean(np.abs(z[usable]) <= Z_975)) if usable.any() else math.nan,
        n_excluded=int(count - usable.sum()),
    )
    return out


@dataclass
class McSummary:
    """Aggregates per estimator and replication group.

    Groups: ``all`` replications, those whose path has at least one jump
    (``jump``) and those without (``no_jump``). Ratios use only replications
    with a positive oracle; replications with a zero oracle are counted in
    ``n_zero_oracle`` and never divided.
    """

    rows: list[dict]
    replications: list[dict] | None = None
    standardized: dict[str, np.ndarray] | None = None

    def get(self, estimator: str, group: str = "all") -> dict:
        for row in self.rows:
            if row["estimator"] == estimator and row["group"] == group:
                return row
        raise KeyError((estimator, group))


def summarize(spec: ExperimentSpec, reps: list[dict]) -> McSummary:
    rows = []
    for est in spec.estimators:
        mine = [r for r in reps if r["estimator"] == est.key]
        split = {
            "all": mine,
            "jump": [r for r in mine if r["n_jumps"] > 0],
            "no_jump": [r for r in mine if r["n_jumps"] == 0],
        }
        for group in GROUPS:
            rows.append({"estimator": est.key, "group": group, **_group_stats(split[group])})
    standardized = None
    if "standardized" in spec.outputs:
        standardized = {
            est.key: np.array([r["z"] for r in reps if r["estimator"] == est.key])
            for est in spec.estimators
        }
    return McSummary(
        rows=rows,
        replications=reps if "rows" in spec.outputs else None,
        standardized=standardized,
    )


def run_consistency(spec: ExperimentSpec) -> McSummary:
    """Simulate, pair every estimate with its path's oracle, aggregate."""
    return summarize(spec, run_replications(spec))


# --- CLT standardization ----------------------------------------------------


@dataclass
class CltResult:
    estimator: str
    sample: np.ndarray
    oracle_sample: np.ndarray
    ks: float
    ks_oracle: float
    n_used: int
    n_excluded: int
    n_no_jump: int


def _check_clt_pairing(name: str, regime: Regime) -> None:
    if name == "v_universal":
        return
    if name == "v_hat" and isinstance(regime, ContinuousPower):
        return
    if name == "v_tilde" and (not isinstance(regime, ContinuousPower) or regime.p == 2):
        return
    raise ConfigError(f"{name} is not consistent in regime {regime}")


def run_clt_check(spec: ExperimentSpec, estimator: str | None = None) -> CltResult:
    """Standardize the power variation by an estimator and measure normality.

    Per replication, z = sqrt(n) (U_n - U) / sqrt(estimate), with U the
    path's own limit. Replications with a non-positive estimate are excluded
    and counted; in the jump-power regime paths without jumps (V = 0) are
    excluded as well.
    """
    est = spec.estimators[0] if estimator is None else next(
        (e for e in spec.estimators if e.key == estimator), None
    )
    if est is None:
        raise ConfigError(f"estimator {estimator!r} is not part of the experiment")
    _check_clt_pairing(est.name, spec.regime)
    reps = [r for r in run_replications(spec) if r["estimator"] == est.key]
    no_jump = 0
    if isinstance(spec.regime, JumpPower):
        no_jump = sum(r["n_jumps"] == 0 for r in reps)
        reps = [r for r in reps if r["n_jumps"] > 0]
    z = np.array([r["z"] for r in reps], dtype=float)
    z_or = np.array([r["z_oracle"] for r in reps], dtype=float)
    ok = np.isfinite(z)
    return CltResult(
        estimator=est.key,
        sample=z[ok],
        oracle_sample=z_or[np.isfinite(z_or)],
        ks=ks_distance(z[ok]),
        ks_oracle=ks_distance(z_or[np.isfinite(z_or)]),
        n_used=int(ok.sum()),
        n_excluded=int((~ok).sum()),
        n_no_jump=no_jump,
    )


# --- failure of the block-comparison baselines under jumps ------------------


FAILURE_COLUMNS = (
    "n", "k", "l", "reps", "jump_reps",
    "median_nT_over_n", "median_sigma_times_kdelta", "median_sigma_over_n",
    "median_ratio_v_tilde", "median_ratio_v_universal",
    "no_jump_reps", "no_jump_mean_ratio_mz", "no_jump_mean_ratio_subsample",
)


def run_failure_demo(
    model: ModelSpec,
    n_grid=(1000, 10_000, 100_000),
    replications: int = 100,
    master_seed: int = 0,
    n_jobs: int = 1,
) -> list[dict]:
    """Divergence table for n T_n and the subsampling estimator on X = sigma W + J.

    On paths with at least one jump, n T_n / n and Sigma_hat * k / n are
    reported (both stay of order one if the baselines blow up at the
    corresponding rates) together with the per-path ratios of the pairwise and
    universal estimators to the quadratic-variation oracle. Replications
    without jumps are summarized separately.
    """
    if not isinstance(model.vol, ConstantVol) or not isinstance(model.jumps, CompoundPoisson):
        raise ConfigError("the failure demo needs constant sigma plus compound Poisson jumps")
    if not isinstance(model.jumps.size, PointMass):
        raise ConfigError("the failure demo needs Poisson (point-mass) jumps")
    table = []
    for n in n_grid:
        k = default_k(n)
        cfg = EstimatorConfig(p=2.0, mode=ScalingMode.UNSCALED, k=k, l=default_l(k))
        spec = ExperimentSpec(
            model=replace(model, n=int(n)),
            estimators=(
                EstimatorSpec("mz", cfg),
                EstimatorSpec("subsample", cfg),
                EstimatorSpec("v_tilde", cfg),
                EstimatorSpec("v_universal", cfg),
            ),
            regime=Quadratic(),
            replications=replications,
            master_seed=master_seed,
            n_jobs=n_jobs,
        )
        reps = run_replications(spec)

        def pick(name, jumps):
            return np.array(
                [r["value"] for r in reps if r["estimator"] == name and (r["n_jumps"] > 0) == jumps]
            )

        def ratios(name, jumps):
            return np.array(
                [r["ratio"] for r in reps if r["estimator"] == name and (r["n_jumps"] > 0) == jumps]
            )

        mz_j = pick("mz", True)
        sub_j = pick("subsample", True)
        no_jump = ratios("mz", False)
        table.append(
            {
                "n": int(n),
                "k": k,
                "l": cfg.l,
                "reps": replications,
                "jump_reps": int(mz_j.size),
                "median_nT_over_n": _median(mz_j / n),
                "median_sigma_times_kdelta": _median(sub_j * k / n),
                "median_sigma_over_n": _median(sub_j / n),
                "median_ratio_v_tilde": _median(ratios("v_tilde", True)),
                "median_ratio_v_universal": _median(ratios("v_universal", True)),
                "no_jump_reps": int(no_jump.size),
                "no_jump_mean_ratio_mz": float(np.mean(no_jump)) if no_jump.size else math.nan,
                "no_jump_mean_ratio_subsample": (
                    float(np.mean(ratios("subsample", False))) if no_jump.size else math.nan
                ),
            }
        )
    return table


def brownian_poisson_model(n: int, sigma: float = 1.0, intensity: float = 1.0, substeps: int = 1) -> ModelSpec:
    """X = sigma W + J with J a Poisson process of the given intensity."""
    return ModelSpec(
        vol=ConstantVol(sigma),
        jumps=CompoundPoisson(intensity, PointMass(1.0)),
        n=n,
        substeps=substeps,
    )


__all__ = [
    "CltResult",
    "EstimatorSpec",
    "ExperimentSpec",
    "FAILURE_COLUMNS",
    "McSummary",
    "NoJumps",
    "estimator_oracle",
    "brownian_poisson_model",
    "ks_distance",
    "regime_mode",
    "replication_seed",
    "run_clt_check",
    "run_consistency",
    "run_failure_demo",
    "run_replications",
    "summarize",
]
