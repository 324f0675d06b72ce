import math

import numpy as np
import pytest

from condvar import (
    CompoundPoisson,
    ConfigError,
    ConstantVol,
    ContinuousPower,
    EstimatorConfig,
    EstimatorSpec,
    ExperimentSpec,
    GaussianSize,
    GeometricOU,
    JumpPower,
    ModelSpec,
    Quadratic,
    run_clt_check,
    run_consistency,
    run_failure_demo,
    run_replications,
)
from condvar.errors import ReplicationError
from condvar.harness import (
    FAILURE_COLUMNS,
    _group_stats,
    brownian_poisson_model,
    ks_distance,
    replication_seed,
)

SCALED2 = EstimatorConfig(p=2, mode="scaled")
UNSCALED4 = EstimatorConfig(p=4, mode="unscaled")
JUMPY = ModelSpec(
    vol=GeometricOU(3.0, 1.0, 0.5, 1.0), jumps=CompoundPoisson(2.0, GaussianSize()), n=400, substeps=2
)


def jump_spec(**kw):
    base = dict(
        model=JUMPY,
        estimators=[EstimatorSpec("v_tilde", UNSCALED4), EstimatorSpec("v_universal", UNSCALED4)],
        regime=JumpPower(4),
        replications=24,
        master_seed=5,
        outputs={"summary", "rows", "standardized"},
    )
    base.update(kw)
    return ExperimentSpec(**base)


def frozen(summary):
    """Exact byte representation of everything a summary holds."""
    rows = repr(summary.rows)
    reps = repr(summary.replications)
    std = b"".join(v.tobytes() for v in summary.standardized.values())
    return rows, reps, std


def test_replication_seeds_are_index_derived():
    seeds = [replication_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert all(0 <= s < 2**63 for s in seeds)
    assert replication_seed(7, 3) == replication_seed(7, 3)
    assert replication_seed(8, 3) != replication_seed(7, 3)


def test_reproducible_bitwise():
    assert frozen(run_consistency(jump_spec())) == frozen(run_consistency(jump_spec()))


def test_parallel_equals_serial():
    serial = run_consistency(jump_spec(n_jobs=1))
    parallel = run_consistency(jump_spec(n_jobs=4))
    assert frozen(serial) == frozen(parallel)


def test_prefix_stability():
    short = run_replications(jump_spec(replications=5))
    long = run_replications(jump_spec(replications=12))
    assert repr(short) == repr(long[: len(short)])


def test_groups_partition_replications():
    s = run_consistency(jump_spec())
    for est in ("v_tilde", "v_universal"):
        total = s.get(est, "all")["n_reps"]
        assert s.get(est, "jump")["n_reps"] + s.get(est, "no_jump")["n_reps"] == total
        nj = s.get(est, "no_jump")
        # zero-oracle replications are counted, never divided
        assert nj["n_ratio"] == 0 and nj["n_zero_oracle"] == nj["n_reps"]
        assert math.isnan(nj["median_ratio"])


def test_rmse_bounds_error_variance():
    s = run_consistency(jump_spec())
    for row in s.rows:
        if row["n_reps"] < 2:
            continue
        reps = [r for r in s.replications if r["estimator"] == row["estimator"]]
        if row["group"] == "jump":
            reps = [r for r in reps if r["n_jumps"] > 0]
        elif row["group"] == "no_jump":
            reps = [r for r in reps if r["n_jumps"] == 0]
        err = np.array([r["value"] - r["oracle"] for r in reps])
        assert row["rmse"] ** 2 >= np.var(err) * (1 - 1e-12)
        assert 0.0 <= row["coverage"] <= 1.0


def test_shuffled_pairing_increases_rmse():
    spec = ExperimentSpec(
        model=brownian_poisson_model(1000, intensity=3.0),
        estimators=[EstimatorSpec("v_universal", EstimatorConfig(p=2, mode="unscaled"))],
        regime=Quadratic(),
        replications=60,
        master_seed=1,
        outputs={"summary", "rows"},
    )
    s = run_consistency(spec)
    reps = s.replications
    paired = _group_stats(reps)["rmse"]
    assert paired == s.get("v_universal")["rmse"]
    rng = np.random.default_rng(0)
    for _ in range(5):
        perm = rng.permutation(len(reps))
        shuffled = [dict(r, oracle=reps[j]["oracle"]) for r, j in zip(reps, perm)]
        assert _group_stats(shuffled)["rmse"] > paired


def test_tilde_oracle_uses_cp_on_continuous_paths():
    spec = ExperimentSpec(
        model=ModelSpec(vol=ConstantVol(1.5), n=200),
        estimators=[EstimatorSpec("v_tilde", EstimatorConfig(p=2)), EstimatorSpec("v_hat", EstimatorConfig(p=2))],
        regime=ContinuousPower(2),
        replications=2,
        outputs={"rows"},
    )
    rows = run_replications(spec)
    tilde = [r for r in rows if r["estimator"] == "v_tilde"]
    hat = [r for r in rows if r["estimator"] == "v_hat"]
    assert tilde[0]["oracle_kind"] == "c_p" and hat[0]["oracle_kind"] == "V"
    # c_2 = m_4 - m_2^2 = 2: both oracles are 2 * 1.5^4
    assert tilde[0]["oracle"] == pytest.approx(2 * 1.5**4, rel=1e-9)
    assert hat[0]["oracle"] == pytest.approx(2 * 1.5**4, rel=1e-12)


def test_replication_error_carries_index():
    spec = ExperimentSpec(
        model=ModelSpec(n=20),
        estimators=[EstimatorSpec("v_hat", EstimatorConfig(k=15))],
        regime=ContinuousPower(2),
        replications=3,
    )
    with pytest.raises(ReplicationError) as info:
        run_consistency(spec)
    assert info.value.index == 0
    assert "k=15" in str(info.value)


@pytest.mark.parametrize(
    "kw",
    [
        dict(replications=0),
        dict(estimators=[]),
        dict(estimators=[EstimatorSpec("v_hat"), EstimatorSpec("v_hat")]),
        dict(outputs={"plots"}),
    ],
)
def test_invalid_experiment(kw):
    with pytest.raises(ConfigError):
        jump_spec(**kw)


def test_clt_pairing_rules():
    spec = ExperimentSpec(
        model=ModelSpec(n=100),
        estimators=[EstimatorSpec("v_tilde", EstimatorConfig(p=3))],
        regime=ContinuousPower(3),
        replications=2,
    )
    with pytest.raises(ConfigError):
        run_clt_check(spec)
    jump = jump_spec(estimators=[EstimatorSpec("v_hat", UNSCALED4)])
    with pytest.raises(ConfigError):
        run_clt_check(jump)


def test_clt_excludes_no_jump_paths():
    spec = jump_spec(model=ModelSpec(jumps=CompoundPoisson(0.7, GaussianSize()), n=300), replications=40)
    r = run_clt_check(spec)
    assert r.n_no_jump > 0
    assert r.n_used + r.n_excluded + r.n_no_jump == 40
    assert r.ks == pytest.approx(ks_distance(r.sample))


def test_ks_distance_oracle():
    # the KS statistic of a sample is max |F_n - Phi| over the jump points
    from scipy.stats import norm

    x = np.sort(np.random.default_rng(3).standard_normal(50))
    cdf = norm.cdf(x)
    i = np.arange(1, 51)
    want = max(np.max(i / 50 - cdf), np.max(cdf - (i - 1) / 50))
    assert ks_distance(x) == pytest.approx(want, rel=1e-12)
    assert math.isnan(ks_distance([]))


@pytest.mark.slow
def test_oracle_standardization_dominates_on_continuous_paths():
    spec = ExperimentSpec(
        model=ModelSpec(n=2000),
        estimators=[EstimatorSpec("v_universal", SCALED2)],
        regime=ContinuousPower(2),
        replications=400,
        master_seed=12,
    )
    r = run_clt_check(spec)
    assert r.ks_oracle < r.ks
    assert r.ks < 0.1


@pytest.mark.slow
def test_subsample_consistent_without_jumps():
    spec = ExperimentSpec(
        model=ModelSpec(n=10_000),
        estimators=[EstimatorSpec("subsample", SCALED2), EstimatorSpec("mz", SCALED2)],
        regime=ContinuousPower(2),
        replications=200,
        master_seed=21,
    )
    s = run_consistency(spec)
    assert 0.85 <= s.get("subsample")["mean"] / 2 <= 1.15
    assert 0.85 <= s.get("mz")["mean"] / 2 <= 1.15


def test_failure_demo_table_shape():
    table = run_failure_demo(brownian_poisson_model(1000, intensity=2.0), n_grid=(400, 900), replications=12, master_seed=3)
    assert [row["n"] for row in table] == [400, 900]
    for row in table:
        assert set(row) == set(FAILURE_COLUMNS)
        assert row["jump_reps"] + row["no_jump_reps"] == row["reps"] == 12
        assert row["k"] == math.ceil(2 * math.sqrt(row["n"]))


def test_failure_demo_requires_its_model():
    with pytest.raises(ConfigError):
        run_failure_demo(JUMPY, n_grid=(400,), replications=2)
