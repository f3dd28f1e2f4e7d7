"""Acceptance gate: end-to-end statistical correctness targets.

1. Exact-posterior agreement of the chain on enumerable instances (TV 0.02).
2. Conjugate marginal vs telescoping oracle on a dense grid (1e-10 rel).
3. Partition-prior normalization for n <= 8 and all supports (1e-8).
4. Mixture-design benchmark medians at n in {100, 300, 1000}.
5. Rasch-generated benchmark at n=1000 vs the Rasch baseline.
6. Zero identifiability-bound violations across all kept states above.
7. Rasch difficulty-group recovery and EM monotonicity at n=1000.
8. Metric implementations vs brute-force oracles on 100 random cases (1e-12).
9. Byte-identical benchmark CSVs on rerun.

The replication benchmarks (4, 5) are marked `slow`; deselect with
`-m "not slow"`. ACBM_ACCEPTANCE_REPS overrides the replication count
(default 20) for quicker development runs.
"""

import math
import os

import numpy as np
import pytest

import oracles
from acbm import (
    Hyperparams,
    SamplerConfig,
    build_mfm_coefficients,
    cwri,
    adk,
    adp,
    adw,
    arwri,
    d1,
    dgp1_design,
    dgp3_design,
    dgp4_design,
    fit_rasch,
    generate_acbm,
    generate_rasch,
    kmax_bound,
    log_beta_binomial_marginal,
    log_partition_prior,
    rasch_accuracy_matrix,
    run_chain,
    summarize_trace,
    validate_matrix,
)
from acbm.core import canonicalize
from acbm.cli import main as cli_main
from test_metrics import make_fit, make_truth
from test_sampler import count_bound_violations

REPS = int(os.environ.get("ACBM_ACCEPTANCE_REPS", "20"))
H = Hyperparams()  # a0 = b0 = 0.01, gamma = alpha = 1
UNIT_H = Hyperparams(a0=1.0, b0=1.0)

slow = pytest.mark.slow


def median(rows, key):
    return float(np.median([r[key] for r in rows]))


# ---------------------------------------------------------------------------
# 1. exact-posterior equivalence


@slow
@pytest.mark.parametrize(
    "n,D,data_seed,thresh,chain_seed",
    [(3, 2, 7, 0.5, 101), (4, 2, 5, 0.5, 102), (4, 3, 12, 0.55, 103)],
)
def test_exact_posterior_total_variation(n, D, data_seed, thresh, chain_seed):
    rng = np.random.default_rng(data_seed)
    X = validate_matrix((rng.random((n, D)) < thresh).astype(int))
    cfg = SamplerConfig(n_iter=201_000, n_rep=2, burn_in=1_000, seed=chain_seed)
    tr = run_chain(X, UNIT_H, cfg)
    assert len(tr) == 200_000
    emp = {}
    for i in range(len(tr)):
        key = tuple(tr.col[i].tolist())
        emp[key] = emp.get(key, 0) + 1
    emp = {k: v / len(tr) for k, v in emp.items()}
    exact, _ = oracles.exact_column_posterior(X.entries.tolist(), 1, 1, 1, 1, 1, 1)
    assert oracles.tv_distance(emp, exact) <= 0.02


# ---------------------------------------------------------------------------
# 2. conjugacy grid


def test_conjugacy_oracle_grid():
    shapes = [0.01, 0.5, 1.0, 2.0]
    for a0 in shapes:
        for b0 in shapes:
            for s in range(51):
                for f in range(51):
                    got = log_beta_binomial_marginal(s, f, a0, b0)
                    want = oracles.log_bb_marginal(s, f, a0, b0)
                    assert abs(got - want) <= 1e-10 * max(abs(want), 1e-2), (
                        s, f, a0, b0,
                    )


# ---------------------------------------------------------------------------
# 3. EPPF normalization


@pytest.mark.parametrize("k_max", [1, 2, 3, None])
def test_partition_prior_normalization(k_max):
    for n in range(1, 9):
        coeffs = build_mfm_coefficients(n, 1.0, 1.0, k_max=k_max)
        total = 0.0
        for labels in oracles.set_partitions(n):
            if k_max is not None and max(labels) + 1 > k_max:
                continue
            total += math.exp(log_partition_prior(labels, coeffs))
        assert abs(total - 1.0) <= 1e-8, (n, k_max)


# ---------------------------------------------------------------------------
# 4/5/6. replication benchmarks (paper-default sampler settings)


def _run_rep(design_fn, n, seed, with_rasch):
    X, truth = (generate_rasch if with_rasch else generate_acbm)(design_fn(n, seed))
    trace = run_chain(X, H, SamplerConfig(seed=seed))  # n_iter=200, n_rep=400
    violations = count_bound_violations(trace)
    fit = summarize_trace(trace, X, H)
    row = {
        "violations": violations,
        "cwri": cwri(fit, truth),
        "arwri": arwri(fit, truth),
        "d1_acbm": d1(fit.accuracy_matrix, truth.accuracy_matrix),
    }
    if truth.clusters:
        row["adk"] = adk(fit, truth)
        row["adw"] = adw(fit, truth)
        row["adp"] = adp(fit, truth)
    if with_rasch:
        rfit = fit_rasch(X)
        row["d1_rasch"] = d1(rasch_accuracy_matrix(rfit), truth.accuracy_matrix)
    return row


@pytest.fixture(scope="module")
def dgp1_bench():
    return {
        n: [_run_rep(dgp1_design, n, seed, with_rasch=False) for seed in range(REPS)]
        for n in (100, 300, 1000)
    }


@pytest.fixture(scope="module")
def dgp4_bench():
    return [_run_rep(dgp4_design, 1000, seed, with_rasch=True) for seed in range(REPS)]


@slow
def test_dgp1_cwri_median_is_one(dgp1_bench):
    assert median(dgp1_bench[300], "cwri") == 1.0
    assert median(dgp1_bench[1000], "cwri") == 1.0


@slow
def test_dgp1_adk_median_is_zero(dgp1_bench):
    assert median(dgp1_bench[1000], "adk") == 0.0


@slow
def test_dgp1_adw_median(dgp1_bench):
    assert median(dgp1_bench[1000], "adw") <= 0.05


@slow
def test_dgp1_adp_median(dgp1_bench):
    assert median(dgp1_bench[1000], "adp") <= 0.05


@slow
def test_dgp1_error_medians_nonincreasing(dgp1_bench):
    for key in ("adw", "adp"):
        meds = [median(dgp1_bench[n], key) for n in (100, 300, 1000)]
        assert meds[0] >= meds[1] >= meds[2], (key, meds)


@slow
def test_dgp4_cwri_median_is_one(dgp4_bench):
    assert median(dgp4_bench, "cwri") == 1.0


@slow
def test_dgp4_arwri_median(dgp4_bench):
    assert median(dgp4_bench, "arwri") >= 0.95


@slow
def test_dgp4_beats_rasch_on_d1(dgp4_bench):
    med_acbm = median(dgp4_bench, "d1_acbm")
    med_rasch = median(dgp4_bench, "d1_rasch")
    assert med_acbm < med_rasch
    assert med_acbm / med_rasch <= 0.5


@slow
def test_no_bound_violations(dgp1_bench, dgp4_bench):
    total = sum(r["violations"] for rows in dgp1_bench.values() for r in rows)
    total += sum(r["violations"] for r in dgp4_bench)
    assert total == 0


# ---------------------------------------------------------------------------
# 7. Rasch recovery


def test_rasch_recovery_at_n1000():
    X, _ = generate_rasch(dgp3_design(1000, seed=11))
    fit = fit_rasch(X)
    assert np.diff(fit.loglik_path).min() > -1e-8
    centered = fit.psi - fit.psi.mean()
    assert abs(centered[:10].mean() - (-0.5)) < 0.1
    assert abs(centered[10:].mean() - 0.5) < 0.1


# ---------------------------------------------------------------------------
# 8. metrics vs brute-force oracles


THETA_GRID = np.linspace(0.05, 0.95, 19)


def _random_instance(rng):
    D = int(rng.integers(3, 7))
    n = int(rng.integers(4, 9))
    col_true = canonicalize(rng.integers(0, 3, D))
    col_fit = (
        col_true.copy() if rng.random() < 0.5 else canonicalize(rng.integers(0, 3, D))
    )

    def labels_with(K):
        lab = np.concatenate([np.arange(K), rng.integers(0, K, n - K)])
        return rng.permutation(lab)

    sizes_t = np.bincount(col_true)
    truth_clusters, rows_t = [], {}
    for c, s in enumerate(sizes_t):
        K0 = int(rng.integers(1, kmax_bound(int(s)) + 1))
        theta = rng.choice(THETA_GRID, K0, replace=False)
        w = rng.dirichlet(np.ones(K0))
        truth_clusters.append({"K": K0, "w": w.tolist(), "theta": theta.tolist()})
        rows_t[c] = labels_with(K0)
    truth = make_truth(col_true, truth_clusters, rows_t, n)

    fit_params, rows_f = [], {}
    for c in range(int(col_fit.max()) + 1):
        K = int(rng.integers(1, min(4, n) + 1))
        theta = rng.choice(THETA_GRID, K, replace=False)
        w = rng.dirichlet(np.ones(K))
        fit_params.append((K, theta.tolist(), w.tolist()))
        rows_f[c] = labels_with(K)
    fit = make_fit(col_fit, fit_params, rows_f, n)
    return fit, truth


def _expected_metrics(fit, truth):
    col_f = fit.col_assign
    col_t = truth.col_assign
    D = len(col_f)
    out = {"cwri": oracles.rand_index_pairs(col_f.tolist(), col_t.tolist())}

    out["adk"] = (
        sum(
            abs(
                int(np.max(fit.row_assign[int(col_f[d])])) + 1
                - truth.clusters[int(col_t[d])]["K"]
            )
            for d in range(D)
        )
        / D
    )

    fit_by_cols = {frozenset(cl["columns"]): cl for cl in fit.clusters}
    tclusters = [
        (frozenset(np.flatnonzero(col_t == c).tolist()), cl)
        for c, cl in enumerate(truth.clusters)
    ]
    if out["cwri"] != 1.0:
        out["adw"] = 2.0
    else:
        tot = 0.0
        for cols, cl in tclusters:
            hit = fit_by_cols[cols]
            tot += oracles.min_weight_mismatch(hit["w"], cl["w"]) / cl["K"]
        out["adw"] = tot / len(tclusters)

    tot = 0.0
    for cols, cl in tclusters:
        hit = fit_by_cols.get(cols)
        if hit is None or hit["K"] < cl["K"]:
            tot += 1.0
        else:
            tot += math.sqrt(
                oracles.min_sq_mismatch(hit["theta"], cl["theta"]) / cl["K"]
            )
    out["adp"] = tot / len(tclusters)

    out["arwri"] = (
        sum(
            oracles.rand_index_pairs(
                fit.row_assign[int(col_f[d])].tolist(),
                truth.row_assign[int(col_t[d])].tolist(),
            )
            for d in range(D)
        )
        / D
    )
    out["d1"] = float(
        np.abs(fit.accuracy_matrix - truth.accuracy_matrix).sum()
        / truth.accuracy_matrix.size
    )
    return out


def test_metrics_match_bruteforce_on_100_cases():
    rng = np.random.default_rng(2024)
    for case in range(100):
        fit, truth = _random_instance(rng)
        want = _expected_metrics(fit, truth)
        assert abs(cwri(fit, truth) - want["cwri"]) <= 1e-12, case
        assert abs(adk(fit, truth) - want["adk"]) <= 1e-12, case
        assert abs(adw(fit, truth) - want["adw"]) <= 1e-12, case
        assert abs(adp(fit, truth) - want["adp"]) <= 1e-12, case
        assert abs(arwri(fit, truth) - want["arwri"]) <= 1e-12, case
        assert (
            abs(d1(fit.accuracy_matrix, truth.accuracy_matrix) - want["d1"]) <= 1e-12
        ), case


# ---------------------------------------------------------------------------
# 9. benchmark determinism


def test_bench_rerun_byte_identical(tmp_path):
    flags = [
        "bench", "--design", "dgp1", "--n", "16,24", "--reps", "2", "--seed", "9",
        "--n-iter", "12", "--n-rep", "2", "--burn-in", "6",
    ]
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert cli_main(flags + ["--out", str(out)]) == 0
        outs.append(out)
    a, b = outs
    assert (a / "replications.csv").read_bytes() == (b / "replications.csv").read_bytes()
    assert (a / "aggregate.csv").read_bytes() == (b / "aggregate.csv").read_bytes()
