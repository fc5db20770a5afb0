"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS lines as they
complete. Every tolerance and time budget is fixed here; nothing is left to
later calibration. The external-dataset pathway is exercised only when
DISTREG_EXTERNAL_DATA points at user-supplied files (informational, not
gating).
"""

import json
import os
import time

import numpy as np
import pytest

import distreg as dr
from distreg.cli import main as cli_main
from distreg.evaluate import run_protocol, split_train_test
from conftest import (
    oracle_bag_gram,
    oracle_cross_bag_gram,
    oracle_krr,
    random_dataset,
)


def verdict(ok: bool, name: str, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


class Budget:
    def __init__(self, seconds: float):
        self.limit = seconds
        self.start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def ok(self) -> bool:
        return self.elapsed < self.limit


def test_singleton_reduction_oracle():
    budget = Budget(10.0)
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(20):
        n_train = int(rng.integers(5, 51))
        train = random_dataset(rng, n_train, singleton=True, dim=int(rng.integers(1, 5)))
        test = random_dataset(rng, 10, singleton=True, dim=train.dim, prefix="t")
        sigma = float(rng.uniform(0.5, 2.0))
        # keep the ridge system's condition number around 1e4 or below:
        # past that, two correct solvers cannot agree to 1e-10 in float64
        lam = float(10.0 ** rng.uniform(-3, -1))
        model = dr.fit_model("kdr", train, {"lam": lam, "sigma": sigma})
        got = dr.predict_model(model, test)
        norm = dr.fit_normalizer(train)
        x_tr = np.vstack([b.instances for b in dr.apply_normalizer(train, norm).bags])
        x_te = np.vstack([b.instances for b in dr.apply_normalizer(test, norm).bags])
        want = oracle_krr(x_tr, train.targets, x_te, sigma, lam)
        rel = np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want)))
        worst = max(worst, rel)
    verdict(
        worst <= 1e-10 and budget.ok(),
        "singleton reduction: distribution regressor matches instance KRR oracle",
        f"worst relative error {worst:.2e}, {budget.elapsed:.1f}s",
    )


def test_double_loop_gram_oracle():
    budget = Budget(30.0)
    rng = np.random.default_rng(101)
    worst = 0.0
    for case in range(1000):
        dim = int(rng.integers(1, 5))
        sigma = float(rng.uniform(0.4, 2.5))
        if case % 10 < 4:  # 400 bag_gram cases
            data = random_dataset(rng, int(rng.integers(1, 11)), max_instances=8, dim=dim)
            got = dr.bag_gram(data, dr.RbfParams(sigma)).values
            want = oracle_bag_gram(data, sigma)
        elif case % 10 < 7:  # 300 cross cases
            train = random_dataset(rng, int(rng.integers(1, 11)), max_instances=8, dim=dim)
            test = random_dataset(rng, int(rng.integers(1, 6)), max_instances=8, dim=dim, prefix="t")
            got = dr.cross_bag_gram(test, train, dr.RbfParams(sigma))
            want = oracle_cross_bag_gram(test, train, sigma)
        else:  # 300 multisource cases
            one = random_dataset(rng, int(rng.integers(1, 8)), max_instances=6, dim=dim)
            two = dr.BagDataset(
                tuple(
                    dr.Bag(b.id, rng.standard_normal((int(rng.integers(1, 7)), dim + 1)))
                    for b in one.bags
                ),
                one.targets,
            )
            ms = dr.MultiSourceDataset((one, two))
            sigma2 = float(rng.uniform(0.4, 2.5))
            got = dr.multisource_bag_gram(
                ms, [dr.RbfParams(sigma), dr.RbfParams(sigma2)]
            ).values
            want = oracle_bag_gram(one, sigma) + oracle_bag_gram(two, sigma2)
        worst = max(worst, float(np.max(np.abs(got - want))))
    verdict(
        worst <= 1e-12 and budget.ok(),
        "Gram assembly matches naive nested-loop computation (1000 cases)",
        f"worst entry error {worst:.2e}, {budget.elapsed:.1f}s",
    )


def test_psd_suite():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        data = random_dataset(rng, int(rng.integers(2, 31)), max_instances=6,
                              dim=int(rng.integers(1, 5)))
        values = dr.bag_gram(data, dr.RbfParams(float(rng.uniform(0.3, 3.0)))).values
        eig = np.linalg.eigvalsh(values)
        worst = min(worst, float(eig.min() / eig.max()))
    verdict(
        worst >= -1e-8,
        "bag Gram matrices are positive semidefinite (100 datasets)",
        f"worst eigenvalue ratio {worst:.2e}",
    )


def test_rff_convergence_rate():
    budget = Budget(60.0)
    rng = np.random.default_rng(103)
    sigma = 1.0
    params = dr.RbfParams(sigma)
    pairs = [tuple(rng.standard_normal((2, 3))) for _ in range(100)]
    sizes = (64, 256, 1024, 4096)
    mean_err = {}
    for d in sizes:
        errs = []
        for seed in range(20):
            basis = dr.sample_basis(3, d, sigma, seed=seed)
            errs.append(
                max(
                    abs(dr.feature_map(x, basis) @ dr.feature_map(y, basis) - dr.rbf_kernel(x, y, params))
                    for x, y in pairs
                )
            )
        mean_err[d] = float(np.mean(errs))
    ratios = {d: mean_err[d] / mean_err[4 * d] for d in (64, 256, 1024)}
    verdict(
        all(1.5 <= r <= 3.0 for r in ratios.values()) and budget.ok(),
        "random-feature kernel error decays at the Monte-Carlo rate",
        f"quadrupling ratios {({d: round(r, 2) for d, r in ratios.items()})}, {budget.elapsed:.1f}s",
    )


def test_rdr_kdr_agreement():
    budget = Budget(60.0)
    data = dr.make_variance_task(120, 50, 3, seed=0)
    tr_idx, te_idx = split_train_test(120, 0.33, 0)
    train, test = data.subset(tr_idx), data.subset(te_idx)
    med = dr.median_heuristic_bags(dr.apply_normalizer(train, dr.fit_normalizer(train)))
    lam = 1e-2
    p_kdr = dr.predict_model(dr.fit_model("kdr", train, {"lam": lam, "sigma": med}), test)
    p_rdr = dr.predict_model(
        dr.fit_model("rdr", train, {"lam": lam, "sigma": med, "n_features": 4096, "rff_seed": 0}),
        test,
    )
    diff = float(np.sqrt(np.mean((p_rdr - p_kdr) ** 2)))
    threshold = 0.05 * float(np.std(data.targets))
    verdict(
        diff <= threshold and budget.ok(),
        "randomized and exact distribution regression agree at 4096 components",
        f"prediction RMSE gap {diff:.4f} <= {threshold:.4f}, {budget.elapsed:.1f}s",
    )


def test_distribution_regression_separation():
    budget = Budget(300.0)
    data = dr.make_variance_task(120, 50, 3, seed=0)
    kdr = run_protocol(data, "kdr", test_fraction=0.33, trials=10, k=5, seed=0)
    lr = run_protocol(data, "lr", test_fraction=0.33, trials=10, k=5, seed=0)
    kdr_r2 = kdr.aggregates()["r2"][0]
    lr_r2 = lr.aggregates()["r2"][0]
    verdict(
        kdr_r2 > 0.9 and lr_r2 < 0.2 and budget.ok(),
        "variance task separates distribution regression from the mean baseline",
        f"KDR R2 {kdr_r2:.3f} > 0.9, LR R2 {lr_r2:.3f} < 0.2, {budget.elapsed:.0f}s",
    )


def test_multisource_dominance():
    budget = Budget(300.0)
    ms = dr.make_multisource_task(120, seed=0)
    mdr = run_protocol(ms, "mdr", test_fraction=0.33, trials=10, k=5, seed=0)
    stacked = run_protocol(ms, "stacked-kdr", test_fraction=0.33, trials=10, k=5, seed=0)
    mdr_r2 = mdr.aggregates()["r2"][0]
    stacked_r2 = stacked.aggregates()["r2"][0]

    # single-source composite must collapse exactly onto the plain model
    rng = np.random.default_rng(104)
    single = random_dataset(rng, 10, max_instances=5, dim=3)
    wrapped = dr.MultiSourceDataset((single,))
    test = random_dataset(rng, 4, max_instances=5, dim=3, prefix="t")
    p_mdr = dr.predict_model(
        dr.fit_model("mdr", wrapped, {"lam": 1e-3, "sigmas": [1.1]}),
        dr.MultiSourceDataset((test,)),
    )
    p_kdr = dr.predict_model(dr.fit_model("kdr", single, {"lam": 1e-3, "sigma": 1.1}), test)
    reduction_gap = float(np.max(np.abs(p_mdr - p_kdr)))

    verdict(
        mdr_r2 >= stacked_r2 - 0.02 and reduction_gap <= 1e-12 and budget.ok(),
        "composite multisource kernel dominates feature stacking",
        f"MDR R2 {mdr_r2:.3f} >= stacked {stacked_r2:.3f} - 0.02, "
        f"single-source gap {reduction_gap:.1e}, {budget.elapsed:.0f}s",
    )


def test_mmd_two_sample_suite():
    budget = Budget(120.0)
    x, y = dr.make_two_sample_pair("c", 2000, seed=0)
    mean_gap = abs(float(x.mean() - y.mean()))
    sigma = dr.median_heuristic(np.vstack([x, y]))
    result = dr.mmd_permutation_test(x, y, dr.RbfParams(sigma), n_permutations=200, seed=0)
    identical = dr.mmd_squared(x, x, dr.RbfParams(sigma))
    verdict(
        result.p_value < 0.01
        and mean_gap < 0.1
        and abs(identical) <= 1e-12
        and budget.ok(),
        "matched-moment two-sample difference is detected by the embedding test",
        f"p={result.p_value:.4f} < 0.01 with mean gap {mean_gap:.3f}, "
        f"identical-sample statistic {identical:.1e}, {budget.elapsed:.0f}s",
    )


def _permute_instances(data, rng):
    if isinstance(data, dr.MultiSourceDataset):
        return dr.MultiSourceDataset(tuple(_permute_instances(s, rng) for s in data.sources))
    bags = tuple(
        dr.Bag(b.id, b.instances[rng.permutation(b.n_instances)]) for b in data.bags
    )
    return dr.BagDataset(bags, data.targets)


def _duplicate_instances(data):
    if isinstance(data, dr.MultiSourceDataset):
        return dr.MultiSourceDataset(tuple(_duplicate_instances(s) for s in data.sources))
    bags = tuple(dr.Bag(b.id, np.vstack([b.instances, b.instances])) for b in data.bags)
    return dr.BagDataset(bags, data.targets)


def _shift_targets(data, c):
    if isinstance(data, dr.MultiSourceDataset):
        return dr.MultiSourceDataset(tuple(_shift_targets(s, c) for s in data.sources))
    return dr.BagDataset(data.bags, data.targets + c)


_HYPERS = {
    "lr": {"lam": 1e-4},
    "kr": {"lam": 1e-3, "sigma": 1.2},
    "kdr": {"lam": 1e-3, "sigma": 1.2},
    "rdr": {"lam": 1e-3, "sigma": 1.2, "n_features": 16, "rff_seed": 0},
    "mdr": {"lam": 1e-3, "sigmas": [1.2, 0.9]},
    "stacked-lr": {"lam": 1e-4},
    "stacked-kr": {"lam": 1e-3, "sigma": 1.2},
    "stacked-kdr": {"lam": 1e-3, "sigma": 1.2},
    "stacked-rdr": {"lam": 1e-3, "sigma": 1.2, "n_features": 16, "rff_seed": 0},
}


def _random_task(kind, rng, n_bags, prefix="b"):
    if kind in dr.SINGLE_SOURCE_KINDS:
        return random_dataset(rng, n_bags, max_instances=4, dim=3, prefix=prefix)
    one = random_dataset(rng, n_bags, max_instances=4, dim=3, prefix=prefix)
    two = dr.BagDataset(
        tuple(
            dr.Bag(b.id, rng.standard_normal((int(rng.integers(1, 4)), 2)))
            for b in one.bags
        ),
        one.targets,
    )
    return dr.MultiSourceDataset((one, two))


def test_invariance_suite():
    budget = Budget(120.0)
    rng = np.random.default_rng(105)
    kinds = dr.MODEL_KINDS
    checks = ("permute", "duplicate", "shift")
    worst = {"permute": 0.0, "duplicate": 0.0, "shift": 0.0}
    for case in range(500):
        kind = kinds[case % len(kinds)]
        check = checks[(case // len(kinds)) % len(checks)]
        train = _random_task(kind, rng, int(rng.integers(4, 9)))
        test = _random_task(kind, rng, 3, prefix="t")
        model = dr.fit_model(kind, train, _HYPERS[kind])
        base = dr.predict_model(model, test)
        if check == "permute":
            model2 = dr.fit_model(kind, _permute_instances(train, rng), _HYPERS[kind])
            delta = np.abs(dr.predict_model(model2, _permute_instances(test, rng)) - base)
            worst[check] = max(worst[check], float(delta.max()))
        elif check == "duplicate":
            delta = np.abs(dr.predict_model(model, _duplicate_instances(test)) - base)
            worst[check] = max(worst[check], float(delta.max()))
        else:
            shifted = dr.fit_model(kind, _shift_targets(train, 7.0), _HYPERS[kind])
            delta = np.abs(dr.predict_model(shifted, test) - (base + 7.0))
            worst[check] = max(worst[check], float(delta.max()))
    ok = (
        worst["permute"] <= 1e-12
        and worst["duplicate"] <= 1e-12
        and worst["shift"] <= 1e-10
        and budget.ok()
    )
    verdict(
        ok,
        "permutation/duplication/target-shift invariances hold for every model kind",
        f"worst deviations {({k: f'{v:.1e}' for k, v in worst.items()})}, {budget.elapsed:.0f}s",
    )


def test_determinism_and_round_trip(tmp_path):
    # byte-identical machine-readable outputs on rerun
    data_dir = tmp_path / "data"
    assert cli_main([
        "synth", "--kind", "variance-task", "--out", str(data_dir),
        "--bags", "24", "--bag-size", "8", "--dim", "2", "--seed", "11",
    ]) == 0
    config = {
        "instances": [str(data_dir / "instances.csv")],
        "targets": str(data_dir / "targets.csv"),
        "models": ["lr", "kr", "rdr", "kdr"],
        "test_fraction": 0.25,
        "trials": 2,
        "folds": 3,
        "seed": 3,
        "grid": {"lams": [1e-4, 1e-2], "sigma_scales": [1.0], "n_features": [32]},
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    outputs = {}
    for run in ("first", "second"):
        out_dir = tmp_path / run
        assert cli_main(["run", "--config", str(config_path), "--out", str(out_dir)]) == 0
        outputs[run] = {p.name: p.read_bytes() for p in out_dir.iterdir()}
    byte_identical = outputs["first"] == outputs["second"]

    # save/load round trip for every model kind
    rng = np.random.default_rng(106)
    worst_gap = 0.0
    for kind in dr.MODEL_KINDS:
        train = _random_task(kind, rng, 6)
        test = _random_task(kind, rng, 3, prefix="t")
        model = dr.fit_model(kind, train, _HYPERS[kind])
        want = dr.predict_model(model, test)
        path = tmp_path / f"{kind}.model.json"
        dr.save_model(model, path)
        got = dr.predict_model(dr.load_model(path), test)
        worst_gap = max(worst_gap, float(np.max(np.abs(got - want))))
    verdict(
        byte_identical and worst_gap <= 1e-12,
        "reruns are byte-identical and saved models predict identically",
        f"round-trip prediction gap {worst_gap:.1e}",
    )


@pytest.mark.skipif(
    "DISTREG_EXTERNAL_DATA" not in os.environ,
    reason="informational pathway; set DISTREG_EXTERNAL_DATA to a directory "
    "with instances.csv/targets.csv to exercise it",
)
def test_external_dataset_pathway(tmp_path):
    """Informational: run the full protocol on user-supplied data and emit the
    comparison table. Checks output shape only; numbers depend on the data."""
    base = os.environ["DISTREG_EXTERNAL_DATA"]
    config = {
        "instances": [os.path.join(base, "instances.csv")],
        "targets": os.path.join(base, "targets.csv"),
        "models": ["lr", "kr", "rdr", "kdr"],
        "test_fraction": 0.25,
        "trials": 10,
        "folds": 5,
        "seed": 0,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    out_dir = tmp_path / "results"
    assert cli_main(["run", "--config", str(config_path), "--out", str(out_dir)]) == 0
    table = (out_dir / "table.csv").read_text(encoding="utf-8").strip().split("\n")
    verdict(len(table) == 5, "external dataset pathway emits the comparison table")
