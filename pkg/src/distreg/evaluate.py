"""Evaluation protocol: metrics, bag-level k-fold CV, grid search, repeated trials.

The protocol splits at the bag level throughout: a percentage of bags is held
out for testing, the remainder is grid-searched with k-fold cross-validation
(normalizer refit on each fold's training bags, so no statistics leak out of
a fold), the best point is refit on the full training split and scored on the
held-out bags, and the whole procedure repeats over independent trials whose
seeds are derived as ``seed + trial``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import BagDataset, MultiSourceDataset, apply_normalizer, fit_normalizer
from .kernels import RbfParams, bag_gram, cross_bag_gram, median_heuristic_bags, multisource_bag_gram
from .models import (
    IllConditionedError,
    MODEL_KINDS,
    SINGLE_SOURCE_KINDS,
    STACK_MODES,
    _bag_means,
    fit_baseline,
    fit_kdr,
    fit_model,
    fit_mdr,
    fit_rdr,
    predict_baseline,
    predict_kdr,
    predict_mdr,
    predict_model,
    predict_rdr,
    stack_multisource,
)
from .rff import bag_feature_matrix, sample_basis

__all__ = [
    "CvCell",
    "EvalReport",
    "GridSearchResult",
    "Metrics",
    "TrialResult",
    "compute_metrics",
    "default_grid",
    "grid_search_cv",
    "kfold_split",
    "render_table",
    "report_to_dict",
    "reports_to_csv",
    "run_protocol",
    "split_train_test",
]

logger = logging.getLogger("distreg.evaluate")

_DEFAULT_LAMBDAS = tuple(float(v) for v in np.logspace(-6, 2, 9))
_DEFAULT_SIGMA_SCALES = tuple(float(v) for v in 2.0 ** np.arange(-3, 4))
_DEFAULT_N_FEATURES = (128, 512, 2048)


@dataclass(frozen=True)
class Metrics:
    """Mean error (bias), root-mean-square error, coefficient of determination."""

    me: float
    rmse: float
    r2: float


def compute_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> Metrics:
    """Score predictions against targets.

    R^2 is 1 - SS_res/SS_tot about the mean of ``y_true`` and is undefined
    (raises) when ``y_true`` is constant.
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"length mismatch: {y_true.shape[0]} targets vs {y_pred.shape[0]} predictions"
        )
    if y_true.shape[0] == 0:
        raise ValueError("metrics need at least one sample")
    err = y_pred - y_true
    me = float(err.mean())
    rmse = float(np.sqrt(np.mean(err**2)))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 is undefined: y_true is constant")
    r2 = 1.0 - float(np.sum(err**2)) / ss_tot
    return Metrics(me=me, rmse=rmse, r2=r2)


def kfold_split(n_bags: int, k: int, seed: int) -> list[np.ndarray]:
    """Random partition of ``range(n_bags)`` into k folds of near-equal size."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n_bags:
        raise ValueError(f"cannot split {n_bags} bags into {k} folds")
    perm = np.random.default_rng(seed).permutation(n_bags)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def split_train_test(
    n_bags: int, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Random bag-level train/test split; both index arrays come back sorted."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if n_bags < 2:
        raise ValueError("need at least two bags to split")
    n_test = int(round(n_bags * test_fraction))
    n_test = min(max(n_test, 1), n_bags - 1)
    perm = np.random.default_rng(seed).permutation(n_bags)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


@dataclass(frozen=True)
class CvCell:
    """One grid point's cross-validation outcome."""

    params: dict
    mean_rmse: float
    fold_rmse: tuple[float, ...] | None
    error: str | None


@dataclass(frozen=True)
class GridSearchResult:
    best: dict
    table: tuple[CvCell, ...]


def _sigma_tiebreak(point: dict) -> float:
    if "sigma" in point:
        return float(point["sigma"])
    if "sigmas" in point:
        return float(sum(point["sigmas"]))
    return 0.0


def _group_key(point: dict):
    items = []
    for key in sorted(point):
        if key == "lam":
            continue
        value = point[key]
        items.append((key, tuple(value) if isinstance(value, (list, tuple)) else value))
    return tuple(items)


def _normalized_copy(data: BagDataset) -> BagDataset:
    return apply_normalizer(data, fit_normalizer(data))


def _normalized_multisource(data: MultiSourceDataset) -> MultiSourceDataset:
    return MultiSourceDataset(tuple(_normalized_copy(src) for src in data.sources))


def _prepare_fold(kind: str, train_raw, val_raw):
    """Normalize one fold (stats from the fold's training bags only) and, for
    stacked kinds, build the concatenated single-source view once."""
    if kind in SINGLE_SOURCE_KINDS:
        norm = fit_normalizer(train_raw)
        return apply_normalizer(train_raw, norm), apply_normalizer(val_raw, norm)
    norms = [fit_normalizer(src) for src in train_raw.sources]
    tr = MultiSourceDataset(
        tuple(apply_normalizer(s, n) for s, n in zip(train_raw.sources, norms))
    )
    va = MultiSourceDataset(
        tuple(apply_normalizer(s, n) for s, n in zip(val_raw.sources, norms))
    )
    if kind == "mdr":
        return tr, va
    mode = STACK_MODES[kind.split("-", 1)[1]]
    return stack_multisource(tr, mode), stack_multisource(va, mode)


def _group_solver(kind: str, tr, va, point: dict) -> Callable[[float], np.ndarray]:
    """Build the lambda-independent representation for a grid group and return
    a solver mapping lambda to validation predictions.

    The heavy parts (Gram matrices, feature matrices, bag means) are computed
    once per (fold, group); each lambda then costs one Cholesky solve.
    """
    base = kind.split("-", 1)[1] if kind.startswith("stacked-") else kind
    if base == "lr":
        m_tr, m_va = _bag_means(tr), _bag_means(va)
        return lambda lam: predict_baseline(
            fit_baseline(tr, "lr", lam, _means=m_tr), va, _means=m_va
        )
    if base == "kr":
        params = RbfParams(point["sigma"])
        m_tr, m_va = _bag_means(tr), _bag_means(va)
        return lambda lam: predict_baseline(
            fit_baseline(tr, "kr", lam, params, _means=m_tr), va, _means=m_va
        )
    if base == "kdr":
        params = RbfParams(point["sigma"])
        gram = bag_gram(tr, params)
        cross = cross_bag_gram(va, tr, params)
        return lambda lam: predict_kdr(
            fit_kdr(tr, params, lam, _gram=gram), va, _cross=cross
        )
    if base == "rdr":
        basis = sample_basis(
            tr.dim, int(point["n_features"]), float(point["sigma"]), int(point.get("rff_seed", 0))
        )
        z_tr = bag_feature_matrix(tr, basis)
        z_va = bag_feature_matrix(va, basis)
        return lambda lam: predict_rdr(
            fit_rdr(tr, basis, lam, _features=z_tr), va, _features=z_va
        )
    if base == "mdr":
        params = [RbfParams(s) for s in point["sigmas"]]
        gram = multisource_bag_gram(tr, params)
        cross = np.zeros((va.n_bags, tr.n_bags))
        for te_src, tr_src, p in zip(va.sources, tr.sources, params):
            cross += cross_bag_gram(te_src, tr_src, p)
        return lambda lam: predict_mdr(
            fit_mdr(tr, params, lam, _gram=gram), va, _cross=cross
        )
    raise ValueError(f"unknown model kind {kind!r}")


def grid_search_cv(
    data: BagDataset | MultiSourceDataset,
    kind: str,
    grid: Sequence[dict],
    k: int,
    seed: int,
) -> GridSearchResult:
    """Mean validation RMSE per grid point over k bag-level folds.

    Points sharing everything but ``lam`` reuse one Gram/feature computation
    per fold. A point that fails on any fold is excluded (with the reason
    logged and recorded in its table cell); it is an error only if every point
    fails. Ties in mean RMSE prefer larger lambda, then larger sigma, then
    fewer random features.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    grid = [dict(p) for p in grid]
    if not grid:
        raise ValueError("grid must contain at least one point")
    if k < 2:
        raise ValueError("cross-validation needs k >= 2")
    folds = kfold_split(data.n_bags, k, seed)
    all_idx = np.arange(data.n_bags)
    rmse = np.full((len(grid), len(folds)), np.nan)
    errors: dict[int, str] = {}

    groups: dict[tuple, list[int]] = {}
    for i, point in enumerate(grid):
        groups.setdefault(_group_key(point), []).append(i)

    for fi, val_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_idx, val_idx)
        tr, va = _prepare_fold(kind, data.subset(train_idx), data.subset(val_idx))
        y_val = va.targets
        for indices in groups.values():
            try:
                solver = _group_solver(kind, tr, va, grid[indices[0]])
            except (IllConditionedError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                for i in indices:
                    if i not in errors:
                        errors[i] = f"fold {fi}: {exc}"
                        logger.warning("grid point %r failed on fold %d: %s", grid[i], fi, exc)
                continue
            for i in indices:
                if i in errors:
                    continue
                try:
                    pred = solver(float(grid[i]["lam"]))
                except (IllConditionedError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                    errors[i] = f"fold {fi}: {exc}"
                    logger.warning("grid point %r failed on fold %d: %s", grid[i], fi, exc)
                    continue
                rmse[i, fi] = float(np.sqrt(np.mean((pred - y_val) ** 2)))

    cells = []
    candidates = []
    for i, point in enumerate(grid):
        if i in errors:
            cells.append(CvCell(point, float("nan"), None, errors[i]))
            continue
        mean_rmse = float(rmse[i].mean())
        cells.append(CvCell(point, mean_rmse, tuple(float(v) for v in rmse[i]), None))
        candidates.append((i, mean_rmse))
    if not candidates:
        raise RuntimeError(
            f"all {len(grid)} grid points failed cross-validation; "
            f"first failure: {errors[min(errors)]}"
        )
    best_i = min(
        candidates,
        key=lambda item: (
            item[1],
            -float(grid[item[0]].get("lam", 0.0)),
            -_sigma_tiebreak(grid[item[0]]),
            int(grid[item[0]].get("n_features", 0)),
        ),
    )[0]
    return GridSearchResult(best=grid[best_i], table=tuple(cells))


def default_grid(
    kind: str,
    data: BagDataset | MultiSourceDataset,
    seed: int = 0,
    lams: Sequence[float] | None = None,
    sigma_scales: Sequence[float] | None = None,
    n_features: Sequence[int] | None = None,
) -> list[dict]:
    """Hyperparameter grid centered on the median heuristic of the given data.

    Lambdas default to 9 log-spaced values in [1e-6, 1e2]; sigmas to the
    median pairwise distance (computed on normalized instances) times
    2^-3 ... 2^3; feature counts for the randomized kinds to (128, 512, 2048).
    Multisource sigmas apply one shared scale to each source's own median.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    lams = [float(v) for v in (lams if lams is not None else _DEFAULT_LAMBDAS)]
    scales = [float(v) for v in (sigma_scales if sigma_scales is not None else _DEFAULT_SIGMA_SCALES)]
    feature_counts = [int(v) for v in (n_features if n_features is not None else _DEFAULT_N_FEATURES)]

    if kind == "lr" or kind == "stacked-lr":
        return [{"lam": lam} for lam in lams]
    if kind == "mdr":
        meds = [median_heuristic_bags(_normalized_copy(src)) for src in data.sources]
        return [
            {"lam": lam, "sigmas": [m * s for m in meds]}
            for s in scales
            for lam in lams
        ]
    if kind in ("kr", "kdr", "rdr"):
        med = median_heuristic_bags(_normalized_copy(data))
    else:  # stacked-kr / stacked-kdr / stacked-rdr
        base = kind.split("-", 1)[1]
        stacked = stack_multisource(_normalized_multisource(data), STACK_MODES[base])
        med = median_heuristic_bags(stacked)
    if kind.endswith("rdr"):
        return [
            {"lam": lam, "sigma": med * s, "n_features": d, "rff_seed": int(seed)}
            for d in feature_counts
            for s in scales
            for lam in lams
        ]
    return [{"lam": lam, "sigma": med * s} for s in scales for lam in lams]


def _protocol_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> Metrics:
    """Metrics for a held-out split, tolerating the degenerate case.

    A test split can legitimately hold a single bag (or bags with identical
    targets); R^2 is undefined there and reported as NaN instead of failing
    the trial.
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    if np.all(y_true == y_true[0]):
        err = np.asarray(y_pred, dtype=float).ravel() - y_true
        return Metrics(
            me=float(err.mean()),
            rmse=float(np.sqrt(np.mean(err**2))),
            r2=float("nan"),
        )
    return compute_metrics(y_true, y_pred)


@dataclass(frozen=True)
class TrialResult:
    """One protocol trial: held-out metrics plus the chosen grid point."""

    index: int
    seed: int
    metrics: Metrics
    chosen: dict
    timings: dict


@dataclass(frozen=True)
class EvalReport:
    """Per-trial metrics and their aggregates for one model kind."""

    kind: str
    test_fraction: float
    n_folds: int
    base_seed: int
    trials: tuple[TrialResult, ...]

    def aggregates(self) -> dict[str, tuple[float, float]]:
        """Mean and sample standard deviation (n-1) of each metric over trials."""
        out = {}
        for name in ("me", "rmse", "r2"):
            values = np.array([getattr(t.metrics, name) for t in self.trials])
            std = 0.0 if values.size == 1 else float(values.std(ddof=1))
            out[name] = (float(values.mean()), std)
        return out


def run_protocol(
    data: BagDataset | MultiSourceDataset,
    kind: str,
    grid: Sequence[dict] | None = None,
    test_fraction: float = 0.33,
    trials: int = 10,
    k: int = 5,
    seed: int = 0,
    grid_options: dict | None = None,
) -> EvalReport:
    """Repeated-trial evaluation of one model kind.

    Each trial: split bags into train/test, grid-search on the training bags
    with k-fold CV, refit the winner on the full training split, score on the
    held-out bags. When ``grid`` is None a fresh default grid is built from
    each trial's training split (``grid_options`` forwards axis overrides to
    ``default_grid``).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_train = data.n_bags - max(1, int(round(data.n_bags * test_fraction)))
    if n_train < k:
        raise ValueError(
            f"insufficient bags: {data.n_bags} bags with test_fraction={test_fraction} "
            f"leave {n_train} training bags for {k}-fold CV"
        )
    results = []
    for t in range(trials):
        trial_seed = seed + t
        train_idx, test_idx = split_train_test(data.n_bags, test_fraction, trial_seed)
        train, test = data.subset(train_idx), data.subset(test_idx)
        trial_grid = (
            grid
            if grid is not None
            else default_grid(kind, train, seed=trial_seed, **(grid_options or {}))
        )
        t0 = time.perf_counter()
        search = grid_search_cv(train, kind, trial_grid, k=k, seed=trial_seed)
        t1 = time.perf_counter()
        model = fit_model(kind, train, search.best)
        t2 = time.perf_counter()
        predictions = predict_model(model, test)
        t3 = time.perf_counter()
        results.append(
            TrialResult(
                index=t,
                seed=trial_seed,
                metrics=_protocol_metrics(test.targets, predictions),
                chosen=search.best,
                timings={"grid_search": t1 - t0, "fit": t2 - t1, "predict": t3 - t2},
            )
        )
        logger.info(
            "%s trial %d: rmse=%.6g r2=%.6g chosen=%r", kind, t,
            results[-1].metrics.rmse, results[-1].metrics.r2, search.best,
        )
    return EvalReport(
        kind=kind,
        test_fraction=float(test_fraction),
        n_folds=int(k),
        base_seed=int(seed),
        trials=tuple(results),
    )


def _json_float(value: float):
    # NaN from a degenerate split serializes as null, keeping the JSON strict
    return value if np.isfinite(value) else None


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready view of a report. Wall-clock timings are deliberately left
    out so the serialized form is identical across reruns."""
    agg = report.aggregates()
    return {
        "kind": report.kind,
        "test_fraction": report.test_fraction,
        "n_folds": report.n_folds,
        "seed": report.base_seed,
        "trials": [
            {
                "trial": t.index,
                "seed": t.seed,
                "me": _json_float(t.metrics.me),
                "rmse": _json_float(t.metrics.rmse),
                "r2": _json_float(t.metrics.r2),
                "chosen": t.chosen,
            }
            for t in report.trials
        ],
        "aggregate": {
            "me_mean": _json_float(agg["me"][0]),
            "me_std": _json_float(agg["me"][1]),
            "rmse_mean": _json_float(agg["rmse"][0]),
            "rmse_std": _json_float(agg["rmse"][1]),
            "r2_mean": _json_float(agg["r2"][0]),
            "r2_std": _json_float(agg["r2"][1]),
        },
    }


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table, one row per model kind.

    ME is scaled by 1000 and RMSE by 100, as the column headers say.
    """
    header = ["Model", "ME x1000", "RMSE x100", "R2"]
    rows = [header]
    for report in reports:
        agg = report.aggregates()
        rows.append(
            [
                report.kind,
                f"{_fmt(agg['me'][0] * 1000)} ± {_fmt(agg['me'][1] * 1000)}",
                f"{_fmt(agg['rmse'][0] * 100)} ± {_fmt(agg['rmse'][1] * 100)}",
                f"{_fmt(agg['r2'][0])} ± {_fmt(agg['r2'][1])}",
            ]
        )
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    """Machine-readable comparison table; values carry full float precision."""
    lines = ["model,me_x1000_mean,me_x1000_std,rmse_x100_mean,rmse_x100_std,r2_mean,r2_std"]
    for report in reports:
        agg = report.aggregates()
        lines.append(
            ",".join(
                [report.kind]
                + [
                    repr(v)
                    for v in (
                        agg["me"][0] * 1000,
                        agg["me"][1] * 1000,
                        agg["rmse"][0] * 100,
                        agg["rmse"][1] * 100,
                        agg["r2"][0],
                        agg["r2"][1],
                    )
                ]
            )
        )
    return "\n".join(lines) + "\n"
