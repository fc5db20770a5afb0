"""Command-line front end: experiments, synthetic data, MMD tests, fit/predict.

Subcommands: ``run``, ``synth``, ``mmd``, ``fit``, ``predict``. Outputs that
are machine-readable (report JSON, CSV tables, predictions, model files) are
byte-identical across reruns with the same inputs and seed; timings only ever
go to the log.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .data import (
    DataFormatError,
    MultiSourceDataset,
    align_sources,
    apply_normalizer,
    fit_normalizer,
    load_bags,
    save_bags,
)
from .evaluate import render_table, report_to_dict, reports_to_csv, run_protocol
from .kernels import (
    RbfParams,
    median_heuristic,
    median_heuristic_bags,
    mmd_permutation_test,
)
from .models import (
    IllConditionedError,
    MODEL_KINDS,
    SINGLE_SOURCE_KINDS,
    STACK_MODES,
    fit_model,
    load_model,
    predict_model,
    save_model,
    stack_multisource,
)
from .synth import (
    GALLERY_SCENARIOS,
    make_mean_task,
    make_multisource_task,
    make_two_sample_pair,
    make_variance_task,
)

logger = logging.getLogger("distreg.cli")

SYNTH_KINDS = ("variance-task", "mean-task", "multisource-task", "two-sample-gallery")


@dataclass
class ExperimentConfig:
    """Declarative description of one `run` invocation.

    Loaded from a JSON file; every CLI flag overrides its config key. A config
    plus its data files reproduces a run byte-for-byte.
    """

    instances: list[str]
    targets: str
    models: list[str]
    test_fraction: float = 0.25
    trials: int = 10
    folds: int = 5
    seed: int = 0
    out: str = "results"
    grid: dict | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValueError(f"config {path} must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"config {path}: unknown keys {sorted(unknown)}")
        for key in ("instances", "targets", "models"):
            if key not in raw:
                raise ValueError(f"config {path}: missing required key {key!r}")
        if isinstance(raw["instances"], str):
            raw["instances"] = [raw["instances"]]
        return cls(**raw)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_dataset(instance_paths: list[str], targets_path: str | None):
    datasets = [load_bags(p, targets_path) for p in instance_paths]
    if len(datasets) == 1:
        return datasets[0]
    return align_sources(datasets)


def _grid_options(config_grid: dict | None) -> dict | None:
    if not config_grid:
        return None
    allowed = {"lams", "sigma_scales", "n_features"}
    unknown = set(config_grid) - allowed
    if unknown:
        raise ValueError(f"grid override: unknown keys {sorted(unknown)} (allowed: {sorted(allowed)})")
    return dict(config_grid)


def cmd_run(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.test_fraction is not None:
        config.test_fraction = args.test_fraction
    if args.trials is not None:
        config.trials = args.trials
    if args.folds is not None:
        config.folds = args.folds
    if args.out is not None:
        config.out = args.out
    if args.model:
        config.models = list(args.model)

    for kind in config.models:
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    data = _load_dataset(config.instances, config.targets)
    multi = len(config.instances) > 1
    for kind in config.models:
        if multi and kind in SINGLE_SOURCE_KINDS:
            raise ValueError(
                f"model kind {kind!r} needs exactly one source, config lists "
                f"{len(config.instances)} instance files"
            )
        if not multi and kind not in SINGLE_SOURCE_KINDS:
            raise ValueError(f"model kind {kind!r} needs several sources")

    out_dir = Path(config.out)
    grid_options = _grid_options(config.grid)
    reports = []
    for kind in config.models:
        logger.info("running protocol for %s", kind)
        report = run_protocol(
            data,
            kind,
            test_fraction=config.test_fraction,
            trials=config.trials,
            k=config.folds,
            seed=config.seed,
            grid_options=grid_options,
        )
        reports.append(report)
        _write_text(
            out_dir / f"report_{kind}.json",
            json.dumps(report_to_dict(report), sort_keys=True, separators=(",", ":")) + "\n",
        )
    table = render_table(reports)
    _write_text(out_dir / "table.txt", table + "\n")
    _write_text(out_dir / "table.csv", reports_to_csv(reports))
    print(table)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "variance-task":
        data = make_variance_task(args.bags, args.bag_size, args.dim, args.seed)
        save_bags(data, out_dir / "instances.csv", out_dir / "targets.csv")
        print(f"wrote {out_dir / 'instances.csv'} and {out_dir / 'targets.csv'}")
    elif args.kind == "mean-task":
        data = make_mean_task(args.bags, args.bag_size, args.dim, args.noise, args.seed)
        save_bags(data, out_dir / "instances.csv", out_dir / "targets.csv")
        print(f"wrote {out_dir / 'instances.csv'} and {out_dir / 'targets.csv'}")
    elif args.kind == "multisource-task":
        data = make_multisource_task(args.bags, seed=args.seed)
        save_bags(data.sources[0], out_dir / "source1_instances.csv", out_dir / "targets.csv")
        save_bags(data.sources[1], out_dir / "source2_instances.csv", out_dir / "targets.csv")
        print(
            f"wrote {out_dir / 'source1_instances.csv'}, "
            f"{out_dir / 'source2_instances.csv'} and {out_dir / 'targets.csv'}"
        )
    else:
        for scenario in GALLERY_SCENARIOS:
            x, y = make_two_sample_pair(scenario, args.samples, args.seed)
            for name, sample in (("x", x), ("y", y)):
                path = out_dir / f"gallery_{scenario}_{name}.csv"
                _write_text(
                    path, "\n".join(",".join(repr(float(v)) for v in row) for row in sample) + "\n"
                )
        print(f"wrote gallery_[{'|'.join(GALLERY_SCENARIOS)}]_[x|y].csv under {out_dir}")
    return 0


def _load_sample(path: str) -> np.ndarray:
    try:
        sample = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError:
        raise
    except ValueError as exc:
        raise DataFormatError(f"{path}: not a headerless numeric CSV ({exc})") from exc
    if sample.size == 0:
        raise DataFormatError(f"{path}: empty sample")
    return sample


def cmd_mmd(args: argparse.Namespace) -> int:
    x = _load_sample(args.sample_x)
    y = _load_sample(args.sample_y)
    if x.shape[1] != y.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {args.sample_x} has d={x.shape[1]}, "
            f"{args.sample_y} has d={y.shape[1]}"
        )
    sigma = args.sigma if args.sigma is not None else median_heuristic(np.vstack([x, y]))
    result = mmd_permutation_test(
        x, y, RbfParams(sigma), n_permutations=args.permutations, seed=args.seed
    )
    print(f"sigma: {sigma!r}")
    print(f"mmd2: {result.statistic!r}")
    print(f"null_q95: {result.null_q95!r}")
    print(f"null_q99: {result.null_q99!r}")
    print(f"p_value: {result.p_value!r}")
    print(f"permutations: {result.n_permutations}")
    return 0


def _normalized_median(data) -> float:
    return median_heuristic_bags(apply_normalizer(data, fit_normalizer(data)))


def _hyper_from_args(args: argparse.Namespace, data, kind: str) -> dict:
    hyper: dict = {"lam": args.lam}
    if kind == "mdr":
        if args.sigmas:
            hyper["sigmas"] = [float(s) for s in args.sigmas.split(",")]
        else:
            hyper["sigmas"] = [_normalized_median(src) for src in data.sources]
    elif kind not in ("lr", "stacked-lr"):
        if args.sigma is not None:
            hyper["sigma"] = args.sigma
        elif kind in SINGLE_SOURCE_KINDS:
            hyper["sigma"] = _normalized_median(data)
        else:
            base = kind.split("-", 1)[1]
            normalized = MultiSourceDataset(
                tuple(apply_normalizer(s, fit_normalizer(s)) for s in data.sources)
            )
            hyper["sigma"] = median_heuristic_bags(
                stack_multisource(normalized, STACK_MODES[base])
            )
    if kind.endswith("rdr"):
        hyper["n_features"] = args.n_features
        hyper["rff_seed"] = args.seed
    return hyper


def cmd_fit(args: argparse.Namespace) -> int:
    data = _load_dataset(args.instances, args.targets)
    kind = args.model
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if (len(args.instances) > 1) != (kind not in SINGLE_SOURCE_KINDS):
        raise ValueError(
            f"model kind {kind!r} does not match {len(args.instances)} instance file(s)"
        )
    hyper = _hyper_from_args(args, data, kind)
    model = fit_model(kind, data, hyper)
    save_model(model, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model_file)
    data = _load_dataset(args.instances, None)
    predictions = predict_model(model, data)
    lines = ["bag_id,y_pred"]
    ids = data.bag_ids if hasattr(data, "bag_ids") else data.sources[0].bag_ids
    for bag_id, value in zip(ids, predictions):
        lines.append(f"{bag_id},{float(value)!r}")
    _write_text(Path(args.out), "\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distreg",
        description="Distribution regression over bags of feature vectors.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the evaluation protocol from a config file")
    p_run.add_argument("--config", required=True, help="JSON experiment config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--test-fraction", type=float, default=None)
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--folds", type=int, default=None)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument(
        "--model",
        action="append",
        default=None,
        metavar="KIND",
        help=f"model kind to run (repeatable); one of {', '.join(MODEL_KINDS)}",
    )
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="generate synthetic datasets")
    p_synth.add_argument("--kind", required=True, choices=SYNTH_KINDS)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--bags", type=int, default=120)
    p_synth.add_argument("--bag-size", type=int, default=50)
    p_synth.add_argument("--dim", type=int, default=3)
    p_synth.add_argument("--noise", type=float, default=0.0)
    p_synth.add_argument("--samples", type=int, default=2000, help="two-sample gallery size")
    p_synth.set_defaults(func=cmd_synth)

    p_mmd = sub.add_parser("mmd", help="two-sample permutation test on instance CSVs")
    p_mmd.add_argument("sample_x", help="headerless CSV of instances")
    p_mmd.add_argument("sample_y", help="headerless CSV of instances")
    p_mmd.add_argument("--sigma", type=float, default=None, help="RBF length-scale (default: median heuristic)")
    p_mmd.add_argument("--permutations", type=int, default=200)
    p_mmd.add_argument("--seed", type=int, default=0)
    p_mmd.set_defaults(func=cmd_mmd)

    p_fit = sub.add_parser("fit", help="fit one model and save it")
    p_fit.add_argument("--model", required=True, metavar="KIND")
    p_fit.add_argument("--instances", action="append", required=True, help="instances CSV (repeat per source)")
    p_fit.add_argument("--targets", required=True)
    p_fit.add_argument("--out", required=True, help="model file to write")
    p_fit.add_argument("--lam", type=float, default=1e-3)
    p_fit.add_argument("--sigma", type=float, default=None, help="default: median heuristic")
    p_fit.add_argument("--sigmas", default=None, help="comma-separated per-source sigmas (mdr)")
    p_fit.add_argument("--n-features", type=int, default=512)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="predict with a saved model")
    p_pred.add_argument("--model-file", required=True)
    p_pred.add_argument("--instances", action="append", required=True, help="instances CSV (repeat per source)")
    p_pred.add_argument("--out", required=True, help="predictions CSV to write")
    p_pred.set_defaults(func=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (OSError, ValueError, DataFormatError, IllConditionedError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
