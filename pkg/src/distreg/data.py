"""Bag-structured datasets: CSV loading, feature normalization, multisource alignment.

A *bag* is a group of instance feature vectors that share one scalar target
(all pixels in a county, all readings at a site, ...). Supervision lives at
the bag level, so datasets here are collections of bags plus one target per
bag. All types are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Bag",
    "BagDataset",
    "DataFormatError",
    "MultiSourceDataset",
    "Normalizer",
    "align_sources",
    "apply_normalizer",
    "canonical_rows",
    "fit_normalizer",
    "load_bags",
    "pooled_instances",
    "save_bags",
]


class DataFormatError(ValueError):
    """An input file violates the bag CSV schema (message carries file/line/bag)."""


@dataclass(frozen=True)
class Bag:
    """One group of instances sharing a single target.

    ``instances`` is an (n, d) float matrix; rows are instance feature vectors.
    """

    id: str
    instances: np.ndarray

    def __post_init__(self) -> None:
        inst = np.asarray(self.instances, dtype=float)
        if inst.ndim != 2 or inst.shape[0] < 1 or inst.shape[1] < 1:
            raise ValueError(
                f"bag {self.id!r}: instances must be a non-empty 2-D matrix, "
                f"got shape {np.shape(self.instances)}"
            )
        if not np.all(np.isfinite(inst)):
            raise ValueError(f"bag {self.id!r}: instances contain non-finite values")
        object.__setattr__(self, "instances", inst)

    @property
    def n_instances(self) -> int:
        return self.instances.shape[0]

    @property
    def dim(self) -> int:
        return self.instances.shape[1]


@dataclass(frozen=True)
class Normalizer:
    """Per-feature affine transform: x -> (x - mean) / scale."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).ravel()
        scale = np.asarray(self.scale, dtype=float).ravel()
        if mean.shape != scale.shape:
            raise ValueError("normalizer mean and scale must have the same length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(scale))):
            raise ValueError("normalizer parameters must be finite")
        if np.any(scale <= 0):
            raise ValueError("normalizer scales must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class BagDataset:
    """Ordered collection of bags with aligned scalar targets.

    ``normalization`` records the transform that has been applied to the
    instances (None for raw data). Targets are never normalized.
    """

    bags: tuple[Bag, ...]
    targets: np.ndarray
    normalization: Normalizer | None = None

    def __post_init__(self) -> None:
        bags = tuple(self.bags)
        targets = np.asarray(self.targets, dtype=float).ravel()
        if len(bags) == 0:
            raise ValueError("a dataset needs at least one bag")
        if len(bags) != targets.shape[0]:
            raise ValueError(
                f"bag/target count mismatch: {len(bags)} bags, {targets.shape[0]} targets"
            )
        if not np.all(np.isfinite(targets)):
            raise ValueError("targets contain non-finite values")
        dims = {b.dim for b in bags}
        if len(dims) != 1:
            raise ValueError(f"all bags must share one feature dimension, got {sorted(dims)}")
        ids = [b.id for b in bags]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate bag ids in dataset")
        object.__setattr__(self, "bags", bags)
        object.__setattr__(self, "targets", targets)

    @property
    def n_bags(self) -> int:
        return len(self.bags)

    @property
    def dim(self) -> int:
        return self.bags[0].dim

    @property
    def bag_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.bags)

    def subset(self, indices: Sequence[int]) -> "BagDataset":
        """New dataset holding the given bags, in the given index order."""
        idx = np.asarray(indices, dtype=int)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("subset needs a non-empty 1-D index sequence")
        bags = tuple(self.bags[i] for i in idx)
        return BagDataset(bags, self.targets[idx], normalization=self.normalization)


@dataclass(frozen=True)
class MultiSourceDataset:
    """Aligned per-source views of the same bags, sharing one target vector.

    Every source holds the same bag ids in the same order; a bag may have a
    different instance count and feature dimension in each source.
    """

    sources: tuple[BagDataset, ...]

    def __post_init__(self) -> None:
        sources = tuple(self.sources)
        if len(sources) == 0:
            raise ValueError("a multisource dataset needs at least one source")
        first = sources[0]
        for f, src in enumerate(sources[1:], start=1):
            if src.bag_ids != first.bag_ids:
                raise ValueError(f"source {f} bag ids disagree with source 0")
            if not np.array_equal(src.targets, first.targets):
                raise ValueError(f"source {f} targets disagree with source 0")
        object.__setattr__(self, "sources", sources)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_bags(self) -> int:
        return self.sources[0].n_bags

    @property
    def bag_ids(self) -> tuple[str, ...]:
        return self.sources[0].bag_ids

    @property
    def targets(self) -> np.ndarray:
        return self.sources[0].targets

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.sources)

    @property
    def alignment(self) -> dict[str, int]:
        """Bag id -> bag index, identical across sources by construction."""
        return {bid: i for i, bid in enumerate(self.bag_ids)}

    def subset(self, indices: Sequence[int]) -> "MultiSourceDataset":
        return MultiSourceDataset(tuple(s.subset(indices) for s in self.sources))


def pooled_instances(data: BagDataset) -> np.ndarray:
    """All instances of all bags stacked into one (sum n_b, d) matrix."""
    return np.concatenate([b.instances for b in data.bags], axis=0)


def canonical_rows(x: np.ndarray) -> np.ndarray:
    """Rows of ``x`` in lexicographic order.

    A bag's instances are an unordered multiset; fixing one summation order
    before any reduction makes every downstream quantity exactly invariant to
    instance permutations instead of merely invariant up to round-off.
    """
    if x.shape[0] < 2:
        return x
    return x[np.lexsort(x.T[::-1])]


def fit_normalizer(train: BagDataset) -> Normalizer:
    """Per-feature mean/std over all instances pooled across the training bags.

    Uses the population standard deviation (divide by N). Features whose
    values are all identical get scale 1 and keep their exact constant as the
    mean, so they normalize to exactly 0. Statistics are accumulated in
    canonical row order, so they are exactly invariant to instance order.
    """
    pooled = canonical_rows(pooled_instances(train))
    constant = pooled.max(axis=0) == pooled.min(axis=0)
    mean = np.where(constant, pooled[0], pooled.mean(axis=0))
    std = pooled.std(axis=0)
    scale = np.where(constant | (std == 0.0), 1.0, std)
    return Normalizer(mean=mean, scale=scale)


def apply_normalizer(data: BagDataset, transform: Normalizer) -> BagDataset:
    """Normalized copy of ``data``: (x - mean) / scale per feature.

    Targets are unchanged. The transform is recorded on the returned dataset.
    """
    if transform.dim != data.dim:
        raise ValueError(
            f"normalizer dimension mismatch: transform has d={transform.dim}, "
            f"data has d={data.dim}"
        )
    bags = tuple(
        Bag(b.id, (b.instances - transform.mean) / transform.scale) for b in data.bags
    )
    return BagDataset(bags, data.targets, normalization=transform)


def align_sources(per_source: Sequence[BagDataset]) -> MultiSourceDataset:
    """Keep only bag ids present in every source, in the first source's order.

    Targets for a shared bag id must agree exactly across sources; any
    mismatch is a data error, not something to average away.
    """
    if len(per_source) == 0:
        raise ValueError("align_sources needs at least one source dataset")
    first = per_source[0]
    index_maps = [{bid: i for i, bid in enumerate(src.bag_ids)} for src in per_source]
    common = [bid for bid in first.bag_ids if all(bid in m for m in index_maps)]
    if not common:
        raise ValueError("no bag ids are shared by all sources (empty intersection)")
    for bid in common:
        ys = [src.targets[index_maps[f][bid]] for f, src in enumerate(per_source)]
        if any(y != ys[0] for y in ys[1:]):
            raise ValueError(
                f"conflicting targets for bag {bid!r} across sources: {ys}"
            )
    views = tuple(
        src.subset([index_maps[f][bid] for bid in common])
        for f, src in enumerate(per_source)
    )
    return MultiSourceDataset(views)


def _parse_float(value: str, path: Path, lineno: int, bag_id: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise DataFormatError(
            f"{path}:{lineno}: non-numeric value {value!r} for bag {bag_id!r}"
        ) from None


def load_bags(instances_path: str | Path, targets_path: str | Path | None = None) -> BagDataset:
    """Load a dataset from an instances CSV plus a targets CSV.

    Instances CSV: header ``bag_id,f1,...,fd``, one row per instance. Rows of
    one bag need not be contiguous; bag order follows the first appearance of
    each bag id. Targets CSV: header ``bag_id,y``, exactly one row per bag id
    appearing in the instances file (extra target rows are ignored).

    When ``targets_path`` is None (prediction-only workloads) every target is
    set to 0.0.
    """
    inst_path = Path(instances_path)
    with open(inst_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0] != "bag_id":
            raise DataFormatError(
                f"{inst_path}:1: expected header 'bag_id,f1,...,fd', got {header!r}"
            )
        dim = len(header) - 1
        order: list[str] = []
        rows: dict[str, list[list[float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            bag_id = row[0]
            if len(row) != dim + 1:
                raise DataFormatError(
                    f"{inst_path}:{lineno}: expected {dim + 1} fields, got {len(row)} "
                    f"(bag {bag_id!r})"
                )
            values = [_parse_float(v, inst_path, lineno, bag_id) for v in row[1:]]
            if bag_id not in rows:
                rows[bag_id] = []
                order.append(bag_id)
            rows[bag_id].append(values)
    if not order:
        raise DataFormatError(f"{inst_path}: no bags (file has no instance rows)")

    if targets_path is None:
        targets = {bid: 0.0 for bid in order}
    else:
        targets = _load_targets(Path(targets_path))
        for bid in order:
            if bid not in targets:
                raise DataFormatError(
                    f"{targets_path}: missing target for bag {bid!r}"
                )

    bags = tuple(Bag(bid, np.asarray(rows[bid], dtype=float)) for bid in order)
    y = np.asarray([targets[bid] for bid in order], dtype=float)
    return BagDataset(bags, y)


def _load_targets(path: Path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2 or header[0] != "bag_id":
            raise DataFormatError(
                f"{path}:1: expected header 'bag_id,y', got {header!r}"
            )
        targets: dict[str, float] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 2 fields, got {len(row)}"
                )
            bag_id = row[0]
            if bag_id in targets:
                raise DataFormatError(
                    f"{path}:{lineno}: duplicate target for bag {bag_id!r}"
                )
            targets[bag_id] = _parse_float(row[1], path, lineno, bag_id)
    return targets


def save_bags(
    data: BagDataset, instances_path: str | Path, targets_path: str | Path
) -> None:
    """Write a dataset back to the instances/targets CSV pair.

    Floats are written with ``repr`` so a load/save round trip reproduces the
    exact same values.
    """
    inst_path = Path(instances_path)
    with open(inst_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bag_id"] + [f"f{j + 1}" for j in range(data.dim)])
        for bag in data.bags:
            for row in bag.instances:
                writer.writerow([bag.id] + [repr(float(v)) for v in row])
    with open(targets_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bag_id", "y"])
        for bag, y in zip(data.bags, data.targets):
            writer.writerow([bag.id, repr(float(y))])
