"""Experiment configuration and per-window execution shared by the CLI and the acceptance suite.

A window keeps only its training spans and its test span. Later transactions
are dropped from the label vector and from every downsized path, so they can
neither leak labels nor act as meta-path neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .classify import ClassifierSpec
from .collective import CollectiveResult, LoopConfig, run_collective
from .data import Dataset, LabelState
from .datagen import GenConfig
from .errors import ConfigInvalid
from .evaluation import sliding_window_split
from .features import DEFAULT_ORACLE_CAP, FeatureOptions
from .metapath import DownsizedPath
from .seeds import child_seed

DEFAULT_SEED = 42


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = DEFAULT_SEED
    generate: GenConfig = field(default_factory=GenConfig)
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    max_iterations: int = 10
    early_stop_fraction: float = 0.001
    self_exclusion: bool = True
    soft_labels: bool = False
    window_count: int = 7
    window: int = 7
    sample_size: int = 1000
    alpha: float = 0.05
    bench_repeats: int = 5
    bench_warmup: int = 1
    oracle_cap: int | None = DEFAULT_ORACLE_CAP

    def __post_init__(self) -> None:
        if not 1 <= self.window <= self.window_count:
            raise ConfigInvalid(f"window must lie in [1, {self.window_count}], got {self.window}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d or {})
        seed = int(d.pop("seed", DEFAULT_SEED))
        gen = d.pop("generate", {}) or {}
        gen.setdefault("seed", seed)
        clf = d.pop("classifier", {}) or {}
        clf.setdefault("seed", child_seed(seed, "classifier"))
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise ConfigInvalid(f"unknown config keys {sorted(extra)}")
        return cls(seed=seed, generate=GenConfig.from_dict(gen), classifier=ClassifierSpec.from_dict(clf), **d)

    @classmethod
    def from_file(cls, path: str | Path | None) -> "ExperimentConfig":
        if path is None:
            return cls.from_dict({})
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigInvalid(f"{path}: top level must be a mapping")
        return cls.from_dict(data)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Re-root every component seed at ``seed``."""
        return replace(
            self,
            seed=seed,
            generate=replace(self.generate, seed=seed),
            classifier=replace(self.classifier, seed=child_seed(seed, "classifier")),
        )

    def loop_config(self, threads: int = 1) -> LoopConfig:
        return LoopConfig(
            max_iterations=self.max_iterations,
            early_stop_fraction=self.early_stop_fraction,
            classifier=self.classifier,
            features=FeatureOptions(self.self_exclusion, self.soft_labels),
            threads=threads,
        )


@dataclass
class WindowData:
    window: int
    rows: np.ndarray  # indices into the full dataset
    train: np.ndarray  # bool over ``rows``
    X: np.ndarray
    y_true: np.ndarray
    timestamps: np.ndarray
    paths: list[DownsizedPath]

    @property
    def test(self) -> np.ndarray:
        return ~self.train

    def label_state(self) -> LabelState:
        # test entries start at 0 and are overwritten by the baseline before any feature sees them
        return LabelState(np.where(self.train, self.y_true, 0), self.train, self.timestamps)


def restrict_paths(paths: list[DownsizedPath], rows: np.ndarray) -> list[DownsizedPath]:
    return [DownsizedPath(p.trace, p.matrix[rows].tocsr(), p.is_simple) for p in paths]


def window_data(ds: Dataset, paths: list[DownsizedPath], window_count: int, window: int) -> WindowData:
    splits = sliding_window_split(ds.timestamps, window_count)
    if not 1 <= window <= len(splits):
        raise ConfigInvalid(f"window must lie in [1, {len(splits)}], got {window}")
    train, test = splits[window - 1]
    rows = np.flatnonzero(train | test)
    sub = paths if len(rows) == len(train) else restrict_paths(paths, rows)
    return WindowData(window, rows, train[rows], ds.X[rows], ds.y_true[rows], ds.timestamps[rows], sub)


def run_window(wd: WindowData, config: LoopConfig) -> CollectiveResult:
    return run_collective(
        None, wd.X, wd.label_state(), config, y_true=wd.y_true, paths=wd.paths
    )
