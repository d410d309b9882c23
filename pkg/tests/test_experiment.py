from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from hinfraud.datagen import GenConfig, generate
from hinfraud.errors import ConfigInvalid
from hinfraud.experiment import ExperimentConfig, window_data
from hinfraud.metapath import downsized_paths
from hinfraud.seeds import child_seed

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_shipped_profile_matches_defaults():
    assert ExperimentConfig.from_file(CONFIGS / "desk_gen.yaml") == ExperimentConfig.from_file(None)


def test_component_seeds_follow_root():
    cfg = ExperimentConfig.from_dict({"seed": 7})
    assert cfg.generate.seed == 7 and cfg.classifier.seed == child_seed(7, "classifier")
    assert cfg.with_seed(7) == cfg.with_seed(8).with_seed(7)


def test_bad_keys_and_window():
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({"iterations": 3})
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({"window": 9})


def test_window_drops_future_rows():
    ds = generate(GenConfig(
        n_transactions=800, n_users=500, n_ips=60, n_billings=40, n_items=30, n_titles=8,
        n_countries=6, n_sources=4, n_currencies=3, n_account_types=2, seed=2,
    )).dataset
    paths = downsized_paths(ds.hin)
    wd = window_data(ds, paths, 7, 3)
    assert len(wd.rows) < ds.hin.n
    assert ds.timestamps[wd.rows].max() < np.sort(ds.timestamps)[-1]
    assert wd.timestamps[wd.train].max() < wd.timestamps[wd.test].min()
    assert all(p.matrix.shape[0] == len(wd.rows) for p in wd.paths)
    last = window_data(ds, paths, 7, 7)
    assert len(last.rows) == ds.hin.n and last.paths is paths
    labels = wd.label_state()
    assert np.all(labels.y[wd.test] == 0)
