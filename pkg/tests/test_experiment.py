import numpy as np
import pytest

from tennet.data import gen_synthetic
from tennet.errors import ValidationError
from tennet.experiment import (DEFAULT_ARCH, build_model, cell_name, holdout_split, parse_cell, prepare_splits,
                               run_regression)
from tennet.training import TrainingConfig


class TestCellNames:
    def test_format(self):
        assert cell_name(4, 5) == "04m05"
        assert cell_name(3, 20) == "03m20"
        assert cell_name(32, 50) == "32m50"

    def test_parse_round_trip(self):
        assert parse_cell(cell_name(8, 10)) == (8, 10)

    def test_parse_rejects(self):
        with pytest.raises(ValidationError):
            parse_cell("4x5")


class TestBuildModel:
    def test_defaults(self):
        tnn = build_model("tnn", 8, rng=0)
        assert len(tnn.subnetworks) == 8 and tnn.rank == 5
        assert tnn.subnetworks[0][0].hidden_widths == (5, 5, 5)
        assert build_model("ffn", 8, rng=0).arch.hidden_widths == (40,) * 4
        assert build_model("rbn", 8, rng=0).centers.shape == (80, 8)
        assert set(DEFAULT_ARCH) == {"tnn", "ffn", "rbn"}

    def test_tnn_rank_is_width(self):
        m = build_model("tnn", 2, 3, 20, rng=0)
        assert m.rank == 20 and m.subnetworks[1][0].widths == (1, 20, 20, 20, 20)

    def test_errors(self):
        with pytest.raises(ValidationError):
            build_model("gp", 2)
        with pytest.raises(ValidationError):
            build_model("tnn", 2, 0, 3)


class TestSplits:
    def test_holdout(self):
        raw = gen_synthetic("sum_sines", 1030, seed=0)
        tr, te = holdout_split(raw, 800, seed=1)
        assert (tr.n, te.n) == (800, 230)
        both = np.vstack([tr.X, te.X])
        assert np.unique(both, axis=0).shape[0] == 1030
        with pytest.raises(ValidationError):
            holdout_split(raw, 1030, seed=1)

    def test_prepare(self):
        raw = gen_synthetic("prod_exp", 1000, seed=0)
        sp = prepare_splits(raw, seed=3, n_test=200)
        assert {k: v.n for k, v in sp.raw.items()} == {"test": 200, "train": 720, "val": 80}
        tr = sp.normalized["train"]
        assert tr.x.min() == 0.0 and tr.x.max() == 1.0
        assert abs(tr.y.mean()) < 1e-12
        np.testing.assert_array_equal(sp.norm.x_min, sp.raw["train"].X.min(axis=0))
        assert all(d.norm is sp.norm for d in sp.normalized.values())

    def test_prepare_deterministic(self):
        raw = gen_synthetic("prod_exp", 100, seed=0)
        a, b = prepare_splits(raw, 5, n_test=20), prepare_splits(raw, 5, n_test=20)
        for k in a.raw:
            np.testing.assert_array_equal(a.raw[k].X, b.raw[k].X)


class TestRunRegression:
    def test_small_run(self):
        raw = gen_synthetic("prod_exp", 120, seed=0, dim=2)
        r = run_regression(raw, "tnn", 1, 3, seed=2, config=TrainingConfig(max_epochs=30), n_train=100)
        assert r.history.epochs == 30 and r.seed == 2
        assert r.val_mse == pytest.approx(r.history.best_val_mse, rel=1e-12)
        assert r.train_mse == pytest.approx(r.history.best_train_mse, rel=1e-12)
        assert r.test_mse > 0

    def test_seed_overrides_config(self):
        raw = gen_synthetic("prod_exp", 60, seed=0, dim=2)
        cfg = TrainingConfig(max_epochs=5, seed=99)
        a = run_regression(raw, "ffn", 1, 3, seed=1, config=cfg, n_train=50)
        b = run_regression(raw, "ffn", 1, 3, seed=1, config=TrainingConfig(max_epochs=5), n_train=50)
        assert a.history.train_mse == b.history.train_mse

    def test_without_holdout(self):
        raw = gen_synthetic("prod_exp", 50, seed=0, dim=2)
        r = run_regression(raw, "tnn", 1, 2, seed=0, config=TrainingConfig(max_epochs=3), n_train=50)
        assert np.isnan(r.test_mse) and np.isfinite(r.val_mse)
        with pytest.raises(ValidationError):
            run_regression(raw, "tnn", 1, 2, seed=0, config=TrainingConfig(max_epochs=3), n_train=51)
