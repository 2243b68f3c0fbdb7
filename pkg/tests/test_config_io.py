"""Config text format and the binary model container."""

import numpy as np
import pytest

from graphboost.boost import BoostConfig, fit
from graphboost.config import parse_config, load_config
from graphboost.appnp import AppnpConfig
from graphboost.data import fit_encoder, gen_synthetic, split_rows
from graphboost.errors import ConfigError, ModelFormatError
from graphboost.model_io import MAGIC, load_ensemble, save_ensemble


class TestConfigParse:
    def test_full_example(self):
        cfg = parse_config("""
            # cohort run
            data = cohort.csv
            label = outcome
            split_fractions = 0.7, 0.15, 0.15
            seed = 11
            workers = 2
            rounds = 5
            boost_learning_rate = 0.5
            hidden_dim = 32
            prop_steps = 5
            teleport = 0.3
            dropout = 0.1
            weak_learning_rate = 0.005
            weight_decay = 0.0001
            max_epochs = 50
            patience = 8
            expert_edges = age:5.0, bmi:2.5
            model_out = out.gbe
        """)
        assert cfg.data == "cohort.csv"
        assert cfg.label == "outcome"
        assert cfg.split_fractions == (0.7, 0.15, 0.15)
        assert cfg.expert_edges == (("age", 5.0), ("bmi", 2.5))
        assert cfg.scalar("rounds") == 5
        assert cfg.scalar("teleport") == 0.3

    def test_grids(self):
        cfg = parse_config("teleport = 0.1, 0.3\nhidden_dim = 16, 32, 64\n")
        assert cfg.teleport == (0.1, 0.3)
        assert cfg.grid_size() == 6
        points = list(cfg.grid_points())
        assert len(points) == 6
        assert points[0]["teleport"] == 0.1

    def test_grid_deduplication(self):
        cfg = parse_config("teleport = 0.1, 0.1, 0.3\n")
        assert cfg.grid_size() == 2
        assert len(list(cfg.grid_points())) == 2

    def test_scalar_accessor_rejects_grid(self):
        cfg = parse_config("teleport = 0.1, 0.3\n")
        with pytest.raises(ConfigError, match="single value"):
            cfg.scalar("teleport")

    def test_unknown_key_line_number(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("seed = 1\n\nbogus = 2\n")

    def test_bad_value_line_number(self):
        with pytest.raises(ConfigError, match="line 1.*rounds"):
            parse_config("rounds = three\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("just some words\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("seed = 1\nseed = 2\n")

    def test_bad_expert_edge(self):
        with pytest.raises(ConfigError, match="expert_edges"):
            parse_config("expert_edges = age\n")

    def test_split_fraction_arity(self):
        with pytest.raises(ConfigError, match="three values"):
            parse_config("split_fractions = 0.5, 0.5\n")

    def test_boost_config_assembly(self):
        cfg = parse_config("rounds = 4\nseed = 3\nhidden_dim = 16\n"
                           "max_epochs = 7\n")
        bc = cfg.boost_config()
        assert bc.n_rounds == 4
        assert bc.weak.hidden_dim == 16
        assert bc.weak.max_epochs == 7
        assert bc.seed == 3

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "nope.cfg"))

    def test_with_point_pins_scalars(self):
        cfg = parse_config("teleport = 0.1, 0.3\nrounds = 2, 4\n")
        point = next(cfg.grid_points())
        pinned = cfg.with_point(point)
        assert pinned.scalar("teleport") == 0.1
        assert pinned.scalar("rounds") == 2


@pytest.fixture(scope="module")
def small_ensemble():
    table, labels = gen_synthetic(240, 3, 2, 1.0, seed=21)
    tags = split_rows(240, (0.6, 0.2, 0.2), 21, labels)
    ds, _ = fit_encoder(table, labels, tags)
    cfg = BoostConfig(n_rounds=2, weak=AppnpConfig(
        hidden_dim=8, prop_steps=3, teleport=0.2, dropout=0.1,
        learning_rate=1e-2, max_epochs=20, patience=20), seed=21)
    return fit(cfg, ds)


class TestModelFile:
    def test_round_trip_preserves_everything(self, small_ensemble, tmp_path):
        path = tmp_path / "m.gbe"
        save_ensemble(small_ensemble, str(path))
        loaded = load_ensemble(str(path))
        assert loaded.n_classes == small_ensemble.n_classes
        assert loaded.feature_names == small_ensemble.feature_names
        assert loaded.encoder.to_dict() == small_ensemble.encoder.to_dict()
        np.testing.assert_array_equal(loaded.train_x, small_ensemble.train_x)
        assert len(loaded.rounds) == len(small_ensemble.rounds)
        for a, b in zip(loaded.rounds, small_ensemble.rounds):
            assert (a.feature, a.gamma, a.alpha, a.error) == \
                (b.feature, b.gamma, b.alpha, b.error)
            np.testing.assert_array_equal(a.model.w1, b.model.w1)
            np.testing.assert_array_equal(a.model.b2, b.model.b2)
            assert a.model.config == b.model.config

    def test_load_save_byte_identical(self, small_ensemble, tmp_path):
        p1, p2 = tmp_path / "a.gbe", tmp_path / "b.gbe"
        save_ensemble(small_ensemble, str(p1))
        save_ensemble(load_ensemble(str(p1)), str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.gbe"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ModelFormatError, match="bad magic"):
            load_ensemble(str(path))

    def test_wrong_version(self, small_ensemble, tmp_path):
        path = tmp_path / "m.gbe"
        save_ensemble(small_ensemble, str(path))
        blob = bytearray(path.read_bytes())
        blob[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError, match="version 99"):
            load_ensemble(str(path))

    def test_truncated(self, small_ensemble, tmp_path):
        path = tmp_path / "m.gbe"
        save_ensemble(small_ensemble, str(path))
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(ModelFormatError, match="truncated"):
            load_ensemble(str(path))

    def test_trailing_bytes(self, small_ensemble, tmp_path):
        path = tmp_path / "m.gbe"
        save_ensemble(small_ensemble, str(path))
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ModelFormatError, match="trailing"):
            load_ensemble(str(path))

    def test_magic_constant(self):
        assert MAGIC == b"GBEN"
