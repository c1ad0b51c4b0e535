import numpy as np
import pytest

from dp_la.data import (
    ColumnKind,
    Dataset,
    TabularSchema,
    dataset_from_csv,
    dataset_to_csv,
    four_way_split,
    load_csv,
    preprocess,
    synth_generate,
    write_raw_csv,
)
from dp_la.model import TrainConfig, accuracy, predict, train


def schema_age_region_result():
    return TabularSchema(
        columns=(
            ("age", ColumnKind.NUMERIC),
            ("region", ColumnKind.CATEGORICAL),
            ("result", ColumnKind.TARGET),
        ),
        positive_labels=frozenset({"pass"}),
    )


class TestSchema:
    def test_requires_exactly_one_target(self):
        with pytest.raises(ValueError, match="target"):
            TabularSchema(columns=(("a", ColumnKind.NUMERIC),), positive_labels=frozenset({"x"}))

    def test_requires_positive_labels(self):
        with pytest.raises(ValueError, match="positive_labels"):
            TabularSchema(columns=(("t", ColumnKind.TARGET),), positive_labels=frozenset())

    def test_json_round_trip(self, tmp_path):
        schema = schema_age_region_result()
        schema.to_json(tmp_path / "schema.json")
        assert TabularSchema.from_json(tmp_path / "schema.json") == schema


class TestLoadCsv:
    def test_three_row_ingestion(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("age,region,result\n30,east,pass\n40,west,fail\n50,east,pass\n")
        raw = load_csv(p, schema_age_region_result())
        assert raw.n_rows == 3
        assert raw.numeric["age"].tolist() == [30.0, 40.0, 50.0]
        assert raw.categorical["region"] == ["east", "west", "east"]

    def test_missing_column_names_it(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("age,region\n30,east\n")
        with pytest.raises(ValueError, match="'result'"):
            load_csv(p, schema_age_region_result())

    def test_unparsable_numeric_cites_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("age,region,result\n30,east,pass\nN/A,west,fail\n")
        with pytest.raises(ValueError, match="row 2"):
            load_csv(p, schema_age_region_result())

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_csv(p, schema_age_region_result())


class TestPreprocess:
    def test_minmax_scaling(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("age,region,result\n10,east,pass\n20,east,fail\n30,east,pass\n")
        ds = preprocess(load_csv(p, schema_age_region_result()), schema_age_region_result())
        assert ds.features[:, 0].tolist() == [0.0, 0.5, 1.0]
        assert ds.normalization_bounds["age"] == (10.0, 30.0)

    def test_one_hot_encoding_sorted_categories(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("age,region,result\n1,B,pass\n2,A,fail\n")
        ds = preprocess(load_csv(p, schema_age_region_result()), schema_age_region_result())
        assert ds.feature_names == ("age", "region=A", "region=B")
        assert ds.features[0, 1:].tolist() == [0.0, 1.0]
        assert ds.features[1, 1:].tolist() == [1.0, 0.0]

    def test_binary_target_mapping(self, tmp_path):
        schema = TabularSchema(
            columns=(("score", ColumnKind.NUMERIC), ("final_result", ColumnKind.TARGET)),
            positive_labels=frozenset({"Distinction", "Pass"}),
        )
        p = tmp_path / "d.csv"
        p.write_text(
            "score,final_result\n1,Distinction\n2,Pass\n3,Fail\n4,Withdrawn\n"
        )
        ds = preprocess(load_csv(p, schema), schema)
        assert ds.labels.tolist() == [1, 1, 0, 0]

    def test_constant_column_maps_to_zero(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("age,region,result\n5,east,pass\n5,east,fail\n")
        ds = preprocess(load_csv(p, schema_age_region_result()), schema_age_region_result())
        assert ds.features[:, 0].tolist() == [0.0, 0.0]

    def test_one_hot_blocks_sum_to_one_each_row(self):
        raw, schema = synth_generate(300, 2, 3, 1.0, seed=5)
        ds = preprocess(raw, schema)
        for j in range(3):
            cols = [i for i, n in enumerate(ds.feature_names) if n.startswith(f"c{j}=")]
            np.testing.assert_array_equal(ds.features[:, cols].sum(axis=1), np.ones(300))

    def test_rescaling_unit_interval_with_unit_bounds_is_identity(self):
        raw, schema = synth_generate(200, 3, 0, 1.0, seed=5)
        ds = preprocess(raw, schema)
        col = ds.features[:, 0]
        rescaled = (col - 0.0) / (1.0 - 0.0)
        np.testing.assert_array_equal(rescaled, col)


class TestFourWaySplit:
    def build(self, n, seed=0):
        labels = np.arange(n) % 2
        features = np.linspace(0, 1, n)[:, None]
        return Dataset(features, labels, ("x",), {})

    def test_even_quarters(self):
        split = four_way_split(self.build(100), seed=1)
        sizes = [len(v) for v in split.parts().values()]
        assert sizes == [25, 25, 25, 25]

    def test_odd_remainder_policy(self):
        split = four_way_split(self.build(101), seed=1)
        victim = len(split.victim_train) + len(split.victim_test)
        attack = len(split.attack_train) + len(split.attack_test)
        assert (victim, attack) == (51, 50)
        assert len(split.victim_train) == 26  # train over test
        assert len(split.victim_test) == 25

    def test_deterministic(self):
        ds = self.build(64)
        a, b = four_way_split(ds, seed=9), four_way_split(ds, seed=9)
        for pa, pb in zip(a.parts().values(), b.parts().values()):
            np.testing.assert_array_equal(pa, pb)

    def test_disjoint_and_covering(self):
        ds = self.build(97)
        split = four_way_split(ds, seed=3)
        parts = list(split.parts().values())
        combined = np.concatenate(parts)
        assert len(set(combined.tolist())) == 97 == len(combined)

    def test_stratification_within_two_points(self):
        rng = np.random.default_rng(0)
        labels = (rng.random(500) < 0.3).astype(int)
        ds = Dataset(np.zeros((500, 1)), labels, ("x",), {})
        split = four_way_split(ds, seed=4)
        global_rate = labels.mean()
        for part in split.parts().values():
            assert abs(labels[part].mean() - global_rate) <= 0.02

    def test_too_small_errors(self):
        with pytest.raises(ValueError):
            four_way_split(self.build(7), seed=0)
        one_class = Dataset(np.zeros((20, 1)), np.zeros(20, dtype=int), ("x",), {})
        with pytest.raises(ValueError, match="each class"):
            four_way_split(one_class, seed=0)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            four_way_split(self.build(100), seed=0, inner_train_fraction=1.0)


class TestSynthGenerate:
    def test_baseline_learnability_oracle(self):
        raw, schema = synth_generate(1000, 5, 2, 2.0, seed=7)
        ds = preprocess(raw, schema)
        split = four_way_split(ds, seed=0)
        model = train(ds.features[split.victim_train], ds.labels[split.victim_train], TrainConfig())
        acc = accuracy(predict(model, ds.features[split.victim_test]), ds.labels[split.victim_test])
        assert acc > 0.85

    def test_zero_separation_is_chance_level(self):
        raw, schema = synth_generate(1000, 5, 2, 0.0, seed=7)
        ds = preprocess(raw, schema)
        split = four_way_split(ds, seed=0)
        model = train(ds.features[split.victim_train], ds.labels[split.victim_train], TrainConfig())
        acc = accuracy(predict(model, ds.features[split.victim_test]), ds.labels[split.victim_test])
        assert acc == pytest.approx(0.5, abs=0.06)

    def test_byte_identical_emission(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            raw, schema = synth_generate(100, 3, 1, 1.5, seed=9)
            write_raw_csv(raw, schema, tmp_path / name)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_balanced_target(self):
        raw, _ = synth_generate(500, 2, 0, 1.0, seed=1)
        assert raw.target.count("pos") == 250

    @pytest.mark.parametrize("kwargs", [dict(n=4), dict(d_numeric=0), dict(d_categorical=-1)])
    def test_rejects_degenerate_dimensions(self, kwargs):
        args = dict(n=100, d_numeric=2, d_categorical=1, class_separation=1.0, seed=0)
        args.update(kwargs)
        with pytest.raises(ValueError):
            synth_generate(**args)


def test_dataset_csv_round_trip(tmp_path):
    raw, schema = synth_generate(150, 4, 2, 1.0, seed=3)
    ds = preprocess(raw, schema)
    path = tmp_path / "matrix.csv"
    dataset_to_csv(ds, path)
    back = dataset_from_csv(path)
    np.testing.assert_allclose(back.features, ds.features, atol=1e-12, rtol=0)
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert back.feature_names == ds.feature_names
