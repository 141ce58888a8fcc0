import dataclasses

import pytest

from sentcnn.cnn import ModelConfig, Pooling
from sentcnn.corpus import make_folds
from sentcnn.embeddings import SentenceEncoding
from sentcnn.optim import TrainConfig
from sentcnn.sweep import (
    SweepSpec,
    TrialResult,
    aggregate_path,
    aggregate_results,
    completed_pairs,
    expand_sweep,
    read_results,
    run_trials,
    write_results,
)
from tests.conftest import make_noisy_corpus


def base_spec(axis, values, reps=1):
    return SweepSpec(
        base_model=ModelConfig(num_classes=2, region_sizes=(2, 3), maps_per_region=2),
        base_train=TrainConfig(minibatch=10, max_epochs=3, patience=3, seed=5),
        input_repr="random",
        axis=axis,
        values=tuple(values),
        n_reps=reps,
        dataset_name="synthetic",
    )


def config_diff(a: ModelConfig, b: ModelConfig) -> set[str]:
    changed = set()
    for f in dataclasses.fields(ModelConfig):
        if getattr(a, f.name) != getattr(b, f.name):
            changed.add(f.name)
    return changed


class TestExpandSweep:
    def test_region_size_table_rows(self):
        spec = base_spec("region_size", ["1", "3", "5", "7", "10", "15", "20", "25", "30"])
        configs = expand_sweep(spec)
        assert len(configs) == 9
        assert configs[0].model.region_sizes == (1,)
        assert config_diff(configs[3].model, spec.base_model) == {"region_sizes"}

    def test_region_combo_duplicates(self):
        spec = base_spec("region_combo", ["(7,7,7,7)"])
        bound = expand_sweep(spec)[0]
        assert bound.model.region_sizes == (7, 7, 7, 7)
        assert bound.value == "(7,7,7,7)"

    def test_dropout_axis_with_none(self):
        values = ["0.0", "0.1", "0.3", "0.5", "0.7", "0.9", "none"]
        spec = base_spec("dropout_penult", values)
        configs = expand_sweep(spec)
        assert len(configs) == 7
        none_cfg = configs[-1].model
        assert none_cfg.dropout_penult == 0.0 and none_cfg.l2_constraint is None
        plain = configs[1].model
        assert plain.dropout_penult == 0.1 and plain.l2_constraint == 3.0

    def test_l2_axis_none_keeps_dropout(self):
        spec = base_spec("l2_constraint", ["1", "none"])
        configs = expand_sweep(spec)
        assert configs[0].model.l2_constraint == 1.0
        assert configs[1].model.l2_constraint is None
        assert configs[1].model.dropout_penult == spec.base_model.dropout_penult

    def test_feature_maps_and_activation(self):
        for axis, value, field in (
            ("feature_maps", "400", "maps_per_region"),
            ("activation", "tanh", "activation"),
        ):
            bound = expand_sweep(base_spec(axis, [value]))[0]
            assert config_diff(bound.model, base_spec(axis, [value]).base_model) == {field}

    def test_pooling_axis(self):
        spec = base_spec("pooling", ["one_max", "k_max:2", "local_max:3", "local_avg:3"])
        configs = expand_sweep(spec)
        assert [c.value for c in configs] == ["one_max", "k_max:2", "local_max:3", "local_avg:3"]
        assert configs[1].model.pooling == Pooling.k_max(2)

    def test_input_repr_axis(self):
        spec = base_spec("input_repr", ["random", "onehot"])
        configs = expand_sweep(spec)
        assert configs[0].input_repr == "random"
        assert configs[1].input_repr == "onehot"
        assert configs[1].model == spec.base_model

    def test_invalid_value_names_value(self):
        spec = base_spec("region_size", ["0"])
        with pytest.raises(ValueError, match="'0'"):
            expand_sweep(spec)

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            base_spec("learning_rate", ["0.1"])

    def test_float_values_canonicalised(self):
        spec = base_spec("dropout_penult", ["0.50"])
        assert expand_sweep(spec)[0].value == "0.5"


def make_rows():
    rows = []
    for value, rep_scores in (("3", [81.24, 80.69, 81.56]), ("5", [82.0, 83.0, 81.0])):
        for rep, score in enumerate(rep_scores):
            for fold in range(2):
                rows.append(
                    TrialResult(
                        dataset="synthetic", axis="region_size", value=value,
                        replication=rep, fold=fold, metric="accuracy",
                        score=score, seconds=0.5, seed=1000 + rep,
                    )
                )
    return rows


class TestResultsCsv:
    def test_round_trip_identical_records(self, tmp_path):
        path = tmp_path / "results.csv"
        rows = make_rows()
        write_results(rows, path)
        loaded = read_results(path)
        assert loaded == rows

    def test_reserialization_is_byte_stable(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results(make_rows(), p1)
        write_results(read_results(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_results_header_only(self, tmp_path):
        path = tmp_path / "results.csv"
        write_results([], path)
        assert path.read_text().strip() == "dataset,axis,value,replication,fold,metric,score,seconds,seed"
        agg = aggregate_path(path)
        assert agg.read_text().strip() == "value,mean,min,max"

    def test_aggregate_fixture_values(self, tmp_path):
        path = tmp_path / "results.csv"
        write_results(make_rows(), path)
        lines = aggregate_path(path).read_text().strip().splitlines()
        assert lines[1] == "3,81.1633,80.6900,81.5600"

    def test_value_with_commas_quoted(self, tmp_path):
        path = tmp_path / "results.csv"
        row = TrialResult("d", "region_combo", "(3,4,5)", 0, 0, "accuracy", 80.0, 0.1, 7)
        write_results([row], path)
        assert read_results(path)[0].value == "(3,4,5)"

    def test_aggregate_orders_by_first_appearance(self):
        rows = make_rows()[::-1]
        agg = aggregate_results(rows)
        assert [a.value for a in agg] == ["5", "3"]

    def test_completed_pairs_requires_all_folds(self):
        rows = make_rows()
        complete = completed_pairs(rows, k=2)
        assert ("region_size", "3", 0) in complete
        assert completed_pairs(rows[:1], k=2) == set()

    def test_duplicate_fold_rows_do_not_skew_aggregate(self):
        rows = make_rows()
        clean = aggregate_results(rows)
        torn = aggregate_results(rows + rows[:3])  # partial rewrite of rep 0
        assert [(a.value, a.mean, a.min, a.max) for a in clean] == [
            (a.value, a.mean, a.min, a.max) for a in torn
        ]


def run_small_sweep(tmp_path, values=("2", "3"), reps=2, jobs=1, path_name="results.csv"):
    ds = make_noisy_corpus()
    plan = make_folds(ds, 3, seed=1)
    spec = base_spec("region_size", values, reps)
    enc_cache = {}

    def encoding_for(input_repr, pad_to):
        assert input_repr == "random"
        return enc_cache.setdefault(pad_to, SentenceEncoding.random(6, pad_to, seed=2))

    path = tmp_path / path_name
    rows, failures = run_trials(
        expand_sweep(spec),
        reps,
        ds,
        plan,
        encoding_for,
        axis=spec.axis,
        dataset_name=spec.dataset_name,
        results_path=path,
        jobs=jobs,
    )
    return rows, failures, path


class TestRunTrials:
    def test_cardinality(self, tmp_path):
        rows, failures, path = run_small_sweep(tmp_path)
        assert not failures
        assert len(rows) == 2 * 2 * 3  # configs x reps x folds
        assert len(read_results(path)) == len(rows)

    def test_resume_skips_completed_and_keeps_prefix(self, tmp_path):
        rows1, _, path = run_small_sweep(tmp_path, reps=1)
        before = path.read_bytes()
        ds = make_noisy_corpus()
        plan = make_folds(ds, 3, seed=1)
        spec = base_spec("region_size", ("2", "3"), 2)

        def encoding_for(input_repr, pad_to):
            return SentenceEncoding.random(6, pad_to, seed=2)

        rows2, failures = run_trials(
            expand_sweep(spec), 2, ds, plan, encoding_for,
            axis=spec.axis, dataset_name=spec.dataset_name,
            results_path=path, jobs=1,
        )
        assert not failures
        after = path.read_bytes()
        assert after.startswith(before)  # byte-stable prefix
        all_rows = read_results(path)
        keys = [(r.value, r.replication, r.fold) for r in all_rows]
        assert len(keys) == len(set(keys))  # no duplicates
        assert len(all_rows) == 2 * 2 * 3

    def test_deterministic_scores_across_runs(self, tmp_path):
        rows1, _, _ = run_small_sweep(tmp_path, path_name="a.csv")
        rows2, _, _ = run_small_sweep(tmp_path, path_name="b.csv")
        assert [r.score for r in rows1] == [r.score for r in rows2]

    def test_parallel_matches_serial(self, tmp_path):
        rows1, _, _ = run_small_sweep(tmp_path, reps=1, jobs=1, path_name="serial.csv")
        rows2, _, _ = run_small_sweep(tmp_path, reps=1, jobs=2, path_name="parallel.csv")
        assert [r.score for r in rows1] == [r.score for r in rows2]

    def test_failures_recorded_and_run_continues(self, tmp_path):
        ds = make_noisy_corpus()
        plan = make_folds(ds, 3, seed=1)
        spec = base_spec("region_size", ("2",), 1)
        good = expand_sweep(spec)
        # k_max larger than the feature map of a full-height filter
        bad_model = dataclasses.replace(
            spec.base_model, region_sizes=(ds.max_len,), pooling=Pooling.k_max(50)
        )
        bad = dataclasses.replace(good[0], value="bad", model=bad_model)

        def encoding_for(input_repr, pad_to):
            return SentenceEncoding.random(6, pad_to, seed=2)

        rows, failures = run_trials(
            [bad] + good, 1, ds, plan, encoding_for,
            axis=spec.axis, dataset_name="synthetic",
            results_path=tmp_path / "r.csv", jobs=1,
        )
        assert len(failures) == 1 and "bad" in failures[0]
        assert {r.value for r in rows} == {"2"}
