import io
import json

import numpy as np
import pytest

from sqalab.errors import SqaLabError
from sqalab.experiment import (
    Split,
    TrainConfig,
    predict_by_id,
    read_fixed_split,
    render_split_tsv,
    render_trials_report_json,
    render_trials_report_tsv,
    run_trials,
    split_ids,
    thread_budget,
    train_model,
    trial_seed,
)
from sqalab.ratings import RepValSpec


def make_ids(n):
    return [f"s{i:04d}" for i in range(n)]


def toy_problem(rng, n=30, d=3):
    """Small realizable dataset keyed by id, with a fixed split."""
    features = {}
    targets = {}
    for sid in make_ids(n):
        m = rng.standard_normal((int(rng.integers(2, 6)), d))
        level = float(rng.uniform(1.0, 5.0))
        m[:, 0] = level
        features[sid] = m
        targets[sid] = level
    split = split_ids(sorted(features), (0.6, 0.2, 0.2), seed=0)
    return features, targets, split


def toy_config(**overrides):
    kwargs = dict(
        target_spec=RepValSpec(kind="mos"),
        learning_rate=0.05,
        max_epochs=15,
        patience=15,
        trials=2,
        seed=0,
    )
    kwargs.update(overrides)
    return TrainConfig(**kwargs)


class TestSplitIds:
    def test_sizes_and_disjointness(self):
        split = split_ids(make_ids(10), (0.6, 0.2, 0.2), seed=0)
        assert (len(split.train), len(split.validation), len(split.test)) == (6, 2, 2)
        pooled = set(split.train) | set(split.validation) | set(split.test)
        assert pooled == set(make_ids(10))

    def test_exact_benchmark_sizes(self):
        # rational fractions must land exactly on their integer sizes
        n = 20580
        fractions = (13580 / n, 3000 / n, 4000 / n)
        split = split_ids(make_ids(n), fractions, seed=1)
        assert len(split.train) == 13580
        assert len(split.validation) == 3000
        assert len(split.test) == 4000

    def test_seed_determinism(self):
        a = split_ids(make_ids(50), (0.8, 0.1, 0.1), seed=9)
        b = split_ids(make_ids(50), (0.8, 0.1, 0.1), seed=9)
        c = split_ids(make_ids(50), (0.8, 0.1, 0.1), seed=10)
        assert a == b
        assert a != c

    def test_input_order_irrelevant(self):
        ids = make_ids(12)
        a = split_ids(ids, (0.5, 0.25, 0.25), seed=3)
        b = split_ids(list(reversed(ids)), (0.5, 0.25, 0.25), seed=3)
        assert a == b

    def test_two_fractions_alias_test_to_validation(self):
        split = split_ids(make_ids(10), (0.8, 0.2), seed=0)
        assert split.test == split.validation
        assert len(split.train) == 8

    @pytest.mark.parametrize(
        "fractions",
        [(0.5, 0.5, 0.5), (0.6, 0.4, 0.0), (-0.2, 0.6, 0.6), (1.0,), (0.25, 0.25, 0.25, 0.25)],
    )
    def test_bad_fractions(self, fractions):
        with pytest.raises(SqaLabError) as ei:
            split_ids(make_ids(10), fractions, seed=0)
        assert ei.value.code == "split_format"

    def test_empty_partition_rejected(self):
        with pytest.raises(SqaLabError, match="empty"):
            split_ids(make_ids(3), (0.9, 0.05, 0.05), seed=0)

    def test_empty_ids_rejected(self):
        with pytest.raises(SqaLabError):
            split_ids([], (0.8, 0.2), seed=0)


class TestSplitContainer:
    def test_overlap_rejected(self):
        with pytest.raises(SqaLabError, match="more than one partition"):
            Split(train=("a", "b"), validation=("b",), test=("c",))

    def test_alias_allowed(self):
        split = Split(train=("a",), validation=("b",), test=("b",))
        assert split.test == split.validation

    def test_empty_rejected(self):
        with pytest.raises(SqaLabError):
            Split(train=(), validation=("a",), test=("b",))


class TestFixedSplit:
    def test_round_trip(self):
        split = split_ids(make_ids(10), (0.6, 0.2, 0.2), seed=4)
        text = render_split_tsv(split)
        back = read_fixed_split(io.StringIO(text))
        assert set(back.train) == set(split.train)
        assert set(back.validation) == set(split.validation)
        assert set(back.test) == set(split.test)

    def test_aliased_split_omits_test_rows(self):
        split = split_ids(make_ids(10), (0.8, 0.2), seed=0)
        text = render_split_tsv(split)
        assert "\ttest" not in text
        back = read_fixed_split(io.StringIO(text))
        assert back.test == back.validation

    def test_bad_header(self):
        with pytest.raises(SqaLabError, match="header"):
            read_fixed_split(io.StringIO("id\tsplit\na\ttrain\n"))

    def test_unknown_partition_names_line(self):
        text = "sample_id\tpartition\na\ttrain\nb\tdev\n"
        with pytest.raises(SqaLabError, match="line 3.*'dev'"):
            read_fixed_split(io.StringIO(text))

    def test_duplicate_id_rejected(self):
        text = "sample_id\tpartition\na\ttrain\na\tvalidation\n"
        with pytest.raises(SqaLabError, match="duplicate"):
            read_fixed_split(io.StringIO(text))


class TestTrialSeed:
    def test_deterministic_and_distinct(self):
        a = np.random.default_rng(trial_seed(0, 0)).integers(0, 1 << 30, 4)
        b = np.random.default_rng(trial_seed(0, 0)).integers(0, 1 << 30, 4)
        c = np.random.default_rng(trial_seed(0, 1)).integers(0, 1 << 30, 4)
        d = np.random.default_rng(trial_seed(1, 0)).integers(0, 1 << 30, 4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)


class TestTrainConfig:
    def test_validation_happens_at_construction(self):
        with pytest.raises(SqaLabError):
            TrainConfig(target_spec=RepValSpec(kind="mos"), trials=0)
        with pytest.raises(SqaLabError):
            TrainConfig(target_spec=RepValSpec(kind="mos"), learning_rate=0.0)

    def test_regressor_inherits_settings(self):
        cfg = toy_config(hidden_width=3, alpha=0.5)
        reg = cfg.make_regressor(11)
        assert reg.hidden_width == 3
        assert reg.alpha == 0.5
        assert reg.random_state == 11


class TestTrainModel:
    def test_trains_and_predicts(self):
        rng = np.random.default_rng(0)
        features, targets, split = toy_problem(rng)
        reg = train_model(features, targets, split, toy_config())
        preds = predict_by_id(reg, features, split.test)
        assert set(preds) == set(split.test)
        assert all(np.isfinite(v) for v in preds.values())

    def test_missing_ids_listed(self):
        rng = np.random.default_rng(1)
        features, targets, split = toy_problem(rng, n=20)
        for sid in list(split.train[:3]):
            del features[sid]
        with pytest.raises(SqaLabError, match="missing features or target") as ei:
            train_model(features, targets, split, toy_config())
        assert ei.value.code == "missing_data"
        for sid in sorted(split.train[:3]):
            assert sid in str(ei.value)

    def test_truncates_long_missing_list(self):
        rng = np.random.default_rng(2)
        features, targets, split = toy_problem(rng, n=40)
        gone = sorted(split.train)[:14]
        for sid in gone:
            del targets[sid]
        with pytest.raises(SqaLabError, match=r"\(\+4 more\)"):
            train_model(features, targets, split, toy_config())


class TestRunTrials:
    def test_deterministic_report(self):
        rng = np.random.default_rng(3)
        features, targets, split = toy_problem(rng)
        cfg = toy_config(trials=3)
        a = run_trials(features, targets, split, cfg)
        b = run_trials(features, targets, split, cfg)
        assert a.per_trial == b.per_trial
        assert render_trials_report_tsv(a) == render_trials_report_tsv(b)

    def test_threaded_matches_serial(self):
        rng = np.random.default_rng(4)
        features, targets, split = toy_problem(rng)
        cfg = toy_config(trials=3)
        serial = run_trials(features, targets, split, cfg, n_jobs=1)
        threaded = run_trials(features, targets, split, cfg, n_jobs=3)
        assert serial.per_trial == threaded.per_trial

    def test_identical_subseeds_give_zero_std(self, monkeypatch):
        rng = np.random.default_rng(5)
        features, targets, split = toy_problem(rng)
        monkeypatch.setattr(
            "sqalab.experiment.trial_seed",
            lambda seed, t: np.random.SeedSequence(entropy=seed, spawn_key=(0,)),
        )
        report = run_trials(features, targets, split, toy_config(trials=2))
        assert report.per_trial[0] == report.per_trial[1]
        for name in ("mse", "lcc", "srcc"):
            assert report.summaries[name].std == 0.0

    def test_single_trial_has_no_summaries(self):
        rng = np.random.default_rng(6)
        features, targets, split = toy_problem(rng)
        report = run_trials(features, targets, split, toy_config(trials=1))
        assert report.trials == 1
        assert report.summaries == {}
        text = render_trials_report_tsv(report)
        assert text.startswith("metric\tvalue\n")
        assert len(text.strip().split("\n")) == 4

    def test_multi_trial_report_shape(self):
        rng = np.random.default_rng(7)
        features, targets, split = toy_problem(rng)
        report = run_trials(features, targets, split, toy_config(trials=2))
        text = render_trials_report_tsv(report)
        lines = text.strip().split("\n")
        assert lines[0] == "metric\tmean\tstd"
        assert [ln.split("\t")[0] for ln in lines[1:]] == ["mse", "lcc", "srcc"]
        payload = json.loads(render_trials_report_json(report))
        assert payload["trials"] == 2
        assert set(payload["metrics"]) == {"mse", "lcc", "srcc"}
        assert len(payload["metrics"]["mse"]["values"]) == 2
        assert "mean" in payload["metrics"]["mse"]

    def test_bad_n_jobs(self):
        rng = np.random.default_rng(8)
        features, targets, split = toy_problem(rng)
        with pytest.raises(SqaLabError):
            run_trials(features, targets, split, toy_config(), n_jobs=0)


class TestThreadBudget:
    def test_default_when_unset(self, monkeypatch):
        monkeypatch.delenv("SQA_LAB_THREADS", raising=False)
        assert thread_budget() == 1
        assert thread_budget(default=4) == 4

    def test_reads_env(self, monkeypatch):
        monkeypatch.setenv("SQA_LAB_THREADS", "8")
        assert thread_budget() == 8

    def test_invalid_rejected(self, monkeypatch):
        monkeypatch.setenv("SQA_LAB_THREADS", "many")
        with pytest.raises(SqaLabError) as ei:
            thread_budget()
        assert ei.value.code == "train_config"
        monkeypatch.setenv("SQA_LAB_THREADS", "0")
        with pytest.raises(SqaLabError):
            thread_budget()
