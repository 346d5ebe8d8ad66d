import numpy as np
import pytest
from scipy.stats import truncnorm

from drivestyle.datagen import (
    ArchetypeSpec,
    default_archetypes,
    generate_corpus,
    generate_run,
    load_archetypes,
    parent_location,
    save_archetypes,
)
from drivestyle.telemetry import Label, load_corpus, save_corpus

ROW1 = default_archetypes()[0]


class TestSpec:
    @pytest.mark.parametrize("field,value", [
        ("run_length", 0), ("run_length", -5), ("throttle_mean", 1.0), ("speed_var", 0.0),
        ("label", "unlabeled"), ("ar1", 1.0), ("speed_mean", -1.0),
    ])
    def test_invalid(self, field, value):
        kwargs = ROW1.to_dict()
        kwargs[field] = value
        with pytest.raises(ValueError):
            ArchetypeSpec(**kwargs)

    def test_bank(self):
        bank = default_archetypes()
        assert len(bank) == 18
        assert [s.label for s in bank].count(Label.AGGRESSIVE) == 9
        assert (ROW1.speed_mean, ROW1.throttle_mean) == (56.849, 0.566)

    def test_json_roundtrip(self, tmp_path):
        p = tmp_path / "a.json"
        save_archetypes(default_archetypes(100), p)
        assert load_archetypes(p) == default_archetypes(100)

    def test_json_unknown_field(self, tmp_path):
        p = tmp_path / "a.json"
        p.write_text('[{"label": "normal", "colour": 1}]')
        with pytest.raises(ValueError, match="archetype 0"):
            load_archetypes(p)


class TestGenerateRun:
    def test_row1_moments(self):
        run = generate_run(ROW1)
        assert len(run) == 5000
        assert abs(run.speed.mean() - 56.849) <= 1.0
        assert abs(run.throttle.mean() - 0.566) <= 0.03

    def test_bounds_and_timestamps(self):
        run = generate_run(ROW1)
        assert run.speed.min() >= 0 and 0 <= run.throttle.min() and run.throttle.max() <= 1
        np.testing.assert_allclose(np.diff(run.t), 0.02)

    def test_same_seed_identical(self):
        assert generate_run(ROW1) == generate_run(ROW1)

    def test_seed_matters(self):
        from dataclasses import replace
        assert generate_run(ROW1) != generate_run(replace(ROW1, seed=1))

    def test_parent_location_hits_truncated_mean(self):
        loc = parent_location(0.566, 0.131, 0.0, 1.0)
        sd = 0.131 ** 0.5
        assert truncnorm.mean(-loc / sd, (1 - loc) / sd, loc=loc, scale=sd) == pytest.approx(0.566, abs=1e-9)

    def test_ar1_keeps_marginal(self):
        from dataclasses import replace
        run = generate_run(replace(ROW1, ar1=0.9, run_length=20000))
        assert abs(run.speed.mean() - 56.849) < 2.0
        lag1 = np.corrcoef(run.speed[:-1], run.speed[1:])[0, 1]
        assert lag1 > 0.8

    @pytest.mark.parametrize("spec", default_archetypes(20000), ids=lambda s: s.name)
    def test_all_rows_mean_calibrated(self, spec):
        run = generate_run(spec)
        assert abs(run.speed.mean() - spec.speed_mean) < 0.6
        assert abs(run.throttle.mean() - spec.throttle_mean) < 0.01


class TestCorpus:
    def test_eighteen_runs(self):
        bank = default_archetypes(50)
        corpus = generate_corpus([bank[0], bank[9]], runs_per_archetype=9)
        assert len(corpus) == 18
        assert [r.label for r in corpus] == [Label.AGGRESSIVE] * 9 + [Label.NORMAL] * 9
        assert corpus[0].run_id == "agg01-r1"
        assert len({r.run_id for r in corpus}) == 18

    def test_deterministic(self):
        bank = default_archetypes(100)
        assert generate_corpus(bank, master_seed=5) == generate_corpus(bank, master_seed=5)
        assert generate_corpus(bank, master_seed=5) != generate_corpus(bank, master_seed=6)

    def test_byte_identical_files(self, tmp_path):
        bank = default_archetypes(100)
        for name in ("a.csv", "b.csv"):
            save_corpus(generate_corpus(bank, master_seed=2), tmp_path / name)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_file_roundtrip(self, tmp_path):
        corpus = generate_corpus(default_archetypes(40), master_seed=1)
        save_corpus(corpus, tmp_path / "c.csv")
        back = load_corpus(tmp_path / "c.csv")
        assert [r.run_id for r in back] == [r.run_id for r in corpus]

    @pytest.mark.parametrize("bad", [0, 1.5])
    def test_bad_runs_per(self, bad):
        with pytest.raises(ValueError):
            generate_corpus(default_archetypes(10), runs_per_archetype=bad)

    def test_empty(self):
        with pytest.raises(ValueError):
            generate_corpus([])
