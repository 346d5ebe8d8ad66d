import csv
import json
from collections import Counter

import numpy as np
import pytest

from drivestyle.bayes import StyleDecision
from drivestyle.evaluation import (
    CrrReport,
    compute_crr,
    cross_validate,
    crr_from_counts,
    format_table,
    level_counts,
    read_report,
    render_report,
    split_plan,
    stratified_folds,
)
from drivestyle.levels import Level
from drivestyle.telemetry import DriverRun, Label

SCORES = (-3, -2, -1, 0, 1, 2, 3)
AGG_ROW = (397, 204, 292, 1177, 332, 538, 3485)
NORM_ROW = (4458, 644, 626, 1062, 257, 554, 578)


def expand(counts, zero):
    out = []
    for score, n in zip(SCORES, counts):
        lvl = zero if score == 0 else Level.from_score(score)
        out.extend([StyleDecision(0.0, 0.0, lvl)] * n)
    return out


@pytest.fixture(scope="module")
def reports(small_corpus):
    return cross_validate(small_corpus, seed=0, threads=1)


class TestCrr:
    def test_aggressive_row(self):
        crr = compute_crr(expand(AGG_ROW, Level.ZERO_POS), "aggressive")
        assert crr == 5532 / 6425
        assert abs(crr - 0.861) <= 0.0005

    def test_normal_row(self):
        crr = compute_crr(expand(NORM_ROW, Level.ZERO_NEG), Label.NORMAL)
        assert crr == 6790 / 8179
        assert abs(crr - 0.830) <= 0.0005

    def test_perfect(self):
        assert compute_crr([StyleDecision(1, 0, Level.POS2)] * 5, "aggressive") == 1.0

    def test_empty_and_unlabeled(self):
        with pytest.raises(ValueError):
            compute_crr([], "normal")
        with pytest.raises(ValueError):
            compute_crr([StyleDecision(1, 0, Level.POS2)], "unlabeled")

    def test_counts_agree(self):
        dec = expand(AGG_ROW, Level.ZERO_POS)
        counts = level_counts(dec)
        assert list(counts) == ["-3", "-2", "-1", "0-", "0+", "1", "2", "3"]
        assert counts["0+"] == 1177 and counts["0-"] == 0
        assert crr_from_counts(counts, "aggressive") == compute_crr(dec, "aggressive")


class TestFolds:
    def test_two_per_fold(self, small_corpus):
        folds = stratified_folds(small_corpus, 9, seed=0)
        assert sorted(i for f in folds for i in f) == list(range(18))
        for f in folds:
            assert sorted(small_corpus[i].label.value for i in f) == ["aggressive", "normal"]

    def test_deterministic(self, small_corpus):
        assert stratified_folds(small_corpus, 9, 3) == stratified_folds(small_corpus, 9, 3)
        assert stratified_folds(small_corpus, 9, 3) != stratified_folds(small_corpus, 9, 4)

    def test_too_few_runs(self, small_corpus):
        with pytest.raises(ValueError, match="cannot fill"):
            stratified_folds(small_corpus[:5], 9, 0)

    def test_split_plan(self):
        assert split_plan(9, 5, False) == [([0, 1, 2, 3, 4], [5, 6, 7, 8])]
        plan = split_plan(9, 5, True)
        assert len(plan) == 9
        assert Counter(f for _, va in plan for f in va) == {f: 4 for f in range(9)}
        with pytest.raises(ValueError):
            split_plan(9, 9, False)


class TestCrossValidate:
    def test_shape(self, reports, small_corpus):
        proposed, fuzzy = reports
        assert len(proposed.runs) == len(fuzzy.runs) == 8
        assert len(proposed.crr_a) == 4 and len(proposed.crr_n) == 4
        fold_ids = proposed.metadata["fold_assignment"]
        valid = {rid for f in fold_ids[5:] for rid in f}
        assert {r.run_id for r in proposed.runs} == valid

    def test_no_training_leak(self, reports):
        proposed, _ = reports
        train_ids = {rid for f in proposed.metadata["fold_assignment"][:5] for rid in f}
        assert not train_ids & {r.run_id for r in proposed.runs}

    def test_deterministic_and_thread_independent(self, small_corpus, reports):
        again = cross_validate(small_corpus, seed=0, threads=3)
        for a, b in zip(reports, again):
            assert a.to_dict() == b.to_dict()

    def test_rotate_covers_each_run_four_times(self, small_corpus):
        proposed, _ = cross_validate(small_corpus, rotate=True, threads=1, keep_traces=False)
        assert Counter(r.run_id for r in proposed.runs) == {r.run_id: 4 for r in small_corpus}

    def test_duplicate_ids(self, small_corpus):
        dup = list(small_corpus)
        r = dup[1]
        dup[1] = DriverRun(dup[0].run_id, r.label, r.t, r.speed, r.throttle)
        with pytest.raises(ValueError, match="unique"):
            cross_validate(dup)

    def test_single_label(self, small_corpus):
        with pytest.raises(ValueError, match="both classes"):
            cross_validate(small_corpus[:9], folds=3, train_folds=2)

    def test_averages(self, reports):
        proposed, _ = reports
        assert proposed.average_crr_a == pytest.approx(np.mean(proposed.crr_a))


class TestRender:
    def test_table(self, reports):
        text = format_table(reports)
        assert "proposed" in text and "fuzzy" in text and "Average CRR_a" in text

    def test_files(self, reports, tmp_path):
        paths = render_report(reports, tmp_path / "out")
        back = read_report(paths["json"])
        assert [r.to_dict() for r in back] == [r.to_dict() for r in reports]
        blob = json.loads(open(paths["json"]).read())
        assert blob["deltas"]["average_crr_a"] == pytest.approx(
            reports[0].average_crr_a - reports[1].average_crr_a)
        assert blob["metadata"]["seed"] == 0

    def test_trace_matches_counts(self, reports, tmp_path):
        paths = render_report(reports, tmp_path)
        for rep in reports:
            with open(paths[f"trace_{rep.method}"]) as fh:
                assert fh.readline().startswith("# ")
                rows = list(csv.DictReader(fh))
            assert len(rows) == sum(r.n_samples for r in rep.runs)
            for run in rep.runs:
                seen = Counter(row["level"] for row in rows if row["run_id"] == run.run_id)
                assert {k: v for k, v in run.level_counts.items() if v} == dict(seen)
            if rep.method == "fuzzy":
                assert rows[0]["d_agg"] == ""

    def test_byte_identical(self, small_corpus, tmp_path):
        for name in ("a", "b"):
            render_report(cross_validate(small_corpus, threads=1), tmp_path / name)
        for f in ("report.json", "report.txt", "trace_proposed.csv", "trace_fuzzy.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_trace_requires_traces(self, small_corpus, tmp_path):
        reps = cross_validate(small_corpus, threads=1, keep_traces=False)
        with pytest.raises(ValueError, match="without a trace"):
            render_report(reps, tmp_path)
        render_report(reps, tmp_path / "x", traces=False)

    def test_malformed_report(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text('{"reports": [{"runs": []}]}')
        with pytest.raises(ValueError, match="malformed"):
            read_report(p)

    def test_empty(self, tmp_path):
        with pytest.raises(ValueError):
            render_report([], tmp_path)
        assert CrrReport("x", []).average_crr_a is None
