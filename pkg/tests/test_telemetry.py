import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivestyle.datagen import default_archetypes, generate_run
from drivestyle.telemetry import (
    CorpusFormatError,
    DriverRun,
    Label,
    TelemetrySample,
    extract_features,
    load_corpus,
    read_corpus_metadata,
    save_corpus,
)

from conftest import random_run

HEADER = "run_id,label,t,speed,throttle\n"


def write(tmp_path, text, name="c.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestSample:
    def test_valid(self):
        s = TelemetrySample(0.0, 50.0, 0.3)
        assert (s.t, s.speed, s.throttle) == (0.0, 50.0, 0.3)

    @pytest.mark.parametrize("t,v,a", [(0, -1, 0.5), (0, 10, 1.3), (0, 10, -0.1), (-1, 10, 0.5),
                                       (0, float("nan"), 0.5)])
    def test_invariants(self, t, v, a):
        with pytest.raises(ValueError):
            TelemetrySample(t, v, a)


class TestDriverRun:
    def test_rejects_non_increasing_time(self):
        with pytest.raises(ValueError, match="strictly increase"):
            DriverRun("r", "normal", [0, 0.02, 0.02], [1, 2, 3], [0.1, 0.1, 0.1])

    def test_arrays_are_read_only(self, tiny_runs):
        with pytest.raises(ValueError):
            tiny_runs[0].speed[0] = 1.0

    def test_from_samples_roundtrip(self, tiny_runs):
        run = tiny_runs[0]
        again = DriverRun.from_samples(run.run_id, run.label, run.samples())
        assert again == run


class TestLoad:
    def test_minimal(self, tmp_path):
        p = write(tmp_path, HEADER + "r1,aggressive,0,50,0.3\nr1,aggressive,0.02,51,0.35\n")
        runs = load_corpus(p)
        assert len(runs) == 1
        assert runs[0].run_id == "r1" and runs[0].label is Label.AGGRESSIVE
        assert len(runs[0]) == 2

    def test_throttle_out_of_range_names_line(self, tmp_path):
        p = write(tmp_path, HEADER + "r1,normal,0,50,0.3\nr1,normal,0.02,50,1.3\n")
        with pytest.raises(CorpusFormatError, match="line 3") as exc:
            load_corpus(p)
        assert exc.value.line == 3

    @pytest.mark.parametrize("row,msg", [
        ("r1,normal,0.02,-4,0.3", "speed"),
        ("r1,normal,0.0,40,0.3", "does not increase"),
        ("r1,normal,0.02,40", "fields"),
        ("r1,normal,abc,40,0.3", "line 3"),
        ("r1,weird,0.02,40,0.3", "label"),
        ("r1,aggressive,0.02,40,0.3", "changes label"),
    ])
    def test_rejects_bad_rows(self, tmp_path, row, msg):
        p = write(tmp_path, HEADER + "r1,normal,0,50,0.3\n" + row + "\n")
        with pytest.raises(CorpusFormatError, match=msg):
            load_corpus(p)

    def test_non_contiguous_run(self, tmp_path):
        body = "a,normal,0,1,0.1\nb,normal,0,1,0.1\na,normal,1,1,0.1\n"
        with pytest.raises(CorpusFormatError, match="contiguous"):
            load_corpus(write(tmp_path, HEADER + body))

    def test_bad_header(self, tmp_path):
        with pytest.raises(CorpusFormatError, match="header"):
            load_corpus(write(tmp_path, "id,label,t,v,a\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_corpus(tmp_path / "nope.csv")

    def test_future_format_version(self, tmp_path):
        p = write(tmp_path, "# format_version=99\n" + HEADER)
        with pytest.raises(CorpusFormatError, match="format_version"):
            load_corpus(p)

    def test_unlabeled_allowed(self, tmp_path):
        runs = load_corpus(write(tmp_path, HEADER + "x,unlabeled,0,10,0.1\n"))
        assert runs[0].label is Label.UNLABELED


class TestSave:
    def test_empty_is_header_only(self, tmp_path):
        p = tmp_path / "e.csv"
        save_corpus([], p)
        assert p.read_text() == HEADER
        assert load_corpus(p) == []

    def test_single_sample_row(self, tmp_path):
        p = tmp_path / "one.csv"
        save_corpus([DriverRun("r", "normal", [0.0], [50.0], [0.3])], p)
        assert p.read_text().splitlines() == [
            HEADER.strip(), "r,normal,0.000000,50.000000,0.300000"]

    def test_metadata_line(self, tmp_path):
        p = tmp_path / "m.csv"
        save_corpus([], p, metadata={"tool_version": "x", "seed": 7})
        meta = read_corpus_metadata(p)
        assert meta["seed"] == "7" and meta["format_version"] == "1"
        assert load_corpus(p) == []

    def test_rejects_timestamps_collapsing_on_rounding(self, tmp_path):
        run = DriverRun("r", "normal", [0.0, 1e-8], [1.0, 1.0], [0.1, 0.1])
        with pytest.raises(ValueError, match="distinct"):
            save_corpus([run], tmp_path / "x.csv")

    def test_unwritable_path(self, tiny_runs, tmp_path):
        with pytest.raises(OSError):
            save_corpus(tiny_runs, tmp_path / "missing-dir" / "c.csv")

    def test_random_1000_sample_roundtrip(self, tmp_path):
        rng = np.random.default_rng(3)
        runs = [random_run(rng, f"r{i}", Label.NORMAL if i % 2 else Label.AGGRESSIVE, n=250)
                for i in range(4)]
        p = tmp_path / "c.csv"
        save_corpus(runs, p)
        back = load_corpus(p)
        assert [r.run_id for r in back] == [r.run_id for r in runs]
        for a, b in zip(runs, back):
            assert a.label is b.label
            for col in ("t", "speed", "throttle"):
                np.testing.assert_allclose(getattr(b, col), getattr(a, col), rtol=0, atol=5.1e-7)
        # a second pass is exact
        save_corpus(back, tmp_path / "c2.csv")
        assert load_corpus(tmp_path / "c2.csv") == back


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.001, 1.0), st.floats(0, 300), st.floats(0, 1)),
                min_size=1, max_size=40),
       st.sampled_from(list(Label)))
def test_roundtrip_property(tmp_path_factory, rows, label):
    t = np.cumsum([r[0] for r in rows])
    run = DriverRun("p", label, t, [r[1] for r in rows], [r[2] for r in rows])
    p = tmp_path_factory.mktemp("rt") / "c.csv"
    save_corpus([run], p)
    (back,) = load_corpus(p)
    assert back.label is label and len(back) == len(run)
    np.testing.assert_allclose(back.speed, run.speed, atol=5.1e-7, rtol=0)
    np.testing.assert_allclose(back.throttle, run.throttle, atol=5.1e-7, rtol=0)


class TestExtractFeatures:
    def test_order_and_shape(self, tiny_runs):
        X = extract_features(tiny_runs[0])
        assert X.shape == (3, 2)
        np.testing.assert_array_equal(X[:, 0], [70.0, 80.0, 75.0])
        np.testing.assert_array_equal(X[:, 1], [0.7, 0.9, 0.8])

    def test_single(self):
        X = extract_features(DriverRun("s", "normal", [0.0], [60.0], [0.5]))
        assert X.tolist() == [[60.0, 0.5]]

    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            extract_features(DriverRun("e", "normal", [], [], []))

    def test_matches_generator_moments(self):
        spec = default_archetypes()[9]
        X = extract_features(generate_run(spec))
        assert abs(X[:, 0].mean() - spec.speed_mean) < 1.0
        assert abs(X[:, 1].mean() - spec.throttle_mean) < 0.03
