import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivestyle.levels import LEVEL_ORDER, Bin, Level, ThresholdTable
from drivestyle.telemetry import Label

import oracles


@pytest.fixture(scope="module")
def table():
    return ThresholdTable.default()


@pytest.mark.parametrize("margin,expected", [
    (0.6, "3"), (-0.3, "-2"), (0.0, "0-"), (0.15, "1"),
    (0.02, "0+"), (0.0200001, "1"), (-0.02, "0-"), (-0.1, "-1"), (-0.1000001, "-2"),
    (0.2, "1"), (0.5, "2"), (-0.5, "-2"), (-0.5000001, "-3"), (5.0, "3"), (1e-300, "0+"),
])
def test_boundaries(table, margin, expected):
    assert table.level(margin).value == expected


def test_zero_margin_is_normal(table):
    assert table.level(0.0).binary_class is Label.NORMAL
    assert table.level(-0.0).value == "0-"


def test_vectorised_matches_scalar(table):
    margins = np.concatenate([np.linspace(-1, 1, 2001), [0.02, -0.02, 0.1, -0.1, 0.2, 0.5, -0.5]])
    assert table.levels(margins) == [table.level(float(m)) for m in margins]


@given(st.floats(-2, 2, allow_nan=False))
def test_matches_transcription(table, m):
    assert table.level(m).value == oracles.table_iv_level(m)


def test_nan_rejected(table):
    with pytest.raises(ValueError):
        table.level(math.nan)
    with pytest.raises(ValueError):
        table.levels([0.1, math.nan])


class TestLevel:
    def test_order_and_scores(self):
        assert [lvl.score for lvl in LEVEL_ORDER] == [-3, -2, -1, 0, 0, 1, 2, 3]

    def test_binary(self):
        assert Level.ZERO_POS.binary_class is Label.AGGRESSIVE
        assert Level.ZERO_NEG.binary_class is Label.NORMAL
        assert Level.NEG3.binary_class is Label.NORMAL

    def test_from_score(self):
        assert Level.from_score(0, positive=True) is Level.ZERO_POS
        assert Level.from_score(0) is Level.ZERO_NEG
        assert Level.from_score(-2) is Level.NEG2
        with pytest.raises(ValueError):
            Level.from_score(4)


class TestValidation:
    def test_gap_rejected(self):
        d = ThresholdTable.default()
        bins = list(d.aggressive_bins)
        bins[1] = Bin(0.03, 0.2, Level.POS1)
        with pytest.raises(ValueError, match="gap"):
            ThresholdTable(tuple(bins), d.normal_bins)

    def test_wrong_sign_rejected(self):
        d = ThresholdTable.default()
        with pytest.raises(ValueError, match="normal levels"):
            ThresholdTable(d.aggressive_bins, d.aggressive_bins)

    def test_must_reach_infinity(self):
        d = ThresholdTable.default()
        with pytest.raises(ValueError, match="infinity"):
            ThresholdTable(d.aggressive_bins[:-1], d.normal_bins)

    def test_roundtrip(self):
        d = ThresholdTable.default()
        assert ThresholdTable.from_dict(d.to_dict()) == d

    def test_from_dict_garbage(self):
        with pytest.raises(ValueError, match="invalid threshold"):
            ThresholdTable.from_dict({"aggressive": [[0, None, "7"]], "normal": []})
