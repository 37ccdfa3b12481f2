"""Panel container, CSV ingestion, demeaning, cross-section averages."""

import numpy as np
import pandas as pd
import pytest

from panelfx.errors import DimensionMismatch, DuplicateCell, LagTooLarge, ParseError, UnbalancedPanel
from panelfx.panel import DemeanMode, PanelData, cross_section_averages, demean, load_panel

from conftest import panel_from_arrays


def small_panel():
    y = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    x = np.arange(12, dtype=float).reshape(2, 3, 2)
    return panel_from_arrays(y, x, names=("a", "b"))


def test_panel_properties_and_flat():
    panel = small_panel()
    assert panel.n_units == 2 and panel.n_periods == 3 and panel.n_vars == 2
    x_flat, y_flat = panel.flat()
    assert y_flat.shape == (6,) and x_flat.shape == (6, 2)
    np.testing.assert_array_equal(y_flat[:3], panel.y[0])


def test_panel_rejects_mismatched_shapes():
    y = np.zeros((2, 3))
    with pytest.raises(DimensionMismatch):
        PanelData(unit_ids=(1, 2), time_ids=(1, 2, 3), y=y,
                  X=np.zeros((2, 4, 1)), var_names=("x1",))
    with pytest.raises(DimensionMismatch):
        PanelData(unit_ids=(1, 2), time_ids=(1, 2, 3), y=y,
                  X=np.zeros((2, 3, 2)), var_names=("x1",))


def test_panel_arrays_read_only():
    panel = small_panel()
    with pytest.raises(ValueError):
        panel.y[0, 0] = 99.0


def test_csv_roundtrip(tmp_path):
    panel = small_panel()
    path = tmp_path / "panel.csv"
    panel.to_frame().to_csv(path, index=False)
    loaded = load_panel(path, x=["a", "b"])
    np.testing.assert_allclose(loaded.y, panel.y)
    np.testing.assert_allclose(loaded.X, panel.X)
    assert loaded.var_names == ("a", "b")
    # default x: every non-id, non-outcome column
    loaded_auto = load_panel(path)
    assert loaded_auto.var_names == ("a", "b")


def test_load_panel_unbalanced(tmp_path):
    df = small_panel().to_frame().iloc[:-1]
    path = tmp_path / "short.csv"
    df.to_csv(path, index=False)
    with pytest.raises(UnbalancedPanel):
        load_panel(path)


def test_load_panel_duplicate_cell(tmp_path):
    df = small_panel().to_frame()
    df = pd.concat([df, df.iloc[[0]]], ignore_index=True)
    path = tmp_path / "dup.csv"
    df.to_csv(path, index=False)
    with pytest.raises(DuplicateCell):
        load_panel(path)


def test_load_panel_non_numeric(tmp_path):
    df = small_panel().to_frame()
    df["a"] = df["a"].astype(object)
    df.loc[0, "a"] = "oops"
    path = tmp_path / "bad.csv"
    df.to_csv(path, index=False)
    with pytest.raises(ParseError):
        load_panel(path)


def test_load_panel_missing_column(tmp_path):
    path = tmp_path / "cols.csv"
    small_panel().to_frame().to_csv(path, index=False)
    with pytest.raises(ParseError):
        load_panel(path, y="nope")


def test_demean_oracles(rng):
    y = rng.standard_normal((5, 4))
    x = rng.standard_normal((5, 4, 2))
    panel = panel_from_arrays(y, x)

    unit = demean(panel, DemeanMode.UNIT)
    np.testing.assert_allclose(unit.y, y - y.mean(axis=1, keepdims=True), atol=1e-12)

    time = demean(panel, DemeanMode.TIME)
    np.testing.assert_allclose(time.y, y - y.mean(axis=0, keepdims=True), atol=1e-12)

    two = demean(panel, DemeanMode.TWO_WAY)
    expected = y - y.mean(axis=1, keepdims=True) - y.mean(axis=0, keepdims=True) + y.mean()
    np.testing.assert_allclose(two.y, expected, atol=1e-12)
    np.testing.assert_allclose(
        two.X[:, :, 1],
        x[:, :, 1] - x[:, :, 1].mean(axis=1, keepdims=True)
        - x[:, :, 1].mean(axis=0, keepdims=True) + x[:, :, 1].mean(),
        atol=1e-12)

    none = demean(panel, DemeanMode.NONE)
    np.testing.assert_array_equal(none.y, y)


def test_csa_known_values():
    # ybar_t = (2, 4), xbar_t = (20, 40)
    y = np.array([[1.0, 3.0], [3.0, 5.0]])
    x = np.array([[[10.0], [30.0]], [[30.0], [50.0]]])
    panel = panel_from_arrays(y, x)
    w = cross_section_averages(panel)
    np.testing.assert_allclose(w, np.array([[2.0, 20.0], [4.0, 40.0]]))
    w_no_y = cross_section_averages(panel, include_y=False)
    np.testing.assert_allclose(w_no_y, np.array([[20.0], [40.0]]))


def test_csa_lags_backfill_and_trim():
    y = np.array([[1.0, 2.0, 3.0, 4.0], [3.0, 4.0, 5.0, 6.0]])
    x = np.zeros((2, 4, 1))
    panel = panel_from_arrays(y, x)
    w = cross_section_averages(panel, lags=2)
    assert w.shape == (4, 6)                      # 3 blocks x (ybar, xbar)
    ybar = np.array([2.0, 3.0, 4.0, 5.0])
    np.testing.assert_allclose(w[:, 0], ybar)
    np.testing.assert_allclose(w[:, 2], np.array([2.0, 2.0, 3.0, 4.0]))   # lag 1, backfilled
    np.testing.assert_allclose(w[:, 4], np.array([2.0, 2.0, 2.0, 3.0]))   # lag 2

    trimmed = cross_section_averages(panel, lags=1, boundary="trim")
    assert trimmed.shape == (3, 4)
    np.testing.assert_allclose(trimmed[:, 2], ybar[:3])

    with pytest.raises(LagTooLarge):
        cross_section_averages(panel, lags=4)
