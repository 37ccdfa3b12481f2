"""Balanced-panel container, CSV ingestion and standard transformations.

The panel is stored dense: an N x T outcome matrix and an N x T x K
regressor array, with unit and time labels kept alongside. Everything in
the package assumes a balanced panel, so balance is enforced once, here,
at construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    DimensionMismatch,
    DuplicateCell,
    LagTooLarge,
    ParseError,
    UnbalancedPanel,
)

__all__ = [
    "PanelData",
    "DemeanMode",
    "load_panel",
    "demean",
    "cross_section_averages",
]


class DemeanMode(str, enum.Enum):
    """Which additive effects to sweep out before estimation."""

    UNIT = "unit"
    TIME = "time"
    TWO_WAY = "two_way"
    NONE = "none"


def _time_key(label):
    # time labels sort numerically when they parse as numbers, else as text
    try:
        return (0, float(label))
    except (TypeError, ValueError):
        return (1, str(label))


@dataclass(frozen=True)
class PanelData:
    """Balanced panel with N units, T periods and K regressors.

    Arrays are copied on construction and marked read-only; transforms
    return new instances. ``X[i, t, k]`` is regressor ``var_names[k]``
    for unit ``unit_ids[i]`` in period ``time_ids[t]``.
    """

    unit_ids: tuple
    time_ids: tuple
    y: np.ndarray
    X: np.ndarray
    var_names: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "time_ids", tuple(self.time_ids))
        object.__setattr__(self, "var_names", tuple(str(v) for v in self.var_names))
        y = np.array(self.y, dtype=float)
        x = np.array(self.X, dtype=float)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", x)

        if y.ndim != 2:
            raise DimensionMismatch(f"y must be N x T, got shape {y.shape}")
        n, t = y.shape
        if x.shape != (n, t, len(self.var_names)):
            raise DimensionMismatch(
                f"X shape {x.shape} does not match (N, T, K) = ({n}, {t}, {len(self.var_names)})")
        if n < 2 or t < 2 or len(self.var_names) < 1:
            raise DimensionMismatch(f"need N >= 2, T >= 2, K >= 1, got N={n} T={t} K={len(self.var_names)}")
        if len(self.unit_ids) != n or len(self.time_ids) != t:
            raise DimensionMismatch("label lengths do not match array shapes")
        if len(set(self.unit_ids)) != n:
            raise DuplicateCell("unit identifiers are not unique")
        keys = [_time_key(v) for v in self.time_ids]
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise ParseError("time identifiers must be strictly increasing")
        if not (np.isfinite(y).all() and np.isfinite(x).all()):
            raise ParseError("panel contains non-finite values")
        y.setflags(write=False)
        x.setflags(write=False)

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_vars(self) -> int:
        return self.X.shape[2]

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """Pooled (NT x K, NT) views in unit-major order."""
        n, t, k = self.X.shape
        return self.X.reshape(n * t, k), self.y.reshape(n * t)

    def to_frame(self) -> pd.DataFrame:
        """Long-format frame with unit,time,y,<regressors> columns."""
        n, t, k = self.X.shape
        frame = pd.DataFrame({
            "unit": np.repeat(list(self.unit_ids), t),
            "time": np.tile(list(self.time_ids), n),
            "y": self.y.reshape(-1),
        })
        for j, name in enumerate(self.var_names):
            frame[name] = self.X[:, :, j].reshape(-1)
        return frame


def load_panel(path, unit: str = "unit", time: str = "time", y: str = "y",
               x: list[str] | None = None) -> PanelData:
    """Read a long-format CSV into a :class:`PanelData`.

    The file needs a header row with the named unit, time and outcome
    columns; ``x`` selects the regressor columns (default: every other
    column, in file order). Raises :class:`ParseError` for missing
    columns or non-numeric cells, :class:`DuplicateCell` for repeated
    (unit, time) pairs and :class:`UnbalancedPanel` when any unit misses
    a period.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"cannot read panel CSV {path!r}: {exc}") from exc

    for col in (unit, time, y):
        if col not in frame.columns:
            raise ParseError(f"column {col!r} not found in {path!r}")
    if x is None:
        x = [c for c in frame.columns if c not in (unit, time, y)]
    else:
        missing = [c for c in x if c not in frame.columns]
        if missing:
            raise ParseError(f"regressor columns {missing} not found in {path!r}")
    if not x:
        raise ParseError("panel needs at least one regressor column")

    numeric = {}
    for col in [y, *x]:
        converted = pd.to_numeric(frame[col], errors="coerce")
        bad = converted.isna() & frame[col].notna()
        if bad.any() or converted.isna().any():
            row = int(np.argmax((converted.isna()).to_numpy()))
            raise ParseError(f"column {col!r} row {row} does not parse as a finite number")
        numeric[col] = converted.to_numpy(dtype=float)

    units = frame[unit].to_numpy()
    times = frame[time].to_numpy()
    dup = frame.duplicated(subset=[unit, time])
    if dup.any():
        i = int(np.argmax(dup.to_numpy()))
        raise DuplicateCell(f"(unit={units[i]!r}, time={times[i]!r}) appears more than once")

    unit_levels = sorted(set(units.tolist()), key=_time_key)
    time_levels = sorted(set(times.tolist()), key=_time_key)
    n, t = len(unit_levels), len(time_levels)
    if len(frame) != n * t:
        raise UnbalancedPanel(
            f"{len(frame)} rows cannot form a balanced {n} x {t} panel")

    uidx = {u: i for i, u in enumerate(unit_levels)}
    tidx = {v: j for j, v in enumerate(time_levels)}
    rows = np.fromiter((uidx[u] for u in units), dtype=int, count=len(frame))
    cols = np.fromiter((tidx[v] for v in times), dtype=int, count=len(frame))

    filled = np.zeros((n, t), dtype=bool)
    filled[rows, cols] = True
    if not filled.all():
        i, j = np.argwhere(~filled)[0]
        raise UnbalancedPanel(f"missing cell (unit={unit_levels[i]!r}, time={time_levels[j]!r})")

    ymat = np.empty((n, t))
    ymat[rows, cols] = numeric[y]
    xarr = np.empty((n, t, len(x)))
    for k, col in enumerate(x):
        xarr[rows, cols, k] = numeric[col]
    return PanelData(unit_ids=unit_levels, time_ids=time_levels, y=ymat, X=xarr, var_names=x)


def demean(panel: PanelData, mode: DemeanMode | str) -> PanelData:
    """Sweep additive unit and/or time means out of y and every regressor."""
    mode = DemeanMode(mode)

    def transform(a: np.ndarray) -> np.ndarray:
        if mode is DemeanMode.NONE:
            return a.copy()
        if mode is DemeanMode.UNIT:
            return a - a.mean(axis=1, keepdims=True)
        if mode is DemeanMode.TIME:
            return a - a.mean(axis=0, keepdims=True)
        return (a - a.mean(axis=1, keepdims=True)
                - a.mean(axis=0, keepdims=True) + a.mean())

    newx = np.empty_like(panel.X)
    for k in range(panel.n_vars):
        newx[:, :, k] = transform(panel.X[:, :, k])
    return PanelData(unit_ids=panel.unit_ids, time_ids=panel.time_ids,
                     y=transform(panel.y), X=newx, var_names=panel.var_names)


def cross_section_averages(panel: PanelData, include_y: bool = True, lags: int = 0,
                           boundary: str = "backfill") -> np.ndarray:
    """Per-period cross-section averages, optionally with lagged blocks.

    Block ``j`` (j = 0..lags) holds the averages lagged ``j`` periods, in
    column order (ybar, xbar_1, .., xbar_K), or without ybar when
    ``include_y`` is false. With ``boundary="backfill"`` (default) lagged
    cells before the sample start repeat the first observed value and the
    output has T rows; ``boundary="trim"`` drops the first ``lags``
    periods instead.
    """
    if lags < 0:
        raise LagTooLarge("lag order must be non-negative")
    if lags >= panel.n_periods:
        raise LagTooLarge(f"lag order {lags} must be smaller than T = {panel.n_periods}")
    if boundary not in ("backfill", "trim"):
        raise ParseError(f"unknown boundary rule {boundary!r}")

    base = [panel.y.mean(axis=0)] if include_y else []
    base.extend(panel.X[:, :, k].mean(axis=0) for k in range(panel.n_vars))
    base = np.column_stack(base)  # T x (K [+1])

    blocks = [base]
    for j in range(1, lags + 1):
        shifted = np.empty_like(base)
        shifted[j:] = base[:-j]
        shifted[:j] = base[0]
        blocks.append(shifted)
    out = np.hstack(blocks)
    if boundary == "trim" and lags > 0:
        out = out[lags:]
    return out
