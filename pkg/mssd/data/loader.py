"""
CSV ingestion.

Layout: optional header row, optional leading ISO-8601 timestamp column,
every remaining column one numeric variable.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from mssd.core.errors import IngestionError
from mssd.data.frame import SeriesFrame, check_spacing

logger = logging.getLogger(__name__)

FILL_POLICIES = ("reject", "forward-fill")
AUTO = "auto"


def _looks_like_timestamps(column: pd.Series) -> bool:
    cells = column[column.str.strip() != ""]
    if cells.empty or pd.to_numeric(cells, errors="coerce").notna().all():
        return False
    parsed = pd.to_datetime(cells, errors="coerce", format="ISO8601")
    return bool(parsed.notna().all())


def _parse_timestamps(column: pd.Series) -> pd.DatetimeIndex:
    parsed = pd.to_datetime(column, errors="coerce", format="ISO8601")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if bad.size:
        raise IngestionError(f"unparseable timestamp {column.iloc[bad[0]]!r}", row=int(bad[0]), column=str(column.name))
    if getattr(parsed.dt, "tz", None) is not None:
        parsed = parsed.dt.tz_convert(None)
    return pd.DatetimeIndex(parsed)


def _infer_samples_per_hour(stamps: pd.DatetimeIndex) -> int:
    if len(stamps) < 2:
        return 1
    spacing = pd.Series(stamps).diff().dropna().median()
    if spacing <= pd.Timedelta(0):
        raise IngestionError("cannot infer sampling rate from non-increasing timestamps", column="timestamp")
    ratio = pd.Timedelta(hours=1) / spacing
    if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise IngestionError(f"sampling interval {spacing} is not an integer fraction of an hour", column="timestamp")
    return int(round(ratio))


def _numeric(df: pd.DataFrame) -> pd.DataFrame:
    out = {}
    for name in df.columns:
        raw = df[name].str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = np.flatnonzero((values.isna() & (raw != "")).to_numpy())
        if bad.size:
            row = int(bad[0])
            raise IngestionError(f"unparseable cell {df[name].iloc[row]!r}", row=row, column=str(name))
        out[name] = values.astype(np.float64)
    return pd.DataFrame(out, index=df.index)


def load_csv(
    path: Union[str, Path],
    delimiter: str = ",",
    header: bool = True,
    timestamp_column: Optional[Union[str, int]] = AUTO,
    fill_policy: str = "forward-fill",
    samples_per_hour: Optional[int] = None,
    name: Optional[str] = None,
    phase_offset: int = 0,
) -> SeriesFrame:
    """Load a CSV file into a ``SeriesFrame``.

    Args:
        path: CSV file.
        delimiter: Field separator.
        header: Whether the first line names the columns.
        timestamp_column: Column name or position holding timestamps,
            ``"auto"`` to detect a leading ISO-8601 column, or ``None``.
        fill_policy: ``"reject"`` fails on any gap; ``"forward-fill"``
            repeats the last observation and restores missing grid rows.
        samples_per_hour: Sampling rate; inferred from timestamps when omitted.
        name: Dataset id, defaults to the file stem.
        phase_offset: In-day position of row 0 for files without timestamps.

    Raises:
        IngestionError: With the data row (0-based) and column of the first bad cell.
    """
    if fill_policy not in FILL_POLICIES:
        raise IngestionError(f"unknown fill policy {fill_policy!r}; expected one of {FILL_POLICIES}")
    path = Path(path)
    try:
        df = pd.read_csv(
            path, sep=delimiter, header=0 if header else None, dtype=str, keep_default_na=False, skipinitialspace=True
        )
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"cannot read {path}: {e}") from e
    if df.empty:
        raise IngestionError(f"{path} has no data rows")
    df.columns = [str(c) for c in df.columns]

    stamps: Optional[pd.DatetimeIndex] = None
    ts_name: Optional[str] = None
    if timestamp_column == AUTO:
        if _looks_like_timestamps(df.iloc[:, 0]):
            ts_name = df.columns[0]
    elif timestamp_column is not None:
        ts_name = df.columns[timestamp_column] if isinstance(timestamp_column, int) else str(timestamp_column)
        if ts_name not in df.columns:
            raise IngestionError(f"timestamp column {ts_name!r} not found", column=ts_name)
    if ts_name is not None:
        stamps = _parse_timestamps(df[ts_name])
        df = df.drop(columns=[ts_name])
    if df.shape[1] == 0:
        raise IngestionError(f"{path} has no value columns")

    values = _numeric(df)
    rate = samples_per_hour or (_infer_samples_per_hour(stamps) if stamps is not None else 1)

    if stamps is not None:
        duplicated = np.flatnonzero(stamps.duplicated())
        if duplicated.size:
            row = int(duplicated[0])
            raise IngestionError(f"duplicate timestamp {stamps[row]} at row {row}", row=row, column=ts_name)
        if fill_policy == "reject":
            check_spacing(stamps.to_numpy(dtype="datetime64[ns]"), rate)
        else:
            grid = pd.date_range(stamps[0], stamps[-1], freq=pd.Timedelta(hours=1) / rate)
            off_grid = np.flatnonzero(~stamps.isin(grid))
            if off_grid.size or not stamps.is_monotonic_increasing:
                row = int(off_grid[0]) if off_grid.size else int(np.flatnonzero(np.diff(stamps.asi8) <= 0)[0]) + 1
                raise IngestionError(f"irregular timestamp {stamps[row]} at row {row}", row=row, column=ts_name)
            values.index = stamps
            restored = len(grid) - len(stamps)
            values = values.reindex(grid)
            if restored:
                logger.warning(f"{path.name}: restored {restored} missing timestamp rows")
            stamps = grid

    gaps = values.isna().to_numpy()
    if gaps.any():
        row, col = (int(i) for i in np.argwhere(gaps)[0])
        if fill_policy == "reject":
            raise IngestionError("missing value", row=row, column=str(values.columns[col]))
        leading = values.iloc[0].isna().to_numpy()
        if leading.any():
            raise IngestionError(
                "cannot forward-fill a gap in the first row", row=0, column=str(values.columns[int(np.argmax(leading))])
            )
        logger.warning(f"{path.name}: forward-filled {int(gaps.sum())} missing cells")
        values = values.ffill()

    frame = SeriesFrame(
        name=name or path.stem,
        values=values.to_numpy(dtype=np.float64),
        samples_per_hour=int(rate),
        variable_names=[str(c) for c in values.columns],
        timestamps=stamps.to_numpy(dtype="datetime64[ns]") if stamps is not None else None,
        phase_offset=phase_offset,
    )
    logger.info(f"Loaded {frame.name}: {len(frame)} rows x {frame.n_variables} variables, i={frame.samples_per_hour}")
    return frame


def save_csv(frame: SeriesFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_dataframe().to_csv(path, index=False, float_format="%.17g", date_format="%Y-%m-%dT%H:%M:%S")
    return path
