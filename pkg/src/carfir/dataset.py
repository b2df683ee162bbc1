"""Signal ingestion, min-max normalization and train/test slicing."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class TimeSeries:
    name: str
    samples: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError(f"series {self.name!r} must be one-dimensional")
        if samples.size and not np.all(np.isfinite(samples)):
            bad = int(np.flatnonzero(~np.isfinite(samples))[0])
            raise ValueError(f"series {self.name!r} has a non-finite value at index {bad}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Dataset:
    """Input series plus one output series, all of equal length.

    ``normalization`` maps series name to the ``(min, max)`` pair used to
    scale it, or is empty for raw data.
    """

    inputs: tuple[TimeSeries, ...]
    output: TimeSeries
    normalization: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not self.inputs:
            raise ValueError("dataset needs at least one input series")
        lengths = {len(s) for s in self.series}
        if len(lengths) != 1:
            raise ValueError(f"series lengths differ: {sorted(lengths)}")
        names = [s.name for s in self.series]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate series names: {names}")

    @property
    def series(self) -> tuple[TimeSeries, ...]:
        """Inputs followed by the output; this is the variable order used everywhere."""
        return self.inputs + (self.output,)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.series]

    def matrix(self) -> np.ndarray:
        """Samples as an ``(n_samples, n_vars)`` array."""
        return np.column_stack([s.samples for s in self.series])

    def __len__(self):
        return len(self.output)


def load_csv(
    source: IO[bytes] | IO[str] | bytes | str,
    schema: Sequence[str],
    output: str | None = None,
    time_column: str | None = None,
) -> Dataset:
    """Read a comma-delimited table with one header row.

    ``schema`` names the columns to keep, in order; ``output`` defaults to
    the last of them.  When ``time_column`` is given its spacing sets ``dt``.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    schema = list(schema)
    if not schema:
        raise ValueError("schema must name at least one column")
    output = schema[-1] if output is None else output
    if output not in schema:
        raise ValueError(f"output column {output!r} is not in the schema")
    if len(schema) < 2:
        raise ValueError("schema needs at least one input and one output column")

    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValueError("empty CSV source") from None
    wanted = schema + ([time_column] if time_column else [])
    for name in wanted:
        if name not in header:
            raise ValueError(f"missing column {name!r} (header has {header})")
    index = {name: header.index(name) for name in wanted}

    columns: dict[str, list[float]] = {name: [] for name in wanted}
    # data rows are numbered from 1, the header being row 0
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
        for name, col in index.items():
            cell = row[col].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ValueError(f"row {row_no}, column {name!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(value):
                raise ValueError(f"row {row_no}, column {name!r}: non-finite value {cell!r}")
            columns[name].append(value)

    dt = None
    if time_column:
        t = np.asarray(columns[time_column])
        if t.size >= 2:
            dt = float(np.median(np.diff(t)))
    series = {name: TimeSeries(name, np.asarray(columns[name]), dt) for name in schema}
    if len(series[output]) == 0:
        raise ValueError("CSV source has no data rows")
    return Dataset(
        inputs=tuple(series[n] for n in schema if n != output),
        output=series[output],
    )


def write_csv(ds: Dataset, sink: IO[str], time_column: str | None = "t") -> None:
    writer = csv.writer(sink, lineterminator="\n")
    header = ([time_column] if time_column else []) + ds.names
    writer.writerow(header)
    dt = ds.output.dt or 1.0
    mat = ds.matrix()
    for i, row in enumerate(mat):
        cells = [repr(float(v)) for v in row]
        if time_column:
            cells.insert(0, repr(round(i * dt, 12)))
        writer.writerow(cells)


def normalization_params(ds: Dataset) -> dict[str, tuple[float, float]]:
    params = {}
    for s in ds.series:
        lo, hi = float(s.samples.min()), float(s.samples.max())
        if not hi > lo:
            raise ValueError(f"series {s.name!r} has zero range; cannot normalize")
        params[s.name] = (lo, hi)
    return params


def normalize(ds: Dataset, params: dict[str, tuple[float, float]] | None = None) -> Dataset:
    """Min-max scale every series to the unit interval.

    With ``params`` the given ``(min, max)`` pairs are applied instead of
    being computed, which is how test slices reuse training statistics.
    """
    if ds.normalization:
        raise ValueError("dataset is already normalized")
    params = normalization_params(ds) if params is None else dict(params)

    def scale(s: TimeSeries) -> TimeSeries:
        if s.name not in params:
            raise ValueError(f"no normalization parameters for series {s.name!r}")
        lo, hi = params[s.name]
        if not hi > lo:
            raise ValueError(f"series {s.name!r} has zero range; cannot normalize")
        return replace(s, samples=(s.samples - lo) / (hi - lo))

    return Dataset(
        inputs=tuple(scale(s) for s in ds.inputs),
        output=scale(ds.output),
        normalization={s.name: params[s.name] for s in ds.series},
    )


def denormalize_values(values: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    lo, hi = bounds
    return np.asarray(values, dtype=float) * (hi - lo) + lo


def denormalize(ds: Dataset) -> Dataset:
    if not ds.normalization:
        raise ValueError("dataset is not normalized")

    def unscale(s: TimeSeries) -> TimeSeries:
        return replace(s, samples=denormalize_values(s.samples, ds.normalization[s.name]))

    return Dataset(inputs=tuple(unscale(s) for s in ds.inputs), output=unscale(ds.output))


def _slice(ds: Dataset, start: int, stop: int) -> Dataset:
    def cut(s: TimeSeries) -> TimeSeries:
        return replace(s, samples=s.samples[start:stop].copy())

    return Dataset(
        inputs=tuple(cut(s) for s in ds.inputs),
        output=cut(ds.output),
        normalization=dict(ds.normalization),
    )


def split(
    ds: Dataset,
    train: tuple[int, int],
    tests: Iterable[tuple[int, int]] = (),
) -> tuple[Dataset, list[Dataset]]:
    """Cut contiguous slices out of ``ds``.

    Ranges are inclusive ``(first, last)`` sample indices and must not
    overlap.  Every slice keeps the normalization record of ``ds``.
    """
    ranges = [tuple(train)] + [tuple(r) for r in tests]
    n = len(ds)
    for first, last in ranges:
        if not (0 <= first <= last < n):
            raise ValueError(f"range [{first}, {last}] is outside [0, {n - 1}]")
    ordered = sorted(ranges)
    for (a0, a1), (b0, b1) in zip(ordered, ordered[1:]):
        if b0 <= a1:
            raise ValueError(f"ranges [{a0}, {a1}] and [{b0}, {b1}] overlap")
    slices = [_slice(ds, first, last + 1) for first, last in ranges]
    return slices[0], slices[1:]


def parse_range(text: str) -> tuple[int, int]:
    """Parse ``"first:last"`` (inclusive) into a pair of ints."""
    try:
        first, last = text.split(":")
        return int(first), int(last)
    except ValueError:
        raise ValueError(f"bad index range {text!r}; expected first:last") from None
