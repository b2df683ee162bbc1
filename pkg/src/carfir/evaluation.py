"""Error metric, synthetic benchmark and the retention sweep."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, TimeSeries, denormalize_values, normalization_params, normalize, split
from .forecast import fir_forecast, fir_predict_many
from .fuzzifier import Partition, efp_landmarks
from .identification import Mask, PatternRuleBase, apply_mask
from .mixed import (
    KINDS,
    D_HIGH,
    D_LOW,
    ErrorModel,
    build_error_model,
    build_mixed_model,
    mixed_forecast,
    select_retained_rules,
)
from .sugeno import SugenoRuleBase, init_rule_grid, tune_weights

DEFAULT_PERCENTS = (0, 10, 20, 30, 40, 60, 100)


def _values(s) -> np.ndarray:
    return np.asarray(getattr(s, "samples", s), dtype=float)


def mse_percent(y, yhat) -> float:
    """Mean squared error over the population variance of ``y``, in percent."""
    y, yhat = _values(y), _values(yhat)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size < 2:
        raise ValueError("need at least two samples")
    var = float(np.var(y))
    if var == 0.0:
        raise ValueError("output has zero variance")
    return float(np.mean((y - yhat) ** 2) / var * 100.0)


def forecast_error(test: Dataset, forecast: TimeSeries, depth: int) -> float:
    """MSE% over the predicted part of a forecast (the seed is excluded)."""
    start = depth - 1
    stop = len(forecast)
    return mse_percent(test.output.samples[start:stop], forecast.samples[start:stop])


# --------------------------------------------------------------------------
# synthetic benchmark


@dataclass(frozen=True)
class SynthSpec:
    """Single-input plant ``y(t) = a*y(t-1) + b*g(u(t-delay)) + noise``.

    ``g`` is a logistic curve of the given steepness centred at 0.5 plus a
    sinusoidal ripple finer than a 9-class grid can resolve.  Noise
    of standard deviation ``noise`` is added only when ``(u(t-delay), y(t-1))``
    falls inside ``window``.  The excitation is uniform random levels held
    for ``hold`` samples and smoothed by a moving average of ``smooth``
    samples, rescaled to [0, 1].  The first ``delay`` samples take their
    drive from the end of the excitation (circular lag), so with ``a = 0``
    the output values are an exact image of the input values.
    """

    length: int = 4800
    seed: int = 0
    delay: int = 1
    feedback: float = 0.4
    gain: float = 0.5
    steepness: float = 12.0
    ripple: float = 0.15
    ripple_freq: float = 8.0
    noise: float = 0.04
    window: tuple[tuple[float, float], tuple[float, float]] = ((0.6, 0.9), (0.6, 0.9))
    hold: tuple[int, int] = (2, 12)
    smooth: int = 3
    dt: float = 0.12

    def __post_init__(self):
        if self.noise < 0:
            raise ValueError("noise amplitude must be non-negative")
        if self.length < 2:
            raise ValueError("length must be at least 2")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        for lo, hi in self.window:
            if not 0 <= lo <= hi <= 1:
                raise ValueError("noise window must lie within [0, 1]^2")
        object.__setattr__(self, "window", tuple(tuple(float(v) for v in w) for w in self.window))
        object.__setattr__(self, "hold", tuple(int(v) for v in self.hold))


def _excitation(rng: np.random.Generator, n: int, hold: tuple[int, int], smooth: int) -> np.ndarray:
    levels = []
    while len(levels) < n + smooth:
        levels.extend([rng.uniform()] * int(rng.integers(hold[0], hold[1] + 1)))
    u = np.asarray(levels[: n + smooth])
    if smooth > 1:
        u = np.convolve(u, np.ones(smooth) / smooth, mode="valid")
    u = u[:n]
    return (u - u.min()) / (u.max() - u.min())


def logistic(u, steepness: float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-steepness * (np.asarray(u) - 0.5)))


def synth_generate(spec: SynthSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n = spec.length
    u = _excitation(rng, n, spec.hold, spec.smooth)
    drive = np.roll(u, spec.delay)
    g = logistic(drive, spec.steepness) + spec.ripple * np.sin(2 * np.pi * spec.ripple_freq * drive)
    shocks = rng.standard_normal(n)
    (ulo, uhi), (ylo, yhi) = spec.window
    y = np.empty(n)
    prev = spec.gain * g[-1] / (1.0 - spec.feedback) if spec.feedback < 1 else 0.0
    for t in range(n):
        y[t] = spec.feedback * prev + spec.gain * g[t]
        if spec.noise > 0 and ulo <= drive[t] <= uhi and ylo <= prev <= yhi:
            y[t] += spec.noise * shocks[t]
        prev = y[t]
    return Dataset(
        inputs=(TimeSeries("u", u, spec.dt),),
        output=TimeSeries("y", y, spec.dt),
    )


def in_window(spec: SynthSpec, u_lag: np.ndarray, y_lag: np.ndarray) -> np.ndarray:
    (ulo, uhi), (ylo, yhi) = spec.window
    return (u_lag >= ulo) & (u_lag <= uhi) & (y_lag >= ylo) & (y_lag <= yhi)


def harness_mask(delay: int = 1) -> Mask:
    """Antecedents ``u(t - delay)`` and ``y(t - 1)``, consequent ``y(t)``."""
    depth = max(delay, 1) + 1
    e = np.zeros((depth, 2), dtype=int)
    e[depth - 1 - delay, 0] = -1
    e[depth - 2, 1] = -1
    e[depth - 1, 1] = 1
    # renumber in reading order
    negatives = np.flatnonzero(e.ravel() < 0)
    flat = e.ravel()
    flat[negatives] = -np.arange(1, negatives.size + 1)
    return Mask(flat.reshape(depth, 2))


def efp_partitions(train: Dataset, n_classes: int | Sequence[int]) -> tuple[Partition, ...]:
    counts = [n_classes] * len(train.series) if isinstance(n_classes, int) else list(n_classes)
    return tuple(efp_landmarks(s.samples, c) for s, c in zip(train.series, counts))


@dataclass
class Benchmark:
    spec: SynthSpec
    raw: Dataset
    train: Dataset
    tests: list[Dataset]
    partitions: tuple[Partition, ...]
    mask: Mask
    prb: PatternRuleBase


def make_benchmark(
    spec: SynthSpec,
    n_train: int = 3000,
    test_lengths: Sequence[int] = (600, 600, 600),
    n_classes: int = 9,
) -> Benchmark:
    """Generate, split and normalize (training statistics), then build the behavior matrix."""
    total = n_train + sum(test_lengths)
    if spec.length < total:
        raise ValueError(f"spec length {spec.length} is shorter than the {total} samples requested")
    raw = synth_generate(spec)
    ranges = []
    start = n_train
    for L in test_lengths:
        ranges.append((start, start + L - 1))
        start += L
    raw_train, raw_tests = split(raw, (0, n_train - 1), ranges)
    params = normalization_params(raw_train)
    train = normalize(raw_train, params)
    tests = [normalize(t, params) for t in raw_tests]
    partitions = efp_partitions(train, n_classes)
    mask = harness_mask(spec.delay)
    prb = apply_mask(mask, train, partitions)
    return Benchmark(spec, raw, train, tests, partitions, mask, prb)


def window_cells(bench: Benchmark, srb: SugenoRuleBase) -> np.ndarray:
    """Boolean per grid cell: whether the raw-scale cell center lies in the noise window."""
    names = bench.train.names
    norm = bench.train.normalization
    axes = [
        denormalize_values(p.centers, norm[names[var]])
        for p, (_, var) in zip(srb.partitions, bench.mask.antecedent_cells)
    ]
    grids = dict(zip((names[var] for _, var in bench.mask.antecedent_cells),
                     np.meshgrid(*axes, indexing="ij")))
    return in_window(bench.spec, grids["u"], grids["y"]).ravel()


def fit_sugeno(prb: PatternRuleBase, epochs: int = 50, rate: float = 0.1) -> SugenoRuleBase:
    return tune_weights(init_rule_grid(prb), prb, rate=rate, epochs=epochs)


# --------------------------------------------------------------------------
# retention sweep


@dataclass
class SweepResult:
    kinds: list[str]
    percents: list[float]
    rows: dict[tuple[str, float], float]
    fir: float
    fis: float
    metadata: dict = field(default_factory=dict)
    per_test: dict[tuple[str, float], list[float]] = field(default_factory=dict)
    retained: dict[tuple[str, float], int] = field(default_factory=dict)

    def curve(self, kind: str) -> list[float]:
        return [self.rows[(kind, p)] for p in self.percents]


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _mean_error(predict_series, tests: Sequence[Dataset], depth: int) -> tuple[float, list[float]]:
    errs = [forecast_error(t, predict_series(t), depth) for t in tests]
    return float(np.mean(errs)), errs


def _sweep_cell(args):
    mm, tests, depth, feedback = args
    return _mean_error(lambda t: mixed_forecast(mm, t, feedback=feedback), tests, depth)


def run_sweep(
    prb: PatternRuleBase,
    srb: SugenoRuleBase,
    tests: Sequence[Dataset],
    percents: Sequence[float] = DEFAULT_PERCENTS,
    kinds: Sequence[str] = KINDS,
    k: int = 5,
    d_low: float = D_LOW,
    d_high: float = D_HIGH,
    feedback: bool = True,
    jobs: int = 1,
    metadata: dict | None = None,
) -> SweepResult:
    """Mixed-scheme MSE% for every (error model, retention percent) pair.

    Baselines are the 5-NN pattern scheme (FIR) and the pure Sugeno scheme
    (FIS, the mixed predictor with nothing retained).
    """
    if not tests:
        raise ValueError("need at least one test set")
    depth = prb.mask.depth
    tests = list(tests)
    fir, fir_each = _mean_error(lambda t: fir_forecast(prb, t, k=k, feedback=feedback), tests, depth)
    empty = build_mixed_model(prb, srb, [], d_low, d_high)
    fis, fis_each = _sweep_cell((empty, tests, depth, feedback))

    fir_values = fir_predict_many(prb.x, prb, k) if any(kd in ("G1", "G3") for kd in kinds) else None
    models: dict[str, ErrorModel] = {kd: build_error_model(kd, prb, srb, k, fir_values) for kd in kinds}
    keys, jobs_args = [], []
    for kd in kinds:
        for p in percents:
            retained = select_retained_rules(models[kd], prb, p)
            keys.append((kd, p, retained.size))
            jobs_args.append((build_mixed_model(prb, srb, retained, d_low, d_high), tests, depth, feedback))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, jobs_args))
    else:
        results = [_sweep_cell(a) for a in jobs_args]

    sr = SweepResult(list(kinds), list(percents), {}, fir, fis, dict(metadata or {}))
    sr.per_test[("FIR", -1)] = fir_each
    sr.per_test[("FIS", -1)] = fis_each
    for (kd, p, n_kept), (mean, each) in zip(keys, results):
        sr.rows[(kd, p)] = mean
        sr.per_test[(kd, p)] = each
        sr.retained[(kd, p)] = n_kept
    return sr


# --------------------------------------------------------------------------
# reports


def _fmt_percent(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def format_report(sr: SweepResult) -> str:
    out = io.StringIO()
    meta = " ".join(f"{k}={sr.metadata[k]}" for k in sorted(sr.metadata))
    out.write(f"# {meta}\n" if meta else "#\n")
    out.write("\t".join(["Mixed"] + [_fmt_percent(p) for p in sr.percents]) + "\n")
    for kd in sr.kinds:
        out.write("\t".join([kd] + [repr(v) for v in sr.curve(kd)]) + "\n")
    out.write(f"FIR\t{sr.fir!r}\tFIS\t{sr.fis!r}\n")
    return out.getvalue()


def format_curves(sr: SweepResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["percent"] + sr.kinds + ["FIR", "FIS"])
    for p in sr.percents:
        w.writerow([_fmt_percent(p)] + [repr(sr.rows[(kd, p)]) for kd in sr.kinds] + [repr(sr.fir), repr(sr.fis)])
    return out.getvalue()


def emit_report(sr: SweepResult, sink: str | Path) -> tuple[Path, Path]:
    """Write ``report.tsv`` and ``curves.csv`` into directory ``sink``."""
    sink = Path(sink)
    try:
        sink.mkdir(parents=True, exist_ok=True)
        report = sink / "report.tsv"
        curves = sink / "curves.csv"
        report.write_text(format_report(sr))
        curves.write_text(format_curves(sr))
    except OSError as exc:
        raise OSError(f"cannot write report to {sink}: {exc}") from exc
    return report, curves


def parse_report(text: str) -> dict:
    """Inverse of :func:`format_report` (numbers only)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split("\t")
    percents = [float(p) for p in header[1:]]
    rows = {}
    fir = fis = math.nan
    for ln in lines[1:]:
        cells = ln.split("\t")
        if cells[0] == "FIR":
            fir, fis = float(cells[1]), float(cells[3])
        else:
            rows[cells[0]] = [float(v) for v in cells[1:]]
    return {"percents": percents, "rows": rows, "fir": fir, "fis": fis}


def spec_to_dict(spec: SynthSpec) -> dict:
    return asdict(spec)
