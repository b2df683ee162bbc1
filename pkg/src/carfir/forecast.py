"""Pattern prediction: k-nearest-neighbour inference over the behavior matrix."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .dataset import Dataset, TimeSeries
from .fuzzifier import Partition
from .identification import Mask, PatternRule, PatternRuleBase

EPS = 1e-9


def _distances(x: np.ndarray, X: np.ndarray) -> np.ndarray:
    diff = X - x
    # plain left-to-right sum of squares, so equal inputs give equal distances
    return np.sqrt((diff * diff).sum(axis=1))


def _nearest(x: np.ndarray, X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the ``k`` closest rows, ties broken by row index."""
    d = _distances(x, X)
    n = d.size
    if k >= n:
        idx = np.argsort(d, kind="stable")
        return idx, d[idx]
    kth = np.partition(d, k - 1)[k - 1]
    cand = np.flatnonzero(d <= kth)
    cand = cand[np.argsort(d[cand], kind="stable")][:k]
    return cand, d[cand]


def _check_query(x, prb: PatternRuleBase, k: int) -> np.ndarray:
    if len(prb) == 0:
        raise ValueError("empty pattern rule base")
    if k < 1:
        raise ValueError("k must be at least 1")
    x = np.asarray(x, dtype=float).ravel()
    if x.size != prb.n_antec:
        raise ValueError(f"query has {x.size} antecedents, rule base expects {prb.n_antec}")
    return x


def nearest_rules(x, prb: PatternRuleBase, k: int) -> list[tuple[PatternRule, float]]:
    x = _check_query(x, prb, k)
    idx, d = _nearest(x, prb.x, k)
    return [(prb.rule(int(i)), float(di)) for i, di in zip(idx, d)]


def _weighted(idx: np.ndarray, d: np.ndarray, y: np.ndarray) -> float:
    if d[0] == 0.0:
        # exact match: first such rule by index, which is idx[0] after the stable sort
        return float(y[idx[0]])
    w = 1.0 / (d + EPS)
    return float(np.dot(w, y[idx]) / w.sum())


def fir_predict_one(x, prb: PatternRuleBase, k: int = 5) -> float:
    """Inverse-distance weighted mean of the ``k`` nearest consequents."""
    x = _check_query(x, prb, k)
    idx, d = _nearest(x, prb.x, k)
    return _weighted(idx, d, prb.y)


def fir_predict_many(X, prb: PatternRuleBase, k: int = 5) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1, prb.n_antec)
    if len(X):
        _check_query(X[0], prb, k)
    out = np.empty(len(X))
    for i, x in enumerate(X):
        idx, d = _nearest(x, prb.x, k)
        out[i] = _weighted(idx, d, prb.y)
    return out


def simulate(
    mask: Mask,
    partitions: Sequence[Partition],
    test: Dataset,
    predict: Callable[[np.ndarray], float],
    horizon: int | None = None,
    feedback: bool = True,
) -> TimeSeries:
    """Run a one-step predictor along ``test``.

    The first ``depth - 1`` outputs are copied from ``test`` as seed.  With
    ``feedback`` the masked output lags come from earlier predictions,
    otherwise from the recorded data.  Input lags always come from ``test``.
    """
    data = test.matrix()
    n = data.shape[0]
    if data.shape[1] != mask.n_vars:
        raise ValueError("test dataset does not match the mask's variables")
    if n < mask.depth - 1 or (n < mask.depth and horizon != 0):
        raise ValueError(f"test set of length {n} cannot seed a depth-{mask.depth} mask")
    max_h = n - mask.depth + 1
    horizon = max_h if horizon is None else horizon
    if not 0 <= horizon <= max_h:
        raise ValueError(f"horizon must be in [0, {max_h}]")
    out_col = mask.output_cell[1]
    cells = mask.antecedent_cells
    lo = np.array([partitions[v].lower for _, v in cells])
    hi = np.array([partitions[v].upper for _, v in cells])
    from_pred = np.array([feedback and v == out_col for _, v in cells])
    pred = data[:, out_col].copy()
    recorded = data.copy()
    x = np.empty(len(cells))
    offset = mask.depth - 1
    for step in range(horizon):
        t = offset + step
        for j, (r, v) in enumerate(cells):
            s = t - offset + r
            x[j] = pred[s] if from_pred[j] else recorded[s, v]
        pred[t] = predict(np.clip(x, lo, hi))
    return TimeSeries(test.output.name, pred[: offset + horizon], test.output.dt)


def fir_forecast(
    prb: PatternRuleBase,
    test: Dataset,
    horizon: int | None = None,
    k: int = 5,
    feedback: bool = True,
) -> TimeSeries:
    if len(prb) == 0:
        raise ValueError("empty pattern rule base")
    X, Y = prb.x, prb.y

    def predict(x):
        idx, d = _nearest(x, X, k)
        return _weighted(idx, d, Y)

    return simulate(prb.mask, prb.partitions, test, predict, horizon, feedback)
