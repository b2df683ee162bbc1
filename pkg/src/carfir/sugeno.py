"""Zero-order Sugeno rule grid extracted from a behavior matrix.

Rule ``i`` covers one combination of antecedent classes and carries a
constant weight ``w_i``.  Inference is ``sum(mu_i * w_i) / sum(mu_i)`` with
the product of per-dimension memberships as the rule fire.  Along each
dimension only the class containing the point and the class across the
nearest landmark have nonzero membership.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .fuzzifier import Partition, fuzzify_array
from .identification import PatternRuleBase


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SugenoRuleBase:
    partitions: tuple[Partition, ...]
    weights: np.ndarray
    epoch_history: tuple[float, ...] = field(default=())
    rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "partitions", tuple(self.partitions))
        w = np.array(self.weights, dtype=float).reshape(self.shape)
        if not np.all(np.isfinite(w)):
            raise ValueError("rule weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "epoch_history", tuple(float(e) for e in self.epoch_history))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(p.n_classes for p in self.partitions)

    @property
    def n_rules(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_antec(self) -> int:
        return len(self.partitions)

    def cell_of(self, class_tuple: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(class_tuple), self.shape))

    def with_weights(self, weights) -> "SugenoRuleBase":
        return replace(self, weights=np.asarray(weights, dtype=float).reshape(self.shape))

    def to_dict(self) -> dict:
        return {
            "partitions": [p.to_dict() for p in self.partitions],
            "shape": list(self.shape),
            "weights": self.weights.ravel().tolist(),
            "epoch_history": list(self.epoch_history),
            "rate": self.rate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SugenoRuleBase":
        parts = tuple(Partition.from_dict(p) for p in data["partitions"])
        srb = cls(parts, np.asarray(data["weights"], dtype=float), tuple(data.get("epoch_history", ())),
                  data.get("rate"))
        if list(srb.shape) != list(data.get("shape", srb.shape)):
            raise ValueError("grid shape does not match the partitions")
        return srb


def _dim_support(values: np.ndarray, p: Partition) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per value: own class and membership, neighbour class and membership (0 if none)."""
    x = p.clamp(values)
    idx, m, side = fuzzify_array(x, p)
    nb = idx + side
    valid = (side != 0) & (nb >= 0) & (nb < p.n_classes)
    nb = np.where(valid, nb, idx)
    lm = np.asarray(p.landmarks)
    on_mark = (x == lm[idx]) | (x == lm[idx + 1])
    m_nb = np.where(on_mark, 0.5, p.bell(nb, x))
    m_nb = np.where(valid, m_nb, 0.0)
    return idx, m, nb, m_nb


def _sparse_fire(X: np.ndarray, partitions: Sequence[Partition]) -> tuple[np.ndarray, np.ndarray]:
    """Cell ids and fire strengths of the ``2**m`` candidate rules per row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    shape = tuple(p.n_classes for p in partitions)
    supports = [_dim_support(X[:, j], p) for j, p in enumerate(partitions)]
    cells, fires = [], []
    for choice in itertools.product((0, 1), repeat=len(partitions)):
        classes = []
        mu = np.ones(X.shape[0])
        for (own, m_own, nb, m_nb), c in zip(supports, choice):
            classes.append(nb if c else own)
            mu = mu * (m_nb if c else m_own)
        cells.append(np.ravel_multi_index(tuple(classes), shape))
        fires.append(mu)
    return np.column_stack(cells), np.column_stack(fires)


def _check_point(x, srb: SugenoRuleBase) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != srb.n_antec:
        raise ValueError(f"point has {x.size} coordinates, rule base expects {srb.n_antec}")
    return x


def fire_strengths(x, srb: SugenoRuleBase) -> np.ndarray:
    """Fire of every rule (row-major cell order) at point ``x``."""
    x = _check_point(x, srb)
    cells, fires = _sparse_fire(x[None, :], srb.partitions)
    out = np.zeros(srb.n_rules)
    np.add.at(out, cells[0], fires[0])
    return out


def fire_matrix(X, partitions: Sequence[Partition]) -> np.ndarray:
    """Dense ``(n_points, n_rules)`` fire matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n_rules = int(np.prod([p.n_classes for p in partitions]))
    cells, fires = _sparse_fire(X, partitions)
    out = np.zeros((X.shape[0], n_rules))
    rows = np.repeat(np.arange(X.shape[0]), cells.shape[1])
    np.add.at(out, (rows, cells.ravel()), fires.ravel())
    return out


def normalized_fire_matrix(X, partitions: Sequence[Partition]) -> np.ndarray:
    phi = fire_matrix(X, partitions)
    total = phi.sum(axis=1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("a point fires no rule")
    return phi / total


def sugeno_infer(x, srb: SugenoRuleBase) -> float:
    x = _check_point(x, srb)
    cells, fires = _sparse_fire(x[None, :], srb.partitions)
    mu = fires[0]
    total = mu.sum()
    if not total > 0:
        raise ValueError(f"no rule fires at {x.tolist()}")
    return float(np.dot(mu, srb.weights.ravel()[cells[0]]) / total)


def sugeno_infer_many(X, srb: SugenoRuleBase) -> np.ndarray:
    cells, fires = _sparse_fire(np.asarray(X, dtype=float).reshape(-1, srb.n_antec), srb.partitions)
    total = fires.sum(axis=1)
    if np.any(total <= 0):
        raise ValueError("a point fires no rule")
    return (fires * srb.weights.ravel()[cells]).sum(axis=1) / total


def init_rule_grid(prb: PatternRuleBase) -> SugenoRuleBase:
    """One rule per antecedent class combination, weighted by the mean consequent.

    Cells no pattern rule falls into copy the weight of the nearest occupied
    cell by Euclidean distance over class-index tuples (ties: lower cell id).
    """
    if len(prb) == 0:
        raise ValueError("empty pattern rule base")
    parts = prb.antecedent_partitions
    shape = tuple(p.n_classes for p in parts)
    n_rules = int(np.prod(shape))
    cell = np.ravel_multi_index(tuple(prb.x_class.T), shape)
    counts = np.bincount(cell, minlength=n_rules)
    sums = np.bincount(cell, weights=prb.y, minlength=n_rules)
    occupied = np.flatnonzero(counts)
    w = np.zeros(n_rules)
    w[occupied] = sums[occupied] / counts[occupied]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        coords = np.array(np.unravel_index(np.arange(n_rules), shape)).T.astype(float)
        d = ((coords[empty][:, None, :] - coords[occupied][None, :, :]) ** 2).sum(axis=2)
        w[empty] = w[occupied[np.argmin(d, axis=1)]]
    return SugenoRuleBase(parts, w.reshape(shape))


def _residuals(phi_n: np.ndarray, w: np.ndarray, target: np.ndarray) -> np.ndarray:
    return phi_n @ w - target


def cost(srb: SugenoRuleBase, prb: PatternRuleBase) -> float:
    """Half the sum of squared errors over the pattern rules."""
    if len(prb) == 0:
        raise ValueError("empty pattern rule base")
    r = sugeno_infer_many(prb.x, srb) - prb.y
    return 0.5 * float(np.dot(r, r))


def gradient(srb: SugenoRuleBase, prb: PatternRuleBase) -> np.ndarray:
    """dE/dw over the grid, same shape as the weights."""
    phi_n = normalized_fire_matrix(prb.x, srb.partitions)
    r = _residuals(phi_n, srb.weights.ravel(), prb.y)
    return (phi_n.T @ r).reshape(srb.shape)


def tune_weights(
    srb: SugenoRuleBase,
    prb: PatternRuleBase,
    rate: float = 0.1,
    epochs: int = 50,
    max_halvings: int = 20,
) -> SugenoRuleBase:
    """Batch gradient descent on the rule weights.

    An epoch whose step would raise the cost is retried at half the rate,
    up to ``max_halvings`` times; the reduced rate carries over to later
    epochs.  If no halving helps the weights are left as they are.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    if len(prb) == 0:
        raise ValueError("empty pattern rule base")
    with np.errstate(over="ignore", invalid="ignore"):
        return _descend(srb, prb, rate, epochs, max_halvings)


def _descend(srb, prb, rate, epochs, max_halvings):
    phi_n = normalized_fire_matrix(prb.x, srb.partitions)
    target = prb.y
    w = srb.weights.ravel().copy()
    r = _residuals(phi_n, w, target)
    e = 0.5 * float(r @ r)
    if not math.isfinite(e):
        raise DivergenceError("non-finite cost before the first epoch")
    history = []
    for epoch in range(1, epochs + 1):
        g = phi_n.T @ r
        for _ in range(max_halvings + 1):
            w_try = w - rate * g
            r_try = _residuals(phi_n, w_try, target)
            e_try = 0.5 * float(r_try @ r_try)
            if math.isfinite(e_try) and e_try <= e:
                w, r, e = w_try, r_try, e_try
                break
            rate *= 0.5
        else:
            if not math.isfinite(e_try):
                raise DivergenceError(f"cost diverged at epoch {epoch}")
        if not math.isfinite(e):
            raise DivergenceError(f"cost diverged at epoch {epoch}")
        history.append(e)
    return replace(srb, weights=w.reshape(srb.shape), epoch_history=tuple(history), rate=rate)
