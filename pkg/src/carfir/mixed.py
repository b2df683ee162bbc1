"""Error models and the mixed pattern/Sugeno predictor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dataset import Dataset, TimeSeries
from .forecast import fir_predict_many, simulate
from .fuzzifier import Partition
from .identification import Mask, PatternRuleBase
from .sugeno import SugenoRuleBase, _sparse_fire, sugeno_infer, sugeno_infer_many

KINDS = ("G1", "G2", "G3")
D_LOW = 0.01
D_HIGH = 0.25


def region_of(x, srb: SugenoRuleBase) -> int:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != srb.n_antec:
        raise ValueError(f"point has {x.size} coordinates, rule base expects {srb.n_antec}")
    return int(regions_of(x[None, :], srb)[0])


def regions_of(X, srb: SugenoRuleBase) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1, srb.n_antec)
    classes = tuple(p.classify(X[:, j]) for j, p in enumerate(srb.partitions))
    return np.ravel_multi_index(classes, srb.shape)


@dataclass(frozen=True, eq=False)
class ErrorModel:
    """Per-region squared discrepancies, one of G1 (FIR vs data), G2 (FIS vs
    data) or G3 (FIR vs FIS), evaluated at the pattern-rule antecedents.

    The per-sample ``errors`` and their ``cells`` are kept so the region
    statistics can be recomputed.
    """

    kind: str
    n_cells: int
    errors: np.ndarray
    cells: np.ndarray
    sse: np.ndarray
    count: np.ndarray
    mean: np.ndarray
    ranking: np.ndarray

    @property
    def region_errors(self) -> dict[int, tuple[float, int, float]]:
        return {int(c): (float(self.sse[c]), int(self.count[c]), float(self.mean[c])) for c in self.ranking}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "regions": [
                {"cell": c, "sse": s, "count": n, "mean": m}
                for c, (s, n, m) in self.region_errors.items()
            ],
            "ranking": self.ranking.tolist(),
        }


def error_model_from_samples(kind: str, errors, cells, n_cells: int) -> ErrorModel:
    errors = np.asarray(errors, dtype=float)
    cells = np.asarray(cells, dtype=int)
    count = np.bincount(cells, minlength=n_cells)
    sse = np.bincount(cells, weights=errors, minlength=n_cells)
    mean = np.zeros(n_cells)
    occupied = np.flatnonzero(count)
    mean[occupied] = sse[occupied] / count[occupied]
    ranking = occupied[np.lexsort((occupied, -mean[occupied]))]
    return ErrorModel(kind, n_cells, errors, cells, sse, count, mean, ranking)


def build_error_model(
    kind: str,
    prb: PatternRuleBase,
    srb: SugenoRuleBase,
    k: int = 5,
    fir_values: np.ndarray | None = None,
) -> ErrorModel:
    """Accumulate squared errors of the chosen kind into the Sugeno grid cells.

    ``fir_values`` may carry precomputed pattern-scheme predictions at the
    rule antecedents, so the three kinds can share one k-NN pass.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown error model {kind!r}; expected one of {KINDS}")
    if len(prb) == 0:
        raise ValueError("empty pattern rule base")
    if kind == "G2":
        y_fir = None
    elif fir_values is not None:
        y_fir = np.asarray(fir_values, dtype=float)
    else:
        y_fir = fir_predict_many(prb.x, prb, k)
    y_fis = None if kind == "G1" else sugeno_infer_many(prb.x, srb)
    if kind == "G1":
        err = (y_fir - prb.y) ** 2
    elif kind == "G2":
        err = (y_fis - prb.y) ** 2
    else:
        err = (y_fir - y_fis) ** 2
    return error_model_from_samples(kind, err, regions_of(prb.x, srb), srb.n_rules)


def select_retained_rules(em: ErrorModel, prb: PatternRuleBase, percent: float) -> np.ndarray:
    """Indices of pattern rules kept from the most uncertain regions.

    Whole regions are taken in ranking order until at least
    ``ceil(percent / 100 * N)`` rules are held, so the target can be exceeded.
    """
    if not 0 <= percent <= 100:
        raise ValueError("percent must be in [0, 100]")
    if em.cells.size != len(prb):
        raise ValueError("error model was built from a different rule base")
    target = math.ceil(Fraction(percent) * len(prb) / 100)
    kept: list[np.ndarray] = []
    held = 0
    for cell in em.ranking:
        if held >= target:
            break
        members = np.flatnonzero(em.cells == cell)
        kept.append(members)
        held += members.size
    if not kept:
        return np.empty(0, dtype=int)
    return np.sort(np.concatenate(kept))


def normalized_distance(x, antecedents) -> float:
    """Euclidean distance scaled by its maximum ``sqrt(n_antec)`` on the unit cube."""
    x = np.asarray(x, dtype=float).ravel()
    a = np.asarray(getattr(antecedents, "antecedent_values", antecedents), dtype=float).ravel()
    if x.size != a.size:
        raise ValueError("antecedent counts differ")
    return float(np.sqrt(np.sum((x - a) ** 2)) / math.sqrt(x.size))


def _h(d):
    return 1.0 / -np.expm1(-d)


def f_mix(d_norm: float, d_low: float = D_LOW, d_high: float = D_HIGH) -> float:
    """Share of the pattern prediction in the blend.

    1 up to ``d_low``, 0 from ``d_high`` on, and in between the curve
    ``1 / (1 - exp(-d))`` rescaled to meet both breakpoints.
    """
    if d_norm < 0:
        raise ValueError("distance must be non-negative")
    if not 0 < d_low < d_high:
        raise ValueError("need 0 < d_low < d_high")
    if d_norm <= d_low:
        return 1.0
    if d_norm >= d_high:
        return 0.0
    h_hi = _h(d_high)
    val = (_h(d_norm) - h_hi) / (_h(d_low) - h_hi)
    return float(min(1.0, max(0.0, val)))


@dataclass(frozen=True, eq=False)
class MixedModel:
    srb: SugenoRuleBase
    mask: Mask
    partitions: tuple[Partition, ...]
    retained: np.ndarray
    retained_x: np.ndarray
    retained_y: np.ndarray
    retained_cells: np.ndarray
    d_low: float = D_LOW
    d_high: float = D_HIGH

    def __post_init__(self):
        if not 0 < self.d_low < self.d_high:
            raise ValueError("need 0 < d_low < d_high")
        object.__setattr__(self, "partitions", tuple(self.partitions))
        object.__setattr__(self, "retained_x", np.asarray(self.retained_x, dtype=float).reshape(-1, self.n_antec))

    @property
    def n_antec(self) -> int:
        return self.srb.n_antec

    def to_dict(self) -> dict:
        return {
            "sugeno": self.srb.to_dict(),
            "mask": self.mask.to_text(),
            "partitions": [p.to_dict() for p in self.partitions],
            "n_antec": self.n_antec,
            "fmix": {"d_low": self.d_low, "d_high": self.d_high},
            "retained": [
                {"index": int(i), "cell": int(c), "antecedents": a.tolist(), "consequent": float(y)}
                for i, c, a, y in zip(self.retained, self.retained_cells, self.retained_x, self.retained_y)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixedModel":
        rows = data["retained"]
        return cls(
            srb=SugenoRuleBase.from_dict(data["sugeno"]),
            mask=Mask.from_text(data["mask"]),
            partitions=tuple(Partition.from_dict(p) for p in data["partitions"]),
            retained=np.array([r["index"] for r in rows], dtype=int),
            retained_x=np.array([r["antecedents"] for r in rows], dtype=float),
            retained_y=np.array([r["consequent"] for r in rows], dtype=float),
            retained_cells=np.array([r["cell"] for r in rows], dtype=int),
            d_low=data["fmix"]["d_low"],
            d_high=data["fmix"]["d_high"],
        )


def build_mixed_model(
    prb: PatternRuleBase,
    srb: SugenoRuleBase,
    retained: Sequence[int],
    d_low: float = D_LOW,
    d_high: float = D_HIGH,
) -> MixedModel:
    idx = np.sort(np.asarray(retained, dtype=int))
    return MixedModel(
        srb=srb,
        mask=prb.mask,
        partitions=prb.partitions,
        retained=idx,
        retained_x=prb.x[idx],
        retained_y=prb.y[idx],
        retained_cells=regions_of(prb.x[idx], srb) if idx.size else np.empty(0, dtype=int),
        d_low=d_low,
        d_high=d_high,
    )


def _mixed_point(x: np.ndarray, mm: MixedModel, weights: np.ndarray) -> float:
    cells, fires = _sparse_fire(x[None, :], mm.srb.partitions)
    mu = fires[0]
    y_sugeno = float(np.dot(mu, weights[cells[0]]) / mu.sum())
    if mm.retained.size == 0:
        return y_sugeno
    diff = mm.retained_x - x
    sq = (diff * diff).sum(axis=1)
    j = int(np.argmin(sq))
    f = f_mix(math.sqrt(sq[j]) / math.sqrt(x.size), mm.d_low, mm.d_high)
    if f == 1.0:
        return float(mm.retained_y[j])
    if f == 0.0:
        return y_sugeno
    return float(mm.retained_y[j]) * f + y_sugeno * (1.0 - f)


def mixed_infer(x, mm: MixedModel) -> float:
    """Blend of the closest retained pattern rule and the Sugeno output."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != mm.n_antec:
        raise ValueError(f"point has {x.size} coordinates, model expects {mm.n_antec}")
    return _mixed_point(x, mm, mm.srb.weights.ravel())


def sugeno_forecast(
    srb: SugenoRuleBase,
    mask: Mask,
    partitions: Sequence[Partition],
    test: Dataset,
    horizon: int | None = None,
    feedback: bool = True,
) -> TimeSeries:
    return simulate(mask, partitions, test, lambda x: sugeno_infer(x, srb), horizon, feedback)


def mixed_forecast(mm: MixedModel, test: Dataset, horizon: int | None = None, feedback: bool = True) -> TimeSeries:
    weights = mm.srb.weights.ravel()
    return simulate(mm.mask, mm.partitions, test, lambda x: _mixed_point(x, mm, weights), horizon, feedback)
