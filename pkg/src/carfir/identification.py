"""Masks, behavior matrices and entropy-based mask quality."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .fuzzifier import Partition, QualitativeValue, Side, fuzzify_array


@dataclass(frozen=True, eq=False)
class Mask:
    """Model structure over a ``depth x n_vars`` window.

    Row ``r`` is time offset ``t - depth + 1 + r``.  Entry 0 marks an unused
    cell, ``-1 .. -m`` the antecedents in reading order and ``+1`` the single
    consequent, which must sit in the last row.
    """

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=int)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise ValueError("mask must be a non-empty 2-D grid")
        pos = np.argwhere(e > 0)
        if len(pos) != 1 or e[tuple(pos[0])] != 1:
            raise ValueError("mask needs exactly one +1 entry")
        if pos[0][0] != e.shape[0] - 1:
            raise ValueError("the +1 entry must be in the last row")
        neg = e[e < 0]
        if neg.size == 0:
            raise ValueError("mask needs at least one antecedent")
        if list(neg) != list(range(-1, -neg.size - 1, -1)):
            raise ValueError("antecedents must be numbered -1, -2, ... in reading order")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def depth(self) -> int:
        return self.entries.shape[0]

    @property
    def n_vars(self) -> int:
        return self.entries.shape[1]

    @property
    def n_antec(self) -> int:
        return int((self.entries < 0).sum())

    @property
    def antecedent_cells(self) -> list[tuple[int, int]]:
        """``(row, var)`` of each antecedent, in antecedent order."""
        return [tuple(int(v) for v in c) for c in np.argwhere(self.entries < 0)]

    @property
    def output_cell(self) -> tuple[int, int]:
        r, c = np.argwhere(self.entries > 0)[0]
        return int(r), int(c)

    def __eq__(self, other):
        return isinstance(other, Mask) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes()))

    def to_text(self) -> str:
        rows = [" ".join(f"+{v}" if v > 0 else str(v) for v in row) for row in self.entries]
        return " / ".join(rows)

    @classmethod
    def from_text(cls, text: str) -> "Mask":
        rows = [r.split() for r in text.replace("\n", "/").split("/") if r.strip()]
        return cls(np.array([[int(v.replace("−", "-")) for v in row] for row in rows]))

    def __repr__(self):
        return f"Mask({self.to_text()!r})"


@dataclass(frozen=True)
class PatternRule:
    antecedents: tuple[QualitativeValue, ...]
    antecedent_values: tuple[float, ...]
    consequent: QualitativeValue
    consequent_value: float


@dataclass(frozen=True, eq=False)
class PatternRuleBase:
    """Behavior matrix stored column-wise.

    ``x`` holds the defuzzified antecedent reals (one row per rule), ``y``
    the defuzzified consequents; the triples are kept alongside.
    """

    mask: Mask
    partitions: tuple[Partition, ...]
    x: np.ndarray
    x_class: np.ndarray
    x_membership: np.ndarray
    x_side: np.ndarray
    y: np.ndarray
    y_class: np.ndarray
    y_membership: np.ndarray
    y_side: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "partitions", tuple(self.partitions))
        if len(self.partitions) != self.mask.n_vars:
            raise ValueError("need one partition per mask column")
        for name in ("x", "x_class", "x_membership", "x_side", "y", "y_class", "y_membership", "y_side"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x.ndim != 2 or self.x.shape[1] != self.mask.n_antec:
            raise ValueError("antecedent matrix does not match the mask")

    def __len__(self):
        return self.y.size

    @property
    def n_antec(self) -> int:
        return self.mask.n_antec

    @property
    def antecedent_partitions(self) -> tuple[Partition, ...]:
        return tuple(self.partitions[v] for _, v in self.mask.antecedent_cells)

    @property
    def output_partition(self) -> Partition:
        return self.partitions[self.mask.output_cell[1]]

    def rule(self, k: int) -> PatternRule:
        ants = tuple(
            QualitativeValue(int(c), float(m), Side(int(s)))
            for c, m, s in zip(self.x_class[k], self.x_membership[k], self.x_side[k])
        )
        cons = QualitativeValue(int(self.y_class[k]), float(self.y_membership[k]), Side(int(self.y_side[k])))
        return PatternRule(ants, tuple(float(v) for v in self.x[k]), cons, float(self.y[k]))

    @property
    def rules(self) -> list[PatternRule]:
        return [self.rule(k) for k in range(len(self))]

    def to_dict(self) -> dict:
        return {
            "mask": self.mask.to_text(),
            "partitions": [p.to_dict() for p in self.partitions],
            "antecedents": self.x.tolist(),
            "consequents": self.y.tolist(),
        }

    @classmethod
    def from_arrays(cls, mask: Mask, partitions: Sequence[Partition], x, y) -> "PatternRuleBase":
        """Rules from raw antecedent rows and consequents (fuzzified here)."""
        x = np.asarray(x, dtype=float).reshape(-1, mask.n_antec)
        y = np.asarray(y, dtype=float).ravel()
        if len(partitions) != mask.n_vars:
            raise ValueError("need one partition per mask column")
        if x.shape[0] != y.size:
            raise ValueError("antecedent and consequent counts differ")
        return _build(mask, tuple(partitions), x, y)

    @classmethod
    def from_dict(cls, data: dict) -> "PatternRuleBase":
        """Rebuild from exported reals; the triples are recomputed by fuzzification."""
        mask = Mask.from_text(data["mask"])
        parts = tuple(Partition.from_dict(p) for p in data["partitions"])
        x = np.asarray(data["antecedents"], dtype=float).reshape(-1, mask.n_antec)
        y = np.asarray(data["consequents"], dtype=float)
        return _build(mask, parts, x, y)


def _build(mask: Mask, partitions: Sequence[Partition], x: np.ndarray, y: np.ndarray) -> PatternRuleBase:
    ant_parts = [partitions[v] for _, v in mask.antecedent_cells]
    out_part = partitions[mask.output_cell[1]]
    xc = np.empty(x.shape, dtype=int)
    xm = np.empty(x.shape)
    xs = np.empty(x.shape, dtype=np.int8)
    xr = np.empty(x.shape)
    # the clamped value is the exact defuzzification of its triple; storing it
    # avoids the ~1e-12 roundtrip noise of recomputing it
    for j, p in enumerate(ant_parts):
        xc[:, j], xm[:, j], xs[:, j] = fuzzify_array(x[:, j], p)
        xr[:, j] = p.clamp(x[:, j])
    yc, ym, ys = fuzzify_array(y, out_part)
    yr = out_part.clamp(y)
    return PatternRuleBase(mask, tuple(partitions), xr, xc, xm, xs, yr, yc, ym, ys)


def window_values(mask: Mask, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw antecedent and consequent values at every window position of ``data``."""
    n = data.shape[0]
    if n < mask.depth:
        raise ValueError(f"series of length {n} is shorter than the mask depth {mask.depth}")
    n_rules = n - mask.depth + 1
    x = np.column_stack([data[r : r + n_rules, v] for r, v in mask.antecedent_cells])
    r, v = mask.output_cell
    return x, data[r : r + n_rules, v].copy()


def apply_mask(mask: Mask, ds: Dataset, partitions: Sequence[Partition]) -> PatternRuleBase:
    """Slide ``mask`` over ``ds`` and record one pattern rule per position."""
    data = ds.matrix()
    if data.shape[1] != mask.n_vars:
        raise ValueError(f"mask has {mask.n_vars} columns but the dataset has {data.shape[1]} variables")
    if len(partitions) != mask.n_vars:
        raise ValueError("need one partition per variable")
    x, y = window_values(mask, data)
    return _build(mask, partitions, x, y)


def enumerate_masks(template: Mask | np.ndarray, max_inputs: int) -> list[Mask]:
    """Every mask using 1..``max_inputs`` of the template's allowed cells.

    Allowed cells are the template's negative entries; the +1 cell is kept.
    Masks come ordered by input count, then lexicographically by cell index.
    """
    if max_inputs < 1:
        raise ValueError("max_inputs must be at least 1")
    grid = np.array(template.entries if isinstance(template, Mask) else template, dtype=int)
    out = np.argwhere(grid > 0)
    if len(out) != 1 or out[0][0] != grid.shape[0] - 1:
        raise ValueError("template needs exactly one +1 entry in its last row")
    allowed = [int(i) for i in np.flatnonzero(grid.ravel() < 0)]
    masks = []
    for size in range(1, min(max_inputs, len(allowed)) + 1):
        for cells in itertools.combinations(allowed, size):
            e = np.zeros(grid.size, dtype=int)
            e[np.ravel_multi_index(tuple(out[0]), grid.shape)] = 1
            for n, cell in enumerate(cells, start=1):
                e[cell] = -n
            masks.append(Mask(e.reshape(grid.shape)))
    return masks


def mask_quality(prb: PatternRuleBase) -> float:
    """``1 - H/H_max`` for the class-level transition relation.

    ``H`` is the consequent-class entropy conditioned on the antecedent class
    tuple (natural log), averaged with the tuple frequencies; ``H_max`` is
    ``ln(n_output_classes)``.  1 means fully deterministic.
    """
    n = len(prb)
    if n == 0:
        raise ValueError("empty pattern rule base")
    n_out = prb.output_partition.n_classes
    keys = np.column_stack([prb.x_class, prb.y_class])
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    _, tuple_id = np.unique(uniq[:, :-1], axis=0, return_inverse=True)
    tuple_id = tuple_id.ravel()
    tuple_tot = np.bincount(tuple_id, weights=counts)
    p_cond = counts / tuple_tot[tuple_id]
    # sum_i p(i) H_i = sum over (i, c) of (n_ic / N) * -ln(n_ic / n_i)
    h = float(-(counts / n * np.log(p_cond)).sum())
    q = 1.0 - h / math.log(n_out)
    return min(1.0, max(0.0, q))


def _quality_job(args) -> float:
    mask, ds, partitions = args
    return mask_quality(apply_mask(mask, ds, partitions))


def best_mask(
    ds: Dataset,
    partitions: Sequence[Partition],
    template: Mask | np.ndarray,
    max_inputs: int,
    jobs: int = 1,
) -> tuple[Mask, PatternRuleBase, float]:
    """Exhaustive mask search; ties go to fewer inputs, then enumeration order."""
    masks = enumerate_masks(template, max_inputs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            qualities = list(pool.map(_quality_job, [(m, ds, partitions) for m in masks]))
    else:
        qualities = [_quality_job((m, ds, partitions)) for m in masks]
    best = max(range(len(masks)), key=lambda i: (qualities[i], -masks[i].n_antec, -i))
    mask = masks[best]
    return mask, apply_mask(mask, ds, partitions), qualities[best]


def default_template(n_inputs: int, depth: int) -> np.ndarray:
    """Every earlier cell allowed, plus the current-time inputs."""
    grid = -np.ones((depth, n_inputs + 1), dtype=int)
    grid[-1, -1] = 1
    return grid
