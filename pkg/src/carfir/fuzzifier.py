"""Equal-frequency partitions and Gaussian-bell fuzzification.

A value is encoded as a ``(class, membership, side)`` triple.  Every class
carries a bell ``exp(-k (x - center)**2)`` whose width is chosen separately
on each side of the center so that the bell is exactly 0.5 at the class
landmarks.  Since each half of the bell is monotone the triple can be
inverted exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

LN2 = math.log(2.0)


class Side(IntEnum):
    LEFT = -1
    CENTER = 0
    RIGHT = 1


@dataclass(frozen=True)
class QualitativeValue:
    class_idx: int
    membership: float
    side: Side


@dataclass(frozen=True)
class Partition:
    landmarks: tuple[float, ...]

    def __post_init__(self):
        marks = tuple(float(v) for v in self.landmarks)
        if len(marks) < 3:
            raise ValueError("a partition needs at least 2 classes (3 landmarks)")
        if not all(math.isfinite(v) for v in marks):
            raise ValueError("landmarks must be finite")
        if any(b <= a for a, b in zip(marks, marks[1:])):
            raise ValueError(f"landmarks must be strictly increasing: {marks}")
        object.__setattr__(self, "landmarks", marks)
        lm = np.asarray(marks)
        centers = 0.5 * (lm[:-1] + lm[1:])
        object.__setattr__(self, "_lm", lm)
        object.__setattr__(self, "_centers", centers)
        object.__setattr__(self, "_k_left", LN2 / (centers - lm[:-1]) ** 2)
        object.__setattr__(self, "_k_right", LN2 / (lm[1:] - centers) ** 2)

    @property
    def n_classes(self) -> int:
        return len(self.landmarks) - 1

    @property
    def centers(self) -> np.ndarray:
        return self._centers.copy()

    @property
    def lower(self) -> float:
        return self.landmarks[0]

    @property
    def upper(self) -> float:
        return self.landmarks[-1]

    def clamp(self, x):
        return np.clip(x, self.landmarks[0], self.landmarks[-1])

    def classify(self, x) -> np.ndarray:
        """Class index of each value; classes are left-closed, the last one closed."""
        x = self.clamp(np.asarray(x, dtype=float))
        idx = np.searchsorted(self._lm, x, side="right") - 1
        return np.clip(idx, 0, self.n_classes - 1)

    def bell(self, class_idx, x) -> np.ndarray:
        """Membership of ``x`` in the given class(es), without clamping or support limits."""
        class_idx = np.asarray(class_idx)
        x = np.asarray(x, dtype=float)
        d = x - self._centers[class_idx]
        k = np.where(d < 0, self._k_left[class_idx], self._k_right[class_idx])
        return np.exp(-k * d * d)

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "landmarks": list(self.landmarks)}

    @classmethod
    def from_dict(cls, data: dict) -> "Partition":
        p = cls(tuple(data["landmarks"]))
        if "n_classes" in data and data["n_classes"] != p.n_classes:
            raise ValueError("n_classes does not match the landmark count")
        return p


def efp_landmarks(values: Sequence[float], n_classes: int) -> Partition:
    """Equal-frequency partition of ``values`` into ``n_classes`` classes.

    Group sizes differ by at most one, larger groups first.  Interior
    landmarks sit halfway between neighbouring groups; the outer ones are
    the data extremes.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if n_classes < 2:
        raise ValueError("n_classes must be at least 2")
    if v.size < n_classes:
        raise ValueError(f"{v.size} values cannot fill {n_classes} classes")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if np.unique(v).size < n_classes:
        raise ValueError(f"fewer distinct values than classes ({n_classes})")
    base, extra = divmod(v.size, n_classes)
    sizes = [base + 1] * extra + [base] * (n_classes - extra)
    ends = np.cumsum(sizes)
    marks = [v[0]]
    for end in ends[:-1]:
        marks.append(0.5 * (v[end - 1] + v[end]))
    marks.append(v[-1])
    if any(b <= a for a, b in zip(marks, marks[1:])):
        raise ValueError(
            f"equal-frequency split gives coincident landmarks for {n_classes} classes "
            "(too many repeated values)"
        )
    return Partition(tuple(marks))


def efp_counts(values: Sequence[float], p: Partition) -> np.ndarray:
    return np.bincount(p.classify(values), minlength=p.n_classes)


def fuzzify_array(values, p: Partition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized fuzzify: returns ``(class_idx, membership, side)`` arrays."""
    x = p.clamp(np.asarray(values, dtype=float))
    idx = p.classify(x)
    m = p.bell(idx, x)
    lm = p._lm
    on_mark = (x == lm[idx]) | (x == lm[idx + 1])
    m = np.where(on_mark, 0.5, np.clip(m, 0.5, 1.0))
    d = x - p._centers[idx]
    side = np.where(m == 1.0, 0, np.where(d < 0, -1, 1)).astype(np.int8)
    return idx, m, side


def defuzzify_array(class_idx, membership, side, p: Partition) -> np.ndarray:
    class_idx = np.asarray(class_idx, dtype=int)
    m = np.asarray(membership, dtype=float)
    side = np.asarray(side)
    if np.any((class_idx < 0) | (class_idx >= p.n_classes)):
        raise ValueError("class index out of range for this partition")
    if np.any(~np.isfinite(m) | (m < 0.5) | (m > 1.0)):
        raise ValueError("membership must lie in [0.5, 1]")
    if np.any((m == 1.0) != (side == 0)):
        raise ValueError("membership is 1 exactly when side is center")
    if np.any(~np.isin(side, (-1, 0, 1))):
        raise ValueError("side must be left, center or right")
    c = p._centers[class_idx]
    k = np.where(side < 0, p._k_left[class_idx], p._k_right[class_idx])
    x = c + side * np.sqrt(-np.log(m) / k)
    left_mark = p._lm[class_idx]
    right_mark = p._lm[class_idx + 1]
    # rounding must not carry a point with m > 0.5 onto the next class's landmark
    x = np.where(side > 0, np.minimum(x, np.nextafter(right_mark, -np.inf)), x)
    x = np.where((m == 0.5) & (side < 0), left_mark, x)
    x = np.where((m == 0.5) & (side > 0), right_mark, x)
    return x


def fuzzify(x: float, p: Partition) -> QualitativeValue:
    idx, m, side = fuzzify_array(np.array([x]), p)
    return QualitativeValue(int(idx[0]), float(m[0]), Side(int(side[0])))


def defuzzify(q: QualitativeValue, p: Partition) -> float:
    return float(defuzzify_array([q.class_idx], [q.membership], [int(q.side)], p)[0])


def fuzzify_series(ts, p: Partition) -> list[QualitativeValue]:
    samples = getattr(ts, "samples", ts)
    idx, m, side = fuzzify_array(samples, p)
    return [QualitativeValue(int(i), float(mu), Side(int(s))) for i, mu, s in zip(idx, m, side)]
