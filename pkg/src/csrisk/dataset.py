"""Current status observations with competing risks, and their CSV format.

Each observation is a pair ``(t, cause)``. Causes ``1..K`` mean failure from
that cause was seen by time ``t``; cause ``K + 1`` means no failure by ``t``.
"""

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import InvalidInputError


@dataclass(frozen=True, eq=False)
class Dataset:
    K: int
    t: np.ndarray
    cause: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        cause = np.asarray(self.cause).ravel()
        if int(self.K) < 1:
            raise InvalidInputError("K must be a positive integer")
        if t.size == 0:
            raise InvalidInputError("dataset is empty")
        if t.shape != cause.shape:
            raise InvalidInputError("t and cause must have equal length")
        if not np.all(np.isfinite(t)):
            raise InvalidInputError("observation times must be finite")
        if not np.all(cause == np.round(cause)):
            raise InvalidInputError("causes must be integers")
        cause = cause.astype(np.int64)
        if cause.min() < 1 or cause.max() > self.K + 1:
            raise InvalidInputError(f"causes must lie in 1..{self.K + 1}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "cause", cause)

    @property
    def n(self):
        return self.t.size

    def delta(self, k):
        """Indicator vector of cause ``k`` (``k = K + 1`` for survivors)."""
        return (self.cause == k).astype(float)

    @cached_property
    def _grouped(self):
        times, inverse = np.unique(self.t, return_inverse=True)
        counts = np.zeros((times.size, self.K + 1))
        np.add.at(counts, (inverse, self.cause - 1), 1.0)
        return times, counts

    @property
    def unique_times(self):
        return self._grouped[0]

    @property
    def counts(self):
        """``(U, K + 1)`` matrix of cause counts at each distinct time."""
        return self._grouped[1]

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.K == other.K
                and np.array_equal(self.t, other.t) and np.array_equal(self.cause, other.cause))


def read_dataset(path, K=None):
    """Read a ``t,cause`` CSV. ``K`` defaults to ``max(cause) - 1`` (at least 1)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["t", "cause"]:
            raise InvalidInputError(f"{path}: expected header 't,cause'")
        t, cause = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                t.append(float(row["t"]))
                c = float(row["cause"])
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
            if c != int(c):
                raise InvalidInputError(f"{path}:{lineno}: cause must be an integer")
            cause.append(int(c))
    if not t:
        raise InvalidInputError(f"{path}: no observations")
    if K is None:
        K = max(max(cause) - 1, 1)
    return Dataset(K, np.array(t), np.array(cause))


def write_dataset(d, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "cause"])
        for ti, ci in zip(d.t.tolist(), d.cause.tolist()):
            w.writerow([repr(ti), ci])
