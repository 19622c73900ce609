"""Joint longitudinal-survival datasets: records, CSV I/O and fold splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data violate the dataset invariants."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: longitudinal measurements plus the observed event time and covariates."""

    id: str
    times: np.ndarray
    values: np.ndarray
    event_time: float
    event_indicator: int
    covariates: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "event_time", float(self.event_time))
        object.__setattr__(self, "covariates", {k: float(v) for k, v in self.covariates.items()})
        self._validate()

    def _validate(self):
        sid = self.id
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise DataError(f"subject {sid}: times and values must be 1-d of equal length")
        if not math.isfinite(self.event_time) or self.event_time < 0:
            raise DataError(f"subject {sid}: event_time must be finite and nonnegative")
        if self.event_indicator not in (0, 1):
            raise DataError(f"subject {sid}: event_indicator must be 0 or 1, got {self.event_indicator!r}")
        if np.isnan(self.values).any() or not np.isfinite(self.times).all():
            raise DataError(f"subject {sid}: NaN in longitudinal values or times")
        if np.isinf(self.values).any():
            raise DataError(f"subject {sid}: infinite longitudinal value")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DataError(f"subject {sid}: measurement times must be strictly increasing")
        if self.times.size and self.times[-1] >= self.event_time:
            raise DataError(
                f"subject {sid}: measurement not before event time "
                f"(t={self.times[-1]!r} >= T={self.event_time!r})"
            )
        for k, v in self.covariates.items():
            if not math.isfinite(v):
                raise DataError(f"subject {sid}: covariate {k} is not finite")

    @property
    def n_obs(self) -> int:
        return int(self.times.size)

    def truncated(self, t: float, inclusive: bool = True) -> "SubjectRecord":
        """Copy keeping only measurements at times <= t (< t if not inclusive)."""
        keep = self.times <= t if inclusive else self.times < t
        return SubjectRecord(self.id, self.times[keep], self.values[keep],
                             self.event_time, self.event_indicator, self.covariates)


@dataclass(frozen=True)
class JointDataset:
    subjects: tuple

    def __post_init__(self):
        subjects = tuple(self.subjects)
        object.__setattr__(self, "subjects", subjects)
        if not subjects:
            raise DataError("dataset has no subjects")
        ids = [s.id for s in subjects]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate subject ids")
        names = set(subjects[0].covariates)
        for s in subjects:
            if set(s.covariates) != names:
                raise DataError(f"subject {s.id}: covariate names differ from first subject")

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def n(self) -> int:
        return len(self.subjects)

    @cached_property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    @cached_property
    def covariate_names(self) -> list[str]:
        return sorted(self.subjects[0].covariates)

    @cached_property
    def event_times(self) -> np.ndarray:
        return _frozen([s.event_time for s in self.subjects])

    @cached_property
    def event_indicators(self) -> np.ndarray:
        return _frozen([s.event_indicator for s in self.subjects], dtype=np.int64)

    @cached_property
    def n_obs(self) -> np.ndarray:
        return _frozen([s.n_obs for s in self.subjects], dtype=np.int64)

    @cached_property
    def long_subject(self) -> np.ndarray:
        """Subject index (0-based) of every pooled longitudinal row."""
        return _frozen(np.repeat(np.arange(self.n), self.n_obs), dtype=np.int64)

    @cached_property
    def long_times(self) -> np.ndarray:
        return _frozen(np.concatenate([s.times for s in self.subjects]))

    @cached_property
    def long_values(self) -> np.ndarray:
        return _frozen(np.concatenate([s.values for s in self.subjects]))

    def covariate_matrix(self, names: Sequence[str]) -> np.ndarray:
        """(n, len(names)) array of baseline covariates."""
        out = np.empty((self.n, len(names)))
        for j, name in enumerate(names):
            try:
                out[:, j] = [s.covariates[name] for s in self.subjects]
            except KeyError:
                raise DataError(f"unknown covariate {name!r}") from None
        return out

    def subset(self, indices: Iterable[int]) -> "JointDataset":
        return JointDataset(tuple(self.subjects[i] for i in indices))

    def map_values(self, fn) -> "JointDataset":
        """Dataset with ``fn`` applied to every longitudinal value."""
        return JointDataset(tuple(
            SubjectRecord(s.id, s.times, fn(np.asarray(s.values)), s.event_time,
                          s.event_indicator, s.covariates)
            for s in self.subjects
        ))

    @classmethod
    def from_arrays(cls, ids, event_times, event_indicators, long_subject, long_times,
                    long_values, covariates: Mapping[str, Sequence[float]] | None = None):
        """Build from pooled arrays; ``long_subject`` holds 0-based subject indices."""
        covariates = covariates or {}
        long_subject = np.asarray(long_subject)
        long_times = np.asarray(long_times, dtype=float)
        long_values = np.asarray(long_values, dtype=float)
        subjects = []
        order = np.argsort(long_subject, kind="stable")
        bounds = np.searchsorted(long_subject[order], np.arange(len(ids) + 1))
        for i, sid in enumerate(ids):
            rows = order[bounds[i]:bounds[i + 1]]
            subjects.append(SubjectRecord(
                sid, long_times[rows], long_values[rows], event_times[i], int(event_indicators[i]),
                {k: v[i] for k, v in covariates.items()},
            ))
        return cls(tuple(subjects))


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_subject: Mapping[str, int]
    V: int

    def members(self, fold: int) -> list[str]:
        return [sid for sid, f in self.fold_of_subject.items() if f == fold]

    def sizes(self) -> list[int]:
        counts = [0] * self.V
        for f in self.fold_of_subject.values():
            counts[f - 1] += 1
        return counts


def split_folds(data: JointDataset, V: int, seed: int) -> FoldAssignment:
    """Assign subjects to ``V`` folds of near-equal size (sizes differ by at most one)."""
    n = data.n
    if V < 2:
        raise DataError("V must be at least 2")
    if V > n:
        raise DataError(f"V={V} exceeds the number of subjects n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    fold = np.empty(n, dtype=int)
    fold[perm] = np.arange(n) % V + 1
    return FoldAssignment({sid: int(f) for sid, f in zip(data.ids, fold)}, V)


# --------------------------------------------------------------------------- CSV


def fmt(x: float) -> str:
    """17-significant-digit formatting used for every numeric CSV field."""
    return format(float(x), ".17g")


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file (header row required)") from None
        rows = [r for r in reader if r]
    return header, rows


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{where}: cannot parse {text!r} as a number") from None


def load_joint_dataset(longitudinal_csv, survival_csv) -> JointDataset:
    """Read the longitudinal ``(id, time, value)`` and survival CSV pair.

    The survival file holds one row per subject with columns ``id``,
    ``event_time``, ``event_indicator`` followed by baseline covariates.
    Subjects may have no longitudinal rows, but every longitudinal id must
    appear in the survival file.
    """
    lh, lrows = _read_rows(longitudinal_csv)
    sh, srows = _read_rows(survival_csv)
    for col in ("id", "time", "value"):
        if col not in lh:
            raise DataError(f"{longitudinal_csv}: missing column {col!r}")
    for col in ("id", "event_time", "event_indicator"):
        if col not in sh:
            raise DataError(f"{survival_csv}: missing column {col!r}")
    li, lt, lv = lh.index("id"), lh.index("time"), lh.index("value")
    si, st, sd = sh.index("id"), sh.index("event_time"), sh.index("event_indicator")
    cov_cols = [(j, h) for j, h in enumerate(sh) if j not in (si, st, sd)]

    surv = {}
    order = []
    for k, row in enumerate(srows, start=2):
        where = f"{survival_csv}:{k}"
        sid = row[si]
        if sid in surv:
            raise DataError(f"{where}: duplicate id {sid!r} (time-varying covariates are not supported)")
        ind = _parse_float(row[sd], where)
        if ind not in (0.0, 1.0):
            raise DataError(f"{where}: event_indicator must be 0 or 1, got {row[sd]!r}")
        surv[sid] = (_parse_float(row[st], where), int(ind),
                     {h: _parse_float(row[j], where) for j, h in cov_cols})
        order.append(sid)

    long = {sid: ([], []) for sid in order}
    for k, row in enumerate(lrows, start=2):
        where = f"{longitudinal_csv}:{k}"
        sid = row[li]
        if sid not in long:
            raise DataError(f"{where}: id {sid!r} has no survival record")
        t = _parse_float(row[lt], where)
        v = _parse_float(row[lv], where)
        if math.isnan(v) or math.isnan(t):
            raise DataError(f"{where}: NaN value")
        long[sid][0].append(t)
        long[sid][1].append(v)

    subjects = []
    for sid in order:
        T, d, cov = surv[sid]
        times, values = long[sid]
        subjects.append(SubjectRecord(sid, times, values, T, d, cov))
    return JointDataset(tuple(subjects))


def write_joint_dataset(data: JointDataset, longitudinal_csv, survival_csv) -> None:
    """Inverse of :func:`load_joint_dataset`."""
    cov_names = data.covariate_names
    with open(longitudinal_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "time", "value"])
        for s in data.subjects:
            for t, v in zip(s.times, s.values):
                w.writerow([s.id, fmt(t), fmt(v)])
    with open(survival_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "event_time", "event_indicator", *cov_names])
        for s in data.subjects:
            w.writerow([s.id, fmt(s.event_time), s.event_indicator,
                        *(fmt(s.covariates[c]) for c in cov_names)])


def datasets_equal(a: JointDataset, b: JointDataset) -> bool:
    if a.ids != b.ids:
        return False
    for s, r in zip(a.subjects, b.subjects):
        if (s.event_time != r.event_time or s.event_indicator != r.event_indicator
                or s.covariates != r.covariates
                or not np.array_equal(s.times, r.times)
                or not np.array_equal(s.values, r.values)):
            return False
    return True


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
