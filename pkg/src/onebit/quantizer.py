"""Time-varying thresholds and one-bit sign measurements.

Thresholds are stored as an ``m x L`` matrix whose column ``l`` is the
dither sequence used for the ``l``-th pass over the ``m`` measurements.
Each column is drawn from its own RNG stream, derived from the scheme seed
with ``numpy.random.SeedSequence(seed, spawn_key=(l,))``.  Asking for more
sequences therefore never changes the columns already drawn.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "UniformRange",
    "Gaussian",
    "ThresholdScheme",
    "SignData",
    "generate_thresholds",
    "quantize",
    "covering_scheme",
    "write_sign_csv",
    "read_sign_csv",
]


@dataclass(frozen=True)
class UniformRange:
    lo: float
    hi: float

    def validate(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"UniformRange requires finite lo < hi, got lo={self.lo}, hi={self.hi}")

    def draw(self, rng, m):
        return rng.uniform(self.lo, self.hi, size=m)


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    std: float = 1.0

    def validate(self):
        if not np.isfinite(self.mean) or not (np.isfinite(self.std) and self.std > 0):
            raise ValueError(f"Gaussian requires finite mean and std > 0, got std={self.std}")

    def draw(self, rng, m):
        return rng.normal(self.mean, self.std, size=m)


@dataclass(frozen=True)
class ThresholdScheme:
    """Distribution, number of sequences ``L`` and seed for the dither matrix."""

    distribution: UniformRange | Gaussian = field(default_factory=lambda: UniformRange(-1.0, 1.0))
    sequences: int = 1
    seed: int = 0

    def validate(self):
        if isinstance(self.sequences, bool) or int(self.sequences) != self.sequences or self.sequences < 1:
            raise ValueError(f"sequences must be a positive integer, got {self.sequences!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not isinstance(self.distribution, (UniformRange, Gaussian)):
            raise TypeError(f"unknown threshold distribution {self.distribution!r}")
        self.distribution.validate()

    def column_rng(self, column):
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(int(column),)))

    def to_dict(self):
        dist = self.distribution
        if isinstance(dist, UniformRange):
            d = {"kind": "uniform", "lo": dist.lo, "hi": dist.hi}
        else:
            d = {"kind": "gaussian", "mean": dist.mean, "std": dist.std}
        return {"distribution": d, "sequences": int(self.sequences), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d):
        dist = dict(d["distribution"])
        kind = dist.pop("kind")
        if kind == "uniform":
            distribution = UniformRange(float(dist["lo"]), float(dist["hi"]))
        elif kind == "gaussian":
            distribution = Gaussian(float(dist.get("mean", 0.0)), float(dist.get("std", 1.0)))
        else:
            raise ValueError(f"unknown threshold distribution kind {kind!r}")
        return cls(distribution, int(d["sequences"]), int(d.get("seed", 0)))


@dataclass(frozen=True)
class SignData:
    """Sign matrix ``R`` and threshold matrix ``Gamma``, both ``m x L``."""

    signs: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        signs = np.asarray(self.signs)
        thresholds = np.asarray(self.thresholds, dtype=float)
        if signs.ndim != 2 or signs.shape != thresholds.shape:
            raise ValueError(
                f"signs and thresholds must be matching 2-D arrays, got {signs.shape} and {thresholds.shape}"
            )
        if not np.all((signs == 1) | (signs == -1)):
            raise ValueError("signs must contain only -1 and +1")
        object.__setattr__(self, "signs", signs.astype(np.int8))
        object.__setattr__(self, "thresholds", thresholds)

    @property
    def per_sequence_length(self):
        return self.signs.shape[0]

    @property
    def sequences(self):
        return self.signs.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SignData):
            return NotImplemented
        return np.array_equal(self.signs, other.signs) and np.array_equal(self.thresholds, other.thresholds)

    __hash__ = None


def generate_thresholds(scheme, m):
    """Draw the ``m x L`` dither matrix for ``scheme``.

    Parameters
    ----------
    scheme : ThresholdScheme
    m : int
        Number of measurements per sequence.

    Returns
    -------
    ndarray, shape (m, L)
        Column ``l`` comes from the ``l``-th child stream of ``scheme.seed``.
    """
    scheme.validate()
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    m = int(m)
    out = np.empty((m, scheme.sequences))
    for col in range(scheme.sequences):
        out[:, col] = scheme.distribution.draw(scheme.column_rng(col), m)
    return out


def quantize(y, thresholds):
    """Compare each measurement against its thresholds.

    ``signs[k, l] = +1`` when ``y[k] >= thresholds[k, l]`` and ``-1``
    otherwise, so a tie maps to ``+1`` and ``signs * (y - thresholds) >= 0``
    always holds.
    """
    y = np.asarray(y, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"y must be a vector, got shape {y.shape}")
    if thresholds.ndim != 2 or thresholds.shape[0] != y.shape[0]:
        raise ValueError(f"thresholds must have shape ({y.shape[0]}, L), got {thresholds.shape}")
    signs = np.where(y[:, None] >= thresholds, 1, -1).astype(np.int8)
    return SignData(signs, thresholds)


def covering_scheme(y, sequences, seed, width=3.0):
    """Uniform dithers on ``[-width * s, width * s]`` with ``s`` the RMS of ``y``."""
    y = np.asarray(y, dtype=float)
    scale = float(np.sqrt(np.mean(y**2)))
    if scale == 0.0:
        scale = 1.0
    return ThresholdScheme(UniformRange(-width * scale, width * scale), sequences, seed)


def _write_matrix_csv(path, values, comment, fmt):
    with open(path, "w", newline="") as fh:
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "l", "value"])
        m, L = values.shape
        for k in range(m):
            for l in range(L):
                writer.writerow([k, l, fmt(values[k, l])])


def write_sign_csv(signdata, directory, comment=None):
    """Write ``signs.csv`` and ``thresholds.csv`` in long ``k,l,value`` form.

    Indices are zero-based.  Thresholds are written with ``repr`` so they
    round-trip exactly.  Returns the two paths.
    """
    os.makedirs(directory, exist_ok=True)
    sign_path = os.path.join(directory, "signs.csv")
    thr_path = os.path.join(directory, "thresholds.csv")
    _write_matrix_csv(sign_path, signdata.signs, comment, lambda v: str(int(v)))
    _write_matrix_csv(thr_path, signdata.thresholds, comment, lambda v: repr(float(v)))
    return sign_path, thr_path


def _read_matrix_csv(path, dtype):
    rows = []
    with open(path, newline="") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(lines)
        if reader.fieldnames != ["k", "l", "value"]:
            raise ValueError(f"{path}: expected header k,l,value, got {reader.fieldnames}")
        for row in reader:
            rows.append((int(row["k"]), int(row["l"]), row["value"]))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    m = max(r[0] for r in rows) + 1
    L = max(r[1] for r in rows) + 1
    if len(rows) != m * L:
        raise ValueError(f"{path}: expected {m * L} entries, found {len(rows)}")
    out = np.empty((m, L), dtype=dtype)
    for k, l, v in rows:
        out[k, l] = dtype(v) if dtype is float else int(v)
    return out


def read_sign_csv(directory):
    signs = _read_matrix_csv(os.path.join(directory, "signs.csv"), int)
    thresholds = _read_matrix_csv(os.path.join(directory, "thresholds.csv"), float)
    return SignData(signs, thresholds)
