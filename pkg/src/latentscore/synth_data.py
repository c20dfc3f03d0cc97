"""Synthetic generative models, ancestral sampling, sufficient statistics,
and the dataset CSV round trip.

Datasets are CSV with a header line ``x1,...,xn[,hidden]``; every field is a
0-based decimal state index.  The hidden column, when present, is last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_core import Dataset, ModelSpec, ParamSet, _check_rows
from .numerics import SeededStream, sample_dirichlet


class DatasetParseError(ValueError):
    """A dataset file failed to parse; the message names the offending line."""


@dataclass
class StatSet:
    """Sufficient statistics (integer counts or fractional expected counts)
    mirroring a ParamSet's shape."""

    spec: ModelSpec
    root: np.ndarray
    leaves: list[np.ndarray]

    def __post_init__(self):
        self.root = np.asarray(self.root, dtype=float)
        self.leaves = [np.asarray(t, dtype=float) for t in self.leaves]
        _check_rows(self.root, self.leaves, self.spec, "StatSet")
        if np.any(self.root < 0) or any(np.any(t < 0) for t in self.leaves):
            raise ValueError("statistics must be non-negative")

    @property
    def n_samples(self) -> float:
        return float(self.root.sum())

    @property
    def is_integral(self) -> bool:
        tables = [self.root] + self.leaves
        return all(np.array_equal(t, np.round(t)) for t in tables)

    def __add__(self, other: "StatSet") -> "StatSet":
        if self.spec != other.spec:
            raise ValueError("cannot add statistics for different models")
        return StatSet(self.spec, self.root + other.root,
                       [a + b for a, b in zip(self.leaves, other.leaves)])


def generate_model(spec: ModelSpec, rng: SeededStream) -> ParamSet:
    """Draw every simplex row independently from the uniform Dirichlet."""
    c = spec.hidden_arity
    if c == 1:
        root = np.ones(1)
    else:
        root = sample_dirichlet(np.ones(c), rng)
    leaves = []
    for r in spec.observed_arities:
        table = np.empty((c, r))
        for j in range(c):
            table[j] = sample_dirichlet(np.ones(r), rng)
        leaves.append(table)
    return ParamSet(spec, root, leaves)


def sample_dataset(model: ParamSet, n_samples: int, rng: SeededStream) -> Dataset:
    """Ancestral sampling: draw the root state, then each leaf given it.

    The returned dataset is complete (hidden column present).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    gen = rng.generator
    spec = model.spec
    hidden = _sample_categorical(gen, np.tile(model.root, (n_samples, 1)))
    rows = np.empty((n_samples, spec.n_observed), dtype=np.int64)
    for i, table in enumerate(model.leaves):
        rows[:, i] = _sample_categorical(gen, table[hidden])
    return Dataset(spec, rows, hidden)


def _sample_categorical(gen: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    # One draw per row of `probs` by inverting the row CDF.
    cdf = np.cumsum(probs, axis=1)
    u = gen.random(probs.shape[0])
    return np.minimum((u[:, None] > cdf).sum(axis=1), probs.shape[1] - 1)


def strip_hidden(data: Dataset) -> Dataset:
    """Drop the hidden column; stripping twice is a contract error."""
    if data.hidden is None:
        raise ValueError("dataset has no hidden column to strip")
    return Dataset(data.spec, data.rows.copy(), None)


def sufficient_stats(data: Dataset) -> StatSet:
    """Integer counts for complete data (incomplete data needs an E step)."""
    if data.hidden is None:
        raise ValueError("sufficient statistics need complete data")
    c = data.spec.hidden_arity
    root = np.bincount(data.hidden, minlength=c).astype(float)
    leaves = []
    for i, r in enumerate(data.spec.observed_arities):
        flat = data.hidden * r + data.rows[:, i]
        table = np.bincount(flat, minlength=c * r).astype(float).reshape(c, r)
        leaves.append(table)
    return StatSet(data.spec, root, leaves)


def write_dataset(data: Dataset, path) -> None:
    names = [f"x{i + 1}" for i in range(data.spec.n_observed)]
    if data.hidden is not None:
        names.append("hidden")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for t in range(data.n_samples):
            fields = [str(int(v)) for v in data.rows[t]]
            if data.hidden is not None:
                fields.append(str(int(data.hidden[t])))
            fh.write(",".join(fields) + "\n")


def read_dataset(path, spec: ModelSpec | None = None) -> Dataset:
    """Parse a dataset CSV.

    With ``spec`` given, state indices are validated against it; otherwise
    arities are inferred as one past the largest index seen (at least 2).
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetParseError(f"{path}: empty file")
    header = lines[0].split(",")
    has_hidden = header[-1] == "hidden"
    n_vars = len(header) - (1 if has_hidden else 0)
    expected = [f"x{i + 1}" for i in range(n_vars)]
    if header[:n_vars] != expected or n_vars < 1:
        raise DatasetParseError(f"{path}: line 1: malformed header {header!r}")
    if len(lines) == 1:
        raise DatasetParseError(f"{path}: no data rows (N >= 1 required)")

    table = np.empty((len(lines) - 1, len(header)), dtype=np.int64)
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise DatasetParseError(
                f"{path}: line {lineno}: expected {len(header)} fields, "
                f"got {len(fields)}")
        try:
            table[lineno - 2] = [int(f) for f in fields]
        except ValueError as exc:
            raise DatasetParseError(
                f"{path}: line {lineno}: non-integer field") from exc

    rows = table[:, :n_vars]
    hidden = table[:, n_vars] if has_hidden else None
    if spec is None:
        arities = tuple(max(2, int(rows[:, i].max()) + 1) for i in range(n_vars))
        c = int(hidden.max()) + 1 if has_hidden else 1
        spec = ModelSpec(arities, c)
    if spec.n_observed != n_vars:
        raise DatasetParseError(
            f"{path}: header has {n_vars} variables, spec has {spec.n_observed}")
    arities = np.array(spec.observed_arities)
    bad = np.nonzero((rows < 0) | (rows >= arities[None, :]))[0]
    if bad.size:
        raise DatasetParseError(
            f"{path}: line {bad[0] + 2}: state index out of range")
    if has_hidden:
        bad = np.nonzero((hidden < 0) | (hidden >= spec.hidden_arity))[0]
        if bad.size:
            raise DatasetParseError(
                f"{path}: line {bad[0] + 2}: hidden state out of range")
    return Dataset(spec, rows, hidden)
