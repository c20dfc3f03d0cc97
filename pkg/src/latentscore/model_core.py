"""Naive-Bayes model with a hidden root: structure, parameters, priors,
and the pointwise probability computations built on them.

The model has one hidden root variable with ``c`` states and ``n`` observed
leaves, each conditionally independent given the root.  Parameters are
conditional probability tables whose rows are simplices: the root
distribution (one row of length ``c``) and, per leaf ``i``, a ``c x r_i``
table.  Priors are independent Dirichlets of the same shape.

All likelihoods run in the log domain; per-row mixture sums use a stable
log-sum-exp so that products over many leaves cannot underflow.

Free coordinates drop the last component of every simplex row.  The
Dirichlet prior density is exactly the density in these coordinates (the
drop-last chart has unit Jacobian), so the unnormalized log posterior
``g = log p(D|theta) + log p(theta)`` needs no change-of-measure term when
expanded or differentiated in them.
"""

from __future__ import annotations

from dataclasses import dataclass

import json

import numpy as np
from scipy.special import gammaln, logsumexp

ROW_SUM_TOL = 1e-9

# Parameters are kept this far inside the simplex after every M step so that
# g, its gradient, and the Hessian stay finite.
PARAM_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Structural description: leaf arities and hidden-root arity."""

    observed_arities: tuple[int, ...]
    hidden_arity: int

    def __post_init__(self):
        object.__setattr__(
            self, "observed_arities", tuple(int(r) for r in self.observed_arities)
        )
        if len(self.observed_arities) < 1:
            raise ValueError("need at least one observed variable")
        if any(r < 2 for r in self.observed_arities):
            raise ValueError("observed arities must be >= 2")
        if self.hidden_arity < 1:
            raise ValueError("hidden arity must be >= 1")

    @property
    def n_observed(self) -> int:
        return len(self.observed_arities)


def binary_spec(n_observed: int, hidden_arity: int) -> ModelSpec:
    """Spec with ``n_observed`` binary leaves (the usual experimental shape)."""
    return ModelSpec((2,) * n_observed, hidden_arity)


def dimension(spec: ModelSpec) -> int:
    """Number of free parameters: (c - 1) + sum_i c * (r_i - 1)."""
    c = spec.hidden_arity
    return (c - 1) + sum(c * (r - 1) for r in spec.observed_arities)


def _check_rows(root: np.ndarray, leaves: list[np.ndarray], spec: ModelSpec,
                kind: str) -> None:
    c = spec.hidden_arity
    if root.shape != (c,):
        raise ValueError(f"{kind} root has shape {root.shape}, expected ({c},)")
    if len(leaves) != spec.n_observed:
        raise ValueError(f"{kind} has {len(leaves)} leaf tables, "
                         f"expected {spec.n_observed}")
    for i, (table, r) in enumerate(zip(leaves, spec.observed_arities)):
        if table.shape != (c, r):
            raise ValueError(f"{kind} leaf table {i} has shape {table.shape}, "
                             f"expected ({c}, {r})")


@dataclass
class ParamSet:
    """Full conditional probability tables; every row is a simplex."""

    spec: ModelSpec
    root: np.ndarray
    leaves: list[np.ndarray]

    def __post_init__(self):
        self.root = np.asarray(self.root, dtype=float)
        self.leaves = [np.asarray(t, dtype=float) for t in self.leaves]
        _check_rows(self.root, self.leaves, self.spec, "ParamSet")
        for row in self._rows():
            if np.any(row <= 0.0) or np.any(row > 1.0):
                raise ValueError("probabilities must lie in (0, 1]")
            if abs(row.sum() - 1.0) > ROW_SUM_TOL:
                raise ValueError("simplex row does not sum to 1")

    def _rows(self):
        yield self.root
        for table in self.leaves:
            yield from table

    def copy(self) -> "ParamSet":
        return ParamSet(self.spec, self.root.copy(),
                        [t.copy() for t in self.leaves])


@dataclass
class PriorSet:
    """Dirichlet hyperparameters mirroring a ParamSet's shape."""

    spec: ModelSpec
    root: np.ndarray
    leaves: list[np.ndarray]

    def __post_init__(self):
        self.root = np.asarray(self.root, dtype=float)
        self.leaves = [np.asarray(t, dtype=float) for t in self.leaves]
        _check_rows(self.root, self.leaves, self.spec, "PriorSet")
        for table in [self.root[None, :]] + self.leaves:
            if np.any(table <= 0.0):
                raise ValueError("Dirichlet hyperparameters must be positive")

    @classmethod
    def symmetric(cls, spec: ModelSpec, alpha: float) -> "PriorSet":
        """The same hyperparameter everywhere (alpha=1: uniform prior)."""
        c = spec.hidden_arity
        return cls(
            spec,
            np.full(c, alpha),
            [np.full((c, r), alpha) for r in spec.observed_arities],
        )


@dataclass
class Dataset:
    """N records of observed states, optionally with the hidden column."""

    spec: ModelSpec
    rows: np.ndarray
    hidden: np.ndarray | None = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        if self.rows.ndim != 2 or self.rows.shape[1] != self.spec.n_observed:
            raise ValueError("rows must be an (N, n_observed) integer array")
        if self.rows.shape[0] < 1:
            raise ValueError("a dataset needs at least one record")
        arities = np.array(self.spec.observed_arities)
        if np.any(self.rows < 0) or np.any(self.rows >= arities[None, :]):
            raise ValueError("observed state index out of range")
        if self.hidden is not None:
            self.hidden = np.asarray(self.hidden, dtype=np.int64)
            if self.hidden.shape != (self.rows.shape[0],):
                raise ValueError("hidden column length must match N")
            if np.any(self.hidden < 0) or np.any(self.hidden >= self.spec.hidden_arity):
                raise ValueError("hidden state index out of range")

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def is_complete(self) -> bool:
        return self.hidden is not None


def align_hidden_arity(spec: ModelSpec, data: Dataset) -> Dataset:
    """Rewrap incomplete data under a spec differing only in hidden arity.

    Test models share the data's observed variables and vary only the
    assumed number of hidden states, so the same rows are valid under any
    hidden arity as long as no hidden column is present.
    """
    if data.spec == spec:
        return data
    if data.is_complete:
        raise ValueError("cannot reinterpret complete data under another "
                         "hidden arity")
    if data.spec.observed_arities != spec.observed_arities:
        raise ValueError("observed arities differ between spec and data")
    return Dataset(spec, data.rows)


def clamp_rows(table: np.ndarray) -> np.ndarray:
    """Clamp entries into [1e-12, 1 - 1e-12], then renormalize each row."""
    t = np.clip(np.asarray(table, dtype=float), PARAM_FLOOR, 1.0 - PARAM_FLOOR)
    return t / t.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Free coordinates: drop the last component of every simplex row.

def params_to_free(params: ParamSet) -> np.ndarray:
    """Flatten to free coordinates: root[:-1], then each leaf row's [:-1]."""
    parts = [params.root[:-1]]
    for table in params.leaves:
        parts.append(table[:, :-1].ravel())
    return np.concatenate(parts)


def free_to_params(spec: ModelSpec, coords: np.ndarray) -> ParamSet:
    """Rebuild a ParamSet, restoring each dropped component as the remainder."""
    coords = np.asarray(coords, dtype=float)
    d = dimension(spec)
    if coords.shape != (d,):
        raise ValueError(f"expected {d} free coordinates, got {coords.shape}")
    c = spec.hidden_arity

    def expand(free_row: np.ndarray) -> np.ndarray:
        if np.any(free_row <= 0.0):
            raise ValueError("free coordinates must be positive")
        rest = 1.0 - free_row.sum()
        if rest <= 0.0:
            raise ValueError("free coordinates of a row must sum below 1")
        return np.concatenate([free_row, [rest]])

    pos = c - 1
    root = expand(coords[:pos])
    leaves = []
    for r in spec.observed_arities:
        table = np.empty((c, r))
        for j in range(c):
            table[j] = expand(coords[pos:pos + r - 1])
            pos += r - 1
        leaves.append(table)
    return ParamSet(spec, root, leaves)


# ---------------------------------------------------------------------------
# Likelihood machinery.

def _component_log_scores(params: ParamSet, rows: np.ndarray) -> np.ndarray:
    """(N, c) matrix of log[root_j * prod_i p(x_i | j)] per record."""
    scores = np.log(params.root)[None, :].repeat(rows.shape[0], axis=0)
    for i, table in enumerate(params.leaves):
        scores += np.log(table).T[rows[:, i]]
    return scores


def log_likelihood(params: ParamSet, data: Dataset) -> float:
    """Log probability of the data.

    Incomplete data marginalizes the hidden root per record through
    log-sum-exp; complete data just reads off the assigned component.
    """
    if params.spec != data.spec:
        raise ValueError("params and data describe different models")
    scores = _component_log_scores(params, data.rows)
    if data.hidden is None:
        return float(np.sum(logsumexp(scores, axis=1)))
    return float(np.sum(scores[np.arange(data.n_samples), data.hidden]))


def log_prior(params: ParamSet, prior: PriorSet) -> float:
    """Log Dirichlet density of the parameters, row by row.

    This is the density with respect to the drop-last free coordinates of
    each row, so it can be added to the log likelihood and expanded there
    directly.
    """
    if params.spec != prior.spec:
        raise ValueError("params and prior describe different models")
    total = 0.0
    pairs = [(params.root, prior.root)]
    for table, alphas in zip(params.leaves, prior.leaves):
        pairs.extend(zip(table, alphas))
    for theta, alpha in pairs:
        if np.any(theta <= 0.0):
            raise ValueError("prior density needs interior parameters")
        total += (gammaln(alpha.sum()) - gammaln(alpha).sum()
                  + ((alpha - 1.0) * np.log(theta)).sum())
    return float(total)


def log_posterior_g(params: ParamSet, data: Dataset, prior: PriorSet) -> float:
    """Unnormalized log posterior g = log p(D|theta) + log p(theta)."""
    return log_likelihood(params, data) + log_prior(params, prior)


def posterior_over_hidden(params: ParamSet, row) -> np.ndarray:
    """p(root state | one observed record), computed in the log domain."""
    row = np.asarray(row, dtype=np.int64).reshape(1, -1)
    scores = _component_log_scores(params, row)[0]
    post = np.exp(scores - logsumexp(scores))
    return post / post.sum()


def posterior_matrix(params: ParamSet, data: Dataset) -> np.ndarray:
    """(N, c) hidden-state posteriors for every record."""
    scores = _component_log_scores(params, data.rows)
    return np.exp(scores - logsumexp(scores, axis=1, keepdims=True))


def counts_from_posteriors(post: np.ndarray, data: Dataset):
    """Accumulate (root_counts, leaf_counts) from an (N, c) posterior matrix."""
    root_counts = post.sum(axis=0)
    leaf_counts = []
    for i, r in enumerate(data.spec.observed_arities):
        table = np.zeros((r, post.shape[1]))
        np.add.at(table, data.rows[:, i], post)
        leaf_counts.append(table.T.copy())
    return root_counts, leaf_counts


def expected_counts(params: ParamSet, data: Dataset):
    """Posterior-weighted sufficient statistics as raw arrays.

    Complete data yields the deterministic counts (posteriors collapse to
    indicators).  Returns ``(root_counts, leaf_counts)`` with the shapes of
    the corresponding parameter tables.
    """
    n = data.n_samples
    if data.hidden is not None:
        post = np.zeros((n, params.spec.hidden_arity))
        post[np.arange(n), data.hidden] = 1.0
    else:
        post = posterior_matrix(params, data)
    return counts_from_posteriors(post, data)


def grad_g(coords: np.ndarray, data: Dataset, prior: PriorSet) -> np.ndarray:
    """Exact gradient of g with respect to the free coordinates.

    For each simplex row the derivative routes through both the free
    component and the dropped remainder: with virtual counts
    v_k = E[N_k] + alpha_k - 1 it is v_k / theta_k - v_last / theta_last.
    The expected counts are the posterior-weighted statistics at ``coords``
    (for complete data, the actual counts), which is the standard missing-data
    identity for the score function.
    """
    params = free_to_params(data.spec, coords)
    root_counts, leaf_counts = expected_counts(params, data)

    def row_grad(theta, counts, alpha):
        v = counts + alpha - 1.0
        return v[:-1] / theta[:-1] - v[-1] / theta[-1]

    parts = [row_grad(params.root, root_counts, prior.root)]
    for table, counts, alphas in zip(params.leaves, leaf_counts, prior.leaves):
        for j in range(data.spec.hidden_arity):
            parts.append(row_grad(table[j], counts[j], alphas[j]))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Model file format: one JSON document, probabilities as decimal reals.

def model_to_json_dict(params: ParamSet) -> dict:
    return {
        "spec": {
            "hidden_arity": params.spec.hidden_arity,
            "observed_arities": list(params.spec.observed_arities),
        },
        "root": params.root.tolist(),
        "leaves": [table.tolist() for table in params.leaves],
    }


def params_from_json_dict(doc: dict) -> ParamSet:
    spec = ModelSpec(
        tuple(doc["spec"]["observed_arities"]), doc["spec"]["hidden_arity"]
    )
    return ParamSet(spec, np.array(doc["root"]),
                    [np.array(t) for t in doc["leaves"]])


def write_model(params: ParamSet, path, extra: dict | None = None) -> None:
    """Write the model JSON; ``extra`` adds sibling keys (e.g. fit metadata).

    Python's float repr round-trips exactly, so probabilities survive the
    trip losslessly.
    """
    doc = model_to_json_dict(params)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_model(path) -> ParamSet:
    with open(path, encoding="utf-8") as fh:
        return params_from_json_dict(json.load(fh))
