"""Left-stochastic combination matrices A = [a_lk] over a topology.

Column k holds the weights agent k applies to its neighbours, so every column
sums to one and a_lk is zero outside the neighbourhood of k.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import CombinationError

STOCHASTIC_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class CombinationMatrix:
    entries: np.ndarray
    doubly_stochastic: bool

    @property
    def n_agents(self):
        return self.entries.shape[0]

    def row_sums(self):
        return self.entries.sum(axis=1)

    def column_sums(self):
        return self.entries.sum(axis=0)


def _is_doubly_stochastic(entries):
    return bool(np.all(np.abs(entries.sum(axis=1) - 1.0) <= STOCHASTIC_TOLERANCE))


def _validate(entries, topology=None):
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise CombinationError(f"Combination matrix must be square, got shape {entries.shape}.")
    if np.any(entries < 0):
        raise CombinationError("Combination weights must be nonnegative.")

    column_error = np.abs(entries.sum(axis=0) - 1.0)
    if np.any(column_error > STOCHASTIC_TOLERANCE):
        worst = int(np.argmax(column_error))
        raise CombinationError(f"Column {worst} sums to {entries[:, worst].sum()!r}; columns must sum to 1.")

    if topology is not None:
        if topology.n_agents != entries.shape[0]:
            raise CombinationError(
                f"Combination matrix is {entries.shape[0]}x{entries.shape[0]} but the topology has "
                f"{topology.n_agents} agents."
            )
        outside = (entries != 0) & ~topology.adjacency
        if np.any(outside):
            ell, k = (int(i) for i in np.argwhere(outside)[0])
            raise CombinationError(f"Weight a[{ell},{k}] is nonzero but agent {ell} is not a neighbour of {k}.")


def _finish(entries, topology=None):
    entries = np.array(entries, dtype=float)
    _validate(entries, topology)
    entries.setflags(write=False)
    return CombinationMatrix(entries=entries, doubly_stochastic=_is_doubly_stochastic(entries))


def uniform_combination(topology):
    """a_lk = 1/|N_k| for every neighbour l of k."""
    adjacency = topology.adjacency.astype(float)
    return _finish(adjacency / topology.degrees[np.newaxis, :], topology)


def metropolis_combination(topology):
    degrees = topology.degrees.astype(float)
    entries = np.zeros((topology.n_agents, topology.n_agents))
    rows, cols = np.nonzero(topology.adjacency)
    off_diagonal = rows != cols
    rows, cols = rows[off_diagonal], cols[off_diagonal]
    entries[rows, cols] = 1.0 / np.maximum(degrees[rows], degrees[cols])
    # Diagonal absorbs the residual of each column.
    np.fill_diagonal(entries, 1.0 - entries.sum(axis=0))
    return _finish(entries, topology)


def identity_combination(n_agents):
    if n_agents < 1:
        raise CombinationError("A network needs at least one agent.")
    return _finish(np.eye(n_agents))


def combination_from_matrix(entries, topology=None):
    return _finish(entries, topology)


COMBINATION_RULES = {
    "uniform": uniform_combination,
    "metropolis": metropolis_combination,
    "identity": lambda topology: identity_combination(topology.n_agents),
}


def combination_for(rule, topology):
    try:
        builder = COMBINATION_RULES[rule]
    except KeyError as exc:
        expected = sorted(COMBINATION_RULES)
        raise CombinationError(f"Unknown combination rule {rule!r}; expected one of {expected}.") from exc
    return builder(topology)
