"""Brute-force checks for the entropy pipeline on small instances.

Word enumeration over a labelled graph, an independent word counter, growth
estimates, and closed-loop simulation of the real system under a partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError, SoundnessViolationError
from .system import as_model

DEFAULT_MAX_ORACLE_NODES = 200


@dataclass(frozen=True)
class WordSet:
    horizon: int
    words: frozenset

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return tuple(word) in self.words


def _check(graph, N, max_nodes):
    if N < 1:
        raise DomainError(f"horizon must be >= 1, got {N}")
    if graph.n > max_nodes:
        raise CapacityError(f"graph has {graph.n} nodes, more than the oracle cap of {max_nodes}")


def enumerate_words(graph, N, max_nodes=DEFAULT_MAX_ORACLE_NODES):
    """All distinct label words read along walks through ``N`` nodes.

    Depth-first over words; each prefix is kept once together with the set of
    nodes at which some walk reading it can end.
    """
    _check(graph, N, max_nodes)
    labels = graph.labels.tolist()
    succ = [graph.successors(i).tolist() for i in range(graph.n)]
    stack = []
    for a in sorted(set(labels)):
        stack.append(((a,), frozenset(i for i in range(graph.n) if labels[i] == a)))
    words = set()
    while stack:
        word, ends = stack.pop()
        if len(word) == N:
            words.add(word)
            continue
        nxt = {}
        for v in ends:
            for w in succ[v]:
                nxt.setdefault(labels[w], set()).add(w)
        for a, nodes in nxt.items():
            stack.append((word + (a,), frozenset(nodes)))
    return WordSet(N, frozenset(words))


def enumerate_edge_words(edges, n_nodes, N, max_nodes=DEFAULT_MAX_ORACLE_NODES):
    """Distinct words read along ``N``-edge paths of an edge-labelled graph.

    ``edges`` are ``(source, label, target)`` triples, as produced for the
    core of a deterministic graph.
    """
    if N < 1:
        raise DomainError(f"horizon must be >= 1, got {N}")
    if n_nodes > max_nodes:
        raise CapacityError(f"graph has {n_nodes} nodes, more than the oracle cap of {max_nodes}")
    out = [[] for _ in range(n_nodes)]
    for s, a, t in edges:
        out[s].append((a, t))
    stack = [((), frozenset(range(n_nodes)))]
    words = set()
    while stack:
        word, ends = stack.pop()
        if len(word) == N:
            words.add(word)
            continue
        nxt = {}
        for v in ends:
            for a, t in out[v]:
                nxt.setdefault(a, set()).add(t)
        for a, nodes in nxt.items():
            stack.append((word + (a,), frozenset(nodes)))
    return WordSet(N, frozenset(words))


def count_words(graph, N, max_nodes=DEFAULT_MAX_ORACLE_NODES):
    """``|W_N|`` by dynamic programming over end-node sets.

    A word determines the set of nodes where walks reading it can end, so
    counting (set, multiplicity) pairs forward counts distinct words without
    listing them.
    """
    _check(graph, N, max_nodes)
    adj = graph.adjacency.toarray() != 0
    labels = np.asarray(graph.labels)
    counts = {}
    for a in np.unique(labels):
        key = tuple(np.flatnonzero(labels == a))
        counts[key] = counts.get(key, 0) + 1
    for _ in range(N - 1):
        nxt = {}
        for key, c in counts.items():
            reach = adj[list(key)].any(axis=0)
            for a in np.unique(labels[reach]):
                k = tuple(np.flatnonzero(reach & (labels == a)))
                nxt[k] = nxt.get(k, 0) + c
        counts = nxt
    return sum(counts.values())


def growth_estimate(wordsets):
    """``(1/N) log2 |W_N|`` at the largest horizon, plus the whole sequence.

    Accepts `WordSet` objects or plain counts indexed by horizon 1, 2, ...
    Each term bounds the limiting growth rate from above.
    """
    sizes = [len(w) if isinstance(w, WordSet) else int(w) for w in wordsets]
    if len(sizes) < 2:
        raise DomainError("need word counts for at least two horizons")
    seq = [math.log2(s) / n if s > 0 else float("-inf") for n, s in enumerate(sizes, start=1)]
    return seq[-1], seq


def word_accepted(graph, word):
    """True if some walk in ``graph`` reads ``word``."""
    labels = np.asarray(graph.labels)
    current = labels == word[0]
    adj = graph.adjacency
    for a in word[1:]:
        if not current.any():
            return False
        reach = np.asarray(adj[np.flatnonzero(current)].sum(axis=0)).ravel() > 0
        current = reach & (labels == a)
    return bool(current.any())


def simulate_closed_loop(model, partition, x0, N):
    """Iterate ``x <- f(x, G(label(x)))`` for ``N`` steps from each row of ``x0``.

    Returns ``(labels, cells, states)`` of shapes ``(k, N)``, ``(k, N + 1)``
    and ``(k, N + 1, n)``, where cell positions index ``partition.cells``.
    Raises `SoundnessViolationError` if any trajectory leaves the partition
    domain.
    """
    model = as_model(model)
    grid = partition.grid
    x = np.atleast_2d(np.asarray(x0, dtype=float))
    pos = np.full(grid.size, -1, dtype=np.int64)
    pos[partition.cells] = np.arange(len(partition.cells))
    k = len(x)
    states = np.empty((k, N + 1, x.shape[1]))
    cells = np.empty((k, N + 1), dtype=np.int64)
    labels = np.empty((k, N), dtype=np.int64)
    for t in range(N + 1):
        states[:, t] = x
        idx = grid.locate(x)
        p = np.where(idx >= 0, pos[np.maximum(idx, 0)], -1)
        if np.any(p < 0):
            bad = int(np.flatnonzero(p < 0)[0])
            raise SoundnessViolationError(
                f"trajectory from {states[bad, 0].tolist()} left the domain at step {t}",
                trajectory=states[bad, :t + 1].copy())
        cells[:, t] = p
        if t == N:
            break
        lab = partition.labels[p]
        labels[:, t] = lab
        nxt = np.empty_like(x)
        for a in np.unique(lab):
            sel = lab == a
            nxt[sel] = model.step(x[sel], partition.inputs[a - 1])
        x = nxt
    return labels, cells, states


def sample_trajectory_words(model, partition, x0, N):
    """Label word of length ``N`` of the closed-loop trajectory from ``x0``."""
    labels, _, _ = simulate_closed_loop(model, partition, np.atleast_2d(x0), N)
    return tuple(int(a) for a in labels[0])
