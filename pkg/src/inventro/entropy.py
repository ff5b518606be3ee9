"""Entropy of the symbolic closed loop: transition graph to spectral radius.

Pipeline for a fixed invariant partition:

1. cell-to-cell transition matrix from the snapped post boxes;
2. labelled graph (edge label = label of the source cell);
3. strongly connected components;
4. per component, a label-deterministic graph by subset construction;
5. Perron root of its edge-count matrix.

The bound is the maximum over components of ``log2(rho)``.
"""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .abstraction import (DEFAULT_SNAP_TOL, build_grid, build_input_grid, post_ranges,
                          synthesize_invariant_controller, synthesize_with_reversal)
from .determinizer import InvariantPartition, determinize, partition_from_choice
from .errors import CapacityError, InvarianceViolationError, PartitionIntegrityError
from .system import as_model

log = logging.getLogger(__name__)

DEFAULT_MAX_SUBSETS = 2_000_000
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
POWER_STALL = 50            # iterations without any narrowing of the bracket


# -- transition matrix and labelled graph ----------------------------------------

def expand_ranges(first, last, shape):
    """All flat (dimension-0-fastest) cell indices inside each inclusive index box.

    Returns ``(rows, cells)`` with one entry per (box, cell) pair.
    """
    first = np.asarray(first, dtype=np.int64)
    extent = np.asarray(last, dtype=np.int64) - first + 1
    counts = np.prod(extent, axis=1)
    rows = np.repeat(np.arange(len(first)), counts)
    offset = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    flat = np.zeros(len(rows), dtype=np.int64)
    stride = 1
    for d in range(first.shape[1]):
        e = extent[rows, d]
        digit = offset % e
        offset //= e
        flat += (first[rows, d] + digit) * stride
        stride *= shape[d]
    return rows, flat


@dataclass(eq=False)
class TransitionMatrix:
    """Sparse boolean cell-to-cell matrix over the partition's cells (by position)."""

    cells: np.ndarray
    matrix: sp.csr_matrix

    @property
    def n(self):
        return len(self.cells)

    @property
    def rows(self):
        m = self.matrix
        return [m.indices[m.indptr[i]:m.indptr[i + 1]].tolist() for i in range(self.n)]


def transition_matrix(system, grid, partition, snap_tol=DEFAULT_SNAP_TOL):
    """``B[i, j] = 1`` iff the post box of cell ``i`` under its element's input meets cell ``j``."""
    model = as_model(system)
    cells = partition.cells
    pos = np.full(grid.size, -1, dtype=np.int64)
    pos[cells] = np.arange(len(cells))
    src_all, dst_all = [], []
    for a in range(1, len(partition) + 1):
        rows = np.flatnonzero(partition.labels == a)
        first, last, inside = post_ranges(model, grid, cells[rows], partition.inputs[a - 1], snap_tol)
        if not inside.all():
            bad = cells[rows][~inside][0]
            raise InvarianceViolationError(f"post box of cell {int(bad)} leaves the grid domain")
        r, hit = expand_ranges(first, last, grid.shape)
        dst = pos[hit]
        if np.any(dst < 0):
            bad = cells[rows[r[dst < 0][0]]]
            raise InvarianceViolationError(f"post box of cell {int(bad)} leaves the controller domain")
        src_all.append(rows[r])
        dst_all.append(dst)
    src = np.concatenate(src_all) if src_all else np.zeros(0, np.int64)
    dst = np.concatenate(dst_all) if dst_all else np.zeros(0, np.int64)
    n = len(cells)
    m = sp.csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    m.sum_duplicates()
    m.data[:] = 1
    return TransitionMatrix(cells, m)


def label_map(partition):
    """Cell index -> label of the partition element containing it."""
    labels = np.asarray(partition.labels)
    if len(labels) != len(partition.cells) or np.any(labels < 1):
        raise PartitionIntegrityError("partition does not label every cell")
    return dict(zip(np.asarray(partition.cells).tolist(), labels.tolist()))


@dataclass(eq=False)
class LabeledGraph:
    """Directed graph on cells; every edge carries its source node's label."""

    cells: np.ndarray
    labels: np.ndarray
    adjacency: sp.csr_matrix

    @property
    def n(self):
        return len(self.cells)

    def successors(self, i):
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def edges(self):
        coo = self.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(i), int(j), int(self.labels[i])) for i, j in zip(coo.row[order], coo.col[order])]

    def subgraph(self, nodes):
        nodes = np.asarray(nodes)
        return LabeledGraph(self.cells[nodes], self.labels[nodes],
                            self.adjacency[nodes][:, nodes].tocsr())

    @classmethod
    def from_edges(cls, labels, edges, cells=None):
        """Small graphs by hand: ``labels[i]`` per node, ``edges`` as ``(i, j)`` pairs."""
        labels = np.asarray(labels, dtype=np.int64)
        n = len(labels)
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        adj = sp.csr_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(n, n))
        adj.sum_duplicates()
        adj.data[:] = 1
        cells = np.arange(n) if cells is None else np.asarray(cells)
        return cls(cells, labels, adj)


def labeled_graph(transitions, partition):
    return LabeledGraph(transitions.cells, np.asarray(partition.labels), transitions.matrix)


# -- strongly connected components -----------------------------------------------

def tarjan_scc(graph):
    """Strongly connected components (iterative Tarjan), each a sorted node array.

    Accepts a `LabeledGraph`, a `DeterministicGraph` or a square sparse/dense matrix.
    Components come out in reverse topological order of the condensation.
    """
    if isinstance(graph, LabeledGraph):
        adj = graph.adjacency
    elif isinstance(graph, DeterministicGraph):
        adj = graph.closure_matrix()
    else:
        adj = sp.csr_matrix(graph)
    adj = sp.csr_matrix(adj)
    indptr, indices = adj.indptr, adj.indices
    n = adj.shape[0]
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    stack = []
    out = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, indptr[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, ptr = work[-1]
            end = indptr[v + 1]
            while ptr < end:
                w = indices[ptr]
                ptr += 1
                if index[w] < 0:
                    work[-1] = (v, ptr)
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, indptr[w]))
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    out.append(np.sort(np.array(comp, dtype=np.int64)))
    return out


def is_nontrivial(adj, comp):
    """A component carries a cycle unless it is one node without a self-loop."""
    if len(comp) > 1:
        return True
    i = int(comp[0])
    return bool(adj[i, i] != 0)


# -- deterministic presentation -------------------------------------------------

@dataclass(eq=False)
class DeterministicGraph:
    """Subset-construction graph; nodes are sets of nodes of the source graph.

    ``subsets`` and ``edges`` hold the whole closure from the start subset
    (index 0, all nodes of the component). ``core`` is a terminal strongly
    connected component of the closure; the presentation proper is the
    subgraph on ``core``.
    """

    subsets: list
    edges: list
    core: np.ndarray
    source: LabeledGraph | None = field(default=None, repr=False)

    start = 0

    @property
    def size(self):
        return len(self.core)

    def closure_matrix(self):
        n = len(self.subsets)
        if not self.edges:
            return sp.csr_matrix((n, n), dtype=np.int64)
        e = np.array(self.edges, dtype=np.int64)
        return sp.csr_matrix((np.ones(len(e), dtype=np.int64), (e[:, 0], e[:, 2])), shape=(n, n))

    def core_subsets(self):
        return [self.subsets[i] for i in self.core]

    def core_edges(self):
        rank = {int(c): k for k, c in enumerate(self.core)}
        return [(rank[s], a, rank[t]) for s, a, t in self.edges if s in rank and t in rank]

    def out_labels(self, node):
        return [a for s, a, _ in self.edges if s == node]


def subset_construction(graph, nodes=None, max_subsets=DEFAULT_MAX_SUBSETS):
    """Label-deterministic presentation of ``graph`` restricted to ``nodes``.

    Breadth-first closure from the subset of all nodes: from each subset ``S``
    and each label ``a`` among its members, ``S' = {j : i in S, label(i) = a, i -> j}``.
    """
    sub = graph if nodes is None else graph.subgraph(nodes)
    adj = sub.adjacency
    labels = sub.labels
    start = np.arange(sub.n, dtype=np.int64)
    subsets = [start]
    seen = {start.tobytes(): 0}
    edges = []
    queue = deque([0])
    while queue:
        s = queue.popleft()
        members = subsets[s]
        labs = labels[members]
        for a in np.unique(labs):
            rows = members[labs == a]
            succ = np.unique(adj[rows].indices).astype(np.int64)
            if len(succ) == 0:
                continue
            key = succ.tobytes()
            t = seen.get(key)
            if t is None:
                if len(subsets) >= max_subsets:
                    raise CapacityError(f"subset construction exceeded {max_subsets} nodes")
                t = len(subsets)
                seen[key] = t
                subsets.append(succ)
                queue.append(t)
            edges.append((s, int(a), t))
    det = DeterministicGraph(subsets, edges, np.zeros(0, dtype=np.int64), source=sub)
    det.core = terminal_component(det.closure_matrix())
    return det


def terminal_component(adj):
    """The terminal strongly connected component holding the lowest node index.

    Every terminal component of the closure of a strongly connected graph
    reads the same finite words as the graph itself, so any one of them is a
    presentation; the lowest index makes the choice reproducible.
    """
    adj = sp.csr_matrix(adj)
    comps = tarjan_scc(adj)
    owner = np.empty(adj.shape[0], dtype=np.int64)
    for k, c in enumerate(comps):
        owner[c] = k
    coo = adj.tocoo()
    leaving = np.zeros(len(comps), dtype=bool)
    leaving[owner[coo.row[owner[coo.row] != owner[coo.col]]]] = True
    sinks = [c for k, c in enumerate(comps) if not leaving[k] and is_nontrivial(adj, c)]
    if not sinks:
        return np.zeros(0, dtype=np.int64)
    return min(sinks, key=lambda c: int(c[0]))


def adjacency_matrix(det, core_only=True):
    """Edge-count matrix ``R[i, j]`` = number of (distinctly labelled) edges i -> j."""
    m = det.closure_matrix().tocsr()
    m.sum_duplicates()
    if core_only:
        m = m[det.core][:, det.core]
    return m.toarray() if m.shape[0] <= 2000 else m


# -- spectral radius ----------------------------------------------------------------

def _perron_root(m, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Perron root of an irreducible non-negative matrix.

    Power iteration on ``m + I`` (primitive, so no oscillation) with L1
    normalization. The Collatz-Wielandt quotients ``min/max (Mx)_i / x_i``
    bracket the root; iteration stops once the bracket is narrower than
    ``tol`` relative, or it has stopped narrowing (floating-point floor).
    The smallest upper end seen is returned.
    """
    n = m.shape[0]
    shifted = m + sp.identity(n, format="csr") if sp.issparse(m) else m + np.eye(n)
    x = np.full(n, 1.0 / n)
    lo, hi = 0.0, math.inf
    best, stale = math.inf, 0
    for _ in range(max_iter):
        y = shifted @ x
        ratio = y / x
        lo, hi = max(lo, float(ratio.min())), min(hi, float(ratio.max()))
        if hi - lo <= tol * hi:
            break
        if hi - lo < best:
            best, stale = hi - lo, 0
        else:
            stale += 1
            if stale >= POWER_STALL:
                break
        x = y / y.sum()
    else:
        log.warning("power iteration hit %d iterations; bracket [%g, %g]", max_iter, lo - 1, hi - 1)
    return max(hi - 1.0, 0.0)


def spectral_radius(R, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Spectral radius of a non-negative square matrix.

    The support is split into strongly connected blocks; the result is the
    largest Perron root among them.
    """
    m = sp.csr_matrix(R, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise ValueError("spectral radius of a non-square matrix")
    if m.shape[0] == 0 or m.nnz == 0:
        return 0.0
    if m.data.min() < 0:
        raise ValueError("matrix has negative entries")
    best = 0.0
    for comp in tarjan_scc(m):
        if len(comp) == 1:
            best = max(best, float(m[comp[0], comp[0]]))
            continue
        block = m[comp][:, comp]
        best = max(best, _perron_root(block if len(comp) > 64 else block.toarray(), tol, max_iter))
    return best


# -- reports and orchestration -----------------------------------------------------

@dataclass(eq=False)
class SccResult:
    nodes: int
    det_nodes: int
    rho: float


@dataclass(eq=False)
class EntropyReport:
    bound: float
    sccs: list
    partition_size: int
    cells: int
    sampling_time: float | None = None
    acyclic: bool = False
    metadata: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    controller: object = field(default=None, repr=False)
    partition: InvariantPartition | None = field(default=None, repr=False)
    graph: LabeledGraph | None = field(default=None, repr=False)
    det_graphs: list = field(default_factory=list, repr=False)

    @property
    def bound_per_Ts(self):
        return None if self.sampling_time is None else self.bound / self.sampling_time

    @property
    def rho(self):
        return max((s.rho for s in self.sccs), default=0.0)

    @property
    def wallclock_ms(self):
        return sum(self.timings.values())

    def as_dict(self, include_timings=False):
        d = {"bound": self.bound}
        if self.sampling_time is not None:
            d["bound_per_Ts"] = self.bound_per_Ts
        d["scc_count"] = len(self.sccs)
        for k, s in enumerate(self.sccs, start=1):
            d[f"rho_{k}"] = s.rho
            d[f"scc_nodes_{k}"] = s.nodes
            d[f"det_nodes_{k}"] = s.det_nodes
        d["partition_size"] = self.partition_size
        d["cells"] = self.cells
        if self.acyclic:
            d["warning"] = "acyclic"
        d.update(self.metadata)
        if include_timings:
            d["wallclock_ms"] = round(self.wallclock_ms, 3)
            d.update({f"time_{k}_ms": round(v, 3) for k, v in self.timings.items()})
        return d

    def to_text(self, include_timings=False):
        return "".join(f"{k}={format_value(v)}\n" for k, v in self.as_dict(include_timings).items())

    def to_record(self, include_timings=False):
        return json.dumps(self.as_dict(include_timings), sort_keys=True)


def format_value(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    return str(v)


class _Clock:
    def __init__(self):
        self.timings = {}

    def lap(self, name, t0):
        self.timings[name] = (time.perf_counter() - t0) * 1000.0
        return time.perf_counter()


def entropy_of_partition(system, partition, snap_tol=DEFAULT_SNAP_TOL,
                         max_subsets=DEFAULT_MAX_SUBSETS, clock=None):
    """Upper bound ``h(B, A)`` for a fixed invariant partition."""
    model = as_model(system)
    clock = clock or _Clock()
    t = time.perf_counter()
    trans = transition_matrix(model, partition.grid, partition, snap_tol)
    graph = labeled_graph(trans, partition)
    t = clock.lap("transitions", t)
    comps = [c for c in tarjan_scc(graph) if is_nontrivial(graph.adjacency, c)]
    comps.sort(key=lambda c: int(c[0]))
    t = clock.lap("scc", t)
    sccs, dets = [], []
    for comp in comps:
        det = subset_construction(graph, comp, max_subsets=max_subsets)
        rho = spectral_radius(adjacency_matrix(det))
        sccs.append(SccResult(len(comp), det.size, rho))
        dets.append(det)
    clock.lap("presentation", t)
    acyclic = not sccs
    if acyclic:
        warnings.warn("transition graph has no cycles; bound is 0", RuntimeWarning, stacklevel=2)
    bound = max((math.log2(s.rho) for s in sccs if s.rho > 0), default=0.0)
    bound = max(bound, 0.0)
    return EntropyReport(
        bound=bound, sccs=sccs, partition_size=len(partition), cells=len(partition.cells),
        sampling_time=model.sampling_time, acyclic=acyclic, timings=clock.timings,
        partition=partition, graph=graph, det_graphs=dets,
    )


def entropy_upper_bound(system, grid, inputs, determinizer="maxfreq", reversed_system=None,
                        snap_tol=DEFAULT_SNAP_TOL, max_subsets=DEFAULT_MAX_SUBSETS):
    """Full pipeline: controller synthesis, determinization, graph entropy.

    With ``reversed_system`` the controller domain is intersected with that of
    the time-reversed system and the forward controller re-synthesized on it.
    """
    model = as_model(system)
    clock = _Clock()
    t = time.perf_counter()
    if reversed_system is None:
        ctrl = synthesize_invariant_controller(model, grid, inputs, snap_tol=snap_tol)
    else:
        ctrl = synthesize_with_reversal(model, reversed_system, grid, inputs, snap_tol=snap_tol)
    t = clock.lap("synthesis", t)
    choice = determinize(ctrl, determinizer)
    partition = partition_from_choice(ctrl, choice, model, snap_tol)
    clock.lap("determinization", t)
    report = entropy_of_partition(model, partition, snap_tol, max_subsets, clock)
    report.controller = ctrl
    report.metadata.update({
        "system": model.name,
        "eta_s": list(grid.eta_s),
        "eta_i": list(inputs.eta_i),
        "grid_cells": grid.size,
        "inputs": len(inputs),
        "determinizer": determinizer,
        "tree_leaves": len(partition),
    })
    return report


def bound_for(system, eta_s, eta_i, determinizer="maxfreq", domain=None, mode="tile", **kwargs):
    """Convenience wrapper building the grids from the model's safe set."""
    model = as_model(system)
    grid = build_grid(domain or model.safe_set, eta_s, mode=mode)
    inputs = build_input_grid(model.input_range, eta_i)
    return entropy_upper_bound(model, grid, inputs, determinizer, **kwargs)


# -- DOT ------------------------------------------------------------------------------

def dot_export(graph, name="G"):
    """Graphviz text for a `LabeledGraph` or the core of a `DeterministicGraph`."""
    lines = [f"digraph {name} {{"]
    if isinstance(graph, DeterministicGraph):
        cells = graph.source.cells if graph.source is not None else None
        for k, s in enumerate(graph.core_subsets(), start=1):
            members = s if cells is None else cells[s]
            lines.append(f'  R{k} [cells="{" ".join(str(int(c)) for c in members)}"];')
        for s, a, t in sorted(graph.core_edges()):
            lines.append(f'  R{s + 1} -> R{t + 1} [label="{a}"];')
    else:
        for i, c in enumerate(graph.cells):
            lines.append(f'  B{int(c)} [label="{int(graph.labels[i])}"];')
        for i, j, a in graph.edges():
            lines.append(f'  B{int(graph.cells[i])} -> B{int(graph.cells[j])} [label="{a}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
