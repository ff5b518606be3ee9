"""Determinize a controller and compress it into a coarse invariant partition.

A cell -> input choice is made by ``maxfreq`` or ``minnorm``, then a CART tree
with axis-aligned splits on grid boundaries groups cells by chosen input.
Each leaf is one element of the partition, so the grid refines the partition
by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .abstraction import DEFAULT_SNAP_TOL, CellCover, post_ranges
from .errors import DomainError, InvarianceViolationError, PartitionIntegrityError
from .system import as_model

DETERMINIZERS = ("maxfreq", "minnorm")


def determinize_maxfreq(ctrl):
    """Per cell, the permissible input that is permissible in the most cells overall.

    Ties go to the smallest input index.
    """
    freq = ctrl.allowed.sum(axis=0)
    score = np.where(ctrl.allowed, freq[None, :], -1)
    return np.argmax(score, axis=1)


def determinize_minnorm(ctrl):
    """Per cell, the permissible input of least Euclidean norm.

    Input points are in lexicographic order, so the smallest index among
    equal norms is the lexicographically smallest vector.
    """
    norms = np.einsum("ij,ij->i", ctrl.inputs.points, ctrl.inputs.points)
    score = np.where(ctrl.allowed, norms[None, :], np.inf)
    return np.argmin(score, axis=1)


def determinize(ctrl, name):
    if name == "maxfreq":
        return determinize_maxfreq(ctrl)
    if name == "minnorm":
        return determinize_minnorm(ctrl)
    raise DomainError(f"unknown determinizer {name!r}; expected one of {', '.join(DETERMINIZERS)}")


@dataclass
class Node:
    """Inner node: ``x[dim] < threshold`` goes left. Leaf: ``left`` is None."""

    dim: int = -1
    split: int = -1           # grid boundary index along ``dim``
    threshold: float = np.nan
    left: "Node | None" = None
    right: "Node | None" = None
    input_index: int = -1
    members: np.ndarray | None = None   # controller rows, leaves only

    @property
    def is_leaf(self):
        return self.left is None


@dataclass
class DecisionTree:
    root: Node
    grid: object

    def leaves(self):
        """Leaves in depth-first (left before right) order."""
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    def __len__(self):
        return len(self.leaves())

    def depth(self):
        best, stack = 0, [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if not node.is_leaf:
                stack += [(node.left, d + 1), (node.right, d + 1)]
        return best

    def leaf_of(self, points):
        """Leaf number (depth-first order, from 0) of each point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        order = {id(leaf): k for k, leaf in enumerate(self.leaves())}
        result = np.empty(len(points), dtype=np.int64)
        stack = [(self.root, np.arange(len(points)))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                result[idx] = order[id(node)]
                continue
            go_left = points[idx, node.dim] < node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return result


def _entropy(counts):
    n = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, counts / np.maximum(n, 1), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=-1)


def _best_split(multi, y, n_classes):
    """Highest-information-gain split; ties go to the lowest dimension, then threshold."""
    n = len(y)
    parent = np.bincount(y, minlength=n_classes).astype(float)
    h_parent = _entropy(parent)
    best = None
    for d in range(multi.shape[1]):
        col = multi[:, d]
        lo, hi = col.min(), col.max()
        if lo == hi:
            continue
        hist = np.zeros((hi - lo + 1, n_classes))
        np.add.at(hist, (col - lo, y), 1.0)
        left = np.cumsum(hist, axis=0)[:-1]   # split t = lo + 1 + k keeps cells with index < t
        right = parent[None, :] - left
        n_left = left.sum(axis=1)
        valid = (n_left > 0) & (n_left < n)
        gain = h_parent - (n_left * _entropy(left) + (n - n_left) * _entropy(right)) / n
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        g = gain[k]
        if best is None or g > best[0] + 1e-12:
            best = (g, d, int(lo + 1 + k))
    return best


def build_tree(ctrl, choice):
    """CART tree over the controller domain separating cells by chosen input."""
    choice = np.asarray(choice)
    if len(choice) != len(ctrl.cells):
        raise DomainError("choice must give one input index per controller cell")
    grid = ctrl.grid
    classes, y = np.unique(choice, return_inverse=True)
    multi = grid.multi_index(ctrl.cells)
    edges = [grid.edges(d) for d in range(grid.dim)]
    root = Node(members=np.arange(len(choice)))
    stack = [root]
    while stack:
        node = stack.pop()
        rows = node.members
        ys = y[rows]
        if np.all(ys == ys[0]):
            node.input_index = int(classes[ys[0]])
            continue
        _, d, t = _best_split(multi[rows], ys, len(classes))
        go_left = multi[rows, d] < t
        node.dim, node.split, node.threshold = d, t, float(edges[d][t])
        node.left = Node(members=rows[go_left])
        node.right = Node(members=rows[~go_left])
        node.members = None
        stack += [node.right, node.left]
    return DecisionTree(root, grid)


def export_tree(tree):
    """Pre-order text: ``node <dim> <threshold>`` / ``leaf <input index>``, indented by depth."""
    lines, stack = [], [(tree.root, 0)]
    while stack:
        node, depth = stack.pop()
        pad = "  " * depth
        if node.is_leaf:
            lines.append(f"{pad}leaf {node.input_index}")
        else:
            lines.append(f"{pad}node {node.dim} {node.threshold:.17g}")
            stack += [(node.right, depth + 1), (node.left, depth + 1)]
    return "\n".join(lines) + "\n"


@dataclass(eq=False)
class InvariantPartition:
    """Coarse partition of the controller domain, one input per element.

    ``labels[p]`` is the label (1-based) of controller row ``p``;
    ``inputs[a - 1]`` is the input vector assigned to label ``a``.
    """

    cells: np.ndarray
    labels: np.ndarray
    inputs: np.ndarray
    grid: object = None
    tree: DecisionTree | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.inputs)

    @property
    def elements(self):
        return [(a, self.cells[self.labels == a], self.inputs[a - 1]) for a in range(1, len(self) + 1)]

    @property
    def refinement(self):
        return dict(zip(self.cells.tolist(), self.labels.tolist()))

    def input_of(self, label):
        return self.inputs[label - 1]


def check_partition(partition, system, snap_tol=DEFAULT_SNAP_TOL):
    """Raise unless the partition is well formed and one-step invariant."""
    q = len(partition)
    labels = partition.labels
    if len(labels) != len(partition.cells) or np.any(labels < 1) or np.any(labels > q):
        raise PartitionIntegrityError("labels must be in 1..q, one per cell")
    if np.any(np.bincount(labels, minlength=q + 1)[1:] == 0):
        raise PartitionIntegrityError("every partition element must contain at least one cell")
    if np.any(np.diff(partition.cells) <= 0):
        raise PartitionIntegrityError("partition cells must be distinct and sorted")
    model = as_model(system)
    grid = partition.grid
    mask = np.zeros(grid.size, dtype=bool)
    mask[partition.cells] = True
    cover = CellCover(grid, mask)
    for a in range(1, q + 1):
        sel = partition.cells[labels == a]
        first, last, inside = post_ranges(model, grid, sel, partition.inputs[a - 1], snap_tol)
        bad = ~(inside & cover.covers(first, last))
        if bad.any():
            raise InvarianceViolationError(
                f"cell {int(sel[bad][0])} with label {a} leaves the domain under input "
                f"{partition.inputs[a - 1].tolist()}")


def tree_to_partition(tree, ctrl, system=None, snap_tol=DEFAULT_SNAP_TOL):
    """One partition element per leaf, labelled in depth-first leaf order from 1."""
    leaves = tree.leaves()
    labels = np.zeros(len(ctrl.cells), dtype=np.int64)
    inputs = []
    for a, leaf in enumerate(leaves, start=1):
        if not ctrl.allowed[leaf.members, leaf.input_index].all():
            raise InvarianceViolationError(f"leaf {a} input is not permissible for all its cells")
        labels[leaf.members] = a
        inputs.append(ctrl.inputs.points[leaf.input_index])
    part = InvariantPartition(ctrl.cells.copy(), labels, np.array(inputs, dtype=float),
                              grid=ctrl.grid, tree=tree)
    if system is not None:
        check_partition(part, system, snap_tol)
    return part


def partition_from_choice(ctrl, choice, system=None, snap_tol=DEFAULT_SNAP_TOL):
    return tree_to_partition(build_tree(ctrl, choice), ctrl, system, snap_tol)


def band_partition(ctrl, band_inputs, system=None, dim=0, snap_tol=DEFAULT_SNAP_TOL):
    """Split the domain into equal bands of grid columns along ``dim``, one input each.

    With one band per grid column this reproduces the hand-made column
    partition of the small linear example.
    """
    band_inputs = np.atleast_2d(np.asarray(band_inputs, dtype=float).T).T
    k = len(band_inputs)
    n = ctrl.grid.cells_per_dim[dim]
    if n % k:
        raise DomainError(f"{n} grid columns do not split into {k} equal bands")
    col = ctrl.grid.multi_index(ctrl.cells)[:, dim]
    raw = col // (n // k)
    present = np.unique(raw)
    labels = np.searchsorted(present, raw) + 1
    part = InvariantPartition(ctrl.cells.copy(), labels, band_inputs[present], grid=ctrl.grid)
    if system is not None:
        check_partition(part, system, snap_tol)
    return part


def single_partition(ctrl, input_index, system=None, snap_tol=DEFAULT_SNAP_TOL):
    """Whole domain as one element (a single-leaf tree)."""
    part = InvariantPartition(ctrl.cells.copy(), np.ones(len(ctrl.cells), dtype=np.int64),
                              ctrl.inputs.points[[input_index]], grid=ctrl.grid)
    if system is not None:
        check_partition(part, system, snap_tol)
    return part


def export_partition(partition):
    lines = [f"#inventro-partition v1 elements={len(partition)}"]
    for a, cells, u in partition.elements:
        fields = [str(a)] + [f"{v:.17g}" for v in u] + [str(len(cells))] + [str(int(c)) for c in cells]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def parse_partition(text, grid, input_dim):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#inventro-partition v1"):
        raise PartitionIntegrityError("not an inventro partition file")
    q = int(lines[0].split("elements=")[1])
    cells, labels, inputs = [], [], []
    for ln in lines[1:]:
        parts = ln.split()
        a = int(parts[0])
        inputs.append([float(v) for v in parts[1:1 + input_dim]])
        k = int(parts[1 + input_dim])
        members = [int(c) for c in parts[2 + input_dim:2 + input_dim + k]]
        cells += members
        labels += [a] * k
    if len(inputs) != q:
        raise PartitionIntegrityError(f"header announces {q} elements, found {len(inputs)}")
    cells = np.array(cells, dtype=np.int64)
    order = np.argsort(cells, kind="stable")
    return InvariantPartition(cells[order], np.array(labels, dtype=np.int64)[order],
                              np.array(inputs, dtype=float), grid=grid)
