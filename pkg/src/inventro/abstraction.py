"""Uniform state grids and maximal invariant controller synthesis.

Cells are numbered row-major with dimension 0 varying fastest. A post box
is snapped to the grid with a small tolerance (``snap_tol`` cell widths):
every cell whose closed box comes within that distance of the post box
counts as hit. Touching faces therefore produce transitions, which keeps the
abstraction sound under floating-point error.

Two grid layouts are available. ``tile`` stretches ``floor(width / eta)``
cells to tile the domain exactly. ``lattice`` puts cell centres on the
integer multiples of ``eta`` that fall inside the domain, with cells of
width exactly ``eta`` (the layout used by SCOTS); the union of its cells can
overhang the requested domain by up to half a cell.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError, EmptyControllerError
from .interval import IntervalBox
from .system import as_model

log = logging.getLogger(__name__)

DEFAULT_MAX_CELLS = 10 ** 9
DEFAULT_SNAP_TOL = 1e-9
_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class UniformGrid:
    domain: IntervalBox
    eta_s: tuple
    cells_per_dim: tuple

    @property
    def dim(self):
        return self.domain.dim

    @property
    def size(self):
        return int(np.prod(self.cells_per_dim))

    @property
    def shape(self):
        return tuple(self.cells_per_dim)

    @property
    def cell_width(self):
        return self.domain.width / np.array(self.cells_per_dim)

    def edges(self, d):
        """Cell boundaries along dimension ``d``; the last one equals the domain's upper bound."""
        n = self.cells_per_dim[d]
        lo, hi = self.domain.lower[d], self.domain.upper[d]
        e = lo + (hi - lo) * (np.arange(n + 1) / n)
        e[-1] = hi
        return e

    def multi_index(self, index):
        return np.stack(np.unravel_index(np.asarray(index), self.shape, order="F"), axis=-1)

    def flat_index(self, multi):
        multi = np.asarray(multi)
        return np.ravel_multi_index(tuple(multi[..., d] for d in range(self.dim)), self.shape, order="F")

    def cell_bounds(self, index):
        """Lower and upper corners for an array of cell indices, shape ``(k, dim)``."""
        mi = self.multi_index(index)
        lo = np.empty(mi.shape, dtype=float)
        hi = np.empty(mi.shape, dtype=float)
        for d in range(self.dim):
            e = self.edges(d)
            lo[..., d] = e[mi[..., d]]
            hi[..., d] = e[mi[..., d] + 1]
        return lo, hi

    def locate(self, points):
        """Index of the cell containing each point (half-open cells; the upper face goes to the last cell).

        Points outside the domain give -1.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mi = np.empty(points.shape, dtype=np.int64)
        outside = np.zeros(len(points), dtype=bool)
        for d in range(self.dim):
            e = self.edges(d)
            p = points[:, d]
            outside |= (p < e[0]) | (p > e[-1]) | ~np.isfinite(p)
            mi[:, d] = np.clip(np.searchsorted(e, p, side="right") - 1, 0, self.cells_per_dim[d] - 1)
        idx = self.flat_index(mi)
        return np.where(outside, -1, idx)

    def snap(self, lo, hi, snap_tol=DEFAULT_SNAP_TOL):
        """Index ranges of the cells hit by boxes ``[lo, hi]`` (shape ``(k, dim)``).

        Returns ``(first, last, inside)``: inclusive per-dimension multi-index
        ranges and whether each box lies in the closed domain.
        """
        lo = np.atleast_2d(lo)
        hi = np.atleast_2d(hi)
        first = np.empty(lo.shape, dtype=np.int64)
        last = np.empty(lo.shape, dtype=np.int64)
        inside = np.all(np.isfinite(lo) & np.isfinite(hi), axis=1)
        tol = snap_tol * self.cell_width
        for d in range(self.dim):
            e = self.edges(d)
            n = self.cells_per_dim[d]
            a, b = lo[:, d] - tol[d], hi[:, d] + tol[d]
            inside &= (a >= e[0] - tol[d]) & (b <= e[-1] + tol[d])
            # first cell whose upper edge reaches a, last cell whose lower edge is below b
            first[:, d] = np.clip(np.searchsorted(e[1:], a, side="left"), 0, n - 1)
            last[:, d] = np.clip(np.searchsorted(e[:-1], b, side="right") - 1, 0, n - 1)
        return first, last, inside


def build_grid(domain, eta_s, max_cells=DEFAULT_MAX_CELLS, mode="tile"):
    """Uniform grid over ``domain`` with cell width ``eta_s``.

    ``mode="tile"``: ``cells_per_dim = max(1, floor(width / eta_s))`` cells
    stretched to tile the domain. ``mode="lattice"``: one cell of width
    ``eta_s`` centred on each multiple of ``eta_s`` inside the domain.
    """
    eta = np.broadcast_to(np.asarray(eta_s, dtype=float), (domain.dim,))
    if np.any(eta <= 0):
        raise DomainError(f"grid parameter must be positive, got {eta.tolist()}")
    if np.any(domain.width <= 0):
        raise DomainError(f"degenerate grid domain {domain}")
    if mode == "tile":
        # the slack absorbs representation error in width / eta (e.g. 4 / 0.57142857)
        counts = np.maximum(1, np.floor(domain.width / eta * (1 + 1e-12))).astype(np.int64)
        box = domain
    elif mode == "lattice":
        k_lo = np.ceil(domain.lo / eta - 1e-9)
        k_hi = np.floor(domain.hi / eta + 1e-9)
        if np.any(k_hi < k_lo):
            raise DomainError(f"no multiple of eta_s={eta.tolist()} lies inside {domain}")
        counts = (k_hi - k_lo + 1).astype(np.int64)
        box = IntervalBox((k_lo - 0.5) * eta, (k_hi + 0.5) * eta)
    else:
        raise DomainError(f"unknown grid mode {mode!r}; expected 'tile' or 'lattice'")
    total = float(np.prod(counts.astype(float)))
    if total > max_cells:
        raise CapacityError(f"grid would have {total:.3g} cells, more than the cap of {max_cells}")
    return UniformGrid(box, tuple(eta.tolist()), tuple(int(c) for c in counts))


def cell_box(grid, index):
    if not 0 <= index < grid.size:
        raise IndexError(f"cell index {index} out of range [0, {grid.size})")
    lo, hi = grid.cell_bounds(np.array([index]))
    return IntervalBox(lo[0], hi[0])


@dataclass(frozen=True, eq=False)
class InputGrid:
    range: IntervalBox
    eta_i: tuple
    points: np.ndarray

    def __len__(self):
        return len(self.points)


def build_input_grid(input_range, eta_i):
    """Lattice ``lower + k * eta_i`` inside the input range, lexicographic order."""
    eta = np.broadcast_to(np.asarray(eta_i, dtype=float), (input_range.dim,))
    if np.any(eta <= 0):
        raise DomainError(f"input grid parameter must be positive, got {eta.tolist()}")
    axes = []
    for lo, hi, h in zip(input_range.lower, input_range.upper, eta):
        n = int(np.floor((hi - lo) / h * (1 + 1e-12))) + 1
        axes.append(np.clip(np.round(lo + h * np.arange(n), 12), lo, hi))
    points = np.array(list(itertools.product(*axes)), dtype=float)
    return InputGrid(input_range, tuple(eta.tolist()), points)


@dataclass(frozen=True, eq=False)
class InvariantController:
    """Look-up table: domain cell -> permissible input indices.

    ``cells`` is the sorted array of surviving grid cells and ``allowed`` a
    boolean matrix with one row per entry of ``cells`` and one column per
    input point.
    """

    grid: UniformGrid
    inputs: InputGrid
    cells: np.ndarray
    allowed: np.ndarray
    iterations: int = 0

    def __len__(self):
        return len(self.cells)

    @property
    def table(self):
        return {int(c): tuple(np.flatnonzero(row).tolist()) for c, row in zip(self.cells, self.allowed)}

    def position(self, cells):
        """Row of each given cell in ``self.cells``; -1 where the cell is not in the domain."""
        cells = np.asarray(cells)
        pos = np.searchsorted(self.cells, cells)
        pos = np.clip(pos, 0, max(len(self.cells) - 1, 0))
        hit = len(self.cells) > 0
        ok = hit & (self.cells[pos] == cells) if hit else np.zeros(cells.shape, bool)
        return np.where(ok, pos, -1)

    def domain_mask(self):
        mask = np.zeros(self.grid.size, dtype=bool)
        mask[self.cells] = True
        return mask


class CellCover:
    """Summed-area table over a boolean cell mask, for box-coverage queries."""

    def __init__(self, grid, mask):
        self.grid = grid
        arr = np.asarray(mask, dtype=np.int64).reshape(grid.shape, order="F")
        for d in range(grid.dim):
            arr = np.cumsum(arr, axis=d)
        self.table = np.pad(arr, [(1, 0)] * grid.dim)

    def count(self, first, last):
        """Number of masked cells in each inclusive index box."""
        total = np.zeros(len(first), dtype=np.int64)
        for corner in itertools.product((0, 1), repeat=self.grid.dim):
            idx = tuple(np.where(c, last[:, d] + 1, first[:, d]) for d, c in enumerate(corner))
            sign = (-1) ** (self.grid.dim - sum(corner))
            total += sign * self.table[idx]
        return total

    def covers(self, first, last):
        volume = np.prod(last - first + 1, axis=1)
        return self.count(first, last) == volume


def post_ranges(model, grid, cells, u, snap_tol=DEFAULT_SNAP_TOL):
    """Snapped post boxes of ``cells`` under input ``u``: ``(first, last, inside)``."""
    firsts, lasts, insides = [], [], []
    for start in range(0, len(cells), _CHUNK):
        chunk = cells[start:start + _CHUNK]
        lo, hi = grid.cell_bounds(chunk)
        plo, phi = model.post_batch(lo, hi, u)
        f, l, i = grid.snap(plo, phi, snap_tol)
        firsts.append(f)
        lasts.append(l)
        insides.append(i)
    if not firsts:
        empty = np.zeros((0, grid.dim), dtype=np.int64)
        return empty, empty, np.zeros(0, dtype=bool)
    return np.concatenate(firsts), np.concatenate(lasts), np.concatenate(insides)


def _post_table(model, grid, start, inputs, snap_tol):
    """Per input: rows of ``start`` whose post box stays in the domain, with its index range."""
    dtype = np.int16 if max(grid.cells_per_dim) < 2 ** 15 else np.int32
    table = []
    for u in inputs.points:
        f, l, inside = post_ranges(model, grid, start, u, snap_tol)
        rows = np.flatnonzero(inside).astype(np.int32)
        table.append((rows, f[inside].astype(dtype), l[inside].astype(dtype)))
    return table


def _covered(cover, f, l):
    return cover.covers(f.astype(np.int64), l.astype(np.int64))


def synthesize_invariant_controller(system, grid, inputs, initial=None, snap_tol=DEFAULT_SNAP_TOL,
                                    method="jacobi", max_iterations=None):
    """Maximal controller keeping the closed loop inside the grid domain.

    Computes the greatest fixed point of ``D -> {B in D : exists u, post(B, u) covered by D}``
    starting from ``initial`` (a boolean mask over grid cells; default all
    cells). ``method`` is ``"jacobi"`` (vectorized sweeps against a snapshot
    of D) or ``"gauss-seidel"`` (in-place sweeps in index order, pure Python,
    for small grids). Both reach the same fixed point.
    """
    model = as_model(system)
    alive = np.ones(grid.size, dtype=bool) if initial is None else np.array(initial, dtype=bool)
    start = np.flatnonzero(alive)
    table = _post_table(model, grid, start, inputs, snap_tol)

    if method == "jacobi":
        it = _jacobi(grid, alive, start, table, max_iterations)
    elif method == "gauss-seidel":
        it = _gauss_seidel(grid, alive, start, table, max_iterations)
    else:
        raise DomainError(f"unknown fixed-point method {method!r}")

    live = alive[start]
    cells = start[live]
    if len(cells) == 0:
        raise EmptyControllerError(f"no invariant cells remain after {it} iterations", iterations=it)
    row_of = np.cumsum(live) - 1
    cover = CellCover(grid, alive)
    allowed = np.zeros((len(cells), len(inputs)), dtype=bool)
    for j, (rows, f, l) in enumerate(table):
        sel = live[rows]
        allowed[row_of[rows[sel]], j] = _covered(cover, f[sel], l[sel])
    log.info("controller: %d of %d cells after %d iterations", len(cells), grid.size, it)
    return InvariantController(grid, inputs, cells, allowed, iterations=it)


def _jacobi(grid, alive, start, table, max_iterations):
    live = alive[start].copy()
    it = 0
    while True:
        it += 1
        cover = CellCover(grid, alive)
        good = np.zeros(len(start), dtype=bool)
        for rows, f, l in table:
            pending = live[rows] & ~good[rows]
            if pending.any():
                good[rows[pending]] = _covered(cover, f[pending], l[pending])
        dead = live & ~good
        if not dead.any() or (max_iterations and it >= max_iterations):
            return it
        alive[start[dead]] = False
        live &= good
        # drop entries of dead cells so later sweeps only touch survivors
        for j, (rows, f, l) in enumerate(table):
            keep = live[rows]
            table[j] = (rows[keep], f[keep], l[keep])


def _gauss_seidel(grid, alive, start, table, max_iterations):
    mask = alive.reshape(grid.shape, order="F")  # view: writes through to ``alive``
    options = [[] for _ in start]
    for rows, f, l in table:
        for r, fr, lr in zip(rows.tolist(), f.tolist(), l.tolist()):
            options[r].append(tuple(slice(a, b + 1) for a, b in zip(fr, lr)))
    it = 0
    while True:
        it += 1
        changed = False
        for p, cell in enumerate(start):
            if alive[cell] and not any(mask[region].all() for region in options[p]):
                alive[cell] = False
                changed = True
        if not changed or (max_iterations and it >= max_iterations):
            return it


def restrict_controller(system, ctrl, mask, snap_tol=DEFAULT_SNAP_TOL):
    """Re-synthesize the controller with its domain restricted to ``mask``."""
    initial = ctrl.domain_mask() & np.asarray(mask, dtype=bool)
    return synthesize_invariant_controller(system, ctrl.grid, ctrl.inputs, initial=initial,
                                           snap_tol=snap_tol)


def synthesize_with_reversal(forward, backward, grid, inputs, snap_tol=DEFAULT_SNAP_TOL):
    """Forward controller re-synthesized on the intersection of the forward and
    time-reversed controller domains.

    The raw intersection need not be invariant, hence the second forward pass.
    """
    fwd = synthesize_invariant_controller(forward, grid, inputs, snap_tol=snap_tol)
    bwd = synthesize_invariant_controller(backward, grid, inputs, snap_tol=snap_tol)
    log.info("forward %d cells, reversed %d cells", len(fwd), len(bwd))
    return restrict_controller(forward, fwd, bwd.domain_mask(), snap_tol)


def _fmt(x):
    return f"{x:.17g}"


def export_controller(ctrl):
    """Plain-text controller table, one line per domain cell in ascending order."""
    lo, hi = ctrl.grid.cell_bounds(ctrl.cells)
    lines = [f"#inventro-controller v1 dim={ctrl.grid.dim} cells={len(ctrl.cells)} inputs={len(ctrl.inputs)}"]
    for c, l, h, row in zip(ctrl.cells, lo, hi, ctrl.allowed):
        idx = np.flatnonzero(row)
        fields = [str(int(c))] + [_fmt(v) for v in l] + [_fmt(v) for v in h] + [str(len(idx))]
        fields += [str(int(i)) for i in idx]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def parse_controller(text, grid, inputs):
    """Read a table written by `export_controller` back against ``grid`` and ``inputs``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#inventro-controller v1"):
        raise DomainError("not an inventro controller file")
    header = dict(kv.split("=") for kv in lines[0].split()[2:])
    if int(header["dim"]) != grid.dim or int(header["inputs"]) != len(inputs):
        raise DomainError("controller file does not match the grid/input configuration")
    n = grid.dim
    cells, rows = [], []
    for ln in lines[1:]:
        parts = ln.split()
        cells.append(int(parts[0]))
        k = int(parts[1 + 2 * n])
        row = np.zeros(len(inputs), dtype=bool)
        row[[int(p) for p in parts[2 + 2 * n:2 + 2 * n + k]]] = True
        rows.append(row)
    if len(cells) != int(header["cells"]):
        raise DomainError("controller file truncated")
    return InvariantController(grid, inputs, np.array(cells, dtype=np.int64),
                               np.array(rows, dtype=bool).reshape(len(cells), len(inputs)))
