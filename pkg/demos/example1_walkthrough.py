"""The 3x7 linear example worked by hand.

x+ = diag(2, 1/2) x + (1, 1) u on [-1, 1] x [-2, 2]. Each grid column gets
its own input, so the labels read 1 2 3 across every row. The transition
matrix, its labelled graph and the subset construction are printed for both
grid layouts; the cell-centred lattice gives the six-node presentation with
the 3-regular matrix R.
"""

import math

import numpy as np

from inventro.abstraction import build_grid, build_input_grid, synthesize_invariant_controller
from inventro.determinizer import band_partition, determinize, partition_from_choice
from inventro.entropy import adjacency_matrix, entropy_of_partition
from inventro.system import builtin_linear2d

np.set_printoptions(linewidth=120)

system = builtin_linear2d()
inputs = build_input_grid(system.input_range, 0.005)

for mode in ("tile", "lattice"):
    grid = build_grid(system.safe_set, 0.57142, mode=mode)
    ctrl = synthesize_invariant_controller(system, grid, inputs)
    if mode == "tile":
        part = band_partition(ctrl, [1.0, 0.0, -1.0], system)
    else:
        part = partition_from_choice(ctrl, determinize(ctrl, "maxfreq"), system)
    print(f"== {mode} grid: {grid.shape} cells, box {grid.domain}")
    print("inputs per element:", part.inputs.ravel())
    print("labels by row (bottom row first):")
    print(part.labels.reshape(grid.shape[::-1]))

    report = entropy_of_partition(system, part)
    B = report.graph.adjacency.toarray().astype(int)
    print(f"transition matrix: {B.shape}, {B.sum()} edges, {B.sum(axis=1).min()}..{B.sum(axis=1).max()} per row")
    det = report.det_graphs[0]
    print("deterministic presentation, subsets of cells (1-based):")
    for k, s in enumerate(det.core_subsets(), start=1):
        print(f"  R{k}: {(s + 1).tolist()}")
    R = adjacency_matrix(det)
    print("R =")
    print(R)
    rho = report.sccs[0].rho
    print(f"rho(R) = {rho:.12g}, bound = log2 rho = {report.bound:.10f} (log2 3 = {math.log2(3):.10f})")
    print()
