"""Acceptance criteria 1-7, one pass/fail line each.

Run under pytest (lines appear in the report even when output is captured)
or directly with ``python tests/test_acceptance.py``.
"""

import filecmp
import math
import resource
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from inventro.abstraction import build_grid, build_input_grid, synthesize_invariant_controller
from inventro.config import preset
from inventro.determinizer import determinize, partition_from_choice
from inventro.entropy import LabeledGraph, entropy_of_partition, spectral_radius
from inventro.errors import InventroError
from inventro.interval import IntervalBox
from inventro.oracle import count_words, enumerate_edge_words, enumerate_words, simulate_closed_loop
from inventro.pipeline import run_pipeline, setup, synthesize
from inventro.system import builtin, explicit_model

LOG2_3 = math.log2(3.0)


def peak_gb():
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 2**20


def timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def _example1(preset_name):
    report, secs = timed(lambda: run_pipeline(preset(preset_name), write=False))
    scc = report.sccs
    checks = {
        "21 cells": report.cells == 21,
        "strongly connected": len(scc) == 1 and scc[0].nodes == 21,
        "6 deterministic nodes": len(scc) == 1 and scc[0].det_nodes == 6,
        "rho = 3": len(scc) == 1 and abs(scc[0].rho - 3.0) <= 1e-12,
        "bound = log2 3": abs(report.bound - LOG2_3) <= 1e-6,
        "under 1 s": secs < 1.0,
    }
    detail = (f"cells={report.cells} scc_nodes={[s.nodes for s in scc]} "
              f"det_nodes={[s.det_nodes for s in scc]} rho={[round(s.rho, 12) for s in scc]} "
              f"bound={report.bound:.10f} t={secs:.2f}s")
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        detail += " failed: " + ", ".join(failed)
    return not failed, detail


def criterion_1():
    """Column partition (1, 0, -1) on the stretched 3x7 grid."""
    return _example1("linear2d-coarse")


def criterion_1_lattice():
    """Same walkthrough on the cell-centred lattice with the maxfreq determinizer."""
    return _example1("linear2d-coarse-lattice")


def criterion_2():
    parts = []
    ok = True
    for name, hi in (("linear2d-maxfreq", 1.10), ("linear2d-minnorm", 1.15)):
        report, secs = timed(lambda: run_pipeline(preset(name), write=False))
        good = 1.0 <= report.bound <= hi and secs < 900 and peak_gb() < 8
        ok &= good
        parts.append(f"{name.split('-')[1]}={report.bound:.4f} in [1, {hi}] |A|={report.partition_size} "
                     f"t={secs:.1f}s")
    return ok, "; ".join(parts) + f"; peak={peak_gb():.2f}GB"


def criterion_3():
    parts = []
    ok = True
    for Ts, ref in ((0.8, 4.0207), (0.5, 4.0847), (0.1, 4.744)):
        report, secs = timed(lambda: run_pipeline(preset(f"pendulum-{Ts}"), write=False))
        v = report.bound_per_Ts
        good = 2.8854 <= v <= 1.5 * ref
        ok &= good
        parts.append(f"Ts={Ts}: {v:.4f} in [2.8854, {1.5 * ref:.4f}] t={secs:.1f}s")
    return ok, "; ".join(parts)


def criterion_4():
    report, secs = timed(lambda: run_pipeline(preset("pendulum-b10"), write=False))
    v = report.bound_per_Ts
    return 20.6058 <= v <= 44.0 and secs < 600, f"bound/Ts={v:.4f} in [20.6058, 44] t={secs:.1f}s"


def criterion_5():
    t = time.perf_counter()
    try:
        report = run_pipeline(preset("henon"), write=False)
    except InventroError as exc:
        return False, (f"{type(exc).__name__}: {exc} (t={time.perf_counter() - t:.1f}s, "
                       f"peak={peak_gb():.2f}GB)")
    secs = time.perf_counter() - t
    top = math.log2(report.partition_size) if report.partition_size > 1 else 0.0
    ok = 0.0 < report.bound <= top and secs < 900 and peak_gb() < 8
    return ok, f"bound={report.bound:.4f} in (0, {top:.4f}] t={secs:.1f}s peak={peak_gb():.2f}GB"


# -- criterion 6: the property suites, condensed -----------------------------------

def _step_rows(model, x, u):
    out = np.empty_like(x)
    for val in np.unique(u, axis=0):
        sel = np.all(u == val, axis=1)
        out[sel] = model.step(x[sel], val)
    return out


def _instances():
    """(name, model, controller) at test-friendly resolutions."""
    out = []
    for name in ("linear2d-coarse-lattice",):
        cfg = preset(name)
        model, grid, inputs = setup(cfg)
        out.append(("linear-coarse", model, synthesize(cfg, model, grid, inputs)))
    lin = builtin("linear2d")
    g = build_grid(lin.safe_set, 0.2)
    out.append(("linear-10x20", lin, synthesize_invariant_controller(lin, g, build_input_grid(lin.input_range, 0.25))))
    pend = builtin("pendulum", b=1.0, rho=1.0, Ts=0.5).to_model()
    g = build_grid(pend.safe_set, 2e-3)
    out.append(("pendulum", pend, synthesize_invariant_controller(pend, g, build_input_grid(pend.input_range, 0.2))))
    hen = builtin("henon", eps=0.2)
    g = build_grid(hen.safe_set, 0.02)
    out.append(("henon-eps0.2", hen, synthesize_invariant_controller(hen, g, build_input_grid(hen.input_range, 0.05))))
    return out


def criterion_6():
    rng = np.random.default_rng(2024)
    failures = []
    for name, model, ctrl in _instances():
        grid = ctrl.grid
        # soundness on random (cell, input, point) triples
        k = 10_000
        rows = rng.integers(0, len(ctrl), k)
        allowed = ctrl.allowed[rows]
        pick = (rng.random(k) * allowed.sum(axis=1)).astype(int)
        cols = np.array([np.flatnonzero(a)[p] for a, p in zip(allowed, pick)])
        lo, hi = grid.cell_bounds(ctrl.cells[rows])
        img = _step_rows(model, rng.uniform(lo, hi), ctrl.inputs.points[cols])
        if np.any(ctrl.position(grid.locate(img)) < 0):
            failures.append(f"{name}: soundness")
        # closed-loop Monte-Carlo
        part = partition_from_choice(ctrl, determinize(ctrl, "maxfreq"), model)
        report = entropy_of_partition(model, part)
        lo, hi = grid.cell_bounds(part.cells[rng.integers(0, len(part.cells), k)])
        try:
            labels, cells, _ = simulate_closed_loop(model, part, rng.uniform(lo, hi), 50)
        except InventroError:
            failures.append(f"{name}: trajectory left the domain")
            continue
        adj = report.graph.adjacency.tocsr()
        pairs = np.unique(np.stack([cells[:, :-1].ravel(), cells[:, 1:].ravel()], axis=1), axis=0)
        if np.any(np.asarray(adj[pairs[:, 0], pairs[:, 1]]).ravel() == 0):
            failures.append(f"{name}: closed-loop step missing from the graph")
        if len(part.cells) <= 50:
            det = report.det_graphs[0]
            for N in range(1, 9):
                if enumerate_words(report.graph, N).words != enumerate_edge_words(det.core_edges(), det.size, N).words:
                    failures.append(f"{name}: language differs at N={N}")
        if len(part.cells) <= 200:
            for N in range(1, 9):
                if report.bound > math.log2(count_words(report.graph, N)) / N + 1e-9:
                    failures.append(f"{name}: bound above (1/{N})log2|W_N|")
        if not report.bound <= math.log2(len(part)) + 1e-12:
            failures.append(f"{name}: bound above log2|A|")
    for _ in range(100):
        m = rng.integers(0, 10, size=(5, 5))
        if abs(spectral_radius(m) - max(abs(np.linalg.eigvals(m)))) > 1e-9:
            failures.append("spectral radius vs eigvals")
            break
    c = explicit_model("half", lambda x, u: [0.5 * x[0] + u[0]], 1, IntervalBox([0.0], [0.0]))
    cg = build_grid(IntervalBox([-1], [1]), 0.1)
    cctrl = synthesize_invariant_controller(c, cg, build_input_grid(c.input_range, 1.0))
    cpart = partition_from_choice(cctrl, determinize(cctrl, "maxfreq"), c)
    if len(cpart) != 1 or entropy_of_partition(c, cpart).bound != 0.0:
        failures.append("|A|=1 bound")
    full = LabeledGraph.from_edges([1, 2], [(0, 0), (0, 1), (1, 0), (1, 1)])
    if len(enumerate_words(full, 5)) != 32:
        failures.append("full shift")
    golden = LabeledGraph.from_edges([1, 2], [(0, 0), (0, 1), (1, 0)])
    if [len(enumerate_words(golden, n)) for n in range(1, 5)] != [2, 3, 5, 8]:
        failures.append("golden mean")
    return not failures, "all properties hold" if not failures else "; ".join(failures)


def criterion_7():
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a"), Path(tmp, "b")
        run_pipeline(preset("linear2d-coarse"), output_dir=str(a))
        run_pipeline(preset("linear2d-coarse"), output_dir=str(b))
        names = ["controller.txt", "partition.txt", "report.txt", "report.json"]
        same = [filecmp.cmp(a / n, b / n, shallow=False) for n in names]
    return all(same), "identical: " + ", ".join(f"{n}={s}" for n, s in zip(names, same))


CRITERIA = [
    ("1", criterion_1),
    ("1 (lattice layout)", criterion_1_lattice),
    ("2", criterion_2),
    ("3", criterion_3),
    ("4", criterion_4),
    ("5", criterion_5),
    ("6", criterion_6),
    ("7", criterion_7),
]


def report_line(label, fn):
    ok, detail = fn()
    return ok, f"criterion {label}: {'PASS' if ok else 'FAIL'} {detail}"


@pytest.mark.parametrize("label, fn", CRITERIA, ids=[c[0].replace(" ", "-") for c in CRITERIA])
def test_criterion(label, fn, capsys):
    ok, line = report_line(label, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    for label, fn in CRITERIA:
        print(report_line(label, fn)[1], flush=True)
