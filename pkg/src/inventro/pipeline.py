"""End-to-end runs driven by a `RunConfig`: synthesis, partition, entropy, files."""

from __future__ import annotations

import logging
import os
import time

from .abstraction import (build_grid, build_input_grid, export_controller,
                          synthesize_invariant_controller, synthesize_with_reversal)
from .determinizer import band_partition, determinize, export_partition, export_tree, partition_from_choice
from .entropy import dot_export, entropy_of_partition

log = logging.getLogger(__name__)


def setup(cfg):
    """Model, grid and input grid for a configuration."""
    model = cfg.model()
    grid = build_grid(cfg.domain_box(model), cfg.eta_s, cfg.max_cells, mode=cfg.grid)
    inputs = build_input_grid(model.input_range, cfg.eta_i)
    return model, grid, inputs


def synthesize(cfg, model, grid, inputs):
    if cfg.intersect_reversed:
        return synthesize_with_reversal(model, cfg.model(reversed=True), grid, inputs, cfg.snap_tol)
    return synthesize_invariant_controller(model, grid, inputs, snap_tol=cfg.snap_tol)


def make_partition(cfg, model, ctrl):
    """Column partition if ``columns`` is set, otherwise determinizer plus tree."""
    if cfg.columns is not None:
        return band_partition(ctrl, list(cfg.columns), model, snap_tol=cfg.snap_tol)
    return partition_from_choice(ctrl, determinize(ctrl, cfg.determinizer), model, cfg.snap_tol)


def run_pipeline(cfg, output_dir=None, write=True):
    """Run every stage and (optionally) write the artifacts. Returns the report."""
    t0 = time.perf_counter()
    model, grid, inputs = setup(cfg)
    ctrl = synthesize(cfg, model, grid, inputs)
    t_syn = time.perf_counter()
    partition = make_partition(cfg, model, ctrl)
    t_det = time.perf_counter()
    report = entropy_of_partition(model, partition, cfg.snap_tol, cfg.max_subsets)
    report.timings = {"synthesis": (t_syn - t0) * 1e3, "determinization": (t_det - t_syn) * 1e3,
                      **report.timings}
    report.controller = ctrl
    report.metadata.update({
        "system": model.name,
        "grid": cfg.grid,
        "grid_cells": grid.size,
        "inputs": len(inputs),
        "partition": "columns" if cfg.columns is not None else cfg.determinizer,
    })
    if write:
        write_artifacts(report, output_dir or cfg.output_dir, cfg.report_timings)
    return report


def write_artifacts(report, output_dir, include_timings=False):
    os.makedirs(output_dir, exist_ok=True)
    files = {
        "controller.txt": export_controller(report.controller),
        "partition.txt": export_partition(report.partition),
        "report.txt": report.to_text(include_timings),
        "report.json": report.to_record(include_timings) + "\n",
        "graph.dot": dot_export(report.graph, "G"),
    }
    if report.partition.tree is not None:
        files["tree.txt"] = export_tree(report.partition.tree)
    for k, det in enumerate(report.det_graphs, start=1):
        files[f"det_{k}.dot"] = dot_export(det, f"GR{k}")
    for name, text in files.items():
        with open(os.path.join(output_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    log.info("wrote %d files to %s", len(files), output_dir)
    return sorted(files)
