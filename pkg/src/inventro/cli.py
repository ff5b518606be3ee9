"""Command-line front end.

Every subcommand takes ``--config FILE`` or ``--preset NAME``. Results go to
standard output as ``key=value`` lines; diagnostics go to standard error.
Exit codes: 0 success, 1 usage or input error, 2 empty controller,
3 capacity exceeded.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

from .abstraction import export_controller, parse_controller
from .config import PRESETS, parse_config, preset
from .determinizer import export_partition, export_tree, parse_partition
from .entropy import dot_export, format_value, entropy_of_partition, labeled_graph, transition_matrix
from .errors import CapacityError, EmptyControllerError, InventroError
from .oracle import count_words
from .pipeline import make_partition, run_pipeline, setup, synthesize
from .reproduce import ROWS, reproduce_tables

EXIT_ERROR = 1
EXIT_EMPTY = 2
EXIT_CAPACITY = 3


def _load_config(args):
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    else:
        raise InventroError("give --config FILE or --preset NAME")
    if getattr(args, "output_dir", None):
        cfg.output_dir = args.output_dir
    return cfg


def _print_report(report, include_timings=False):
    d = report.as_dict(include_timings)
    bound = d.pop("bound")
    for k, v in d.items():
        print(f"{k}={format_value(v)}")
    print(f"bound={format_value(bound)}")


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _controller(cfg, args, model, grid, inputs):
    if getattr(args, "controller", None):
        with open(args.controller, encoding="utf-8") as fh:
            return parse_controller(fh.read(), grid, inputs)
    return synthesize(cfg, model, grid, inputs)


def _partition(cfg, args):
    model, grid, inputs = setup(cfg)
    if getattr(args, "partition", None):
        with open(args.partition, encoding="utf-8") as fh:
            return model, parse_partition(fh.read(), grid, model.input_dim)
    ctrl = _controller(cfg, args, model, grid, inputs)
    return model, make_partition(cfg, model, ctrl)


def cmd_pipeline(args):
    cfg = _load_config(args)
    report = run_pipeline(cfg)
    _print_report(report, cfg.report_timings)


def cmd_abstract(args):
    cfg = _load_config(args)
    model, grid, inputs = setup(cfg)
    ctrl = synthesize(cfg, model, grid, inputs)
    path = args.output or os.path.join(cfg.output_dir, "controller.txt")
    _write(path, export_controller(ctrl))
    print(f"grid_cells={grid.size}")
    print(f"inputs={len(inputs)}")
    print(f"iterations={ctrl.iterations}")
    print(f"cells={len(ctrl)}")


def cmd_determinize(args):
    cfg = _load_config(args)
    model, grid, inputs = setup(cfg)
    ctrl = _controller(cfg, args, model, grid, inputs)
    part = make_partition(cfg, model, ctrl)
    path = args.output or os.path.join(cfg.output_dir, "partition.txt")
    _write(path, export_partition(part))
    if part.tree is not None:
        _write(os.path.join(os.path.dirname(path) or ".", "tree.txt"), export_tree(part.tree))
        print(f"tree_depth={part.tree.depth()}")
    print(f"partition_size={len(part)}")


def cmd_entropy(args):
    cfg = _load_config(args)
    model, part = _partition(cfg, args)
    report = entropy_of_partition(model, part, cfg.snap_tol, cfg.max_subsets)
    _print_report(report, cfg.report_timings)


def cmd_oracle(args):
    cfg = _load_config(args)
    model, part = _partition(cfg, args)
    graph = labeled_graph(transition_matrix(model, part.grid, part, cfg.snap_tol), part)
    counts = []
    for n in range(1, args.horizon + 1):
        counts.append(count_words(graph, n, cfg.max_oracle_nodes))
        est = math.log2(counts[-1]) / n if counts[-1] else float("-inf")
        print(f"N={n} words={counts[-1]} estimate={format_value(est)}")
    print(f"estimate={format_value(est)}")


def cmd_export_dot(args):
    cfg = _load_config(args)
    model, part = _partition(cfg, args)
    report = entropy_of_partition(model, part, cfg.snap_tol, cfg.max_subsets)
    if args.which == "graph":
        text = dot_export(report.graph, "G")
    else:
        if not report.det_graphs:
            raise InventroError("the transition graph has no cycles, so there is no deterministic graph")
        k = args.component - 1
        if not 0 <= k < len(report.det_graphs):
            raise InventroError(f"component must be in 1..{len(report.det_graphs)}")
        text = dot_export(report.det_graphs[k], f"GR{k + 1}")
    if args.output:
        _write(args.output, text)
        print(f"dot={args.output}")
    else:
        sys.stdout.write(text)


def cmd_reproduce(args):
    results = reproduce_tables(include_slow=args.slow, groups=args.group)
    failed = sum(not r["ok"] for r in results)
    print(f"rows={len(results)} failed={failed}")


def build_parser():
    parser = argparse.ArgumentParser(prog="inventro",
                                     description="Upper bounds on invariance entropy from symbolic controllers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", help="key = value configuration file")
        src.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
        p.add_argument("--output-dir", help="override output_dir from the configuration")
        p.set_defaults(func=fn)
        return p

    add("pipeline", cmd_pipeline, "synthesize, determinize and bound the entropy; write all artifacts")
    p = add("abstract", cmd_abstract, "synthesize the maximal invariant controller")
    p.add_argument("-o", "--output", help="controller file (default: <output_dir>/controller.txt)")
    p = add("determinize", cmd_determinize, "determinize a controller into an invariant partition")
    p.add_argument("--controller", help="controller file written by 'abstract'")
    p.add_argument("-o", "--output", help="partition file (default: <output_dir>/partition.txt)")
    p = add("entropy", cmd_entropy, "entropy bound for a partition")
    p.add_argument("--partition", help="partition file written by 'determinize'")
    p.add_argument("--controller", help="controller file written by 'abstract'")
    p = add("oracle", cmd_oracle, "count label words of the transition graph up to a horizon")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--partition", help="partition file written by 'determinize'")
    p = add("export-dot", cmd_export_dot, "Graphviz export of the transition or deterministic graph")
    p.add_argument("--which", choices=("graph", "det"), default="det")
    p.add_argument("--component", type=int, default=1, help="strongly connected component (1-based)")
    p.add_argument("--partition", help="partition file written by 'determinize'")
    p.add_argument("-o", "--output", help="output file (default: standard output)")
    p = sub.add_parser("reproduce", help="re-run the reference experiments")
    p.add_argument("--slow", action="store_true", help="include the full-resolution Henon run")
    p.add_argument("--group", action="append", choices=sorted({r.group for r in ROWS}),
                   help="only rows of this group (repeatable)")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "horizon", 1) < 1:
        parser.error("--horizon must be >= 1")
    try:
        args.func(args)
    except EmptyControllerError as exc:
        print(f"inventro: empty controller: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except CapacityError as exc:
        print(f"inventro: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (InventroError, OSError) as exc:
        print(f"inventro: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
