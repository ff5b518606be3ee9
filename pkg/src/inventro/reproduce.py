"""Re-run the reference experiments and print computed values next to the reference ones."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .config import preset
from .errors import InventroError
from .pipeline import run_pipeline

LOG2_3 = math.log2(3.0)


@dataclass
class Row:
    group: str
    preset: str
    label: str
    reference: float | None
    quantity: str            # "bound" or "bound_per_Ts"
    lo: float
    hi: float
    slow: bool = False
    alphabet_window: bool = False   # accept any value in (0, log2|A|]


def _pendulum(Ts, ref):
    return Row("pendulum", f"pendulum-{Ts}", f"Ts={Ts}", ref, "bound_per_Ts", 2.8854, 1.5 * ref)


ROWS = [
    Row("linear-coarse", "linear2d-coarse", "columns 1 0 -1", LOG2_3, "bound", LOG2_3 - 1e-6, LOG2_3 + 1e-6),
    Row("linear-coarse", "linear2d-coarse-lattice", "lattice maxfreq", LOG2_3, "bound",
        LOG2_3 - 1e-6, LOG2_3 + 1e-6),
    Row("linear-fine", "linear2d-maxfreq", "maxfreq", 1.0149, "bound", 1.0, 1.10),
    Row("linear-fine", "linear2d-minnorm", "minnorm", 1.0517, "bound", 1.0, 1.15),
    _pendulum(0.8, 4.0207),
    _pendulum(0.5, 4.0847),
    _pendulum(0.1, 4.744),
    Row("pendulum-b10", "pendulum-b10", "Ts=0.1", 29.1723, "bound_per_Ts", 20.6058, 44.0),
    Row("henon", "henon", "eta_s=0.02", 1.3178, "bound", 0.0, math.inf, alphabet_window=True),
    Row("henon", "henon-fine", "eta_s=0.0021", 1.3178, "bound", 0.0, math.inf, slow=True,
        alphabet_window=True),
]


def run_row(row):
    """Computed value, partition size and pass flag for one row (errors reported, not raised)."""
    cfg = preset(row.preset)
    t = time.perf_counter()
    try:
        report = run_pipeline(cfg, write=False)
    except InventroError as exc:
        return {"row": row, "value": None, "size": None, "ok": False,
                "note": f"{type(exc).__name__}: {exc}", "seconds": time.perf_counter() - t}
    value = report.bound_per_Ts if row.quantity == "bound_per_Ts" else report.bound
    hi = row.hi
    if row.alphabet_window:
        hi = math.log2(report.partition_size) if report.partition_size > 1 else 0.0
        ok = 0.0 < value <= hi
    else:
        ok = row.lo <= value <= hi
    return {"row": row, "value": value, "size": report.partition_size, "ok": ok,
            "note": "", "seconds": time.perf_counter() - t}


def format_table(results):
    head = f"{'group':<14} {'setting':<18} {'|A|':>6} {'reference':>10} {'computed':>12} {'accepted':>20}  result"
    lines = [head, "-" * len(head)]
    for r in results:
        row = r["row"]
        ref = "-" if row.reference is None else f"{row.reference:.4f}"
        val = "-" if r["value"] is None else f"{r['value']:.4f}"
        size = "-" if r["size"] is None else str(r["size"])
        if row.alphabet_window:
            window = "(0, log2|A|]"
        else:
            window = f"[{row.lo:.4f}, {row.hi:.4f}]"
        status = "PASS" if r["ok"] else "FAIL"
        lines.append(f"{row.group:<14} {row.label:<18} {size:>6} {ref:>10} {val:>12} {window:>20}  {status}")
        if r["note"]:
            lines.append(f"{'':<14} {r['note']}")
    return "\n".join(lines)


def reproduce_tables(include_slow=False, groups=None, out=print):
    """Run the rows (optionally only some groups) and print the comparison."""
    rows = [r for r in ROWS if (include_slow or not r.slow) and (groups is None or r.group in groups)]
    results = []
    for row in rows:
        results.append(run_row(row))
    out(format_table(results))
    return results
