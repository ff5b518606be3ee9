"""Inverted pendulum bounds for several sampling times.

For each sampling time the controller is synthesized on the safe set, made
deterministic with the maxfreq rule and compressed into a decision tree. The
bound per second is compared with the analytic invariance entropy, which no
controller can beat.
"""

import time

from inventro.config import preset
from inventro.pipeline import run_pipeline
from inventro.system import pendulum_entropy

print(f"{'setting':<16} {'cells':>9} {'|A|':>5} {'bound/Ts':>10} {'floor':>8} {'seconds':>8}")
for name in ("pendulum-0.8", "pendulum-0.5", "pendulum-0.1", "pendulum-b10"):
    cfg = preset(name)
    t = time.perf_counter()
    report = run_pipeline(cfg, write=False)
    floor = pendulum_entropy(cfg.b, cfg.rho)
    print(f"b={cfg.b:g} Ts={cfg.Ts:<8g} {report.cells:>9} {report.partition_size:>5} "
          f"{report.bound_per_Ts:>10.4f} {floor:>8.4f} {time.perf_counter() - t:>8.1f}")
