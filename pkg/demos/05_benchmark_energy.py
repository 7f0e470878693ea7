# Benchmark the kernels on a small lattice and attach energy readings from a
# synthetic counter (real RAPL counters are used by the CLI when present).

import io
import time

from lbmlayout import energy, metrics
from lbmlayout.cli import parse_config, run_bench_matrix

cfg = parse_config(["bench", "--lx", "32", "--ly", "128", "--vl", "8", "--iterations", "5"], echo=None)

# a steady 45 W package plus 5 W DRAM, integrated over wall-clock time
fake = energy.FakeRaplProvider(power_w={"package": 45.0, "dram": 5.0}, clock=time.perf_counter_ns)
reports = run_bench_matrix(cfg, fake)

out = io.StringIO()
metrics.write_csv(reports, out)
print(out.getvalue())
print(metrics.trend_report(reports))

# the same numbers from the raw timing
r = reports[0]
assert r.mlups == metrics.mlups(r.lx, r.ly, r.t_iter)
assert abs(r.avg_power_w - 50.0) < 0.5
print(f"{r.kernel} on {r.layout}: {r.joules_total:.3e} J per iteration at {r.avg_power_w:.1f} W")
