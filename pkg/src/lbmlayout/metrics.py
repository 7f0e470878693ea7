"""Figures of merit (MLUPS, GB/s, GF/s), the timing harness and CSV output."""
from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import asdict, dataclass, fields
from typing import Callable


CSV_SCHEMA_VERSION = 1
BYTES_PER_VALUE = 8
# memory transfers per population value moved: read + write, plus the
# read-for-ownership of the destination line unless stores bypass the cache
TRAFFIC_FACTORS = {"nt": 2, "rfo": 3}
# full sweeps over the population arrays each kernel makes
SWEEPS = {"propagate": 1, "collide": 1, "step": 2}


def _positive(t_iter: float) -> None:
    if not t_iter > 0:
        raise ValueError(f"iteration time must be positive, got {t_iter}")


def mlups(lx: int, ly: int, t_iter: float) -> float:
    _positive(t_iter)
    return lx * ly / (t_iter * 1e6)


def propagate_gbps(lx: int, ly: int, npop: int, t_iter: float, traffic_model: str = "nt") -> float:
    _positive(t_iter)
    k = TRAFFIC_FACTORS[traffic_model]
    return lx * ly * npop * BYTES_PER_VALUE * k / (t_iter * 1e9)


def collide_gflops(lx: int, ly: int, flops_per_site: float, t_iter: float) -> float:
    _positive(t_iter)
    return lx * ly * flops_per_site / (t_iter * 1e9)


@dataclass
class BenchReport:
    kernel: str
    layout: str
    vl: int
    workers: int
    lx: int
    ly: int
    npop: int
    iterations: int
    t_iter: float
    t_min: float
    mlups: float
    gbps: float
    gflops: float
    flops_per_site: float
    traffic_model: str
    clock_resolution: float
    joules_package: float | None = None
    joules_dram: float | None = None
    joules_total: float | None = None
    avg_power_w: float | None = None
    error: str = ""

    @property
    def has_energy(self) -> bool:
        return self.joules_total is not None


def derived_metrics(kernel: str, lx: int, ly: int, npop: int, t_iter: float,
                    flops_per_site: float, traffic_model: str) -> tuple[float, float, float]:
    """(mlups, gbps, gflops) for one kernel at median iteration time ``t_iter``."""
    rate = mlups(lx, ly, t_iter)
    gbps = SWEEPS.get(kernel, 1) * propagate_gbps(lx, ly, npop, t_iter, traffic_model)
    gflops = 0.0 if kernel == "propagate" else collide_gflops(lx, ly, flops_per_site, t_iter)
    return rate, gbps, gflops


def timing_harness(kernel: Callable, state, iterations: int = 50, warmup: int = 5, *,
                   name: str = "kernel", workers: int = 1, flops_per_site: float = 0.0,
                   traffic_model: str = "nt", energy_provider=None, vl: int | None = None,
                   clock: Callable[[], float] = time.perf_counter) -> BenchReport:
    """Time ``kernel(state)``: untimed warmup, then per-iteration samples.

    ``t_iter`` is the median sample and drives every derived metric; the
    minimum is reported alongside.  When ``energy_provider`` is given the
    energy counters are read once before and once after the timed loop.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    for _ in range(warmup):
        kernel(state)
    before = _read_energy(energy_provider)
    samples = []
    for _ in range(iterations):
        t = clock()
        kernel(state)
        samples.append(clock() - t)
    after = _read_energy(energy_provider)

    desc = state.descriptor
    g = desc.geometry
    t_iter = statistics.median(samples)
    rate, gbps, gflops = derived_metrics(name, g.lx, g.ly, desc.npop, t_iter, flops_per_site, traffic_model)
    report = BenchReport(
        kernel=name, layout=desc.kind.value, vl=desc.lanes if vl is None else vl, workers=workers,
        lx=g.lx, ly=g.ly, npop=desc.npop, iterations=iterations, t_iter=t_iter, t_min=min(samples),
        mlups=rate, gbps=gbps, gflops=gflops, flops_per_site=flops_per_site,
        traffic_model=traffic_model, clock_resolution=time.get_clock_info("perf_counter").resolution,
    )
    if before is not None and after is not None:
        from .energy import energy_to_solution

        e = energy_to_solution(before, after, iterations)
        report.joules_package = e.joules_package
        report.joules_dram = e.joules_dram
        report.joules_total = e.joules_total
        report.avg_power_w = e.avg_power_w
    return report


def _read_energy(provider):
    if provider is None:
        return None
    from .energy import RaplUnavailable, read_counters

    try:
        return read_counters(provider)
    except RaplUnavailable:
        return None


# -- CSV ---------------------------------------------------------------------

ENERGY_COLUMNS = ("joules_package", "joules_dram", "joules_total", "avg_power_w")
BASE_COLUMNS = ("schema_version",) + tuple(
    f.name for f in fields(BenchReport) if f.name not in ENERGY_COLUMNS and f.name != "error"
) + ("error",)


def csv_columns(with_energy: bool) -> tuple[str, ...]:
    if not with_energy:
        return BASE_COLUMNS
    return BASE_COLUMNS[:-1] + ENERGY_COLUMNS + ("error",)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return "" if v is None else v


def write_csv(reports: list[BenchReport], out=None, with_energy: bool | None = None) -> str:
    """Emit one row per report; energy columns appear only when measured."""
    if with_energy is None:
        with_energy = any(r.has_energy for r in reports)
    cols = csv_columns(with_energy)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in reports:
        row = asdict(r)
        row["schema_version"] = CSV_SCHEMA_VERSION
        w.writerow([_fmt(row[c]) for c in cols])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def trend_report(reports: list[BenchReport]) -> str:
    """Per-layout host throughput with ratios against AoS (informational)."""
    ok = [r for r in reports if not r.error]
    lines = ["layout trend on this host (best over vl/workers; ratios vs AoS)"]
    lines.append(f"{'layout':<8} {'propagate GB/s':>15} {'x AoS':>7} {'collide MLUPS':>14} {'x AoS':>7}")

    def best(kernel, layout, attr):
        vals = [getattr(r, attr) for r in ok if r.kernel == kernel and r.layout == layout]
        return max(vals) if vals else float("nan")

    base_p = best("propagate", "AoS", "gbps")
    base_c = best("collide", "AoS", "mlups")
    def cell(v, width, prec):
        return f"{v:>{width}.{prec}f}" if math.isfinite(v) else f"{'-':>{width}}"

    for layout in ("AoS", "SoA", "CSoA", "CAoSoA"):
        p, c = best("propagate", layout, "gbps"), best("collide", layout, "mlups")
        lines.append(f"{layout:<8} {cell(p, 15, 3)} {cell(p / base_p, 7, 2)} {cell(c, 14, 3)} {cell(c / base_c, 7, 2)}")
    return "\n".join(lines)

