"""Command-line entry point: ``lbmlayout {validate,bench,dump-model}``."""
from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import energy, kernels, metrics, validation
from .layout import GeometryError, Kind, LatticeGeometry, LayoutDescriptor
from .model import count_flops_per_site, d2q37, format_model_table

MODES = ("validate", "bench", "dump-model")
PRESETS = {
    "desk": (256, 1024),
    "large": (1024, 8192),
    "wide": (2304, 8192),
    "huge": (4608, 12288),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "bench"
    lx: int | None = None
    ly: int | None = None
    layouts: list[str] = field(default_factory=lambda: [k.value for k in Kind])
    vl: list[int] = field(default_factory=lambda: [8])
    workers: list[int] = field(default_factory=lambda: [1])
    iterations: int = 50
    warmup: int = 5
    omega: float = 1.0
    traffic_model: str = "nt"
    nt_store: bool = True
    energy: bool = True
    schedule: str = "dynamic"
    steps: int = 10
    flops_per_site: float | None = None
    output: str | None = None
    report: str | None = None
    seed: int = 0

    def echo(self) -> str:
        parts = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            parts.append(f"{f.name}={v}")
        return " ".join(parts)


def _int_list(text) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _str_list(text) -> list[str]:
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_CONVERTERS = {
    "mode": str, "lx": int, "ly": int, "layouts": _str_list, "vl": _int_list, "workers": _int_list,
    "iterations": int, "warmup": int, "omega": float, "traffic_model": str, "nt_store": _bool,
    "energy": _bool, "schedule": str, "steps": int, "flops_per_site": float, "output": str,
    "report": str, "seed": int,
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"{path}:{n}: bad value for {key}: {exc}") from exc
    return values


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = argparse.ArgumentParser(prog="lbmlayout", description="D2Q37 layout validation and benchmarks",
                                argument_default=S)
    p.add_argument("mode", choices=MODES, nargs="?", default=None)
    p.add_argument("--config", help="key=value config file (flags override it)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named lattice size")
    p.add_argument("--lx", type=int)
    p.add_argument("--ly", type=int)
    p.add_argument("--layouts", type=_str_list, help="comma list of AoS,SoA,CSoA,CAoSoA")
    p.add_argument("--vl", type=_int_list, help="comma list of cluster lengths")
    p.add_argument("--workers", type=_int_list, help="comma list of worker counts")
    p.add_argument("--iterations", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--traffic-model", dest="traffic_model", choices=sorted(metrics.TRAFFIC_FACTORS))
    p.add_argument("--nt-store", dest="nt_store", action=argparse.BooleanOptionalAction)
    p.add_argument("--energy", action=argparse.BooleanOptionalAction)
    p.add_argument("--schedule", choices=kernels.SCHEDULES)
    p.add_argument("--steps", type=int, help="steps per validation case")
    p.add_argument("--flops-per-site", dest="flops_per_site", type=float,
                   help="override the traced collide flop count for GF/s")
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    p.add_argument("--report", help="write the layout trend report here")
    p.add_argument("--seed", type=int)
    return p


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    try:
        cfg.layouts = [Kind.parse(k).value for k in cfg.layouts]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for name in ("iterations", "steps"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} >= 1 is required")
    if cfg.warmup < 0:
        raise ConfigError("warmup >= 0 is required")
    if not cfg.vl or not cfg.workers or not cfg.layouts:
        raise ConfigError("layouts, vl and workers lists must be non-empty")
    if any(w < 1 for w in cfg.workers):
        raise ConfigError("worker counts >= 1 are required")
    if not 0 < cfg.omega < 2:
        raise ConfigError("omega in (0, 2) is required")
    if cfg.traffic_model not in metrics.TRAFFIC_FACTORS:
        raise ConfigError(f"traffic_model must be one of {sorted(metrics.TRAFFIC_FACTORS)}")
    if cfg.schedule not in kernels.SCHEDULES:
        raise ConfigError(f"schedule must be one of {kernels.SCHEDULES}")
    for dim in ("lx", "ly"):
        v = getattr(cfg, dim)
        if v is not None and v < 1:
            raise ConfigError(f"{dim} >= 1 is required")
    if cfg.ly is not None:
        for vl in cfg.vl:
            try:
                LatticeGeometry(cfg.lx or 1, cfg.ly, vl=vl)
            except GeometryError as exc:
                raise ConfigError(str(exc)) from exc
    return cfg


def parse_config(argv=None, config_file=None, echo=sys.stderr) -> RunConfig:
    """Effective configuration: defaults, then the config file, then flags."""
    try:
        args = vars(build_parser().parse_args(argv))
    except SystemExit as exc:
        if exc.code == 0:  # --help
            raise
        raise ConfigError("invalid command line") from exc
    values: dict = {}
    path = args.pop("config", None) or config_file
    if path:
        values.update(read_config_file(path))
    preset = args.pop("preset", None)
    if preset:
        args.setdefault("lx", PRESETS[preset][0])
        args.setdefault("ly", PRESETS[preset][1])
    values.update({k: v for k, v in args.items() if v is not None})
    cfg = validate_config(RunConfig(**values))
    if echo is not None:
        print(f"# effective config: {cfg.echo()}", file=echo)
    return cfg


def _provider(cfg: RunConfig):
    if not cfg.energy:
        return None
    prov = energy.SysfsRaplProvider()
    return prov if prov.available else None


def run_bench_matrix(cfg: RunConfig, provider=None) -> list[metrics.BenchReport]:
    """Time propagate, collide and a full step for every layout x vl x workers cell."""
    model = d2q37()
    lx = cfg.lx or PRESETS["desk"][0]
    ly = cfg.ly or PRESETS["desk"][1]
    flops = cfg.flops_per_site if cfg.flops_per_site is not None else count_flops_per_site(model)
    start = validation.random_state(lx, ly, cfg.seed, model)
    reports = []
    for layout in cfg.layouts:
        for vl in cfg.vl:
            for workers in cfg.workers:
                try:
                    desc = LayoutDescriptor(layout, LatticeGeometry(lx, ly, vl=vl))
                    state = kernels.LatticeState.from_canonical(start, desc, model)
                except Exception as exc:  # recorded, the matrix goes on
                    for name in ("propagate", "collide", "step"):
                        reports.append(_failed_row(name, layout, vl, workers, lx, ly, model.npop, cfg, exc))
                    continue
                kw = dict(workers=workers, schedule=cfg.schedule)
                # halo exchange is its own pass and stays outside the propagate timing
                kernels.halo_exchange(state)
                kernels.propagate(state, **kw)
                cells = {
                    "propagate": lambda s: kernels.propagate(s, nontemporal=cfg.nt_store, **kw),
                    "collide": lambda s: _collide_only(s, cfg.omega, kw),
                    "step": lambda s: kernels.step(s, cfg.omega, nontemporal=cfg.nt_store, **kw),
                }
                for name, fn in cells.items():
                    try:
                        reports.append(metrics.timing_harness(
                            fn, state, cfg.iterations, cfg.warmup, name=name, workers=workers,
                            flops_per_site=flops, traffic_model=cfg.traffic_model,
                            energy_provider=provider, vl=vl))
                    except Exception as exc:
                        reports.append(_failed_row(name, layout, vl, workers, lx, ly, model.npop, cfg, exc))
    return reports


def _collide_only(state, omega, kw):
    # collide swaps buffers; swap back so every timed call relaxes the same data
    kernels.collide(state, omega, **kw)
    state.swap()
    return state


def _failed_row(name, layout, vl, workers, lx, ly, npop, cfg, exc):
    nan = float("nan")
    return metrics.BenchReport(
        kernel=name, layout=layout, vl=vl, workers=workers, lx=lx, ly=ly, npop=npop,
        iterations=cfg.iterations, t_iter=nan, t_min=nan, mlups=nan, gbps=nan, gflops=nan,
        flops_per_site=cfg.flops_per_site or 0.0, traffic_model=cfg.traffic_model,
        clock_resolution=nan, error=f"{type(exc).__name__}: {exc}")


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = parse_config(argv, echo=stderr)
    except (ConfigError, OSError) as exc:
        print(f"lbmlayout: error: {exc}", file=stderr)
        return 2

    if cfg.mode == "dump-model":
        text = format_model_table(d2q37())
        _emit(text, cfg.output, stdout)
        return 0

    if cfg.mode == "validate":
        geoms = [(cfg.lx or 16, cfg.ly)] if cfg.ly else list(validation.DEFAULT_GEOMETRIES)
        vls = cfg.vl if cfg.ly else list(validation.DEFAULT_VL)
        report = validation.run_validation(geoms, vls, cfg.layouts, cfg.steps, cfg.seed, cfg.omega,
                                           workers=max(cfg.workers), schedule=cfg.schedule)
        _emit(report.summary() + "\n", cfg.output, stdout)
        return 0 if report.passed else 1

    reports = run_bench_matrix(cfg, _provider(cfg))
    _emit(metrics.write_csv(reports), cfg.output, stdout)
    trend = metrics.trend_report(reports)
    if cfg.report:
        Path(cfg.report).write_text(trend + "\n")
    print(trend, file=stderr)
    return 0


def _emit(text, path, stdout):
    if path:
        Path(path).write_text(text)
    else:
        stdout.write(text)


if __name__ == "__main__":
    raise SystemExit(main())
