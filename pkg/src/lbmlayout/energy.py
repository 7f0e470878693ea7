"""Energy-to-solution from RAPL counters (Package + DRAM).

Counters are read through a provider.  :class:`SysfsRaplProvider` reads the
Linux powercap tree; :class:`FakeRaplProvider` is driven by a script or a
constant power draw for tests.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

log = logging.getLogger(__name__)

POWERCAP_ROOT = "/sys/class/powercap"
ROOT_ENV = "LBMLAYOUT_POWERCAP_ROOT"
DOMAINS = ("package", "dram")


class RaplUnavailable(RuntimeError):
    """No readable RAPL energy counters on this platform."""


@dataclass(frozen=True)
class EnergySample:
    domain: str
    energy_uj: int
    max_range_uj: int
    timestamp: int  # monotonic ns, taken just before the counter read
    zone: str = ""


@dataclass(frozen=True)
class EnergyReport:
    joules_package: float
    joules_dram: float
    joules_total: float
    avg_power_w: float
    duration_s: float
    iterations: int


def _domain_of(name: str) -> str | None:
    name = name.strip().lower()
    if name.startswith("package"):
        return "package"
    if name == "dram":
        return "dram"
    return None


class SysfsRaplProvider:
    """Reads ``energy_uj`` / ``max_energy_range_uj`` under a powercap root."""

    def __init__(self, root: str | os.PathLike | None = None, clock: Callable[[], int] = time.monotonic_ns):
        self.root = Path(root or os.environ.get(ROOT_ENV) or POWERCAP_ROOT)
        self.clock = clock
        self._zones = self._discover()

    def _discover(self) -> list[tuple[str, str, Path]]:
        zones = []
        if not self.root.is_dir():
            return zones
        for d in sorted(self.root.rglob("name")):
            zone = d.parent
            if not zone.name.startswith("intel-rapl"):
                continue
            try:
                domain = _domain_of(d.read_text())
            except OSError:
                continue
            if domain and (zone / "energy_uj").exists():
                zones.append((domain, zone.name, zone))
        # the same zone can appear through the intel-rapl/ alias directory
        seen, unique = set(), []
        for domain, name, path in zones:
            if name not in seen:
                seen.add(name)
                unique.append((domain, name, path))
        return unique

    @property
    def available(self) -> bool:
        return bool(self._zones)

    def read(self) -> list[EnergySample]:
        if not self._zones:
            raise RaplUnavailable(f"no RAPL package/dram zones under {self.root}")
        out = []
        try:
            for domain, name, path in self._zones:
                max_range = int((path / "max_energy_range_uj").read_text())
                ts = self.clock()
                energy = int((path / "energy_uj").read_text())
                out.append(EnergySample(domain, energy, max_range, ts, name))
        except (OSError, ValueError) as exc:
            raise RaplUnavailable(f"cannot read RAPL counters: {exc}") from exc
        return out


class FakeRaplProvider:
    """Scriptable counter source.

    Either pass ``script``, a list of readings where each reading maps a
    domain to its raw ``energy_uj``, or ``power_w`` (domain -> watts) to
    integrate a constant draw over a fake clock advanced with :meth:`advance`.
    With ``clock`` (a nanosecond counter such as ``time.perf_counter_ns``)
    power readings follow that clock instead.
    """

    def __init__(self, power_w: dict[str, float] | None = None, script: list[dict[str, int]] | None = None,
                 max_range_uj: int = 262_143_328_850, start_uj: dict[str, int] | None = None,
                 step_ns: int = 1_000_000, clock=None):
        self.power_w = dict(power_w or {})
        self.script = list(script or [])
        self.max_range_uj = max_range_uj
        self.start_uj = dict(start_uj or {})
        self.step_ns = step_ns
        self.clock = clock
        self.now_ns = 0
        self.reads = 0

    def advance(self, seconds: float) -> None:
        self.now_ns += int(round(seconds * 1e9))

    def read(self) -> list[EnergySample]:
        if self.script:
            if self.reads >= len(self.script):
                raise RaplUnavailable("fake counter script exhausted")
            values = self.script[self.reads]
            ts = self.now_ns
            self.now_ns += self.step_ns
        else:
            ts = self.clock() if self.clock is not None else self.now_ns
            values = {
                d: (self.start_uj.get(d, 0) + int(round(w * ts / 1e3))) % self.max_range_uj
                for d, w in self.power_w.items()
            }
        self.reads += 1
        return [EnergySample(d, int(v), self.max_range_uj, ts, f"fake-{d}") for d, v in values.items()]


class UnavailableProvider:
    def read(self):
        raise RaplUnavailable("energy measurement disabled or unsupported")


def default_provider() -> SysfsRaplProvider:
    return SysfsRaplProvider()


def read_counters(provider=None) -> list[EnergySample]:
    """One sample per available domain; raises :class:`RaplUnavailable` otherwise."""
    provider = provider or default_provider()
    return provider.read()


def wrap_delta(before: int, after: int, max_range: int) -> int:
    """Counter increase assuming at most one wrap."""
    return (after - before + max_range) % max_range


def energy_to_solution(before: list[EnergySample], after: list[EnergySample], iterations: int) -> EnergyReport:
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    prev = {s.zone or s.domain: s for s in before}
    joules = {d: 0.0 for d in DOMAINS}
    t0 = min(s.timestamp for s in before) if before else 0
    t1 = max(s.timestamp for s in after) if after else 0
    duration = (t1 - t0) / 1e9
    for s in after:
        b = prev.get(s.zone or s.domain)
        if b is None:
            continue
        delta_j = wrap_delta(b.energy_uj, s.energy_uj, s.max_range_uj) / 1e6
        joules[s.domain] = joules.get(s.domain, 0.0) + delta_j
        _warn_long_window(s, delta_j, duration)
    pkg = joules["package"] / iterations
    dram = joules["dram"] / iterations
    total = pkg + dram
    power = total * iterations / duration if duration > 0 else 0.0
    return EnergyReport(pkg, dram, total, power, duration, iterations)


def _warn_long_window(s: EnergySample, delta_j: float, duration: float) -> None:
    if duration <= 0 or delta_j <= 0:
        return
    wrap_period = (s.max_range_uj / 1e6) / (delta_j / duration)
    if duration > wrap_period / 2:
        log.warning("measurement window %.1fs exceeds half the %s counter wrap period (%.1fs); "
                    "energy may be undercounted", duration, s.domain, wrap_period)
