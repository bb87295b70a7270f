"""Experiment scenarios: the standard study matrices built on run_single
and run_concurrent, with in-process memoization so overlapping studies
reuse each other's cells.

Sweeps execute in deterministic lexicographic order over their axes.  The
host baseline rows of the channel sweep are pinned to the reference
channel count (the host machine is one fixed reference system; the sweep
varies the computational device), while the latency sweep re-runs the
host per point because both sides share the same flash media.
"""

from __future__ import annotations

from dataclasses import replace

from .config import (
    MODE_HOST, MODE_HOST_SGX, MODE_ISC, MODE_ISC_TEE, SCHEME_HYBRID,
    SCHEME_SPLIT_ONLY, RunConfig, config_text,
)
from .engine import RunResult, run_concurrent, run_single
from .workloads import READ_INTENSIVE, WORKLOADS

ALL_WORKLOADS = tuple(sorted(WORKLOADS))
SCAN_WORKLOADS = tuple(sorted(READ_INTENSIVE))
MULTITENANT_MIX = ("filter", "arithmetic", "aggregate", "tpch_q1")

CHANNEL_POINTS = (4, 8, 16, 32)
T_RD_POINTS_US = (10, 30, 50, 70, 90, 110)

_CACHE: dict[str, RunResult] = {}
_CACHE_CONCURRENT: dict[str, list[RunResult]] = {}


def cached_run(cfg: RunConfig) -> RunResult:
    key = config_text(cfg)
    if key not in _CACHE:
        _CACHE[key] = run_single(cfg)
    return _CACHE[key]


def cached_concurrent(cfg: RunConfig, names: tuple[str, ...]) -> list[RunResult]:
    key = config_text(cfg) + "|" + ",".join(names)
    if key not in _CACHE_CONCURRENT:
        _CACHE_CONCURRENT[key] = run_concurrent(cfg, list(names))
    return _CACHE_CONCURRENT[key]


def clear_cache() -> None:
    _CACHE.clear()
    _CACHE_CONCURRENT.clear()


def _cell(base: RunConfig, **kw) -> RunConfig:
    return replace(base, **kw)


def overhead_matrix(base: RunConfig,
                    workloads: tuple[str, ...] = SCAN_WORKLOADS,
                    modes: tuple[str, ...] = (MODE_ISC, MODE_ISC_TEE),
                    ) -> dict[tuple[str, str], RunResult]:
    """The (workload x mode) comparison grid."""
    out = {}
    for wl in sorted(workloads):
        for mode in sorted(modes):
            out[(wl, mode)] = cached_run(_cell(base, workload=wl, mode=mode))
    return out


def full_mode_matrix(base: RunConfig,
                     workloads: tuple[str, ...] = ALL_WORKLOADS,
                     ) -> dict[tuple[str, str], RunResult]:
    return overhead_matrix(base, workloads,
                           (MODE_HOST, MODE_HOST_SGX, MODE_ISC, MODE_ISC_TEE))


def channel_sweep(base: RunConfig,
                  workloads: tuple[str, ...] = SCAN_WORKLOADS,
                  channels: tuple[int, ...] = CHANNEL_POINTS,
                  ) -> dict[tuple[str, int, str], RunResult]:
    """Internal-bandwidth sweep.  Host rows use the reference channel
    count; in-storage rows use the swept count."""
    out = {}
    for wl in sorted(workloads):
        host_cfg = _cell(base, workload=wl, mode=MODE_HOST,
                         channels=base.host_ref_channels)
        host = cached_run(host_cfg)
        for ch in sorted(channels):
            out[(wl, ch, MODE_HOST)] = host
            out[(wl, ch, MODE_ISC_TEE)] = cached_run(
                _cell(base, workload=wl, mode=MODE_ISC_TEE, channels=ch))
    return out


def latency_sweep(base: RunConfig,
                  workloads: tuple[str, ...] = SCAN_WORKLOADS,
                  t_rd_points_us: tuple[int, ...] = T_RD_POINTS_US,
                  ) -> dict[tuple[str, int, str], RunResult]:
    out = {}
    for wl in sorted(workloads):
        for t_us in sorted(t_rd_points_us):
            t_ns = t_us * 1000
            for mode in (MODE_HOST, MODE_ISC_TEE):
                out[(wl, t_us, mode)] = cached_run(
                    _cell(base, workload=wl, mode=mode, t_rd_ns=t_ns))
    return out


def placement_study(base: RunConfig,
                    workloads: tuple[str, ...] = ALL_WORKLOADS,
                    ) -> dict[tuple[str, str], RunResult]:
    """Mapping-table placement: protected region vs secure world."""
    out = {}
    for wl in sorted(workloads):
        for placement in ("PROTECTED_REGION", "SECURE_WORLD"):
            out[(wl, placement)] = cached_run(
                _cell(base, workload=wl, mode=MODE_ISC_TEE,
                      mapping_placement=placement))
    return out


def counter_scheme_study(base: RunConfig,
                         workloads: tuple[str, ...] = SCAN_WORKLOADS,
                         ) -> dict[tuple[str, str], RunResult]:
    out = {}
    for wl in sorted(workloads):
        for scheme in (SCHEME_HYBRID, SCHEME_SPLIT_ONLY):
            out[(wl, scheme)] = cached_run(
                _cell(base, workload=wl, mode=MODE_ISC_TEE,
                      counter_scheme=scheme))
    return out


def cpu_sweep(base: RunConfig, workload: str,
              freqs_ghz: tuple[float, ...] = (0.8, 1.2, 1.6),
              models: tuple[str, ...] = ("a72", "a53"),
              ) -> dict[tuple[str, float], RunResult]:
    out = {}
    for model in sorted(models):
        for freq in sorted(freqs_ghz):
            out[(model, freq)] = cached_run(
                _cell(base, workload=workload, mode=MODE_ISC_TEE,
                      isc_cpu_model=model, isc_cpu_freq_ghz=freq))
    return out


def multitenant_study(base: RunConfig,
                      mix: tuple[str, ...] = MULTITENANT_MIX,
                      ) -> dict[str, dict[str, RunResult]]:
    """Solo runs (each striped over its own channel subset) against the
    same four running concurrently on one device."""
    n = len(mix)
    per = base.channels // n
    solos = {}
    for k, wl in enumerate(mix):
        stripe = tuple(range(k * per, (k + 1) * per))
        solos[wl] = cached_run(_cell(base, workload=wl, mode=MODE_ISC_TEE,
                                     stripe=stripe))
    together = cached_concurrent(_cell(base, mode=MODE_ISC_TEE), tuple(mix))
    return {"solo": solos,
            "concurrent": {wl: res for wl, res in zip(mix, together)}}


def geometric_mean(values: list[float]) -> float:
    if not values:
        raise ValueError("no values")
    product = 1.0
    for v in values:
        product *= v
    return product ** (1.0 / len(values))
