"""Run configuration: defaults, plain-text config files, validation.

Config files are INI-style key/value text with sections mirroring the
module layout ([sim], [flash], [regions], [ftl], [secure_memory],
[cipher], [compute], [workload]).  Unknown sections or keys, or values
that fail validation, raise ConfigError with a field-level message.
Defaults reproduce the reference device table: 8 channels, 4 chips per
channel, 4 dies per chip, 2 planes per die, 2048 blocks per plane, 512
pages per block, 4 KiB pages, tRD/tWR 50/300 us, 600 MB/s per channel,
DDR3-class controller DRAM of 4 GiB, and an ARM-class in-storage core at
1.6 GHz.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace

MIB = 1024 * 1024

MODE_HOST = "HOST"
MODE_HOST_SGX = "HOST_SGX"
MODE_ISC = "ISC"
MODE_ISC_TEE = "ISC_TEE"
MODES = (MODE_HOST, MODE_HOST_SGX, MODE_ISC, MODE_ISC_TEE)

SCHEME_HYBRID = "HYBRID"
SCHEME_SPLIT_ONLY = "SPLIT_ONLY"
SCHEME_NONE = "NONE"
SCHEMES = (SCHEME_HYBRID, SCHEME_SPLIT_ONLY, SCHEME_NONE)

PLACEMENTS = ("PROTECTED_REGION", "SECURE_WORLD")

CPU_MODELS = ("a72", "a53")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    # [sim]
    seed: int = 42
    event_cap: int = 10**9

    # [flash]
    channels: int = 8
    chips_per_channel: int = 4
    dies_per_chip: int = 4
    planes_per_die: int = 2
    blocks_per_plane: int = 2048
    pages_per_block: int = 512
    page_size: int = 4096
    t_rd_ns: int = 50_000
    t_wr_ns: int = 300_000
    t_erase_ns: int = 3_000_000
    channel_bw: int = 600 * MIB
    external_bw: int = 3_200_000_000

    # [regions]
    dram_size: int = 4096 * MIB
    secure_size: int = 64 * MIB
    protected_size: int = 16 * MIB

    # [ftl]
    mapping_cache_ratio: float = 0.75
    gc_low_watermark: float = 0.05
    gc_high_watermark: float = 0.10
    wear_threshold: int = 20
    protected_read_ns: int = 30
    mapping_placement: str = "PROTECTED_REGION"

    # [secure_memory]
    counter_scheme: str = SCHEME_HYBRID
    counter_cache_bytes: int = 128 * 1024
    dram_access_ns: int = 30
    parallel_update_discount: float = 1.0

    # [cipher]
    cipher_overlap: bool = True
    cipher_cycle_ns: int = 1
    cipher_payload: str = "real"      # real | modeled

    # [compute]  (calibration constants; not measured device values)
    isc_compute_factor: float = 2.47
    sgx_compute_factor: float = 2.03
    isc_cpu_freq_ghz: float = 1.6
    isc_cpu_model: str = "a72"
    a53_penalty: float = 1.15
    slice_ns: int = 100_000
    host_ref_channels: int = 8

    # [workload]
    workload: str = "filter"
    mode: str = MODE_ISC_TEE
    dataset_mib: int = 64
    record_bytes: int = 64
    stripe: tuple[int, ...] = ()      # empty = all channels

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.seed >= 0, "sim.seed must be >= 0")
        need(self.event_cap > 0, "sim.event_cap must be positive")
        for name in ("channels", "chips_per_channel", "dies_per_chip",
                     "planes_per_die", "blocks_per_plane", "pages_per_block"):
            need(getattr(self, name) >= 1, f"flash.{name} must be >= 1")
        need(self.page_size >= 512 and self.page_size & (self.page_size - 1) == 0,
             "flash.page_size must be a power of two >= 512")
        need(self.t_rd_ns > 0 and self.t_wr_ns >= self.t_rd_ns,
             "flash.t_wr_ns must be >= flash.t_rd_ns > 0")
        need(self.channel_bw > 0, "flash.channel_bw must be positive")
        need(self.external_bw > 0, "flash.external_bw must be positive")
        need(self.secure_size + self.protected_size < self.dram_size,
             "regions must fit inside regions.dram_size")
        need(0 < self.gc_low_watermark < self.gc_high_watermark < 1,
             "ftl watermarks must satisfy 0 < low < high < 1")
        need(0 < self.mapping_cache_ratio <= 1,
             "ftl.mapping_cache_ratio must be in (0, 1]")
        need(self.mapping_placement in PLACEMENTS,
             f"ftl.mapping_placement must be one of {PLACEMENTS}")
        need(self.counter_scheme in SCHEMES,
             f"secure_memory.counter_scheme must be one of {SCHEMES}")
        need(self.counter_cache_bytes >= 64,
             "secure_memory.counter_cache_bytes must be >= 64")
        need(self.cipher_payload in ("real", "modeled"),
             "cipher.cipher_payload must be real or modeled")
        need(self.mode in MODES, f"workload.mode must be one of {MODES}")
        need(self.isc_cpu_model in CPU_MODELS,
             f"compute.isc_cpu_model must be one of {CPU_MODELS}")
        need(self.isc_cpu_freq_ghz > 0, "compute.isc_cpu_freq_ghz must be > 0")
        need(self.dataset_mib >= 1, "workload.dataset_mib must be >= 1")
        need(self.record_bytes in (32, 64, 128, 256),
             "workload.record_bytes must be 32, 64, 128 or 256")
        need(all(0 <= c < self.channels for c in self.stripe),
             "workload.stripe channels must be within flash.channels")
        from .workloads import WORKLOADS
        need(self.workload in WORKLOADS,
             f"workload.workload must be one of {sorted(WORKLOADS)}")
        return self


_SECTIONS = {
    "sim": ("seed", "event_cap"),
    "flash": ("channels", "chips_per_channel", "dies_per_chip",
              "planes_per_die", "blocks_per_plane", "pages_per_block",
              "page_size", "t_rd_ns", "t_wr_ns", "t_erase_ns",
              "channel_bw", "external_bw"),
    "regions": ("dram_size", "secure_size", "protected_size"),
    "ftl": ("mapping_cache_ratio", "gc_low_watermark", "gc_high_watermark",
            "wear_threshold", "protected_read_ns", "mapping_placement"),
    "secure_memory": ("counter_scheme", "counter_cache_bytes",
                      "dram_access_ns", "parallel_update_discount"),
    "cipher": ("cipher_overlap", "cipher_cycle_ns", "cipher_payload"),
    "compute": ("isc_compute_factor", "sgx_compute_factor",
                "isc_cpu_freq_ghz", "isc_cpu_model", "a53_penalty",
                "slice_ns", "host_ref_channels"),
    "workload": ("workload", "mode", "dataset_mib", "record_bytes", "stripe"),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if key == "stripe":
            return tuple(int(x) for x in raw.split(",") if x.strip()) if raw else ()
        if ftype == "int":
            return int(raw, 0)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {ftype}") from None


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse config text over defaults (or a base config); validates."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    overrides = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            overrides[key] = _parse_value(key, raw)
    cfg = replace(base or RunConfig(), **overrides)
    return cfg.validate()


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def config_text(cfg: RunConfig) -> str:
    """Canonical echo of a config; parse_config(config_text(c)) == c."""
    out = io.StringIO()
    for section, keys in _SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            value = getattr(cfg, key)
            if key == "stripe":
                value = ",".join(str(c) for c in value)
            out.write(f"{key} = {value}\n")
        out.write("\n")
    return out.getvalue()
