"""Three-region DRAM protection (normal / protected / secure) and world
switching.

The controller DRAM is partitioned into three disjoint regions.  Code in
the secure world can read and write everywhere.  Code in the normal world
has full access to the normal region, read-only access to the protected
region (which hosts the shared address-mapping cache), and no access to
the secure region.  Every access decision is taken from this matrix; a
denied access is recorded as a fault and surfaced to the runtime, never
silently dropped.

Region attributes are encoded by three descriptor fields: a non-secure
bit, two access-permission bits, and one extension bit that marks the
protected region.  The encoding is fixed here so it can be tested
bit-exactly:

    region      ns  ap  es
    SECURE       0  00   0
    NORMAL       1  01   0
    PROTECTED    1  10   1
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

MIB = 1024 * 1024

CONTEXT_SWITCH_NS = 3_800


class RegionKind(Enum):
    NORMAL = "NORMAL"
    PROTECTED = "PROTECTED"
    SECURE = "SECURE"


class World(Enum):
    NORMAL = "NORMAL"
    SECURE = "SECURE"


class AccessMode(Enum):
    READ = "read"
    WRITE = "write"


@dataclass(frozen=True)
class DescriptorBits:
    ns_bit: int
    ap_bits: int
    es_bit: int


_ENCODING = {
    RegionKind.SECURE: DescriptorBits(0, 0b00, 0),
    RegionKind.NORMAL: DescriptorBits(1, 0b01, 0),
    RegionKind.PROTECTED: DescriptorBits(1, 0b10, 1),
}

_DECODING = {bits: kind for kind, bits in _ENCODING.items()}

# (world, region) -> set of allowed modes; total over all triples.
_PERMISSIONS = {
    (World.SECURE, RegionKind.NORMAL): {AccessMode.READ, AccessMode.WRITE},
    (World.SECURE, RegionKind.PROTECTED): {AccessMode.READ, AccessMode.WRITE},
    (World.SECURE, RegionKind.SECURE): {AccessMode.READ, AccessMode.WRITE},
    (World.NORMAL, RegionKind.NORMAL): {AccessMode.READ, AccessMode.WRITE},
    (World.NORMAL, RegionKind.PROTECTED): {AccessMode.READ},
    (World.NORMAL, RegionKind.SECURE): set(),
}


def encode_region(kind: RegionKind) -> DescriptorBits:
    return _ENCODING[kind]


def decode_region(bits: DescriptorBits) -> RegionKind:
    try:
        return _DECODING[bits]
    except KeyError:
        raise ValueError(f"no region maps to descriptor {bits}") from None


def is_allowed(world: World, region: RegionKind, mode: AccessMode) -> bool:
    return mode in _PERMISSIONS[(world, region)]


class ProtectionError(Exception):
    pass


@dataclass(frozen=True)
class Fault:
    world: World
    region: RegionKind
    mode: AccessMode
    address: int


@dataclass
class MemoryLayout:
    """Region layout over the controller DRAM.

    Default: the secure region (runtime + TEE metadata) sits at the bottom,
    followed by the protected region sized for the mapping cache, with the
    remainder normal.  Sizes are configuration knobs.
    """

    dram_size: int = 4 * 1024 * MIB
    secure_size: int = 64 * MIB
    protected_size: int = 16 * MIB

    def __post_init__(self):
        if self.secure_size + self.protected_size > self.dram_size:
            raise ValueError("regions exceed DRAM size")

    @property
    def secure_range(self) -> tuple[int, int]:
        return (0, self.secure_size)

    @property
    def protected_range(self) -> tuple[int, int]:
        return (self.secure_size, self.secure_size + self.protected_size)

    @property
    def normal_range(self) -> tuple[int, int]:
        return (self.secure_size + self.protected_size, self.dram_size)

    def region_of(self, address: int) -> RegionKind:
        if not 0 <= address < self.dram_size:
            raise ProtectionError(f"address {address:#x} outside DRAM")
        if address < self.secure_size:
            return RegionKind.SECURE
        if address < self.secure_size + self.protected_size:
            return RegionKind.PROTECTED
        return RegionKind.NORMAL


class MemoryProtection:
    """Access-decision and world-switch model for one simulated core."""

    def __init__(self, layout: MemoryLayout = None,
                 switch_cost_ns: int = CONTEXT_SWITCH_NS):
        if switch_cost_ns <= 0:
            raise ValueError("switch cost must be positive")
        self.layout = layout or MemoryLayout()
        self.current = World.NORMAL
        self.switch_cost_ns = switch_cost_ns
        self.switch_count = 0
        self.faults: list[Fault] = []

    def access(self, world: World, address: int, mode: AccessMode):
        """Returns the region kind on success, or a Fault record on denial.

        Faults are appended to self.faults for the runtime to translate
        into an access-violation abort.
        """
        region = self.layout.region_of(address)
        if is_allowed(world, region, mode):
            return region
        fault = Fault(world, region, mode, address)
        self.faults.append(fault)
        return fault

    def switch_world(self, target: World) -> int:
        """Switch to the other world; returns the charged cost in ns."""
        if target == self.current:
            raise ProtectionError(f"already in {target.value} world")
        self.current = target
        self.switch_count += 1
        return self.switch_cost_ns
