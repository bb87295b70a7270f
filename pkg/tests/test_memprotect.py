import itertools

import pytest

from securessd.memprotect import (
    AccessMode, DescriptorBits, Fault, MemoryLayout, MemoryProtection,
    ProtectionError, RegionKind, World, decode_region, encode_region,
    is_allowed,
)

MIB = 1024 * 1024


def small_mp():
    return MemoryProtection(MemoryLayout(dram_size=64 * MIB,
                                         secure_size=8 * MIB,
                                         protected_size=4 * MIB))


def test_regions_disjoint_and_cover_dram():
    layout = MemoryLayout(dram_size=64 * MIB, secure_size=8 * MIB,
                          protected_size=4 * MIB)
    s, p, n = layout.secure_range, layout.protected_range, layout.normal_range
    assert s[1] == p[0] and p[1] == n[0]
    assert s[0] == 0 and n[1] == layout.dram_size


def test_permission_matrix_is_total():
    for world, region, mode in itertools.product(World, RegionKind, AccessMode):
        assert is_allowed(world, region, mode) in (True, False)


def test_normal_write_to_protected_faults():
    mp = small_mp()
    addr = mp.layout.protected_range[0]
    result = mp.access(World.NORMAL, addr, AccessMode.WRITE)
    assert isinstance(result, Fault)
    assert mp.faults == [result]


def test_normal_read_of_protected_allowed():
    mp = small_mp()
    addr = mp.layout.protected_range[0]
    assert mp.access(World.NORMAL, addr, AccessMode.READ) == RegionKind.PROTECTED


def test_normal_access_to_secure_faults_both_modes():
    mp = small_mp()
    for mode in AccessMode:
        assert isinstance(mp.access(World.NORMAL, 0, mode), Fault)


def test_secure_write_anywhere_allowed():
    mp = small_mp()
    for addr in (0, mp.layout.protected_range[0], mp.layout.normal_range[0]):
        region = mp.access(World.SECURE, addr, AccessMode.WRITE)
        assert isinstance(region, RegionKind)
    assert mp.faults == []


def test_fault_count_matches_injected_violations():
    mp = small_mp()
    for _ in range(5):
        mp.access(World.NORMAL, 0, AccessMode.READ)
    mp.access(World.NORMAL, mp.layout.normal_range[0], AccessMode.WRITE)
    assert len(mp.faults) == 5


def test_descriptor_encoding_bijective():
    for kind in RegionKind:
        assert decode_region(encode_region(kind)) == kind


def test_descriptor_encoding_values():
    assert encode_region(RegionKind.SECURE) == DescriptorBits(0, 0b00, 0)
    assert encode_region(RegionKind.NORMAL) == DescriptorBits(1, 0b01, 0)
    assert encode_region(RegionKind.PROTECTED) == DescriptorBits(1, 0b10, 1)
    with pytest.raises(ValueError):
        decode_region(DescriptorBits(0, 0b11, 1))


def test_world_switch_cost_and_state():
    mp = small_mp()
    assert mp.current == World.NORMAL
    assert mp.switch_world(World.SECURE) == 3_800
    assert mp.current == World.SECURE
    assert mp.switch_count == 1


def test_switch_to_same_world_rejected():
    mp = small_mp()
    with pytest.raises(ProtectionError):
        mp.switch_world(World.NORMAL)


def test_address_outside_dram_rejected():
    mp = small_mp()
    with pytest.raises(ProtectionError):
        mp.access(World.SECURE, mp.layout.dram_size, AccessMode.READ)


def test_layout_rejects_oversized_regions():
    with pytest.raises(ValueError):
        MemoryLayout(dram_size=8 * MIB, secure_size=8 * MIB, protected_size=1)
