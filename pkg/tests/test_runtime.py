import pytest

from securessd.flash import FlashArray, FlashGeometry, FlashTimings
from securessd.ftl import Ftl, PermissionDenied
from securessd.memprotect import MemoryLayout, MemoryProtection
from securessd.runtime import (
    MAX_LIVE_TEES, METADATA_SLOT_BYTES, TEE_REGION_BYTES, Aborted,
    AbortReason, DuplicateTask, NoFreeId, NotFinished, OffloadRequest,
    OutOfMemory, TeeRuntime, TeeRuntimeError, TeeState, UnknownTee,
)

MIB = 1024 * 1024

GEOM = FlashGeometry(channels=2, chips_per_channel=2, dies_per_chip=1,
                     planes_per_die=1, blocks_per_plane=32,
                     pages_per_block=16, page_size=512)


def make_runtime(dram_mib=512):
    flash = FlashArray(GEOM, FlashTimings())
    mp = MemoryProtection(MemoryLayout(dram_size=dram_mib * MIB,
                                       secure_size=16 * MIB,
                                       protected_size=8 * MIB))
    ftl = Ftl(flash, mp, num_lpas=512)
    return TeeRuntime(ftl, mp), ftl


def req(tid, lpas=(), code=64 * 1024):
    return OffloadRequest(program="filter", lpa=list(lpas), args=b"",
                          tid=tid, code_size=code)


def test_offload_creates_running_tee():
    rt, ftl = make_runtime()
    ftl.populate({l: bytes(512) for l in range(3)})
    tid = rt.offload_code(req(1, [0, 1, 2]))
    desc = rt._tasks[tid]
    assert desc.state is TeeState.RUNNING
    assert desc.eid == 1


def test_duplicate_tid_rejected():
    rt, _ = make_runtime()
    rt.offload_code(req(9))
    with pytest.raises(DuplicateTask):
        rt.offload_code(req(9))


def test_creation_charges_95us():
    rt, _ = make_runtime()
    rt.create_tee(req(1))
    assert rt.lifecycle_cost_ns == 95_000


def test_terminate_charges_58us_and_reclaims():
    rt, _ = make_runtime()
    eid, _ = rt.create_tee(req(1))
    reclaimed = rt.terminate_tee(eid)
    assert reclaimed == TEE_REGION_BYTES + METADATA_SLOT_BYTES
    assert rt.lifecycle_cost_ns == 95_000 + 58_000


def test_sixteenth_concurrent_tee_fails():
    rt, _ = make_runtime(dram_mib=768)
    for tid in range(MAX_LIVE_TEES):
        rt.create_tee(req(tid))
    with pytest.raises(NoFreeId):
        rt.create_tee(req(99))


def test_eid_of_terminated_tee_is_reused():
    rt, _ = make_runtime()
    eid1, _ = rt.create_tee(req(1))
    rt.terminate_tee(eid1)
    eid2, _ = rt.create_tee(req(2))
    assert eid2 == eid1


def test_oversized_program_fails_creation():
    rt, _ = make_runtime()
    with pytest.raises(OutOfMemory):
        rt.create_tee(req(1, code=1 << 40))


def test_recycled_eid_denied_until_regranted():
    rt, ftl = make_runtime()
    ftl.populate({l: bytes(512) for l in range(4)})
    eid, _ = rt.create_tee(req(1, [0, 1]))
    rt.terminate_tee(eid)
    eid2, _ = rt.create_tee(req(2, [2, 3]))
    assert eid2 == eid
    assert not ftl.check_access(eid2, 0)
    assert not ftl.check_access(eid2, 1)
    assert ftl.check_access(eid2, 2)


def test_abort_reasons_and_get_result():
    rt, _ = make_runtime()
    eid, _ = rt.create_tee(req(5))
    record = rt.throw_out_tee(eid, AbortReason.MEMORY_CORRUPTION, "mac mismatch")
    assert record.reason is AbortReason.MEMORY_CORRUPTION
    with pytest.raises(Aborted) as exc:
        rt.get_result(5)
    assert exc.value.record.reason is AbortReason.MEMORY_CORRUPTION


def test_program_exception_abort():
    rt, _ = make_runtime()
    eid, _ = rt.create_tee(req(6))
    rt.throw_out_tee(eid, AbortReason.PROGRAM_EXCEPTION, "division by zero")
    assert rt.live[eid].state is TeeState.ABORTED
    # Reclaim of an aborted TEE keeps the abort record.
    rt.terminate_tee(eid)
    with pytest.raises(Aborted):
        rt.get_result(6)


def test_get_result_before_completion():
    rt, _ = make_runtime()
    rt.create_tee(req(7))
    with pytest.raises(NotFinished):
        rt.get_result(7)


def test_result_returned_after_normal_termination():
    rt, _ = make_runtime()
    eid, _ = rt.create_tee(req(8))
    rt.complete(eid, (1234).to_bytes(8, "little"))
    rt.terminate_tee(eid)
    data, cost = rt.get_result(8)
    assert int.from_bytes(data, "little") == 1234
    assert cost >= 1


def test_unknown_tee_errors():
    rt, _ = make_runtime()
    with pytest.raises(UnknownTee):
        rt.terminate_tee(3)
    with pytest.raises(UnknownTee):
        rt.get_result(12)


def test_lifecycle_is_a_dag():
    rt, _ = make_runtime()
    eid, _ = rt.create_tee(req(1))
    rt.terminate_tee(eid)
    # Terminated: gone from the live set, no further transitions.
    with pytest.raises(UnknownTee):
        rt.throw_out_tee(eid, AbortReason.PROGRAM_EXCEPTION, "late")
    eid2, _ = rt.create_tee(req(2))
    rt.throw_out_tee(eid2, AbortReason.PROGRAM_EXCEPTION, "x")
    with pytest.raises(TeeRuntimeError):
        rt.throw_out_tee(eid2, AbortReason.PROGRAM_EXCEPTION, "twice")


def test_miss_service_cost_then_hit():
    rt, ftl = make_runtime()
    pages = {l: bytes(512) for l in range(8)}
    ftl.populate(pages)
    eid, _ = rt.create_tee(req(1, list(range(8))))
    _, cost_miss = rt.read_mapping_entry(eid, 0)
    xfer = ftl.flash.timings.transfer_ns(512)
    assert cost_miss == 2 * 3_800 + 50_000 + xfer
    _, cost_hit = rt.read_mapping_entry(eid, 0)
    assert cost_hit == ftl.protected_read_ns


def test_foreign_lpa_read_aborts_with_access_violation():
    rt, ftl = make_runtime()
    ftl.populate({l: bytes(512) for l in range(8)})
    eid_a, _ = rt.create_tee(req(1, [0, 1]))
    eid_b, _ = rt.create_tee(req(2, [2, 3]))
    with pytest.raises(PermissionDenied):
        rt.read_mapping_entry(eid_a, 2)
    assert rt.live[eid_a].state is TeeState.ABORTED
    assert rt.live[eid_a].abort_record.reason is AbortReason.ACCESS_VIOLATION


def test_isolation_audit_flags_strays():
    rt, _ = make_runtime()
    eid_a, desc_a = rt.create_tee(req(1))
    eid_b, desc_b = rt.create_tee(req(2))
    rt.record_access(eid_a, desc_a.memory_base, 4096)
    assert rt.audit_isolation() == []
    rt.record_access(eid_a, desc_b.memory_base, 4096)
    assert len(rt.audit_isolation()) == 1
    rt.record_access(eid_b, 0, 64)  # secure region
    assert len(rt.audit_isolation()) == 2
