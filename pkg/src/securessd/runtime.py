"""In-storage TEE lifecycle: creation, ID assignment, exception handling,
termination, and result return.

Each TEE gets a preallocated 16 MiB contiguous region in the normal DRAM
region (avoiding fragmentation from dynamic allocation), a metadata slot in
the secure region, and up to 15 can be live at once (4 ID bits; 0 means
unowned).  IDs of terminated TEEs are recycled, and recycling is safe:
reclaim clears the ID bits off every mapping entry the TEE owned, so a
recycled ID reaches nothing until the new owner is granted pages again.

Aborts fall into three cases: an access-control violation, corruption of
TEE memory or metadata, or an exception thrown by the offloaded program.
The abort record survives reclaim so the host sees why its task died.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .ftl import Ftl, PermissionDenied
from .memprotect import MemoryProtection

MIB = 1024 * 1024

TEE_CREATE_NS = 95_000
TEE_DELETE_NS = 58_000
TEE_REGION_BYTES = 16 * MIB
METADATA_SLOT_BYTES = 64 * 1024
MAX_LIVE_TEES = 15


class TeeRuntimeError(Exception):
    pass


class NoFreeId(TeeRuntimeError):
    pass


class OutOfMemory(TeeRuntimeError):
    pass


class UnknownTee(TeeRuntimeError):
    pass


class DuplicateTask(TeeRuntimeError):
    pass


class NotFinished(TeeRuntimeError):
    pass


class Aborted(TeeRuntimeError):
    def __init__(self, record: "AbortRecord"):
        super().__init__(f"TEE aborted: {record.reason.value}: {record.message}")
        self.record = record


class TeeState(Enum):
    CREATING = "CREATING"
    RUNNING = "RUNNING"
    ABORTED = "ABORTED"
    TERMINATED = "TERMINATED"


class AbortReason(Enum):
    ACCESS_VIOLATION = "ACCESS_VIOLATION"
    MEMORY_CORRUPTION = "MEMORY_CORRUPTION"
    PROGRAM_EXCEPTION = "PROGRAM_EXCEPTION"


@dataclass(frozen=True)
class AbortRecord:
    eid: int
    reason: AbortReason
    message: str
    at_ns: int


@dataclass
class OffloadRequest:
    program: Any            # workload program stand-in for offloaded code
    lpa: list[int]
    args: bytes
    tid: int
    code_size: int = 64 * 1024
    memory_quota: int = TEE_REGION_BYTES


@dataclass
class TeeDescriptor:
    eid: int
    tid: int
    state: TeeState
    code_size: int
    lpa_grant: list[int]
    memory_base: int
    memory_bytes: int
    metadata_base: int
    result_buffer: bytes = b""
    abort_record: Optional[AbortRecord] = None
    accessed_ranges: list[tuple[int, int]] = field(default_factory=list)


class TeeRuntime:
    def __init__(self, ftl: Ftl, protection: MemoryProtection,
                 external_bw: int = 3_200_000_000):
        self.ftl = ftl
        self.protection = protection
        self.external_bw = external_bw
        layout = protection.layout
        self._region_base, region_end = layout.normal_range
        self._region_slots = (region_end - self._region_base) // TEE_REGION_BYTES
        self._free_slots = list(range(self._region_slots - 1, -1, -1))
        meta_base, meta_end = layout.secure_range
        # Metadata slots sit in the upper half of the secure region.
        self._meta_base = meta_base + (meta_end - meta_base) // 2
        self.live: dict[int, TeeDescriptor] = {}
        self._tasks: dict[int, TeeDescriptor] = {}
        self.created = 0
        self.terminated = 0
        self.aborted = 0
        self.lifecycle_cost_ns = 0

    # -- helpers -----------------------------------------------------------------

    def _free_eid(self) -> int:
        for eid in range(1, MAX_LIVE_TEES + 1):
            if eid not in self.live:
                return eid
        raise NoFreeId("all 15 TEE IDs are live")

    def _live(self, eid: int) -> TeeDescriptor:
        desc = self.live.get(eid)
        if desc is None:
            raise UnknownTee(f"no live TEE with eid {eid}")
        return desc

    def free_normal_bytes(self) -> int:
        return len(self._free_slots) * TEE_REGION_BYTES

    # -- API ----------------------------------------------------------------------

    def offload_code(self, request: OffloadRequest, at: int = 0) -> int:
        """Entry point from the host library: queue the offload and create
        the TEE for it."""
        if request.tid in self._tasks:
            raise DuplicateTask(f"tid {request.tid} already in flight")
        self.create_tee(request, at)
        return request.tid

    def create_tee(self, request: OffloadRequest, at: int = 0) -> tuple[int, TeeDescriptor]:
        eid = self._free_eid()
        if request.code_size > self.free_normal_bytes():
            raise OutOfMemory(
                f"program of {request.code_size} bytes exceeds available DRAM")
        if not self._free_slots:
            raise OutOfMemory("no 16MiB region slot available")
        slot = self._free_slots.pop()
        desc = TeeDescriptor(
            eid=eid,
            tid=request.tid,
            state=TeeState.CREATING,
            code_size=request.code_size,
            lpa_grant=list(request.lpa),
            memory_base=self._region_base + slot * TEE_REGION_BYTES,
            memory_bytes=request.memory_quota,
            metadata_base=self._meta_base + eid * METADATA_SLOT_BYTES,
        )
        self.live[eid] = desc
        self._tasks[request.tid] = desc
        self.ftl.register_tee(eid, request.lpa)
        self.ftl.set_id_bits(eid, request.lpa)
        desc.state = TeeState.RUNNING
        self.created += 1
        self.lifecycle_cost_ns += TEE_CREATE_NS
        return eid, desc

    def terminate_tee(self, eid: int, at: int = 0) -> int:
        """Terminate a RUNNING (normally) or ABORTED (reclaim-only) TEE and
        release its resources.  Returns reclaimed bytes."""
        desc = self._live(eid)
        if desc.state is TeeState.RUNNING:
            desc.state = TeeState.TERMINATED
        elif desc.state is not TeeState.ABORTED:
            raise TeeRuntimeError(f"cannot terminate TEE in {desc.state.value}")
        self.ftl.release_tee(eid)
        slot = (desc.memory_base - self._region_base) // TEE_REGION_BYTES
        self._free_slots.append(slot)
        del self.live[eid]
        self.terminated += 1
        self.lifecycle_cost_ns += TEE_DELETE_NS
        return desc.memory_bytes + METADATA_SLOT_BYTES

    def throw_out_tee(self, eid: int, reason: AbortReason, message: str,
                      at: int = 0) -> AbortRecord:
        desc = self._live(eid)
        if desc.state not in (TeeState.CREATING, TeeState.RUNNING):
            raise TeeRuntimeError(f"TEE {eid} already {desc.state.value}")
        record = AbortRecord(eid, reason, message, at)
        desc.abort_record = record
        desc.state = TeeState.ABORTED
        self.aborted += 1
        return record

    def read_mapping_entry(self, eid: int, lpa: int, at: int = 0) -> tuple[int, int]:
        """Explicit translation service: on a cache miss this pays the
        secure-world round trip plus the translation-page flash load; once
        installed, a repeat is a protected-region hit."""
        desc = self._live(eid)
        if desc.state is not TeeState.RUNNING:
            raise TeeRuntimeError(f"TEE {eid} is {desc.state.value}")
        try:
            ppa, cost, _ = self.ftl.translate(eid, lpa, at)
        except PermissionDenied:
            self.throw_out_tee(eid, AbortReason.ACCESS_VIOLATION,
                               f"translation denied for lpa {lpa}", at)
            raise
        return ppa, cost

    def complete(self, eid: int, result: bytes, at: int = 0) -> None:
        """Copy the program's result into the TEE's metadata region (secure
        world) ahead of termination."""
        desc = self._live(eid)
        if desc.state is not TeeState.RUNNING:
            raise TeeRuntimeError(f"TEE {eid} is {desc.state.value}")
        desc.result_buffer = bytes(result)

    def get_result(self, tid: int, at: int = 0) -> tuple[bytes, int]:
        """Host-side retrieval.  Returns (bytes, transfer_cost_ns) over the
        external link."""
        desc = self._tasks.get(tid)
        if desc is None:
            raise UnknownTee(f"no task {tid}")
        if desc.state is TeeState.ABORTED or desc.abort_record is not None:
            raise Aborted(desc.abort_record)
        if desc.state is not TeeState.TERMINATED:
            raise NotFinished(f"task {tid} still {desc.state.value}")
        nbytes = max(1, len(desc.result_buffer))
        cost = -(-nbytes * 1_000_000_000 // self.external_bw)
        return desc.result_buffer, cost

    # -- isolation audit --------------------------------------------------------------

    def record_access(self, eid: int, base: int, size: int) -> None:
        self._live(eid).accessed_ranges.append((base, size))

    def audit_isolation(self) -> list[str]:
        """Verify no TEE's recorded accesses touch another TEE's region or
        the secure region.  Returns a list of violations (empty if clean)."""
        out = []
        layout = self.protection.layout
        sec_lo, sec_hi = layout.secure_range
        prot_lo, prot_hi = layout.protected_range
        for desc in self._tasks.values():
            lo = desc.memory_base
            hi = lo + desc.memory_bytes
            for base, size in desc.accessed_ranges:
                if sec_lo <= base < sec_hi:
                    out.append(f"TEE {desc.eid} touched secure region at {base:#x}")
                elif prot_lo <= base and base + size <= prot_hi:
                    continue     # read of the shared mapping cache
                elif not (lo <= base and base + size <= hi):
                    out.append(f"TEE {desc.eid} strayed to {base:#x}")
        return out
