"""Run orchestration: builds a device from a config, executes one workload
under one baseline mode, and accounts every nanosecond of the timeline.

Execution models:

* HOST / HOST_SGX: the device streams pages internally, each page then
  crosses the external link (serialized at its bandwidth), and the query
  runs on the host only after the bulk load finishes.  HOST_SGX multiplies
  host compute time by the enclave factor.
* ISC / ISC_TEE: the in-storage program translates its whole grant list up
  front, queues every flash read, and consumes pages as they arrive
  (per-page compute pipelined against the flash stream).  ISC_TEE adds
  TEE creation/teardown, world switches on translation misses, the memory
  encryption/verification charges, and the transfer-path stream cipher.

In-storage execution runs on a round-robin core scheduler (100 us slices
by default) shared by all concurrent TEEs; a solo run is the same machine
with one job, so multi-tenant slowdowns compare like for like.  TEE
teardown and result return happen on the runtime controller as soon as a
job's last chunk retires, off the shared data core.

Every run's timeline decomposes exactly: total equals the sum of the
reported components (lifecycle, translation, world switch, load stall,
core wait, compute, encryption, verification, DRAM slot time, cipher,
result return) with zero unattributed nanoseconds.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .cipher import PageCipherEngine
from .config import (
    MODE_HOST, MODE_HOST_SGX, MODE_ISC_TEE, SCHEME_NONE, RunConfig,
)
from .flash import FlashArray, FlashGeometry, FlashTimings
from .ftl import PLACEMENT_PROTECTED_REGION, Ftl
from .memmodel import AggregateMemoryModel, MemCharges
from .memprotect import MemoryLayout, MemoryProtection
from .runtime import TEE_CREATE_NS, TEE_DELETE_NS, OffloadRequest, TeeRuntime
from .sim import SeededRng, Simulator, splitmix64
from .workloads import (
    RECORD_BYTES, WORKLOADS, Dataset, WorkloadSpec, cumulative_writes,
    encode_answer, generate, records_from_pages,
)

COMPONENTS = (
    "lifecycle", "translation", "world_switch", "load_stall", "core_wait",
    "compute", "encryption", "verification", "dram", "cipher", "result_return",
)

TRANSLATE_BATCH = 256   # pages translated per scheduler chunk


class ComponentClock:
    """Integer-ns component accounting with exact per-component carry, so
    the sum of reported components equals the summed durations."""

    def __init__(self):
        self.ns = {c: 0 for c in COMPONENTS}
        self._carry = {c: 0 for c in COMPONENTS}

    def add_ps(self, component: str, ps: int) -> int:
        total = self._carry[component] + ps
        inc, self._carry[component] = divmod(total, 1000)
        self.ns[component] += inc
        return inc

    def add_ns(self, component: str, ns: int) -> int:
        self.ns[component] += ns
        return ns

    @property
    def total_ns(self) -> int:
        return sum(self.ns.values())


@dataclass
class Device:
    cfg: RunConfig
    sim: Simulator
    flash: FlashArray
    protection: MemoryProtection
    ftl: Ftl
    runtime: TeeRuntime
    num_lpas: int


def build_device(cfg: RunConfig, num_lpas: int, protected: bool = True) -> Device:
    geom = FlashGeometry(cfg.channels, cfg.chips_per_channel, cfg.dies_per_chip,
                         cfg.planes_per_die, cfg.blocks_per_plane,
                         cfg.pages_per_block, cfg.page_size)
    timings = FlashTimings(cfg.t_rd_ns, cfg.t_wr_ns, cfg.t_erase_ns,
                           cfg.channel_bw, cfg.external_bw)
    sim = Simulator(cfg.seed, cfg.event_cap)
    flash = FlashArray(geom, timings)
    protection = MemoryProtection(MemoryLayout(cfg.dram_size, cfg.secure_size,
                                               cfg.protected_size))
    ftl = Ftl(flash, protection, num_lpas=num_lpas,
              cache_capacity_entries=int(num_lpas * cfg.mapping_cache_ratio),
              gc_low_watermark=cfg.gc_low_watermark,
              gc_high_watermark=cfg.gc_high_watermark,
              wear_threshold=cfg.wear_threshold,
              protected_read_ns=cfg.protected_read_ns,
              placement=cfg.mapping_placement if protected
              else PLACEMENT_PROTECTED_REGION,
              charge_switches=protected)
    runtime = TeeRuntime(ftl, protection, external_bw=cfg.external_bw)
    return Device(cfg, sim, flash, protection, ftl, runtime, num_lpas)


def _ext_transfer_ns(nbytes: int, bw: int) -> int:
    return -(-nbytes * 1_000_000_000 // bw)


def _records_per_page(cfg: RunConfig) -> int:
    return cfg.page_size // RECORD_BYTES


def _isc_record_ps(cfg: RunConfig, spec: WorkloadSpec) -> int:
    factor = cfg.isc_compute_factor * (1.6 / cfg.isc_cpu_freq_ghz)
    if cfg.isc_cpu_model == "a53":
        factor *= cfg.a53_penalty
    return int(round(spec.host_record_ns * factor * 1000))


def _host_record_ps(cfg: RunConfig, spec: WorkloadSpec, sgx: bool) -> int:
    factor = cfg.sgx_compute_factor if sgx else 1.0
    return int(round(spec.host_record_ns * factor * 1000))


class TeeJob:
    """One in-storage program's execution as a sequence of atomic chunks
    consumed by the shared-core scheduler."""

    def __init__(self, device: Device, cfg: RunConfig, spec: WorkloadSpec,
                 lpas: list[int], protected: bool, tid: int,
                 cipher: PageCipherEngine | None,
                 memmodel: AggregateMemoryModel,
                 dataset: Dataset | None = None):
        self.device = device
        self.cfg = cfg
        self.spec = spec
        self.lpas = lpas
        self.protected = protected
        self.tid = tid
        self.cipher = cipher
        self.memmodel = memmodel
        self.dataset = dataset
        self.clock = ComponentClock()
        self.eid: int | None = None
        self.start_ns = 0
        self.finish_ns = 0
        self.last_run_end = 0
        self.phase = "translate"
        self._tcursor = 0
        self._ppas: list[int] = []
        self.arrivals: list[int] = []
        self.contents: list[bytes] = []
        self._page_idx = 0
        self._rpp = _records_per_page(cfg)
        self._rec_ps = _isc_record_ps(cfg, spec)
        self._writes_done = 0
        self.bus_log: list[tuple[int, bytes | None, bytes]] = []
        self.result: bytes = b""
        self.answer: dict[str, int] = {}

    # -- lifecycle ----------------------------------------------------------------

    def create(self, at: int) -> int:
        rt = self.device.runtime
        self.start_ns = at
        if self.protected:
            self.eid, _ = rt.create_tee(
                OffloadRequest(program=self.spec.name, lpa=self.lpas,
                               args=b"", tid=self.tid), at)
            self.clock.add_ns("lifecycle", TEE_CREATE_NS)
            self.last_run_end = at + TEE_CREATE_NS
        else:
            self.last_run_end = at
        return self.last_run_end

    # -- scheduler interface ----------------------------------------------------------

    def ready_time(self) -> int | None:
        """Earliest time the next chunk could start; None when done."""
        if self.phase == "translate":
            return self.last_run_end
        if self._page_idx >= len(self.lpas):
            return None
        return max(self.last_run_end, self.arrivals[self._page_idx])

    def run_chunk(self, t: int) -> int:
        """Execute one atomic chunk starting at t; returns its duration."""
        if self.phase == "translate":
            dur = self._translate_chunk(t)
            if self._tcursor >= len(self.lpas):
                self._issue_reads(t + dur)
                self.phase = "pages"
        else:
            dur = self._page_chunk(t)
        self.last_run_end = t + dur
        return dur

    def account_gap(self, run_start: int) -> None:
        """Split the idle gap before a chunk into data stall (no chunk was
        runnable) and core wait (runnable but not scheduled)."""
        gap_start = self.last_run_end
        if run_start <= gap_start:
            return
        ready = self.ready_time()
        stall_until = min(max(ready, gap_start), run_start)
        self.clock.add_ns("load_stall", stall_until - gap_start)
        self.clock.add_ns("core_wait", run_start - stall_until)

    # -- chunk bodies -------------------------------------------------------------------

    def _translate_chunk(self, t: int) -> int:
        ftl = self.device.ftl
        switch_unit = self.device.protection.switch_cost_ns
        end = min(self._tcursor + TRANSLATE_BATCH, len(self.lpas))
        dur = 0
        tee = self.eid if self.protected else None
        for lpa in self.lpas[self._tcursor:end]:
            ppa, cost, switched = ftl.translate(tee, lpa, t + dur)
            if switched and self.protected:
                self.clock.add_ns("world_switch", 2 * switch_unit)
                self.clock.add_ns("translation", cost - 2 * switch_unit)
            else:
                self.clock.add_ns("translation", cost)
            dur += cost
            self._ppas.append(ppa)
        self._tcursor = end
        return dur

    def _issue_reads(self, at: int) -> None:
        """Queue every data read; the flash resource model serializes
        transfers per channel and array time per die."""
        flash = self.device.flash
        for ppa in self._ppas:
            content, done = flash.read_page(ppa, at)
            self.arrivals.append(done)
            self.contents.append(content)

    def _page_chunk(self, t: int) -> int:
        i = self._page_idx
        self._page_idx += 1
        dur = self.clock.add_ps("compute", self._rpp * self._rec_ps)
        if self.cipher is not None:
            dur += self._transfer_cipher(i)
        if self.memmodel.scheme != SCHEME_NONE:
            charges = MemCharges()
            charges.add(self.memmodel.ingest_data_page(i))
            charges.add(self.memmodel.read_data_page(i))
            writes_target = cumulative_writes(self.spec, (i + 1) * self._rpp)
            batch = writes_target - self._writes_done
            self._writes_done = writes_target
            charges.add(self.memmodel.write_lines(batch))
            dur += self.clock.add_ps("encryption", charges.encryption_ps)
            dur += self.clock.add_ps("verification", charges.verification_ps)
            dur += self.clock.add_ps("dram", charges.dram_ps)
        return dur

    def _transfer_cipher(self, i: int) -> int:
        ppa = self._ppas[i]
        if self.cfg.cipher_payload == "real":
            enc = self.cipher.encrypt_page(ppa, self.contents[i])
            self.bus_log.append((ppa, enc.ciphertext, enc.iv))
            self.contents[i] = self.cipher.decrypt_page(enc.iv, enc.ciphertext)
        else:
            enc = self.cipher.account_page(ppa)
            self.bus_log.append((ppa, None, enc.iv))
        return self.clock.add_ns("cipher", 2 * enc.cost_ns)

    # -- completion -----------------------------------------------------------------------

    def finalize(self, t: int) -> int:
        """Compute the answer, return results, terminate.  Returns end time."""
        recs = records_from_pages(self.contents)
        self.answer = self.spec.kernel(recs)
        self.result = encode_answer(self.answer)
        end = t
        if self.protected:
            rt = self.device.runtime
            rt.complete(self.eid, self.result, t)
            rt.terminate_tee(self.eid, t)
            end += self.clock.add_ns("lifecycle", TEE_DELETE_NS)
            _, xfer = rt.get_result(self.tid, end)
            end += self.clock.add_ns("result_return", xfer)
        else:
            xfer = _ext_transfer_ns(max(1, len(self.result)),
                                    self.cfg.external_bw)
            end += self.clock.add_ns("result_return", xfer)
        self.finish_ns = end
        return end


def run_jobs(jobs: list[TeeJob], slice_ns: int) -> int:
    """Round-robin scheduler over one in-storage core.  Creations
    serialize up front; each scheduled job runs whole chunks until its
    slice budget is spent or it stalls.  Returns the final core time."""
    t = 0
    for job in jobs:
        t = job.create(t)
    rotation = deque(jobs)
    pending = {id(j) for j in jobs}
    while pending:
        # Jobs with no chunks left finalize off the data core immediately.
        for job in list(rotation):
            if id(job) in pending and job.ready_time() is None:
                job.finalize(job.last_run_end)
                pending.discard(id(job))
        if not pending:
            break
        ready = [(j.ready_time(), k) for k, j in enumerate(rotation)
                 if id(j) in pending]
        runnable = [k for rt_, k in ready if rt_ <= t]
        if not runnable:
            t = min(rt_ for rt_, _ in ready)
            continue
        # First ready job in rotation order; rotate past it afterwards.
        while True:
            job = rotation[0]
            rotation.rotate(-1)
            if id(job) in pending and job.ready_time() is not None \
                    and job.ready_time() <= t:
                break
        budget = slice_ns
        while budget > 0:
            rt_ = job.ready_time()
            if rt_ is None:
                job.finalize(job.last_run_end)
                pending.discard(id(job))
                break
            if rt_ > t:
                break
            job.account_gap(t)
            dur = job.run_chunk(t)
            t += dur
            budget -= dur
    return t


@dataclass
class RunResult:
    cfg: RunConfig
    spec: WorkloadSpec
    answer: dict[str, int]
    parts: dict[str, int]
    total_ns: int
    counters: dict[str, int]
    traffic: dict[str, float]
    energy_nj: float
    dataset_checksum: int

    @property
    def breakdown(self) -> dict[str, int]:
        """Canonical four-column breakdown; the remainder is lifecycle,
        world switches, DRAM slots, cipher residual, and result return."""
        return {
            "load": self.parts["translation"] + self.parts["load_stall"]
            + self.parts["core_wait"],
            "compute": self.parts["compute"],
            "encryption": self.parts["encryption"],
            "verification": self.parts["verification"],
        }


def _gather_counters(device: Device, memmodel: AggregateMemoryModel | None,
                     cipher: PageCipherEngine | None,
                     dataset: Dataset) -> tuple[dict, dict, float]:
    ftl = device.ftl
    counters = {
        "mapping_cache_hits": ftl.cache_hits,
        "mapping_cache_misses": ftl.cache_misses,
        "mapping_miss_ratio_ppm": int(ftl.miss_ratio * 1_000_000),
        "world_switches": ftl.world_switches,
        "flash_reads": device.flash.reads,
        "flash_programs": device.flash.programs,
        "flash_erases": device.flash.erases,
        "gc_relocated": ftl.gc_relocated,
        "gc_erased": ftl.gc_erased,
        "wear_migrations": ftl.wear_migrations,
        "records": dataset.n_records,
        "pages": dataset.n_pages,
        "tee_created": device.runtime.created,
        "tee_terminated": device.runtime.terminated,
        "tee_aborted": device.runtime.aborted,
    }
    energy = 0.0
    if cipher is not None:
        counters["cipher_pages"] = cipher.pages_encrypted
        energy = cipher.total_energy_nj
    if memmodel is not None and memmodel.scheme != SCHEME_NONE:
        total_writes = sum(memmodel._int_writes)
        counters.update({
            "counter_cache_hits": memmodel.cache_hits,
            "counter_cache_misses": memmodel.cache_misses,
            "counter_inits": memmodel.counter_inits,
            "verification_events": memmodel.verification_events,
            "encryption_events": memmodel.encryption_events,
            "major_increments": memmodel.major_increments,
            "line_reencryptions": memmodel.line_reencryptions,
            "dram_line_writes": total_writes,
            "dram_line_reads": dataset.n_records + total_writes,
        })
        tr = memmodel.traffic
        payload = dataset.total_bytes * 2 + total_writes * 64 * 2
        enc_extra = tr.counter_fetch_bytes + tr.counter_writeback_bytes
        ver_extra = (tr.mac_read_bytes + tr.mac_write_bytes +
                     tr.tree_read_bytes + tr.tree_write_bytes)
        traffic = {
            "payload_bytes": payload,
            "encryption_extra_bytes": enc_extra,
            "verification_extra_bytes": ver_extra,
            "encryption_extra_pct": round(100 * enc_extra / payload, 4),
            "verification_extra_pct": round(100 * ver_extra / payload, 4),
        }
    else:
        traffic = {
            "payload_bytes": dataset.total_bytes * 2,
            "encryption_extra_bytes": 0,
            "verification_extra_bytes": 0,
            "encryption_extra_pct": 0.0,
            "verification_extra_pct": 0.0,
        }
    return counters, traffic, energy


def _run_host(cfg: RunConfig, device: Device, dataset: Dataset,
              spec: WorkloadSpec, sgx: bool) -> RunResult:
    clock = ComponentClock()
    ftl = device.ftl
    t = 0
    ppas = []
    for lpa in range(dataset.n_pages):
        ppa, cost, _ = ftl.translate(None, lpa, t)
        t += clock.add_ns("translation", cost)
        ppas.append(ppa)
    contents = []
    arrivals = []
    for ppa in ppas:
        content, done = device.flash.read_page(ppa, t)
        arrivals.append(done)
        contents.append(content)
    link = t
    xfer = _ext_transfer_ns(cfg.page_size, cfg.external_bw)
    for arr in arrivals:
        link = max(link, arr) + xfer
    clock.add_ns("load_stall", link - t)
    recs = records_from_pages(contents)
    answer = spec.kernel(recs)
    clock.add_ps("compute", dataset.n_records * _host_record_ps(cfg, spec, sgx))
    counters, traffic, energy = _gather_counters(device, None, None, dataset)
    return RunResult(cfg, spec, answer, dict(clock.ns), clock.total_ns,
                     counters, traffic, energy, dataset.checksum)


def _make_cipher(cfg: RunConfig, salt: int) -> PageCipherEngine:
    key_rng = SeededRng(splitmix64(cfg.seed ^ (0xC1F3 + salt)))
    return PageCipherEngine(key_rng.randbytes(10),
                            SeededRng(splitmix64(cfg.seed ^ (0x17 + salt))),
                            page_size=cfg.page_size,
                            overlap=cfg.cipher_overlap,
                            cycle_ns=cfg.cipher_cycle_ns)


def run_single(cfg: RunConfig) -> RunResult:
    """Execute one (workload, mode) cell and return its result."""
    cfg = cfg.validate()
    spec = WORKLOADS[cfg.workload]
    dataset = generate(cfg.seed, cfg.dataset_mib * 1024 * 1024, cfg.page_size)
    protected = cfg.mode == MODE_ISC_TEE
    device = build_device(cfg, num_lpas=dataset.n_pages, protected=protected)
    stripe = list(cfg.stripe) if cfg.stripe else None
    device.ftl.populate({lpa: dataset.page_bytes(lpa)
                         for lpa in range(dataset.n_pages)}, stripe=stripe)

    if cfg.mode in (MODE_HOST, MODE_HOST_SGX):
        return _run_host(cfg, device, dataset, spec, sgx=cfg.mode == MODE_HOST_SGX)

    scheme = cfg.counter_scheme if protected else SCHEME_NONE
    memmodel = AggregateMemoryModel(scheme, dataset.n_pages,
                                    spec.intermediate_pages,
                                    cfg.counter_cache_bytes,
                                    cfg.dram_access_ns * 1000)
    cipher = _make_cipher(cfg, 0) if protected else None
    job = TeeJob(device, cfg, spec, list(range(dataset.n_pages)), protected,
                 tid=1, cipher=cipher, memmodel=memmodel, dataset=dataset)
    run_jobs([job], cfg.slice_ns)
    total = job.finish_ns - job.start_ns
    assert total == job.clock.total_ns, "unattributed simulated time"
    counters, traffic, energy = _gather_counters(device, memmodel, cipher, dataset)
    return RunResult(cfg, spec, job.answer, dict(job.clock.ns), total,
                     counters, traffic, energy, dataset.checksum)


def run_concurrent(cfg: RunConfig, workload_names: list[str]) -> list[RunResult]:
    """Run several workloads as concurrent TEEs on one device, each striped
    over a disjoint channel subset.  Returns one result per TEE."""
    cfg = cfg.validate()
    n = len(workload_names)
    if n < 1:
        raise ValueError("need at least one workload")
    if cfg.channels % n:
        raise ValueError("channels must divide evenly across tenants")
    per = cfg.channels // n
    specs = [WORKLOADS[name] for name in workload_names]
    datasets = [generate(splitmix64(cfg.seed ^ (7 + k)),
                         cfg.dataset_mib * 1024 * 1024, cfg.page_size)
                for k in range(n)]
    pages_each = datasets[0].n_pages
    device = build_device(cfg, num_lpas=pages_each * n, protected=True)
    jobs = []
    for k, (spec, ds) in enumerate(zip(specs, datasets)):
        stripe = list(range(k * per, (k + 1) * per))
        base = k * pages_each
        device.ftl.populate({base + i: ds.page_bytes(i)
                             for i in range(pages_each)}, stripe=stripe)
        memmodel = AggregateMemoryModel(cfg.counter_scheme, pages_each,
                                        spec.intermediate_pages,
                                        cfg.counter_cache_bytes,
                                        cfg.dram_access_ns * 1000)
        jobs.append(TeeJob(device, cfg, spec,
                           list(range(base, base + pages_each)), True,
                           tid=k + 1, cipher=_make_cipher(cfg, k),
                           memmodel=memmodel, dataset=ds))
    run_jobs(jobs, cfg.slice_ns)
    results = []
    for job in jobs:
        total = job.finish_ns - job.start_ns
        assert total == job.clock.total_ns, "unattributed simulated time"
        counters, traffic, energy = _gather_counters(
            device, job.memmodel, job.cipher, job.dataset)
        results.append(RunResult(job.cfg, job.spec, job.answer,
                                 dict(job.clock.ns), total, counters, traffic,
                                 energy, job.dataset.checksum))
    return results
