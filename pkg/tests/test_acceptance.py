"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line with the measured values.  Desk scale is a 64 MiB dataset on the
default geometry; every run finishes well inside the time budget.

Run with: pytest tests/test_acceptance.py -v -s
"""

from dataclasses import replace

import pytest

from securessd.attacks import run_attack_suite
from securessd.cipher import PageCipherEngine, keystream
from securessd.config import (
    MODE_HOST, MODE_HOST_SGX, MODE_ISC, MODE_ISC_TEE, SCHEME_SPLIT_ONLY,
    RunConfig,
)
from securessd.engine import run_single
from securessd.experiments import (
    ALL_WORKLOADS, MULTITENANT_MIX, SCAN_WORKLOADS, cached_run,
    channel_sweep, counter_scheme_study, full_mode_matrix, geometric_mean,
    latency_sweep, multitenant_study, overhead_matrix, placement_study,
)
from securessd.flash import FlashArray, FlashGeometry, FlashTimings
from securessd.ftl import Ftl, PermissionDenied
from securessd.memprotect import MemoryLayout, MemoryProtection
from securessd.report import render_report
from securessd.runtime import AbortReason, OffloadRequest, TeeRuntime, TeeState
from securessd.securemem import (
    LINE, LINES_PER_PAGE, MAJOR_TREE, PAGE_BYTES, SPLIT_TREE, WRITABLE,
    READ_ONLY, EncryptedMemory, IntegrityViolation, decode_split_block,
)
from securessd.sim import SeededRng

from .trivium_reference import reference_keystream

MIB = 1024 * 1024

BASE = RunConfig(dataset_mib=64, cipher_payload="modeled")


def report_line(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {name}: {detail}")


# -- 1. Trivium oracle equivalence ------------------------------------------------

def test_criterion_01_keystream_oracle_equivalence():
    rng = SeededRng(0xACCE01)
    mismatches = 0
    pairs = 10
    for _ in range(pairs):
        key, iv = rng.randbytes(10), rng.randbytes(10)
        if keystream(key, iv, 4096) != reference_keystream(key, iv, 4096):
            mismatches += 1
    ok = mismatches == 0
    report_line(1, "keystream oracle equivalence", ok,
                f"{pairs} (key,IV) pairs x 4096 bits, {mismatches} mismatches")
    assert ok


# -- 2. Crypto roundtrip identities ------------------------------------------------

def test_criterion_02_roundtrip_identities():
    rng = SeededRng(0xACCE02)
    # 10^4 page-cipher operations (5000 encrypt/decrypt pairs).
    engine = PageCipherEngine(rng.randbytes(10), SeededRng(2), page_size=512)
    page_fail = 0
    for i in range(5000):
        page = rng.randbytes(512)
        enc = engine.encrypt_page(i & 0xFFFF, page)
        if engine.decrypt_page(enc.iv, enc.ciphertext) != page:
            page_fail += 1
    # 10^4 memory operations (5000 write/read pairs) on a 4-page store.
    mem = EncryptedMemory(rng.randbytes(16), 4)
    for p in range(4):
        mem.ingest_page(p, rng.randbytes(PAGE_BYTES), WRITABLE)
    mem_fail = 0
    for _ in range(5000):
        addr = (rng.randbelow(4) * LINES_PER_PAGE + rng.randbelow(64)) * LINE
        line = rng.randbytes(LINE)
        mem.mem_write(addr, line)
        data, _, verified = mem.mem_read(addr)
        if data != line or not verified:
            mem_fail += 1
    ok = page_fail == 0 and mem_fail == 0
    report_line(2, "crypto roundtrip identities", ok,
                f"10^4 page-cipher ops ({page_fail} fails), "
                f"10^4 memory ops ({mem_fail} fails)")
    assert ok


# -- 3. Tamper/replay completeness ---------------------------------------------------

def test_criterion_03_tamper_replay_completeness():
    outcome = run_attack_suite(BASE, n_pages=4, flips_per_category=12)
    # Exhaustive single-bit flips over one whole split-counter block.
    mem = EncryptedMemory(SeededRng(0xACCE03).randbytes(16), 4)
    rng = SeededRng(77)
    for p in range(4):
        mem.ingest_page(p, rng.randbytes(PAGE_BYTES), WRITABLE)
    mem.mem_write(0, bytes(LINE))
    baseline = mem.snapshot()
    undetected_flips = 0
    for bit in range(LINE * 8):
        mem.attack_flip_counter_bit(SPLIT_TREE, 0, bit)
        try:
            mem.verify_root(SPLIT_TREE)
            undetected_flips += 1
        except IntegrityViolation:
            pass
        mem.restore(baseline)
    clean_ok = mem.verify_root(SPLIT_TREE) and mem.verify_root(MAJOR_TREE)
    ok = (outcome.missed == 0 and outcome.false_positives == 0
          and undetected_flips == 0 and clean_ok
          and outcome.abort_reason == "MEMORY_CORRUPTION")
    report_line(3, "tamper/replay completeness", ok,
                f"{outcome.injected} injections, {outcome.missed} missed, "
                f"{outcome.false_positives} false positives; "
                f"{LINE * 8} exhaustive counter flips, "
                f"{undetected_flips} undetected")
    assert ok


# -- 4. Access control ------------------------------------------------------------------

def test_criterion_04_cross_tee_access_control():
    geom = FlashGeometry(channels=4, chips_per_channel=1, dies_per_chip=2,
                         planes_per_die=1, blocks_per_plane=64,
                         pages_per_block=32, page_size=512)
    flash = FlashArray(geom, FlashTimings())
    protection = MemoryProtection(MemoryLayout(dram_size=256 * MIB,
                                               secure_size=32 * MIB,
                                               protected_size=16 * MIB))
    ftl = Ftl(flash, protection, num_lpas=2048)
    runtime = TeeRuntime(ftl, protection)
    mine = list(range(0, 1024))
    theirs = list(range(1024, 2048))
    owner_eid, _ = runtime.create_tee(OffloadRequest("probe-owner", mine, b"", 1))
    victim_eid, _ = runtime.create_tee(OffloadRequest("victim", theirs, b"", 2))
    ftl.populate({l: bytes(512) for l in range(2048)})

    denied = sum(0 if ftl.check_access(owner_eid, lpa) else 1 for lpa in theirs)
    allowed = sum(1 if ftl.check_access(owner_eid, lpa) else 0 for lpa in mine)
    with pytest.raises(PermissionDenied):
        runtime.read_mapping_entry(owner_eid, theirs[0])
    aborted = runtime.live[owner_eid].state is TeeState.ABORTED
    reason = runtime.live[owner_eid].abort_record.reason
    ok = (denied == len(theirs) and allowed == len(mine) and aborted
          and reason is AbortReason.ACCESS_VIOLATION)
    report_line(4, "cross-TEE access control", ok,
                f"{denied}/{len(theirs)} foreign denied, "
                f"{allowed}/{len(mine)} own allowed, abort={reason.value}")
    assert ok


# -- 5. FTL shadow-map equivalence ----------------------------------------------------

def test_criterion_05_ftl_shadow_map_equivalence():
    geom = FlashGeometry(channels=4, chips_per_channel=1, dies_per_chip=2,
                         planes_per_die=1, blocks_per_plane=32,
                         pages_per_block=16, page_size=512)
    flash = FlashArray(geom, FlashTimings())
    protection = MemoryProtection(MemoryLayout(dram_size=256 * MIB,
                                               secure_size=32 * MIB,
                                               protected_size=16 * MIB))
    ftl = Ftl(flash, protection, num_lpas=1024, wear_threshold=8)
    rng = SeededRng(0xACCE05)
    shadow = {}
    writes = 100_000
    for i in range(writes):
        lpa = rng.randbelow(1024)
        content = i.to_bytes(8, "little") + lpa.to_bytes(8, "little")
        content = content * (512 // len(content))
        ftl.write(None, lpa, content)
        shadow[lpa] = content
        if i % 20_000 == 19_999:
            ftl.wear_level()
    ftl.garbage_collect(force=True)
    ftl.wear_level()
    mismatches = 0
    for lpa, expect in shadow.items():
        ppa, _, _ = ftl.translate(None, lpa)
        got, _ = flash.read_page(ppa)
        if got != expect:
            mismatches += 1
    ok = (mismatches == 0 and ftl.gc_erased > 0)
    report_line(5, "FTL shadow-map equivalence", ok,
                f"{writes} writes, {len(shadow)} LPAs checked, "
                f"{mismatches} mismatches, {ftl.gc_erased} blocks GC-erased, "
                f"{ftl.wear_migrations} wear migrations")
    assert ok


# -- 6. Counter-overflow semantics ------------------------------------------------------

def test_criterion_06_counter_overflow_semantics():
    mem = EncryptedMemory(SeededRng(0xACCE06).randbytes(16), 4)
    mem.ingest_page(0, SeededRng(1).randbytes(PAGE_BYTES), WRITABLE)
    major_before = decode_split_block(mem.split_blocks[0])[0]
    inc_before = mem.major_increments
    for i in range(128):
        mem.mem_write(0, bytes([i]) * LINE)
    major_after, minors = decode_split_block(mem.split_blocks[0])
    increments = mem.major_increments - inc_before
    resets = mem.minor_reset_events
    reenc = mem.line_reencryptions
    ok = (increments == 1 and major_after == major_before + 1
          and resets == 1 and reenc == 64
          and minors[0] == 1 and all(m == 0 for m in minors[1:]))
    report_line(6, "counter-overflow semantics", ok,
                f"128 writebacks: {increments} major increment(s), "
                f"{resets} reset event(s), {reenc} line re-encryptions")
    assert ok


# -- 7. Determinism ------------------------------------------------------------------------

def test_criterion_07_bit_identical_reports():
    cfg = replace(BASE, dataset_mib=16, workload="aggregate", mode=MODE_ISC_TEE)
    a = render_report(run_single(cfg))
    b = render_report(run_single(cfg))
    cfg2 = replace(BASE, dataset_mib=16, workload="tpcb", mode=MODE_HOST)
    c = render_report(run_single(cfg2))
    d = render_report(run_single(cfg2))
    ok = a == b and c == d
    report_line(7, "deterministic reports", ok,
                f"two run pairs byte-identical={ok} "
                f"({len(a)}B and {len(c)}B reports)")
    assert ok


# -- 8. Protection overhead vs unprotected in-storage ------------------------------------

def test_criterion_08_overhead_vs_isc():
    grid = overhead_matrix(BASE, SCAN_WORKLOADS, (MODE_ISC, MODE_ISC_TEE))
    overheads = {}
    for wl in SCAN_WORKLOADS:
        isc = grid[(wl, MODE_ISC)].total_ns
        tee = grid[(wl, MODE_ISC_TEE)].total_ns
        overheads[wl] = (tee - isc) / isc
        assert grid[(wl, MODE_ISC_TEE)].parts["encryption"] > 0
        assert grid[(wl, MODE_ISC_TEE)].parts["verification"] > 0
        assert grid[(wl, MODE_ISC)].parts["encryption"] == 0
    avg = sum(overheads.values()) / len(overheads)
    detail = ", ".join(f"{wl}={o * 100:.1f}%" for wl, o in overheads.items())
    ok = avg <= 0.15
    report_line(8, "protection overhead vs unprotected ISC", ok,
                f"avg={avg * 100:.1f}% (limit 15%); {detail}")
    assert ok


# -- 9. Speedup vs host ---------------------------------------------------------------------

def test_criterion_09_speedup_vs_host():
    grid = full_mode_matrix(BASE, ALL_WORKLOADS)
    speedups = []
    for wl in SCAN_WORKLOADS:
        host = grid[(wl, MODE_HOST)].total_ns
        tee = grid[(wl, MODE_ISC_TEE)].total_ns
        speedups.append(host / tee)
    gmean = geometric_mean(speedups)
    sgx_slower_everywhere = all(
        grid[(wl, MODE_HOST_SGX)].total_ns >= grid[(wl, MODE_HOST)].total_ns
        for wl in ALL_WORKLOADS)
    ok = gmean >= 1.5 and sgx_slower_everywhere
    report_line(9, "speedup vs host", ok,
                f"geomean over scan set = {gmean:.2f}x (floor 1.5x); "
                f"Host+SGX slower on all {len(ALL_WORKLOADS)} workloads: "
                f"{sgx_slower_everywhere}")
    assert ok


# -- 10. Channel sweep monotonicity -----------------------------------------------------------

def test_criterion_10_channel_sweep_monotone():
    points = (4, 8, 16, 32)
    grid = channel_sweep(BASE, SCAN_WORKLOADS, points)
    violations = []
    lines = []
    for wl in SCAN_WORKLOADS:
        speedups = []
        for ch in points:
            host = grid[(wl, ch, MODE_HOST)].total_ns
            tee = grid[(wl, ch, MODE_ISC_TEE)].total_ns
            speedups.append(host / tee)
        lines.append(f"{wl}: " + "->".join(f"{s:.2f}" for s in speedups))
        if any(b < a - 1e-12 for a, b in zip(speedups, speedups[1:])):
            violations.append(wl)
    ok = not violations
    report_line(10, "channel sweep 4->32 monotone speedup", ok,
                "; ".join(lines) + (f"; violations={violations}" if violations else ""))
    assert ok


# -- 11. Mapping-table placement -----------------------------------------------------------------

def test_criterion_11_mapping_placement():
    grid = placement_study(BASE, ALL_WORKLOADS)
    slower = []
    drops = []
    for wl in ALL_WORKLOADS:
        prot = grid[(wl, "PROTECTED_REGION")]
        sec = grid[(wl, "SECURE_WORLD")]
        if prot.total_ns >= sec.total_ns:
            slower.append(wl)
        drop = 1 - prot.counters["world_switches"] / sec.counters["world_switches"]
        drops.append(drop)
    min_drop = min(drops)
    ok = not slower and min_drop > 0.9
    report_line(11, "protected-region placement wins", ok,
                f"faster on {len(ALL_WORKLOADS) - len(slower)}/"
                f"{len(ALL_WORKLOADS)} workloads; "
                f"switch drop min={min_drop * 100:.1f}% (floor 90%)")
    assert ok


# -- 12. Hybrid vs split-only counters -------------------------------------------------------------

def test_criterion_12_hybrid_vs_split_counters():
    grid = counter_scheme_study(BASE, SCAN_WORKLOADS)
    worse = []
    gains = []
    for wl in SCAN_WORKLOADS:
        hybrid = grid[(wl, "HYBRID")].total_ns
        split = grid[(wl, SCHEME_SPLIT_ONLY)].total_ns
        if hybrid > split:
            worse.append(wl)
        gains.append((split - hybrid) / split * 100)
    ok = not worse
    report_line(12, "hybrid counters never lose to split-only", ok,
                "gains " + ", ".join(f"{wl}={g:.2f}%" for wl, g
                                     in zip(SCAN_WORKLOADS, gains)))
    assert ok


# -- 13. Latency sweep ---------------------------------------------------------------------------------

def test_criterion_13_latency_sweep_always_faster():
    points = (10, 50, 80, 110)
    grid = latency_sweep(BASE, SCAN_WORKLOADS, points)
    losses = []
    ratios = []
    for wl in SCAN_WORKLOADS:
        for t_us in points:
            host = grid[(wl, t_us, MODE_HOST)].total_ns
            tee = grid[(wl, t_us, MODE_ISC_TEE)].total_ns
            ratios.append(host / tee)
            if tee >= host:
                losses.append((wl, t_us))
    ok = not losses
    report_line(13, "faster than host across flash latencies", ok,
                f"{len(SCAN_WORKLOADS) * len(points)} points, "
                f"speedup range {min(ratios):.2f}-{max(ratios):.2f}x"
                + (f"; losses={losses}" if losses else ""))
    assert ok


# -- 14. Multi-tenant ------------------------------------------------------------------------------------

def test_criterion_14_multitenant_slowdown():
    res = multitenant_study(BASE, MULTITENANT_MIX)
    slowdowns = {}
    miss_deltas = {}
    for wl in MULTITENANT_MIX:
        solo = res["solo"][wl]
        multi = res["concurrent"][wl]
        slowdowns[wl] = (multi.total_ns - solo.total_ns) / solo.total_ns
        miss_deltas[wl] = (multi.counters["mapping_miss_ratio_ppm"]
                           - solo.counters["mapping_miss_ratio_ppm"]) / 1e6
    worst = max(slowdowns.values())
    worst_miss = max(miss_deltas.values())
    ok = worst <= 0.35 and worst_miss <= 0.10
    report_line(14, "4-tenant slowdown bounded", ok,
                ", ".join(f"{wl}={s * 100:.1f}%" for wl, s in slowdowns.items())
                + f"; worst={worst * 100:.1f}% (limit 35%), "
                f"miss-ratio increase max={worst_miss * 100:.2f}pp (limit 10pp)")
    assert ok


# -- 15. Overhead constants verbatim -----------------------------------------------------------------------

def test_criterion_15_constants_verbatim_in_reports():
    result = cached_run(replace(BASE, workload="filter", mode=MODE_ISC_TEE))
    text = render_report(result)
    expectations = {
        "tee_create_us\t95": result.parts["lifecycle"] >= 95_000,
        "tee_delete_us\t58": result.parts["lifecycle"] >= 95_000 + 58_000,
        "context_switch_us\t3.8": result.parts["world_switch"] > 0,
        "mem_encrypt_ns\t102.6": result.parts["encryption"] > 0,
        "mem_verify_ns\t151.2": result.parts["verification"] > 0,
    }
    missing = [k for k in expectations if k not in text]
    uncharged = [k for k, charged in expectations.items() if not charged]
    ok = not missing and not uncharged
    report_line(15, "overhead constants verbatim where charged", ok,
                f"constants present={len(expectations) - len(missing)}/5, "
                f"all charged={not uncharged}")
    assert ok
