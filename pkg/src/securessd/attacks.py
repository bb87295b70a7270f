"""Fault-injection harness: drives the byte-accurate encrypted store with
tamper, swap, and rollback attacks and checks every one is caught before
plaintext is released.

Each injection runs against a fresh snapshot of the adversarial store and
is reverted afterwards, so detections are independent; a clean read pass
after each revert guards against false positives.  The first detection is
wired into the TEE runtime as a memory-corruption abort, the same path a
live device would take.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from .config import RunConfig
from .flash import FlashArray, FlashGeometry, FlashTimings
from .ftl import Ftl
from .memprotect import MemoryLayout, MemoryProtection
from .runtime import AbortReason, OffloadRequest, TeeRuntime
from .securemem import (
    LINE, LINES_PER_PAGE, MAJOR_TREE, PAGE_BYTES, READ_ONLY, SPLIT_TREE,
    WRITABLE, EncryptedMemory, IntegrityViolation,
)
from .sim import SeededRng, splitmix64

MIB = 1024 * 1024


@dataclass
class AttackEvent:
    kind: str
    target: str
    detected: bool


@dataclass
class AttackOutcome:
    injected: int = 0
    detected: int = 0
    missed: int = 0
    false_positives: int = 0
    abort_reason: str | None = None
    events: list[AttackEvent] = field(default_factory=list)

    def record(self, kind: str, target: str, detected: bool) -> None:
        self.events.append(AttackEvent(kind, target, detected))
        self.injected += 1
        if detected:
            self.detected += 1
        else:
            self.missed += 1

    def render(self) -> str:
        out = io.StringIO()
        out.write("schema\t1\n")
        out.write(f"attack.injected\t{self.injected}\n")
        out.write(f"attack.detected\t{self.detected}\n")
        out.write(f"attack.false_negatives\t{self.missed}\n")
        out.write(f"attack.false_positives\t{self.false_positives}\n")
        out.write(f"attack.abort\t{self.abort_reason or 'none'}\n")
        for i, ev in enumerate(self.events):
            out.write(f"attack.event.{i}\t{ev.kind}:{ev.target}:"
                      f"{'detected' if ev.detected else 'MISSED'}\n")
        return out.getvalue()


def _page_readable(mem: EncryptedMemory, page: int) -> bool:
    """True when every line of the page decrypts and verifies."""
    for li in range(LINES_PER_PAGE):
        mem.mem_read(page * PAGE_BYTES + li * LINE)
    return True


def run_attack_suite(cfg: RunConfig, n_pages: int = 4,
                     flips_per_category: int = 8) -> AttackOutcome:
    """Inject bit flips, block swaps, and snapshot-restore rollbacks into a
    small secure store attached to a live TEE."""
    rng = SeededRng(splitmix64(cfg.seed ^ 0xA77AC4))
    key = rng.randbytes(16)
    mem = EncryptedMemory(key, n_pages,
                          counter_cache_bytes=cfg.counter_cache_bytes,
                          dram_fetch_ps=cfg.dram_access_ns * 1000)

    geom = FlashGeometry(channels=2, chips_per_channel=1, dies_per_chip=1,
                         planes_per_die=1, blocks_per_plane=16,
                         pages_per_block=16, page_size=512)
    flash = FlashArray(geom, FlashTimings())
    protection = MemoryProtection(MemoryLayout(dram_size=128 * MIB,
                                               secure_size=16 * MIB,
                                               protected_size=8 * MIB))
    ftl = Ftl(flash, protection, num_lpas=64)
    runtime = TeeRuntime(ftl, protection, external_bw=cfg.external_bw)
    eid, _ = runtime.create_tee(OffloadRequest(
        program="attack-target", lpa=list(range(n_pages)), args=b"", tid=1))

    pages = [rng.randbytes(PAGE_BYTES) for _ in range(n_pages)]
    for page, blob in enumerate(pages):
        mem.ingest_page(page, blob, WRITABLE if page % 2 else READ_ONLY)
    for page in range(n_pages):
        _page_readable(mem, page)   # clean warm-up pass

    outcome = AttackOutcome()

    def probe(kind: str, target: str, page: int) -> None:
        detected = False
        try:
            _page_readable(mem, page)
            mem.verify_root(SPLIT_TREE)
            mem.verify_root(MAJOR_TREE)
        except IntegrityViolation as exc:
            detected = True
            if outcome.abort_reason is None:
                runtime.throw_out_tee(eid, AbortReason.MEMORY_CORRUPTION,
                                      str(exc))
                outcome.abort_reason = AbortReason.MEMORY_CORRUPTION.value
        outcome.record(kind, target, detected)

    def check_clean() -> None:
        try:
            for page in range(n_pages):
                _page_readable(mem, page)
            mem.verify_root(SPLIT_TREE)
            mem.verify_root(MAJOR_TREE)
        except IntegrityViolation:
            outcome.false_positives += 1

    baseline = mem.snapshot()

    for _ in range(flips_per_category):
        page = rng.randbelow(n_pages)
        line = page * LINES_PER_PAGE + rng.randbelow(LINES_PER_PAGE)
        mem.attack_flip_data_bit(line, rng.randbelow(LINE * 8))
        probe("flip", f"data_line_{line}", page)
        mem.restore(baseline)
        check_clean()

    for _ in range(flips_per_category):
        page = rng.randbelow(n_pages)
        line = page * LINES_PER_PAGE + rng.randbelow(LINES_PER_PAGE)
        mem.attack_flip_mac_bit(line, rng.randbelow(64))
        probe("flip", f"mac_{line}", page)
        mem.restore(baseline)
        check_clean()

    for _ in range(flips_per_category):
        page = rng.randbelow(n_pages)
        writable = page % 2 == 1
        tree = SPLIT_TREE if writable else MAJOR_TREE
        block = page if writable else page // 8
        mem.attack_flip_counter_bit(tree, block, rng.randbelow(LINE * 8))
        probe("flip", f"counter_{tree}_{block}", page)
        mem.restore(baseline)
        check_clean()

    for _ in range(flips_per_category):
        page = rng.randbelow(n_pages)
        tree = SPLIT_TREE if page % 2 else MAJOR_TREE
        mem.attack_flip_tree_bit(tree, 0, 0, rng.randbelow(LINE * 8))
        probe("flip", f"tree_{tree}", page)
        mem.restore(baseline)
        check_clean()

    # Swaps: two writable pages' counter blocks, then two data lines.
    mem.mem_write(1 * PAGE_BYTES, bytes(LINE))   # make split blocks differ
    baseline = mem.snapshot()
    mem.attack_swap_counter_blocks(SPLIT_TREE, 1, 3)
    probe("swap", "split_counters_1_3", 1)
    mem.restore(baseline)
    check_clean()
    mem.attack_swap_data_lines(0, 1)
    probe("swap", "data_lines_0_1", 0)
    mem.restore(baseline)
    check_clean()

    # Replay: roll the whole store back past a legitimate write.
    old = mem.snapshot()
    mem.mem_write(1 * PAGE_BYTES, bytes([0xAB]) * LINE)
    mem.restore(old)
    probe("replay", "rollback_page_1", 1)

    return outcome
