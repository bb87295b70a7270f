"""Page-granular cost/traffic model of the memory-security engine.

Workload runs move a million-plus cache lines; simulating each line through
the byte-accurate engine would dominate wall time without changing the
numbers, so runs use this aggregate model.  It charges the same average
latencies as the byte-accurate engine, attached where the hardware exposes
them serially:

* demand reads are verification-critical: one average verification charge
  (151.2 ns) per 4 KiB read burst, plus, on a counter-cache miss, one 64 B
  DRAM fetch and a tree verification of the fetched block, charged
  serially (the conservative choice: verification does not overlap the
  data fetch).
* ingest (flash DMA into DRAM) and line writebacks are posted: the
  pipelined engine sustains line rate, and the serial exposure is the
  counter-block dependency chain, so one pad-generation (60 ns) plus one
  average encryption charge (102.6 ns) applies per counter-block event
  (block initialization, or a write batch landing in one block), not per
  line.  A minor-counter overflow re-encrypts the page's 64 lines and is
  charged per line.
* dirty counter-block evictions pay one DRAM write slot.

Traffic counts 64-byte transfers: counter fetches and writebacks, MAC
blocks (one 64 B MAC block per 4 KiB page on reads/ingest, 8 B per written
line), and tree-node reads/writes.  Per-line MAC checks that ride the data
burst are traffic, not latency.

The counter layout mirrors the byte-accurate engine: hybrid mode backs
read-only data pages with major-counter blocks (eight pages per block) and
writable intermediate pages with split-counter blocks (one per page);
split-only mode backs data pages with split-counter blocks too, which
multiplies counter-block events and cache pressure by eight.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

from .config import SCHEME_NONE, SCHEME_SPLIT_ONLY
from .securemem import (
    AES_PAD_PS, ENCRYPT_CHARGE_PS, LINE, LINES_PER_PAGE, MAJORS_PER_BLOCK,
    VERIFY_CHARGE_PS, TrafficCounters,
)

OVERFLOW_PERIOD = LINES_PER_PAGE * 128   # round-robin writes before a minor wraps


@dataclass
class MemCharges:
    encryption_ps: int = 0
    verification_ps: int = 0
    dram_ps: int = 0

    def add(self, other: "MemCharges") -> None:
        self.encryption_ps += other.encryption_ps
        self.verification_ps += other.verification_ps
        self.dram_ps += other.dram_ps

    @property
    def total_ps(self) -> int:
        return self.encryption_ps + self.verification_ps + self.dram_ps


class AggregateMemoryModel:
    def __init__(self, scheme: str, n_data_pages: int, n_intermediate_pages: int,
                 counter_cache_bytes: int = 128 * 1024,
                 dram_fetch_ps: int = 30_000):
        self.scheme = scheme
        self.n_data_pages = n_data_pages
        self.n_intermediate_pages = max(1, n_intermediate_pages)
        self.dram_fetch_ps = dram_fetch_ps
        self._cache: OrderedDict[tuple[str, int], bool] = OrderedDict()
        self._capacity = max(1, counter_cache_bytes // LINE)
        self._initialized: set[tuple[str, int]] = set()
        self._int_writes = [0] * self.n_intermediate_pages
        self._write_cursor = 0

        self.traffic = TrafficCounters()
        self.charges = MemCharges()
        self.encryption_events = 0
        self.verification_events = 0
        self.counter_inits = 0
        self.cache_hits = 0
        self.cache_misses = 0
        self.major_increments = 0
        self.line_reencryptions = 0
        split_leaves = (n_data_pages if scheme == SCHEME_SPLIT_ONLY else 0) \
            + self.n_intermediate_pages
        major_leaves = -(-n_data_pages // MAJORS_PER_BLOCK)
        self._split_depth = self._depth(max(1, split_leaves))
        self._major_depth = self._depth(max(1, major_leaves))

    @staticmethod
    def _depth(leaves: int) -> int:
        depth = 1
        count = -(-leaves // 8)
        while count > 1:
            count = -(-count // 8)
            depth += 1
        return depth

    def _data_block(self, page: int) -> tuple[str, int]:
        if self.scheme == SCHEME_SPLIT_ONLY:
            return ("split_data", page)
        return ("major", page // MAJORS_PER_BLOCK)

    def _tree_depth(self, block: tuple[str, int]) -> int:
        return self._major_depth if block[0] == "major" else self._split_depth

    def _probe(self, block: tuple[str, int], charges: MemCharges,
               dirty: bool, fetch: bool = True) -> None:
        if block in self._cache:
            self._cache.move_to_end(block)
            self._cache[block] = self._cache[block] or dirty
            self.cache_hits += 1
            return
        self.cache_misses += 1
        if fetch:
            self.traffic.counter_fetch_bytes += LINE
            self.traffic.tree_read_bytes += self._tree_depth(block) * LINE
            charges.dram_ps += self.dram_fetch_ps
            charges.verification_ps += VERIFY_CHARGE_PS
            self.verification_events += 1
        self._cache[block] = dirty
        while len(self._cache) > self._capacity:
            _, was_dirty = self._cache.popitem(last=False)
            if was_dirty:
                self.traffic.counter_writeback_bytes += LINE
                charges.dram_ps += self.dram_fetch_ps

    def _init_block(self, block: tuple[str, int], charges: MemCharges) -> None:
        if block in self._initialized:
            return
        self._initialized.add(block)
        self.counter_inits += 1
        self.encryption_events += 1
        charges.encryption_ps += AES_PAD_PS + ENCRYPT_CHARGE_PS
        self.traffic.tree_write_bytes += self._tree_depth(block) * 8
        self._probe(block, charges, dirty=True, fetch=False)

    # -- per-page events --------------------------------------------------------

    def ingest_data_page(self, page: int) -> MemCharges:
        charges = MemCharges()
        if self.scheme == SCHEME_NONE:
            return charges
        self._init_block(self._data_block(page), charges)
        self.traffic.mac_write_bytes += LINE   # page-granule MAC block
        self.charges.add(charges)
        return charges

    def read_data_page(self, page: int) -> MemCharges:
        charges = MemCharges()
        if self.scheme == SCHEME_NONE:
            return charges
        self._probe(self._data_block(page), charges, dirty=False)
        charges.verification_ps += VERIFY_CHARGE_PS
        self.verification_events += 1
        self.traffic.mac_read_bytes += LINE
        self.charges.add(charges)
        return charges

    # -- line writebacks ------------------------------------------------------------

    def write_lines(self, count: int) -> MemCharges:
        """Process `count` intermediate-region line writebacks, spread
        round-robin across the writable working set."""
        charges = MemCharges()
        if count <= 0 or self.scheme == SCHEME_NONE:
            return charges
        region_lines = self.n_intermediate_pages * LINES_PER_PAGE
        start = self._write_cursor
        self._write_cursor = (start + count) % region_lines
        remaining = count
        slot = start
        while remaining > 0:
            page = (slot % region_lines) // LINES_PER_PAGE
            in_page = min(remaining, LINES_PER_PAGE - (slot % LINES_PER_PAGE))
            block = ("split_int", page)
            self._init_block(block, charges)
            self._probe(block, charges, dirty=True)
            before = self._int_writes[page]
            after = before + in_page
            self._int_writes[page] = after
            overflows = after // OVERFLOW_PERIOD - before // OVERFLOW_PERIOD
            if overflows:
                self.major_increments += overflows
                self.line_reencryptions += overflows * LINES_PER_PAGE
                charges.encryption_ps += overflows * LINES_PER_PAGE * ENCRYPT_CHARGE_PS
                self.traffic.mac_write_bytes += overflows * LINE
                self.encryption_events += overflows * LINES_PER_PAGE
            # One posted-write counter event per block batch.
            charges.encryption_ps += AES_PAD_PS + ENCRYPT_CHARGE_PS
            self.encryption_events += 1
            self.traffic.mac_write_bytes += 8 * in_page
            slot += in_page
            remaining -= in_page
        self.charges.add(charges)
        return charges
