"""Flash translation layer running logically in the secure world.

Page-level logical-to-physical mapping with per-TEE ID bits in every entry,
a translation cache resident in the protected DRAM region, greedy garbage
collection, and cold-data wear leveling.

Mapping entries are 64-bit packed records: a 32-bit physical page address,
4 ID bits naming the owning TEE (0 = unowned), one valid bit and 27
reserved bits.  The authoritative table is flash-resident, grouped into
translation pages of ``page_size / 8`` entries stored in a reserved block
range at the top of the device; persistence of entry updates is
write-behind and not charged to the foreground path.  The protected-region
cache is managed at translation-page granularity (a miss loads one whole
translation page), which is what keeps desk-scale miss ratios in the
sub-percent range a sequential scan should see.

Access control: a dedicated permission-check process serializes all flash
requests from TEEs; here that is the single simulator loop calling
``check_access`` before any translation or data operation is serviced.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

from .flash import FlashArray, OutOfBounds
from .memprotect import AccessMode, Fault, MemoryProtection, World

ENTRY_BYTES = 8
MAX_TEE_ID = 15

DEFAULT_GC_LOW = 0.05
DEFAULT_GC_HIGH = 0.10
DEFAULT_WEAR_THRESHOLD = 20
DEFAULT_PROTECTED_READ_NS = 30

PLACEMENT_PROTECTED_REGION = "PROTECTED_REGION"
PLACEMENT_SECURE_WORLD = "SECURE_WORLD"


class FtlError(Exception):
    pass


class PermissionDenied(FtlError):
    pass


class UnmappedLpa(FtlError):
    pass


class AlreadyOwned(FtlError):
    pass


class DeviceFull(FtlError):
    pass


def pack_entry(ppa: int, id_bits: int, valid: bool) -> int:
    if not 0 <= ppa < (1 << 32):
        raise ValueError("ppa must fit in 32 bits")
    if not 0 <= id_bits <= MAX_TEE_ID:
        raise ValueError("id_bits must fit in 4 bits")
    return ppa | (id_bits << 32) | (int(valid) << 63)


def unpack_entry(entry: int) -> tuple[int, int, bool]:
    return entry & 0xFFFFFFFF, (entry >> 32) & 0xF, bool(entry >> 63)


@dataclass
class BlockMeta:
    programmed: int = 0     # pages written since last erase
    valid: int = 0          # currently valid pages


class Ftl:
    def __init__(self, flash: FlashArray, protection: MemoryProtection,
                 num_lpas: int,
                 cache_capacity_entries: int | None = None,
                 gc_low_watermark: float = DEFAULT_GC_LOW,
                 gc_high_watermark: float = DEFAULT_GC_HIGH,
                 wear_threshold: int = DEFAULT_WEAR_THRESHOLD,
                 protected_read_ns: int = DEFAULT_PROTECTED_READ_NS,
                 placement: str = PLACEMENT_PROTECTED_REGION,
                 charge_switches: bool = True):
        if placement not in (PLACEMENT_PROTECTED_REGION, PLACEMENT_SECURE_WORLD):
            raise ValueError(f"unknown placement {placement!r}")
        self.flash = flash
        self.protection = protection
        # False models a device without the secure/normal world split
        # (host-managed or unprotected in-storage baselines): translation
        # misses still read flash, but cross no world boundary.
        self.charge_switches = charge_switches
        self.geom = flash.geom
        self.num_lpas = num_lpas
        self.placement = placement
        self.gc_low = gc_low_watermark
        self.gc_high = gc_high_watermark
        self.wear_threshold = wear_threshold
        self.protected_read_ns = protected_read_ns

        self.entries_per_tp = self.geom.page_size // ENTRY_BYTES
        self.tp_count = -(-num_lpas // self.entries_per_tp)
        tp_blocks = -(-self.tp_count // self.geom.pages_per_block)
        self.first_reserved_block = self.geom.total_blocks - tp_blocks
        if self.first_reserved_block <= 0:
            raise ValueError("geometry too small for translation region")

        # Table defaults to 75% cacheable; capacity is grouped into
        # translation-page slots (at least one).
        if cache_capacity_entries is None:
            cache_capacity_entries = (num_lpas * 3) // 4
        self.cache_slots = max(1, cache_capacity_entries // self.entries_per_tp)
        self._cache: OrderedDict[int, bool] = OrderedDict()

        self._table: dict[int, int] = {}
        self._block_meta: dict[int, BlockMeta] = {}
        self._grants: dict[int, set[int]] = {}
        self._live_ids: set[int] = set()

        data_blocks = self.first_reserved_block
        self.total_data_pages = data_blocks * self.geom.pages_per_block
        self.free_pages = self.total_data_pages

        # Per-channel allocator with one write point per die, rotated page
        # by page so sequential logical data interleaves across a channel's
        # dies (that interleaving is where internal bandwidth comes from).
        # Reserved blocks all live past first_reserved_block and are skipped.
        ch_count = self.geom.channels
        dpc = self.geom.dies_per_channel
        bpd = self.geom.blocks_per_die
        self._dies_per_channel = dpc
        self._blocks_per_die = bpd
        self._active: list[list[tuple[int, int] | None]] = \
            [[None] * dpc for _ in range(ch_count)]
        self._die_rr = [0] * ch_count
        self._fresh_within: list[list[int]] = [[0] * dpc for _ in range(ch_count)]
        self._recycled: list[dict[int, list[int]]] = \
            [{d: [] for d in range(dpc)} for _ in range(ch_count)]

        # metrics
        self.cache_hits = 0
        self.cache_misses = 0
        self.world_switches = 0
        self.gc_runs = 0
        self.gc_relocated = 0
        self.gc_erased = 0
        self.wear_migrations = 0

        self._install_translation_region()

    # -- translation region ---------------------------------------------------

    def _tp_ppa(self, tp_index: int) -> int:
        block = self.first_reserved_block + tp_index // self.geom.pages_per_block
        page = tp_index % self.geom.pages_per_block
        return self.flash.codec.block_base_ppa(block) | page

    def _install_translation_region(self) -> None:
        blank = bytes(self.geom.page_size)
        for tp in range(self.tp_count):
            self.flash.install_page(self._tp_ppa(tp), blank)

    def translation_page_bytes(self, tp_index: int) -> bytes:
        """Current serialized content of one translation page."""
        lo = tp_index * self.entries_per_tp
        out = bytearray(self.geom.page_size)
        for i in range(self.entries_per_tp):
            entry = self._table.get(lo + i)
            if entry is not None:
                out[i * 8:(i + 1) * 8] = entry.to_bytes(8, "little")
        return bytes(out)

    # -- channel/block allocation ---------------------------------------------

    def _die_block_limit(self, channel: int, die_slot: int) -> int:
        """Allocatable blocks in one die, excluding the reserved region."""
        die_flat = channel * self._dies_per_channel + die_slot
        lo = die_flat * self._blocks_per_die
        hi = min(lo + self._blocks_per_die, self.first_reserved_block)
        return max(0, hi - lo)

    def _take_free_block(self, channel: int, die_slot: int) -> int | None:
        recycled = self._recycled[channel][die_slot]
        if recycled:
            return recycled.pop()
        within = self._fresh_within[channel][die_slot]
        if within < self._die_block_limit(channel, die_slot):
            self._fresh_within[channel][die_slot] = within + 1
            die_flat = channel * self._dies_per_channel + die_slot
            return die_flat * self._blocks_per_die + within
        return None

    def _channel_free_blocks(self, channel: int) -> int:
        total = 0
        for d in range(self._dies_per_channel):
            fresh = self._die_block_limit(channel, d) - self._fresh_within[channel][d]
            total += fresh + len(self._recycled[channel][d])
        return total

    def _allocate_page(self, channel: int, for_gc: bool = False) -> int | None:
        dpc = self._dies_per_channel
        for _ in range(dpc):
            die_slot = self._die_rr[channel] % dpc
            self._die_rr[channel] += 1
            active = self._active[channel][die_slot]
            if active is None or active[1] >= self.geom.pages_per_block:
                # Hold the last free block back for GC relocations so a
                # full channel can always be cleaned.
                if not for_gc and self._channel_free_blocks(channel) <= 1:
                    return None
                block = self._take_free_block(channel, die_slot)
                if block is None:
                    continue
                active = (block, 0)
            block, page = active
            self._active[channel][die_slot] = (block, page + 1)
            return self.flash.codec.block_base_ppa(block) | page
        return None

    def _meta(self, block_index: int) -> BlockMeta:
        meta = self._block_meta.get(block_index)
        if meta is None:
            meta = self._block_meta[block_index] = BlockMeta()
        return meta

    def channel_for(self, lpa: int, stripe: list[int] | None = None) -> int:
        if stripe:
            return stripe[lpa % len(stripe)]
        return lpa % self.geom.channels

    # -- access control ---------------------------------------------------------

    def register_tee(self, tee_id: int, grant_lpas) -> None:
        """Secure-world registration of a live TEE and its declared LPAs."""
        if not 1 <= tee_id <= MAX_TEE_ID:
            raise ValueError("tee_id must be in 1..15")
        self._live_ids.add(tee_id)
        self._grants[tee_id] = set(grant_lpas)

    def release_tee(self, tee_id: int) -> int:
        """Clear ID bits owned by the TEE; returns entries cleared."""
        cleared = 0
        for lpa, entry in self._table.items():
            ppa, id_bits, valid = unpack_entry(entry)
            if id_bits == tee_id:
                self._table[lpa] = pack_entry(ppa, 0, valid)
                cleared += 1
        self._live_ids.discard(tee_id)
        self._grants.pop(tee_id, None)
        return cleared

    def check_access(self, tee_id: int | None, lpa: int) -> bool:
        """Permission check for one mapping entry; deny is a result."""
        if tee_id is None:          # secure-world caller (FTL itself, host path)
            return True
        entry = self._table.get(lpa)
        if entry is None:
            return lpa in self._grants.get(tee_id, ())
        _, id_bits, _ = unpack_entry(entry)
        if id_bits == tee_id:
            return True
        if id_bits == 0:
            return lpa in self._grants.get(tee_id, ())
        return False

    def set_id_bits(self, tee_id: int, lpa_list) -> int:
        if not 1 <= tee_id <= MAX_TEE_ID:
            raise ValueError("tee_id must be in 1..15")
        updated = 0
        for lpa in lpa_list:
            self._check_lpa(lpa)
            entry = self._table.get(lpa)
            if entry is None:
                self._table[lpa] = pack_entry(0, tee_id, False)
                updated += 1
                continue
            ppa, id_bits, valid = unpack_entry(entry)
            if id_bits not in (0, tee_id) and id_bits in self._live_ids:
                raise AlreadyOwned(f"lpa {lpa} owned by live TEE {id_bits}")
            self._table[lpa] = pack_entry(ppa, tee_id, valid)
            updated += 1
        return updated

    # -- translation -------------------------------------------------------------

    def _check_lpa(self, lpa: int) -> None:
        if not 0 <= lpa < self.num_lpas:
            raise OutOfBounds(f"lpa {lpa} outside configured space")

    def _secure_round_trip(self) -> int:
        """Enter and leave the secure world; returns the one-way cost."""
        if not self.charge_switches:
            return 0
        cost = self.protection.switch_world(World.SECURE)
        self.protection.switch_world(World.NORMAL)
        self.world_switches += 2
        return cost

    def cache_address_of(self, lpa: int) -> int:
        """Protected-region address of the cached entry (for access checks)."""
        base = self.protection.layout.protected_range[0]
        tp = lpa // self.entries_per_tp
        span = self.protection.layout.protected_size
        return base + (tp * self.geom.page_size) % span

    def _cache_touch(self, tp: int) -> bool:
        """LRU probe; returns True on hit."""
        if tp in self._cache:
            self._cache.move_to_end(tp)
            return True
        return False

    def _cache_install(self, tp: int) -> None:
        self._cache[tp] = True
        while len(self._cache) > self.cache_slots:
            self._cache.popitem(last=False)

    def flush_cache(self) -> None:
        self._cache.clear()

    def translate(self, tee_id: int | None, lpa: int,
                  at: int = 0) -> tuple[int, int, bool]:
        """Resolve lpa to ppa.  Returns (ppa, cost_ns, world_switched).

        Protected-region placement serves cache hits at protected-read cost
        with no world switch; a miss enters the secure world, loads the
        translation page from flash, installs it, and returns.  Secure-world
        placement pays the two switches on every access.
        """
        self._check_lpa(lpa)
        if not self.check_access(tee_id, lpa):
            raise PermissionDenied(f"TEE {tee_id} denied for lpa {lpa}")
        entry = self._table.get(lpa)
        if entry is None:
            raise UnmappedLpa(f"lpa {lpa} has no mapping")
        ppa, _, valid = unpack_entry(entry)
        if not valid:
            raise UnmappedLpa(f"lpa {lpa} has no valid mapping")

        tp = lpa // self.entries_per_tp
        if self.placement == PLACEMENT_SECURE_WORLD:
            switch = self._secure_round_trip()
            if self._cache_touch(tp):
                self.cache_hits += 1
                return ppa, 2 * switch + self.protected_read_ns, True
            self.cache_misses += 1
            _, done = self.flash.read_page(self._tp_ppa(tp), at + switch)
            self._cache_install(tp)
            return ppa, (done - at) + switch, True

        if self._cache_touch(tp):
            self.cache_hits += 1
            return ppa, self.protected_read_ns, False
        # Miss path: world switch in, translation-page flash read, install
        # into the protected-region cache, world switch back.
        self.cache_misses += 1
        switch = self._secure_round_trip()
        _, done = self.flash.read_page(self._tp_ppa(tp), at + switch)
        self._cache_install(tp)
        return ppa, (done - at) + switch, True

    @property
    def miss_ratio(self) -> float:
        total = self.cache_hits + self.cache_misses
        return self.cache_misses / total if total else 0.0

    # -- mapping updates (secure world only) --------------------------------------

    def update_entry_from_world(self, world: World, lpa: int, entry: int) -> None:
        """Mapping-table writes must come from the secure world; a write
        attempt from the normal world faults in the protection model."""
        decision = self.protection.access(world, self.cache_address_of(lpa),
                                          AccessMode.WRITE)
        if isinstance(decision, Fault):
            raise PermissionDenied("mapping update from normal world faulted")
        self._table[lpa] = entry

    def _update_mapping(self, lpa: int, ppa: int, id_bits: int) -> None:
        self._table[lpa] = pack_entry(ppa, id_bits, True)

    # -- data path ----------------------------------------------------------------

    def write(self, tee_id: int | None, lpa: int, content: bytes,
              at: int = 0, stripe: list[int] | None = None) -> int:
        """Out-of-place write.  Returns cost in ns from `at`."""
        self._check_lpa(lpa)
        if not self.check_access(tee_id, lpa):
            raise PermissionDenied(f"TEE {tee_id} denied write to lpa {lpa}")
        channel = self.channel_for(lpa, stripe)
        ppa = self._allocate_page(channel)
        if ppa is None:
            self.garbage_collect(at=at, channel=channel)
            ppa = self._allocate_page(channel)
            if ppa is None:
                raise DeviceFull(f"no free pages on channel {channel}")
        # Capture the previous mapping only after any GC above, which may
        # itself have relocated this LPA.
        old = self._table.get(lpa)
        old_id = unpack_entry(old)[1] if old is not None else 0
        keep_id = old_id if old_id else (tee_id or 0)
        done = self.flash.program_page(ppa, content, at)
        self.flash.set_owner(ppa, lpa)
        block = self.flash.codec.block_index(ppa)
        meta = self._meta(block)
        meta.programmed += 1
        meta.valid += 1
        self.free_pages -= 1

        if old is not None:
            old_ppa, _, old_valid = unpack_entry(old)
            if old_valid:
                self.flash.invalidate_page(old_ppa)
                self._meta(self.flash.codec.block_index(old_ppa)).valid -= 1
        self._update_mapping(lpa, ppa, keep_id)

        if self.free_ratio < self.gc_low:
            _, _, gc_cost = self.garbage_collect(at=done)
            done += gc_cost
        return done - at

    def read(self, tee_id: int | None, lpa: int, at: int = 0) -> tuple[bytes, int, int]:
        """Translate + flash read.  Returns (content, translate_cost, done_ns)."""
        ppa, t_cost, _ = self.translate(tee_id, lpa, at)
        content, done = self.flash.read_page(ppa, at + t_cost)
        return content, t_cost, done

    def populate(self, pages: dict[int, bytes], id_bits: int = 0,
                 stripe: list[int] | None = None) -> None:
        """Zero-time install of pre-existing logical pages (dataset setup)."""
        for lpa, content in pages.items():
            self._check_lpa(lpa)
            if lpa in self._table and unpack_entry(self._table[lpa])[2]:
                raise FtlError(f"lpa {lpa} already populated")
            ppa = self._allocate_page(self.channel_for(lpa, stripe))
            if ppa is None:
                raise DeviceFull("populate ran out of pages")
            self.flash.install_page(ppa, content, owner_lpa=lpa)
            block = self.flash.codec.block_index(ppa)
            meta = self._meta(block)
            meta.programmed += 1
            meta.valid += 1
            self.free_pages -= 1
            self._update_mapping(lpa, ppa, id_bits)

    # -- garbage collection ----------------------------------------------------------

    @property
    def free_ratio(self) -> float:
        return self.free_pages / self.total_data_pages

    def _channel_of_block(self, block_index: int) -> int:
        return block_index // self._blocks_per_die // self._dies_per_channel

    def _die_slot_of_block(self, block_index: int) -> int:
        return block_index // self._blocks_per_die % self._dies_per_channel

    def _active_blocks(self) -> set[int]:
        ppb = self.geom.pages_per_block
        return {a[0] for per_channel in self._active for a in per_channel
                if a is not None and a[1] < ppb}

    def _gc_candidates(self, channel: int | None = None):
        active = self._active_blocks()
        for block, meta in self._block_meta.items():
            if block in active or meta.programmed == 0:
                continue
            if channel is not None and self._channel_of_block(block) != channel:
                continue
            if meta.programmed > meta.valid:   # holds at least one invalid page
                yield block, meta

    def _relocate_page(self, ppa: int, meta: BlockMeta, t: int) -> int:
        """Move one valid page out of a victim block; returns new time."""
        lpa = self.flash.page_owner(ppa)
        content, t = self.flash.read_page(ppa, t)
        new_ppa = self._allocate_page(self.flash.codec.channel_of(ppa),
                                      for_gc=True)
        if new_ppa is None:
            raise DeviceFull("no destination page for relocation")
        t = self.flash.program_page(new_ppa, content, t)
        self.flash.set_owner(new_ppa, lpa)
        nmeta = self._meta(self.flash.codec.block_index(new_ppa))
        nmeta.programmed += 1
        nmeta.valid += 1
        self.free_pages -= 1
        self.flash.invalidate_page(ppa)
        meta.valid -= 1
        _, id_bits, _ = unpack_entry(self._table[lpa])
        self._update_mapping(lpa, new_ppa, id_bits)
        return t

    def _erase_and_recycle(self, block: int, meta: BlockMeta, t: int) -> int:
        t = self.flash.erase_block(block, t)
        self.free_pages += meta.programmed
        meta.programmed = 0
        meta.valid = 0
        channel = self._channel_of_block(block)
        self._recycled[channel][self._die_slot_of_block(block)].append(block)
        return t

    def garbage_collect(self, at: int = 0, force: bool = False,
                        channel: int | None = None) -> tuple[int, int, int]:
        """Greedy victim GC (fewest valid pages first).

        Auto mode reclaims until the free ratio reaches the high watermark;
        force mode sweeps every block holding invalid pages.  A channel
        argument restricts victims to one channel (used when that channel's
        allocator runs dry).  Returns (relocated_pages, erased_blocks,
        cost_ns).
        """
        self.gc_runs += 1
        relocated = erased = 0
        t = at
        while True:
            if channel is not None:
                if self._channel_free_blocks(channel) > 1 and erased > 0:
                    break
            elif not force and self.free_ratio >= self.gc_high:
                break
            candidates = sorted(self._gc_candidates(channel),
                                key=lambda bm: (bm[1].valid, bm[0]))
            if not candidates:
                break
            block, meta = candidates[0]
            for ppa in self.flash.valid_pages_in_block(block):
                t = self._relocate_page(ppa, meta, t)
                relocated += 1
            t = self._erase_and_recycle(block, meta, t)
            erased += 1
        self.gc_relocated += relocated
        self.gc_erased += erased
        return relocated, erased, t - at

    # -- wear leveling -----------------------------------------------------------------

    def erase_spread(self) -> int:
        counts = [self.flash.erase_count(b) for b in self._block_meta]
        if not counts:
            return 0
        return max(counts) - min(counts)

    def wear_level(self, at: int = 0) -> int:
        """Migrate cold data out of the least-erased blocks until the
        erase-count spread over touched blocks is within threshold.

        Erasing the coldest data-bearing block raises the low end of the
        spread; iteration stops as soon as a pass makes no progress (for
        instance when the least-erased blocks hold no valid data).
        Returns pages migrated.
        """
        migrations = 0
        t = at
        while True:
            spread = self.erase_spread()
            if spread <= self.wear_threshold:
                break
            active = self._active_blocks()
            candidates = [(self.flash.erase_count(b), b, m)
                          for b, m in self._block_meta.items()
                          if m.valid > 0 and b not in active]
            if not candidates:
                break
            candidates.sort(key=lambda c: (c[0], c[1]))
            _, block, meta = candidates[0]
            for ppa in self.flash.valid_pages_in_block(block):
                t = self._relocate_page(ppa, meta, t)
                migrations += 1
            t = self._erase_and_recycle(block, meta, t)
            if self.erase_spread() >= spread:
                break
        self.wear_migrations += migrations
        return migrations
