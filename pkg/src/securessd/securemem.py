"""Controller-DRAM encryption and integrity verification.

Cache lines (64 B) are encrypted by XOR with a one-time pad derived from a
block cipher over (line address, counter); every line carries a 64-bit MAC
over its address, counter, and ciphertext.  Counters use the hybrid layout:

* writable 4 KiB pages get a split-counter block: one 64-bit major counter
  plus 64 seven-bit minor counters packed into 64 bytes (one minor per
  line).  A minor wrapping past 127 increments the major, resets all 64
  minors, and re-encrypts the whole page.
* read-only pages get one 64-bit major counter each, packed eight to a
  64-byte block, so one counter block covers eight pages.

Two integrity trees (arity 8) authenticate the two counter-block arrays.
Leaf MACs hash counter blocks; interior MACs hash child-MAC nodes; the two
root MACs live in registers that injected attacks cannot touch.  Everything
else - ciphertext, MACs, counter blocks, tree nodes - sits in the
adversarial store and can be flipped, swapped, or rolled back through the
attack hooks.

Primitives are AES-128 based (pad = AES-CTR style over the counter tuple,
MAC = truncated AES-CBC-MAC) with fixed input layouts, so streams are
reproducible bit-exactly; they are simulator-grade, not a hardened
implementation.

Latency charges follow the measured-average model: 60 ns per block-cipher
pad generation, a 102.6 ns average encryption charge per line written, a
151.2 ns average verification charge per MAC or tree check, one DRAM fetch
plus a tree verification on each counter-cache miss.  Charges accumulate
in integer picoseconds.
"""

from __future__ import annotations

import copy
from collections import OrderedDict
from dataclasses import dataclass, field

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

LINE = 64
LINES_PER_PAGE = 64
PAGE_BYTES = LINE * LINES_PER_PAGE
MINOR_MAX = 127            # 7-bit minors
MAJORS_PER_BLOCK = 8       # read-only pages per major-counter block
ARITY = 8

READ_ONLY = "READ_ONLY"
WRITABLE = "WRITABLE"

SPLIT_TREE = "split"
MAJOR_TREE = "major"

AES_PAD_PS = 60_000        # one pipelined pad generation
ENCRYPT_CHARGE_PS = 102_600
VERIFY_CHARGE_PS = 151_200
DEFAULT_DRAM_FETCH_PS = 30_000
DEFAULT_COUNTER_CACHE_BYTES = 128 * 1024

_DOM_PAD = 0x02
_DOM_LINE_MAC = 0x01
_DOM_LEAF = 0x03
_DOM_NODE = 0x04
_PERM_DOMAIN = {READ_ONLY: 0, WRITABLE: 1}


class SecureMemoryError(Exception):
    pass


class IntegrityViolation(SecureMemoryError):
    """MAC or tree mismatch: tampering detected before data release."""


class WriteToReadOnly(SecureMemoryError):
    pass


# -- counter-block byte layouts -------------------------------------------------

def encode_split_block(major: int, minors: list[int]) -> bytes:
    packed = 0
    for i, m in enumerate(minors):
        packed |= (m & 0x7F) << (7 * i)
    return major.to_bytes(8, "little") + packed.to_bytes(56, "little")


def decode_split_block(raw: bytes) -> tuple[int, list[int]]:
    major = int.from_bytes(raw[:8], "little")
    packed = int.from_bytes(raw[8:], "little")
    return major, [(packed >> (7 * i)) & 0x7F for i in range(LINES_PER_PAGE)]


def encode_major_block(majors: list[int]) -> bytes:
    return b"".join(m.to_bytes(8, "little") for m in majors)


def decode_major_block(raw: bytes) -> list[int]:
    return [int.from_bytes(raw[8 * i:8 * i + 8], "little")
            for i in range(MAJORS_PER_BLOCK)]


# -- crypto primitives ------------------------------------------------------------

class _Aes:
    def __init__(self, key: bytes):
        if len(key) != 16:
            raise ValueError("key must be 16 bytes")
        self._cipher = Cipher(algorithms.AES(key), modes.ECB())

    def blocks(self, data: bytes) -> bytes:
        enc = self._cipher.encryptor()
        return enc.update(data) + enc.finalize()

    def cbc_mac8(self, message: bytes) -> bytes:
        if len(message) % 16:
            message += bytes(16 - len(message) % 16)
        state = bytes(16)
        enc = self._cipher.encryptor()
        for off in range(0, len(message), 16):
            block = bytes(a ^ b for a, b in zip(state, message[off:off + 16]))
            state = enc.update(block)
        enc.finalize()
        return state[:8]


def _pad_seed(dom: int, i: int, minor: int, perm_dom: int,
              line_addr: int, major: int) -> bytes:
    return bytes((dom, i, minor, perm_dom)) + \
        (line_addr & 0xFFFFFFFF).to_bytes(4, "little") + \
        major.to_bytes(8, "little")


@dataclass
class CostBreakdown:
    pad_ps: int = 0
    encrypt_ps: int = 0
    verify_ps: int = 0
    fetch_ps: int = 0

    @property
    def total_ps(self) -> int:
        return self.pad_ps + self.encrypt_ps + self.verify_ps + self.fetch_ps

    @property
    def total_ns(self) -> float:
        return self.total_ps / 1000


@dataclass
class TrafficCounters:
    counter_fetch_bytes: int = 0
    counter_writeback_bytes: int = 0
    mac_read_bytes: int = 0
    mac_write_bytes: int = 0
    tree_read_bytes: int = 0
    tree_write_bytes: int = 0

    @property
    def total_extra_bytes(self) -> int:
        return (self.counter_fetch_bytes + self.counter_writeback_bytes +
                self.mac_read_bytes + self.mac_write_bytes +
                self.tree_read_bytes + self.tree_write_bytes)


class IntegrityTree:
    """Arity-8 MAC tree over an array of 64-byte counter blocks.

    levels[0] holds nodes of 8 leaf MACs; higher levels authenticate the
    level below.  The root MAC lives outside the adversarial store.
    """

    def __init__(self, aes: _Aes, tag: str, n_leaves: int):
        self.aes = aes
        self.tag = tag
        self.n_leaves = n_leaves
        self.levels: list[list[bytearray]] = []
        count = n_leaves
        while True:
            count = -(-count // ARITY)
            self.levels.append([bytearray(LINE) for _ in range(count)])
            if count == 1:
                break
        self.root = bytes(8)

    def storage_bytes(self) -> int:
        return sum(len(level) * LINE for level in self.levels)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def _leaf_mac(self, index: int, block: bytes) -> bytes:
        head = bytes((_DOM_LEAF,)) + self.tag.encode() + index.to_bytes(8, "little")
        return self.aes.cbc_mac8(head + block)

    def _node_mac(self, level: int, index: int, node: bytes) -> bytes:
        head = bytes((_DOM_NODE, level)) + self.tag.encode() + index.to_bytes(8, "little")
        return self.aes.cbc_mac8(head + node)

    def update_leaf(self, index: int, block: bytes) -> int:
        """Propagate one changed counter block to the root; returns the
        number of tree nodes written."""
        mac = self._leaf_mac(index, block)
        writes = 0
        child = index
        for level, nodes in enumerate(self.levels):
            node = nodes[child // ARITY]
            slot = (child % ARITY) * 8
            node[slot:slot + 8] = mac
            writes += 1
            mac = self._node_mac(level, child // ARITY, bytes(node))
            child //= ARITY
        self.root = mac
        return writes

    def verify_leaf(self, index: int, block: bytes) -> None:
        """Walk the stored path from one counter block up to the root
        register; raise on any mismatch."""
        mac = self._leaf_mac(index, block)
        child = index
        for level, nodes in enumerate(self.levels):
            node = nodes[child // ARITY]
            slot = (child % ARITY) * 8
            if bytes(node[slot:slot + 8]) != mac:
                raise IntegrityViolation(
                    f"{self.tag} tree mismatch at level {level} leaf {index}")
            mac = self._node_mac(level, child // ARITY, bytes(node))
            child //= ARITY
        if mac != self.root:
            raise IntegrityViolation(f"{self.tag} tree root mismatch")

    def audit(self, blocks: list[bytes]) -> None:
        """Recompute every level from the stored counter blocks and stored
        interior nodes; raise on any inconsistency with the root register."""
        macs = [self._leaf_mac(i, blocks[i]) for i in range(self.n_leaves)]
        for level, nodes in enumerate(self.levels):
            for i, node in enumerate(nodes):
                for slot in range(ARITY):
                    child = i * ARITY + slot
                    if child < len(macs):
                        if bytes(node[slot * 8:slot * 8 + 8]) != macs[child]:
                            raise IntegrityViolation(
                                f"{self.tag} tree stale node at level {level}")
            macs = [self._node_mac(level, i, bytes(node))
                    for i, node in enumerate(nodes)]
        if macs[0] != self.root:
            raise IntegrityViolation(f"{self.tag} tree root mismatch")


class EncryptedMemory:
    """Byte-accurate encrypted store over n_pages 4 KiB pages."""

    def __init__(self, key: bytes, n_pages: int,
                 counter_cache_bytes: int = DEFAULT_COUNTER_CACHE_BYTES,
                 dram_fetch_ps: int = DEFAULT_DRAM_FETCH_PS):
        self.aes = _Aes(key)
        self.n_pages = n_pages
        self.dram_fetch_ps = dram_fetch_ps
        n_major_blocks = -(-n_pages // MAJORS_PER_BLOCK)

        # Adversarial store: all of this is attacker-mutable.
        self.cipher_lines: dict[int, bytes] = {}
        self.line_macs: dict[int, bytes] = {}
        self.split_blocks = [encode_split_block(0, [0] * LINES_PER_PAGE)
                             for _ in range(n_pages)]
        self.major_blocks = [encode_major_block([0] * MAJORS_PER_BLOCK)
                             for _ in range(n_major_blocks)]
        self.split_tree = IntegrityTree(self.aes, SPLIT_TREE, n_pages)
        self.major_tree = IntegrityTree(self.aes, MAJOR_TREE, n_major_blocks)
        for i, blk in enumerate(self.split_blocks):
            self.split_tree.update_leaf(i, blk)
        for i, blk in enumerate(self.major_blocks):
            self.major_tree.update_leaf(i, blk)

        self.permissions: dict[int, str] = {}
        self._major_floor = [0] * n_pages  # freshness floor, engine metadata

        cache_blocks = max(1, counter_cache_bytes // LINE)
        self._cache_capacity = cache_blocks
        self._counter_cache: OrderedDict[tuple[str, int], bool] = OrderedDict()

        self.traffic = TrafficCounters()
        self.total_cost_ps = 0
        self.writes = 0
        self.reads = 0
        self.major_increments = 0
        self.minor_reset_events = 0
        self.line_reencryptions = 0
        self.cache_hits = 0
        self.cache_misses = 0
        self.faults: list[tuple[str, int]] = []

    # -- helpers ------------------------------------------------------------------

    def _check_page(self, page: int) -> None:
        if not 0 <= page < self.n_pages:
            raise SecureMemoryError(f"page {page} out of range")
        if page not in self.permissions:
            raise SecureMemoryError(f"page {page} not resident")

    def _line_index(self, address: int) -> tuple[int, int]:
        if address % LINE:
            raise SecureMemoryError(f"address {address:#x} not 64B aligned")
        page, off = divmod(address, PAGE_BYTES)
        return page, off // LINE

    def _split(self, page: int) -> tuple[int, list[int]]:
        return decode_split_block(self.split_blocks[page])

    def _major_slot(self, page: int) -> tuple[int, int]:
        return page // MAJORS_PER_BLOCK, page % MAJORS_PER_BLOCK

    def _ro_major(self, page: int) -> int:
        block, slot = self._major_slot(page)
        return decode_major_block(self.major_blocks[block])[slot]

    def _pad(self, line_addr: int, major: int, minor: int, perm: str) -> bytes:
        dom = _PERM_DOMAIN[perm]
        seed = b"".join(_pad_seed(_DOM_PAD, i, minor, dom, line_addr, major)
                        for i in range(LINE // 16))
        return self.aes.blocks(seed)

    def _line_mac(self, line_addr: int, major: int, minor: int, perm: str,
                  ciphertext: bytes) -> bytes:
        head = _pad_seed(_DOM_LINE_MAC, 0, minor, _PERM_DOMAIN[perm],
                         line_addr, major)
        return self.aes.cbc_mac8(head + ciphertext)

    def _encrypt_line(self, page: int, li: int, plaintext: bytes,
                      major: int, minor: int, perm: str) -> None:
        line_addr = page * LINES_PER_PAGE + li
        ct = bytes(a ^ b for a, b in
                   zip(plaintext, self._pad(line_addr, major, minor, perm)))
        self.cipher_lines[line_addr] = ct
        self.line_macs[line_addr] = self._line_mac(line_addr, major, minor,
                                                   perm, ct)

    def _decrypt_line(self, page: int, li: int, major: int, minor: int,
                      perm: str, verify: bool = True) -> bytes:
        line_addr = page * LINES_PER_PAGE + li
        ct = self.cipher_lines[line_addr]
        if verify:
            expect = self._line_mac(line_addr, major, minor, perm, ct)
            if self.line_macs.get(line_addr) != expect:
                self.faults.append(("mac", line_addr))
                raise IntegrityViolation(f"line MAC mismatch at {line_addr}")
        return bytes(a ^ b for a, b in
                     zip(ct, self._pad(line_addr, major, minor, perm)))

    # -- counter cache ----------------------------------------------------------------

    def _probe_counter(self, tree: str, block_index: int,
                       cost: CostBreakdown, dirty: bool) -> None:
        """LRU probe; a miss fetches the 64B block and verifies its tree
        path, a hit uses the on-chip copy."""
        key = (tree, block_index)
        if key in self._counter_cache:
            self._counter_cache.move_to_end(key)
            self._counter_cache[key] = self._counter_cache[key] or dirty
            self.cache_hits += 1
            return
        self.cache_misses += 1
        self.traffic.counter_fetch_bytes += LINE
        self.traffic.tree_read_bytes += self._tree(tree).depth * LINE
        cost.fetch_ps += self.dram_fetch_ps
        cost.verify_ps += VERIFY_CHARGE_PS
        block = (self.split_blocks[block_index] if tree == SPLIT_TREE
                 else self.major_blocks[block_index])
        self._tree(tree).verify_leaf(block_index, bytes(block))
        self._counter_cache[key] = dirty
        while len(self._counter_cache) > self._cache_capacity:
            _evicted, was_dirty = self._counter_cache.popitem(last=False)
            if was_dirty:
                self.traffic.counter_writeback_bytes += LINE

    def flush_caches(self) -> None:
        for _, dirty in self._counter_cache.items():
            if dirty:
                self.traffic.counter_writeback_bytes += LINE
        self._counter_cache.clear()

    def _tree(self, tag: str) -> IntegrityTree:
        return self.split_tree if tag == SPLIT_TREE else self.major_tree

    def _touch_tree(self, tag: str, block_index: int, block: bytes) -> None:
        writes = self._tree(tag).update_leaf(block_index, block)
        self.traffic.tree_write_bytes += writes * 8

    # -- page lifecycle -----------------------------------------------------------------

    def ingest_page(self, page: int, plaintext: bytes,
                    permission: str = READ_ONLY) -> CostBreakdown:
        """Install one 4 KiB page arriving from the flash path.  The page's
        major counter moves past any previously used value so pads are never
        reused across re-ingests."""
        if len(plaintext) != PAGE_BYTES:
            raise SecureMemoryError("ingest needs a full 4KiB page")
        if permission not in (READ_ONLY, WRITABLE):
            raise ValueError(f"unknown permission {permission}")
        if not 0 <= page < self.n_pages:
            raise SecureMemoryError(f"page {page} out of range")
        cost = CostBreakdown()
        major = self._major_floor[page] + 1
        self._major_floor[page] = major
        self.major_increments += 1
        if permission == WRITABLE:
            self.split_blocks[page] = encode_split_block(major, [0] * LINES_PER_PAGE)
            self._touch_tree(SPLIT_TREE, page, self.split_blocks[page])
            self._probe_counter(SPLIT_TREE, page, cost, dirty=True)
        else:
            block, slot = self._major_slot(page)
            majors = decode_major_block(self.major_blocks[block])
            majors[slot] = major
            self.major_blocks[block] = encode_major_block(majors)
            self._touch_tree(MAJOR_TREE, block, self.major_blocks[block])
            self._probe_counter(MAJOR_TREE, block, cost, dirty=True)
        self.permissions[page] = permission
        for li in range(LINES_PER_PAGE):
            self._encrypt_line(page, li, plaintext[li * LINE:(li + 1) * LINE],
                               major, 0, permission)
        cost.pad_ps += AES_PAD_PS
        cost.encrypt_ps += ENCRYPT_CHARGE_PS
        self.traffic.mac_write_bytes += 8 * LINES_PER_PAGE
        self.total_cost_ps += cost.total_ps
        return cost

    def change_permission(self, page: int, to: str) -> CostBreakdown:
        """Move a page between the two counter schemes.

        The major counter is incremented and copied into the destination
        entry, minors (if any) are initialized, the page is re-encrypted
        under the new entry, and both trees' paths are updated.
        """
        self._check_page(page)
        if to not in (READ_ONLY, WRITABLE):
            raise ValueError(f"unknown permission {to}")
        current = self.permissions[page]
        if current == to:
            raise SecureMemoryError(f"page {page} already {to}")
        cost = CostBreakdown()
        if to == WRITABLE:
            old_major = self._ro_major(page)
            new_major = old_major + 1
            plain = [self._decrypt_line(page, li, old_major, 0, READ_ONLY)
                     for li in range(LINES_PER_PAGE)]
            block, slot = self._major_slot(page)
            majors = decode_major_block(self.major_blocks[block])
            majors[slot] = 0
            self.major_blocks[block] = encode_major_block(majors)
            self._touch_tree(MAJOR_TREE, block, self.major_blocks[block])
            self.split_blocks[page] = encode_split_block(new_major,
                                                         [0] * LINES_PER_PAGE)
            self._touch_tree(SPLIT_TREE, page, self.split_blocks[page])
            for li, pt in enumerate(plain):
                self._encrypt_line(page, li, pt, new_major, 0, WRITABLE)
        else:
            old_major, minors = self._split(page)
            new_major = old_major + 1
            plain = [self._decrypt_line(page, li, old_major, minors[li], WRITABLE)
                     for li in range(LINES_PER_PAGE)]
            self.split_blocks[page] = encode_split_block(0, [0] * LINES_PER_PAGE)
            self._touch_tree(SPLIT_TREE, page, self.split_blocks[page])
            block, slot = self._major_slot(page)
            majors = decode_major_block(self.major_blocks[block])
            majors[slot] = new_major
            self.major_blocks[block] = encode_major_block(majors)
            self._touch_tree(MAJOR_TREE, block, self.major_blocks[block])
            for li, pt in enumerate(plain):
                self._encrypt_line(page, li, pt, new_major, 0, READ_ONLY)
        self.permissions[page] = to
        self._major_floor[page] = max(self._major_floor[page], new_major)
        self.major_increments += 1
        self.line_reencryptions += LINES_PER_PAGE
        cost.pad_ps += AES_PAD_PS
        cost.encrypt_ps += LINES_PER_PAGE * ENCRYPT_CHARGE_PS
        self.traffic.mac_write_bytes += 8 * LINES_PER_PAGE
        self.total_cost_ps += cost.total_ps
        return cost

    # -- line operations -----------------------------------------------------------------

    def mem_write(self, address: int, data: bytes) -> tuple[CostBreakdown, int]:
        """Write one 64B line back to memory.  Returns (cost, extra_bytes)."""
        page, li = self._line_index(address)
        self._check_page(page)
        if len(data) != LINE:
            raise SecureMemoryError("line writes are 64 bytes")
        if self.permissions[page] == READ_ONLY:
            self.faults.append(("write_to_read_only", address))
            raise WriteToReadOnly(f"page {page} is read-only")
        cost = CostBreakdown()
        before = self.traffic.total_extra_bytes
        self._probe_counter(SPLIT_TREE, page, cost, dirty=True)
        major, minors = self._split(page)
        if minors[li] >= MINOR_MAX:
            # Minor overflow: bump the major, reset every minor, re-encrypt
            # the whole page under the new counter entry.
            plain = [self._decrypt_line(page, j, major, minors[j], WRITABLE)
                     for j in range(LINES_PER_PAGE)]
            major += 1
            minors = [0] * LINES_PER_PAGE
            self.major_increments += 1
            self.minor_reset_events += 1
            for j, pt in enumerate(plain):
                self._encrypt_line(page, j, pt, major, 0, WRITABLE)
            self.line_reencryptions += LINES_PER_PAGE
            cost.encrypt_ps += LINES_PER_PAGE * ENCRYPT_CHARGE_PS
            self.traffic.mac_write_bytes += 8 * LINES_PER_PAGE
        minors[li] += 1
        self.split_blocks[page] = encode_split_block(major, minors)
        self._encrypt_line(page, li, data, major, minors[li], WRITABLE)
        self._touch_tree(SPLIT_TREE, page, self.split_blocks[page])
        self.writes += 1
        cost.pad_ps += AES_PAD_PS
        cost.encrypt_ps += ENCRYPT_CHARGE_PS
        self.traffic.mac_write_bytes += 8
        self.total_cost_ps += cost.total_ps
        return cost, self.traffic.total_extra_bytes - before

    def mem_read(self, address: int) -> tuple[bytes, CostBreakdown, bool]:
        """Read one 64B line; verifies counter path and line MAC before
        returning plaintext.  Returns (data, cost, verified)."""
        page, li = self._line_index(address)
        self._check_page(page)
        cost = CostBreakdown()
        perm = self.permissions[page]
        if perm == WRITABLE:
            self._probe_counter(SPLIT_TREE, page, cost, dirty=False)
            major, minors = self._split(page)
            minor = minors[li]
        else:
            block, _ = self._major_slot(page)
            self._probe_counter(MAJOR_TREE, block, cost, dirty=False)
            major, minor = self._ro_major(page), 0
        self.traffic.mac_read_bytes += 8
        cost.pad_ps += AES_PAD_PS
        cost.verify_ps += VERIFY_CHARGE_PS
        data = self._decrypt_line(page, li, major, minor, perm)
        self.reads += 1
        self.total_cost_ps += cost.total_ps
        return data, cost, True

    def verify_root(self, tree: str) -> bool:
        """Full audit of one tree against its root register."""
        blocks = ([bytes(b) for b in self.split_blocks] if tree == SPLIT_TREE
                  else [bytes(b) for b in self.major_blocks])
        self._tree(tree).audit(blocks)
        return True

    def tree_footprint(self) -> dict[str, int]:
        return {
            "split_counter_bytes": len(self.split_blocks) * LINE,
            "major_counter_bytes": len(self.major_blocks) * LINE,
            "split_tree_bytes": self.split_tree.storage_bytes(),
            "major_tree_bytes": self.major_tree.storage_bytes(),
        }

    # -- attack hooks --------------------------------------------------------------------

    def attack_flip_data_bit(self, line_addr: int, bit: int) -> None:
        raw = bytearray(self.cipher_lines[line_addr])
        raw[bit // 8] ^= 1 << (bit % 8)
        self.cipher_lines[line_addr] = bytes(raw)
        self.flush_caches()

    def attack_flip_mac_bit(self, line_addr: int, bit: int) -> None:
        raw = bytearray(self.line_macs[line_addr])
        raw[bit // 8] ^= 1 << (bit % 8)
        self.line_macs[line_addr] = bytes(raw)
        self.flush_caches()

    def attack_flip_counter_bit(self, tree: str, block_index: int, bit: int) -> None:
        store = self.split_blocks if tree == SPLIT_TREE else self.major_blocks
        raw = bytearray(store[block_index])
        raw[bit // 8] ^= 1 << (bit % 8)
        store[block_index] = bytes(raw)
        self.flush_caches()

    def attack_flip_tree_bit(self, tree: str, level: int, node: int, bit: int) -> None:
        target = self._tree(tree).levels[level][node]
        target[bit // 8] ^= 1 << (bit % 8)
        self.flush_caches()

    def attack_swap_counter_blocks(self, tree: str, a: int, b: int) -> None:
        store = self.split_blocks if tree == SPLIT_TREE else self.major_blocks
        store[a], store[b] = store[b], store[a]
        self.flush_caches()

    def attack_swap_data_lines(self, a: int, b: int) -> None:
        self.cipher_lines[a], self.cipher_lines[b] = \
            self.cipher_lines[b], self.cipher_lines[a]
        self.line_macs[a], self.line_macs[b] = \
            self.line_macs[b], self.line_macs[a]
        self.flush_caches()

    def snapshot(self) -> dict:
        """Copy of the whole adversarial store (roots excluded: they live
        in registers the attacker cannot reach)."""
        return {
            "cipher_lines": dict(self.cipher_lines),
            "line_macs": dict(self.line_macs),
            "split_blocks": list(self.split_blocks),
            "major_blocks": list(self.major_blocks),
            "split_levels": copy.deepcopy(self.split_tree.levels),
            "major_levels": copy.deepcopy(self.major_tree.levels),
        }

    def restore(self, snap: dict) -> None:
        self.cipher_lines = dict(snap["cipher_lines"])
        self.line_macs = dict(snap["line_macs"])
        self.split_blocks = list(snap["split_blocks"])
        self.major_blocks = list(snap["major_blocks"])
        self.split_tree.levels = copy.deepcopy(snap["split_levels"])
        self.major_tree.levels = copy.deepcopy(snap["major_levels"])
        self.flush_caches()
