"""Flash array model: geometry, page/block state, and timing.

Contention model: the data transfer phase of every operation serializes on
its channel bus, while the array phase (sense/program/erase) serializes on
its die.  Dies on the same channel can sense in parallel, which is what
gives the device internal bandwidth proportional to the channel count.
Plane counts are part of the geometry but planes are not separate
contention points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KIB = 1024
MIB = 1024 * 1024

#: 600 MB/s per channel, with MB read as 2^20 bytes (4096 B then moves in
#: exactly 6511 ns, matching the hand-computed transfer figure used in tests).
DEFAULT_CHANNEL_BW = 600 * MIB
#: External host link cap (PCIe-class), bytes/second.
DEFAULT_EXTERNAL_BW = 3_200_000_000


class FlashError(Exception):
    pass


class OutOfBounds(FlashError):
    pass


class ReadOfFreePage(FlashError):
    pass


class ProgramOfNonFreePage(FlashError):
    pass


FREE = 0
VALID = 1
INVALID = 2

_STATE_NAMES = {FREE: "FREE", VALID: "VALID", INVALID: "INVALID"}


@dataclass(frozen=True)
class FlashGeometry:
    channels: int = 8
    chips_per_channel: int = 4
    dies_per_chip: int = 4
    planes_per_die: int = 2
    blocks_per_plane: int = 2048
    pages_per_block: int = 512
    page_size: int = 4096

    def __post_init__(self):
        for name in ("channels", "chips_per_channel", "dies_per_chip",
                     "planes_per_die", "blocks_per_plane", "pages_per_block",
                     "page_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.page_size & (self.page_size - 1):
            raise ValueError("page_size must be a power of two")

    @property
    def dies_per_channel(self) -> int:
        return self.chips_per_channel * self.dies_per_chip

    @property
    def total_dies(self) -> int:
        return self.channels * self.dies_per_channel

    @property
    def blocks_per_die(self) -> int:
        return self.planes_per_die * self.blocks_per_plane

    @property
    def total_blocks(self) -> int:
        return self.total_dies * self.blocks_per_die

    @property
    def total_pages(self) -> int:
        return self.total_blocks * self.pages_per_block


@dataclass(frozen=True)
class FlashTimings:
    t_rd: int = 50_000          # ns
    t_wr: int = 300_000         # ns
    t_erase: int = 3_000_000    # ns; typical NAND figure, not a measured value
    channel_bw: int = DEFAULT_CHANNEL_BW    # bytes/s
    external_bw: int = DEFAULT_EXTERNAL_BW  # bytes/s

    def __post_init__(self):
        if self.t_wr < self.t_rd:
            raise ValueError("t_wr must be >= t_rd")
        if min(self.t_rd, self.t_wr, self.t_erase,
               self.channel_bw, self.external_bw) <= 0:
            raise ValueError("all timing parameters must be positive")

    def transfer_ns(self, nbytes: int) -> int:
        """Bus time for nbytes at channel bandwidth, rounded up to 1 ns."""
        return -(-nbytes * 1_000_000_000 // self.channel_bw)


def _bits_for(n: int) -> int:
    return max(1, (n - 1).bit_length())


class PpaCodec:
    """Bijective packing of (channel, chip, die, plane, block, page) into a
    32-bit physical page address.  Field widths are derived from the
    geometry; the channel occupies the most significant bits."""

    def __init__(self, geom: FlashGeometry):
        self.geom = geom
        self.widths = (
            _bits_for(geom.channels),
            _bits_for(geom.chips_per_channel),
            _bits_for(geom.dies_per_chip),
            _bits_for(geom.planes_per_die),
            _bits_for(geom.blocks_per_plane),
            _bits_for(geom.pages_per_block),
        )
        self.total_bits = sum(self.widths)
        if self.total_bits > 32:
            raise ValueError(f"geometry needs {self.total_bits} bits, max 32")
        self._limits = (geom.channels, geom.chips_per_channel, geom.dies_per_chip,
                        geom.planes_per_die, geom.blocks_per_plane, geom.pages_per_block)

    def pack(self, channel: int, chip: int, die: int, plane: int,
             block: int, page: int) -> int:
        parts = (channel, chip, die, plane, block, page)
        ppa = 0
        for value, width, limit in zip(parts, self.widths, self._limits):
            if not 0 <= value < limit:
                raise OutOfBounds(f"component {value} out of range [0,{limit})")
            ppa = (ppa << width) | value
        return ppa

    def unpack(self, ppa: int) -> tuple[int, int, int, int, int, int]:
        if not 0 <= ppa < (1 << self.total_bits):
            raise OutOfBounds(f"ppa {ppa:#x} outside address space")
        parts = []
        for width in reversed(self.widths):
            parts.append(ppa & ((1 << width) - 1))
            ppa >>= width
        out = tuple(reversed(parts))
        for value, limit in zip(out, self._limits):
            if value >= limit:
                raise OutOfBounds(f"component {value} exceeds geometry")
        return out

    def channel_of(self, ppa: int) -> int:
        return ppa >> (self.total_bits - self.widths[0])

    def die_index(self, ppa: int) -> int:
        """Flat die index (channel, chip, die) for contention tracking."""
        ch, chip, die, _, _, _ = self.unpack(ppa)
        g = self.geom
        return (ch * g.chips_per_channel + chip) * g.dies_per_chip + die

    def block_index(self, ppa: int) -> int:
        """Flat block index across the device."""
        ch, chip, die, plane, block, _ = self.unpack(ppa)
        g = self.geom
        die_flat = (ch * g.chips_per_channel + chip) * g.dies_per_chip + die
        return (die_flat * g.planes_per_die + plane) * g.blocks_per_plane + block

    def block_base_ppa(self, block_index: int) -> int:
        g = self.geom
        block = block_index % g.blocks_per_plane
        rest = block_index // g.blocks_per_plane
        plane = rest % g.planes_per_die
        rest //= g.planes_per_die
        die = rest % g.dies_per_chip
        rest //= g.dies_per_chip
        chip = rest % g.chips_per_channel
        channel = rest // g.chips_per_channel
        return self.pack(channel, chip, die, plane, block, 0)


class FlashArray:
    """Byte-accurate flash array with per-channel / per-die contention.

    Page contents are materialized lazily (dicts keyed by PPA) so the full
    Table-style geometry is usable without allocating terabytes.  With
    ``zero_fill=True`` contents are not stored and reads return zero pages;
    timing and state transitions are identical.
    """

    def __init__(self, geom: FlashGeometry = FlashGeometry(),
                 timings: FlashTimings = FlashTimings(),
                 zero_fill: bool = False):
        self.geom = geom
        self.timings = timings
        self.codec = PpaCodec(geom)
        self.zero_fill = zero_fill
        self._state: dict[int, int] = {}       # ppa -> FREE/VALID/INVALID
        self._content: dict[int, bytes] = {}   # ppa -> page bytes
        self._owner: dict[int, int] = {}       # ppa -> logical page address
        self._channel_busy = [0] * geom.channels
        self._die_busy = [0] * geom.total_dies
        self.erase_counts: dict[int, int] = {}  # flat block index -> erases
        self.reads = 0
        self.programs = 0
        self.erases = 0

    # -- state inspection ---------------------------------------------------

    def page_state(self, ppa: int) -> int:
        self.codec.unpack(ppa)
        return self._state.get(ppa, FREE)

    def page_owner(self, ppa: int):
        return self._owner.get(ppa)

    def erase_count(self, block_index: int) -> int:
        return self.erase_counts.get(block_index, 0)

    # -- timing helpers -----------------------------------------------------

    def _read_time(self, ppa: int, at: int) -> int:
        ch = self.codec.channel_of(ppa)
        die = self.codec.die_index(ppa)
        array_end = max(at, self._die_busy[die]) + self.timings.t_rd
        xfer = self.timings.transfer_ns(self.geom.page_size)
        done = max(array_end, self._channel_busy[ch]) + xfer
        self._die_busy[die] = done
        self._channel_busy[ch] = done
        return done

    def _program_time(self, ppa: int, at: int) -> int:
        ch = self.codec.channel_of(ppa)
        die = self.codec.die_index(ppa)
        xfer = self.timings.transfer_ns(self.geom.page_size)
        xfer_end = max(at, self._channel_busy[ch]) + xfer
        self._channel_busy[ch] = xfer_end
        done = max(xfer_end, self._die_busy[die]) + self.timings.t_wr
        self._die_busy[die] = done
        return done

    def _erase_time(self, block_base: int, at: int) -> int:
        die = self.codec.die_index(block_base)
        done = max(at, self._die_busy[die]) + self.timings.t_erase
        self._die_busy[die] = done
        return done

    # -- operations ----------------------------------------------------------

    def read_page(self, ppa: int, at: int = 0) -> tuple[bytes, int]:
        """Returns (content, completion_ns)."""
        if self.page_state(ppa) != VALID:
            raise ReadOfFreePage(f"read of non-VALID page {ppa:#x}")
        self.reads += 1
        done = self._read_time(ppa, at)
        if self.zero_fill:
            return bytes(self.geom.page_size), done
        return self._content[ppa], done

    def program_page(self, ppa: int, content: bytes, at: int = 0) -> int:
        """Returns completion_ns.  Page must be FREE (out-of-place writes)."""
        if self.page_state(ppa) != FREE:
            state = _STATE_NAMES[self.page_state(ppa)]
            raise ProgramOfNonFreePage(f"program of {state} page {ppa:#x}")
        if len(content) != self.geom.page_size:
            raise ValueError(f"content must be {self.geom.page_size} bytes")
        self._state[ppa] = VALID
        if not self.zero_fill:
            self._content[ppa] = bytes(content)
        self.programs += 1
        return self._program_time(ppa, at)

    def install_page(self, ppa: int, content: bytes, owner_lpa=None) -> None:
        """Zero-time page install for pre-existing device state (datasets
        populated before the measured run)."""
        if self.page_state(ppa) != FREE:
            raise ProgramOfNonFreePage(f"install over non-FREE page {ppa:#x}")
        if len(content) != self.geom.page_size:
            raise ValueError(f"content must be {self.geom.page_size} bytes")
        self._state[ppa] = VALID
        if not self.zero_fill:
            self._content[ppa] = bytes(content)
        if owner_lpa is not None:
            self._owner[ppa] = owner_lpa

    def invalidate_page(self, ppa: int) -> None:
        if self.page_state(ppa) != VALID:
            raise FlashError(f"invalidate of non-VALID page {ppa:#x}")
        self._state[ppa] = INVALID
        self._owner.pop(ppa, None)

    def set_owner(self, ppa: int, lpa: int) -> None:
        self._owner[ppa] = lpa

    def erase_block(self, block_index: int, at: int = 0) -> int:
        """Erase every page in the block; returns completion_ns."""
        if not 0 <= block_index < self.geom.total_blocks:
            raise OutOfBounds(f"block {block_index} out of range")
        base = self.codec.block_base_ppa(block_index)
        for page in range(self.geom.pages_per_block):
            ppa = base | page
            self._state.pop(ppa, None)
            self._content.pop(ppa, None)
            self._owner.pop(ppa, None)
        self.erase_counts[block_index] = self.erase_counts.get(block_index, 0) + 1
        self.erases += 1
        return self._erase_time(base, at)

    def valid_pages_in_block(self, block_index: int) -> list[int]:
        base = self.codec.block_base_ppa(block_index)
        return [base | p for p in range(self.geom.pages_per_block)
                if self._state.get(base | p) == VALID]
