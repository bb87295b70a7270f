"""Stream cipher securing flash-to-DRAM transfers.

The cipher is Trivium as published: 80-bit key, 80-bit IV, 288-bit state,
1152 initialization rounds.  This implementation advances 64 steps per
iteration, which is legal because every feedback tap sits more than 64
positions from its register's input; it is checked bit-for-bit against a
bit-serial reference in the test suite.

Conventions (fixed so any implementation can reproduce the stream):

* key/IV bit k (k = 0..79) is bit ``7 - (k % 8)`` of byte ``k // 8``
  (MSB first), and loads into state position k+1.
* keystream bit i maps to bit ``7 - (i % 8)`` of output byte ``i // 8``.

Page IVs concatenate the 32-bit physical page address with 48 bits of
generator output (``ppa_part`` in the top bits), so every encrypted page
in an epoch gets a unique IV: the address part is spatially unique and the
random part temporally unique.  The generator is reseeded only at device
reset, which starts a new epoch.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .sim import MASK64, SeededRng

KEY_BYTES = 10
IV_BYTES = 10
WARMUP_ROUNDS = 1152
BITS_PER_CYCLE = 64

#: Energy to encrypt one 4 KiB flash page, nanojoules.
ENERGY_NJ_PER_4K = 10.3
#: Reported share of SSD-controller area taken by the engine.
AREA_OVERHEAD_FRACTION = 0.016

_REV8 = bytes(int(f"{i:08b}"[::-1], 2) for i in range(256))


class CipherError(Exception):
    pass


class BadLength(CipherError):
    pass


def keystream(key: bytes, iv: bytes, n_bits: int) -> bytes:
    """Trivium keystream after standard initialization.

    n_bits must be a multiple of 64; returns n_bits / 8 bytes.
    """
    if len(key) != KEY_BYTES or len(iv) != IV_BYTES:
        raise BadLength("key and IV must be 80 bits")
    if n_bits % BITS_PER_CYCLE:
        raise BadLength("n_bits must be a multiple of 64")

    # Registers hold state positions with the newest bit at the MSB:
    # A = s1..s93, B = s94..s177, C = s178..s288.
    a = int.from_bytes(key, "big") << 13
    b = int.from_bytes(iv, "big") << 4
    c = 7  # s286..s288 = 1

    out = bytearray(n_bits // 8)
    steps = WARMUP_ROUNDS // BITS_PER_CYCLE + n_bits // BITS_PER_CYCLE
    emit_from = WARMUP_ROUNDS // BITS_PER_CYCLE
    pos = 0
    for step in range(steps):
        t1 = ((a >> 27) ^ a) & MASK64
        t2 = ((b >> 15) ^ b) & MASK64
        t3 = ((c >> 45) ^ c) & MASK64
        if step >= emit_from:
            z = t1 ^ t2 ^ t3
            for k in range(8):
                out[pos + k] = _REV8[(z >> (8 * k)) & 0xFF]
            pos += 8
        f1 = t1 ^ ((a >> 2) & (a >> 1) & MASK64) ^ ((b >> 6) & MASK64)
        f2 = t2 ^ ((b >> 2) & (b >> 1) & MASK64) ^ ((c >> 24) & MASK64)
        f3 = t3 ^ ((c >> 2) & (c >> 1) & MASK64) ^ ((a >> 24) & MASK64)
        a = (a >> 64) | (f3 << 29)
        b = (b >> 64) | (f1 << 20)
        c = (c >> 64) | (f2 << 47)
    return bytes(out)


def xor_bytes(data: bytes, pad: bytes) -> bytes:
    return (int.from_bytes(data, "little") ^
            int.from_bytes(pad, "little")).to_bytes(len(data), "little")


@dataclass(frozen=True)
class PageIv:
    ppa_part: int    # 32 bits
    rand_part: int   # 48 bits

    @property
    def combined(self) -> int:
        return (self.ppa_part << 48) | self.rand_part

    def to_bytes(self) -> bytes:
        return self.combined.to_bytes(IV_BYTES, "big")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "PageIv":
        if len(raw) != IV_BYTES:
            raise BadLength("IV must be 80 bits")
        v = int.from_bytes(raw, "big")
        return cls(v >> 48, v & ((1 << 48) - 1))


@dataclass(frozen=True)
class EncryptedPage:
    ppa: int
    ciphertext: bytes
    iv: bytes
    cost_ns: int
    energy_nj: float


class PageBuffer:
    """FIFO of (ppa, page bytes) awaiting encryption."""

    def __init__(self):
        self._q: deque[tuple[int, bytes]] = deque()

    def push(self, ppa: int, page: bytes) -> None:
        self._q.append((ppa, page))

    def pop(self) -> tuple[int, bytes]:
        return self._q.popleft()

    def __len__(self) -> int:
        return len(self._q)


class PageCipherEngine:
    """Per-direction cipher engine on the flash transfer path.

    With ``overlap=True`` keystream generation is pipelined with the flash
    read, so an encrypted transfer costs one extra keystream cycle; with
    overlap disabled the full page's cycles are charged.
    """

    def __init__(self, key: bytes, rng: SeededRng, page_size: int = 4096,
                 overlap: bool = True, cycle_ns: int = 1):
        if len(key) != KEY_BYTES:
            raise BadLength("key must be 80 bits")
        self._key = key  # held in the simulated secure register
        self._rng = rng
        self.page_size = page_size
        self.overlap = overlap
        self.cycle_ns = cycle_ns
        self._epoch_ivs: set[int] = set()
        self.pages_encrypted = 0
        self.pages_decrypted = 0
        self.total_energy_nj = 0.0

    # -- IV management -------------------------------------------------------

    def next_iv(self, ppa: int) -> PageIv:
        """Fresh IV for one page: PPA plus 48 generator bits, re-drawn on
        the (astronomically rare) repeat within an epoch."""
        while True:
            rand_part = self._rng.next_u64() & ((1 << 48) - 1)
            iv = PageIv(ppa & 0xFFFFFFFF, rand_part)
            if iv.combined not in self._epoch_ivs:
                self._epoch_ivs.add(iv.combined)
                return iv

    def reset_epoch(self, rng: SeededRng) -> None:
        """Device power cycle: reseed the generator, start a new IV epoch."""
        self._rng = rng
        self._epoch_ivs.clear()

    # -- cost/energy model ------------------------------------------------------

    def _page_cost_ns(self) -> int:
        if self.overlap:
            return self.cycle_ns
        cycles = -(-self.page_size * 8 // BITS_PER_CYCLE)
        return cycles * self.cycle_ns

    def _page_energy_nj(self) -> float:
        return ENERGY_NJ_PER_4K * (self.page_size / 4096)

    def account_page(self, ppa: int) -> EncryptedPage:
        """Cost/energy/IV accounting without byte transformation, for large
        runs where transfer payloads are modeled rather than ciphered.
        Draws the IV exactly as encrypt_page would."""
        iv = self.next_iv(ppa)
        self.pages_encrypted += 1
        energy = self._page_energy_nj()
        self.total_energy_nj += energy
        return EncryptedPage(ppa, b"", iv.to_bytes(), self._page_cost_ns(), energy)

    # -- data path ----------------------------------------------------------------

    def encrypt_page(self, ppa: int, plaintext: bytes) -> EncryptedPage:
        if len(plaintext) != self.page_size:
            raise BadLength(f"plaintext must be {self.page_size} bytes")
        iv = self.next_iv(ppa)
        pad = keystream(self._key, iv.to_bytes(), self.page_size * 8)
        self.pages_encrypted += 1
        energy = self._page_energy_nj()
        self.total_energy_nj += energy
        return EncryptedPage(ppa, xor_bytes(plaintext, pad), iv.to_bytes(),
                             self._page_cost_ns(), energy)

    def decrypt_page(self, iv: bytes, ciphertext: bytes) -> bytes:
        if len(ciphertext) != self.page_size:
            raise BadLength(f"ciphertext must be {self.page_size} bytes")
        PageIv.from_bytes(iv)
        pad = keystream(self._key, iv, self.page_size * 8)
        self.pages_decrypted += 1
        return xor_bytes(ciphertext, pad)
