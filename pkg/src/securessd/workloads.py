"""Benchmark workloads: dataset generation, query kernels, cost constants.

The dataset is a single table of fixed-width 64-byte records striped
round-robin across channels.  Page payloads come from a vectorized
xorshift64* stream (one substream per page, seeded by splitmix64 of the
dataset seed and page index), so any page regenerates independently and
the whole dataset is reproducible from (seed, size) alone.

Query kernels are simplified analogs that preserve the operator mix of
their namesakes (scan, filter, hash join against a derived dimension,
group-by aggregate, transactional updates, word counting); exact benchmark
compliance is out of scope.  Every kernel is a pure function of the record
array, so its answer is identical under every execution mode.

Per-record host compute costs and per-record DRAM writeback rates are
calibration constants, not measured values; they are chosen so the
read-heavy workloads stay load-bound on the reference geometry and the
write-ratio ordering of the suite (analytics queries, then transactional
kernels, then wordcount) is preserved.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

U = np.uint64
GOLDEN = 0x9E3779B97F4A7C15
XS_MULT = 0x2545F4914F6CDD1D

RECORD_BYTES = 64
RECORD_DTYPE = np.dtype([
    ("id", "<u4"), ("key", "<u4"), ("qty", "<i4"), ("price", "<i8"),
    ("discount", "<u1"), ("flag", "<u1"), ("mode", "<u1"), ("cat", "<u1"),
    ("date", "<u2"), ("fill", "<u2"), ("text", "S36"),
])
assert RECORD_DTYPE.itemsize == RECORD_BYTES


def vec_splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + U(GOLDEN)) & U(0xFFFFFFFFFFFFFFFF)
    x = (x ^ (x >> U(30))) * U(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> U(27))) * U(0x94D049BB133111EB)
    return x ^ (x >> U(31))


def page_payloads(seed: int, n_pages: int, page_size: int) -> np.ndarray:
    """(n_pages, page_size) uint8 payloads from per-page xorshift64* streams."""
    words = page_size // 8
    idx = np.arange(1, n_pages + 1, dtype=np.uint64)
    state = vec_splitmix64(U(seed & 0xFFFFFFFFFFFFFFFF) ^ (idx * U(GOLDEN)))
    state[state == 0] = U(GOLDEN)
    out = np.empty((words, n_pages), dtype=np.uint64)
    for w in range(words):
        state = state ^ (state >> U(12))
        state = state ^ (state << U(25))
        state = state ^ (state >> U(27))
        out[w] = state * U(XS_MULT)
    flat = np.ascontiguousarray(out.T).view(np.uint8)
    return flat.reshape(n_pages, page_size)


@dataclass
class Dataset:
    seed: int
    page_size: int
    pages: np.ndarray           # (n_pages, page_size) uint8
    checksum: int

    @property
    def n_pages(self) -> int:
        return self.pages.shape[0]

    @property
    def total_bytes(self) -> int:
        return self.pages.size

    @property
    def n_records(self) -> int:
        return self.total_bytes // RECORD_BYTES

    def page_bytes(self, index: int) -> bytes:
        return self.pages[index].tobytes()

    def records(self) -> np.ndarray:
        return self.pages.reshape(-1).view(RECORD_DTYPE)


def generate(seed: int, total_bytes: int, page_size: int = 4096) -> Dataset:
    if total_bytes < page_size:
        raise ValueError("dataset must span at least one page")
    n_pages = total_bytes // page_size
    pages = page_payloads(seed, n_pages, page_size)
    checksum = zlib.crc32(pages.tobytes())
    return Dataset(seed, page_size, pages, checksum)


def records_from_pages(page_blobs: list[bytes]) -> np.ndarray:
    buf = np.frombuffer(b"".join(page_blobs), dtype=np.uint8)
    return buf.view(RECORD_DTYPE)


def encode_answer(answer: dict[str, int]) -> bytes:
    return "".join(f"{k}={answer[k]}\n" for k in sorted(answer)).encode()


def decode_answer(raw: bytes) -> dict[str, int]:
    out = {}
    for line in raw.decode().splitlines():
        k, v = line.split("=", 1)
        out[k] = int(v)
    return out


# -- query kernels -----------------------------------------------------------------

def _u64sum(arr) -> int:
    return int(np.sum(arr.astype(np.uint64), dtype=np.uint64))


def k_arithmetic(recs: np.ndarray) -> dict[str, int]:
    qty = recs["qty"] % 100
    price = recs["price"] % 100_000
    disc = recs["discount"] % 100
    return {"sum": _u64sum(qty * price + disc) & 0xFFFFFFFFFFFFFFFF}


def k_aggregate(recs: np.ndarray) -> dict[str, int]:
    price = recs["price"] % 100_000
    total = _u64sum(price)
    count = len(recs)
    return {"sum_price": total, "count": count, "avg_x1m": total * 1_000_000 // count}


def k_filter(recs: np.ndarray) -> dict[str, int]:
    sel = (recs["qty"] % 100 < 13) & (recs["flag"] % 4 == 1)
    ids = recs["id"][sel]
    return {"matches": int(sel.sum()), "id_checksum": _u64sum(ids)}


def k_q1(recs: np.ndarray) -> dict[str, int]:
    out: dict[str, int] = {}
    flag = recs["flag"] % 3
    status = recs["mode"] % 2
    qty = recs["qty"] % 100
    price = recs["price"] % 100_000
    disc = recs["discount"] % 100
    disc_price = price * (100 - disc)
    for f in range(3):
        for s in range(2):
            sel = (flag == f) & (status == s)
            out[f"g{f}{s}_qty"] = _u64sum(qty[sel])
            out[f"g{f}{s}_price"] = _u64sum(price[sel])
            out[f"g{f}{s}_disc"] = _u64sum(disc_price[sel])
            out[f"g{f}{s}_count"] = int(sel.sum())
    return out


def k_q3(recs: np.ndarray) -> dict[str, int]:
    dim = vec_splitmix64(recs["key"].astype(np.uint64))
    segment = dim & U(7)
    order_date = (dim >> U(3)) % U(4096)
    sel = (segment == U(2)) & (order_date < U(2048)) & (recs["date"] % 4096 >= 2048)
    price = recs["price"][sel] % 100_000
    disc = recs["discount"][sel] % 100
    return {"rows": int(sel.sum()), "revenue": _u64sum(price * (100 - disc))}


def k_q12(recs: np.ndarray) -> dict[str, int]:
    ship = recs["mode"] % 7
    sel = ((ship == 1) | (ship == 4)) & (recs["date"] % 4096 < 1024)
    urgent = recs["flag"][sel] % 3 == 0
    return {"high": int(urgent.sum()), "low": int((~urgent).sum())}


def k_q14(recs: np.ndarray) -> dict[str, int]:
    sel = recs["date"] % 4096 // 342 == 5    # one-month-style window
    price = recs["price"][sel] % 100_000
    disc = recs["discount"][sel] % 100
    promo = recs["cat"][sel] % 5 == 0
    revenue = price * (100 - disc)
    return {"promo_revenue": _u64sum(revenue[promo]),
            "total_revenue": _u64sum(revenue)}


def k_q19(recs: np.ndarray) -> dict[str, int]:
    qty = recs["qty"] % 50
    cat = recs["cat"] % 3
    sel = ((cat == 0) & (qty >= 1) & (qty <= 11) |
           (cat == 1) & (qty >= 10) & (qty <= 20) |
           (cat == 2) & (qty >= 20) & (qty <= 30))
    price = recs["price"][sel] % 100_000
    disc = recs["discount"][sel] % 100
    return {"rows": int(sel.sum()), "revenue": _u64sum(price * (100 - disc))}


N_ACCOUNTS = 65_536


def k_tpcb(recs: np.ndarray) -> dict[str, int]:
    acct = recs["key"] % N_ACCOUNTS
    delta = recs["qty"] % 100 - 50
    balances = np.bincount(acct, weights=delta, minlength=N_ACCOUNTS).astype(np.int64)
    weights = np.arange(1, N_ACCOUNTS + 1, dtype=np.int64)
    return {"balance_checksum": int(np.dot(balances, weights)) & 0xFFFFFFFFFFFFFFFF,
            "total_delta": int(delta.sum())}


def k_tpcc(recs: np.ndarray) -> dict[str, int]:
    warehouse = recs["key"] % 64
    district = recs["key"] % 640
    amount = recs["price"] % 10_000
    w_tot = np.bincount(warehouse, weights=amount, minlength=64).astype(np.int64)
    d_cnt = np.bincount(district, minlength=640)
    orders = int((recs["flag"] % 8 == 0).sum())
    return {"warehouse_checksum": _u64sum(w_tot * np.arange(1, 65, dtype=np.int64)),
            "busiest_district": int(d_cnt.argmax()),
            "new_orders": orders}


VOCAB = 4096


def k_wordcount(recs: np.ndarray) -> dict[str, int]:
    words = np.frombuffer(recs["text"].tobytes(), dtype="<u2") % VOCAB
    counts = np.bincount(words, minlength=VOCAB)
    weights = np.arange(1, VOCAB + 1, dtype=np.uint64)
    return {"distinct": int((counts > 0).sum()),
            "max_count": int(counts.max()),
            "checksum": int(np.dot(counts.astype(np.uint64), weights))
            & 0xFFFFFFFFFFFFFFFF}


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    kernel: Callable[[np.ndarray], dict[str, int]]
    host_record_ns: float         # host per-record compute cost (calibration)
    writes_per_million: int       # DRAM line writebacks per million records
    intermediate_pages: int       # writable working-set pages (4 KiB each)
    scan_dominated: bool


WORKLOADS: dict[str, WorkloadSpec] = {spec.name: spec for spec in [
    WorkloadSpec("arithmetic", k_arithmetic, 3.2, 202, 16, True),
    WorkloadSpec("aggregate", k_aggregate, 3.4, 208, 16, True),
    WorkloadSpec("filter", k_filter, 3.0, 171, 16, True),
    WorkloadSpec("tpch_q1", k_q1, 4.0, 6, 16, True),
    WorkloadSpec("tpch_q3", k_q3, 22.0, 3992, 256, False),
    WorkloadSpec("tpch_q12", k_q12, 4.2, 30, 64, True),
    WorkloadSpec("tpch_q14", k_q14, 4.2, 4, 64, True),
    WorkloadSpec("tpch_q19", k_q19, 28.0, 1, 64, False),
    WorkloadSpec("tpcb", k_tpcb, 38.0, 57_914, 1024, False),
    WorkloadSpec("tpcc", k_tpcc, 48.0, 110_463, 1024, False),
    WorkloadSpec("wordcount", k_wordcount, 26.0, 5_910_256, 512, False),
]}

READ_INTENSIVE = tuple(name for name, s in WORKLOADS.items() if s.scan_dominated)
WRITE_HEAVY = ("tpcb", "tpcc", "wordcount")


def cumulative_writes(spec: WorkloadSpec, records: int) -> int:
    """Total DRAM line writebacks after `records` records, exact integer."""
    return records * spec.writes_per_million // 1_000_000


def expected_write_ratio(spec: WorkloadSpec) -> float:
    """writes / (reads + writes) with one line-read per record plus one
    read-modify-write read per writeback."""
    w = spec.writes_per_million / 1e6
    return w / (1 + 2 * w)
