"""Hash tables for every group of a partition plan, persisted in 4 KiB pages.

I/O is simulated rather than measured. A bucket probe charges one directory
page plus ``ceil(entries * 8 / 4096)`` data pages for each contiguous run of
level-1 buckets it reads. Checking a candidate charges the pages holding its
coordinates (4 bytes each), once per point per query.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import Relaxation
from .errors import ConfigError, DimensionMismatch, IndexFormatError
from .lsh import LpHashFunction, sample_hash_function
from .metric import Dataset, WeightVector
from .params import GroupParams, SolverContext, VectorParams
from .partition import PartitionPlan

PAGE_SIZE = 4096
ENTRY_BYTES = 8
COORD_BYTES = 4
INDEX_MAGIC = b"WLSHIDX1"
INDEX_VERSION = 1

FLAG_RELAX = 1
FLAG_REDUCE = 2

_HEADER = struct.Struct("<8sI32sIdIIIIIIiiQddIII")
_GROUP = struct.Struct("<IIdII")
_MEMBER = struct.Struct("<IIdddd")
_TABLE = struct.Struct("<II")
_FUNC = struct.Struct("<Idd")
_DIR = struct.Struct("<II")


@dataclass
class IoCounter:
    bucket_blocks_read: int = 0
    candidate_blocks_read: int = 0

    @property
    def total(self) -> int:
        return self.bucket_blocks_read + self.candidate_blocks_read


def run_cost(entries: int) -> int:
    """Pages charged for one contiguous run of ``entries`` bucket entries."""
    return 1 + math.ceil(entries * ENTRY_BYTES / PAGE_SIZE)


def point_blocks(d: int) -> int:
    return math.ceil(COORD_BYTES * d / PAGE_SIZE)


@dataclass
class HashTable:
    """One hash function and its buckets as (bucket, point id) entries sorted
    by bucket then id."""

    function: LpHashFunction
    entry_buckets: np.ndarray
    entry_ids: np.ndarray

    @classmethod
    def build(cls, function: LpHashFunction, X: np.ndarray) -> "HashTable":
        buckets = function.hash_many(X)
        ids = np.arange(X.shape[0], dtype=np.int64)
        order = np.lexsort((ids, buckets))
        return cls(function, buckets[order], ids[order])

    @property
    def n_entries(self) -> int:
        return self.entry_ids.size

    def directory(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct bucket ids and their entry counts."""
        ids, counts = np.unique(self.entry_buckets, return_counts=True)
        return ids, counts

    @property
    def buckets(self) -> dict[int, list[int]]:
        keys, counts = self.directory()
        out = {}
        start = 0
        for key, cnt in zip(keys.tolist(), counts.tolist()):
            out[key] = self.entry_ids[start:start + cnt].tolist()
            start += cnt
        return out

    def span(self, first_bucket: int, last_bucket: int) -> tuple[int, int]:
        """Entry index range covering level-1 buckets ``first..last`` inclusive."""
        lo = int(np.searchsorted(self.entry_buckets, first_bucket, side="left"))
        hi = int(np.searchsorted(self.entry_buckets, last_bucket, side="right"))
        return lo, hi


@dataclass
class IndexSettings:
    p: float
    c: int
    tau: int
    seed: int
    relaxation: Relaxation | None = None
    reduction: bool = False
    epsilon: float = 0.01
    gamma: float = 0.01


@dataclass
class WlshIndex:
    settings: IndexSettings
    weights: list[WeightVector]
    value_range: tuple[int, int]
    n: int
    d: int
    dataset_digest: str
    plan: PartitionPlan
    tables: list[list[HashTable]]
    _lookup: dict[int, int] = field(default_factory=dict, repr=False)
    _by_id: dict[int, WeightVector] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._lookup = dict(self.plan.assignment)
        self._by_id = {wv.id: wv for wv in self.weights}

    @property
    def table_count(self) -> int:
        return sum(len(ts) for ts in self.tables)

    def group_index(self, wid: int) -> int:
        try:
            return self._lookup[wid]
        except KeyError:
            raise ConfigError(f"unknown weight vector id {wid}") from None

    def weight_vector(self, wid: int) -> WeightVector:
        try:
            return self._by_id[wid]
        except KeyError:
            raise ConfigError(f"unknown weight vector id {wid}") from None

    def table(self, group: int, table: int) -> HashTable:
        try:
            return self.tables[group][table]
        except IndexError:
            raise ConfigError(f"unknown table ({group}, {table})") from None

    def check_dataset(self, dataset: Dataset) -> None:
        if dataset.digest != self.dataset_digest:
            raise IndexFormatError("dataset does not match the one the index was built from")

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(serialize_index(self))


def table_seed(seed: int, group: int, table: int) -> int:
    ss = np.random.SeedSequence([seed, group, table])
    return int(ss.generate_state(1, np.uint64)[0])


def build_index(dataset: Dataset, plan: PartitionPlan, seed: int) -> WlshIndex:
    """Sample ``beta_group`` functions per group from the base family and hash
    every point into each table."""
    ctx = plan.context
    if ctx is None:
        raise ConfigError("plan carries no solver context")
    d = ctx.weights[0].d
    if dataset.d != d:
        raise DimensionMismatch(f"dataset has d={dataset.d}, weight vectors have d={d}")
    if dataset.n != ctx.n:
        raise ConfigError(f"plan computed for n={ctx.n}, dataset has n={dataset.n}")
    X = dataset.coords.astype(np.float64)
    tables: list[list[HashTable]] = []
    for gi, g in enumerate(plan.groups):
        base = ctx.by_id[g.base]
        group_tables = []
        for ti in range(g.beta_group):
            f = sample_hash_function(ctx.p, d, g.w_bucket, g.b_range_levels, ctx.c,
                                     base, table_seed(seed, gi, ti))
            group_tables.append(HashTable.build(f, X))
        tables.append(group_tables)
    settings = IndexSettings(ctx.p, ctx.c, plan.tau, seed, ctx.relaxation, ctx.reduction,
                             ctx.epsilon, ctx.gamma)
    return WlshIndex(settings, list(ctx.weights), dataset.value_range, dataset.n, d,
                     dataset.digest, plan, tables)


def read_bucket(index: WlshIndex, table_ref: tuple[int, int], level: int,
                level_bucket_id: int, counter: IoCounter) -> np.ndarray:
    """Point ids of the level-``level`` bucket, i.e. ``level`` consecutive
    level-1 buckets. Charges one run."""
    if level < 1:
        raise ConfigError(f"level must be >= 1, got {level}")
    t = index.table(*table_ref)
    lo, hi = t.span(level_bucket_id * level, level_bucket_id * level + level - 1)
    counter.bucket_blocks_read += run_cost(hi - lo)
    return t.entry_ids[lo:hi]


class BucketCursor:
    """Tracks the exposed part of one table around a query's bucket so that
    widening the level reads only the newly exposed level-1 buckets."""

    __slots__ = ("table", "bucket", "first", "last", "lo", "hi")

    def __init__(self, table: HashTable, query_bucket: int):
        self.table = table
        self.bucket = query_bucket
        self.first = None
        self.last = None
        self.lo = 0
        self.hi = 0

    def widen(self, level: int, counter: IoCounter) -> np.ndarray:
        lb = self.bucket // level
        first, last = lb * level, lb * level + level - 1
        t = self.table
        if self.first is None:
            self.lo, self.hi = t.span(first, last)
            self.first, self.last = first, last
            counter.bucket_blocks_read += run_cost(self.hi - self.lo)
            return t.entry_ids[self.lo:self.hi]
        parts = []
        if first < self.first:
            lo, _ = t.span(first, self.first - 1)
            counter.bucket_blocks_read += run_cost(self.lo - lo)
            parts.append(t.entry_ids[lo:self.lo])
            self.lo, self.first = lo, first
        if last > self.last:
            _, hi = t.span(self.last + 1, last)
            counter.bucket_blocks_read += run_cost(hi - self.hi)
            parts.append(t.entry_ids[self.hi:hi])
            self.hi, self.last = hi, last
        if not parts:
            return t.entry_ids[0:0]
        return parts[0] if len(parts) == 1 else np.concatenate(parts)


class PointFetcher:
    """Per-query candidate reader; each distinct point is charged once."""

    def __init__(self, dataset: Dataset, counter: IoCounter):
        self.dataset = dataset
        self.counter = counter
        self.blocks = point_blocks(dataset.d)
        self.seen: set[int] = set()

    def fetch(self, pid: int) -> np.ndarray:
        if pid not in self.seen:
            self.seen.add(pid)
            self.counter.candidate_blocks_read += self.blocks
        return self.dataset.coords[pid]


def fetch_point(dataset: Dataset, pid: int, counter: IoCounter,
                cache: set[int] | None = None) -> np.ndarray:
    if cache is None or pid not in cache:
        counter.candidate_blocks_read += point_blocks(dataset.d)
        if cache is not None:
            cache.add(pid)
    return dataset.coords[pid]


# ---------------------------------------------------------------------------
# serialisation


def _pad(buf: io.BytesIO) -> None:
    rem = buf.tell() % PAGE_SIZE
    if rem:
        buf.write(b"\0" * (PAGE_SIZE - rem))


def serialize_index(index: WlshIndex) -> bytes:
    s = index.settings
    flags = (FLAG_RELAX if s.relaxation else 0) | (FLAG_REDUCE if s.reduction else 0)
    v, vp = (s.relaxation.v, s.relaxation.v_prime) if s.relaxation else (0, 0)
    buf = io.BytesIO()
    lo, hi = index.value_range
    buf.write(_HEADER.pack(
        INDEX_MAGIC, INDEX_VERSION, bytes.fromhex(index.dataset_digest), s.c, s.p, s.tau,
        flags, v, vp, index.n, index.d, lo, hi, s.seed, s.epsilon, s.gamma,
        len(index.weights), len(index.plan.groups), PAGE_SIZE,
    ))
    for wv in index.weights:
        buf.write(struct.pack("<I", wv.id))
        buf.write(wv.weights.astype("<f8").tobytes())
    for g in index.plan.groups:
        buf.write(_GROUP.pack(g.base, g.b_range_levels, g.w_bucket, g.beta_group, len(g.members)))
        for m, vpar in g.members:
            buf.write(_MEMBER.pack(m, vpar.beta, vpar.mu, vpar.mu_reduced, vpar.x_up, vpar.y_down))
    _pad(buf)
    for gi, group_tables in enumerate(index.tables):
        for ti, t in enumerate(group_tables):
            f = t.function
            buf.write(_TABLE.pack(gi, ti))
            buf.write(_FUNC.pack(f.d, f.w, f.b_star))
            buf.write(f.a.astype("<f8").tobytes())
            keys, counts = t.directory()
            buf.write(_DIR.pack(keys.size, t.n_entries))
            buf.write(keys.astype("<i8").tobytes())
            buf.write(counts.astype("<u4").tobytes())
            buf.write(t.entry_ids.astype("<u4").tobytes())
            _pad(buf)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def unpack(self, st: struct.Struct):
        if self.pos + st.size > len(self.data):
            raise IndexFormatError("index file is truncated")
        out = st.unpack_from(self.data, self.pos)
        self.pos += st.size
        return out

    def array(self, dtype: str, count: int) -> np.ndarray:
        nbytes = np.dtype(dtype).itemsize * count
        if self.pos + nbytes > len(self.data):
            raise IndexFormatError("index file is truncated")
        out = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.pos)
        self.pos += nbytes
        return out

    def align(self):
        rem = self.pos % PAGE_SIZE
        if rem:
            self.pos += PAGE_SIZE - rem


def deserialize_index(data: bytes) -> WlshIndex:
    r = _Reader(data)
    (magic, version, digest, c, p, tau, flags, v, vp, n, d, lo, hi, seed, eps, gamma,
     n_weights, n_groups, page_size) = r.unpack(_HEADER)
    if magic != INDEX_MAGIC:
        raise IndexFormatError("not a WLSH index file (bad magic)")
    if version != INDEX_VERSION:
        raise IndexFormatError(f"unsupported index version {version}")
    if page_size != PAGE_SIZE:
        raise IndexFormatError(f"unsupported page size {page_size}")
    weights = []
    for _ in range(n_weights):
        (wid,) = r.unpack(struct.Struct("<I"))
        weights.append(WeightVector(wid, r.array("<f8", d).astype(np.float64)))
    relaxation = Relaxation(v, vp) if flags & FLAG_RELAX else None
    reduction = bool(flags & FLAG_REDUCE)
    groups = []
    assignment = {}
    for gi in range(n_groups):
        base, levels, w_bucket, beta_group, n_members = r.unpack(_GROUP)
        members = []
        for _ in range(n_members):
            m, beta, mu, mu_red, x_up, y_down = r.unpack(_MEMBER)
            members.append((m, VectorParams(beta, mu, mu_red, x_up, y_down)))
            assignment[m] = gi
        groups.append(GroupParams(base, members, beta_group, w_bucket, levels))
    r.align()
    ctx = SolverContext(weights, (lo, hi), n, p, c, relaxation, reduction, eps, gamma)
    plan = PartitionPlan(groups, assignment, tau, ctx)
    by_id = {wv.id: wv for wv in weights}
    tables = []
    for gi, g in enumerate(groups):
        group_tables = []
        for ti in range(g.beta_group):
            gi_read, ti_read = r.unpack(_TABLE)
            if (gi_read, ti_read) != (gi, ti):
                raise IndexFormatError(f"table section out of order at ({gi}, {ti})")
            fd, fw, b_star = r.unpack(_FUNC)
            if fd != d:
                raise IndexFormatError("hash function dimensionality mismatch")
            a = r.array("<f8", fd).astype(np.float64)
            a.setflags(write=False)
            f = LpHashFunction(a, b_star, fw, by_id[g.base].weights)
            n_buckets, n_entries = r.unpack(_DIR)
            keys = r.array("<i8", n_buckets).astype(np.int64)
            counts = r.array("<u4", n_buckets).astype(np.int64)
            ids = r.array("<u4", n_entries).astype(np.int64)
            if int(counts.sum()) != n_entries:
                raise IndexFormatError("bucket directory does not match entry count")
            group_tables.append(HashTable(f, np.repeat(keys, counts), ids))
            r.align()
        tables.append(group_tables)
    settings = IndexSettings(p, c, tau, seed, relaxation, reduction, eps, gamma)
    return WlshIndex(settings, weights, (lo, hi), n, d, digest.hex(), plan, tables)


def load_index(path: str | Path, dataset: Dataset | None = None) -> WlshIndex:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IndexFormatError(f"cannot read index {path}: {exc}") from exc
    index = deserialize_index(data)
    if dataset is not None:
        index.check_dataset(dataset)
    return index
