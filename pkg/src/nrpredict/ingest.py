"""Trace ingestion: canonical CSV, srsRAN gNB console tables, grid alignment
and per-target feature projection."""
from __future__ import annotations

import csv
import io
import math
import os
import re
from collections import defaultdict
from dataclasses import dataclass, field, fields
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyTrace, MalformedHeader, RowParseError, SchemaMismatch, SuffixError

SCHEMA_VERSION = "1"
CSV_COLUMNS = (
    "timestamp_ms", "ue_id", "cqi", "mcs", "tti_count", "brate_mbps",
    "ok_count", "nok_count", "bler", "dl_thr_mbps",
)
_INT_COLUMNS = {"timestamp_ms", "ue_id", "cqi", "mcs", "tti_count", "ok_count", "nok_count"}

SOURCES = ("csv", "srsran_console", "synthetic", "stream")
TARGET_KINDS = ("throughput", "bler")
FEATURES = {
    "throughput": ("cqi", "mcs", "tti", "bler"),
    "bler": ("cqi", "mcs", "tti", "brate"),
}
BLER_COUNT_TOL = 1e-6


@dataclass(frozen=True, slots=True)
class MetricSample:
    """One reporting-interval snapshot of downlink link state for one UE.

    ``brate_mbps`` is the scheduled PHY bit rate; ``dl_thr_mbps`` is the
    delivered throughput used as the regression label.
    """

    timestamp_ms: int
    ue_id: int
    cqi: int
    mcs: int
    tti_count: int
    brate_mbps: float
    ok_count: int
    nok_count: int
    bler: float
    dl_thr_mbps: float

    def problems(self) -> list[str]:
        """Return every violated range invariant (empty when valid)."""
        out = []
        if self.ue_id < 0:
            out.append(f"ue_id={self.ue_id} is negative")
        if not 0 <= self.cqi <= 15:
            out.append(f"cqi={self.cqi} outside 0..15")
        if not 0 <= self.mcs <= 28:
            out.append(f"mcs={self.mcs} outside 0..28")
        for name in ("tti_count", "ok_count", "nok_count"):
            if getattr(self, name) < 0:
                out.append(f"{name}={getattr(self, name)} is negative")
        for name in ("brate_mbps", "bler", "dl_thr_mbps"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name} is not finite")
        if self.brate_mbps < 0:
            out.append(f"brate_mbps={self.brate_mbps} is negative")
        if self.dl_thr_mbps < 0:
            out.append(f"dl_thr_mbps={self.dl_thr_mbps} is negative")
        if not 0.0 <= self.bler <= 1.0:
            out.append(f"bler={self.bler} outside [0, 1]")
        total = self.ok_count + self.nok_count
        if total > 0 and abs(self.bler - self.nok_count / total) > BLER_COUNT_TOL:
            out.append(f"bler={self.bler} disagrees with nok/(ok+nok)={self.nok_count / total}")
        return out


@dataclass(frozen=True)
class Dataset:
    """Immutable ordered sample collection.

    Samples are ordered by ``(timestamp_ms, ue_id)`` so timestamps strictly
    increase within each UE. ``rejected`` holds the row errors encountered
    while parsing, if any.
    """

    samples: tuple[MetricSample, ...]
    source: str = "csv"
    schema_version: str = SCHEMA_VERSION
    rejected: tuple[RowParseError, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def column(self, name: str) -> np.ndarray:
        dtype = np.int64 if name in _INT_COLUMNS else np.float64
        return np.fromiter((getattr(s, name) for s in self.samples), dtype=dtype, count=len(self.samples))

    def ue_ids(self) -> list[int]:
        return sorted({s.ue_id for s in self.samples})


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray
    feature_names: tuple[str, ...]
    target: np.ndarray
    target_kind: str
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        target = np.asarray(self.target, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != target.shape[0]:
            raise SchemaMismatch(f"rows {rows.shape} and target {target.shape} disagree")
        if rows.shape[1] != len(self.feature_names):
            raise SchemaMismatch("feature_names length differs from column count")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(target))):
            raise ValueError("feature matrix contains NaN or infinite entries")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        ts = None if self.timestamps is None else self.timestamps[idx]
        return FeatureMatrix(self.rows[idx], self.feature_names, self.target[idx], self.target_kind, ts)

    def with_rows(self, rows: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(rows, self.feature_names, self.target, self.target_kind, self.timestamps)


# ---------------------------------------------------------------------------
# canonical CSV


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), False
    if isinstance(source, io.TextIOBase):
        return source, False
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data), False


def _convert(name: str, raw: str):
    raw = raw.strip()
    if name in _INT_COLUMNS:
        return int(raw)
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError(f"{name} is not finite")
    return value


def sample_from_record(record: dict, row: int) -> MetricSample:
    """Build and validate one sample from a column->string mapping."""
    values = {}
    for name in CSV_COLUMNS:
        raw = record.get(name)
        if raw is None or raw.strip() == "":
            raise RowParseError(row, f"missing value for {name}")
        try:
            values[name] = _convert(name, raw)
        except ValueError:
            raise RowParseError(row, f"non-numeric {name}={raw!r}") from None
    sample = MetricSample(**values)
    bad = sample.problems()
    if bad:
        raise RowParseError(row, "; ".join(bad))
    return sample


def _check_header(header: Sequence[str] | None) -> list[str]:
    if header is None:
        raise MalformedHeader("trace has no header row")
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise MalformedHeader(f"missing required column(s): {', '.join(missing)}")
    return header


def order_samples(samples: Iterable[MetricSample]) -> tuple[list[MetricSample], list[MetricSample]]:
    """Sort by (timestamp, ue_id); split off repeated (ue, timestamp) pairs."""
    ordered = sorted(samples, key=lambda s: (s.timestamp_ms, s.ue_id))
    kept, dupes = [], []
    seen = set()
    for s in ordered:
        key = (s.ue_id, s.timestamp_ms)
        (dupes if key in seen else kept).append(s)
        seen.add(key)
    return kept, dupes


def parse_csv_trace(source, strict: bool = False) -> Dataset:
    """Parse a canonical CSV trace.

    Rows violating a type invariant or holding non-numeric fields are skipped
    and recorded in ``Dataset.rejected`` (or raised immediately with
    ``strict=True``). Raises ``MalformedHeader`` when a required column is
    absent and ``EmptyTrace`` when no valid row remains.
    """
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = _check_header(next(reader, None))
        samples, rejected, rows_of = [], [], {}
        for row_no, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            try:
                if len(cells) != len(header):
                    raise RowParseError(row_no, f"expected {len(header)} fields, got {len(cells)}")
                s = sample_from_record(dict(zip(header, cells)), row_no)
            except RowParseError as err:
                if strict:
                    raise
                rejected.append(err)
                continue
            samples.append(s)
            rows_of[id(s)] = row_no
    finally:
        if owned:
            fh.close()
    kept, dupes = order_samples(samples)
    for s in dupes:
        err = RowParseError(rows_of[id(s)], f"duplicate timestamp {s.timestamp_ms} for ue {s.ue_id}")
        if strict:
            raise err
        rejected.append(err)
    if not kept:
        raise EmptyTrace("trace contains no valid rows")
    rejected.sort(key=lambda e: e.row)
    return Dataset(tuple(kept), "csv", SCHEMA_VERSION, tuple(rejected))


def format_row(s: MetricSample) -> list[str]:
    return [str(v) if isinstance(v, int) else repr(float(v)) for v in (getattr(s, c) for c in CSV_COLUMNS)]


def write_csv(samples: Iterable[MetricSample], dest) -> None:
    """Write samples in the canonical schema; reals use shortest round-trip repr."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_csv(samples, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in samples:
        writer.writerow(format_row(s))


# ---------------------------------------------------------------------------
# srsRAN console metrics

_SUFFIX = {"": 1.0, "k": 1e3, "K": 1e3, "M": 1e6, "G": 1e9}
_RATE_RE = re.compile(r"^([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)([A-Za-z]*)$")
# default DL block layout of the gNB console table: cqi ri mcs brate ok nok (%) dl_bs
_DEFAULT_DL = ("cqi", "ri", "mcs", "brate", "ok", "nok", "(%)", "dl_bs")
_DEFAULT_ID = ("pci", "rnti")
_KV_ALIASES = {
    "dl_cqi": "cqi", "dl_mcs": "mcs", "dl_brate": "brate", "dl_ok": "ok", "dl_nok": "nok",
}


def parse_rate(token: str) -> float:
    """Convert a console bit-rate token such as ``18M`` or ``950k`` to bit/s."""
    m = _RATE_RE.match(token.strip())
    if not m:
        raise SuffixError(f"cannot parse rate {token!r}")
    value, suffix = m.groups()
    if suffix not in _SUFFIX:
        raise SuffixError(f"unknown magnitude suffix {suffix!r} in {token!r}")
    return float(value) * _SUFFIX[suffix]


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _is_data_token(tok: str) -> bool:
    # numbers, rates with a magnitude suffix, percentages and n/a placeholders
    if tok.lower() == "n/a" or _RATE_RE.match(tok):
        return True
    return tok.endswith("%") and _is_number(tok[:-1])


class ConsoleParser:
    """Streaming adapter for srsRAN gNB console metrics.

    Two line styles are understood: the column table printed by the gNB
    (``pci rnti | cqi ri mcs brate ok nok (%) dl_bs | ...``), whose DL block
    layout is learned from the most recent header line, and ``key=value``
    lines (``rnti=4601 cqi=15 mcs=27 brate=18M ok=100 nok=0``). Lines that are
    neither (separators, banners, headers) produce nothing. Unknown columns are
    ignored.

    Console output has no timestamps; each UE's k-th report is stamped
    ``start_ms + k * interval_ms``. ``tti_count`` is estimated as ``ok + nok``.
    """

    def __init__(self, interval_ms: int = 1000, start_ms: int = 0):
        self.interval_ms = interval_ms
        self.start_ms = start_ms
        self.id_cols: tuple[str, ...] = _DEFAULT_ID
        self.dl_cols: tuple[str, ...] = _DEFAULT_DL
        self._ue_index: dict[str, int] = {}
        self._count: dict[int, int] = defaultdict(int)

    def _ue(self, key: str) -> int:
        if key not in self._ue_index:
            self._ue_index[key] = len(self._ue_index)
        return self._ue_index[key]

    def _emit(self, ue_key: str, cqi: str, mcs: str, brate: str, ok: str, nok: str) -> MetricSample | None:
        ue = self._ue(ue_key)
        ts = self.start_ms + self._count[ue] * self.interval_ms
        self._count[ue] += 1
        if not all(_is_number(t) for t in (cqi, mcs, ok, nok)):
            return None  # n/a fields: UE not scheduled in this period, but the period elapsed
        rate_mbps = parse_rate(brate) / 1e6
        ok_i, nok_i = int(float(ok)), int(float(nok))
        total = ok_i + nok_i
        return MetricSample(
            timestamp_ms=ts, ue_id=ue, cqi=int(float(cqi)), mcs=int(float(mcs)),
            tti_count=total, brate_mbps=rate_mbps, ok_count=ok_i, nok_count=nok_i,
            bler=nok_i / total if total > 0 else 0.0, dl_thr_mbps=rate_mbps,
        )

    def feed(self, line: str) -> MetricSample | None:
        text = line.strip()
        if not text:
            return None
        if "=" in text:
            kv = {}
            for tok in text.split():
                if "=" in tok:
                    k, _, v = tok.partition("=")
                    k = k.strip().lower()
                    kv[_KV_ALIASES.get(k, k)] = v.strip()
            if not {"cqi", "mcs", "brate", "ok", "nok"} <= kv.keys():
                return None
            ue_key = kv.get("rnti", kv.get("ue", "0"))
            return self._emit(ue_key, kv["cqi"], kv["mcs"], kv["brate"], kv["ok"], kv["nok"])
        if "|" not in text:
            return None
        blocks = [b.split() for b in text.split("|")]
        if len(blocks) < 2:
            return None
        head, dl = blocks[0], blocks[1]
        if "cqi" in dl and "mcs" in dl:
            self.id_cols = tuple(head)
            self.dl_cols = tuple(dl)
            return None
        if not head or not dl or not all(_is_data_token(t) for t in dl):
            return None
        if len(dl) < len(self.dl_cols) or len(head) < len(self.id_cols):
            return None
        col = dict(zip(self.dl_cols, dl))
        ids = dict(zip(self.id_cols, head))
        if not {"cqi", "mcs", "brate", "ok", "nok"} <= col.keys():
            return None
        ue_key = ids.get("rnti", head[-1])
        return self._emit(ue_key, col["cqi"], col["mcs"], col["brate"], col["ok"], col["nok"])


def parse_srsran_console(lines: Iterable[str], interval_ms: int = 1000, start_ms: int = 0) -> Iterator[MetricSample]:
    """Yield one ``MetricSample`` per UE metrics line of a gNB console log."""
    parser = ConsoleParser(interval_ms, start_ms)
    for line in lines:
        s = parser.feed(line)
        if s is not None:
            yield s


# ---------------------------------------------------------------------------
# alignment and projection


def snap(ts: int, interval_ms: int) -> int:
    """Nearest grid point k*interval_ms; midpoints round up."""
    return (2 * ts + interval_ms) // (2 * interval_ms) * interval_ms


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _merge(group: list[MetricSample], ts: int) -> MetricSample:
    if len(group) == 1:
        s = group[0]
        return MetricSample(ts, s.ue_id, s.cqi, s.mcs, s.tti_count, s.brate_mbps,
                            s.ok_count, s.nok_count, s.bler, s.dl_thr_mbps)
    k = len(group)
    ok = sum(s.ok_count for s in group)
    nok = sum(s.nok_count for s in group)
    bler = nok / (ok + nok) if ok + nok > 0 else sum(s.bler for s in group) / k
    return MetricSample(
        timestamp_ms=ts,
        ue_id=group[0].ue_id,
        cqi=_half_up(sum(s.cqi for s in group) / k),
        mcs=_half_up(sum(s.mcs for s in group) / k),
        tti_count=_half_up(sum(s.tti_count for s in group) / k),
        brate_mbps=sum(s.brate_mbps for s in group) / k,
        ok_count=ok,
        nok_count=nok,
        bler=bler,
        dl_thr_mbps=sum(s.dl_thr_mbps for s in group) / k,
    )


def align_timestamps(samples: Iterable[MetricSample], interval_ms: int) -> Dataset:
    """Snap samples to a ``k * interval_ms`` grid, merging per-UE collisions.

    Merged samples average cqi, mcs, tti_count (rounded half-up), brate and
    throughput, sum the ok/nok counters and recompute bler from the sums.
    """
    if interval_ms <= 0:
        raise ValueError("interval_ms must be positive")
    source = samples.source if isinstance(samples, Dataset) else "stream"
    groups: dict[tuple[int, int], list[MetricSample]] = defaultdict(list)
    for s in samples:
        groups[(snap(s.timestamp_ms, interval_ms), s.ue_id)].append(s)
    merged = [_merge(g, ts) for (ts, _), g in groups.items()]
    merged.sort(key=lambda s: (s.timestamp_ms, s.ue_id))
    return Dataset(tuple(merged), source)


def derive_features(dataset: Dataset | Sequence[MetricSample], target_kind: str) -> FeatureMatrix:
    """Project samples onto the feature vector for ``target_kind``.

    throughput: ``[cqi, mcs, tti, bler]`` -> dl_thr_mbps;
    bler: ``[cqi, mcs, tti, brate]`` -> bler.
    """
    if target_kind not in TARGET_KINDS:
        raise ValueError(f"unknown target kind {target_kind!r}")
    samples = dataset.samples if isinstance(dataset, Dataset) else tuple(dataset)
    if not samples:
        raise EmptyTrace("cannot derive features from an empty dataset")
    n = len(samples)
    rows = np.empty((n, 4), dtype=np.float64)
    target = np.empty(n, dtype=np.float64)
    ts = np.empty(n, dtype=np.int64)
    for i, s in enumerate(samples):
        last = s.bler if target_kind == "throughput" else s.brate_mbps
        rows[i] = (s.cqi, s.mcs, s.tti_count, last)
        target[i] = s.dl_thr_mbps if target_kind == "throughput" else s.bler
        ts[i] = s.timestamp_ms
    return FeatureMatrix(rows, FEATURES[target_kind], target, target_kind, ts)


def sample_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(MetricSample))
