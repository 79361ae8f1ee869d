"""Steganalysis: per-packet rules, capture-level statistics, and an offline warden.

Rule findings (``VIOLATION``) are decided from one packet.  Statistical
findings (``ANOMALY``) compare a capture's histograms against a baseline built
from clean traffic and fire when a divergence score exceeds its calibrated
threshold.  :func:`normalize` rewrites a capture to destroy channels.
"""

from __future__ import annotations

import csv
import io
import ipaddress
import json
import random
import string
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from . import wire
from .capture import Record, packets_of
from .core import ChannelId
from .errors import DecodeFailure, WireError
from .packing import canonical_key
from .simnet import SimEvent
from .wire import SctpPacket

VIOLATION = "VIOLATION"
ANOMALY = "ANOMALY"

STATISTICS = ("I2", "S2", "CC", "MS", "HY", "MH")
_STAT_CHANNEL = {"I2": ChannelId.I2, "S2": ChannelId.S2, "CC": ChannelId.CC, "MS": ChannelId.MS,
                 "HY": ChannelId.HY1, "MH": ChannelId.MH}


@dataclass(frozen=True)
class Finding:
    channel: ChannelId
    index: int | None  # packet index, None for capture-wide findings
    severity: str
    explanation: str
    score: float | None = None

    def to_json(self) -> str:
        return json.dumps({"channel": str(self.channel), "index": self.index, "severity": self.severity,
                           "explanation": self.explanation, "score": self.score}, sort_keys=True)


@dataclass(frozen=True)
class ScanConfig:
    ppid_allowlist: frozenset = frozenset({0})
    key_count: int | None = None
    strict_i2: bool = False
    best_effort: bool = True


# -- input normalization ----------------------------------------------------------

def _items(capture) -> list[tuple[SctpPacket, tuple | None]]:
    capture = list(capture)
    if all(isinstance(x, Record) for x in capture):
        return list(zip(packets_of(capture), [r.path for r in capture]))
    out = []
    for x in capture:
        if isinstance(x, SimEvent):
            if x.kind == "DELIVER":
                out.append((x.packet, x.path))
        elif isinstance(x, SctpPacket):
            out.append((x, None))
        elif isinstance(x, (bytes, bytearray)):
            try:
                out.append((wire.decode_packet(bytes(x)), None))
            except WireError as exc:
                raise DecodeFailure(str(exc)) from exc
        else:
            raise DecodeFailure(f"cannot scan {type(x).__name__}")
    return out


# -- per-packet rules -------------------------------------------------------------

def _rules(i: int, pkt: SctpPacket, cfg: ScanConfig) -> list[Finding]:
    out = []
    for c in pkt.chunks:
        if isinstance(c, wire.PadChunk) and any(c.padding):
            out.append(Finding(ChannelId.P1, i, VIOLATION, "PAD chunk padding is not all zero"))
        elif isinstance(c, wire.DataChunk):
            if c.unordered and c.ssn != 0:
                out.append(Finding(ChannelId.D1, i, VIOLATION, f"unordered DATA TSN {c.tsn} has SSN {c.ssn}"))
            if c.ppid not in cfg.ppid_allowlist:
                out.append(Finding(ChannelId.D2, i, VIOLATION, f"PPID {c.ppid} is not allowed"))
        elif isinstance(c, wire.InitChunk):
            for p in c.params:
                if p.param_type == wire.PADDING and any(p.value):
                    out.append(Finding(ChannelId.VP5, i, VIOLATION, "Padding parameter is not all zero"))
            n = c.inbound_streams
            if cfg.strict_i2 and n & (n - 1):
                out.append(Finding(ChannelId.I2, i, VIOLATION, f"inbound streams {n} is not a power of two"))
        elif isinstance(c, wire.AsconfChunk):
            for k, req in enumerate(c.requests):
                cid = wire.correlation_id(req)
                if cid != (c.serial + k) & 0xFFFFFFFF:
                    out.append(Finding(ChannelId.VP4, i, VIOLATION,
                                       f"correlation ID {cid} breaks the sequence from serial {c.serial}"))
                    break
        elif isinstance(c, wire.AuthChunk) and cfg.key_count is not None and c.key_id >= cfg.key_count:
            out.append(Finding(ChannelId.A1, i, VIOLATION, f"key id {c.key_id} >= {cfg.key_count} keys"))
    return out


_PRINTABLE = set(string.printable.encode()) - set(b"\t\n\r\x0b\x0c")


def _texty(data: bytes) -> bool:
    data = data.rstrip(b"\x00")
    return len(data) >= 4 and all(b in _PRINTABLE for b in data)


def _implausible(value: bytes) -> bool:
    a = ipaddress.ip_address(value)
    return a.is_loopback or a.is_multicast or a.is_unspecified or a.is_reserved or a.is_link_local or (
        a.version == 4 and int(a) == 0xFFFFFFFF)


def _heuristics(i: int, pkt: SctpPacket) -> list[Finding]:
    out = []
    for c in pkt.chunks:
        if isinstance(c, wire.InitChunk):
            if _texty(c.initiate_tag.to_bytes(4, "big")):
                out.append(Finding(ChannelId.I1, i, ANOMALY, "initiate tag is printable text (best effort)", 1.0))
            for p in c.params:
                if p.param_type == wire.RANDOM and _texty(p.value):
                    out.append(Finding(ChannelId.VP3, i, ANOMALY, "Random parameter is printable text (best effort)",
                                       1.0))
                if p.param_type in (wire.IPV4_ADDRESS, wire.IPV6_ADDRESS) and _implausible(p.value):
                    out.append(Finding(ChannelId.VP1, i, ANOMALY, "address parameter is not a usable unicast "
                                                                  "address (best effort)", 1.0))
        elif isinstance(c, wire.HeartbeatChunk):
            for p in c.params:
                if p.param_type == wire.HEARTBEAT_INFO and _texty(p.value[8:]):
                    out.append(Finding(ChannelId.VP2, i, ANOMALY, "heartbeat info is printable text (best effort)",
                                       1.0))
    return out


def _s1_heuristic(items) -> list[Finding]:
    windows = [c.a_rwnd for pkt, _ in items for c in pkt.chunks if isinstance(c, wire.SackChunk)]
    if len({w >> 4 for w in windows}) == 1 and len({w & 15 for w in windows}) > 1:
        return [Finding(ChannelId.S1, None, ANOMALY, "a_rwnd varies only in its low bits (best effort)", 1.0)]
    return []


# -- statistics ---------------------------------------------------------------------

def capture_stats(items) -> dict[str, Counter]:
    """Histograms used by the statistical detectors."""
    st = {name: Counter() for name in ("inbound", "dups", "chunks", "bigrams", "ft", "paths")}
    stream_of = {}
    for pkt, path in items:
        data = [c for c in pkt.chunks if isinstance(c, wire.DataChunk)]
        for c in pkt.chunks:
            if isinstance(c, wire.InitChunk):
                st["inbound"][c.inbound_streams] += 1
            elif isinstance(c, wire.SackChunk):
                st["dups"]["sacks"] += 1
                st["dups"]["dups"] += len(c.dup_tsns)
            elif isinstance(c, wire.ForwardTsnChunk):
                st["ft"]["ft"] += 1
        if data:
            st["chunks"][len(data)] += 1
            st["ft"]["data"] += len(data)
            st["paths"][_path_key(path)] += 1
            for c in data:
                stream_of.setdefault(c.tsn, c.stream)
    order = [stream_of[t] for t in sorted(stream_of)]
    st["bigrams"].update(zip(order, order[1:]))
    return st


def _path_key(path) -> str:
    return "-" if path is None else f"{path[0]}>{path[1]}"


def js_divergence(p: Counter, q: Counter) -> float:
    """Jensen-Shannon divergence in bits between two histograms."""
    keys = sorted(set(p) | set(q), key=repr)
    a = np.array([p.get(k, 0) for k in keys], dtype=float)
    b = np.array([q.get(k, 0) for k in keys], dtype=float)
    if a.sum() == 0 or b.sum() == 0:
        return 0.0
    a /= a.sum()
    b /= b.sum()
    m = (a + b) / 2

    def kl(x):
        mask = x > 0
        return float(np.sum(x[mask] * np.log2(x[mask] / m[mask])))

    return 0.5 * kl(a) + 0.5 * kl(b)


def _rate(c: Counter, num: str, den: str) -> float | None:
    return c[num] / c[den] if c[den] else None


def stat_scores(st: dict, base: dict) -> dict[str, float]:
    """Score per statistic; statistics without samples in the capture are omitted."""
    out = {}
    if st["inbound"] and base["inbound"]:
        ref = np.log2(np.array(sorted(base["inbound"]), dtype=float))
        out["I2"] = max(float(np.min(np.abs(ref - np.log2(v)))) for v in st["inbound"])
    r, rb = _rate(st["dups"], "dups", "sacks"), _rate(base["dups"], "dups", "sacks")
    if r is not None:
        out["S2"] = r - (rb or 0.0)
    if st["chunks"]:
        out["CC"] = js_divergence(st["chunks"], base["chunks"])
    if st["bigrams"]:
        out["MS"] = js_divergence(st["bigrams"], base["bigrams"])
    r, rb = _rate(st["ft"], "ft", "data"), _rate(base["ft"], "ft", "data")
    if r is not None:
        out["HY"] = r - (rb or 0.0)
    if st["paths"]:
        out["MH"] = js_divergence(st["paths"], base["paths"])
    return out


@dataclass
class BaselineStats:
    stats: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def enc(c):
            return [[list(k) if isinstance(k, tuple) else k, v] for k, v in sorted(c.items(), key=repr)]

        return json.dumps({"stats": {k: enc(v) for k, v in self.stats.items()}, "thresholds": self.thresholds,
                           "samples": self.samples}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BaselineStats":
        d = json.loads(text)
        stats = {k: Counter({tuple(a) if isinstance(a, list) else a: v for a, v in pairs})
                 for k, pairs in d["stats"].items()}
        return cls(stats, d["thresholds"], d["samples"])


def _merge(stats_list) -> dict:
    out = {}
    for st in stats_list:
        for k, c in st.items():
            out.setdefault(k, Counter()).update(c)
    return out


def build_baseline(clean_captures) -> BaselineStats:
    per = [capture_stats(_items(c)) for c in clean_captures]
    merged = _merge(per)
    return BaselineStats(merged, {}, {k: sum(v.values()) for k, v in merged.items()})


def calibrate(clean_captures, percentile: float = 99.0) -> BaselineStats:
    """Baseline from clean captures; thresholds at the given percentile of
    leave-one-out clean scores."""
    per = [capture_stats(_items(c)) for c in clean_captures]
    if not per:
        raise ValueError("no clean captures")
    merged = _merge(per)
    scores = {name: [] for name in STATISTICS}
    for i, st in enumerate(per):
        rest = _merge(per[:i] + per[i + 1:]) if len(per) > 1 else merged
        for name, s in stat_scores(st, rest).items():
            scores[name].append(s)
    thresholds = {name: float(np.percentile(v, percentile)) for name, v in scores.items() if v}
    return BaselineStats(merged, thresholds, {k: sum(v.values()) for k, v in merged.items()})


def scan(capture, baseline: BaselineStats | None = None, config: ScanConfig | None = None) -> list[Finding]:
    cfg = config or ScanConfig()
    items = _items(capture)
    findings = []
    for i, (pkt, _) in enumerate(items):
        findings.extend(_rules(i, pkt, cfg))
        if cfg.best_effort:
            findings.extend(_heuristics(i, pkt))
    if cfg.best_effort:
        findings.extend(_s1_heuristic(items))
    if baseline is not None:
        scores = stat_scores(capture_stats(items), baseline.stats)
        for name in STATISTICS:
            if name in scores and name in baseline.thresholds and scores[name] > baseline.thresholds[name]:
                findings.append(Finding(_STAT_CHANNEL[name], None, ANOMALY,
                                        f"{name} score {scores[name]:.4f} above {baseline.thresholds[name]:.4f}",
                                        scores[name]))
    return findings


def findings_jsonl(findings) -> str:
    return "".join(f.to_json() + "\n" for f in findings)


def findings_csv(findings) -> str:
    rows = {}
    for f in findings:
        n, best = rows.get(str(f.channel), (0, None))
        if f.score is not None:
            best = f.score if best is None else max(best, f.score)
        rows[str(f.channel)] = (n + 1, best)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channel", "count", "max_score"])
    for ch in sorted(rows):
        n, best = rows[ch]
        w.writerow([ch, n, "" if best is None else f"{best:.6f}"])
    return buf.getvalue()


# -- warden -----------------------------------------------------------------------

POLICIES = ("zero-padding", "zero-ssn", "reorder-chunks", "split-packets", "drop-acked", "randomize-paths")


@dataclass(frozen=True)
class Rewrite:
    index: int
    policy: str
    detail: str

    def __str__(self) -> str:
        return f"{self.index}\t{self.policy}\t{self.detail}"


def _zero_padding(pkt: SctpPacket):
    chunks, changed = [], False
    for c in pkt.chunks:
        if isinstance(c, wire.PadChunk) and any(c.padding):
            c, changed = wire.PadChunk(bytes(len(c.padding))), True
        elif isinstance(c, wire.InitChunk) and any(p.param_type == wire.PADDING and any(p.value) for p in c.params):
            params = tuple(wire.VarParam(p.param_type, bytes(len(p.value))) if p.param_type == wire.PADDING else p
                           for p in c.params)
            c, changed = replace(c, params=params), True
        chunks.append(c)
    return pkt.with_chunks(chunks), changed


def _zero_ssn(pkt: SctpPacket):
    chunks, changed = [], False
    for c in pkt.chunks:
        if isinstance(c, wire.DataChunk) and c.unordered and c.ssn:
            c, changed = replace(c, ssn=0), True
        chunks.append(c)
    return pkt.with_chunks(chunks), changed


def _reorder(pkt: SctpPacket):
    control = sorted((c for c in pkt.chunks if c.is_control), key=canonical_key)
    data = sorted((c for c in pkt.chunks if not c.is_control), key=lambda c: c.tsn)
    new = pkt.with_chunks(control + data)
    return new, new.chunks != pkt.chunks


def normalize(capture, policies, seed: int = 0, rate: float = 0.5) -> tuple[list[Record], list[Rewrite]]:
    """Rewrite a capture under the given warden policies.

    Returns the new records (checksums recomputed) and a log of every change.
    """
    policies = set(policies)
    unknown = policies - set(POLICIES)
    if unknown:
        raise ValueError(f"unknown policies: {sorted(unknown)}")
    records = list(capture)
    if not all(isinstance(r, Record) for r in records):
        raise DecodeFailure("normalize needs SCTS records")
    pkts = packets_of(records)
    rng = random.Random(f"{seed}:warden")
    log: list[Rewrite] = []

    data_paths = Counter(r.path for r, p in zip(records, pkts) if p.data_chunks())
    # the INIT travels the primary path; active MH may never send DATA there
    init_path = next((r.path for r, p in zip(records, pkts) if p.chunks and type(p.chunks[0]) is wire.InitChunk),
                     None)
    primary = init_path or (data_paths.most_common(1)[0][0] if data_paths else None)
    src_pool = sorted({r.src for r, p in zip(records, pkts) if p.data_chunks()}, key=lambda a: (a.version, int(a)))
    dst_pool = sorted({r.dst for r, p in zip(records, pkts) if p.data_chunks()}, key=lambda a: (a.version, int(a)))
    cum_ack: dict[tuple, int] = {}

    out = []
    for i, (rec, pkt) in enumerate(zip(records, pkts)):
        src, dst = rec.src, rec.dst
        if "zero-padding" in policies:
            pkt, changed = _zero_padding(pkt)
            if changed:
                log.append(Rewrite(i, "zero-padding", "padding bytes set to zero"))
        if "zero-ssn" in policies:
            pkt, changed = _zero_ssn(pkt)
            if changed:
                log.append(Rewrite(i, "zero-ssn", "unordered SSN set to zero"))
        if "reorder-chunks" in policies:
            pkt, changed = _reorder(pkt)
            if changed:
                log.append(Rewrite(i, "reorder-chunks", "chunks put in canonical order"))
        for c in pkt.chunks:
            if isinstance(c, wire.SackChunk):
                key = (dst, src)  # acknowledges data flowing the other way
                cum_ack[key] = max(cum_ack.get(key, c.cum_tsn), c.cum_tsn)
        if "drop-acked" in policies and pkt.data_chunks():
            cum = cum_ack.get((src, dst))
            if cum is not None:
                keep = [c for c in pkt.chunks if not (isinstance(c, wire.DataChunk) and c.tsn <= cum)]
                for c in pkt.chunks:
                    if isinstance(c, wire.DataChunk) and c.tsn <= cum:
                        log.append(Rewrite(i, "drop-acked", f"dropped DATA TSN {c.tsn} (cum ack {cum})"))
                if len(keep) != len(pkt.chunks):
                    if not keep:
                        continue
                    pkt = pkt.with_chunks(keep)
        if "randomize-paths" in policies and pkt.data_chunks() and primary and (src, dst) != primary:
            new_src, new_dst = src, dst
            if len(src_pool) > 1 and rng.random() < rate:
                new_src = rng.choice([a for a in src_pool if a != src])
            if len(dst_pool) > 1 and rng.random() < rate:
                new_dst = rng.choice([a for a in dst_pool if a != dst])
            if (new_src, new_dst) != (src, dst):
                log.append(Rewrite(i, "randomize-paths", f"{src}>{dst} became {new_src}>{new_dst}"))
                src, dst = new_src, new_dst
        if "split-packets" in policies and len(pkt.chunks) > 1:
            log.append(Rewrite(i, "split-packets", f"split into {len(pkt.chunks)} packets"))
            for c in pkt.chunks:
                out.append(Record(rec.tick, src, dst, wire.encode_packet(pkt.with_chunks([c]))))
            continue
        out.append(Record(rec.tick, src, dst, wire.encode_packet(pkt)))
    return out, log

