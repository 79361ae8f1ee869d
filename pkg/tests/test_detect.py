import json
import random

import pytest

from helpers import clean_capture, field_capture, hy_run, mh_run, ms_capture, round_robin_capture
from sctpstego import capture, detect, fields, framing, hybrid, multihome, packing, simnet, wire
from sctpstego.bits import BitString
from sctpstego.core import ChannelId
from sctpstego.detect import ANOMALY, VIOLATION, ScanConfig, calibrate, normalize, scan
from sctpstego.errors import DecodeFailure

HDR = wire.CommonHeader(1, 2, 3)


def violations(findings):
    return [f for f in findings if f.severity == VIOLATION]


@pytest.mark.parametrize("block", range(4))
def test_clean_simulations_have_no_violations(block):
    for seed in range(block * 25, block * 25 + 25):
        assert violations(scan(clean_capture(seed))) == []


@pytest.mark.parametrize("channel", ["P1", "VP5", "D1", "D2", "VP4"])
def test_deterministic_channels_flag_every_carrier(channel):
    pkts, carriers = field_capture(channel, random.Random(channel).randbytes(40), seed=3)
    assert carriers
    flagged = {f.index for f in scan(pkts) if f.severity == VIOLATION and f.channel == ChannelId(channel)}
    assert set(carriers) <= flagged


def test_a1_rule_needs_key_count():
    pkt = wire.SctpPacket(HDR, (wire.AuthChunk(9, 1, bytes(20)),))
    assert violations(scan([pkt])) == []
    assert [f.channel for f in scan([pkt], config=ScanConfig(key_count=8))] == [ChannelId.A1]


def test_ppid_allowlist():
    pkt = wire.SctpPacket(HDR, (wire.DataChunk(1, 0, 0, 46, b"x"),))
    assert violations(scan([pkt]))
    assert not violations(scan([pkt], config=ScanConfig(ppid_allowlist=frozenset({0, 46}))))


def test_strict_i2_is_optional():
    pkt = wire.SctpPacket(HDR, (wire.InitChunk(1, 1000, 5, 5, 1),))
    assert not violations(scan([pkt]))
    assert violations(scan([pkt], config=ScanConfig(strict_i2=True)))


def test_best_effort_heuristics():
    pkt = wire.SctpPacket(HDR, (wire.InitChunk(int.from_bytes(b"HIDE", "big"), 1000, 1, 1, 1),))
    found = scan([pkt])
    assert [(f.channel, f.severity) for f in found] == [(ChannelId.I1, ANOMALY)]
    assert scan([pkt], config=ScanConfig(best_effort=False)) == []


def test_undecodable_capture():
    with pytest.raises(DecodeFailure):
        scan([b"\0" * 20])


def ms_scores(records, base):
    return detect.stat_scores(detect.capture_stats(detect._items(records)), base.stats)["MS"]


def test_ms_anomaly_against_calibration():
    base = calibrate([round_robin_capture(seed) for seed in range(20)])
    payload = BitString.random(200, random.Random(1))
    covert = capture.records_from_events(ms_capture(payload, 4, 2, seed=1).events)
    found = [f for f in scan(covert, base) if f.channel is ChannelId.MS]
    assert found and found[0].score > base.thresholds["MS"]
    second_clean = round_robin_capture(999)
    assert not [f for f in scan(second_clean, base) if f.channel is ChannelId.MS]
    assert ms_scores(second_clean, base) <= base.thresholds["MS"]


def test_hy_anomaly_from_forward_tsn_rate():
    base = calibrate([capture.records_from_events(hy_run("HY1", b"", seed=s, duty=1.0).events) for s in range(5)])
    covert = capture.records_from_events(hy_run("HY1", bytes(200), per=10, duty=0.2).events)
    hy = [f for f in scan(covert, base) if f.explanation.startswith("HY ")]
    assert hy and hy[0].channel is ChannelId.HY1


def test_baseline_json_round_trip():
    base = calibrate([round_robin_capture(s) for s in range(3)])
    again = detect.BaselineStats.from_json(base.to_json())
    assert again.stats == base.stats and again.thresholds == base.thresholds


def test_findings_exports():
    pkts, _ = field_capture("P1", b"hello")
    found = scan(pkts)
    lines = detect.findings_jsonl(found).splitlines()
    assert json.loads(lines[0])["channel"] == "P1"
    rows = detect.findings_csv(found).splitlines()
    assert rows[0] == "channel,count,max_score"
    assert rows[1].startswith(f"P1,{len(found)},")


# -- warden ---------------------------------------------------------------------------

def records(pkts):
    return [capture.Record.of(i, p) for i, p in enumerate(pkts)]


@pytest.mark.parametrize("channel", ["P1", "VP5"])
def test_zero_padding_kills_padding_channels(channel):
    pkts, _ = field_capture(channel, b"secret")
    assert framing.extract_framed(channel, pkts) == BitString.from_bytes(b"secret")
    out, log = normalize(records(pkts), ["zero-padding"])
    assert log
    bits = fields.extract_packets(channel, capture.packets_of(out))
    assert set(bits) == {"0"}
    assert not violations(scan(out))


def test_zero_ssn_kills_d1():
    pkts, _ = field_capture("D1", b"secret")
    out, _ = normalize(records(pkts), ["zero-ssn"])
    assert set(fields.extract_packets("D1", capture.packets_of(out))) == {"0"}


def cc_records(bits):
    cfg = packing.PackingConfig(1400, 200)
    chunks = [wire.DataChunk(100 + i, 0, i, 0, bytes(100)) for i in range(4 * len(bits))]
    return cfg, records(packing.cc_packets(packing.cc_embed(cfg, chunks, framing.frame(bits)), HDR))


def test_split_packets_kills_cc():
    bits = BitString.random(64, random.Random(2))
    cfg, recs = cc_records(bits)
    assert framing.unframe(packing.cc_extract(cfg, capture.packets_of(recs))) == bits
    out, log = normalize(recs, ["split-packets"])
    assert log
    after = packing.cc_extract(cfg, capture.packets_of(out))
    assert set(after) == {"0"}
    assert framing.unframe(after) == ""



def test_reorder_kills_co():
    bits = BitString.random(40, random.Random(4))
    recs, pos, rng = [], 0, random.Random(4)
    while pos < len(bits):
        ctrl = [wire.SackChunk(5, 1000)] + [wire.HeartbeatChunk((wire.VarParam(wire.HEARTBEAT_INFO,
                                                                               rng.randbytes(8)),)) for _ in range(4)]
        pkt, used = packing.co_embed(wire.SctpPacket(HDR, tuple(ctrl)), bits[pos:])
        pos += used
        recs.append(capture.Record.of(len(recs), pkt))
    got = BitString("".join(packing.co_extract(r.packet) for r in recs))
    assert got[:len(bits)] == bits
    out, _ = normalize(recs, ["reorder-chunks"])
    after = "".join(packing.co_extract(r.packet) for r in out)
    assert set(after) == {"0"}


def test_drop_acked_kills_hy1_not_hy2():
    secret = bytes(range(48))
    for variant, survives in (("HY1", False), ("HY2", True)):
        assoc = hy_run(variant, secret, per=16, message_bytes=216)
        recs = capture.records_from_events(assoc.events)
        assert hybrid.hy_extract(simnet.replay(recs, assoc.cfg, True), variant) == secret
        out, log = normalize(recs, ["drop-acked"])
        got = hybrid.hy_extract(simnet.replay(out, assoc.cfg, True), variant)
        assert (got == secret) is survives
        if not survives:
            assert got == b"" and log


def test_warden_preserves_overt_messages():
    assoc = hy_run("HY1", bytes(48), per=16)
    recs = capture.records_from_events(assoc.events)
    out, _ = normalize(recs, ["drop-acked", "zero-padding", "zero-ssn", "reorder-chunks", "split-packets"])
    before = simnet.replay(recs, assoc.cfg).delivered
    after = simnet.replay(out, assoc.cfg).delivered
    assert [m.data for m in after] == [m.data for m in before]


def event_bits(recs, code):
    """TSN -> code bits of the first off-primary DATA arrival, None when undecodable."""
    out = {}
    for r in recs:
        if r.path == code.primary or r.dst not in (code.receiver.primary, *code.receiver.alternates):
            continue
        for c in r.packet.data_chunks():
            if c.tsn in out:
                continue
            try:
                out[c.tsn] = code.bits_for(r.path)
            except Exception:
                out[c.tsn] = None
    return out


def test_randomize_paths_corrupts_mh():
    bits = BitString.random(400, random.Random(9))
    assoc, code, chan = mh_run(bits, seed=9)
    recs = capture.records_from_events(assoc.events)
    before = event_bits(recs, code)
    assert len(before) == 200
    out, log = normalize(recs, ["randomize-paths"], seed=9, rate=0.5)
    after = event_bits(out, code)
    corrupted = sum(after.get(t) != b for t, b in before.items())
    assert corrupted / len(before) > 0.5
    assert multihome.mh_extract(code, multihome.observed_retransmissions(recs, code), 400) == bits


def test_normalize_rejects_unknown_policy():
    with pytest.raises(ValueError):
        normalize([], ["bogus"])
