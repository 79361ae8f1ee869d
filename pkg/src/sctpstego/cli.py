"""Command-line interface: ``stego capacity|craft|extract|simulate|detect|experiment``."""

from __future__ import annotations

import argparse
import dataclasses
import math
import random
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import capture, detect, experiment, framing, hybrid, multihome, packing, simnet, streams, wire
from .bits import BitString
from .core import FIELD_CHANNELS, ChannelId, capacity_table
from .errors import StegoError

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- config files ---------------------------------------------------------------

def parse_config(text: str) -> dict:
    """Parse a TOML scenario file into a flat dict; dashes in keys become underscores."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config: {exc}") from None
    return {k.replace("-", "_"): v for k, v in data.items()}


def _convert(key: str, value, default):
    bad = UsageError(f"{key}: expected {type(default).__name__}, got {value!r}")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise bad
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad
        return value
    if isinstance(default, float):
        if isinstance(value, dict):  # per-path table keyed "src>dst"
            try:
                return {tuple(k.split(">")): float(v) for k, v in value.items()}
            except (TypeError, ValueError):
                raise bad from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad
        return float(value)
    if isinstance(default, frozenset):
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise bad
        return frozenset(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise bad
        return tuple(value)
    return value


PROFILE_KEYS = {"messages", "message_size", "ordered", "ticks"}


def config_from(values: dict[str, str], seed: int) -> tuple[simnet.AssocConfig, simnet.TrafficProfile, int | None]:
    base = simnet.AssocConfig()
    known = {f.name for f in dataclasses.fields(simnet.AssocConfig)}
    unknown = set(values) - known - PROFILE_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in values.items():
        if key in known:
            default = getattr(base, key)
            if key == "loss":
                default = 0.0
            kwargs[key] = _convert(key, value, default)
    kwargs["seed"] = seed
    try:
        cfg = simnet.AssocConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(f"config: {exc}") from None
    profile = simnet.TrafficProfile(_convert("messages", values.get("messages", 40), 0),
                                    _convert("message_size", values.get("message_size", 100), 0),
                                    _convert("ordered", values.get("ordered", True), True))
    ticks = _convert("ticks", values["ticks"], 0) if "ticks" in values else None
    return cfg, profile, ticks


# -- payload helpers ----------------------------------------------------------------

def _payload_bytes(args) -> bytes:
    if args.payload_hex is not None:
        try:
            return bytes.fromhex(args.payload_hex)
        except ValueError:
            raise UsageError("--payload-hex is not valid hex") from None
    if args.payload_file is not None:
        return Path(args.payload_file).read_bytes()
    raise UsageError("give --payload-hex or --payload-file")


def _emit_payload(args, data: bytes) -> None:
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        print(data.hex().upper())


def _addresses(prefix: str, alternates: int) -> tuple[str, ...]:
    return tuple(f"{prefix}.{i + 1}" for i in range(alternates + 1))


def _mh_config(args, loss: float = 0.0) -> simnet.AssocConfig:
    return simnet.AssocConfig(stream_count=1, sender_addrs=_addresses("10.0.0", args.sender_addrs),
                              receiver_addrs=_addresses("10.0.1", args.receiver_addrs), seed=args.seed,
                              loss=loss)


def _hy_config(args) -> simnet.AssocConfig:
    return simnet.AssocConfig(stream_count=1, partial_reliability=True, seed=args.seed,
                              fragmentation_threshold=args.fragment)


# -- craft ---------------------------------------------------------------------------

def craft(args) -> list[capture.Record]:
    method = ChannelId(args.method)
    data = _payload_bytes(args)
    bits = BitString.from_bytes(data)
    rng = random.Random(args.seed)
    hdr = wire.CommonHeader(5000, 5001, rng.getrandbits(32) or 1)
    if method in FIELD_CHANNELS:
        pkts = framing.craft_field(method, bits, rng, padding_len=args.padding_len, key_count=args.key_count,
                                   s1_bits=args.s1_bits)
        return [capture.Record.of(i, p) for i, p in enumerate(pkts)]
    if method is ChannelId.MS:
        ids = streams.frame_stream_ids(bits, args.streams, args.group)
        tsn = rng.randrange(1, 1 << 24)
        return [capture.Record.of(i, wire.SctpPacket(hdr, (wire.DataChunk(tsn + i, s, i, 0, rng.randbytes(32)),)))
                for i, s in enumerate(ids)]
    if method is ChannelId.CC:
        cfg = packing.PackingConfig(args.mtu_data, args.chunk_size)
        framed = framing.frame(bits)
        need = sum(framed[i:].take(cfg.bits_per_packet)[0].to_int() + 1
                   for i in range(0, len(framed), cfg.bits_per_packet))
        tsn = rng.randrange(1, 1 << 24)
        body = max(args.chunk_size - 16, 0)
        chunks = [wire.DataChunk(tsn + i, 0, i, 0, rng.randbytes(body)) for i in range(need)]
        plan = packing.cc_embed(cfg, chunks, framed)
        return [capture.Record.of(i, p) for i, p in enumerate(packing.cc_packets(plan, hdr))]
    if method is ChannelId.CO:
        framed = framing.frame(bits)
        out, pos, tsn = [], 0, rng.randrange(1, 1 << 24)
        while pos < len(framed):
            ctrl = [wire.SackChunk(tsn + len(out), 65536)]
            ctrl += [wire.HeartbeatChunk((wire.VarParam(wire.HEARTBEAT_INFO, rng.randbytes(16)),))
                     for _ in range(args.chunks - 1)]
            pkt = wire.SctpPacket(hdr, tuple(ctrl) + (wire.DataChunk(tsn + len(out), 0, len(out), 0,
                                                                      rng.randbytes(32)),))
            pkt, used = packing.co_embed(pkt, framed[pos:], honor_constraints=not args.loose)
            pos += used
            out.append(capture.Record.of(len(out), pkt))
        return out
    if method in (ChannelId.HY1, ChannelId.HY2):
        cfg = _hy_config(args)
        assoc = simnet.establish(cfg)
        per = args.payload_bytes if method is ChannelId.HY1 else args.message_bytes - args.fragment * (
            (args.message_bytes - 1) // args.fragment)
        events = max(1, -(-len(data) // per))
        period = math.floor(1 / args.duty)
        simnet.TrafficProfile(events * period + 1, args.message_size).load(assoc)
        if method is ChannelId.HY1:
            hybrid.hy1_schedule(assoc, data, args.duty, args.payload_bytes)
        else:
            hybrid.hy2_schedule(assoc, data, args.duty, args.message_bytes)
        assoc.run_until_idle(settle=10)
        return capture.records_from_events(assoc.events)
    if method is ChannelId.MH:
        cfg = _mh_config(args, args.loss)
        assoc = simnet.establish(cfg)
        code = multihome.PathCode.from_config(cfg)
        framed = framing.frame(bits)
        chan = multihome.MultihomeSender(code, framed, args.mode).attach(assoc)
        need = chan.events_needed if args.mode == "active" else args.messages
        simnet.TrafficProfile(max(need, 1) + 1, args.message_size).load(assoc)
        assoc.run_until_idle(settle=10)
        if not chan.done:
            raise StegoError("too few retransmissions to carry the payload; raise --messages")
        return capture.records_from_events(assoc.events)
    raise UsageError(f"cannot craft {method}")


def extract(args, records) -> bytes:
    method = ChannelId(args.method)
    if method in FIELD_CHANNELS:
        pkts = capture.packets_of(records)
        bits = framing.extract_framed(method, pkts, key_count=args.key_count, s1_bits=args.s1_bits)
        return bits.to_bytes()
    if method is ChannelId.MS:
        pkts = capture.packets_of(records)
        seen = {}
        for p in pkts:
            for c in p.data_chunks():
                seen.setdefault(c.tsn, c.stream)
        bits = streams.msd_receive([seen[t] for t in sorted(seen)], args.streams)
        if bits is None:
            raise StegoError("no start sequence in capture")
        return bits.to_bytes()
    if method is ChannelId.CC:
        cfg = packing.PackingConfig(args.mtu_data, args.chunk_size)
        pkts = [p for p in capture.packets_of(records) if p.data_chunks() or
                any(isinstance(c, wire.PadChunk) for c in p.chunks)]
        return framing.unframe(packing.cc_extract(cfg, pkts)).to_bytes()
    if method is ChannelId.CO:
        bits = BitString()
        for p in capture.packets_of(records):
            bits += packing.co_extract(p, honor_constraints=not args.loose)
        return framing.unframe(bits).to_bytes()
    if method in (ChannelId.HY1, ChannelId.HY2):
        rx = simnet.replay(records, _hy_config(args), covert_aware=True)
        return hybrid.hy_extract(rx, method)
    if method is ChannelId.MH:
        cfg = _mh_config(args)
        code = multihome.PathCode.from_config(cfg)
        paths = multihome.observed_retransmissions(records, code)
        return framing.unframe(multihome.mh_extract(code, paths)).to_bytes()
    raise UsageError(f"cannot extract {method}")


# -- commands ----------------------------------------------------------------------

def cmd_capacity(args) -> int:
    print("channel\tbits_per_unit\tunit\tformula")
    for e in capacity_table():
        b = e.bits_per_unit
        b = f"{b[0]}-{b[1]}" if isinstance(b, tuple) else b
        print(f"{e.channel}\t{b}\t{e.unit}\t{e.formula}")
    return EXIT_OK


def cmd_craft(args) -> int:
    records = craft(args)
    capture.write_capture(args.out, records)
    print(f"wrote {len(records)} packets to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_extract(args) -> int:
    _emit_payload(args, extract(args, capture.read_capture(args.capture)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    values = parse_config(Path(args.config).read_text()) if args.config else {}
    cfg, profile, ticks = config_from(values, args.seed)
    assoc = simnet.establish(cfg)
    profile.load(assoc)
    if ticks is None:
        assoc.run_until_idle(settle=10)
    else:
        assoc.run(ticks)
    capture.write_capture(args.out, capture.records_from_events(assoc.events))
    if args.events:
        Path(args.events).write_text("".join(ev.to_json() + "\n" for ev in assoc.events))
    return EXIT_OK


def _scan_config(args) -> detect.ScanConfig:
    allow = frozenset(int(x) for x in args.ppid_allow.split(",") if x.strip()) | {0}
    return detect.ScanConfig(allow, args.key_count, args.strict_i2)


def cmd_detect_scan(args) -> int:
    records = capture.read_capture(args.capture)
    baseline = detect.BaselineStats.from_json(Path(args.baseline).read_text()) if args.baseline else None
    findings = detect.scan(records, baseline, _scan_config(args))
    text = detect.findings_csv(findings) if args.format == "csv" else detect.findings_jsonl(findings)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_detect_calibrate(args) -> int:
    if args.captures:
        caps = [capture.read_capture(p) for p in args.captures]
    else:
        values = parse_config(Path(args.config).read_text()) if args.config else {}
        caps = []
        for i in range(args.runs):
            cfg, profile, _ = config_from(values, args.seed + i)
            assoc = simnet.simulate(cfg, profile)
            caps.append(capture.records_from_events(assoc.events))
    baseline = detect.calibrate(caps, args.percentile)
    Path(args.out).write_text(baseline.to_json())
    return EXIT_OK


def cmd_detect_normalize(args) -> int:
    records = capture.read_capture(args.capture)
    out, log = detect.normalize(records, args.policy, args.seed, args.rate)
    capture.write_capture(args.out, out)
    text = "".join(str(r) + "\n" for r in log)
    if args.log:
        Path(args.log).write_text(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def cmd_experiment_run(args) -> int:
    words, skipped = experiment.load_corpus(args.corpus)
    if skipped:
        print(f"skipped {skipped} lines that are not 2-15 letter words", file=sys.stderr)
    try:
        streams_, groups = experiment.parse_range(args.streams), experiment.parse_range(args.groups)
    except ValueError:
        raise UsageError("--streams and --groups take forms like 5, 1,2,5 or 1..10") from None
    cfg = experiment.ExperimentConfig(streams_, groups, tuple(words), args.mode)
    table = experiment.measure(cfg, args.jobs)
    experiment.report(table, args.out, args.format)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _channel_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", required=True, choices=[c.value for c in ChannelId])
    p.add_argument("--key-count", type=int, default=16, help="A1 shared keys")
    p.add_argument("--s1-bits", type=int, default=4, choices=(3, 4))
    p.add_argument("--padding-len", type=int, default=8, help="P1/VP5 padding bytes per carrier")
    p.add_argument("--streams", type=int, default=4, help="MS stream count")
    p.add_argument("--group", type=int, default=2, help="MS group size")
    p.add_argument("--mtu-data", type=int, default=1400)
    p.add_argument("--chunk-size", type=int, default=200)
    p.add_argument("--chunks", type=int, default=5, help="CO control chunks per packet")
    p.add_argument("--loose", action="store_true", help="CO: permute DATA chunks too")
    p.add_argument("--duty", type=float, default=0.1)
    p.add_argument("--payload-bytes", type=int, default=64, help="HY1 bytes per event")
    p.add_argument("--message-bytes", type=int, default=200, help="HY2 dummy message size")
    p.add_argument("--fragment", type=int, default=100, help="fragmentation threshold")
    p.add_argument("--message-size", type=int, default=100)
    p.add_argument("--messages", type=int, default=200, help="MH passive-mode traffic")
    p.add_argument("--sender-addrs", type=int, default=2, help="MH sender alternate addresses")
    p.add_argument("--receiver-addrs", type=int, default=2, help="MH receiver alternate addresses")
    p.add_argument("--mode", choices=("active", "passive"), default="active")
    p.add_argument("--loss", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stego", description="SCTP covert channel toolkit")
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="print the channel capacity table")
    p.set_defaults(func=cmd_capacity)

    for name in ("craft", "embed"):
        p = sub.add_parser(name, help="embed a payload into a new capture")
        _channel_options(p)
        p.add_argument("--payload-hex")
        p.add_argument("--payload-file")
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        p.set_defaults(func=cmd_craft)

    p = sub.add_parser("extract", help="recover a payload from a capture")
    _channel_options(p)
    p.add_argument("--capture", required=True)
    p.add_argument("--out", help="write raw bytes here instead of hex to stdout")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("simulate", help="run an association from a config file")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="SCTS capture")
    p.add_argument("--events", help="JSON-lines event log")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_simulate)

    det = sub.add_parser("detect", help="steganalysis").add_subparsers(dest="detect_command", required=True)
    p = det.add_parser("scan")
    p.add_argument("--capture", required=True)
    p.add_argument("--baseline")
    p.add_argument("--key-count", type=int)
    p.add_argument("--ppid-allow", default="0")
    p.add_argument("--strict-i2", action="store_true")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect_scan)
    p = det.add_parser("calibrate")
    p.add_argument("--captures", nargs="*")
    p.add_argument("--config")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--percentile", type=float, default=99.0)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_detect_calibrate)
    p = det.add_parser("normalize")
    p.add_argument("--capture", required=True)
    p.add_argument("--policy", action="append", required=True, choices=detect.POLICIES)
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_detect_normalize)

    exp = sub.add_parser("experiment", help="untapped-bits measurement over a word list").add_subparsers(dest="experiment_command", required=True)
    p = exp.add_parser("run")
    p.add_argument("--streams", default="2..15")
    p.add_argument("--groups", default="1..10")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=("included", "excluded", "both"), default="both")
    p.add_argument("--format", choices=("csv", "gnuplot"), default="csv")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stego: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StegoError, ValueError, OSError, KeyError) as exc:
        print(f"stego: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
