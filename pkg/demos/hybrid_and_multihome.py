"""
Channels that need retransmissions
==================================

The hybrid channels hide data in chunks the sender pretends to abandon.  The
multihoming channel picks which address pair carries each retransmission.
"""

from sctpstego import capture, detect, framing, hybrid, multihome, simnet
from sctpstego.bits import BitString

secret = b"meet at noon"

for variant in ("HY1", "HY2"):
    cfg = simnet.AssocConfig(stream_count=2, partial_reliability=True, seed=1, loss=0.05,
                             fragmentation_threshold=200)
    assoc = simnet.establish(cfg, True)
    simnet.TrafficProfile(31, 40).load(assoc)
    if variant == "HY1":
        hybrid.hy1_schedule(assoc, secret, 0.1, 16)
    else:
        hybrid.hy2_schedule(assoc, secret, 0.1, 216)
    assoc.run_until_idle(settle=10)
    recs = capture.records_from_events(assoc.events)
    warded, _ = detect.normalize(recs, ["drop-acked"])
    after = hybrid.hy_extract(simnet.replay(warded, cfg, covert_aware=True), variant)
    print(variant, hybrid.hy_extract(assoc, variant), "after drop-acked:", after)

print(hybrid.hy_rate(250, 1000, 0.0001), hybrid.hy_rate(250, 1400, 0.0001), "bit/s")

# three addresses on each side: four alternate pairs, two bits per retransmission
cfg = simnet.AssocConfig(sender_addrs=("10.0.0.1", "10.0.0.2", "10.0.0.3"),
                         receiver_addrs=("10.0.1.1", "10.0.1.2", "10.0.1.3"), seed=2, loss=0.1)
assoc = simnet.establish(cfg)
code = multihome.PathCode.from_config(cfg)
bits = framing.frame(BitString.from_bytes(b"ok"))
chan = multihome.MultihomeSender(code, bits, "active").attach(assoc)
simnet.TrafficProfile(chan.events_needed + 1, 30).load(assoc)
assoc.run_until_idle(settle=10)
seen = multihome.observed_retransmissions(capture.records_from_events(assoc.events), code)
print("MH", code.bits_per_event, "bits/event:", framing.unframe(multihome.mh_extract(code, seen)).to_bytes())
print(multihome.mh_rate(250, 0.02, 2), "bit/s at 2% retransmissions")
