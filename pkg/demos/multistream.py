"""
Choosing stream numbers to carry bits
=====================================

With n streams and groups of k chunks there are n**k stream tuples.  The first
2**F tuples get F-bit codes and the rest F+1 bits, so every tuple is usable.
"""

import random

import numpy as np

from sctpstego import simnet, streams, throughput
from sctpstego.bits import BitString

cb = streams.build_codebook(3, 2)
for t, code in sorted(cb.entries.items()):
    print(tuple(s + 1 for s in t), code)

groups, untapped = streams.encode_stream_ids(cb, "001101")
print("001101 ->", [tuple(s + 1 for s in g) for g in groups], "untapped", untapped)

# bits per chunk: the log2(n) ceiling, then the guaranteed rate for k = 1..8
for n in (2, 3, 4, 5, 9):
    ceiling = streams.ms_bandwidth(n, 1)[0]
    floor = np.array([streams.ms_bandwidth(n, k)[1] for k in range(1, 9)])
    print(n, round(ceiling, 3), np.round(floor, 3))
print(throughput(streams.ms_bandwidth(4, 1)[1], 250), "bit/s with 4 streams at 250 chunks/s")

# a whole frame through a lossy association; loss does not reorder the TSN sequence
rng = random.Random(4)
payload = BitString.random(64, rng)
assoc = simnet.establish(simnet.AssocConfig(stream_count=5, seed=4, loss=0.1))
carrier = streams.MessageScheduler.synthetic(5, 0)
for s in streams.frame_stream_ids(payload, 5, 3):
    carrier.add(s, rng.randbytes(40))
for d in streams.msd_send(payload, 5, 3, carrier):
    assoc.send_message(d.stream, d.data)
assoc.run_until_idle(settle=5)
got = streams.msd_receive(simnet.tsn_ordered_streams(assoc.events), 5)
print(got == payload, sum(e.kind == simnet.RETRANSMIT for e in assoc.events), "retransmissions")
