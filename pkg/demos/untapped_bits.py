"""
How much does the last group cost?
==================================

A word rarely splits into whole groups, so the final group carries padding.
Counting those padding bits as used (included) or not (excluded) changes which
group size looks best.  Powers of two waste nothing in excluded mode.
"""

import numpy as np

from sctpstego.bits import BitString
from sctpstego.experiment import EXCLUDED, INCLUDED, ExperimentConfig, chunks_needed, measure, word_bits

bits = BitString("10110010011101000111")
print(chunks_needed(bits, 4, 4, INCLUDED), chunks_needed(bits, 4, 4, EXCLUDED))

for w in ("DOG", "SUMMER", "ELECTRICITY"):
    b = word_bits(w)
    print(w, [float(chunks_needed(b, 5, k, EXCLUDED)) for k in range(1, 11)])

words = ("ALPHA", "BRAVO", "CHARLIE", "DELTA", "ECHO", "FOXTROT", "GOLF", "HOTEL", "INDIA", "JULIET",
         "KILO", "LIMA", "MIKE", "NOVEMBER", "OSCAR", "PAPA", "QUEBEC", "ROMEO", "SIERRA", "TANGO")
table = measure(ExperimentConfig((4, 5, 9), tuple(range(1, 11)), words))
for n in (4, 5, 9):
    for mode in (INCLUDED, EXCLUDED):
        row = np.array([table.percent(n, k, mode) for k in range(1, 11)])
        print(n, mode[:3], np.round(row, 1), "best k =", table.best(n, mode))
