"""Word-corpus study of how many DATA chunks the multi-streaming channel needs.

For every word (8 bits per uppercase letter), stream count ``n`` and group
size ``k`` the greedy group encoder gives a chunk count.  With untapped bits
*included* the count is ``groups * k``; with them *excluded* the padding bits
are charged back at the guaranteed rate ``F / k`` bits per chunk, which can
leave a fractional count (kept exact as a :class:`~fractions.Fraction`).
The measure is the percentage of words for which a given ``k`` attains the
word's minimum count over all configured ``k``.
"""

from __future__ import annotations

import csv
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from .bits import BitString
from .errors import EmptyCorpus, IoFailure
from .streams import GroupCodebook

INCLUDED = "included"
EXCLUDED = "excluded"
BOTH = "both"
WORD_RE = re.compile(r"[A-Z]{2,15}")


def word_bits(word: str) -> BitString:
    return BitString.from_bytes(word.encode("ascii"))


@lru_cache(maxsize=None)
def _codebook(n: int, k: int) -> GroupCodebook:
    return GroupCodebook(n, k)


def _count(value: int, nbits: int, n: int, k: int, mode: str):
    cb = _codebook(n, k)
    groups, untapped = cb.encode_counts(value, nbits)
    total = len(groups) * k
    if mode == INCLUDED:
        return total
    return total - Fraction(untapped * k, cb.short_len)


def chunks_needed(bits, n: int, k: int, mode: str = INCLUDED):
    """Chunks carrying *bits* (steganogram coding only, no framing)."""
    bits = BitString(bits)
    if not bits:
        raise ValueError("word_bits must be nonempty")
    if mode not in (INCLUDED, EXCLUDED):
        raise ValueError(f"mode must be {INCLUDED!r} or {EXCLUDED!r}")
    return _count(bits.to_int(), len(bits), n, k, mode)


def min_groups_oracle(bits, n: int, k: int) -> int:
    """Fewest groups that can carry *bits*, by dynamic programming over cut points."""
    bits = BitString(bits)
    cb = _codebook(n, k)
    f, long_count = cb.short_len, cb.long_count
    size = len(bits)
    best = [0] * (size + 1)
    for i in range(size - 1, -1, -1):
        rest = size - i
        if rest <= f:
            best[i] = 1
            continue
        options = [best[i + f] + 1]
        if long_count and int(bits[i:i + f + 1], 2) < long_count:
            options.append(best[i + f + 1] + 1)
        best[i] = min(options)
    return best[0]


def _modes(mode: str) -> tuple[str, ...]:
    if mode == BOTH:
        return INCLUDED, EXCLUDED
    if mode in (INCLUDED, EXCLUDED):
        return (mode,)
    raise ValueError(f"unknown untapped mode {mode!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    stream_counts: tuple[int, ...]
    group_sizes: tuple[int, ...]
    corpus: tuple[str, ...]
    untapped_mode: str = BOTH

    def __post_init__(self):
        object.__setattr__(self, "stream_counts", tuple(sorted(set(self.stream_counts))))
        object.__setattr__(self, "group_sizes", tuple(sorted(set(self.group_sizes))))
        object.__setattr__(self, "corpus", tuple(self.corpus))
        _modes(self.untapped_mode)
        if any(n < 2 for n in self.stream_counts) or any(k < 1 for k in self.group_sizes):
            raise ValueError("need n >= 2 and k >= 1")
        bad = [w for w in self.corpus if not WORD_RE.fullmatch(w)]
        if bad:
            raise ValueError(f"words must be 2-15 uppercase letters: {bad[:3]}")

    @property
    def modes(self) -> tuple[str, ...]:
        return _modes(self.untapped_mode)


@dataclass
class MeasureTable:
    stream_counts: tuple[int, ...]
    group_sizes: tuple[int, ...]
    modes: tuple[str, ...]
    words: int
    hits: dict = field(default_factory=dict)  # (n, k, mode) -> words attaining their minimum

    def percent(self, n: int, k: int, mode: str) -> float:
        return 100.0 * self.hits[(n, k, mode)] / self.words

    def rows(self):
        for n in self.stream_counts:
            for mode in self.modes:
                for k in self.group_sizes:
                    yield n, k, mode, self.percent(n, k, mode)

    def best(self, n: int, mode: str) -> int:
        return max(self.group_sizes, key=lambda k: (self.hits[(n, k, mode)], -k))

    def merge(self, other: "MeasureTable") -> "MeasureTable":
        hits = {key: self.hits.get(key, 0) + other.hits.get(key, 0) for key in set(self.hits) | set(other.hits)}
        return MeasureTable(self.stream_counts, self.group_sizes, self.modes, self.words + other.words, hits)


def _measure_words(args) -> MeasureTable:
    words, ns, ks, modes = args
    hits = {(n, k, m): 0 for n in ns for k in ks for m in modes}
    for w in words:
        bits = word_bits(w)
        value, nbits = bits.to_int(), len(bits)
        for n in ns:
            for m in modes:
                counts = [_count(value, nbits, n, k, m) for k in ks]
                low = min(counts)
                for k, c in zip(ks, counts):
                    if c == low:
                        hits[(n, k, m)] += 1
    return MeasureTable(ns, ks, modes, len(words), hits)


def measure(cfg: ExperimentConfig, jobs: int = 1) -> MeasureTable:
    if not cfg.corpus:
        raise EmptyCorpus("corpus is empty")
    ns, ks, modes = cfg.stream_counts, cfg.group_sizes, cfg.modes
    if not ks:
        return MeasureTable(ns, ks, modes, len(cfg.corpus))
    if jobs <= 1:
        return _measure_words((cfg.corpus, ns, ks, modes))
    size = -(-len(cfg.corpus) // (jobs * 4))
    parts = [(cfg.corpus[i:i + size], ns, ks, modes) for i in range(0, len(cfg.corpus), size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        tables = list(pool.map(_measure_words, parts))
    out = tables[0]
    for t in tables[1:]:
        out = out.merge(t)
    return out


def report(table: MeasureTable, path, fmt: str = "csv") -> None:
    """Write one row per (n, k, mode) with the percentage of words at their minimum."""
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "k", "mode", "percent"])
                for n, k, mode, pct in table.rows():
                    w.writerow([n, k, mode, f"{pct:.4f}"])
            elif fmt == "gnuplot":
                fh.write("# n k mode percent\n")
                last = None
                for n, k, mode, pct in table.rows():
                    if last is not None and (n, mode) != last:
                        fh.write("\n")
                    fh.write(f"{n} {k} {mode} {pct:.4f}\n")
                    last = (n, mode)
            else:
                raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_corpus(path) -> tuple[list[str], int]:
    """Uppercased words from a one-per-line file and the number of lines skipped."""
    try:
        lines = Path(path).read_text(encoding="ascii", errors="replace").splitlines()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    words, skipped = [], 0
    for line in lines:
        w = line.strip().upper()
        if not w:
            continue
        if WORD_RE.fullmatch(w):
            words.append(w)
        else:
            skipped += 1
    return words, skipped


def parse_range(text: str) -> tuple[int, ...]:
    """``"2..15"``, ``"3"`` or ``"1,2,5"`` to a tuple of ints."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)
