"""Leakage ratio accounting and the CSV/JSON output surfaces.

After every retired instruction the accumulator receives the current
sizes of the accessed set A and the leak-point set L. The headline
ratio is the exact rational sum(|L_i|) / sum(|A_i|) over all
instructions; sums are plain Python ints, so nothing saturates, and
the summary carries the numerator and denominator verbatim alongside
a rounded decimal.
"""

import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

DEFAULT_SAMPLE_INTERVAL = 4096


@dataclass
class MetricsAccumulator:
    sample_interval: int = DEFAULT_SAMPLE_INTERVAL
    instructions: int = 0
    sum_a: int = 0
    sum_l: int = 0
    samples: list = field(default_factory=list)  # (i, |A|, |L|) rows
    # session stats echoed into the summary
    leaks: int = 0
    untags: int = 0
    taint_evictions: int = 0
    cache_evictions: int = 0
    trace_drops: int = 0

    def tick(self, abs_a: int, abs_l: int, force_sample: bool = False):
        """Account one retired instruction's |A| and |L|."""
        self.instructions += 1
        self.sum_a += abs_a
        self.sum_l += abs_l
        if force_sample or self.instructions % self.sample_interval == 0:
            self.sample(abs_a, abs_l)

    def sample(self, abs_a: int, abs_l: int):
        if self.samples and self.samples[-1][0] == self.instructions:
            return  # never two rows for the same instruction
        self.samples.append((self.instructions, abs_a, abs_l))

    def lambda_(self) -> Fraction:
        """Exact leakage ratio; zero for a run that never touched memory."""
        if self.sum_a == 0:
            return Fraction(0)
        return Fraction(self.sum_l, self.sum_a)


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def write_csv(acc: MetricsAccumulator, path: str):
    """Sampled |A| and |L| series, one row per sampled instruction index."""
    f, close = _open_out(path)
    try:
        f.write("i,abs_A,abs_L\n")
        for i, a, l in acc.samples:
            f.write(f"{i},{a},{l}\n")
    finally:
        if close:
            f.close()


def summary_dict(acc: MetricsAccumulator, config: dict) -> dict:
    lam = acc.lambda_()
    return {
        "lambda": float(f"{float(lam):.6g}"),
        "lambda_num": lam.numerator,
        "lambda_den": lam.denominator,
        "instructions": acc.instructions,
        "sum_A": acc.sum_a,
        "sum_L": acc.sum_l,
        "leaks": acc.leaks,
        "untags": acc.untags,
        "taint_evictions": acc.taint_evictions,
        "cache_evictions": acc.cache_evictions,
        "trace_drops": acc.trace_drops,
        "config": config,
    }


def write_summary(acc: MetricsAccumulator, path: str, config: dict):
    f, close = _open_out(path)
    try:
        json.dump(summary_dict(acc, config), f, indent=2)
        f.write("\n")
    finally:
        if close:
            f.close()
