"""Shared fixtures: corpus streams and a deterministic random-trace generator."""

import random
from pathlib import Path

import pytest

from clueless.interp import assemble, run
from clueless.isa import InstructionRecord, Kind, WatchAction, WatchDirective

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
CORPUS_NAMES = ("micro", "ttable_aes", "vperm_aes", "const_wipe", "spill_reload")


def corpus_path(name: str) -> Path:
    return CORPUS / f"{name}.s"


def corpus_stream(name: str) -> list:
    """Assemble and execute a corpus program, returning its full item stream."""
    program = assemble(corpus_path(name).read_text())
    items: list = []
    run(program, items.append)
    return items


@pytest.fixture(scope="session")
def corpus_streams() -> dict:
    return {name: corpus_stream(name) for name in CORPUS_NAMES}


def random_trace(seed: int, n: int | None = None, reg_count: int = 16,
                 addr_base: int = 0x100, addr_count: int = 256) -> list:
    """Reproducible stream of records and directives for differential tests."""
    rng = random.Random(seed)
    if n is None:
        n = rng.randrange(1_000, 10_001)
    items: list = []
    active: list[int] = []

    def add_watch():
        start = addr_base + rng.randrange(addr_count - 32)
        if start in active:
            return  # one region per base, else unwatching twice would trap
        items.append(WatchDirective(WatchAction.WATCH, start, rng.choice((8, 16, 32))))
        active.append(start)

    def some_regs(k):
        return tuple(rng.randrange(reg_count) for _ in range(k))

    for _ in range(rng.randint(1, 3)):
        add_watch()
    for _ in range(n):
        x = rng.random()
        if x < 0.30:
            items.append(InstructionRecord(
                Kind.LOAD, dst=rng.randrange(reg_count),
                addr_regs=some_regs(rng.choice((0, 1, 1, 2))),
                ea=addr_base + rng.randrange(addr_count),
                size=rng.choice((1, 2, 4, 8))))
        elif x < 0.55:
            items.append(InstructionRecord(
                Kind.STORE, srcs=some_regs(1),
                addr_regs=some_regs(rng.choice((0, 1, 1, 2))),
                ea=addr_base + rng.randrange(addr_count),
                size=rng.choice((1, 2, 4, 8))))
        elif x < 0.80:
            items.append(InstructionRecord(
                Kind.ALU, dst=rng.randrange(reg_count),
                srcs=some_regs(rng.choice((1, 2, 2)))))
        elif x < 0.92:
            items.append(InstructionRecord(Kind.CONST, dst=rng.randrange(reg_count)))
        elif x < 0.985:
            items.append(InstructionRecord(Kind.NOP))
        elif active and rng.random() < 0.5:
            items.append(WatchDirective(WatchAction.UNWATCH,
                                        active.pop(rng.randrange(len(active)))))
        else:
            add_watch()
    return items
