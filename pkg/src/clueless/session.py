"""One analysis run: engine, event log and metrics wired together.

A Session consumes a stream of instruction records and watch
directives (from the interpreter, a trace file, or constructed by
hand) and owns everything a run produces: leak events, the
propagation log, and the per-instruction metrics.
"""

from .engine import Engine, EngineConfig, LeakEvent
from .isa import WatchDirective
from .metrics import DEFAULT_SAMPLE_INTERVAL, MetricsAccumulator, summary_dict
from .tracer import DEFAULT_LOG_CAPACITY, TraceLog, leak_report


class Session:
    def __init__(self, config: EngineConfig | None = None, *,
                 sample_interval: int = DEFAULT_SAMPLE_INTERVAL,
                 log_capacity: int = DEFAULT_LOG_CAPACITY,
                 audit: bool = False):
        self.engine = Engine(config, audit=audit)
        self.log = TraceLog(log_capacity)
        self.metrics = MetricsAccumulator(sample_interval)
        self.leaks: list[LeakEvent] = []
        self._finished = False

    def feed(self, item):
        """Consume one record or directive."""
        if isinstance(item, WatchDirective):
            self.engine.apply_directive(item)
            return
        engine = self.engine
        untags_before = engine.untag_count
        events = engine.step(item)
        leaked = False
        for ev in events:
            if type(ev) is LeakEvent:
                self.leaks.append(ev)
                leaked = True
            else:
                self.log.record(ev)
        a, l = len(engine.accessed), len(engine.leak_points)
        self.metrics.tick(a, l, force_sample=leaked
                          or engine.untag_count != untags_before)

    def run(self, stream):
        for item in stream:
            self.feed(item)
        return self

    def finish(self):
        """Seal the run: final sample plus stat sync into the accumulator."""
        if self._finished:
            return self
        self._finished = True
        engine = self.engine
        m = self.metrics
        if m.instructions:
            a, l = engine.snapshot_counts()
            m.sample(a, l)
        m.leaks = engine.leak_count
        m.untags = engine.untag_count
        m.taint_evictions = engine.table.forced_evictions
        m.cache_evictions = engine.cache.evictions
        m.trace_drops = self.log.dropped
        return self

    def config_dict(self) -> dict:
        cfg = self.engine.config
        return {
            "mode": cfg.mode,
            "reg_count": cfg.reg_count,
            "taints": cfg.taint_budget,
            "cache_sets": cfg.cache_sets,
            "cache_ways": cfg.cache_ways,
            "granularity": cfg.granularity,
            "count_access_starts": cfg.count_access_starts,
            "sample_interval": self.metrics.sample_interval,
        }

    def summary(self) -> dict:
        self.finish()
        return summary_dict(self.metrics, self.config_dict())

    def report(self) -> dict:
        self.finish()
        return leak_report(self.leaks, self.log, self.engine.config.mode)
