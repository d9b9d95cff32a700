"""Sequential trace replay, termination detection and suite statistics."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .alw import AlwPair, cluster_alw
from .model import Cluster, ClusterConfig
from .reassigner import IntensifiedScheduler, IntensifierConfig, build_intensified
from .schedulers import HeuristicScheduler, RandomSearch, SchedulerKind, random_search
from .trace import Event, Trace


@dataclass
class RunResult:
    start: int
    length: int
    terminal_alw: AlwPair
    unassign_counts: dict = field(default_factory=lambda: {"emergent": 0, "imbalance": 0})
    # False when the window ran out before any creation was rejected
    terminated: bool = True
    # (vm_id, pm_id, numa_ids) for every accepted creation, when recorded
    event_log: Optional[List[Tuple[str, int, Tuple[int, ...]]]] = None


@dataclass(frozen=True)
class SuiteStats:
    n: int
    mean: float
    q1: float
    median: float
    q3: float
    alw_mem_mean: float
    alw_mem_std: float
    alw_cpu_mean: float
    alw_cpu_std: float

    def as_dict(self) -> dict:
        return {
            "n": self.n, "mean": self.mean, "q1": self.q1, "median": self.median, "q3": self.q3,
            "alw_mem_mean": self.alw_mem_mean, "alw_mem_std": self.alw_mem_std,
            "alw_cpu_mean": self.alw_cpu_mean, "alw_cpu_std": self.alw_cpu_std,
        }


def _as_scheduler(trace: Trace, config: ClusterConfig, scheduler,
                  intensifier: Optional[IntensifierConfig]):
    if isinstance(scheduler, (HeuristicScheduler, IntensifiedScheduler)):
        return scheduler
    if intensifier is not None:
        return build_intensified(scheduler, trace.flavor_set, config, intensifier)
    return HeuristicScheduler(scheduler)


def run(trace: Trace, start_index: int, config: ClusterConfig, scheduler,
        intensifier: Optional[IntensifierConfig] = None, *, audit: bool = False,
        record: bool = False) -> RunResult:
    """Replay ``trace`` from ``start_index`` on a fresh cluster until a creation is rejected.

    ``scheduler`` is either a policy kind (FirstFit(), ...) or a ready-made
    scheduler object; a policy kind combined with ``intensifier`` is wrapped
    in the role-assignment intensifier.
    """
    if not 0 <= start_index <= len(trace):
        raise IndexError(f"start index {start_index} outside trace of length {len(trace)}")
    cluster = Cluster(config)
    sched = _as_scheduler(trace, config, scheduler, intensifier)
    sched.setup(cluster)
    length = 0
    terminated = False
    log = [] if record else None
    placements = cluster.placements
    for req in trace.requests[start_index:]:
        if req.event is Event.DELETE:
            # VMs created before the window opened are not on this cluster
            if req.vm_id in placements:
                sched.release(cluster, req.vm_id)
                if audit:
                    cluster.audit()
            continue
        p = sched.schedule(cluster, req.vm_id, req.spec)
        if p is None:
            terminated = True
            break
        length += 1
        if record:
            log.append((p.vm_id, p.pm_id, p.numa_ids))
        if audit:
            cluster.audit()
    cluster.audit()
    counts = getattr(sched, "unassign_counts", {"emergent": 0, "imbalance": 0})
    return RunResult(start_index, length, cluster_alw(cluster, trace.flavor_set), dict(counts),
                     terminated, log)


def quartiles(values: Sequence[float]) -> Tuple[float, float, float]:
    """First quartile, median and third quartile by linear interpolation."""
    q = np.percentile(np.sort(np.asarray(values, dtype=float)), [25, 50, 75], method="linear")
    return float(q[0]), float(q[1]), float(q[2])


def summarize(results: Sequence[RunResult]) -> SuiteStats:
    if not results:
        raise ValueError("cannot summarize an empty suite")
    lengths = np.array(sorted(r.length for r in results), dtype=float)
    mem = np.array([r.terminal_alw.alw_mem for r in results], dtype=float)
    cpu = np.array([r.terminal_alw.alw_cpu for r in results], dtype=float)
    q1, q2, q3 = quartiles(lengths)
    return SuiteStats(len(results), float(lengths.mean()), q1, q2, q3,
                      float(mem.mean()), float(mem.std()), float(cpu.mean()), float(cpu.std()))


def _run_one(args) -> RunResult:
    trace, start, config, kind, intensifier = args
    if isinstance(kind, RandomSearch) and intensifier is None:
        return random_search(trace, start, config, kind.restarts, kind.seed)
    return run(trace, start, config, kind, intensifier)


def run_suite(trace: Trace, scenarios: Sequence[int], config: ClusterConfig,
              scheduler: SchedulerKind, intensifier: Optional[IntensifierConfig] = None,
              workers: int = 1) -> Tuple[SuiteStats, List[RunResult]]:
    """Run every scenario independently; a RandomSearch kind without an
    intensifier runs the optimal-proxy search for each scenario."""
    if not scenarios:
        raise ValueError("need at least one scenario")
    jobs = [(trace, s, config, scheduler, intensifier) for s in scenarios]
    if workers > 1 and len(jobs) > 1:
        chunk = max(1, math.ceil(len(jobs) / (workers * 2)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=chunk))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r.start)
    return summarize(results), results


def algorithm_label(scheduler: Union[SchedulerKind, str], intensifier: Optional[IntensifierConfig]) -> str:
    name = scheduler if isinstance(scheduler, str) else scheduler.name
    if name == "random" and intensifier is None:
        return "Optimal"
    return name.upper() + ("+RA" if intensifier is not None else "")
