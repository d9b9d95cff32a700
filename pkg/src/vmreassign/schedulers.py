"""Baseline placement policies: First-Fit, Best-Fit, BF2 and uniform random.

A policy only *chooses* among pre-filtered feasible candidates; the schedulers
below (and the intensifier in :mod:`vmreassign.reassigner`) decide which
candidates a policy gets to see.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

from .errors import ConfigError, NoFeasiblePm
from .model import Cluster, PhysicalMachine, Placement, Role, VmSpec, can_fit


@dataclass(frozen=True)
class Candidate:
    pm_id: int
    region: Optional[Role]
    free_cpu: int
    free_mem: int
    used_cpu_frac: float
    used_mem_frac: float
    cap_cpu: int
    cap_mem: int


def make_candidate(pm: PhysicalMachine, region: Optional[Role]) -> Candidate:
    cap_c, cap_m = pm.cap_cpu, pm.cap_mem
    used_c, used_m = pm.used_cpu, pm.used_mem
    if region is None:
        free_c, free_m = cap_c - used_c, cap_m - used_m
    else:
        free_c, free_m = pm.region_free(region)
    return Candidate(pm.pm_id, region, free_c, free_m, used_c / cap_c, used_m / cap_m, cap_c, cap_m)


@dataclass(frozen=True)
class FirstFit:
    name = "ff"


@dataclass(frozen=True)
class BestFit:
    name = "bf"


@dataclass(frozen=True)
class Bf2:
    w_cpu: float = 0.5
    w_mem: float = 0.5
    name = "bf2"

    def __post_init__(self):
        if not (0 <= self.w_cpu <= 1 and 0 <= self.w_mem <= 1):
            raise ConfigError("BF2 weights must lie in [0, 1]")
        if abs(self.w_cpu + self.w_mem - 1) > 1e-9:
            raise ConfigError("BF2 weights must sum to 1")


@dataclass(frozen=True)
class RandomSearch:
    restarts: int = 20
    seed: int = 0
    name = "random"

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("random search needs restarts >= 1")


SchedulerKind = Union[FirstFit, BestFit, Bf2, RandomSearch]
HEURISTICS = (FirstFit(), BestFit(), Bf2())


def kind_from_name(name: str, *, restarts: int = 20, seed: int = 0,
                   w_cpu: float = 0.5, w_mem: float = 0.5) -> SchedulerKind:
    name = name.lower()
    if name == "ff":
        return FirstFit()
    if name == "bf":
        return BestFit()
    if name == "bf2":
        return Bf2(w_cpu, w_mem)
    if name == "random":
        return RandomSearch(restarts, seed)
    raise ConfigError(f"unknown scheduler {name!r} (expected ff, bf, bf2 or random)")


def bf2_score(kind: Bf2, c: Candidate) -> float:
    return kind.w_cpu * c.free_cpu / c.cap_cpu + kind.w_mem * c.free_mem / c.cap_mem


def choose(kind: SchedulerKind, candidates: Sequence[Candidate], spec: VmSpec,
           rng: Optional[random.Random] = None) -> Candidate:
    """Pick one of ``candidates`` (ordered by pm_id) according to ``kind``."""
    if not candidates:
        raise NoFeasiblePm(f"no machine can host {spec}")
    if isinstance(kind, FirstFit):
        return candidates[0]
    if isinstance(kind, BestFit):
        # max() keeps the first maximum, i.e. the lowest pm_id on ties
        return max(candidates, key=lambda c: c.used_cpu_frac)
    if isinstance(kind, Bf2):
        return min(candidates, key=lambda c: bf2_score(kind, c))
    if isinstance(kind, RandomSearch):
        rng = rng if rng is not None else random.Random(kind.seed)
        return candidates[rng.randrange(len(candidates))]
    raise ConfigError(f"unsupported scheduler kind {kind!r}")


class HeuristicScheduler:
    """A plain policy over the whole cluster: every machine is shared."""

    def __init__(self, kind: SchedulerKind, rng: Optional[random.Random] = None):
        self.kind = kind
        if isinstance(kind, RandomSearch) and rng is None:
            rng = random.Random(kind.seed)
        self.rng = rng

    @property
    def label(self) -> str:
        return self.kind.name.upper()

    def setup(self, cluster: Cluster) -> None:
        pass

    def candidates(self, cluster: Cluster, spec: VmSpec) -> List[Candidate]:
        config = cluster.config
        return [make_candidate(pm, None) for pm in cluster.pms
                if pm.partition is None and can_fit(pm, spec, None, config)]

    def schedule(self, cluster: Cluster, vm_id: str, spec: VmSpec) -> Optional[Placement]:
        candidates = self.candidates(cluster, spec)
        if not candidates:
            return None
        c = choose(self.kind, candidates, spec, self.rng)
        return cluster.place(vm_id, spec, c.pm_id, c.region)

    def release(self, cluster: Cluster, vm_id: str) -> None:
        cluster.release(vm_id)


def random_search(trace, start_index: int, config, restarts: int, seed: int,
                  heuristics: Sequence[SchedulerKind] = HEURISTICS):
    """Optimal-proxy for one scenario: the longest run among the heuristics and
    ``restarts`` seeded uniform-random rollouts. Returns that run's result."""
    from .sim import run

    if restarts < 1:
        raise ConfigError("random search needs restarts >= 1")
    best = None
    for kind in heuristics:
        res = run(trace, start_index, config, HeuristicScheduler(kind))
        if best is None or res.length > best.length:
            best = res
    for r in range(restarts):
        rng = random.Random(f"{seed}:{start_index}:{r}")
        res = run(trace, start_index, config, HeuristicScheduler(RandomSearch(restarts, seed), rng))
        if best is None or res.length > best.length:
            best = res
    return best


def random_search_length(trace, start_index: int, config, restarts: int, seed: int,
                         heuristics: Sequence[SchedulerKind] = HEURISTICS) -> int:
    return random_search(trace, start_index, config, restarts, seed, heuristics).length
