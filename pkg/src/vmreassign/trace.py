"""Request traces: CSV ingestion, synthetic generation, filters and start-point sampling.

CSV schema (UTF-8, comma separated, integers, optional header)::

    vmid,cpu,memory,time,type      # type 0 = create, 1 = delete
"""
from __future__ import annotations

import csv
import logging
import random
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

from .errors import ConfigError, EmptyTrace, NotEnoughRequests, ParseError, TraceError
from .model import FlavorSet, Role, VmSpec, flavor_set_of

log = logging.getLogger(__name__)

CSV_HEADER = ("vmid", "cpu", "memory", "time", "type")


class Event(IntEnum):
    CREATE = 0
    DELETE = 1


@dataclass(frozen=True)
class Request:
    vm_id: str
    event: Event
    spec: Optional[VmSpec]
    seq: int
    timestamp: Optional[int] = None


class Trace:
    """An immutable, validated request sequence plus its flavor universe."""

    def __init__(self, requests: Sequence[Request], flavor_set: FlavorSet, dropped_deletes: int = 0):
        self.requests: tuple = tuple(requests)
        self.flavor_set = flavor_set
        self.dropped_deletes = dropped_deletes
        self._validate()

    def _validate(self):
        prev = None
        live = set()
        for r in self.requests:
            if prev is not None and r.seq <= prev:
                raise TraceError(f"sequence numbers must increase (seq {r.seq} after {prev})")
            prev = r.seq
            if r.event is Event.CREATE:
                if r.spec is None or r.spec not in self.flavor_set:
                    raise TraceError(f"create of vm {r.vm_id!r} uses a flavor outside the flavor set")
                if r.vm_id in live:
                    raise TraceError(f"vm {r.vm_id!r} created twice while live")
                live.add(r.vm_id)
            else:
                if r.vm_id not in live:
                    raise TraceError(f"delete of vm {r.vm_id!r} which is not live")
                live.remove(r.vm_id)

    def __len__(self):
        return len(self.requests)

    def __eq__(self, other):
        return (isinstance(other, Trace) and self.requests == other.requests
                and self.flavor_set == other.flavor_set)

    @property
    def n_creates(self) -> int:
        return sum(1 for r in self.requests if r.event is Event.CREATE)

    def creation_positions(self) -> List[int]:
        return [i for i, r in enumerate(self.requests) if r.event is Event.CREATE]


def _parse_int(value: str, row: int, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        try:
            f = float(value)
        except ValueError:
            raise ParseError(row, f"{name} is not an integer: {value!r}") from None
        if not f.is_integer():
            raise ParseError(row, f"{name} is not an integer: {value!r}")
        return int(f)


def _is_header(fields: Sequence[str]) -> bool:
    try:
        float(fields[0])
    except ValueError:
        return True
    return False


def load_csv(path: Union[str, Path]) -> Trace:
    path = Path(path)
    if not path.is_file():
        raise TraceError(f"trace file not found: {path}")
    requests: List[Request] = []
    live: Dict[str, VmSpec] = {}
    dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            fields = [f.strip() for f in fields]
            if lineno == 1 and _is_header(fields):
                continue
            if len(fields) != 5:
                raise ParseError(lineno, f"expected 5 columns, got {len(fields)}")
            vm_id = fields[0]
            cpu = _parse_int(fields[1], lineno, "cpu")
            mem = _parse_int(fields[2], lineno, "memory")
            ts = _parse_int(fields[3], lineno, "time")
            kind = _parse_int(fields[4], lineno, "type")
            if kind not in (0, 1):
                raise ParseError(lineno, f"type must be 0 (create) or 1 (delete), got {kind}")
            if kind == Event.CREATE:
                if cpu < 1 or mem < 1:
                    raise ParseError(lineno, f"non-positive flavor {cpu}U{mem}G")
                if vm_id in live:
                    raise ParseError(lineno, f"vm {vm_id} created while still live")
                spec = VmSpec.of(cpu, mem)
                live[vm_id] = spec
                requests.append(Request(vm_id, Event.CREATE, spec, len(requests), ts))
            else:
                if vm_id not in live:
                    dropped += 1
                    continue
                del live[vm_id]
                requests.append(Request(vm_id, Event.DELETE, None, len(requests), ts))
    if not any(r.event is Event.CREATE for r in requests):
        raise EmptyTrace(f"no creation requests in {path}")
    if dropped:
        log.warning("%s: skipped %d deletions of unknown VMs", path, dropped)
    specs = [r.spec for r in requests if r.spec is not None]
    return Trace(requests, flavor_set_of(specs), dropped_deletes=dropped)


def write_csv(trace: Trace, path: Union[str, Path]) -> None:
    specs: Dict[str, VmSpec] = {}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in trace.requests:
            if r.event is Event.CREATE:
                specs[r.vm_id] = r.spec
                spec = r.spec
            else:
                spec = specs[r.vm_id]
            ts = r.timestamp if r.timestamp is not None else r.seq
            w.writerow((r.vm_id, spec.cpu, spec.mem, ts, int(r.event)))


def sample_scenarios(trace: Trace, k: int = 60, seed: int = 0) -> List[int]:
    """``k`` distinct creation positions drawn uniformly (seeded), ascending."""
    if k < 1:
        raise ConfigError("need k >= 1 scenarios")
    positions = trace.creation_positions()
    if len(positions) < k:
        raise NotEnoughRequests(f"{len(positions)} creations cannot supply {k} start points")
    return sorted(random.Random(seed).sample(positions, k))


@dataclass(frozen=True)
class FilterKind:
    """Which creations survive: all, ci, mi, small (cpu <= threshold) or large (cpu > threshold)."""

    name: str = "all"
    threshold_cpu: int = 32

    NAMES = ("all", "ci", "mi", "small", "large")

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise ConfigError(f"unknown filter {self.name!r}; expected one of {', '.join(self.NAMES)}")
        if self.threshold_cpu < 1:
            raise ConfigError("filter threshold must be >= 1")

    def keeps(self, spec: VmSpec, pm_cpu: int, pm_mem: int) -> bool:
        from .reassigner import categorize

        if self.name == "all":
            return True
        if self.name == "ci":
            return categorize(spec, pm_cpu, pm_mem) is Role.CPU
        if self.name == "mi":
            return categorize(spec, pm_cpu, pm_mem) is Role.MEM
        if self.name == "small":
            return spec.cpu <= self.threshold_cpu
        return spec.cpu > self.threshold_cpu


ALL = FilterKind("all")
CPU_INTENSIVE_ONLY = FilterKind("ci")
MEM_INTENSIVE_ONLY = FilterKind("mi")
SMALL_ONLY = FilterKind("small")
LARGE_ONLY = FilterKind("large")


def apply_filter(trace: Trace, kind: FilterKind, pm_cpu: int, pm_mem: int) -> Trace:
    if kind.name == "all":
        return trace
    kept_vms = set()
    out: List[Request] = []
    for r in trace.requests:
        if r.event is Event.CREATE:
            if not kind.keeps(r.spec, pm_cpu, pm_mem):
                continue
            kept_vms.add(r.vm_id)
        elif r.vm_id not in kept_vms:
            continue
        out.append(Request(r.vm_id, r.event, r.spec, len(out), r.timestamp))
    flavors = [f for f in trace.flavor_set if kind.keeps(f, pm_cpu, pm_mem)]
    # an empty result keeps the old universe so the trace stays well-formed
    return Trace(out, FlavorSet(flavors) if flavors else trace.flavor_set,
                 dropped_deletes=trace.dropped_deletes)


# CPU:memory ratios 3:2 (CPU-intensive on 128U160G), 1:2 and 1:4 (MEM-intensive)
DEFAULT_FLAVORS: tuple = tuple(VmSpec.of(c, m) for c, m in (
    (12, 8), (24, 16), (48, 32), (96, 64),
    (2, 4), (4, 8), (8, 16), (16, 32), (32, 64),
    (2, 8), (4, 16), (8, 32),
))

# Request-count shares. CPU-intensive flavors carry about 12x the CPU demand
# and about 3x the memory demand of MEM-intensive ones; within MEM-intensive
# CPU demand roughly 30% comes from the 1:4 flavors.
_CI_SHARES = {"12U8G": 0.55, "24U16G": 0.25, "48U32G": 0.13, "96U64G": 0.07}
_MI_SHARES = {"2U4G": 0.30, "4U8G": 0.20, "8U16G": 0.10, "16U32G": 0.04, "32U64G": 0.01,
              "2U8G": 0.20, "4U16G": 0.10, "8U32G": 0.05}
_CI_FRACTION = 0.674
DEFAULT_WEIGHTS: Mapping[str, float] = {
    **{k: round(v * _CI_FRACTION, 6) for k, v in _CI_SHARES.items()},
    **{k: round(v * (1 - _CI_FRACTION), 6) for k, v in _MI_SHARES.items()},
}

# Relative deletion hazard for the "mixed" preset: MEM-intensive VMs live ~5x
# longer, which makes the live demand match a 128U160G machine's shape.
MIXED_DELETE_WEIGHTS: Mapping[str, float] = {k: 0.2 for k in _MI_SHARES}


@dataclass(frozen=True)
class SynthConfig:
    """Seeded trace generator settings.

    At each step a live VM is deleted with probability ``delete_prob``,
    otherwise a VM of a flavor drawn from ``flavor_weights`` is created. The
    victim is chosen uniformly unless ``delete_weights`` gives per-flavor
    relative hazards (missing flavors weigh 1).
    """

    flavor_weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    delete_prob: float = 0.3
    length: int = 20000
    seed: int = 0
    delete_weights: Mapping[str, float] = field(default_factory=dict)
    flavors: Sequence[VmSpec] = DEFAULT_FLAVORS

    def __post_init__(self):
        if not 0 <= self.delete_prob < 1:
            raise ConfigError("delete_prob must lie in [0, 1)")
        if self.length < 0:
            raise ConfigError("length must be >= 0")
        known = {f.flavor_id for f in self.flavors}
        unknown = (set(self.flavor_weights) | set(self.delete_weights)) - known
        if unknown:
            raise ConfigError(f"weights for unknown flavors: {sorted(unknown)}")
        if any(w < 0 for w in self.flavor_weights.values()):
            raise ConfigError("flavor weights must be non-negative")
        if any(w <= 0 for w in self.delete_weights.values()):
            raise ConfigError("delete weights must be positive")
        if abs(sum(self.flavor_weights.values()) - 1) > 1e-6:
            raise ConfigError(f"flavor weights sum to {sum(self.flavor_weights.values())}, not 1")

    def describe(self) -> dict:
        return {"flavor_weights": dict(self.flavor_weights), "delete_prob": self.delete_prob,
                "length": self.length, "seed": self.seed,
                "delete_weights": dict(self.delete_weights),
                "flavors": [str(f) for f in self.flavors]}


def mixed_preset(length: int = 40000, seed: int = 1) -> SynthConfig:
    """Churn-heavy mixed CPU/MEM-intensive workload used by the benchmark suites."""
    return SynthConfig(dict(DEFAULT_WEIGHTS), delete_prob=0.49, length=length, seed=seed,
                       delete_weights=dict(MIXED_DELETE_WEIGHTS))


def synth_generate(config: SynthConfig) -> Trace:
    rng = random.Random(config.seed)
    by_id = {f.flavor_id: f for f in config.flavors}
    ids = [fid for fid, w in config.flavor_weights.items() if w > 0]
    weights = [config.flavor_weights[fid] for fid in ids]
    hazard = [config.delete_weights.get(fid, 1.0) for fid in ids]
    live: List[List[str]] = [[] for _ in ids]
    n_live = 0
    requests: List[Request] = []
    next_id = 0
    for step in range(config.length):
        if n_live and rng.random() < config.delete_prob:
            # pick a flavor by hazard * live count, then a uniform VM of it
            f = rng.choices(range(len(ids)), [h * len(v) for h, v in zip(hazard, live)])[0]
            pool = live[f]
            i = rng.randrange(len(pool))
            vm_id = pool[i]
            last = pool.pop()
            if i < len(pool):
                pool[i] = last
            n_live -= 1
            requests.append(Request(vm_id, Event.DELETE, None, step, step))
        else:
            f = rng.choices(range(len(ids)), weights)[0]
            vm_id = str(next_id)
            next_id += 1
            live[f].append(vm_id)
            n_live += 1
            requests.append(Request(vm_id, Event.CREATE, by_id[ids[f]], step, step))
    return Trace(requests, FlavorSet(by_id[fid] for fid in ids))


def demand_summary(trace: Trace, pm_cpu: int, pm_mem: int) -> Dict[str, Dict[str, int]]:
    """Total CPU/memory requested per role, over all creations."""
    from .reassigner import categorize

    out = {role.value: {"count": 0, "cpu": 0, "mem": 0} for role in Role}
    for r in trace.requests:
        if r.event is Event.CREATE:
            row = out[categorize(r.spec, pm_cpu, pm_mem).value]
            row["count"] += 1
            row["cpu"] += r.spec.cpu
            row["mem"] += r.spec.mem
    return out
