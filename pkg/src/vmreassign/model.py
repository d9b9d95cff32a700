"""Domain types: flavors, requests' specs, NUMA nodes, machines and the cluster.

A machine is either *shared* (``partition is None``; any VM may use the whole
machine) or *partitioned* into a CPU-intensive and a MEM-intensive region.
Region usage is tracked on every NUMA node and kept even after a machine is
switched back to shared, so that cluster-wide per-role sums stay meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import CapacityViolation, ConfigError, EmptyFlavorSet, InvariantViolation, UnknownVm


class Role(str, Enum):
    CPU = "ci"
    MEM = "mi"

    @property
    def other(self) -> "Role":
        return Role.MEM if self is Role.CPU else Role.CPU


@dataclass(frozen=True)
class VmSpec:
    flavor_id: str
    cpu: int
    mem: int

    def __post_init__(self):
        if self.cpu < 1 or self.mem < 1:
            raise ConfigError(f"flavor {self.flavor_id!r} needs cpu >= 1 and mem >= 1")

    @classmethod
    def of(cls, cpu: int, mem: int) -> "VmSpec":
        return cls(f"{cpu}U{mem}G", cpu, mem)

    def __str__(self):
        return f"{self.cpu}U{self.mem}G"


class FlavorSet:
    """The universe of VM specifications a trace may request."""

    def __init__(self, flavors: Iterable[VmSpec]):
        self.flavors: Tuple[VmSpec, ...] = tuple(flavors)
        if not self.flavors:
            raise EmptyFlavorSet("flavor set is empty")
        self._by_id: Dict[str, VmSpec] = {}
        for f in self.flavors:
            if f.flavor_id in self._by_id:
                raise ConfigError(f"duplicate flavor id {f.flavor_id!r}")
            self._by_id[f.flavor_id] = f

    def __iter__(self):
        return iter(self.flavors)

    def __len__(self):
        return len(self.flavors)

    def __contains__(self, spec: VmSpec) -> bool:
        return self._by_id.get(spec.flavor_id) == spec

    def __eq__(self, other):
        return isinstance(other, FlavorSet) and set(self.flavors) == set(other.flavors)

    def __repr__(self):
        return f"FlavorSet({', '.join(map(str, self.flavors))})"

    def get(self, flavor_id: str) -> VmSpec:
        return self._by_id[flavor_id]

    def role_of(self, pm_cpu: int, pm_mem: int) -> Dict[str, Role]:
        from .reassigner import categorize

        return {f.flavor_id: categorize(f, pm_cpu, pm_mem) for f in self.flavors}

    def split(self, pm_cpu: int, pm_mem: int) -> Tuple[List[VmSpec], List[VmSpec]]:
        """Return (CPU-intensive flavors, MEM-intensive flavors)."""
        roles = self.role_of(pm_cpu, pm_mem)
        ci = [f for f in self.flavors if roles[f.flavor_id] is Role.CPU]
        mi = [f for f in self.flavors if roles[f.flavor_id] is Role.MEM]
        return ci, mi

    def check_fits(self, config: "ClusterConfig") -> None:
        for f in self.flavors:
            if f.cpu > config.pm_cpu or f.mem > config.pm_mem:
                raise ConfigError(
                    f"flavor {f} does not fit an empty {config.pm_cpu}U{config.pm_mem}G machine")


@dataclass(frozen=True)
class ClusterConfig:
    n_pms: int
    pm_cpu: int = 128
    pm_mem: int = 160
    numa_per_pm: int = 1
    # flavor_id -> force large (True) / small (False), bypassing the size rule
    large_overrides: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_pms < 1:
            raise ConfigError("n_pms must be >= 1")
        if self.pm_cpu < 1 or self.pm_mem < 1:
            raise ConfigError("machine capacities must be positive")
        if self.numa_per_pm < 1:
            raise ConfigError("numa_per_pm must be >= 1")
        if self.pm_cpu % self.numa_per_pm or self.pm_mem % self.numa_per_pm:
            raise ConfigError(
                f"capacity {self.pm_cpu}U{self.pm_mem}G not divisible by {self.numa_per_pm} NUMA nodes")

    def is_large(self, spec: VmSpec) -> bool:
        override = self.large_overrides.get(spec.flavor_id)
        if override is not None:
            return override
        k = self.numa_per_pm
        return spec.cpu * k > self.pm_cpu or spec.mem * k > self.pm_mem


def even_split(amount: int, parts: int) -> List[int]:
    """Split an integer amount into ``parts`` near-equal integers (extra units go first)."""
    base, extra = divmod(amount, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


@dataclass
class NumaNode:
    cap_cpu: int
    cap_mem: int
    used_cpu: int = 0
    used_mem: int = 0
    # usage of region-tagged placements, per role: [cpu, mem]
    region_used: Dict[Role, List[int]] = field(
        default_factory=lambda: {Role.CPU: [0, 0], Role.MEM: [0, 0]})

    @property
    def free_cpu(self) -> int:
        return self.cap_cpu - self.used_cpu

    @property
    def free_mem(self) -> int:
        return self.cap_mem - self.used_mem


@dataclass(frozen=True)
class Partitioned:
    """Role-region capacities of a machine (c1, m1 for CPU-intensive; c2, m2 for MEM-intensive)."""

    c1: int
    m1: int
    c2: int
    m2: int

    def capacity(self, role: Role) -> Tuple[int, int]:
        return (self.c1, self.m1) if role is Role.CPU else (self.c2, self.m2)

    def numa_capacity(self, role: Role, numa_idx: int, k: int) -> Tuple[int, int]:
        cpu, mem = self.capacity(role)
        if k == 1:
            return cpu, mem
        return even_split(cpu, k)[numa_idx], even_split(mem, k)[numa_idx]


@dataclass
class PhysicalMachine:
    pm_id: int
    numa: List[NumaNode]
    partition: Optional[Partitioned] = None  # None: shared

    @classmethod
    def empty(cls, pm_id: int, config: ClusterConfig) -> "PhysicalMachine":
        k = config.numa_per_pm
        return cls(pm_id, [NumaNode(config.pm_cpu // k, config.pm_mem // k) for _ in range(k)])

    @property
    def is_shared(self) -> bool:
        return self.partition is None

    @property
    def cap_cpu(self) -> int:
        return sum(n.cap_cpu for n in self.numa)

    @property
    def cap_mem(self) -> int:
        return sum(n.cap_mem for n in self.numa)

    @property
    def used_cpu(self) -> int:
        return sum(n.used_cpu for n in self.numa)

    @property
    def used_mem(self) -> int:
        return sum(n.used_mem for n in self.numa)

    @property
    def free_cpu(self) -> int:
        return self.cap_cpu - self.used_cpu

    @property
    def free_mem(self) -> int:
        return self.cap_mem - self.used_mem

    def region_used(self, role: Role) -> Tuple[int, int]:
        return (sum(n.region_used[role][0] for n in self.numa),
                sum(n.region_used[role][1] for n in self.numa))

    def region_free(self, role: Role) -> Tuple[int, int]:
        if self.partition is None:
            raise InvariantViolation(f"pm {self.pm_id} is shared; it has no role regions")
        cap_c, cap_m = self.partition.capacity(role)
        used_c, used_m = self.region_used(role)
        return cap_c - used_c, cap_m - used_m

    def numa_free(self, idx: int, region: Optional[Role]) -> Tuple[int, int]:
        node = self.numa[idx]
        if region is None:
            return node.free_cpu, node.free_mem
        cap_c, cap_m = self.partition.numa_capacity(region, idx, len(self.numa))
        used_c, used_m = node.region_used[region]
        return min(cap_c - used_c, node.free_cpu), min(cap_m - used_m, node.free_mem)


@dataclass(frozen=True)
class Placement:
    vm_id: str
    pm_id: int
    numa_ids: Tuple[int, ...]
    # per-NUMA (cpu, mem) actually charged, aligned with numa_ids
    shares: Tuple[Tuple[int, int], ...]
    role_region: Optional[Role] = None
    # role the VM is accounted under for the imbalance sums (None: not tracked)
    role: Optional[Role] = None

    @property
    def cpu(self) -> int:
        return sum(c for c, _ in self.shares)

    @property
    def mem(self) -> int:
        return sum(m for _, m in self.shares)


def _numa_fit(pm: PhysicalMachine, spec: VmSpec, region: Optional[Role],
              config: ClusterConfig) -> Optional[Tuple[Tuple[int, ...], Tuple[Tuple[int, int], ...]]]:
    k = len(pm.numa)
    if k == 1 or not config.is_large(spec):
        for i in range(k):
            fc, fm = pm.numa_free(i, region)
            if spec.cpu <= fc and spec.mem <= fm:
                return (i,), ((spec.cpu, spec.mem),)
        return None
    shares = tuple(zip(even_split(spec.cpu, k), even_split(spec.mem, k)))
    for i, (c, m) in enumerate(shares):
        fc, fm = pm.numa_free(i, region)
        if c > fc or m > fm:
            return None
    return tuple(range(k)), shares


def can_fit(pm: PhysicalMachine, spec: VmSpec, region: Optional[Role], config: ClusterConfig) -> bool:
    """True iff ``spec`` fits the given role region of ``pm`` (or the whole machine if region is None)."""
    if region is not None and pm.partition is None:
        return False
    return _numa_fit(pm, spec, region, config) is not None


class Cluster:
    """Mutable placement state for one simulation run."""

    def __init__(self, config: ClusterConfig):
        self.config = config
        self.pms: List[PhysicalMachine] = [PhysicalMachine.empty(i, config) for i in range(config.n_pms)]
        self.placements: Dict[str, Placement] = {}
        # cluster-wide usage of role-tagged placements: role -> [cpu, mem]
        self.role_totals: Dict[Role, List[int]] = {Role.CPU: [0, 0], Role.MEM: [0, 0]}

    def __len__(self):
        return len(self.pms)

    def can_fit(self, pm_id: int, spec: VmSpec, region: Optional[Role] = None) -> bool:
        return can_fit(self.pms[pm_id], spec, region, self.config)

    def place(self, vm_id: str, spec: VmSpec, pm_id: int, region: Optional[Role] = None,
              role: Optional[Role] = None) -> Placement:
        if vm_id in self.placements:
            raise InvariantViolation(f"vm {vm_id!r} is already placed")
        pm = self.pms[pm_id]
        if region is not None and pm.partition is None:
            raise CapacityViolation(f"pm {pm_id} is shared; cannot place into region {region.value}")
        fit = _numa_fit(pm, spec, region, self.config)
        if fit is None:
            where = f"region {region.value} of " if region else ""
            raise CapacityViolation(f"vm {vm_id!r} ({spec}) does not fit {where}pm {pm_id}")
        numa_ids, shares = fit
        if region is not None:
            role = region
        for i, (c, m) in zip(numa_ids, shares):
            node = pm.numa[i]
            node.used_cpu += c
            node.used_mem += m
            if region is not None:
                node.region_used[region][0] += c
                node.region_used[region][1] += m
        if role is not None:
            self.role_totals[role][0] += spec.cpu
            self.role_totals[role][1] += spec.mem
        placement = Placement(vm_id, pm_id, numa_ids, shares, region, role)
        self.placements[vm_id] = placement
        return placement

    def release(self, vm_id: str) -> Placement:
        try:
            placement = self.placements.pop(vm_id)
        except KeyError:
            raise UnknownVm(vm_id) from None
        pm = self.pms[placement.pm_id]
        for i, (c, m) in zip(placement.numa_ids, placement.shares):
            node = pm.numa[i]
            node.used_cpu -= c
            node.used_mem -= m
            if placement.role_region is not None:
                node.region_used[placement.role_region][0] -= c
                node.region_used[placement.role_region][1] -= m
        if placement.role is not None:
            self.role_totals[placement.role][0] -= placement.cpu
            self.role_totals[placement.role][1] -= placement.mem
        return placement

    def audit(self) -> None:
        """Recompute every usage counter from the live placements; raise on any mismatch."""
        k = self.config.numa_per_pm
        used = [[[0, 0] for _ in range(k)] for _ in self.pms]
        region = [[{Role.CPU: [0, 0], Role.MEM: [0, 0]} for _ in range(k)] for _ in self.pms]
        totals = {Role.CPU: [0, 0], Role.MEM: [0, 0]}
        for p in self.placements.values():
            for i, (c, m) in zip(p.numa_ids, p.shares):
                used[p.pm_id][i][0] += c
                used[p.pm_id][i][1] += m
                if p.role_region is not None:
                    region[p.pm_id][i][p.role_region][0] += c
                    region[p.pm_id][i][p.role_region][1] += m
            if p.role is not None:
                totals[p.role][0] += p.cpu
                totals[p.role][1] += p.mem
        for pm in self.pms:
            for i, node in enumerate(pm.numa):
                if [node.used_cpu, node.used_mem] != used[pm.pm_id][i]:
                    raise InvariantViolation(
                        f"pm {pm.pm_id} numa {i}: usage {(node.used_cpu, node.used_mem)} "
                        f"!= placements {tuple(used[pm.pm_id][i])}")
                if not (0 <= node.used_cpu <= node.cap_cpu and 0 <= node.used_mem <= node.cap_mem):
                    raise InvariantViolation(f"pm {pm.pm_id} numa {i}: usage out of bounds")
                if node.region_used != region[pm.pm_id][i]:
                    raise InvariantViolation(f"pm {pm.pm_id} numa {i}: region usage drifted")
            if pm.partition is not None:
                for role in Role:
                    fc, fm = pm.region_free(role)
                    if fc < 0 or fm < 0:
                        raise InvariantViolation(f"pm {pm.pm_id}: region {role.value} over capacity")
        if totals != self.role_totals:
            raise InvariantViolation(f"role totals {self.role_totals} != placements {totals}")

    def snapshot(self) -> tuple:
        """Hashable view of the full usage state (for equality checks in tests)."""
        return (
            tuple((pm.partition,
                   tuple((n.used_cpu, n.used_mem, tuple(n.region_used[Role.CPU]),
                          tuple(n.region_used[Role.MEM])) for n in pm.numa))
                  for pm in self.pms),
            tuple(sorted((k, v) for k, v in self.placements.items())),
            tuple(self.role_totals[Role.CPU]), tuple(self.role_totals[Role.MEM]),
        )


def flavor_set_of(specs: Sequence[VmSpec]) -> FlavorSet:
    seen: Dict[str, VmSpec] = {}
    for s in specs:
        seen.setdefault(s.flavor_id, s)
    return FlavorSet(seen.values())
