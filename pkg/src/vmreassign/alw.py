"""At-least-waste (ALW) metric and the virtual-cluster imbalance measure."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import EmptyFlavorSet, ZeroRegionCapacity
from .model import Cluster, VmSpec


@dataclass(frozen=True)
class AlwPair:
    alw_cpu: int
    alw_mem: int

    def __add__(self, other: "AlwPair") -> "AlwPair":
        return AlwPair(self.alw_cpu + other.alw_cpu, self.alw_mem + other.alw_mem)


def _flavors(vset: Iterable[VmSpec]):
    flavors = list(vset)
    if not flavors:
        raise EmptyFlavorSet("ALW needs at least one flavor")
    return flavors


def alw_cpu(delta_c: int, delta_m: int, vset: Iterable[VmSpec]) -> int:
    """CPU left over after the best single-flavor packing of the residual (delta_c, delta_m)."""
    return min(delta_c - v.cpu * min(delta_c // v.cpu, delta_m // v.mem) for v in _flavors(vset))


def alw_mem(delta_c: int, delta_m: int, vset: Iterable[VmSpec]) -> int:
    """Memory counterpart of :func:`alw_cpu`."""
    return min(delta_m - v.mem * min(delta_m // v.mem, delta_c // v.cpu) for v in _flavors(vset))


def alw(delta_c: int, delta_m: int, vset: Iterable[VmSpec]) -> AlwPair:
    flavors = _flavors(vset)
    return AlwPair(alw_cpu(delta_c, delta_m, flavors), alw_mem(delta_c, delta_m, flavors))


def cluster_alw(cluster: Cluster, vset: Iterable[VmSpec]) -> AlwPair:
    """Sum of per-machine ALW over whole-machine residuals (role regions are ignored)."""
    flavors = _flavors(vset)
    total = AlwPair(0, 0)
    for pm in cluster.pms:
        total = total + alw(pm.free_cpu, pm.free_mem, flavors)
    return total


@dataclass(frozen=True)
class ImbalanceInputs:
    sum_ci_cpu: float
    sum_ci_mem: float
    sum_mi_cpu: float
    sum_mi_mem: float
    c1: int
    m1: int
    c2: int
    m2: int
    n_unassign: int = 0


def imbalance(inputs: ImbalanceInputs) -> float:
    """Gap between the two virtual clusters' fill levels, in machine-equivalents.

    Each role's usage is divided by its per-machine region size, the absolute
    CPU and memory gaps are taken, and the smaller gap minus the number of
    machines already released for imbalance is returned. May be negative.
    """
    x = inputs
    if min(x.c1, x.m1, x.c2, x.m2) <= 0:
        raise ZeroRegionCapacity(f"region capacities must be positive, got {(x.c1, x.m1, x.c2, x.m2)}")
    gap_cpu = abs(x.sum_ci_cpu / x.c1 - x.sum_mi_cpu / x.c2)
    gap_mem = abs(x.sum_ci_mem / x.m1 - x.sum_mi_mem / x.m2)
    return min(gap_cpu, gap_mem) - x.n_unassign
