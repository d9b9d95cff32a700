"""Role pre-assignment intensifier that wraps any base placement policy.

Every machine starts partitioned into a CPU-intensive region (c1, m1) and a
MEM-intensive region (c2, m2). Requests are categorized by their CPU:memory
ratio and only offered machines whose matching region (or whole machine, once
the machine is shared) can host them. Machines are switched to shared when a
request would otherwise be rejected, or when the two virtual clusters' fill
levels drift apart by at least ``alpha`` machine-equivalents.
"""
from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .alw import ImbalanceInputs, alw_cpu, alw_mem, imbalance
from .errors import ConfigError, InfeasibleAssignment, NonEmptyCluster
from .model import Cluster, ClusterConfig, FlavorSet, Partitioned, Placement, Role, VmSpec, can_fit
from .schedulers import Candidate, SchedulerKind, choose, make_candidate


def categorize(spec: VmSpec, pm_cpu: int, pm_mem: int) -> Role:
    """CPU-intensive iff cpu/mem >= pm_cpu/pm_mem (compared by cross-multiplication)."""
    return Role.CPU if spec.cpu * pm_mem >= spec.mem * pm_cpu else Role.MEM


@dataclass(frozen=True)
class AssignmentPlan:
    c1: int
    m1: int
    c2: int
    m2: int
    objective: float
    lam: float

    @property
    def partition(self) -> Partitioned:
        return Partitioned(self.c1, self.m1, self.c2, self.m2)

    def as_dict(self) -> dict:
        return {"c1": self.c1, "m1": self.m1, "c2": self.c2, "m2": self.m2,
                "objective": self.objective, "lambda": self.lam}


def region_wastes(c1: int, m1: int, c2: int, m2: int,
                  v_ci: Sequence[VmSpec], v_mi: Sequence[VmSpec]) -> Tuple[int, int]:
    """(total CPU ALW, total memory ALW) of a split, summed over both regions."""
    waste_c = alw_cpu(c1, m1, v_ci) + alw_cpu(c2, m2, v_mi)
    waste_m = alw_mem(c1, m1, v_ci) + alw_mem(c2, m2, v_mi)
    return waste_c, waste_m


def plan_objective(c1: int, m1: int, c2: int, m2: int,
                   v_ci: Sequence[VmSpec], v_mi: Sequence[VmSpec], lam: float) -> float:
    waste_c, waste_m = region_wastes(c1, m1, c2, m2, v_ci, v_mi)
    return lam * waste_c + (1 - lam) * waste_m


def _largest_bounds(flavors: Sequence[VmSpec], by_cpu: bool) -> Tuple[int, int]:
    # every maximum must fit, so take the component-wise max over the tied flavors
    key = (lambda f: f.cpu) if by_cpu else (lambda f: f.mem)
    top = max(key(f) for f in flavors)
    tied = [f for f in flavors if key(f) == top]
    return max(f.cpu for f in tied), max(f.mem for f in tied)


def solve_assignment(r_c: int, r_m: int, v_ci: Sequence[VmSpec], v_mi: Sequence[VmSpec],
                     lam: float = 0.5) -> AssignmentPlan:
    """Exact minimizer of the weighted region ALW over all integer splits.

    Region 1 must hold the largest CPU-intensive flavor (largest by CPU) and
    region 2 the largest MEM-intensive flavor (largest by memory). Among
    equal objectives the split with the smaller unweighted waste wins, then
    the larger c1, then the larger m1.
    """
    v_ci, v_mi = list(v_ci), list(v_mi)
    if not v_ci or not v_mi:
        raise InfeasibleAssignment("both role flavor sets must be nonempty")
    if not 0 <= lam <= 1:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    lo_c1, lo_m1 = _largest_bounds(v_ci, by_cpu=True)
    lo_c2, lo_m2 = _largest_bounds(v_mi, by_cpu=False)
    if lo_c1 + lo_c2 > r_c:
        raise InfeasibleAssignment(
            f"CPU: c1 >= {lo_c1} and c2 >= {lo_c2} cannot both hold with {r_c}U per machine")
    if lo_m1 + lo_m2 > r_m:
        raise InfeasibleAssignment(
            f"memory: m1 >= {lo_m1} and m2 >= {lo_m2} cannot both hold with {r_m}G per machine")

    weight = Fraction(lam)
    best_key = None
    best = None
    for c1 in range(lo_c1, r_c - lo_c2 + 1):
        c2 = r_c - c1
        for m1 in range(lo_m1, r_m - lo_m2 + 1):
            m2 = r_m - m1
            waste_c, waste_m = region_wastes(c1, m1, c2, m2, v_ci, v_mi)
            key = (weight * waste_c + (1 - weight) * waste_m, waste_c + waste_m, -c1, -m1)
            if best_key is None or key < best_key:
                best_key, best = key, (c1, m1, c2, m2)
    c1, m1, c2, m2 = best
    return AssignmentPlan(c1, m1, c2, m2, float(best_key[0]), lam)


def plan_for(flavors: Iterable[VmSpec], config: ClusterConfig, lam: float = 0.5,
             override: Optional[Tuple[int, int]] = None) -> AssignmentPlan:
    """Solve (or evaluate a fixed (c1, m1) override) for a flavor set on ``config`` machines."""
    fs = flavors if isinstance(flavors, FlavorSet) else FlavorSet(flavors)
    v_ci, v_mi = fs.split(config.pm_cpu, config.pm_mem)
    if override is None:
        return solve_assignment(config.pm_cpu, config.pm_mem, v_ci, v_mi, lam)
    c1, m1 = override
    c2, m2 = config.pm_cpu - c1, config.pm_mem - m1
    if min(c1, m1, c2, m2) < 0:
        raise ConfigError(f"plan override {c1}U{m1}G exceeds the machine size")
    if not v_ci or not v_mi:
        objective = math.nan
    else:
        objective = plan_objective(c1, m1, c2, m2, v_ci, v_mi, lam)
    return AssignmentPlan(c1, m1, c2, m2, objective, lam)


def initialize(cluster: Cluster, plan: AssignmentPlan) -> None:
    if cluster.placements or any(pm.used_cpu or pm.used_mem for pm in cluster.pms):
        raise NonEmptyCluster("role regions can only be assigned on an empty cluster")
    if plan.c1 + plan.c2 != cluster.config.pm_cpu or plan.m1 + plan.m2 != cluster.config.pm_mem:
        raise ConfigError(f"plan {plan.as_dict()} does not match the machine size")
    part = plan.partition
    for pm in cluster.pms:
        pm.partition = part


def eligible_candidates(cluster: Cluster, spec: VmSpec, role: Role) -> List[Candidate]:
    """Machines whose ``role`` region (partitioned) or whole residual (shared) fits ``spec``."""
    config = cluster.config
    out = []
    for pm in cluster.pms:
        region = None if pm.partition is None else role
        if can_fit(pm, spec, region, config):
            out.append(make_candidate(pm, region))
    return out


def unassign_emergent(cluster: Cluster, spec: VmSpec, role: Role) -> Optional[int]:
    """Share the first partitioned machine whose combined free space fits ``spec``."""
    config = cluster.config
    for pm in cluster.pms:
        if pm.partition is not None and can_fit(pm, spec, None, config):
            pm.partition = None
            return pm.pm_id
    return None


@dataclass
class IntensifierState:
    plan: AssignmentPlan
    alpha: float
    n_unassign_imbalance: int = 0
    n_unassign_emergent: int = 0
    unassigned: List[int] = field(default_factory=list)


def imbalance_inputs(cluster: Cluster, state: IntensifierState) -> ImbalanceInputs:
    ci = cluster.role_totals[Role.CPU]
    mi = cluster.role_totals[Role.MEM]
    p = state.plan
    return ImbalanceInputs(ci[0], ci[1], mi[0], mi[1], p.c1, p.m1, p.c2, p.m2,
                           state.n_unassign_imbalance)


def maybe_unassign_imbalance(cluster: Cluster, state: IntensifierState) -> Optional[int]:
    """Share the lowest-id partitioned machine with both regions empty if the imbalance >= alpha."""
    if imbalance(imbalance_inputs(cluster, state)) < state.alpha:
        return None
    for pm in cluster.pms:
        if pm.partition is not None and pm.used_cpu == 0 and pm.used_mem == 0:
            pm.partition = None
            state.n_unassign_imbalance += 1
            state.unassigned.append(pm.pm_id)
            return pm.pm_id
    return None


_ALPHA_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\*?\s*([nN]?)\s*$")


def parse_alpha(expr: Union[str, float, int], n_pms: int) -> float:
    """'0.3N' -> 0.3 * n_pms; plain numbers are absolute; 'inf' disables the rule."""
    if isinstance(expr, (int, float)):
        return float(expr)
    if expr.strip().lower() in ("inf", "infinity", "none", "off"):
        return math.inf
    m = _ALPHA_RE.match(expr)
    if not m:
        raise ConfigError(f"cannot parse alpha {expr!r} (expected e.g. 0.3N or 6)")
    value = float(m.group(1))
    return value * n_pms if m.group(2) else value


@dataclass(frozen=True)
class IntensifierConfig:
    lam: float = 0.5
    alpha: Union[str, float] = "0.3N"
    plan: Optional[Tuple[int, int]] = None  # (c1, m1) override; None solves the assignment
    emergent: bool = True
    imbalance: bool = True
    start_shared: bool = False

    def describe(self) -> dict:
        return {"lambda": self.lam, "alpha": self.alpha,
                "plan": None if self.plan is None else list(self.plan),
                "emergent": self.emergent, "imbalance": self.imbalance,
                "start_shared": self.start_shared}


class IntensifiedScheduler:
    """Base policy restricted to virtual clusters, with emergent and imbalance release."""

    def __init__(self, base: SchedulerKind, plan: Optional[AssignmentPlan], alpha: float = math.inf,
                 emergent: bool = True, imbalance: bool = True, start_shared: bool = False,
                 rng: Optional[random.Random] = None):
        self.base = base
        self.plan = plan
        self.alpha = alpha
        self.emergent = emergent
        self.use_imbalance = imbalance
        self.start_shared = start_shared or plan is None
        self.rng = rng if rng is not None else random.Random(getattr(base, "seed", 0))
        self.state: Optional[IntensifierState] = None

    @property
    def label(self) -> str:
        return f"{self.base.name.upper()}+RA"

    def setup(self, cluster: Cluster) -> None:
        if self.plan is not None:
            self.state = IntensifierState(self.plan, self.alpha)
        if not self.start_shared:
            initialize(cluster, self.plan)

    def schedule(self, cluster: Cluster, vm_id: str, spec: VmSpec) -> Optional[Placement]:
        config = cluster.config
        role = categorize(spec, config.pm_cpu, config.pm_mem)
        candidates = eligible_candidates(cluster, spec, role)
        if not candidates and self.emergent:
            pm_id = unassign_emergent(cluster, spec, role)
            if pm_id is None:
                return None
            if self.state is not None:
                self.state.n_unassign_emergent += 1
            candidates = eligible_candidates(cluster, spec, role)
        if not candidates:
            return None
        c = choose(self.base, candidates, spec, self.rng)
        placement = cluster.place(vm_id, spec, c.pm_id, c.region, role=role)
        if self.use_imbalance and self.state is not None:
            maybe_unassign_imbalance(cluster, self.state)
        return placement

    def release(self, cluster: Cluster, vm_id: str) -> None:
        cluster.release(vm_id)

    @property
    def unassign_counts(self) -> dict:
        if self.state is None:
            return {"emergent": 0, "imbalance": 0}
        return {"emergent": self.state.n_unassign_emergent,
                "imbalance": self.state.n_unassign_imbalance}


def intensify(base: SchedulerKind, plan: Optional[AssignmentPlan] = None, alpha: float = math.inf,
              **kwargs) -> IntensifiedScheduler:
    return IntensifiedScheduler(base, plan, alpha, **kwargs)


def build_intensified(base: SchedulerKind, flavors: Iterable[VmSpec], config: ClusterConfig,
                      icfg: IntensifierConfig) -> IntensifiedScheduler:
    plan = plan_for(flavors, config, icfg.lam, icfg.plan)
    return IntensifiedScheduler(base, plan, parse_alpha(icfg.alpha, config.n_pms),
                                emergent=icfg.emergent, imbalance=icfg.imbalance,
                                start_shared=icfg.start_shared)
