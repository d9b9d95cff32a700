import math

import pytest
from hypothesis import given, settings, strategies as st

from vmreassign.errors import InfeasibleAssignment, NonEmptyCluster
from vmreassign.model import Cluster, ClusterConfig, Partitioned, Role, VmSpec
from vmreassign.reassigner import (
    AssignmentPlan, IntensifierState, categorize, eligible_candidates,
    initialize, intensify, maybe_unassign_imbalance, parse_alpha, plan_for, plan_objective,
    solve_assignment, unassign_emergent,
)
from vmreassign.schedulers import BestFit, Bf2, FirstFit
from vmreassign.sim import run
from vmreassign.trace import DEFAULT_FLAVORS, SynthConfig, synth_generate

from .oracles import brute_force_assignment

PLAN = AssignmentPlan(96, 64, 32, 96, 0.0, 0.5)


def default_split():
    ci = [f for f in DEFAULT_FLAVORS if categorize(f, 128, 160) is Role.CPU]
    mi = [f for f in DEFAULT_FLAVORS if categorize(f, 128, 160) is Role.MEM]
    return ci, mi


def test_categorize():
    assert categorize(VmSpec.of(12, 8), 128, 160) is Role.CPU
    assert categorize(VmSpec.of(2, 4), 128, 160) is Role.MEM
    # exactly the machine ratio counts as CPU-intensive
    assert categorize(VmSpec.of(4, 5), 128, 160) is Role.CPU


def test_default_flavors_split_by_ratio():
    ci, mi = default_split()
    assert {f.cpu * 2 == f.mem * 3 for f in ci} == {True}
    assert len(ci) == 4 and len(mi) == 8


@pytest.mark.parametrize("lam", [0, 0.25, 0.5, 0.75, 1])
def test_default_plan_for_any_lambda(lam):
    ci, mi = default_split()
    plan = solve_assignment(128, 160, ci, mi, lam)
    assert (plan.c1, plan.m1, plan.c2, plan.m2) == (96, 64, 32, 96)
    assert plan.objective == 0


def test_tiny_plan_matches_hand_enumeration():
    plan = solve_assignment(4, 8, [VmSpec.of(2, 1)], [VmSpec.of(1, 2)], 1)
    assert (plan.c1, plan.m1, plan.c2, plan.m2) == (2, 4, 2, 4)
    assert brute_force_assignment(4, 8, [VmSpec.of(2, 1)], [VmSpec.of(1, 2)], 1)[:4] == (2, 4, 2, 4)


def test_infeasible_assignment():
    with pytest.raises(InfeasibleAssignment, match="CPU"):
        solve_assignment(64, 160, [VmSpec.of(96, 64)], [VmSpec.of(2, 4)], 0.5)
    with pytest.raises(InfeasibleAssignment):
        solve_assignment(128, 160, [], [VmSpec.of(2, 4)], 0.5)


def test_plan_override_evaluates_objective():
    plan = plan_for(DEFAULT_FLAVORS, ClusterConfig(1), 0.5, override=(108, 72))
    assert (plan.c2, plan.m2) == (20, 88)
    assert plan.objective == plan_objective(108, 72, 20, 88, *default_split(), 0.5)


small_flavors = st.lists(st.builds(VmSpec.of, st.integers(1, 6), st.integers(1, 6)), min_size=1, max_size=3)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(2, 14), small_flavors, small_flavors,
       st.sampled_from([0, 0.25, 0.5, 0.75, 1]))
def test_solver_matches_brute_force(r_c, r_m, a, b, lam):
    ci = [f for f in a + b if categorize(f, r_c, r_m) is Role.CPU]
    mi = [f for f in a + b if categorize(f, r_c, r_m) is Role.MEM]
    ci = list({f.flavor_id: f for f in ci}.values())
    mi = list({f.flavor_id: f for f in mi}.values())
    if not ci or not mi:
        return
    expected = brute_force_assignment(r_c, r_m, ci, mi, lam)
    if expected is None:
        with pytest.raises(InfeasibleAssignment):
            solve_assignment(r_c, r_m, ci, mi, lam)
        return
    plan = solve_assignment(r_c, r_m, ci, mi, lam)
    assert (plan.c1, plan.m1, plan.c2, plan.m2) == expected[:4]
    assert plan.objective == pytest.approx(expected[4])
    # order of the flavor lists does not matter
    shuffled = solve_assignment(r_c, r_m, list(reversed(ci)), list(reversed(mi)), lam)
    assert shuffled == plan


def test_initialize_partitions_every_pm():
    c = Cluster(ClusterConfig(3))
    initialize(c, PLAN)
    assert [pm.partition for pm in c.pms] == [Partitioned(96, 64, 32, 96)] * 3


def test_initialize_rejects_nonempty_cluster():
    c = Cluster(ClusterConfig(3))
    c.place("a", VmSpec.of(2, 4), 0)
    with pytest.raises(NonEmptyCluster):
        initialize(c, PLAN)


def test_eligible_candidates_on_fresh_cluster():
    c = Cluster(ClusterConfig(4))
    initialize(c, PLAN)
    cands = eligible_candidates(c, VmSpec.of(12, 8), Role.CPU)
    assert [x.pm_id for x in cands] == [0, 1, 2, 3]
    assert {x.region for x in cands} == {Role.CPU}


def test_eligible_candidates_only_shared_when_regions_full():
    c = Cluster(ClusterConfig(3))
    initialize(c, PLAN)
    for pm in (0, 1):
        c.place(f"m{pm}", VmSpec.of(32, 96), pm, Role.MEM)
    c.place("m2", VmSpec.of(32, 96), 2, Role.MEM)
    c.pms[2].partition = None
    cands = eligible_candidates(c, VmSpec.of(2, 4), Role.MEM)
    assert [(x.pm_id, x.region) for x in cands] == [(2, None)]


def test_region_too_small_even_though_pm_has_room():
    c = Cluster(ClusterConfig(1))
    initialize(c, PLAN)
    c.place("m", VmSpec.of(16, 64), 0, Role.MEM)
    # 32U64G fits the machine's combined free space, not the MEM region (16U32G left)
    assert c.pms[0].free_cpu >= 32 and c.pms[0].free_mem >= 64
    assert eligible_candidates(c, VmSpec.of(32, 64), Role.MEM) == []


def test_unassign_emergent_picks_first_fitting_pm():
    c = Cluster(ClusterConfig(4))
    initialize(c, PLAN)
    c.place("a", VmSpec.of(96, 64), 0, Role.CPU)
    c.place("b", VmSpec.of(32, 96), 0, Role.MEM)
    for pm in (1, 2, 3):
        c.place(f"m{pm}", VmSpec.of(16, 64), pm, Role.MEM)
    spec = VmSpec.of(32, 64)
    assert eligible_candidates(c, spec, Role.MEM) == []
    assert unassign_emergent(c, spec, Role.MEM) == 1
    assert c.pms[1].is_shared and not c.pms[2].is_shared
    assert [x.pm_id for x in eligible_candidates(c, spec, Role.MEM)] == [1]


def test_unassign_emergent_none_when_nothing_fits():
    c = Cluster(ClusterConfig(1))
    initialize(c, PLAN)
    c.place("a", VmSpec.of(96, 64), 0, Role.CPU)
    c.place("b", VmSpec.of(32, 96), 0, Role.MEM)
    assert unassign_emergent(c, VmSpec.of(2, 4), Role.MEM) is None


def _imbalanced_cluster(alpha):
    c = Cluster(ClusterConfig(3))
    initialize(c, PLAN)
    c.place("ci", VmSpec.of(96, 64), 0, Role.CPU)
    return c, IntensifierState(PLAN, alpha)


def test_imbalance_triggers_unassign_of_first_empty_pm():
    c, state = _imbalanced_cluster(0.9)
    assert maybe_unassign_imbalance(c, state) == 1
    assert c.pms[1].is_shared and not c.pms[2].is_shared
    assert state.n_unassign_imbalance == 1


def test_imbalance_below_threshold_does_nothing():
    c, state = _imbalanced_cluster(1.5)
    assert maybe_unassign_imbalance(c, state) is None
    assert not any(pm.is_shared for pm in c.pms)


def test_imbalance_without_empty_pm_does_not_count():
    c, state = _imbalanced_cluster(0.9)
    for pm in (1, 2):
        c.place(f"x{pm}", VmSpec.of(2, 4), pm, Role.MEM)
    assert maybe_unassign_imbalance(c, state) is None
    assert state.n_unassign_imbalance == 0


def test_parse_alpha():
    assert parse_alpha("0.3N", 100) == pytest.approx(30)
    assert parse_alpha("0.05n", 20) == pytest.approx(1)
    assert parse_alpha("6", 20) == 6
    assert parse_alpha(2.5, 20) == 2.5
    assert parse_alpha("inf", 20) == math.inf


def _trace(seed, length=3000):
    return synth_generate(SynthConfig(delete_prob=0.45, length=length, seed=seed))


@pytest.mark.parametrize("kind", [FirstFit(), BestFit(), Bf2()])
def test_all_shared_degrades_to_base(kind):
    tr = _trace(3)
    cfg = ClusterConfig(6, numa_per_pm=2)
    plain = run(tr, 0, cfg, kind, record=True)
    wrapped = run(tr, 0, cfg, intensify(kind, PLAN, alpha=0.0, start_shared=True), record=True)
    assert plain.event_log == wrapped.event_log
    assert plain.length == wrapped.length


def test_intensified_deletion_matches_plain_release():
    c = Cluster(ClusterConfig(2))
    s = intensify(FirstFit(), PLAN, alpha=math.inf)
    s.setup(c)
    s.schedule(c, "a", VmSpec.of(12, 8))
    before = c.snapshot()
    s.schedule(c, "b", VmSpec.of(2, 4))
    s.release(c, "b")
    assert c.snapshot() == before


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([FirstFit(), BestFit(), Bf2()]),
       st.sampled_from([0.5, 2.0, math.inf]), st.sampled_from([1, 2]))
def test_intensifier_invariants(seed, kind, alpha, k):
    tr = _trace(seed, 1500)
    cfg = ClusterConfig(5, numa_per_pm=k)
    c = Cluster(cfg)
    s = intensify(kind, PLAN, alpha=alpha)
    s.setup(c)
    unassign_seen = 0
    from vmreassign.trace import Event
    for req in tr.requests:
        if req.event is Event.DELETE:
            if req.vm_id in c.placements:
                s.release(c, req.vm_id)
            continue
        p = s.schedule(c, req.vm_id, req.spec)
        if p is None:
            break
        role = categorize(req.spec, 128, 160)
        # role isolation: region-tagged placements always match the request's role
        assert p.role_region in (None, role)
        assert p.role is role
        counts = s.unassign_counts
        assert counts["imbalance"] >= unassign_seen
        unassign_seen = counts["imbalance"]
        shared = sum(pm.is_shared for pm in c.pms)
        assert shared == counts["imbalance"] + counts["emergent"]
        c.audit()
