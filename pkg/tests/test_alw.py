import pytest
from hypothesis import given, settings, strategies as st

from vmreassign.alw import AlwPair, ImbalanceInputs, alw_cpu, alw_mem, cluster_alw, imbalance
from vmreassign.errors import EmptyFlavorSet, ZeroRegionCapacity
from vmreassign.model import Cluster, ClusterConfig, VmSpec

from .oracles import packing_alw_cpu, packing_alw_mem

V = [VmSpec.of(12, 8), VmSpec.of(2, 4)]


def test_alw_cpu_examples():
    assert alw_cpu(0, 0, V) == 0
    # no memory left: nothing can be packed, all CPU is wasted
    assert alw_cpu(88, 0, V) == 88
    assert alw_cpu(13, 10, V) == 1


def test_alw_mem_examples():
    # no CPU left: all memory is wasted
    assert alw_mem(0, 96, V) == 96
    assert alw_mem(5, 8, [VmSpec.of(2, 4)]) == 0
    assert alw_mem(40, 0, V) == 0


def test_alw_matches_oracle_on_examples():
    assert packing_alw_cpu(13, 10, V) == 1
    assert packing_alw_mem(5, 8, [VmSpec.of(2, 4)]) == 0


def test_empty_flavor_set():
    with pytest.raises(EmptyFlavorSet):
        alw_cpu(1, 1, [])
    with pytest.raises(EmptyFlavorSet):
        cluster_alw(Cluster(ClusterConfig(1)), [])


def test_cluster_alw_empty_cluster_tiles_exactly():
    # 8U10G tiles 128U160G sixteen times
    assert cluster_alw(Cluster(ClusterConfig(5)), [VmSpec.of(8, 10)]) == AlwPair(0, 0)


def test_cluster_alw_full_pm_is_zero():
    c = Cluster(ClusterConfig(1))
    c.place("a", VmSpec.of(128, 160), 0)
    assert cluster_alw(c, V) == AlwPair(0, 0)


def test_cluster_alw_sums_per_pm():
    c = Cluster(ClusterConfig(2))
    for pm in (0, 1):
        c.place(f"x{pm}", VmSpec.of(115, 150), pm)  # residual (13, 10)
    assert cluster_alw(c, V).alw_cpu == 2


def test_cluster_alw_ignores_partition():
    from vmreassign.model import Partitioned

    c = Cluster(ClusterConfig(1))
    c.pms[0].partition = Partitioned(96, 64, 32, 96)
    assert cluster_alw(c, [VmSpec.of(8, 10)]) == AlwPair(0, 0)


flavors = st.lists(st.builds(VmSpec.of, st.integers(1, 16), st.integers(1, 16)), min_size=1, max_size=4)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 64), st.integers(0, 64), flavors)
def test_alw_equals_packing_oracle(dc, dm, vset):
    assert alw_cpu(dc, dm, vset) == packing_alw_cpu(dc, dm, vset)
    assert alw_mem(dc, dm, vset) == packing_alw_mem(dc, dm, vset)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200), flavors)
def test_alw_bounds(dc, dm, vset):
    assert 0 <= alw_cpu(dc, dm, vset) <= dc
    assert 0 <= alw_mem(dc, dm, vset) <= dm


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200), flavors, st.builds(VmSpec.of, st.integers(1, 16), st.integers(1, 16)))
def test_adding_a_flavor_never_increases_alw(dc, dm, vset, extra):
    assert alw_cpu(dc, dm, vset + [extra]) <= alw_cpu(dc, dm, vset)
    assert alw_mem(dc, dm, vset + [extra]) <= alw_mem(dc, dm, vset)


def test_imbalance_examples():
    assert imbalance(ImbalanceInputs(0, 0, 0, 0, 96, 64, 32, 96)) == 0
    assert imbalance(ImbalanceInputs(96, 64, 0, 0, 96, 64, 32, 96)) == 1
    assert imbalance(ImbalanceInputs(96, 64, 0, 0, 96, 64, 32, 96, n_unassign=1)) == 0


def test_imbalance_can_go_negative():
    assert imbalance(ImbalanceInputs(0, 0, 0, 0, 96, 64, 32, 96, n_unassign=2)) == -2


def test_imbalance_rejects_zero_region():
    with pytest.raises(ZeroRegionCapacity):
        imbalance(ImbalanceInputs(1, 1, 1, 1, 0, 64, 32, 96))


sums = st.integers(0, 5000)
caps = st.integers(1, 200)


@settings(max_examples=200, deadline=None)
@given(sums, sums, sums, sums, caps, caps, caps, caps, st.integers(0, 20))
def test_imbalance_symmetric_under_role_swap(a, b, c, d, c1, m1, c2, m2, n):
    x = imbalance(ImbalanceInputs(a, b, c, d, c1, m1, c2, m2, n))
    y = imbalance(ImbalanceInputs(c, d, a, b, c2, m2, c1, m1, n))
    assert x == y
