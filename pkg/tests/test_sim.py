from hypothesis import given, settings, strategies as st

from vmreassign.alw import AlwPair
from vmreassign.model import ClusterConfig, VmSpec
from vmreassign.reassigner import IntensifierConfig
from vmreassign.schedulers import BestFit, Bf2, FirstFit, RandomSearch
from vmreassign.sim import algorithm_label, quartiles, run, run_suite, summarize, RunResult
from vmreassign.trace import Event, FlavorSet, Request, SynthConfig, Trace, synth_generate

A = VmSpec.of(12, 8)


def make_trace(events):
    reqs = [Request(vm, ev, A if ev is Event.CREATE else None, i, i) for i, (vm, ev) in enumerate(events)]
    return Trace(reqs, FlavorSet([A]))


def test_empty_window():
    tr = make_trace([("a", Event.CREATE)])
    res = run(tr, 1, ClusterConfig(1), FirstFit())
    assert res.length == 0 and not res.terminated


def test_one_pm_single_flavor():
    tr = make_trace([(str(i), Event.CREATE) for i in range(15)])
    res = run(tr, 0, ClusterConfig(1), FirstFit())
    assert res.length == 10 and res.terminated
    # residual 8U80G: no 12U8G fits, so both leftovers are waste
    assert res.terminal_alw == AlwPair(8, 80)


def test_alternating_create_delete_never_terminates():
    events = []
    for i in range(25):
        events += [(str(i), Event.CREATE), (str(i), Event.DELETE)]
    res = run(make_trace(events), 0, ClusterConfig(1), FirstFit())
    assert res.length == 25 and not res.terminated


def test_delete_of_vm_from_before_window_is_ignored():
    tr = make_trace([("a", Event.CREATE), ("b", Event.CREATE), ("a", Event.DELETE)])
    assert run(tr, 1, ClusterConfig(1), FirstFit(), audit=True).length == 1


def test_quartiles_example():
    assert quartiles([4, 1, 3, 2]) == (1.75, 2.5, 3.25)


def test_summary_uses_population_std():
    results = [RunResult(0, 1, AlwPair(0, 2)), RunResult(1, 3, AlwPair(4, 6))]
    s = summarize(results)
    assert s.mean == 2 and s.alw_mem_std == 2 and s.alw_cpu_std == 2


def test_single_scenario_suite():
    tr = synth_generate(SynthConfig(length=800, seed=1, delete_prob=0.2))
    stats, results = run_suite(tr, [0], ClusterConfig(2), FirstFit())
    assert stats.n == 1 and stats.q1 == stats.median == stats.q3 == results[0].length


def test_parallel_suite_matches_serial():
    tr = synth_generate(SynthConfig(length=1500, seed=2, delete_prob=0.3))
    sc = [0, 100, 300, 600]
    ic = IntensifierConfig()
    assert run_suite(tr, sc, ClusterConfig(3), Bf2(), ic) == run_suite(tr, sc, ClusterConfig(3), Bf2(), ic, workers=2)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 5))
def test_more_machines_never_shorten_first_fit(seed, n):
    # no deletions: FF on N+1 machines fills the first N exactly as on N
    tr = synth_generate(SynthConfig(length=600, seed=seed, delete_prob=0))
    assert run(tr, 0, ClusterConfig(n + 1), FirstFit()).length >= run(tr, 0, ClusterConfig(n), FirstFit()).length


def test_labels():
    assert algorithm_label(RandomSearch(), None) == "Optimal"
    assert algorithm_label(FirstFit(), IntensifierConfig()) == "FF+RA"
    assert algorithm_label(BestFit(), None) == "BF"
