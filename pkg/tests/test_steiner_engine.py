import itertools
import math

import pytest

from errors import ConfigError, Disconnected, InvariantViolation, SizeLimit
from instance_io.generators import GeneratorConfig, gen_steiner
from oracles import drop_bruteforce_steiner, opt_krestricted_bruteforce, opt_steiner_exact, validate_steiner
from settings import SolverLimits
from steiner_engine import (
    ENGINE_ENUMERATION,
    LN4,
    SteinerInstance,
    SteinerState,
    apply_component_steiner,
    best_k_component,
    check_invariants,
    choose_k,
    closure_mst,
    drop_s,
    dreyfus_wagner,
    gain_steiner,
    initial_steiner_state,
    k_component,
    krestricted_ratio,
    metric_closure,
    run_steiner,
    steiner_iteration_bound,
    witness_tree_for_component,
)


@pytest.fixture
def fan_instance() -> SteinerInstance:
    """Terminals 0..3 on a path of 1.9 edges, plus a unit star through vertex 4"""
    return SteinerInstance.from_triples(5, [
        (0, 4, 1), (1, 4, 1), (2, 4, 1), (3, 4, 1),
        (0, 1, 1.9), (1, 2, 1.9), (2, 3, 1.9),
    ], terminals=[0, 1, 2, 3])


def test_choose_k_and_ratio():
    assert choose_k(1.0) == 8
    assert choose_k(0.5) == 64
    with pytest.raises(ConfigError):
        choose_k(2 * LN4)
    assert krestricted_ratio(3) == 2.0
    assert krestricted_ratio(4) == 1.5
    with pytest.raises(ConfigError):
        krestricted_ratio(1)


def test_instance_validation():
    instance = SteinerInstance.from_triples(3, [(0, 1, 2), (0, 1, 1), (1, 2, 1)], terminals=[2, 0, 0])
    assert instance.terminals == (0, 2)
    assert instance.edge_between(1, 0) == 1
    assert instance.graph.number_of_edges() == 2
    assert instance.graph.edges[0, 1]['weight'] == 1
    with pytest.raises(ConfigError):
        SteinerInstance.from_triples(2, [(0, 1, 1)], terminals=[])


def test_metric_closure(star_instance):
    closure = metric_closure(star_instance)
    assert closure.distance == {(1, 2): 2.0, (1, 3): 2.0, (2, 3): 2.0}
    assert closure.paths[(1, 2)] == (1, 0, 2)


def test_closure_mst_ties_go_to_smaller_pairs(star_instance):
    assert closure_mst(metric_closure(star_instance)) == [(1, 2), (1, 3)]


def test_closure_mst_skips_long_pairs(fan_instance):
    # closure distances: neighbours on the path 1.9, all others 2
    assert closure_mst(metric_closure(fan_instance)) == [(0, 1), (1, 2), (2, 3)]


def test_metric_closure_single_edge():
    instance = SteinerInstance.from_triples(2, [(0, 1, 5)], terminals=[0, 1])
    assert metric_closure(instance).distance == {(0, 1): 5.0}


def test_metric_closure_disconnected():
    instance = SteinerInstance.from_triples(3, [(0, 1, 1)], terminals=[0, 2])
    with pytest.raises(Disconnected):
        metric_closure(instance)
    with pytest.raises(Disconnected):
        run_steiner(instance)


def test_shortest_path_is_lexicographic():
    # two shortest 0-3 paths: 0-1-3 and 0-2-3
    instance = SteinerInstance.from_triples(4, [(0, 2, 1), (2, 3, 1), (0, 1, 1), (1, 3, 1)], terminals=[0, 3])
    assert instance.shortest_path(0, 3) == [0, 1, 3]
    assert instance.shortest_path_edges(0, 3) == [2, 3]


def test_initial_state_on_star(star_instance):
    state = initial_steiner_state(star_instance, epsilon=0.5, k=3)
    assert state.terminal_tree == [(1, 2), (1, 3)]
    assert state.wbar_map() == {(1, 2): pytest.approx(1.5), (1, 3): pytest.approx(1.5)}
    assert state.weight == 3
    assert state.potential == pytest.approx(3.5)
    check_invariants(state)


def test_initial_state_two_terminals():
    instance = SteinerInstance.from_triples(3, [(0, 1, 2), (1, 2, 2), (0, 2, 5)], terminals=[0, 2])
    state = initial_steiner_state(instance, epsilon=0.5, k=2)
    assert state.solution_ids() == (0, 1)
    assert state.wbar((2, 0)) == 4


def test_initial_state_adjacent_terminals():
    instance = SteinerInstance.from_triples(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)], terminals=[0, 1, 2])
    state = initial_steiner_state(instance, epsilon=0.5, k=2)
    assert state.terminal_tree == [(0, 1), (0, 2)]
    assert state.solution_ids() == (0, 2)


def test_initial_state_rejects_small_k(star_instance):
    with pytest.raises(ConfigError):
        initial_steiner_state(star_instance, epsilon=0.5, k=1)


def test_dreyfus_wagner(star_instance):
    assert dreyfus_wagner(star_instance, [1, 2]) == ((0, 1), 2.0)
    assert dreyfus_wagner(star_instance, [1, 2, 3]) == ((0, 1, 2), 3.0)
    assert dreyfus_wagner(star_instance, [3]) == ((), 0.0)
    with pytest.raises(SizeLimit):
        dreyfus_wagner(star_instance, [1, 2, 3], SolverLimits(dw_max_terminals=2))


def test_witness_tree_on_star(star_instance):
    component = witness_tree_for_component(star_instance, [0, 1, 2], [1, 2, 3])
    assert component.witness_tree == ((1, 2), (1, 3))
    assert component.potential == pytest.approx(3.5)
    assert component.potential <= LN4 * component.weight


def test_witness_tree_two_terminals(star_instance):
    component = witness_tree_for_component(star_instance, [0, 1], [1, 2])
    assert component.witness_tree == ((1, 2),)
    assert component.potential == pytest.approx(component.weight)


def test_witness_tree_cap(star_instance):
    with pytest.raises(SizeLimit):
        witness_tree_for_component(star_instance, [0, 1, 2], [1, 2, 3], SolverLimits(witness_max_terminals=2))


def test_star_drop_and_gain(star_instance):
    state = initial_steiner_state(star_instance, epsilon=0.5, k=3)
    assert drop_s(state, [1, 2, 3]) == [(1, 2), (1, 3)]
    component = k_component(star_instance, (1, 2, 3))
    assert gain_steiner(state, component) == pytest.approx(3 - 3 * LN4)
    assert gain_steiner(state, None) == 0.0
    assert best_k_component(state) is None


def test_k_component_is_cached(star_instance):
    first = k_component(star_instance, (1, 3))
    assert k_component(star_instance, (3, 1)) is first


def test_run_on_star(star_instance):
    run = run_steiner(star_instance, epsilon=0.5, k=3)
    assert run.weight == 3
    assert run.iterations == 0
    assert run.weight <= (LN4 + 0.5) * opt_steiner_exact(star_instance).opt_value


def test_run_two_terminals():
    instance = SteinerInstance.from_triples(3, [(0, 1, 2), (1, 2, 2), (0, 2, 5)], terminals=[0, 2])
    run = run_steiner(instance)
    assert run.solution == (0, 1)
    assert run.iterations == 0


def test_run_single_terminal(star_instance):
    instance = SteinerInstance(vertex_count=4, edges=star_instance.edges, terminals=(2,))
    run = run_steiner(instance)
    assert run.solution == ()
    assert run.weight == 0


@pytest.mark.parametrize("epsilon", [0.0, 1.5])
def test_run_epsilon_range(star_instance, epsilon):
    with pytest.raises(ConfigError):
        run_steiner(star_instance, epsilon=epsilon)


# A full star beats the terminal path once k reaches 4

def test_fan_best_component(fan_instance):
    state = initial_steiner_state(fan_instance, epsilon=0.5, k=4)
    assert state.weight == pytest.approx(5.7)
    component, value = best_k_component(state)
    assert component.terminals_connected == (0, 1, 2, 3)
    assert component.edges == (0, 1, 2, 3)
    assert value == pytest.approx(5.7 - 4 * LN4)


def test_fan_restricted_to_pairs(fan_instance):
    state = initial_steiner_state(fan_instance, epsilon=0.5, k=2)
    assert best_k_component(state) is None


def test_fan_run(fan_instance):
    run = run_steiner(fan_instance, epsilon=0.5, k=4)
    assert run.weight == 4
    assert run.iterations == 1
    row = run.trace[0]
    assert row.component_terminals == 4
    assert (row.engine, row.k) == (ENGINE_ENUMERATION, 4)
    assert row.potential_before - row.potential_after >= row.gain - 1e-9
    assert run.state.terminal_tree == [(0, 1), (0, 2), (0, 3)]
    assert run_steiner(fan_instance, epsilon=0.5, k=3).weight == pytest.approx(5.7)


# Exchange scene

@pytest.fixture
def exchange_state(exchange_instance, exchange_witness):
    return SteinerState.from_witness_sets(exchange_instance, exchange_witness)


def test_exchange_state(exchange_state):
    wbar = exchange_state.wbar_map()
    assert wbar == {
        (0, 1): pytest.approx(1.5), (0, 3): pytest.approx(2.0), (2, 3): pytest.approx(1.5),
        (3, 4): pytest.approx(1.5), (3, 5): pytest.approx(1.5), (5, 6): pytest.approx(1.0),
    }
    assert math.fsum(wbar.values()) == pytest.approx(exchange_state.weight)
    assert exchange_state.weight == 9


def test_exchange_component(exchange_instance):
    component = witness_tree_for_component(exchange_instance, [9, 10, 11], [2, 5, 6])
    assert component.witness_tree == ((2, 5), (2, 6))
    assert component.potential == pytest.approx(5.5)


def test_exchange_drop(exchange_state):
    assert drop_s(exchange_state, [2, 5, 6]) == [(3, 5), (5, 6)]


def test_exchange_apply(exchange_instance, exchange_state):
    component = witness_tree_for_component(exchange_instance, [9, 10, 11], [2, 5, 6])
    after = apply_component_steiner(exchange_state, component)
    assert 7 not in after.solution
    assert 8 not in after.solution
    assert after.solution[5] == frozenset({(3, 4)})
    assert after.solution[9] == frozenset({(2, 5), (2, 6)})
    assert {10, 11} <= set(after.solution)
    check_invariants(after)
    assert exchange_state.solution_ids() == tuple(range(9))


def test_from_witness_sets_rejects_broken_witness(exchange_instance, exchange_witness):
    broken = dict(exchange_witness)
    broken[2] = []  # a-b no longer carries {0, 3}
    with pytest.raises(InvariantViolation):
        SteinerState.from_witness_sets(exchange_instance, broken)


# Random corpora

@pytest.mark.parametrize("seed", range(200))
def test_drop_matches_enumeration(seed):
    instance = gen_steiner(GeneratorConfig(seed=seed, vertex_count=10, edge_count=16, terminal_count=7))
    state = initial_steiner_state(instance, epsilon=0.5, k=4)
    wbar = state.wbar_map()
    assert len(state.terminal_tree) == 6
    for size in (2, 3, 4):
        for subset in itertools.combinations(instance.terminals, size):
            _, expected = drop_bruteforce_steiner(state, subset)
            assert math.fsum(wbar[p] for p in drop_s(state, subset)) == pytest.approx(expected)


@pytest.mark.parametrize("seed", range(50))
def test_approximation_and_iteration_bound(seed):
    epsilon, k = 0.5, 3
    instance = gen_steiner(GeneratorConfig(seed=seed, vertex_count=8, edge_count=12, terminal_count=5))
    opt = opt_steiner_exact(instance).opt_value
    opt_k = opt_krestricted_bruteforce(instance, k).opt_value
    run = run_steiner(instance, epsilon=epsilon, k=k)

    assert validate_steiner(instance, run.solution)
    assert run.weight <= (LN4 + epsilon) * opt_k + 1e-9
    assert run.weight <= (LN4 + epsilon) * krestricted_ratio(k) * opt + 1e-9
    assert run.iterations <= steiner_iteration_bound(run.initial_weight, opt, instance.vertex_count,
                                                     len(instance.terminals), epsilon) + 1
