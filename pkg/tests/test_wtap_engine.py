import pytest

from conftest import BLUE, CYAN, GREEN, ORANGE, RED, VIOLET, YELLOW
from errors import ConfigError, Infeasible, InfeasibleStart, InvariantViolation, SearchTimeout, SizeLimit
from instance_io.generators import GeneratorConfig, gen_wtap
from oracles import best_component_bruteforce_wtap, opt_wtap_bruteforce, validate_wtap
from settings import SolverLimits
from tree_core import build_rooted_tree
from wtap_engine import (
    ENGINE_HEURISTIC,
    WtapInstance,
    WtapState,
    apply_component,
    best_component_exact,
    best_component_heuristic,
    check_invariants,
    default_k,
    drop_u,
    gain,
    harmonic,
    init_state,
    initial_wtap_solution,
    is_k_thin,
    run_wtap,
    shadow_close,
    shorten_uplinks,
    split_to_uplinks,
    wtap_iteration_bound,
)


def test_harmonic_and_default_k():
    assert harmonic(0) == 0
    assert harmonic(2) == pytest.approx(1.5)
    assert default_k(0.5) == 8
    assert default_k(0.3) == 14


def test_split_to_uplinks(star_tree_instance):
    tree = star_tree_instance.tree
    assert split_to_uplinks(tree, star_tree_instance.links[0]) == [(1, 0), (2, 0)]
    assert split_to_uplinks(tree, star_tree_instance.links[3]) == [(3, 0)]


def test_two_leaf_star_spreads_weight():
    tree = build_rooted_tree([(0, 1), (0, 2)], root=0)
    instance = WtapInstance.from_pairs(tree, [(1, 2, 2)])
    state = init_state(instance, [0], epsilon=0.5)
    assert sorted(state.witness_pairs(0)) == [(1, 0), (2, 0)]
    assert [state.wbar(uid) for uid in state.uplinks] == [1.0, 1.0]
    assert state.potential == pytest.approx(3.0)


def test_initial_solution_prunes_heavy_link(path_instance):
    assert initial_wtap_solution(path_instance) == [1, 2]
    state = init_state(path_instance, [1, 2], epsilon=0.5)
    assert state.potential == pytest.approx(2.0)


def test_init_state_rejects_non_cover(path_instance):
    with pytest.raises(InfeasibleStart):
        init_state(path_instance, [1], epsilon=0.5)


@pytest.mark.parametrize("epsilon", [0.0, 0.51, -1.0])
def test_epsilon_range(path_instance, epsilon):
    with pytest.raises(ConfigError):
        init_state(path_instance, [1, 2], epsilon=epsilon)


def test_gain_of_heavy_link(path_instance):
    state = init_state(path_instance, [1, 2], epsilon=0.5)
    assert gain(state, [0]) == pytest.approx(-2.5)
    assert gain(state, []) == 0.0
    assert drop_u(state, []) == []


def test_shadow_close_adds_missing_shadows(star_tree_instance):
    closed = shadow_close(star_tree_instance)
    assert closed.shadow_closed
    assert [(link.pair, link.weight) for link in closed.links[4:]] == [((0, 1), 2), ((0, 2), 2)]
    assert closed.tree is star_tree_instance.tree


def test_shadow_close_keeps_cheaper_links(path_instance):
    assert len(shadow_close(path_instance).links) == 3


def test_shadow_close_cap(star_tree_instance):
    with pytest.raises(SizeLimit):
        shadow_close(star_tree_instance, max_links=5)


def test_is_k_thin(star_tree_instance):
    pairs = [link.pair for link in star_tree_instance.links[:3]]
    assert not is_k_thin(star_tree_instance.tree, pairs, 2)
    assert is_k_thin(star_tree_instance.tree, pairs, 3)


# Exchange scene

@pytest.fixture
def exchange_state(exchange_tree_instance):
    return init_state(exchange_tree_instance, [ORANGE, VIOLET, RED, GREEN, YELLOW], epsilon=0.5)


def test_exchange_initial_witnesses(exchange_state):
    assert exchange_state.witness_pairs(ORANGE) == [(1, 0), (5, 0)]
    assert exchange_state.witness_pairs(VIOLET) == [(6, 5)]
    assert exchange_state.witness_pairs(RED) == [(9, 7), (10, 7)]
    assert exchange_state.witness_pairs(GREEN) == [(2, 3), (11, 4)]
    assert exchange_state.witness_pairs(YELLOW) == [(8, 11), (12, 11)]
    assert exchange_state.potential == pytest.approx(7.0)


def test_exchange_drop(exchange_state):
    dropped = drop_u(exchange_state, [CYAN, BLUE])
    pairs = sorted((exchange_state.uplinks[u].lower, exchange_state.uplinks[u].upper) for u in dropped)
    assert pairs == [(6, 5), (9, 7), (10, 7), (11, 4)]
    assert gain(exchange_state, [CYAN, BLUE]) == pytest.approx(-0.5)


def test_exchange_apply(exchange_state):
    after = apply_component(exchange_state, [CYAN, BLUE])
    assert after.solution_ids() == (ORANGE, GREEN, YELLOW, CYAN, BLUE)
    assert after.witness_pairs(GREEN) == [(2, 3)]
    assert len(after.solution[CYAN].witness) == 2
    assert after.potential == pytest.approx(7.0)
    check_invariants(after)
    # the input state is left untouched
    assert exchange_state.solution_ids() == (ORANGE, VIOLET, RED, GREEN, YELLOW)


def test_apply_rejects_thick_or_empty_component(exchange_tree_instance):
    state = init_state(exchange_tree_instance, [ORANGE, VIOLET, RED, GREEN, YELLOW], epsilon=0.5, k=1)
    with pytest.raises(ConfigError):
        apply_component(state, [CYAN, BLUE])
    with pytest.raises(ConfigError):
        apply_component(state, [])


def test_apply_link_already_in_solution(exchange_state):
    after = apply_component(exchange_state, [VIOLET])
    check_invariants(after)
    assert VIOLET in after.solution


def test_shorten_is_idempotent(exchange_state):
    again = shorten_uplinks(exchange_state)
    assert again is not exchange_state
    for link_id in exchange_state.solution:
        assert again.witness_pairs(link_id) == exchange_state.witness_pairs(link_id)


def test_from_witness_sets_checks_shadows(path_instance):
    state = WtapState.from_witness_sets(path_instance, {1: [(0, 1)], 2: [(1, 2)]})
    assert state.potential == pytest.approx(2.0)
    with pytest.raises(InvariantViolation):
        WtapState.from_witness_sets(path_instance, {1: [(1, 0)], 2: [(2, 0)]})
    with pytest.raises(InvariantViolation):
        WtapState.from_witness_sets(path_instance, {0: [(2, 0)], 1: [(1, 0)]})


# Component search

def test_best_component_exact(cheap_path_instance):
    state = init_state(cheap_path_instance, [0, 1], epsilon=0.5)
    assert best_component_exact(state) == ((2,), pytest.approx(2.5))
    assert best_component_heuristic(state) == ((2,), pytest.approx(2.5))


def test_best_component_none_improving(path_instance):
    state = init_state(path_instance, [1, 2], epsilon=0.5)
    assert best_component_exact(state) == ((), 0.0)


def test_node_budget(cheap_path_instance):
    state = init_state(cheap_path_instance, [0, 1], epsilon=0.5)
    with pytest.raises(SearchTimeout):
        best_component_exact(state, node_budget=1)


WIDE_ORACLE = SolverLimits(oracle_component_max_links=20)


@pytest.mark.parametrize("start", ["all_links", "greedy"])
@pytest.mark.parametrize("seed", range(200))
def test_exact_search_matches_enumeration(seed, start):
    instance = gen_wtap(GeneratorConfig(seed=seed, vertex_count=10, edge_count=8, max_weight=4))
    initial = range(len(instance.links)) if start == "all_links" else initial_wtap_solution(instance)
    state = init_state(instance, initial, epsilon=0.5, k=2)
    # default cap min(|L|, 2k)
    size_cap = SolverLimits().component_size_cap(len(instance.links), state.k)
    expected_ids, expected_gain = best_component_bruteforce_wtap(state, size_cap=size_cap, limits=WIDE_ORACLE)
    ids, value = best_component_exact(state, limits=SolverLimits())
    assert value == pytest.approx(expected_gain)
    assert ids == expected_ids


@pytest.mark.parametrize("seed", range(50))
def test_exact_search_matches_enumeration_with_thicker_components(seed):
    instance = gen_wtap(GeneratorConfig(seed=seed, vertex_count=8, edge_count=8, max_weight=6))
    state = init_state(instance, initial_wtap_solution(instance), epsilon=0.5, k=3)
    size_cap = SolverLimits().component_size_cap(len(instance.links), state.k)
    expected_ids, expected_gain = best_component_bruteforce_wtap(state, size_cap=size_cap, limits=WIDE_ORACLE)
    ids, value = best_component_exact(state, limits=SolverLimits())
    assert value == pytest.approx(expected_gain)
    assert ids == expected_ids


# Main loop

def test_run_on_path(path_instance):
    run = run_wtap(path_instance)
    assert run.solution == (1, 2)
    assert run.weight == 2
    assert run.iterations == 0


def test_run_improves_cheap_path(cheap_path_instance):
    run = run_wtap(cheap_path_instance)
    assert run.weight == 1
    assert run.iterations == 1
    row = run.trace[0]
    assert row.accepted
    assert row.potential_before - row.potential_after >= row.gain - 1e-9
    assert validate_wtap(run.instance, run.solution)


def test_run_heuristic(cheap_path_instance):
    assert run_wtap(cheap_path_instance, engine=ENGINE_HEURISTIC).weight == 1


def test_run_without_shadow_closure(cheap_path_instance):
    run = run_wtap(cheap_path_instance, shadow_closure=False)
    assert run.solution == (2,)
    assert len(run.instance.links) == 3


def test_run_budget_and_fallback(cheap_path_instance):
    tiny = SolverLimits(node_budget=1)
    with pytest.raises(SearchTimeout):
        run_wtap(cheap_path_instance, limits=tiny)
    run = run_wtap(cheap_path_instance, limits=tiny, fallback=True)
    assert run.engine == ENGINE_HEURISTIC
    assert run.weight == 1


def test_run_infeasible():
    tree = build_rooted_tree([(0, 1), (1, 2)], root=0)
    with pytest.raises(Infeasible):
        run_wtap(WtapInstance.from_pairs(tree, [(0, 1, 1)]))


def test_run_single_vertex():
    run = run_wtap(WtapInstance(tree=build_rooted_tree([], root=0), links=[]))
    assert run.solution == ()
    assert run.weight == 0


def test_run_rejects_unknown_engine(path_instance):
    with pytest.raises(ConfigError):
        run_wtap(path_instance, engine="greedy")


@pytest.mark.parametrize("seed", range(100))
def test_approximation_and_iteration_bound(seed):
    epsilon = 0.5
    instance = gen_wtap(GeneratorConfig(seed=seed, vertex_count=8, edge_count=8))
    opt = opt_wtap_bruteforce(instance).opt_value
    run = run_wtap(instance, epsilon=epsilon)
    n = instance.vertex_count

    assert validate_wtap(run.instance, run.solution)
    assert run.weight <= (1.5 + epsilon) * opt + 1e-9
    assert run.iterations <= wtap_iteration_bound(run.initial_weight, opt, n, epsilon)
    for row in run.trace:
        if row.accepted:
            assert row.potential_after <= (1 - epsilon / (6 * n)) * row.potential_before + 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_approximation_on_ten_vertices(seed):
    instance = gen_wtap(GeneratorConfig(seed=seed, vertex_count=10, edge_count=9))
    if len(instance.links) > 15:
        pytest.skip("coverage repair pushed the link count past 15")
    opt = opt_wtap_bruteforce(instance).opt_value
    run = run_wtap(instance, epsilon=0.5)
    assert validate_wtap(run.instance, run.solution)
    assert run.weight <= 2.0 * opt + 1e-9


def test_run_single_link():
    tree = build_rooted_tree([(0, 1), (1, 2)], root=0)
    run = run_wtap(WtapInstance.from_pairs(tree, [(0, 2, 4)]), shadow_closure=False)
    assert run.solution == (0,)
    assert run.iterations == 0
