import pytest

from errors import Infeasible, SizeLimit
from oracles import (
    best_component_bruteforce_wtap,
    drop_bruteforce_steiner,
    opt_krestricted_bruteforce,
    opt_steiner_enumeration,
    opt_steiner_exact,
    opt_wtap_bruteforce,
    validate_steiner,
    validate_wtap,
)
from settings import SolverLimits
from instance_io.generators import GeneratorConfig, gen_steiner
from steiner_engine import initial_steiner_state
from tree_core import build_rooted_tree
from wtap_engine import WtapInstance, init_state


def test_validate_wtap(path_instance):
    assert validate_wtap(path_instance, [0])
    assert validate_wtap(path_instance, [1, 2])
    assert not validate_wtap(path_instance, [1])


def test_opt_wtap_on_path(path_instance):
    report = opt_wtap_bruteforce(path_instance)
    assert report.opt_value == 2
    assert report.opt_certificate == (1, 2)
    assert report.search_space_size > 0


def test_opt_wtap_prefers_smallest_ids_on_ties():
    tree = build_rooted_tree([(0, 1), (1, 2)], root=0)
    instance = WtapInstance.from_pairs(tree, [(1, 2, 1), (0, 2, 2), (0, 1, 1)])
    report = opt_wtap_bruteforce(instance)
    assert report.opt_value == 2
    assert report.opt_certificate == (0, 2)


def test_opt_wtap_single_link():
    tree = build_rooted_tree([(0, 1)], root=0)
    report = opt_wtap_bruteforce(WtapInstance.from_pairs(tree, [(0, 1, 4)]))
    assert (report.opt_value, report.opt_certificate) == (4, (0,))


def test_opt_wtap_infeasible_and_cap(path_instance):
    tree = build_rooted_tree([(0, 1), (1, 2)], root=0)
    with pytest.raises(Infeasible):
        opt_wtap_bruteforce(WtapInstance.from_pairs(tree, [(0, 1, 1)]))
    with pytest.raises(SizeLimit):
        opt_wtap_bruteforce(path_instance, SolverLimits(oracle_max_links=2))


def test_component_oracle_on_cheap_path(cheap_path_instance):
    state = init_state(cheap_path_instance, [0, 1], epsilon=0.5)
    assert best_component_bruteforce_wtap(state) == ((2,), pytest.approx(2.5))
    with pytest.raises(SizeLimit):
        best_component_bruteforce_wtap(state, limits=SolverLimits(oracle_component_max_links=2))


def test_validate_steiner(star_instance):
    assert validate_steiner(star_instance, [0, 1, 2])
    assert not validate_steiner(star_instance, [0, 1])


def test_opt_steiner_on_star(star_instance):
    assert opt_steiner_exact(star_instance).opt_value == 3
    report = opt_steiner_enumeration(star_instance)
    assert report.opt_value == 3
    assert report.opt_certificate == (0, 1, 2)


def test_krestricted_on_star(star_instance):
    pairs_only = opt_krestricted_bruteforce(star_instance, 2)
    assert pairs_only.opt_value == 4
    assert len(pairs_only.components) == 2
    full = opt_krestricted_bruteforce(star_instance, 3)
    assert full.opt_value == 3
    assert full.components == [(1, 2, 3)]


def test_krestricted_cap(exchange_instance):
    with pytest.raises(SizeLimit):
        opt_krestricted_bruteforce(exchange_instance, 3)


def test_drop_oracle_on_star(star_instance):
    state = initial_steiner_state(star_instance, epsilon=0.5, k=3)
    assert drop_bruteforce_steiner(state, [1, 2, 3]) == (((1, 2), (1, 3)), pytest.approx(3.0))


@pytest.mark.parametrize("seed", range(25))
def test_exact_oracles_agree(seed):
    instance = gen_steiner(GeneratorConfig(seed=seed, vertex_count=7, edge_count=11, terminal_count=4))
    exact = opt_steiner_exact(instance)
    enumerated = opt_steiner_enumeration(instance)
    assert exact.opt_value == pytest.approx(enumerated.opt_value)
    assert validate_steiner(instance, exact.opt_certificate)
    assert instance.weight(exact.opt_certificate) == pytest.approx(exact.opt_value)
    # any k-restricted tree is a Steiner tree
    assert opt_krestricted_bruteforce(instance, 3).opt_value >= exact.opt_value - 1e-9


@pytest.mark.parametrize("seed", range(30))
def test_krestricted_optimum_shrinks_with_k(seed):
    instance = gen_steiner(GeneratorConfig(seed=seed, vertex_count=8, edge_count=12, terminal_count=5))
    t = len(instance.terminals)
    values = [opt_krestricted_bruteforce(instance, k).opt_value for k in range(2, t + 1)]
    for smaller, larger in zip(values, values[1:]):
        assert larger <= smaller + 1e-9
    # with k = |T| the whole Steiner tree is one component
    assert values[-1] == pytest.approx(opt_steiner_exact(instance).opt_value)
