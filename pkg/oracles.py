"""
Brute-Force Oracles
Exhaustive ground truth for the local search engines at desk scale. Coverage,
contraction and feasibility are recomputed here with networkx instead of the
engines' own tree and union-find helpers.
"""

import math
import time
import logging
import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx
from networkx.utils import UnionFind

from errors import Infeasible, SizeLimit
from settings import SolverLimits, get_limits
from steiner_engine import SteinerInstance, SteinerState, dreyfus_wagner
from tree_core import Pair
from wtap_engine import RELATIVE_TOLERANCE, LINK_COST_FACTOR, WtapInstance, WtapState

logger = logging.getLogger(__name__)


@dataclass
class OracleReport:
    """Optimum found by exhaustive search, with a certificate of ids"""

    opt_value: float
    opt_certificate: Tuple[int, ...]
    search_space_size: int
    elapsed_ms: float
    components: List[Tuple[int, ...]] = field(default_factory=list)


def _elapsed_ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0


# WTAP

def _tree_graph(instance: WtapInstance) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(instance.tree.vertex_count))
    graph.add_edges_from(instance.tree.edges)
    return graph


def _tree_path_edges(graph: nx.Graph, a: int, b: int) -> FrozenSet[Pair]:
    path = nx.shortest_path(graph, a, b)
    return frozenset(tuple(sorted(step)) for step in zip(path, path[1:]))


def validate_wtap(instance: WtapInstance, link_ids: Iterable[int]) -> bool:
    """
    True iff every tree edge has a chosen link crossing the cut it defines
    """
    graph = _tree_graph(instance)
    links = [instance.links[i] for i in set(link_ids)]
    for u, v in instance.tree.edges:
        graph.remove_edge(u, v)
        side = nx.node_connected_component(graph, u)
        graph.add_edge(u, v)
        if not any((link.a in side) != (link.b in side) for link in links):
            return False
    return True


def opt_wtap_bruteforce(instance: WtapInstance, limits: Optional[SolverLimits] = None) -> OracleReport:
    """
    Minimum-weight cover over all link subsets

    Branches on every link in id order (include first) and prunes on weight
    and on edges no remaining link can cover.

    Returns:
        OracleReport; the certificate is the lexicographically smallest optimum
    """
    limits = limits or get_limits()
    started = time.perf_counter()
    links = instance.links
    if len(links) > limits.oracle_max_links:
        raise SizeLimit(f"WTAP oracle supports at most {limits.oracle_max_links} links, got {len(links)}")

    graph = _tree_graph(instance)
    edges = [tuple(e) for e in instance.tree.edges]
    covers = [_tree_path_edges(graph, link.a, link.b) for link in links]
    last_cover = {e: max((i for i, c in enumerate(covers) if e in c), default=-1) for e in edges}
    if any(last == -1 for last in last_cover.values()):
        raise Infeasible("some tree edge is not covered by any link")

    best_value = math.inf
    best_ids: Tuple[int, ...] = ()
    nodes = 0

    def search(i: int, chosen: List[int], covered: FrozenSet[Pair], cost: float):
        nonlocal best_value, best_ids, nodes
        nodes += 1
        tolerance = RELATIVE_TOLERANCE * max(1.0, cost)
        if cost > best_value + tolerance:
            return
        missing = [e for e in edges if e not in covered]
        if not missing:
            ids = tuple(chosen)
            if cost < best_value - tolerance or (abs(cost - best_value) <= tolerance and ids < best_ids):
                best_value, best_ids = cost, ids
            return
        if i == len(links) or any(last_cover[e] < i for e in missing):
            return
        chosen.append(i)
        search(i + 1, chosen, covered | covers[i], cost + links[i].weight)
        chosen.pop()
        search(i + 1, chosen, covered, cost)

    search(0, [], frozenset(), 0.0)
    return OracleReport(opt_value=best_value, opt_certificate=best_ids,
                        search_space_size=nodes, elapsed_ms=_elapsed_ms(started))


def best_component_bruteforce_wtap(state: WtapState, size_cap: Optional[int] = None,
                                   limits: Optional[SolverLimits] = None) -> Tuple[Tuple[int, ...], float]:
    """
    Plain enumeration of all k-thin link subsets up to size_cap

    Returns:
        (component, gain) maximizing w-bar(Drop) - 1.5 w(C), ties to the smallest id sequence
    """
    limits = limits or get_limits()
    instance = state.instance
    links = instance.links
    if len(links) > limits.oracle_component_max_links:
        raise SizeLimit(f"component oracle supports at most {limits.oracle_component_max_links} links")
    size_cap = len(links) if size_cap is None else size_cap

    graph = _tree_graph(instance)
    link_paths = [nx.shortest_path(graph, link.a, link.b) for link in links]
    link_edges = [frozenset(tuple(sorted(s)) for s in zip(p, p[1:])) for p in link_paths]
    uplinks = [(_tree_path_edges(graph, u.lower, u.upper), state.wbar(uid))
               for uid, u in sorted(state.uplinks.items())]
    tolerance = RELATIVE_TOLERANCE * max(1.0, state.weight)

    best_gain, best_ids = 0.0, ()
    for size in range(1, min(size_cap, len(links)) + 1):
        for ids in itertools.combinations(range(len(links)), size):
            load: Dict[int, int] = {}
            for i in ids:
                for v in link_paths[i]:
                    load[v] = load.get(v, 0) + 1
            if any(count > state.k for count in load.values()):
                continue
            covered = frozenset().union(*(link_edges[i] for i in ids))
            dropped = math.fsum(w for path, w in uplinks if path <= covered)
            value = dropped - LINK_COST_FACTOR * math.fsum(links[i].weight for i in ids)
            if value > best_gain + tolerance or (abs(value - best_gain) <= tolerance and ids < best_ids):
                best_gain, best_ids = value, ids
    return best_ids, best_gain


# Steiner

def validate_steiner(instance: SteinerInstance, edge_ids: Iterable[int]) -> bool:
    """True iff the chosen edges connect all terminals"""
    terminals = instance.terminals
    if len(terminals) <= 1:
        return True
    graph = nx.Graph()
    graph.add_nodes_from(terminals)
    graph.add_edges_from(instance.edges[i].pair for i in set(edge_ids))
    return nx.node_connected_component(graph, terminals[0]).issuperset(terminals)


def opt_steiner_exact(instance: SteinerInstance, limits: Optional[SolverLimits] = None) -> OracleReport:
    """Exact Steiner optimum via Dreyfus-Wagner on the full terminal set"""
    started = time.perf_counter()
    edges, cost = dreyfus_wagner(instance, instance.terminals, limits)
    q = len(instance.terminals)
    return OracleReport(opt_value=cost, opt_certificate=edges,
                        search_space_size=(3 ** q) * instance.vertex_count, elapsed_ms=_elapsed_ms(started))


def _simple_graph(instance: SteinerInstance) -> nx.Graph:
    """Cheapest parallel edge per vertex pair (lowest id among equals)"""
    graph = nx.Graph()
    graph.add_nodes_from(range(instance.vertex_count))
    for edge in instance.edges:
        current = graph.get_edge_data(edge.u, edge.v)
        if current is None or edge.weight < current['weight']:
            graph.add_edge(edge.u, edge.v, weight=edge.weight, id=edge.id)
    return graph


def opt_steiner_enumeration(instance: SteinerInstance, limits: Optional[SolverLimits] = None) -> OracleReport:
    """
    Exact Steiner optimum by enumerating Steiner-point subsets

    For every set X of non-terminals the minimum spanning tree of the graph
    induced on T and X is a candidate; the best candidate is optimal.
    """
    limits = limits or get_limits()
    started = time.perf_counter()
    terminals = list(instance.terminals)
    others = [v for v in range(instance.vertex_count) if v not in set(terminals)]
    if len(others) > limits.oracle_max_links:
        raise SizeLimit(f"Steiner-point enumeration supports at most {limits.oracle_max_links} "
                        f"non-terminals, got {len(others)}")
    if len(terminals) <= 1:
        return OracleReport(opt_value=0.0, opt_certificate=(), search_space_size=1,
                            elapsed_ms=_elapsed_ms(started))

    graph = _simple_graph(instance)
    best_value, best_ids, count = math.inf, (), 0
    for size in range(len(others) + 1):
        for extra in itertools.combinations(others, size):
            count += 1
            induced = graph.subgraph(terminals + list(extra))
            if not nx.is_connected(induced):
                continue
            tree = nx.minimum_spanning_tree(induced, weight='weight')
            value = math.fsum(d['weight'] for _, _, d in tree.edges(data=True))
            ids = tuple(sorted(d['id'] for _, _, d in tree.edges(data=True)))
            if value < best_value - RELATIVE_TOLERANCE * max(1.0, value):
                best_value, best_ids = value, ids
    if not best_ids:
        raise Infeasible("terminals are not mutually connected")
    return OracleReport(opt_value=best_value, opt_certificate=best_ids,
                        search_space_size=count, elapsed_ms=_elapsed_ms(started))


def opt_krestricted_bruteforce(instance: SteinerInstance, k: int,
                               limits: Optional[SolverLimits] = None) -> OracleReport:
    """
    Optimal k-restricted Steiner tree at tiny scale

    Hyperedges are all terminal subsets of size 2..k priced by their cheapest
    tree. Collections are grown so that every added hyperedge joins pairwise
    distinct components; the cost is the sum of component costs.
    """
    limits = limits or get_limits()
    started = time.perf_counter()
    terminals = list(instance.terminals)
    if len(terminals) > limits.krestricted_max_terminals:
        raise SizeLimit(f"k-restricted oracle supports at most {limits.krestricted_max_terminals} "
                        f"terminals, got {len(terminals)}")
    if len(terminals) <= 1:
        return OracleReport(opt_value=0.0, opt_certificate=(), search_space_size=1,
                            elapsed_ms=_elapsed_ms(started))

    hyperedges: List[Tuple[Tuple[int, ...], Tuple[int, ...], float]] = []
    for size in range(2, min(k, len(terminals)) + 1):
        for subset in itertools.combinations(terminals, size):
            edges, cost = dreyfus_wagner(instance, subset, limits)
            hyperedges.append((subset, edges, cost))

    best_value = math.inf
    best: List[int] = []
    nodes = 0

    def search(start: int, chosen: List[int], cost: float, parts: int):
        nonlocal best_value, best, nodes
        nodes += 1
        if parts == 1:
            if cost < best_value - RELATIVE_TOLERANCE * max(1.0, cost):
                best_value, best = cost, list(chosen)
            return
        forest = UnionFind(terminals)
        for i in chosen:
            forest.union(*hyperedges[i][0])
        for j in range(start, len(hyperedges)):
            subset, _, price = hyperedges[j]
            if cost + price >= best_value:
                continue
            roots = {forest[t] for t in subset}
            if len(roots) < len(subset):
                continue
            chosen.append(j)
            search(j + 1, chosen, cost + price, parts - len(subset) + 1)
            chosen.pop()

    search(0, [], 0.0, len(terminals))
    if not best:
        raise Infeasible("no k-restricted tree connects the terminals")
    edge_ids = tuple(sorted(set().union(*(hyperedges[i][1] for i in best))))
    return OracleReport(opt_value=best_value, opt_certificate=edge_ids, search_space_size=nodes,
                        elapsed_ms=_elapsed_ms(started), components=[hyperedges[i][0] for i in best])


def drop_bruteforce_steiner(state: SteinerState, terminals_connected: Iterable[int],
                            limits: Optional[SolverLimits] = None) -> Tuple[Tuple[Pair, ...], float]:
    """
    Maximum-w-bar D within S such that (T, S minus D) with T_C contracted is a tree

    Returns:
        (sorted pairs of D, w-bar(D)); ties go to the lexicographically smallest D
    """
    limits = limits or get_limits()
    pairs = state.terminal_tree
    if len(pairs) > limits.oracle_drop_max_pairs:
        raise SizeLimit(f"drop oracle supports at most {limits.oracle_drop_max_pairs} pairs, got {len(pairs)}")
    contracted = set(terminals_connected)
    label = {t: ('C' if t in contracted else t) for t in state.instance.terminals}
    wbar = state.wbar_map()

    best_value, best_drop = -math.inf, ()
    for size in range(len(pairs) + 1):
        for drop in itertools.combinations(pairs, size):
            kept = [p for p in pairs if p not in drop]
            graph = nx.MultiGraph()
            graph.add_nodes_from(set(label.values()))
            graph.add_edges_from((label[a], label[b]) for a, b in kept)
            if not nx.is_tree(graph):
                continue
            value = math.fsum(wbar[p] for p in drop)
            if value > best_value + RELATIVE_TOLERANCE * max(1.0, abs(value)):
                best_value, best_drop = value, drop
    return tuple(best_drop), best_value
