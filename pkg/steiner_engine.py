"""
Local Search Engine for Steiner Tree
Keeps a Steiner tree F whose edges carry witness sets of terminal pairs. The
union S of all witness sets is a spanning tree on the terminals, and every
edge weight is spread over its witnesses (w-bar). The potential

    Phi(F) = sum over f in F of H_{|W_f|} * w(f)

is decreased by exchanging k-components (cheapest trees on at most k
terminals) against the part of S they make redundant.
"""

import math
import time
import logging
import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

from errors import (
    BadVertex,
    ConfigError,
    Disconnected,
    InvariantViolation,
    NonPositiveWeight,
    SelfLoopLink,
    SizeLimit,
)
from settings import SolverLimits, get_limits
from tree_core import Pair, normalize_pair
from wtap_engine import RELATIVE_TOLERANCE, harmonic

logger = logging.getLogger(__name__)

LN4 = math.log(4.0)
# components come from Dreyfus-Wagner plus witness tree enumeration
ENGINE_ENUMERATION = "enumeration"


def choose_k(epsilon: float) -> int:
    """k = 2^ceil(2 ln4 / eps) used by the overall guarantee"""
    _check_epsilon(epsilon)
    return 2 ** math.ceil(2.0 * LN4 / epsilon - 1e-12)


def krestricted_ratio(k: int) -> float:
    """Worst-case ratio OPT_k / OPT = 1 + 1/floor(log2 k)"""
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    return 1.0 + 1.0 / (k.bit_length() - 1)


def steiner_iteration_bound(initial_weight: float, opt: float, vertex_count: int,
                            terminal_count: int, epsilon: float) -> float:
    """Upper bound ln(H_n w(F0) / OPT) * 2 H_n ln4 |T| / eps on accepted iterations"""
    if opt <= 0 or initial_weight <= 0:
        return 0.0
    h_n = harmonic(vertex_count)
    return max(0.0, math.log(h_n * initial_weight / opt)) * 2 * h_n * LN4 * terminal_count / epsilon


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon <= 1:
        raise ConfigError(f"Steiner epsilon must lie in (0, 1], got {epsilon}")


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= RELATIVE_TOLERANCE * max(1.0, abs(a), abs(b))


def _joins(forest: UnionFind, a: int, b: int) -> bool:
    """Union a and b; False when they were already connected"""
    if forest[a] == forest[b]:
        return False
    forest.union(a, b)
    return True


# Domain types

@dataclass(frozen=True)
class SteinerEdge:
    id: int
    u: int
    v: int
    weight: float

    def __post_init__(self):
        if self.u == self.v:
            raise SelfLoopLink(f"edge {self.id} joins vertex {self.u} with itself")
        if not self.weight > 0:
            raise NonPositiveWeight(
                f"edge {self.id} has non-positive weight {self.weight}; contract zero-weight edges first")
        if self.u > self.v:
            u, v = self.v, self.u
            object.__setattr__(self, 'u', u)
            object.__setattr__(self, 'v', v)

    @property
    def pair(self) -> Pair:
        return (self.u, self.v)


@dataclass
class SteinerInstance:
    """
    Undirected graph with positive edge weights and a terminal set
    Edge ids equal their position in `edges`; terminals are kept sorted
    """

    vertex_count: int
    edges: List[SteinerEdge]
    terminals: Tuple[int, ...]
    _graph: nx.Graph = field(default_factory=nx.Graph, repr=False, compare=False)
    _distances: Dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)
    _components: Dict[Tuple[int, ...], "SteinerComponent"] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.vertex_count < 1:
            raise ConfigError("a Steiner instance needs at least one vertex")
        for position, edge in enumerate(self.edges):
            if edge.id != position:
                raise ConfigError(f"edge at position {position} carries id {edge.id}")
            self.check_vertex(edge.u)
            self.check_vertex(edge.v)
        self.terminals = tuple(sorted(set(self.terminals)))
        if not self.terminals:
            raise ConfigError("the terminal set is empty")
        for t in self.terminals:
            self.check_vertex(t)

        # simple graph over the cheapest edge of each vertex pair
        self._graph = nx.Graph()
        self._graph.add_nodes_from(range(self.vertex_count))
        for edge in sorted(self.edges, key=lambda e: (e.weight, e.id)):
            if not self._graph.has_edge(edge.u, edge.v):
                self._graph.add_edge(edge.u, edge.v, weight=edge.weight, id=edge.id)

    @classmethod
    def from_triples(cls, vertex_count: int, edges: Iterable[Tuple[int, int, float]],
                     terminals: Iterable[int]) -> "SteinerInstance":
        return cls(vertex_count=vertex_count,
                   edges=[SteinerEdge(i, u, v, w) for i, (u, v, w) in enumerate(edges)],
                   terminals=tuple(terminals))

    def check_vertex(self, v: int) -> None:
        if not isinstance(v, (int, np.integer)) or not 0 <= v < self.vertex_count:
            raise BadVertex(f"vertex {v} outside 0..{self.vertex_count - 1}")

    def weight(self, edge_ids: Iterable[int]) -> float:
        return math.fsum(self.edges[i].weight for i in set(edge_ids))

    def edge_between(self, u: int, v: int) -> int:
        """Id of the cheapest edge joining u and v (lowest id among equals)"""
        return self._graph.edges[u, v]['id']

    @property
    def graph(self) -> nx.Graph:
        return self._graph

    def distances_from(self, source: int) -> np.ndarray:
        """Dijkstra distances from one vertex (inf when unreachable)"""
        cached = self._distances.get(source)
        if cached is not None:
            return cached
        dist = np.full(self.vertex_count, np.inf)
        for v, d in nx.single_source_dijkstra_path_length(self._graph, source, weight='weight').items():
            dist[v] = d
        dist.setflags(write=False)
        self._distances[source] = dist
        return dist

    def distance_matrix(self) -> np.ndarray:
        return np.vstack([self.distances_from(v) for v in range(self.vertex_count)])

    def shortest_path(self, u: int, v: int) -> List[int]:
        """
        Lexicographically smallest vertex sequence among all shortest u-v paths

        Raises:
            Disconnected: if v is unreachable from u
        """
        try:
            return min(nx.all_shortest_paths(self._graph, u, v, weight='weight'))
        except nx.NetworkXNoPath:
            raise Disconnected(f"vertices {u} and {v} are not connected")

    def shortest_path_edges(self, u: int, v: int) -> List[int]:
        path = self.shortest_path(u, v)
        return [self.edge_between(a, b) for a, b in zip(path, path[1:])]

    def terminals_connected(self) -> bool:
        reachable = nx.node_connected_component(self._graph, self.terminals[0])
        return all(t in reachable for t in self.terminals)


@dataclass(frozen=True)
class MetricClosure:
    """Shortest-path distances and paths between all terminal pairs"""

    terminals: Tuple[int, ...]
    distance: Dict[Pair, float]
    paths: Dict[Pair, Tuple[int, ...]]


@dataclass
class SteinerComponent:
    """
    A tree C connecting the terminals T_C, with witness tree S_C and witness sets W_f
    `potential` is Phi(C) = sum of H_{|W_f|} * w(f) over the component edges
    """

    edges: Tuple[int, ...]
    terminals_connected: Tuple[int, ...]
    witness_tree: Tuple[Pair, ...]
    witness_sets: Dict[int, FrozenSet[Pair]]
    potential: float
    weight: float


@dataclass
class SteinerState:
    """
    Current local search state
    `solution` maps each edge of F to its witness set; S is the union of all witness sets
    """

    instance: SteinerInstance
    solution: Dict[int, FrozenSet[Pair]]
    epsilon: float
    k: int

    def copy(self) -> "SteinerState":
        return replace(self, solution=dict(self.solution))

    @property
    def harmonic_n(self) -> float:
        return harmonic(self.instance.vertex_count)

    @property
    def terminal_tree(self) -> List[Pair]:
        pairs = set()
        for witness in self.solution.values():
            pairs |= witness
        return sorted(pairs)

    def wbar_map(self) -> Dict[Pair, float]:
        spread: Dict[Pair, List[float]] = {}
        for eid, witness in self.solution.items():
            share = self.instance.edges[eid].weight / len(witness)
            for pair in witness:
                spread.setdefault(pair, []).append(share)
        return {pair: math.fsum(shares) for pair, shares in spread.items()}

    def wbar(self, pair: Pair) -> float:
        return self.wbar_map().get(normalize_pair(*pair), 0.0)

    @property
    def weight(self) -> float:
        return self.instance.weight(self.solution)

    @property
    def potential(self) -> float:
        return potential_steiner(self)

    def solution_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self.solution))

    @classmethod
    def from_witness_sets(cls, instance: SteinerInstance, witness: Dict[int, Iterable[Pair]],
                          epsilon: float = 0.5, k: int = 3) -> "SteinerState":
        """
        Build a state from explicit witness sets

        Pairs closing a cycle in S are removed (largest w-bar first, ties by
        pair) until S is a forest; the result must then satisfy every state
        invariant.
        """
        _check_epsilon(epsilon)
        solution = {eid: frozenset(normalize_pair(*p) for p in pairs) for eid, pairs in witness.items()}
        for eid in solution:
            if not 0 <= eid < len(instance.edges):
                raise ConfigError(f"unknown edge id {eid}")
        state = cls(instance=instance, solution={e: w for e, w in solution.items() if w},
                    epsilon=epsilon, k=k)
        _break_cycles(state)
        check_invariants(state)
        return state


@dataclass
class SteinerTraceRow:
    """One attempted local search step"""

    iteration: int
    accepted: bool
    potential_before: float
    potential_after: float
    solution_weight: float
    component_size: int
    component_terminals: int
    drop_wbar: float
    component_weight: float
    gain: float
    elapsed_ms: float
    engine: str
    k: int


@dataclass
class SteinerRun:
    """Result of run_steiner"""

    solution: Tuple[int, ...]
    trace: List[SteinerTraceRow]
    instance: SteinerInstance
    state: Optional[SteinerState]
    initial_weight: float
    k: int
    timed_out: bool = False

    @property
    def weight(self) -> float:
        return self.instance.weight(self.solution)

    @property
    def iterations(self) -> int:
        return sum(1 for row in self.trace if row.accepted)

    @property
    def potential(self) -> float:
        return self.state.potential if self.state is not None else 0.0


# State construction

def metric_closure(instance: SteinerInstance) -> MetricClosure:
    """
    Shortest paths between all terminal pairs

    Returns:
        MetricClosure keyed by sorted terminal pairs; paths run from the smaller terminal

    Raises:
        Disconnected: if two terminals are not connected
    """
    distance: Dict[Pair, float] = {}
    paths: Dict[Pair, Tuple[int, ...]] = {}
    for t, u in itertools.combinations(instance.terminals, 2):
        paths[(t, u)] = tuple(instance.shortest_path(t, u))
        distance[(t, u)] = float(instance.distances_from(u)[t])
    return MetricClosure(terminals=instance.terminals, distance=distance, paths=paths)


def closure_mst(closure: MetricClosure) -> List[Pair]:
    """
    Kruskal MST of the complete terminal graph weighted by closure distances

    Pairs are inserted in sorted order, so equal distances resolve to the
    smaller pair.
    """
    complete = nx.Graph()
    complete.add_nodes_from(closure.terminals)
    for pair in sorted(closure.distance):
        complete.add_edge(*pair, weight=closure.distance[pair])
    tree = nx.minimum_spanning_tree(complete, weight='weight', algorithm='kruskal')
    return sorted(normalize_pair(a, b) for a, b in tree.edges())


def _break_cycles(state: SteinerState) -> List[Pair]:
    """Remove max-w-bar pairs from cycles of S until S is a forest"""
    removed = []
    while True:
        wbar = state.wbar_map()
        forest = UnionFind()
        rejected = [pair for pair in sorted(wbar, key=lambda p: (wbar[p], p))
                    if not _joins(forest, *pair)]
        if not rejected:
            return removed
        worst = rejected[-1]
        removed.append(worst)
        logger.debug(f"Removing pair {worst} (w-bar {wbar[worst]:.6g}) from a cycle of S")
        state.solution = {eid: w - {worst} for eid, w in state.solution.items() if w - {worst}}


def initial_steiner_state(instance: SteinerInstance, epsilon: float, k: int) -> SteinerState:
    """
    Start from the terminal MST over the metric closure

    Every MST pair {t, t'} becomes a 2-component: each edge of its shortest
    path gets the witness {t, t'}. Edges shared by several paths collect the
    union of their witnesses.

    Args:
        instance: feasible Steiner instance
        epsilon: accuracy parameter in (0, 1]
        k: component size bound (>= 2)

    Returns:
        State satisfying all invariants
    """
    _check_epsilon(epsilon)
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    closure = metric_closure(instance)

    witness: Dict[int, set] = {}
    for pair in closure_mst(closure):
        path = closure.paths[pair]
        for a, b in zip(path, path[1:]):
            witness.setdefault(instance.edge_between(a, b), set()).add(pair)

    state = SteinerState(instance=instance, solution={e: frozenset(w) for e, w in witness.items()},
                         epsilon=epsilon, k=k)
    _break_cycles(state)
    return state


def potential_steiner(state: SteinerState) -> float:
    """Phi(F) = sum of H_{|W_f|} * w(f)"""
    return math.fsum(harmonic(len(w)) * state.instance.edges[eid].weight
                     for eid, w in state.solution.items())


def check_invariants(state: SteinerState) -> None:
    """
    Verify the terminal tree, path witnesses, conservation and potential bounds

    Raises:
        InvariantViolation: on the first failed check
    """
    instance = state.instance
    terminals = instance.terminals
    pairs = state.terminal_tree
    if len(pairs) != len(terminals) - 1:
        raise InvariantViolation(f"S has {len(pairs)} pairs for {len(terminals)} terminals")
    terminal_set = set(terminals)
    spanning = UnionFind(terminals)
    for a, b in pairs:
        if a not in terminal_set or b not in terminal_set:
            raise InvariantViolation(f"pair {(a, b)} of S is not a terminal pair")
        if not _joins(spanning, a, b):
            raise InvariantViolation(f"pair {(a, b)} closes a cycle in S")

    for pair in pairs:
        carriers = nx.Graph()
        carriers.add_nodes_from(pair)
        carriers.add_edges_from(instance.edges[eid].pair for eid, witness in state.solution.items()
                                if pair in witness)
        if not nx.has_path(carriers, *pair):
            raise InvariantViolation(f"witness edges of {pair} do not contain a path between its ends")

    weight = state.weight
    spread = math.fsum(state.wbar_map().values())
    if abs(spread - weight) > RELATIVE_TOLERANCE * max(weight, 1.0):
        raise InvariantViolation(f"w-bar(S) = {spread} differs from w(F) = {weight}")

    phi = state.potential
    tolerance = RELATIVE_TOLERANCE * max(weight, 1.0)
    if not weight - tolerance <= phi <= state.harmonic_n * weight + tolerance:
        raise InvariantViolation(f"potential {phi} outside [w(F), H_n w(F)] for w(F) = {weight}")


# Components

def dreyfus_wagner(instance: SteinerInstance, subset: Iterable[int],
                   limits: Optional[SolverLimits] = None) -> Tuple[Tuple[int, ...], float]:
    """
    Cheapest tree connecting the given vertices

    dp[S][v] is the cheapest tree spanning the subset vertices in S plus v. It
    is built by merging two complementary subtrees at some vertex u and then
    walking a shortest u-v path.

    Args:
        instance: the graph
        subset: vertices to connect
        limits: caps (dw_max_terminals)

    Returns:
        (sorted edge ids, cost)
    """
    limits = limits or get_limits()
    nodes = sorted(set(subset))
    for v in nodes:
        instance.check_vertex(v)
    q = len(nodes)
    if q > limits.dw_max_terminals:
        raise SizeLimit(f"Dreyfus-Wagner on {q} vertices exceeds the cap of {limits.dw_max_terminals}")
    if q <= 1:
        return (), 0.0

    dist = instance.distance_matrix()
    if not np.all(np.isfinite(dist[nodes[0], nodes])):
        raise Disconnected(f"vertices {nodes} are not mutually connected")

    n = instance.vertex_count
    full = (1 << q) - 1
    dp = np.full((full + 1, n), np.inf)
    split = np.full((full + 1, n), -1, dtype=np.int64)
    via = np.full((full + 1, n), -1, dtype=np.int64)
    columns = np.arange(n)
    for i, v in enumerate(nodes):
        dp[1 << i] = dist[v]
        via[1 << i] = v

    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        low = mask & -mask
        merged = np.full(n, np.inf)
        merged_split = np.full(n, -1, dtype=np.int64)
        sub = (mask - 1) & mask
        while sub:
            if sub & low:
                candidate = dp[sub] + dp[mask ^ sub]
                better = candidate < merged
                merged[better] = candidate[better]
                merged_split[better] = sub
            sub = (sub - 1) & mask
        totals = merged[:, None] + dist
        best_u = np.argmin(totals, axis=0)
        dp[mask] = totals[best_u, columns]
        via[mask] = best_u
        split[mask] = merged_split

    cost_bound = float(dp[full, nodes[0]])
    edges: set = set()
    stack = [(full, nodes[0])]
    while stack:
        mask, v = stack.pop()
        u = int(via[mask, v])
        if u != v:
            edges.update(instance.shortest_path_edges(u, v))
        if mask & (mask - 1):
            sub = int(split[mask, u])
            stack.append((sub, u))
            stack.append((mask ^ sub, u))

    tree = _prune_to_tree(instance, edges, set(nodes))
    cost = instance.weight(tree)
    if cost > cost_bound * (1 + RELATIVE_TOLERANCE) + RELATIVE_TOLERANCE:
        raise InvariantViolation(f"reconstructed tree costs {cost}, table says {cost_bound}")
    return tree, cost


def _prune_to_tree(instance: SteinerInstance, edge_ids: Iterable[int], keep: set) -> Tuple[int, ...]:
    """Spanning tree of an edge set (cheapest first) with non-`keep` leaves removed"""
    forest = UnionFind()
    tree = nx.Graph()
    for eid in sorted(set(edge_ids), key=lambda e: (instance.edges[e].weight, e)):
        if _joins(forest, *instance.edges[eid].pair):
            tree.add_edge(*instance.edges[eid].pair, id=eid)
    while True:
        leaves = [v for v, degree in tree.degree() if degree == 1 and v not in keep]
        if not leaves:
            break
        tree.remove_nodes_from(leaves)
    return tuple(sorted(eid for _, _, eid in tree.edges(data='id')))


def _decode_prufer(labels: Sequence[int], sequence: Sequence[int]) -> List[Pair]:
    m = len(labels)
    degree = [1] * m
    for i in sequence:
        degree[i] += 1
    pairs = []
    for i in sequence:
        leaf = next(j for j in range(m) if degree[j] == 1)
        pairs.append(normalize_pair(labels[leaf], labels[i]))
        degree[leaf] -= 1
        degree[i] -= 1
    last = [j for j in range(m) if degree[j] == 1]
    pairs.append(normalize_pair(labels[last[0]], labels[last[1]]))
    return sorted(pairs)


def _tree_paths(instance: SteinerInstance, edges: Sequence[int], terminals: Sequence[int]) -> Dict[Pair, int]:
    """Bitmask (over positions in `edges`) of the component path between each terminal pair"""
    tree = nx.Graph()
    tree.add_nodes_from(terminals)
    for position, eid in enumerate(edges):
        tree.add_edge(*instance.edges[eid].pair, position=position)
    paths: Dict[Pair, int] = {}
    for source in terminals:
        reach = nx.single_source_shortest_path(tree, source)
        for target in terminals:
            if source < target:
                if target not in reach:
                    raise ConfigError(f"component does not connect terminals {source} and {target}")
                walk = reach[target]
                paths[(source, target)] = sum(1 << tree.edges[a, b]['position'] for a, b in zip(walk, walk[1:]))
    return paths


def witness_tree_for_component(instance: SteinerInstance, component_edges: Iterable[int],
                               terminals_connected: Iterable[int],
                               limits: Optional[SolverLimits] = None) -> SteinerComponent:
    """
    Witness tree S_C minimizing Phi(C) over all labeled spanning trees on T_C

    W_f is the set of pairs of S_C whose path in C uses f. Ties are broken by
    the lexicographically smallest sorted pair list.

    Args:
        instance: the graph
        component_edges: edge ids of a tree touching every vertex of T_C
        terminals_connected: T_C, at least two vertices
        limits: caps (witness_max_terminals)

    Returns:
        SteinerComponent with Phi(C) <= ln4 * w(C)
    """
    limits = limits or get_limits()
    labels = sorted(set(terminals_connected))
    m = len(labels)
    if m < 2:
        raise ConfigError("a component must connect at least two terminals")
    if m > limits.witness_max_terminals:
        raise SizeLimit(f"witness tree enumeration on {m} terminals exceeds the cap of "
                        f"{limits.witness_max_terminals}")
    edges = _prune_to_tree(instance, component_edges, set(labels))
    if not edges:
        raise ConfigError("component has no edges")
    weights = [instance.edges[eid].weight for eid in edges]
    paths = _tree_paths(instance, edges, labels)
    h = [harmonic(i) for i in range(m)]

    best_phi = math.inf
    best_pairs: List[Pair] = []
    for sequence in itertools.product(range(m), repeat=m - 2):
        pairs = _decode_prufer(labels, sequence)
        uses = [0] * len(edges)
        for pair in pairs:
            mask = paths[pair]
            for position in range(len(edges)):
                if mask >> position & 1:
                    uses[position] += 1
        phi = math.fsum(h[c] * w for c, w in zip(uses, weights))
        if not best_pairs or phi < best_phi - RELATIVE_TOLERANCE * max(1.0, best_phi) or (
                _close(phi, best_phi) and pairs < best_pairs):
            best_phi, best_pairs = phi, pairs

    witness_sets = {}
    for position, eid in enumerate(edges):
        witness_sets[eid] = frozenset(p for p in best_pairs if paths[p] >> position & 1)
    weight = math.fsum(weights)
    if best_phi > LN4 * weight * (1 + RELATIVE_TOLERANCE):
        raise InvariantViolation(f"witness tree potential {best_phi} exceeds ln4 * {weight}")
    return SteinerComponent(edges=edges, terminals_connected=tuple(labels), witness_tree=tuple(best_pairs),
                            witness_sets=witness_sets, potential=best_phi, weight=weight)


def drop_s(state: SteinerState, terminals_connected: Iterable[int]) -> List[Pair]:
    """
    Maximum-w-bar set D of S pairs made redundant by connecting T_C

    T_C is contracted in (T, S); a minimum-w-bar spanning tree of the
    contracted graph is kept (ties by pair) and D is the rest of S.

    Returns:
        Sorted pairs of D
    """
    contracted = sorted(set(terminals_connected))
    if len(contracted) < 2:
        raise ConfigError("drop needs at least two contracted terminals")
    wbar = state.wbar_map()
    forest = UnionFind(contracted)
    forest.union(*contracted)
    return sorted(pair for pair in sorted(wbar, key=lambda p: (wbar[p], p))
                  if not _joins(forest, *pair))


def gain_steiner(state: SteinerState, component: Optional[SteinerComponent]) -> float:
    """w-bar(Drop(T_C)) - ln4 * w(C); 0 for no component"""
    if component is None:
        return 0.0
    wbar = state.wbar_map()
    dropped = math.fsum(wbar[p] for p in drop_s(state, component.terminals_connected))
    return dropped - LN4 * component.weight


def k_component(instance: SteinerInstance, terminals_connected: Tuple[int, ...],
                limits: Optional[SolverLimits] = None) -> SteinerComponent:
    """Cheapest tree on T_C with its witness tree (cached per instance)"""
    key = tuple(sorted(terminals_connected))
    component = instance._components.get(key)
    if component is None:
        edges, _ = dreyfus_wagner(instance, key, limits)
        component = witness_tree_for_component(instance, edges, key, limits)
        instance._components[key] = component
    return component


def best_k_component(state: SteinerState,
                     limits: Optional[SolverLimits] = None) -> Optional[Tuple[SteinerComponent, float]]:
    """
    Best k-component over all terminal subsets of size 2..k

    Returns:
        (component, gain) of the first maximizer in lexicographic subset order,
        or None when no gain is positive
    """
    if state.k < 2:
        raise ConfigError(f"k must be at least 2, got {state.k}")
    terminals = state.instance.terminals
    tolerance = RELATIVE_TOLERANCE * max(1.0, state.weight)
    best: Optional[SteinerComponent] = None
    best_gain = 0.0
    for size in range(2, min(state.k, len(terminals)) + 1):
        for subset in itertools.combinations(terminals, size):
            component = k_component(state.instance, subset, limits)
            value = gain_steiner(state, component)
            if value > best_gain + tolerance:
                best, best_gain = component, value
    if best is None:
        return None
    return best, best_gain


def apply_component_steiner(state: SteinerState, component: SteinerComponent) -> SteinerState:
    """
    One exchange step

    D = drop_s(T_C) is removed from every witness set and emptied edges leave
    F. The component edges are inserted with their witness sets (unioned with
    an existing entry when the edge is already in F).

    Returns:
        The new state; the input state is left untouched
    """
    dropped = set(drop_s(state, component.terminals_connected))
    new = state.copy()
    new.solution = {eid: w - dropped for eid, w in state.solution.items() if w - dropped}
    for eid, witness in component.witness_sets.items():
        if witness:
            new.solution[eid] = new.solution.get(eid, frozenset()) | witness
    return new


# Main loop

def run_steiner(instance: SteinerInstance, epsilon: float = 0.5, k: int = 3,
                limits: Optional[SolverLimits] = None, verify: bool = True,
                max_iterations: Optional[int] = None) -> SteinerRun:
    """
    Local search for Steiner tree

    Keeps a step iff Phi_new <= (1 - eps / (2 H_n ln4 |T|)) * Phi_old.

    Args:
        instance: Steiner instance with connected terminals
        epsilon: accuracy parameter in (0, 1]
        k: component size bound (>= 2)
        limits: size caps and time budget
        verify: check state invariants and the per-step potential inequality
        max_iterations: optional hard cap on attempted steps

    Returns:
        SteinerRun with the final edge set and the trace
    """
    _check_epsilon(epsilon)
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    limits = limits or get_limits()

    if len(instance.terminals) <= 1:
        logger.info("At most one terminal; empty solution")
        return SteinerRun(solution=(), trace=[], instance=instance, state=None, initial_weight=0.0, k=k)
    if not instance.terminals_connected():
        raise Disconnected("terminals are not mutually connected")

    state = initial_steiner_state(instance, epsilon, k)
    if verify:
        check_invariants(state)
    initial_weight = state.weight
    t_count = len(instance.terminals)
    factor = 1.0 - epsilon / (2.0 * state.harmonic_n * LN4 * t_count)

    logger.info("=" * 70)
    logger.info("STEINER LOCAL SEARCH")
    logger.info(f"n={instance.vertex_count} m={len(instance.edges)} |T|={t_count} eps={epsilon} k={k}")
    logger.info(f"Initial weight {initial_weight:.6g}, potential {state.potential:.6g}")
    logger.info("=" * 70)

    trace: List[SteinerTraceRow] = []
    timed_out = False
    started = time.perf_counter()
    iteration = 0
    while max_iterations is None or iteration < max_iterations:
        if limits.time_budget is not None and time.perf_counter() - started > limits.time_budget:
            logger.warning(f"Time budget of {limits.time_budget}s reached after {iteration} steps")
            timed_out = True
            break
        iteration += 1
        step_start = time.perf_counter()

        found = best_k_component(state, limits)
        if found is None:
            logger.debug(f"Iteration {iteration}: no improving component")
            break
        component, value = found

        phi_before = state.potential
        wbar = state.wbar_map()
        drop_weight = math.fsum(wbar[p] for p in drop_s(state, component.terminals_connected))
        candidate = apply_component_steiner(state, component)
        phi_after = candidate.potential
        accepted = phi_after <= factor * phi_before

        if verify:
            check_invariants(candidate)
            if phi_before - phi_after < value - RELATIVE_TOLERANCE * phi_before:
                raise InvariantViolation(
                    f"potential decreased by {phi_before - phi_after}, less than the gain {value}")

        trace.append(SteinerTraceRow(
            iteration=iteration,
            accepted=accepted,
            potential_before=phi_before,
            potential_after=phi_after,
            solution_weight=candidate.weight if accepted else state.weight,
            component_size=len(component.edges),
            component_terminals=len(component.terminals_connected),
            drop_wbar=drop_weight,
            component_weight=component.weight,
            gain=value,
            elapsed_ms=(time.perf_counter() - step_start) * 1000.0,
            engine=ENGINE_ENUMERATION,
            k=k,
        ))
        logger.debug(f"Iteration {iteration}: T_C={component.terminals_connected} gain={value:.6g} "
                     f"phi {phi_before:.6g} -> {phi_after:.6g} {'accepted' if accepted else 'rejected'}")
        if not accepted:
            break
        state = candidate

    result = SteinerRun(solution=state.solution_ids(), trace=trace, instance=instance, state=state,
                        initial_weight=initial_weight, k=k, timed_out=timed_out)
    logger.info(f"Steiner finished: weight={result.weight:.6g} iterations={result.iterations} "
                f"potential={result.potential:.6g}")
    return result
