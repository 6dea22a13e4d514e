"""
Local Search Engine for Weighted Tree Augmentation (WTAP)
Maintains a link solution F with witness sets of up-links, spreads link weights
over the witnesses (w-bar) and decreases the potential

    Phi(F) = sum over l in F of H_{|W_l|} * w(l)

by exchanging k-thin components, until no component decreases Phi by the
factor (1 - eps / (6 |V|)).

Component selection is either exact (branch-and-bound over link subsets) or
heuristic (singletons and apex-sharing pairs).
"""

import math
import time
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from errors import (
    ConfigError,
    Infeasible,
    InfeasibleStart,
    InvariantViolation,
    SearchTimeout,
    SizeLimit,
)
from settings import SolverLimits, get_limits
from tree_core import (
    Link,
    Pair,
    RootedTree,
    apex,
    is_ancestor,
    is_cover,
    is_shadow,
    normalize_pair,
    path_mask,
    path_vertices,
)

logger = logging.getLogger(__name__)

RELATIVE_TOLERANCE = 1e-9
LINK_COST_FACTOR = 1.5

ENGINE_EXACT = "exact"
ENGINE_HEURISTIC = "heuristic"
ENGINES = (ENGINE_EXACT, ENGINE_HEURISTIC)


def harmonic(q: int) -> float:
    """H_q = 1 + 1/2 + ... + 1/q (H_0 = 0)"""
    return math.fsum(1.0 / i for i in range(1, q + 1))


def default_k(epsilon: float) -> int:
    """Thinness ceil(4 / eps) used by the approximation guarantee"""
    return math.ceil(4.0 / epsilon - 1e-9)


def wtap_iteration_bound(initial_weight: float, opt: float, vertex_count: int, epsilon: float) -> float:
    """Upper bound ln(1.5 w(F0) / OPT) * 6n / eps on accepted iterations"""
    if opt <= 0 or initial_weight <= 0:
        return 0.0
    return max(0.0, math.log(LINK_COST_FACTOR * initial_weight / opt)) * 6 * vertex_count / epsilon


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon <= 0.5:
        raise ConfigError(f"WTAP epsilon must lie in (0, 1/2], got {epsilon}")


# Domain types

@dataclass
class WtapInstance:
    """
    A spanning tree plus candidate links
    Link ids equal their position in `links`
    """

    tree: RootedTree
    links: List[Link]
    shadow_closed: bool = False
    _masks: Dict[Pair, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for position, link in enumerate(self.links):
            if link.id != position:
                raise ConfigError(f"link at position {position} carries id {link.id}")
            self.tree.check_vertex(link.a)
            self.tree.check_vertex(link.b)

    @classmethod
    def from_pairs(cls, tree: RootedTree, links: Iterable[Tuple[int, int, float]]) -> "WtapInstance":
        return cls(tree=tree, links=[Link(i, a, b, w) for i, (a, b, w) in enumerate(links)])

    @property
    def vertex_count(self) -> int:
        return self.tree.vertex_count

    def mask(self, pair: Pair) -> int:
        """Cached tree-path bitset of a vertex pair"""
        key = normalize_pair(*pair)
        cached = self._masks.get(key)
        if cached is None:
            cached = path_mask(self.tree, key)
            self._masks[key] = cached
        return cached

    def weight(self, link_ids: Iterable[int]) -> float:
        return math.fsum(self.links[i].weight for i in set(link_ids))

    def is_feasible(self) -> bool:
        return is_cover(self.tree, self.links)


@dataclass(frozen=True)
class UpLink:
    """A witness up-link; `lower` is a descendant of `upper`"""

    id: int
    lower: int
    upper: int
    owner: int

    @property
    def pair(self) -> Pair:
        return normalize_pair(self.lower, self.upper)


@dataclass(frozen=True)
class WitnessedLink:
    """A solution link with the ids of its 1 or 2 witness up-links"""

    link: Link
    witness: Tuple[int, ...]


@dataclass
class WtapState:
    """
    Current local search state: F, the witness sets and U
    U is the disjoint union of the witness sets, stored by up-link id
    """

    instance: WtapInstance
    solution: Dict[int, WitnessedLink]
    uplinks: Dict[int, UpLink]
    epsilon: float
    k: int
    next_uplink_id: int = 0

    @property
    def tree(self) -> RootedTree:
        return self.instance.tree

    def copy(self) -> "WtapState":
        return replace(self, solution=dict(self.solution), uplinks=dict(self.uplinks))

    def wbar(self, uplink_id: int) -> float:
        entry = self.solution[self.uplinks[uplink_id].owner]
        return entry.link.weight / len(entry.witness)

    def uplink_mask(self, uplink_id: int) -> int:
        return self.instance.mask(self.uplinks[uplink_id].pair)

    @property
    def weight(self) -> float:
        return math.fsum(entry.link.weight for entry in self.solution.values())

    @property
    def potential(self) -> float:
        return potential_wtap(self)

    def solution_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self.solution))

    def witness_pairs(self, link_id: int) -> List[Pair]:
        """Witness up-links of a solution link as (lower, upper) pairs"""
        return [(self.uplinks[u].lower, self.uplinks[u].upper) for u in self.solution[link_id].witness]

    @classmethod
    def from_witness_sets(cls, instance: WtapInstance, witness: Dict[int, Sequence[Pair]],
                          epsilon: float = 0.5, k: Optional[int] = None) -> "WtapState":
        """
        Build a state from explicit witness sets (no shortening applied)

        Args:
            instance: the WTAP instance
            witness: link id -> up-link pairs (either endpoint order)
            epsilon: accuracy parameter
            k: thinness (defaults to ceil(4/eps))

        Returns:
            State whose invariants are checked before returning
        """
        _check_epsilon(epsilon)
        state = cls(instance=instance, solution={}, uplinks={}, epsilon=epsilon,
                    k=default_k(epsilon) if k is None else k)
        for link_id in sorted(witness):
            link = instance.links[link_id]
            ids = []
            for x, y in witness[link_id]:
                lower, upper = (x, y) if instance.tree.depth[x] >= instance.tree.depth[y] else (y, x)
                ids.append(state._new_uplink(lower, upper, link_id))
            state.solution[link_id] = WitnessedLink(link, tuple(ids))
        check_invariants(state)
        return state

    def _new_uplink(self, lower: int, upper: int, owner: int) -> int:
        uid = self.next_uplink_id
        self.next_uplink_id += 1
        self.uplinks[uid] = UpLink(uid, lower, upper, owner)
        return uid


@dataclass
class WtapTraceRow:
    """One attempted local search step"""

    iteration: int
    accepted: bool
    potential_before: float
    potential_after: float
    solution_weight: float
    component_size: int
    drop_wbar: float
    component_weight: float
    gain: float
    elapsed_ms: float
    engine: str


@dataclass
class WtapRun:
    """Result of run_wtap"""

    solution: Tuple[int, ...]
    trace: List[WtapTraceRow]
    instance: WtapInstance
    state: Optional[WtapState]
    initial_weight: float
    k: int
    engine: str
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


# Instance preparation

def shadow_close(instance: WtapInstance, max_links: Optional[int] = None) -> WtapInstance:
    """
    Add every shadow of every link

    A shadow pair gets the minimum weight over all links generating it. A new
    link is appended only when no existing link with that pair is at least as
    cheap. New ids follow the original ones, sorted by pair.

    Args:
        instance: feasible WTAP instance
        max_links: cap on the closed link count (default from settings)

    Returns:
        Shadow-complete instance sharing the tree
    """
    cap = get_limits().max_shadow_links if max_links is None else max_links
    tree = instance.tree
    cheapest: Dict[Pair, float] = {}
    for link in instance.links:
        vertices = path_vertices(tree, link.pair)
        for i in range(len(vertices)):
            for j in range(i + 1, len(vertices)):
                pair = normalize_pair(vertices[i], vertices[j])
                if link.weight < cheapest.get(pair, math.inf):
                    cheapest[pair] = link.weight
        if len(cheapest) > cap:
            raise SizeLimit(f"shadow closure exceeds {cap} links")

    existing: Dict[Pair, float] = {}
    for link in instance.links:
        existing[link.pair] = min(existing.get(link.pair, math.inf), link.weight)

    links = list(instance.links)
    for pair, weight in sorted(cheapest.items()):
        if existing.get(pair, math.inf) > weight:
            links.append(Link(len(links), pair[0], pair[1], weight))
    if len(links) > cap:
        raise SizeLimit(f"shadow closure has {len(links)} links, cap is {cap}")

    logger.info(f"Shadow closure: {len(instance.links)} -> {len(links)} links")
    return WtapInstance(tree=tree, links=links, shadow_closed=True)


def split_to_uplinks(tree: RootedTree, link: Link) -> List[Pair]:
    """
    Split a link at its apex into at most two up-links

    Returns:
        List of (lower, upper) pairs whose paths together equal P_l
    """
    top = apex(tree, link.pair)
    if top == link.a:
        return [(link.b, link.a)]
    if top == link.b:
        return [(link.a, link.b)]
    return [(link.a, top), (link.b, top)]


def initial_wtap_solution(instance: WtapInstance) -> List[int]:
    """
    Inclusion-minimal cover by greedy pruning
    Links are visited by descending weight (ties by id) and removed while the rest still covers

    Returns:
        Sorted link ids
    """
    tree = instance.tree
    if not instance.is_feasible():
        raise Infeasible("the full link set does not cover the tree")

    load = [0] * tree.edge_count
    paths = {}
    for link in instance.links:
        paths[link.id] = _mask_bits(instance.mask(link.pair))
        for eid in paths[link.id]:
            load[eid] += 1

    kept = set(range(len(instance.links)))
    for link in sorted(instance.links, key=lambda l: (-l.weight, l.id)):
        if all(load[eid] >= 2 for eid in paths[link.id]):
            kept.discard(link.id)
            for eid in paths[link.id]:
                load[eid] -= 1
    return sorted(kept)


def _mask_bits(mask: int) -> List[int]:
    bits = []
    while mask:
        low = mask & -mask
        bits.append(low.bit_length() - 1)
        mask ^= low
    return bits


# State maintenance

def init_state(instance: WtapInstance, initial_solution: Iterable[int], epsilon: float,
               k: Optional[int] = None) -> WtapState:
    """
    Initialise witness sets W_l = U_l and shorten U

    Args:
        instance: WTAP instance
        initial_solution: link ids forming a cover
        epsilon: accuracy parameter in (0, 1/2]
        k: thinness (defaults to ceil(4/eps))

    Returns:
        State satisfying all invariants
    """
    _check_epsilon(epsilon)
    ids = sorted(set(initial_solution))
    for link_id in ids:
        if not 0 <= link_id < len(instance.links):
            raise ConfigError(f"unknown link id {link_id}")
    if not is_cover(instance.tree, [instance.links[i] for i in ids]):
        raise InfeasibleStart("the initial solution does not cover the tree")

    state = WtapState(instance=instance, solution={}, uplinks={}, epsilon=epsilon,
                      k=default_k(epsilon) if k is None else k)
    for link_id in ids:
        _insert_link(state, instance.links[link_id])
    _shorten_in_place(state)
    return state


def _insert_link(state: WtapState, link: Link) -> None:
    uids = tuple(state._new_uplink(lower, upper, link.id)
                 for lower, upper in split_to_uplinks(state.tree, link))
    state.solution[link.id] = WitnessedLink(link, uids)


def _remove_uplink(state: WtapState, uplink_id: int) -> None:
    """Remove an up-link from U and from its owner's witness set (empty sets stay)"""
    uplink = state.uplinks.pop(uplink_id)
    entry = state.solution[uplink.owner]
    state.solution[uplink.owner] = replace(entry, witness=tuple(u for u in entry.witness if u != uplink_id))


def _drop_empty_witnesses(state: WtapState) -> List[int]:
    removed = [lid for lid, entry in state.solution.items() if not entry.witness]
    for lid in removed:
        del state.solution[lid]
    return sorted(removed)


def _chain(tree: RootedTree, lower: int, upper: int) -> List[Tuple[int, int]]:
    """(edge id, child vertex) pairs from lower up to upper"""
    chain = []
    v = lower
    while v != upper:
        chain.append((tree.parent_edge[v], v))
        v = tree.parent[v]
    return chain


def _shorten_in_place(state: WtapState) -> None:
    tree = state.tree
    load = [0] * tree.edge_count
    chains = {uid: _chain(tree, u.lower, u.upper) for uid, u in state.uplinks.items()}
    for chain in chains.values():
        for eid, _ in chain:
            load[eid] += 1

    # Phase 1: delete redundant up-links
    for uid in sorted(state.uplinks):
        if all(load[eid] >= 2 for eid, _ in chains[uid]):
            for eid, _ in chains.pop(uid):
                load[eid] -= 1
            _remove_uplink(state, uid)

    # Phase 2: shorten to the smallest shadow that keeps U a cover
    order = sorted(state.uplinks, key=lambda uid: (-tree.depth[state.uplinks[uid].lower], uid))
    for uid in order:
        chain = chains[uid]
        unique = [i for i, (eid, _) in enumerate(chain) if load[eid] == 1]
        lo, hi = unique[0], unique[-1]
        if lo == 0 and hi == len(chain) - 1:
            continue
        for eid, _ in chain[:lo] + chain[hi + 1:]:
            load[eid] -= 1
        new_lower = chain[lo][1]
        new_upper = tree.parent[chain[hi][1]]
        chains[uid] = chain[lo:hi + 1]
        state.uplinks[uid] = replace(state.uplinks[uid], lower=new_lower, upper=new_upper)

    _drop_empty_witnesses(state)


def shorten_uplinks(state: WtapState) -> WtapState:
    """
    Delete redundant up-links, then shorten each remaining one

    Returns:
        New state whose up-link paths are pairwise edge-disjoint
    """
    shortened = state.copy()
    _shorten_in_place(shortened)
    return shortened


def drop_u(state: WtapState, component: Iterable[int]) -> List[int]:
    """
    Up-links made redundant by a component: {u in U : P_u within the union of P_l, l in C}

    Returns:
        Sorted up-link ids
    """
    covered = 0
    for link_id in set(component):
        covered |= state.instance.mask(state.instance.links[link_id].pair)
    if not covered:
        return []
    return [uid for uid in sorted(state.uplinks) if state.uplink_mask(uid) & ~covered == 0]


def potential_wtap(state: WtapState) -> float:
    """Phi(F) = sum of H_{|W_l|} * w(l)"""
    return math.fsum(harmonic(len(entry.witness)) * entry.link.weight
                     for entry in state.solution.values())


def gain(state: WtapState, component: Iterable[int]) -> float:
    """w-bar(Drop_U(C)) - 1.5 * w(C)"""
    component = set(component)
    if not component:
        return 0.0
    dropped = math.fsum(state.wbar(uid) for uid in drop_u(state, component))
    return dropped - LINK_COST_FACTOR * state.instance.weight(component)


def is_k_thin(tree: RootedTree, component: Iterable, k: int) -> bool:
    """
    Every vertex lies on the paths of at most k component links

    Args:
        tree: the rooted tree
        component: Link objects or vertex pairs
        k: thinness bound

    Returns:
        True iff the component is k-thin
    """
    load: Dict[int, int] = {}
    for item in component:
        pair = item.pair if isinstance(item, Link) else tuple(item)
        for v in path_vertices(tree, pair):
            load[v] = load.get(v, 0) + 1
            if load[v] > k:
                return False
    return True


def apply_component(state: WtapState, component: Iterable[int]) -> WtapState:
    """
    One exchange step

    Removes Drop_U(C) from U and the witness sets, inserts every link of C with
    W_l = U_l, shortens U and removes links whose witness set emptied. A link
    of C that is already in F has all its witnesses inside the drop, so it is
    re-inserted the same way.

    Args:
        state: current state (left untouched)
        component: non-empty k-thin set of link ids

    Returns:
        The new state
    """
    component = sorted(set(component))
    if not component:
        raise ConfigError("cannot apply an empty component")
    links = [state.instance.links[i] for i in component]
    if not is_k_thin(state.tree, links, state.k):
        raise ConfigError(f"component {component} is not {state.k}-thin")

    new = state.copy()
    for uid in drop_u(new, component):
        _remove_uplink(new, uid)
    for link in links:
        entry = new.solution.pop(link.id, None)
        if entry is not None:
            for uid in entry.witness:
                _remove_uplink_only(new, uid)
        _insert_link(new, link)
    _shorten_in_place(new)
    _drop_empty_witnesses(new)
    return new


def _remove_uplink_only(state: WtapState, uplink_id: int) -> None:
    state.uplinks.pop(uplink_id, None)


def check_invariants(state: WtapState) -> None:
    """
    Verify cover, disjointness, conservation, witness shadows and potential bounds

    Raises:
        InvariantViolation: on the first failed check
    """
    tree = state.tree
    instance = state.instance
    for lid, entry in state.solution.items():
        if not 1 <= len(entry.witness) <= 2:
            raise InvariantViolation(f"link {lid} has {len(entry.witness)} witnesses")
        for uid in entry.witness:
            uplink = state.uplinks.get(uid)
            if uplink is None or uplink.owner != lid:
                raise InvariantViolation(f"witness {uid} of link {lid} is not owned by it")
            if not is_ancestor(tree, uplink.upper, uplink.lower) or uplink.upper == uplink.lower:
                raise InvariantViolation(f"witness {uid} of link {lid} is not an up-link")
            if not is_shadow(tree, uplink.pair, entry.link.pair):
                raise InvariantViolation(f"witness {uid} is not a shadow of link {lid}")
    owned = sum(len(entry.witness) for entry in state.solution.values())
    if owned != len(state.uplinks):
        raise InvariantViolation("U contains up-links without an owner in F")

    if not is_cover(tree, [entry.link for entry in state.solution.values()]):
        raise InvariantViolation("F is not a cover")
    if not is_cover(tree, [u.pair for u in state.uplinks.values()]):
        raise InvariantViolation("U is not a cover")

    union = 0
    for uid in state.uplinks:
        mask = state.uplink_mask(uid)
        if union & mask:
            raise InvariantViolation(f"path of up-link {uid} overlaps another up-link")
        union |= mask

    weight = state.weight
    spread = math.fsum(state.wbar(uid) for uid in state.uplinks)
    if abs(spread - weight) > RELATIVE_TOLERANCE * max(weight, 1.0):
        raise InvariantViolation(f"w-bar(U) = {spread} differs from w(F) = {weight}")

    phi = state.potential
    if not weight - RELATIVE_TOLERANCE * max(weight, 1.0) <= phi <= LINK_COST_FACTOR * weight * (1 + RELATIVE_TOLERANCE):
        raise InvariantViolation(f"potential {phi} outside [w(F), 1.5 w(F)] for w(F) = {weight}")


# Component search

def _better(gain_value: float, ids: Tuple[int, ...], best_gain: float, best_ids: Tuple[int, ...],
            tolerance: float) -> bool:
    if gain_value > best_gain + tolerance:
        return True
    return abs(gain_value - best_gain) <= tolerance and ids < best_ids


class _ComponentSearch:
    """
    Branch-and-bound over link subsets in lexicographic id order

    Nodes are visited in lexicographic order of their sorted id sequence, so the
    first component reaching the maximum is the lexicographically smallest one.
    """

    def __init__(self, state: WtapState, size_cap: int, node_budget: int):
        instance = state.instance
        self.k = state.k
        self.size_cap = size_cap
        self.node_budget = node_budget
        self.links = [(link.id, instance.mask(link.pair), tuple(path_vertices(state.tree, link.pair)),
                       link.weight) for link in instance.links]
        self.uplinks = [(state.uplink_mask(uid), state.wbar(uid)) for uid in sorted(state.uplinks)]
        self.tolerance = RELATIVE_TOLERANCE * max(1.0, math.fsum(w for _, w in self.uplinks))
        suffix = [0] * (len(self.links) + 1)
        for i in range(len(self.links) - 1, -1, -1):
            suffix[i] = suffix[i + 1] | self.links[i][1]
        self.suffix = suffix
        self.load = [0] * state.tree.vertex_count
        self.nodes = 0
        self.best_gain = 0.0
        self.best_ids: Tuple[int, ...] = ()

    def run(self) -> Tuple[Tuple[int, ...], float]:
        self._visit(0, [], 0, 0.0)
        return self.best_ids, self.best_gain

    def _visit(self, start: int, chosen: List[int], covered: int, cost: float) -> None:
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise SearchTimeout(f"node budget {self.node_budget} exhausted", nodes=self.nodes)

        dropped = 0.0
        reachable = 0.0
        remaining = self.suffix[start]
        for mask, wbar in self.uplinks:
            if mask & ~covered == 0:
                dropped += wbar
            elif mask & remaining:
                reachable += wbar
        value = dropped - LINK_COST_FACTOR * cost
        if chosen:
            ids = tuple(chosen)
            if _better(value, ids, self.best_gain, self.best_ids, self.tolerance):
                self.best_gain, self.best_ids = value, ids

        if len(chosen) >= self.size_cap:
            return
        if value + reachable <= self.best_gain + self.tolerance:
            return

        for j in range(start, len(self.links)):
            link_id, mask, vertices, weight = self.links[j]
            if mask & ~covered == 0:
                continue
            if any(self.load[v] >= self.k for v in vertices):
                continue
            for v in vertices:
                self.load[v] += 1
            chosen.append(link_id)
            self._visit(j + 1, chosen, covered | mask, cost + weight)
            chosen.pop()
            for v in vertices:
                self.load[v] -= 1


def best_component_exact(state: WtapState, size_cap: Optional[int] = None,
                         node_budget: Optional[int] = None,
                         limits: Optional[SolverLimits] = None) -> Tuple[Tuple[int, ...], float]:
    """
    Exact k-thin component maximizing w-bar(Drop_U(C)) - 1.5 w(C)

    Args:
        state: current state
        size_cap: maximum component size (default min(|L|, 2k))
        node_budget: branch-and-bound node budget (default from settings)
        limits: limits to read defaults from

    Returns:
        (sorted link ids, gain); ((), 0.0) when no component has positive gain
    """
    limits = limits or get_limits()
    if size_cap is None:
        size_cap = limits.component_size_cap(len(state.instance.links), state.k)
    if size_cap < 1:
        raise ConfigError("size_cap must be at least 1")
    budget = limits.node_budget if node_budget is None else node_budget
    search = _ComponentSearch(state, size_cap, budget)
    ids, value = search.run()
    logger.debug(f"Exact search: {search.nodes} nodes, best {ids} gain {value:.6g}")
    return ids, value


def best_component_heuristic(state: WtapState) -> Tuple[Tuple[int, ...], float]:
    """
    Best component among all singletons and all k-thin pairs of links sharing an apex

    Returns:
        (sorted link ids, gain); ((), 0.0) when nothing has positive gain
    """
    tree = state.tree
    links = state.instance.links
    tolerance = RELATIVE_TOLERANCE * max(1.0, state.weight)
    best_ids: Tuple[int, ...] = ()
    best_gain = 0.0

    by_apex: Dict[int, List[int]] = {}
    candidates: List[Tuple[int, ...]] = []
    for link in links:
        if is_k_thin(tree, [link], state.k):
            candidates.append((link.id,))
        by_apex.setdefault(apex(tree, link.pair), []).append(link.id)
    for ids in by_apex.values():
        for i, first in enumerate(ids):
            for second in ids[i + 1:]:
                if is_k_thin(tree, [links[first], links[second]], state.k):
                    candidates.append((first, second))

    for ids in sorted(candidates):
        value = gain(state, ids)
        if _better(value, ids, best_gain, best_ids, tolerance):
            best_gain, best_ids = value, ids
    return best_ids, best_gain


# Main loop

def run_wtap(instance: WtapInstance, epsilon: float = 0.5, engine: str = ENGINE_EXACT,
             k: Optional[int] = None, limits: Optional[SolverLimits] = None,
             shadow_closure: bool = True, fallback: bool = False, verify: bool = True,
             initial_solution: Optional[Iterable[int]] = None,
             max_iterations: Optional[int] = None) -> WtapRun:
    """
    Local search for WTAP

    Repeatedly selects the best component, applies it tentatively and keeps the
    step iff Phi decreased by at least the factor (1 - eps / (6n)).

    Args:
        instance: feasible WTAP instance
        epsilon: accuracy parameter in (0, 1/2]
        engine: "exact" or "heuristic"
        k: thinness (defaults to ceil(4/eps))
        limits: size caps, node and time budgets
        shadow_closure: materialize all shadows before solving
        fallback: switch to the heuristic engine when the exact one times out
        verify: check state invariants and the per-step potential inequality
        initial_solution: starting cover (defaults to greedy pruning)
        max_iterations: optional hard cap on attempted steps

    Returns:
        WtapRun with the final solution and the trace
    """
    _check_epsilon(epsilon)
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine {engine!r}, expected one of {ENGINES}")
    limits = limits or get_limits()
    k = default_k(epsilon) if k is None else k
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")

    if instance.tree.edge_count == 0:
        logger.info("Tree has no edges; empty solution")
        return WtapRun(solution=(), trace=[], instance=instance, state=None,
                       initial_weight=0.0, k=k, engine=engine)
    if not instance.is_feasible():
        raise Infeasible("the full link set does not cover the tree")
    if shadow_closure and not instance.shadow_closed:
        instance = shadow_close(instance, limits.max_shadow_links)

    start_ids = initial_wtap_solution(instance) if initial_solution is None else initial_solution
    state = init_state(instance, start_ids, epsilon, k)
    if verify:
        check_invariants(state)
    initial_weight = state.instance.weight(start_ids)
    n = instance.vertex_count
    factor = 1.0 - epsilon / (6.0 * n)

    logger.info("=" * 70)
    logger.info("WTAP LOCAL SEARCH")
    logger.info(f"n={n} links={len(instance.links)} eps={epsilon} k={k} engine={engine}")
    logger.info(f"Initial weight {initial_weight:.6g}, potential {state.potential:.6g}")
    logger.info("=" * 70)

    trace: List[WtapTraceRow] = []
    active_engine = engine
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

        try:
            if active_engine == ENGINE_EXACT:
                component, value = best_component_exact(state, limits=limits)
            else:
                component, value = best_component_heuristic(state)
        except SearchTimeout:
            if not fallback:
                raise
            logger.warning("Exact search exhausted its node budget; falling back to the heuristic engine")
            active_engine = ENGINE_HEURISTIC
            component, value = best_component_heuristic(state)

        if not component or value <= 0:
            logger.debug(f"Iteration {iteration}: no improving component")
            break

        phi_before = state.potential
        drop_weight = math.fsum(state.wbar(uid) for uid in drop_u(state, component))
        candidate = apply_component(state, component)
        phi_after = candidate.potential
        accepted = phi_after <= factor * phi_before

        if verify:
            check_invariants(candidate)
            if phi_before - phi_after < value - RELATIVE_TOLERANCE * phi_before:
                raise InvariantViolation(
                    f"potential decreased by {phi_before - phi_after}, less than the gain {value}")

        trace.append(WtapTraceRow(
            iteration=iteration,
            accepted=accepted,
            potential_before=phi_before,
            potential_after=phi_after,
            solution_weight=candidate.weight if accepted else state.weight,
            component_size=len(component),
            drop_wbar=drop_weight,
            component_weight=instance.weight(component),
            gain=value,
            elapsed_ms=(time.perf_counter() - step_start) * 1000.0,
            engine=active_engine,
        ))
        logger.debug(f"Iteration {iteration}: C={component} gain={value:.6g} "
                     f"phi {phi_before:.6g} -> {phi_after:.6g} {'accepted' if accepted else 'rejected'}")
        if not accepted:
            break
        state = candidate

    result = WtapRun(solution=state.solution_ids(), trace=trace, instance=instance, state=state,
                     initial_weight=initial_weight, k=k, engine=active_engine, timed_out=timed_out)
    logger.info(f"WTAP finished: weight={result.weight:.6g} iterations={result.iterations} "
                f"potential={result.potential:.6g}")
    return result
