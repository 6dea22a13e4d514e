"""
Rooted Tree Primitives for the Tree Augmentation Engine
Lowest common ancestors, tree paths, ancestor tests and edge-coverage bookkeeping

Vertices are dense 0-based integers; tree edges keep their input order as ids.
A RootedTree never changes after it is built, so every function here is pure.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple, Union

from errors import BadVertex, NonPositiveWeight, NotATree, SelfLoopLink

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


def normalize_pair(a: int, b: int) -> Pair:
    """Unordered vertex pair as a sorted tuple"""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Link:
    """
    A candidate extra edge between two tree vertices
    Covers the tree edges on the path between its endpoints
    """

    id: int
    a: int
    b: int
    weight: float

    def __post_init__(self):
        if self.a == self.b:
            raise SelfLoopLink(f"link {self.id} joins vertex {self.a} with itself")
        if not self.weight > 0:
            raise NonPositiveWeight(f"link {self.id} has non-positive weight {self.weight}")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, 'a', a)
            object.__setattr__(self, 'b', b)

    @property
    def pair(self) -> Pair:
        return (self.a, self.b)


@dataclass(frozen=True)
class RootedTree:
    """
    Spanning tree G=(V,E) with a fixed root

    parent[root] == root, depth[root] == 0. parent_edge[v] is the id of the
    edge {v, parent[v]} (-1 for the root). up[j][v] is the 2^j-th ancestor of v.
    """

    vertex_count: int
    root: int
    parent: Tuple[int, ...]
    depth: Tuple[int, ...]
    edges: Tuple[Pair, ...]
    edge_index: Dict[Pair, int] = field(repr=False)
    parent_edge: Tuple[int, ...] = field(repr=False)
    up: Tuple[Tuple[int, ...], ...] = field(repr=False)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def check_vertex(self, v: int) -> None:
        if not isinstance(v, int) or not 0 <= v < self.vertex_count:
            raise BadVertex(f"vertex {v} outside 0..{self.vertex_count - 1}")

    def child_of_edge(self, edge_id: int) -> int:
        """The endpoint of a tree edge that is farther from the root"""
        a, b = self.edges[edge_id]
        return a if self.parent[a] == b and a != self.root else b


def build_rooted_tree(edge_list: Sequence[Pair], root: int, vertex_count: int = None) -> RootedTree:
    """
    Build a rooted tree by breadth-first traversal from the root

    Args:
        edge_list: n-1 unordered vertex pairs; edge ids follow list order
        root: root vertex
        vertex_count: number of vertices (defaults to len(edge_list) + 1)

    Returns:
        RootedTree with parent/depth arrays and an LCA lifting table
    """
    n = len(edge_list) + 1 if vertex_count is None else vertex_count
    if n < 1:
        raise NotATree("a tree needs at least one vertex")
    if not isinstance(root, int) or not 0 <= root < n:
        raise BadVertex(f"root {root} outside 0..{n - 1}")
    if len(edge_list) != n - 1:
        raise NotATree(f"expected {n - 1} edges for {n} vertices, got {len(edge_list)}")

    adjacency: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
    edge_index: Dict[Pair, int] = {}
    edges = []
    for eid, (u, v) in enumerate(edge_list):
        for x in (u, v):
            if not isinstance(x, int) or not 0 <= x < n:
                raise BadVertex(f"edge {eid} endpoint {x} outside 0..{n - 1}")
        if u == v:
            raise NotATree(f"edge {eid} is a self-loop at {u}")
        pair = normalize_pair(u, v)
        if pair in edge_index:
            raise NotATree(f"edge {eid} duplicates edge {edge_index[pair]} (cycle)")
        edge_index[pair] = eid
        edges.append(pair)
        adjacency[u].append((v, eid))
        adjacency[v].append((u, eid))

    parent = [-1] * n
    depth = [0] * n
    parent_edge = [-1] * n
    parent[root] = root
    seen = [False] * n
    seen[root] = True
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, eid in sorted(adjacency[u]):
            if eid == parent_edge[u]:
                continue
            if seen[v]:
                raise NotATree(f"edge {eid} closes a cycle through {u} and {v}")
            seen[v] = True
            parent[v] = u
            depth[v] = depth[u] + 1
            parent_edge[v] = eid
            queue.append(v)

    if not all(seen):
        missing = [v for v in range(n) if not seen[v]]
        raise NotATree(f"edges are disconnected; unreachable vertices {missing[:5]}")

    # Binary lifting table
    levels = max(1, (n - 1).bit_length())
    up = [tuple(parent)]
    for _ in range(1, levels):
        prev = up[-1]
        up.append(tuple(prev[prev[v]] for v in range(n)))

    return RootedTree(
        vertex_count=n,
        root=root,
        parent=tuple(parent),
        depth=tuple(depth),
        edges=tuple(edges),
        edge_index=edge_index,
        parent_edge=tuple(parent_edge),
        up=tuple(up),
    )


def is_ancestor(tree: RootedTree, u: int, v: int) -> bool:
    """True iff u lies on the root-v path (u is an ancestor of v or v itself)"""
    tree.check_vertex(u)
    tree.check_vertex(v)
    if tree.depth[u] > tree.depth[v]:
        return False
    return _lift(tree, v, tree.depth[v] - tree.depth[u]) == u


def _lift(tree: RootedTree, v: int, steps: int) -> int:
    j = 0
    while steps:
        if steps & 1:
            v = tree.up[j][v]
        steps >>= 1
        j += 1
    return v


def apex(tree: RootedTree, pair: Pair) -> int:
    """
    Deepest common ancestor of the two endpoints

    Args:
        tree: the rooted tree
        pair: two vertices

    Returns:
        The apex (lowest common ancestor) of the pair
    """
    a, b = pair
    tree.check_vertex(a)
    tree.check_vertex(b)
    if tree.depth[a] < tree.depth[b]:
        a, b = b, a
    a = _lift(tree, a, tree.depth[a] - tree.depth[b])
    if a == b:
        return a
    for j in range(len(tree.up) - 1, -1, -1):
        if tree.up[j][a] != tree.up[j][b]:
            a = tree.up[j][a]
            b = tree.up[j][b]
    return tree.parent[a]


def is_uplink(tree: RootedTree, pair: Pair) -> bool:
    """One endpoint is an ancestor of the other"""
    top = apex(tree, pair)
    return top == pair[0] or top == pair[1]


def _climb(tree: RootedTree, v: int, top: int) -> List[int]:
    """Vertices from v up to (and including) its ancestor top"""
    chain = [v]
    while v != top:
        v = tree.parent[v]
        chain.append(v)
    return chain


def path_vertices(tree: RootedTree, pair: Pair) -> List[int]:
    """Vertices of the tree path from pair[0] to pair[1], endpoints included"""
    a, b = pair
    top = apex(tree, pair)
    left = _climb(tree, a, top)
    right = _climb(tree, b, top)
    return left + right[-2::-1]


def path_edges(tree: RootedTree, pair: Pair) -> FrozenSet[int]:
    """
    Tree edges on the unique path between the endpoints (P_l)

    Args:
        tree: the rooted tree
        pair: two vertices (equal endpoints give the empty set)

    Returns:
        Frozen set of edge ids
    """
    a, b = pair
    top = apex(tree, pair)
    edges = set()
    for v in (a, b):
        while v != top:
            edges.add(tree.parent_edge[v])
            v = tree.parent[v]
    return frozenset(edges)


def path_mask(tree: RootedTree, pair: Pair) -> int:
    """path_edges as an integer bitset (bit i set iff edge i is on the path)"""
    mask = 0
    for eid in path_edges(tree, pair):
        mask |= 1 << eid
    return mask


def is_shadow(tree: RootedTree, candidate: Pair, of: Pair) -> bool:
    """True iff the candidate's tree path is contained in the path of `of`"""
    for v in (*candidate, *of):
        tree.check_vertex(v)
    return path_edges(tree, candidate) <= path_edges(tree, of)


def _as_pair(item: Union[Link, Pair]) -> Pair:
    return item.pair if isinstance(item, Link) else (item[0], item[1])


def covered_edges(tree: RootedTree, links: Iterable[Union[Link, Pair]]) -> FrozenSet[int]:
    """Union of the tree paths of the given links"""
    covered = set()
    for item in links:
        covered |= path_edges(tree, _as_pair(item))
    return frozenset(covered)


def is_cover(tree: RootedTree, links: Iterable[Union[Link, Pair]]) -> bool:
    """
    WTAP feasibility test

    Args:
        tree: the rooted tree
        links: Link objects or vertex pairs

    Returns:
        True iff every tree edge lies on the path of some link
    """
    return len(covered_edges(tree, links)) == tree.edge_count


def uncovered_edges(tree: RootedTree, links: Iterable[Union[Link, Pair]]) -> List[int]:
    """Tree edge ids not covered by the links, ascending"""
    covered = covered_edges(tree, links)
    return [eid for eid in range(tree.edge_count) if eid not in covered]


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    demo = build_rooted_tree([(0, 1), (1, 2), (1, 3)], root=0)
    logger.info(f"apex(2, 3) = {apex(demo, (2, 3))}")
    logger.info(f"P(2, 3) = {sorted(path_edges(demo, (2, 3)))}")
    logger.info(f"cover by {{0,2}}: {is_cover(demo, [(0, 2)])}")
