"""
Seeded Instance Generators
Random WTAP and Steiner instances that are identical bit-for-bit for identical seeds

Randomness comes from numpy's PCG64 bit generator. Only its raw 64-bit outputs
are consumed; bounded integers are derived by rejection sampling, so a seed
yields the same stream on every platform and numpy version.
"""
import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import logging
from typing import List, Optional, Set

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from errors import ConfigError
from steiner_engine import SteinerEdge, SteinerInstance
from tree_core import Link, Pair, build_rooted_tree, normalize_pair, uncovered_edges
from wtap_engine import WtapInstance

logger = logging.getLogger(__name__)

MAX_CONSECUTIVE_REJECTIONS = 64
UINT64_SPAN = 1 << 64


class GeneratorConfig(BaseModel):
    """
    Generator parameters
    `edge_count` is the number of links (WTAP) or graph edges (Steiner)
    """

    seed: int = Field(default=0, ge=0, lt=UINT64_SPAN)
    vertex_count: int = Field(ge=1)
    edge_count: int = Field(ge=0)
    terminal_count: Optional[int] = Field(default=None, ge=1)
    max_weight: int = Field(default=10, ge=1)

    @model_validator(mode='after')
    def terminals_fit(self):
        if self.terminal_count is not None and self.terminal_count > self.vertex_count:
            raise ValueError(f"terminal_count {self.terminal_count} exceeds vertex_count {self.vertex_count}")
        return self

    @classmethod
    def create(cls, **values) -> "GeneratorConfig":
        """Validate values, reporting failures as ConfigError"""
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"invalid generator config: {e}") from e


class SeededStream:
    """Bounded integers from the raw PCG64 stream"""

    def __init__(self, seed: int):
        self.bits = np.random.PCG64(seed)

    def raw(self) -> int:
        return int(self.bits.random_raw())

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound)"""
        if bound < 1:
            raise ConfigError(f"cannot draw below {bound}")
        limit = UINT64_SPAN - UINT64_SPAN % bound
        while True:
            value = self.raw()
            if value < limit:
                return value % bound

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in [low, high]"""
        return low + self.below(high - low + 1)

    def shuffled(self, items: List[int]) -> List[int]:
        items = list(items)
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


def _random_parents(stream: SeededStream, n: int) -> List[Pair]:
    """Tree edges (parent, v) with parent drawn uniformly among earlier vertices"""
    return [(stream.below(v), v) for v in range(1, n)]


def _distinct_pairs(stream: SeededStream, n: int, count: int, taken: Set[Pair]) -> List[Pair]:
    pairs = []
    failures = 0
    while len(pairs) < count and failures < MAX_CONSECUTIVE_REJECTIONS:
        pair = normalize_pair(stream.below(n), stream.below(n))
        if pair[0] == pair[1] or pair in taken:
            failures += 1
            continue
        failures = 0
        taken.add(pair)
        pairs.append(pair)
    if len(pairs) < count:
        logger.warning(f"Generated {len(pairs)} of {count} requested pairs after repeated rejections")
    return pairs


def gen_wtap(config: GeneratorConfig) -> WtapInstance:
    """
    Random feasible WTAP instance

    The tree is built by random parent attachment from root 0. Links are
    distinct random pairs; when they leave tree edges uncovered, links from
    the child of the deepest uncovered edge to the root are appended.
    """
    n = config.vertex_count
    if n < 2:
        raise ConfigError("a WTAP instance needs at least two vertices")
    if config.edge_count > n * (n - 1) // 2:
        raise ConfigError(f"{config.edge_count} links requested but only {n * (n - 1) // 2} pairs exist")

    stream = SeededStream(config.seed)
    tree = build_rooted_tree(_random_parents(stream, n), root=0, vertex_count=n)
    taken: Set[Pair] = set()
    links = [Link(i, a, b, stream.integer(1, config.max_weight))
             for i, (a, b) in enumerate(_distinct_pairs(stream, n, config.edge_count, taken))]

    missing = uncovered_edges(tree, links)
    while missing:
        child = max((tree.child_of_edge(eid) for eid in missing), key=lambda v: (tree.depth[v], -v))
        links.append(Link(len(links), child, tree.root, stream.integer(1, config.max_weight)))
        missing = uncovered_edges(tree, links)

    logger.debug(f"Generated WTAP instance seed={config.seed} n={n} links={len(links)}")
    return WtapInstance(tree=tree, links=links)


def gen_steiner(config: GeneratorConfig) -> SteinerInstance:
    """
    Random connected Steiner instance

    A random spanning tree plus distinct extra edges up to edge_count, and a
    uniformly random terminal subset.
    """
    n = config.vertex_count
    if config.terminal_count is None:
        raise ConfigError("terminal_count is required for Steiner instances")
    if config.edge_count < n - 1:
        raise ConfigError(f"{config.edge_count} edges cannot connect {n} vertices")
    if config.edge_count > n * (n - 1) // 2:
        raise ConfigError(f"{config.edge_count} edges requested but only {n * (n - 1) // 2} pairs exist")

    stream = SeededStream(config.seed)
    tree_pairs = [normalize_pair(a, b) for a, b in _random_parents(stream, n)]
    taken = set(tree_pairs)
    pairs = tree_pairs + _distinct_pairs(stream, n, config.edge_count - (n - 1), taken)
    edges = [SteinerEdge(i, a, b, stream.integer(1, config.max_weight)) for i, (a, b) in enumerate(pairs)]
    terminals = sorted(stream.shuffled(list(range(n)))[:config.terminal_count])

    logger.debug(f"Generated Steiner instance seed={config.seed} n={n} m={len(edges)} |T|={len(terminals)}")
    return SteinerInstance(vertex_count=n, edges=edges, terminals=tuple(terminals))
