"""
Shared fixtures: the small path and star instances and the two scripted exchange scenes
"""
import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import pytest

from instance_io.formats import read_instance
from settings import SolverLimits
from steiner_engine import SteinerInstance
from tree_core import build_rooted_tree
from wtap_engine import WtapInstance

FIXTURES = Path(__file__).parent / "fixtures"

# Link ids of the WTAP exchange scene
ORANGE, VIOLET, RED, GREEN, YELLOW, CYAN, BLUE = range(7)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def limits() -> SolverLimits:
    return SolverLimits()


@pytest.fixture
def path_instance() -> WtapInstance:
    """r=0 - v1=1 - v2=2 with links {r,v2} w=3, {r,v1} w=1, {v1,v2} w=1"""
    return read_instance(FIXTURES / "path.wtap")


@pytest.fixture
def cheap_path_instance() -> WtapInstance:
    """Path r - v1 - v2 with {r,v1} w=2, {v1,v2} w=2 and a cheap {r,v2} w=1"""
    tree = build_rooted_tree([(0, 1), (1, 2)], root=0)
    return WtapInstance.from_pairs(tree, [(0, 1, 2), (1, 2, 2), (0, 2, 1)])


@pytest.fixture
def star_tree_instance() -> WtapInstance:
    """Star with center 0 and leaves 1, 2, 3; one link per leaf pair plus a spoke"""
    tree = build_rooted_tree([(0, 1), (0, 2), (0, 3)], root=0)
    return WtapInstance.from_pairs(tree, [(1, 2, 2), (1, 3, 2), (2, 3, 2), (0, 3, 1)])


@pytest.fixture
def exchange_tree_instance() -> WtapInstance:
    """
    13-vertex tree rooted at 0 with a five-link solution and a two-link component

    Solution links: orange {1,5}, violet {3,6}, red {9,10}, green {2,11},
    yellow {8,12}. Component: cyan {6,9}, blue {10,11}. All weights 1.
    """
    tree = build_rooted_tree(
        [(1, 0), (3, 2), (0, 3), (3, 4), (4, 5), (5, 6), (4, 7), (7, 9), (7, 10), (7, 11), (11, 12), (11, 8)],
        root=0,
    )
    return WtapInstance.from_pairs(tree, [
        (1, 5, 1), (3, 6, 1), (9, 10, 1), (2, 11, 1), (8, 12, 1),
        (6, 9, 1), (10, 11, 1),
    ])


@pytest.fixture
def star_instance() -> SteinerInstance:
    """Center 0 (non-terminal) with unit edges to terminals 1, 2, 3"""
    return read_instance(FIXTURES / "star.stp")


@pytest.fixture
def exchange_instance() -> SteinerInstance:
    """Terminals 0..6, Steiner vertices a=7, b=8, c=9, d=10"""
    return read_instance(FIXTURES / "exchange.stp")


@pytest.fixture
def exchange_witness():
    """Witness sets per edge id of the Steiner exchange scene"""
    e1, e2, e3, e4, e5, e6 = (0, 1), (0, 3), (2, 3), (3, 4), (3, 5), (5, 6)
    return {
        0: [e1, e2],  # 0-a
        1: [e1],      # 1-a
        2: [e2],      # a-b
        3: [e3],      # 2-b
        4: [e2, e3],  # 3-b
        5: [e4, e5],  # 3-c
        6: [e4],      # 4-c
        7: [e5],      # 5-c
        8: [e6],      # 5-6
    }
