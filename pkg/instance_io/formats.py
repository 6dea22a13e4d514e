"""
Instance File Formats
Parsers and writers for the line-oriented WTAP format and the SteinLib STP subset,
plus the solution files emitted by the CLI

WTAP format ('#' starts a comment, vertices are 1-based):
    WTAP <n> <m>
    ROOT <r>
    EDGE <u> <v>        (exactly n-1 lines)
    LINK <u> <v> <w>    (exactly m lines, w > 0)
"""
import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import math
import logging
from typing import Iterable, List, Optional, Tuple, Union

from errors import (
    InstanceError,
    MissingSection,
    NonPositiveWeight,
    ParseError,
)
from steiner_engine import SteinerEdge, SteinerInstance
from tree_core import Link, build_rooted_tree
from wtap_engine import WtapInstance

logger = logging.getLogger(__name__)

STP_HEADER = "33D32945 STP File, STP Format Version 1.0"
FORMAT_WTAP = "wtap"
FORMAT_STP = "stp"
FORMATS = (FORMAT_WTAP, FORMAT_STP)

Instance = Union[WtapInstance, SteinerInstance]


def format_weight(weight: float) -> str:
    """Shortest round-trip decimal, integers without a trailing '.0'"""
    text = repr(float(weight))
    return text[:-2] if text.endswith(".0") else text


def _parse_weight(token: str, line: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"invalid {what} weight {token!r}", line)
    if not math.isfinite(value):
        raise ParseError(f"{what} weight {token!r} is not finite", line)
    if value <= 0:
        raise NonPositiveWeight(
            f"line {line}: {what} weight {token} is not positive; contract zero-weight edges first")
    return value


def _parse_vertex(token: str, n: int, line: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"invalid vertex {token!r}", line)
    if not 1 <= value <= n:
        raise ParseError(f"vertex {value} outside 1..{n}", line)
    return value - 1


def _content_lines(text: str) -> List[Tuple[int, List[str]]]:
    """(line number, tokens) of every non-blank line with comments removed"""
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split('#', 1)[0].split()
        if tokens:
            lines.append((number, tokens))
    return lines


# WTAP

def parse_wtap(text: str) -> WtapInstance:
    """
    Parse the WTAP text format

    Args:
        text: file contents

    Returns:
        WtapInstance with 0-based vertices; edge and link ids follow file order
    """
    lines = _content_lines(text)
    if not lines:
        raise ParseError("empty WTAP file")

    number, tokens = lines[0]
    if tokens[0].upper() != "WTAP" or len(tokens) != 3:
        raise ParseError("expected header 'WTAP <n> <m>'", number)
    try:
        n, m = int(tokens[1]), int(tokens[2])
    except ValueError:
        raise ParseError("header counts must be integers", number)
    if n < 1 or m < 0:
        raise ParseError(f"invalid counts n={n} m={m}", number)

    expected = 2 + (n - 1) + m
    if len(lines) != expected:
        last = lines[-1][0]
        raise ParseError(f"expected {expected} content lines (1 header, 1 ROOT, {n - 1} EDGE, {m} LINK), "
                         f"found {len(lines)}", last)

    number, tokens = lines[1]
    if tokens[0].upper() != "ROOT" or len(tokens) != 2:
        raise ParseError("expected 'ROOT <r>'", number)
    root = _parse_vertex(tokens[1], n, number)

    edges = []
    for number, tokens in lines[2:n + 1]:
        if tokens[0].upper() != "EDGE" or len(tokens) != 3:
            raise ParseError("expected 'EDGE <u> <v>'", number)
        edges.append((_parse_vertex(tokens[1], n, number), _parse_vertex(tokens[2], n, number)))

    tree = build_rooted_tree(edges, root, n)

    links = []
    for number, tokens in lines[n + 1:]:
        if tokens[0].upper() != "LINK" or len(tokens) != 4:
            raise ParseError("expected 'LINK <u> <v> <w>'", number)
        a = _parse_vertex(tokens[1], n, number)
        b = _parse_vertex(tokens[2], n, number)
        weight = _parse_weight(tokens[3], number, "link")
        try:
            links.append(Link(len(links), a, b, weight))
        except InstanceError as e:
            raise type(e)(f"line {number}: {e}") from e

    return WtapInstance(tree=tree, links=links)


def write_wtap(instance: WtapInstance) -> str:
    """Canonical WTAP text (1-based vertices)"""
    tree = instance.tree
    out = [f"WTAP {tree.vertex_count} {len(instance.links)}", f"ROOT {tree.root + 1}"]
    out += [f"EDGE {u + 1} {v + 1}" for u, v in tree.edges]
    out += [f"LINK {link.a + 1} {link.b + 1} {format_weight(link.weight)}" for link in instance.links]
    return "\n".join(out) + "\n"


# STP

def parse_stp(text: str) -> SteinerInstance:
    """
    Parse the SteinLib STP subset (Graph and Terminals sections)

    Comment sections are skipped silently, other unknown sections with a
    warning. The file must end with EOF.

    Returns:
        SteinerInstance with 0-based vertices
    """
    lines = _content_lines(text)
    if lines and lines[0][1][0].upper() == "33D32945":
        lines = lines[1:]

    n: Optional[int] = None
    declared_edges: Optional[int] = None
    declared_terminals: Optional[int] = None
    raw_edges: List[Tuple[int, str, str, str]] = []
    raw_terminals: List[Tuple[int, str]] = []
    seen = set()
    section: Optional[str] = None
    finished = False

    for number, tokens in lines:
        keyword = tokens[0].upper()
        if finished:
            raise ParseError("content after EOF", number)
        if section is None:
            if keyword == "EOF":
                finished = True
            elif keyword == "SECTION":
                if len(tokens) < 2:
                    raise ParseError("SECTION without a name", number)
                section = tokens[1].upper()
                if section in seen:
                    raise ParseError(f"duplicate section {tokens[1]}", number)
                seen.add(section)
                if section not in ("GRAPH", "TERMINALS", "COMMENT"):
                    logger.warning(f"Skipping unsupported STP section {tokens[1]} (line {number})")
            else:
                raise ParseError(f"unexpected {tokens[0]!r} outside a section", number)
            continue
        if keyword == "END":
            section = None
            continue

        if section == "GRAPH":
            if keyword == "NODES":
                n = _parse_count(tokens, number)
            elif keyword == "EDGES":
                declared_edges = _parse_count(tokens, number)
            elif keyword == "E":
                if len(tokens) != 4:
                    raise ParseError("expected 'E <u> <v> <w>'", number)
                raw_edges.append((number, tokens[1], tokens[2], tokens[3]))
            elif keyword in ("A", "ARCS"):
                raise ParseError("directed arcs are not supported", number)
            else:
                logger.warning(f"Ignoring Graph entry {tokens[0]} (line {number})")
        elif section == "TERMINALS":
            if keyword == "TERMINALS":
                declared_terminals = _parse_count(tokens, number)
            elif keyword == "T":
                if len(tokens) != 2:
                    raise ParseError("expected 'T <v>'", number)
                raw_terminals.append((number, tokens[1]))
            else:
                logger.warning(f"Ignoring Terminals entry {tokens[0]} (line {number})")

    if section is not None:
        raise ParseError(f"section {section.title()} is not closed with END")
    if not finished:
        raise ParseError("missing EOF")
    if "GRAPH" not in seen:
        raise MissingSection("STP file has no Graph section")
    if "TERMINALS" not in seen:
        raise MissingSection("STP file has no Terminals section")
    if n is None:
        raise ParseError("Graph section does not declare Nodes")
    if declared_edges is not None and declared_edges != len(raw_edges):
        raise ParseError(f"Edges declares {declared_edges} edges, found {len(raw_edges)}")
    if declared_terminals is not None and declared_terminals != len(raw_terminals):
        raise ParseError(f"Terminals declares {declared_terminals} terminals, found {len(raw_terminals)}")
    if not raw_terminals:
        raise ParseError("Terminals section lists no terminal")

    edges = []
    for number, u, v, w in raw_edges:
        a = _parse_vertex(u, n, number)
        b = _parse_vertex(v, n, number)
        weight = _parse_weight(w, number, "edge")
        try:
            edges.append(SteinerEdge(len(edges), a, b, weight))
        except InstanceError as e:
            raise type(e)(f"line {number}: {e}") from e
    terminals = [_parse_vertex(t, n, number) for number, t in raw_terminals]
    return SteinerInstance(vertex_count=n, edges=edges, terminals=tuple(terminals))


def _parse_count(tokens: List[str], line: int) -> int:
    if len(tokens) != 2:
        raise ParseError(f"expected '{tokens[0]} <count>'", line)
    try:
        value = int(tokens[1])
    except ValueError:
        raise ParseError(f"invalid count {tokens[1]!r}", line)
    if value < 0:
        raise ParseError(f"negative count {value}", line)
    return value


def write_stp(instance: SteinerInstance) -> str:
    """Canonical STP text (1-based vertices)"""
    out = [STP_HEADER, "", "SECTION Graph", f"Nodes {instance.vertex_count}", f"Edges {len(instance.edges)}"]
    out += [f"E {e.u + 1} {e.v + 1} {format_weight(e.weight)}" for e in instance.edges]
    out += ["END", "", "SECTION Terminals", f"Terminals {len(instance.terminals)}"]
    out += [f"T {t + 1}" for t in instance.terminals]
    out += ["END", "", "EOF"]
    return "\n".join(out) + "\n"


# Files

def detect_format(path: Union[str, Path], fmt: Optional[str] = None) -> str:
    if fmt is not None:
        if fmt not in FORMATS:
            raise InstanceError(f"unknown format {fmt!r}, expected one of {FORMATS}")
        return fmt
    suffix = Path(path).suffix.lower().lstrip('.')
    if suffix not in FORMATS:
        raise InstanceError(f"cannot infer the format of {path}; pass --format")
    return suffix


def read_instance(path: Union[str, Path], fmt: Optional[str] = None) -> Instance:
    """Read a WTAP or STP file (format from the extension unless given)"""
    fmt = detect_format(path, fmt)
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InstanceError(f"cannot read {path}: {e}") from e
    instance = parse_wtap(text) if fmt == FORMAT_WTAP else parse_stp(text)
    logger.debug(f"Read {fmt} instance from {path}")
    return instance


def write_instance(instance: Instance, path: Union[str, Path]) -> None:
    text = write_wtap(instance) if isinstance(instance, WtapInstance) else write_stp(instance)
    Path(path).write_text(text)


def write_wtap_solution(instance: WtapInstance, link_ids: Iterable[int]) -> str:
    """Solution file: total weight, then one LINK line per chosen link (1-based)"""
    ids = sorted(set(link_ids))
    out = [f"WEIGHT {format_weight(instance.weight(ids))}"]
    out += [f"LINK {instance.links[i].a + 1} {instance.links[i].b + 1} "
            f"{format_weight(instance.links[i].weight)}" for i in ids]
    return "\n".join(out) + "\n"


def write_steiner_solution(instance: SteinerInstance, edge_ids: Iterable[int]) -> str:
    """Solution file: total weight, then one EDGE line per chosen edge (1-based)"""
    ids = sorted(set(edge_ids))
    out = [f"WEIGHT {format_weight(instance.weight(ids))}"]
    out += [f"EDGE {instance.edges[i].u + 1} {instance.edges[i].v + 1} "
            f"{format_weight(instance.edges[i].weight)}" for i in ids]
    return "\n".join(out) + "\n"
