"""AMR graphs: data model, PENMAN reading/writing and structural checks.

A graph is a set of variable nodes labelled with concepts, a list of labelled
relation edges between variables, and a list of constant attachments
(quoted strings, numbers, ``-``) that hang off a variable.  Graphs are
immutable; the helpers that "modify" a graph return a new one.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

Edge = Tuple[str, str, str]          # (source, relation, target)
Constant = Tuple[str, str, str]      # (source, relation, value)

FRAME_RE = re.compile(r"^(?P<frame>.+)-(?P<sense>\d\d)$")
# Bare symbols of this shape are taken as variable references, never constants.
VARIABLE_RE = re.compile(r"^[a-z]\d*$")

KEYWORDS = frozenset({
    "name", "date-entity", "date-interval", "thing", "person", "and", "or",
    "multi-sentence", "amr-unknown", "amr-choice", "temporal-quantity",
    "monetary-quantity", "distance-quantity", "percentage-entity",
    "ordinal-entity", "government-organization", "political-party",
    "country", "city", "organization", "company", "world-region",
    "rate-entity-91", "have-org-role-91", "have-rel-role-91",
})

NULL_SURFACE = "NULL"


class PenmanError(ValueError):
    """Malformed PENMAN text; carries the 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class ConceptLabel:
    """A concept: PropBank frame, plain word, special keyword, or NULL."""

    kind: str       # "frame" | "word" | "keyword" | "null"
    surface: str

    @classmethod
    def parse(cls, surface: str) -> "ConceptLabel":
        if surface == NULL_SURFACE:
            return NULL
        if FRAME_RE.match(surface):
            return cls("frame", surface)
        if surface in KEYWORDS:
            return cls("keyword", surface)
        return cls("word", surface)

    @classmethod
    def frame_of(cls, frame: str, sense: str) -> "ConceptLabel":
        if not re.fullmatch(r"\d\d", sense):
            raise ValueError(f"frame sense must be two digits, got {sense!r}")
        return cls("frame", f"{frame}-{sense}")

    @property
    def is_null(self) -> bool:
        return self.kind == "null"

    @property
    def is_frame(self) -> bool:
        return self.kind == "frame"

    @property
    def frame(self) -> Optional[str]:
        m = FRAME_RE.match(self.surface) if self.is_frame else None
        return m.group("frame") if m else None

    @property
    def sense(self) -> Optional[str]:
        m = FRAME_RE.match(self.surface) if self.is_frame else None
        return m.group("sense") if m else None

    @property
    def root_label(self) -> "ConceptLabel":
        return self

    def __str__(self):
        return self.surface


NULL = ConceptLabel("null", NULL_SURFACE)


@dataclass(frozen=True)
class AmrGraph:
    nodes: Tuple[Tuple[str, ConceptLabel], ...] = ()
    edges: Tuple[Edge, ...] = ()
    root: Optional[str] = None
    constants: Tuple[Constant, ...] = ()

    def __post_init__(self):
        # normalise lists to tuples so the value is hashable and immutable
        object.__setattr__(self, "nodes", tuple((v, lab) for v, lab in self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "constants", tuple(tuple(c) for c in self.constants))
        seen = set()
        for var, label in self.nodes:
            if var in seen:
                raise GraphError(f"duplicate variable {var!r}")
            if label.is_null:
                raise GraphError(f"NULL concept stored as node {var!r}")
            seen.add(var)
        for s, r, t in self.edges:
            if s not in seen or t not in seen:
                raise GraphError(f"edge {s} :{r} {t} has an undeclared endpoint")
        for s, r, _ in self.constants:
            if s not in seen:
                raise GraphError(f"constant :{r} on undeclared variable {s!r}")
        if self.nodes and self.root not in seen:
            raise GraphError(f"root {self.root!r} is not a declared node")

    # -- lookups -----------------------------------------------------------

    @cached_property
    def labels(self) -> Dict[str, ConceptLabel]:
        return dict(self.nodes)

    @cached_property
    def order(self) -> Dict[str, int]:
        return {v: i for i, (v, _) in enumerate(self.nodes)}

    @property
    def variables(self) -> List[str]:
        return [v for v, _ in self.nodes]

    def label(self, var: str) -> ConceptLabel:
        return self.labels[var]

    @cached_property
    def children(self) -> Dict[str, List[Tuple[str, str]]]:
        out = {v: [] for v, _ in self.nodes}
        for s, r, t in self.edges:
            out[s].append((r, t))
        return out

    @cached_property
    def parents(self) -> Dict[str, List[Tuple[str, str]]]:
        out = {v: [] for v, _ in self.nodes}
        for s, r, t in self.edges:
            out[t].append((r, s))
        return out

    @cached_property
    def undirected(self) -> Dict[str, List[str]]:
        adj = {v: [] for v, _ in self.nodes}
        for s, _, t in self.edges:
            adj[s].append(t)
            adj[t].append(s)
        return adj

    def constants_of(self, var: str) -> List[Tuple[str, str]]:
        return [(r, val) for s, r, val in self.constants if s == var]

    def __len__(self):
        return len(self.nodes)

    # -- functional updates --------------------------------------------------

    def with_edge(self, source: str, relation: str, target: str) -> "AmrGraph":
        return AmrGraph(self.nodes, self.edges + ((source, relation, target),),
                        self.root, self.constants)

    def without_edge(self, index: int) -> "AmrGraph":
        edges = self.edges[:index] + self.edges[index + 1:]
        return AmrGraph(self.nodes, edges, self.root, self.constants)

    def with_root(self, root: str) -> "AmrGraph":
        return AmrGraph(self.nodes, self.edges, root, self.constants)


@dataclass(frozen=True, eq=False)
class GraphFragment:
    """A multi-node (or constant-bearing) concept, e.g. a named entity.

    The wrapped graph's root is the fragment root.  Equality and hashing go
    through the canonical one-line PENMAN form, so two fragments with the same
    shape and labels are the same action regardless of variable names.
    """

    graph: AmrGraph
    surface: str = field(init=False)

    def __post_init__(self):
        g = self.graph
        if not g.nodes:
            raise GraphError("empty fragment")
        if not is_connected(g) or find_cycle(g) is not None:
            raise GraphError("fragment must be connected and acyclic")
        if g.parents[g.root]:
            raise GraphError("fragment root has an incoming edge")
        object.__setattr__(self, "surface", _canonical(g))

    @classmethod
    def from_surface(cls, surface: str) -> "GraphFragment":
        return cls(parse_penman(surface))

    @property
    def is_null(self) -> bool:
        return False

    @property
    def is_frame(self) -> bool:
        return False

    @property
    def root_label(self) -> ConceptLabel:
        return self.graph.label(self.graph.root)

    def __eq__(self, other):
        return isinstance(other, GraphFragment) and other.surface == self.surface

    def __hash__(self):
        return hash(("fragment", self.surface))

    def __str__(self):
        return self.surface


def _canonical(g: AmrGraph) -> str:
    """One-line PENMAN with children sorted and variables renamed in DFS order."""
    names: Dict[str, str] = {}

    def walk(var):
        names[var] = f"x{len(names)}"
        kids = sorted(g.children[var], key=lambda rt: (rt[0], g.label(rt[1]).surface))
        parts = [f"({names[var]} / {g.label(var).surface}"]
        for rel, val in sorted(g.constants_of(var)):
            parts.append(f":{rel} {val}")
        for rel, t in kids:
            parts.append(f":{rel} {names[t]}" if t in names else f":{rel} {walk(t)}")
        return " ".join(parts) + ")"

    return walk(g.root)


# -- PENMAN reading --------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<slash>/)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<role>:[^\s()"~]*)
  | (?P<symbol>[^\s()/:"~][^\s()"~]*)
  | (?P<align>~[^\s()]*)
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    line, line_start = 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PenmanError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = m.start() + chunk.rfind("\n") + 1
        elif kind != "align":
            out.append((kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    return out


def _strip_comments(text: str) -> str:
    # keep line numbering intact by blanking comment lines instead of dropping them
    return "\n".join("" if ln.lstrip().startswith("#") else ln for ln in text.split("\n"))


def parse_penman(text: str) -> AmrGraph:
    """Parse one PENMAN expression (optionally preceded by ``# ::`` comments).

    The first declared variable is the root.  Inverse roles such as
    ``:ARG0-of`` are kept verbatim.  Bare symbols shaped like variables
    (a letter plus optional digits) must be declared somewhere in the graph;
    other bare symbols (``-``, ``5``, ``imperative``) become constants.
    """
    tokens = _tokenize(_strip_comments(text))
    if not tokens:
        raise PenmanError("empty PENMAN text")

    declared = set()
    for i, tok in enumerate(tokens[:-1]):
        if tok[0] == "lparen" and tokens[i + 1][0] == "symbol":
            declared.add(tokens[i + 1][1])

    nodes: List[Tuple[str, ConceptLabel]] = []
    node_vars = set()
    edges: List[Edge] = []
    constants: List[Constant] = []
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def expect(kind):
        nonlocal pos
        tok = peek()
        if tok is None:
            last = tokens[-1]
            raise PenmanError(f"unexpected end of input, expected {kind}", last[2], last[3])
        if tok[0] != kind:
            raise PenmanError(f"expected {kind}, got {tok[1]!r}", tok[2], tok[3])
        pos += 1
        return tok

    def parse_node():
        nonlocal pos
        expect("lparen")
        var_tok = expect("symbol")
        var = var_tok[1]
        if var in node_vars:
            raise PenmanError(f"duplicate variable {var!r}", var_tok[2], var_tok[3])
        node_vars.add(var)
        slot = len(nodes)
        nodes.append((var, None))
        expect("slash")
        concept_tok = peek()
        if concept_tok is None or concept_tok[0] not in ("symbol", "string"):
            where = concept_tok or tokens[-1]
            raise PenmanError("missing concept after '/'", where[2], where[3])
        pos += 1
        nodes[slot] = (var, ConceptLabel.parse(concept_tok[1].strip('"')))
        while True:
            tok = peek()
            if tok is None:
                last = tokens[-1]
                raise PenmanError("unbalanced parentheses: missing ')'", last[2], last[3])
            if tok[0] == "rparen":
                pos += 1
                return var
            role_tok = expect("role")
            rel = role_tok[1][1:]
            tgt = peek()
            if tgt is None:
                raise PenmanError(f"role :{rel} has no value", role_tok[2], role_tok[3])
            if tgt[0] == "lparen":
                # reserve the slot first so edges keep document order
                slot = len(edges)
                edges.append(None)
                edges[slot] = (var, rel, parse_node())
            elif tgt[0] == "string":
                pos += 1
                constants.append((var, rel, tgt[1]))
            elif tgt[0] == "symbol":
                pos += 1
                sym = tgt[1]
                if sym in declared:
                    edges.append((var, rel, sym))
                elif VARIABLE_RE.match(sym):
                    raise PenmanError(f"reference to undeclared variable {sym!r}", tgt[2], tgt[3])
                else:
                    constants.append((var, rel, sym))
            else:
                raise PenmanError(f"unexpected {tgt[1]!r} after role :{rel}", tgt[2], tgt[3])

    root = parse_node()
    if pos != len(tokens):
        tok = tokens[pos]
        if tok[0] == "rparen":
            raise PenmanError("unbalanced parentheses: extra ')'", tok[2], tok[3])
        raise PenmanError(f"trailing content {tok[1]!r}", tok[2], tok[3])
    return AmrGraph(nodes, edges, root, constants)


# -- PENMAN writing --------------------------------------------------------------

def serialize_penman(g: AmrGraph, indent: Optional[int] = 4) -> str:
    """Write ``g`` depth-first from its root.

    A node reached a second time (re-entrancy or a cycle back-edge) is written
    as a bare variable reference.  With ``indent=None`` everything goes on one
    line.
    """
    if not g.nodes:
        raise GraphError("cannot serialise an empty graph")
    if not is_connected(g):
        roots = component_roots(g)
        raise GraphError(f"graph is disconnected; component roots: {', '.join(roots)}")
    reach = reachable_from(g, g.root)
    if len(reach) != len(g.nodes):
        missing = [v for v in g.variables if v not in reach]
        raise GraphError(f"nodes not reachable from root {g.root}: {', '.join(missing)}")

    seen = set()

    def walk(var, depth):
        seen.add(var)
        head = f"({var} / {g.label(var).surface}"
        parts = []
        for rel, t in g.children[var]:
            if t in seen:
                parts.append(f":{rel} {t}")
            else:
                parts.append(f":{rel} {walk(t, depth + 1)}")
        for rel, val in g.constants_of(var):
            parts.append(f":{rel} {val}")
        if not parts:
            return head + ")"
        if indent is None:
            return head + " " + " ".join(parts) + ")"
        pad = "\n" + " " * (indent * (depth + 1))
        return head + pad + pad.join(parts) + ")"

    return walk(g.root, 0)


# -- structure -------------------------------------------------------------------

def reachable_from(g: AmrGraph, start: str) -> set:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for _, t in g.children[v]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def weak_components(g: AmrGraph) -> List[List[str]]:
    """Weakly connected components, each listed in node order."""
    comp_of: Dict[str, int] = {}
    comps: List[List[str]] = []
    for v in g.variables:
        if v in comp_of:
            continue
        idx = len(comps)
        members = []
        queue = deque([v])
        comp_of[v] = idx
        while queue:
            u = queue.popleft()
            members.append(u)
            for w in g.undirected[u]:
                if w not in comp_of:
                    comp_of[w] = idx
                    queue.append(w)
        comps.append(sorted(members, key=g.order.__getitem__))
    return comps


def is_connected(g: AmrGraph) -> bool:
    return len(weak_components(g)) <= 1


def find_cycle(g: AmrGraph) -> Optional[List[str]]:
    """Return one directed cycle as a list of variables, or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {v: WHITE for v in g.variables}
    for start in g.variables:
        if color[start] != WHITE:
            continue
        # iterative DFS; path holds the grey chain
        path = [start]
        iters = [iter(g.children[start])]
        color[start] = GREY
        while path:
            advanced = False
            for _, t in iters[-1]:
                if color[t] == GREY:
                    return path[path.index(t):]
                if color[t] == WHITE:
                    color[t] = GREY
                    path.append(t)
                    iters.append(iter(g.children[t]))
                    advanced = True
                    break
            if not advanced:
                color[path.pop()] = BLACK
                iters.pop()
    return None


def is_acyclic(g: AmrGraph) -> bool:
    return find_cycle(g) is None


def is_rooted(g: AmrGraph) -> bool:
    """Every node is reachable from the root along edge directions."""
    if not g.nodes:
        return True
    return len(reachable_from(g, g.root)) == len(g.nodes)


def component_roots(g: AmrGraph) -> List[str]:
    """One root per weak component: its first in-degree-0 node, else its first node."""
    out = []
    for comp in weak_components(g):
        out.append(next((v for v in comp if not g.parents[v]), comp[0]))
    return out


def topological_order(g: AmrGraph) -> Optional[List[str]]:
    """Kahn's algorithm; None when the graph has a cycle."""
    indeg = {v: len(g.parents[v]) for v in g.variables}
    queue = deque(v for v in g.variables if indeg[v] == 0)
    out = []
    while queue:
        v = queue.popleft()
        out.append(v)
        for _, t in g.children[v]:
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    return out if len(out) == len(g.nodes) else None


def fresh_variable(label: ConceptLabel, used) -> str:
    """AMR-style variable: first letter of the concept, numbered on clashes."""
    first = next((ch.lower() for ch in label.surface if ch.isalpha()), "x")
    if not first.isascii():
        first = "x"
    if first not in used:
        return first
    i = 2
    while f"{first}{i}" in used:
        i += 1
    return f"{first}{i}"


def read_penman_blocks(text: str) -> List[Tuple[Dict[str, str], str]]:
    """Split a corpus file into (metadata, graph text) blocks.

    Blocks are separated by blank lines; ``# ::key value`` lines become
    metadata entries (repeated keys keep the last value, except ``span``
    lines which accumulate newline-joined).
    """
    blocks = []
    for chunk in re.split(r"\n\s*\n", text.strip()):
        if not chunk.strip():
            continue
        meta: Dict[str, str] = {}
        body = []
        for ln in chunk.split("\n"):
            s = ln.strip()
            if s.startswith("# ::"):
                key, _, value = s[4:].partition(" ")
                if key in meta and key == "span":
                    meta[key] += "\n" + value
                else:
                    meta[key] = value
            elif s.startswith("#"):
                continue
            else:
                body.append(ln)
        blocks.append((meta, "\n".join(body)))
    return blocks


def graph_from_parts(nodes: Iterable, edges: Iterable, root, constants: Sequence = ()) -> AmrGraph:
    return AmrGraph(tuple(nodes), tuple(edges), root, tuple(constants))
