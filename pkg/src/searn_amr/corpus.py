"""Sentence/AMR corpora with sidecar annotations and word-concept alignments.

File formats
------------
corpus       blocks of ``# ::id``, ``# ::snt`` (optionally ``# ::tok``) and a
             PENMAN graph, separated by blank lines.
annotations  per block a ``# ::id`` header, then one tab-separated line per
             token: ``index form lemma POS NE head deplabel`` with 1-based
             indices and head 0 for the sentence root.
alignments   per block a ``# ::id`` header, then ``start-end<TAB>target`` lines
             with 0-based, end-exclusive token offsets.  ``target`` is a
             variable, ``NULL``, or ``root+member+...`` for a span aligned to
             a graph fragment.
"""

from __future__ import annotations

import re
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .graph import (
    NULL, AmrGraph, ConceptLabel, GraphError, GraphFragment, PenmanError,
    parse_penman, read_penman_blocks, serialize_penman,
)


class LoadError(ValueError):
    def __init__(self, example_id, message):
        self.example_id = example_id
        super().__init__(f"{example_id}: {message}")


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty or inverted span {self.start}-{self.end}")

    @property
    def indices(self) -> range:
        return range(self.start, self.end)

    def __len__(self):
        return self.end - self.start

    def __str__(self):
        return f"{self.start}-{self.end}"

    @classmethod
    def parse(cls, text: str) -> "Span":
        a, _, b = text.partition("-")
        return cls(int(a), int(b))


@dataclass(frozen=True)
class Token:
    form: str
    lemma: str
    pos: str
    ne: str = "O"


DepEdge = Tuple[int, int, str]   # (head, dependent, label); head -1 is the synthetic root


@dataclass(frozen=True)
class AnnotatedSentence:
    tokens: Tuple[Token, ...]
    dep_edges: Tuple[DepEdge, ...] = ()
    spans: Tuple[Span, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "dep_edges", tuple(tuple(e) for e in self.dep_edges))
        object.__setattr__(self, "spans", tuple(self.spans))

    def __len__(self):
        return len(self.tokens)

    def with_spans(self, spans: Iterable[Span]) -> "AnnotatedSentence":
        return replace(self, spans=tuple(spans))

    @property
    def forms(self) -> List[str]:
        return [t.form for t in self.tokens]

    def span_tokens(self, span: Span) -> Tuple[Token, ...]:
        return self.tokens[span.start:span.end]

    def span_surface(self, span: Span) -> str:
        """Case-folded, space-joined forms; the key of the concept table."""
        return " ".join(t.form for t in self.span_tokens(span)).casefold()

    def span_lemma(self, span: Span) -> str:
        return " ".join(t.lemma for t in self.span_tokens(span)).casefold()

    @cached_property
    def heads(self) -> Dict[int, int]:
        return {d: h for h, d, _ in self.dep_edges}

    @cached_property
    def dep_roots(self) -> frozenset:
        return frozenset(d for h, d, _ in self.dep_edges if h < 0)

    @cached_property
    def dep_neighbours(self) -> Dict[int, List[int]]:
        adj = {i: [] for i in range(len(self.tokens))}
        for h, d, _ in self.dep_edges:
            if h >= 0:
                adj[h].append(d)
                adj[d].append(h)
        return adj

    @cached_property
    def dep_distances(self) -> List[Dict[int, int]]:
        """BFS distances over the undirected dependency tree, per token."""
        out = []
        for src in range(len(self.tokens)):
            dist = {src: 0}
            queue = deque([src])
            while queue:
                u = queue.popleft()
                for w in self.dep_neighbours[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        queue.append(w)
            out.append(dist)
        return out


@dataclass(frozen=True)
class AlignmentPair:
    """One aligned span.  ``nodes`` is empty for NULL, else root first."""

    span: Span
    nodes: Tuple[str, ...] = ()

    @property
    def target(self) -> Optional[str]:
        return self.nodes[0] if self.nodes else None

    @property
    def is_null(self) -> bool:
        return not self.nodes


@dataclass(frozen=True)
class Alignment:
    pairs: Tuple[AlignmentPair, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs, key=lambda p: p.span)))
        spans = [p.span for p in self.pairs]
        if len(set(spans)) != len(spans):
            raise ValueError("span aligned more than once")
        covered = [v for p in self.pairs for v in p.nodes]
        if len(set(covered)) != len(covered):
            raise ValueError("AMR node aligned to more than one span")

    def __bool__(self):
        return bool(self.pairs)

    def __len__(self):
        return len(self.pairs)

    @cached_property
    def by_span(self) -> Dict[Span, AlignmentPair]:
        return {p.span: p for p in self.pairs}

    @cached_property
    def covered_nodes(self) -> frozenset:
        return frozenset(v for p in self.pairs for v in p.nodes)

    @cached_property
    def covered_tokens(self) -> frozenset:
        return frozenset(i for p in self.pairs for i in p.span.indices)


@dataclass(frozen=True)
class CorpusExample:
    id: str
    sentence: AnnotatedSentence
    gold: Optional[AmrGraph] = None
    alignment: Alignment = field(default_factory=Alignment)
    text: str = ""


# -- concept actions from alignments -------------------------------------------

def pair_action(gold: AmrGraph, pair: AlignmentPair):
    """The concept action (label or fragment) an alignment pair stands for."""
    if pair.is_null:
        return NULL
    members = set(pair.nodes)
    consts = [c for c in gold.constants if c[0] in members]
    if len(members) == 1 and not consts:
        return gold.label(pair.target)
    nodes = [(v, lab) for v, lab in gold.nodes if v in members]
    edges = [e for e in gold.edges if e[0] in members and e[2] in members]
    try:
        return GraphFragment(AmrGraph(nodes, edges, pair.target, consts))
    except GraphError:
        return gold.label(pair.target)


def span_actions(example: CorpusExample) -> List[Tuple[Span, object]]:
    """Gold concept action for every span of the example's segmentation."""
    out = []
    for span in example.sentence.spans:
        pair = example.alignment.by_span.get(span)
        out.append((span, NULL if pair is None else pair_action(example.gold, pair)))
    return out


def gold_node_by_span(example: CorpusExample) -> Dict[Span, str]:
    return {p.span: p.target for p in example.alignment.pairs if not p.is_null}


# -- span segmentation ---------------------------------------------------------

def gold_spans_from_alignment(example: CorpusExample) -> List[Span]:
    """Training-time segmentation: aligned spans plus NULL singletons."""
    spans = sorted(p.span for p in example.alignment.pairs)
    for a, b in zip(spans, spans[1:]):
        if b.start < a.end:
            raise LoadError(example.id, f"overlapping aligned spans {a} and {b}")
    if spans and spans[-1].end > len(example.sentence):
        raise LoadError(example.id, f"aligned span {spans[-1]} runs past the sentence")
    covered = {i for s in spans for i in s.indices}
    spans += [Span(i, i + 1) for i in range(len(example.sentence)) if i not in covered]
    return sorted(spans)


def _ne_type(tag: str) -> Optional[str]:
    if tag in ("O", "", "_"):
        return None
    return tag[2:] if tag[:2] in ("B-", "I-") else tag


def identify_spans(sentence: AnnotatedSentence, date_patterns: Sequence[re.Pattern]) -> List[Span]:
    """Test-time segmentation from NE runs and date/time patterns.

    A maximal run of tokens sharing a non-``O`` NE type is one span (a ``B-``
    tag starts a new run).  Outside NE spans, the longest token window whose
    space-joined forms fully match a date pattern becomes one span, scanning
    left to right.  Everything else is a singleton.
    """
    n = len(sentence)
    spans = []
    in_ne = [False] * n
    i = 0
    while i < n:
        kind = _ne_type(sentence.tokens[i].ne)
        if kind is None:
            i += 1
            continue
        j = i + 1
        while (j < n and _ne_type(sentence.tokens[j].ne) == kind
               and not sentence.tokens[j].ne.startswith("B-")):
            j += 1
        spans.append(Span(i, j))
        for k in range(i, j):
            in_ne[k] = True
        i = j

    forms = sentence.forms
    i = 0
    while i < n:
        if in_ne[i]:
            i += 1
            continue
        stop = i
        while stop < n and not in_ne[stop]:
            stop += 1
        best = None
        for j in range(stop, i + 1, -1):
            window = " ".join(forms[i:j])
            if any(p.fullmatch(window) for p in date_patterns):
                best = j
                break
        if best is not None:
            spans.append(Span(i, best))
            for k in range(i, best):
                in_ne[k] = True
            i = best
        else:
            i += 1

    covered = {k for s in spans for k in s.indices}
    spans += [Span(k, k + 1) for k in range(n) if k not in covered]
    return sorted(spans)


# -- forced alignment -----------------------------------------------------------

def _leftovers(example: CorpusExample):
    gold, al = example.gold, example.alignment
    concepts = [v for v in gold.variables if v not in al.covered_nodes]
    words = [i for i in range(len(example.sentence)) if i not in al.covered_tokens]
    return concepts, words


def force_align(examples: Sequence[CorpusExample]) -> List[CorpusExample]:
    """Align leftover concepts to unaligned words by global co-occurrence.

    Words explicitly aligned to NULL count as aligned and are never reused.
    Within a sentence, (concept, word) pairs are taken greedily by descending
    count, ties going to the leftmost word; each word takes one concept.
    """
    counts: Counter = Counter()
    for ex in examples:
        if ex.gold is None:
            continue
        concepts, words = _leftovers(ex)
        for v in concepts:
            label = ex.gold.label(v).surface
            for w in words:
                counts[(ex.sentence.tokens[w].form, label)] += 1

    out = []
    for ex in examples:
        if ex.gold is None:
            out.append(ex)
            continue
        concepts, words = _leftovers(ex)
        if not concepts or not words:
            out.append(ex)
            continue
        order = {v: k for k, v in enumerate(concepts)}
        options = []
        for v in concepts:
            label = ex.gold.label(v).surface
            for w in words:
                c = counts[(ex.sentence.tokens[w].form, label)]
                if c > 0:
                    options.append((-c, w, order[v], v))
        options.sort()
        used_v, used_w, added = set(), set(), []
        for _, w, _, v in options:
            if v in used_v or w in used_w:
                continue
            used_v.add(v)
            used_w.add(w)
            added.append(AlignmentPair(Span(w, w + 1), (v,)))
        if not added:
            out.append(ex)
            continue
        alignment = Alignment(ex.alignment.pairs + tuple(added))
        new = replace(ex, alignment=alignment)
        out.append(replace(new, sentence=ex.sentence.with_spans(gold_spans_from_alignment(new))))
    return out


# -- bundled resources ------------------------------------------------------------

def _data_text(name: str) -> str:
    return resources.files("searn_amr").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def _content_lines(text: str) -> List[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def load_date_patterns(path=None) -> List[re.Pattern]:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("date_patterns.txt")
    return [re.compile(p, re.IGNORECASE) for p in _content_lines(text)]


def load_stopwords(path=None) -> frozenset:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("stopwords.txt")
    return frozenset(w.casefold() for w in _content_lines(text))


# -- reading -------------------------------------------------------------------------

def _split_blocks(path) -> Dict[str, List[str]]:
    """Blocks keyed by their ``# ::id``, preserving file order."""
    blocks: Dict[str, List[str]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for chunk in re.split(r"\n\s*\n", text.strip()):
        lines = [ln for ln in chunk.split("\n") if ln.strip()]
        if not lines:
            continue
        ids = [ln.strip()[7:].split()[0] for ln in lines if ln.strip().startswith("# ::id ")]
        if not ids:
            raise LoadError("?", f"{path}: block without '# ::id' header")
        if ids[0] in blocks:
            raise LoadError(ids[0], f"{path}: duplicate id")
        blocks[ids[0]] = [ln for ln in lines if not ln.strip().startswith("#")]
    return blocks


def parse_annotation_block(example_id: str, lines: Sequence[str]) -> AnnotatedSentence:
    tokens, edges = [], []
    for k, ln in enumerate(lines):
        cols = ln.rstrip("\n").split("\t")
        if len(cols) != 7:
            raise LoadError(example_id, f"annotation line {k + 1} has {len(cols)} columns, expected 7")
        idx, form, lemma, pos, ne, head, label = cols
        try:
            idx, head = int(idx), int(head)
        except ValueError:
            raise LoadError(example_id, f"annotation line {k + 1}: non-integer index or head") from None
        if idx != k + 1:
            raise LoadError(example_id, f"annotation line {k + 1}: expected index {k + 1}, got {idx}")
        tokens.append(Token(form, lemma, pos, ne))
        edges.append((head - 1, idx - 1, label))
    n = len(tokens)
    roots = [d for h, d, _ in edges if h < 0]
    if n and len(roots) != 1:
        raise LoadError(example_id, f"dependency tree has {len(roots)} roots")
    for h, d, _ in edges:
        if h >= n:
            raise LoadError(example_id, f"dependency head {h + 1} out of range")
    sent = AnnotatedSentence(tuple(tokens), tuple(edges))
    if n and len(sent.dep_distances[roots[0]]) != n:
        raise LoadError(example_id, "dependency edges do not form a tree")
    return sent


def parse_alignment_block(example_id: str, lines: Sequence[str]) -> Alignment:
    pairs = []
    for ln in lines:
        span_txt, _, target = ln.strip().partition("\t")
        if not target:
            span_txt, _, target = ln.strip().partition(" ")
        try:
            span = Span.parse(span_txt)
        except ValueError:
            raise LoadError(example_id, f"bad alignment span {span_txt!r}") from None
        target = target.strip()
        nodes = () if target == "NULL" else tuple(target.split("+"))
        pairs.append(AlignmentPair(span, nodes))
    try:
        return Alignment(tuple(pairs))
    except ValueError as exc:
        raise LoadError(example_id, str(exc)) from None


def load_annotations(annotations_path) -> Dict[str, AnnotatedSentence]:
    return {eid: parse_annotation_block(eid, lines)
            for eid, lines in _split_blocks(annotations_path).items()}


def load_corpus(corpus_path, annotations_path, alignments_path=None,
                date_patterns=None) -> List[CorpusExample]:
    """Read a corpus with its annotation sidecar and (optionally) alignments.

    With alignments, each sentence is segmented by them; without, the
    test-time segmentation (NE runs + date patterns) is used and alignments
    are left empty.
    """
    if date_patterns is None:
        date_patterns = load_date_patterns()
    annotations = load_annotations(annotations_path)
    alignments = None
    if alignments_path is not None:
        alignments = {eid: parse_alignment_block(eid, lines)
                      for eid, lines in _split_blocks(alignments_path).items()}

    text = Path(corpus_path).read_text(encoding="utf-8")
    examples = []
    seen = set()
    for meta, body in read_penman_blocks(text):
        eid = meta.get("id")
        if eid is None:
            raise LoadError("?", f"{corpus_path}: block without '# ::id' header")
        if eid in seen:
            raise LoadError(eid, "duplicate id in corpus")
        seen.add(eid)
        try:
            gold = parse_penman(body)
        except (PenmanError, GraphError) as exc:
            raise LoadError(eid, f"malformed PENMAN: {exc}") from None
        if eid not in annotations:
            raise LoadError(eid, "no annotations for this id")
        sent = annotations[eid]
        raw = meta.get("tok") or meta.get("snt", "")
        n_tok = len(raw.split())
        if n_tok != len(sent):
            raise LoadError(eid, f"annotation has {len(sent)} tokens, sentence has {n_tok}")
        ex = CorpusExample(eid, sent, gold, Alignment(), meta.get("snt", raw))
        if alignments is not None:
            if eid not in alignments:
                raise LoadError(eid, "no alignments for this id")
            al = alignments[eid]
            missing = [v for v in al.covered_nodes if v not in gold.labels]
            if missing:
                raise LoadError(eid, f"alignment refers to unknown variable(s) {', '.join(sorted(missing))}")
            ex = replace(ex, alignment=al)
            ex = replace(ex, sentence=sent.with_spans(gold_spans_from_alignment(ex)))
        else:
            ex = replace(ex, sentence=sent.with_spans(identify_spans(sent, date_patterns)))
        examples.append(ex)

    extra = set(annotations) - seen
    if extra:
        raise LoadError(sorted(extra)[0], "annotations present but no corpus entry")
    if alignments is not None:
        extra = set(alignments) - seen
        if extra:
            raise LoadError(sorted(extra)[0], "alignments present but no corpus entry")
    return examples


def load_sentences(annotations_path, date_patterns=None) -> List[CorpusExample]:
    """Raw input: annotated sentences without gold graphs."""
    if date_patterns is None:
        date_patterns = load_date_patterns()
    out = []
    for eid, sent in load_annotations(annotations_path).items():
        text = " ".join(sent.forms)
        out.append(CorpusExample(eid, sent.with_spans(identify_spans(sent, date_patterns)), None,
                                 Alignment(), text))
    return out


# -- writing ---------------------------------------------------------------------------

def format_alignment(example: CorpusExample) -> str:
    lines = [f"# ::id {example.id}"]
    for p in example.alignment.pairs:
        lines.append(f"{p.span}\t{'+'.join(p.nodes) if p.nodes else 'NULL'}")
    return "\n".join(lines)


def format_annotation(example: CorpusExample) -> str:
    s = example.sentence
    lines = [f"# ::id {example.id}"]
    heads = {d: (h, lab) for h, d, lab in s.dep_edges}
    for i, t in enumerate(s.tokens):
        h, lab = heads.get(i, (-1, "root"))
        lines.append("\t".join([str(i + 1), t.form, t.lemma, t.pos, t.ne, str(h + 1), lab]))
    return "\n".join(lines)


def format_corpus_entry(example: CorpusExample, graph: Optional[AmrGraph] = None, extra=()) -> str:
    g = example.gold if graph is None else graph
    text = example.text or " ".join(example.sentence.forms)
    lines = [f"# ::id {example.id}", f"# ::snt {text}"]
    lines.extend(extra)
    lines.append(serialize_penman(g))
    return "\n".join(lines)


def write_blocks(path, blocks: Iterable[str]):
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
