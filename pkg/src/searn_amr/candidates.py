"""Candidate (k-best) lists: the action spaces for concept and relation decisions.

Both tables are counted over the whole training set.  Concept candidates are
keyed by the case-folded span surface; relation candidates by the surface of
the concept (a fragment's root label stands for the fragment).
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .binio import FormatError, Reader, Writer
from .corpus import AnnotatedSentence, CorpusExample, Span, _data_text, _content_lines, span_actions
from .graph import NULL, ConceptLabel, GraphFragment

NO_EDGE = "NO-EDGE"
FALLBACK_RELATION = "mod"
_UNSAFE = re.compile(r'[\s()/:"~]+')


def concept_key(concept) -> str:
    """Surface used to key relation tables; fragments use their root label."""
    if isinstance(concept, str):
        return concept
    return concept.root_label.surface


def _by_count(counter: Counter, key=str):
    return sorted(counter, key=lambda a: (-counter[a], key(a)))


@dataclass
class ConceptTable:
    counts: Dict[str, Counter] = field(default_factory=lambda: defaultdict(Counter))

    def add(self, surface: str, action, n: int = 1):
        self.counts[surface][action] += n

    def total(self, surface: str) -> int:
        return sum(self.counts[surface].values()) if surface in self.counts else 0

    def __contains__(self, surface):
        return surface in self.counts

    def ranked(self, surface: str) -> List:
        """Actions aligned to the span, most frequent first (ties by surface)."""
        if surface not in self.counts:
            return []
        return _by_count(self.counts[surface], key=lambda a: a.surface)

    def most_frequent(self, surface: str):
        ranked = self.ranked(surface)
        return ranked[0] if ranked else None


@dataclass
class RelationTables:
    pairwise: Dict[Tuple[str, str], Counter] = field(default_factory=lambda: defaultdict(Counter))
    outgoing: Dict[str, Counter] = field(default_factory=lambda: defaultdict(Counter))
    incoming: Dict[str, Counter] = field(default_factory=lambda: defaultdict(Counter))
    all_relations: Counter = field(default_factory=Counter)

    def add(self, source: str, relation: str, target: str, n: int = 1):
        self.pairwise[(source, target)][relation] += n
        self.outgoing[source][relation] += n
        self.incoming[target][relation] += n
        self.all_relations[relation] += n

    def seen(self, concept: str) -> bool:
        return concept in self.outgoing or concept in self.incoming


@dataclass
class FrameLexicon:
    frames: Dict[str, List[ConceptLabel]] = field(default_factory=dict)

    def lookup(self, lemma: str) -> List[ConceptLabel]:
        return list(self.frames.get(lemma, ()))


def load_frames(path=None) -> FrameLexicon:
    """Read ``lemma<TAB>frame-sense`` lines (bundled lexicon by default)."""
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("frames.txt")
    frames: Dict[str, List[ConceptLabel]] = {}
    for ln in _content_lines(text):
        lemma, _, frame = ln.partition("\t")
        if not frame:
            lemma, _, frame = ln.partition(" ")
        label = ConceptLabel.parse(frame.strip())
        if not label.is_frame:
            raise ValueError(f"frame lexicon entry {frame!r} lacks a two-digit sense")
        bucket = frames.setdefault(lemma.strip().casefold(), [])
        if label not in bucket:
            bucket.append(label)
    return FrameLexicon(frames)


def build_tables(examples: Sequence[CorpusExample]) -> Tuple[ConceptTable, RelationTables]:
    concepts = ConceptTable()
    relations = RelationTables()
    for ex in examples:
        if ex.gold is None or not ex.alignment:
            continue
        for span, action in span_actions(ex):
            concepts.add(ex.sentence.span_surface(span), action)
        for s, r, t in ex.gold.edges:
            relations.add(ex.gold.label(s).surface, r, ex.gold.label(t).surface)
    return concepts, relations


def lemma_concept(sentence: AnnotatedSentence, span: Span) -> ConceptLabel:
    """The lemmatised span as a word concept (made safe for PENMAN)."""
    lemma = "_".join(_UNSAFE.sub("_", t.lemma.casefold()).strip("_") or "_" for t in sentence.span_tokens(span))
    lemma = lemma.strip("_") or "thing"
    label = ConceptLabel.parse(lemma)
    # a lemma that looks like a frame (e.g. "covid-19") is still just a word
    return ConceptLabel("word", lemma) if label.is_frame or label.is_null else label


def concept_candidates(table: ConceptTable, lexicon: FrameLexicon,
                       sentence: AnnotatedSentence, span: Span) -> List:
    surface = sentence.span_surface(span)
    if surface in table:
        return table.ranked(surface)
    out = [lemma_concept(sentence, span)]
    if any(t.pos.startswith("VB") for t in sentence.span_tokens(span)):
        for frame in lexicon.lookup(sentence.span_lemma(span)):
            if frame not in out:
                out.append(frame)
    out.append(NULL)
    return out


def one_best_concept(table: ConceptTable, sentence: AnnotatedSentence, span: Span):
    best = table.most_frequent(sentence.span_surface(span))
    return best if best is not None else lemma_concept(sentence, span)


def relation_candidates(tables: RelationTables, c_i, c_j) -> List[str]:
    """Relations for an edge c_i -> c_j, most frequent first, NO-EDGE last."""
    ki, kj = concept_key(c_i), concept_key(c_j)
    if not tables.seen(ki) and not tables.seen(kj):
        return _by_count(tables.all_relations) + [NO_EDGE]
    total = Counter()
    total.update(tables.pairwise.get((ki, kj), {}))
    total.update(tables.outgoing.get(ki, {}))
    total.update(tables.incoming.get(kj, {}))
    return _by_count(total) + [NO_EDGE]


# -- model-file encoding -------------------------------------------------------------

def encode_action(action) -> str:
    return ("F" if isinstance(action, GraphFragment) else "L") + action.surface


def decode_action(text: str):
    if text[:1] == "F":
        return GraphFragment.from_surface(text[1:])
    if text[:1] == "L":
        return ConceptLabel.parse(text[1:])
    raise FormatError(f"bad concept action encoding {text[:20]!r}")


def _write_counter(w: Writer, counter: Counter, enc=str):
    items = sorted((enc(k), v) for k, v in counter.items())
    w.u64(len(items))
    for k, v in items:
        w.text(k)
        w.u64(v)


def _read_counter(r: Reader, dec=str) -> Counter:
    out = Counter()
    for _ in range(r.u64()):
        k = r.text()
        out[dec(k)] = r.u64()
    return out


def _write_map(w: Writer, mapping, enc=str):
    keys = sorted(mapping)
    w.u64(len(keys))
    for k in keys:
        w.text(k)
        _write_counter(w, mapping[k], enc)


def _read_map(r: Reader, dec=str):
    out = defaultdict(Counter)
    for _ in range(r.u64()):
        k = r.text()
        out[k] = _read_counter(r, dec)
    return out


def write_tables(w: Writer, concepts: ConceptTable, relations: RelationTables, lexicon: FrameLexicon):
    _write_map(w, concepts.counts, encode_action)
    pairs = sorted(relations.pairwise)
    w.u64(len(pairs))
    for a, b in pairs:
        w.text(a)
        w.text(b)
        _write_counter(w, relations.pairwise[(a, b)])
    _write_map(w, relations.outgoing)
    _write_map(w, relations.incoming)
    _write_counter(w, relations.all_relations)
    lemmas = sorted(lexicon.frames)
    w.u64(len(lemmas))
    for lemma in lemmas:
        w.text(lemma)
        w.text("\t".join(f.surface for f in lexicon.frames[lemma]))


def read_tables(r: Reader):
    concepts = ConceptTable(_read_map(r, decode_action))
    relations = RelationTables()
    for _ in range(r.u64()):
        a, b = r.text(), r.text()
        relations.pairwise[(a, b)] = _read_counter(r)
    relations.outgoing = _read_map(r)
    relations.incoming = _read_map(r)
    relations.all_relations = _read_counter(r)
    frames = {}
    for _ in range(r.u64()):
        lemma = r.text()
        frames[lemma] = [ConceptLabel.parse(s) for s in r.text().split("\t") if s]
    return concepts, relations, FrameLexicon(frames)
