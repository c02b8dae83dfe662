"""Template-generated toy corpus with gold AMRs, annotations and alignments.

Every template keeps three properties the end-to-end checks rely on: every
AMR node is aligned to a span, every edge between aligned spans joins words
at most two dependency arcs apart, and every dependency arc between two
concept-bearing spans is mirrored by an AMR edge in the same direction.

Run ``python -m searn_amr.synthetic OUTDIR`` to write the bundled files.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .corpus import (
    Alignment, AlignmentPair, AnnotatedSentence, CorpusExample, Span, Token,
    format_alignment, format_annotation, format_corpus_entry, gold_spans_from_alignment,
    write_blocks,
)
from .graph import AmrGraph, ConceptLabel, fresh_variable

SUBJECT_NOUNS = ["boy", "girl", "dog", "cat", "teacher", "student", "man", "woman"]
OBJECT_NOUNS = SUBJECT_NOUNS + ["book", "letter", "apple", "car", "house", "song"]
TOPICS = ["forest", "war", "music", "city", "sea"]
ADJECTIVES = ["big", "small", "old", "young", "red", "happy"]
PRONOUNS = [("I", "i"), ("She", "she"), ("He", "he"), ("They", "they")]
# (past form, base form, lemma, frame)
TRANSITIVE = [
    ("saw", "see", "see-01"), ("chased", "chase", "chase-01"), ("liked", "like", "like-01"),
    ("found", "find", "find-01"), ("helped", "help", "help-01"), ("watched", "watch", "watch-01"),
    ("bought", "buy", "buy-01"), ("read", "read", "read-01"), ("wrote", "write", "write-01"),
]
PEOPLE = [("John", "Smith"), ("Mary", "Jones"), ("Peter", "Brown"), ("Anna", "Lee")]
CITIES = [("Paris",), ("London",), ("Boston",), ("New", "York")]
TITLES = [("Stories", "from", "Nature"), ("Blue", "Moon"), ("Long", "Road"), ("Green", "Hills")]
MONTHS = ["January", "February", "March", "April", "May", "June", "July",
          "August", "September", "October", "November", "December"]


class _Builder:
    def __init__(self):
        self.tokens: List[Token] = []
        self.arcs = {}
        self.nodes = []
        self.edges = []
        self.consts = []
        self.pairs = []
        self.used = set()
        self.root = None

    def tok(self, form, lemma=None, pos="NN", ne="O") -> int:
        self.tokens.append(Token(form, (lemma or form).lower(), pos, ne))
        return len(self.tokens) - 1

    def arc(self, head: Optional[int], dep: int, label: str):
        self.arcs[dep] = (-1 if head is None else head, label)

    def node(self, concept: str) -> str:
        label = ConceptLabel.parse(concept)
        var = fresh_variable(label, self.used)
        self.used.add(var)
        self.nodes.append((var, label))
        if self.root is None:
            self.root = var
        return var

    def edge(self, s, rel, t):
        self.edges.append((s, rel, t))

    def const(self, s, rel, value):
        self.consts.append((s, rel, value))

    def align(self, start, end, *vars_):
        self.pairs.append(AlignmentPair(Span(start, end), tuple(vars_)))

    def example(self, eid: str) -> CorpusExample:
        deps = [(h, d, lab) for d, (h, lab) in sorted(self.arcs.items())]
        sent = AnnotatedSentence(tuple(self.tokens), tuple(deps))
        gold = AmrGraph(self.nodes, self.edges, self.root, self.consts)
        ex = CorpusExample(eid, sent, gold, Alignment(tuple(self.pairs)),
                           " ".join(t.form for t in self.tokens))
        return CorpusExample(ex.id, sent.with_spans(gold_spans_from_alignment(ex)), gold,
                             ex.alignment, ex.text)


# -- noun phrases ---------------------------------------------------------------------

def _noun_phrase(b: _Builder, rng: random.Random, nouns, allow_adj=True, det=None):
    """Det (Adj) Noun; returns (head token, concept var)."""
    d = b.tok(det or rng.choice(["the", "a"]), pos="DT")
    adj = rng.choice(ADJECTIVES) if allow_adj and rng.random() < 0.4 else None
    a = b.tok(adj, pos="JJ") if adj else None
    noun = rng.choice(nouns)
    n = b.tok(noun, pos="NN")
    b.arc(n, d, "det")
    b.align(d, d + 1)
    v = b.node(noun)
    b.align(n, n + 1, v)
    if adj:
        b.arc(n, a, "amod")
        av = b.node(adj)
        b.align(a, a + 1, av)
        b.edge(v, "mod", av)
    return n, v


def _person(b: _Builder, rng: random.Random):
    first, last = rng.choice(PEOPLE)
    i = b.tok(first, pos="NNP", ne="PERSON")
    j = b.tok(last, pos="NNP", ne="PERSON")
    b.arc(j, i, "compound")
    p = b.node("person")
    n = b.node("name")
    b.edge(p, "name", n)
    b.const(n, "op1", f'"{first}"')
    b.const(n, "op2", f'"{last}"')
    b.align(i, j + 1, p, n)
    return j, p


def _subject(b: _Builder, rng: random.Random, capital=True):
    r = rng.random()
    if r < 0.3:
        form, concept = rng.choice(PRONOUNS)
        t = b.tok(form, concept, pos="PRP")
        v = b.node(concept)
        b.align(t, t + 1, v)
        return t, v
    if r < 0.5:
        return _person(b, rng)
    head, v = _noun_phrase(b, rng, SUBJECT_NOUNS, det="The")
    return head, v


def _period(b: _Builder, head: int):
    t = b.tok(".", pos=".")
    b.arc(head, t, "punct")
    b.align(t, t + 1)


# -- templates --------------------------------------------------------------------------

def transitive(b: _Builder, rng: random.Random):
    """Subj saw (the big) dog (about the forest)."""
    past, _, frame = rng.choice(TRANSITIVE)
    verb_var = b.node(frame)
    s_head, s_var = _subject(b, rng)
    v = b.tok(past, _lemma(frame), pos="VBD")
    b.align(v, v + 1, verb_var)
    b.arc(None, v, "root")
    b.arc(v, s_head, "nsubj")
    b.edge(verb_var, "ARG0", s_var)
    o_head, o_var = _noun_phrase(b, rng, OBJECT_NOUNS)
    b.arc(v, o_head, "dobj")
    b.edge(verb_var, "ARG1", o_var)
    if len(b.tokens) <= 6 and rng.random() < 0.5:
        p = b.tok("about", pos="IN")
        d = b.tok("the", pos="DT")
        topic = rng.choice(TOPICS)
        n = b.tok(topic, pos="NN")
        b.arc(n, p, "case")
        b.arc(n, d, "det")
        b.arc(o_head, n, "nmod")
        b.align(p, p + 1)
        b.align(d, d + 1)
        tv = b.node(topic)
        b.align(n, n + 1, tv)
        b.edge(o_var, "topic", tv)
    _period(b, v)


def control(b: _Builder, rng: random.Random):
    """Subj wants to see the cat."""
    want = b.node("want-01")
    s_head, s_var = _subject(b, rng)
    w = b.tok(rng.choice(["wants", "wanted"]), "want", pos="VBZ")
    b.align(w, w + 1, want)
    b.arc(None, w, "root")
    b.arc(w, s_head, "nsubj")
    b.edge(want, "ARG0", s_var)
    to = b.tok("to", pos="TO")
    b.align(to, to + 1)
    _, base, frame = rng.choice(TRANSITIVE)
    vv = b.node(frame)
    v = b.tok(base, _lemma(frame), pos="VB")
    b.align(v, v + 1, vv)
    b.arc(v, to, "mark")
    b.arc(w, v, "xcomp")
    b.edge(want, "ARG1", vv)
    b.edge(vv, "ARG0", s_var)
    o_head, o_var = _noun_phrase(b, rng, OBJECT_NOUNS, allow_adj=False)
    b.arc(v, o_head, "dobj")
    b.edge(vv, "ARG1", o_var)
    _period(b, w)


def dated(b: _Builder, rng: random.Random):
    """Subj arrived on January 5 , 2012."""
    arrive = b.node("arrive-01")
    s_head, s_var = _subject(b, rng)
    v = b.tok("arrived", "arrive", pos="VBD")
    b.align(v, v + 1, arrive)
    b.arc(None, v, "root")
    b.arc(v, s_head, "nsubj")
    b.edge(arrive, "ARG1", s_var)
    on = b.tok("on", pos="IN")
    b.align(on, on + 1)
    month = rng.randrange(12)
    day = rng.randint(1, 28)
    year = rng.randint(1990, 2015)
    m = b.tok(MONTHS[month], pos="NNP")
    dd = b.tok(str(day), pos="CD")
    comma = b.tok(",", pos=",")
    yy = b.tok(str(year), pos="CD")
    b.arc(m, on, "case")
    b.arc(m, dd, "nummod")
    b.arc(m, comma, "punct")
    b.arc(m, yy, "nummod")
    b.arc(v, m, "nmod:tmod")
    date = b.node("date-entity")
    b.const(date, "month", str(month + 1))
    b.const(date, "day", str(day))
    b.const(date, "year", str(year))
    b.align(m, yy + 1, date)
    b.edge(arrive, "time", date)
    _period(b, v)


def titled(b: _Builder, rng: random.Random):
    """Subj read a book called Stories from Nature."""
    past, _, frame = rng.choice([t for t in TRANSITIVE if t[2] in ("read-01", "buy-01", "write-01", "find-01")])
    verb_var = b.node(frame)
    s_head, s_var = _subject(b, rng)
    v = b.tok(past, _lemma(frame), pos="VBD")
    b.align(v, v + 1, verb_var)
    b.arc(None, v, "root")
    b.arc(v, s_head, "nsubj")
    b.edge(verb_var, "ARG0", s_var)
    d = b.tok("a", pos="DT")
    b.align(d, d + 1)
    noun = rng.choice(["book", "song", "letter"])
    n = b.tok(noun, pos="NN")
    b.arc(n, d, "det")
    b.arc(v, n, "dobj")
    nv = b.node(noun)
    b.align(n, n + 1, nv)
    b.edge(verb_var, "ARG1", nv)
    called = b.tok("called", "call", pos="VBN")
    b.align(called, called + 1)
    b.arc(n, called, "acl")
    title = rng.choice(TITLES)
    ids = [b.tok(w, pos="NNP", ne="MISC") for w in title]
    for k in ids[:-1]:
        b.arc(ids[-1], k, "compound")
    b.arc(called, ids[-1], "xcomp")
    name = b.node("name")
    for k, w in enumerate(title, 1):
        b.const(name, f"op{k}", f'"{w}"')
    b.align(ids[0], ids[-1] + 1, name)
    b.edge(nv, "name", name)
    _period(b, v)


def visited(b: _Builder, rng: random.Random):
    """Subj visited Paris."""
    visit = b.node("visit-01")
    s_head, s_var = _subject(b, rng)
    v = b.tok("visited", "visit", pos="VBD")
    b.align(v, v + 1, visit)
    b.arc(None, v, "root")
    b.arc(v, s_head, "nsubj")
    b.edge(visit, "ARG0", s_var)
    city = rng.choice(CITIES)
    ids = [b.tok(w, pos="NNP", ne="LOCATION") for w in city]
    for k in ids[:-1]:
        b.arc(ids[-1], k, "compound")
    b.arc(v, ids[-1], "dobj")
    c = b.node("city")
    nm = b.node("name")
    b.edge(c, "name", nm)
    for k, w in enumerate(city, 1):
        b.const(nm, f"op{k}", f'"{w}"')
    b.align(ids[0], ids[-1] + 1, c, nm)
    b.edge(visit, "ARG1", c)
    _period(b, v)


TEMPLATES = [transitive, transitive, transitive, control, dated, titled, visited]


def _lemma(frame: str) -> str:
    return frame.rsplit("-", 1)[0]


def generate(n: int, seed: int = 0, prefix: str = "syn") -> List[CorpusExample]:
    rng = random.Random(seed)
    out = []
    for k in range(n):
        b = _Builder()
        rng.choice(TEMPLATES)(b, rng)
        out.append(b.example(f"{prefix}.{k + 1}"))
    return out


FIXTURE_WORDS = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
                 "india", "juliet", "kilo", "lima", "mike", "november", "oscar", "papa"]
FIXTURE_RELATIONS = ["ARG0", "ARG1", "ARG2", "mod", "location", "time"]


def random_fixture(rng: random.Random, n_tokens: int, eid: str = "fixture",
                   reentrancy: float = 0.3) -> CorpusExample:
    """Random dependency tree whose every token carries one concept.

    Gold edges copy the dependency arcs head to dependent; with probability
    ``reentrancy`` a grandparent also gets an edge to its grandchild.
    """
    if n_tokens < 1:
        raise ValueError("a fixture needs at least one token")
    b = _Builder()
    order = list(range(n_tokens))
    rng.shuffle(order)
    for k in range(n_tokens):
        word = rng.choice(FIXTURE_WORDS)
        b.tok(word, pos=rng.choice(["NN", "VB", "JJ"]))
    parent = {}
    for pos, tok in enumerate(order):
        if pos == 0:
            b.arc(None, tok, "root")
        else:
            parent[tok] = order[rng.randrange(pos)]
            b.arc(parent[tok], tok, rng.choice(["nsubj", "dobj", "amod", "nmod"]))
    var = {}
    for tok in order:
        var[tok] = b.node(b.tokens[tok].lemma)
        b.align(tok, tok + 1, var[tok])
    for tok in order[1:]:
        b.edge(var[parent[tok]], rng.choice(FIXTURE_RELATIONS), var[tok])
        grand = parent.get(parent[tok])
        if grand is not None and rng.random() < reentrancy:
            b.edge(var[grand], rng.choice(FIXTURE_RELATIONS), var[tok])
    return b.example(eid)


def random_fixtures(count: int, seed: int = 0, min_tokens: int = 1,
                    max_tokens: int = 10) -> List[CorpusExample]:
    rng = random.Random(seed)
    return [random_fixture(rng, rng.randint(min_tokens, max_tokens), f"fixture.{k + 1}")
            for k in range(count)]


def reading_example() -> CorpusExample:
    """"I read a book , called Stories from Nature , about the forest ." with
    the name's operands as variable nodes (8 nodes, 7 edges)."""
    b = _Builder()
    read = b.node("read-01")
    i = b.tok("I", "i", pos="PRP")
    r = b.tok("read", "read", pos="VBD")
    a = b.tok("a", pos="DT")
    book = b.tok("book", pos="NN")
    c1 = b.tok(",", pos=",")
    called = b.tok("called", "call", pos="VBN")
    s = b.tok("Stories", pos="NNP", ne="MISC")
    f = b.tok("from", pos="NNP", ne="MISC")
    nat = b.tok("Nature", pos="NNP", ne="MISC")
    c2 = b.tok(",", pos=",")
    about = b.tok("about", pos="IN")
    the = b.tok("the", pos="DT")
    forest = b.tok("forest", pos="NN")
    stop = b.tok(".", pos=".")
    for h, d, lab in [(None, r, "root"), (r, i, "nsubj"), (r, book, "dobj"), (book, a, "det"),
                      (book, c1, "punct"), (book, called, "acl"), (called, nat, "xcomp"),
                      (nat, s, "compound"), (nat, f, "compound"), (book, c2, "punct"),
                      (book, forest, "nmod"), (forest, about, "case"), (forest, the, "det"),
                      (r, stop, "punct")]:
        b.arc(h, d, lab)
    iv = b.node("i")
    bv = b.node("book")
    nv = b.node("name")
    sv = b.node("Stories")
    fv = b.node("from")
    nav = b.node("Nature")
    fov = b.node("forest")
    b.edge(read, "ARG0", iv)
    b.edge(read, "ARG1", bv)
    b.edge(bv, "name", nv)
    b.edge(bv, "topic", fov)
    b.edge(nv, "op1", sv)
    b.edge(nv, "op2", fv)
    b.edge(nv, "op3", nav)
    b.align(i, i + 1, iv)
    b.align(r, r + 1, read)
    b.align(book, book + 1, bv)
    b.align(s, nat + 1, nv, sv, fv, nav)
    b.align(forest, forest + 1, fov)
    for t in (a, c1, called, c2, about, the, stop):
        b.align(t, t + 1)
    return b.example("fig1")


def write_corpus_files(examples: Sequence[CorpusExample], outdir, stem: str):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_blocks(outdir / f"{stem}.amr", (format_corpus_entry(ex) for ex in examples))
    write_blocks(outdir / f"{stem}.ann", (format_annotation(ex) for ex in examples))
    write_blocks(outdir / f"{stem}.align", (format_alignment(ex) for ex in examples))


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    outdir = argv[0] if argv else "."
    write_corpus_files(generate(30, seed=1, prefix="train"), outdir, "train")
    write_corpus_files(generate(10, seed=2, prefix="heldout"), outdir, "heldout")
    write_corpus_files([reading_example()], outdir, "reading")


if __name__ == "__main__":
    main()
