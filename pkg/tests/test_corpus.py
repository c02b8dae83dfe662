import random
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, fixture_paths
from searn_amr.corpus import (
    Alignment, AlignmentPair, AnnotatedSentence, CorpusExample, LoadError, Span, Token,
    force_align, format_alignment, format_annotation, gold_spans_from_alignment,
    identify_spans, load_corpus, load_date_patterns, load_sentences, load_stopwords,
    pair_action, span_actions, write_blocks,
)
from searn_amr.graph import NULL, ConceptLabel, GraphFragment, parse_penman
from searn_amr.synthetic import reading_example, generate


def sentence(forms, ne=None, edges=None):
    ne = ne or ["O"] * len(forms)
    toks = tuple(Token(f, f.lower(), "NN", t) for f, t in zip(forms, ne))
    if edges is None:
        edges = [(-1, 0, "root")] + [(0, k, "dep") for k in range(1, len(forms))]
    return AnnotatedSentence(toks, tuple(edges))


class TestSpan:
    def test_parse_and_format(self):
        s = Span.parse("3-5")
        assert (s.start, s.end, str(s), list(s.indices), len(s)) == (3, 5, "3-5", [3, 4], 2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Span(2, 2)


class TestLoadCorpus:
    def test_fixture_loads(self, train_examples):
        assert len(train_examples) == 30
        assert [ex.id for ex in train_examples[:2]] == ["train.1", "train.2"]
        for ex in train_examples:
            assert sorted(i for s in ex.sentence.spans for i in s.indices) == list(range(len(ex.sentence)))
            assert ex.alignment.covered_nodes == frozenset(ex.gold.variables)

    def test_single_example(self, tmp_path):
        ex = reading_example()
        write_blocks(tmp_path / "c.amr", [f"# ::id fig1\n# ::snt {ex.text}\n(r / read-01)"])
        write_blocks(tmp_path / "c.ann", [format_annotation(ex)])
        out = load_corpus(tmp_path / "c.amr", tmp_path / "c.ann")
        assert len(out) == 1 and not out[0].alignment

    def test_without_alignments_uses_test_segmentation(self, reading_example):
        amr, ann, _ = fixture_paths("reading")
        ex = load_corpus(amr, ann)[0]
        assert not ex.alignment
        assert Span(6, 9) in ex.sentence.spans
        assert ex.sentence.spans == reading_example.sentence.spans

    def test_token_count_mismatch_names_id(self, tmp_path):
        ex = reading_example()
        lines = format_annotation(ex).split("\n")
        write_blocks(tmp_path / "c.amr", [f"# ::id fig1\n# ::snt {ex.text}\n(r / read-01)"])
        write_blocks(tmp_path / "c.ann", ["\n".join(lines[:-1])])
        with pytest.raises(LoadError, match="fig1") as err:
            load_corpus(tmp_path / "c.amr", tmp_path / "c.ann")
        assert "13 tokens" in str(err.value) and "14" in str(err.value)

    def test_id_mismatch(self, tmp_path):
        amr, ann, _ = fixture_paths("reading")
        text = open(ann).read().replace("fig1", "other")
        (tmp_path / "c.ann").write_text(text)
        with pytest.raises(LoadError, match="fig1"):
            load_corpus(amr, tmp_path / "c.ann")

    def test_malformed_penman(self, tmp_path):
        _, ann, _ = fixture_paths("reading")
        (tmp_path / "c.amr").write_text("# ::id fig1\n# ::snt x\n(r / read-01\n")
        with pytest.raises(LoadError, match="fig1.*PENMAN"):
            load_corpus(tmp_path / "c.amr", ann)

    def test_alignment_to_unknown_variable(self, tmp_path):
        amr, ann, al = fixture_paths("reading")
        (tmp_path / "a").write_text(open(al).read().replace("12-13\tf2", "12-13\tzz"))
        with pytest.raises(LoadError, match="zz"):
            load_corpus(amr, ann, tmp_path / "a")

    def test_dependency_must_be_tree(self, tmp_path):
        amr, ann, _ = fixture_paths("reading")
        (tmp_path / "b.ann").write_text(open(ann).read().replace("\t0\troot", "\t1\troot"))
        with pytest.raises(LoadError, match="roots"):
            load_corpus(amr, tmp_path / "b.ann")

    def test_raw_sentences(self):
        _, ann, _ = fixture_paths("heldout")
        out = load_sentences(ann)
        assert len(out) == 10 and all(ex.gold is None for ex in out)

    def test_alignment_file_round_trip(self, tmp_path, train_examples):
        write_blocks(tmp_path / "a", (format_alignment(ex) for ex in train_examples))
        amr, ann, _ = fixture_paths("train")
        again = load_corpus(amr, ann, tmp_path / "a")
        assert [ex.alignment for ex in again] == [ex.alignment for ex in train_examples]


class TestConceptActions:
    def test_reading_actions(self, reading_example):
        acts = dict(span_actions(reading_example))
        assert acts[Span(1, 2)] == ConceptLabel.parse("read-01")
        assert acts[Span(5, 6)] is NULL
        frag = acts[Span(6, 9)]
        assert isinstance(frag, GraphFragment)
        assert frag.surface == "(x0 / name :op1 (x1 / Stories) :op2 (x2 / from) :op3 (x3 / Nature))"

    def test_single_node_with_constants_is_fragment(self):
        g = parse_penman('(d / date-entity :year 2012)')
        act = pair_action(g, AlignmentPair(Span(0, 1), ("d",)))
        assert isinstance(act, GraphFragment) and act.surface == "(x0 / date-entity :year 2012)"


class TestGoldSpans:
    def _example(self, pairs, n):
        sent = sentence([f"w{k}" for k in range(n)])
        gold = parse_penman("(r / read-01 :ARG0 (i / i) :ARG1 (b / book))")
        return CorpusExample("t", sent, gold, Alignment(tuple(pairs)))

    def test_null_singletons(self):
        ex = self._example([AlignmentPair(Span(0, 1), ("i",)), AlignmentPair(Span(1, 2), ("r",)),
                            AlignmentPair(Span(3, 4), ("b",))], 8)
        spans = gold_spans_from_alignment(ex)
        assert len(spans) == 8 and spans == [Span(k, k + 1) for k in range(8)]

    def test_full_cover_is_identity(self):
        pairs = [AlignmentPair(Span(0, 2), ("i",)), AlignmentPair(Span(2, 3), ("r",))]
        assert gold_spans_from_alignment(self._example(pairs, 3)) == [Span(0, 2), Span(2, 3)]

    def test_overlap_rejected(self):
        ex = self._example([AlignmentPair(Span(0, 2), ("i",)), AlignmentPair(Span(1, 3), ("r",))], 4)
        with pytest.raises(LoadError, match="overlapping"):
            gold_spans_from_alignment(ex)

    def test_node_aligned_twice_rejected(self):
        with pytest.raises(ValueError):
            Alignment((AlignmentPair(Span(0, 1), ("i",)), AlignmentPair(Span(1, 2), ("i",))))


class TestIdentifySpans:
    patterns = load_date_patterns()

    def test_named_entity_run(self, reading_example):
        spans = identify_spans(reading_example.sentence, self.patterns)
        assert Span(6, 9) in spans and len(Span(6, 9)) == 3

    def test_all_singletons(self):
        s = sentence(["the", "boy", "runs"])
        assert identify_spans(s, self.patterns) == [Span(0, 1), Span(1, 2), Span(2, 3)]

    def test_date_window(self):
        s = sentence(["He", "left", "on", "January", "5", ",", "2012", "."])
        assert Span(3, 7) in identify_spans(s, self.patterns)

    def test_bio_tags_split_adjacent_entities(self):
        s = sentence(["John", "Smith", "Mary"], ne=["B-PER", "I-PER", "B-PER"])
        assert identify_spans(s, self.patterns) == [Span(0, 2), Span(2, 3)]

    def test_dates_never_cross_entities(self):
        s = sentence(["January", "5", ",", "2012"], ne=["O", "O", "O", "DATE"])
        spans = identify_spans(s, self.patterns)
        assert Span(3, 4) in spans and Span(0, 2) in spans

    def test_synthetic_dates_match_gold_spans(self):
        for ex in generate(60, seed=5):
            spans = identify_spans(ex.sentence, self.patterns)
            assert spans == list(ex.sentence.spans), ex.text

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["May", "5", ",", "2012", "the", "Paris", "12:30", "pm"]),
                              st.sampled_from(["O", "B-LOC", "I-LOC", "PER"])), min_size=1, max_size=12))
    def test_partition(self, toks):
        s = sentence([f for f, _ in toks], ne=[t for _, t in toks])
        spans = identify_spans(s, self.patterns)
        assert sorted(i for sp in spans for i in sp.indices) == list(range(len(toks)))


def _toy_force_corpus():
    """Concept x unaligned in three sentences; "foo" unaligned beside it twice, "bar" once."""
    rows = [
        (["foo", "see"], "(s / see-01 :ARG1 (x / x))", [("1-2", "s")]),
        (["bar", "foo", "see"], "(s / see-01 :ARG1 (x / x))", [("2-3", "s")]),
        (["baz", "see"], "(s / see-01 :ARG1 (x / x))", [("1-2", "s")]),
        (["see", "it"], "(s / see-01)", [("0-1", "s"), ("1-2", "NULL")]),
    ]
    out = []
    for k, (forms, amr, al) in enumerate(rows):
        pairs = tuple(AlignmentPair(Span.parse(sp), () if v == "NULL" else (v,)) for sp, v in al)
        ex = CorpusExample(f"t{k}", sentence(forms), parse_penman(amr), Alignment(pairs))
        out.append(replace(ex, sentence=ex.sentence.with_spans(gold_spans_from_alignment(ex))))
    return out


def _count_oracle(examples):
    counts = Counter()
    for ex in examples:
        words = [ex.sentence.tokens[i].form for i in range(len(ex.sentence))
                 if i not in ex.alignment.covered_tokens]
        for v in ex.gold.variables:
            if v not in ex.alignment.covered_nodes:
                for w in words:
                    counts[(w, ex.gold.label(v).surface)] += 1
    return counts


class TestForceAlign:
    def test_counting_oracle(self):
        corpus = _toy_force_corpus()
        counts = _count_oracle(corpus)
        assert (counts[("foo", "x")], counts[("bar", "x")], counts[("baz", "x")]) == (2, 1, 1)
        out = force_align(corpus)
        added = [set(b.alignment.pairs) - set(a.alignment.pairs) for a, b in zip(corpus, out)]
        assert added[0] == {AlignmentPair(Span(0, 1), ("x",))}
        assert added[1] == {AlignmentPair(Span(1, 2), ("x",))}
        assert added[2] == {AlignmentPair(Span(0, 1), ("x",))}
        assert out[3] == corpus[3]

    def test_tie_goes_to_leftmost_word(self):
        corpus = _toy_force_corpus()[1:2]
        out = force_align(corpus)
        assert AlignmentPair(Span(0, 1), ("x",)) in out[0].alignment.pairs

    def test_null_aligned_words_are_not_reused(self):
        ex = _toy_force_corpus()[3]
        ex = replace(ex, gold=parse_penman("(s / see-01 :ARG1 (i / it))"))
        assert force_align([ex]) == [ex]

    def test_single_leftover(self):
        ex = _toy_force_corpus()[2]
        assert AlignmentPair(Span(0, 1), ("x",)) in force_align([ex])[0].alignment.pairs

    def test_complete_alignment_unchanged(self, train_examples):
        assert force_align(train_examples) == train_examples

    def test_only_adds_and_is_deterministic(self):
        rng = random.Random(3)
        corpus = []
        for ex in generate(40, seed=9):
            keep = tuple(p for p in ex.alignment.pairs if rng.random() < 0.6)
            al = Alignment(keep)
            part = replace(ex, alignment=al)
            corpus.append(replace(part, sentence=part.sentence.with_spans(gold_spans_from_alignment(part))))
        out1, out2 = force_align(corpus), force_align(corpus)
        assert out1 == out2
        for a, b in zip(corpus, out1):
            assert set(a.alignment.pairs) <= set(b.alignment.pairs)


def test_bundled_resources():
    assert "the" in load_stopwords()
    assert all(p.flags & 2 for p in load_date_patterns())   # re.IGNORECASE


def test_fixture_files_are_generated_output(tmp_path):
    from searn_amr.synthetic import main
    main([str(tmp_path)])
    for name in ("train", "heldout", "reading"):
        for ext in ("amr", "ann", "align"):
            assert (tmp_path / f"{name}.{ext}").read_text() == (FIXTURES / f"{name}.{ext}").read_text()
