import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searn_amr.corpus import load_stopwords, span_actions
from searn_amr.features import BOS, ConceptState, Featurizer, SparseVector
from searn_amr.graph import NULL, ConceptLabel
from searn_amr.synthetic import reading_example, generate

L = ConceptLabel.parse
FEATS = Featurizer(load_stopwords(), bits=20)


@pytest.fixture(scope="module")
def fig():
    return reading_example()


def state(ex, i):
    prev = tuple(a for _, a in span_actions(ex)[:i])
    return ConceptState(ex.sentence, i, prev)


class TestSparseVector:
    def test_duplicates_sum_and_sorted(self):
        v = SparseVector.from_raw([("w0", "a"), ("w0", "a"), ("w0", "b")], bits=16)
        assert len(v) == 2
        assert np.all(np.diff(v.indices.astype(np.int64)) > 0)
        assert sorted(v.values.tolist()) == [1.0, 2.0]

    def test_namespaces_separate_equal_values(self):
        a = SparseVector.from_raw([("w0", "x")], bits=30)
        b = SparseVector.from_raw([("w-1", "x")], bits=30)
        assert a.indices[0] != b.indices[0]

    def test_index_is_masked_crc32(self):
        v = SparseVector.from_raw([("c", "book")], bits=12)
        full = SparseVector.from_raw([("c", "book")], bits=32)
        assert int(v.indices[0]) == int(full.indices[0]) & 0xFFF
        assert int(full.indices[0]) != zlib.crc32(b"book")   # namespace byte changes the hash

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["w0", "c", "r", "dir"]), st.text(max_size=6)), max_size=20),
           st.integers(1, 24))
    def test_hash_range(self, raw, bits):
        v = SparseVector.from_raw(raw, bits=bits)
        assert np.all(v.indices < (1 << bits))
        assert float(v.values.sum()) == len(raw)


class TestConceptFeatures:
    def test_frame_and_conjunctions(self, fig):
        raw = FEATS.concept_raw(state(fig, 1), L("read-01"))
        assert ("frame", "read") in raw and ("sense", "01") in raw
        assert ("c&w0", "read|read-01") in raw
        assert ("c", "read-01") in raw

    def test_sentinels_at_sentence_start(self, fig):
        raw = FEATS.concept_raw(state(fig, 0), L("i"))
        assert ("c-2", BOS) in raw and ("c-1", BOS) in raw
        assert ("w-1", BOS) in raw and ("p-2", BOS) in raw

    def test_previous_predictions(self, fig):
        raw = FEATS.concept_raw(state(fig, 3), L("book"))
        assert ("c-2", "read-01") in raw and ("c-1", "NULL") in raw

    def test_stopword_null(self, fig):
        raw = FEATS.concept_raw(state(fig, 2), NULL)
        assert ("stop", "true") in raw and ("c&stop", "true|NULL") in raw

    def test_best_concept_indicator(self, fig):
        assert ("bc", "true") in FEATS.concept_raw(state(fig, 3), L("book"), best=L("book"))
        assert ("bc", "false") in FEATS.concept_raw(state(fig, 3), L("thing"), best=L("book"))

    def test_span_level_context(self, fig):
        # spans, not tokens: two spans right of "called" is the token after the name
        raw = FEATS.concept_raw(state(fig, 5), NULL)
        assert ("w+1", "stories from nature") in raw and ("w+2", ",") in raw

    def test_multi_token_span_words(self, fig):
        raw = FEATS.concept_raw(state(fig, 6), L("name"))
        words = [v for t, v in raw if t == "w0"]
        assert words == ["stories", "from", "nature"]
        assert ("w0span", "stories from nature") in raw
        assert ("dep", "compound") in raw

    def test_state_checks_history(self, fig):
        with pytest.raises(ValueError):
            ConceptState(fig.sentence, 2, (NULL,))

    def test_vectors_match_single_calls(self, fig):
        s = state(fig, 1)
        acts = [L("read-01"), L("read"), NULL]
        assert FEATS.concept_vectors(s, acts, L("read-01")) == [
            FEATS.concept_features(s, a, L("read-01")) for a in acts]

    def test_deterministic(self, fig):
        a = FEATS.concept_features(state(fig, 1), L("read-01"))
        b = Featurizer(load_stopwords(), bits=20).concept_features(state(fig, 1), L("read-01"))
        assert a == b and a.pairs() == b.pairs()


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_conjunction_count_equals_base_count(seed, data):
    ex = generate(1, seed=seed)[0]
    acts = [a for _, a in span_actions(ex)]
    i = data.draw(st.integers(0, len(acts) - 1))
    action = data.draw(st.sampled_from([acts[i], NULL, L("see-01"), L("zzz")]))
    raw = FEATS.concept_raw(ConceptState(ex.sentence, i, tuple(acts[:i])), action, best=acts[i])
    label_templates = {"c", "frame", "sense"}
    conj = [f for f in raw if f[0].startswith("c&")]
    base = [f for f in raw if not f[0].startswith("c&") and f[0] not in label_templates]
    assert len(conj) == len(base)


class TestRelationFeatures:
    def test_direction_and_conjunction(self, fig):
        raw = FEATS.relation_raw(fig.sentence, L("read-01"), 1, L("i"), 0, "ARG0")
        assert ("dir", "false") in raw
        assert ("r&ci&cj", "read-01|i|ARG0") in raw
        assert ("depij", ">nsubj") in raw

    def test_no_dependency_edge(self, fig):
        raw = FEATS.relation_raw(fig.sentence, L("i"), 0, L("book"), 3, "NO-EDGE")
        assert not [f for f in raw if f[0] == "depij"]
        assert ("dir", "true") in raw and ("r", "NO-EDGE") in raw
        assert ("r&wi&wj", "i|book|NO-EDGE") in raw

    def test_conjunction_count(self, fig):
        raw = FEATS.relation_raw(fig.sentence, L("book"), 3, L("name"), 6, "name")
        conj = [f for f in raw if f[0].startswith("r&")]
        base = [f for f in raw if not f[0].startswith("r&") and f[0] != "r"]
        assert len(conj) == len(base)

    def test_same_span_rejected(self, fig):
        with pytest.raises(ValueError):
            FEATS.relation_features(fig.sentence, L("i"), 0, L("i"), 0, "ARG0")


class TestRootFeatures:
    def test_dependency_root(self, fig):
        raw = FEATS.root_raw(fig.sentence, L("read-01"), 1)
        assert ("root:deproot", "true") in raw
        assert ("root:frame", "read") in raw and ("root:sense", "01") in raw

    def test_not_root(self, fig):
        assert ("root:deproot", "false") in FEATS.root_raw(fig.sentence, L("book"), 3)

    def test_call_frame(self, fig):
        raw = FEATS.root_raw(fig.sentence, L("call-01"), 5)
        assert ("root:frame", "call") in raw and ("root:sense", "01") in raw
