"""Hashed sparse features for concept, relation and root decisions.

Every raw feature is a ``(template, value)`` pair.  The template selects a
namespace byte that is prepended to ``value`` before CRC32 hashing, so equal
values under different templates land in different buckets.  Label
conjunctions get their own templates (``c&w0``, ``r&dir``...).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import AnnotatedSentence, Span

DEFAULT_HASH_BITS = 22
BOS, EOS = "<s>", "</s>"

CONCEPT_TEMPLATES = ("w-2", "w-1", "w0", "w0span", "w+1", "w+2",
                     "p-2", "p-1", "p0", "p0span", "p+1", "p+2",
                     "ne", "stop", "dep", "bc", "c-2", "c-1")
RELATION_TEMPLATES = ("ci", "cj", "ci&cj", "wi", "wj", "wi&wj",
                      "pi", "pj", "pi&pj", "depij", "dir")
ROOT_TEMPLATES = ("c", "frame", "sense", "w", "wspan", "p", "deproot")

_NAMESPACES: Dict[str, int] = {}
for _i, _t in enumerate(("c", "frame", "sense", "r") + CONCEPT_TEMPLATES + RELATION_TEMPLATES):
    _NAMESPACES.setdefault(_t, len(_NAMESPACES) + 1)
for _t in CONCEPT_TEMPLATES:
    _NAMESPACES["c&" + _t] = len(_NAMESPACES) + 1
for _t in RELATION_TEMPLATES:
    _NAMESPACES["r&" + _t] = len(_NAMESPACES) + 1
for _t in ROOT_TEMPLATES:
    _NAMESPACES["root:" + _t] = len(_NAMESPACES) + 1
assert len(_NAMESPACES) < 256

RawFeature = Tuple[str, str]


@lru_cache(maxsize=1 << 20)
def _hash(template: str, value: str) -> int:
    return zlib.crc32(bytes((_NAMESPACES[template],)) + value.encode("utf-8"))


@dataclass(frozen=True, eq=False)
class SparseVector:
    indices: np.ndarray   # uint32, strictly increasing
    values: np.ndarray    # float32
    bits: int

    @classmethod
    def from_raw(cls, raw: Sequence[RawFeature], bits: int = DEFAULT_HASH_BITS) -> "SparseVector":
        mask = (1 << bits) - 1
        acc: Dict[int, float] = {}
        for template, value in raw:
            k = _hash(template, value) & mask
            acc[k] = acc.get(k, 0.0) + 1.0
        keys = sorted(acc)
        return cls(np.array(keys, dtype=np.uint32),
                   np.array([acc[k] for k in keys], dtype=np.float32), bits)

    def __len__(self):
        return len(self.indices)

    def __eq__(self, other):
        return (isinstance(other, SparseVector) and self.bits == other.bits
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def pairs(self) -> List[Tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))


def _span_pos(sentence, span):
    return "_".join(t.pos for t in sentence.span_tokens(span))


def _frame_features(label) -> List[RawFeature]:
    if getattr(label, "is_frame", False):
        return [("frame", label.frame), ("sense", label.sense)]
    return []


@dataclass(frozen=True)
class ConceptState:
    """Concept decision for span ``i`` after ``previous`` predictions."""

    sentence: AnnotatedSentence
    i: int
    previous: Tuple = ()

    def __post_init__(self):
        if len(self.previous) != self.i:
            raise ValueError(f"state for span {self.i} needs {self.i} previous predictions, "
                             f"got {len(self.previous)}")


class Featurizer:
    def __init__(self, stopwords=frozenset(), bits: int = DEFAULT_HASH_BITS):
        self.stopwords = frozenset(stopwords)
        self.bits = bits

    # -- concepts -----------------------------------------------------------

    def concept_context(self, state: ConceptState) -> List[RawFeature]:
        """Label-independent concept features (everything except b_c)."""
        sent, i = state.sentence, state.i
        spans = sent.spans
        span = spans[i]
        feats: List[RawFeature] = []

        def ctx(k):
            j = i + k
            if j < 0:
                return BOS, BOS
            if j >= len(spans):
                return EOS, EOS
            return sent.span_surface(spans[j]), _span_pos(sent, spans[j])

        toks = sent.span_tokens(span)
        for k, name in ((-2, "-2"), (-1, "-1"), (1, "+1"), (2, "+2")):
            w, p = ctx(k)
            feats.append(("w" + name, w))
            feats.append(("p" + name, p))
        for t in toks:
            feats.append(("w0", t.form.casefold()))
            feats.append(("p0", t.pos))
            feats.append(("ne", t.ne))
        feats.append(("w0span", sent.span_surface(span)))
        feats.append(("p0span", _span_pos(sent, span)))
        is_stop = all(t.form.casefold() in self.stopwords for t in toks)
        feats.append(("stop", "true" if is_stop else "false"))
        members = set(span.indices)
        for h, d, lab in sent.dep_edges:
            if h in members:
                feats.append(("dep", lab))
        prev = state.previous
        feats.append(("c-2", prev[i - 2].surface if i >= 2 else BOS))
        feats.append(("c-1", prev[i - 1].surface if i >= 1 else BOS))
        return feats

    def concept_raw(self, state: ConceptState, action, best=None,
                    context: Optional[List[RawFeature]] = None) -> List[RawFeature]:
        """All named features for one concept action, before hashing."""
        base = list(self.concept_context(state) if context is None else context)
        base.append(("bc", "true" if best is not None and action == best else "false"))
        label = action.surface
        raw = list(base)
        raw.append(("c", label))
        raw.extend(("c&" + t, f"{v}|{label}") for t, v in base)
        raw.extend(_frame_features(action))
        return raw

    def concept_features(self, state: ConceptState, action, best=None) -> SparseVector:
        return SparseVector.from_raw(self.concept_raw(state, action, best), self.bits)

    def concept_vectors(self, state: ConceptState, actions, best=None) -> List[SparseVector]:
        context = self.concept_context(state)
        return [SparseVector.from_raw(self.concept_raw(state, a, best, context), self.bits)
                for a in actions]

    # -- relations -------------------------------------------------------------

    def relation_context(self, sentence: AnnotatedSentence, c_i, span_i: int,
                         c_j, span_j: int) -> List[RawFeature]:
        """Label-independent features for an edge from span_i's concept to span_j's."""
        si, sj = sentence.spans[span_i], sentence.spans[span_j]
        ci, cj = c_i.surface, c_j.surface
        wi, wj = sentence.span_surface(si), sentence.span_surface(sj)
        pi, pj = _span_pos(sentence, si), _span_pos(sentence, sj)
        feats: List[RawFeature] = [("ci", ci), ("cj", cj), ("ci&cj", f"{ci}|{cj}")]
        feats.extend(("wi", t.form.casefold()) for t in sentence.span_tokens(si))
        feats.extend(("wj", t.form.casefold()) for t in sentence.span_tokens(sj))
        feats.append(("wi&wj", f"{wi}|{wj}"))
        feats.extend(("pi", t.pos) for t in sentence.span_tokens(si))
        feats.extend(("pj", t.pos) for t in sentence.span_tokens(sj))
        feats.append(("pi&pj", f"{pi}|{pj}"))
        mi, mj = set(si.indices), set(sj.indices)
        for h, d, lab in sentence.dep_edges:
            if h in mi and d in mj:
                feats.append(("depij", ">" + lab))
            elif h in mj and d in mi:
                feats.append(("depij", "<" + lab))
        feats.append(("dir", "true" if span_i < span_j else "false"))
        return feats

    def relation_raw(self, sentence, c_i, span_i, c_j, span_j, action,
                     context: Optional[List[RawFeature]] = None) -> List[RawFeature]:
        base = self.relation_context(sentence, c_i, span_i, c_j, span_j) if context is None else context
        raw = list(base)
        raw.append(("r", action))
        raw.extend(("r&" + t, f"{v}|{action}") for t, v in base)
        return raw

    def relation_features(self, sentence, c_i, span_i, c_j, span_j, action) -> SparseVector:
        if span_i == span_j:
            raise ValueError("relation features need two distinct spans")
        return SparseVector.from_raw(self.relation_raw(sentence, c_i, span_i, c_j, span_j, action), self.bits)

    def relation_vectors(self, sentence, c_i, span_i, c_j, span_j, actions) -> List[SparseVector]:
        context = self.relation_context(sentence, c_i, span_i, c_j, span_j)
        return [SparseVector.from_raw(self.relation_raw(sentence, c_i, span_i, c_j, span_j, a, context), self.bits)
                for a in actions]

    # -- root -------------------------------------------------------------------

    def root_raw(self, sentence: AnnotatedSentence, concept, span_index: int) -> List[RawFeature]:
        span: Span = sentence.spans[span_index]
        label = concept.root_label if hasattr(concept, "root_label") else concept
        raw: List[RawFeature] = [("root:c", concept.surface)]
        raw.extend(("root:" + t, v) for t, v in _frame_features(label))
        for t in sentence.span_tokens(span):
            raw.append(("root:w", t.form.casefold()))
            raw.append(("root:p", t.pos))
        raw.append(("root:wspan", sentence.span_surface(span)))
        is_root = any(k in sentence.dep_roots for k in span.indices)
        raw.append(("root:deproot", "true" if is_root else "false"))
        return raw

    def root_features(self, sentence, concept, span_index: int) -> SparseVector:
        return SparseVector.from_raw(self.root_raw(sentence, concept, span_index), self.bits)
