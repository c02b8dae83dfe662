"""Smatch and concept-prediction scores.

A graph becomes three kinds of triples: ``instance(v, concept)``,
``rel(v, w)`` and attributes ``rel(v, value)`` (constants plus ``TOP(root)``).
Smatch looks for the one-to-one variable mapping between two graphs that
matches the most triples.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .corpus import CorpusExample, Span, pair_action
from .graph import AmrGraph


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    matched: int
    predicted: int
    gold: int

    @classmethod
    def from_counts(cls, matched: int, predicted: int, gold: int) -> "EvalReport":
        p = matched / predicted if predicted else 0.0
        r = matched / gold if gold else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f, matched, predicted, gold)

    def line(self) -> str:
        return f"{self.precision:.4f} {self.recall:.4f} {self.f1:.4f} {self.matched} {self.predicted} {self.gold}"


@dataclass(frozen=True)
class TripleSet:
    variables: Tuple[str, ...]
    instances: Tuple[Tuple[str, str], ...]            # (var, concept)
    relations: Tuple[Tuple[str, str, str], ...]       # (rel, var, var)
    attributes: Tuple[Tuple[str, str, str], ...]      # (rel, var, value)

    @classmethod
    def from_graph(cls, g: AmrGraph) -> "TripleSet":
        inst = tuple((v, lab.surface.casefold()) for v, lab in g.nodes)
        rels = tuple((r.casefold(), s, t) for s, r, t in g.edges)
        attrs = [(r.casefold(), s, val.strip('"')) for s, r, val in g.constants]
        if g.root is not None:
            attrs.append(("TOP", g.root, "top"))
        return cls(tuple(g.variables), inst, rels, tuple(attrs))

    def __len__(self):
        return len(self.instances) + len(self.relations) + len(self.attributes)


class _Problem:
    """Match counting for a fixed pair of triple sets.

    Instance and attribute matches depend on one variable each and are kept
    in a (pred var x gold var) table; relation matches are counted on demand.
    """

    def __init__(self, pred: TripleSet, gold: TripleSet):
        self.pred, self.gold = pred, gold
        self.pv = list(pred.variables)
        self.gv = list(gold.variables)
        pidx = {v: i for i, v in enumerate(self.pv)}
        gidx = {v: i for i, v in enumerate(self.gv)}
        local = np.zeros((len(self.pv), len(self.gv) + 1), dtype=np.int64)
        g_inst = Counter((gidx[v], c) for v, c in gold.instances)
        g_attr = Counter((r, gidx[v], val) for r, v, val in gold.attributes)
        p_inst = Counter((pidx[v], c) for v, c in pred.instances)
        p_attr = Counter((r, pidx[v], val) for r, v, val in pred.attributes)
        for (i, c), n in p_inst.items():
            for j in range(len(self.gv)):
                local[i, j] += min(n, g_inst.get((j, c), 0))
        for (r, i, val), n in p_attr.items():
            for j in range(len(self.gv)):
                local[i, j] += min(n, g_attr.get((r, j, val), 0))
        self.local = local
        self.p_rel = Counter((r, pidx[s], pidx[t]) for r, s, t in pred.relations)
        self.g_rel = Counter((r, gidx[s], gidx[t]) for r, s, t in gold.relations)

    def score(self, mapping: Sequence[int]) -> int:
        """mapping[i] = gold index of pred var i, or -1 when unmapped."""
        total = 0
        for i, j in enumerate(mapping):
            if j >= 0:
                total += int(self.local[i, j])
        mapped = Counter()
        for (r, s, t), n in self.p_rel.items():
            ms, mt = mapping[s], mapping[t]
            if ms >= 0 and mt >= 0:
                mapped[(r, ms, mt)] += n
        for key, n in mapped.items():
            g = self.g_rel.get(key)
            if g:
                total += min(n, g)
        return total


def _report(matched: int, pred: TripleSet, gold: TripleSet) -> EvalReport:
    return EvalReport.from_counts(matched, len(pred), len(gold))


def _hill_climb(prob: _Problem, mapping: List[int]) -> Tuple[int, List[int]]:
    """Best-improvement search over reassignments and swaps."""
    n_gold = len(prob.gv)
    best = prob.score(mapping)
    while True:
        used = set(j for j in mapping if j >= 0)
        free = [j for j in range(n_gold) if j not in used]
        top_gain, top_map = 0, None
        for i in range(len(mapping)):
            for j in free:
                cand = list(mapping)
                cand[i] = j
                gain = prob.score(cand) - best
                if gain > top_gain:
                    top_gain, top_map = gain, cand
            for k in range(i + 1, len(mapping)):
                if mapping[i] == mapping[k]:
                    continue
                cand = list(mapping)
                cand[i], cand[k] = cand[k], cand[i]
                gain = prob.score(cand) - best
                if gain > top_gain:
                    top_gain, top_map = gain, cand
        if top_map is None:
            return best, mapping
        best, mapping = best + top_gain, top_map


def _informed_start(prob: _Problem) -> List[int]:
    """Map each pred var to an unused gold var with the same concept, if any."""
    mapping = [-1] * len(prob.pv)
    used = set()
    for i in range(len(prob.pv)):
        order = np.argsort(-prob.local[i, :len(prob.gv)], kind="stable")
        for j in order:
            if prob.local[i, j] > 0 and j not in used:
                mapping[i] = int(j)
                used.add(int(j))
                break
    return mapping


def _random_start(prob: _Problem, rng: np.random.Generator) -> List[int]:
    n_p, n_g = len(prob.pv), len(prob.gv)
    perm = rng.permutation(max(n_p, n_g)).tolist()
    return [j if j < n_g else -1 for j in perm[:n_p]]


def smatch(pred: AmrGraph, gold: AmrGraph, restarts: int = 4, seed: int = 0) -> EvalReport:
    """Smatch by hill-climbing from one informed and ``restarts`` random starts."""
    tp, tg = TripleSet.from_graph(pred), TripleSet.from_graph(gold)
    if not tp.variables or not tg.variables:
        return _report(0, tp, tg)
    prob = _Problem(tp, tg)
    rng = np.random.default_rng(seed)
    best, _ = _hill_climb(prob, _informed_start(prob))
    for _ in range(restarts):
        if best == min(len(tp), len(tg)):
            break
        score, _ = _hill_climb(prob, _random_start(prob, rng))
        best = max(best, score)
    return _report(best, tp, tg)


EXHAUSTIVE_LIMIT = 8
EXHAUSTIVE_MAPPINGS = 5_000_000


def smatch_exhaustive(pred: AmrGraph, gold: AmrGraph) -> EvalReport:
    """Exact Smatch by trying every injective mapping of the smaller side."""
    tp, tg = TripleSet.from_graph(pred), TripleSet.from_graph(gold)
    n_p, n_g = len(tp.variables), len(tg.variables)
    if min(n_p, n_g) > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive Smatch supports at most {EXHAUSTIVE_LIMIT} variables "
                         f"on the smaller side, got {min(n_p, n_g)}")
    if not n_p or not n_g:
        return _report(0, tp, tg)
    small, large = sorted((n_p, n_g))
    if math.perm(large, small) > EXHAUSTIVE_MAPPINGS:
        raise ValueError(f"exhaustive Smatch would try {math.perm(large, small)} mappings "
                         f"(limit {EXHAUSTIVE_MAPPINGS})")
    prob = _Problem(tp, tg)
    best = 0
    if n_p <= n_g:
        # any partial mapping extends to a full injection without losing matches
        for image in itertools.permutations(range(n_g), n_p):
            best = max(best, prob.score(image))
    else:
        for preimage in itertools.permutations(range(n_p), n_g):
            mapping = [-1] * n_p
            for j, i in enumerate(preimage):
                mapping[i] = j
            best = max(best, prob.score(mapping))
    return _report(best, tp, tg)


def concept_eval(predicted: Sequence[Tuple[Span, object]], gold: CorpusExample) -> EvalReport:
    """Concept P/R/F1 per span against the gold concepts aligned to the same spans.

    ``predicted`` pairs each span of a segmentation with a concept (anything
    with ``surface``/``is_null``, NULL allowed).  The segmentation must cover
    the sentence exactly once.
    """
    spans = [s for s, _ in predicted]
    n = len(gold.sentence)
    covered = sorted(i for s in spans for i in s.indices)
    if covered != list(range(n)):
        raise ValueError(f"{gold.id}: predicted spans do not partition the {n} tokens")
    matched = n_pred = n_gold = 0
    for span, concept in predicted:
        pair = gold.alignment.by_span.get(span)
        gold_c = None if pair is None or pair.is_null else pair_action(gold.gold, pair)
        n_gold += gold_c is not None
        if not concept.is_null:
            n_pred += 1
            if gold_c is not None and gold_c.surface == concept.surface:
                matched += 1
    return EvalReport.from_counts(matched, n_pred, n_gold)


def micro_average(reports: Sequence[EvalReport]) -> EvalReport:
    return EvalReport.from_counts(sum(r.matched for r in reports),
                                  sum(r.predicted for r in reports),
                                  sum(r.gold for r in reports))


def macro_average(reports: Sequence[EvalReport]) -> Tuple[float, float, float]:
    if not reports:
        return 0.0, 0.0, 0.0
    k = len(reports)
    return (sum(r.precision for r in reports) / k, sum(r.recall for r in reports) / k,
            sum(r.f1 for r in reports) / k)
