"""SEARN for AMR: greedy decoding, the Hamming-loss oracle, and training.

A sentence with n spans is parsed by n concept decisions (left to right),
one root decision over the predicted concepts, and then a relation decision
for each ordered pair of concepts: for every i and every j < i, first the
edge i -> j, then j -> i.  Pairs far apart in the dependency tree are
skipped; pairs joined by a dependency arc must receive an edge.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .binio import FormatError, Reader, Writer
from .candidates import (
    FALLBACK_RELATION, NO_EDGE, ConceptTable, FrameLexicon, RelationTables,
    build_tables, concept_candidates, lemma_concept, load_frames, one_best_concept,
    read_tables, relation_candidates, write_tables,
)
from .classifier import CostSensitiveExample, LinearScorer, predict_csc, train_csc
from .corpus import (
    AnnotatedSentence, CorpusExample, load_date_patterns, load_stopwords, pair_action,
)
from .features import ConceptState, Featurizer
from .graph import NULL, AmrGraph, ConceptLabel, GraphFragment, fresh_variable
from .postprocess import break_cycles, connect, ensure_rooted

log = logging.getLogger(__name__)

ORACLE_CONCEPTS = "oracle-concepts"
ONE_BEST_CONCEPTS = "one-best-concepts"
FULLY_AUTOMATIC = "fully-automatic"
MODES = (ORACLE_CONCEPTS, ONE_BEST_CONCEPTS, FULLY_AUTOMATIC)

MAGIC = b"SEARNAMR"
FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    pass


class ModelError(ValueError):
    pass


# -- configuration -------------------------------------------------------------

@dataclass
class SearnConfig:
    C: int = 10
    iterations: int = 5
    beta: float = 0.5
    seed: int = 0
    hash_bits: int = 22
    dep_cutoff: int = 2
    prune: bool = True
    eta0: float = 0.5
    decay: float = 1e-6
    passes: int = 1
    restarts: int = 4
    stopwords_path: Optional[str] = None
    frames_path: Optional[str] = None
    date_patterns_path: Optional[str] = None

    def __post_init__(self):
        if self.C < 1:
            raise ValueError(f"C must be >= 1, got {self.C}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 1 <= self.hash_bits <= 30:
            raise ValueError("hash_bits must be in [1, 30]")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")

    @classmethod
    def from_file(cls, path=None, **overrides) -> "SearnConfig":
        """Read flat ``key = value`` lines; keyword overrides win over the file."""
        values: Dict[str, object] = {}
        types = {f.name: f.type for f in fields(cls)}
        if path is not None:
            for n, ln in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
                ln = ln.split("#", 1)[0].strip()
                if not ln:
                    continue
                key, sep, value = ln.partition("=")
                key, value = key.strip(), value.strip()
                if not sep or key not in types:
                    raise ValueError(f"{path}:{n}: unknown or malformed setting {ln!r}")
                values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        kwargs = {}
        for key, value in values.items():
            if key not in types:
                raise ValueError(f"unknown setting {key!r}")
            kwargs[key] = _coerce(types[key], value)
        return cls(**kwargs)


def _coerce(type_name, value):
    if not isinstance(value, str):
        return value
    t = str(type_name)
    if "bool" in t:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if "Optional" in t or "None" in t:
        return None if value.lower() in ("", "none") else value
    if "int" in t:
        return int(value)
    if "float" in t:
        return float(value)
    return value


# -- policies --------------------------------------------------------------------

@dataclass
class Scorers:
    concept: LinearScorer
    root: LinearScorer
    relation: LinearScorer

    def __getitem__(self, stage):
        return getattr(self, stage)


class OraclePolicy:
    needs_features = False

    def choose(self, stage, candidates, vectors, oracle_index):
        if oracle_index is None:
            raise ValueError("oracle policy needs gold annotations")
        return oracle_index


class ScorerPolicy:
    needs_features = True

    def __init__(self, scorers: Scorers):
        self.scorers = scorers

    def choose(self, stage, candidates, vectors, oracle_index):
        if len(candidates) == 1:
            return 0
        return predict_csc(self.scorers[stage], vectors)


class MixturePolicy:
    """Stochastic SEARN mixture over [oracle, h_1, ..., h_k].

    Each decision starts at the newest policy and keeps it with probability
    beta, otherwise falls back to the previous one, down to the oracle.
    """

    needs_features = True

    def __init__(self, components: Sequence[Optional[Scorers]], beta: float, rng: np.random.Generator):
        self.policies = [OraclePolicy() if c is None else ScorerPolicy(c) for c in components]
        self.beta = beta
        self.rng = rng

    def choose(self, stage, candidates, vectors, oracle_index):
        k = len(self.policies) - 1
        while k > 0 and self.rng.random() >= self.beta:
            k -= 1
        return self.policies[k].choose(stage, candidates, vectors, oracle_index)


# -- the model -------------------------------------------------------------------

@dataclass
class PolicyModel:
    concepts: ConceptTable
    relations: RelationTables
    lexicon: FrameLexicon
    stopwords: frozenset
    date_patterns: List[str]
    config: SearnConfig
    scorers: Optional[Scorers] = None
    history: List[Tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        self.featurizer = Featurizer(self.stopwords, self.config.hash_bits)

    @classmethod
    def from_examples(cls, examples: Sequence[CorpusExample], config: SearnConfig) -> "PolicyModel":
        """Candidate tables and resources only; no learned scorers yet."""
        concepts, relations = build_tables(examples)
        stopwords = load_stopwords(config.stopwords_path)
        lexicon = load_frames(config.frames_path)
        patterns = [p.pattern for p in load_date_patterns(config.date_patterns_path)]
        return cls(concepts, relations, lexicon, stopwords, patterns, config)

    def fresh_scorers(self) -> Scorers:
        c = self.config
        return Scorers(*(LinearScorer(c.hash_bits, c.eta0, c.decay) for _ in range(3)))

    def policy(self):
        if self.scorers is None:
            raise ModelError("model has no trained scorers")
        return ScorerPolicy(self.scorers)

    def compiled_date_patterns(self):
        import re
        return [re.compile(p, re.IGNORECASE) for p in self.date_patterns]


# -- decoding --------------------------------------------------------------------

@dataclass
class Decision:
    stage: Tuple                    # ("concept", i) | ("root",) | ("relation", source, target)
    action: object
    candidates: List
    vectors: Optional[List] = None
    oracle: object = None

    def __post_init__(self):
        if self.action not in self.candidates:
            raise ValueError(f"chosen action {self.action!r} not among candidates")


@dataclass
class DecodeResult:
    graph: AmrGraph
    decisions: List[Decision]
    concepts: List
    root_span: Optional[int]
    node_of_span: Dict[int, str]
    forced: Set[Tuple[int, int]]
    empty: bool = False

    def __iter__(self):
        return iter((self.graph, self.decisions))

    @property
    def forced_edges(self) -> Set[Tuple[str, str]]:
        return {(self.node_of_span[a], self.node_of_span[b]) for a, b in self.forced}


class Oracle:
    """Loss-minimising actions under Hamming loss, given a gold example."""

    def __init__(self, gold: CorpusExample, sentence: AnnotatedSentence):
        if gold.gold is None or not gold.alignment:
            raise ValueError(f"{gold.id}: oracle needs a gold graph and alignment")
        self.graph = gold.gold
        self.actions = []
        self.nodes: Dict[int, str] = {}
        for i, span in enumerate(sentence.spans):
            pair = gold.alignment.by_span.get(span)
            if pair is None or pair.is_null:
                self.actions.append(NULL)
            else:
                self.actions.append(pair_action(self.graph, pair))
                self.nodes[i] = pair.target
        self._dist = None

    def concept(self, i: int, candidates=None):
        action = self.actions[i]
        if candidates is not None and action not in candidates:
            return NULL
        return action

    def gold_node(self, i: int, concepts) -> Optional[str]:
        """The gold node behind span i, if its predicted concept is the gold one."""
        if i in self.nodes and concepts[i] == self.actions[i]:
            return self.nodes[i]
        return None

    def root(self, concepts) -> int:
        live = [i for i, c in enumerate(concepts) if not c.is_null]
        matched = [i for i in live if self.gold_node(i, concepts) is not None]
        for i in matched:
            if self.nodes[i] == self.graph.root:
                return i
        if not matched:
            return live[0]
        if self._dist is None:
            self._dist = _undirected_distances(self.graph, self.graph.root)
        far = float("inf")
        return min(matched, key=lambda i: (self._dist.get(self.nodes[i], far), i))

    def relation(self, a: int, b: int, concepts, candidates) -> str:
        na, nb = self.gold_node(a, concepts), self.gold_node(b, concepts)
        if na is not None and nb is not None:
            for s, r, t in self.graph.edges:
                if s == na and t == nb and r in candidates:
                    return r
        return NO_EDGE if NO_EDGE in candidates else candidates[0]


def _undirected_distances(g: AmrGraph, start: str) -> Dict[str, int]:
    from collections import deque
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in g.undirected[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def prune_pairs(sentence: AnnotatedSentence, concepts=None, cutoff: int = 2) -> Set[frozenset]:
    """Unordered span pairs whose closest tokens are more than ``cutoff`` arcs apart."""
    n = len(sentence.spans)
    live = [i for i in range(n) if concepts is None or not concepts[i].is_null]
    dist = sentence.dep_distances
    pruned = set()
    for x, i in enumerate(live):
        for j in live[:x]:
            near = min((dist[a].get(b, float("inf"))
                        for a in sentence.spans[i].indices for b in sentence.spans[j].indices))
            if near > cutoff:
                pruned.add(frozenset((i, j)))
    return pruned


def forced_pairs(sentence: AnnotatedSentence, concepts=None) -> Set[Tuple[int, int]]:
    """Ordered (i, j): a token of span i heads a token of span j."""
    span_of = {}
    for k, span in enumerate(sentence.spans):
        for t in span.indices:
            span_of[t] = k
    out = set()
    for h, d, _ in sentence.dep_edges:
        if h < 0 or h not in span_of or d not in span_of:
            continue
        i, j = span_of[h], span_of[d]
        if i == j:
            continue
        if concepts is not None and (concepts[i].is_null or concepts[j].is_null):
            continue
        out.add((i, j))
    return out


def _instantiate(action, used: set):
    """Nodes, edges and constants for one concept action, with fresh variables."""
    if isinstance(action, GraphFragment):
        frag = action.graph
        rename = {}
        for v, lab in frag.nodes:
            rename[v] = fresh_variable(lab, used)
            used.add(rename[v])
        nodes = [(rename[v], lab) for v, lab in frag.nodes]
        edges = [(rename[s], r, rename[t]) for s, r, t in frag.edges]
        consts = [(rename[s], r, val) for s, r, val in frag.constants]
        return rename[frag.root], nodes, edges, consts
    var = fresh_variable(action, used)
    used.add(var)
    return var, [(var, action)], [], []


def decode(sentence: AnnotatedSentence, model: PolicyModel, mode: str = FULLY_AUTOMATIC,
           gold: Optional[CorpusExample] = None, policy=None, collect=None,
           prune: Optional[bool] = None) -> DecodeResult:
    """Parse one segmented sentence greedily.

    ``policy`` defaults to the model's learned scorers.  With ``gold``, each
    decision also records the oracle action, and if ``collect`` is a dict of
    lists, a cost-sensitive example (cost 0 for the oracle action, 1 for
    every other candidate) is appended per stage.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    oracle = Oracle(gold, sentence) if gold is not None else None
    if mode == ORACLE_CONCEPTS and oracle is None:
        raise ValueError("oracle-concepts mode needs the gold example")
    if policy is None:
        policy = model.policy() if mode != ORACLE_CONCEPTS or model.scorers is not None else OraclePolicy()
    if prune is None:
        prune = model.config.prune
    feats = model.featurizer
    want_vectors = policy.needs_features or collect is not None

    decisions: List[Decision] = []

    def decide(stage, candidates, make_vectors, oracle_action):
        oracle_index = candidates.index(oracle_action) if oracle_action is not None else None
        vectors = None
        if len(candidates) > 1 and want_vectors:
            vectors = make_vectors()
        k = policy.choose(stage[0], candidates, vectors, oracle_index)
        if collect is not None and vectors is not None and oracle_index is not None:
            costs = [0.0 if n == oracle_index else 1.0 for n in range(len(candidates))]
            collect[stage[0]].append(CostSensitiveExample(list(zip(vectors, costs))))
        decisions.append(Decision(stage, candidates[k], candidates, vectors, oracle_action))
        return candidates[k]

    # concepts, left to right
    spans = sentence.spans
    concepts: List = []
    for i, span in enumerate(spans):
        if mode == ORACLE_CONCEPTS:
            action = oracle.concept(i)
            decisions.append(Decision(("concept", i), action, [action], None, action))
        elif mode == ONE_BEST_CONCEPTS:
            action = one_best_concept(model.concepts, sentence, span)
            decisions.append(Decision(("concept", i), action, [action], None,
                                      oracle.concept(i) if oracle else None))
        else:
            cands = concept_candidates(model.concepts, model.lexicon, sentence, span)
            gold_action = None
            if oracle is not None:
                gold_action = oracle.concept(i, cands)
                if gold_action not in cands:
                    cands = cands + [gold_action]
            best = model.concepts.most_frequent(sentence.span_surface(span))
            state = ConceptState(sentence, i, tuple(concepts))
            action = decide(("concept", i), cands,
                            lambda: feats.concept_vectors(state, cands, best), gold_action)
        concepts.append(action)

    # nodes
    used: set = set()
    nodes, edges, consts = [], [], []
    node_of_span: Dict[int, str] = {}
    for i, c in enumerate(concepts):
        if c.is_null:
            continue
        var, ns, es, cs = _instantiate(c, used)
        node_of_span[i] = var
        nodes += ns
        edges += es
        consts += cs
    live = [i for i, c in enumerate(concepts) if not c.is_null]
    if not live:
        return DecodeResult(AmrGraph(), decisions, concepts, None, {}, set(), empty=True)

    # root
    oracle_root = oracle.root(concepts) if oracle is not None else None
    root_span = decide(("root",), live,
                       lambda: [feats.root_features(sentence, concepts[i], i) for i in live],
                       oracle_root)

    # relations
    pruned = prune_pairs(sentence, concepts, model.config.dep_cutoff) if prune else set()
    forced = forced_pairs(sentence, concepts)
    for x, i in enumerate(live):
        for j in live[:x]:
            if frozenset((i, j)) in pruned and (i, j) not in forced and (j, i) not in forced:
                continue
            for a, b in ((i, j), (j, i)):
                if b == root_span:
                    cands = [NO_EDGE]
                else:
                    cands = relation_candidates(model.relations, concepts[a], concepts[b])
                    if (a, b) in forced:
                        cands = [r for r in cands if r != NO_EDGE] or [FALLBACK_RELATION]
                oracle_rel = oracle.relation(a, b, concepts, cands) if oracle is not None else None
                rel = decide(("relation", a, b), cands,
                             lambda: feats.relation_vectors(sentence, concepts[a], a, concepts[b], b, cands),
                             oracle_rel)
                if rel != NO_EDGE:
                    edges.append((node_of_span[a], rel, node_of_span[b]))

    graph = AmrGraph(nodes, edges, node_of_span[root_span], consts)
    forced_live = {(a, b) for a, b in forced if b != root_span}
    return DecodeResult(graph, decisions, concepts, root_span, node_of_span, forced_live)


def placeholder_graph(model: PolicyModel, sentence: AnnotatedSentence) -> AmrGraph:
    """Single-node output for sentences where every span decoded to NULL."""
    label = NULL
    if sentence.spans:
        label = one_best_concept(model.concepts, sentence, sentence.spans[0])
        if label.is_null:
            label = lemma_concept(sentence, sentence.spans[0])
    if isinstance(label, GraphFragment):
        label = label.root_label
    if label.is_null:
        label = ConceptLabel("keyword", "thing")
    var = fresh_variable(label, set())
    return AmrGraph([(var, label)], [], var)


def postprocess(result: DecodeResult, model: PolicyModel, sentence: AnnotatedSentence) -> AmrGraph:
    if result.empty:
        return placeholder_graph(model, sentence)
    g = result.graph
    g = connect(g, g.root, model.relations)
    g = break_cycles(g, model.relations, protected=result.forced_edges)
    return ensure_rooted(g, model.relations)


def parse_example(model: PolicyModel, example: CorpusExample, mode: str = FULLY_AUTOMATIC,
                  policy=None) -> Tuple[AmrGraph, DecodeResult]:
    gold = example if mode == ORACLE_CONCEPTS or isinstance(policy, OraclePolicy) else None
    result = decode(example.sentence, model, mode, gold=gold, policy=policy)
    return postprocess(result, model, example.sentence), result


# -- training --------------------------------------------------------------------

def mixture_coefficients(iterations: int, beta: float) -> List[float]:
    """Weight of h_1..h_T in the final SEARN mixture, oracle dropped, renormalised."""
    raw = [beta * (1 - beta) ** (iterations - k) for k in range(1, iterations + 1)]
    total = sum(raw)
    return [r / total for r in raw]


def searn_train(examples: Sequence[CorpusExample], config: SearnConfig,
                model: Optional[PolicyModel] = None) -> PolicyModel:
    """Train concept, root and relation policies with SEARN.

    Candidate tables come from every example; only sentences with at most
    ``config.C`` spans are rolled in.
    """
    if model is None:
        model = PolicyModel.from_examples(examples, config)
    usable = [ex for ex in examples if ex.gold is not None and ex.alignment]
    train = [ex for ex in usable if len(ex.sentence.spans) <= config.C]
    if not train:
        raise TrainingError(f"no training sentence has at most C={config.C} spans "
                            f"({len(usable)} aligned examples before filtering)")
    rng = np.random.default_rng(config.seed)
    components: List[Optional[Scorers]] = [None]
    history = []
    for it in range(1, config.iterations + 1):
        policy = MixturePolicy(components, config.beta, rng)
        collected = {"concept": [], "root": [], "relation": []}
        loss = total = 0
        for ex in train:
            result = decode(ex.sentence, model, FULLY_AUTOMATIC, gold=ex, policy=policy,
                            collect=collected, prune=config.prune)
            for d in result.decisions:
                total += 1
                loss += d.action != d.oracle
        scorers = model.fresh_scorers()
        for stage, batch in collected.items():
            for _ in range(config.passes):
                for k in rng.permutation(len(batch)):
                    train_csc(scorers[stage], batch[k])
        components.append(scorers)
        history.append((it, config.beta))
        log.info("iteration %d: %d sentences, %d cost-sensitive examples "
                 "(concept %d, root %d, relation %d), roll-in Hamming loss %d/%d",
                 it, len(train), sum(map(len, collected.values())), len(collected["concept"]),
                 len(collected["root"]), len(collected["relation"]), loss, total)
    learned = components[1:]
    coef = mixture_coefficients(len(learned), config.beta)
    model.scorers = Scorers(*(LinearScorer.average([s[stage] for s in learned], coef)
                              for stage in ("concept", "root", "relation")))
    model.history = history
    return model


# -- model files -------------------------------------------------------------------

def save_model(model: PolicyModel, path):
    if model.scorers is None:
        raise ModelError("cannot save a model without trained scorers")
    c = model.config
    w = Writer()
    w.raw(MAGIC)
    w.u32(FORMAT_VERSION)
    w.u32(c.hash_bits)
    w.f64(c.beta)
    w.u32(c.iterations)
    w.u64(c.seed)
    w.text(json.dumps(asdict(c), sort_keys=True))
    w.text(json.dumps(model.history))
    w.text("\n".join(sorted(model.stopwords)))
    w.text("\n".join(model.date_patterns))
    write_tables(w, model.concepts, model.relations, model.lexicon)
    for stage in ("concept", "root", "relation"):
        w.blob(model.scorers[stage].to_bytes())
    Path(path).write_bytes(w.getvalue())


def load_model(path, hash_bits: Optional[int] = None) -> PolicyModel:
    """Read a model; ``hash_bits`` (if given) must match the stored setting."""
    data = Path(path).read_bytes()
    r = Reader(data)
    try:
        if r.take(len(MAGIC)) != MAGIC:
            raise ModelError(f"{path}: not a model file")
        version = r.u32()
        if version != FORMAT_VERSION:
            raise ModelError(f"{path}: model format version {version}, expected {FORMAT_VERSION}")
        bits = r.u32()
        if hash_bits is not None and bits != hash_bits:
            raise ModelError(f"{path}: model uses {bits} hash bits, expected {hash_bits}")
        beta, iterations, seed = r.f64(), r.u32(), r.u64()
        config = SearnConfig(**json.loads(r.text()))
        if (config.hash_bits, config.beta, config.iterations, config.seed) != (bits, beta, iterations, seed):
            raise ModelError(f"{path}: header disagrees with stored configuration")
        history = [tuple(h) for h in json.loads(r.text())]
        stopwords = frozenset(s for s in r.text().split("\n") if s)
        patterns = [p for p in r.text().split("\n") if p]
        concepts, relations, lexicon = read_tables(r)
        blocks = [LinearScorer.from_bytes(r.blob(), config.eta0, config.decay) for _ in range(3)]
        if not r.at_end():
            raise ModelError(f"{path}: trailing bytes after weight blocks")
    except (FormatError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"{path}: corrupt model file ({exc})") from exc
    if any(b.bits != bits for b in blocks):
        raise ModelError(f"{path}: weight block hash bits disagree with header")
    return PolicyModel(concepts, relations, lexicon, stopwords, patterns, config,
                       Scorers(*blocks), history)
