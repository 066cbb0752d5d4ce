"""Correspondence factor graphs over parse trees and symbol banks.

Each phrase i and candidate symbol j get a boolean correspondence
variable phi_ij ("this phrase expresses that symbol"). A log-linear
factor scores each variable given the phrase, the symbol, and a summary
of what the phrase's children expressed, so the full objective factors
as a product over (phrase, symbol) pairs. Inference walks phrases
bottom-up and sets every variable to its own factor's argmax under the
already-fixed child assignments; training fits the factor weights by
maximum likelihood on annotated corpora.

Features are named conjunctions of phrase atoms, symbol atoms, and
child-summary atoms, suffixed with the phi literal (&T / &F) so the two
sides of a factor never share a feature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .parse import ParseTree, Phrase, load_parse_tree
from .symbols import (
    BehaviorSymbol,
    ConditionalPairSymbol,
    HierarchicalDetectorSymbol,
    IndependentDetectorSymbol,
    SymbolSpace,
)
from .world import WorldModel

TEMPLATE_VERSION = 1


class NumericError(ArithmeticError):
    pass


class TrainingError(RuntimeError):
    pass


class CorpusError(ValueError):
    pass


class GroundingError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    """Active binary feature indices, sorted ascending."""

    indices: tuple[int, ...]
    dim: int


@dataclass(frozen=True)
class CorrespondenceVar:
    phrase_index: int
    symbol_id: int
    value: bool


# ---------------------------------------------------------------------------
# feature templates

def phrase_atoms(phrase: Phrase) -> list[str]:
    atoms = [f"phrase:{phrase.label}"]
    atoms += [f"word:{w}" for w, _ in phrase.words]
    atoms += [f"tag:{t}" for t in sorted({t for _, t in phrase.words})]
    atoms += [f"verb:{w}" for w, t in phrase.words if t == "VB"]
    seen: dict[str, None] = dict.fromkeys(atoms)
    return list(seen)


def _target_label(target, world: WorldModel | None) -> str:
    if isinstance(target, int):
        if world is not None and target in world.objects:
            return world.objects[target].label
        return f"object{target}"
    return str(target)


def symbol_atoms(symbol, world: WorldModel | None = None) -> list[str]:
    if isinstance(symbol, IndependentDetectorSymbol):
        atoms = [f"category:{symbol.category}"]
        if symbol.category == "semantic_label":
            atoms.append(f"label:{symbol.value}")
        else:
            atoms.append(f"value:{symbol.value}")
        return atoms
    if isinstance(symbol, HierarchicalDetectorSymbol):
        return [
            "kind:hierarchy",
            f"hier_parent:{symbol.parent_type}",
            f"hier_subtype:{symbol.subtype}",
        ]
    if isinstance(symbol, ConditionalPairSymbol):
        return (["kind:conditional_pair"]
                + [f"first_{a}" for a in symbol_atoms(symbol.first)]
                + [f"second_{a}" for a in symbol_atoms(symbol.second)])
    if isinstance(symbol, BehaviorSymbol):
        return [
            "kind:behavior",
            f"action:{symbol.action}",
            f"target_label:{_target_label(symbol.target_a, world)}",
        ]
    raise TypeError(f"not a symbol: {symbol!r}")


def child_atoms(child_symbols, world: WorldModel | None = None) -> list[str]:
    atoms: set[str] = set()
    for sym in child_symbols:
        if isinstance(sym, IndependentDetectorSymbol):
            if sym.category == "semantic_label":
                atoms.add(f"child_has:{sym.value}")
            else:
                atoms.add(f"child_has:{sym.category}:{sym.value}")
        elif isinstance(sym, HierarchicalDetectorSymbol):
            atoms.add(f"child_has_hier:{sym.parent_type}.{sym.subtype}")
        elif isinstance(sym, BehaviorSymbol):
            label = _target_label(sym.target_a, world)
            atoms.add(f"child_has_behavior:{sym.action}.{label}")
            atoms.add(f"child_has_target:{label}")
        elif isinstance(sym, ConditionalPairSymbol):
            atoms.add("child_has:conditional_pair")
    if not atoms:
        return ["child_none"]
    return sorted(atoms)


def feature_names(phrase: Phrase, symbol, phi: bool, child_symbols=frozenset(),
                  world: WorldModel | None = None) -> list[str]:
    """Expand the conjunction templates for one factor side."""
    suffix = "T" if phi else "F"
    ps = phrase_atoms(phrase)
    ss = symbol_atoms(symbol, world)
    cs = child_atoms(child_symbols, world)
    names = [f"{p}&{s}&{suffix}" for p in ps for s in ss]
    names += [f"{p}&{s}&{c}&{suffix}" for p in ps for s in ss for c in cs]
    return names


class FeatureSpace:
    """Feature-name registry. Grows while compiling a corpus, frozen for
    inference; unknown names at inference simply carry zero weight."""

    def __init__(self, names=(), frozen: bool = False):
        self._index: dict[str, int] = {n: i for i, n in enumerate(names)}
        if len(self._index) != len(tuple(names)):
            raise ValueError("duplicate feature names")
        self.frozen = frozen

    @property
    def dim(self) -> int:
        return len(self._index)

    @property
    def names(self) -> list[str]:
        return list(self._index)

    def freeze(self) -> None:
        self.frozen = True

    def featurize(self, phrase: Phrase, symbol, phi: bool,
                  child_symbols=frozenset(),
                  world: WorldModel | None = None) -> FeatureVector:
        idx = []
        for name in feature_names(phrase, symbol, phi, child_symbols, world):
            i = self._index.get(name)
            if i is None:
                if self.frozen:
                    continue
                i = len(self._index)
                self._index[name] = i
            idx.append(i)
        return FeatureVector(tuple(sorted(idx)), self.dim)


# ---------------------------------------------------------------------------
# factor math

def _score(fv: FeatureVector, w: np.ndarray) -> float:
    if fv.indices and fv.indices[-1] >= len(w):
        raise NumericError("feature index outside weight vector")
    s = float(w[list(fv.indices)].sum()) if fv.indices else 0.0
    if not math.isfinite(s):
        raise NumericError("non-finite factor score")
    return s


def _small_side(margin: float) -> float:
    # probability of the losing side, margin > 0; stays in (0, 0.5)
    e = math.exp(-margin)
    return e / (1.0 + e)


def factor_prob(fv_true: FeatureVector, fv_false: FeatureVector,
                w: np.ndarray) -> float:
    """p(phi=true) under the two-sided log-linear factor.

    Computed from the losing side so that swapping the arguments yields
    exactly 1 minus the original value.
    """
    d = _score(fv_false, w) - _score(fv_true, w)
    if d == 0.0:
        return 0.5
    if d > 0.0:
        return _small_side(d)
    return 1.0 - _small_side(-d)


def _log_prob(margin: float, gold: bool) -> float:
    # margin = s_true - s_false; log p(phi = gold)
    if gold:
        return -float(np.logaddexp(0.0, -margin))
    return -float(np.logaddexp(0.0, margin))


# ---------------------------------------------------------------------------
# graphs

@dataclass
class FactorGraph:
    """One factor per (phrase, symbol-bank entry) pair. Symbol ids are
    positions in the bank. Perception banks ignore the world entirely;
    behavior banks are instantiated over the world's objects."""

    tree: ParseTree
    bank: tuple
    kind: str
    world: WorldModel | None = None

    @property
    def factor_count(self) -> int:
        return self.tree.n_phrases * len(self.bank)

    def symbol(self, symbol_id: int):
        return self.bank[symbol_id]


def build_perception_graph(tree: ParseTree, space: SymbolSpace) -> FactorGraph:
    return FactorGraph(tree, tuple(space.perception), "perception")


def build_behavior_graph(tree: ParseTree, space: SymbolSpace,
                         world: WorldModel) -> FactorGraph:
    bank = tuple(
        BehaviorSymbol(action, obj.id)
        for action in space.actions
        for obj in world.query()
    )
    return FactorGraph(tree, bank, "behavior", world)


@dataclass(frozen=True)
class Assignment:
    """Inferred correspondence values: per-phrase sets of expressed bank
    ids, plus the total conditional log-probability."""

    expressed: dict[int, frozenset[int]]
    log_score: float

    def phrase_symbols(self, graph: FactorGraph, phrase_index: int) -> set:
        return {graph.bank[j] for j in self.expressed.get(phrase_index, frozenset())}

    def all_symbols(self, graph: FactorGraph) -> set:
        out: set = set()
        for ids in self.expressed.values():
            out |= {graph.bank[j] for j in ids}
        return out

    def variables(self, graph: FactorGraph) -> list[CorrespondenceVar]:
        out = []
        for phrase in graph.tree.phrases_bottom_up():
            chosen = self.expressed.get(phrase.index, frozenset())
            for j in range(len(graph.bank)):
                out.append(CorrespondenceVar(phrase.index, j, j in chosen))
        return out


@dataclass
class Model:
    """Trained factor weights bound to their feature-name registry."""

    kind: str
    space: FeatureSpace
    weights: np.ndarray

    def save(self, path: str | Path) -> None:
        names = self.space.names
        data = {
            "template_version": TEMPLATE_VERSION,
            "kind": self.kind,
            "weights": {n: float(self.weights[i]) for i, n in enumerate(names)},
        }
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("template_version") != TEMPLATE_VERSION:
            raise CorpusError(
                f"model template version {data.get('template_version')!r} "
                f"does not match {TEMPLATE_VERSION}")
        weights = data["weights"]
        names = sorted(weights)
        space = FeatureSpace(names, frozen=True)
        w = np.array([weights[n] for n in names], dtype=float)
        return cls(data["kind"], space, w)


def infer(graph: FactorGraph, model: Model) -> Assignment:
    """Bottom-up per-factor argmax under fixed child assignments.

    Ties (equal scores for both values) break to phi=false, so the zero
    model expresses nothing. Deterministic: pure arithmetic over a fixed
    traversal order.
    """
    fs = model.space
    w = model.weights
    expressed: dict[int, frozenset[int]] = {}
    log_score = 0.0
    by_index: dict[int, set] = {}
    for phrase in graph.tree.phrases_bottom_up():
        child_syms: set = set()
        for child in phrase.children:
            child_syms |= by_index[child.index]
        chosen = set()
        for j, sym in enumerate(graph.bank):
            fv_t = fs.featurize(phrase, sym, True, child_syms, graph.world)
            fv_f = fs.featurize(phrase, sym, False, child_syms, graph.world)
            margin = _score(fv_t, w) - _score(fv_f, w)
            value = margin > 0.0
            if value:
                chosen.add(j)
            log_score += _log_prob(margin, value)
        expressed[phrase.index] = frozenset(chosen)
        by_index[phrase.index] = {graph.bank[j] for j in chosen}
    return Assignment(expressed, log_score)


# ---------------------------------------------------------------------------
# corpora and training

@dataclass(frozen=True)
class TrainingExample:
    """One annotated instruction: its graph plus the gold set of
    (phrase_index, bank_id) pairs whose variables are true."""

    graph: FactorGraph
    gold: frozenset[tuple[int, int]]


def _resolve_descriptor(desc: dict, graph: FactorGraph, space: SymbolSpace) -> int:
    if "label" in desc:
        sym = space.semantic(desc["label"])
    elif "parent" in desc:
        sym = space.hierarchy(desc["parent"], desc["subtype"])
    elif "action" in desc:
        sym = BehaviorSymbol(desc["action"], int(desc["object"]))
    else:
        raise CorpusError(f"unintelligible gold descriptor {desc!r}")
    try:
        return graph.bank.index(sym)
    except ValueError:
        raise CorpusError(f"gold symbol {sym!r} not in graph bank") from None


def load_corpus(path: str | Path) -> tuple[str, list[dict]]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = data.get("kind")
    if kind not in ("perception", "behavior"):
        raise CorpusError(f"corpus kind {kind!r} must be perception or behavior")
    examples = data.get("examples")
    if not examples:
        raise CorpusError("corpus has no examples")
    for i, ex in enumerate(examples):
        if "tree" not in ex or "gold" not in ex:
            raise CorpusError(f"example {i} needs 'tree' and 'gold'")
        if kind == "perception" and "world" in ex:
            raise CorpusError(f"example {i}: perception corpora carry no worlds")
        if kind == "behavior" and "world" not in ex:
            raise CorpusError(f"example {i}: behavior corpora need worlds")
    return kind, examples


def build_examples(kind: str, raw_examples: list[dict],
                   space: SymbolSpace) -> list[TrainingExample]:
    out = []
    for i, raw in enumerate(raw_examples):
        tree = load_parse_tree(raw["tree"])
        if kind == "perception":
            graph = build_perception_graph(tree, space)
        else:
            world = WorldModel.from_json(raw["world"])
            graph = build_behavior_graph(tree, space, world)
        gold = set()
        for entry in raw["gold"]:
            phrase_index, desc = entry
            if not 0 <= int(phrase_index) < tree.n_phrases:
                raise CorpusError(f"example {i}: phrase index {phrase_index} "
                                  f"outside tree")
            gold.add((int(phrase_index), _resolve_descriptor(desc, graph, space)))
        out.append(TrainingExample(graph, frozenset(gold)))
    return out


class CompiledCorpus:
    """Featurized corpus: per-factor gold values and sparse feature
    deltas (f_true - f_false), flattened for vectorized math.

    Child conditioning during compilation uses the gold assignments of
    the children, matching what inference reconstructs once trained.
    """

    def __init__(self, examples: list[TrainingExample],
                 feature_space: FeatureSpace | None = None):
        self.examples = examples
        self.feature_space = feature_space or FeatureSpace()
        fs = self.feature_space
        factors = []  # (gold, true idx tuple, false idx tuple)
        for ex in examples:
            graph = ex.graph
            gold_at = {p.index: {j for (i, j) in ex.gold if i == p.index}
                       for p in graph.tree.phrases_bottom_up()}
            for phrase in graph.tree.phrases_bottom_up():
                child_syms: set = set()
                for child in phrase.children:
                    child_syms |= {graph.bank[j] for j in gold_at[child.index]}
                for j, sym in enumerate(graph.bank):
                    fv_t = fs.featurize(phrase, sym, True, child_syms, graph.world)
                    fv_f = fs.featurize(phrase, sym, False, child_syms, graph.world)
                    factors.append((j in gold_at[phrase.index],
                                    fv_t.indices, fv_f.indices))
        fs.freeze()
        self.n_factors = len(factors)
        self.golds = np.array([g for g, _, _ in factors], dtype=float)
        counts, flat_idx, flat_val = [], [], []
        for _, ti, fi in factors:
            counts.append(len(ti) + len(fi))
            flat_idx.extend(ti)
            flat_val.extend([1.0] * len(ti))
            flat_idx.extend(fi)
            flat_val.extend([-1.0] * len(fi))
        self.counts = np.array(counts, dtype=int)
        self.offsets = np.concatenate(([0], np.cumsum(self.counts)[:-1]))
        self.flat_idx = np.array(flat_idx, dtype=int)
        self.flat_val = np.array(flat_val, dtype=float)

    @property
    def dim(self) -> int:
        return self.feature_space.dim

    def margins(self, w: np.ndarray) -> np.ndarray:
        """Per-factor s_true - s_false."""
        if len(w) < self.dim:
            raise NumericError("weight vector shorter than feature space")
        contrib = w[self.flat_idx] * self.flat_val
        return np.add.reduceat(contrib, self.offsets) if self.n_factors else \
            np.zeros(0)


def compile_corpus(path_or_examples, space: SymbolSpace,
                   kind: str | None = None) -> CompiledCorpus:
    if isinstance(path_or_examples, (str, Path)):
        kind, raw = load_corpus(path_or_examples)
        examples = build_examples(kind, raw, space)
    else:
        examples = list(path_or_examples)
    return CompiledCorpus(examples)


def log_likelihood(corpus: CompiledCorpus, w: np.ndarray, l2: float = 0.0) -> float:
    """Sum of per-factor log p(gold phi) minus (l2/2)|w|^2."""
    m = corpus.margins(w)
    signed = np.where(corpus.golds > 0.5, m, -m)
    lp = -np.logaddexp(0.0, -signed)
    val = float(lp.sum()) - 0.5 * l2 * float(w @ w)
    if not math.isfinite(val):
        raise NumericError("non-finite log-likelihood")
    return val


def ll_gradient(corpus: CompiledCorpus, w: np.ndarray, l2: float = 0.0) -> np.ndarray:
    """Analytic gradient: sum over factors of (1_gold - p_true) times
    (f_true - f_false), minus l2 w."""
    m = corpus.margins(w)
    with np.errstate(over="ignore"):
        p_true = 1.0 / (1.0 + np.exp(-m))
    coef = corpus.golds - p_true
    grad = np.zeros(len(w))
    np.add.at(grad, corpus.flat_idx,
              np.repeat(coef, corpus.counts) * corpus.flat_val)
    grad -= l2 * w
    return grad


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 300
    step: float = 1.0
    l2: float = 1e-3
    tol: float = 1e-9
    max_backtracks: int = 40
    armijo: float = 1e-4


@dataclass
class TrainResult:
    model: Model
    objective_history: list[float]
    iterations: int
    converged: bool


def train(corpus: CompiledCorpus, config: TrainConfig = TrainConfig(),
          kind: str = "perception") -> TrainResult:
    """Batch gradient ascent with backtracking line search.

    Every accepted step satisfies the sufficient-increase condition, so
    the recorded objective history is non-decreasing. Non-finite values
    abort with the iteration number.
    """
    w = np.zeros(corpus.dim)
    try:
        obj = log_likelihood(corpus, w, config.l2)
    except NumericError as e:
        raise TrainingError(f"iteration 0: {e}") from e
    history = [obj]
    converged = False
    it = 0
    for it in range(1, config.iterations + 1):
        try:
            grad = ll_gradient(corpus, w, config.l2)
            gnorm2 = float(grad @ grad)
            if not math.isfinite(gnorm2):
                raise NumericError("non-finite gradient")
            if gnorm2 == 0.0:
                converged = True
                break
            step = config.step
            accepted = False
            for _ in range(config.max_backtracks):
                w_new = w + step * grad
                obj_new = log_likelihood(corpus, w_new, config.l2)
                if obj_new >= obj + config.armijo * step * gnorm2:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                converged = True
                break
            gain = obj_new - obj
            w, obj = w_new, obj_new
            history.append(obj)
            if gain <= config.tol * (1.0 + abs(obj)):
                converged = True
                break
        except NumericError as e:
            raise TrainingError(f"iteration {it}: {e}") from e
    model = Model(kind, corpus.feature_space, w)
    return TrainResult(model, history, it, converged)


def recovery(corpus: CompiledCorpus, model: Model) -> float:
    """Fraction of corpus examples whose inferred assignment reproduces
    the gold assignment exactly (every variable, every phrase)."""
    if not corpus.examples:
        return 1.0
    hits = 0
    for ex in corpus.examples:
        got = infer(ex.graph, model)
        want = {p.index: frozenset(j for (i, j) in ex.gold if i == p.index)
                for p in ex.graph.tree.phrases_bottom_up()}
        if got.expressed == want:
            hits += 1
    return hits / len(corpus.examples)
