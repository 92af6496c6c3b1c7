"""
合成コーパス生成（ライセンス付き CoNLL-2009 データの代替）

各文について、まず述語数・項数・要求距離タプルを分布から抽選し、
その後に木を（必要なら何度でも）引き直して配置する。
このためタプルの経験分布は配置可否に左右されず要求分布に収束する。
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from srl_toolkit.exceptions import SynthesisError
from .conll import Corpus, CorpusStats, Sentence, Token, corpus_stats
from .deptree import DepTree, DistanceTuple, distance_tuple, tree_from_heads

logger = logging.getLogger(__name__)

POS_TAGS = ('NN', 'VB', 'JJ', 'RB', 'DT', 'IN', 'PRP', 'CD')
DEFAULT_ROLES = ('A0', 'A1', 'A2', 'AM-TMP', 'AM-LOC')
PARENT_WINDOW = 3


@dataclass
class SynthTruth:
    """生成時に記録した正解の集計"""

    stats: CorpusStats = field(default_factory=CorpusStats)
    tuple_counts: Counter = field(default_factory=Counter)
    requested: Dict[DistanceTuple, float] = field(default_factory=dict)

    def frequencies(self) -> Dict[DistanceTuple, float]:
        total = sum(self.tuple_counts.values())
        return {key: count / total for key, count in self.tuple_counts.items()} if total else {}


class SynthResult(NamedTuple):
    corpus: Corpus
    truth: SynthTruth


def _random_heads(rng: np.random.Generator, n: int) -> List[int]:
    """ランダムな単一根の木（非射影も含む）"""
    order = rng.permutation(n) + 1
    heads = [0] * n
    for j in range(1, n):
        low = max(0, j - PARENT_WINDOW)
        heads[order[j] - 1] = int(order[rng.integers(low, j)])
    return heads


def _descendants(tree: DepTree, node: int) -> set:
    found = {node}
    stack = [node]
    while stack:
        for child in tree.children[stack.pop()]:
            found.add(child)
            stack.append(child)
    return found


def _noisy_heads(rng: np.random.Generator, heads: List[int], noise_rate: float) -> List[int]:
    """予測主辞の一部を、単一根の木を保ったまま付け替える"""
    noisy = list(heads)
    if noise_rate <= 0:
        return noisy
    n = len(heads)
    for node in range(1, n + 1):
        if rng.random() >= noise_rate or noisy[node - 1] == 0:
            continue
        blocked = _descendants(tree_from_heads(noisy), node)
        options = [h for h in range(1, n + 1) if h not in blocked and h != noisy[node - 1]]
        if options:
            noisy[node - 1] = int(options[rng.integers(len(options))])
    return noisy


def _place(
    rng: np.random.Generator,
    tree: DepTree,
    n: int,
    plan: Sequence[Sequence[DistanceTuple]],
) -> Optional[List[Tuple[int, Dict[int, DistanceTuple]]]]:
    """計画された (述語ごとのタプル列) を木の上に配置。不能なら None"""
    used_predicates = set()
    placed = []
    for tuples in plan:
        choice = None
        for candidate in rng.permutation(n) + 1:
            candidate = int(candidate)
            if candidate in used_predicates:
                continue
            by_tuple: Dict[DistanceTuple, List[int]] = {}
            for a in range(1, n + 1):
                by_tuple.setdefault(distance_tuple(tree, candidate, a), []).append(a)
            taken: Dict[int, DistanceTuple] = {}
            for requested in tuples:
                pool = [a for a in by_tuple.get(requested, []) if a not in taken]
                if not pool:
                    taken = None
                    break
                taken[int(pool[rng.integers(len(pool))])] = requested
            if taken is not None:
                choice = (candidate, taken)
                break
        if choice is None:
            return None
        used_predicates.add(choice[0])
        placed.append(choice)
    return placed


def synth_corpus(
    seed: int,
    n_sentences: int,
    max_len: int,
    role_inventory: Sequence[str] = DEFAULT_ROLES,
    tuple_distribution: Optional[Mapping[Tuple[int, int], float]] = None,
    noise_rate: float = 0.0,
    n_senses: int = 3,
    vocab_size: int = 50,
    max_predicates: int = 3,
    max_arguments: int = 3,
    max_retries: int = 200,
    min_len: int = 2,
) -> SynthResult:
    """
    合成コーパスを生成

    Args:
        seed: 乱数シード（同一シードなら同一コーパス）
        n_sentences: 文数
        max_len: 最大文長（2以上）
        role_inventory: 役割ラベル。項の役割は項の品詞から決定的に決まる
        tuple_distribution: 距離タプル上の有限分布（既定は {(0,1): 1.0}）
        noise_rate: 予測主辞（PHEAD）を付け替える割合
        n_senses: 補題ごとの語義数の上限
        max_retries: 1文あたりの木の引き直し回数の上限
        min_len: 最小文長

    Returns:
        (コーパス, 生成時の正解集計)
    """
    if max_len < 2:
        raise SynthesisError(f"max_len must be >= 2, got {max_len}")
    if not 2 <= min_len <= max_len:
        raise SynthesisError(f"min_len must be within [2, {max_len}], got {min_len}")
    if not role_inventory:
        raise SynthesisError("role inventory is empty")
    distribution = dict(tuple_distribution or {(0, 1): 1.0})
    keys = sorted(DistanceTuple(*key) for key in distribution)
    weights = np.array([float(distribution[tuple(key)]) for key in keys])
    if (weights < 0).any() or weights.sum() <= 0:
        raise SynthesisError("tuple distribution needs non-negative weights with positive mass")
    probabilities = weights / weights.sum()

    rng = np.random.default_rng(seed)
    truth = SynthTruth(requested={key: float(p) for key, p in zip(keys, probabilities)})
    corpus: Corpus = []

    for index in range(n_sentences):
        n_predicates = int(rng.integers(1, min(max_predicates, max_len) + 1))
        plan = [
            [keys[i] for i in rng.choice(len(keys), size=int(rng.integers(1, max_arguments + 1)), p=probabilities)]
            for _ in range(n_predicates)
        ]
        for attempt in range(max_retries):
            n = int(rng.integers(max(min_len, n_predicates), max_len + 1))
            heads = _random_heads(rng, n)
            tree = tree_from_heads(heads)
            placed = _place(rng, tree, n, plan)
            if placed is not None:
                break
        else:
            raise SynthesisError(
                f"could not place requested tuples after {max_retries} trees",
                sentence=index,
            )

        placed.sort(key=lambda item: item[0])
        pheads = _noisy_heads(rng, heads, noise_rate)
        words = rng.integers(vocab_size, size=n)
        tags = [POS_TAGS[int(i)] for i in rng.integers(len(POS_TAGS), size=n)]
        predicate_ids = {pred for pred, _ in placed}
        for pred in predicate_ids:
            tags[pred - 1] = 'VB'

        tokens = []
        for node in range(1, n + 1):
            lemma = f"l{int(words[node - 1])}"
            sense = None
            if node in predicate_ids:
                sense = f"{lemma}.{int(words[node - 1]) % max(1, n_senses) + 1:02d}"
            apreds = tuple(
                role_inventory[POS_TAGS.index(tags[node - 1]) % len(role_inventory)] if node in args else None
                for _, args in placed
            )
            deprel = 'ROOT' if heads[node - 1] == 0 else 'DEP'
            pdeprel = 'ROOT' if pheads[node - 1] == 0 else 'DEP'
            tokens.append(Token(
                id=node,
                form=f"w{int(words[node - 1])}",
                lemma=lemma,
                plemma=lemma,
                pos=tags[node - 1],
                ppos=tags[node - 1],
                head=heads[node - 1],
                phead=pheads[node - 1],
                deprel=deprel,
                pdeprel=pdeprel,
                fillpred=node in predicate_ids,
                pred_sense=sense,
                apreds=apreds,
            ))
        for _, args in placed:
            truth.tuple_counts.update(args.values())
        corpus.append(Sentence(tuple(tokens)))

    truth.stats = corpus_stats(corpus)
    logger.info(
        f"event=synth seed={seed} sentences={truth.stats.n_sentences} tokens={truth.stats.n_tokens} "
        f"predicates={truth.stats.n_predicates} arguments={truth.stats.n_arguments}"
    )
    return SynthResult(corpus, truth)
