"""
述語ごとの候補項マスク（構文ルール / k-order / 枝刈りなし）
マスクは符号化器の入力を変えず、BiLSTM 出力の後段で候補を落とすためだけに使う。
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional, Tuple, Union

from django.conf import settings

from srl_toolkit.exceptions import ConfigError
from srl_toolkit.parallel import ordered_map
from treebank.conll import Corpus, Sentence
from treebank.deptree import DepTree, DistanceTuple, build_tree, distance_tuple
from .ruleset import RuleSet

logger = logging.getLogger(__name__)

PRUNE_MODES = ('rule', 'korder', 'none')
DEFAULT_KORDER = 10

Rule = Union[RuleSet, Iterable[Tuple[int, int]]]


@dataclass(frozen=True)
class PruneMask:
    """述語と、保持された候補トークンID（述語自身を常に含む）"""

    predicate: int
    retained: Tuple[int, ...]

    def __contains__(self, token_id: int) -> bool:
        return token_id in self.retained

    def lost(self, gold: Iterable[int]) -> Tuple[int, ...]:
        """マスクで落ちた正解項（再現率の損失）"""
        return tuple(arg for arg in gold if arg not in self.retained)


def _active(rule: Rule) -> FrozenSet[DistanceTuple]:
    if isinstance(rule, RuleSet):
        return rule.active
    return frozenset(DistanceTuple(*key) for key in rule)


def prune(tree: DepTree, predicate: int, rule: Rule) -> PruneMask:
    """
    距離タプルが有効なルールに含まれる候補のみ残す

    Args:
        tree: 依存構造木
        predicate: 述語トークンID
        rule: k 設定済みの RuleSet、またはタプル集合
    """
    active = _active(rule)
    retained = tuple(
        a for a in range(1, len(tree) + 1)
        if a == predicate or distance_tuple(tree, predicate, a) in active
    )
    return PruneMask(predicate, retained)


def prune_korder(tree: DepTree, predicate: int, k: int = DEFAULT_KORDER) -> PruneMask:
    """k-order 比較用の基準法: d_a <= k の候補を残す"""
    if k < 0:
        raise ConfigError(f"k-order must be >= 0, got {k}")
    retained = tuple(
        a for a in range(1, len(tree) + 1)
        if a == predicate or distance_tuple(tree, predicate, a).d_a <= k
    )
    return PruneMask(predicate, retained)


def no_prune(tree: DepTree, predicate: int) -> PruneMask:
    return PruneMask(predicate, tuple(range(1, len(tree) + 1)))


@dataclass(frozen=True)
class Pruner:
    """学習・推論で使う枝刈り方式"""

    mode: str = 'rule'
    rule: Optional[RuleSet] = None
    korder: int = DEFAULT_KORDER
    syntax_source: str = 'pred'
    # False なら k=0（述語自身のみ保持）も許す。統計用
    strict: bool = True

    def __post_init__(self):
        if self.mode not in PRUNE_MODES:
            raise ConfigError(f"unknown prune mode {self.mode!r}")
        if self.mode == 'rule':
            if self.rule is None or self.rule.k is None:
                raise ConfigError("rule pruning needs a rule with k selected")
            if self.strict and self.rule.k == 0:
                raise ConfigError("k=0 rule prunes every argument; use --no-prune for the unpruned baseline")

    def mask(self, tree: DepTree, predicate: int) -> PruneMask:
        if self.mode == 'rule':
            return prune(tree, predicate, self.rule)
        if self.mode == 'korder':
            return prune_korder(tree, predicate, self.korder)
        return no_prune(tree, predicate)

    def sentence_masks(self, sentence: Sentence) -> Dict[int, PruneMask]:
        """文中の全述語のマスク"""
        if not sentence.predicates:
            return {}
        tree = build_tree(sentence, self.syntax_source)
        return {pred: self.mask(tree, pred) for pred in sentence.predicates}


@dataclass
class PruneReport:
    """枝刈り統計"""

    all_pairs: int = 0
    retained_pairs: int = 0
    gold: int = 0
    retained_gold: int = 0
    lost_by_tuple: Counter = field(default_factory=Counter)

    @property
    def recall(self) -> float:
        return self.retained_gold / self.gold if self.gold else 1.0

    @property
    def reduction(self) -> float:
        return 1.0 - self.retained_pairs / self.all_pairs if self.all_pairs else 0.0

    @property
    def positive_rate(self) -> float:
        """枝刈り前の候補に占める正解項の割合"""
        return self.gold / self.all_pairs if self.all_pairs else 0.0

    @property
    def retained_positive_rate(self) -> float:
        return self.retained_gold / self.retained_pairs if self.retained_pairs else 0.0

    def merge(self, other: 'PruneReport') -> 'PruneReport':
        self.all_pairs += other.all_pairs
        self.retained_pairs += other.retained_pairs
        self.gold += other.gold
        self.retained_gold += other.retained_gold
        self.lost_by_tuple.update(other.lost_by_tuple)
        return self

    def lines(self):
        yield f"all_pairs\t{self.all_pairs}"
        yield f"retained_pairs\t{self.retained_pairs}"
        yield f"reduction\t{self.reduction:.6f}"
        yield f"gold_arguments\t{self.gold}"
        yield f"retained_gold\t{self.retained_gold}"
        yield f"recall\t{self.recall:.6f}"
        yield f"positive_rate\t{self.positive_rate:.6f}"
        yield f"retained_positive_rate\t{self.retained_positive_rate:.6f}"
        for key, count in sorted(self.lost_by_tuple.items(), key=lambda item: (-item[1], item[0])):
            yield f"lost\t{key.d_p}\t{key.d_a}\t{count}"


def _sentence_report(sentence: Sentence, pruner: Pruner) -> PruneReport:
    report = PruneReport()
    if not sentence.predicates:
        return report
    tree = build_tree(sentence, pruner.syntax_source)
    for slot, pred in enumerate(sentence.predicates):
        mask = pruner.mask(tree, pred)
        gold = [arg for arg, _ in sentence.arguments(slot)]
        report.all_pairs += len(sentence)
        report.retained_pairs += len(mask.retained)
        report.gold += len(gold)
        lost = mask.lost(gold)
        report.retained_gold += len(gold) - len(lost)
        for arg in lost:
            report.lost_by_tuple[distance_tuple(tree, pred, arg)] += 1
    return report


def prune_stats(
    corpus: Corpus,
    rule: Optional[RuleSet] = None,
    syntax_source: str = 'pred',
    mode: str = 'rule',
    korder: int = DEFAULT_KORDER,
    threads: Optional[int] = None,
) -> PruneReport:
    """
    候補対の保持数・正解項の再現率・タプル別の損失を集計

    Args:
        corpus: 対象コーパス
        rule: k 設定済みのルール（mode='rule' のとき）
        syntax_source: 'gold' | 'pred'
        mode: 'rule' | 'korder' | 'none'
    """
    pruner = Pruner(mode=mode, rule=rule, korder=korder, syntax_source=syntax_source, strict=False)
    reports = ordered_map(lambda s: _sentence_report(s, pruner), corpus, threads or settings.SRL_THREADS)
    total = PruneReport()
    for report in reports:
        total.merge(report)
    logger.info(
        f"event=prune_stats mode={mode} syntax={syntax_source} reduction={total.reduction:.6f} "
        f"recall={total.recall:.6f} positive_rate={total.positive_rate:.6f}"
    )
    return total

