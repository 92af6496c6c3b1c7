"""
CoNLL-2009 の慣例による意味役割の採点
項目は (述語, 項, 役割) の弧。語義を含める場合は述語ごとに (述語, 語義) を1項目追加する。
"""
import logging
from dataclasses import dataclass, replace
from typing import Iterator, List, Optional, Sequence

from django.conf import settings

from srl_toolkit.exceptions import AlignmentError
from srl_toolkit.parallel import ordered_map
from treebank.conll import Corpus, Sentence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreReport:
    """採点結果"""

    correct: int = 0
    predicted: int = 0
    gold: int = 0
    pd_correct: int = 0
    pd_total: int = 0
    # 正解語義が空で語義項目から外した述語の数
    skipped_senses: int = 0
    include_senses: bool = False

    def __add__(self, other: 'ScoreReport') -> 'ScoreReport':
        return ScoreReport(
            self.correct + other.correct,
            self.predicted + other.predicted,
            self.gold + other.gold,
            self.pd_correct + other.pd_correct,
            self.pd_total + other.pd_total,
            self.skipped_senses + other.skipped_senses,
            self.include_senses,
        )

    @property
    def precision(self) -> float:
        return self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    @property
    def pd_accuracy(self) -> Optional[float]:
        return self.pd_correct / self.pd_total if self.pd_total else None

    def machine_line(self) -> str:
        pd = '_' if self.pd_accuracy is None else f"{self.pd_accuracy:.6f}"
        return f"{self.precision:.6f}\t{self.recall:.6f}\t{self.f1:.6f}\t{pd}"

    def lines(self) -> Iterator[str]:
        """人が読む表（最後の行は機械可読行）"""
        scope = 'arcs+senses' if self.include_senses else 'arcs'
        yield f"{'scope':<14}{'correct':>9}{'predicted':>11}{'gold':>8}{'P':>10}{'R':>10}{'F1':>10}"
        yield (
            f"{scope:<14}{self.correct:>9}{self.predicted:>11}{self.gold:>8}"
            f"{100 * self.precision:>10.2f}{100 * self.recall:>10.2f}{100 * self.f1:>10.2f}"
        )
        if self.pd_total:
            yield f"{'PD':<14}{self.pd_correct:>9}{self.pd_total:>19}{100 * self.pd_accuracy:>10.2f}"
        if self.skipped_senses:
            yield f"diagnostics skipped_empty_gold_senses={self.skipped_senses}"
        yield self.machine_line()


def _check_aligned(index: int, gold: Sentence, pred: Sentence) -> None:
    if len(gold) != len(pred):
        raise AlignmentError(f"sentence lengths differ ({len(gold)} vs {len(pred)})", sentence=index + 1)
    if gold.predicates != pred.predicates:
        raise AlignmentError(
            f"predicate positions differ ({list(gold.predicates)} vs {list(pred.predicates)})",
            sentence=index + 1,
        )


def _arcs(sentence: Sentence):
    return {
        (predicate, argument, role)
        for predicate, arguments in sentence.frames()
        for argument, role in arguments
    }


def _score_sentence(item) -> ScoreReport:
    index, gold, pred, include_senses = item
    _check_aligned(index, gold, pred)
    gold_arcs, pred_arcs = _arcs(gold), _arcs(pred)
    correct = len(gold_arcs & pred_arcs)
    predicted = len(pred_arcs)
    total = len(gold_arcs)

    pd_correct = pd_total = skipped = 0
    for predicate in gold.predicates:
        gold_sense = gold.token(predicate).pred_sense
        if gold_sense is None:
            skipped += 1
            continue
        match = pred.token(predicate).pred_sense == gold_sense
        pd_total += 1
        pd_correct += match
        if include_senses:
            total += 1
            predicted += 1
            correct += match
    return ScoreReport(correct, predicted, total, pd_correct, pd_total, skipped, include_senses)


def score(
    gold: Sequence[Sentence],
    predicted: Sequence[Sentence],
    include_senses: bool = False,
    threads: Optional[int] = None,
) -> ScoreReport:
    """
    ラベル付き適合率・再現率・F1（役割ラベルは大文字小文字を区別した完全一致）

    Args:
        gold: 正解コーパス
        predicted: 予測コーパス（文・述語位置が正解と揃っていること）
        include_senses: 述語ごとの語義項目を含める
    """
    if len(gold) != len(predicted):
        raise AlignmentError(
            f"corpora have {len(gold)} and {len(predicted)} sentences",
            sentence=min(len(gold), len(predicted)) + 1,
        )
    items = [(i, g, p, include_senses) for i, (g, p) in enumerate(zip(gold, predicted))]
    total = ScoreReport(include_senses=include_senses)
    for report in ordered_map(_score_sentence, items, threads or settings.SRL_THREADS):
        total = total + report
    logger.info(
        f"event=score include_senses={include_senses} correct={total.correct} predicted={total.predicted} "
        f"gold={total.gold} f1={total.f1:.6f} skipped_senses={total.skipped_senses}"
    )
    return total


def pd_accuracy(gold: Sequence[Sentence], predicted: Sequence[Sentence]) -> float:
    """語義が正解と完全一致した述語の割合（正解語義が空の述語は除く）"""
    report = score(gold, predicted, include_senses=False)
    return report.pd_accuracy if report.pd_accuracy is not None else 0.0


def merge_senses(predicted: Corpus, senses: Corpus) -> List[Sentence]:
    """別システムの PRED 列を予測コーパスに取り込む（役割のみのモードの評価用）"""
    if len(predicted) != len(senses):
        raise AlignmentError(
            f"sense file has {len(senses)} sentences, predictions have {len(predicted)}",
            sentence=min(len(predicted), len(senses)) + 1,
        )
    merged = []
    for index, (sentence, source) in enumerate(zip(predicted, senses)):
        _check_aligned(index, source, sentence)
        tokens = tuple(
            replace(token, pred_sense=source.token(token.id).pred_sense) if token.fillpred else token
            for token in sentence.tokens
        )
        merged.append(Sentence(tokens))
    return merged
