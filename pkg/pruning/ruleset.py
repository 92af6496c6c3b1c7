"""
構文ルール（頻度順の距離タプル一覧）の抽出・選択・保存
"""
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from django.conf import settings

from srl_toolkit.exceptions import ConfigError, DataError, RuleFileError
from srl_toolkit.parallel import ordered_map
from treebank.conll import Corpus, Sentence
from treebank.deptree import DistanceTuple, build_tree, distance_tuple

logger = logging.getLogger(__name__)

SELF_TUPLE = DistanceTuple(0, 0)


@dataclass(frozen=True)
class RuleSet:
    """頻度降順（同数は (d_p, d_a) 昇順）のタプル一覧。先頭 k 件が有効なルール"""

    entries: Tuple[Tuple[DistanceTuple, int], ...]
    language: str = 'xx'
    syntax_source: str = 'pred'
    k: Optional[int] = None
    config: Dict[str, str] = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.entries)

    @property
    def total(self) -> int:
        return sum(count for _, count in self.entries)

    @property
    def tuples(self) -> Tuple[DistanceTuple, ...]:
        return tuple(key for key, _ in self.entries)

    @property
    def active(self) -> FrozenSet[DistanceTuple]:
        """先頭 k 件の集合（k 未設定なら ConfigError）"""
        if self.k is None:
            raise ConfigError("rule has no k selected")
        return frozenset(key for key, _ in self.entries[:self.k])

    def prefix_count(self, k: int) -> int:
        return sum(count for _, count in self.entries[:k])


@dataclass(frozen=True)
class CoverageReport:
    """カバー率と候補削減率"""

    k: int
    coverage: float
    reduction: float
    covered: int
    gold: int
    retained_pairs: int
    all_pairs: int

    def as_row(self) -> str:
        return f"{self.k}\t{self.coverage:.6f}\t{self.reduction:.6f}"


def _ranked(counts: Counter) -> Tuple[Tuple[DistanceTuple, int], ...]:
    return tuple(sorted(counts.items(), key=lambda item: (-item[1], item[0].d_p, item[0].d_a)))


def _sentence_tuples(sentence: Sentence, syntax_source: str) -> Counter:
    """1文の (述語, 正解項) 対の距離タプル多重集合"""
    counts = Counter()
    if not sentence.predicates:
        return counts
    tree = build_tree(sentence, syntax_source)
    for slot, pred in enumerate(sentence.predicates):
        for arg, _ in sentence.arguments(slot):
            counts[distance_tuple(tree, pred, arg)] += 1
    return counts


def mine_rules(
    corpus: Corpus,
    syntax_source: str = 'pred',
    language: str = 'xx',
    threads: Optional[int] = None,
) -> RuleSet:
    """
    コーパス中の全 (述語, 正解項) 対の距離タプルを数える（k は未設定）

    Args:
        corpus: 学習コーパス（言語ごとに1つ）
        syntax_source: 'gold' | 'pred'
        language: 言語タグ
    """
    per_sentence = ordered_map(
        lambda sentence: _sentence_tuples(sentence, syntax_source),
        corpus,
        threads or settings.SRL_THREADS,
    )
    counts = Counter()
    for sentence_counts in per_sentence:
        counts.update(sentence_counts)
    if not counts:
        raise DataError("corpus has no arguments to mine rules from")
    rules = RuleSet(entries=_ranked(counts), language=language, syntax_source=syntax_source)
    logger.info(
        f"event=mine_rules language={language} syntax={syntax_source} "
        f"distinct={len(rules)} arguments={rules.total} top={rules.entries[0][0]}"
    )
    return rules


def select_top_k(rules: RuleSet, k: int) -> RuleSet:
    """先頭 k 件を有効なルールとする"""
    if not 0 <= k <= len(rules):
        raise ConfigError(f"k={k} outside [0, {len(rules)}]")
    return replace(rules, k=k)


def select_by_coverage(rules: RuleSet, target: float) -> RuleSet:
    """接頭辞の件数和が target × 総数 以上になる最小の k を選ぶ"""
    if not 0.0 < target <= 1.0:
        raise ConfigError(f"coverage target {target} outside (0, 1]")
    needed = target * rules.total
    running = 0
    for index, (_, count) in enumerate(rules.entries, start=1):
        running += count
        if running >= needed - 1e-9 * rules.total:
            return replace(rules, k=index)
    return replace(rules, k=len(rules))


@dataclass(frozen=True)
class _PairTable:
    """評価用の (タプル, 正解項か) 一覧と候補総数"""

    pairs: Tuple[Tuple[DistanceTuple, bool], ...]
    all_pairs: int


def _pair_table(sentence: Sentence, syntax_source: str) -> _PairTable:
    if not sentence.predicates:
        return _PairTable((), 0)
    tree = build_tree(sentence, syntax_source)
    pairs = []
    for slot, pred in enumerate(sentence.predicates):
        gold = {arg for arg, _ in sentence.arguments(slot)}
        for token in sentence.tokens:
            pairs.append((distance_tuple(tree, pred, token.id), token.id in gold))
    return _PairTable(tuple(pairs), len(pairs))


def _count(tables: Sequence[_PairTable], active: FrozenSet[DistanceTuple], k: int) -> CoverageReport:
    covered = gold = retained = all_pairs = 0
    for table in tables:
        all_pairs += table.all_pairs
        for key, is_gold in table.pairs:
            # 述語自身 (0,0) は常に保持される
            kept = key == SELF_TUPLE or key in active
            retained += kept
            if is_gold:
                gold += 1
                covered += kept
    return CoverageReport(
        k=k,
        coverage=covered / gold if gold else 1.0,
        reduction=1.0 - retained / all_pairs if all_pairs else 0.0,
        covered=covered,
        gold=gold,
        retained_pairs=retained,
        all_pairs=all_pairs,
    )


def coverage(
    rules: RuleSet,
    corpus: Corpus,
    syntax_source: Optional[str] = None,
    threads: Optional[int] = None,
) -> CoverageReport:
    """
    有効なルールで保持される正解項の割合と候補削減率

    Args:
        rules: k 設定済みのルール
        corpus: 評価コーパス
        syntax_source: 省略時はルールの抽出元と同じ
    """
    return sweep(rules, corpus, [rules.k if rules.k is not None else len(rules)], syntax_source, threads)[0]


def sweep(
    rules: RuleSet,
    corpus: Corpus,
    k_values: Optional[Iterable[int]] = None,
    syntax_source: Optional[str] = None,
    threads: Optional[int] = None,
) -> List[CoverageReport]:
    """k ごとの (k, カバー率, 削減率) 表（既定は 0..全件）"""
    source = syntax_source or rules.syntax_source
    tables = ordered_map(
        lambda sentence: _pair_table(sentence, source),
        corpus,
        threads or settings.SRL_THREADS,
    )
    ks = list(range(len(rules) + 1)) if k_values is None else list(k_values)
    reports = []
    for k in ks:
        active = select_top_k(rules, k).active
        reports.append(_count(tables, active, k))
    return reports


def format_rules(rules: RuleSet) -> str:
    """ルールファイル形式のテキスト"""
    lines = [
        f"#language={rules.language}",
        f"#syntax={rules.syntax_source}",
        f"#k={'' if rules.k is None else rules.k}",
    ]
    if rules.config:
        lines.append('#config=' + ' '.join(f"{key}={value}" for key, value in sorted(rules.config.items())))
    for key, count in rules.entries:
        lines.append(f"{key.d_p}\t{key.d_a}\t{count}")
    return '\n'.join(lines) + '\n'


def parse_rules(text: str) -> RuleSet:
    """ルールファイルを読み込み、並び順と件数を検証"""
    headers: Dict[str, str] = {}
    entries: List[Tuple[DistanceTuple, int]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith('#'):
            key, sep, value = line[1:].partition('=')
            if not sep:
                raise RuleFileError(f"malformed header {line!r}", line=number)
            headers[key.strip()] = value.strip()
            continue
        columns = line.split('\t')
        if len(columns) != 3:
            raise RuleFileError(f"expected 3 columns, got {len(columns)}", line=number)
        try:
            d_p, d_a, count = (int(value) for value in columns)
        except ValueError:
            raise RuleFileError(f"non-numeric rule row {line!r}", line=number)
        if d_p < 0 or d_a < 0 or count <= 0:
            raise RuleFileError(f"invalid rule row {line!r}", line=number)
        entries.append((DistanceTuple(d_p, d_a), count))

    if tuple(entries) != _ranked(Counter(dict(entries))) or len(set(key for key, _ in entries)) != len(entries):
        raise RuleFileError("rule rows are not in rank order or repeat a tuple")
    syntax = headers.get('syntax', 'pred')
    if syntax not in ('gold', 'pred'):
        raise RuleFileError(f"unknown syntax source {syntax!r}")
    k_text = headers.get('k', '')
    k = int(k_text) if k_text else None
    if k is not None and not 0 <= k <= len(entries):
        raise RuleFileError(f"k={k} outside [0, {len(entries)}]")
    config = {}
    for item in headers.get('config', '').split():
        key, _, value = item.partition('=')
        config[key] = value
    return RuleSet(
        entries=tuple(entries),
        language=headers.get('language', 'xx'),
        syntax_source=syntax,
        k=k,
        config=config,
    )


def save_rules(rules: RuleSet, path) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(format_rules(rules))


def load_rules(path) -> RuleSet:
    with open(path, encoding='utf-8') as handle:
        return parse_rules(handle.read())
