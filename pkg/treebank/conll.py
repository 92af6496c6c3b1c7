"""
CoNLL-2009 形式の読み書きとコーパス統計
列: ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL PDEPREL FILLPRED PRED APRED1..APREDn
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from django.conf import settings

from srl_toolkit.exceptions import ConllFormatError
from srl_toolkit.parallel import ordered_map

logger = logging.getLogger(__name__)

EMPTY = '_'
FIXED_COLUMNS = 14
ENCODING = 'utf-8'

(ID, FORM, LEMMA, PLEMMA, POS, PPOS, FEAT, PFEAT,
 HEAD, PHEAD, DEPREL, PDEPREL, FILLPRED, PRED) = range(FIXED_COLUMNS)


@dataclass(frozen=True)
class Token:
    """1行 = 1トークン"""

    id: int
    form: str
    lemma: Optional[str] = None
    plemma: Optional[str] = None
    pos: Optional[str] = None
    ppos: Optional[str] = None
    feat: Optional[str] = None
    pfeat: Optional[str] = None
    head: int = 0
    phead: int = 0
    deprel: Optional[str] = None
    pdeprel: Optional[str] = None
    fillpred: bool = False
    pred_sense: Optional[str] = None
    apreds: Tuple[Optional[str], ...] = ()

    def head_for(self, syntax: str) -> int:
        """gold なら HEAD、pred なら PHEAD"""
        return self.head if syntax == 'gold' else self.phead


@dataclass(frozen=True)
class Sentence:
    """文（トークン列）"""

    tokens: Tuple[Token, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.tokens)

    @property
    def predicates(self) -> Tuple[int, ...]:
        """FILLPRED が立っているトークンID（文内順）"""
        return tuple(token.id for token in self.tokens if token.fillpred)

    def token(self, token_id: int) -> Token:
        return self.tokens[token_id - 1]

    def arguments(self, slot: int) -> List[Tuple[int, str]]:
        """slot 番目の述語の (項トークンID, 役割) 一覧"""
        return [
            (token.id, token.apreds[slot])
            for token in self.tokens
            if token.apreds[slot] is not None
        ]

    def frames(self) -> List[Tuple[int, List[Tuple[int, str]]]]:
        """(述語ID, 項一覧) を述語順に返す"""
        return [(pred, self.arguments(slot)) for slot, pred in enumerate(self.predicates)]

    def with_frames(self, frames: Sequence[dict], senses: Optional[Sequence[Optional[str]]] = None) -> 'Sentence':
        """
        述語ごとの {項ID: 役割} で APRED 列（と任意で PRED 列）を置き換えた文を返す

        Args:
            frames: 述語順の {トークンID: 役割}
            senses: 述語順の語義（None の要素は元の値を保持）
        """
        predicates = self.predicates
        sense_by_id = {}
        if senses is not None:
            sense_by_id = {pred: sense for pred, sense in zip(predicates, senses) if sense is not None}
        tokens = []
        for token in self.tokens:
            apreds = tuple(frame.get(token.id) for frame in frames)
            tokens.append(replace(
                token,
                apreds=apreds,
                pred_sense=sense_by_id.get(token.id, token.pred_sense),
            ))
        return Sentence(tuple(tokens))


Corpus = List[Sentence]


@dataclass(frozen=True)
class CorpusStats:
    """コーパス統計（文・トークン・述語・項の数）"""

    n_sentences: int = 0
    n_tokens: int = 0
    n_predicates: int = 0
    n_arguments: int = 0

    def __add__(self, other: 'CorpusStats') -> 'CorpusStats':
        return CorpusStats(
            self.n_sentences + other.n_sentences,
            self.n_tokens + other.n_tokens,
            self.n_predicates + other.n_predicates,
            self.n_arguments + other.n_arguments,
        )

    def as_row(self) -> str:
        return f"{self.n_sentences}\t{self.n_tokens}\t{self.n_predicates}\t{self.n_arguments}"


def _optional(value: str) -> Optional[str]:
    return None if value == EMPTY else value


def _render(value: Optional[str]) -> str:
    return EMPTY if value is None else value


def _to_int(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConllFormatError(f"non-numeric {column} {value!r}", line=line)


def _parse_block(block: Tuple[int, List[str]]) -> Sentence:
    """1文分の行（開始行番号付き）を Sentence に変換"""
    first_line, rows = block
    split_rows = [row.split('\t') for row in rows]

    for offset, columns in enumerate(split_rows):
        if len(columns) < FIXED_COLUMNS:
            raise ConllFormatError(
                f"row has {len(columns)} columns, expected at least {FIXED_COLUMNS}",
                line=first_line + offset,
            )

    n_predicates = sum(1 for columns in split_rows if columns[FILLPRED] == 'Y')
    length = len(split_rows)
    tokens = []
    for offset, columns in enumerate(split_rows):
        line = first_line + offset
        if len(columns) != FIXED_COLUMNS + n_predicates:
            raise ConllFormatError(
                f"row has {len(columns) - FIXED_COLUMNS} APRED columns but sentence has {n_predicates} predicates",
                line=line,
            )
        token_id = _to_int(columns[ID], 'ID', line)
        if token_id != offset + 1:
            raise ConllFormatError(f"ID {token_id} out of sequence, expected {offset + 1}", line=line)
        head = _to_int(columns[HEAD], 'HEAD', line)
        phead = _to_int(columns[PHEAD], 'PHEAD', line)
        for name, value in (('HEAD', head), ('PHEAD', phead)):
            if not 0 <= value <= length:
                raise ConllFormatError(f"{name} {value} outside [0, {length}]", line=line)
            if value == token_id:
                raise ConllFormatError(f"{name} of token {token_id} points to itself", line=line)
        if columns[FILLPRED] not in ('Y', EMPTY):
            raise ConllFormatError(f"FILLPRED must be 'Y' or '_', got {columns[FILLPRED]!r}", line=line)
        fillpred = columns[FILLPRED] == 'Y'
        pred_sense = _optional(columns[PRED])
        if pred_sense is not None and not fillpred:
            raise ConllFormatError(f"PRED {pred_sense!r} on a token without FILLPRED", line=line)
        tokens.append(Token(
            id=token_id,
            form=columns[FORM],
            lemma=_optional(columns[LEMMA]),
            plemma=_optional(columns[PLEMMA]),
            pos=_optional(columns[POS]),
            ppos=_optional(columns[PPOS]),
            feat=_optional(columns[FEAT]),
            pfeat=_optional(columns[PFEAT]),
            head=head,
            phead=phead,
            deprel=_optional(columns[DEPREL]),
            pdeprel=_optional(columns[PDEPREL]),
            fillpred=fillpred,
            pred_sense=pred_sense,
            apreds=tuple(_optional(value) for value in columns[FIXED_COLUMNS:]),
        ))
    return Sentence(tuple(tokens))


def _split_blocks(text: str) -> List[Tuple[int, List[str]]]:
    """空行区切りで (開始行番号, 行リスト) に分割"""
    blocks = []
    rows: List[str] = []
    start = 1
    for number, raw in enumerate(text.split('\n'), start=1):
        line = raw.rstrip('\r')
        if not line.strip():
            if rows:
                blocks.append((start, rows))
                rows = []
            continue
        if not rows:
            start = number
        rows.append(line)
    if rows:
        blocks.append((start, rows))
    return blocks


def parse_conll09(data: Union[bytes, str], threads: Optional[int] = None) -> Corpus:
    """
    CoNLL-2009 バイト列をパース

    Args:
        data: UTF-8 バイト列（または文字列）
        threads: 文ブロック単位の並列数

    Returns:
        Sentence のリスト
    """
    text = data.decode(ENCODING) if isinstance(data, bytes) else data
    blocks = _split_blocks(text)
    corpus = ordered_map(_parse_block, blocks, threads or settings.SRL_THREADS)
    logger.debug(f"event=parse sentences={len(corpus)}")
    return corpus


def read_conll09(path, threads: Optional[int] = None) -> Corpus:
    """ファイルから読み込み"""
    with open(path, 'rb') as handle:
        return parse_conll09(handle.read(), threads=threads)


def _render_sentence(sentence: Sentence) -> str:
    lines = []
    for token in sentence.tokens:
        columns = [
            str(token.id), token.form,
            _render(token.lemma), _render(token.plemma),
            _render(token.pos), _render(token.ppos),
            _render(token.feat), _render(token.pfeat),
            str(token.head), str(token.phead),
            _render(token.deprel), _render(token.pdeprel),
            'Y' if token.fillpred else EMPTY,
            _render(token.pred_sense),
        ]
        columns.extend(_render(value) for value in token.apreds)
        lines.append('\t'.join(columns) + '\n')
    return ''.join(lines) + '\n'


def write_conll09(corpus: Iterable[Sentence], threads: Optional[int] = None) -> bytes:
    """コーパスを正準形の CoNLL-2009 バイト列に変換"""
    parts = ordered_map(_render_sentence, list(corpus), threads or settings.SRL_THREADS)
    return ''.join(parts).encode(ENCODING)


def save_conll09(corpus: Iterable[Sentence], path) -> None:
    with open(path, 'wb') as handle:
        handle.write(write_conll09(corpus))


def corpus_stats(corpus: Iterable[Sentence]) -> CorpusStats:
    """文・トークン・述語・項（空でない APRED セル）の数を数える"""
    total = CorpusStats()
    for sentence in corpus:
        total = total + CorpusStats(
            n_sentences=1,
            n_tokens=len(sentence),
            n_predicates=len(sentence.predicates),
            n_arguments=sum(
                1 for token in sentence.tokens for value in token.apreds if value is not None
            ),
        )
    return total
