"""
単語表現の素性: 構成、事前学習ベクトル、外部の文脈ベクトル

単語表現 = [単語埋め込み, 補題埋め込み, 品詞埋め込み, 事前学習ベクトル, 述語標識埋め込み, 文脈ベクトル]
（無効にした素性は並びから抜ける）
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from srl_toolkit.exceptions import AlignmentError, DataError
from treebank.conll import Sentence, Token

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WordRep:
    """単語表現の並びと次元"""

    word_dim: int
    lemma_dim: int
    pos_dim: int
    pretrained_dim: int
    indicator_dim: int
    contextual_dim: int

    @classmethod
    def from_config(cls, config) -> 'WordRep':
        return cls(
            word_dim=config.word_dim,
            lemma_dim=config.lemma_dim if config.use_lemma else 0,
            pos_dim=config.pos_dim if config.use_pos else 0,
            pretrained_dim=config.pretrained_dim,
            indicator_dim=config.indicator_dim,
            contextual_dim=config.contextual_dim,
        )

    def slots(self) -> List[Tuple[str, int]]:
        """(素性名, 次元) の並び。次元 0 は除く"""
        layout = [
            ('word', self.word_dim),
            ('lemma', self.lemma_dim),
            ('pos', self.pos_dim),
            ('pretrained', self.pretrained_dim),
            ('indicator', self.indicator_dim),
            ('contextual', self.contextual_dim),
        ]
        return [(name, dim) for name, dim in layout if dim > 0]

    @property
    def total(self) -> int:
        return sum(dim for _, dim in self.slots())


def token_lemma(token: Token, syntax: str) -> Optional[str]:
    """gold 構文なら LEMMA、pred なら PLEMMA（空なら他方）"""
    if syntax == 'gold':
        return token.lemma or token.plemma
    return token.plemma or token.lemma


def token_pos(token: Token, syntax: str) -> Optional[str]:
    if syntax == 'gold':
        return token.pos or token.ppos
    return token.ppos or token.pos


@dataclass(frozen=True)
class PretrainedVectors:
    dim: int
    vectors: Dict[str, np.ndarray]

    def table(self, words: Sequence[str]) -> np.ndarray:
        """語彙順の表。ファイルに無い語はゼロベクトル"""
        table = np.zeros((len(words), self.dim), dtype=np.float64)
        for row, word in enumerate(words):
            vector = self.vectors.get(word)
            if vector is not None:
                table[row] = vector
        return table


def load_pretrained_vectors(path) -> PretrainedVectors:
    """
    word2vec / GloVe のテキスト形式を読む
    1行目が 'count dim' の2整数ならヘッダとして読み飛ばす。
    """
    vectors: Dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding='utf-8') as handle:
        for number, raw in enumerate(handle, start=1):
            parts = raw.rstrip('\n').split(' ')
            if number == 1 and len(parts) == 2 and all(part.isdigit() for part in parts):
                continue
            if len(parts) < 2:
                continue
            try:
                vector = np.array([float(value) for value in parts[1:] if value], dtype=np.float64)
            except ValueError:
                raise DataError("non-numeric value in pretrained vector file", path=path, line=number)
            if dim is None:
                dim = len(vector)
            elif len(vector) != dim:
                raise DataError(f"vector has {len(vector)} values, expected {dim}", path=path, line=number)
            vectors.setdefault(parts[0], vector)
    if dim is None:
        raise DataError("pretrained vector file is empty", path=path)
    logger.info(f"event=pretrained_loaded path={path} words={len(vectors)} dim={dim}")
    return PretrainedVectors(dim, vectors)


def _parse_header(line: str, path) -> Dict[str, int]:
    values = {}
    for item in line.lstrip('#').split():
        key, sep, value = item.lstrip('#').partition('=')
        if not sep:
            raise DataError(f"malformed embedding header {line!r}", path=path)
        try:
            values[key] = int(value)
        except ValueError:
            raise DataError(f"malformed embedding header {line!r}", path=path)
    if 'dim' not in values or 'sentences' not in values:
        raise DataError("embedding header needs #dim=D #sentences=S", path=path)
    return values


def load_external_embeddings(path, corpus: Sequence[Sentence], dim: Optional[int] = None) -> List[np.ndarray]:
    """
    外部の文脈ベクトル（学習中は更新しない）をコーパスと位置合わせして読む

    書式: '#dim=D #sentences=S' の後、文ごとに '#sent i n' と n 行の D 個の実数。
    文数・トークン数が合わなければ AlignmentError（文番号・トークン番号付き、1始まり）。

    Returns:
        文ごとの (トークン数, D) 配列
    """
    with open(path, encoding='utf-8') as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines:
        raise DataError("embedding file is empty", path=path)
    header = _parse_header(lines[0], path)
    if dim is not None and header['dim'] != dim:
        raise AlignmentError(f"embedding dim {header['dim']} != configured {dim}", path=path)
    if header['sentences'] != len(corpus):
        raise AlignmentError(
            f"file has {header['sentences']} sentences, corpus has {len(corpus)}",
            path=path,
        )

    arrays = []
    cursor = 1
    for index, sentence in enumerate(corpus, start=1):
        if cursor >= len(lines) or not lines[cursor].startswith('#sent'):
            raise AlignmentError("missing '#sent' marker", path=path, sentence=index)
        fields = lines[cursor].split()
        if len(fields) != 3 or fields[1] != str(index):
            raise AlignmentError(f"expected '#sent {index} n', got {lines[cursor]!r}", path=path, sentence=index)
        try:
            n_tokens = int(fields[2])
        except ValueError:
            raise AlignmentError(f"non-numeric token count in {lines[cursor]!r}", path=path, sentence=index)
        if n_tokens != len(sentence):
            raise AlignmentError(
                f"file has {n_tokens} tokens, corpus has {len(sentence)}",
                path=path, sentence=index,
            )
        cursor += 1
        rows = []
        for token in range(1, n_tokens + 1):
            if cursor >= len(lines) or lines[cursor].startswith('#'):
                raise AlignmentError("missing token vector", path=path, sentence=index, token=token)
            try:
                row = np.array(lines[cursor].split(), dtype=np.float64)
            except ValueError:
                raise DataError("non-numeric token vector", path=path, sentence=index, token=token)
            if row.shape[0] != header['dim']:
                raise AlignmentError(
                    f"token vector has {row.shape[0]} values, expected {header['dim']}",
                    path=path, sentence=index, token=token,
                )
            rows.append(row)
            cursor += 1
        arrays.append(np.array(rows, dtype=np.float64).reshape(n_tokens, header['dim']))
    if cursor != len(lines):
        raise AlignmentError("file has lines after the last sentence", path=path, sentence=len(corpus) + 1)
    logger.info(f"event=external_loaded path={path} sentences={len(arrays)} dim={header['dim']}")
    return arrays


def save_external_embeddings(path, arrays: Sequence[np.ndarray]) -> None:
    """load_external_embeddings と同じ書式で書き出す（合成データ・試験用）"""
    dim = arrays[0].shape[1] if arrays else 0
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(f"#dim={dim} #sentences={len(arrays)}\n")
        for index, array in enumerate(arrays, start=1):
            handle.write(f"#sent {index} {array.shape[0]}\n")
            for row in array:
                handle.write(' '.join(repr(float(value)) for value in row) + '\n')
