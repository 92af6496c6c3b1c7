"""
仮想根 <VR> による語義と役割の同時予測

文末に <VR> トークンを1つ追加し、述語ごとの APRED 列で「述語 → <VR>」の対に
語義ラベル（'keep.01' の '01' 部分）を持たせる。述語の PRED 列には語義を除いた
接頭辞（'keep'）を残し、逆変換で接頭辞と語義ラベルを結合して元に戻す。
"""
from dataclasses import replace
from typing import Optional, Tuple

from srl_toolkit.exceptions import ConfigError
from treebank.conll import Sentence, Token
from .serializers import SENSE_DEGENERATE_LANGUAGES
from .vocab import VR

VR_DEPREL = 'VR'


def split_sense(pred_sense: Optional[str], lemma: Optional[str]) -> Tuple[Optional[str], Optional[str]]:
    """
    PRED 列を (接頭辞, 語義ラベル) に分ける
    'keep.01' → ('keep', '01')、'01' → ('', '01')、未記入 → (補題, None)
    """
    if pred_sense is None:
        return lemma or '', None
    prefix, _, label = pred_sense.rpartition('.')
    return prefix, label


def join_sense(prefix: str, label: Optional[str]) -> Optional[str]:
    if label is None:
        return None
    return f"{prefix}.{label}" if prefix else label


def sense_label(pred_sense: Optional[str]) -> Optional[str]:
    return split_sense(pred_sense, None)[1]


def check_end_to_end(mode: str, language: str) -> None:
    if mode != 'end-to-end':
        raise ConfigError(f"virtual root needs end-to-end mode, got mode={mode}")
    if language.lower() in SENSE_DEGENERATE_LANGUAGES:
        raise ConfigError(f"language {language} maps each predicate to a single sense; virtual root is disabled")


def has_virtual_root(sentence: Sentence) -> bool:
    if not sentence.tokens:
        return False
    last = sentence.tokens[-1]
    return last.form == VR and last.head == 0 and last.deprel == VR_DEPREL


def to_virtual_root(sentence: Sentence, mode: str = 'end-to-end', language: str = 'xx') -> Sentence:
    """
    <VR> を追加した文を返す

    Args:
        sentence: 元の文（PRED 列の語義は任意）
        mode: 'end-to-end' 以外は ConfigError
        language: 語義が退化した言語（cs / ja）は ConfigError
    """
    check_end_to_end(mode, language)
    if has_virtual_root(sentence):
        raise ConfigError("sentence already carries a virtual root")

    tokens = []
    labels = []
    for token in sentence.tokens:
        if token.fillpred:
            prefix, label = split_sense(token.pred_sense, token.plemma or token.lemma)
            labels.append(label)
            token = replace(token, pred_sense=prefix or None)
        tokens.append(token)
    root = Token(
        id=len(sentence) + 1,
        form=VR, lemma=VR, plemma=VR, pos=VR, ppos=VR,
        head=0, phead=0, deprel=VR_DEPREL, pdeprel=VR_DEPREL,
        apreds=tuple(labels),
    )
    tokens.append(root)
    return Sentence(tuple(tokens))


def from_virtual_root(sentence: Sentence) -> Sentence:
    """to_virtual_root の逆。<VR> 列の語義ラベルを述語の PRED 列に戻す"""
    if not has_virtual_root(sentence):
        raise ConfigError("sentence has no virtual root to remove")
    root = sentence.tokens[-1]
    labels = dict(zip(sentence.predicates, root.apreds))
    tokens = []
    for token in sentence.tokens[:-1]:
        if token.fillpred:
            token = replace(token, pred_sense=join_sense(token.pred_sense or '', labels[token.id]))
        tokens.append(token)
    return Sentence(tuple(tokens))
