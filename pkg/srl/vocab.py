"""
語彙（単語・補題・品詞）とラベル語彙（役割 + NONE、語義）
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

from srl_toolkit.exceptions import ConfigError

logger = logging.getLogger(__name__)

PAD = '<PAD>'
UNK = '<UNK>'
VR = '<VR>'
NONE = 'NONE'

PAD_INDEX = 0
UNK_INDEX = 1


class Vocab:
    """文字列 ⇄ ID。0 はパディング、1 は未知語"""

    def __init__(self, items: Iterable[str] = (), singletons: Iterable[str] = ()):
        self.items: Tuple[str, ...] = (PAD, UNK) + tuple(item for item in items if item not in (PAD, UNK))
        self._index: Dict[str, int] = {item: i for i, item in enumerate(self.items)}
        self.singletons = frozenset(self._index[item] for item in singletons if item in self._index)

    def __len__(self):
        return len(self.items)

    def __contains__(self, item: str) -> bool:
        return item in self._index

    def index(self, item: Optional[str]) -> int:
        if item is None:
            return UNK_INDEX
        return self._index.get(item, UNK_INDEX)

    @classmethod
    def from_counts(cls, counts: Counter, extra: Sequence[str] = ()) -> 'Vocab':
        """頻度降順（同数は文字列順）。頻度1の語は学習時の UNK 置換対象"""
        ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
        items = list(extra) + [item for item, _ in ordered if item not in extra]
        return cls(items, singletons=[item for item, count in ordered if count == 1])

    def to_list(self):
        return list(self.items[2:])


@dataclass(frozen=True)
class LabelVocab:
    """
    ラベル空間: [NONE, 役割..., 語義...]
    役割区画（NONE を含む）と語義区画は添字で重ならない。
    """

    roles: Tuple[str, ...]
    senses: Tuple[str, ...] = ()

    def __post_init__(self):
        if NONE in self.roles or NONE in self.senses:
            raise ConfigError(f"label {NONE!r} is reserved")
        if len(set(self.roles)) != len(self.roles) or len(set(self.senses)) != len(self.senses):
            raise ConfigError("duplicate labels in vocabulary")

    @property
    def labels(self) -> Tuple[str, ...]:
        return (NONE,) + self.roles + self.senses

    def __len__(self):
        return 1 + len(self.roles) + len(self.senses)

    @property
    def role_slice(self) -> slice:
        return slice(0, 1 + len(self.roles))

    @property
    def sense_slice(self) -> slice:
        return slice(1 + len(self.roles), len(self))

    def role_index(self, role: Optional[str]) -> Optional[int]:
        """役割区画内の添字。None は NONE（0）、未知の役割は None"""
        if role is None:
            return 0
        try:
            return 1 + self.roles.index(role)
        except ValueError:
            return None

    def sense_index(self, sense: Optional[str]) -> Optional[int]:
        """語義区画内の添字（未知なら None）"""
        if sense is None or sense not in self.senses:
            return None
        return self.senses.index(sense)

    def role_label(self, index: int) -> Optional[str]:
        return None if index == 0 else self.roles[index - 1]

    def sense_label(self, index: int) -> str:
        return self.senses[index]
