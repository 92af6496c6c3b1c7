"""
試験・例示用に Sentence を手早く組み立てるヘルパー
"""
from typing import Dict, Optional, Sequence, Tuple

from .conll import Sentence, Token

# (語義, {項ID: 役割})
Frame = Tuple[Optional[str], Dict[int, str]]


def make_sentence(
    forms: Sequence[str],
    heads: Sequence[int],
    frames: Optional[Dict[int, Frame]] = None,
    pheads: Optional[Sequence[int]] = None,
    pos: Optional[Sequence[str]] = None,
    lemmas: Optional[Sequence[str]] = None,
) -> Sentence:
    """
    Args:
        forms: 語形
        heads: gold 主辞（0 は根）
        frames: {述語ID: (語義, {項ID: 役割})}
        pheads: 予測主辞（省略時は heads と同じ）
    """
    frames = frames or {}
    pheads = list(pheads) if pheads is not None else list(heads)
    predicates = sorted(frames)
    tokens = []
    for index, form in enumerate(forms, start=1):
        lemma = lemmas[index - 1] if lemmas else form.lower()
        tag = pos[index - 1] if pos else 'NN'
        tokens.append(Token(
            id=index,
            form=form,
            lemma=lemma,
            plemma=lemma,
            pos=tag,
            ppos=tag,
            head=heads[index - 1],
            phead=pheads[index - 1],
            deprel='ROOT' if heads[index - 1] == 0 else 'DEP',
            pdeprel='ROOT' if pheads[index - 1] == 0 else 'DEP',
            fillpred=index in frames,
            pred_sense=frames[index][0] if index in frames else None,
            apreds=tuple(frames[pred][1].get(index) for pred in predicates),
        ))
    return Sentence(tuple(tokens))


def keep_your_heart() -> Sentence:
    """'Keep your heart and mind open'（Keep が根、heart と open が Keep の子）"""
    return make_sentence(
        ['Keep', 'your', 'heart', 'and', 'mind', 'open'],
        [0, 3, 1, 3, 3, 1],
        frames={1: ('keep.01', {3: 'A1', 6: 'A2'})},
        pos=['VB', 'PRP', 'NN', 'CC', 'NN', 'JJ'],
    )
