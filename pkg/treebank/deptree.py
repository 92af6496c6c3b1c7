"""
依存構造木と述語-項の距離タプル
人工根 0 は深さ 0、実トークンは深さ 1 以上。複数の根は人工根を共有する。
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Sequence, Tuple

from srl_toolkit.exceptions import ConfigError, CycleError, HeadRangeError, MultipleRootsError

logger = logging.getLogger(__name__)

ROOT = 0
SYNTAX_SOURCES = ('gold', 'pred')


class DistanceTuple(NamedTuple):
    """最近共通祖先までのホップ数 (d_p, d_a)"""

    d_p: int
    d_a: int

    def __str__(self):
        return f"({self.d_p},{self.d_a})"


@dataclass(frozen=True)
class DepTree:
    """親・子・深さの表（構築後は不変）"""

    parent: Dict[int, int]
    children: Dict[int, Tuple[int, ...]]
    depth: Dict[int, int]

    def __len__(self):
        return len(self.parent)

    @property
    def roots(self) -> Tuple[int, ...]:
        return self.children.get(ROOT, ())

    def ancestors(self, node: int) -> List[int]:
        """node 自身から人工根 0 までの祖先列"""
        chain = [node]
        while chain[-1] != ROOT:
            chain.append(self.parent[chain[-1]])
        return chain

    def height(self) -> int:
        return max(self.depth.values(), default=0)


def tree_from_heads(heads: Sequence[int], allow_multi_root: bool = True) -> DepTree:
    """
    主辞列（heads[i] がトークン i+1 の親）から木を構築

    Args:
        heads: 0 を人工根とする親ID列
        allow_multi_root: False のとき根が複数なら MultipleRootsError

    Returns:
        検証済みの DepTree
    """
    n = len(heads)
    parent = {}
    for index, head in enumerate(heads, start=1):
        if not 0 <= head <= n:
            raise HeadRangeError(f"head {head} of token {index} outside [0, {n}]", node=index)
        parent[index] = head

    children: Dict[int, List[int]] = {ROOT: []}
    for node in range(1, n + 1):
        children.setdefault(node, [])
    for node in range(1, n + 1):
        children[parent[node]].append(node)

    roots = children[ROOT]
    if len(roots) > 1:
        if not allow_multi_root:
            raise MultipleRootsError(f"{len(roots)} tokens attach to the root", roots=roots)
        logger.debug(f"event=multi_root roots={roots}")

    # 人工根からの幅優先で深さを付与。到達しないノードは循環上にある
    depth = {ROOT: 0}
    frontier = [ROOT]
    while frontier:
        next_frontier = []
        for node in frontier:
            for child in children[node]:
                depth[child] = depth[node] + 1
                next_frontier.append(child)
        frontier = next_frontier

    if len(depth) != n + 1:
        unreached = min(node for node in range(1, n + 1) if node not in depth)
        # 循環上のノードを特定する
        seen = set()
        node = unreached
        while node not in seen:
            seen.add(node)
            node = parent[node]
        raise CycleError(f"cycle through token {node}", node=node)

    return DepTree(
        parent=parent,
        children={node: tuple(kids) for node, kids in children.items()},
        depth=depth,
    )


def build_tree(sentence, syntax_source: str = 'gold', allow_multi_root: bool = True) -> DepTree:
    """
    文の HEAD（gold）または PHEAD（pred）列から木を構築

    Args:
        sentence: treebank.conll.Sentence
        syntax_source: 'gold' | 'pred'
    """
    if syntax_source not in SYNTAX_SOURCES:
        raise ConfigError(f"unknown syntax source {syntax_source!r}")
    heads = [token.head_for(syntax_source) for token in sentence.tokens]
    return tree_from_heads(heads, allow_multi_root=allow_multi_root)


def distance_tuple(tree: DepTree, p: int, a: int) -> DistanceTuple:
    """
    p と a の最近共通祖先までの距離（深さを揃えてから二点同時に遡る）

    Args:
        tree: 依存構造木
        p: 述語トークンID
        a: 候補項トークンID
    """
    x, y = p, a
    d_p = d_a = 0
    depth = tree.depth
    parent = tree.parent
    while depth[x] > depth[y]:
        x = parent[x]
        d_p += 1
    while depth[y] > depth[x]:
        y = parent[y]
        d_a += 1
    while x != y:
        x = parent[x]
        y = parent[y]
        d_p += 1
        d_a += 1
    return DistanceTuple(d_p, d_a)


def all_tuples(tree: DepTree, p: int) -> Dict[int, DistanceTuple]:
    """述語 p から全トークンへの距離タプル"""
    return {a: distance_tuple(tree, p, a) for a in range(1, len(tree) + 1)}
