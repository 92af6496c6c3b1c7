"""
文単位の並列処理ヘルパー
結果は常に入力順で返す（決定的なマージ）
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    fn を items に適用し、入力順の結果リストを返す

    Args:
        fn: 純粋関数
        items: 入力
        threads: スレッド数（1以下なら逐次実行）

    Returns:
        入力順の結果
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))
