"""
パラメータ表と数値ユーティリティ
全てのテンソルは 64bit 浮動小数点の numpy 配列として扱う。
"""
import logging
from collections import OrderedDict
from typing import Dict, Iterable, Iterator, Optional, Tuple

import numpy as np

from srl_toolkit.exceptions import NumericError

logger = logging.getLogger(__name__)

DTYPE = np.float64


def check_finite(name: str, value, **context) -> None:
    """NaN/Inf を含めば NumericError"""
    array = np.asarray(value)
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericError(f"non-finite values in {name}", count=bad, **context)


class ModelParams:
    """
    名前付きテンソルの順序付き表
    frozen に含まれる名前は最適化で更新しない（事前学習ベクトルなど）。
    """

    def __init__(self, tensors: Optional[Dict[str, np.ndarray]] = None, frozen: Iterable[str] = ()):
        self.tensors: 'OrderedDict[str, np.ndarray]' = OrderedDict()
        for name, value in (tensors or {}).items():
            self[name] = value
        self.frozen = set(frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value) -> None:
        self.tensors[name] = np.asarray(value, dtype=DTYPE)

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def trainable(self):
        return [(name, value) for name, value in self.tensors.items() if name not in self.frozen]

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: value.shape for name, value in self.tensors.items()}

    def zeros_like(self) -> Dict[str, np.ndarray]:
        """勾配用のゼロ表"""
        return {name: np.zeros_like(value) for name, value in self.tensors.items()}

    def copy(self) -> 'ModelParams':
        return ModelParams({name: value.copy() for name, value in self.tensors.items()}, self.frozen)

    def size(self) -> int:
        return int(sum(value.size for value in self.tensors.values()))


def uniform(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    """一様分布 U(-scale, scale)。埋め込み表の初期化に使う"""
    return rng.uniform(-scale, scale, size=shape).astype(DTYPE)


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out)).astype(DTYPE)


def lstm_weights(rng: np.random.Generator, input_dim: int, hidden: int, forget_bias: float = 1.0) -> np.ndarray:
    """
    LSTM の結合重み (1 + input_dim + hidden, 4 * hidden)
    先頭行がバイアス。列の並びは [候補 g, 入力ゲート i, 忘却ゲート f, 出力ゲート o]。
    """
    weights = np.zeros((1 + input_dim + hidden, 4 * hidden), dtype=DTYPE)
    weights[1:] = xavier_uniform(rng, input_dim + hidden, 4 * hidden)
    weights[0, 2 * hidden:3 * hidden] = forget_bias
    return weights
