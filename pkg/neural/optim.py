"""
Adam 最適化
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from srl_toolkit.exceptions import NumericError
from .tensor import ModelParams, check_finite

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """一次・二次モーメントとステップ数"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: ModelParams,
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float = 2e-3,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> Tuple[ModelParams, AdamState]:
    """
    バイアス補正付き Adam の1ステップ（パラメータはその場で更新）

    Args:
        params: 更新対象（frozen の名前は飛ばす）
        grads: 名前ごとの勾配。無い名前は更新しない
        state: モーメント（初回は空でよい）
    """
    beta1, beta2 = betas
    for name, grad in grads.items():
        check_finite(f"gradient {name}", grad, step=state.t + 1)

    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for name, value in params.trainable():
        grad = grads.get(name)
        if grad is None:
            continue
        if grad.shape != value.shape:
            raise NumericError(f"gradient shape {grad.shape} != parameter shape {value.shape}", tensor=name)
        m = state.m.setdefault(name, np.zeros_like(value))
        v = state.v.setdefault(name, np.zeros_like(value))
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        value -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return params, state


class Adam:
    """ハイパーパラメータと状態をまとめたラッパー"""

    def __init__(self, lr: float = 2e-3, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def step(self, params: ModelParams, grads: Dict[str, np.ndarray]) -> ModelParams:
        adam_step(params, grads, self.state, self.lr, self.betas, self.eps)
        return params
