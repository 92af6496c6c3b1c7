"""
中心差分による勾配検査
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .tensor import ModelParams

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DENOMINATOR_FLOOR = 1e-4

Closure = Callable[[], Tuple[float, Dict[str, np.ndarray]]]


@dataclass(frozen=True)
class GradCheckResult:
    """最悪の相対誤差とその位置"""

    max_rel_error: float
    name: Optional[str]
    index: Optional[Tuple[int, ...]]
    analytic: float
    numeric: float
    checked: int

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error < tolerance


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), DENOMINATOR_FLOOR)


def grad_check(
    closure: Closure,
    params: ModelParams,
    samples: int = 50,
    rng: Optional[np.random.Generator] = None,
    step: float = DEFAULT_STEP,
    names=None,
) -> GradCheckResult:
    """
    無作為に選んだ座標で解析勾配と中心差分を比べる

    Args:
        closure: params を読んで (損失, 勾配表) を返す決定的な関数（ドロップアウト無効）
        params: 検査対象。座標を一時的に書き換えて元に戻す
        samples: テンソルごとの検査座標数（要素数が少なければ全座標）
        names: 検査するテンソル名（既定は frozen 以外の全て）
    """
    rng = rng or np.random.default_rng(0)
    _, grads = closure()
    grads = {name: np.array(grad, copy=True) for name, grad in grads.items()}

    worst = GradCheckResult(0.0, None, None, 0.0, 0.0, 0)
    checked = 0
    for name in names or [name for name, _ in params.trainable()]:
        value = params[name]
        if value.size == 0:
            continue
        if value.size <= samples:
            flat_indices = np.arange(value.size)
        else:
            flat_indices = rng.choice(value.size, size=samples, replace=False)
        analytic_grad = grads.get(name, np.zeros_like(value))
        for flat in flat_indices:
            index = np.unravel_index(int(flat), value.shape)
            original = value[index]
            value[index] = original + step
            plus, _ = closure()
            value[index] = original - step
            minus, _ = closure()
            value[index] = original
            numeric = (plus - minus) / (2.0 * step)
            analytic = float(analytic_grad[index])
            error = relative_error(analytic, numeric)
            checked += 1
            if error > worst.max_rel_error:
                worst = GradCheckResult(error, name, tuple(int(i) for i in index), analytic, numeric, 0)

    result = GradCheckResult(worst.max_rel_error, worst.name, worst.index, worst.analytic, worst.numeric, checked)
    logger.info(
        f"event=grad_check checked={checked} max_rel_error={result.max_rel_error:.3e} "
        f"worst={result.name} index={','.join(map(str, result.index or ()))}"
    )
    return result
