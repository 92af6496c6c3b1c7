"""
固定アーキテクチャ用の順伝播・逆伝播
埋め込み → 多層 BiLSTM → ReLU 付きアフィン → 双アフィン → softmax 交差エントロピー

系列は (T, B, D) に詰め、mask (T, B) で実トークンを示す。パディングは系列末尾のみ。
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from srl_toolkit.exceptions import ConfigError
from .tensor import DTYPE, check_finite

logger = logging.getLogger(__name__)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh 形式は大きな |x| でも溢れない
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def dropout_mask(rng: Optional[np.random.Generator], shape, keep: float) -> Optional[np.ndarray]:
    """
    逆ドロップアウトのマスク（保持した要素は 1/keep 倍）
    rng が None（評価時）か keep >= 1 なら None を返し、恒等写像になる。
    """
    if rng is None or keep >= 1.0:
        return None
    if not 0.0 < keep <= 1.0:
        raise ConfigError(f"keep probability {keep} outside (0, 1]")
    return (rng.random(shape) < keep).astype(DTYPE) / keep


def embedding_backward(grad_table: np.ndarray, ids: np.ndarray, d_out: np.ndarray) -> None:
    """同じIDの勾配は加算される"""
    np.add.at(grad_table, ids.reshape(-1), d_out.reshape(-1, grad_table.shape[1]))


def reverse_padded(x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """各系列の実長部分だけを反転（パディング位置はそのまま）。自身が逆写像"""
    steps = x.shape[0]
    t = np.arange(steps)[:, None]
    index = np.where(t < lengths[None, :], lengths[None, :] - 1 - t, t)
    if x.ndim == 3:
        index = np.broadcast_to(index[:, :, None], x.shape)
    return np.take_along_axis(x, index, axis=0)


@dataclass
class LSTMCache:
    weights: np.ndarray
    mask: np.ndarray
    rec_mask: Optional[np.ndarray]
    hin: np.ndarray
    gates: np.ndarray
    cells: np.ndarray
    cells_tanh: np.ndarray


def lstm_forward(
    x: np.ndarray,
    mask: np.ndarray,
    weights: np.ndarray,
    rec_mask: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, LSTMCache]:
    """
    一方向 LSTM

    Args:
        x: 入力 (T, B, D)
        mask: 実トークンなら 1 (T, B)
        weights: (1 + D + H, 4H)。lstm_weights() 参照
        rec_mask: 前時刻の隠れ状態に掛けるドロップアウトマスク (B, H)、全時刻で共有

    Returns:
        (隠れ状態 (T, B, H), 逆伝播用キャッシュ)
    """
    steps, batch, input_dim = x.shape
    hidden = weights.shape[1] // 4
    if weights.shape[0] != 1 + input_dim + hidden:
        raise ConfigError(f"LSTM weights {weights.shape} do not fit input dim {input_dim}")
    m = mask.astype(DTYPE)[:, :, None]

    hin = np.zeros((steps, batch, 1 + input_dim + hidden), dtype=DTYPE)
    gates = np.zeros((steps, batch, 4 * hidden), dtype=DTYPE)
    cells = np.zeros((steps, batch, hidden), dtype=DTYPE)
    cells_tanh = np.zeros((steps, batch, hidden), dtype=DTYPE)
    hout = np.zeros((steps, batch, hidden), dtype=DTYPE)

    prev_h = np.zeros((batch, hidden), dtype=DTYPE)
    prev_c = np.zeros((batch, hidden), dtype=DTYPE)
    for t in range(steps):
        hin[t, :, 0] = 1.0
        hin[t, :, 1:input_dim + 1] = x[t]
        hin[t, :, input_dim + 1:] = prev_h if rec_mask is None else prev_h * rec_mask
        raw = hin[t] @ weights
        gates[t, :, :hidden] = np.tanh(raw[:, :hidden])
        gates[t, :, hidden:] = sigmoid(raw[:, hidden:])
        g, i, f, o = np.split(gates[t], 4, axis=1)
        cells[t] = m[t] * (i * g + f * prev_c)
        cells_tanh[t] = np.tanh(cells[t])
        hout[t] = m[t] * o * cells_tanh[t]
        prev_h, prev_c = hout[t], cells[t]

    check_finite('lstm hidden states', hout)
    return hout, LSTMCache(weights, mask, rec_mask, hin, gates, cells, cells_tanh)


def lstm_backward(d_hout: np.ndarray, cache: LSTMCache) -> Tuple[np.ndarray, np.ndarray]:
    """lstm_forward の逆伝播。(dx, dweights) を返す"""
    weights, gates, cells, cells_tanh = cache.weights, cache.gates, cache.cells, cache.cells_tanh
    steps, batch, hidden = cells.shape
    input_dim = weights.shape[0] - 1 - hidden
    m = cache.mask.astype(DTYPE)[:, :, None]

    d_weights = np.zeros_like(weights)
    dx = np.zeros((steps, batch, input_dim), dtype=DTYPE)
    d_gates = np.zeros((batch, 4 * hidden), dtype=DTYPE)
    dh_next = np.zeros((batch, hidden), dtype=DTYPE)
    dc_next = np.zeros((batch, hidden), dtype=DTYPE)

    for t in reversed(range(steps)):
        g, i, f, o = np.split(gates[t], 4, axis=1)
        prev_c = cells[t - 1] if t > 0 else np.zeros((batch, hidden), dtype=DTYPE)
        dh = (d_hout[t] + dh_next) * m[t]
        d_cell = dh * o * (1.0 - cells_tanh[t] ** 2) + dc_next
        d_raw_cell = d_cell * m[t]

        d_gates[:, :hidden] = d_raw_cell * i * (1.0 - g ** 2)
        d_gates[:, hidden:2 * hidden] = d_raw_cell * g * i * (1.0 - i)
        d_gates[:, 2 * hidden:3 * hidden] = d_raw_cell * prev_c * f * (1.0 - f)
        d_gates[:, 3 * hidden:] = dh * cells_tanh[t] * o * (1.0 - o)
        dc_next = d_raw_cell * f

        d_weights += cache.hin[t].T @ d_gates
        d_hin = d_gates @ weights.T
        dx[t] = d_hin[:, 1:input_dim + 1]
        dh_next = d_hin[:, input_dim + 1:]
        if cache.rec_mask is not None:
            dh_next = dh_next * cache.rec_mask
    return dx, d_weights


@dataclass
class BiLSTMCache:
    mask: np.ndarray
    lengths: np.ndarray
    input_masks: List[Optional[np.ndarray]] = field(default_factory=list)
    forward: List[LSTMCache] = field(default_factory=list)
    backward: List[LSTMCache] = field(default_factory=list)


def bilstm_forward(
    x: np.ndarray,
    mask: np.ndarray,
    layers: Sequence[Tuple[np.ndarray, np.ndarray]],
    keep: float = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, BiLSTMCache]:
    """
    多層 BiLSTM。各トークンで前向き・後ろ向きの隠れ状態を連結する

    ドロップアウトは学習時（rng 指定時）のみ、各層の入力と再帰結合に
    系列ごとのマスク（時刻間で共有）として掛ける。

    Args:
        x: (T, B, D)。(T, D) なら B=1 として扱う
        mask: (T, B) または (T,)
        layers: 層ごとの (前向き重み, 後ろ向き重み)
        keep: 保持確率
        rng: None なら評価モード
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = x[:, None, :]
        mask = np.asarray(mask)[:, None]
    if x.shape[0] == 0:
        raise ConfigError("empty sequence")
    mask = np.asarray(mask, dtype=bool)
    lengths = mask.sum(axis=0)
    cache = BiLSTMCache(mask=mask, lengths=lengths)

    hidden_states = x
    for fw_weights, bw_weights in layers:
        batch, width = hidden_states.shape[1], hidden_states.shape[2]
        hidden = fw_weights.shape[1] // 4
        input_mask = dropout_mask(rng, (batch, width), keep)
        layer_input = hidden_states if input_mask is None else hidden_states * input_mask[None]
        fw_out, fw_cache = lstm_forward(
            layer_input, mask, fw_weights, dropout_mask(rng, (batch, hidden), keep),
        )
        bw_rev, bw_cache = lstm_forward(
            reverse_padded(layer_input, lengths), mask, bw_weights, dropout_mask(rng, (batch, hidden), keep),
        )
        hidden_states = np.concatenate([fw_out, reverse_padded(bw_rev, lengths)], axis=2)
        cache.input_masks.append(input_mask)
        cache.forward.append(fw_cache)
        cache.backward.append(bw_cache)

    if squeeze:
        hidden_states = hidden_states[:, 0, :]
    return hidden_states, cache


def bilstm_backward(d_hidden: np.ndarray, cache: BiLSTMCache) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    """bilstm_forward の逆伝播。(入力への勾配, 層ごとの (d前向き, d後ろ向き)) を返す"""
    squeeze = d_hidden.ndim == 2
    if squeeze:
        d_hidden = d_hidden[:, None, :]
    grads = []
    for layer in reversed(range(len(cache.forward))):
        hidden = cache.forward[layer].cells.shape[2]
        d_fw = d_hidden[:, :, :hidden]
        d_bw = reverse_padded(d_hidden[:, :, hidden:], cache.lengths)
        dx_fw, dw_fw = lstm_backward(d_fw, cache.forward[layer])
        dx_bw, dw_bw = lstm_backward(d_bw, cache.backward[layer])
        d_hidden = dx_fw + reverse_padded(dx_bw, cache.lengths)
        if cache.input_masks[layer] is not None:
            d_hidden = d_hidden * cache.input_masks[layer][None]
        grads.append((dw_fw, dw_bw))
    grads.reverse()
    if squeeze:
        d_hidden = d_hidden[:, 0, :]
    return d_hidden, grads


@dataclass
class AffineCache:
    x: np.ndarray
    pre: np.ndarray
    drop: Optional[np.ndarray]


def affine_relu_forward(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    keep: float = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, AffineCache]:
    """relu(x W + b) にドロップアウト"""
    pre = x @ weights + bias
    out = np.maximum(pre, 0.0)
    drop = dropout_mask(rng, out.shape, keep)
    if drop is not None:
        out = out * drop
    return out, AffineCache(x, pre, drop)


def affine_relu_backward(d_out: np.ndarray, cache: AffineCache, weights: np.ndarray):
    """(dx, dW, db)"""
    if cache.drop is not None:
        d_out = d_out * cache.drop
    d_pre = d_out * (cache.pre > 0)
    dx = d_pre @ weights.T
    d_weights = cache.x.reshape(-1, cache.x.shape[-1]).T @ d_pre.reshape(-1, d_pre.shape[-1])
    d_bias = d_pre.reshape(-1, d_pre.shape[-1]).sum(axis=0)
    return dx, d_weights, d_bias


def biaffine_forward(h_p: np.ndarray, h_a: np.ndarray, w1: np.ndarray, w2: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    Φ_r(p, a) = h_pᵀ W1_r h_a + W2_r · (h_p ⊕ h_a) + b_r

    Args:
        h_p: 述語表現 (d,)
        h_a: 候補表現 (C, d) または (d,)
        w1: (L, d, d)
        w2: (L, 2d)
        bias: (L,)

    Returns:
        (C, L)。h_a が1次元なら (L,)
    """
    single = h_a.ndim == 1
    h_a = np.atleast_2d(h_a)
    dim = h_p.shape[0]
    if w1.shape[1:] != (dim, h_a.shape[1]) or w2.shape[1] != dim + h_a.shape[1] or bias.shape[0] != w1.shape[0]:
        raise ConfigError(
            f"biaffine shapes do not match: h_p={h_p.shape} h_a={h_a.shape} "
            f"W1={w1.shape} W2={w2.shape} b={bias.shape}"
        )
    bilinear = np.einsum('i,rij,cj->cr', h_p, w1, h_a)
    linear = (w2[:, :dim] @ h_p)[None, :] + h_a @ w2[:, dim:].T
    scores = bilinear + linear + bias[None, :]
    return scores[0] if single else scores


def biaffine_backward(d_scores: np.ndarray, h_p: np.ndarray, h_a: np.ndarray, w1: np.ndarray, w2: np.ndarray):
    """(dh_p, dh_a, dW1, dW2, db)"""
    single = h_a.ndim == 1
    h_a = np.atleast_2d(h_a)
    d_scores = np.atleast_2d(d_scores)
    dim = h_p.shape[0]
    label_sums = d_scores.sum(axis=0)

    d_w1 = np.einsum('cr,i,cj->rij', d_scores, h_p, h_a)
    d_w2 = np.concatenate([np.outer(label_sums, h_p), d_scores.T @ h_a], axis=1)
    d_hp = np.einsum('cr,rij,cj->i', d_scores, w1, h_a) + label_sums @ w2[:, :dim]
    d_ha = np.einsum('cr,rij,i->cj', d_scores, w1, h_p) + d_scores @ w2[:, dim:]
    return d_hp, (d_ha[0] if single else d_ha), d_w1, d_w2, label_sums


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_xent(scores: np.ndarray, gold) -> Tuple[float, np.ndarray]:
    """
    -log softmax(scores)[gold] と scores への勾配（softmax - one-hot）

    scores が (C, L) なら gold は長さ C の配列で、損失は行の和。
    """
    single = scores.ndim == 1
    scores2 = np.atleast_2d(scores)
    gold = np.atleast_1d(np.asarray(gold, dtype=int))
    if scores2.shape[-1] < 1:
        raise ConfigError("softmax over zero labels")
    rows = np.arange(scores2.shape[0])
    shifted = scores2 - scores2.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.sum(log_norm - shifted[rows, gold]))
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, gold] -= 1.0
    return loss, (grad[0] if single else grad)
