import math
import os
import struct
import tempfile

import numpy as np
from django.test import SimpleTestCase

from srl_toolkit.exceptions import CheckpointError, ConfigError, NumericError
from .checkpoint import FORMAT_VERSION, MAGIC, dumps, load_checkpoint, loads, save_checkpoint
from .gradcheck import grad_check, relative_error
from .layers import (
    affine_relu_backward,
    affine_relu_forward,
    biaffine_backward,
    biaffine_forward,
    bilstm_backward,
    bilstm_forward,
    dropout_mask,
    embedding_backward,
    lstm_forward,
    reverse_padded,
    softmax,
    softmax_xent,
)
from .optim import Adam, AdamState, adam_step
from .tensor import ModelParams, check_finite, lstm_weights


def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def _naive_biaffine(h_p, h_a, w1, w2, bias):
    """三重ループによる双アフィン"""
    n_labels, dim = w1.shape[0], h_p.shape[0]
    scores = np.zeros((h_a.shape[0], n_labels))
    for c in range(h_a.shape[0]):
        joined = list(h_p) + list(h_a[c])
        for r in range(n_labels):
            total = 0.0
            for i in range(dim):
                for j in range(h_a.shape[1]):
                    total += h_p[i] * w1[r, i, j] * h_a[c, j]
            for k, value in enumerate(joined):
                total += w2[r, k] * value
            scores[c, r] = total + bias[r]
    return scores


class LSTMTestCase(SimpleTestCase):
    """LSTM / BiLSTM"""

    def test_zero_weights_give_zero_states(self):
        x = np.ones((4, 2, 3))
        out, _ = lstm_forward(x, np.ones((4, 2)), np.zeros((1 + 3 + 5, 20)))
        np.testing.assert_array_equal(out, np.zeros((4, 2, 5)))

    def test_hand_stepped_cell(self):
        # 行: バイアス, 入力, 再帰。列: g, i, f, o
        weights = np.array([
            [0.1, -0.2, 1.0, 0.3],
            [0.5, 0.4, -0.3, 0.2],
            [-0.6, 0.7, 0.8, -0.1],
        ])
        inputs = [0.5, -1.5]
        out, _ = lstm_forward(np.array(inputs).reshape(2, 1, 1), np.ones((2, 1)), weights)

        h = c = 0.0
        expected = []
        for x in inputs:
            raw = [weights[0, k] + weights[1, k] * x + weights[2, k] * h for k in range(4)]
            g = math.tanh(raw[0])
            i, f, o = _sigmoid(raw[1]), _sigmoid(raw[2]), _sigmoid(raw[3])
            c = i * g + f * c
            h = o * math.tanh(c)
            expected.append(h)
        np.testing.assert_allclose(out[:, 0, 0], expected, rtol=1e-12)

    def test_forget_bias_initialisation(self):
        weights = lstm_weights(np.random.default_rng(0), 3, 4, forget_bias=1.0)
        self.assertEqual(weights.shape, (8, 16))
        np.testing.assert_array_equal(weights[0, 8:12], np.ones(4))
        np.testing.assert_array_equal(weights[0, :8], np.zeros(8))

    def test_weight_shape_mismatch(self):
        with self.assertRaises(ConfigError):
            lstm_forward(np.ones((2, 1, 3)), np.ones((2, 1)), np.zeros((5, 8)))

    def test_reversal_symmetry(self):
        rng = np.random.default_rng(1)
        fw, bw = lstm_weights(rng, 3, 4), lstm_weights(rng, 3, 4)
        x = rng.normal(size=(6, 3))
        mask = np.ones(6)
        out, _ = bilstm_forward(x, mask, [(fw, bw)])
        swapped, _ = bilstm_forward(x[::-1].copy(), mask, [(bw, fw)])
        np.testing.assert_allclose(swapped[:, :4], out[::-1, 4:], atol=1e-12)
        np.testing.assert_allclose(swapped[:, 4:], out[::-1, :4], atol=1e-12)

    def test_padding_does_not_leak(self):
        rng = np.random.default_rng(2)
        layers = [(lstm_weights(rng, 3, 4), lstm_weights(rng, 3, 4)),
                  (lstm_weights(rng, 8, 4), lstm_weights(rng, 8, 4))]
        long = rng.normal(size=(5, 3))
        short = rng.normal(size=(3, 3))
        batch = np.zeros((5, 2, 3))
        batch[:, 0] = long
        batch[:3, 1] = short
        mask = np.zeros((5, 2))
        mask[:, 0] = 1
        mask[:3, 1] = 1
        out, _ = bilstm_forward(batch, mask, layers)
        alone, _ = bilstm_forward(short, np.ones(3), layers)
        np.testing.assert_allclose(out[:3, 1], alone, atol=1e-12)
        np.testing.assert_array_equal(out[3:, 1], np.zeros((2, 8)))

    def test_reverse_padded_is_an_involution(self):
        x = np.arange(12, dtype=float).reshape(4, 3)
        lengths = np.array([4, 2, 0])
        reversed_x = reverse_padded(x, lengths)
        np.testing.assert_array_equal(reversed_x[:, 0], [9, 6, 3, 0])
        np.testing.assert_array_equal(reversed_x[:, 1], [4, 1, 7, 10])
        np.testing.assert_array_equal(reverse_padded(reversed_x, lengths), x)

    def test_bilstm_gradients(self):
        rng = np.random.default_rng(3)
        params = ModelParams({
            'x': rng.normal(size=(4, 2, 3)),
            'l0.fw': lstm_weights(rng, 3, 3), 'l0.bw': lstm_weights(rng, 3, 3),
            'l1.fw': lstm_weights(rng, 6, 3), 'l1.bw': lstm_weights(rng, 6, 3),
        })
        mask = np.array([[1, 1], [1, 1], [1, 1], [1, 0]])
        target = rng.normal(size=(4, 2, 6))

        def closure():
            layers = [(params['l0.fw'], params['l0.bw']), (params['l1.fw'], params['l1.bw'])]
            out, cache = bilstm_forward(params['x'], mask, layers)
            dx, grads = bilstm_backward(target, cache)
            return float(np.sum(out * target)), {
                'x': dx, 'l0.fw': grads[0][0], 'l0.bw': grads[0][1], 'l1.fw': grads[1][0], 'l1.bw': grads[1][1],
            }

        result = grad_check(closure, params, samples=30, rng=rng)
        self.assertLess(result.max_rel_error, 1e-6)

    def test_dropout_is_off_in_eval_mode(self):
        self.assertIsNone(dropout_mask(None, (2, 2), 0.5))
        self.assertIsNone(dropout_mask(np.random.default_rng(0), (2, 2), 1.0))
        mask = dropout_mask(np.random.default_rng(0), (1000,), 0.8)
        self.assertTrue(set(np.unique(mask)) <= {0.0, 1.25})
        with self.assertRaises(ConfigError):
            dropout_mask(np.random.default_rng(0), (2,), 0.0)

    def test_training_mode_is_seeded(self):
        rng = np.random.default_rng(4)
        layers = [(lstm_weights(rng, 3, 4), lstm_weights(rng, 3, 4))]
        x = rng.normal(size=(5, 3))
        first, _ = bilstm_forward(x, np.ones(5), layers, keep=0.5, rng=np.random.default_rng(9))
        second, _ = bilstm_forward(x, np.ones(5), layers, keep=0.5, rng=np.random.default_rng(9))
        np.testing.assert_array_equal(first, second)


class BiaffineTestCase(SimpleTestCase):
    """双アフィンと ReLU ヘッド"""

    def test_hand_arithmetic(self):
        scores = biaffine_forward(
            np.array([1.0]), np.array([2.0]), np.array([[[3.0]]]), np.array([[0.5, 0.25]]), np.array([0.1]),
        )
        self.assertEqual(scores.shape, (1,))
        self.assertAlmostEqual(float(scores[0]), 7.1, places=12)

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(5)
        h_p, h_a = rng.normal(size=4), rng.normal(size=(3, 4))
        w1, w2, bias = rng.normal(size=(5, 4, 4)), rng.normal(size=(5, 8)), rng.normal(size=5)
        np.testing.assert_allclose(
            biaffine_forward(h_p, h_a, w1, w2, bias), _naive_biaffine(h_p, h_a, w1, w2, bias), rtol=1e-12, atol=1e-12,
        )

    def test_degenerate_forms(self):
        rng = np.random.default_rng(6)
        h_p, h_a = rng.normal(size=3), rng.normal(size=(2, 3))
        w1, w2 = rng.normal(size=(2, 3, 3)), rng.normal(size=(2, 6))
        bilinear = biaffine_forward(h_p, h_a, w1, np.zeros((2, 6)), np.zeros(2))
        np.testing.assert_allclose(bilinear, np.einsum('i,rij,cj->cr', h_p, w1, h_a), atol=1e-12)
        linear = biaffine_forward(h_p, h_a, np.zeros((2, 3, 3)), w2, np.zeros(2))
        joined = np.hstack([np.tile(h_p, (2, 1)), h_a])
        np.testing.assert_allclose(linear, joined @ w2.T, atol=1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(ConfigError):
            biaffine_forward(np.ones(3), np.ones((2, 3)), np.ones((2, 3, 3)), np.ones((2, 5)), np.ones(2))

    def test_head_and_biaffine_gradients(self):
        rng = np.random.default_rng(7)
        params = ModelParams({
            'x_p': rng.normal(size=(1, 5)), 'x_a': rng.normal(size=(3, 5)),
            'W': rng.normal(size=(5, 4)), 'b': rng.normal(size=4) + 0.5,
            'W1': rng.normal(size=(3, 4, 4)), 'W2': rng.normal(size=(3, 8)), 'bias': rng.normal(size=3),
        })
        gold = np.array([0, 2, 1])

        def closure():
            h_p, pred_cache = affine_relu_forward(params['x_p'], params['W'], params['b'])
            h_a, arg_cache = affine_relu_forward(params['x_a'], params['W'], params['b'])
            scores = biaffine_forward(h_p[0], h_a, params['W1'], params['W2'], params['bias'])
            loss, d_scores = softmax_xent(scores, gold)
            d_hp, d_ha, d_w1, d_w2, d_b = biaffine_backward(d_scores, h_p[0], h_a, params['W1'], params['W2'])
            dx_p, dw_p, db_p = affine_relu_backward(d_hp[None, :], pred_cache, params['W'])
            dx_a, dw_a, db_a = affine_relu_backward(d_ha, arg_cache, params['W'])
            return loss, {
                'x_p': dx_p, 'x_a': dx_a, 'W': dw_p + dw_a, 'b': db_p + db_a,
                'W1': d_w1, 'W2': d_w2, 'bias': d_b,
            }

        self.assertLess(grad_check(closure, params, samples=40, rng=rng).max_rel_error, 1e-6)


class SoftmaxTestCase(SimpleTestCase):
    """softmax 交差エントロピー"""

    def test_uniform_scores(self):
        loss, grad = softmax_xent(np.zeros(5), 2)
        self.assertAlmostEqual(loss, math.log(5), places=12)
        expected = np.full(5, 0.2)
        expected[2] -= 1.0
        np.testing.assert_allclose(grad, expected, atol=1e-12)

    def test_rows_are_summed(self):
        loss, grad = softmax_xent(np.zeros((3, 4)), np.zeros(3, dtype=int))
        self.assertAlmostEqual(loss, 3 * math.log(4), places=12)
        self.assertEqual(grad.shape, (3, 4))

    def test_large_scores_stay_finite(self):
        loss, grad = softmax_xent(np.array([1000.0, 0.0, -1000.0]), 0)
        self.assertAlmostEqual(loss, 0.0, places=12)
        loss, _ = softmax_xent(np.array([1000.0, 0.0]), 1)
        self.assertAlmostEqual(loss, 1000.0, places=9)
        self.assertTrue(np.all(np.isfinite(grad)))
        np.testing.assert_allclose(softmax(np.array([1e4, 1e4])), [0.5, 0.5])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        params = ModelParams({'scores': rng.normal(size=(4, 6))})
        gold = np.array([1, 0, 5, 3])

        def closure():
            loss, grad = softmax_xent(params['scores'], gold)
            return loss, {'scores': grad}

        result = grad_check(closure, params, samples=24, rng=rng)
        self.assertLess(result.max_rel_error, 1e-6)

    def test_zero_labels(self):
        with self.assertRaises(ConfigError):
            softmax_xent(np.zeros((2, 0)), [0, 0])

    def test_embedding_backward_accumulates_repeats(self):
        table = np.zeros((3, 2))
        embedding_backward(table, np.array([[1, 1], [2, 0]]), np.ones((2, 2, 2)))
        np.testing.assert_array_equal(table, [[1, 1], [2, 2], [1, 1]])


class AdamTestCase(SimpleTestCase):
    """Adam"""

    def test_two_steps_by_hand(self):
        params = ModelParams({'x': np.array([1.0])})
        state = AdamState()
        lr, beta1, beta2, eps = 0.1, 0.9, 0.999, 1e-8

        adam_step(params, {'x': np.array([2.0])}, state, lr, (beta1, beta2), eps)
        m, v = 0.1 * 2.0, 0.001 * 4.0
        x = 1.0 - lr * (m / (1 - beta1)) / (math.sqrt(v / (1 - beta2)) + eps)
        self.assertAlmostEqual(float(params['x'][0]), x, places=12)

        adam_step(params, {'x': np.array([-1.0])}, state, lr, (beta1, beta2), eps)
        m = beta1 * m + 0.1 * -1.0
        v = beta2 * v + 0.001 * 1.0
        x -= lr * (m / (1 - beta1 ** 2)) / (math.sqrt(v / (1 - beta2 ** 2)) + eps)
        self.assertAlmostEqual(float(params['x'][0]), x, places=12)
        self.assertEqual(state.t, 2)

    def test_quadratic_bowl_descends(self):
        params = ModelParams({'x': np.array([1.0])})
        optimizer = Adam(lr=0.005)
        previous = 1.0
        for _ in range(100):
            optimizer.step(params, {'x': 2.0 * params['x']})
            current = abs(float(params['x'][0]))
            self.assertLess(current, previous)
            previous = current

    def test_frozen_and_missing_gradients_are_skipped(self):
        params = ModelParams({'a': np.ones(2), 'b': np.ones(2), 'c': np.ones(2)}, frozen=['b'])
        adam_step(params, {'a': np.ones(2), 'b': np.ones(2)}, AdamState())
        self.assertTrue(np.all(params['a'] < 1.0))
        np.testing.assert_array_equal(params['b'], np.ones(2))
        np.testing.assert_array_equal(params['c'], np.ones(2))

    def test_non_finite_gradient(self):
        params = ModelParams({'a': np.ones(2)})
        with self.assertRaises(NumericError):
            adam_step(params, {'a': np.array([1.0, np.nan])}, AdamState())
        np.testing.assert_array_equal(params['a'], np.ones(2))

    def test_gradient_shape_mismatch(self):
        params = ModelParams({'a': np.ones(2)})
        with self.assertRaises(NumericError) as ctx:
            adam_step(params, {'a': np.ones(3)}, AdamState())
        self.assertEqual(ctx.exception.context['tensor'], 'a')
        self.assertEqual(ctx.exception.exit_code, 4)

    def test_check_finite_counts(self):
        with self.assertRaises(NumericError) as ctx:
            check_finite('scores', np.array([np.inf, 1.0, np.nan]), epoch=3)
        self.assertEqual(ctx.exception.context['count'], 2)
        self.assertEqual(ctx.exception.context['epoch'], 3)


class GradCheckTestCase(SimpleTestCase):
    """勾配検査器そのもの"""

    def setUp(self):
        self.coefficients = np.array([[1.0, -2.0], [3.0, 0.5]])
        self.params = ModelParams({'w': np.array([[0.3, 0.1], [-0.2, 0.7]])})

    def test_linear_function_passes(self):
        def closure():
            return float(np.sum(self.params['w'] * self.coefficients)), {'w': self.coefficients.copy()}

        result = grad_check(closure, self.params)
        self.assertTrue(result.passed())
        self.assertEqual(result.checked, 4)

    def test_wrong_gradient_fails(self):
        def closure():
            return float(np.sum(self.params['w'] * self.coefficients)), {'w': 2.0 * self.coefficients}

        result = grad_check(closure, self.params)
        self.assertFalse(result.passed())
        self.assertAlmostEqual(result.max_rel_error, 1 / 3, places=6)
        self.assertEqual(result.name, 'w')

    def test_parameters_are_restored(self):
        before = self.params['w'].copy()
        grad_check(lambda: (float(np.sum(self.params['w'] ** 2)), {'w': 2 * self.params['w']}), self.params)
        np.testing.assert_array_equal(self.params['w'], before)

    def test_relative_error_floor(self):
        self.assertEqual(relative_error(0.0, 0.0), 0.0)
        self.assertAlmostEqual(relative_error(1e-6, 0.0), 1e-2)


class CheckpointTestCase(SimpleTestCase):
    """チェックポイントの書式"""

    def setUp(self):
        rng = np.random.default_rng(10)
        self.params = ModelParams(
            {'emb.word': rng.normal(size=(4, 3)), 'scalar': np.array(2.5), 'lstm.0.fw': rng.normal(size=(2, 3, 4))},
            frozen=['emb.word'],
        )
        self.header = {'config': {'mode': 'role-only', 'hidden_size': 3}, 'vocab': {'words': ['<PAD>', '語']}}

    def test_round_trip(self):
        header, params = loads(dumps(self.params, self.header))
        self.assertEqual(header, self.header)
        self.assertEqual(list(params), list(self.params))
        self.assertEqual(params.frozen, {'emb.word'})
        for name, value in self.params.items():
            np.testing.assert_array_equal(params[name], value)
            self.assertEqual(params[name].dtype, np.float64)

    def test_same_input_same_bytes(self):
        data = dumps(self.params, self.header)
        self.assertEqual(dumps(self.params, dict(reversed(list(self.header.items())))), data)
        self.assertTrue(data.startswith(MAGIC + struct.pack('<I', FORMAT_VERSION)))

    def test_corruption(self):
        data = dumps(self.params, self.header)
        with self.assertRaises(CheckpointError):
            loads(data[:-3])
        with self.assertRaises(CheckpointError):
            loads(data + b'\x00')
        with self.assertRaises(CheckpointError):
            loads(b'NOTCKPT\x00' + data[8:])
        with self.assertRaises(CheckpointError):
            loads(MAGIC + struct.pack('<I', FORMAT_VERSION + 1) + data[12:])

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'model.ckpt')
            save_checkpoint(path, self.params, self.header)
            header, params = load_checkpoint(path)
            self.assertEqual(header, self.header)
            self.assertEqual(params.shapes(), self.params.shapes())
            with self.assertRaises(CheckpointError):
                load_checkpoint(os.path.join(tmp, 'missing.ckpt'))
