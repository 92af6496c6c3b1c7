import io
import math
import os
import tempfile
from collections import Counter

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from neural.gradcheck import grad_check
from pruning.pruner import Pruner, prune_stats
from pruning.ruleset import mine_rules, select_top_k
from scoring.scorer import score
from srl_toolkit.exceptions import AlignmentError, ConfigError, DataError
from treebank.builders import keep_your_heart, make_sentence
from treebank.conll import read_conll09, save_conll09
from treebank.synth import synth_corpus
from .config import RunConfig, build_run_config, config_from_header
from .features import (
    PretrainedVectors,
    WordRep,
    load_external_embeddings,
    load_pretrained_vectors,
    save_external_embeddings,
)
from .model import SRLModel, decode_scores
from .trainer import make_pruner, train
from .virtual_root import from_virtual_root, has_virtual_root, split_sense, to_virtual_root
from .vocab import NONE, UNK_INDEX, LabelVocab, Vocab

TINY = dict(
    word_dim=3, lemma_dim=3, pos_dim=3, indicator_dim=2,
    lstm_layers=3, hidden_size=3, mlp_size=4, prune='none',
)

SMALL = dict(
    word_dim=8, lemma_dim=8, pos_dim=8, indicator_dim=4,
    lstm_layers=1, hidden_size=16, mlp_size=16,
    recurrent_keep=1.0, mlp_keep=1.0, unk_replace=0.0,
    learning_rate=1e-2, batch_size=4, syntax='gold', prune='none',
)


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write(self, name, text):
        with open(self.path(name), 'w', encoding='utf-8') as handle:
            handle.write(text)
        return self.path(name)


class RunConfigTestCase(TempDirMixin, SimpleTestCase):
    """設定の重ね合わせと検証"""

    def test_defaults(self):
        config = build_run_config()
        self.assertEqual(config.hidden_size, 400)
        self.assertEqual(config.mlp_size, 300)
        self.assertEqual(config.lstm_layers, 3)
        self.assertEqual(config.learning_rate, 2e-3)
        self.assertEqual(config.recurrent_keep, 0.8)
        self.assertEqual(config.seed, settings.SRL_SEED)
        self.assertFalse(config.end_to_end)

    def test_file_then_flags(self):
        path = self.write('run.cfg', "# 小さな設定\nhidden-size = 50\n\nepochs = 3\nmode = end-to-end\nuse_pos = false\n")
        config = build_run_config(path, hidden_size=60, epochs=None)
        self.assertEqual(config.hidden_size, 60)
        self.assertEqual(config.epochs, 3)
        self.assertTrue(config.end_to_end)
        self.assertFalse(config.use_pos)

    def test_unknown_key_in_file_reports_line(self):
        path = self.write('bad.cfg', "epochs = 3\nwidth = 5\n")
        with self.assertRaises(ConfigError) as ctx:
            build_run_config(path)
        self.assertEqual(ctx.exception.context['line'], 2)

    def test_malformed_line(self):
        with self.assertRaises(ConfigError):
            build_run_config(self.write('bad.cfg', "epochs 3\n"))

    def test_unknown_override(self):
        with self.assertRaises(ConfigError):
            build_run_config(width=5)

    def test_invalid_values(self):
        for overrides in (
            {'recurrent_keep': 0.0},
            {'beta1': 1.0},
            {'hidden_size': 0},
            {'syntax': 'silver'},
            {'mode': 'end-to-end', 'language': 'cs'},
            {'mode': 'end-to-end', 'language': 'ja'},
            {'prune': 'rule', 'top_k': 0},
            {'dev_contextual': 'dev.vec'},
        ):
            with self.subTest(overrides=overrides):
                with self.assertRaises(ConfigError):
                    build_run_config(**overrides)

    def test_header_round_trip(self):
        config = build_run_config(hidden_size=7, train='train.conll')
        self.assertIn('hidden_size=7', config.to_header())
        self.assertIn('dev= ', config.to_header())
        self.assertEqual(config_from_header(config.as_dict()), config)
        with self.assertRaises(ConfigError):
            config_from_header(dict(config.as_dict(), width=1))

    def test_effective_dims(self):
        config = RunConfig().with_effective_dims()
        self.assertEqual((config.pretrained_dim, config.contextual_dim), (0, 0))
        config = RunConfig(contextual='train.vec').with_effective_dims()
        self.assertEqual(config.contextual_dim, 1024)

    def test_word_rep_ablation(self):
        rep = WordRep.from_config(RunConfig(use_pos=False).with_effective_dims())
        self.assertEqual([name for name, _ in rep.slots()], ['word', 'lemma', 'indicator'])
        self.assertEqual(rep.total, 100 + 100 + 16)
        rep = WordRep.from_config(RunConfig(use_lemma=False, contextual='x').with_effective_dims())
        self.assertEqual(rep.total, 100 + 100 + 16 + 1024)


class VocabTestCase(SimpleTestCase):
    """語彙とラベル空間"""

    def test_vocab_order_and_unknowns(self):
        vocab = Vocab.from_counts(Counter({'b': 2, 'a': 2, 'c': 1}), extra=['<VR>'])
        self.assertEqual(vocab.to_list(), ['<VR>', 'a', 'b', 'c'])
        self.assertEqual(vocab.index(None), UNK_INDEX)
        self.assertEqual(vocab.index('zzz'), UNK_INDEX)
        self.assertEqual(vocab.singletons, {vocab.index('c')})

    def test_label_slices(self):
        labels = LabelVocab(('A0', 'A1'), ('01', '02'))
        self.assertEqual(labels.labels, (NONE, 'A0', 'A1', '01', '02'))
        self.assertEqual(labels.role_slice, slice(0, 3))
        self.assertEqual(labels.sense_slice, slice(3, 5))
        self.assertEqual(labels.role_index(None), 0)
        self.assertEqual(labels.role_index('A1'), 2)
        self.assertIsNone(labels.role_index('A9'))
        self.assertEqual(labels.sense_index('02'), 1)
        self.assertIsNone(labels.role_label(0))
        self.assertEqual(labels.sense_label(0), '01')

    def test_reserved_and_duplicate_labels(self):
        with self.assertRaises(ConfigError):
            LabelVocab((NONE,))
        with self.assertRaises(ConfigError):
            LabelVocab(('A0', 'A0'))


class VirtualRootTestCase(SimpleTestCase):
    """仮想根の付け外し"""

    def test_round_trip(self):
        sentence = keep_your_heart()
        augmented = to_virtual_root(sentence)
        self.assertTrue(has_virtual_root(augmented))
        self.assertEqual(len(augmented), 7)
        root = augmented.tokens[-1]
        self.assertEqual((root.form, root.head, root.apreds), ('<VR>', 0, ('01',)))
        self.assertEqual(augmented.token(1).pred_sense, 'keep')
        self.assertEqual(from_virtual_root(augmented), sentence)

    def test_predicate_without_sense(self):
        sentence = make_sentence(['Go', 'now'], [0, 1], frames={1: (None, {2: 'AM-TMP'})})
        augmented = to_virtual_root(sentence)
        self.assertEqual(augmented.tokens[-1].apreds, (None,))
        self.assertEqual(from_virtual_root(augmented), sentence)

    def test_bare_sense_label(self):
        sentence = make_sentence(['Go'], [0], frames={1: ('01', {})})
        augmented = to_virtual_root(sentence)
        self.assertIsNone(augmented.token(1).pred_sense)
        self.assertEqual(from_virtual_root(augmented).token(1).pred_sense, '01')

    def test_split_sense(self):
        self.assertEqual(split_sense('take.off.02', 'take'), ('take.off', '02'))
        self.assertEqual(split_sense(None, 'take'), ('take', None))

    def test_errors(self):
        sentence = keep_your_heart()
        with self.assertRaises(ConfigError):
            to_virtual_root(sentence, mode='role-only')
        with self.assertRaises(ConfigError):
            to_virtual_root(sentence, language='cs')
        with self.assertRaises(ConfigError):
            to_virtual_root(to_virtual_root(sentence))
        with self.assertRaises(ConfigError):
            from_virtual_root(sentence)


class FeatureFileTestCase(TempDirMixin, SimpleTestCase):
    """事前学習ベクトルと文脈ベクトルのファイル"""

    def test_pretrained_vectors(self):
        path = self.write('vectors.txt', "2 3\nkeep 0.1 0.2 0.3\nheart 1 2 3\n")
        vectors = load_pretrained_vectors(path)
        self.assertEqual(vectors.dim, 3)
        table = vectors.table(['<PAD>', 'heart', 'keep'])
        np.testing.assert_array_equal(table[0], np.zeros(3))
        np.testing.assert_array_equal(table[1], [1.0, 2.0, 3.0])

    def test_pretrained_dimension_mismatch(self):
        with self.assertRaises(DataError):
            load_pretrained_vectors(self.write('bad.txt', "keep 0.1 0.2\nheart 1 2 3\n"))

    def test_external_round_trip(self):
        corpus = [keep_your_heart(), make_sentence(['a', 'b'], [0, 1])]
        arrays = [np.arange(12, dtype=float).reshape(6, 2), np.array([[0.5, -1.0], [2.0, 3.25]])]
        save_external_embeddings(self.path('ctx.vec'), arrays)
        loaded = load_external_embeddings(self.path('ctx.vec'), corpus, dim=2)
        for expected, actual in zip(arrays, loaded):
            np.testing.assert_array_equal(expected, actual)

    def test_external_misalignment(self):
        corpus = [keep_your_heart(), make_sentence(['a', 'b'], [0, 1])]
        arrays = [np.zeros((6, 2)), np.zeros((3, 2))]
        save_external_embeddings(self.path('ctx.vec'), arrays)
        with self.assertRaises(AlignmentError) as ctx:
            load_external_embeddings(self.path('ctx.vec'), corpus)
        self.assertEqual(ctx.exception.context['sentence'], 2)
        with self.assertRaises(AlignmentError):
            load_external_embeddings(self.path('ctx.vec'), corpus[:1])
        with self.assertRaises(AlignmentError):
            load_external_embeddings(self.path('ctx.vec'), corpus, dim=4)

    def test_external_short_vector(self):
        path = self.write('ctx.vec', "#dim=2 #sentences=1\n#sent 1 2\n0.1 0.2\n0.3\n")
        with self.assertRaises(AlignmentError) as ctx:
            load_external_embeddings(path, [make_sentence(['a', 'b'], [0, 1])])
        self.assertEqual(ctx.exception.context['token'], 2)

    def test_external_non_numeric_token_count(self):
        path = self.write('ctx.vec', "#dim=2 #sentences=1\n#sent 1 x\n0.1 0.2\n")
        with self.assertRaises(AlignmentError) as ctx:
            load_external_embeddings(path, [make_sentence(['a'], [0])])
        self.assertEqual(ctx.exception.context['sentence'], 1)
        self.assertEqual(ctx.exception.exit_code, 3)


class ModelTestCase(SimpleTestCase):
    """スコア計算・損失・復号"""

    def build(self, corpus, **overrides):
        config = build_run_config(**dict(TINY, **overrides))
        return SRLModel.build(config, corpus, np.random.default_rng(0))

    def test_decode_hand_set_scores(self):
        labels = LabelVocab(('A0', 'A1'))
        scores = np.array([[0.0, 5.0, 1.0], [2.0, 1.0, 1.0], [1.0, 1.0, 1.0]])
        # 同点は小さい添字（NONE）が勝つ
        self.assertEqual(decode_scores(scores, (2, 4, 5), labels), {2: 'A0'})

    def test_decode_matches_brute_force_argmax(self):
        labels = LabelVocab(('A0', 'A1', 'A2'))
        rng = np.random.default_rng(1)
        for _ in range(50):
            scores = rng.normal(size=(5, 4))
            expected = {}
            for row, candidate in enumerate(range(1, 6)):
                best = max(range(4), key=lambda j: (scores[row, j], -j))
                if best:
                    expected[candidate] = labels.roles[best - 1]
            self.assertEqual(decode_scores(scores, tuple(range(1, 6)), labels), expected)

    def test_instances_follow_pruning_mask(self):
        sentence = keep_your_heart()
        model = self.build([sentence])
        rules = select_top_k(mine_rules([sentence], 'gold'), 1)
        instance = model.instances(sentence, Pruner(mode='rule', rule=rules, syntax_source='gold'))[0]
        self.assertEqual(instance.candidates, (1, 3, 6))
        self.assertEqual(
            [model.labels.role_label(int(i)) for i in instance.gold], [None, 'A1', 'A2'],
        )
        self.assertEqual(instance.length, 6)

    def test_zero_scorer_returns_bias(self):
        sentence = keep_your_heart()
        model = self.build([sentence])
        n_labels = len(model.labels)
        model.params['biaffine.W1'] = np.zeros_like(model.params['biaffine.W1'])
        model.params['biaffine.W2'] = np.zeros_like(model.params['biaffine.W2'])
        model.params['biaffine.b'] = np.arange(n_labels, dtype=float)
        scored = model.forward(model.instances(sentence, Pruner(mode='none')))[0]
        for row in scored.role_scores:
            np.testing.assert_array_equal(row, np.arange(n_labels)[model.labels.role_slice])

    def test_uniform_scores_give_log_label_count(self):
        sentence = keep_your_heart()
        model = self.build([sentence])
        for name in ('biaffine.W1', 'biaffine.W2', 'biaffine.b'):
            model.params[name] = np.zeros_like(model.params[name])
        instances = model.instances(sentence, Pruner(mode='none'))
        loss, _ = model.loss(instances)
        # 候補 6、役割区画 NONE + A1 + A2
        self.assertAlmostEqual(loss, 6 * math.log(3), places=10)

    def test_full_pipeline_gradients(self):
        corpus = synth_corpus(seed=31, n_sentences=5, max_len=5, min_len=5).corpus
        worst = 0.0
        for trial, sentence in enumerate(corpus):
            rng = np.random.default_rng(trial)
            config = build_run_config(**TINY)
            model = SRLModel.build(config, [sentence], rng)
            instances = model.corpus_instances([sentence], Pruner(mode='none'))
            result = grad_check(lambda: model.loss(instances), model.params, samples=8, rng=rng)
            worst = max(worst, result.max_rel_error)
        self.assertLess(worst, 1e-4)

    def test_end_to_end_gradients(self):
        corpus = synth_corpus(seed=32, n_sentences=2, max_len=5, min_len=5).corpus
        for trial, sentence in enumerate(corpus):
            rng = np.random.default_rng(trial)
            model = SRLModel.build(build_run_config(mode='end-to-end', **TINY), [sentence], rng)
            instances = model.corpus_instances([sentence], Pruner(mode='none'))
            self.assertTrue(all(instance.sense_gold is not None for instance in instances))
            result = grad_check(lambda: model.loss(instances), model.params, samples=8, rng=rng)
            self.assertLess(result.max_rel_error, 1e-4)

    def test_end_to_end_scores_virtual_root(self):
        sentence = keep_your_heart()
        model = self.build([sentence], mode='end-to-end')
        self.assertEqual(model.labels.senses, ('01',))
        instance = model.instances(sentence, Pruner(mode='none'))[0]
        self.assertEqual(instance.length, 7)
        self.assertEqual(instance.candidates, (1, 2, 3, 4, 5, 6))
        scored = model.forward([instance])[0]
        self.assertEqual(scored.role_scores.shape, (6, 3))
        self.assertEqual(scored.sense_scores.shape, (1,))
        predicted = model.predict_sentence(sentence, Pruner(mode='none'))
        self.assertEqual(predicted.token(1).pred_sense, 'keep.01')
        self.assertEqual(len(predicted), 6)

    def test_ablation_changes_input_width(self):
        sentence = keep_your_heart()
        model = self.build([sentence], use_pos=False)
        self.assertNotIn('emb.pos', model.params)
        self.assertEqual(model.params['lstm.0.fw'].shape, (1 + 3 + 3 + 2 + 3, 12))
        loss, grads = model.loss(model.instances(sentence, Pruner(mode='none')))
        self.assertTrue(np.isfinite(loss))
        self.assertNotIn('emb.pos', grads)

    def test_pretrained_vectors_are_frozen(self):
        sentence = keep_your_heart()
        pretrained = PretrainedVectors(2, {'Keep': np.array([1.0, 2.0])})
        model = SRLModel.build(build_run_config(**TINY), [sentence], np.random.default_rng(0), pretrained)
        self.assertIn('emb.pretrained', model.params.frozen)
        np.testing.assert_array_equal(model.params['emb.pretrained'][model.vocabs.words.index('Keep')], [1.0, 2.0])
        _, grads = model.loss(model.instances(sentence, Pruner(mode='none')))
        self.assertNotIn('emb.pretrained', grads)

    def test_contextual_vectors_required(self):
        sentence = keep_your_heart()
        model = self.build([sentence], contextual='train.vec', contextual_dim=4)
        self.assertEqual(model.rep.contextual_dim, 4)
        with self.assertRaises(ConfigError):
            model.instances(sentence, Pruner(mode='none'))
        with self.assertRaises(ConfigError):
            model.instances(sentence, Pruner(mode='none'), external=np.zeros((6, 3)))
        instances = model.instances(sentence, Pruner(mode='none'), external=np.ones((6, 4)))
        loss, _ = model.loss(instances)
        self.assertTrue(np.isfinite(loss))

    def test_eval_mode_is_deterministic(self):
        corpus = synth_corpus(seed=33, n_sentences=4, max_len=7).corpus
        model = self.build(corpus)
        pruner = Pruner(mode='none')
        self.assertEqual(model.predict(corpus, pruner), model.predict(corpus, pruner, threads=3))

    def test_make_pruner(self):
        rules = mine_rules([keep_your_heart()], 'gold')
        self.assertEqual(make_pruner(RunConfig(prune='rule', top_k=20), rules).rule.k, len(rules))
        self.assertEqual(make_pruner(RunConfig(prune='korder', korder=2)).korder, 2)
        self.assertEqual(make_pruner(RunConfig(prune='none')).mode, 'none')
        with self.assertRaises(ConfigError):
            make_pruner(RunConfig(prune='rule'))


class TrainingTestCase(TempDirMixin, SimpleTestCase):
    """学習ループ"""

    def setUp(self):
        super().setUp()
        self.corpus = synth_corpus(seed=41, n_sentences=8, max_len=6, tuple_distribution={(0, 1): 1.0}).corpus

    def test_same_seed_same_loss_curve(self):
        config = build_run_config(epochs=4, seed=5, **dict(SMALL, recurrent_keep=0.8, unk_replace=0.1))
        first = train(config, self.corpus)
        second = train(config, self.corpus)
        self.assertEqual(first.losses, second.losses)
        third = train(build_run_config(epochs=4, seed=6, **dict(SMALL, recurrent_keep=0.8)), self.corpus)
        self.assertNotEqual(first.losses, third.losses)

    def test_overfits_roles(self):
        config = build_run_config(epochs=150, **SMALL)
        result = train(config, self.corpus)
        self.assertLess(result.losses[9], result.losses[0])
        self.assertEqual(result.selection, 'train_loss')
        predicted = result.model.predict(self.corpus, result.pruner)
        self.assertGreaterEqual(score(self.corpus, predicted).f1, 0.99)

    def test_overfits_senses_end_to_end(self):
        config = build_run_config(epochs=150, mode='end-to-end', **SMALL)
        result = train(config, self.corpus)
        predicted = result.model.predict(self.corpus, result.pruner)
        report = score(self.corpus, predicted, include_senses=True)
        self.assertGreaterEqual(report.pd_accuracy, 0.95)
        self.assertGreaterEqual(report.f1, 0.95)

    def test_dev_selection_and_checkpoint(self):
        rules = mine_rules(self.corpus, 'gold')
        config = build_run_config(epochs=3, eval_every=2, **dict(SMALL, prune='rule', top_k=1))
        path = self.path('model.ckpt')
        result = train(config, self.corpus, rules, dev=self.corpus, checkpoint=path)
        self.assertEqual(result.selection, 'dev_f1')
        self.assertEqual([record.dev_f1 is None for record in result.history], [True, False, False])

        model, saved_rules, header = SRLModel.load(path)
        self.assertEqual(saved_rules.k, 1)
        self.assertEqual(header['best']['epoch'], result.best_epoch)
        self.assertEqual(model.config, result.model.config)
        pruner = make_pruner(model.config, saved_rules)
        self.assertEqual(model.predict(self.corpus, pruner), result.model.predict(self.corpus, result.pruner))

    def test_training_needs_predicates(self):
        with self.assertRaises(ConfigError):
            train(build_run_config(epochs=1, **SMALL), [make_sentence(['a'], [0])])

    def test_overfits_fifty_sentences_with_hidden_100(self):
        corpus = synth_corpus(seed=49, n_sentences=50, max_len=8, vocab_size=500, max_predicates=2).corpus
        rules = mine_rules(corpus, 'gold')
        config = build_run_config(
            epochs=200,
            **dict(SMALL, word_dim=32, lemma_dim=32, pos_dim=16, hidden_size=100, mlp_size=100, batch_size=8, prune='rule'),
        )
        result = train(config, corpus, rules)
        self.assertLess(result.losses[9], result.losses[0])
        predicted = result.model.predict(corpus, result.pruner)
        self.assertGreaterEqual(score(corpus, predicted).f1, 0.99)


class PruningBenefitTestCase(SimpleTestCase):
    """構文ルールによる候補削減と学習の速さ"""

    def setUp(self):
        self.corpus = synth_corpus(
            seed=43, n_sentences=20, min_len=10, max_len=14,
            tuple_distribution={(0, 1): 1.0}, max_arguments=2,
        ).corpus
        self.rules = select_top_k(mine_rules(self.corpus, 'gold'), 1)

    def first_epoch_below(self, result, threshold):
        for record in result.history:
            if record.loss <= threshold:
                return record.epoch
        return None

    def test_rule_reduces_candidates_and_reaches_loss_sooner(self):
        pruned = train(build_run_config(epochs=60, **dict(SMALL, prune='rule')), self.corpus, self.rules)
        unpruned = train(build_run_config(epochs=60, **SMALL), self.corpus)

        pruned_instances = pruned.model.corpus_instances(self.corpus, pruned.pruner)
        unpruned_instances = unpruned.model.corpus_instances(self.corpus, unpruned.pruner)
        self.assertEqual(len(pruned_instances), len(unpruned_instances))
        kept = sum(len(instance.candidates) for instance in pruned_instances)
        total = sum(len(instance.candidates) for instance in unpruned_instances)
        stats = prune_stats(self.corpus, self.rules, 'gold')
        self.assertEqual((stats.retained_pairs, stats.all_pairs), (kept, total))
        self.assertAlmostEqual(stats.reduction, 1.0 - kept / total)
        self.assertGreaterEqual(stats.reduction, 0.6)
        self.assertEqual(stats.recall, 1.0)

        # 述語あたり平均 1.0 の損失に届くまでのエポック数（両者のバッチ数は同じ）
        threshold = 1.0 * len(pruned_instances)
        pruned_epoch = self.first_epoch_below(pruned, threshold)
        unpruned_epoch = self.first_epoch_below(unpruned, threshold)
        self.assertIsNotNone(pruned_epoch)
        if unpruned_epoch is not None:
            self.assertLessEqual(pruned_epoch, unpruned_epoch)


class ContextualVectorTestCase(TempDirMixin, SimpleTestCase):
    """外部の文脈ベクトル"""

    ROLES = ('A0', 'A1', 'A2', 'AM-TMP', 'AM-LOC')

    def signal_corpus(self, seed):
        """役割をランダムに付け替え、その役割を one-hot で文脈ベクトルに埋め込む"""
        rng = np.random.default_rng(seed)
        corpus = synth_corpus(seed=seed, n_sentences=30, max_len=8, max_predicates=1).corpus
        relabeled, arrays = [], []
        for sentence in corpus:
            vectors = np.zeros((len(sentence), len(self.ROLES)))
            frame = {}
            for arg, _ in sentence.arguments(0):
                role = int(rng.integers(len(self.ROLES)))
                frame[arg] = self.ROLES[role]
                vectors[arg - 1, role] = 1.0
            relabeled.append(sentence.with_frames([frame]))
            arrays.append(vectors)
        return relabeled, arrays

    def test_zero_file_matches_model_without_vectors(self):
        corpus = synth_corpus(seed=45, n_sentences=8, max_len=6).corpus
        save_external_embeddings(self.path('zero.vec'), [np.zeros((len(s), 4)) for s in corpus])
        external = load_external_embeddings(self.path('zero.vec'), corpus, dim=4)
        config = build_run_config(epochs=5, contextual=self.path('zero.vec'), contextual_dim=4, **SMALL)
        result = train(config, corpus, external=external)
        initial = SRLModel.build(config, corpus, np.random.default_rng(config.seed))

        # ゼロ入力の行には勾配が流れず、初期値のまま
        base = result.model.rep.total - 4
        rows = list(range(1 + base, 1 + base + 4))
        for name in ('lstm.0.fw', 'lstm.0.bw'):
            np.testing.assert_array_equal(result.model.params[name][rows], initial.params[name][rows])
            self.assertFalse(np.array_equal(result.model.params[name], initial.params[name]))

        plain = SRLModel.build(build_run_config(**SMALL), corpus, np.random.default_rng(0))
        shapes = plain.params.shapes()
        for name, value in result.model.params.items():
            plain.params[name] = np.delete(value, rows, axis=0) if name in ('lstm.0.fw', 'lstm.0.bw') else value
        self.assertEqual(plain.params.shapes(), shapes)

        with_zero = result.model.forward(result.model.corpus_instances(corpus, result.pruner, external))
        without = plain.forward(plain.corpus_instances(corpus, result.pruner))
        for left, right in zip(with_zero, without):
            np.testing.assert_allclose(left.role_scores, right.role_scores, rtol=1e-9, atol=1e-12)
        self.assertEqual(
            result.model.predict(corpus, result.pruner, external),
            plain.predict(corpus, result.pruner),
        )

    def test_role_signal_is_learned(self):
        corpus, arrays = self.signal_corpus(47)
        held_out, held_out_arrays = self.signal_corpus(48)
        config = build_run_config(epochs=80, contextual='train.vec', contextual_dim=len(self.ROLES), **SMALL)
        result = train(config, corpus, external=arrays)

        predicted = result.model.predict(held_out, result.pruner, held_out_arrays)
        self.assertGreaterEqual(score(held_out, predicted).f1, 0.9)
        blank = [np.zeros_like(vectors) for vectors in held_out_arrays]
        predicted = result.model.predict(held_out, result.pruner, blank)
        self.assertLessEqual(score(held_out, predicted).f1, 0.5)


class SRLCommandTestCase(TempDirMixin, TestCase):
    """train / predict / gradcheck コマンド"""

    def setUp(self):
        super().setUp()
        corpus = synth_corpus(seed=51, n_sentences=6, max_len=6).corpus
        save_conll09(corpus, self.path('train.conll'))
        self.write('run.cfg', (
            "word-dim = 4\nlemma-dim = 4\npos-dim = 4\nindicator-dim = 2\n"
            "lstm-layers = 1\nhidden-size = 6\nmlp-size = 6\nepochs = 2\nbatch-size = 4\n"
            "syntax = gold\nprune = none\n"
        ))

    def train(self, **options):
        out = io.StringIO()
        call_command(
            'train', config=self.path('run.cfg'), train=self.path('train.conll'),
            out=self.path('model.ckpt'), stdout=out, **options,
        )
        return out.getvalue()

    def test_train_predict_evaluate(self):
        output = self.train(report=self.path('curve.tsv'), seed=3)
        self.assertIn('best_epoch=', output)
        with open(self.path('curve.tsv'), encoding='utf-8') as handle:
            lines = handle.read().splitlines()
        self.assertTrue(lines[0].startswith('# config '))
        self.assertIn('seed=3', lines[0])
        self.assertEqual(lines[1], 'epoch\tloss\tdev_f1')
        self.assertEqual(len(lines), 4)

        call_command(
            'predict', checkpoint=self.path('model.ckpt'), input=self.path('train.conll'),
            out=self.path('pred.conll'), stdout=io.StringIO(),
        )
        predicted = read_conll09(self.path('pred.conll'))
        gold = read_conll09(self.path('train.conll'))
        self.assertEqual([s.predicates for s in predicted], [s.predicates for s in gold])

        out = io.StringIO()
        call_command('evaluate', gold=self.path('train.conll'), pred=self.path('pred.conll'), stdout=out)
        self.assertEqual(len(out.getvalue().splitlines()[-1].split('\t')), 4)

    def test_same_seed_gives_identical_files(self):
        save_conll09(synth_corpus(seed=52, n_sentences=4, max_len=6).corpus, self.path('dev.conll'))
        for run in ('a', 'b'):
            call_command(
                'train', config=self.path('run.cfg'), train=self.path('train.conll'), dev=self.path('dev.conll'),
                out=self.path(f'{run}.ckpt'), report=self.path(f'{run}.curve'), seed=9, stdout=io.StringIO(),
            )
            call_command(
                'predict', checkpoint=self.path(f'{run}.ckpt'), input=self.path('dev.conll'),
                out=self.path(f'{run}.pred'), stdout=io.StringIO(),
            )
            call_command(
                'evaluate', gold=self.path('dev.conll'), pred=self.path(f'{run}.pred'),
                report=self.path(f'{run}.score'), stdout=io.StringIO(),
            )
        for suffix in ('ckpt', 'curve', 'pred'):
            with open(self.path(f'a.{suffix}'), 'rb') as first, open(self.path(f'b.{suffix}'), 'rb') as second:
                self.assertEqual(first.read(), second.read(), suffix)
        # スコアレポートの1行目は入力パスを記録するので本体のみ比べる
        with open(self.path('a.score'), 'rb') as first, open(self.path('b.score'), 'rb') as second:
            self.assertEqual(first.read().split(b'\n', 1)[1], second.read().split(b'\n', 1)[1])

    def test_predict_rejects_conflicting_architecture(self):
        self.train()
        with self.assertRaises(CommandError) as ctx:
            call_command(
                'predict', checkpoint=self.path('model.ckpt'), input=self.path('train.conll'),
                hidden_size=12, stdout=io.StringIO(),
            )
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('hidden_size=12!=6', str(ctx.exception))

    def test_train_requires_corpus(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('train', config=self.path('run.cfg'), out=self.path('model.ckpt'), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_rule_pruning_requires_rules(self):
        with self.assertRaises(CommandError) as ctx:
            self.train(prune='rule')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_gradcheck_command(self):
        out = io.StringIO()
        call_command('gradcheck', trials=2, samples=4, stdout=out)
        lines = out.getvalue().splitlines()
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[-1].endswith('status=pass'))
