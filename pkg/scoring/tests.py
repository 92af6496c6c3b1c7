import io
import os
import tempfile

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from srl_toolkit.exceptions import AlignmentError
from treebank.builders import make_sentence
from treebank.conll import save_conll09
from treebank.synth import synth_corpus
from .scorer import ScoreReport, merge_senses, pd_accuracy, score

FORMS = ['p', 'a1', 'a2', 'a3']
HEADS = [0, 1, 1, 1]


def _sentence(arguments, sense='take.01'):
    return make_sentence(FORMS, HEADS, frames={1: (sense, arguments)})


class ScorerTestCase(SimpleTestCase):
    """採点"""

    def setUp(self):
        self.gold = [_sentence({2: 'A0', 3: 'A1'})]
        self.predicted = [_sentence({2: 'A0', 4: 'A1'})]

    def test_hand_counted_arcs(self):
        report = score(self.gold, self.predicted)
        self.assertEqual((report.correct, report.predicted, report.gold), (1, 2, 2))
        self.assertEqual(report.precision, 0.5)
        self.assertEqual(report.recall, 0.5)
        self.assertEqual(report.f1, 0.5)

    def test_hand_counted_with_senses(self):
        report = score(self.gold, self.predicted, include_senses=True)
        self.assertEqual((report.correct, report.predicted, report.gold), (2, 3, 3))
        self.assertAlmostEqual(report.f1, 2 / 3)
        wrong = score(self.gold, [_sentence({2: 'A0', 4: 'A1'}, sense='take.02')], include_senses=True)
        self.assertEqual((wrong.correct, wrong.predicted, wrong.gold), (1, 3, 3))

    def test_perfect_prediction(self):
        corpus = synth_corpus(seed=1, n_sentences=10, max_len=8).corpus
        report = score(corpus, corpus, include_senses=True)
        self.assertEqual(report.f1, 1.0)
        self.assertEqual(report.pd_accuracy, 1.0)
        self.assertEqual(report.machine_line(), '1.000000\t1.000000\t1.000000\t1.000000')

    def test_role_labels_are_case_sensitive(self):
        report = score(self.gold, [_sentence({2: 'a0', 3: 'A1'})])
        self.assertEqual(report.correct, 1)

    def test_swapping_corpora_swaps_precision_and_recall(self):
        forward = score(self.gold, [_sentence({2: 'A0', 3: 'A2', 4: 'A1'})])
        backward = score([_sentence({2: 'A0', 3: 'A2', 4: 'A1'})], self.gold)
        self.assertEqual(forward.precision, backward.recall)
        self.assertEqual(forward.recall, backward.precision)
        self.assertEqual(forward.f1, backward.f1)

    def test_spurious_arcs_never_help(self):
        rng = np.random.default_rng(3)
        corpus = synth_corpus(seed=2, n_sentences=20, max_len=8).corpus
        for _ in range(100):
            index = int(rng.integers(len(corpus)))
            sentence = corpus[index]
            base = score([sentence], [sentence])
            slot = int(rng.integers(len(sentence.predicates)))
            frames = [dict(arguments) for _, arguments in sentence.frames()]
            free = [token.id for token in sentence.tokens if token.id not in frames[slot]]
            if not free:
                continue
            frames[slot][int(rng.choice(free))] = 'SPURIOUS'
            report = score([sentence], [sentence.with_frames(frames)])
            self.assertLessEqual(report.precision, base.precision)
            self.assertEqual(report.recall, base.recall)
            self.assertEqual(report.predicted, base.predicted + 1)

    def test_empty_counts(self):
        report = score([], [])
        self.assertEqual((report.precision, report.recall, report.f1), (0.0, 0.0, 0.0))
        self.assertIsNone(report.pd_accuracy)
        self.assertTrue(report.machine_line().endswith('\t_'))

    def test_empty_gold_sense_is_skipped(self):
        gold = [_sentence({2: 'A0'}, sense=None)]
        report = score(gold, [_sentence({2: 'A0'})], include_senses=True)
        self.assertEqual((report.correct, report.predicted, report.gold), (1, 1, 1))
        self.assertEqual(report.skipped_senses, 1)
        self.assertIn('diagnostics skipped_empty_gold_senses=1', list(report.lines()))

    def test_pd_accuracy(self):
        gold = [_sentence({}, 'a.01'), _sentence({}, 'b.01'), _sentence({}, 'c.01')]
        predicted = [_sentence({}, 'a.01'), _sentence({}, 'b.02'), _sentence({}, 'c.01')]
        self.assertAlmostEqual(pd_accuracy(gold, predicted), 2 / 3)
        self.assertEqual(pd_accuracy([], []), 0.0)

    def test_reports_add(self):
        total = ScoreReport(1, 2, 2) + ScoreReport(2, 2, 4, pd_correct=1, pd_total=1)
        self.assertEqual((total.correct, total.predicted, total.gold, total.pd_total), (3, 4, 6, 1))

    def test_misaligned_corpora(self):
        with self.assertRaises(AlignmentError):
            score(self.gold, self.gold + self.gold)
        shorter = [make_sentence(FORMS[:3], HEADS[:3], frames={1: ('take.01', {})})]
        with self.assertRaises(AlignmentError) as ctx:
            score(self.gold, shorter)
        self.assertEqual(ctx.exception.context['sentence'], 1)
        moved = [make_sentence(FORMS, HEADS, frames={2: ('take.01', {})})]
        with self.assertRaises(AlignmentError):
            score(self.gold, moved)

    def test_merge_senses(self):
        predicted = [_sentence({2: 'A0'}, sense=None)]
        merged = merge_senses(predicted, [_sentence({}, sense='take.03')])
        self.assertEqual(merged[0].token(1).pred_sense, 'take.03')
        self.assertEqual(merged[0].arguments(0), [(2, 'A0')])
        with self.assertRaises(AlignmentError):
            merge_senses(predicted, [])

    def test_threads_do_not_change_score(self):
        corpus = synth_corpus(seed=4, n_sentences=15, max_len=8).corpus
        self.assertEqual(score(corpus, corpus, threads=4), score(corpus, corpus, threads=1))


class EvaluateCommandTestCase(TestCase):
    """evaluate コマンド"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.gold_path = os.path.join(self.tmp.name, 'gold.conll')
        self.pred_path = os.path.join(self.tmp.name, 'pred.conll')
        save_conll09([_sentence({2: 'A0', 3: 'A1'})], self.gold_path)
        save_conll09([_sentence({2: 'A0', 4: 'A1'})], self.pred_path)

    def test_prints_table_and_machine_line(self):
        out = io.StringIO()
        report = os.path.join(self.tmp.name, 'report.txt')
        call_command('evaluate', gold=self.gold_path, pred=self.pred_path, include_senses=True, report=report, stdout=out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[-1], '0.666667\t0.666667\t0.666667\t1.000000')
        with open(report, encoding='utf-8') as handle:
            written = handle.read().splitlines()
        self.assertTrue(written[0].startswith('# config gold='))
        self.assertEqual(written[1:], lines)

    def test_sense_file(self):
        senses = os.path.join(self.tmp.name, 'senses.conll')
        save_conll09([_sentence({}, sense='take.02')], senses)
        out = io.StringIO()
        call_command('evaluate', gold=self.gold_path, pred=self.pred_path, senses=senses, stdout=out)
        self.assertTrue(out.getvalue().splitlines()[-1].endswith('\t0.000000'))

    def test_misaligned_files_exit_code(self):
        other = os.path.join(self.tmp.name, 'other.conll')
        save_conll09([_sentence({}), _sentence({})], other)
        with self.assertRaises(CommandError) as ctx:
            call_command('evaluate', gold=self.gold_path, pred=other, stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 3)
