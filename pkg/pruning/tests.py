import io
import os
import tempfile

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from srl_toolkit.exceptions import ConfigError, DataError, RuleFileError
from treebank.builders import keep_your_heart, make_sentence
from treebank.conll import save_conll09
from treebank.deptree import DistanceTuple, build_tree, tree_from_heads
from treebank.synth import synth_corpus
from .management.commands.sweep import parse_k_values
from .pruner import Pruner, no_prune, prune, prune_korder, prune_stats
from .ruleset import (
    RuleSet,
    coverage,
    format_rules,
    mine_rules,
    parse_rules,
    select_by_coverage,
    select_top_k,
    sweep,
)

DISTRIBUTION = {(0, 1): 0.5, (1, 2): 0.3, (0, 2): 0.2}


def _ancestor_tuple(tree, p, a):
    chain_p = tree.ancestors(p)
    chain_a = tree.ancestors(a)
    common = next(node for node in chain_p if node in chain_a)
    return DistanceTuple(chain_p.index(common), chain_a.index(common))


def _rules(counts, k=None, syntax='gold'):
    entries = tuple(
        (DistanceTuple(*key), count)
        for key, count in sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    )
    return RuleSet(entries=entries, language='en', syntax_source=syntax, k=k)


def _random_tree(rng, max_len=20):
    n = int(rng.integers(1, max_len + 1))
    order = rng.permutation(n) + 1
    heads = [0] * n
    for j in range(1, n):
        heads[order[j] - 1] = int(order[rng.integers(0, j)])
    return tree_from_heads(heads)


def _within_k_hops_up(tree, p, a, k):
    """a から k 回以内に親を辿って p の祖先に届くか"""
    above_p = set(tree.ancestors(p))
    node = a
    for _ in range(k + 1):
        if node in above_p:
            return True
        node = tree.parent[node]
    return False


class RuleSetTestCase(SimpleTestCase):
    """ルールの抽出と選択"""

    def test_mined_counts_equal_synthesis_truth(self):
        result = synth_corpus(seed=21, n_sentences=80, max_len=10, tuple_distribution=DISTRIBUTION)
        rules = mine_rules(result.corpus, 'gold', 'en')
        self.assertEqual(dict(rules.entries), dict(result.truth.tuple_counts))
        self.assertEqual(rules.total, result.truth.stats.n_arguments)
        self.assertIsNone(rules.k)

    def test_frequencies_track_requested_distribution(self):
        result = synth_corpus(seed=8, n_sentences=400, max_len=12, tuple_distribution=DISTRIBUTION)
        rules = mine_rules(result.corpus, 'gold')
        self.assertEqual(rules.tuples[0], (0, 1))
        for key, count in rules.entries:
            self.assertAlmostEqual(count / rules.total, DISTRIBUTION[tuple(key)], delta=0.05)

    def test_rank_order_breaks_ties_by_tuple(self):
        sentence = make_sentence(
            ['a', 'b', 'c', 'd'], [0, 1, 1, 2],
            frames={1: (None, {2: 'A0', 4: 'A1'}), 3: (None, {1: 'A0'})},
        )
        rules = mine_rules([sentence], 'gold')
        # (0,1) と (0,2) と (1,0) が各1件
        self.assertEqual(rules.tuples, ((0, 1), (0, 2), (1, 0)))

    def test_threads_do_not_change_rules(self):
        corpus = synth_corpus(seed=3, n_sentences=40, max_len=9, tuple_distribution=DISTRIBUTION).corpus
        self.assertEqual(mine_rules(corpus, 'gold', threads=4), mine_rules(corpus, 'gold', threads=1))

    def test_sentence_order_does_not_change_rules(self):
        rng = np.random.default_rng(17)
        corpus = synth_corpus(seed=6, n_sentences=60, max_len=10, tuple_distribution=DISTRIBUTION, noise_rate=0.2).corpus
        expected = mine_rules(corpus, 'pred', 'en')
        for _ in range(20):
            shuffled = [corpus[i] for i in rng.permutation(len(corpus))]
            self.assertEqual(mine_rules(shuffled, 'pred', 'en').entries, expected.entries)

    def test_no_arguments_is_data_error(self):
        with self.assertRaises(DataError):
            mine_rules([make_sentence(['a'], [0])], 'gold')

    def test_select_by_coverage(self):
        rules = _rules({(0, 1): 5, (1, 2): 3, (0, 2): 2})
        self.assertEqual(select_by_coverage(rules, 0.5).k, 1)
        self.assertEqual(select_by_coverage(rules, 0.8).k, 2)
        self.assertEqual(select_by_coverage(rules, 0.99).k, 3)
        self.assertEqual(select_by_coverage(rules, 1.0).k, 3)
        with self.assertRaises(ConfigError):
            select_by_coverage(rules, 0.0)

    def test_select_top_k_bounds(self):
        rules = _rules({(0, 1): 5, (1, 2): 3})
        self.assertEqual(select_top_k(rules, 0).active, frozenset())
        self.assertEqual(select_top_k(rules, 1).active, {DistanceTuple(0, 1)})
        with self.assertRaises(ConfigError):
            select_top_k(rules, 3)
        with self.assertRaises(ConfigError):
            rules.active

    def test_rule_file_round_trip(self):
        rules = select_top_k(_rules({(0, 1): 5, (1, 2): 3, (0, 2): 2}), 2)
        text = format_rules(rules)
        self.assertTrue(text.startswith('#language=en\n#syntax=gold\n#k=2\n'))
        self.assertEqual(parse_rules(text), rules)

    def test_rule_file_errors(self):
        with self.assertRaises(RuleFileError):
            parse_rules('#k=1\n1\t2\t3\n0\t1\t5\n')
        with self.assertRaises(RuleFileError):
            parse_rules('0\t1\n')
        with self.assertRaises(RuleFileError):
            parse_rules('0\t1\tx\n')
        with self.assertRaises(RuleFileError):
            parse_rules('#k=4\n0\t1\t5\n')
        with self.assertRaises(RuleFileError):
            parse_rules('#syntax=silver\n0\t1\t5\n')
        with self.assertRaises(RuleFileError):
            parse_rules('0\t1\t5\n0\t1\t5\n')


class CoverageTestCase(SimpleTestCase):
    """カバー率と削減率"""

    def setUp(self):
        self.corpus = synth_corpus(seed=4, n_sentences=60, max_len=10, tuple_distribution=DISTRIBUTION).corpus
        self.rules = mine_rules(self.corpus, 'gold')

    def test_sweep_is_monotone_and_reaches_full_coverage(self):
        reports = sweep(self.rules, self.corpus)
        self.assertEqual([report.k for report in reports], list(range(len(self.rules) + 1)))
        for previous, current in zip(reports, reports[1:]):
            self.assertGreaterEqual(current.coverage, previous.coverage)
            self.assertLessEqual(current.reduction, previous.reduction)
        self.assertEqual(reports[-1].coverage, 1.0)
        self.assertEqual(reports[0].coverage, 0.0)

    def test_coverage_counts(self):
        report = coverage(select_top_k(self.rules, 1), self.corpus)
        self.assertEqual(report.covered, self.rules.entries[0][1])
        self.assertEqual(report.gold, self.rules.total)
        self.assertAlmostEqual(report.coverage, self.rules.entries[0][1] / self.rules.total)
        self.assertEqual(report.as_row().split('\t')[0], '1')

    def test_unselected_rule_uses_all_entries(self):
        self.assertEqual(coverage(self.rules, self.corpus).k, len(self.rules))

    def test_pred_syntax_can_lose_coverage(self):
        noisy = synth_corpus(seed=4, n_sentences=60, max_len=10, tuple_distribution=DISTRIBUTION, noise_rate=0.6)
        mined = mine_rules(noisy.corpus, 'gold')
        rules = select_top_k(mined, len(mined))
        self.assertEqual(coverage(rules, noisy.corpus, 'gold').coverage, 1.0)
        self.assertLess(coverage(rules, noisy.corpus, 'pred').coverage, 1.0)

    def test_large_corpus_recovers_distribution(self):
        corpus = synth_corpus(seed=31, n_sentences=2000, max_len=12, tuple_distribution=DISTRIBUTION).corpus
        rules = mine_rules(corpus, 'gold')
        self.assertEqual(rules.tuples, ((0, 1), (1, 2), (0, 2)))
        self.assertEqual(select_by_coverage(rules, 0.99).k, 3)
        reports = sweep(rules, corpus)
        expected = [0.0, 0.5, 0.8, 1.0]
        for report, value in zip(reports, expected):
            self.assertAlmostEqual(report.coverage, value, delta=0.03)
        self.assertEqual(reports[-1].coverage, 1.0)


class PrunerTestCase(SimpleTestCase):
    """候補マスク"""

    def test_keep_your_heart_with_child_rule(self):
        tree = build_tree(keep_your_heart(), 'gold')
        mask = prune(tree, 1, [(0, 1)])
        # Keep 自身と子（heart, open）だけが残り、your / and / mind は落ちる
        self.assertEqual(mask.retained, (1, 3, 6))
        for pruned in (2, 4, 5):
            self.assertNotIn(pruned, mask)
        self.assertEqual(mask.lost([3, 6]), ())
        self.assertEqual(mask.lost([2, 3]), (2,))

    def test_empty_rule_keeps_only_the_predicate(self):
        tree = build_tree(keep_your_heart(), 'gold')
        self.assertEqual(prune(tree, 3, []).retained, (3,))

    def test_matches_brute_force(self):
        corpus = synth_corpus(seed=12, n_sentences=40, max_len=12, tuple_distribution=DISTRIBUTION).corpus
        active = {DistanceTuple(0, 1), DistanceTuple(1, 1), DistanceTuple(2, 0)}
        for sentence in corpus:
            tree = build_tree(sentence, 'gold')
            for pred in sentence.predicates:
                expected = tuple(
                    a for a in range(1, len(sentence) + 1)
                    if a == pred or _ancestor_tuple(tree, pred, a) in active
                )
                self.assertEqual(prune(tree, pred, active).retained, expected)

    def test_random_rules_match_brute_force(self):
        rng = np.random.default_rng(19)
        universe = [DistanceTuple(d_p, d_a) for d_p in range(4) for d_a in range(4)]
        for _ in range(1000):
            tree = _random_tree(rng)
            size = int(rng.integers(0, len(universe) + 1))
            active = {universe[i] for i in rng.choice(len(universe), size=size, replace=False)}
            pred = int(rng.integers(1, len(tree) + 1))
            expected = tuple(
                a for a in range(1, len(tree) + 1)
                if a == pred or _ancestor_tuple(tree, pred, a) in active
            )
            self.assertEqual(prune(tree, pred, active).retained, expected)

    def test_larger_k_never_retains_fewer(self):
        corpus = synth_corpus(seed=23, n_sentences=40, max_len=12, tuple_distribution=DISTRIBUTION, noise_rate=0.3).corpus
        rules = mine_rules(corpus, 'pred')
        for sentence in corpus:
            tree = build_tree(sentence, 'pred')
            for pred in sentence.predicates:
                previous = set()
                for k in range(len(rules) + 1):
                    retained = set(prune(tree, pred, select_top_k(rules, k)).retained)
                    self.assertTrue(previous <= retained, (pred, k))
                    previous = retained
                previous = set()
                for k in range(len(tree) + 1):
                    retained = set(prune_korder(tree, pred, k).retained)
                    self.assertTrue(previous <= retained, (pred, k))
                    previous = retained
                self.assertEqual(previous, set(no_prune(tree, pred).retained))

    def test_korder_matches_brute_force(self):
        rng = np.random.default_rng(29)
        for _ in range(500):
            tree = _random_tree(rng)
            pred = int(rng.integers(1, len(tree) + 1))
            k = int(rng.integers(0, 6))
            expected = tuple(
                a for a in range(1, len(tree) + 1)
                if a == pred or _within_k_hops_up(tree, pred, a, k)
            )
            self.assertEqual(prune_korder(tree, pred, k).retained, expected)

    def test_recall_under_prune_equals_coverage(self):
        corpus = synth_corpus(seed=27, n_sentences=80, max_len=10, tuple_distribution=DISTRIBUTION, noise_rate=0.4).corpus
        rules = mine_rules(corpus, 'gold')
        for syntax in ('gold', 'pred'):
            for k in range(len(rules) + 1):
                selected = select_top_k(rules, k)
                expected = coverage(selected, corpus, syntax)
                report = prune_stats(corpus, selected, syntax)
                self.assertEqual(report.recall, expected.coverage, (syntax, k))
                self.assertEqual(report.retained_gold, expected.covered)
                self.assertEqual(report.retained_pairs, expected.retained_pairs)
                self.assertEqual(report.all_pairs, expected.all_pairs)

    def test_korder_and_no_prune(self):
        tree = build_tree(keep_your_heart(), 'gold')
        self.assertEqual(prune_korder(tree, 1, 1).retained, (1, 3, 6))
        self.assertEqual(prune_korder(tree, 1, 2).retained, (1, 2, 3, 4, 5, 6))
        self.assertEqual(prune_korder(tree, 3, 0).retained, (1, 3))
        self.assertEqual(no_prune(tree, 4).retained, (1, 2, 3, 4, 5, 6))
        with self.assertRaises(ConfigError):
            prune_korder(tree, 1, -1)

    def test_pruner_validation(self):
        rules = _rules({(0, 1): 3, (0, 2): 1})
        with self.assertRaises(ConfigError):
            Pruner(mode='rule', rule=rules)
        with self.assertRaises(ConfigError):
            Pruner(mode='rule', rule=select_top_k(rules, 0))
        with self.assertRaises(ConfigError):
            Pruner(mode='beam')
        pruner = Pruner(mode='rule', rule=select_top_k(rules, 1), syntax_source='gold')
        self.assertEqual(pruner.sentence_masks(keep_your_heart())[1].retained, (1, 3, 6))
        self.assertEqual(pruner.sentence_masks(make_sentence(['a'], [0])), {})

    def test_prune_stats(self):
        corpus = [keep_your_heart()]
        rules = select_top_k(_rules({(0, 1): 2}), 1)
        report = prune_stats(corpus, rules, 'gold')
        self.assertEqual(report.all_pairs, 6)
        self.assertEqual(report.retained_pairs, 3)
        self.assertEqual(report.gold, 2)
        self.assertEqual(report.recall, 1.0)
        self.assertAlmostEqual(report.reduction, 0.5)
        self.assertAlmostEqual(report.positive_rate, 2 / 6)
        self.assertAlmostEqual(report.retained_positive_rate, 2 / 3)

        unpruned = prune_stats(corpus, None, 'gold', mode='none')
        self.assertEqual(unpruned.reduction, 0.0)
        self.assertEqual(unpruned.recall, 1.0)

    def test_prune_stats_records_lost_tuples(self):
        sentence = make_sentence(
            ['Keep', 'your', 'heart'], [0, 3, 1], frames={1: ('keep.01', {2: 'A1', 3: 'A2'})},
        )
        report = prune_stats([sentence], select_top_k(_rules({(0, 1): 1}), 1), 'gold')
        self.assertEqual(report.retained_gold, 1)
        self.assertEqual(dict(report.lost_by_tuple), {DistanceTuple(0, 2): 1})
        self.assertIn('lost\t0\t2\t1', list(report.lines()))


class PruningCommandTestCase(TestCase):
    """extract_rules / coverage / sweep / prune_stats コマンド"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.corpus_path = os.path.join(self.tmp.name, 'train.conll')
        self.rules_path = os.path.join(self.tmp.name, 'rules.tsv')
        corpus = synth_corpus(seed=6, n_sentences=40, max_len=10, tuple_distribution=DISTRIBUTION).corpus
        save_conll09(corpus, self.corpus_path)

    def test_extract_then_coverage_and_sweep(self):
        call_command(
            'extract_rules', input=self.corpus_path, syntax='gold', language='en',
            coverage=1.0, out=self.rules_path, stdout=io.StringIO(),
        )
        with open(self.rules_path, encoding='utf-8') as handle:
            text = handle.read()
        rules = parse_rules(text)
        self.assertEqual(rules.k, len(rules))
        self.assertEqual(rules.language, 'en')
        self.assertEqual(rules.config['selection'], 'coverage=1.0')

        out = io.StringIO()
        call_command('coverage', rules=self.rules_path, input=self.corpus_path, stdout=out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], 'k\tcoverage\treduction')
        self.assertEqual(lines[1].split('\t')[1], '1.000000')

        out = io.StringIO()
        call_command('sweep', rules=self.rules_path, input=self.corpus_path, k_values='0-2', stdout=out)
        self.assertEqual([row.split('\t')[0] for row in out.getvalue().splitlines()[1:]], ['0', '1', '2'])

        out = io.StringIO()
        call_command('prune_stats', input=self.corpus_path, rules=self.rules_path, stdout=out)
        self.assertIn('recall\t1.000000', out.getvalue().splitlines())

    def test_extract_to_stdout_with_k(self):
        out = io.StringIO()
        call_command('extract_rules', input=self.corpus_path, syntax='gold', k=1, stdout=out)
        self.assertEqual(len(parse_rules(out.getvalue()).active), 1)

    def test_extract_requires_selection(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('extract_rules', input=self.corpus_path, stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_prune_stats_rule_mode_requires_rules(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('prune_stats', input=self.corpus_path, stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_parse_k_values(self):
        self.assertEqual(parse_k_values('0-3'), [0, 1, 2, 3])
        self.assertEqual(parse_k_values('0,1,5'), [0, 1, 5])
        with self.assertRaises(ConfigError):
            parse_k_values('a')
