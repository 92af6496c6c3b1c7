import io
import os
import tempfile

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from srl_toolkit.exceptions import (
    ConfigError,
    ConllFormatError,
    CycleError,
    HeadRangeError,
    MultipleRootsError,
    SynthesisError,
)
from .builders import keep_your_heart, make_sentence
from .conll import corpus_stats, parse_conll09, write_conll09
from .deptree import DistanceTuple, build_tree, distance_tuple, tree_from_heads
from .synth import synth_corpus

KEEP_TEXT = (
    "1\tKeep\tkeep\tkeep\tVB\tVB\t_\t_\t0\t0\tROOT\tROOT\tY\tkeep.01\t_\n"
    "2\tyour\tyour\tyour\tPRP\tPRP\t_\t_\t3\t3\tNMOD\tNMOD\t_\t_\t_\n"
    "3\theart\theart\theart\tNN\tNN\t_\t_\t1\t1\tOBJ\tOBJ\t_\t_\tA1\n"
    "4\tand\tand\tand\tCC\tCC\t_\t_\t3\t3\tCOORD\tCOORD\t_\t_\t_\n"
    "5\tmind\tmind\tmind\tNN\tNN\t_\t_\t3\t4\tCONJ\tCONJ\t_\t_\t_\n"
    "6\topen\topen\topen\tJJ\tJJ\t_\t_\t1\t1\tOPRD\tOPRD\t_\t_\tA2\n"
    "\n"
)

NO_PREDICATE_TEXT = (
    "1\tYes\tyes\tyes\tUH\tUH\t_\t_\t0\t0\tROOT\tROOT\t_\t_\n"
    "\n"
)


def _brute_force_tuple(chain_p, chain_a):
    """祖先列を突き合わせて最初の共通祖先を探す"""
    depth_in_a = {node: depth for depth, node in enumerate(chain_a)}
    for d_p, node in enumerate(chain_p):
        if node in depth_in_a:
            return DistanceTuple(d_p, depth_in_a[node])
    raise AssertionError('no common ancestor')


def _random_tree(rng, max_len=50):
    """ラベルを入れ替えた非射影も含む単一根の木"""
    n = int(rng.integers(1, max_len + 1))
    heads = [0] + [int(rng.integers(1, node)) for node in range(2, n + 1)]
    relabel = {0: 0}
    relabel.update({old: int(new) for old, new in zip(range(1, n + 1), rng.permutation(n) + 1)})
    shuffled = [0] * n
    for node, head in enumerate(heads, start=1):
        shuffled[relabel[node] - 1] = relabel[head]
    return tree_from_heads(shuffled)


def _path_lengths(tree, source):
    """無向の木（人工根を含む）での source からの辺数"""
    neighbours = {node: list(children) for node, children in tree.children.items()}
    for node, head in tree.parent.items():
        neighbours.setdefault(node, []).append(head)
    lengths = {source: 0}
    frontier = [source]
    while frontier:
        following = []
        for node in frontier:
            for other in neighbours.get(node, ()):
                if other not in lengths:
                    lengths[other] = lengths[node] + 1
                    following.append(other)
        frontier = following
    return lengths


class ConllTestCase(SimpleTestCase):
    """CoNLL-2009 の読み書き"""

    def test_canonical_round_trip(self):
        data = (KEEP_TEXT + NO_PREDICATE_TEXT).encode('utf-8')
        corpus = parse_conll09(data)
        self.assertEqual(len(corpus), 2)
        self.assertEqual(write_conll09(corpus), data)

    def test_parsed_fields(self):
        sentence = parse_conll09(KEEP_TEXT)[0]
        self.assertEqual(sentence.predicates, (1,))
        self.assertEqual(sentence.token(1).pred_sense, 'keep.01')
        self.assertIsNone(sentence.token(1).feat)
        self.assertEqual(sentence.token(5).head, 3)
        self.assertEqual(sentence.token(5).phead, 4)
        self.assertEqual(sentence.arguments(0), [(3, 'A1'), (6, 'A2')])

    def test_crlf_and_extra_blank_lines(self):
        text = '\n\n' + KEEP_TEXT.replace('\n', '\r\n') + '\n\n'
        corpus = parse_conll09(text)
        self.assertEqual(write_conll09(corpus), KEEP_TEXT.encode('utf-8'))

    def test_empty_input(self):
        self.assertEqual(parse_conll09(b''), [])
        self.assertEqual(write_conll09([]), b'')

    def test_sentence_without_predicates(self):
        sentence = parse_conll09(NO_PREDICATE_TEXT)[0]
        self.assertEqual(sentence.predicates, ())
        self.assertEqual(sentence.token(1).apreds, ())

    def test_unicode_forms(self):
        text = KEEP_TEXT.replace('Keep', '保つ')
        self.assertEqual(write_conll09(parse_conll09(text.encode('utf-8'))), text.encode('utf-8'))

    def test_threads_do_not_change_result(self):
        data = (KEEP_TEXT + NO_PREDICATE_TEXT) * 5
        self.assertEqual(parse_conll09(data, threads=4), parse_conll09(data, threads=1))

    def test_wrong_apred_count_reports_line(self):
        lines = KEEP_TEXT.splitlines(keepends=True)
        lines[3] = lines[3].rstrip('\n') + '\t_\n'
        with self.assertRaises(ConllFormatError) as ctx:
            parse_conll09(''.join(lines))
        self.assertEqual(ctx.exception.line, 4)

    def test_too_few_columns(self):
        with self.assertRaises(ConllFormatError) as ctx:
            parse_conll09("\n1\tYes\tyes\n")
        self.assertEqual(ctx.exception.line, 2)

    def test_head_out_of_range(self):
        with self.assertRaises(ConllFormatError) as ctx:
            parse_conll09(KEEP_TEXT.replace('\t3\t3\tNMOD', '\t9\t3\tNMOD'))
        self.assertEqual(ctx.exception.line, 2)

    def test_self_head(self):
        with self.assertRaises(ConllFormatError):
            parse_conll09(KEEP_TEXT.replace('\t3\t3\tNMOD', '\t2\t3\tNMOD'))

    def test_id_out_of_sequence(self):
        with self.assertRaises(ConllFormatError):
            parse_conll09(KEEP_TEXT.replace('4\tand', '7\tand'))

    def test_pred_without_fillpred(self):
        with self.assertRaises(ConllFormatError):
            parse_conll09(KEEP_TEXT.replace('\tY\tkeep.01', '\t_\tkeep.01'))

    def test_bad_fillpred(self):
        with self.assertRaises(ConllFormatError):
            parse_conll09(NO_PREDICATE_TEXT.replace('ROOT\t_\t_', 'ROOT\tN\t_'))

    def test_non_numeric_head(self):
        with self.assertRaises(ConllFormatError):
            parse_conll09(NO_PREDICATE_TEXT.replace('\t0\t0\t', '\tx\t0\t'))

    def test_corpus_stats(self):
        stats = corpus_stats(parse_conll09(KEEP_TEXT + NO_PREDICATE_TEXT))
        self.assertEqual(stats.as_row(), '2\t7\t1\t2')

    def test_with_frames_replaces_roles_and_senses(self):
        sentence = keep_your_heart()
        updated = sentence.with_frames([{2: 'A0'}], senses=['keep.02'])
        self.assertEqual(updated.arguments(0), [(2, 'A0')])
        self.assertEqual(updated.token(1).pred_sense, 'keep.02')
        self.assertEqual(sentence.with_frames([{}], senses=[None]).token(1).pred_sense, 'keep.01')


class DepTreeTestCase(SimpleTestCase):
    """依存構造木と距離タプル"""

    def test_keep_tree_shape(self):
        tree = build_tree(keep_your_heart(), 'gold')
        self.assertEqual(tree.roots, (1,))
        self.assertEqual(tree.children[1], (3, 6))
        self.assertEqual(tree.depth[1], 1)
        self.assertEqual(tree.depth[2], 3)
        self.assertEqual(tree.height(), 3)

    def test_pred_syntax_uses_phead(self):
        sentence = parse_conll09(KEEP_TEXT)[0]
        self.assertEqual(build_tree(sentence, 'gold').parent[5], 3)
        self.assertEqual(build_tree(sentence, 'pred').parent[5], 4)

    def test_unknown_syntax_source(self):
        with self.assertRaises(ConfigError):
            build_tree(keep_your_heart(), 'silver')

    def test_basic_tuples(self):
        tree = build_tree(keep_your_heart(), 'gold')
        self.assertEqual(distance_tuple(tree, 1, 1), (0, 0))
        self.assertEqual(distance_tuple(tree, 1, 3), (0, 1))
        self.assertEqual(distance_tuple(tree, 3, 1), (1, 0))
        self.assertEqual(distance_tuple(tree, 3, 6), (1, 1))
        self.assertEqual(distance_tuple(tree, 1, 2), (0, 2))
        self.assertEqual(distance_tuple(tree, 6, 5), (1, 2))
        self.assertEqual(str(distance_tuple(tree, 6, 5)), '(1,2)')

    def test_cycle_detected(self):
        with self.assertRaises(CycleError) as ctx:
            tree_from_heads([0, 3, 2])
        self.assertIn(ctx.exception.node, (2, 3))

    def test_full_cycle_without_root(self):
        with self.assertRaises(CycleError):
            tree_from_heads([2, 1])

    def test_head_out_of_range(self):
        with self.assertRaises(HeadRangeError):
            tree_from_heads([0, 5])

    def test_multiple_roots(self):
        tree = tree_from_heads([0, 0, 1])
        self.assertEqual(tree.roots, (1, 2))
        # 別々の根の下にあるトークンは人工根を共通祖先とする
        self.assertEqual(distance_tuple(tree, 3, 2), (2, 1))
        with self.assertRaises(MultipleRootsError):
            tree_from_heads([0, 0, 1], allow_multi_root=False)

    def test_single_token(self):
        tree = tree_from_heads([0])
        self.assertEqual(distance_tuple(tree, 1, 1), (0, 0))

    def test_matches_ancestor_chain_on_random_trees(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            tree = _random_tree(rng)
            nodes = sorted(tree.parent)
            chains = {node: tree.ancestors(node) for node in nodes}
            mismatches = [
                (p, a) for p in nodes for a in nodes
                if distance_tuple(tree, p, a) != _brute_force_tuple(chains[p], chains[a])
            ]
            self.assertEqual(mismatches, [])

    def test_tuple_sums_to_undirected_path_length(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            tree = _random_tree(rng, max_len=30)
            for p in tree.parent:
                lengths = _path_lengths(tree, p)
                for a in tree.parent:
                    key = distance_tuple(tree, p, a)
                    self.assertEqual(key.d_p + key.d_a, lengths[a], (p, a))

    def test_symmetry_of_swapped_pair(self):
        tree = build_tree(keep_your_heart(), 'gold')
        for p in range(1, 7):
            for a in range(1, 7):
                forward = distance_tuple(tree, p, a)
                self.assertEqual(distance_tuple(tree, a, p), (forward.d_a, forward.d_p))


class SynthTestCase(SimpleTestCase):
    """合成コーパス"""

    def test_same_seed_same_bytes(self):
        first = synth_corpus(seed=3, n_sentences=20, max_len=8, noise_rate=0.3)
        second = synth_corpus(seed=3, n_sentences=20, max_len=8, noise_rate=0.3)
        self.assertEqual(write_conll09(first.corpus), write_conll09(second.corpus))
        other = synth_corpus(seed=4, n_sentences=20, max_len=8, noise_rate=0.3)
        self.assertNotEqual(write_conll09(first.corpus), write_conll09(other.corpus))

    def test_output_round_trips_and_trees_are_valid(self):
        result = synth_corpus(seed=5, n_sentences=30, max_len=10, noise_rate=0.5)
        data = write_conll09(result.corpus)
        self.assertEqual(parse_conll09(data), result.corpus)
        for sentence in result.corpus:
            self.assertEqual(len(build_tree(sentence, 'gold', allow_multi_root=False).roots), 1)
            self.assertEqual(len(build_tree(sentence, 'pred', allow_multi_root=False).roots), 1)
            self.assertTrue(sentence.predicates)

    def test_round_trip_over_many_seeds(self):
        for seed in range(1000):
            corpus = synth_corpus(seed=seed, n_sentences=2, max_len=6, noise_rate=0.3).corpus
            data = write_conll09(corpus)
            parsed = parse_conll09(data)
            self.assertEqual(parsed, corpus, seed)
            self.assertEqual(write_conll09(parsed), data, seed)

    def test_stats_are_additive_over_concatenation(self):
        rng = np.random.default_rng(13)
        for seed in range(50):
            corpus = synth_corpus(seed=seed, n_sentences=12, max_len=8).corpus
            cut = int(rng.integers(0, len(corpus) + 1))
            head, tail = corpus[:cut], corpus[cut:]
            self.assertEqual(corpus_stats(head + tail), corpus_stats(head) + corpus_stats(tail))
            self.assertEqual(corpus_stats(head + tail), corpus_stats(corpus))
        self.assertEqual(corpus_stats([]), corpus_stats([]) + corpus_stats([]))

    def test_truth_counts_match_gold_tuples(self):
        distribution = {(0, 1): 0.5, (1, 2): 0.3, (0, 2): 0.2}
        result = synth_corpus(seed=11, n_sentences=50, max_len=10, tuple_distribution=distribution)
        observed = {}
        for sentence in result.corpus:
            tree = build_tree(sentence, 'gold')
            for slot, pred in enumerate(sentence.predicates):
                for arg, _ in sentence.arguments(slot):
                    key = distance_tuple(tree, pred, arg)
                    observed[key] = observed.get(key, 0) + 1
        self.assertEqual(observed, dict(result.truth.tuple_counts))
        self.assertEqual(sum(observed.values()), result.truth.stats.n_arguments)
        self.assertTrue(set(observed) <= {DistanceTuple(*key) for key in distribution})

    def test_zero_noise_copies_heads(self):
        for sentence in synth_corpus(seed=2, n_sentences=10, max_len=6).corpus:
            self.assertEqual([t.head for t in sentence.tokens], [t.phead for t in sentence.tokens])

    def test_sentence_lengths_respect_bounds(self):
        for sentence in synth_corpus(seed=2, n_sentences=20, max_len=5, min_len=5).corpus:
            self.assertEqual(len(sentence), 5)

    def test_invalid_arguments(self):
        with self.assertRaises(SynthesisError):
            synth_corpus(seed=1, n_sentences=1, max_len=1)
        with self.assertRaises(SynthesisError):
            synth_corpus(seed=1, n_sentences=1, max_len=4, min_len=6)
        with self.assertRaises(SynthesisError):
            synth_corpus(seed=1, n_sentences=1, max_len=4, role_inventory=())
        with self.assertRaises(SynthesisError):
            synth_corpus(seed=1, n_sentences=1, max_len=4, tuple_distribution={(0, 1): 0.0})

    def test_unplaceable_distribution(self):
        # 長さ2の木では d_a=5 を満たせない
        with self.assertRaises(SynthesisError):
            synth_corpus(seed=1, n_sentences=1, max_len=2, tuple_distribution={(0, 5): 1.0}, max_retries=5)

    def test_builder_matches_parsed_text(self):
        parsed = parse_conll09(KEEP_TEXT)[0]
        built = keep_your_heart()
        self.assertEqual([t.head for t in built.tokens], [t.head for t in parsed.tokens])
        self.assertEqual(built.arguments(0), parsed.arguments(0))
        sentence = make_sentence(['a', 'b'], [0, 1])
        self.assertEqual(sentence.predicates, ())


class TreebankCommandTestCase(TestCase):
    """synth / validate / stats コマンド"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_synth_then_validate_and_stats(self):
        out = io.StringIO()
        call_command(
            'synth', sentences=12, max_len=7, tuples='0,1:0.6;1,1:0.4', noise=0.2,
            out=self.path('synth.conll'), truth=self.path('truth.tsv'), seed=9, stdout=out,
        )
        out = io.StringIO()
        call_command('validate', input=self.path('synth.conll'), check_trees=True, stdout=out)
        self.assertIn('valid sentences=12', out.getvalue())
        self.assertIn('canonical=yes', out.getvalue())

        out = io.StringIO()
        call_command('stats', input=self.path('synth.conll'), name='synth', stdout=out)
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], 'dataset\tsent\ttoken\tpred\targ')
        self.assertTrue(lines[1].startswith('synth\t12\t'))

        with open(self.path('truth.tsv'), encoding='utf-8') as handle:
            truth = handle.read().splitlines()
        self.assertTrue(truth[0].startswith('#stats=12\t'))
        self.assertEqual(int(truth[0].split('\t')[-1]), sum(int(row.split('\t')[2]) for row in truth[1:]))

    def test_synth_to_stdout_is_deterministic(self):
        first, second = io.StringIO(), io.StringIO()
        call_command('synth', sentences=5, seed=4, stdout=first)
        call_command('synth', sentences=5, seed=4, stdout=second)
        self.assertEqual(first.getvalue(), second.getvalue())
        self.assertEqual(len(parse_conll09(first.getvalue())), 5)

    def test_validate_reports_noncanonical_input(self):
        with open(self.path('loose.conll'), 'w', encoding='utf-8') as handle:
            handle.write('\n' + KEEP_TEXT)
        out = io.StringIO()
        call_command('validate', input=self.path('loose.conll'), stdout=out)
        self.assertIn('canonical=no', out.getvalue())

    def test_validate_bad_file_exit_code(self):
        with open(self.path('bad.conll'), 'w', encoding='utf-8') as handle:
            handle.write(KEEP_TEXT.replace('4\tand', '9\tand'))
        with self.assertRaises(CommandError) as ctx:
            call_command('validate', input=self.path('bad.conll'), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn('error=ConllFormatError', str(ctx.exception))
        self.assertIn('line=4', str(ctx.exception))

    def test_missing_file_is_data_error(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('stats', input=self.path('missing.conll'), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 3)

    def test_bad_tuple_distribution_is_config_error(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('synth', tuples='0-1:1.0', stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)
