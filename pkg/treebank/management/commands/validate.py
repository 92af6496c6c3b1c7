"""
CoNLL-2009 ファイルの検証コマンド
"""
import sys

from experiments.command import ExperimentCommand
from srl_toolkit.exceptions import DataError
from treebank.conll import parse_conll09, write_conll09, corpus_stats
from treebank.deptree import build_tree


class Command(ExperimentCommand):
    help = 'CoNLL-2009 ファイルを検証し、往復変換（parse→write）の一致を確認します'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--input',
            default='-',
            help='入力ファイル（"-" は標準入力、デフォルト: -）'
        )
        parser.add_argument(
            '--check-trees',
            action='store_true',
            help='gold/pred 両方の構文木も検証する'
        )

    def run(self, **options):
        if options['input'] == '-':
            data = sys.stdin.buffer.read()
        else:
            with open(options['input'], 'rb') as handle:
                data = handle.read()

        corpus = parse_conll09(data, threads=options['threads'])
        rewritten = write_conll09(corpus)
        if parse_conll09(rewritten) != corpus:
            raise DataError("round trip changed the corpus")

        if options['check_trees']:
            for sentence in corpus:
                build_tree(sentence, 'gold')
                build_tree(sentence, 'pred')

        stats = corpus_stats(corpus)
        canonical = rewritten == data
        self.stdout.write(
            f"valid sentences={stats.n_sentences} tokens={stats.n_tokens} "
            f"canonical={'yes' if canonical else 'no'}"
        )
        return {'sentences': stats.n_sentences, 'canonical': canonical}
