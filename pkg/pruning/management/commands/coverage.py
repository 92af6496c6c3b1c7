"""
ルールのカバー率コマンド
"""
from experiments.command import ExperimentCommand
from pruning.ruleset import coverage, load_rules, select_top_k
from treebank.conll import read_conll09


class Command(ExperimentCommand):
    help = 'ルール（先頭 k 件）で保持される正解項の割合と候補削減率を表示します'

    def add_command_arguments(self, parser):
        parser.add_argument('--rules', required=True, help='ルールファイル')
        parser.add_argument('--input', required=True, help='評価用 CoNLL-2009 ファイル')
        parser.add_argument('--syntax', choices=['gold', 'pred'], default=None, help='構文列（省略時はルールと同じ）')
        parser.add_argument('--k', type=int, default=None, help='k を上書き')

    def run(self, **options):
        rules = load_rules(options['rules'])
        if options['k'] is not None:
            rules = select_top_k(rules, options['k'])
        corpus = read_conll09(options['input'], threads=options['threads'])
        report = coverage(rules, corpus, options['syntax'], threads=options['threads'])
        self.stdout.write("k\tcoverage\treduction")
        self.stdout.write(report.as_row())
        return {'k': report.k, 'coverage': report.coverage, 'reduction': report.reduction}
