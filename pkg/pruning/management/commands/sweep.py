"""
top-k 掃引コマンド
"""
from experiments.command import ExperimentCommand
from srl_toolkit.exceptions import ConfigError
from pruning.ruleset import load_rules, sweep
from treebank.conll import read_conll09


def parse_k_values(text):
    """'0,1,5' や '0-20' を整数リストに変換"""
    values = []
    for part in filter(None, (item.strip() for item in text.split(','))):
        try:
            if '-' in part:
                low, high = (int(value) for value in part.split('-'))
                values.extend(range(low, high + 1))
            else:
                values.append(int(part))
        except ValueError:
            raise ConfigError(f"bad k value {part!r}")
    return values


class Command(ExperimentCommand):
    help = 'k ごとのカバー率と候補削減率の表を出力します'

    def add_command_arguments(self, parser):
        parser.add_argument('--rules', required=True, help='ルールファイル')
        parser.add_argument('--input', required=True, help='評価用 CoNLL-2009 ファイル')
        parser.add_argument('--syntax', choices=['gold', 'pred'], default=None, help='構文列（省略時はルールと同じ）')
        parser.add_argument('--k-values', default=None, help="k の一覧（例: '0-20' や '0,1,5,20'、既定は 0..全件）")

    def run(self, **options):
        rules = load_rules(options['rules'])
        corpus = read_conll09(options['input'], threads=options['threads'])
        k_values = parse_k_values(options['k_values']) if options['k_values'] else None
        reports = sweep(rules, corpus, k_values, options['syntax'], threads=options['threads'])
        self.stdout.write("k\tcoverage\treduction")
        for report in reports:
            self.stdout.write(report.as_row())
        return {'rows': len(reports), 'final_coverage': reports[-1].coverage if reports else None}
