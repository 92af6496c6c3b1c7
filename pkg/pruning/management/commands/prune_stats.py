"""
枝刈り統計コマンド
"""
from experiments.command import ExperimentCommand
from srl_toolkit.exceptions import ConfigError
from pruning.pruner import DEFAULT_KORDER, prune_stats
from pruning.ruleset import load_rules
from treebank.conll import read_conll09


class Command(ExperimentCommand):
    help = '候補対の保持数、正解項の再現率、タプル別の損失を表示します'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', required=True, help='CoNLL-2009 ファイル')
        parser.add_argument('--rules', default=None, help='ルールファイル（--mode rule のとき必須）')
        parser.add_argument('--syntax', choices=['gold', 'pred'], default=None, help='構文列（省略時はルールと同じ、なければ pred）')
        parser.add_argument('--mode', choices=['rule', 'korder', 'none'], default='rule', help='枝刈り方式')
        parser.add_argument('--korder', type=int, default=DEFAULT_KORDER, help=f'k-order の k（デフォルト: {DEFAULT_KORDER}）')

    def run(self, **options):
        rules = None
        if options['mode'] == 'rule':
            if not options['rules']:
                raise ConfigError("--rules is required with --mode rule")
            rules = load_rules(options['rules'])
        syntax = options['syntax'] or (rules.syntax_source if rules else 'pred')
        corpus = read_conll09(options['input'], threads=options['threads'])
        report = prune_stats(
            corpus, rules, syntax, mode=options['mode'], korder=options['korder'], threads=options['threads'],
        )
        for line in report.lines():
            self.stdout.write(line)
        return {'reduction': report.reduction, 'recall': report.recall, 'positive_rate': report.positive_rate}
