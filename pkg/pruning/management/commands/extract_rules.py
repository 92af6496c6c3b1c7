"""
構文ルール抽出コマンド
"""
from dataclasses import replace

from experiments.command import ExperimentCommand
from srl_toolkit.exceptions import ConfigError
from pruning.ruleset import mine_rules, save_rules, select_by_coverage, select_top_k, format_rules
from treebank.conll import read_conll09


class Command(ExperimentCommand):
    help = '学習コーパスから距離タプルの頻度表を作り、top-k またはカバー率でルールを選択します'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', required=True, help='学習用 CoNLL-2009 ファイル')
        parser.add_argument('--syntax', choices=['gold', 'pred'], default='pred', help='構文列（デフォルト: pred）')
        parser.add_argument('--language', default='xx', help='言語タグ')
        group = parser.add_mutually_exclusive_group()
        group.add_argument('--coverage', type=float, default=None, help='目標カバー率（例: 0.99）')
        group.add_argument('--k', type=int, default=None, help='先頭 k 件を選択')
        parser.add_argument('--out', default='-', help='ルールファイルの出力先（"-" は標準出力）')

    def run(self, **options):
        corpus = read_conll09(options['input'], threads=options['threads'])
        rules = mine_rules(corpus, options['syntax'], options['language'], threads=options['threads'])
        if options['k'] is not None:
            rules = select_top_k(rules, options['k'])
        elif options['coverage'] is not None:
            rules = select_by_coverage(rules, options['coverage'])
        else:
            raise ConfigError("one of --coverage or --k is required")

        selection = f"k={options['k']}" if options['k'] is not None else f"coverage={options['coverage']}"
        provenance = {
            'command': 'extract_rules',
            'input': options['input'],
            'syntax': options['syntax'],
            'language': options['language'],
            'selection': selection,
            'seed': str(options['seed']),
        }
        rules = replace(rules, config=provenance)
        if options['out'] == '-':
            self.stdout.write(format_rules(rules), ending='')
        else:
            save_rules(rules, options['out'])
        return {'distinct': len(rules), 'k': rules.k, 'arguments': rules.total}
