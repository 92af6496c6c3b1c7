"""
採点コマンド
"""
from experiments.command import ExperimentCommand
from scoring.scorer import merge_senses, score
from treebank.conll import read_conll09


class Command(ExperimentCommand):
    help = '正解と予測の CoNLL-2009 ファイルから適合率・再現率・F1・語義正解率を表示します'

    def add_command_arguments(self, parser):
        parser.add_argument('--gold', required=True, help='正解 CoNLL-2009 ファイル')
        parser.add_argument('--pred', required=True, help='予測 CoNLL-2009 ファイル')
        parser.add_argument('--senses', default=None, help='PRED 列を取り込む別システムの出力（役割のみのモード用）')
        parser.add_argument('--include-senses', action='store_true', help='述語ごとの語義項目を F1 に含める')
        parser.add_argument('--report', default=None, help='レポートの出力先')

    def run(self, **options):
        gold = read_conll09(options['gold'], threads=options['threads'])
        predicted = read_conll09(options['pred'], threads=options['threads'])
        if options['senses']:
            predicted = merge_senses(predicted, read_conll09(options['senses'], threads=options['threads']))

        report = score(gold, predicted, include_senses=options['include_senses'], threads=options['threads'])
        lines = list(report.lines())
        for line in lines:
            self.stdout.write(line)

        if options['report']:
            header = (
                f"# config gold={options['gold']} pred={options['pred']} "
                f"senses={options['senses'] or ''} include_senses={options['include_senses']}"
            )
            with open(options['report'], 'w', encoding='utf-8') as handle:
                handle.write('\n'.join([header] + lines) + '\n')

        return {
            'precision': report.precision,
            'recall': report.recall,
            'f1': report.f1,
            'pd_accuracy': report.pd_accuracy,
        }
