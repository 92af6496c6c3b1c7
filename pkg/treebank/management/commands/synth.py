"""
合成コーパス作成コマンド
"""
from experiments.command import ExperimentCommand
from srl_toolkit.exceptions import ConfigError
from treebank.conll import write_conll09
from treebank.synth import DEFAULT_ROLES, synth_corpus


def parse_tuple_distribution(text: str):
    """'0,1:0.5;1,2:0.3' 形式を {(0,1): 0.5, (1,2): 0.3} に変換"""
    distribution = {}
    for item in filter(None, (part.strip() for part in text.split(';'))):
        try:
            pair, weight = item.split(':')
            d_p, d_a = (int(value) for value in pair.split(','))
            distribution[(d_p, d_a)] = float(weight)
        except ValueError:
            raise ConfigError(f"bad tuple distribution item {item!r}, expected 'd_p,d_a:weight'")
        if d_p < 0 or d_a < 0:
            raise ConfigError(f"negative distance in {item!r}")
    if not distribution:
        raise ConfigError("empty tuple distribution")
    return distribution


class Command(ExperimentCommand):
    help = '距離タプル分布を指定して合成 CoNLL-2009 コーパスを作成します'

    def add_command_arguments(self, parser):
        parser.add_argument('--sentences', type=int, default=100, help='文数（デフォルト: 100）')
        parser.add_argument('--max-len', type=int, default=12, help='最大文長（デフォルト: 12）')
        parser.add_argument('--min-len', type=int, default=2, help='最小文長（デフォルト: 2）')
        parser.add_argument(
            '--roles',
            default=','.join(DEFAULT_ROLES),
            help='役割ラベル（カンマ区切り）'
        )
        parser.add_argument(
            '--tuples',
            default='0,1:1.0',
            help="距離タプル分布（例: '0,1:0.5;1,2:0.3;0,2:0.2'）"
        )
        parser.add_argument('--noise', type=float, default=0.0, help='予測主辞の付け替え率')
        parser.add_argument('--senses', type=int, default=3, help='補題あたりの語義数')
        parser.add_argument('--out', default='-', help='出力ファイル（"-" は標準出力）')
        parser.add_argument('--truth', default=None, help='正解タプル集計の出力先')

    def run(self, **options):
        if options['max_len'] < 2:
            raise ConfigError("--max-len must be at least 2")
        if not 0.0 <= options['noise'] <= 1.0:
            raise ConfigError("--noise must be within [0, 1]")
        roles = [role for role in options['roles'].split(',') if role]
        result = synth_corpus(
            seed=options['seed'],
            n_sentences=options['sentences'],
            max_len=options['max_len'],
            role_inventory=roles,
            tuple_distribution=parse_tuple_distribution(options['tuples']),
            noise_rate=options['noise'],
            n_senses=options['senses'],
            min_len=options['min_len'],
        )
        data = write_conll09(result.corpus)
        if options['out'] == '-':
            self.stdout.write(data.decode('utf-8'), ending='')
        else:
            with open(options['out'], 'wb') as handle:
                handle.write(data)

        if options['truth']:
            with open(options['truth'], 'w', encoding='utf-8') as handle:
                handle.write(f"#stats={result.truth.stats.as_row()}\n")
                for key, count in sorted(result.truth.tuple_counts.items(), key=lambda item: (-item[1], item[0])):
                    handle.write(f"{key.d_p}\t{key.d_a}\t{count}\n")

        stats = result.truth.stats
        return {'sentences': stats.n_sentences, 'arguments': stats.n_arguments}
