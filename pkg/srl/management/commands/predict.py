"""
予測コマンド
"""
from dataclasses import replace

from experiments.command import ExperimentCommand
from pruning.ruleset import load_rules
from srl.arguments import ARCHITECTURE_FLAGS, add_architecture_arguments, add_flags, add_pruning_arguments, collect_overrides
from srl.features import load_external_embeddings
from srl.model import SRLModel
from srl.trainer import make_pruner
from srl_toolkit.exceptions import ConfigError
from treebank.conll import read_conll09, write_conll09

ARCHITECTURE_NAMES = [dest for _, dest, _, _ in ARCHITECTURE_FLAGS] + ['mode', 'use_pos', 'use_lemma']


class Command(ExperimentCommand):
    help = 'チェックポイントで意味役割（end-to-end では語義も）を予測し、CoNLL-2009 形式で出力します'

    def add_command_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='学習済みチェックポイント')
        parser.add_argument('--input', required=True, help='入力 CoNLL-2009 ファイル（述語は FILLPRED で指定済み）')
        parser.add_argument('--out', default='-', help='出力先（"-" は標準出力）')
        parser.add_argument('--contextual', default=None, help='入力コーパスの文脈ベクトルファイル')
        add_architecture_arguments(parser)
        add_pruning_arguments(parser)
        add_flags(parser, [('--korder', 'korder', int, 'k-order 枝刈りの k'), ('--top-k', 'top_k', int, 'ルールの k')])

    def run(self, **options):
        model, rules, _ = SRLModel.load(options['checkpoint'])
        config = model.config

        # 重みの形に関わる設定はチェックポイントと一致していなければならない
        requested = collect_overrides(options, ARCHITECTURE_NAMES)
        conflicts = {
            key: (value, getattr(config, key))
            for key, value in requested.items()
            if value != getattr(config, key)
        }
        if conflicts:
            details = ' '.join(f"{key}={flag}!={saved}" for key, (flag, saved) in sorted(conflicts.items()))
            raise ConfigError(f"flags conflict with checkpoint architecture: {details}")

        pruning = collect_overrides(options, ['syntax', 'prune', 'korder', 'top_k'])
        config = replace(config, **pruning)
        if options['rules']:
            rules = load_rules(options['rules'])
        model.config = config
        pruner = make_pruner(config, rules)

        corpus = read_conll09(options['input'], threads=options['threads'])
        external = None
        if config.contextual_dim:
            if not options['contextual']:
                raise ConfigError("checkpoint uses contextual vectors; pass --contextual")
            external = load_external_embeddings(options['contextual'], corpus, config.contextual_dim)

        predicted = model.predict(corpus, pruner, external, threads=options['threads'])
        data = write_conll09(predicted)
        if options['out'] == '-':
            self.stdout.write(data.decode('utf-8'), ending='')
        else:
            with open(options['out'], 'wb') as handle:
                handle.write(data)
        arcs = sum(1 for sentence in predicted for token in sentence.tokens for role in token.apreds if role)
        return {'sentences': len(predicted), 'arcs': arcs, 'prune': pruner.mode}
