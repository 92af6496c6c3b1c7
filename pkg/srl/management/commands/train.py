"""
学習コマンド
"""
from experiments.command import ExperimentCommand
from pruning.ruleset import load_rules
from srl.arguments import (
    ARCHITECTURE_FLAGS,
    TRAINING_FLAGS,
    add_architecture_arguments,
    add_flags,
    add_pruning_arguments,
    collect_overrides,
)
from srl.config import build_run_config
from srl.features import load_external_embeddings, load_pretrained_vectors
from srl.trainer import train
from srl_toolkit.exceptions import ConfigError
from treebank.conll import read_conll09

OVERRIDE_NAMES = (
    [dest for _, dest, _, _ in ARCHITECTURE_FLAGS + TRAINING_FLAGS]
    + ['mode', 'use_pos', 'use_lemma', 'syntax', 'prune', 'rules', 'language',
       'train', 'dev', 'pretrained', 'unfreeze_pretrained', 'contextual', 'dev_contextual']
)


class Command(ExperimentCommand):
    help = 'SRL モデルを学習し、最良の重みをチェックポイントに保存します'

    def add_command_arguments(self, parser):
        parser.add_argument('--config', default=None, help="'key = value' 形式の設定ファイル")
        parser.add_argument('--train', default=None, help='学習用 CoNLL-2009 ファイル')
        parser.add_argument('--dev', default=None, help='開発用 CoNLL-2009 ファイル（最良モデルの選択に使う）')
        parser.add_argument('--language', default=None, help='言語タグ')
        parser.add_argument('--pretrained', default=None, help='事前学習ベクトル（word2vec テキスト形式）')
        parser.add_argument(
            '--unfreeze-pretrained', dest='unfreeze_pretrained', action='store_const', const=True, default=None,
            help='事前学習ベクトルも更新する（既定は固定）'
        )
        parser.add_argument('--contextual', default=None, help='学習コーパスの文脈ベクトルファイル')
        parser.add_argument('--dev-contextual', dest='dev_contextual', default=None, help='開発コーパスの文脈ベクトルファイル')
        add_architecture_arguments(parser)
        add_pruning_arguments(parser)
        add_flags(parser, TRAINING_FLAGS)
        parser.add_argument('--out', required=True, help='チェックポイントの出力先')
        parser.add_argument('--report', default=None, help='損失曲線レポートの出力先')

    def run(self, **options):
        overrides = collect_overrides(options, OVERRIDE_NAMES)
        if self.explicit_seed is not None:
            overrides['seed'] = self.explicit_seed
        config = build_run_config(options['config'], **overrides)
        if not config.train:
            raise ConfigError("no training corpus (--train or 'train =' in the config file)")

        corpus = read_conll09(config.train, threads=options['threads'])
        dev = read_conll09(config.dev, threads=options['threads']) if config.dev else None
        rules = load_rules(config.rules) if config.prune == 'rule' and config.rules else None
        if rules is not None and rules.language != config.language:
            self.stderr.write(f"warning: rule language {rules.language} differs from {config.language}")
        pretrained = load_pretrained_vectors(config.pretrained) if config.pretrained else None
        external = dev_external = None
        if config.contextual:
            external = load_external_embeddings(config.contextual, corpus, config.contextual_dim)
            if dev is not None:
                if not config.dev_contextual:
                    raise ConfigError("--dev-contextual is required when --contextual and --dev are given")
                dev_external = load_external_embeddings(config.dev_contextual, dev, config.contextual_dim)

        result = train(
            config, corpus, rules, dev, pretrained, external, dev_external,
            checkpoint=options['out'], threads=options['threads'],
        )

        if options['report']:
            with open(options['report'], 'w', encoding='utf-8') as handle:
                handle.write(f"# config {result.model.config.to_header()}\n")
                handle.write("epoch\tloss\tdev_f1\n")
                for record in result.history:
                    dev_f1 = '_' if record.dev_f1 is None else f"{record.dev_f1:.6f}"
                    handle.write(f"{record.epoch}\t{record.loss:.6f}\t{dev_f1}\n")

        self.stdout.write(self.style.SUCCESS(
            f"checkpoint={options['out']} best_epoch={result.best_epoch} "
            f"selection={result.selection} best={result.best_metric:.6f}"
        ))
        return {
            'best_epoch': result.best_epoch,
            'best_metric': result.best_metric,
            'final_loss': result.losses[-1],
        }
