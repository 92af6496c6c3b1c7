"""
勾配検査コマンド
埋め込み → BiLSTM → ヘッド → 双アフィン → 交差エントロピーの全経路を中心差分と比べる。
"""
import numpy as np

from experiments.command import ExperimentCommand
from neural.gradcheck import grad_check
from pruning.pruner import Pruner
from srl.config import build_run_config
from srl.model import SRLModel
from srl_toolkit.exceptions import NumericError
from treebank.conll import read_conll09
from treebank.synth import synth_corpus


class Command(ExperimentCommand):
    help = '小さなモデルで解析勾配と数値勾配の最大相対誤差を測ります'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', default=None, help='CoNLL-2009 ファイル（省略時は5トークンの合成文）')
        parser.add_argument('--trials', type=int, default=20, help='試行数（デフォルト: 20）')
        parser.add_argument('--samples', type=int, default=8, help='テンソルごとの検査座標数（デフォルト: 8）')
        parser.add_argument('--tolerance', type=float, default=1e-4, help='許容する最大相対誤差（デフォルト: 1e-4）')
        parser.add_argument('--step', type=float, default=1e-5, help='差分の刻み（デフォルト: 1e-5）')
        parser.add_argument('--mode', choices=['role-only', 'end-to-end'], default='role-only', help='モデルのモード')
        parser.add_argument('--hidden-size', type=int, default=3, help='BiLSTM の隠れ次元（デフォルト: 3）')
        parser.add_argument('--lstm-layers', type=int, default=3, help='BiLSTM の層数（デフォルト: 3）')
        parser.add_argument('--mlp-size', type=int, default=4, help='ヘッドの次元（デフォルト: 4）')
        parser.add_argument('--embed-dim', type=int, default=3, help='単語・補題・品詞埋め込みの次元（デフォルト: 3）')

    def run(self, **options):
        dim = options['embed_dim']
        config = build_run_config(
            mode=options['mode'],
            word_dim=dim, lemma_dim=dim, pos_dim=dim, indicator_dim=2,
            lstm_layers=options['lstm_layers'], hidden_size=options['hidden_size'], mlp_size=options['mlp_size'],
            seed=options['seed'],
        )
        if options['input']:
            sentences = [s for s in read_conll09(options['input'], threads=options['threads']) if s.predicates]
        else:
            sentences = synth_corpus(
                seed=options['seed'], n_sentences=options['trials'], max_len=5, min_len=5,
            ).corpus

        worst = 0.0
        checked = 0
        for trial, sentence in enumerate(sentences[:options['trials']], start=1):
            rng = np.random.default_rng([options['seed'], trial])
            model = SRLModel.build(config, [sentence], rng)
            instances = model.corpus_instances([sentence], Pruner(mode='none', syntax_source=config.syntax))
            result = grad_check(
                lambda: model.loss(instances), model.params,
                samples=options['samples'], rng=rng, step=options['step'],
            )
            self.stdout.write(
                f"trial={trial} tokens={len(sentence)} checked={result.checked} "
                f"max_rel_error={result.max_rel_error:.3e} worst={result.name}"
            )
            worst = max(worst, result.max_rel_error)
            checked += result.checked

        status = 'pass' if worst < options['tolerance'] else 'fail'
        self.stdout.write(f"max_rel_error={worst:.3e} checked={checked} status={status}")
        if status == 'fail':
            raise NumericError(f"gradient check failed: max relative error {worst:.3e}", tolerance=options['tolerance'])
        return {'max_rel_error': worst, 'checked': checked}
