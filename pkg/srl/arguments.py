"""
学習・予測コマンド共通の設定フラグ
フラグの既定値は None とし、指定されたものだけが設定ファイルの値を上書きする。
"""
from typing import Any, Dict

ARCHITECTURE_FLAGS = [
    ('--word-dim', 'word_dim', int, '単語埋め込みの次元'),
    ('--lemma-dim', 'lemma_dim', int, '補題埋め込みの次元'),
    ('--pos-dim', 'pos_dim', int, '品詞埋め込みの次元'),
    ('--indicator-dim', 'indicator_dim', int, '述語標識埋め込みの次元'),
    ('--contextual-dim', 'contextual_dim', int, '外部文脈ベクトルの次元'),
    ('--lstm-layers', 'lstm_layers', int, 'BiLSTM の層数'),
    ('--hidden-size', 'hidden_size', int, 'BiLSTM の片方向の隠れ次元'),
    ('--mlp-size', 'mlp_size', int, 'ReLU ヘッドの次元'),
]

TRAINING_FLAGS = [
    ('--pretrained-dim', 'pretrained_dim', int, '事前学習ベクトルの次元'),
    ('--recurrent-keep', 'recurrent_keep', float, 'BiLSTM のドロップアウト保持確率'),
    ('--mlp-keep', 'mlp_keep', float, 'ヘッドのドロップアウト保持確率'),
    ('--learning-rate', 'learning_rate', float, 'Adam の学習率'),
    ('--beta1', 'beta1', float, 'Adam の beta1'),
    ('--beta2', 'beta2', float, 'Adam の beta2'),
    ('--adam-eps', 'adam_eps', float, 'Adam の eps'),
    ('--epochs', 'epochs', int, 'エポック数'),
    ('--batch-size', 'batch_size', int, 'バッチサイズ'),
    ('--eval-every', 'eval_every', int, '開発セット評価の間隔（エポック）'),
    ('--unk-replace', 'unk_replace', float, '頻度1の語を UNK に置き換える確率'),
    ('--embed-init', 'embed_init', float, '埋め込み初期化の幅'),
    ('--forget-bias', 'forget_bias', float, '忘却ゲートのバイアス初期値'),
    ('--top-k', 'top_k', int, 'ルールに k が無い場合の k'),
    ('--korder', 'korder', int, 'k-order 枝刈りの k'),
]


def add_flags(parser, flags) -> None:
    for flag, dest, cast, help_text in flags:
        parser.add_argument(flag, dest=dest, type=cast, default=None, help=help_text)


def add_architecture_arguments(parser) -> None:
    add_flags(parser, ARCHITECTURE_FLAGS)
    parser.add_argument('--mode', choices=['role-only', 'end-to-end'], default=None, help='役割のみ / 語義と役割の同時予測')
    parser.add_argument('--no-pos', dest='use_pos', action='store_const', const=False, default=None, help='品詞埋め込みを使わない')
    parser.add_argument('--no-lemma', dest='use_lemma', action='store_const', const=False, default=None, help='補題埋め込みを使わない')


def add_pruning_arguments(parser) -> None:
    parser.add_argument('--syntax', choices=['gold', 'pred'], default=None, help='構文列（gold / pred）')
    parser.add_argument('--prune', choices=['rule', 'korder', 'none'], default=None, help='枝刈り方式')
    parser.add_argument('--no-prune', dest='prune', action='store_const', const='none', help='枝刈りなし（--prune none と同じ）')
    parser.add_argument('--rules', default=None, help='ルールファイル')


def collect_overrides(options: Dict[str, Any], names) -> Dict[str, Any]:
    """指定されたフラグだけを取り出す"""
    return {name: options.get(name) for name in names if options.get(name) is not None}
