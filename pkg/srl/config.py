"""
実行設定（既定値 < 設定ファイル < コマンドライン）
"""
import logging
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional

from django.conf import settings

from srl_toolkit.exceptions import ConfigError
from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)

# 変えるとチェックポイントの重みと噛み合わなくなる項目
ARCHITECTURE_KEYS = (
    'mode', 'word_dim', 'lemma_dim', 'pos_dim', 'indicator_dim', 'pretrained_dim',
    'contextual_dim', 'lstm_layers', 'hidden_size', 'mlp_size', 'use_pos', 'use_lemma',
)


@dataclass(frozen=True)
class RunConfig:
    language: str = 'xx'
    syntax: str = 'pred'
    mode: str = 'role-only'
    prune: str = 'rule'
    top_k: int = 20
    coverage: float = 0.99
    korder: int = 10

    word_dim: int = 100
    lemma_dim: int = 100
    pos_dim: int = 100
    indicator_dim: int = 16
    pretrained_dim: int = 100
    contextual_dim: int = 1024
    lstm_layers: int = 3
    hidden_size: int = 400
    mlp_size: int = 300

    recurrent_keep: float = 0.8
    mlp_keep: float = 0.8
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 500
    batch_size: int = 64
    eval_every: int = 1
    unk_replace: float = 0.1
    embed_init: float = 0.1
    forget_bias: float = 1.0

    use_pos: bool = True
    use_lemma: bool = True
    unfreeze_pretrained: bool = False

    train: Optional[str] = None
    dev: Optional[str] = None
    rules: Optional[str] = None
    pretrained: Optional[str] = None
    contextual: Optional[str] = None
    dev_contextual: Optional[str] = None
    seed: int = 1

    @property
    def end_to_end(self) -> bool:
        return self.mode == 'end-to-end'

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def architecture(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in ARCHITECTURE_KEYS}

    def to_header(self) -> str:
        """成果物ヘッダ用の 'key=value' 列（キー順）"""
        items = sorted(self.as_dict().items())
        return ' '.join(f"{key}={'' if value is None else value}" for key, value in items)

    def with_effective_dims(self) -> 'RunConfig':
        """ファイル未指定の事前学習・文脈ベクトルは次元 0 として確定させる"""
        return replace(
            self,
            pretrained_dim=self.pretrained_dim if self.pretrained else 0,
            contextual_dim=self.contextual_dim if self.contextual else 0,
        )


FIELD_NAMES = tuple(item.name for item in fields(RunConfig))


def read_config_file(path) -> Dict[str, str]:
    """
    'key = value' 形式の設定ファイルを読む
    '#' で始まる行と空行は無視。未知のキーは ConfigError。
    """
    values = {}
    try:
        with open(path, encoding='utf-8') as handle:
            lines = handle.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e.strerror}", path=path)
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key = key.strip().replace('-', '_')
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw!r}", path=path, line=number)
        if key not in FIELD_NAMES:
            raise ConfigError(f"unknown config key {key!r}", path=path, line=number)
        values[key] = value.strip()
    return values


def _flatten_errors(errors) -> str:
    parts = []
    for key, messages in errors.items():
        for message in messages:
            parts.append(f"{key}: {message}")
    return '; '.join(parts)


def build_run_config(config_path=None, **overrides) -> RunConfig:
    """
    既定値・設定ファイル・フラグを重ねて検証済みの RunConfig を作る

    Args:
        config_path: 'key = value' 設定ファイル（任意）
        overrides: コマンドラインの値（None は未指定とみなす）
    """
    values: Dict[str, Any] = {
        key: value for key, value in asdict(RunConfig()).items()
    }
    values.update({key: value for key, value in settings.SRL_DEFAULTS.items() if key in FIELD_NAMES})
    values['seed'] = settings.SRL_SEED
    if config_path:
        values.update(read_config_file(config_path))
    for key, value in overrides.items():
        if key not in FIELD_NAMES:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            values[key] = value

    serializer = RunConfigSerializer(data=values)
    if not serializer.is_valid():
        raise ConfigError(f"invalid configuration: {_flatten_errors(serializer.errors)}")
    config = RunConfig(**serializer.validated_data)
    logger.debug(f"event=config {config.to_header()}")
    return config


def config_from_header(values: Dict[str, Any]) -> RunConfig:
    """チェックポイントに保存された設定を復元"""
    unknown = set(values) - set(FIELD_NAMES)
    if unknown:
        raise ConfigError(f"checkpoint config has unknown keys {sorted(unknown)}")
    return RunConfig(**values)
