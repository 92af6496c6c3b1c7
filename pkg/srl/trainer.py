"""
学習ループ
シード固定のシャッフル → バッチごとの Adam 更新 → 定期的な開発セット評価 → 最良モデルの保持
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from neural.optim import Adam
from pruning.pruner import Pruner
from pruning.ruleset import RuleSet, select_top_k
from scoring.scorer import score
from srl_toolkit.exceptions import ConfigError, NumericError
from treebank.conll import Corpus
from .config import RunConfig
from .features import PretrainedVectors
from .model import SRLModel

logger = logging.getLogger(__name__)


def make_pruner(config: RunConfig, rules: Optional[RuleSet] = None) -> Pruner:
    """
    設定から枝刈り方式を作る
    ルールに k が無ければ top_k（ルール数で頭打ち）を使う。
    """
    if config.prune == 'none':
        return Pruner(mode='none', syntax_source=config.syntax)
    if config.prune == 'korder':
        return Pruner(mode='korder', korder=config.korder, syntax_source=config.syntax)
    if rules is None:
        raise ConfigError("prune=rule needs a rule file (--rules) or --no-prune")
    if rules.k is None:
        rules = select_top_k(rules, min(config.top_k, len(rules)))
    return Pruner(mode='rule', rule=rules, syntax_source=config.syntax)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    dev_f1: Optional[float] = None


@dataclass
class TrainResult:
    model: SRLModel
    pruner: Pruner
    best_epoch: int = 0
    best_metric: Optional[float] = None
    selection: str = 'train_loss'
    history: List[EpochRecord] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [record.loss for record in self.history]


def _dev_f1(model: SRLModel, dev: Corpus, pruner: Pruner, dev_external, threads: int) -> float:
    predicted = model.predict(dev, pruner, dev_external, threads=threads)
    return score(dev, predicted, include_senses=model.config.end_to_end, threads=threads).f1


def train(
    config: RunConfig,
    corpus: Corpus,
    rules: Optional[RuleSet] = None,
    dev: Optional[Corpus] = None,
    pretrained: Optional[PretrainedVectors] = None,
    external: Optional[Sequence[np.ndarray]] = None,
    dev_external: Optional[Sequence[np.ndarray]] = None,
    checkpoint: Optional[str] = None,
    threads: int = 1,
) -> TrainResult:
    """
    モデルを学習して最良の重みを返す（checkpoint 指定時は保存も行う）

    開発セットがあればラベル付き F1（end-to-end では語義込み）、無ければエポック損失で
    最良のエポックを選ぶ。

    Args:
        config: 検証済みの実行設定
        corpus: 学習コーパス
        rules: 構文ルール（prune=rule のとき）
        dev: 開発コーパス
        pretrained: 事前学習ベクトル
        external / dev_external: 文ごとの文脈ベクトル
    """
    pruner = make_pruner(config, rules)
    rng = np.random.default_rng(config.seed)
    model = SRLModel.build(config, corpus, rng, pretrained)
    config = model.config
    instances = model.corpus_instances(corpus, pruner, external)
    if not instances:
        raise ConfigError("training corpus has no predicates")

    optimizer = Adam(config.learning_rate, (config.beta1, config.beta2), config.adam_eps)
    result = TrainResult(model=model, pruner=pruner, selection='dev_f1' if dev else 'train_loss')
    best_params = model.params.copy()
    logger.info(
        f"event=train_start instances={len(instances)} candidates={sum(len(i.candidates) for i in instances)} "
        f"epochs={config.epochs} batch_size={config.batch_size} prune={pruner.mode} seed={config.seed}"
    )

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(instances))
        epoch_loss = 0.0
        for batch_index, start in enumerate(range(0, len(order), config.batch_size), start=1):
            batch = [instances[i] for i in order[start:start + config.batch_size]]
            try:
                loss, grads = model.loss(batch, rng)
                optimizer.step(model.params, grads)
            except NumericError as e:
                logger.error(f"event=diverged epoch={epoch} batch={batch_index} lr={config.learning_rate}")
                raise NumericError(
                    f"training diverged: {e.message}",
                    epoch=epoch, batch=batch_index, lr=config.learning_rate, **e.context,
                )
            epoch_loss += loss

        dev_f1 = None
        evaluate = dev is not None and (epoch % config.eval_every == 0 or epoch == config.epochs)
        if evaluate:
            dev_f1 = _dev_f1(model, dev, pruner, dev_external, threads)
        result.history.append(EpochRecord(epoch, epoch_loss, dev_f1))
        logger.info(
            f"event=epoch epoch={epoch} loss={epoch_loss:.6f} "
            f"dev_f1={'_' if dev_f1 is None else f'{dev_f1:.6f}'}"
        )

        if dev is not None:
            improved = dev_f1 is not None and (result.best_metric is None or dev_f1 > result.best_metric)
            metric = dev_f1
        else:
            improved = result.best_metric is None or epoch_loss < result.best_metric
            metric = epoch_loss
        if improved:
            result.best_epoch = epoch
            result.best_metric = metric
            best_params = model.params.copy()

    model.params = best_params
    logger.info(
        f"event=train_done best_epoch={result.best_epoch} selection={result.selection} "
        f"best={result.best_metric:.6f}"
    )
    if checkpoint:
        model.save(
            checkpoint,
            pruner.rule if pruner.mode == 'rule' else None,
            best={'epoch': result.best_epoch, 'metric': result.best_metric, 'selection': result.selection},
        )
    return result
