"""
SRL モデル本体
単語表現 → BiLSTM → 枝刈りマスクで残った候補 → ReLU ヘッド → 双アフィン → ラベルスコア

学習単位は (文, 述語) のインスタンス。述語標識が述語ごとに異なるため、同じ文でも
述語ごとに別系列として符号化し、バッチ内は末尾パディング + マスクで揃える。
"""
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from neural.layers import (
    affine_relu_backward,
    affine_relu_forward,
    biaffine_backward,
    biaffine_forward,
    bilstm_backward,
    bilstm_forward,
    embedding_backward,
    softmax_xent,
)
from neural.checkpoint import load_checkpoint, save_checkpoint
from neural.tensor import ModelParams, check_finite, lstm_weights, uniform, xavier_uniform
from pruning.pruner import Pruner
from pruning.ruleset import RuleSet
from srl_toolkit.exceptions import CheckpointError, ConfigError
from srl_toolkit.parallel import ordered_map
from treebank.conll import Corpus, Sentence
from treebank.deptree import DistanceTuple
from .config import RunConfig, config_from_header
from .features import PretrainedVectors, WordRep, token_lemma, token_pos
from .virtual_root import from_virtual_root, split_sense, to_virtual_root
from .vocab import PAD_INDEX, UNK_INDEX, VR, LabelVocab, Vocab

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Vocabularies:
    words: Vocab
    lemmas: Vocab
    pos: Vocab
    labels: LabelVocab

    @classmethod
    def from_corpus(cls, corpus: Corpus, config: RunConfig) -> 'Vocabularies':
        words, lemmas, tags = Counter(), Counter(), Counter()
        roles, senses = set(), set()
        for sentence in corpus:
            for token in sentence.tokens:
                words[token.form] += 1
                lemmas[token_lemma(token, config.syntax) or token.form] += 1
                tags[token_pos(token, config.syntax) or token.form] += 1
                roles.update(role for role in token.apreds if role is not None)
                if token.fillpred and config.end_to_end:
                    label = split_sense(token.pred_sense, None)[1]
                    if label is not None:
                        senses.add(label)
        extra = [VR] if config.end_to_end else []
        return cls(
            words=Vocab.from_counts(words, extra),
            lemmas=Vocab.from_counts(lemmas, extra),
            pos=Vocab.from_counts(tags, extra),
            labels=LabelVocab(tuple(sorted(roles)), tuple(sorted(senses))),
        )

    def to_header(self) -> Dict[str, Any]:
        return {
            'words': self.words.to_list(),
            'word_singletons': sorted(self.words.singletons),
            'lemmas': self.lemmas.to_list(),
            'lemma_singletons': sorted(self.lemmas.singletons),
            'pos': self.pos.to_list(),
            'roles': list(self.labels.roles),
            'senses': list(self.labels.senses),
        }

    @classmethod
    def from_header(cls, header: Dict[str, Any]) -> 'Vocabularies':
        words = Vocab(header['words'])
        words.singletons = frozenset(header.get('word_singletons', ()))
        lemmas = Vocab(header['lemmas'])
        lemmas.singletons = frozenset(header.get('lemma_singletons', ()))
        return cls(
            words=words,
            lemmas=lemmas,
            pos=Vocab(header['pos']),
            labels=LabelVocab(tuple(header['roles']), tuple(header['senses'])),
        )


@dataclass(eq=False)
class Instance:
    """1述語分の入力（トークンIDは1始まり、配列は0始まり）"""

    sentence_index: int
    slot: int
    predicate: int
    words: np.ndarray
    lemmas: np.ndarray
    pos: np.ndarray
    candidates: Tuple[int, ...]
    gold: Optional[np.ndarray] = None
    sense_gold: Optional[int] = None
    virtual_root: bool = False
    external: Optional[np.ndarray] = None

    @property
    def length(self) -> int:
        return len(self.words)


@dataclass(eq=False)
class ScoredInstance:
    instance: Instance
    role_scores: np.ndarray
    sense_scores: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FrameEntry:
    """述語1つ分の予測: {項トークンID: 役割}（NONE は含まない）と語義ラベル"""

    predicate: int
    arguments: Dict[int, str] = field(default_factory=dict)
    sense: Optional[str] = None


def decode_scores(role_scores: np.ndarray, candidates: Sequence[int], labels: LabelVocab) -> Dict[int, str]:
    """候補ごとに役割区画の argmax（同点は小さい添字）。NONE は出力しない"""
    best = np.argmax(role_scores, axis=1)
    return {
        candidate: labels.role_label(int(index))
        for candidate, index in zip(candidates, best)
        if index != 0
    }


def init_params(
    config: RunConfig,
    vocabs: Vocabularies,
    rng: np.random.Generator,
    pretrained: Optional[PretrainedVectors] = None,
) -> ModelParams:
    """
    埋め込みは U(-embed_init, embed_init)、LSTM・アフィンは Xavier 一様、
    忘却ゲートのバイアスは forget_bias、他のバイアスは 0
    """
    rep = WordRep.from_config(config)
    params = ModelParams()
    frozen = []
    params['emb.word'] = uniform(rng, (len(vocabs.words), rep.word_dim), config.embed_init)
    if rep.lemma_dim:
        params['emb.lemma'] = uniform(rng, (len(vocabs.lemmas), rep.lemma_dim), config.embed_init)
    if rep.pos_dim:
        params['emb.pos'] = uniform(rng, (len(vocabs.pos), rep.pos_dim), config.embed_init)
    if rep.pretrained_dim:
        if pretrained is None or pretrained.dim != rep.pretrained_dim:
            raise ConfigError("pretrained_dim set but no matching pretrained vectors were loaded")
        params['emb.pretrained'] = pretrained.table(vocabs.words.items)
        if not config.unfreeze_pretrained:
            frozen.append('emb.pretrained')
    params['emb.indicator'] = uniform(rng, (2, rep.indicator_dim), config.embed_init)

    width = rep.total
    for layer in range(config.lstm_layers):
        params[f'lstm.{layer}.fw'] = lstm_weights(rng, width, config.hidden_size, config.forget_bias)
        params[f'lstm.{layer}.bw'] = lstm_weights(rng, width, config.hidden_size, config.forget_bias)
        width = 2 * config.hidden_size

    for head in ('pred', 'arg'):
        params[f'head.{head}.W'] = xavier_uniform(rng, width, config.mlp_size)
        params[f'head.{head}.b'] = np.zeros(config.mlp_size)
    n_labels = len(vocabs.labels)
    params['biaffine.W1'] = xavier_uniform(
        rng, config.mlp_size, config.mlp_size, shape=(n_labels, config.mlp_size, config.mlp_size),
    )
    params['biaffine.W2'] = xavier_uniform(rng, 2 * config.mlp_size, n_labels).T.copy()
    params['biaffine.b'] = np.zeros(n_labels)
    params.frozen = set(frozen)
    return params


@dataclass
class _BatchCache:
    mask: np.ndarray
    ids: Dict[str, np.ndarray]
    encoder: Any
    hidden: np.ndarray
    heads: List[Tuple[Any, Any, np.ndarray, np.ndarray, List[int]]] = field(default_factory=list)


class SRLModel:
    """
    重み・語彙・設定をまとめたモデル

    forward() はスコアのみ、loss() は損失と勾配、predict() は文に予測を書き戻す。
    """

    def __init__(self, config: RunConfig, vocabs: Vocabularies, params: ModelParams):
        self.config = config
        self.vocabs = vocabs
        self.params = params
        self.rep = WordRep.from_config(config)

    @classmethod
    def build(
        cls,
        config: RunConfig,
        corpus: Corpus,
        rng: np.random.Generator,
        pretrained: Optional[PretrainedVectors] = None,
    ) -> 'SRLModel':
        config = config.with_effective_dims()
        config = replace(config, pretrained_dim=pretrained.dim if pretrained else 0)
        vocabs = Vocabularies.from_corpus(corpus, config)
        params = init_params(config, vocabs, rng, pretrained)
        logger.info(
            f"event=model_built words={len(vocabs.words)} lemmas={len(vocabs.lemmas)} pos={len(vocabs.pos)} "
            f"labels={len(vocabs.labels)} input_dim={WordRep.from_config(config).total} parameters={params.size()}"
        )
        return cls(config, vocabs, params)

    @property
    def labels(self) -> LabelVocab:
        return self.vocabs.labels

    # ---- 入力の組み立て ----

    def instances(
        self,
        sentence: Sentence,
        pruner: Pruner,
        sentence_index: int = 0,
        external: Optional[np.ndarray] = None,
    ) -> List[Instance]:
        """文中の述語ごとのインスタンス。候補は枝刈りマスクで残ったトークン"""
        if not sentence.predicates:
            return []
        if self.rep.contextual_dim:
            if external is None:
                raise ConfigError("contextual vectors are enabled but none were supplied")
            if external.shape[1] != self.rep.contextual_dim:
                raise ConfigError(
                    f"contextual vectors have dim {external.shape[1]}, model expects {self.rep.contextual_dim}"
                )
        masks = pruner.sentence_masks(sentence)
        source = sentence
        if self.config.end_to_end:
            source = to_virtual_root(sentence, self.config.mode, self.config.language)
            if external is not None:
                external = np.vstack([external, np.zeros((1, external.shape[1]))])
        syntax = self.config.syntax
        words = np.array([self.vocabs.words.index(token.form) for token in source.tokens])
        lemmas = np.array([self.vocabs.lemmas.index(token_lemma(token, syntax) or token.form) for token in source.tokens])
        tags = np.array([self.vocabs.pos.index(token_pos(token, syntax) or token.form) for token in source.tokens])

        instances = []
        for slot, predicate in enumerate(sentence.predicates):
            candidates = masks[predicate].retained
            gold = []
            for candidate in candidates:
                index = self.labels.role_index(sentence.token(candidate).apreds[slot])
                gold.append(0 if index is None else index)
            sense_gold = None
            if self.config.end_to_end:
                sense_gold = self.labels.sense_index(source.tokens[-1].apreds[slot])
            instances.append(Instance(
                sentence_index=sentence_index,
                slot=slot,
                predicate=predicate,
                words=words,
                lemmas=lemmas,
                pos=tags,
                candidates=candidates,
                gold=np.array(gold, dtype=int),
                sense_gold=sense_gold,
                virtual_root=self.config.end_to_end,
                external=external,
            ))
        return instances

    def corpus_instances(self, corpus: Corpus, pruner: Pruner, external: Optional[Sequence[np.ndarray]] = None):
        instances = []
        for index, sentence in enumerate(corpus):
            vectors = external[index] if external is not None else None
            instances.extend(self.instances(sentence, pruner, index, vectors))
        return instances

    def _embed(self, batch: Sequence[Instance], rng: Optional[np.random.Generator]):
        steps = max(instance.length for instance in batch)
        size = len(batch)
        mask = np.zeros((steps, size), dtype=bool)
        ids = {name: np.full((steps, size), PAD_INDEX, dtype=int) for name in ('word', 'lemma', 'pos', 'indicator')}
        contextual = np.zeros((steps, size, self.rep.contextual_dim))
        for b, instance in enumerate(batch):
            n = instance.length
            mask[:n, b] = True
            ids['word'][:n, b] = instance.words
            ids['lemma'][:n, b] = instance.lemmas
            ids['pos'][:n, b] = instance.pos
            ids['indicator'][instance.predicate - 1, b] = 1
            if self.rep.contextual_dim:
                contextual[:n, b] = instance.external
        ids['pretrained'] = ids['word']

        if rng is not None and self.config.unk_replace > 0:
            for name, vocab in (('word', self.vocabs.words), ('lemma', self.vocabs.lemmas)):
                if not vocab.singletons:
                    continue
                singleton = np.isin(ids[name], list(vocab.singletons))
                drop = singleton & (rng.random(ids[name].shape) < self.config.unk_replace)
                ids[name] = np.where(drop, UNK_INDEX, ids[name])

        parts = []
        for name, _ in self.rep.slots():
            if name == 'contextual':
                parts.append(contextual)
            else:
                parts.append(self.params[f'emb.{name}'][ids[name]])
        return np.concatenate(parts, axis=2), mask, ids

    def _encode(self, batch, rng):
        x, mask, ids = self._embed(batch, rng)
        layers = [
            (self.params[f'lstm.{layer}.fw'], self.params[f'lstm.{layer}.bw'])
            for layer in range(self.config.lstm_layers)
        ]
        keep = self.config.recurrent_keep if rng is not None else 1.0
        hidden, encoder = bilstm_forward(x, mask, layers, keep=keep, rng=rng)
        return _BatchCache(mask=mask, ids=ids, encoder=encoder, hidden=hidden)

    def _score(self, instance: Instance, b: int, cache: _BatchCache, rng):
        rows = [candidate - 1 for candidate in instance.candidates]
        if instance.virtual_root:
            rows.append(instance.length - 1)
        keep = self.config.mlp_keep if rng is not None else 1.0
        p = self.params
        h_p, pred_cache = affine_relu_forward(
            cache.hidden[instance.predicate - 1, b][None, :], p['head.pred.W'], p['head.pred.b'], keep, rng,
        )
        h_a, arg_cache = affine_relu_forward(
            cache.hidden[rows, b], p['head.arg.W'], p['head.arg.b'], keep, rng,
        )
        scores = biaffine_forward(h_p[0], h_a, p['biaffine.W1'], p['biaffine.W2'], p['biaffine.b'])
        check_finite('label scores', scores, sentence=instance.sentence_index + 1, predicate=instance.predicate)
        cache.heads.append((pred_cache, arg_cache, h_p[0], h_a, rows))
        return scores

    def _split(self, instance: Instance, scores: np.ndarray) -> ScoredInstance:
        count = len(instance.candidates)
        sense_scores = None
        if instance.virtual_root:
            sense_scores = scores[count, self.labels.sense_slice]
        return ScoredInstance(instance, scores[:count, self.labels.role_slice], sense_scores)

    # ---- 公開操作 ----

    def forward(self, batch: Sequence[Instance], rng: Optional[np.random.Generator] = None) -> List[ScoredInstance]:
        """
        候補ごとのラベルスコア

        Args:
            batch: インスタンス列
            rng: 学習モード（ドロップアウト・UNK 置換）の乱数。None なら評価モード
        """
        if not batch:
            return []
        cache = self._encode(batch, rng)
        return [self._split(instance, self._score(instance, b, cache, rng)) for b, instance in enumerate(batch)]

    def loss(self, batch: Sequence[Instance], rng: Optional[np.random.Generator] = None) -> Tuple[float, Dict[str, np.ndarray]]:
        """
        残った候補ごとの交差エントロピーの和（正解が無い候補は NONE）と勾配
        枝刈りで落ちた正解項は候補に無いので損失に入らない。
        """
        p = self.params
        grads = {name: np.zeros_like(value) for name, value in p.trainable()}
        if not batch:
            return 0.0, grads
        cache = self._encode(batch, rng)
        d_hidden = np.zeros_like(cache.hidden)
        total = 0.0
        role_slice, sense_slice = self.labels.role_slice, self.labels.sense_slice

        for b, instance in enumerate(batch):
            scores = self._score(instance, b, cache, rng)
            pred_cache, arg_cache, h_p, h_a, rows = cache.heads[b]
            count = len(instance.candidates)
            d_scores = np.zeros_like(scores)
            loss, grad = softmax_xent(scores[:count, role_slice], instance.gold)
            total += loss
            d_scores[:count, role_slice] = grad
            if instance.virtual_root and instance.sense_gold is not None:
                loss, grad = softmax_xent(scores[count, sense_slice], instance.sense_gold)
                total += loss
                d_scores[count, sense_slice] = grad

            d_hp, d_ha, d_w1, d_w2, d_b = biaffine_backward(d_scores, h_p, h_a, p['biaffine.W1'], p['biaffine.W2'])
            grads['biaffine.W1'] += d_w1
            grads['biaffine.W2'] += d_w2
            grads['biaffine.b'] += d_b
            dx_p, d_wp, d_bp = affine_relu_backward(d_hp[None, :], pred_cache, p['head.pred.W'])
            dx_a, d_wa, d_ba = affine_relu_backward(d_ha, arg_cache, p['head.arg.W'])
            grads['head.pred.W'] += d_wp
            grads['head.pred.b'] += d_bp
            grads['head.arg.W'] += d_wa
            grads['head.arg.b'] += d_ba
            d_hidden[instance.predicate - 1, b] += dx_p[0]
            np.add.at(d_hidden[:, b], rows, dx_a)

        check_finite('loss', total)
        d_x, lstm_grads = bilstm_backward(d_hidden, cache.encoder)
        for layer, (d_fw, d_bw) in enumerate(lstm_grads):
            grads[f'lstm.{layer}.fw'] += d_fw
            grads[f'lstm.{layer}.bw'] += d_bw

        offset = 0
        for name, dim in self.rep.slots():
            key = f'emb.{name}'
            if key in grads:
                embedding_backward(grads[key], cache.ids[name], d_x[:, :, offset:offset + dim])
            offset += dim
        return total, grads

    def decode(self, scored: ScoredInstance) -> FrameEntry:
        instance = scored.instance
        arguments = decode_scores(scored.role_scores, instance.candidates, self.labels)
        sense = None
        if scored.sense_scores is not None and scored.sense_scores.size:
            sense = self.labels.sense_label(int(np.argmax(scored.sense_scores)))
        return FrameEntry(instance.predicate, arguments, sense)

    def predict_sentence(self, sentence: Sentence, pruner: Pruner, external: Optional[np.ndarray] = None) -> Sentence:
        """評価モードで予測し、APRED 列（end-to-end なら PRED 列も）を書き換えた文を返す"""
        instances = self.instances(sentence, pruner, external=external)
        entries = [self.decode(scored) for scored in self.forward(instances)]
        frames = [entry.arguments for entry in entries]
        if not self.config.end_to_end:
            return sentence.with_frames(frames)
        augmented = to_virtual_root(sentence, self.config.mode, self.config.language)
        root = len(augmented)
        with_root = [
            {**frame, root: entry.sense} if entry.sense is not None else frame
            for frame, entry in zip(frames, entries)
        ]
        return from_virtual_root(augmented.with_frames(with_root))

    def predict(
        self,
        corpus: Corpus,
        pruner: Pruner,
        external: Optional[Sequence[np.ndarray]] = None,
        threads: int = 1,
    ) -> Corpus:
        """文単位で並列に予測（結果の順序は入力と同じ）"""
        items = [(sentence, external[i] if external is not None else None) for i, sentence in enumerate(corpus)]
        return ordered_map(lambda item: self.predict_sentence(item[0], pruner, item[1]), items, threads)

    # ---- チェックポイント ----

    def checkpoint_header(self, rules: Optional[RuleSet] = None, **extra) -> Dict[str, Any]:
        """設定・語彙・ルールを埋め込んだヘッダ（時刻などの可変情報は入れない）"""
        header = {
            'config': self.config.as_dict(),
            'vocab': self.vocabs.to_header(),
            'rules': None,
        }
        if rules is not None:
            header['rules'] = {
                'language': rules.language,
                'syntax': rules.syntax_source,
                'k': rules.k,
                'entries': [[key.d_p, key.d_a, count] for key, count in rules.entries],
            }
        header.update(extra)
        return header

    def save(self, path, rules: Optional[RuleSet] = None, **extra) -> None:
        save_checkpoint(path, self.params, self.checkpoint_header(rules, **extra))

    @classmethod
    def load(cls, path) -> Tuple['SRLModel', Optional[RuleSet], Dict[str, Any]]:
        """(モデル, 埋め込まれたルール, ヘッダ)"""
        header, params = load_checkpoint(path)
        try:
            config = config_from_header(header['config'])
            vocabs = Vocabularies.from_header(header['vocab'])
        except KeyError as e:
            raise CheckpointError(f"checkpoint header lacks {e.args[0]!r}", path=path)
        rules = None
        if header.get('rules'):
            data = header['rules']
            rules = RuleSet(
                entries=tuple((DistanceTuple(d_p, d_a), count) for d_p, d_a, count in data['entries']),
                language=data['language'],
                syntax_source=data['syntax'],
                k=data['k'],
            )
        model = cls(config, vocabs, params)
        expected = init_params(config, vocabs, np.random.default_rng(0), _shape_only(config)).shapes()
        if expected != params.shapes():
            raise CheckpointError("checkpoint tensors do not match its own configuration", path=path)
        return model, rules, header


def _shape_only(config: RunConfig) -> Optional[PretrainedVectors]:
    """形状検査用のダミー事前学習ベクトル"""
    if not config.pretrained_dim:
        return None
    return PretrainedVectors(config.pretrained_dim, {})
