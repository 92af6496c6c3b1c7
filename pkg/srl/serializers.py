from rest_framework import serializers

# 語義が補題そのもので、語義の予測に意味がない言語
SENSE_DEGENERATE_LANGUAGES = ('cs', 'ja', 'czech', 'japanese')


class RunConfigSerializer(serializers.Serializer):
    """実行設定の検証・型変換用シリアライザー"""

    language = serializers.CharField(max_length=32)
    syntax = serializers.ChoiceField(choices=['gold', 'pred'])
    mode = serializers.ChoiceField(choices=['role-only', 'end-to-end'])
    prune = serializers.ChoiceField(choices=['rule', 'korder', 'none'])
    top_k = serializers.IntegerField(min_value=0)
    coverage = serializers.FloatField(min_value=0.0, max_value=1.0)
    korder = serializers.IntegerField(min_value=0)

    word_dim = serializers.IntegerField(min_value=1)
    lemma_dim = serializers.IntegerField(min_value=1)
    pos_dim = serializers.IntegerField(min_value=1)
    indicator_dim = serializers.IntegerField(min_value=1)
    pretrained_dim = serializers.IntegerField(min_value=0)
    contextual_dim = serializers.IntegerField(min_value=0)
    lstm_layers = serializers.IntegerField(min_value=1)
    hidden_size = serializers.IntegerField(min_value=1)
    mlp_size = serializers.IntegerField(min_value=1)

    recurrent_keep = serializers.FloatField(min_value=0.0, max_value=1.0)
    mlp_keep = serializers.FloatField(min_value=0.0, max_value=1.0)
    learning_rate = serializers.FloatField(min_value=0.0)
    beta1 = serializers.FloatField(min_value=0.0, max_value=1.0)
    beta2 = serializers.FloatField(min_value=0.0, max_value=1.0)
    adam_eps = serializers.FloatField(min_value=0.0)
    epochs = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)
    eval_every = serializers.IntegerField(min_value=1)
    unk_replace = serializers.FloatField(min_value=0.0, max_value=1.0)
    embed_init = serializers.FloatField(min_value=0.0)
    forget_bias = serializers.FloatField()

    use_pos = serializers.BooleanField()
    use_lemma = serializers.BooleanField()
    unfreeze_pretrained = serializers.BooleanField()

    train = serializers.CharField(allow_null=True, required=False)
    dev = serializers.CharField(allow_null=True, required=False)
    rules = serializers.CharField(allow_null=True, required=False)
    pretrained = serializers.CharField(allow_null=True, required=False)
    contextual = serializers.CharField(allow_null=True, required=False)
    dev_contextual = serializers.CharField(allow_null=True, required=False)
    seed = serializers.IntegerField(min_value=0)

    def validate_recurrent_keep(self, value):
        if value <= 0.0:
            raise serializers.ValidationError('保持確率は 0 より大きくしてください')
        return value

    def validate_mlp_keep(self, value):
        if value <= 0.0:
            raise serializers.ValidationError('保持確率は 0 より大きくしてください')
        return value

    def validate_beta1(self, value):
        if value >= 1.0:
            raise serializers.ValidationError('beta1 は 1 未満にしてください')
        return value

    def validate_beta2(self, value):
        if value >= 1.0:
            raise serializers.ValidationError('beta2 は 1 未満にしてください')
        return value

    def validate(self, attrs):
        if attrs['mode'] == 'end-to-end' and attrs['language'].lower() in SENSE_DEGENERATE_LANGUAGES:
            raise serializers.ValidationError(
                f"end-to-end モードは語義が補題と一対一の言語（{attrs['language']}）では使えません"
            )
        if attrs['prune'] == 'rule' and attrs['top_k'] < 1:
            raise serializers.ValidationError('rule 枝刈りには top_k >= 1 が必要です（枝刈りなしは --no-prune）')
        if attrs.get('dev_contextual') and not attrs.get('contextual'):
            raise serializers.ValidationError('dev_contextual には contextual の指定が必要です')
        return attrs
