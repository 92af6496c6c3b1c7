"""
ツールキット共通の例外階層
各例外はコマンドの終了コードを持つ（0: 正常, 2: 使用法・設定, 3: データ, 4: 数値）
"""


class ToolkitError(Exception):
    """ツールキット例外の基底クラス"""

    exit_code = 1

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self):
        if not self.context:
            return self.message
        details = ' '.join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.message} ({details})"


class ConfigError(ToolkitError):
    """設定・フラグの不整合"""

    exit_code = 2


class DataError(ToolkitError):
    """入力データの不正"""

    exit_code = 3


class ConllFormatError(DataError):
    """CoNLL-2009 ファイルの書式エラー（行番号付き）"""

    def __init__(self, message: str, line: int):
        super().__init__(message, line=line)
        self.line = line


class TreeError(DataError):
    """依存構造木の不正"""


class HeadRangeError(TreeError):
    """主辞IDが範囲外"""


class CycleError(TreeError):
    """親リンクの循環"""

    def __init__(self, message: str, node: int):
        super().__init__(message, node=node)
        self.node = node


class MultipleRootsError(TreeError):
    """複数の根（単一根を要求した場合のみ）"""


class AlignmentError(DataError):
    """コーパス間・外部ファイルとの位置ずれ"""


class RuleFileError(DataError):
    """ルールファイルの書式エラー"""


class SynthesisError(DataError):
    """合成コーパス生成で配置不能"""


class NumericError(ToolkitError):
    """数値計算の異常（NaN/Inf の検出、勾配と重みの形の不一致）"""

    exit_code = 4


class CheckpointError(DataError):
    """チェックポイントの書式エラー・構成の不一致"""
