"""
管理コマンド基底クラス
全ての実行を実行台帳に記録し、ツールキット例外を終了コードに変換します。
"""
import json
import logging
import time
from typing import Any, Dict, Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from srl_toolkit.exceptions import DataError, ToolkitError

logger = logging.getLogger(__name__)


class ExperimentCommand(BaseCommand):
    """
    実験コマンド基底クラス
    サブクラスは add_command_arguments() と run() を実装する。
    run() が返す辞書は指標として実行台帳に保存される。
    """

    requires_system_checks = []

    # 台帳に保存しないオプション
    EXCLUDED_OPTIONS = [
        'stdout', 'stderr', 'verbosity', 'settings', 'pythonpath',
        'traceback', 'no_color', 'force_color', 'skip_checks',
    ]

    def add_arguments(self, parser):
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help=f'乱数シード（デフォルト: {settings.SRL_SEED}）'
        )
        parser.add_argument(
            '--threads',
            type=int,
            default=settings.SRL_THREADS,
            help='文単位の並列数（デフォルト: 1、ビット単位の再現性を保つ）'
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        """コマンド固有の引数を追加"""

    def run(self, **options) -> Optional[Dict[str, Any]]:
        raise NotImplementedError

    def handle(self, *args, **options):
        started = time.time()
        # 明示指定の有無は設定ファイルとの優先順位に使う
        self.explicit_seed = options['seed']
        if options['seed'] is None:
            options['seed'] = settings.SRL_SEED
        run = self._open_run(options)
        try:
            try:
                metrics = self.run(**options) or {}
            except OSError as e:
                raise DataError(f"cannot access file: {e.strerror}", path=e.filename)
        except ToolkitError as e:
            logger.error(f"event=command_failed command={self.command_name} error={type(e).__name__} code={e.exit_code}")
            self._close_run(run, e.exit_code, error=e, started=started)
            message = str(e).replace('\n', ' ')
            raise CommandError(
                f"error={type(e).__name__} code={e.exit_code} message={message}",
                returncode=e.exit_code,
            )
        except Exception as e:
            exit_code = getattr(e, 'returncode', ToolkitError.exit_code)
            logger.error(f"event=command_failed command={self.command_name} error={type(e).__name__} code={exit_code}")
            self._close_run(run, exit_code, error=e, started=started)
            raise
        self._close_run(run, 0, metrics=metrics, started=started)
        return None

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    def _serializable_options(self, options):
        """JSONに変換できるオプションのみ取り出す"""
        config = {}
        for key, value in options.items():
            if key in self.EXCLUDED_OPTIONS:
                continue
            try:
                json.dumps(value)
            except TypeError:
                value = str(value)
            config[key] = value
        return config

    def _open_run(self, options):
        """実行台帳に開始を記録（記録失敗はコマンドに影響させない）"""
        if not settings.SRL_RECORD_RUNS:
            return None
        try:
            from .models import ExperimentRun
            return ExperimentRun.objects.create(
                command=self.command_name,
                config=self._serializable_options(options),
                seed=options.get('seed'),
                threads=options.get('threads') or 1,
            )
        except Exception as e:
            logger.warning(f"event=ledger_unavailable command={self.command_name} reason={type(e).__name__}")
            return None

    def _close_run(self, run, exit_code, metrics=None, error=None, started=None):
        if run is None:
            return
        duration_ms = int((time.time() - started) * 1000) if started else 0
        try:
            run.mark_finished(exit_code, metrics=metrics, error=error, duration_ms=duration_ms)
        except Exception as e:
            logger.warning(f"event=ledger_unavailable command={self.command_name} reason={type(e).__name__}")
