from django.db import models
from django.utils import timezone


class ExperimentRun(models.Model):
    """実行台帳（管理コマンド1回の実行記録）"""

    STATUS_CHOICES = (
        ('running', '実行中'),
        ('succeeded', '成功'),
        ('failed', '失敗'),
    )

    # 実行情報
    command = models.CharField('コマンド', max_length=50, db_index=True)
    config = models.JSONField('設定', default=dict, blank=True)
    seed = models.IntegerField('乱数シード', null=True, blank=True)
    threads = models.IntegerField('スレッド数', default=1)

    # 結果
    status = models.CharField('ステータス', max_length=20, choices=STATUS_CHOICES, default='running')
    exit_code = models.IntegerField('終了コード', null=True, blank=True)
    error_class = models.CharField('例外クラス', max_length=100, blank=True)
    error_message = models.TextField('エラーメッセージ', blank=True)
    metrics = models.JSONField('指標', default=dict, blank=True)
    duration_ms = models.IntegerField('実行時間（ミリ秒）', default=0)

    created_at = models.DateTimeField('開始日時', auto_now_add=True, db_index=True)
    finished_at = models.DateTimeField('終了日時', null=True, blank=True)

    class Meta:
        db_table = 'experiment_runs'
        verbose_name = '実行記録'
        verbose_name_plural = '実行記録'
        ordering = ['-created_at', '-id']
        indexes = [
            models.Index(fields=['command', '-created_at'], name='experiment__command_5c1f0a_idx'),
            models.Index(fields=['status', '-created_at'], name='experiment__status_8e2b4d_idx'),
        ]

    def __str__(self):
        return f"{self.command} ({self.get_status_display()}) at {self.created_at}"

    def mark_finished(self, exit_code: int, metrics=None, error=None, duration_ms: int = 0):
        """終了として記録"""
        self.exit_code = exit_code
        self.status = 'succeeded' if exit_code == 0 else 'failed'
        self.metrics = metrics or {}
        if error is not None:
            self.error_class = type(error).__name__
            self.error_message = str(error)[:2000]
        self.duration_ms = duration_ms
        self.finished_at = timezone.now()
        self.save()
