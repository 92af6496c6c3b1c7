# Generated by Django 4.2.16 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(db_index=True, max_length=50, verbose_name='コマンド')),
                ('config', models.JSONField(blank=True, default=dict, verbose_name='設定')),
                ('seed', models.IntegerField(blank=True, null=True, verbose_name='乱数シード')),
                ('threads', models.IntegerField(default=1, verbose_name='スレッド数')),
                ('status', models.CharField(choices=[('running', '実行中'), ('succeeded', '成功'), ('failed', '失敗')], default='running', max_length=20, verbose_name='ステータス')),
                ('exit_code', models.IntegerField(blank=True, null=True, verbose_name='終了コード')),
                ('error_class', models.CharField(blank=True, max_length=100, verbose_name='例外クラス')),
                ('error_message', models.TextField(blank=True, verbose_name='エラーメッセージ')),
                ('metrics', models.JSONField(blank=True, default=dict, verbose_name='指標')),
                ('duration_ms', models.IntegerField(default=0, verbose_name='実行時間（ミリ秒）')),
                ('created_at', models.DateTimeField(auto_now_add=True, db_index=True, verbose_name='開始日時')),
                ('finished_at', models.DateTimeField(blank=True, null=True, verbose_name='終了日時')),
            ],
            options={
                'verbose_name': '実行記録',
                'verbose_name_plural': '実行記録',
                'db_table': 'experiment_runs',
                'ordering': ['-created_at', '-id'],
                'indexes': [models.Index(fields=['command', '-created_at'], name='experiment__command_5c1f0a_idx'), models.Index(fields=['status', '-created_at'], name='experiment__status_8e2b4d_idx')],
            },
        ),
    ]
