"""
実行台帳の一覧表示コマンド
"""
from django.core.management.base import BaseCommand

from experiments.models import ExperimentRun


class Command(BaseCommand):
    help = '実行台帳（ExperimentRun）を新しい順に表示します'

    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument(
            '--limit',
            type=int,
            default=20,
            help='表示件数（デフォルト: 20）'
        )
        parser.add_argument(
            '--command',
            dest='command_filter',
            default=None,
            help='コマンド名で絞り込み'
        )

    def handle(self, *args, **options):
        queryset = ExperimentRun.objects.all()
        if options['command_filter']:
            queryset = queryset.filter(command=options['command_filter'])

        for run in queryset[:options['limit']]:
            metrics = ' '.join(f"{key}={value}" for key, value in sorted(run.metrics.items()))
            self.stdout.write(
                f"id={run.id} command={run.command} status={run.status} "
                f"exit_code={run.exit_code} seed={run.seed} duration_ms={run.duration_ms} {metrics}".rstrip()
            )
