import io
import os
import tempfile
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, override_settings

from srl_toolkit.exceptions import CheckpointError, ConfigError
from treebank.builders import keep_your_heart
from treebank.conll import save_conll09
from .command import ExperimentCommand
from .models import ExperimentRun


class _Succeeding(ExperimentCommand):
    def run(self, **options):
        return {'f1': 0.5}


class _Failing(ExperimentCommand):
    error = ConfigError('bad flag', flag='--top-k')

    def run(self, **options):
        raise self.error


class _Unreadable(ExperimentCommand):
    def run(self, **options):
        open(os.path.join(tempfile.gettempdir(), 'srl-missing', 'nothing.conll'), encoding='utf-8')


class _Crashing(ExperimentCommand):
    def run(self, **options):
        raise RuntimeError('boom')


class ExperimentCommandTestCase(TestCase):
    """実行台帳への記録と終了コード"""

    def test_success_is_recorded(self):
        call_command(_Succeeding(), seed=7, stdout=io.StringIO())
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'succeeded')
        self.assertEqual(run.exit_code, 0)
        self.assertEqual(run.seed, 7)
        self.assertEqual(run.metrics, {'f1': 0.5})
        self.assertIsNotNone(run.finished_at)
        self.assertNotIn('stdout', run.config)

    def test_default_seed(self):
        with override_settings(SRL_SEED=11):
            call_command(_Succeeding(), stdout=io.StringIO())
        self.assertEqual(ExperimentRun.objects.get().seed, 11)

    def test_failure_carries_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command(_Failing(), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('error=ConfigError code=2', str(ctx.exception))
        self.assertIn('flag=--top-k', str(ctx.exception))
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertEqual(run.exit_code, 2)
        self.assertEqual(run.error_class, 'ConfigError')

    def test_data_error_code(self):
        command = _Failing()
        command.error = CheckpointError('truncated', path='model.npz')
        with self.assertRaises(CommandError) as ctx:
            call_command(command, stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 3)

    def test_os_error_becomes_data_error(self):
        with self.assertRaises(CommandError) as ctx:
            call_command(_Unreadable(), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertEqual(ExperimentRun.objects.get().error_class, 'DataError')

    def test_unexpected_error_closes_run(self):
        with self.assertRaises(RuntimeError):
            call_command(_Crashing(), stdout=io.StringIO())
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertEqual(run.exit_code, 1)
        self.assertEqual(run.error_class, 'RuntimeError')
        self.assertIsNotNone(run.finished_at)

    @override_settings(SRL_RECORD_RUNS=False)
    def test_recording_can_be_disabled(self):
        call_command(_Succeeding(), stdout=io.StringIO())
        self.assertFalse(ExperimentRun.objects.exists())

    def test_ledger_failure_does_not_fail_command(self):
        with mock.patch.object(ExperimentRun.objects, 'create', side_effect=RuntimeError('db down')):
            with self.assertLogs('experiments.command', level='WARNING') as logs:
                call_command(_Succeeding(), stdout=io.StringIO())
        self.assertIn('event=ledger_unavailable', logs.output[0])


class RunsCommandTestCase(TestCase):
    """runs コマンド"""

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        path = os.path.join(tmp.name, 'keep.conll')
        save_conll09([keep_your_heart()], path)
        call_command('validate', input=path, stdout=io.StringIO())
        call_command('evaluate', gold=path, pred=path, stdout=io.StringIO())

    def test_lists_newest_first(self):
        out = io.StringIO()
        call_command('runs', stdout=out)
        lines = out.getvalue().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertIn('command=evaluate status=succeeded exit_code=0', lines[0])
        self.assertIn('f1=1.0', lines[0])
        self.assertIn('command=validate', lines[1])

    def test_filter_and_limit(self):
        out = io.StringIO()
        call_command('runs', '--command=validate', stdout=out)
        self.assertEqual(len(out.getvalue().splitlines()), 1)
        self.assertIn('command=validate', out.getvalue())

        out = io.StringIO()
        call_command('runs', limit=1, stdout=out)
        self.assertEqual(len(out.getvalue().splitlines()), 1)
