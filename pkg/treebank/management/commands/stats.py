"""
コーパス統計コマンド（文・トークン・述語・項の数）
"""
from experiments.command import ExperimentCommand
from treebank.conll import read_conll09, corpus_stats


class Command(ExperimentCommand):
    help = 'コーパス統計（#sent #token #pred #arg）を表示します'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', required=True, help='CoNLL-2009 ファイル')
        parser.add_argument('--name', default='corpus', help='表示用のデータセット名')

    def run(self, **options):
        stats = corpus_stats(read_conll09(options['input'], threads=options['threads']))
        self.stdout.write("dataset\tsent\ttoken\tpred\targ")
        self.stdout.write(f"{options['name']}\t{stats.as_row()}")
        return {
            'sentences': stats.n_sentences,
            'tokens': stats.n_tokens,
            'predicates': stats.n_predicates,
            'arguments': stats.n_arguments,
        }
