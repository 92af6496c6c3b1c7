"""
Django settings for srl_toolkit project.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# 管理コマンド専用のプロジェクト（HTTPは提供しない）
SECRET_KEY = config('SECRET_KEY', default='srl-toolkit-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third party apps
    'rest_framework',

    # Local apps
    'experiments',
    'treebank',
    'pruning',
    'neural',
    'srl',
    'scoring',
]

# Database
# Use PostgreSQL when DB_NAME is set (shared run ledger), SQLite otherwise
if config('DB_NAME', default=None):
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': config('DB_NAME'),
            'USER': config('DB_USER'),
            'PASSWORD': config('DB_PASSWORD'),
            'HOST': config('DB_HOST', default='localhost'),
            'PORT': config('DB_PORT', default='5432'),
            'CONN_MAX_AGE': 600,
            'OPTIONS': {
                'connect_timeout': 10,
            }
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': config('SQLITE_PATH', default=str(BASE_DIR / 'db.sqlite3')),
        }
    }

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework settings（シリアライザーによる設定検証のみ使用）
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}

# 実行台帳（experiments.ExperimentRun）への記録
SRL_RECORD_RUNS = config('SRL_RECORD_RUNS', default=True, cast=bool)

# 乱数シードとスレッド数の既定値
SRL_SEED = config('SRL_SEED', default=1, cast=int)
SRL_THREADS = config('SRL_THREADS', default=1, cast=int)

# 学習ハイパーパラメータの既定値（各キーは環境変数 SRL_<KEY> で上書き可能）
SRL_DEFAULTS = {
    'language': config('SRL_LANGUAGE', default='xx'),
    'syntax': config('SRL_SYNTAX', default='pred'),
    'mode': config('SRL_MODE', default='role-only'),
    'prune': config('SRL_PRUNE', default='rule'),
    'top_k': config('SRL_TOP_K', default=20, cast=int),
    'coverage': config('SRL_COVERAGE', default=0.99, cast=float),
    'korder': config('SRL_KORDER', default=10, cast=int),
    'word_dim': config('SRL_WORD_DIM', default=100, cast=int),
    'lemma_dim': config('SRL_LEMMA_DIM', default=100, cast=int),
    'pos_dim': config('SRL_POS_DIM', default=100, cast=int),
    'indicator_dim': config('SRL_INDICATOR_DIM', default=16, cast=int),
    'pretrained_dim': config('SRL_PRETRAINED_DIM', default=100, cast=int),
    'contextual_dim': config('SRL_CONTEXTUAL_DIM', default=1024, cast=int),
    'lstm_layers': config('SRL_LSTM_LAYERS', default=3, cast=int),
    'hidden_size': config('SRL_HIDDEN_SIZE', default=400, cast=int),
    'mlp_size': config('SRL_MLP_SIZE', default=300, cast=int),
    'recurrent_keep': config('SRL_RECURRENT_KEEP', default=0.8, cast=float),
    'mlp_keep': config('SRL_MLP_KEEP', default=0.8, cast=float),
    'learning_rate': config('SRL_LEARNING_RATE', default=2e-3, cast=float),
    'beta1': config('SRL_BETA1', default=0.9, cast=float),
    'beta2': config('SRL_BETA2', default=0.999, cast=float),
    'adam_eps': config('SRL_ADAM_EPS', default=1e-8, cast=float),
    'epochs': config('SRL_EPOCHS', default=500, cast=int),
    'batch_size': config('SRL_BATCH_SIZE', default=64, cast=int),
    'eval_every': config('SRL_EVAL_EVERY', default=1, cast=int),
    'unk_replace': config('SRL_UNK_REPLACE', default=0.1, cast=float),
    'embed_init': config('SRL_EMBED_INIT', default=0.1, cast=float),
    'forget_bias': config('SRL_FORGET_BIAS', default=1.0, cast=float),
}

# Logging configuration
# key=value 形式の行ログ（タイムスタンプは付けない）
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'kv': {
            'format': 'level={levelname} logger={name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'kv',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': config('LOG_LEVEL', default='INFO'),
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': config('DJANGO_LOG_LEVEL', default='WARNING'),
            'propagate': False,
        },
        **{
            app: {
                'handlers': ['console'],
                'level': config('LOG_LEVEL', default='INFO'),
                'propagate': False,
            }
            for app in ('experiments', 'treebank', 'pruning', 'neural', 'srl', 'scoring')
        },
    },
}
