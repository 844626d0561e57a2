import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-aca-local-development-key')

DEBUG = os.getenv('DJANGO_DEBUG', 'true').lower() in ('1', 'true', 'yes')

ALLOWED_HOSTS = [host for host in os.getenv('DJANGO_ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',') if host]

INSTALLED_APPS = [
    'consensus',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.middleware.common.CommonMiddleware',
]

ROOT_URLCONF = 'core.urls'

WSGI_APPLICATION = 'core.wsgi.application'

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


def _optional_int(name):
    value = os.getenv(name, '').strip()
    return int(value) if value else None


# Consensus engine
ACA_HASH = os.getenv('ACA_HASH', 'sha256')
ACA_SIGNATURE = os.getenv('ACA_SIGNATURE', 'ed25519')
ACA_LAMPORT_INIT = os.getenv('ACA_LAMPORT_INIT', 'all_zero')
ACA_LAMPORT_BYTE_INDEX = int(os.getenv('ACA_LAMPORT_BYTE_INDEX', '13'))
ACA_ROOT_MAJORITY = _optional_int('ACA_ROOT_MAJORITY')
ACA_STRIP_FLAG_TABLES = os.getenv('ACA_STRIP_FLAG_TABLES', 'true').lower() in ('1', 'true', 'yes')
ACA_ORPHAN_CAPACITY = int(os.getenv('ACA_ORPHAN_CAPACITY', '10000'))
ACA_ORPHAN_TIMEOUT = int(os.getenv('ACA_ORPHAN_TIMEOUT', '200'))
# 'unlimited' or a number of self-ancestor levels
_compare_depth = os.getenv('ACA_COMPARE_DEPTH', 'unlimited').strip().lower()
ACA_COMPARE_DEPTH = None if _compare_depth in ('', 'unlimited') else int(_compare_depth)

# Gossip timing
ACA_HEARTBEAT_MS = int(os.getenv('ACA_HEARTBEAT_MS', '50'))
ACA_SIM_HEARTBEAT = int(os.getenv('ACA_SIM_HEARTBEAT', '10'))
ACA_SYNC_TIMEOUT = float(os.getenv('ACA_SYNC_TIMEOUT', '5'))

# Local network membership (run_node)
ACA_NETWORK_SEED = os.getenv('ACA_NETWORK_SEED')
ACA_NETWORK_SIZE = int(os.getenv('ACA_NETWORK_SIZE', '0'))
ACA_NODE_INDEX = int(os.getenv('ACA_NODE_INDEX', '0'))
ACA_PEER_ADDRESSES = [address.strip() for address in os.getenv('ACA_PEER_ADDRESSES', '').split(',') if address.strip()]
ACA_JOURNAL_DIR = os.getenv('ACA_JOURNAL_DIR')

# TxFlow ledger
ACA_GENESIS_FILE = os.getenv('ACA_GENESIS_FILE')
ACA_DEFAULT_BALANCE = int(os.getenv('ACA_DEFAULT_BALANCE', '1000'))

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'consensus': {
            'handlers': ['console'],
            'level': os.getenv('ACA_LOG_LEVEL', 'WARNING'),
            'propagate': True,
        },
    },
}
