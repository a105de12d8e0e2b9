"""
Django settings for quantumlayer project.

The project has no web surface and no database; it hosts the ``layer`` app
and its ``manage.py layer`` command.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/3.2/ref/settings/
"""

import os

from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'layer-solver-local')

DEBUG = os.environ.get('DJANGO_DEBUG', '') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',

    'layer',
]

MIDDLEWARE = []


# Database
# The solver keeps no state between runs.

DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/3.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_L10N = False

USE_TZ = True


REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
}


# Numerics defaults for the layer solver, see layer/conf.py

LAYER_SOLVER = {
    'QUAD_ORDER': int(os.environ.get('LAYER_QUAD_ORDER', 16)),
    'TAIL_TOL': float(os.environ.get('LAYER_TAIL_TOL', 1e-10)),
    'ROOT_TOL': float(os.environ.get('LAYER_ROOT_TOL', 1e-12)),
    'MAX_ITERATIONS': int(os.environ.get('LAYER_MAX_ITERATIONS', 50)),
    'CONDITION_LIMIT': float(os.environ.get('LAYER_CONDITION_LIMIT', 1e12)),
    'THREADS': int(os.environ.get('LAYER_THREADS', 1)),
}


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'solver': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'solver',
        },
    },
    'loggers': {
        'layer': {
            'handlers': ['console'],
            'level': os.environ.get('LAYER_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}
