"""
Django settings for the pfsddp project.

Solver defaults live in ``PFSDDP``; every key can be overridden through an environment variable
``PFSDDP_<KEY>`` (or a ``.env`` file, read by python-decouple).
"""
from pathlib import Path
import sys

import dj_database_url
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-pfsddp-local-development-key-change-me')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='*', cast=Csv())
SECURE_PROXY_SSL_HEADER = ('HTTP_X_FORWARDED_PROTO', 'https')

if DEBUG:
    SECURE_SSL_REDIRECT = False
    SESSION_COOKIE_SECURE = False
    CSRF_COOKIE_SECURE = False
else:
    SECURE_SSL_REDIRECT = config('SECURE_SSL_REDIRECT', default=True, cast=bool)
    SESSION_COOKIE_SECURE = True
    CSRF_COOKIE_SECURE = True

CSRF_TRUSTED_ORIGINS = config('CSRF_TRUSTED_ORIGINS', default='http://localhost:8000,http://127.0.0.1:8000',
                              cast=Csv())

# Application definition
INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'rest_framework',
    'drf_yasg',
    'apps.lp_app',
    'apps.instance_app',
    'apps.cuts_app',
    'apps.stage_app',
    'apps.engine_app',
    'apps.hydro_app',
    'apps.cli_app',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [
        'rest_framework.permissions.AllowAny',
    ],
    'EXCEPTION_HANDLER': 'core.exceptions.custom_exception_handler',
}

ROOT_URLCONF = 'config.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'config.wsgi.application'

# Swagger
SWAGGER_SETTINGS = {
    'SECURITY_DEFINITIONS': {},
    'USE_SESSION_AUTH': False,
    'DEFAULT_MODEL_RENDERING': 'example',
    'DISPLAY_OPERATION_ID': False,
    'OPERATIONS_SORTER': 'method',
    'TAGS_SORTER': 'alpha',
    "DEFAULT_API_URL": config('DEFAULT_API_URL', default='http://127.0.0.1:8000'),
}

# Database

if 'test' in sys.argv:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': ':memory:',
        }
    }
    CELERY_TASK_ALWAYS_EAGER = True
    CELERY_TASK_EAGER_PROPAGATES = True
else:
    DATABASES = {
        'default': dj_database_url.config(
            default=config('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}"),
            conn_max_age=config('DB_CONN_MAX_AGE', default=0, cast=int),
        )
    }

# Celery
CELERY_BROKER_URL = config("CELERY_BROKER_URL", default="redis://localhost:6379/0")
CELERY_RESULT_BACKEND = config("CELERY_RESULT_BACKEND", default=CELERY_BROKER_URL)
CELERY_ACCEPT_CONTENT = config("CELERY_ACCEPT_CONTENT", default="json", cast=Csv())
CELERY_TASK_SERIALIZER = config("CELERY_TASK_SERIALIZER", default="json")
CELERY_RESULT_SERIALIZER = config("CELERY_RESULT_SERIALIZER", default="json")
CELERY_TIMEZONE = config("CELERY_TIMEZONE", default="UTC")

# Runs API
RUNS_PAGE_SIZE = config("RUNS_PAGE_SIZE", default=10, cast=int)


def _optional_float(value):
    return None if value in (None, '', 'none', 'None') else float(value)


# Solver
PFSDDP = {
    'MAX_ITERS': config('PFSDDP_MAX_ITERS', default=200, cast=int),
    'GAP_EPSILON': config('PFSDDP_GAP_EPSILON', default=0.005, cast=float),
    'FEAS_TOL': config('PFSDDP_FEAS_TOL', default=1e-6, cast=float),
    'OPT_TOL': config('PFSDDP_OPT_TOL', default=1e-9, cast=float),
    'FORWARD_PATHS': config('PFSDDP_FORWARD_PATHS', default=20, cast=int),
    'SEED': config('PFSDDP_SEED', default=0, cast=int),
    # Unset means the bound stored in the instance document applies.
    'THETA_LOWER_BOUND': config('PFSDDP_THETA_LOWER_BOUND', default=None, cast=_optional_float),
    'CONFIDENCE_Z': config('PFSDDP_CONFIDENCE_Z', default=1.96, cast=float),
    'ENUMERATION_LEAF_LIMIT': config('PFSDDP_ENUMERATION_LEAF_LIMIT', default=64, cast=int),
    'TREE_NODE_LIMIT': config('PFSDDP_TREE_NODE_LIMIT', default=100_000, cast=int),
    'THREADS': config('PFSDDP_THREADS', default=1, cast=int),
    'LP_BACKEND': config('PFSDDP_LP_BACKEND', default='apps.lp_app.services.SimplexSolver'),
}

# Logging
PFSDDP_LOG = config('PFSDDP_LOG', default='info').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'default': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'default',
        },
    },
    'loggers': {
        'apps': {
            'handlers': ['console'],
            'level': PFSDDP_LOG,
            'propagate': False,
        },
        'core': {
            'handlers': ['console'],
            'level': PFSDDP_LOG,
            'propagate': False,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
}

# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

# Static files (CSS, JavaScript, Images)

STATIC_URL = '/static/'
STATIC_ROOT = config('STATIC_ROOT', default=str(BASE_DIR / 'vol/web/static'))

# Default primary key field type

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
