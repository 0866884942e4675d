import os.path
import sys

ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, os.path.abspath(os.path.join(ROOT_DIR, '..')))

DEBUG = True

ADMINS = ()
MANAGERS = ADMINS

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': ':memory:',
    }
}

USE_I18N = False
USE_TZ = False

SECRET_KEY = 'el_19c6=)u!re!6sg-&amp;5gm&amp;yb14@t=e!e+7r=th6x12d29(rsz'

INSTALLED_APPS = (
    'microsr',
    'testapp',
)

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Small search budget so command tests finish quickly; the acceptance suite overrides it per test.
MICROSR_GP = {
    'population_size': 60,
    'generations': 3,
    'tournament_size': 5,
}
MICROSR_WORKERS = 1
MICROSR_TOP_K = 10

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'level': 'WARNING',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'microsr': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': True,
        },
    }
}
