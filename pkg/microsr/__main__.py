"""
Standalone entry point: ``python -m microsr srf_fit --data table.csv``.

Outside a Django project the app configures a minimal settings module itself; inside one, add ``microsr`` to
``INSTALLED_APPS`` and run the commands through ``manage.py``.
"""

import os
import sys

from django.conf import settings
from django.core.management import execute_from_command_line

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
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'microsr': {
            'handlers': ['console'],
            'level': os.environ.get('MICROSR_LOG_LEVEL', 'WARNING'),
        },
    },
}


def main(argv=None):
    if not settings.configured and 'DJANGO_SETTINGS_MODULE' not in os.environ:
        settings.configure(
            DEBUG=bool(os.environ.get('MICROSR_DEBUG')),
            INSTALLED_APPS=['microsr'],
            LOGGING=LOGGING,
        )
    execute_from_command_line(argv or sys.argv)


if __name__ == '__main__':
    main()
