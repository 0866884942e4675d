# Test collection wiring for pytest: mirrors testproject/manage.py so the Django
# test suite under testproject/ can run without `manage.py test`.
import os
import sys

_TESTPROJECT = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'testproject')
sys.path.insert(0, _TESTPROJECT)
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'testproject.settings')

import django  # noqa: E402

django.setup()
