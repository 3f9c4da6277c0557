# src/utils/__init__.py

from . import error_handler
from . import files
from . import logging
from . import roots
