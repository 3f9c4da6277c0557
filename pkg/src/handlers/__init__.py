# src/handlers/__init__.py

from . import analysis
from . import dynamics
from . import ensemble
