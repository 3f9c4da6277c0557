# src/services/__init__.py

from . import torus_fourier
from . import bessel
from . import stationary
from . import mckv_pde
from . import mckv_spde
from . import particles
from . import monitoring
