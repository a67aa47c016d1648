"""Cloud-RAN baseband benchmarking: fronthaul dimensioning and parallel turbo coding."""

__version__ = "0.1.0"

from .fronthaul import FunctionalSplit, capacity, cell_profile  # noqa: E402,F401
from .codec import BACKEND, turbo_decode, turbo_encode  # noqa: E402,F401
