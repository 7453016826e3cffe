"""
Verification harness for netembed.

Use :func:`load_scenario` to read a scenario file and
:class:`VerificationManager` to run its verifiers; :func:`main` is the
``netembed`` console script.
"""

from .cli import main  # noqa: F401
from .runner import VerificationManager  # noqa: F401
from .scenario import Scenario, load_scenario  # noqa: F401

__all__ = ["main", "VerificationManager", "Scenario", "load_scenario"]
