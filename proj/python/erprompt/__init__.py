"""Prompt-pattern benchmarking for LLM-based entity resolution."""

from ._erprompt import *  # noqa: F401,F403
from ._erprompt import __doc__  # noqa: F401

__version__ = "0.1.0"
