"""Dynamic almost-maximal matching with budgeted worst-case update steps."""

from .params import Config, Params, derive

__all__ = ["Config", "Params", "derive"]
__version__ = "0.1.0"
