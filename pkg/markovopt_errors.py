# -*- coding: utf-8 -*-
"""
markovopt_errors.py
-------------------
Exception types raised across the markovopt modules.

Value problems (bad inputs) derive from ValueError, numeric/runtime failures
from RuntimeError, so callers can keep catching the builtin types.
"""
from __future__ import annotations


class MarkovOptError(Exception):
    """Base class for every markovopt error."""


class NonErgodic(MarkovOptError, ValueError):
    pass


class NotReversible(MarkovOptError, ValueError):
    pass


class InvalidProbability(MarkovOptError, ValueError):
    pass


class InvalidSize(MarkovOptError, ValueError):
    pass


class DimensionMismatch(MarkovOptError, ValueError):
    pass


class CapExceeded(MarkovOptError, RuntimeError):
    pass


class NotPowerOfTwo(MarkovOptError, ValueError):
    pass


class BadState(MarkovOptError, ValueError):
    pass


class SingularSystem(MarkovOptError, RuntimeError):
    pass


class OddDimension(MarkovOptError, ValueError):
    pass


class InvalidParams(MarkovOptError, ValueError):
    pass


class EmptyTrace(MarkovOptError, ValueError):
    pass


class MalformedCsv(MarkovOptError, ValueError):
    pass


class ConfigError(MarkovOptError, ValueError):
    pass
