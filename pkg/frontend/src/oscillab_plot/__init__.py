"""Batch figure rendering for oscillab artifacts (CSV ledgers, run reports)."""

from .figures import KINDS, FigureSpec, render
from .io import InputError, read_ledger, read_report

__version__ = "0.1.0"
