"""Limit laws of quadratic forms, convergence-rate experiments, lattices and theta series."""

import json as _json

from ._qfclt import (
    BudgetError,
    ValidationError,
    __version__,
    count_ellipsoid,
    gauss_cdf,
    lll_reduce,
    poisson_check,
    rate_fit,
    run_criterion,
    successive_minima,
    theta_series,
    weight_domination,
)
from ._qfclt import run_command as _run_command


def run_command(command, config=None, threads=0):
    """Run a CLI subcommand on a config dict; returns a list of row dicts."""
    columns, rows = _run_command(command, _json.dumps(config or {}), threads)
    return [dict(zip(columns, row)) for row in rows]


__all__ = [
    "BudgetError",
    "ValidationError",
    "__version__",
    "count_ellipsoid",
    "gauss_cdf",
    "lll_reduce",
    "poisson_check",
    "rate_fit",
    "run_command",
    "run_criterion",
    "successive_minima",
    "theta_series",
    "weight_domination",
]
