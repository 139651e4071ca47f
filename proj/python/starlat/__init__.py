"""Python bindings for the starlat optimizer."""

import json as _json

from ._core import StarlatError, optimal_local_cpu, solve_edge_allocation
from . import _core

__all__ = ["StarlatError", "optimal_local_cpu", "solve_edge_allocation", "solve", "brute_force", "run_sweep"]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def solve(config=None, scheme="proposed-sdma", seed=0):
    """Run one scheme on the scenario described by a config dict or JSON string."""
    return _core.solve(_text(config or {}), scheme, seed)


def brute_force(config=None, mode="sdma", seed=0):
    """Grid reference for tiny scenarios."""
    return _core.brute_force(_text(config or {}), mode, seed)


def run_sweep(config, out_dir, workers=0, seed_offset=0):
    """Run a sweep, write results under out_dir and return the summary dict."""
    return _json.loads(_core.run_sweep(_text(config), str(out_dir), workers, seed_offset))
