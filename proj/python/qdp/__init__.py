"""Queue pricing policies: exponentiated Q-ascent on the QPLEX model, exact baselines and simulation.

Configs may be given as a dict, a JSON string, or a path to a JSON file. Policies are
lists of rows (one per period) of action indices per customer count.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Sequence, Union

from . import _qdp
from ._qdp import (
    ConfigError,
    DomainError,
    NumericalError,
    ResourceGuardError,
    UnsupportedModelError,
    old_label_pmf,
)

ConfigLike = Union[Mapping[str, Any], str, os.PathLike]
Policy = Sequence[Sequence[int]]

__all__ = [
    "ConfigError",
    "DomainError",
    "NumericalError",
    "ResourceGuardError",
    "UnsupportedModelError",
    "bellman_full",
    "bellman_geom",
    "config_hash",
    "evaluate",
    "gradcheck",
    "old_label_pmf",
    "resolve_config",
    "run_design",
    "simulate",
    "train",
]


def _text(cfg: ConfigLike) -> str:
    if isinstance(cfg, Mapping):
        return json.dumps(cfg)
    if isinstance(cfg, os.PathLike) or (isinstance(cfg, str) and not cfg.lstrip().startswith("{")):
        with open(cfg, encoding="utf-8") as f:
            return f.read()
    return cfg


def _rows(policy: Policy) -> list[list[int]]:
    return [[int(a) for a in row] for row in policy]


def resolve_config(cfg: ConfigLike) -> dict:
    """Config with every default filled in."""
    return json.loads(_qdp.resolve_config(_text(cfg)))


def config_hash(cfg: ConfigLike) -> str:
    return _qdp.config_hash(_text(cfg))


def train(cfg: ConfigLike) -> dict:
    """Train with the config's `train` settings. Returns values, trace and the pure policy."""
    return _qdp.train(_text(cfg))


def evaluate(cfg: ConfigLike, policy: Policy) -> dict:
    """QPLEX value of a count policy."""
    return _qdp.evaluate(_text(cfg), _rows(policy))


def simulate(cfg: ConfigLike, policy: Policy, reps: int = 100_000, seed: int = 1, threads: int = 0) -> dict:
    return _qdp.simulate(_text(cfg), _rows(policy), reps, seed, threads)


def bellman_full(cfg: ConfigLike, policy: Policy | None = None) -> dict:
    """Full-information optimum, extracted count policy value and optionally a policy's exact value."""
    return _qdp.bellman_full(_text(cfg), None if policy is None else _rows(policy))


def bellman_geom(cfg: ConfigLike, policy: Policy | None = None) -> dict:
    return _qdp.bellman_geom(_text(cfg), None if policy is None else _rows(policy))


def gradcheck(trials: int = 50, seed: int = 1, cfg: ConfigLike | None = None) -> list[dict]:
    return _qdp.gradcheck(trials, seed, None if cfg is None else _text(cfg))


def run_design(design: ConfigLike, parallel: int = 1, out_dir: str | os.PathLike = "") -> list[dict]:
    """Run an experiment grid; one summary dict per cell."""
    return _qdp.run_design(_text(design), parallel, os.fspath(out_dir))
