"""Run reports: JSON documents with a fixed field order.

Floats are written with ``repr`` precision, so reading a report back and
writing it again reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .optimizer import Diagnostic, Solution
from .simulator import OptimalityReport, SimResult


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_report(report: dict[str, Any]) -> str:
    return json.dumps(_plain(report), indent=2) + "\n"


def write_report(report: dict[str, Any], path) -> None:
    atomic_write_text(path, dumps_report(report))


def read_report(path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def diagnostic_block(d: Diagnostic) -> dict[str, Any]:
    return {
        "name": d.name,
        "matches": d.matches,
        "documented": d.documented,
        "severity": d.severity,
        "deviation": d.deviation,
        "weights": d.weights,
    }


def solution_block(sol: Solution) -> dict[str, Any]:
    return {
        "weights": sol.weights,
        "pi0": sol.pi0,
        "cash": 1.0 - float(np.sum(sol.weights)),
        "objective_value": sol.objective_value,
        "gradient_norm": sol.gradient_norm,
        "lagrange_multiplier": sol.lagrange_multiplier,
        "constraint_residual": sol.constraint_residual,
        "matched_formulas": sol.matched,
    }


def simulation_block(res: SimResult, weights: Optional[np.ndarray] = None) -> dict[str, Any]:
    block: dict[str, Any] = {}
    if weights is not None:
        block["weights"] = weights
    block.update(
        mean_utility=res.mean_utility,
        stderr=res.stderr,
        analytic=res.analytic,
        z_score=res.z_score,
    )
    return block


def optimality_block(rep: OptimalityReport) -> dict[str, Any]:
    return {
        "n_perturbations": rep.n_perturbations,
        "radius": rep.radius,
        "candidate_value": rep.candidate_value,
        "analytic_violations": rep.analytic_violations,
        "mc_violations": rep.mc_violations,
        "max_analytic_gain": rep.max_analytic_gain,
        "min_mc_z": rep.min_mc_z,
    }
