"""Deterministic machine-readable reports.

Complex numbers are always emitted as [re, im] pairs, keys are sorted, floats
use the shortest round-trip decimal.  Identical configs and seeds produce
byte-identical files: measured wall time therefore stays out of the report
(null in the JSON, printed to stderr) unless DOLHODGE_TIMING opts in.
"""

from __future__ import annotations

import json
import numpy as np

from . import __version__
from .curvature import CurvatureReport


def pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def tensor(arr: np.ndarray) -> list:
    arr = np.asarray(arr)
    if arr.ndim == 0:
        return pair(arr[()])
    return [tensor(sub) for sub in arr]


def curvature_payload(rep: CurvatureReport, include_timing: bool) -> dict:
    return {
        "q": rep.q,
        "s0": [pair(z) for z in rep.s0],
        "eta": rep.eta,
        "rank": rep.rank,
        "lhs": tensor(rep.lhs),
        "terms": {"T1": tensor(rep.t1), "T2": tensor(rep.t2),
                  "T3": tensor(rep.t3), "T4": tensor(rep.t4)},
        "residual_abs": rep.residual_abs,
        "residual_rel": rep.residual_rel,
        "per_term_norms": dict(rep.per_term_norms),
        "hermiticity_defect": rep.hermiticity_defect,
        "frame": {"harmonicity": rep.frame_harmonicity,
                  "holo_residual": rep.frame_holo_residual},
        "wall_time_s": rep.wall_time_s if include_timing else None,
    }


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if (np.isnan(f) or np.isinf(f)) else f
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.complexfloating, complex)):
        return pair(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render(payload: dict) -> str:
    return json.dumps(_sanitize(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(payload: dict, path: str | None) -> str:
    text = render(payload)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def emit_convergence_csv(rows: list[dict], path: str) -> None:
    lines = ["N,eta,residual_rel,order_fit"]
    for r in rows:
        lines.append(f"{r['N']},{r['eta']!r},{r['residual_rel']!r},{r['order_fit']!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def library_version() -> str:
    return __version__
