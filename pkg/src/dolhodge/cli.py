"""Command-line entry point: `dolhodge <command> [--config PATH] [--set k=v ...]`.

Commands: verify-theorem, verify-lemmas, wp-metric, rescale-demo, convergence,
spectrum.  Configuration is a flat JSON tree with explicitly named keys;
unknown keys are rejected.  Exit codes: 0 pass, 1 tolerance failure, 2 invalid
config, 3 rank jump / local freeness violation, 4 solver failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time

import numpy as np

from . import __version__
from .curvature import convergence_study, default_q, lemma_suite, verify_theorem, wp_report
from .errors import ConfigError, RankJumpError, SolverError
from .family import FamilySpec, phi_klbar, rescale_to_kill_H
from .hodge import DEFAULT_SEED, FiberContext
from .reports import curvature_payload, emit_convergence_csv, emit_report, pair, tensor
from .runtime import timing_in_reports

COMMANDS = ("verify-theorem", "verify-lemmas", "wp-metric", "rescale-demo",
            "convergence", "spectrum")


def _defaults() -> dict:
    return {
        "command": None,
        "family": {
            "tau_re": 0.0,
            "tau_im": 1.0,
            "degree": 2,
            "twist": [[float(np.pi), 0.0]],
            "rescale": [[[0.3, 0.0]]],
            "n_side": 48,
            "stencil_order": 4,
            "quartic": 0.0,
        },
        "q": None,
        "s0": None,
        "eta": 1e-2,
        "seed": DEFAULT_SEED,
        "tolerances": {
            "residual_rel": 5e-3,
            "green_tol": 1e-10,
            "wp_constancy": 1e-10,
            "serre_mismatch": 1e-2,
            "order_margin": 0.5,
        },
        "output_path": None,
        "n_list": [16, 24, 32, 48],
        "eta_list": [1e-2],
        "wp_grid": 5,
        "wp_extent": 0.1,
    }


def _merge(base: dict, update: dict, path: str = "") -> dict:
    for key, val in update.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict) and key != "command":
            if not isinstance(val, dict):
                raise ConfigError(f"config key {here} must be an object")
            _merge(base[key], val, here)
        else:
            base[key] = val
    return base


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.strip().split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config key: {key}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key: {key}")
    node[parts[-1]] = value


def load_config(path: str | None = None, sets: list[str] | None = None,
                command: str | None = None) -> dict:
    """Defaults, then the config file, then --set overrides; validated."""
    cfg = _defaults()
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        _merge(cfg, data)
    for assignment in sets or ():
        _apply_set(cfg, assignment)
    if command is not None:
        cfg["command"] = command
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cfg['command']!r}")
    try:
        spec = FamilySpec.from_config(cfg["family"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid family: {exc}") from exc
    if cfg["q"] not in (None, 0, 1):
        raise ConfigError(f"q must be 0, 1 or null, got {cfg['q']!r}")
    if cfg["s0"] is not None:
        if len(cfg["s0"]) != spec.base_dim:
            raise ConfigError(f"s0 must have {spec.base_dim} coordinates")
        for entry in cfg["s0"]:
            if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
                raise ConfigError("s0 entries must be [re, im] pairs")
    if not float(cfg["eta"]) > 0:
        raise ConfigError("eta must be positive")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    for key in ("n_list", "eta_list"):
        if not isinstance(cfg[key], list) or not cfg[key]:
            raise ConfigError(f"{key} must be a non-empty list")


def _spec_of(cfg: dict) -> FamilySpec:
    return FamilySpec.from_config(cfg["family"])


def _s0_of(cfg: dict, spec: FamilySpec):
    if cfg["s0"] is None:
        return (0.0 + 0.0j,) * spec.base_dim
    return tuple(complex(re, im) for re, im in cfg["s0"])


def run(cfg: dict) -> tuple[dict, int]:
    """Execute the configured command; returns (report payload, exit code)."""
    t_start = time.perf_counter()
    spec = _spec_of(cfg)
    s0 = _s0_of(cfg, spec)
    tols = cfg["tolerances"]
    include_timing = timing_in_reports()
    command = cfg["command"]

    if command == "verify-theorem":
        rep = verify_theorem(spec, s0=s0, q=cfg["q"], eta=float(cfg["eta"]),
                             green_tol=float(tols["green_tol"]), seed=cfg["seed"])
        passed = rep.residual_rel <= float(tols["residual_rel"])
        payload = curvature_payload(rep, include_timing)
    elif command == "verify-lemmas":
        rep = lemma_suite(spec, s0=s0, eta=float(cfg["eta"]),
                          green_tol=float(tols["green_tol"]), seed=cfg["seed"])
        passed = rep.passed
        payload = {"q": rep.q, "tol_fd": rep.tol_fd, "residuals": rep.residuals,
                   "trivial": list(rep.trivial)}
    elif command == "wp-metric":
        half = float(cfg["wp_extent"])
        npts = int(cfg["wp_grid"])
        axis = np.linspace(-half, half, npts)
        pts = []
        for re in axis:
            for im in axis:
                p = list(s0)
                p[0] = complex(re, im)
                pts.append(tuple(p))
        rep = wp_report(spec, pts)
        passed = rep["max_deviation"] <= float(tols["wp_constancy"]) and rep["psd"]
        payload = {
            "gram": tensor(rep["values"][0]),
            "grid_points": len(pts),
            "constant": rep["constant"],
            "max_deviation": rep["max_deviation"],
            "psd": rep["psd"],
            "min_eigenvalue": rep["min_eigenvalue"],
        }
    elif command == "rescale-demo":
        rep_before = verify_theorem(spec, s0=s0, q=cfg["q"], eta=float(cfg["eta"]),
                                    green_tol=float(tols["green_tol"]), seed=cfg["seed"])
        killed = rescale_to_kill_H(spec)
        rep_after = verify_theorem(killed, s0=s0, q=cfg["q"], eta=float(cfg["eta"]),
                                   green_tol=float(tols["green_tol"]), seed=cfg["seed"])
        m = spec.base_dim
        phi_after = max(abs(phi_klbar(killed, s0, k, l)) for k in range(m) for l in range(m))
        t4_after = float(np.abs(rep_after.t4).max())
        shift = rep_before.lhs - rep_after.lhs
        expected = np.zeros_like(shift)
        eye = np.eye(rep_before.rank)
        hess = spec.phi_hess(s0)
        for k in range(m):
            for l in range(m):
                expected[:, :, k, l] = hess[k, l] * eye
        shift_defect = float(np.abs(shift - expected).max()
                             / max(np.abs(expected).max(), 1e-300))
        passed = (phi_after <= 1e-12 and t4_after <= 1e-12
                  and rep_before.residual_rel <= float(tols["residual_rel"])
                  and rep_after.residual_rel <= float(tols["residual_rel"])
                  and shift_defect <= 10.0 * float(cfg["eta"]) ** 2)
        payload = {
            "before": curvature_payload(rep_before, include_timing),
            "after": curvature_payload(rep_after, include_timing),
            "phi_klbar_after": phi_after,
            "t4_after": t4_after,
            "lhs_shift_defect_rel": shift_defect,
        }
    elif command == "convergence":
        study = convergence_study(spec, q=cfg["q"], n_list=[int(n) for n in cfg["n_list"]],
                                  eta_list=[float(e) for e in cfg["eta_list"]],
                                  green_tol=float(tols["green_tol"]), seed=cfg["seed"])
        orders = [v["order"] for v in study["spatial"].values() if not np.isnan(v["order"])]
        target = spec.stencil_order - float(tols["order_margin"])
        passed = bool(orders) and max(orders) >= target
        payload = {
            "rows": study["rows"],
            "spatial": {repr(k): v for k, v in study["spatial"].items()},
            "eta_order": study["eta_order"],
            "target_order": target,
        }
        if cfg["output_path"]:
            csv_path = str(cfg["output_path"])
            csv_path = csv_path[:-5] + ".csv" if csv_path.endswith(".json") else csv_path + ".csv"
            emit_convergence_csv(study["rows"], csv_path)
            payload["csv_path"] = csv_path
    elif command == "spectrum":
        q = cfg["q"] if cfg["q"] is not None else default_q(spec)
        ctx = FiberContext.get(spec, s0)
        data = ctx.harmonic(q)
        passed = True
        payload = {
            "q": q,
            "dim": data.dim,
            "artifact_count": int(data.artifact.shape[1]),
            "eigenvalues": [float(v) for v in data.evals],
            "lambda_max": data.lam_max,
        }
    else:  # pragma: no cover - guarded by _validate
        raise ConfigError(f"unhandled command {command!r}")

    wall = time.perf_counter() - t_start
    payload.update({
        "command": command,
        "config": copy.deepcopy(cfg),
        "pass": bool(passed),
        "wall_time_s": wall if include_timing else None,
        "library_version": __version__,
    })
    print(f"[dolhodge] {command}: pass={passed} wall={wall:.2f}s", file=sys.stderr)
    return payload, 0 if passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dolhodge", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--set", dest="sets", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (dotted path)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.sets, command=args.command)
    except ConfigError as exc:
        error = {"error": {"type": "ConfigError", "message": str(exc)},
                 "library_version": __version__}
        sys.stdout.write(emit_report(error, None))
        return 2

    try:
        payload, code = run(cfg)
    except ConfigError as exc:
        code, error = 2, {"type": "ConfigError", "message": str(exc)}
    except RankJumpError as exc:
        code, error = 3, {"type": "RankJumpError", "message": str(exc)}
    except SolverError as exc:
        code, error = 4, {"type": "SolverError", "message": str(exc)}
    except OSError as exc:
        code, error = 4, {"type": "IOError", "message": str(exc)}
    else:
        text = emit_report(payload, cfg["output_path"])
        if cfg["output_path"] is None:
            sys.stdout.write(text)
        return code

    payload = {"error": error, "command": cfg["command"], "config": cfg,
               "library_version": __version__}
    text = emit_report(payload, cfg.get("output_path"))
    if cfg.get("output_path") is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
