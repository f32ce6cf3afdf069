"""Batch driver: flat key=value configs, study dispatch and result files.

Config lines look like ``grid.Nx=64`` or ``study.name=taylor``; ``#`` starts
a comment.  Lists are comma separated.  ``grid.Nx`` and ``study.name`` are
required, everything else has a default.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import studies
from .grid import GridSpec
from .solver import FixedPointError
from .state import PhysicalParams
from .stokes import CompatibilityWarning, SingularModeError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


DEFAULTS = {
    "grid.Nx": None,
    "grid.Ny": 32,
    "grid.Lx": 2 * math.pi,
    "grid.Ly": math.pi,
    "grid.dt": 0.025,
    "grid.t0": 0.5,
    "grid.p_diag": 6.0,
    "grid.stretch": 0.0,
    "params.rho1": 1.0,
    "params.rho2": 2.0,
    "params.mu1": 1.0,
    "params.mu2": 3.0,
    "params.sigma": 1.5,
    "control.kind": "flat",
    "control.amplitude": 0.5,
    "control.h0_amplitude": 0.01,
    "control.direction_scale": 1.0,
    "study.name": None,
    "study.directions": 3,
    "study.s_values": [1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
    "study.levels": 3,
    "study.tests": 20,
    "mollifier.eps": 0.4,
    "mollifier.delta": 0.25,
    "mollifier.eps_values": [0.2, 0.1, 0.05, 0.025],
    "mollifier.amplitude": 0.1,
    "solver.tol": 1e-12,
    "seed": 0,
    "output.dir": ".",
    "output.prefix": "",
}
REQUIRED = ("grid.Nx", "study.name")
INT_KEYS = {"grid.Nx", "grid.Ny", "study.directions", "study.levels", "study.tests", "seed"}
LIST_KEYS = {"study.s_values", "mollifier.eps_values"}
STR_KEYS = {"control.kind", "study.name", "output.dir", "output.prefix"}


def _parse_value(key, raw):
    raw = raw.strip()
    try:
        if key in STR_KEYS:
            return raw
        if key in LIST_KEYS:
            return [float(v) for v in raw.split(",") if v.strip()]
        if key in INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config(text):
    """Parse config text into a dict of raw (typed) values, without defaults."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{key}: unknown field")
        out[key] = _parse_value(key, raw)
    return out


@dataclass
class Config:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def grid(self):
        v = self.values
        return GridSpec(Nx=v["grid.Nx"], Lx=v["grid.Lx"], Ny=v["grid.Ny"], Ly=v["grid.Ly"], dt=v["grid.dt"],
                        t0=v["grid.t0"], p_diag=v["grid.p_diag"], stretch=v["grid.stretch"])

    @property
    def params(self):
        v = self.values
        return PhysicalParams(v["params.rho1"], v["params.rho2"], v["params.mu1"], v["params.mu2"], v["params.sigma"])

    def as_json(self):
        return dict(sorted(self.values.items()))


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def validate(raw):
    """Fill defaults and check ranges; raises :class:`ConfigError`."""
    for key in REQUIRED:
        _check(key in raw, key, "missing required field")
    values = dict(DEFAULTS)
    values.update(raw)
    cfg = Config(values)
    _check(values["study.name"] in STUDIES, "study.name",
           f"unknown study {values['study.name']!r} (known: {', '.join(sorted(STUDIES))})")
    _check(values["control.kind"] in ("flat", "physical"), "control.kind", "must be flat or physical")
    _check(values["study.levels"] >= 3, "study.levels", "need at least 3 levels")
    _check(values["study.directions"] >= 1, "study.directions", "must be >= 1")
    _check(values["study.tests"] >= 1, "study.tests", "must be >= 1")
    _check(len(values["study.s_values"]) >= 2 and all(s > 0 for s in values["study.s_values"]),
           "study.s_values", "need at least two positive values")
    _check(len(values["mollifier.eps_values"]) >= 3 and all(e > 0 for e in values["mollifier.eps_values"]),
           "mollifier.eps_values", "need at least three positive values")
    _check(values["mollifier.eps"] > 0, "mollifier.eps", "must be positive")
    _check(0 < values["mollifier.delta"] < 0.5, "mollifier.delta", "must lie in (0, 1/2)")
    _check(values["solver.tol"] > 0, "solver.tol", "must be positive")
    for sec, build in (("grid", lambda: cfg.grid), ("params", lambda: cfg.params)):
        try:
            build()
        except ValueError as exc:
            raise ConfigError(f"{sec}: {exc}") from None
    return cfg


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: file {str(path)!r} not found")
    return validate(parse_config(path.read_text()))


# ---------------------------------------------------------------------------
# study dispatch

def _ladder(cfg):
    g = cfg.grid
    return [(g.Nx * 2 ** i, g.Ny * 2 ** i, g.M * 2 ** i, cfg["mollifier.eps"] / 2 ** i) for i in range(cfg["study.levels"])]


def _taylor(cfg):
    return studies.taylor_study(cfg.grid, cfg.params, cfg["control.kind"], cfg["seed"], cfg["study.directions"],
                                cfg["study.s_values"], cfg["control.amplitude"], cfg["control.h0_amplitude"],
                                cfg["control.direction_scale"], cfg["solver.tol"])


def _mms(cfg):
    n = cfg["study.levels"] + 1
    return studies.mms_study(cfg.params, Nx=cfg["grid.Nx"], t0=cfg["grid.t0"],
                             ny_levels=tuple(8 * 2 ** i + 1 for i in range(n)),
                             dt_levels=tuple(0.05 / 2 ** i for i in range(n)))


def _vof(kind):
    def run(cfg):
        return studies.vof_study(cfg.params, kind, _ladder(cfg), cfg["seed"], cfg["control.amplitude"],
                                 cfg["control.h0_amplitude"], cfg["grid.t0"], n_tests=min(cfg["study.tests"], 8),
                                 delta=cfg["mollifier.delta"])
    return run


STUDIES = {
    "smoke": lambda cfg: studies.smoke_study(cfg.grid, cfg.params),
    "curvature": lambda cfg: studies.curvature_study(cfg["grid.Nx"]),
    "n_structure": lambda cfg: studies.n_structure_study(cfg.grid, cfg.params, cfg["seed"]),
    "linearization": lambda cfg: studies.linearization_study(cfg.grid, cfg.params, cfg["seed"]),
    "taylor": _taylor,
    "mms": _mms,
    "mollifier": lambda cfg: studies.mollifier_study(cfg["mollifier.eps_values"], cfg["mollifier.amplitude"],
                                                     cfg["mollifier.delta"]),
    "transport": lambda cfg: studies.transport_study(cfg.params, [lv[:3] for lv in _ladder(cfg)], cfg["seed"],
                                                     cfg["control.amplitude"], cfg["control.h0_amplitude"],
                                                     cfg["grid.t0"]),
    "vof_forward": _vof("forward"),
    "vof_sensitivity": _vof("sensitivity"),
    "weak_identities": lambda cfg: studies.weak_identity_study(cfg["study.tests"], cfg["seed"],
                                                               sigma=cfg["params.sigma"]),
}

STUDY_HELP = {
    "smoke": "zero data, zero state",
    "curvature": "two curvature formulas on h = 0.2 cos x",
    "n_structure": "N(0) = 0 and quadratic growth of N",
    "linearization": "Taylor remainder of the linearized right-hand side",
    "taylor": "control-to-state Taylor test (control.kind = flat | physical)",
    "mms": "manufactured-solution rates of the Stokes solver",
    "mollifier": "eps-convergence of the mollified normal and its variation",
    "transport": "indicator transport versus the computed interface",
    "vof_forward": "weak-form residual of the forward VoF system",
    "vof_sensitivity": "weak-form residual of the linearized VoF system",
    "weak_identities": "interface integral identities on seeded test functions",
}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(cfg, result, runtime):
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg["output.prefix"] or cfg["study.name"]
    csv_path, json_path = out / f"{prefix}.csv", out / f"{prefix}.json"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(result.columns)
        for row in result.rows:
            wr.writerow([_cell(v) for v in row])
    report = {
        "config": cfg.as_json(),
        "metrics": {k: m.as_dict() for k, m in result.metrics.items()},
        "passed": result.passed,
        "runtime_seconds": runtime,
    }
    if result.info:
        report["info"] = result.info
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def run_config(path):
    """Run the study named in the config file; returns (exit code, result)."""
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION, None
    t = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CompatibilityWarning)
            result = STUDIES[cfg["study.name"]](cfg)
    except (FixedPointError, SingularModeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("solver failure in study %s: %s", cfg["study.name"], exc)
        return EXIT_SOLVER, None
    runtime = time.perf_counter() - t
    write_outputs(cfg, result, runtime)
    for k, m in result.metrics.items():
        log.info("%-22s %-14s %s (%s)", k, m.as_dict()["value"], "pass" if m.passed else "FAIL", m.tolerance)
    return (EXIT_OK if result.passed else EXIT_ACCEPTANCE), result
