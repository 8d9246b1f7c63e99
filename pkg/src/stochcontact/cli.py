"""Scenario runner: ``stochcontact <kind> --config scenario.toml``.

A scenario is a TOML file with top-level ``name``, ``kind`` and ``seed``, a
table named after the kind holding its parameters, and an optional
``[expect]`` table of checks on the reported metrics. Each check is a table
with ``max``, ``min``, or ``value`` plus ``tol`` or ``rtol``.

Every run writes data files, a ``plot.py`` stub and ``report.json`` into
``<out>/<name>/``. The output root is ``--out``, else ``$STOCHCONTACT_OUT``,
else the scenario's ``output`` key, else ``./out``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import cumulants as cm
from . import dynamics as dyn
from . import forms
from . import io
from . import kinetic as kin
from . import transport as tr
from . import variational as var
from .errors import CFLViolation, ContractViolation, EvaluationError, UnsupportedOrderError

log = logging.getLogger("stochcontact")

KINDS = ("flow", "kinetic", "stationary", "estimate", "holonomy", "action", "invariants")
OUT_ENV = "STOCHCONTACT_OUT"
SCENARIO_DIR = Path(__file__).with_name("scenarios")

EXIT_OK, EXIT_VALIDATION, EXIT_ASSERTION, EXIT_DIVERGENCE = 0, 2, 3, 4

__all__ = [
    "Scenario",
    "RunReport",
    "ScenarioSummary",
    "ValidationError",
    "load_scenario",
    "config_hash",
    "run",
    "list_scenarios",
    "main",
    "OUT_ENV",
    "SCENARIO_DIR",
]


class ValidationError(ContractViolation):
    """A scenario file is malformed; the message names the offending field."""


# -- scenario schema ----------------------------------------------------------

TOP_KEYS = {"name", "kind", "seed", "output", "workers", "description", "expect"}

KIND_KEYS = {
    "flow": {"hamiltonian", "params", "y0", "wp0", "t0", "h", "steps"},
    "kinetic": {"extents", "m", "bc", "coefficients", "normalization", "initial", "t_end", "dt", "cfl"},
    "stationary": {"drift", "diffusion", "extents", "m", "bc", "normalization", "method"},
    "estimate": {"model", "N", "t_end", "points", "max_order", "normalization", "connection", "write_ensemble", "C"},
    "holonomy": {"field", "params", "A", "B", "B_prime", "C", "segments", "stokes"},
    "action": {"hamiltonian", "params", "y0", "wp0", "t0", "h", "steps", "path", "perturbation", "descend"},
    "invariants": {"hamiltonian", "params", "n", "samples", "box", "seed_offset", "flow_steps", "flow_h"},
}

REQUIRED = {
    "flow": {"hamiltonian", "y0", "wp0", "h", "steps"},
    "kinetic": {"extents", "m", "coefficients", "initial", "t_end"},
    "stationary": {"drift", "diffusion", "extents", "m"},
    "estimate": {"model", "N", "t_end", "points"},
    "holonomy": {"field", "A", "B", "B_prime", "C"},
    "action": {"hamiltonian"},
    "invariants": {"hamiltonian", "n"},
}

CHECK_KEYS = {"max", "min", "value", "tol", "rtol"}


@dataclass
class Scenario:
    name: str
    kind: str
    seed: int
    params: dict
    expect: dict
    path: Path
    output: Optional[str] = None
    workers: int = 1
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the parsed config serialised with sorted keys and fixed separators.

    Comments, key order and whitespace in the source text do not affect it.
    """
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _fail(path, msg):
    raise ValidationError(f"{path}: {msg}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ValidationError(f"{path}: parse error: {exc}") from exc
    for key in raw:
        if key not in TOP_KEYS and key not in KINDS:
            _fail(key, "unknown key")
    for key in ("name", "kind"):
        if key not in raw:
            _fail(key, "missing required key")
    kind = raw["kind"]
    if kind not in KINDS:
        _fail("kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    blocks = [k for k in KINDS if k in raw]
    if blocks != [kind]:
        _fail(kind, f"expected exactly one parameter table [{kind}], found {blocks}")
    params = raw[kind]
    if not isinstance(params, dict):
        _fail(kind, "must be a table")
    for key in params:
        if key not in KIND_KEYS[kind]:
            _fail(f"{kind}.{key}", "unknown key")
    for key in sorted(REQUIRED[kind] - set(params)):
        _fail(f"{kind}.{key}", "missing required key")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        _fail("seed", "must be an unsigned 64-bit integer")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        _fail("workers", "must be a positive integer")
    expect = raw.get("expect", {})
    for metric, check in expect.items():
        if not isinstance(check, dict) or not check or set(check) - CHECK_KEYS:
            _fail(f"expect.{metric}", f"must be a table with keys among {sorted(CHECK_KEYS)}")
    if kind == "action" and "path" in params:
        p = (path.parent / params["path"]).resolve()
        if not p.is_file():
            _fail("action.path", f"file {p} does not exist")
    return Scenario(
        name=str(raw["name"]),
        kind=kind,
        seed=seed,
        params=params,
        expect=expect,
        path=path,
        output=raw.get("output"),
        workers=workers,
        description=str(raw.get("description", "")),
        raw=raw,
    )


# -- named Hamiltonians and flux fields ---------------------------------------


def _poly_terms(rows, n, where):
    terms = {}
    for k, t in enumerate(rows):
        exps = tuple(int(e) for e in t.get("exponents", ()))
        if len(exps) != 2 * n + 1:
            _fail(f"{where}.terms[{k}].exponents", f"need {2 * n + 1} exponents")
        terms[exps] = float(t.get("coeff", 1.0))
    return terms


def make_hamiltonian(name: str, params: dict, n: int, where: str = "hamiltonian"):
    p = dict(params or {})
    try:
        if name == "reeb_linear":
            return dyn.reeb_linear(p.get("k", 1.0), analytic=bool(p.get("analytic", True)))
        if name == "free_particle":
            return dyn.free_particle()
        if name == "linear_flux":
            return dyn.linear_flux(p.get("c", [1.0] * n))
        if name == "constant":
            return dyn.polynomial({(0,) * (2 * n + 1): float(p.get("value", 1.0))}, n)
        if name == "polynomial":
            return dyn.polynomial(_poly_terms(p.get("terms", []), n, where), n)
    except (TypeError, ValueError) as exc:
        _fail(where, str(exc))
    _fail(where, f"unknown Hamiltonian {name!r}")


def make_field(name: str, params: dict) -> tr.FluxField:
    p = dict(params or {})
    if name == "shear":
        return tr.FluxField(lambda Y: np.column_stack([np.zeros(len(Y)), Y[:, 0]]), 2, exact=False, name=name)
    if name == "shear_square":
        return tr.FluxField(lambda Y: np.column_stack([np.zeros(len(Y)), Y[:, 0] ** 2]), 2, exact=False, name=name)
    if name == "rotation":
        return tr.FluxField(lambda Y: 0.5 * np.column_stack([-Y[:, 1], Y[:, 0]]), 2, exact=False, name=name)
    if name == "product_gradient":
        return tr.FluxField(lambda Y: np.column_stack([Y[:, 1], Y[:, 0]]), 2, exact=True, name=name)
    if name == "constant":
        return tr.FluxField.constant(p.get("c", [1.0, 0.0]), name=name)
    _fail("holonomy.field", f"unknown flux field {name!r}")


# -- reports ------------------------------------------------------------------


@dataclass
class RunReport:
    scenario: str
    kind: str
    wall_time: float
    files: List[str]
    assertions: List[dict]
    version: str
    config_hash: str
    seed: int
    status: str = "ok"
    exit_code: int = 0
    error: str = ""
    metrics: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "kind": self.kind,
            "wall_time": self.wall_time,
            "files": self.files,
            "assertions": self.assertions,
            "passed": self.passed,
            "version": self.version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "status": self.status,
            "exit_code": self.exit_code,
            "error": self.error,
            "metrics": self.metrics,
            "details": self.details,
        }


def _check(metric, bound, metrics) -> dict:
    if metric not in metrics:
        raise ValidationError(f"expect.{metric}: unknown metric; available: {', '.join(sorted(metrics))}")
    v = float(metrics[metric])
    ok = math.isfinite(v)
    if "max" in bound:
        ok = ok and v <= bound["max"]
    if "min" in bound:
        ok = ok and v >= bound["min"]
    if "value" in bound:
        target = float(bound["value"])
        tol = float(bound.get("tol", 0.0)) + float(bound.get("rtol", 0.0)) * abs(target)
        ok = ok and abs(v - target) <= tol
    return {"metric": metric, "observed": v, "bound": dict(bound), "passed": bool(ok)}


# -- per-kind runners ---------------------------------------------------------
# Each returns (metrics, details, files written, diverged flag).


def _vec(x, where):
    try:
        out = np.atleast_1d(np.asarray(x, dtype=float))
    except (TypeError, ValueError):
        _fail(where, "must be a number or list of numbers")
    if out.ndim != 1 or not np.all(np.isfinite(out)):
        _fail(where, "must be a finite vector")
    return out


def _flow_trajectory(p, kind):
    y0, wp0 = _vec(p["y0"], f"{kind}.y0"), _vec(p["wp0"], f"{kind}.wp0")
    if y0.size != wp0.size:
        _fail(f"{kind}.wp0", "must have the same length as y0")
    H = make_hamiltonian(p["hamiltonian"], p.get("params"), y0.size, f"{kind}.hamiltonian")
    h, steps = float(p["h"]), int(p["steps"])
    p0 = dyn.PhasePoint(float(p.get("t0", 0.0)), y0, wp0)
    return H, dyn.integrate(H, p0, h, steps, meta=p["hamiltonian"])


def run_flow(sc: Scenario, out: Path):
    p = sc.params
    H, T = _flow_trajectory(p, "flow")
    eps = dyn.constraint_series(H, T)
    files = [io.write_trajectory(out / "trajectory.csv", T.t, T.y, T.wp, eps.values)]
    metrics = {
        "eps_drift": eps.drift,
        "eps_initial": float(eps.values[0]),
        "t_final": float(T.t[-1]),
        "nodes": len(T),
    }
    for i in range(T.n):
        metrics[f"y{i + 1}_final"] = float(T.y[-1, i])
        metrics[f"wp{i + 1}_final"] = float(T.wp[-1, i])
    if p["hamiltonian"] == "reeb_linear":
        k = np.broadcast_to(np.asarray(p.get("params", {}).get("k", 1.0), float), (T.n,))
        dt_ = T.t[-1] - T.t[0]
        wp_ex = T.wp[0] * np.exp(-np.sum(k) * dt_)
        y_ex = T.y[0] * np.exp(k * dt_)
        metrics["wp_rel_error"] = float(np.max(np.abs(T.wp[-1] - wp_ex) / np.abs(wp_ex)))
        metrics["y_rel_error"] = float(np.max(np.abs(T.y[-1] - y_ex) / np.abs(y_ex)))
    return metrics, {}, files, T.diverged


def _coefficients(rows, where):
    entries = {}
    for k, c in enumerate(rows):
        if set(c) - {"alpha", "value"}:
            _fail(f"{where}[{k}]", "coefficient entries take 'alpha' and 'value'")
        entries[tuple(int(a) for a in c["alpha"])] = float(c["value"])
    return entries


def run_kinetic(sc: Scenario, out: Path):
    p = sc.params
    extents = [tuple(e) for e in p["extents"]]
    m = int(p["m"])
    bc = p.get("bc", "periodic")
    D = kin.CoefficientSet(_coefficients(p["coefficients"], "kinetic.coefficients"), p.get("normalization", "standard"))
    init = dict(p["initial"])
    if init.pop("kind", "gaussian") != "gaussian" or set(init) - {"mean", "var"}:
        _fail("kinetic.initial", "supported initial condition: {kind='gaussian', mean=[..], var=[..]}")
    P0 = kin.gaussian_density(init["mean"], init["var"], extents, m, bc)
    t_end = float(p["t_end"])
    cfl = float(p.get("cfl", 0.25))
    limit = kin.cfl_limit(D, P0, cfl)
    dt = float(p.get("dt", limit))
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    dt = t_end / steps
    P = kin.evolve(D, P0, dt, steps, cfl)
    files = [io.write_density(out / "density_initial.csv", P0), io.write_density(out / "density.csv", P)]
    mean, varr = P.mean(), P.variance()
    metrics = {
        "mass_drift": abs(P.mass() - P0.mass()),
        "mass_drift_per_time": abs(P.mass() - P0.mass()) / t_end,
        "clip_mass": P.audit.get("clip_mass", 0.0),
        "dt": dt,
        "steps": steps,
        "min_value": float(P.values.min()),
    }
    for i in range(P.dim):
        metrics[f"mean{i + 1}"] = float(mean[i])
        metrics[f"mean{i + 1}_shift"] = float(mean[i] - P0.mean()[i])
        metrics[f"variance{i + 1}"] = float(varr[i])
    metrics["variance"] = metrics["variance1"]
    return metrics, {"normalization": D.normalization}, files, not np.all(np.isfinite(P.values))


def run_stationary(sc: Scenario, out: Path):
    p = sc.params
    extents = [tuple(e) for e in p["extents"]]
    norm = p.get("normalization", "standard")
    D1 = _vec(p["drift"], "stationary.drift")
    D2 = np.atleast_2d(np.asarray(p["diffusion"], float))
    P = kin.stationary_second_order(D1, D2, extents, int(p["m"]), norm, p.get("bc", "reflecting"), p.get("method"))
    entries = {}
    for i in range(D1.size):
        entries[(i,)] = D1[i]
        for j in range(i, D1.size):
            entries[(i, j)] = D2[i, j]
    res = kin.apply_generator(kin.CoefficientSet(entries, norm), P)
    metrics = {
        "mass": P.mass(),
        "residual_rel": float(np.max(np.abs(res)) / np.max(np.abs(P.values))),
        "min_value": float(P.values.min()),
    }
    if D1.size == 1:
        a, d = D1[0], kin.term_sign(2, norm) * D2[0, 0]
        y = P.axes()[0]
        lo, hi = extents[0]
        rate = a / d
        exact = np.exp(rate * (y - lo)) * (rate / np.expm1(rate * (hi - lo)) if rate != 0 else 1.0 / (hi - lo))
        metrics["closed_form_sup_error"] = float(np.max(np.abs(P.values - exact)))
    files = [io.write_density(out / "density.csv", P)]
    return metrics, {}, files, False


def _model(cfg):
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    try:
        if kind == "gaussian":
            return cm.gaussian(cfg.get("mu", 0.0), cfg.get("sigma2"), cfg.get("cov"))
        if kind == "poisson":
            return cm.poisson(cfg["lam"], cfg.get("jump", 1.0))
        if kind == "user-table":
            return cm.user_table(cfg["values"], cfg["probs"])
    except KeyError as exc:
        _fail(f"estimate.model.{exc.args[0]}", "missing required key")
    _fail("estimate.model.kind", f"unknown model {kind!r}")


def run_estimate(sc: Scenario, out: Path):
    p = sc.params
    model = _model(p["model"])
    t = np.linspace(0.0, float(p["t_end"]), int(p["points"]))
    E = cm.sample_paths(model, int(p["N"]), t, sc.seed, sc.workers)
    max_order = int(p.get("max_order", 2))
    T = cm.moments_to_cumulants(E, max_order)
    D = cm.estimate_D(T, p.get("normalization", "standard"))
    A = cm.ConnectionCoefficients(p["connection"]) if "connection" in p else None
    B = cm.estimate_B(E, A, max_order, p.get("normalization", "standard"), float(p.get("C", 0.0)))
    files = []
    if p.get("write_ensemble", False):
        files.append(io.write_ensemble(out / "ensemble.csv", E))
    cols = ["t"]
    for a in T.indices:
        tag = "".join(str(i + 1) for i in a)
        cols += [f"k{tag}", f"se{tag}"]
    rows = np.column_stack([T.t] + [x for j in range(len(T.indices)) for x in (T.values[:, j], T.se[:, j])])
    files.append(io.write_csv(out / "cumulants.csv", cols, rows))
    metrics = {}
    for a, v in D.entries.items():
        tag = "".join(str(i + 1) for i in a)
        metrics[f"D{tag}"] = v
        metrics[f"D{tag}_se"] = D.se.get(a, 0.0)
    for a in T.indices:
        tag = "".join(str(i + 1) for i in a)
        metrics[f"k{tag}_final"] = float(T[a][-1])
        metrics[f"k{tag}_final_se"] = float(T.stderr(a)[-1])
    for (a, i), v in B.entries.items():
        metrics[f"B{i + 1}_{''.join(str(j + 1) for j in a)}"] = v
    details = {
        "model": E.model,
        "normalization": D.normalization,
        "coefficients": {",".join(map(str, a)): {"value": v, "se": D.se.get(a, 0.0)} for a, v in D.entries.items()},
    }
    return metrics, details, files, False


def run_holonomy(sc: Scenario, out: Path):
    p = sc.params
    wp = make_field(p["field"], p.get("params"))
    segs = int(p.get("segments", 1000))
    pts = [_vec(p[k], f"holonomy.{k}") for k in ("A", "B", "B_prime", "C")]
    rep = tr.path_dependence_experiment(wp, *pts, segments_per_leg=segs)
    files = []
    for label, path in zip(("path_via_B.csv", "path_via_Bprime.csv"), rep["paths"]):
        r = tr.transport(wp, path)
        files.append(io.write_path(out / label, path.s, path.nodes, r.cumulative))
    metrics = {
        "deltaP_via_B": rep["deltaP_via_B"],
        "deltaP_via_Bprime": rep["deltaP_via_Bprime"],
        "difference": rep["difference"],
        "loop_holonomy": rep["loop_holonomy"],
        "consistency": abs(rep["difference"] - rep["loop_holonomy"]),
    }
    if p.get("stokes", True) and wp.n == 2:
        polygon = [pts[0], pts[1], pts[3], pts[2]]
        metrics["surface_integral"] = tr.surface_integral(wp, polygon)
        metrics["stokes_gap"] = abs(metrics["surface_integral"] - metrics["loop_holonomy"])
    return metrics, {}, files, False


def run_action(sc: Scenario, out: Path):
    p = sc.params
    if "path" in p:
        t, y, w, _ = io.read_trajectory((sc.path.parent / p["path"]).resolve())
        H = make_hamiltonian(p["hamiltonian"], p.get("params"), y.shape[1], "action.hamiltonian")
        base = var.DiscretePath(t, y, w)
    else:
        for key in ("y0", "wp0", "h", "steps"):
            if key not in p:
                _fail(f"action.{key}", "required unless 'path' is given")
        H, T = _flow_trajectory(p, "action")
        base = var.DiscretePath.from_trajectory(T)
    rep0 = var.first_variation(H, base)
    pert = dict(p.get("perturbation", {}))
    eta = float(pert.get("eta", 0.0))
    Z = base.vectors().copy()
    s = (Z[:, 0] - Z[0, 0]) / (Z[-1, 0] - Z[0, 0])
    n = base.n
    Z[:, 1 : n + 1] += eta * np.sin(np.pi * s)[:, None]
    Z[:, n + 1 :] += eta * np.sin(2 * np.pi * s)[:, None]
    init = base.with_vectors(Z)
    rep1 = var.first_variation(H, init)
    d = dict(p.get("descend", {}))
    res = var.descend(H, init, int(d.get("iters", 500)), float(d.get("rate", 1.0)), float(d.get("tol", 1e-5)), d.get("method", "newton"))
    final = var.first_variation(H, res.path)
    eps = dyn.constraint_series(H, dyn.Trajectory(res.path.t, res.path.y, res.path.wp, 0.0)).values
    files = [
        io.write_trajectory(out / "path_initial.csv", init.t, init.y, init.wp, dyn.constraint_series(H, dyn.Trajectory(init.t, init.y, init.wp, 0.0)).values),
        io.write_trajectory(out / "path_final.csv", res.path.t, res.path.y, res.path.wp, eps),
    ]
    metrics = {
        "S_base": rep0.S,
        "gradnorm_base": rep0.gradNorm,
        "S_initial": rep1.S,
        "gradnorm_initial": rep1.gradNorm,
        "S_final": final.S,
        "gradnorm_final": final.gradNorm,
        "accepted_steps": res.accepted,
        "iterations": res.iterations,
        "converged": float(res.converged),
        "distance_to_base": float(np.max(np.abs(res.path.vectors() - base.vectors()))),
    }
    details = {"history": res.history}
    return metrics, details, files, res.diverged


def run_invariants(sc: Scenario, out: Path):
    p = sc.params
    n = int(p["n"])
    H = make_hamiltonian(p["hamiltonian"], p.get("params"), n, "invariants.hamiltonian")
    rng = np.random.default_rng([sc.seed, int(p.get("seed_offset", 0))])
    count = int(p.get("samples", 100))
    lo, hi = p.get("box", [0.5, 2.0])
    Z = rng.uniform(lo, hi, size=(count, 2 * n + 1))
    pts = [dyn.PhasePoint.from_vector(z) for z in Z]
    cert = forms.certify_contact(H, pts, seed=sc.seed)
    # canonical brackets {y_i, wp_j} = delta_ij, {y_i, y_j} = {wp_i, wp_j} = 0
    worst = 0.0
    coords = [dyn.coordinate_function(k, n) for k in range(2 * n + 1)]
    for i in range(n):
        for j in range(n):
            b_yw = dyn.bracket_values(coords[1 + i], coords[n + 1 + j], Z)
            b_yy = dyn.bracket_values(coords[1 + i], coords[1 + j], Z)
            b_ww = dyn.bracket_values(coords[n + 1 + i], coords[n + 1 + j], Z)
            worst = max(worst, np.max(np.abs(b_yw - (i == j))), np.max(np.abs(b_yy)), np.max(np.abs(b_ww)))
    steps = int(p.get("flow_steps", 200))
    h = float(p.get("flow_h", 1e-3))
    T = dyn.integrate(H, pts[0], h, steps)
    eps = dyn.constraint_series(H, T)
    cons = dyn.conservation_check(dyn.constraint_function(H), H, T)
    files = [io.write_csv(out / "volume.csv", ["sample", "volume", "kernel_gain"], [[k, v, g] for k, (v, g) in enumerate(zip(cert.volume, cert.kernel_gain))])]
    metrics = {
        "min_abs_volume": cert.min_abs_volume,
        "min_kernel_gain": cert.min_kernel_gain,
        "certified": float(cert.passed),
        "failures": len(cert.failures),
        "max_bracket_error": float(worst),
        "eps_drift": eps.drift,
        "conservation_residual": cons,
    }
    return metrics, {"failures": cert.failures}, files, T.diverged


RUNNERS: Dict[str, Callable] = {
    "flow": run_flow,
    "kinetic": run_kinetic,
    "stationary": run_stationary,
    "estimate": run_estimate,
    "holonomy": run_holonomy,
    "action": run_action,
    "invariants": run_invariants,
}


# -- plotting stubs -----------------------------------------------------------

_PLOT_HEAD = '''"""Plot the data written by this run. Requires matplotlib."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent


def load(name):
    with open(here / name, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = list(zip(*rows[1:]))
    return {h: [float(v) for v in c] for h, c in zip(rows[0], cols)}

'''

_PLOT_BODY = {
    "flow": '''d = load("trajectory.csv")
fig, ax = plt.subplots(2, 1, sharex=True)
for k in d:
    if k[0] in "yw":
        ax[0].plot(d["t"], d[k], label=k)
ax[0].legend()
ax[1].plot(d["t"], d["eps"])
ax[1].set_ylabel("eps")
ax[1].set_xlabel("t")
''',
    "kinetic": '''for name in ("density_initial.csv", "density.csv"):
    d = load(name)
    if "y2" in d:
        plt.figure()
        plt.tricontourf(d["y1"], d["y2"], d["p"])
        plt.title(name)
    else:
        plt.plot(d["y1"], d["p"], label=name)
plt.legend()
''',
    "stationary": '''d = load("density.csv")
if "y2" in d:
    plt.tricontourf(d["y1"], d["y2"], d["p"])
else:
    plt.plot(d["y1"], d["p"])
''',
    "estimate": '''d = load("cumulants.csv")
for k in d:
    if k.startswith("k"):
        plt.errorbar(d["t"], d[k], yerr=d["se" + k[1:]], label=k)
plt.legend()
plt.xlabel("t")
''',
    "holonomy": '''for name in ("path_via_B.csv", "path_via_Bprime.csv"):
    d = load(name)
    plt.plot(d["s"], d["dP_cum"], label=name)
plt.legend()
plt.xlabel("s")
''',
    "action": '''for name in ("path_initial.csv", "path_final.csv"):
    d = load(name)
    plt.plot(d["t"], d["y1"], label=name + " y1")
    plt.plot(d["t"], d["wp1"], "--", label=name + " wp1")
plt.legend()
''',
    "invariants": '''d = load("volume.csv")
plt.plot(d["sample"], d["volume"], "o")
plt.ylabel("volume coefficient")
''',
}

_PLOT_TAIL = '''
if "--save" in sys.argv:
    plt.savefig(here / "plot.png", dpi=120)
else:
    plt.show()
'''


def _write_plot(kind: str, out: Path) -> Path:
    path = out / "plot.py"
    with open(path, "w", newline="\n") as fh:
        fh.write(_PLOT_HEAD + _PLOT_BODY[kind] + _PLOT_TAIL)
    return path


# -- driver -------------------------------------------------------------------


def _out_root(sc: Optional[Scenario], out: Optional[str]) -> Path:
    if out:
        return Path(out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if sc is not None and sc.output:
        return (sc.path.parent / sc.output).resolve()
    return Path("out")


def run(
    config_path,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    workers: Optional[int] = None,
    expect_kind: Optional[str] = None,
) -> RunReport:
    """Run one scenario and write its artifacts. Never raises for scenario errors;
    the outcome is carried by ``RunReport.exit_code``."""
    t0 = time.perf_counter()
    sc = None
    try:
        sc = load_scenario(config_path)
        if expect_kind is not None and sc.kind != expect_kind:
            _fail("kind", f"scenario is of kind {sc.kind!r}, not {expect_kind!r}")
        if seed is not None:
            if not 0 <= seed < 2**64:
                _fail("--seed", "must be an unsigned 64-bit integer")
            sc.seed = int(seed)
        if workers is not None:
            sc.workers = int(workers)
    except ValidationError as exc:
        name = Path(config_path).stem
        rep = RunReport(name, expect_kind or "", time.perf_counter() - t0, [], [], __version__, "", seed or 0,
                        "validation_error", EXIT_VALIDATION, str(exc))
        dest = _out_root(None, out) / name
        _finish(rep, dest)
        return rep

    dest = _out_root(sc, out) / sc.name
    dest.mkdir(parents=True, exist_ok=True)
    rep = RunReport(sc.name, sc.kind, 0.0, [], [], __version__, sc.config_hash, sc.seed)
    try:
        metrics, details, files, diverged = RUNNERS[sc.kind](sc, dest)
        files.append(_write_plot(sc.kind, dest))
        rep.files = sorted(Path(f).name for f in files)
        rep.metrics = metrics
        rep.details = details
        rep.assertions = [_check(k, v, metrics) for k, v in sorted(sc.expect.items())]
        if diverged:
            rep.status, rep.exit_code, rep.error = "diverged", EXIT_DIVERGENCE, "numerical divergence"
        elif not rep.passed:
            failed = [a["metric"] for a in rep.assertions if not a["passed"]]
            rep.status, rep.exit_code, rep.error = "assertion_failed", EXIT_ASSERTION, "failed: " + ", ".join(failed)
    except (ValidationError, CFLViolation, UnsupportedOrderError, ContractViolation) as exc:
        rep.status, rep.exit_code, rep.error = "validation_error", EXIT_VALIDATION, f"{type(exc).__name__}: {exc}"
    except (EvaluationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        rep.status, rep.exit_code, rep.error = "diverged", EXIT_DIVERGENCE, f"{type(exc).__name__}: {exc}"
    except (KeyError, TypeError, ValueError) as exc:
        rep.status, rep.exit_code, rep.error = "validation_error", EXIT_VALIDATION, f"{type(exc).__name__}: {exc}"
    rep.wall_time = time.perf_counter() - t0
    _finish(rep, dest)
    return rep


def _finish(rep: RunReport, dest: Path):
    try:
        dest.mkdir(parents=True, exist_ok=True)
        io.write_json(dest / "report.json", rep.to_dict())
    except OSError as exc:
        log.error("could not write report: %s", exc)


@dataclass
class ScenarioSummary:
    name: str
    kind: str
    path: Path
    label: str
    error: str = ""


def list_scenarios(directory=None) -> List[ScenarioSummary]:
    """Scenario files in ``directory`` sorted by name then path.

    Names shared by several files are labelled ``name (path)``.
    """
    d = Path(directory) if directory is not None else SCENARIO_DIR
    if not d.is_dir():
        raise ValidationError(f"{d}: not a readable directory")
    try:
        files = sorted(d.glob("*.toml"))
    except OSError as exc:
        raise ValidationError(f"{d}: {exc}") from exc
    out = []
    for f in files:
        try:
            sc = load_scenario(f)
            out.append(ScenarioSummary(sc.name, sc.kind, f, sc.name))
        except ValidationError as exc:
            out.append(ScenarioSummary(f.stem, "?", f, f.stem, str(exc)))
    counts: Dict[str, int] = {}
    for s in out:
        counts[s.name] = counts.get(s.name, 0) + 1
    for s in out:
        if counts[s.name] > 1:
            s.label = f"{s.name} ({s.path})"
    return sorted(out, key=lambda s: (s.name, str(s.path)))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochcontact", description="Run contact-geometry scenarios.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp_ = sub.add_parser(kind, help=f"run a {kind} scenario")
        sp_.add_argument("--config", required=True)
        sp_.add_argument("--seed", type=int)
        sp_.add_argument("--out")
        sp_.add_argument("--workers", type=int)
        sp_.add_argument("--quiet", action="store_true")
    ls = sub.add_parser("list", help="list scenarios in a directory")
    ls.add_argument("dir", nargs="?")
    ls.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    if args.command == "list":
        try:
            items = list_scenarios(args.dir)
        except ValidationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        for s in items:
            print(f"{s.label}\t{s.kind}\t{s.path}" + (f"\t{s.error}" if s.error else ""))
        return EXIT_OK
    rep = run(args.config, args.seed, args.out, args.workers, expect_kind=args.command)
    if rep.exit_code != EXIT_OK:
        print(f"error: {rep.error}", file=sys.stderr)
    if not args.quiet:
        for a in rep.assertions:
            print(f"{'PASS' if a['passed'] else 'FAIL'} {a['metric']} = {a['observed']!r} {a['bound']}")
        print(f"{rep.scenario}: {rep.status} in {rep.wall_time:.2f}s, files: {', '.join(rep.files)}")
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
