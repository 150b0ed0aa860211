"""Command-line front end that turns scenarios into plot-ready CSV/JSON tables.

Each subcommand mirrors one scenario command; ``run`` executes a JSON file
of scenarios. Exit status is 0 on success, 2 for invalid parameters and 3
for numerical failures (non-finite states, missed horizons).
"""
import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import json
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import bce, deep, hinge, ode, phase, simulator, starvation
from .errors import ConvergenceError, DomainError, HorizonError, NonFiniteStateError
from .specfn import sigmoid

CONFIG_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class ValidationError(Exception):
    """A scenario parameter is missing, unknown or out of range."""


# -- parameter schemas ------------------------------------------------------


@dataclass(frozen=True)
class Param:
    kind: type
    default: object = None
    required: bool = False
    choices: tuple = None
    many: bool = False
    check: object = None
    help: str = ""


def _positive(v):
    return v > 0


def _unit_open(v):
    return 0 < v < 1


def _half_open(v):
    return 0 < v < 0.5


TRAJECTORY_KINDS = ("degenerate", "two-class", "hyperbolic", "top-left", "multi-neuron", "orthogonal",
                    "relaxed-h2")

SCHEMAS = {
    "trajectory": {
        "loss": Param(str, "bce", choices=("bce", "hinge")),
        "kind": Param(str, "degenerate", choices=TRAJECTORY_KINDS),
        "u0": Param(float, 0.5, help="initial logit (negative for top-left)"),
        "u0s": Param(float, (0.2, 0.3), many=True, check=_positive, help="per-neuron logits"),
        "y0": Param(float, None),
        "z0": Param(float, None),
        "alpha0": Param(float, 0.5, check=_positive),
        "beta0": Param(float, 0.5),
        "m": Param(int, 1, check=_positive, help="orthogonal points per class"),
        "norm": Param(float, 1.0, check=_positive),
        "p": Param(float, 1.0, check=lambda v: 0 < v <= 1),
        "label": Param(int, 1, choices=(1, 2)),
        "t_end": Param(float, 10.0, check=_positive),
        "dt": Param(float, 0.1, check=_positive, help="output sampling interval"),
        "step": Param(float, 1e-3, check=_positive, help="RK4 step where needed"),
        "bound": Param(bool, False, help="add the logarithmic upper bound column (degenerate)"),
        "refine": Param(bool, False, help="step-halving error estimate for RK4 kinds"),
        "norm2": Param(float, None, check=_positive, help="class-2 input norm (two-class)"),
        "v0": Param(float, None, help="class-2 initial logit, negative (two-class)"),
        "delta": Param(float, 1e-4, check=_half_open, help="confidence target (two-class)"),
    },
    "phase-scan": {
        "norm": Param(float, 0.7, check=_positive),
        "grid": Param(int, 41, check=lambda v: v >= 2),
        "range": Param(float, 2.0, check=_positive),
        "t_end": Param(float, phase.DEFAULT_FATE_HORIZON, check=_positive),
        "step": Param(float, phase.DEFAULT_FATE_STEP, check=_positive),
        "class2": Param(bool, False),
        "y0": Param(float, None, help="verify a single initialization instead of a grid"),
        "z0": Param(float, None),
    },
    "hinge-compare": {
        "u0": Param(float, 0.1, check=_positive),
        "norm": Param(float, 1.0, check=_positive),
        "p": Param(float, 0.5, check=lambda v: 0 < v <= 1),
        "deltas": Param(float, (0.3, 0.1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6), many=True, check=_half_open),
        "clipped": Param(bool, False),
        "margin_y0": Param(float, None, help="optionally report the margin time for (y0, z0)"),
        "margin_z0": Param(float, None),
    },
    "starvation": {
        "table1": Param(bool, False),
        "fair": Param(bool, False, help="bounds for alpha0 = beta0 = 0.1 with z* = alpha*"),
        "lambdas": Param(float, (0.5, 0.2, 0.1, 0.01), many=True, check=lambda v: 0 < v <= 1),
        "deltas": Param(float, (1e-2, 1e-4), many=True, check=_half_open),
        "alpha0": Param(float, 0.1),
        "beta0": Param(float, 0.1),
        "z0": Param(float, 0.1, check=_positive),
        "step": Param(float, starvation.STARVATION_STEP, check=_positive),
        "t_end": Param(float, None, check=_positive,
                       help="emit the (alpha, beta, z) trajectory of the first lambda/delta pair"),
        "dt": Param(float, 1.0, check=_positive),
    },
    "deep-logit": {
        "depths": Param(int, (2, 4, 8), many=True, check=lambda v: v >= 2),
        "norm": Param(float, 1.0, check=_positive),
        "u0": Param(float, None, check=_positive),
        "z0": Param(float, None, check=_positive, help="aligned layer scalar; sets u0 = norm z0^N"),
        "t_end": Param(float, 10.0, check=_positive),
        "dt": Param(float, 0.1, check=_positive),
        "step": Param(float, deep.DEEP_STEP, check=_positive),
    },
    "simulate": {
        "experiment": Param(str, "history", choices=("history", "modes", "starvation", "hinge-batch")),
        "loss": Param(str, "bce", choices=("bce", "hinge")),
        "norm": Param(float, 1.0, check=_positive),
        "u0": Param(float, 0.5, check=_positive),
        "p": Param(float, 0.5, check=_unit_open),
        "lr": Param(float, 1e-3, check=_positive),
        "steps": Param(int, 10000, check=lambda v: v >= 0),
        "seed": Param(int, 0),
        "every": Param(int, 100, check=_positive, help="record every n-th step"),
        "runs": Param(int, 20, check=_positive),
        "hidden": Param(int, 2, check=lambda v: v >= 2 and v % 2 == 0),
        "classes": Param(int, 2, check=lambda v: v >= 2),
        "dim": Param(int, 8, check=lambda v: v >= 2),
        "n_per_class": Param(int, 5, check=_positive),
        "lam": Param(float, 0.1, check=lambda v: 0 < v <= 1),
        "delta": Param(float, 1e-4, check=_half_open),
        "max_steps": Param(int, 1_000_000, check=_positive),
        "dataset_out": Param(str, None, help="write the generated dataset as JSON"),
        "z0": Param(float, 0.3, check=_positive, help="output weight (hinge-batch)"),
        "t_end": Param(float, 1.0, check=_positive, help="training time (hinge-batch)"),
        "dt": Param(float, 0.05, check=_positive),
    },
}


def validate(command, params):
    """Fill defaults, coerce types and range-check; raise ValidationError naming the parameter."""
    if command not in SCHEMAS:
        raise ValidationError(f"unknown command {command!r}")
    schema = SCHEMAS[command]
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise ValidationError(f"unknown parameter {unknown[0]!r} for {command}")
    out = {}
    for name, spec in schema.items():
        if name not in params or params[name] is None:
            if spec.required:
                raise ValidationError(f"missing required parameter {name!r}")
            out[name] = spec.default
            continue
        raw = params[name]
        try:
            if spec.many:
                if isinstance(raw, (str, bytes)) or not hasattr(raw, "__iter__"):
                    raw = [raw]
                value = tuple(_coerce(spec.kind, v) for v in raw)
                items = value
            else:
                value = _coerce(spec.kind, raw)
                items = (value,)
        except (TypeError, ValueError):
            raise ValidationError(f"parameter {name!r} has invalid value {raw!r}") from None
        for v in items:
            if spec.choices and v not in spec.choices:
                raise ValidationError(f"parameter {name!r} must be one of {spec.choices}, got {v!r}")
            if spec.check and not spec.check(v):
                raise ValidationError(f"parameter {name!r} is out of range: {v!r}")
        out[name] = value
    _cross_check(command, out)
    return out


def _cross_check(command, args):
    """Requirements that depend on more than one parameter."""
    if command == "trajectory" and args["kind"] == "hyperbolic" and args["loss"] == "bce":
        for name in ("y0", "z0"):
            if args[name] is None:
                raise ValidationError(f"missing required parameter {name!r} for kind 'hyperbolic'")
    if command == "trajectory" and args["kind"] == "two-class":
        if args["v0"] is not None and args["v0"] >= 0:
            raise ValidationError("parameter 'v0' must be negative")
        if not 0 < args["p"] < 1:
            raise ValidationError("parameter 'p' must lie strictly inside (0, 1) for two classes")
    if command == "phase-scan" and (args["y0"] is None) != (args["z0"] is None):
        raise ValidationError(f"missing required parameter {'z0' if args['z0'] is None else 'y0'!r}")
    if command == "hinge-compare" and (args["margin_y0"] is None) != (args["margin_z0"] is None):
        missing = "margin_z0" if args["margin_z0"] is None else "margin_y0"
        raise ValidationError(f"missing required parameter {missing!r}")
    if command == "deep-logit" and args["u0"] is not None and args["z0"] is not None:
        raise ValidationError("parameters 'u0' and 'z0' are mutually exclusive")


def _coerce(kind, value):
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ValueError(value)
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(value)
        return int(value)
    if kind is float:
        if isinstance(value, bool):
            raise ValueError(value)
        v = float(value)
        if not math.isfinite(v):
            raise ValueError(value)
        return v
    if not isinstance(value, str):
        raise ValueError(value)
    return value


# -- commands ---------------------------------------------------------------


@dataclass
class Table:
    columns: list
    rows: list
    extra: dict = field(default_factory=dict)


def _sample_times(t_end, dt):
    return ode.time_grid(t_end, dt)


def _subsample(traj, dt):
    """Indices of the trajectory samples nearest to multiples of ``dt``."""
    targets = ode.time_grid(float(traj.times[-1]), dt)
    idx = np.searchsorted(traj.times, targets - 1e-12)
    idx = np.minimum(idx, len(traj.times) - 1)
    return sorted(set(int(i) for i in idx))


def cmd_trajectory(a):
    kind, loss, norm, p = a["kind"], a["loss"], a["norm"], a["p"]
    if loss == "hinge":
        if a["y0"] is not None and a["z0"] is not None:
            y0, z0 = a["y0"], a["z0"]
        else:
            y0, z0 = math.sqrt(a["u0"] * norm), math.sqrt(a["u0"] / norm)
        rows = []
        for t in _sample_times(a["t_end"], a["dt"]):
            u = hinge.solve_hinge(y0, z0, norm, p, t)
            rows.append([t, u, sigmoid(u)])
        return Table(["t", "u", "confidence"], rows,
                     {"t_margin": hinge.time_to_margin(y0, z0, norm, p)})

    if kind == "degenerate":
        u0 = a["u0"]
        if a["label"] == 2:
            u0 = -abs(u0)
        rate = norm * p
        pts = bce.degenerate_logits(u0, rate, _sample_times(a["t_end"], a["dt"]), a["label"])
        if not a["bound"]:
            return Table(["t", "u", "confidence"], [[q.t, q.u, q.p_correct] for q in pts])
        sign = 1.0 if a["label"] == 1 else -1.0
        return Table(["t", "u", "confidence", "bound"],
                     [[q.t, q.u, q.p_correct, sign * bce.convergence_bound(abs(u0), rate, q.t)] for q in pts])
    if kind == "two-class":
        return _two_class(a)
    if kind == "hyperbolic":
        y0, z0 = a["y0"], a["z0"]
        if a["label"] == 2:
            y0, z0 = phase.mirror_for_class2(y0, z0)
        state = bce.ScalarState.from_yz(y0, z0, norm)
        traj = bce.hyperbolic_trajectory(state, norm, p, a["t_end"], a["step"])
        end = bce.solve_hyperbolic(state, norm, p, a["t_end"], a["step"])
        idx = _subsample(traj, a["dt"])
        return Table(["t", "y", "z", "u", "confidence"],
                     [[traj.times[i], *traj.states[i]] for i in idx],
                     {"c": state.c, "branch": state.branch.value, "y_end": end.y, "z_end": end.z})
    if kind == "top-left":
        u0 = -abs(a["u0"])
        rate = norm * p
        traj = _rk4(bce.logit_system(rate, -1.0), [u0], a)
        idx = _subsample(traj, a["dt"])
        extra = {"u_end": bce.solve_top_left(u0, rate, a["t_end"], a["step"])}
        extra.update(_refine_summary(traj))
        return Table(["t", "u", "confidence"],
                     [[traj.times[i], traj.states[i, 0], sigmoid(traj.states[i, 0])] for i in idx], extra)
    extra = {}
    if kind == "multi-neuron":
        traj = bce.solve_multi_neuron(a["u0s"], norm * p, a["t_end"], a["step"])
    elif kind == "orthogonal":
        m = a["m"]
        rate = bce.orthogonal_class_rate(m, norm) / 2.0
        u0 = a["u0"]
        y0 = math.sqrt(u0 * norm / math.sqrt(m))
        z0 = math.sqrt(m) * y0 / norm
        traj = _rk4(bce.orthogonal_batch_system(m, norm), [y0] * m + [z0], a)
        extra = _refine_summary(traj)
        u = traj.column("z") * traj.column("y1")
        closed = [bce.solve_degenerate(u0, rate, t) for t in traj.times]
        traj = traj.with_columns(("u", "u_closed_form"), (u, closed))
    else:
        traj = bce.solve_relaxed_h2(a["alpha0"], a["beta0"], a["u0"], a["t_end"], a["step"])
    idx = _subsample(traj, a["dt"])
    return Table(["t", *traj.columns], [[traj.times[i], *traj.states[i]] for i in idx], extra)


def _rk4(system, initial, a):
    if a["refine"]:
        return ode.richardson_refine(system, initial, a["t_end"], a["step"])
    return ode.integrate(system, initial, a["t_end"], a["step"])


def _refine_summary(traj):
    if "discrepancy" in traj.metadata:
        return {"step_halving_discrepancy": traj.metadata["discrepancy"]}
    return {}


def _two_class(a):
    """Both degenerate class curves and the time ratio to reach 1 - delta."""
    norm1, p = a["norm"], a["p"]
    norm2 = a["norm2"] if a["norm2"] is not None else norm1
    u0 = a["u0"]
    v0 = a["v0"] if a["v0"] is not None else -u0
    times = _sample_times(a["t_end"], a["dt"])
    c1 = bce.degenerate_logits(u0, norm1 * p, times, 1)
    c2 = bce.degenerate_logits(v0, norm2 * (1 - p), times, 2)
    extra = {}
    if u0 <= -v0:
        exact, approx = bce.convergence_time_ratio(
            bce.ClassSpec(norm1, p, 1), bce.ClassSpec(norm2, 1 - p, 2), u0, -v0, a["delta"])
        extra = {"time_ratio_exact": exact, "time_ratio_approx": approx}
    return Table(["t", "u", "v", "confidence_class1", "confidence_class2"],
                 [[q1.t, q1.u, q2.u, q1.p_correct, q2.p_correct] for q1, q2 in zip(c1, c2)], extra)


def cmd_phase_scan(a):
    if a["y0"] is not None:
        y0, z0 = a["y0"], a["z0"]
        cz = -z0 if a["class2"] else z0
        check = phase.verify_fate(y0, cz, a["norm"], a["t_end"], a["step"])
        return Table(["y0", "z0", "norm", "region", "observed", "agree"],
                     [[y0, z0, a["norm"], check.region.kind.value, check.observed.value, check.agree]])
    rows = phase.scan_grid(a["norm"], a["grid"], a["range"], a["t_end"], a["step"], a["class2"])
    table = [[r.y0, r.z0, r.norm, r.region.kind.value, r.observed.value, r.agree] for r in rows]
    outside = [r for r in rows if not phase.in_asymptote_band(r.y0, -r.z0 if a["class2"] else r.z0, r.norm)]
    agree = sum(r.agree for r in outside)
    return Table(["y0", "z0", "norm", "region", "observed", "agree"], table,
                 {"agreement_outside_band": agree / len(outside)})


def cmd_hinge_compare(a):
    rows = hinge.compare_losses(a["u0"], a["norm"], a["p"], a["deltas"], a["clipped"])
    extra = {}
    if a["margin_y0"] is not None and a["margin_z0"] is not None:
        extra["t_margin"] = hinge.time_to_margin(a["margin_y0"], a["margin_z0"], a["norm"], a["p"])
    return Table(["delta", "t_bce", "t_hinge"], [[r.delta, r.t_bce, r.t_hinge] for r in rows], extra)


def cmd_starvation(a):
    if a["t_end"] is not None:
        cfg = starvation.StarvationConfig(a["lambdas"][0], a["deltas"][0], a["alpha0"], a["beta0"], a["z0"])
        traj = starvation.integrate_starvation(cfg, a["t_end"], a["step"])
        idx = _subsample(traj, a["dt"])
        return Table(["t", *traj.columns], [[traj.times[i], *traj.states[i]] for i in idx])
    if a["table1"]:
        return Table(["lambda", "delta", "bound"], [[lam, d, b] for d, lam, b in starvation.table1()])
    if a["fair"]:
        rows = [[lam, d, starvation.starvation_bound(lam, d), starvation.fair_initialization_bound(lam, d)]
                for lam in a["lambdas"] for d in a["deltas"]]
        return Table(["lambda", "delta", "bound", "bound_fair"], rows)
    rows = starvation.bound_surface(a["lambdas"], a["deltas"], a["alpha0"], a["beta0"], a["z0"], a["step"])
    return Table(["lambda", "delta", "bound", "bound_relaxed", "conf_x2_at_tstar"],
                 [[r.lam, r.delta, r.bound, r.bound_relaxed, r.conf_x2_at_tstar] for r in rows])


def cmd_deep_logit(a):
    rows = []
    for n in a["depths"]:
        if a["z0"] is not None:
            u0 = deep.aligned_initial_logit(a["z0"], a["norm"], n)
        elif a["u0"] is not None:
            u0 = a["u0"]
        else:
            u0 = 0.1
        traj = deep.solve_deep_logit(deep.DeepConfig(n, a["norm"], u0), a["t_end"], a["step"])
        for i in _subsample(traj, a["dt"]):
            rows.append([traj.times[i], n, *traj.states[i]])
    return Table(["t", "depth", "u", "confidence"], rows)


def cmd_simulate(a):
    exp = a["experiment"]
    if exp == "history":
        params, data = simulator.degenerate_pair_network(a["norm"], a["u0"])
        cfg = simulator.TrainConfig(a["lr"], a["steps"], a["seed"], a["p"], a["loss"])
        result = simulator.train(params, data, cfg)
        if a["dataset_out"]:
            simulator.save_dataset(data, a["dataset_out"])
        rows = []
        for step in range(0, len(result.logits), a["every"]):
            for k, u in enumerate(result.logits[step]):
                rows.append([step, k + 1, u, sigmoid(u) if k == 0 else sigmoid(-u)])
        return Table(["step", "class", "logit", "confidence"], rows)
    if exp == "modes":
        rows = []
        for run in range(a["runs"]):
            seed = a["seed"] + run
            if a["classes"] == 2:
                data = simulator.make_dataset(seed, a["dim"], a["n_per_class"])
            else:
                data = simulator.make_multiclass_dataset(seed, a["dim"], a["n_per_class"], a["classes"])
            params = simulator.init_params(data, a["hidden"] // 2 if a["classes"] == 2 else 1, seed)
            loss = a["loss"] if a["classes"] == 2 else "bce"
            cfg = simulator.TrainConfig(a["lr"], a["steps"], seed, "uniform", loss)
            res = simulator.train(params, data, cfg, record_params=True)
            report = simulator.check_mode_independence(res.history, data)
            rows.append([seed, report.steps_checked, report.violations])
            if a["dataset_out"] and run == 0:
                simulator.save_dataset(data, a["dataset_out"])
        return Table(["seed", "steps_checked", "violations"], rows)
    if exp == "hinge-batch":
        data = simulator.make_dataset(a["seed"], a["dim"], a["n_per_class"])
        points = data.class1
        w0 = simulator.init_params(data, 1, a["seed"]).w[0] * 0.1
        if a["dataset_out"]:
            simulator.save_dataset(data, a["dataset_out"])
        rows = []
        for t in _sample_times(a["t_end"], a["dt"]):
            for i, q in enumerate([*points, *data.class2]):
                rows.append([t, i, 1 if i < len(points) else 2,
                             hinge.hinge_batch_classify(points, w0, a["z0"], t, q)])
        return Table(["t", "point", "class", "output"], rows)
    out = simulator.starvation_experiment(a["lam"], a["delta"], a["seed"], a["lr"], a["max_steps"])
    return Table(["lambda", "delta", "conf_x1", "conf_x2", "bound", "steps"],
                 [[a["lam"], a["delta"], out.conf_x1, out.conf_x2,
                   starvation.starvation_bound(a["lam"], a["delta"]), out.steps]])


COMMANDS = {
    "trajectory": cmd_trajectory,
    "phase-scan": cmd_phase_scan,
    "hinge-compare": cmd_hinge_compare,
    "starvation": cmd_starvation,
    "deep-logit": cmd_deep_logit,
    "simulate": cmd_simulate,
}


# -- output -------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def render(table, fmt):
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()
    doc = {
        "columns": table.columns,
        "rows": [[_json_cell(v) for v in row] for row in table.rows],
        "summary": {k: _json_cell(v) for k, v in table.extra.items()},
    }
    return json.dumps(doc, indent=1) + "\n"


# -- scenarios ------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    command: str
    parameters: dict
    output_path: str = None
    format: str = "csv"


_SCENARIO_KEYS = {"name", "command", "parameters", "output", "format"}


def make_scenario(raw, where="scenario"):
    if not isinstance(raw, dict):
        raise ValidationError(f"{where}: expected an object")
    unknown = sorted(set(raw) - _SCENARIO_KEYS)
    if unknown:
        raise ValidationError(f"{where}: unknown key {unknown[0]!r}")
    for key in ("name", "command"):
        if key not in raw:
            raise ValidationError(f"{where}: missing required key {key!r}")
    fmt = raw.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ValidationError(f"{where}: format must be 'csv' or 'json'")
    try:
        params = validate(raw["command"], raw.get("parameters", {}))
    except ValidationError as exc:
        raise ValidationError(f"{where} ({raw['name']}): {exc}") from None
    return Scenario(raw["name"], raw["command"], params, raw.get("output"), fmt)


def load_config(path):
    """Parse and validate every scenario in a JSON config; fail on the first problem."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be an object")
    unknown = sorted(set(doc) - {"version", "scenarios"})
    if unknown:
        raise ValidationError(f"{path}: unknown key {unknown[0]!r}")
    if doc.get("version") != CONFIG_VERSION:
        raise ValidationError(f"{path}: unsupported version {doc.get('version')!r}")
    scenarios = doc.get("scenarios", [])
    if not isinstance(scenarios, list):
        raise ValidationError(f"{path}: 'scenarios' must be a list")
    return [make_scenario(raw, f"{path}: scenarios[{i}]") for i, raw in enumerate(scenarios)]


def run_scenario(scenario, out_dir=None, stream=None):
    """Execute one validated scenario and write its table.

    Returns ``(rows_written, seconds)``. Numerical failures propagate.
    """
    start = time.perf_counter()
    params = dict(scenario.parameters)
    side = params.get("dataset_out")
    if side and out_dir is not None and not Path(side).is_absolute():
        params["dataset_out"] = str(Path(out_dir) / side)
    if side:
        Path(params["dataset_out"]).parent.mkdir(parents=True, exist_ok=True)
    table = COMMANDS[scenario.command](params)
    text = render(table, scenario.format)
    if scenario.output_path:
        path = Path(scenario.output_path)
        if out_dir is not None and not path.is_absolute():
            path = Path(out_dir) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        (stream or sys.stdout).write(text)
    return len(table.rows), time.perf_counter() - start


def thread_cap():
    try:
        return max(1, int(os.environ.get("NEURODYN_THREADS", "1")))
    except ValueError:
        return 1


NUMERICAL_ERRORS = (NonFiniteStateError, HorizonError, ConvergenceError)


def _execute(scenario, out_dir):
    try:
        rows, secs = run_scenario(scenario, out_dir)
    except ValidationError as exc:
        return EXIT_INVALID, f"{scenario.name}: invalid parameters: {exc}"
    except NUMERICAL_ERRORS as exc:
        return EXIT_NUMERICAL, f"{scenario.name}: numerical failure: {exc}"
    except DomainError as exc:
        return EXIT_INVALID, f"{scenario.name}: invalid parameters: {exc}"
    return EXIT_OK, f"{scenario.name}: {rows} rows -> {scenario.output_path or 'stdout'} ({secs:.2f} s)"


# -- argparse ---------------------------------------------------------------------


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="neurodyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        p = sub.add_parser(command)
        for name, spec in schema.items():
            if spec.kind is bool:
                p.add_argument(_flag(name), dest=name, action="store_true", default=None, help=spec.help)
            else:
                p.add_argument(_flag(name), dest=name, type=spec.kind, default=None,
                               nargs="+" if spec.many else None, choices=spec.choices, help=spec.help)
        p.add_argument("-o", "--output", dest="_output", default=None)
        p.add_argument("--format", dest="_format", choices=("csv", "json"), default="csv")
    p = sub.add_parser("run", help="execute every scenario in a JSON config file")
    p.add_argument("config")
    p.add_argument("--out-dir", default=None, help="directory for relative output paths")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            scenarios = load_config(args.config)
        except (ValidationError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        out_dir = args.out_dir or str(Path(args.config).resolve().parent)
        with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
            results = list(pool.map(lambda s: _execute(s, out_dir), scenarios))
        status = EXIT_OK
        for code, message in results:
            print(message, file=sys.stderr if code else sys.stdout)
            status = max(status, code)
        return status

    raw = {k: v for k, v in vars(args).items() if k in SCHEMAS[args.command] and v is not None}
    try:
        scenario = make_scenario({
            "name": args.command, "command": args.command, "parameters": raw,
            "output": args._output, "format": args._format,
        })
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    code, message = _execute(scenario, None)
    print(message, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
