"""Batch experiments: configuration, runs with file output, refinement studies."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import conformal2d, deturck, diagnostics, hflow, initial
from .errors import (
    Blowup,
    ClosenessCeilingExceeded,
    ConfigError,
    DegenerateJacobian,
    MarkerEscaped,
    NonPositiveDefinite,
)
from .geometry import rhs_ricci_deturck
from .grid import Boundary, make_grid
from .snapshot import read_snapshot, write_snapshot

CSV_COLUMNS = ["t", "eps", "sup_dev", "max_phi", "integral_I", "grad1", "grad2", "sup_drift", "rf_residual"]
CONFORMAL_COLUMNS = ["t", "sup_u", "monotone_pos", "monotone_neg"]
MONOTONE_RTOL = 1e-8
CONFORMAL_MAX_TOL = 1e-12

_KEYS = {
    "name", "dim", "shape", "spacing", "boundary", "flow", "initial", "t_end", "safety",
    "record_every", "m", "p", "delta", "deturck", "residual_every", "fit_window", "eps_ceiling",
    "snapshot_times", "cutoff_radius", "stop_below",
}
_INITIAL_KEYS = {"gen", "eps0", "amplitude", "seed", "radius", "snapshot"}


@dataclass
class RunConfig:
    dim: int
    shape: tuple
    spacing: float
    boundary: str
    initial: dict
    t_end: float
    flow: str = "hflow"
    safety: float = 0.25
    record_every: int = 1
    m: int = 6
    p: float = 1
    delta: float = 0.0
    deturck: bool = False
    residual_every: int = 1
    fit_window: tuple | None = None
    eps_ceiling: float = 0.5
    snapshot_times: list = field(default_factory=list)
    cutoff_radius: float | None = None
    stop_below: float | None = None
    name: str | None = None

    def grid(self):
        return make_grid(self.dim, self.shape, self.spacing, self.boundary)

    def refined(self, factor):
        """Same run on a grid ``factor`` times finer."""
        g = self.grid().refined(factor)
        return RunConfig(**{**asdict(self), "shape": g.shape, "spacing": g.spacing})


def _number(d, key, kind=float, lo=None, hi=None, lo_open=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    v = kind(v)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(key, f"must be <= {hi}, got {v}")
    return v


def parse_config(text) -> RunConfig:
    """Parse and validate a flat JSON run description; errors name the offending key."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", str(exc)) from None
    if not isinstance(raw, dict):
        raise ConfigError("<json>", "top level must be an object")
    for k in raw:
        if k not in _KEYS:
            raise ConfigError(k, "unknown key")
    for k in ("dim", "shape", "spacing", "initial", "t_end"):
        if k not in raw:
            raise ConfigError(k, "required key missing")
    cfg = dict(raw)
    cfg["dim"] = _number(raw, "dim", int, 2, 4)
    shape = raw["shape"]
    if isinstance(shape, int):
        shape = [shape] * cfg["dim"]
    if not isinstance(shape, list) or len(shape) != cfg["dim"] or not all(isinstance(s, int) for s in shape):
        raise ConfigError("shape", f"expected {cfg['dim']} integers, got {shape!r}")
    if min(shape) < 8:
        raise ConfigError("shape", "every axis needs at least 8 nodes")
    cfg["shape"] = tuple(shape)
    sp = raw["spacing"]
    if isinstance(sp, list):
        if len(sp) != cfg["dim"] or not all(isinstance(h, (int, float)) and h > 0 for h in sp):
            raise ConfigError("spacing", f"expected {cfg['dim']} positive numbers, got {sp!r}")
        cfg["spacing"] = tuple(float(h) for h in sp)
    else:
        cfg["spacing"] = _number(raw, "spacing", float, 0.0, lo_open=True)
    try:
        cfg["boundary"] = Boundary.parse(raw.get("boundary", "periodic")).value
    except ValueError as exc:
        raise ConfigError("boundary", str(exc)) from None
    flow = raw.get("flow", "hflow")
    if flow not in ("hflow", "conformal2d"):
        raise ConfigError("flow", f"expected 'hflow' or 'conformal2d', got {flow!r}")
    if flow == "conformal2d" and cfg["dim"] != 2:
        raise ConfigError("dim", "conformal2d needs dim 2")
    cfg["t_end"] = _number(raw, "t_end", float, 0.0, lo_open=True)
    for key, kind, lo, hi, lo_open in (
        ("safety", float, 0.0, 1.0, True),
        ("record_every", int, 1, None, False),
        ("m", int, 1, None, False),
        ("p", float, 1.0, None, False),
        ("delta", float, 0.0, None, False),
        ("residual_every", int, 1, None, False),
        ("eps_ceiling", float, 0.0, 1.0, True),
        ("cutoff_radius", float, 2.0, None, False),
        ("stop_below", float, 0.0, None, True),
    ):
        if key in raw and raw[key] is not None:
            cfg[key] = _number(raw, key, kind, lo, hi, lo_open)
    if "deturck" in raw and not isinstance(raw["deturck"], bool):
        raise ConfigError("deturck", "expected true or false")
    if raw.get("fit_window") is not None:
        w = raw["fit_window"]
        if not (isinstance(w, list) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w) and w[1] > w[0] >= 0):
            raise ConfigError("fit_window", f"expected [t_lo, t_hi] with t_hi > t_lo >= 0, got {w!r}")
        cfg["fit_window"] = (float(w[0]), float(w[1]))
    if "snapshot_times" in raw:
        st = raw["snapshot_times"]
        if not isinstance(st, list) or not all(isinstance(x, (int, float)) and x >= 0 for x in st):
            raise ConfigError("snapshot_times", "expected a list of non-negative times")
        cfg["snapshot_times"] = sorted(float(x) for x in st)
    cfg["initial"] = _parse_initial(raw["initial"], flow, cfg.get("eps_ceiling", 0.5))
    cfg["flow"] = flow
    return RunConfig(**cfg)


def _parse_initial(spec, flow, ceiling):
    if not isinstance(spec, dict):
        raise ConfigError("initial", "expected an object")
    for k in spec:
        if k not in _INITIAL_KEYS:
            raise ConfigError(f"initial.{k}", "unknown key")
    out = dict(spec)
    if "snapshot" in spec:
        if not isinstance(spec["snapshot"], str):
            raise ConfigError("initial.snapshot", "expected a file path")
        return out
    gens = initial.METRIC_GENERATORS if flow == "hflow" else initial.CONFORMAL_GENERATORS
    if spec.get("gen") not in gens:
        raise ConfigError("initial.gen", f"unknown generator {spec.get('gen')!r}; choose from {gens}")
    out["seed"] = _number({"initial.seed": spec.get("seed", 0)}, "initial.seed", int, 0)
    if flow == "hflow":
        if "eps0" not in spec:
            raise ConfigError("initial.eps0", "required key missing")
        out["eps0"] = _number({"initial.eps0": spec["eps0"]}, "initial.eps0", float, 0.0)
        if out["eps0"] > ceiling:
            raise ConfigError("initial.eps0", f"{out['eps0']} exceeds the closeness ceiling {ceiling}")
    else:
        if "amplitude" not in spec:
            raise ConfigError("initial.amplitude", "required key missing")
        out["amplitude"] = _number({"initial.amplitude": spec["amplitude"]}, "initial.amplitude", float, 0.0)
    if spec.get("radius") is not None:
        out["radius"] = _number({"initial.radius": spec["radius"]}, "initial.radius", float, 0.0, lo_open=True)
    return out


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    if cfg.name is None:
        cfg.name = os.path.splitext(os.path.basename(path))[0]
    return cfg


def generate_initial(spec, grid, flow="hflow"):
    """Initial field from a generator spec or a snapshot path."""
    if "snapshot" in spec:
        snap = read_snapshot(spec["snapshot"])
        if snap.grid.shape != grid.shape:
            raise ConfigError("initial.snapshot", f"grid shape {snap.grid.shape} does not match {grid.shape}")
        return snap.data
    kw = {"radius": spec["radius"]} if spec.get("radius") is not None and spec["gen"] == "bump" else {}
    if flow == "conformal2d":
        return initial.conformal(spec["gen"], grid, spec["amplitude"], spec.get("seed", 0), **kw)
    return initial.metric(spec["gen"], grid, spec["eps0"], spec.get("seed", 0), **kw)


def _fmt(x):
    return "" if x is None else repr(float(x))


def write_series(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(r.t), _fmt(r.eps), _fmt(r.sup_dev), _fmt(r.max_phi), _fmt(r.integral_I),
                        _fmt(r.grad_norms[0]), _fmt(r.grad_norms[1]), _fmt(r.sup_drift), _fmt(r.rf_residual)])


def read_series(path):
    """CSV columns as a dict of float arrays (empty cells become NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: np.array([float(r[k]) if r[k] != "" else np.nan for r in rows]) for k in rows[0]}


def monotone_violation(values, tol):
    """First ``(index, excess)`` with ``v[k+1] > v[k] + tol``, else ``None``."""
    v = np.asarray(values, dtype=float)
    inc = np.diff(v) - tol
    bad = np.nonzero(inc > 0.0)[0]
    if bad.size == 0:
        return None
    k = int(bad[0])
    return k + 1, float(np.diff(v)[k])


def check_hflow_invariants(records, eps0, m):
    """Failure dicts for the asserted invariants of an h-flow series (empty when all hold)."""
    failures = []
    if not records or eps0 > 0.1 or m < 6:
        return failures
    I = [r.integral_I for r in records]
    tol = MONOTONE_RTOL * (1.0 + I[0])
    bad = monotone_violation(I, tol)
    if bad:
        k, inc = bad
        failures.append({"invariant": "integral_I monotonicity", "record": k, "t": records[k].t,
                         "increase": inc, "tolerance": tol})
    P = [r.max_phi for r in records]
    tol = MONOTONE_RTOL * P[0]
    bad = monotone_violation(P, tol)
    if bad:
        k, inc = bad
        failures.append({"invariant": "max_phi maximum principle", "record": k, "t": records[k].t,
                         "increase": inc, "tolerance": tol})
    return failures


def check_conformal_invariants(records, sup0, p):
    failures = []
    bad = monotone_violation([r.sup_u for r in records], CONFORMAL_MAX_TOL)
    if bad:
        k, inc = bad
        failures.append({"invariant": "conformal maximum principle", "record": k, "t": records[k].t,
                         "increase": inc, "tolerance": CONFORMAL_MAX_TOL})
    if p >= sup0 + 1.0:
        for attr in ("monotone_pos", "monotone_neg"):
            vals = [getattr(r, attr) for r in records]
            tol = MONOTONE_RTOL * (1.0 + vals[0])
            bad = monotone_violation(vals, tol)
            if bad:
                k, inc = bad
                failures.append({"invariant": f"conformal {attr} monotonicity", "record": k,
                                 "t": records[k].t, "increase": inc, "tolerance": tol})
    return failures


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


class _Snapshots:
    def __init__(self, out_dir, times, kind):
        self.out_dir = out_dir
        self.pending = list(times)
        self.kind = kind
        self.written = []

    def maybe(self, grid, data, t):
        while self.pending and t >= self.pending[0] - 1e-14:
            target = self.pending.pop(0)
            path = os.path.join(self.out_dir, f"snapshot_{len(self.written):03d}.rrlx")
            write_snapshot(path, data, grid, self.kind, t)
            self.written.append({"path": os.path.basename(path), "requested": target, "t": t})


def run_experiment(config, out_dir, record_hook=None):
    """Run one configuration and write its outputs; returns the exit status.

    0: every asserted invariant held. 1: an invariant failed (see failure.json).
    2: a module error stopped the run (see failure.json).
    ``record_hook(records) -> records`` lets tests doctor the series before
    the invariant checks.
    """
    os.makedirs(out_dir, exist_ok=True)
    if config.flow == "conformal2d":
        return _run_conformal(config, out_dir, record_hook)
    grid = config.grid()
    failures = []
    try:
        g0 = generate_initial(config.initial, grid)
        if config.cutoff_radius is not None:
            g0, _ = hflow.cutoff_initial(g0, grid, config.cutoff_radius)
        init = hflow.InitialData.from_field(grid, g0)
    except (ValueError, NonPositiveDefinite) as exc:
        _write_json(os.path.join(out_dir, "failure.json"), {"error": type(exc).__name__, "message": str(exc)})
        return 2
    snaps = _Snapshots(out_dir, config.snapshot_times, "metric")
    snaps.maybe(grid, init.g0, 0.0)
    tracker = deturck.GaugeTracker(grid, residual_every=config.residual_every) if config.deturck else None

    def on_step(prev, new, dt):
        snaps.maybe(grid, new.g, new.t)
        return tracker(prev, new, dt) if tracker is not None else None

    status = 0
    records = []
    try:
        _, records = hflow.run(init, config.t_end, config.safety, config.record_every, config.m,
                               config.p, config.delta, config.eps_ceiling, on_step=on_step)
    except (Blowup, ClosenessCeilingExceeded, MarkerEscaped, DegenerateJacobian) as exc:
        records = getattr(exc, "records", [])
        failures.append({"error": type(exc).__name__, "message": str(exc)})
        status = 2
    if record_hook is not None:
        records = record_hook(records)
    write_series(os.path.join(out_dir, "series.csv"), records)

    if status == 0:
        failures += check_hflow_invariants(records, init.epsilon0, config.m)
        if tracker is not None and not tracker.det_floor > 0.0:
            failures.append({"invariant": "jacobian determinant floor", "value": tracker.det_floor})
        status = 1 if failures else 0

    summary = {"epsilon0": init.epsilon0, "steps": len(records), "snapshots": snaps.written}
    try:
        fit = diagnostics.fit_decay([(r.t, r.sup_dev) for r in records], config.fit_window, grid.dim, config.p)
        summary["fit"] = asdict(fit)
    except (ValueError, diagnostics.InsufficientData) as exc:
        summary["fit"] = {"error": str(exc)}
    if tracker is not None:
        summary["jacobian_det_floor"] = tracker.det_floor
    _write_json(os.path.join(out_dir, "fit.json"), summary)
    if failures:
        _write_json(os.path.join(out_dir, "failure.json"), {"failures": failures})
    return status


def _run_conformal(config, out_dir, record_hook):
    grid = config.grid()
    try:
        u0 = generate_initial(config.initial, grid, "conformal2d")
    except ValueError as exc:
        _write_json(os.path.join(out_dir, "failure.json"), {"error": type(exc).__name__, "message": str(exc)})
        return 2
    snaps = _Snapshots(out_dir, config.snapshot_times, "scalar")
    snaps.maybe(grid, u0, 0.0)
    field_, records = conformal2d.run_conformal(u0, grid, config.t_end, config.safety, config.record_every,
                                                config.p, config.delta, config.stop_below)
    if record_hook is not None:
        records = record_hook(records)
    with open(os.path.join(out_dir, "series.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONFORMAL_COLUMNS)
        for r in records:
            w.writerow([_fmt(r.t), _fmt(r.sup_u), _fmt(r.monotone_pos), _fmt(r.monotone_neg)])
    snaps.maybe(grid, field_.u, field_.t)
    failures = check_conformal_invariants(records, float(np.abs(u0).max()), config.p)
    _write_json(os.path.join(out_dir, "fit.json"), {"t_final": field_.t, "sup_u_final": records[-1].sup_u,
                                                    "snapshots": snaps.written})
    if failures:
        _write_json(os.path.join(out_dir, "failure.json"), {"failures": failures})
        return 1
    return 0


def identity_error(g, grid):
    """Sup over the nodes away from any boundary of ``|hflow_rhs - rhs_ricci_deturck|``."""
    diff = np.abs(hflow.hflow_rhs(g, grid) - rhs_ricci_deturck(g, grid)).max(axis=(-1, -2))
    return float(diff[deturck.residual_mask(grid)].max())


def _orders(errors):
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(math.log2(a / b) if a > 0 and b > 0 else None)
    return out


def check_identity(config, levels=2):
    """DeTurck identity discrepancy on the configured data, refined ``levels - 1`` times."""
    errors = []
    for k in range(levels):
        cfg = config.refined(2 ** k) if k else config
        grid = cfg.grid()
        errors.append(identity_error(generate_initial(cfg.initial, grid), grid))
    return {"errors": errors, "orders": _orders(errors)}


def convergence_study(config, levels=2):
    """Repeat the run at dx, dx/2, ...; per-level raw numbers and observed orders."""
    if levels < 2:
        raise ValueError("a study needs at least two levels")
    ident, resid, finals, devs = [], [], [], []
    for k in range(levels):
        cfg = config.refined(2 ** k) if k else config
        grid = cfg.grid()
        g0 = generate_initial(cfg.initial, grid)
        ident.append(identity_error(g0, grid))
        tracker = deturck.GaugeTracker(grid) if cfg.deturck else None
        state, recs = hflow.run(hflow.InitialData.from_field(grid, g0), cfg.t_end, cfg.safety,
                                10 ** 9, cfg.m, cfg.p, cfg.delta, cfg.eps_ceiling, on_step=tracker)
        if tracker is not None:
            resid.append(max(v for _, v in tracker.residual_series))
        stride = 2 ** k
        finals.append(state.g[(slice(None, None, stride),) * grid.dim])
        devs.append(recs[-1].sup_dev)
    diffs = [float(np.abs(a - b).max()) for a, b in zip(finals[:-1], finals[1:])]
    report = {
        "levels": levels,
        "spacing": [config.grid().refined(2 ** k).spacing[0] for k in range(levels)],
        "identity_error": ident,
        "identity_order": _orders(ident),
        "final_sup_dev": devs,
        "self_convergence_diff": diffs,
        "self_convergence_order": _orders(diffs),
    }
    if resid:
        report["rf_residual"] = resid
        report["rf_residual_order"] = _orders(resid)
    return report


def fit_decay_csv(path, window=None, dim=3, p=1):
    s = read_series(path)
    if "sup_dev" not in s:
        raise ValueError(f"{path} has no sup_dev column")
    return diagnostics.fit_decay(zip(s["t"], s["sup_dev"]), window, dim, p)
