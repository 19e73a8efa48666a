"""Closed-loop scenario runner, error metrics and trace export."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import SimConfig, config_hash
from .controllers import BaselinePD, DnnRiseController
from .dnn import DnnParameters, save_weights
from ._kernels import rk4_linear_friction
from .plant import Plant
from .trajectories import delivery_mission, figure_eight, hover, joint_schedule, spiral

log = logging.getLogger(__name__)

AXES = "xyz"
VECTOR_COLUMNS = ("p", "v", "p_d", "v_d", "a_d", "e1", "e1_dot", "e2", "r", "U", "U_c", "mu", "fhat",
                  "pd_p", "pd_d", "F_m", "F_c", "F_d", "F", "F_f")
SCALAR_COLUMNS = ("t", "mass")


class HarnessError(ValueError):
    pass


def trace_columns(n_layers: int) -> list[str]:
    cols = ["t"]
    for name in VECTOR_COLUMNS:
        cols += [f"{name}_{a}" for a in AXES]
    cols.append("mass")
    cols += [f"vnorm_{i}" for i in range(n_layers)]
    return cols


@dataclass
class SimTrace:
    columns: dict[str, np.ndarray]
    status: str = "ok"
    controller: str = ""
    scenario: str = ""
    meta: dict = field(default_factory=dict)
    final_weights: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    @property
    def n_layers(self) -> int:
        return sum(1 for c in self.columns if c.startswith("vnorm_"))

    def vec(self, name: str) -> np.ndarray:
        return np.stack([self.columns[f"{name}_{a}"] for a in AXES], axis=-1)

    def weight_norms(self) -> np.ndarray:
        return np.stack([self.columns[f"vnorm_{i}"] for i in range(self.n_layers)], axis=-1)


def reference(config: SimConfig):
    if config.scenario == "figure-eight":
        return figure_eight
    if config.scenario == "spiral":
        return spiral
    if config.scenario == "delivery":
        return lambda t: delivery_mission(t, config.delivery)
    return lambda t: hover(t, config.delivery.start)


def build_plant(config: SimConfig) -> Plant:
    return Plant(config.plant, config.arm, joints=lambda t: joint_schedule(t, config.joints),
                 attitude=config.attitude, disturbances=config.disturbances)


def build_controller(config: SimConfig, controller: str | None = None):
    name = controller or config.controller
    if name == "baseline":
        return BaselinePD(config.gains, config.plant.m_t, config.u_max)
    d = config.dnn
    params = DnnParameters.initialize(d.layer_widths, d.gamma, d.frobenius_bound, d.init_range,
                                      seed=config.seed, activation=d.activation)
    return DnnRiseController(config.gains, params, config.plant.m_t, config.sign_mode, config.sign_eps,
                             adapt=d.adapt, u_max=config.u_max)


class _Sample:
    __slots__ = ("p_d", "v_d", "a_d")

    def __init__(self, p_d, v_d, a_d):
        self.p_d, self.v_d, self.a_d = p_d, v_d, a_d


def run_scenario(config: SimConfig, controller: str | None = None, ctrl=None) -> SimTrace:
    """Fixed-step closed loop; deterministic given the config (seed included).

    Per step: sample reference -> errors -> controller (DNN forward/adapt and
    RISE, or PD) -> U, U_c -> plant RK4 step with U held.
    """
    name = controller or config.controller
    ctrl = ctrl if ctrl is not None else build_controller(config, name)
    plant = build_plant(config)
    dt, N = config.dt, config.n_steps
    k1, k2 = config.gains.k1, config.gains.k2
    sig = plant.signals(np.arange(2 * N + 1) * (0.5 * dt))
    ref = reference(config)(np.arange(N) * dt)
    P_d, V_d, A_d = ref.p_d, ref.v_d, ref.a_d
    coeffs = np.asarray(config.plant.friction_coeffs, dtype=float)

    def fric(v):
        return coeffs * v

    F_c_true = sig.F_c_true
    rng = np.random.default_rng(config.seed)
    noisy = config.noise.sigma_p > 0 or config.noise.sigma_v > 0
    if noisy:
        noise_p = rng.normal(0.0, config.noise.sigma_p, size=(N, 3))
        noise_v = rng.normal(0.0, config.noise.sigma_v, size=(N, 3))

    n_layers = len(ctrl.net.weights) if ctrl.net is not None else len(config.dnn.layer_widths) - 1
    cols = {c: np.zeros((N, 3)) for c in (*VECTOR_COLUMNS, "_pm", "_vm", "_Up")}
    norms = np.zeros((N, n_layers))

    p = P_d[0] + np.asarray(config.initial_offset, dtype=float)
    v = V_d[0].copy()
    status = "ok"
    n_done = 0
    out = None
    bound = config.divergence_bound
    decimation = config.control_decimation
    F_all, mass = sig.F, sig.mass
    F_c_all = sig.F_c
    rec_p, rec_v, rec_pm, rec_vm = cols["p"], cols["v"], cols["_pm"], cols["_vm"]
    rec_U, rec_Uc, rec_mu, rec_fhat = cols["U"], cols["U_c"], cols["mu"], cols["fhat"]
    rec_pdp, rec_pdd, rec_Up = cols["pd_p"], cols["pd_d"], cols["_Up"]
    net = ctrl.net
    for n in range(N):
        j = 2 * n
        if noisy:
            pm, vm = p + noise_p[n], v + noise_v[n]
        else:
            pm, vm = p, v
        if out is None or n % decimation == 0:
            p_d, v_d = P_d[n], V_d[n]
            e1 = pm - p_d
            e1_dot = vm - v_d
            e2 = e1_dot + k1 * e1
            out = ctrl(_Sample(p_d, v_d, A_d[n]), e1, e1_dot, e2, F_c_all[j], dt * decimation)
        # the airframe feels the command minus the true compensable force; the
        # controller only knows the nominal one, so a payload leaves a gap
        U_plant = out.U_c - F_c_true[j]
        rec_p[n] = p
        rec_v[n] = v
        rec_pm[n] = pm
        rec_vm[n] = vm
        rec_U[n] = out.U
        rec_Uc[n] = out.U_c
        rec_mu[n] = out.mu
        rec_fhat[n] = out.f_hat
        rec_pdp[n] = out.pd_p
        rec_pdd[n] = out.pd_d
        rec_Up[n] = U_plant
        if net is not None:
            norms[n] = net.norms
        n_done = n + 1
        p, v = rk4_linear_friction(p, v, U_plant, F_all[j], F_all[j + 1], F_all[j + 2],
                                   mass[j], mass[j + 1], mass[j + 2], coeffs, dt)
        if not (abs(p[0]) < bound and abs(p[1]) < bound and abs(p[2]) < bound):
            status = "diverged"
            if np.all(np.isfinite(p)) and np.all(np.isfinite(v)):
                log.warning("run diverged at t=%.3f s (|p| beyond %g m)", (n + 1) * dt, bound)
            else:
                log.warning("run aborted at t=%.3f s: non-finite plant state", (n + 1) * dt)
            break

    # error signals are elementwise in the recorded samples, so rebuilding them
    # here reproduces the in-loop values exactly
    m = n_done
    P, V = cols["p"][:m], cols["v"][:m]
    e1 = cols["_pm"][:m] - P_d[:m]
    e1_dot = cols["_vm"][:m] - V_d[:m]
    cols["e1"][:m] = e1
    cols["e1_dot"][:m] = e1_dot
    cols["e2"][:m] = e1_dot + k1 * e1
    Ff = fric(V)
    cols["F_f"][:m] = Ff
    acc = (cols["_Up"][:m] - Ff - F_all[0:2 * m:2]) / mass[0:2 * m:2, None]
    cols["r"][:m] = (acc - A_d[:m]) + k1 * (V - V_d[:m]) + k2 * ((V - V_d[:m]) + k1 * (P - P_d[:m]))

    columns = {"t": np.arange(n_done) * dt}
    for name_ in VECTOR_COLUMNS:
        arr = cols[name_][:n_done]
        for k, a in enumerate(AXES):
            columns[f"{name_}_{a}"] = arr[:, k].copy()
    grid = slice(0, 2 * n_done, 2)
    extra = {"p_d": P_d, "v_d": V_d, "a_d": A_d, "F_m": sig.F_m[grid], "F_c": sig.F_c[grid],
             "F_d": sig.F_d[grid], "F": sig.F[grid]}
    for name_, arr in extra.items():
        for k, a in enumerate(AXES):
            columns[f"{name_}_{a}"] = np.ascontiguousarray(arr[:n_done, k])
    columns["mass"] = sig.mass[grid][:n_done].copy()
    for i in range(n_layers):
        columns[f"vnorm_{i}"] = norms[:n_done, i].copy()
    columns = {c: columns[c] for c in trace_columns(n_layers)}
    weights = [W.copy() for W in ctrl.net.weights] if ctrl.net is not None else None
    meta = {"dt": dt, "duration": config.duration, "seed": config.seed, "config_hash": config_hash(config),
            "final_p": p.tolist(), "final_v": v.tolist(),
            "frozen_steps": getattr(ctrl.net, "frozen_steps", 0) if ctrl.net is not None else 0}
    return SimTrace(columns, status, name, config.scenario, meta, weights)


# ---------------------------------------------------------------- metrics

def reduction(dnn_value, baseline_value):
    """100 (1 - dnn / baseline); NaN where the baseline metric is not positive."""
    dnn_value = np.asarray(dnn_value, dtype=float)
    baseline_value = np.asarray(baseline_value, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(baseline_value > 0, 100.0 * (1.0 - dnn_value / baseline_value), np.nan)


def error_stats(trace: SimTrace, warmup: float = 10.0):
    """Per-axis max and mean |e1| after the warm-up window."""
    mask = trace.t >= warmup - 1e-12
    if not np.any(mask):
        raise HarnessError(f"no samples after the {warmup} s warm-up window")
    err = np.abs(trace.vec("e1")[mask])
    return err.max(axis=0), err.mean(axis=0)


@dataclass
class MetricsReport:
    dnn_max: np.ndarray
    dnn_mean: np.ndarray
    base_max: np.ndarray
    base_mean: np.ndarray
    warmup: float

    @property
    def reduced_max(self) -> np.ndarray:
        return reduction(self.dnn_max, self.base_max)

    @property
    def reduced_mean(self) -> np.ndarray:
        return reduction(self.dnn_mean, self.base_mean)

    def to_dict(self) -> dict:
        return {"warmup": self.warmup,
                "max": {"dnn-rise": self.dnn_max.tolist(), "baseline": self.base_max.tolist(),
                        "reduced_pct": self.reduced_max.tolist()},
                "mean": {"dnn-rise": self.dnn_mean.tolist(), "baseline": self.base_mean.tolist(),
                         "reduced_pct": self.reduced_mean.tolist()}}

    def table(self) -> str:
        """Max/Mean rows per method plus the reduction line, in metres."""
        lines = [f"{'Error':<6}{'Method':<10}{'x (m)':>10}{'y (m)':>10}{'z (m)':>10}"]
        for label, d, b, red in (("Max", self.dnn_max, self.base_max, self.reduced_max),
                                 ("Mean", self.dnn_mean, self.base_mean, self.reduced_mean)):
            lines.append(f"{label:<6}{'DNN-RISE':<10}" + "".join(f"{x:>10.4f}" for x in d))
            lines.append(f"{'':<6}{'Baseline':<10}" + "".join(f"{x:>10.4f}" for x in b))
            lines.append(f"{'':<6}{'Reduced':<10}" + "".join(f"{x:>9.2f}%" for x in red))
        return "\n".join(lines)


def compute_metrics(trace_dnn: SimTrace, trace_base: SimTrace, warmup: float = 10.0) -> MetricsReport:
    if len(trace_dnn) != len(trace_base) or not np.array_equal(trace_dnn.t, trace_base.t):
        raise HarnessError("traces do not share a time grid")
    dmax, dmean = error_stats(trace_dnn, warmup)
    bmax, bmean = error_stats(trace_base, warmup)
    return MetricsReport(dmax, dmean, bmax, bmean, warmup)


def compare_controllers(config: SimConfig):
    """Run DNN-RISE and the PD baseline under identical exogenous signals."""
    dnn = run_scenario(config, "dnn-rise")
    base = run_scenario(config, "baseline")
    return compute_metrics(dnn, base, config.metrics_warmup), dnn, base


# ---------------------------------------------------------------- export

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(trace: SimTrace, path) -> Path:
    path = Path(path)
    names = list(trace.columns)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
            w.writerow(names)
            data = [trace.columns[c] for c in names]
            for row in zip(*data):
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise HarnessError(f"cannot write {path}: {os.strerror(exc.errno) if exc.errno else exc}") from exc
    return path


def read_csv(path) -> SimTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return SimTrace({name: data[:, i].copy() for i, name in enumerate(header)})


def summary(trace: SimTrace, warmup: float = 10.0) -> dict:
    out = {"status": trace.status, "controller": trace.controller, "scenario": trace.scenario,
           "rows": len(trace), "columns": list(trace.columns), **trace.meta}
    if len(trace) and trace.t[-1] >= warmup:
        emax, emean = error_stats(trace, warmup)
        out["e1_max"] = emax.tolist()
        out["e1_mean"] = emean.tolist()
    if trace.n_layers and len(trace):
        out["final_weight_norms"] = trace.weight_norms()[-1].tolist()
    return out


def write_json(trace: SimTrace, path, warmup: float = 10.0) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(summary(trace, warmup), indent=2, sort_keys=True))
    except OSError as exc:
        raise HarnessError(f"cannot write {path}: {os.strerror(exc.errno) if exc.errno else exc}") from exc
    return path


def export(trace: SimTrace, out_dir, fmt: str = "csv", stem: str | None = None, warmup: float = 10.0) -> list[Path]:
    """Write the trace as CSV plus a JSON summary (``fmt='json'`` writes the summary only)."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise HarnessError(f"cannot create {out_dir}: {exc.strerror}") from exc
    stem = stem or f"{trace.scenario or 'trace'}_{trace.controller or 'run'}"
    written = []
    if fmt == "csv":
        written.append(write_csv(trace, out_dir / f"{stem}.csv"))
    elif fmt != "json":
        raise HarnessError(f"unknown format {fmt!r}")
    written.append(write_json(trace, out_dir / f"{stem}.json", warmup))
    if trace.final_weights is not None:
        save_weights(out_dir / f"{stem}_weights.csv", trace.final_weights)
        written.append(out_dir / f"{stem}_weights.csv")
    return written
