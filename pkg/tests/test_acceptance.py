"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import time

import numpy as np
import pytest

from dualarm_rise.config import SCENARIOS, SimConfig, scenario_preset
from dualarm_rise.controllers import ControllerGains, GainCertificate, RiseState, Verdict, check_gain_conditions, rise_step
from dualarm_rise.dnn import DeepFeedforward, DnnParameters, make_input
from dualarm_rise.harness import error_stats, run_scenario
from dualarm_rise.kinematics import (ArmGeometry, JointState, com_derivatives, com_offset, forward_kinematics,
                                     jacobian)
from dualarm_rise.plant import DisturbanceProfile, Plant, PlantParams, rk4_step
from dualarm_rise.trajectories import JointSchedule

GEOM = ArmGeometry()


def _report(log, n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    log[n] = line
    print(line)
    return ok


# ---------------------------------------------------------------- 1

def test_criterion_1_convergence_surrogate(acceptance_log):
    cfg = SimConfig(scenario="figure-eight", duration=40.0, joints=JointSchedule.frozen())
    run_scenario(cfg.replace(duration=1.0))  # compiles the kernels so the timing covers the run only
    start = time.perf_counter()
    tr = run_scenario(cfg)
    wall = time.perf_counter() - start
    err = np.linalg.norm(tr.vec("e1"), axis=1)[tr.t >= cfg.metrics_warmup].mean()
    ok = tr.status == "ok" and err < 1e-3 and wall < 5.0
    _report(acceptance_log, 1, ok, f"steady mean |e1| = {err:.3e} m (< 1e-3), wall {wall:.2f} s (< 5 s)")
    assert ok


# ---------------------------------------------------------------- 2

def test_criterion_2_directional_reproduction(acceptance_log, preset_run):
    details, ok = [], True
    for scenario in ("figure-eight", "spiral"):
        dnn, base = preset_run(scenario, "dnn-rise"), preset_run(scenario, "baseline")
        d_mean, b_mean = error_stats(dnn)[1], error_stats(base)[1]
        red = 100 * (1 - d_mean / b_mean)
        good = bool(np.all(d_mean < b_mean) and np.sum(red >= 25.0) >= 2)
        ok &= good and dnn.status == base.status == "ok"
        details.append(f"{scenario} reductions " + "/".join(f"{r:.1f}%" for r in red))
    _report(acceptance_log, 2, ok, "; ".join(details) + " (all axes lower, >= 25% on two)")
    assert ok


# ---------------------------------------------------------------- 3

def _jacobian_worst(n=1000, h=1e-6):
    rng = np.random.default_rng(11)
    worst = 0.0
    for side in ("right", "left"):
        for _ in range(n):
            eta = rng.uniform(-np.pi, np.pi, 3)
            J = jacobian(GEOM, eta, side)
            R0 = forward_kinematics(GEOM, eta, side).orientation
            for i, d in enumerate(np.eye(3)):
                a, b = forward_kinematics(GEOM, eta + h * d, side), forward_kinematics(GEOM, eta - h * d, side)
                lin = (a.position - b.position) / (2 * h)
                W = (a.orientation - b.orientation) / (2 * h) @ R0.T
                ang = np.array([W[2, 1], W[0, 2], W[1, 0]])
                worst = max(worst, np.abs(J[:3, i] - lin).max(), np.abs(J[3:, i] - ang).max())
    return worst


def _com_worst():
    w1 = w2 = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        A, w, ph = rng.uniform(0.2, 1.0, (2, 3)), rng.uniform(0.5, 3.0, (2, 3)), rng.uniform(0, 6, (2, 3))

        def path(s):
            return A * np.sin(w * s + ph), A * w * np.cos(w * s + ph), -A * w ** 2 * np.sin(w * s + ph)

        def r_at(s):
            e = path(s)[0]
            return com_offset(GEOM, e[0], e[1])

        t = 0.37 * seed
        e, ed, edd = path(t)
        rd, rdd = com_derivatives(GEOM, JointState(e[0], ed[0], edd[0]), JointState(e[1], ed[1], edd[1]))
        h, h2 = 1e-6, 1e-4
        w1 = max(w1, np.abs(rd - (r_at(t + h) - r_at(t - h)) / (2 * h)).max())
        w2 = max(w2, np.abs(rdd - (r_at(t + h2) - 2 * r_at(t) + r_at(t - h2)) / h2 ** 2).max())
    return w1, w2


def _dnn_derivative_worst(h=1e-6):
    rng = np.random.default_rng(12)
    worst = 0.0
    for widths in ((3, 4, 4, 4, 3), (3, 6, 3), (3, 4, 5, 3)):
        for seed in range(100):
            net = DeepFeedforward(DnnParameters.initialize(widths, init_range=1.0, seed=seed))
            v, a = rng.normal(size=(2, 3))
            x, xd = make_input(v, a)
            net.forward(x)
            analytic = net.ideal_time_derivative(xd)
            fd = (net.forward(make_input(v + h * a, a)[0]) - net.forward(make_input(v - h * a, a)[0])) / (2 * h)
            worst = max(worst, np.abs(analytic - fd).max())
    return worst


def _nested_worst():
    rng = np.random.default_rng(13)

    def sig(u):
        return 1 / (1 + np.exp(-u))

    worst = 0.0
    for seed in range(100):
        net = DeepFeedforward(DnnParameters.initialize((3, 5, 4, 3), init_range=1.0, seed=seed))
        V0, V1, V2 = (W.copy() for W in net.weights)
        x = make_input(rng.normal(size=3), np.zeros(3))[0]
        nested = V2.T @ np.append(sig(V1.T @ np.append(sig(V0.T @ x), 1.0)), 1.0)
        worst = max(worst, np.abs(net.forward(x) - nested).max())
    return worst


def _rise_order():
    gains = ControllerGains()
    ks1 = gains.K_s + 1.0

    def e2(t):
        return np.stack([0.1 + 0.05 * np.sin(t), 0.2 + 0.1 * np.cos(2 * t), 0.3 * np.exp(-t) + 0.01], axis=-1)

    def e2_integral(t):
        return np.array([0.1 * t + 0.05 * (1 - np.cos(t)), 0.2 * t + 0.05 * np.sin(2 * t),
                         0.3 * (1 - np.exp(-t)) + 0.01 * t])

    T = 2.0
    exact = -ks1 * (e2(T) - e2(0.0)) - ks1 * gains.k2 * e2_integral(T) - gains.B1 * T
    errs = []
    for n in (50, 100, 200, 400):
        state, mu = RiseState(), None
        for sample in e2(np.linspace(0, T, n + 1)):
            mu, state = rise_step(state, sample, gains, T / n)
        errs.append(np.abs(mu - exact).max())
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:])).min()


def test_criterion_3_oracle_suites(acceptance_log):
    jac = _jacobian_worst()
    com1, com2 = _com_worst()
    dnn_d = _dnn_derivative_worst()
    nested = _nested_worst()
    order = _rise_order()
    ok = jac < 1e-6 and com1 < 1e-6 and com2 < 1e-4 and dnn_d < 1e-6 and nested < 1e-14 and order >= 1.9
    _report(acceptance_log, 3, ok,
            f"jacobian {jac:.1e}, com {com1:.1e}/{com2:.1e}, dnn derivative {dnn_d:.1e}, "
            f"nested forward {nested:.1e}, rise order {order:.3f}")
    assert ok


# ---------------------------------------------------------------- 4

def _decomposition_residual_ulps(tr):
    resid = tr.vec("U") - tr.vec("mu") - tr.vec("fhat") - 4.85 * tr.vec("a_d")
    scale = np.maximum.reduce([np.abs(tr.vec(c)) for c in ("U", "mu", "fhat", "F_c")])
    return float(np.max(np.abs(resid) / (np.finfo(float).eps * np.maximum(scale, 1e-300))))


def test_criterion_4_invariants(acceptance_log, preset_run):
    proj = max(preset_run(s, "dnn-rise").weight_norms().max() for s in SCENARIOS)
    roundtrip = all(np.all(preset_run(s, c).vec("U_c") - preset_run(s, c).vec("F_c") == preset_run(s, c).vec("U"))
                    for s in SCENARIOS for c in ("dnn-rise", "baseline"))
    net = DeepFeedforward(DnnParameters.initialize())
    before = [W.copy() for W in net.weights]
    rng = np.random.default_rng(14)
    for _ in range(1000):
        x, xd = make_input(*rng.normal(size=(2, 3)))
        net.forward(x)
        net.adapt(np.zeros(3), xd, 1e-3)
    stationary = all(np.array_equal(a, b) for a, b in zip(net.weights, before))
    cfg = scenario_preset("figure-eight", duration=5.0, initial_offset=(0.02, 0.0, -0.01))
    a, b = run_scenario(cfg), run_scenario(cfg)
    determinism = all(a.columns[c].tobytes() == b.columns[c].tobytes() for c in a.columns)
    ulps = max(_decomposition_residual_ulps(preset_run(s, "dnn-rise")) for s in SCENARIOS)
    ok = proj <= 10.0 + 1e-12 and roundtrip and stationary and determinism
    _report(acceptance_log, 4, ok,
            f"max |V|_F {proj:.4f} (<= 10), U_c-F_c==U bitwise {roundtrip}, e2=0 stationary {stationary}, "
            f"bitwise determinism {determinism}, U decomposition within {ulps:.1f} ulp")
    assert ok


@pytest.mark.xfail(strict=True, reason="U_c - F_c == U and the U decomposition cannot both hold bitwise in "
                                       "binary floating point; the decomposition holds to a few ulp")
def test_criterion_4_decomposition_bitwise(acceptance_log, preset_run):
    exact = all(np.all(preset_run(s, "dnn-rise").vec("U") - preset_run(s, "dnn-rise").vec("mu")
                       - preset_run(s, "dnn-rise").vec("fhat") - 4.85 * preset_run(s, "dnn-rise").vec("a_d") == 0)
                for s in SCENARIOS)
    if not exact and 4 in acceptance_log:
        acceptance_log[4] = acceptance_log[4].replace("PASS", "FAIL", 1) + \
            "; bitwise U decomposition not met (xfail, ledgered)"
    assert exact


# ---------------------------------------------------------------- 5

def _forced_run(dt, T=10.0):
    dist = DisturbanceProfile("sinusoid", amplitude=(2.0, -1.0, 3.0), frequency=1.3, phase=(0.0, 0.5, 1.0))
    plant = Plant(PlantParams(friction_coeffs=(0.25, 0.4, 0.1)), disturbances=[dist])
    n = int(round(T / dt))
    p, v = np.zeros(3), np.array([0.2, 0.0, -0.1])
    U = np.array([0.5, 0.3, -0.2])
    sig = plant.signals(np.arange(2 * n + 1) * (0.5 * dt))
    # the free plant still carries gravity in F; hold the airframe with its weight
    U = U + sig.F_c[0]
    for k in range(n):
        j = 2 * k
        p, v = rk4_step(p, v, U, sig.F[j:j + 3], sig.mass[j:j + 3], plant.friction_fn, dt)
    return np.concatenate([p, v])


def test_criterion_5_integrator_order(acceptance_log):
    x1, x2, x3 = _forced_run(0.01), _forced_run(0.005), _forced_run(0.0025)
    ratio = np.linalg.norm(x1 - x2) / np.linalg.norm(x2 - x3)
    ok = 16 * 0.8 <= ratio <= 16 * 1.2
    _report(acceptance_log, 5, ok, f"Richardson ratio {ratio:.3f} (16 +/- 20%)")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_gain_checker(acceptance_log):
    gains = ControllerGains()
    k1_ok = check_gain_conditions(gains).checks["k1"] is Verdict.SATISFIED
    k2_flag = all(check_gain_conditions(gains, GainCertificate(beta2_max=b)).checks["k2"] is Verdict.UNSATISFIED
                  for b in (0.0, 0.1, 1.0, 10.0, 1e6))
    beta1_unsat = check_gain_conditions(gains, GainCertificate(zeta=(1, 1, 1, 1))).checks["beta1"]
    beta1_sat = check_gain_conditions(gains, GainCertificate(zeta=(1, 1, 0.49, 0.49))).checks["beta1"]
    ok = k1_ok and k2_flag and beta1_unsat is Verdict.UNSATISFIED and beta1_sat is Verdict.SATISFIED
    _report(acceptance_log, 6, ok, f"k1 satisfied {k1_ok}, k2 flagged for every beta2_max {k2_flag}, "
                                   f"zeta=(1,1,1,1) {beta1_unsat.value}, zeta=(1,1,.49,.49) {beta1_sat.value}")
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_payload(acceptance_log, preset_run):
    dnn, base = preset_run("delivery", "dnn-rise"), preset_run("delivery", "baseline")
    loaded = (dnn.t >= 3.0) & (dnn.t <= 15.0)
    dz, bz = np.abs(dnn.vec("e1")[loaded, 2]).max(), np.abs(base.vec("e1")[loaded, 2]).max()
    ok = dnn.status == base.status == "ok" and dz < bz
    _report(acceptance_log, 7, ok, f"loaded-interval peak |e_z| DNN-RISE {dz:.4f} m vs baseline {bz:.4f} m")
    assert ok
