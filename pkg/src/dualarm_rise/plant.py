"""Translational dynamics of the multirotor carrying the two arms.

The plant integrates

    m_t p_ddot + F_f(p_dot) + F = U,        U = U_c - F_c

where F_c (gravity plus measurable centripetal coupling) is compensable and
the lumped force F collects the external disturbance and the coupling terms
that need omega_dot, r_oc_dot and r_oc_ddot. Attitude is an exogenous signal.

Force helpers are vectorised over leading dimensions of their inputs.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .kinematics import ArmGeometry, JointState, arm_mass_moments, claw_midpoint
from .trajectories import blend

log = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])


class PlantError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    """Raised when the integrator produces non-finite values."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


@dataclass
class UavState:
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.omega_dot = np.asarray(self.omega_dot, dtype=float)

    def validate(self, tol: float = 1e-9) -> None:
        for name in ("p", "v", "R", "omega", "omega_dot"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise PlantError(f"non-finite {name} in UAV state")
        if np.linalg.norm(self.R.T @ self.R - np.eye(3)) > tol or abs(np.linalg.det(self.R) - 1) > tol:
            raise PlantError("R is not a rotation matrix")


@dataclass
class PlantParams:
    m_t: float = 4.85
    g: float = 9.8
    friction_coeffs: tuple[float, float, float] = (0.25, 0.25, 0.25)
    payload_mass: float = 0.2

    def __post_init__(self):
        if self.m_t <= 0 or self.g <= 0:
            raise PlantError("m_t and g must be positive")
        if np.any(np.asarray(self.friction_coeffs) < 0):
            raise PlantError("friction coefficients must be non-negative")
        if self.payload_mass < 0:
            raise PlantError("payload mass must be non-negative")

    @property
    def e3(self) -> np.ndarray:
        return E3


# ---------------------------------------------------------------- forces

def _mv(A, x):
    return np.einsum("...ij,...j->...i", A, x)


def friction(params: PlantParams, v) -> np.ndarray:
    """Viscous friction diag(c) v."""
    return np.asarray(params.friction_coeffs, dtype=float) * np.asarray(v, dtype=float)


def coupling_force(params: PlantParams, uav: UavState, r_oc, r_oc_dot, r_oc_ddot) -> np.ndarray:
    """F_m: the force the moving arms exert on the multirotor."""
    w, wd = uav.omega, uav.omega_dot
    inner = np.cross(w, np.cross(w, r_oc)) + np.cross(wd, r_oc) + 2 * np.cross(w, r_oc_dot) + r_oc_ddot
    return params.m_t * _mv(uav.R, inner)


def compensable_force(params: PlantParams, uav: UavState, r_oc) -> np.ndarray:
    """F_c = m_t g e3 + m_t R [w x (w x r_oc)]."""
    w = uav.omega
    return params.m_t * params.g * E3 + params.m_t * _mv(uav.R, np.cross(w, np.cross(w, r_oc)))


def lumped_uncertainty(params: PlantParams, uav: UavState, F_d, r_oc, r_oc_dot, r_oc_ddot) -> np.ndarray:
    """F = F_d + m_t R (w_dot x r_oc + 2 w x r_oc_dot + r_oc_ddot). Plant-side only."""
    w, wd = uav.omega, uav.omega_dot
    inner = np.cross(wd, r_oc) + 2 * np.cross(w, r_oc_dot) + r_oc_ddot
    return np.asarray(F_d, dtype=float) + params.m_t * _mv(uav.R, inner)


# ---------------------------------------------------------------- exogenous signals

@dataclass
class DisturbanceProfile:
    """External force F_d(t).

    Kinds: ``none``, ``constant``, ``sinusoid`` (amplitude * sin(2 pi f t + phase)),
    ``step`` (amplitude switched on at each event time, smoothed over ``ramp``
    seconds) and ``payload-event`` (no force; a mass is attached at
    ``event_times[0]`` and released at ``event_times[1]``).
    """

    kind: str = "none"
    amplitude: tuple[float, float, float] = (0.0, 0.0, 0.0)
    frequency: float = 0.0
    phase: tuple[float, float, float] = (0.0, 0.0, 0.0)
    event_times: tuple[float, ...] = ()
    ramp: float = 0.2

    KINDS = ("none", "constant", "sinusoid", "step", "payload-event")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise PlantError(f"unknown disturbance kind {self.kind!r}")
        if self.ramp <= 0:
            raise PlantError("ramp must be positive")
        times = list(self.event_times)
        if times != sorted(times):
            raise PlantError("event times must be ordered")
        if self.kind == "payload-event" and len(times) != 2:
            raise PlantError("payload-event needs (pickup, release) event times")
        if self.kind == "step" and not times:
            raise PlantError("step disturbance needs at least one event time")

    @classmethod
    def from_dict(cls, d: dict) -> "DisturbanceProfile":
        d = dict(d)
        for key in ("amplitude", "phase", "event_times"):
            if key in d:
                d[key] = tuple(np.broadcast_to(np.asarray(d[key], float), (3,)).tolist()) \
                    if key != "event_times" else tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitude": list(self.amplitude), "frequency": self.frequency,
                "phase": list(self.phase), "event_times": list(self.event_times), "ramp": self.ramp}

    def force(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        amp = np.asarray(self.amplitude, dtype=float)
        zero = np.zeros(t.shape + (3,))
        if self.kind in ("none", "payload-event"):
            return zero
        if self.kind == "constant":
            return zero + amp
        if self.kind == "sinusoid":
            arg = 2 * np.pi * self.frequency * t[..., None] + np.asarray(self.phase)
            return amp * np.sin(arg)
        level = sum(blend(t, te, te + self.ramp)[0] for te in self.event_times)
        return np.asarray(level)[..., None] * amp

    def attached_fraction(self, t) -> np.ndarray:
        """Smoothed indicator of the payload being carried (0 outside payload events)."""
        t = np.asarray(t, dtype=float)
        if self.kind != "payload-event":
            return np.zeros(t.shape)
        t_on, t_off = self.event_times
        return blend(t, t_on, t_on + self.ramp)[0] - blend(t, t_off, t_off + self.ramp)[0]


def _euler_zyx(roll, pitch, yaw):
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    R = np.empty(np.shape(roll) + (3, 3))
    R[..., 0, 0], R[..., 0, 1], R[..., 0, 2] = cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr
    R[..., 1, 0], R[..., 1, 1], R[..., 1, 2] = sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr
    R[..., 2, 0], R[..., 2, 1], R[..., 2, 2] = -sp, cp * sr, cp * cr
    return R


@dataclass
class AttitudeSource:
    """Exogenous attitude (R, body omega, omega_dot).

    ``prescribed-sinusoid`` drives ZYX Euler angles (roll, pitch, yaw) with
    sinusoids and returns the matching body rates; ``file-replay`` reads a CSV
    with columns t, r00..r22, wx, wy, wz, wdx, wdy, wdz.
    """

    mode: str = "prescribed-sinusoid"
    amplitude: tuple[float, float, float] = (0.05, 0.05, 0.1)
    frequency: tuple[float, float, float] = (0.2, 0.15, 0.1)
    phase: tuple[float, float, float] = (0.0, 0.0, 0.0)
    path: str | None = None
    _replay: dict | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("zero", "prescribed-sinusoid", "file-replay"):
            raise PlantError(f"unknown attitude mode {self.mode!r}")
        if self.mode == "file-replay":
            if not self.path:
                raise PlantError("file-replay attitude needs a path")
            self._replay = _load_attitude_csv(self.path)

    @classmethod
    def from_dict(cls, d: dict) -> "AttitudeSource":
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "amplitude": list(self.amplitude), "frequency": list(self.frequency),
                "phase": list(self.phase), "path": self.path}

    def sample(self, t):
        t = np.asarray(t, dtype=float)
        if self.mode == "zero":
            R = np.broadcast_to(np.eye(3), t.shape + (3, 3)).copy()
            return R, np.zeros(t.shape + (3,)), np.zeros(t.shape + (3,))
        if self.mode == "file-replay":
            return self._sample_replay(t)
        A = np.asarray(self.amplitude, dtype=float)
        w = 2 * np.pi * np.asarray(self.frequency, dtype=float)
        arg = w * t[..., None] + np.asarray(self.phase, dtype=float)
        ang, dang, ddang = A * np.sin(arg), A * w * np.cos(arg), -A * w ** 2 * np.sin(arg)
        r, p, y = ang[..., 0], ang[..., 1], ang[..., 2]
        dr, dp, dy = dang[..., 0], dang[..., 1], dang[..., 2]
        ddr, ddp, ddy = ddang[..., 0], ddang[..., 1], ddang[..., 2]
        sr, cr, sp, cp = np.sin(r), np.cos(r), np.sin(p), np.cos(p)
        omega = np.stack([dr - dy * sp,
                          dp * cr + dy * cp * sr,
                          -dp * sr + dy * cp * cr], axis=-1)
        omega_dot = np.stack([
            ddr - ddy * sp - dy * dp * cp,
            ddp * cr - dp * dr * sr + ddy * cp * sr - dy * dp * sp * sr + dy * dr * cp * cr,
            -ddp * sr - dp * dr * cr + ddy * cp * cr - dy * dp * sp * cr - dy * dr * cp * sr,
        ], axis=-1)
        return _euler_zyx(r, p, y), omega, omega_dot

    def _sample_replay(self, t):
        rep = self._replay
        tt = np.clip(t, rep["t"][0], rep["t"][-1])
        R = rep["slerp"](tt.ravel()).as_matrix().reshape(t.shape + (3, 3))
        omega = np.stack([np.interp(tt, rep["t"], rep["omega"][:, k]) for k in range(3)], axis=-1)
        omega_dot = np.stack([np.interp(tt, rep["t"], rep["omega_dot"][:, k]) for k in range(3)], axis=-1)
        return R, omega, omega_dot


def _load_attitude_csv(path: str) -> dict:
    with open(path, newline="") as fh:
        rows = [row for row in csv.DictReader(fh)]
    if len(rows) < 2:
        raise PlantError(f"attitude replay file {path} needs at least two rows")
    t = np.array([float(r["t"]) for r in rows])
    R = np.array([[float(r[f"r{i}{j}"]) for i in range(3) for j in range(3)] for r in rows]).reshape(-1, 3, 3)
    omega = np.array([[float(r[k]) for k in ("wx", "wy", "wz")] for r in rows])
    omega_dot = np.array([[float(r[k]) for k in ("wdx", "wdy", "wdz")] for r in rows])
    return {"t": t, "omega": omega, "omega_dot": omega_dot, "slerp": Slerp(t, Rotation.from_matrix(R))}


# ---------------------------------------------------------------- signal tables

@dataclass
class PlantSignals:
    """Exogenous plant signals on a time grid (all arrays have leading length n)."""

    t: np.ndarray
    R: np.ndarray
    omega: np.ndarray
    omega_dot: np.ndarray
    r_oc: np.ndarray          # nominal (arms only), what the controller measures
    r_oc_dot: np.ndarray
    r_oc_ddot: np.ndarray
    mass: np.ndarray          # true mass incl. attached payload
    F_d: np.ndarray
    F: np.ndarray             # true lumped uncertainty
    F_m: np.ndarray           # true coupling force
    F_c_true: np.ndarray      # true compensable force
    F_c: np.ndarray           # nominal compensable force (controller side)


JointSource = Callable[[np.ndarray], tuple[JointState, JointState]]


class Plant:
    """Coupled UAV/arm translational plant driven by exogenous attitude, joints and disturbances."""

    def __init__(self, params: PlantParams | None = None, geom: ArmGeometry | None = None,
                 joints: JointSource | None = None, attitude: AttitudeSource | None = None,
                 disturbances: list[DisturbanceProfile] | None = None,
                 friction_fn: Callable[[np.ndarray], np.ndarray] | None = None):
        self.params = params or PlantParams()
        self.geom = geom or ArmGeometry()
        self.joints = joints
        self.attitude = attitude or AttitudeSource(mode="zero")
        self.disturbances = list(disturbances or [])
        self.friction_fn = friction_fn or (lambda v: friction(self.params, v))

    def signals(self, t) -> PlantSignals:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        prm = self.params
        R, w, wd = self.attitude.sample(t)
        if self.joints is None:
            zero = np.zeros(t.shape + (3,))
            right = left = JointState(zero, zero, zero)
        else:
            right, left = self.joints(t)
        s0, s1, s2 = arm_mass_moments(self.geom, right, left)
        s0, s1, s2 = (np.broadcast_to(s, t.shape + (3,)) for s in (s0, s1, s2))
        F_d = np.zeros(t.shape + (3,))
        attached = np.zeros(t.shape)
        for dist in self.disturbances:
            F_d = F_d + dist.force(t)
            attached = attached + dist.attached_fraction(t)
        m_pl = prm.payload_mass * attached
        mass = prm.m_t + m_pl
        if np.any(attached != 0):
            q, qd, qdd = claw_midpoint(self.geom, right, left)
            m1 = s0 + m_pl[..., None] * q
            m1d = s1 + m_pl[..., None] * qd
            m1dd = s2 + m_pl[..., None] * qdd
        else:
            m1, m1d, m1dd = s0, s1, s2
        # coupling terms are linear in the first mass moment m_t * r_oc
        unit = PlantParams(m_t=1.0, g=prm.g, friction_coeffs=prm.friction_coeffs)
        uav = UavState(np.zeros_like(w), np.zeros_like(w), R, w, wd)
        F = lumped_uncertainty(unit, uav, F_d, m1, m1d, m1dd)
        F_m = coupling_force(unit, uav, m1, m1d, m1dd)
        r_oc, r_oc_dot, r_oc_ddot = s0 / prm.m_t, s1 / prm.m_t, s2 / prm.m_t
        F_c = compensable_force(prm, uav, r_oc)
        if np.any(attached != 0):
            F_c_true = mass[..., None] * prm.g * E3 + _mv(R, np.cross(w, np.cross(w, m1)))
        else:
            F_c_true = F_c
        return PlantSignals(t, R, w, wd, r_oc, r_oc_dot, r_oc_ddot, mass, F_d, F, F_m, F_c_true, F_c)

    def state_at(self, t: float, p, v) -> UavState:
        R, w, wd = self.attitude.sample(np.atleast_1d(float(t)))
        return UavState(p, v, R[0], w[0], wd[0])

    def step(self, state: UavState, U, t: float, dt: float) -> UavState:
        """Advance one fixed step of RK4 with U held; exogenous forces sampled at the stages."""
        if not 0 < dt <= 0.01:
            raise PlantError(f"dt must lie in (0, 0.01], got {dt}")
        U = np.asarray(U, dtype=float)
        if not np.all(np.isfinite(U)):
            raise DivergenceError(f"non-finite control input at t={t}", t)
        sig = self.signals(np.array([t, t + 0.5 * dt, t + dt]))
        p, v = rk4_step(state.p, state.v, U, sig.F, sig.mass, self.friction_fn, dt, t)
        return UavState(p, v, sig.R[2], sig.omega[2], sig.omega_dot[2])


def rk4_step(p, v, U, F_stages, m_stages, friction_fn, dt, t=None):
    """Classical RK4 for m p_ddot = U - F_f(v) - F(t); F, m given at t, t+dt/2, t+dt."""
    F0, F1, F2 = F_stages
    m0, m1, m2 = m_stages
    a1 = (U - friction_fn(v) - F0) / m0
    v2 = v + 0.5 * dt * a1
    a2 = (U - friction_fn(v2) - F1) / m1
    v3 = v + 0.5 * dt * a2
    a3 = (U - friction_fn(v3) - F1) / m1
    v4 = v + dt * a3
    a4 = (U - friction_fn(v4) - F2) / m2
    p_new = p + dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
    v_new = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    if not np.isfinite(p_new @ p_new + v_new @ v_new):
        raise DivergenceError(f"non-finite plant derivative at t={t}", t)
    return p_new, v_new
