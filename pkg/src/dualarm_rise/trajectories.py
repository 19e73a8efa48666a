"""Reference trajectories for the multirotor and joint-angle schedules for the arms.

Every generator returns analytic derivatives and accepts scalar or array time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import JointState


class TrajectoryError(ValueError):
    pass


@dataclass
class TrajectorySample:
    t: np.ndarray
    p_d: np.ndarray
    v_d: np.ndarray
    a_d: np.ndarray
    j_d: np.ndarray

    def __getitem__(self, idx) -> "TrajectorySample":
        return TrajectorySample(self.t[idx], self.p_d[idx], self.v_d[idx], self.a_d[idx], self.j_d[idx])

    def __len__(self):
        return np.shape(self.t)[0] if np.ndim(self.t) else 1


def _sinusoid(t, amp, w, phase, offset=0.0):
    s, c = np.sin(w * t + phase), np.cos(w * t + phase)
    return (offset + amp * s, amp * w * c, -amp * w ** 2 * s, -amp * w ** 3 * c)


def _stack(t, *axes):
    """axes: three 4-tuples (value, d1, d2, d3) -> TrajectorySample."""
    t = np.asarray(t, dtype=float)
    cols = [np.stack(np.broadcast_arrays(*(ax[k] + 0.0 * t for ax in axes)), axis=-1) for k in range(4)]
    return TrajectorySample(t, *cols)


def figure_eight(t) -> TrajectorySample:
    t = np.asarray(t, dtype=float)
    x = _sinusoid(t, 0.5, np.pi / 10, 0.0)
    y = _sinusoid(t, 1.0, np.pi / 20, np.pi)
    z = _sinusoid(t, 0.1, np.pi / 20, np.pi, offset=0.65)
    return _stack(t, x, y, z)


def spiral(t) -> TrajectorySample:
    t = np.asarray(t, dtype=float)
    rho, drho = (t + 5.0) / 80.0, 1.0 / 80.0
    w = np.pi / 20
    th = w * t + np.pi / 4
    s, c = np.sin(th), np.cos(th)
    x = (rho * s,
         drho * s + rho * w * c,
         2 * drho * w * c - rho * w ** 2 * s,
         -3 * drho * w ** 2 * s - rho * w ** 3 * c)
    y = (rho * c,
         drho * c - rho * w * s,
         -2 * drho * w * s - rho * w ** 2 * c,
         -3 * drho * w ** 2 * c + rho * w ** 3 * s)
    z = _sinusoid(t, 0.1, np.pi / 10, np.pi / 2, offset=0.65)
    return _stack(t, x, y, z)


def hover(t, point=(0.0, 0.0, 0.65)) -> TrajectorySample:
    t = np.asarray(t, dtype=float)
    zero = np.zeros(t.shape + (3,))
    return TrajectorySample(t, zero + np.asarray(point, dtype=float), zero.copy(), zero.copy(), zero.copy())


def smoothstep7(tau):
    """Septic blend s(tau) on [0, 1] with zero 1st-3rd derivatives at both ends.

    Returns (s, s', s'', s''') with respect to tau; clamped outside [0, 1].
    """
    tau = np.asarray(tau, dtype=float)
    inside = (tau > 0.0) & (tau < 1.0)
    x = np.clip(tau, 0.0, 1.0)
    s = x ** 4 * (35 - 84 * x + 70 * x ** 2 - 20 * x ** 3)
    d1 = 140 * x ** 3 * (1 - x) ** 3
    d2 = 420 * x ** 2 * (1 - x) ** 2 * (1 - 2 * x)
    d3 = 840 * x * (1 - x) * (1 - 5 * x + 5 * x ** 2)
    return s, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0), np.where(inside, d3, 0.0)


def blend(t, t0, t1):
    """smoothstep7 over [t0, t1] with derivatives in time."""
    T = t1 - t0
    s, d1, d2, d3 = smoothstep7((np.asarray(t, dtype=float) - t0) / T)
    return s, d1 / T, d2 / T ** 2, d3 / T ** 3


@dataclass
class DeliveryConfig:
    start: tuple[float, float, float] = (0.0, 0.0, 0.65)
    target: tuple[float, float, float] = (1.0, 0.0, 0.65)
    cruise_height: float = 0.8
    t_pickup: float = 3.0
    t_release: float = 15.0
    # climb, transfer and descent durations between the two events
    climb_time: float = 2.0
    descent_time: float = 2.0
    settle_time: float = 1.0

    def __post_init__(self):
        if not self.t_pickup < self.t_release:
            raise TrajectoryError("pickup must precede release")
        t_climb = self.t_pickup + self.settle_time
        t_descent_end = self.t_release - self.settle_time
        if not (self.t_pickup >= 0 and t_climb + self.climb_time < t_descent_end - self.descent_time):
            raise TrajectoryError(
                f"event times unordered: pickup={self.t_pickup}, release={self.t_release} leave no transfer window")

    def segments(self):
        """(t0, t1, displacement) triples of the mission legs."""
        start, target = np.asarray(self.start, float), np.asarray(self.target, float)
        up = np.array([start[0], start[1], self.cruise_height])
        over = np.array([target[0], target[1], self.cruise_height])
        t0 = self.t_pickup + self.settle_time
        t1 = t0 + self.climb_time
        t3 = self.t_release - self.settle_time
        t2 = t3 - self.descent_time
        return [(t0, t1, up - start), (t1, t2, over - up), (t2, t3, target - over)]


def delivery_mission(t, config: DeliveryConfig | None = None) -> TrajectorySample:
    """Hold at start through pickup, climb, transfer, descend, hold at target through release."""
    config = config or DeliveryConfig()
    t = np.asarray(t, dtype=float)
    out = [np.zeros(t.shape + (3,)) for _ in range(4)]
    out[0] = out[0] + np.asarray(config.start, dtype=float)
    for t0, t1, disp in config.segments():
        terms = blend(t, t0, t1)
        for k in range(4):
            out[k] = out[k] + np.asarray(terms[k])[..., None] * disp
    return TrajectorySample(t, *out)


# ---------------------------------------------------------------- joint schedules

@dataclass
class JointSchedule:
    """Joint-angle schedule for both arms.

    ``mode`` is ``"periodic"`` (per-joint sinusoids), ``"frozen"`` (constant
    offsets) or ``"delivery"`` (smooth moves between named poses around the
    pickup and release events). Arrays are (2, 3): rows right, left.
    """

    mode: str = "periodic"
    amplitude: np.ndarray = field(default_factory=lambda: np.array([[0.5, 0.4, 0.3]] * 2))
    frequency: np.ndarray = field(default_factory=lambda: np.full((2, 3), 1.0 / 20.0))
    phase: np.ndarray = field(default_factory=lambda: np.array([[0.0, np.pi / 2, 0.0]] * 2))
    offset: np.ndarray = field(default_factory=lambda: np.zeros((2, 3)))
    # delivery poses (same for both arms under the mirror convention)
    rest_pose: tuple[float, float, float] = (0.4, 0.8, 0.0)
    grasp_pose: tuple[float, float, float] = (-0.3, 0.6, 0.0)
    carry_pose: tuple[float, float, float] = (0.2, 0.9, 0.2)
    move_time: float = 1.5
    t_pickup: float = 3.0
    t_release: float = 15.0

    def __post_init__(self):
        if self.mode not in ("periodic", "frozen", "delivery"):
            raise TrajectoryError(f"unknown joint schedule mode {self.mode!r}")
        for name in ("amplitude", "frequency", "phase", "offset"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (2, 3)).copy()
            setattr(self, name, arr)

    @classmethod
    def frozen(cls, eta=(0.0, 0.0, 0.0)) -> "JointSchedule":
        return cls(mode="frozen", amplitude=np.zeros((2, 3)), offset=np.array([eta, eta], dtype=float))

    @classmethod
    def from_dict(cls, d: dict) -> "JointSchedule":
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "amplitude": self.amplitude.tolist(),
            "frequency": self.frequency.tolist(),
            "phase": self.phase.tolist(),
            "offset": self.offset.tolist(),
            "rest_pose": list(self.rest_pose),
            "grasp_pose": list(self.grasp_pose),
            "carry_pose": list(self.carry_pose),
            "move_time": self.move_time,
            "t_pickup": self.t_pickup,
            "t_release": self.t_release,
        }


def _delivery_angles(t, sch: JointSchedule):
    rest, grasp, carry = (np.asarray(p, dtype=float) for p in (sch.rest_pose, sch.grasp_pose, sch.carry_pose))
    m = sch.move_time
    moves = [
        (sch.t_pickup - m - 0.25, sch.t_pickup - 0.25, grasp - rest),
        (sch.t_pickup + 0.25, sch.t_pickup + 0.25 + m, carry - grasp),
        (sch.t_release - m - 0.25, sch.t_release - 0.25, grasp - carry),
        (sch.t_release + 0.25, sch.t_release + 0.25 + m, rest - grasp),
    ]
    out = [np.zeros(t.shape + (3,)) + rest, np.zeros(t.shape + (3,)), np.zeros(t.shape + (3,))]
    for t0, t1, d in moves:
        terms = blend(t, max(t0, 0.0), t1)
        for k in range(3):
            out[k] = out[k] + np.asarray(terms[k])[..., None] * d
    return out


def joint_schedule(t, schedule: JointSchedule | None = None) -> tuple[JointState, JointState]:
    """(right, left) joint states at time(s) t."""
    sch = schedule or JointSchedule()
    t = np.asarray(t, dtype=float)
    if sch.mode == "delivery":
        eta, deta, ddeta = _delivery_angles(t, sch)
        return JointState(eta, deta, ddeta), JointState(eta.copy(), deta.copy(), ddeta.copy())
    arms = []
    for side in range(2):
        if sch.mode == "frozen":
            eta = np.zeros(t.shape + (3,)) + sch.offset[side]
            arms.append(JointState(eta, np.zeros_like(eta), np.zeros_like(eta)))
            continue
        w = 2 * np.pi * sch.frequency[side]
        tt = t[..., None]
        s, c = np.sin(w * tt + sch.phase[side]), np.cos(w * tt + sch.phase[side])
        A = sch.amplitude[side]
        arms.append(JointState(sch.offset[side] + A * s, A * w * c, -A * w ** 2 * s))
    return arms[0], arms[1]
