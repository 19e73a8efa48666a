"""Forward/differential kinematics and CoM geometry of the two 3-DOF arms.

Frame conventions (body frame B: x forward, y left, z up):

* the right arm is mounted at ``mount_offset`` (default ``[0, -0.08, -0.10]``),
  the left arm at its y-mirror image;
* joint 1 is the shoulder pitch about body y, joint 2 the elbow pitch about the
  (parallel) local y axis, joint 3 the elbow roll about the distal link axis;
* at ``eta = 0`` the whole chain hangs straight down (-z_B).

Standard DH rows ``(a, alpha, d, theta_offset)`` for the right arm::

    1: (L1, 0,    0,       0)
    2: (0,  pi/2, 0,       pi/2)
    3: (0,  0,    L2 + L3, 0)

with the fixed base rotation mapping DH x0 -> -z_B and z0 -> +y_B.

The left arm with joint vector ``eta`` is the reflection ``M = diag(1, -1, 1)``
of the right arm with the same ``eta``: positions map by ``M p``, orientations
by ``M Phi M`` and angular velocities by ``-M w`` (pseudovector).

All functions accept batched joint vectors with shape ``(..., 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIRROR = np.diag([1.0, -1.0, 1.0])

# DH x0 = -z_B, y0 = -x_B, z0 = +y_B
BASE_ROTATION = np.array([[0.0, -1.0, 0.0],
                          [0.0, 0.0, 1.0],
                          [-1.0, 0.0, 0.0]])


class KinematicsError(ValueError):
    pass


@dataclass(frozen=True)
class ArmGeometry:
    """Geometry and point-mass model of one arm (the other is its mirror)."""

    link_lengths: tuple[float, float, float] = (0.15, 0.05, 0.17)
    # servo / claw masses (kg): shoulder pitch, elbow pitch, elbow roll, claw
    joint_masses: tuple[float, float, float, float] = (0.165, 0.082, 0.082, 0.0546)
    mount_offset: tuple[float, float, float] = (0.0, -0.08, -0.10)
    dh_table: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        lengths = np.asarray(self.link_lengths, dtype=float)
        masses = np.asarray(self.joint_masses, dtype=float)
        if lengths.shape != (3,) or masses.shape != (4,):
            raise KinematicsError("need 3 link lengths and 4 joint masses")
        if not np.all(np.isfinite(lengths)) or np.any(lengths <= 0):
            raise KinematicsError(f"link lengths must be positive, got {lengths}")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise KinematicsError(f"joint masses must be positive, got {masses}")
        if np.asarray(self.mount_offset, dtype=float).shape != (3,):
            raise KinematicsError("mount_offset must be a 3-vector")
        L1, L2, L3 = lengths
        default_dh = np.array([[L1, 0.0, 0.0, 0.0],
                               [0.0, np.pi / 2, 0.0, np.pi / 2],
                               [0.0, 0.0, L2 + L3, 0.0]])
        dh = default_dh if self.dh_table is None else np.asarray(self.dh_table, dtype=float)
        if dh.shape != (3, 4):
            raise KinematicsError(f"dh_table must have exactly 3 rows of (a, alpha, d, theta0), got {dh.shape}")
        object.__setattr__(self, "dh_table", dh)

    @property
    def arm_mass(self) -> float:
        return float(sum(self.joint_masses))

    @classmethod
    def from_dict(cls, d: dict) -> "ArmGeometry":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k != "dh_table"}
        if d.get("dh_table") is not None:
            kw["dh_table"] = np.asarray(d["dh_table"], dtype=float)
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "link_lengths": list(self.link_lengths),
            "joint_masses": list(self.joint_masses),
            "mount_offset": list(self.mount_offset),
            "dh_table": self.dh_table.tolist(),
        }


@dataclass
class JointState:
    eta: np.ndarray
    eta_dot: np.ndarray
    eta_ddot: np.ndarray

    def __post_init__(self):
        for name in ("eta", "eta_dot", "eta_ddot"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape[-1] != 3 or not np.all(np.isfinite(arr)):
                raise KinematicsError(f"{name} must be finite with trailing dimension 3")
            setattr(self, name, arr)

    @classmethod
    def at_rest(cls, eta=(0.0, 0.0, 0.0)) -> "JointState":
        return cls(np.asarray(eta, dtype=float), np.zeros(3), np.zeros(3))


@dataclass
class Pose:
    position: np.ndarray
    orientation: np.ndarray

    def is_rotation(self, tol: float = 1e-9) -> bool:
        R = self.orientation
        return bool(np.linalg.norm(R.T @ R - np.eye(3)) < tol and abs(np.linalg.det(R) - 1.0) < tol)


def skew(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    S = np.zeros(w.shape[:-1] + (3, 3))
    S[..., 0, 1], S[..., 0, 2] = -w[..., 2], w[..., 1]
    S[..., 1, 0], S[..., 1, 2] = w[..., 2], -w[..., 0]
    S[..., 2, 0], S[..., 2, 1] = -w[..., 1], w[..., 0]
    return S


def _check_eta(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if eta.shape[-1] != 3:
        raise KinematicsError(f"joint vector must have trailing dimension 3, got shape {eta.shape}")
    if not np.all(np.isfinite(eta)):
        raise KinematicsError(f"non-finite joint vector: {eta}")
    return eta


def _dh_transform(a, alpha, d, theta):
    """Batched standard DH transform Rz(theta) Tz(d) Tx(a) Rx(alpha)."""
    theta = np.asarray(theta, dtype=float)
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    T = np.zeros(theta.shape + (4, 4))
    T[..., 0, 0], T[..., 0, 1], T[..., 0, 2], T[..., 0, 3] = ct, -st * ca, st * sa, a * ct
    T[..., 1, 0], T[..., 1, 1], T[..., 1, 2], T[..., 1, 3] = st, ct * ca, -ct * sa, a * st
    T[..., 2, 1], T[..., 2, 2], T[..., 2, 3] = sa, ca, d
    T[..., 3, 3] = 1.0
    return T


def _frames(geom: ArmGeometry, eta: np.ndarray):
    """Right-arm frame origins o_0..o_3 and joint axes z_0..z_2 in the body frame."""
    T = np.zeros(eta.shape[:-1] + (4, 4))
    T[..., :3, :3] = BASE_ROTATION
    T[..., :3, 3] = geom.mount_offset
    T[..., 3, 3] = 1.0
    origins = [T[..., :3, 3]]
    axes = [T[..., :3, 2]]
    rotations = [T[..., :3, :3]]
    for i in range(3):
        a, alpha, d, theta0 = geom.dh_table[i]
        T = T @ _dh_transform(a, alpha, d, eta[..., i] + theta0)
        origins.append(T[..., :3, 3])
        axes.append(T[..., :3, 2])
        rotations.append(T[..., :3, :3])
    return origins, axes, rotations


def _mass_points(geom: ArmGeometry, origins, axes):
    """Body-frame positions of the four point masses and the link each rides on.

    The elbow-roll servo sits L2 along the roll axis from the elbow.
    """
    L2 = geom.link_lengths[1]
    roll_servo = origins[2] + L2 * axes[2]
    return [(origins[0], 0), (origins[1], 1), (roll_servo, 2), (origins[3], 3)]


def _apply_side(side: str, position, orientation=None):
    if side == "right":
        return position, orientation
    if side != "left":
        raise KinematicsError(f"side must be 'left' or 'right', got {side!r}")
    pos = position * np.array([1.0, -1.0, 1.0])
    if orientation is None:
        return pos, None
    return pos, MIRROR @ orientation @ MIRROR


def forward_kinematics(geom: ArmGeometry, eta, side: str = "right") -> Pose:
    eta = _check_eta(eta)
    origins, _, rotations = _frames(geom, eta)
    pos, rot = _apply_side(side, origins[3], rotations[3])
    return Pose(pos, rot)


def world_pose(uav, body_pose: Pose) -> Pose:
    """End-effector pose in the world frame: p + R p_B, R Phi_B."""
    R = np.asarray(uav.R, dtype=float)
    return Pose(np.asarray(uav.p) + R @ body_pose.position, R @ body_pose.orientation)


def jacobian(geom: ArmGeometry, eta, side: str = "right") -> np.ndarray:
    """6x3 geometric Jacobian mapping eta_dot to stacked (v_B, w_B) of the tool point."""
    eta = _check_eta(eta)
    origins, axes, _ = _frames(geom, eta)
    tip = origins[3]
    Jv = np.stack([np.cross(axes[i], tip - origins[i]) for i in range(3)], axis=-1)
    Jw = np.stack(axes[:3], axis=-1)
    if side == "left":
        Jv = MIRROR @ Jv
        Jw = -(MIRROR @ Jw)
    elif side != "right":
        raise KinematicsError(f"side must be 'left' or 'right', got {side!r}")
    return np.concatenate([Jv, Jw], axis=-2)


def end_effector_velocity(uav, geom: ArmGeometry, eta, eta_dot, side: str = "right"):
    """World-frame linear and angular velocity of the end effector."""
    pose = forward_kinematics(geom, eta, side)
    twist = jacobian(geom, eta, side) @ np.asarray(eta_dot, dtype=float)
    v_b, w_b = twist[:3], twist[3:]
    R = np.asarray(uav.R, dtype=float)
    omega = np.asarray(uav.omega, dtype=float)
    v_e = np.asarray(uav.v, dtype=float) + R @ (np.cross(omega, pose.position) + v_b)
    w_e = R @ (omega + w_b)
    return v_e, w_e


def _arm_point_kinematics(geom: ArmGeometry, eta, eta_dot, eta_ddot):
    """Right-arm mass-point positions, velocities (J qd) and accelerations (J qdd + Jdot qd).

    Each point q on link l moves with
        J_q[:, i] = z_i x (q - o_i)                                   (i < l)
        Jdot_q[:, i] = (w_i x z_i) x (q - o_i) + z_i x (qdot - odot_i)
    where w_i is the angular velocity of frame i (sum of z_j etadot_j, j < i).
    """
    origins, axes, _ = _frames(geom, eta)
    points = _mass_points(geom, origins, axes)
    z = axes[:3]
    # angular velocity of frame i (before joint i+1)
    w = [np.zeros_like(eta)]
    for i in range(2):
        w.append(w[-1] + z[i] * eta_dot[..., i:i + 1])
    zdot = [np.cross(w[i], z[i]) for i in range(3)]

    def jac(q, link):
        cols = [np.cross(z[i], q - origins[i]) if i < link else np.zeros_like(q) for i in range(3)]
        return np.stack(cols, axis=-1)

    def vel(q, link):
        return np.einsum("...ij,...j->...i", jac(q, link), eta_dot)

    odot = [vel(origins[i], i) for i in range(3)]
    out = []
    for q, link in points:
        J = jac(q, link)
        qdot = np.einsum("...ij,...j->...i", J, eta_dot)
        cols = []
        for i in range(3):
            if i < link:
                cols.append(np.cross(zdot[i], q - origins[i]) + np.cross(z[i], qdot - odot[i]))
            else:
                cols.append(np.zeros_like(q))
        Jdot = np.stack(cols, axis=-1)
        qddot = (np.einsum("...ij,...j->...i", J, eta_ddot)
                 + np.einsum("...ij,...j->...i", Jdot, eta_dot))
        out.append((q, qdot, qddot, J))
    return out


def arm_mass_moments(geom: ArmGeometry, right: JointState, left: JointState):
    """Sum of m_i q_i, m_i qdot_i, m_i qddot_i over both arms (body frame)."""
    m = np.asarray(geom.joint_masses, dtype=float)
    flip = np.array([1.0, -1.0, 1.0])
    first = second = third = 0.0
    for js, sign in ((right, None), (left, flip)):
        pts = _arm_point_kinematics(geom, js.eta, js.eta_dot, js.eta_ddot)
        s0 = sum(m[k] * pts[k][0] for k in range(4))
        s1 = sum(m[k] * pts[k][1] for k in range(4))
        s2 = sum(m[k] * pts[k][2] for k in range(4))
        if sign is not None:
            s0, s1, s2 = s0 * sign, s1 * sign, s2 * sign
        first = first + s0
        second = second + s1
        third = third + s2
    return first, second, third


def com_offset(geom: ArmGeometry, eta_right, eta_left, total_mass: float = 4.85) -> np.ndarray:
    """Body-frame CoM offset r_oc contributed by both arms.

    Normalised by the total system mass, so that ``total_mass * r_oc`` is the
    first mass moment of the arms about the body origin.
    """
    if total_mass <= 0:
        raise KinematicsError("total mass must be positive")
    eta_right, eta_left = _check_eta(eta_right), _check_eta(eta_left)
    zero = np.zeros_like(eta_right)
    s0, _, _ = arm_mass_moments(geom, JointState(eta_right, zero, zero),
                                JointState(eta_left, np.zeros_like(eta_left), np.zeros_like(eta_left)))
    return s0 / total_mass


def com_derivatives(geom: ArmGeometry, right: JointState, left: JointState,
                    total_mass: float = 4.85):
    """Analytic (r_oc_dot, r_oc_ddot) from the CoM Jacobian and its time derivative."""
    if total_mass <= 0:
        raise KinematicsError("total mass must be positive")
    _, s1, s2 = arm_mass_moments(geom, right, left)
    return s1 / total_mass, s2 / total_mass


def com_signals(geom: ArmGeometry, right: JointState, left: JointState, total_mass: float = 4.85):
    """(r_oc, r_oc_dot, r_oc_ddot) in one pass; batched over leading dimensions."""
    s0, s1, s2 = arm_mass_moments(geom, right, left)
    return s0 / total_mass, s1 / total_mass, s2 / total_mass


def claw_midpoint(geom: ArmGeometry, right: JointState, left: JointState):
    """Midpoint of the two tool points with its velocity and acceleration (payload location)."""
    flip = np.array([1.0, -1.0, 1.0])
    pr = _arm_point_kinematics(geom, right.eta, right.eta_dot, right.eta_ddot)[3]
    pl = _arm_point_kinematics(geom, left.eta, left.eta_dot, left.eta_ddot)[3]
    return tuple(0.5 * (pr[k] + flip * pl[k]) for k in range(3))
