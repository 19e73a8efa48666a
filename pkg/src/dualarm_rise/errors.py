"""Tracking-error cascade e1 -> e2 -> r and the open-loop identity check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ErrorState:
    e1: np.ndarray
    e1_dot: np.ndarray
    e2: np.ndarray
    r: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.e1, self.e2, self.r], axis=-1)


def compute_errors(p, v, a, traj, k1: float, k2: float) -> ErrorState:
    """e1 = p - p_d, e2 = e1_dot + k1 e1, r = e2_dot + k2 e2.

    ``a`` is the plant acceleration used only to form r for logging; pass
    ``None`` to skip r (it is then NaN).
    """
    e1 = np.asarray(p) - traj.p_d
    e1_dot = np.asarray(v) - traj.v_d
    e2 = e1_dot + k1 * e1
    if a is None:
        r = np.full_like(e2, np.nan)
    else:
        e2_dot = (np.asarray(a) - traj.a_d) + k1 * e1_dot
        r = e2_dot + k2 * e2
    return ErrorState(e1, e1_dot, e2, r)


def desired_feedforward(friction_fn, v_d) -> np.ndarray:
    """f_d(p_dot_d) = F_f(p_dot_d): the part of the dynamics the network learns."""
    return friction_fn(np.asarray(v_d, dtype=float))


def auxiliary_s(friction_fn, m_t: float, k1: float, k2: float, errors: ErrorState, v, v_d) -> np.ndarray:
    """S = m_t (k1 e1_dot + k2 e2) - F_f(p_dot) + F_f(p_dot_d)."""
    return m_t * (k1 * errors.e1_dot + k2 * errors.e2) - friction_fn(np.asarray(v)) + friction_fn(np.asarray(v_d))


def open_loop_residual(sample: dict, friction_fn, k1: float, k2: float) -> np.ndarray:
    """m_t r - (-m_t p_ddot_d - f_d + S - F + U); zero for a consistent sample.

    ``sample`` needs keys m_t, p, v, p_d, v_d, a_d, r, U, F. ``m_t`` and ``U``
    must be the plant's own mass and virtual input.
    """
    m_t = np.asarray(sample["m_t"], dtype=float)
    if m_t.ndim:
        m_t = m_t[..., None]
    e1 = np.asarray(sample["p"]) - np.asarray(sample["p_d"])
    e1_dot = np.asarray(sample["v"]) - np.asarray(sample["v_d"])
    errs = ErrorState(e1, e1_dot, e1_dot + k1 * e1, np.asarray(sample["r"]))
    f_d = desired_feedforward(friction_fn, sample["v_d"])
    S = auxiliary_s(friction_fn, m_t, k1, k2, errs, sample["v"], sample["v_d"])
    rhs = -m_t * np.asarray(sample["a_d"]) - f_d + S - np.asarray(sample["F"]) + np.asarray(sample["U"])
    return m_t * errs.r - rhs
