"""DNN-RISE control law, PD baseline and the gain-condition checker."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dnn import _ONE, _ZERO, DeepFeedforward, DnnParameters


class ControllerError(ValueError):
    pass


def _diag3(x) -> np.ndarray:
    return np.broadcast_to(np.asarray(x, dtype=float), (3,)).copy()


@dataclass
class ControllerGains:
    """Gains are stored as diagonals. Defaults are the hardware values."""

    k1: float = 0.69
    k2: float = 0.5
    K_s: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 14.5]))
    B1: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 4.0]))
    K_p: np.ndarray = field(default_factory=lambda: np.array([8.0, 8.0, 10.0]))
    K_d: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 13.0]))

    def __post_init__(self):
        for name in ("K_s", "B1", "K_p", "K_d"):
            setattr(self, name, _diag3(getattr(self, name)))
            if np.any(getattr(self, name) <= 0):
                raise ControllerError(f"{name} must be positive definite")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ControllerError("k1 and k2 must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerGains":
        return cls(**d)

    def to_dict(self) -> dict:
        return {"k1": self.k1, "k2": self.k2, "K_s": self.K_s.tolist(), "B1": self.B1.tolist(),
                "K_p": self.K_p.tolist(), "K_d": self.K_d.tolist()}


# ---------------------------------------------------------------- RISE term

def sgn(x, mode: str = "sgn", eps: float = 0.01):
    """Elementwise sign with sgn(0) = 0; ``mode='tanh'`` smooths it (chattering studies only)."""
    if mode == "tanh":
        return np.tanh(np.asarray(x) / eps)
    return np.sign(x)


@dataclass
class RiseState:
    mu: np.ndarray = field(default_factory=lambda: np.zeros(3))
    e2_at_start: np.ndarray | None = None
    e2_prev: np.ndarray | None = None


def rise_step(state: RiseState, e2, gains: ControllerGains, dt: float,
              sign_mode: str = "sgn", eps: float = 0.01) -> tuple[np.ndarray, RiseState]:
    """Advance mu by integrating mu_dot = -(K_s + I) r - B1 sgn(e2).

    r is rebuilt from e2 samples alone: on the interval [t_{n-1}, t_n] the
    derivative of e2 is the backward difference, so r at the two ends is
    (e2_n - e2_{n-1})/dt + k2 e2_{n-1,n}. The trapezoidal rule over the
    interval then accumulates the telescoping term exactly. The first call
    latches e2(0) and returns mu = 0.
    """
    if dt <= 0:
        raise ControllerError("dt must be positive")
    e2 = np.array(e2, dtype=float)
    if state.e2_prev is None:
        return state.mu, RiseState(np.zeros(3), e2, e2.copy())
    mu = _rise_increment(state.mu, state.e2_prev, e2, gains.K_s + 1.0, gains.k2, gains.B1, dt, sign_mode, eps)
    return mu, RiseState(mu, state.e2_at_start, e2)


def _rise_increment(mu, e2_prev, e2, ks1, k2, B1, dt, sign_mode, eps):
    # trapezoid of mu_dot over one interval; the slope terms telescope to -ks1 (e2 - e2_prev)
    if sign_mode == "sgn":
        sign_sum = np.sign(e2_prev) + np.sign(e2)
    else:
        sign_sum = sgn(e2_prev, sign_mode, eps) + sgn(e2, sign_mode, eps)
    return mu - ks1 * ((e2 - e2_prev) + (0.5 * dt * k2) * (e2_prev + e2)) - (0.5 * dt) * B1 * sign_sum


def rise_integral_form(e2_trace, dt: float, gains: ControllerGains,
                       sign_mode: str = "sgn", eps: float = 0.01) -> np.ndarray:
    """Evaluate mu(t_n) from a whole e2 trace (shape (n, 3)) with the integral form.

    mu = -(K_s + I)(e2(t) - e2(0)) - int_0^t [(K_s + I) k2 e2 + B1 sgn(e2)],
    the integral taken with the cumulative trapezoidal rule.
    """
    e2 = np.asarray(e2_trace, dtype=float)
    ks1 = gains.K_s + 1.0
    integrand = ks1 * gains.k2 * e2 + gains.B1 * sgn(e2, sign_mode, eps)
    integral = np.zeros_like(e2)
    integral[1:] = np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]), axis=0)
    return -ks1 * (e2 - e2[0]) - integral


def control(traj_a_d, mu, f_hat, m_t: float) -> np.ndarray:
    """U = mu + f_hat_d + m_t p_ddot_d."""
    return mu + f_hat + m_t * np.asarray(traj_a_d)


def actuator_command(U, F_c) -> np.ndarray:
    """U_c = U + F_c."""
    return np.asarray(U) + np.asarray(F_c)


def baseline_pd(traj_a_d, e1, e1_dot, F_c, gains: ControllerGains, m_t: float):
    """U_c = -K_p e1 - K_d e1_dot + F_c + m_t p_ddot_d. Also returns the two feedback terms."""
    prop = -gains.K_p * np.asarray(e1)
    deriv = -gains.K_d * np.asarray(e1_dot)
    return prop + deriv + np.asarray(F_c) + m_t * np.asarray(traj_a_d), prop, deriv


# ---------------------------------------------------------------- stateful controllers

@dataclass
class ControlOutput:
    U: np.ndarray
    U_c: np.ndarray
    mu: np.ndarray
    f_hat: np.ndarray
    pd_p: np.ndarray
    pd_d: np.ndarray


class DnnRiseController:
    """mu (RISE) + DNN feedforward + m_t p_ddot_d, plus F_c compensation."""

    name = "dnn-rise"

    def __init__(self, gains: ControllerGains, dnn: DnnParameters, m_t: float,
                 sign_mode: str = "sgn", eps: float = 0.01, adapt: bool = True,
                 u_max: float | None = None):
        self.gains = gains
        self.net = DeepFeedforward(dnn)
        self.m_t = m_t
        self.sign_mode, self.eps = sign_mode, eps
        self.adapt_enabled = adapt
        self.u_max = u_max
        self.rise = RiseState()
        self._zero = np.zeros(3)
        self._ks1 = gains.K_s + 1.0

    def __call__(self, traj, e1, e1_dot, e2, F_c, dt) -> ControlOutput:
        if dt <= 0:
            raise ControllerError("dt must be positive")
        rise = self.rise
        if rise.e2_prev is None:
            rise.e2_at_start = rise.e2_prev = np.array(e2, dtype=float)
        else:
            rise.mu = _rise_increment(rise.mu, rise.e2_prev, e2, self._ks1, self.gains.k2, self.gains.B1,
                                      dt, self.sign_mode, self.eps)
            rise.e2_prev = np.array(e2, dtype=float)
        mu = rise.mu
        x_d = np.concatenate((traj.v_d, _ONE))
        f_hat = self.net._forward(x_d)
        U = mu + f_hat + self.m_t * traj.a_d
        if self.adapt_enabled:
            self.net.adapt(e2, np.concatenate((traj.a_d, _ZERO)), dt)
        U_c = U + F_c
        if self.u_max is not None:
            U_c = np.clip(U_c, -self.u_max, self.u_max)
        # the input the plant receives is what the actuator command leaves after F_c
        U = U_c - F_c
        return ControlOutput(U, U_c, mu, f_hat, self._zero, self._zero)


class BaselinePD:
    name = "baseline"

    def __init__(self, gains: ControllerGains, m_t: float, u_max: float | None = None):
        self.gains = gains
        self.m_t = m_t
        self.u_max = u_max
        self._zero = np.zeros(3)
        self.net = None

    def __call__(self, traj, e1, e1_dot, e2, F_c, dt) -> ControlOutput:
        U_c, prop, deriv = baseline_pd(traj.a_d, e1, e1_dot, F_c, self.gains, self.m_t)
        if self.u_max is not None:
            U_c = np.clip(U_c, -self.u_max, self.u_max)
        U = U_c - F_c
        return ControlOutput(U, U_c, self._zero, self._zero, prop, deriv)


# ---------------------------------------------------------------- gain checker

class Verdict(str, enum.Enum):
    SATISFIED = "satisfied"
    UNSATISFIED = "unsatisfied"
    INDETERMINATE = "indeterminate"


@dataclass
class GainCertificate:
    """User-supplied estimates of the analysis constants. Checked, never derived."""

    zeta: tuple[float, ...] | None = None     # zeta_1 .. zeta_5 (zeta_5 optional)
    beta2_max: float = 0.0
    rho: float | None = None                  # estimate of rho(||z||) on the region of interest

    def __post_init__(self):
        if self.zeta is not None:
            self.zeta = tuple(float(z) for z in self.zeta)
            if len(self.zeta) not in (4, 5) or any(z <= 0 for z in self.zeta):
                raise ControllerError("zeta needs 4 or 5 positive entries")
        if self.beta2_max < 0:
            raise ControllerError("beta2_max must be non-negative")
        if self.rho is not None and self.rho <= 0:
            raise ControllerError("rho must be positive")


@dataclass
class GainReport:
    checks: dict[str, Verdict]
    details: dict[str, str]
    lam: float

    @property
    def all_satisfied(self) -> bool:
        return all(v is Verdict.SATISFIED for v in self.checks.values())

    def lines(self) -> list[str]:
        return [f"{name:<12} {verdict.value:<13} {self.details[name]}" for name, verdict in self.checks.items()]

    def to_dict(self) -> dict:
        return {"checks": {k: v.value for k, v in self.checks.items()}, "details": self.details,
                "lambda": self.lam}


def _verdict(ok: bool) -> Verdict:
    return Verdict.SATISFIED if ok else Verdict.UNSATISFIED


def check_gain_conditions(gains: ControllerGains, cert: GainCertificate | None = None) -> GainReport:
    """Evaluate the sufficient gain conditions of the stability argument.

    * beta1:  min(B1) > zeta1 + zeta2 + (zeta3 + zeta4) / k2
    * k1:     k1 > 1/2
    * k2:     k2 > beta2_max + 1
    * beta2:  beta2_max > zeta5 (B2 taken scalar, its best case)
    * K_s:    min(K_s) >= rho^2 / lambda, lambda = min(2 k1 - 1, k2 - beta2_max - 1, 1)
    """
    cert = cert or GainCertificate()
    checks: dict[str, Verdict] = {}
    details: dict[str, str] = {}
    b1_min = float(np.min(gains.B1))
    if cert.zeta is None:
        checks["beta1"] = Verdict.INDETERMINATE
        details["beta1"] = f"beta1_min={b1_min:g}; no zeta certificate supplied"
    else:
        z1, z2, z3, z4 = cert.zeta[:4]
        bound = z1 + z2 + (z3 + z4) / gains.k2
        checks["beta1"] = _verdict(b1_min > bound)
        details["beta1"] = f"beta1_min={b1_min:g} vs zeta1+zeta2+(zeta3+zeta4)/k2={bound:g}"
    checks["k1"] = _verdict(gains.k1 > 0.5)
    details["k1"] = f"k1={gains.k1:g} vs 1/2"
    need_k2 = cert.beta2_max + 1.0
    checks["k2"] = _verdict(gains.k2 > need_k2)
    details["k2"] = f"k2={gains.k2:g} vs beta2_max+1={need_k2:g}"
    if cert.zeta is None or len(cert.zeta) < 5:
        checks["beta2"] = Verdict.INDETERMINATE
        details["beta2"] = "no zeta5 estimate supplied"
    else:
        checks["beta2"] = _verdict(cert.beta2_max > cert.zeta[4])
        details["beta2"] = f"beta2_max={cert.beta2_max:g} vs zeta5={cert.zeta[4]:g}"
    lam = min(2 * gains.k1 - 1, gains.k2 - cert.beta2_max - 1, 1.0)
    ks_min = float(np.min(gains.K_s))
    if cert.rho is None:
        checks["K_s"] = Verdict.INDETERMINATE
        details["K_s"] = f"k_s_min={ks_min:g} >= rho^2/lambda requires a user rho estimate (lambda={lam:g})"
    elif lam <= 0:
        checks["K_s"] = Verdict.UNSATISFIED
        details["K_s"] = f"lambda={lam:g} <= 0: no K_s can satisfy the condition"
    else:
        need = cert.rho ** 2 / lam
        checks["K_s"] = _verdict(ks_min >= need)
        details["K_s"] = f"k_s_min={ks_min:g} vs rho^2/lambda={need:g}"
    return GainReport(checks, details, lam)
