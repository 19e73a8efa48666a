"""Deep feedforward network f_hat_d(x_d) with per-layer online adaptation.

Layer i (i = 0..k) holds a weight matrix V_i of shape (N_i + 1, N_{i+1}).
Evaluation is recursive::

    Phi_0 = V_0^T x_d,   Phi_j = V_j^T phi_j(Phi_{j-1}),   f_hat = Phi_k

with phi_j the elementwise activation followed by a trailing bias 1. The
activation gradient phi'_j is (N_j + 1) x N_j: diag(sigma') over a zero row.

The adaptation law for layer i is the outer product

    V_i_dot = -Gamma_i a_i b_i^T,
    a_0 = x_d_dot,  a_i = phi'_i V_{i-1}^T a_{i-1},
    b_k = e2,       b_i = phi'_{i+1}^T V_{i+1} b_{i+1},

i.e. the leading chain phi'_i V_{i-1}^T ... phi'_1 V_0^T x_d_dot times the
trailing chain e2^T V_k^T phi'_k ... V_{i+1}^T phi'_{i+1}, integrated by
explicit Euler and projected radially onto ||V_i||_F <= sqrt(Vbar_i).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from ._kernels import dnn_adapt, dnn_forward

_ONE = np.ones(1)
_ZERO = np.zeros(1)

log = logging.getLogger(__name__)


class DnnError(ValueError):
    pass


def sigmoid(u):
    return 1.0 / (1.0 + np.exp(-u))


def activation(u, kind: str = "sigmoid") -> np.ndarray:
    """phi(u) = [sigma(u), 1]."""
    u = np.asarray(u, dtype=float)
    s = sigmoid(u) if kind == "sigmoid" else u
    return np.append(s, 1.0)


def activation_gradient(u, kind: str = "sigmoid") -> np.ndarray:
    """(N+1) x N matrix: diag(sigma'(u)) stacked over a zero bias row."""
    d = _dsigma(np.asarray(u, dtype=float), kind)
    return np.vstack([np.diag(d), np.zeros((1, d.size))])


def _dsigma(u, kind):
    if kind == "sigmoid":
        s = sigmoid(u)
        return s * (1.0 - s)
    if kind == "linear":
        return np.ones_like(u)
    raise DnnError(f"unknown activation {kind!r}")


def make_input(v_d, a_d) -> tuple[np.ndarray, np.ndarray]:
    """x_d = [p_dot_d, 1], x_d_dot = [p_ddot_d, 0]."""
    return np.append(np.asarray(v_d, dtype=float), 1.0), np.append(np.asarray(a_d, dtype=float), 0.0)


@dataclass
class DnnParameters:
    layer_widths: list[int]
    weights: list[np.ndarray]
    frobenius_bounds: list[float]
    adaptation_gains: list[np.ndarray]   # diagonals of Gamma_i, length N_i + 1
    activation: str = "sigmoid"

    def __post_init__(self):
        widths = [int(n) for n in self.layer_widths]
        if len(widths) < 2 or any(n <= 0 for n in widths):
            raise DnnError(f"invalid layer widths {widths}")
        self.layer_widths = widths
        n_layers = len(widths) - 1
        if len(self.weights) != n_layers:
            raise DnnError(f"expected {n_layers} weight matrices, got {len(self.weights)}")
        self.weights = [np.array(W, dtype=float) for W in self.weights]
        for i, W in enumerate(self.weights):
            if W.shape != (widths[i] + 1, widths[i + 1]):
                raise DnnError(f"V_{i} has shape {W.shape}, expected {(widths[i] + 1, widths[i + 1])}")
        bounds = np.broadcast_to(np.asarray(self.frobenius_bounds, dtype=float), (n_layers,))
        if np.any(bounds <= 0):
            raise DnnError("Frobenius bounds must be positive")
        self.frobenius_bounds = [float(b) for b in bounds]
        gains = []
        for i, g in enumerate(self.adaptation_gains):
            g = np.broadcast_to(np.asarray(g, dtype=float), (widths[i] + 1,)).copy()
            if np.any(g <= 0):
                raise DnnError(f"Gamma_{i} must be positive definite")
            gains.append(g)
        if len(gains) != n_layers:
            raise DnnError(f"expected {n_layers} adaptation gains, got {len(gains)}")
        self.adaptation_gains = gains
        if self.activation not in ("sigmoid", "linear"):
            raise DnnError(f"unknown activation {self.activation!r}")

    @property
    def depth(self) -> int:
        """k: number of hidden layers."""
        return len(self.layer_widths) - 2

    @classmethod
    def initialize(cls, layer_widths=(3, 4, 4, 4, 3), gamma=2e6, frobenius_bound=100.0,
                   init_range=0.1, seed=0, activation="sigmoid") -> "DnnParameters":
        """Uniform random weights in [-init_range, init_range] from a seeded generator."""
        rng = np.random.default_rng(seed)
        widths = list(layer_widths)
        weights = [rng.uniform(-init_range, init_range, size=(widths[i] + 1, widths[i + 1]))
                   for i in range(len(widths) - 1)]
        gammas = np.broadcast_to(np.asarray(gamma, dtype=float), (len(widths) - 1,))
        gains = [np.full(widths[i] + 1, gammas[i]) for i in range(len(widths) - 1)]
        return cls(widths, weights, [frobenius_bound] * (len(widths) - 1), gains, activation)

    def frobenius_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(W) for W in self.weights])


class ForwardCache:
    """Intermediate values of the last forward pass."""

    __slots__ = ("x_d", "Phi", "phi", "dsigma")

    def __init__(self, x_d, Phi, phi, dsigma):
        self.x_d = x_d
        self.Phi = Phi          # Phi_0 .. Phi_k
        self.phi = phi          # phi_1 .. phi_k (augmented), index 0 unused
        self.dsigma = dsigma    # diagonal of phi'_j, index 0 unused

    @property
    def output(self) -> np.ndarray:
        return self.Phi[-1]


def reference_forward(weights, x_d, kind: str = "sigmoid") -> ForwardCache:
    """Plain numpy forward pass; the compiled path is checked against it."""
    x_d = np.asarray(x_d, dtype=float)
    Phi = [x_d @ weights[0]]
    phi: list = [None]
    dsig: list = [None]
    for j in range(1, len(weights)):
        u = Phi[-1]
        if kind == "sigmoid":
            s = sigmoid(u)
            d = s * (1.0 - s)
        else:
            s, d = u, np.ones_like(u)
        ph = np.concatenate((s, _ONE))
        phi.append(ph)
        dsig.append(d)
        Phi.append(ph @ weights[j])
    return ForwardCache(x_d, Phi, phi, dsig)


def reference_updates(weights, cache: ForwardCache, e2, x_d_dot, gains) -> list[np.ndarray]:
    """Unprojected V_i_dot for every layer, from the leading and trailing chains."""
    k = len(weights) - 1
    a = [np.asarray(x_d_dot, dtype=float)]
    for i in range(1, k + 1):
        a.append(np.concatenate((cache.dsigma[i] * (a[-1] @ weights[i - 1]), _ZERO)))
    b = [None] * (k + 1)
    b[k] = np.asarray(e2, dtype=float)
    for i in range(k - 1, -1, -1):
        b[i] = cache.dsigma[i + 1] * (weights[i + 1] @ b[i + 1])[:-1]
    return [(-gains[i] * a[i])[:, None] * b[i] for i in range(k + 1)]


class DeepFeedforward:
    """Owns a DnnParameters store and advances it; one caller per instance.

    The weight matrices are views into one flat buffer that the compiled
    kernels update in place. Assigning new matrices to ``params.weights`` is
    picked up on the next call.
    """

    def __init__(self, params: DnnParameters):
        self.params = params
        self.frozen_steps = 0
        widths = np.asarray(params.layer_widths, dtype=np.int64)
        self._widths = widths
        sizes = (widths[:-1] + 1) * widths[1:]
        self._w_off = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
        self._flat = np.zeros(int(sizes.sum()))
        self._scratch = np.zeros_like(self._flat)
        self._gains = np.concatenate(params.adaptation_gains)
        self._bounds = np.asarray(params.frobenius_bounds, dtype=float)
        n_pre = int(widths[1:].sum())
        self._pre = np.zeros(n_pre)
        self._sig = np.zeros(n_pre)
        self._dsig = np.zeros(n_pre)
        self._trail = np.zeros(n_pre)
        self._lead = np.zeros(int((widths[:-1] + 1).sum()))
        self._out_off = n_pre - int(widths[-1])
        self._sigmoid = params.activation == "sigmoid"
        self._x_d: np.ndarray | None = None
        self._views: list[np.ndarray] = []
        self._bind()
        self.norms = params.frobenius_norms()

    def _bind(self) -> None:
        for i, W in enumerate(self.params.weights):
            n = W.size
            self._flat[self._w_off[i]:self._w_off[i] + n] = W.ravel()
        self._views = [self._flat[self._w_off[i]:self._w_off[i] + W.size].reshape(W.shape)
                       for i, W in enumerate(self.params.weights)]
        self.params.weights = list(self._views)

    def _sync(self) -> None:
        w = self.params.weights
        if len(w) != len(self._views) or any(a is not b for a, b in zip(w, self._views)):
            DnnParameters(self.params.layer_widths, w, self.params.frobenius_bounds,
                          self.params.adaptation_gains, self.params.activation)
            self.params.weights = [np.asarray(W, dtype=float) for W in w]
            self._bind()

    @property
    def weights(self) -> list[np.ndarray]:
        return self.params.weights

    def forward(self, x_d) -> np.ndarray:
        x_d = np.asarray(x_d, dtype=float)
        if x_d.shape != (self.params.layer_widths[0] + 1,):
            raise DnnError(f"input must have length {self.params.layer_widths[0] + 1}")
        return self._forward(x_d)

    def _forward(self, x_d) -> np.ndarray:
        self._sync()
        self._x_d = x_d
        off = dnn_forward(self._flat, self._w_off, self._widths, x_d, self._sigmoid,
                          self._pre, self._sig, self._dsig)
        return self._pre[off:].copy()

    @property
    def cache(self) -> ForwardCache | None:
        """The last forward pass, rebuilt as per-layer arrays."""
        if self._x_d is None:
            return None
        widths = self.params.layer_widths
        Phi, phi, dsig = [], [None], [None]
        off = 0
        for j in range(len(widths) - 1):
            n = widths[j + 1]
            Phi.append(self._pre[off:off + n].copy())
            if j < len(widths) - 2:
                phi.append(np.concatenate((self._sig[off:off + n], _ONE)))
                dsig.append(self._dsig[off:off + n].copy())
            off += n
        return ForwardCache(self._x_d, Phi, phi, dsig)

    def ideal_time_derivative(self, x_d_dot) -> np.ndarray:
        """V_k^T phi'_k ... V_1^T phi'_1 V_0^T x_d_dot with weights frozen."""
        cache = self.cache
        if cache is None:
            raise DnnError("forward() must be called first")
        W = self.params.weights
        a = np.asarray(x_d_dot, dtype=float)
        for i in range(1, len(W)):
            a = np.concatenate((cache.dsigma[i] * (a @ W[i - 1]), _ZERO))
        return a @ W[-1]

    def raw_updates(self, e2, x_d_dot) -> list[np.ndarray]:
        """Unprojected V_i_dot for every layer (numpy path)."""
        cache = self.cache
        if cache is None:
            raise DnnError("forward() must be called first")
        return reference_updates(self.params.weights, cache, e2, x_d_dot, self.params.adaptation_gains)

    def adapt(self, e2, x_d_dot, dt: float) -> bool:
        """Euler step of the adaptation law plus projection. Returns False if frozen."""
        if self._x_d is None:
            raise DnnError("forward() must be called first")
        self._sync()
        norms = np.empty(len(self._views))
        ok = dnn_adapt(self._flat, self._w_off, self._widths, self._gains, self._bounds, self._dsig,
                       np.asarray(x_d_dot, dtype=float), np.asarray(e2, dtype=float), dt,
                       self._lead, self._trail, self._scratch, norms)
        if not ok:
            self.frozen_steps += 1
            log.warning("non-finite weight update; weights frozen for this step")
            return False
        self.norms = norms
        return True


def project(W: np.ndarray, vbar: float) -> np.ndarray:
    """Radial projection onto the ball ||W||_F <= sqrt(vbar)."""
    norm2 = float(np.sum(W * W))
    if norm2 <= vbar:
        return W
    return W * (np.sqrt(vbar) / np.sqrt(norm2))


def weight_error_norms(weights, reference) -> np.ndarray:
    """||V_i - V_hat_i||_F per layer."""
    if len(weights) != len(reference):
        raise DnnError("layer count mismatch")
    out = []
    for W, V in zip(weights, reference):
        W, V = np.asarray(W), np.asarray(V)
        if W.shape != V.shape:
            raise DnnError(f"shape mismatch {W.shape} vs {V.shape}")
        out.append(np.linalg.norm(V - W))
    return np.array(out)


def save_weights(path, weights) -> None:
    """Flat layer-tagged text format: one ``layer,row,col,value`` line per entry."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "row", "col", "value"])
        for i, W in enumerate(weights):
            for (r, c), val in np.ndenumerate(np.asarray(W)):
                w.writerow([i, r, c, repr(float(val))])


def load_weights(path) -> list[np.ndarray]:
    entries: dict[int, list[tuple[int, int, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            entries.setdefault(int(row["layer"]), []).append((int(row["row"]), int(row["col"]), float(row["value"])))
    weights = []
    for i in sorted(entries):
        rows = max(e[0] for e in entries[i]) + 1
        cols = max(e[1] for e in entries[i]) + 1
        W = np.zeros((rows, cols))
        for r, c, v in entries[i]:
            W[r, c] = v
        weights.append(W)
    return weights
