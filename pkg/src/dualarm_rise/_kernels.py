"""Compiled inner loops for the per-step arithmetic on tiny arrays.

At these sizes numpy spends almost all of its time in call overhead, so the
network pass, the weight update and the RK4 step are written as explicit
loops and compiled with numba. Weights live in one flat row-major buffer;
layer i starts at ``w_off[i]`` and has shape (widths[i] + 1, widths[i + 1]).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def dnn_forward(flat, w_off, widths, x, sigmoid_kind, pre, sig, dsig):
    """Fill ``pre`` with every layer output Phi_j and ``sig``/``dsig`` with the activations.

    Phi_j occupies pre[u_off[j]:u_off[j] + widths[j + 1]] with u_off the
    running sum of widths[1:]. The activation of Phi_{j-1} shares its slot.
    Returns the offset of the network output in ``pre``.
    """
    n_layers = widths.shape[0] - 1
    u_in = 0
    u_out = 0
    for j in range(n_layers):
        n_in = widths[j]
        n_out = widths[j + 1]
        base = w_off[j]
        for c in range(n_out):
            acc = 0.0
            for r in range(n_in):
                if j == 0:
                    inp = x[r]
                else:
                    inp = sig[u_in + r]
                acc += inp * flat[base + r * n_out + c]
            bias = x[n_in] if j == 0 else 1.0
            acc += bias * flat[base + n_in * n_out + c]
            pre[u_out + c] = acc
        if j < n_layers - 1:
            for c in range(n_out):
                u = pre[u_out + c]
                if sigmoid_kind:
                    s = 1.0 / (1.0 + math.exp(-u))
                    sig[u_out + c] = s
                    dsig[u_out + c] = s * (1.0 - s)
                else:
                    sig[u_out + c] = u
                    dsig[u_out + c] = 1.0
        u_in = u_out
        u_out += n_out
    return u_in


@njit(cache=True)
def dnn_adapt(flat, w_off, widths, gains, bounds, dsig, x_dot, e2, dt, lead, trail, scratch, norms):
    """One Euler step of V_i_dot = -Gamma_i a_i b_i^T with radial projection.

    ``gains`` holds the diagonals of every Gamma_i back to back (the same
    layout as ``lead``). Writes the new weights into ``flat`` only if every
    entry is finite; returns False and leaves ``flat`` untouched otherwise.
    """
    n_layers = widths.shape[0] - 1
    # a_0 = x_dot; a_i = [dsigma_i * (V_{i-1}^T a_{i-1}), 0]
    a_off = 0
    for r in range(widths[0] + 1):
        lead[r] = x_dot[r]
    u_off = 0
    for i in range(1, n_layers):
        n_in = widths[i - 1]
        n_out = widths[i]
        base = w_off[i - 1]
        nxt = a_off + n_in + 1
        for c in range(n_out):
            acc = 0.0
            for r in range(n_in + 1):
                acc += lead[a_off + r] * flat[base + r * n_out + c]
            lead[nxt + c] = dsig[u_off + c] * acc
        lead[nxt + n_out] = 0.0
        a_off = nxt
        u_off += n_out
    # b_k = e2; b_i = dsigma_{i+1} * (V_{i+1} b_{i+1})[:-1]; b_i sits at the Phi_i slot
    t_off = 0
    for i in range(n_layers - 1):
        t_off += widths[i + 1]
    for c in range(widths[n_layers]):
        trail[t_off + c] = e2[c]
    for i in range(n_layers - 2, -1, -1):
        n_rows = widths[i + 1]
        n_cols = widths[i + 2]
        base = w_off[i + 1]
        prev = t_off - n_rows
        for r in range(n_rows):
            acc = 0.0
            for c in range(n_cols):
                acc += flat[base + r * n_cols + c] * trail[t_off + c]
            trail[prev + r] = dsig[prev + r] * acc
        t_off = prev
    # update, project, then commit
    a_off = 0
    t_off = 0
    finite = True
    for i in range(n_layers):
        n_rows = widths[i] + 1
        n_cols = widths[i + 1]
        base = w_off[i]
        norm2 = 0.0
        for r in range(n_rows):
            g = -dt * gains[a_off + r] * lead[a_off + r]
            for c in range(n_cols):
                w = flat[base + r * n_cols + c] + g * trail[t_off + c]
                scratch[base + r * n_cols + c] = w
                norm2 += w * w
        if not math.isfinite(norm2):
            finite = False
            break
        if norm2 > bounds[i]:
            scale = math.sqrt(bounds[i]) / math.sqrt(norm2)
            for q in range(base, base + n_rows * n_cols):
                scratch[q] *= scale
            norm2 = bounds[i]
        norms[i] = math.sqrt(norm2)
        a_off += n_rows
        t_off += n_cols
    if finite:
        for q in range(flat.shape[0]):
            flat[q] = scratch[q]
    return finite


@njit(cache=True)
def rk4_linear_friction(p, v, U, F0, F1, F2, m0, m1, m2, coeffs, dt):
    """RK4 for m p_ddot = U - diag(coeffs) p_dot - F(t); returns (p_new, v_new)."""
    p_new = np.empty(3)
    v_new = np.empty(3)
    h = 0.5 * dt
    for k in range(3):
        c = coeffs[k]
        vk = v[k]
        a1 = (U[k] - c * vk - F0[k]) / m0
        v2 = vk + h * a1
        a2 = (U[k] - c * v2 - F1[k]) / m1
        v3 = vk + h * a2
        a3 = (U[k] - c * v3 - F1[k]) / m1
        v4 = vk + dt * a3
        a4 = (U[k] - c * v4 - F2[k]) / m2
        p_new[k] = p[k] + dt / 6.0 * (vk + 2 * v2 + 2 * v3 + v4)
        v_new[k] = vk + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    return p_new, v_new
