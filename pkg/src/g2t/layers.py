"""LSTM cell built from autodiff primitives.

Gate columns are laid out [input, forget, output | candidate] so the three
sigmoid gates come from one slice.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def init_lstm(rng: np.random.Generator, n_in: int, hidden: int, prefix: str) -> dict[str, np.ndarray]:
    bias = np.zeros(4 * hidden)
    bias[hidden:2 * hidden] = 1.0
    return {
        f"{prefix}.W_x": ad.xavier_uniform(rng, (n_in, 4 * hidden)),
        f"{prefix}.W_h": ad.xavier_uniform(rng, (hidden, 4 * hidden)),
        f"{prefix}.b": bias,
    }


def project_inputs(x: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    """Input half of the gate pre-activations for a whole sequence at once."""
    return ad.add(ad.matmul(x, params[f"{prefix}.W_x"]), params[f"{prefix}.b"])


def lstm_step(x_proj: Tensor, h: Tensor, c: Tensor, W_h: Tensor) -> tuple[Tensor, Tensor]:
    hidden = W_h.shape[0]
    z = ad.add(x_proj, ad.matmul(h, W_h))
    gates = ad.sigmoid(ad.slice_(z, (..., slice(0, 3 * hidden))))
    i = ad.slice_(gates, (..., slice(0, hidden)))
    f = ad.slice_(gates, (..., slice(hidden, 2 * hidden)))
    o = ad.slice_(gates, (..., slice(2 * hidden, 3 * hidden)))
    g = ad.tanh(ad.slice_(z, (..., slice(3 * hidden, 4 * hidden))))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new
