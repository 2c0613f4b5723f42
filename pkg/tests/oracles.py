"""Independent numerical oracles shared by unit and acceptance tests."""

import numpy as np

from hatekit.classifier import batch_loss


def finite_difference_grads(params, X, y, dropout, key, h=1e-5):
    """Central-difference gradient of batch_loss for every parameter tensor.

    The dropout key pins the masks, so the loss is a deterministic function
    of the parameters.
    """
    out = {}
    for name, tensor in params.tensors().items():
        g = np.zeros_like(tensor)
        flat_t = tensor.reshape(-1)
        flat_g = g.reshape(-1)
        for k in range(flat_t.size):
            orig = flat_t[k]
            flat_t[k] = orig + h
            up = batch_loss(params, X, y, dropout, True, key)
            flat_t[k] = orig - h
            down = batch_loss(params, X, y, dropout, True, key)
            flat_t[k] = orig
            flat_g[k] = (up - down) / (2 * h)
        out[name] = g
    return out


def max_relative_error(analytic, numeric):
    worst = 0.0
    for name in analytic:
        a, f = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-4)
        worst = max(worst, float((np.abs(a - f) / denom).max()))
    return worst
