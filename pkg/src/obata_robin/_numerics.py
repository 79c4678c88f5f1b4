import numpy as np


def rk4_step(field, y, h):
    k1 = field(y)
    k2 = field(y + 0.5 * h * k1)
    k3 = field(y + 0.5 * h * k2)
    k4 = field(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def normalize_rows(y):
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def richardson_central(fun, h):
    """Central difference of ``fun`` at 0 with one Richardson step (ratio 2)."""
    d1 = (fun(h) - fun(-h)) / (2.0 * h)
    d2 = (fun(h / 2) - fun(-h / 2)) / h
    return (4.0 * d2 - d1) / 3.0
