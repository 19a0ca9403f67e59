"""Small dense-math helpers shared by the model, trainer and baselines.

Everything is float64.  Random streams come from numpy's PCG64 bit generator,
seeded explicitly, so a seed reproduces the same draws on every platform.
"""
import numpy as np
from scipy.special import expit

DTYPE = np.float64


def make_rng(seed):
    """Seeded PCG64 generator (never the global numpy state)."""
    return np.random.Generator(np.random.PCG64(seed))


def matvec(m, v):
    m = np.asarray(m, dtype=DTYPE)
    v = np.asarray(v, dtype=DTYPE)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError(f"matvec: cannot multiply {m.shape} by {v.shape}")
    return m @ v


def hadamard(a, b):
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.shape != b.shape:
        raise ValueError(f"hadamard: shape mismatch {a.shape} vs {b.shape}")
    return a * b


def sigmoid(x):
    return expit(np.asarray(x, dtype=DTYPE))


def tanh(x):
    return np.tanh(np.asarray(x, dtype=DTYPE))


def softplus(x):
    """log(1 + exp(x)) without overflow; -log(sigmoid(x)) == softplus(-x)."""
    x = np.asarray(x, dtype=DTYPE)
    return np.logaddexp(0.0, x)


def softmax(e):
    e = np.asarray(e, dtype=DTYPE)
    if e.size == 0:
        raise ValueError("softmax of an empty vector")
    ex = np.exp(e - e.max(axis=-1, keepdims=True))
    return ex / ex.sum(axis=-1, keepdims=True)


def finite_diff_grad(f, p, eps=1e-5):
    """Central-difference gradient of scalar ``f`` at the flat vector ``p``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = np.array(p, dtype=DTYPE)
    grad = np.empty_like(p)
    for i in range(p.size):
        old = p[i]
        p[i] = old + eps
        fp = f(p)
        p[i] = old - eps
        fm = f(p)
        p[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite objective while perturbing coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad
