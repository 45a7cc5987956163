"""Independent numpy reference for the frozen values in the C++ tests.

Re-implements the generator and the per-column calibration update directly
from their definitions; nothing here calls into the C++ library.
"""
import math

import numpy as np

M64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & M64
        self.spare = None

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & M64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
        return z ^ (z >> 31)

    def uniform01(self):
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self):
        if self.spare is not None:
            v, self.spare = self.spare, None
            return v
        while True:
            u = 2.0 * self.uniform01() - 1.0
            v = 2.0 * self.uniform01() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        f = math.sqrt(-2.0 * math.log(s) / s)
        self.spare = v * f
        return u * f


def derive_seed(parent, tag):
    g = SplitMix64(parent ^ ((tag * 0xD1B54A32D192ED03) & M64))
    g.next_u64()
    return g.next_u64()


def gen_normal(seed, rows, cols):
    g = SplitMix64(seed)
    return np.array([g.normal() for _ in range(rows * cols)]).reshape(rows, cols)


def gen_correlated(seed, n, k, decay):
    z = gen_normal(seed, n, k)
    a = np.array([[decay ** (i - j) if j <= i else 0.0 for j in range(n)] for i in range(n)])
    return a @ z


def damped_hessian(x, ratio):
    h = x @ x.T
    return h + ratio * np.mean(np.diag(h)) * np.eye(h.shape[0])


def inv_chol(h):
    return np.linalg.cholesky(np.linalg.inv(h))


def p_eq16(dx, x, l):
    n = x.shape[0]
    p = np.zeros((n, n))
    g = dx @ x.T
    for q in range(n - 1):
        s = l[q + 1:, q + 1:]
        p[q, q + 1:] = g[q, q + 1:] @ s @ s.T
    return p


def round_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def minmax_grid(w, bits):
    lo = np.minimum(w.min(axis=1), 0.0)
    hi = np.maximum(w.max(axis=1), 0.0)
    maxq = 2**bits - 1
    scale = (hi - lo) / maxq
    zero = np.clip(round_away(-lo / scale), 0, maxq)
    return scale, zero, maxq


def quant(col, scale, zero, maxq):
    q = np.clip(round_away(col / scale + zero), 0, maxq)
    return (q - zero) * scale


def eliminate(hinv, q):
    out = hinv - np.outer(hinv[:, q], hinv[q, :]) / hinv[q, q]
    out[q, :] = 0.0
    out[:, q] = 0.0
    return out


def per_column(w, x, xt, bits, second, ratio=0.01):
    """Per-column update with explicitly eliminated inverse Hessians."""
    w = w.copy()
    n = w.shape[1]
    scale, zero, maxq = minmax_grid(w, bits)
    hinv = np.linalg.inv(damped_hessian(x, ratio))
    dxxt = (xt - x) @ x.T
    for q in range(n):
        col = w[:, q].copy()
        qv = quant(col, scale, zero, maxq)
        hq = eliminate(hinv, q)
        upd = np.outer((qv - col) / hinv[q, q], hinv[q, :])
        if second:
            upd += np.outer(col, dxxt[q, :] @ hq)
        w += upd
        w[:, q] = qv
        hinv = hq
    return w


def fmt(a):
    return ", ".join(repr(float(v)) for v in np.asarray(a).ravel())


if __name__ == "__main__":
    print("gen_normal(42, 2, 3):", fmt(gen_normal(42, 2, 3)))
    print("derive_seed(17, 1):", derive_seed(17, 1))

    x = gen_correlated(17, 6, 32, 0.5)
    dx = 0.1 * gen_normal(derive_seed(17, 1), 6, 32)
    l = inv_chol(damped_hessian(x, 0.01))
    print("P seed17:", fmt(p_eq16(dx, x, l)))

    m, n, k = 8, 12, 64
    w = gen_normal(derive_seed(42, 1), m, n)
    x = gen_correlated(derive_seed(42, 2), n, k, 0.5)
    xt = x + 0.3 * gen_normal(derive_seed(42, 3), n, k)
    for name, second in (("gptq", False), ("gptaq", True)):
        q = per_column(w, x, xt, 4, second)
        print(name, "asym_loss:", repr(float(np.sum((q @ x - w @ xt) ** 2))),
              "sym_loss:", repr(float(np.sum((q @ x - w @ x) ** 2))))
        print(name, "Q row0:", fmt(q[0]))
