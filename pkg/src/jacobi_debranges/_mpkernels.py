"""Extended-precision closed forms for integrals of products of wave kernels.

Coefficient vectors of controls in the S-basis are as large as the condition
number of the Gram matrix (1e12 and beyond for N >= 5 at T = 1), so every
product with the Gram matrix is done in mpmath at a working precision that
grows with N.
"""
from __future__ import annotations

import mpmath as mp
import numpy as np


def working_dps(n: int) -> int:
    return 30 + 4 * n


def to_mp(x):
    if isinstance(x, (complex, np.complexfloating)):
        return mp.mpc(complex(x))
    if isinstance(x, (mp.mpf, mp.mpc)):
        return x
    return mp.mpf(float(x))


def s_mp(t, lam):
    """S(t, lam) = sin(sqrt(lam) t)/sqrt(lam), continued through lam <= 0."""
    if lam > 0:
        w = mp.sqrt(lam)
        return mp.sin(w * t) / w
    if lam < 0:
        w = mp.sqrt(-lam)
        return mp.sinh(w * t) / w
    return t


def c_mp(t, lam):
    """dS/dt = cos(sqrt(lam) t), continued through lam <= 0."""
    if lam > 0:
        return mp.cos(mp.sqrt(lam) * t)
    if lam < 0:
        return mp.cosh(mp.sqrt(-lam) * t)
    return mp.mpf(1)


def ds_dlam_mp(t, lam):
    """d/dlam S(t, lam)."""
    if abs(lam) * t * t < 1:
        # sum_{n>=1} n (-lam)^{n-1} (-1) t^{2n+1} / (2n+1)!
        total = mp.mpf(0)
        term_pow = mp.mpf(1)
        n = 1
        eps = mp.mpf(10) ** (-mp.mp.dps - 5)
        while True:
            term = -n * term_pow * t ** (2 * n + 1) / mp.factorial(2 * n + 1)
            total += term
            if abs(term) <= eps * abs(total):
                break
            term_pow *= -lam
            n += 1
        return total
    return (t * c_mp(t, lam) - s_mp(t, lam)) / (2 * lam)


def conv_entry_mp(lam_j, lam_k, T, t):
    """int_0^t S(T - tau, lam_j) S(t - tau, lam_k) dtau.

    Both factors solve y'' = -lam y, so the integral reduces to a Wronskian
    boundary term; coincident eigenvalues use its derivative in lam.
    """
    delta = lam_k - lam_j
    if abs(delta) <= mp.mpf(10) ** (-(mp.mp.dps // 2)) * max(1, abs(lam_j)):
        lam = (lam_j + lam_k) / 2
        return c_mp(T, lam) * ds_dlam_mp(t, lam) + t / 2 * s_mp(T, lam) * s_mp(t, lam)
    num = (
        c_mp(T, lam_j) * s_mp(t, lam_k)
        - s_mp(T, lam_j) * c_mp(t, lam_k)
        + s_mp(T - t, lam_j)
    )
    return num / delta


def conv_matrix_mp(lambdas, T, t):
    """Matrix I[j, k] = int_0^t S(T-tau, lam_j) S(t-tau, lam_k) dtau as an mp.matrix."""
    lam = [to_mp(x) for x in lambdas]
    T = to_mp(T)
    t = to_mp(t)
    n = len(lam)
    out = mp.matrix(n, n)
    symmetric = t == T
    for j in range(n):
        for k in range(n):
            if symmetric and k < j:
                out[j, k] = out[k, j]
            else:
                out[j, k] = conv_entry_mp(lam[j], lam[k], T, t)
    return out


def as_mp_vector(values) -> mp.matrix:
    return mp.matrix([to_mp(v) for v in values])


def from_mp_vector(vec, complex_out=True) -> np.ndarray:
    vals = [complex(vec[i]) for i in range(vec.rows)]
    arr = np.array(vals, dtype=complex)
    if not complex_out:
        return arr.real.copy()
    return arr
