"""Gram matrix of the S-basis and the connecting operator C^T = (W^T)* W^T.

Two kernels are provided for C^T: the spectral one,

    sum_k S(T-t, lambda_k) S(T-s, lambda_k) / rho_k,

and the dynamic one built from the response function alone,

    (1/2) int_{|t-s|}^{2T-s-t} r(tau) dtau.

On the S-basis, C^T sends coefficients c to (G c)_k / rho_k.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import mpmath as mp
import numpy as np

from ._mpkernels import as_mp_vector, conv_matrix_mp, to_mp, working_dps
from .jacobi_core import SpectralData
from .wave_dynamics import SampledControl, SBasisControl, s_antiderivative, s_kernel

__all__ = [
    "GramMatrix",
    "gram_matrix",
    "ct_kernel_spectral",
    "ct_kernel_dynamic",
    "apply_ct",
    "apply_ct_grid",
    "inner_product",
]


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """G_jk = int_0^T S(u, lambda_j) S(u, lambda_k) du.

    ``values`` is the double-precision matrix; ``exact`` keeps the same closed
    forms at ``dps`` decimal digits for solves and products with controls.
    """

    T: float
    lambdas: np.ndarray
    values: np.ndarray
    exact: mp.matrix
    dps: int

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def matvec(self, c) -> mp.matrix:
        with mp.workdps(self.dps):
            return self.exact * as_mp_vector(c)

    def solve(self, rhs) -> np.ndarray:
        """G^{-1} rhs at working precision, as an object array of mp numbers."""
        with mp.workdps(self.dps):
            x = mp.lu_solve(self.exact, as_mp_vector(rhs))
            return np.array([x[i] for i in range(self.n)], dtype=object)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        with mp.workdps(self.dps):
            ev = mp.eigsy(self.exact, eigvals_only=True)
            return np.array(sorted(float(ev[i]) for i in range(self.n)))

    @property
    def condition(self) -> float:
        ev = self.eigenvalues
        return float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")

    def is_positive_definite(self) -> bool:
        return bool(self.eigenvalues[0] > 0)


def gram_matrix(sd: SpectralData, T: float) -> GramMatrix:
    if not T > 0:
        raise ValueError("final time must be positive")
    dps = working_dps(sd.n)
    with mp.workdps(dps):
        exact = conv_matrix_mp(sd.lambdas, T, T)
        values = np.array([[float(exact[j, k]) for k in range(sd.n)] for j in range(sd.n)])
    return GramMatrix(T=float(T), lambdas=sd.lambdas, values=values, exact=exact, dps=dps)


def ct_kernel_spectral(sd: SpectralData, T: float, t, s):
    t = np.asarray(t, dtype=float)[..., None]
    s = np.asarray(s, dtype=float)[..., None]
    out = np.sum(s_kernel(T - t, sd.lambdas) * s_kernel(T - s, sd.lambdas) * sd.weights, axis=-1)
    return out[()] if out.ndim == 0 else out


def ct_kernel_dynamic(sd: SpectralData, T: float, t, s):
    """(1/2) int_{|t-s|}^{2T-s-t} r, using the antiderivative of each term of r."""
    t = np.asarray(t, dtype=float)[..., None]
    s = np.asarray(s, dtype=float)[..., None]
    upper = s_antiderivative(2 * T - s - t, sd.lambdas)
    lower = s_antiderivative(np.abs(t - s), sd.lambdas)
    out = 0.5 * np.sum((upper - lower) * sd.weights, axis=-1)
    return out[()] if out.ndim == 0 else out


def apply_ct(sd: SpectralData, G: GramMatrix, f: SBasisControl) -> SBasisControl:
    """C^T on the S-basis: c -> (G c)_k / rho_k."""
    if f.coeffs.shape != (G.n,):
        raise ValueError("control and Gram matrix dimensions differ")
    with mp.workdps(G.dps):
        gc = G.matvec(f.coeffs)
        out = np.array([gc[k] / to_mp(sd.rhos[k]) for k in range(G.n)], dtype=object)
    return SBasisControl(sd, f.T, out)


def inner_product(G: GramMatrix, f: SBasisControl, g: SBasisControl) -> complex:
    """(f, g) = int_0^T f conj(g) dt for two S-basis controls."""
    with mp.workdps(G.dps):
        gf = G.matvec(f.coeffs)
        return complex(mp.fsum(gf[k] * mp.conj(to_mp(g.coeffs[k])) for k in range(G.n)))


def apply_ct_grid(sd: SpectralData, T: float, f: SampledControl) -> SampledControl:
    """(C^T f)(t_i) by Simpson quadrature of the dynamic kernel against f."""
    grid = f.grid
    if grid.m < 3:
        raise ValueError("grid too coarse for Simpson quadrature")
    if not np.isclose(grid.T, T, rtol=0, atol=1e-12 * T):
        raise ValueError("grid final time differs from T")
    t = grid.t
    w = grid.simpson_weights()
    K = ct_kernel_dynamic(sd, T, t[:, None], t[None, :])
    return SampledControl(grid, K @ (w * f.values))
