"""Wave kernel, forward problem, response function and control operator.

The state is driven by a scalar control entering the first coordinate.  The
solution is expanded over the eigenvectors phi(lambda_k) with coordinates

    h_k(t) = (1/rho_k) int_0^t f(tau) S(t - tau, lambda_k) dtau.

Controls come in two flavours: ``SBasisControl`` (coefficients in the span of
S(T - t, lambda_k), handled in closed form) and ``SampledControl`` (values on
a uniform grid, handled by composite Simpson quadrature).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.integrate import simpson

from ._mpkernels import as_mp_vector, conv_matrix_mp, s_mp, to_mp, working_dps
from .jacobi_core import SpectralData

__all__ = [
    "TimeGrid",
    "SBasisControl",
    "SampledControl",
    "s_kernel",
    "s_kernel_dt",
    "s_antiderivative",
    "solve_forward",
    "response_function",
    "apply_response",
    "control_operator",
    "read_control_csv",
    "write_control_csv",
]

SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True)
class TimeGrid:
    T: float
    m: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("final time must be positive")
        if self.m < 2:
            raise ValueError("a time grid needs at least two samples")

    @property
    def h(self) -> float:
        return self.T / (self.m - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.m)

    def simpson_weights(self) -> np.ndarray:
        """Quadrature weights reproducing ``scipy.integrate.simpson`` on this grid."""
        eye = np.eye(self.m)
        return simpson(eye, dx=self.h, axis=1)


@dataclass(frozen=True)
class SBasisControl:
    """f(t) = sum_k c_k S(T - t, lambda_k).

    ``coeffs`` may hold mpmath numbers (object dtype); they are kept at full
    precision because the Krein controls have large, cancelling coefficients.
    """

    sd: SpectralData
    T: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.dtype != object:
            c = c.astype(complex)
        if c.shape != (self.sd.n,):
            raise ValueError(f"expected {self.sd.n} S-basis coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def mp_coeffs(self) -> mp.matrix:
        return as_mp_vector(self.coeffs)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        with mp.workdps(working_dps(self.sd.n)):
            lam = [to_mp(x) for x in self.sd.lambdas]
            c = [to_mp(x) for x in self.coeffs]
            T = to_mp(self.T)
            out = [complex(mp.fsum(ck * s_mp(T - to_mp(ti), lk) for ck, lk in zip(c, lam))) for ti in t]
        return np.array(out)

    def sample(self, grid: TimeGrid) -> "SampledControl":
        if not np.isclose(grid.T, self.T, rtol=0, atol=1e-12 * self.T):
            raise ValueError("grid final time differs from the control horizon")
        return SampledControl(grid, self(grid.t))

    def __add__(self, other: "SBasisControl") -> "SBasisControl":
        return SBasisControl(self.sd, self.T, _mp_combine(self.coeffs, other.coeffs, 1, 1))

    def scaled(self, alpha) -> "SBasisControl":
        return SBasisControl(self.sd, self.T, _mp_combine(self.coeffs, self.coeffs, alpha, 0))


def _mp_combine(x, y, alpha, beta):
    n = len(x)
    with mp.workdps(working_dps(n)):
        al, be = to_mp(alpha), to_mp(beta)
        out = np.empty(n, dtype=object)
        for i in range(n):
            out[i] = al * to_mp(x[i]) + be * to_mp(y[i])
    return out


@dataclass(frozen=True)
class SampledControl:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.m,):
            raise ValueError(f"expected {self.grid.m} samples, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> float:
        return self.grid.T


def s_kernel(t, lam):
    """S(t, lam): sin(sqrt(lam) t)/sqrt(lam), sinh for lam < 0, t at lam = 0."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    w = np.sqrt(np.abs(lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.sin(w * t) / w
        neg = np.sinh(w * t) / w
    out = np.where(lam > 0, pos, np.where(lam < 0, neg, t))
    return out[()] if out.ndim == 0 else out


def s_kernel_dt(t, lam):
    """d/dt S(t, lam)."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    w = np.sqrt(np.abs(lam))
    out = np.where(lam > 0, np.cos(w * t), np.where(lam < 0, np.cosh(w * t), 1.0))
    return out[()] if out.ndim == 0 else out


def s_antiderivative(t, lam):
    """int_0^t S(tau, lam) dtau."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    t, lam = np.broadcast_arrays(t, lam)
    w = np.sqrt(np.abs(lam))
    x = lam * t * t
    with np.errstate(divide="ignore", invalid="ignore"):
        # 1 - cos(u) = 2 sin^2(u/2),  cosh(u) - 1 = 2 sinh^2(u/2)
        pos = 2.0 * np.sin(0.5 * w * t) ** 2 / lam
        neg = 2.0 * np.sinh(0.5 * w * t) ** 2 / np.abs(lam)
    t2 = t * t
    series = t2 / 2 * (1 - x / 12 + x * x / 360 - x**3 / 20160)
    out = np.where(np.abs(x) < SERIES_THRESHOLD, series, np.where(lam > 0, pos, neg))
    return out[()] if out.ndim == 0 else out


def response_function(sd: SpectralData, t):
    """r(t) = sum_k S(t, lambda_k)/rho_k."""
    t = np.asarray(t, dtype=float)
    vals = s_kernel(t[..., None], sd.lambdas) @ sd.weights
    return vals[()] if np.ndim(vals) == 0 else vals


def _check_time(t: float, T: float) -> float:
    t = float(t)
    if t < 0 or t > T * (1 + 1e-14):
        raise ValueError(f"time {t} outside [0, {T}]")
    return min(t, T)


def _sampled_prefix(f: SampledControl, t: float):
    """Nodes and values of f restricted to [0, t]."""
    grid = f.grid
    tt = grid.t
    i = int(np.searchsorted(tt, t, side="right"))
    nodes = tt[:i]
    vals = f.values[:i]
    if t - nodes[-1] > 1e-12 * grid.T:
        nodes = np.append(nodes, t)
        vals = np.append(vals, np.interp(t, tt, f.values.real) + 1j * np.interp(t, tt, f.values.imag))
    return nodes, vals


def coordinates(sd: SpectralData, f, t: float) -> np.ndarray:
    """h_k(t) = (1/rho_k) int_0^t f(tau) S(t - tau, lambda_k) dtau."""
    if isinstance(f, SBasisControl):
        t = _check_time(t, f.T)
        if t == 0:
            return np.zeros(sd.n, dtype=complex)
        with mp.workdps(working_dps(sd.n)):
            conv = conv_matrix_mp(sd.lambdas, f.T, t)
            moments = conv.T * f.mp_coeffs()
            return np.array([complex(moments[k]) for k in range(sd.n)]) / sd.rhos
    if isinstance(f, SampledControl):
        if f.grid.m < 3:
            raise ValueError("sampled controls need at least 3 grid points")
        t = _check_time(t, f.T)
        if t == 0:
            return np.zeros(sd.n, dtype=complex)
        nodes, vals = _sampled_prefix(f, t)
        if nodes.size < 2:
            return np.zeros(sd.n, dtype=complex)
        kern = s_kernel(t - nodes[:, None], sd.lambdas)
        return simpson(vals[:, None] * kern, x=nodes, axis=0) / sd.rhos
    raise TypeError(f"unsupported control type {type(f).__name__}")


def solve_forward(sd: SpectralData, f, t: float) -> np.ndarray:
    """State u^f(t) = sum_k h_k(t) phi(lambda_k)."""
    return sd.phi_matrix @ coordinates(sd, f, t)


def control_operator(sd: SpectralData, f) -> np.ndarray:
    """W^T f = u^f(T)."""
    return solve_forward(sd, f, f.T)


def apply_response(sd: SpectralData, f, grid: TimeGrid) -> np.ndarray:
    """(R^T f)(t_i) = int_0^{t_i} r(t_i - s) f(s) ds by Simpson quadrature.

    SBasis controls are first sampled on ``grid``.
    """
    if isinstance(f, SBasisControl):
        f = f.sample(grid)
    if f.grid != grid:
        raise ValueError("control grid does not match the requested grid")
    if grid.m < 3:
        raise ValueError("response quadrature needs at least 3 grid points")
    t = grid.t
    r = response_function(sd, t)
    out = np.zeros(grid.m, dtype=complex)
    # [0, t_1] has two nodes; r is odd, so r(t_1 - t_2) = -r(t_1) gives a
    # third one for a quadratic rule
    g = np.array([r[1] * f.values[0], 0.0, -r[1] * f.values[2]])
    out[1] = grid.h / 12 * (5 * g[0] + 8 * g[1] - g[2])
    for i in range(2, grid.m):
        # r(t_i - s_j) = r(t_{i-j}) on a uniform grid
        out[i] = simpson(r[i::-1] * f.values[: i + 1], dx=grid.h)
    return out


def read_control_csv(path) -> SampledControl:
    """Read a sampled control written with header ``t,re,im``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames][:3] != ["t", "re", "im"]:
            raise ValueError(f"{path}: expected header t,re,im")
        rows = [(float(r["t"]), float(r["re"]), float(r["im"])) for r in reader]
    if len(rows) < 3:
        raise ValueError(f"{path}: need at least 3 samples")
    arr = np.array(rows)
    grid = TimeGrid(T=float(arr[-1, 0]), m=len(rows))
    if arr[0, 0] != 0.0 or np.max(np.abs(arr[:, 0] - grid.t)) > 1e-9 * grid.T:
        raise ValueError(f"{path}: samples must lie on a uniform grid starting at t=0")
    return SampledControl(grid, arr[:, 1] + 1j * arr[:, 2])


def write_control_csv(path, f: SampledControl) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "re", "im"])
        for ti, v in zip(f.grid.t, f.values):
            w.writerow([repr(float(ti)), repr(float(v.real)), repr(float(v.imag))])
