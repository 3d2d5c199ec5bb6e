"""Krein control equations and recovery of the Jacobi matrix from C^T.

Controls f_k in span{S(T - t, lambda_j)} drive the system to the basis
states d_k.  f_1 solves C^T f_1 = r(T - .), and the rest follow from the
three-term system

    -(C^T f_k)'' = a_{k-1} C^T f_{k-1} + b_k C^T f_k + a_k C^T f_{k+1},

together with (C^T f_j, f_k) = delta_jk.  Running that system as a recursion
(a Lanczos process in control space) recovers {a_k}, {b_k}.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.linalg import hankel, toeplitz

from ._mpkernels import to_mp, working_dps
from .connecting import GramMatrix
from .jacobi_core import JacobiMatrix, SpectralData, eval_polynomials
from .wave_dynamics import SampledControl, SBasisControl, TimeGrid

__all__ = [
    "SpecialControls",
    "ReconstructionError",
    "Reconstruction",
    "solve_f1",
    "solve_special_controls",
    "verify_krein_system",
    "solve_special_control_problem",
    "reconstruct",
    "solve_f1_grid",
    "reconstruct_exact",
    "response_samples",
    "read_response_csv",
    "write_response_csv",
]


class ReconstructionError(RuntimeError):
    """Data inconsistent with a Jacobi matrix of the requested size."""


@dataclass(frozen=True)
class SpecialControls:
    controls: list
    targets: np.ndarray

    def gram_test_matrix(self, G: GramMatrix) -> np.ndarray:
        """Matrix of (C^T f_j, f_k); the identity for exact controls."""
        n = len(self.controls)
        sd = self.controls[0].sd
        out = np.empty((n, n), dtype=complex)
        with mp.workdps(G.dps):
            images = [G.matvec(f.coeffs) for f in self.controls]
            for j in range(n):
                for k in range(n):
                    # (C^T f_j, f_k) = sum_i (G c_j)_i conj((G c_k)_i) / rho_i
                    out[j, k] = complex(
                        mp.fsum(images[j][i] * mp.conj(images[k][i]) / to_mp(sd.rhos[i]) for i in range(n))
                    )
        return out


def _require_pd(G: GramMatrix) -> None:
    if not G.is_positive_definite():
        raise np.linalg.LinAlgError("Gram matrix is not positive definite; spectral data are inconsistent")


def solve_f1(sd: SpectralData, G: GramMatrix) -> SBasisControl:
    """Solution of C^T f = r(T - .) in the S-basis: G c = (1, ..., 1)."""
    _require_pd(G)
    return SBasisControl(sd, G.T, G.solve(np.ones(sd.n)))


def solve_special_controls(sd: SpectralData, G: GramMatrix) -> SpecialControls:
    _require_pd(G)
    controls = [SBasisControl(sd, G.T, G.solve(sd.phi_matrix[k])) for k in range(sd.n)]
    return SpecialControls(controls=controls, targets=np.eye(sd.n))


def solve_special_control_problem(sd: SpectralData, G: GramMatrix, z: complex) -> SBasisControl:
    """Control j_z reaching the state with coordinates conj(phi_k(z))."""
    _require_pd(G)
    J = _require_jacobi(sd)
    target = np.conj(eval_polynomials(J, complex(z))[: sd.n])
    return SBasisControl(sd, G.T, G.solve(sd.phi_matrix.T @ target))


def _require_jacobi(sd: SpectralData) -> JacobiMatrix:
    if sd.jacobi is None:
        raise ValueError("spectral data carry no Jacobi matrix to evaluate polynomials with")
    return sd.jacobi


def verify_krein_system(J: JacobiMatrix, sd: SpectralData, fc: SpecialControls, G: GramMatrix) -> float:
    """Maximum coefficient-wise residual of the three-term Krein system.

    In the S-basis, C^T f has coefficients (G c)_j / rho_j and
    -(d/dt)^2 S(T - t, lambda_j) = lambda_j S(T - t, lambda_j).
    """
    n = sd.n
    a = np.concatenate(([0.0], J.a, [0.0]))
    worst = 0.0
    with mp.workdps(G.dps):
        lam = [to_mp(x) for x in sd.lambdas]
        rho = [to_mp(x) for x in sd.rhos]
        images = [G.matvec(f.coeffs) for f in fc.controls]
        zero = mp.matrix(n, 1)
        for k in range(n):
            prev = images[k - 1] if k > 0 else zero
            nxt = images[k + 1] if k < n - 1 else zero
            for j in range(n):
                lhs = lam[j] * images[k][j] / rho[j]
                rhs = (to_mp(a[k]) * prev[j] + to_mp(J.b[k]) * images[k][j] + to_mp(a[k + 1]) * nxt[j]) / rho[j]
                worst = max(worst, float(abs(lhs - rhs)))
    return worst


@dataclass
class Reconstruction:
    a: np.ndarray
    b: np.ndarray
    residuals: list = field(default_factory=list)
    rank: int = 0
    condition: float = float("nan")
    singular_values: np.ndarray | None = None

    def jacobi(self) -> JacobiMatrix:
        return JacobiMatrix(a=self.a, b=self.b)

    def to_dict(self) -> dict:
        return {
            "a": [float(x) for x in self.a],
            "b": [float(x) for x in self.b],
            "residuals": [float(x) for x in self.residuals],
            "rank": int(self.rank),
            "condition": float(self.condition),
        }


def reconstruct_exact(lambdas, r_coeffs, T: float) -> Reconstruction:
    """Recover {a_k}, {b_k} from r(t) = sum_k r_coeffs[k] S(t, lambdas[k]).

    The recursion runs in the S-basis with the closed-form Gram matrix, so
    second derivatives are exact (multiplication by lambda_k).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    r_coeffs = np.asarray(r_coeffs, dtype=float)
    n = lambdas.size
    rhos = 1.0 / r_coeffs
    dps = working_dps(n)
    with mp.workdps(dps):
        from ._mpkernels import conv_matrix_mp

        G = conv_matrix_mp(lambdas, T, T)
        lam = mp.matrix([to_mp(x) for x in lambdas])
        rho = mp.matrix([to_mp(x) for x in rhos])

        def ct(c):
            gc = G * c
            return mp.matrix([gc[i] / rho[i] for i in range(n)])

        def inner(y, c):
            # (y, f) for y = sum y_i S_i(T-.), f = sum c_i S_i(T-.)
            gc = G * c
            return mp.fsum(y[i] * mp.conj(gc[i]) for i in range(n))

        def solve_ct(w):
            return mp.lu_solve(G, mp.matrix([rho[i] * w[i] for i in range(n)]))

        c = solve_ct(mp.matrix([to_mp(x) for x in r_coeffs]))
        a_out, b_out, residuals = [], [], []
        ct_prev = None
        for k in range(n):
            ct_k = ct(c)
            y = mp.matrix([lam[i] * ct_k[i] for i in range(n)])
            b_k = mp.re(inner(y, c))
            b_out.append(float(b_k))
            if k == n - 1:
                break
            w = y - b_k * ct_k
            if ct_prev is not None:
                w = w - to_mp(a_out[-1]) * ct_prev
            g = solve_ct(w)
            residuals.append(float(mp.norm(ct(g) - w) / mp.norm(w)))
            a2 = mp.re(inner(w, g))
            if a2 <= 0:
                raise ReconstructionError(f"non-positive norm {float(a2):.3e} at step {k + 1}")
            a_k = mp.sqrt(a2)
            a_out.append(float(a_k))
            ct_prev = ct_k
            c = g / a_k
        return Reconstruction(a=np.array(a_out), b=np.array(b_out), residuals=residuals, rank=n, condition=float("nan"))


def response_samples(sd: SpectralData, T: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """r on [0, 2T] at the spacing of an m-point grid on [0, T]."""
    from .wave_dynamics import response_function

    tau = np.linspace(0.0, 2 * T, 2 * m - 1)
    return tau, response_function(sd, tau)


def _cumulative_integral(y: np.ndarray, h: float) -> np.ndarray:
    """Running integral of samples by local cubic interpolation (O(h^4) globally)."""
    n = y.size
    if n < 4:
        raise ValueError("need at least 4 samples")
    piece = np.empty(n - 1)
    # interior intervals: cubic through the four surrounding nodes
    piece[1:-1] = h / 24 * (-y[:-3] + 13 * y[1:-2] + 13 * y[2:-1] - y[3:])
    piece[0] = h / 24 * (9 * y[0] + 19 * y[1] - 5 * y[2] + y[3])
    piece[-1] = h / 24 * (9 * y[-1] + 19 * y[-2] - 5 * y[-3] + y[-4])
    return np.concatenate(([0.0], np.cumsum(piece)))


def _odd_derivative(r: np.ndarray, h: float) -> np.ndarray:
    """r' from samples of an odd function on [0, L]: five-point central stencil.

    Nodes left of 0 come from r(-t) = -r(t); the right end uses one-sided
    five-point stencils.
    """
    d = np.empty_like(r)
    d[2:-2] = (r[:-4] - 8 * r[1:-3] + 8 * r[3:-1] - r[4:]) / (12 * h)
    d[0] = (16 * r[1] - 2 * r[2]) / (12 * h)
    d[1] = (-r[1] - 8 * r[0] + 8 * r[2] - r[3]) / (12 * h)
    back = r[::-1][:5]
    d[-1] = -(np.array([-25, 48, -36, 16, -3]) @ back) / (12 * h)
    d[-2] = -(np.array([-3, -10, 18, -6, 1]) @ back) / (12 * h)
    return d


def _truncated_eig(A: np.ndarray, k: int, rng: np.random.Generator, power_iters: int = 2):
    """Leading k eigenpairs of a symmetric PSD matrix by randomized subspace iteration."""
    m = A.shape[0]
    p = min(m, k + 10)
    Y = A @ rng.standard_normal((m, p))
    Q, _ = np.linalg.qr(Y)
    for _ in range(power_iters):
        Q, _ = np.linalg.qr(A @ Q)
    B = Q.T @ A @ Q
    B = 0.5 * (B + B.T)
    mu, V = np.linalg.eigh(B)
    order = np.argsort(mu)[::-1]
    return np.abs(mu[order]), Q @ V[:, order]


@dataclass
class _GridCT:
    """Discretised C^T built from r, with a rank-n pseudo-inverse."""

    grid: TimeGrid
    K: np.ndarray
    K2: np.ndarray
    weights: np.ndarray
    basis: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    rank: int

    def apply(self, f):
        return self.K @ (self.weights * f)

    def solve(self, y):
        sw = np.sqrt(self.weights)
        return (self.basis @ ((self.basis.T @ (sw * y)) / self.mu)) / sw

    def inner(self, f, g):
        return np.sum(self.weights * f * g)


def _grid_ct(r: np.ndarray, T: float, n: int, svd_rtol: float, seed: int) -> _GridCT:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size % 2 == 0 or r.size < 11:
        raise ValueError("r must have an odd number (>= 11) of samples on [0, 2T]")
    m = (r.size + 1) // 2
    grid = TimeGrid(T, m)
    h = grid.h
    R = _cumulative_integral(r, h)
    # K[i, j] = (R(2T - t_i - t_j) - R(|t_i - t_j|)) / 2
    K = 0.5 * (hankel(R[::-1][:m], R[m - 1 :: -1]) - toeplitz(R[:m]))
    # -(d/dt)^2 of the kernel: -(r'(2T - t - s) - r'(|t - s|)) / 2; r(0) = 0 kills the jump term
    dr = _odd_derivative(r, h)
    K2 = -0.5 * (hankel(dr[::-1][:m], dr[m - 1 :: -1]) - toeplitz(dr[:m]))
    w = grid.simpson_weights()
    sw = np.sqrt(w)
    Ks = sw[:, None] * K * sw[None, :]

    sigma, U = _truncated_eig(Ks, n, np.random.default_rng(seed))
    rank = int(np.sum(sigma > svd_rtol * sigma[0]))
    if rank < n:
        raise ReconstructionError(
            f"numerical rank of C^T is {rank} < N = {n} (sigma_N/sigma_1 = {sigma[n - 1] / sigma[0]:.3e})"
        )
    return _GridCT(grid, K, K2, w, U[:, :n], sigma[:n], sigma, rank)


def solve_f1_grid(r: np.ndarray, T: float, n: int, svd_rtol: float = 1e-10, seed: int = 0) -> SampledControl:
    """f_1 on the grid: rank-n least-squares solution of C^T f = r(T - .)."""
    op = _grid_ct(r, T, n, svd_rtol, seed)
    m = op.grid.m
    return SampledControl(op.grid, op.solve(np.asarray(r, dtype=float)[m - 1 :: -1].copy()))


def reconstruct(r: np.ndarray, T: float, n: int, svd_rtol: float = 1e-10, seed: int = 0) -> Reconstruction:
    """Recover a Jacobi matrix of size ``n`` from samples of r on [0, 2T].

    ``r`` holds 2m - 1 uniform samples, so that the control grid on [0, T]
    has m points.  Raises ``ReconstructionError`` when the numerical rank of
    the discretised C^T is below ``n`` or a norm comes out non-positive.
    """
    op = _grid_ct(r, T, n, svd_rtol, seed)
    r = np.asarray(r, dtype=float)
    m = op.grid.m
    apply_ct, solve_ct, inner = op.apply, op.solve, op.inner
    K2, w = op.K2, op.weights
    sigma, mu, rank = op.sigma, op.mu, op.rank

    residuals = []

    def checked_solve(y):
        x = solve_ct(y)
        res = apply_ct(x) - y
        residuals.append(float(np.linalg.norm(res) / np.linalg.norm(y)))
        return x

    # r(T - t_i) = r(tau_{m-1-i})
    f = checked_solve(r[m - 1 :: -1].copy())
    a_out, b_out = [], []
    ct_prev = None
    for k in range(n):
        ct_k = apply_ct(f)
        y = K2 @ (w * f)
        b_k = inner(y, f)
        b_out.append(b_k)
        if k == n - 1:
            break
        v = y - b_k * ct_k
        if ct_prev is not None:
            v = v - a_out[-1] * ct_prev
        g = checked_solve(v)
        a2 = inner(v, g)
        if not a2 > 0:
            raise ReconstructionError(f"non-positive norm {a2:.3e} at step {k + 1}; data too noisy or N wrong")
        a_k = np.sqrt(a2)
        a_out.append(a_k)
        ct_prev = ct_k
        f = g / a_k
    return Reconstruction(
        a=np.array(a_out),
        b=np.array(b_out),
        residuals=residuals,
        rank=rank,
        condition=float(mu[0] / mu[-1]),
        singular_values=sigma,
    )


def write_response_csv(path, tau: np.ndarray, r: np.ndarray) -> None:
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "r"])
        for ti, ri in zip(tau, r):
            wr.writerow([repr(float(ti)), repr(float(ri))])


def read_response_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames][:2] != ["t", "r"]:
            raise ValueError(f"{path}: expected header t,r")
        rows = [(float(row["t"]), float(row["r"])) for row in reader]
    arr = np.array(rows).reshape(-1, 2)
    tau, r = arr[:, 0], arr[:, 1]
    if tau.size < 11 or tau[0] != 0.0:
        raise ValueError(f"{path}: need samples starting at t=0")
    expected = np.linspace(0.0, tau[-1], tau.size)
    if np.max(np.abs(tau - expected)) > 1e-9 * tau[-1]:
        raise ValueError(f"{path}: samples are not uniformly spaced")
    return tau, r


def write_reconstruction_json(path, rec: Reconstruction, extra: dict | None = None) -> None:
    data = rec.to_dict()
    if extra:
        data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
