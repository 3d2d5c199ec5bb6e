"""Finite Jacobi matrices, their orthogonal polynomials and spectral data.

The polynomials are generated by the three-term recurrence

    a_n phi_{n+1} + a_{n-1} phi_{n-1} + b_n phi_n = lambda phi_n,  phi_1 = 1,

with the conventions a_0 = 1 and a_N = 1.  The eigenvalues of the matrix are
the roots of phi_{N+1} and the columns phi(lambda_k) are (non-normalised)
eigenvectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "JacobiMatrix",
    "SpectralData",
    "eval_polynomials",
    "eval_polynomial_derivatives",
    "spectral_decomposition",
    "apply_matrix",
    "eval_spectral_function",
    "random_jacobi",
]


@dataclass(frozen=True)
class JacobiMatrix:
    """Symmetric tridiagonal matrix with positive off-diagonal entries.

    ``a`` holds a_1..a_{N-1} and ``b`` holds b_1..b_N.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.size < 1:
            raise ValueError("a Jacobi matrix needs at least one diagonal entry")
        if a.size != b.size - 1:
            raise ValueError(f"expected {b.size - 1} off-diagonal entries, got {a.size}")
        if np.any(a <= 0) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ValueError("off-diagonal entries must be finite and positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.size

    def dense(self) -> np.ndarray:
        return np.diag(self.b) + np.diag(self.a, 1) + np.diag(self.a, -1)

    def norm(self) -> float:
        """Spectral norm bound (Gershgorin row sums)."""
        return float(np.max(self._gershgorin_radii() + np.abs(self.b)))

    def _gershgorin_radii(self) -> np.ndarray:
        r = np.zeros(self.n)
        r[:-1] += self.a
        r[1:] += self.a
        return r

    def _a_ext(self) -> np.ndarray:
        # a_0 = 1, a_1..a_{N-1}, a_N = 1
        return np.concatenate(([1.0], self.a, [1.0]))

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "JacobiMatrix":
        return cls(a=data.get("a", []), b=data["b"])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "JacobiMatrix":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues, weights rho_k = |phi(lambda_k)|^2 and the matrix phi_m(lambda_k)."""

    lambdas: np.ndarray
    rhos: np.ndarray
    phi_matrix: np.ndarray
    jacobi: JacobiMatrix | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("lambdas", "rhos", "phi_matrix"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.lambdas.size
        if self.rhos.shape != (n,) or self.phi_matrix.shape != (n, n):
            raise ValueError("inconsistent spectral data shapes")
        if n > 1 and np.any(np.diff(self.lambdas) <= 0):
            raise ValueError("eigenvalues must be strictly increasing")
        if np.any(self.rhos <= 0):
            raise ValueError("spectral weights must be positive")

    @property
    def n(self) -> int:
        return self.lambdas.size

    @property
    def weights(self) -> np.ndarray:
        """Atoms 1/rho_k of the spectral measure."""
        return 1.0 / self.rhos

    def eigenvectors(self) -> np.ndarray:
        """Orthogonal matrix with columns phi(lambda_k)/sqrt(rho_k)."""
        return self.phi_matrix / np.sqrt(self.rhos)


def eval_polynomials(J: JacobiMatrix, lam):
    """Values (phi_1(lam), ..., phi_{N+1}(lam)).

    ``lam`` may be a real or complex scalar or array; the result has shape
    ``(N + 1,) + shape(lam)``.
    """
    lam = np.asarray(lam)
    dtype = np.result_type(lam.dtype, float)
    a = J._a_ext()
    out = np.empty((J.n + 1,) + lam.shape, dtype=dtype)
    out[0] = 1.0
    prev = np.zeros(lam.shape, dtype=dtype)
    for n in range(1, J.n + 1):
        # a_n phi_{n+1} = (lam - b_n) phi_n - a_{n-1} phi_{n-1}
        out[n] = ((lam - J.b[n - 1]) * out[n - 1] - a[n - 1] * prev) / a[n]
        prev = out[n - 1]
    return out


def eval_polynomial_derivatives(J: JacobiMatrix, lam):
    """Derivatives d/dlam of (phi_1, ..., phi_{N+1}) at ``lam``."""
    lam = np.asarray(lam)
    dtype = np.result_type(lam.dtype, float)
    phi = eval_polynomials(J, lam)
    a = J._a_ext()
    out = np.zeros((J.n + 1,) + lam.shape, dtype=dtype)
    for n in range(1, J.n + 1):
        prev = out[n - 2] if n >= 2 else 0.0
        out[n] = (phi[n - 1] + (lam - J.b[n - 1]) * out[n - 1] - a[n - 1] * prev) / a[n]
    return out


def _sturm_count(J: JacobiMatrix, x: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each entry of ``x``."""
    x = np.asarray(x, dtype=float)
    # pivot floor as in LAPACK's dstebz: a^2 / pivmin cannot overflow
    tiny = np.finfo(float).tiny * max(1.0, float(np.max(J.a**2, initial=0.0)))
    count = np.zeros(x.shape, dtype=int)
    d = J.b[0] - x
    d = np.where(d == 0.0, -tiny, d)
    count += d < 0
    for i in range(1, J.n):
        d = (J.b[i] - x) - J.a[i - 1] ** 2 / d
        d = np.where(d == 0.0, -tiny, d)
        count += d < 0
    return count


def spectral_decomposition(J: JacobiMatrix, max_bisections: int = 200) -> SpectralData:
    """Eigenvalues by Sturm bisection (polished by Newton on phi_{N+1}) and weights."""
    n = J.n
    radius = J._gershgorin_radii()
    lo0 = float(np.min(J.b - radius)) - 1.0
    hi0 = float(np.max(J.b + radius)) + 1.0
    k = np.arange(n)
    lo = np.full(n, lo0)
    hi = np.full(n, hi0)
    eps = np.finfo(float).eps
    floor = 1e-3 * max(abs(lo0), abs(hi0))
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        below = _sturm_count(J, mid) > k
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
        if np.all(hi - lo <= 2 * eps * np.maximum(np.maximum(np.abs(lo), np.abs(hi)), floor)):
            break
    else:
        raise RuntimeError("Sturm bisection did not converge")
    lambdas = 0.5 * (lo + hi)

    for _ in range(3):
        p = eval_polynomials(J, lambdas)[n]
        dp = eval_polynomial_derivatives(J, lambdas)[n]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp != 0, p / dp, 0.0)
        cand = lambdas - step
        p_cand = eval_polynomials(J, cand)[n]
        ok = (cand >= lo - eps * abs(lo0)) & (cand <= hi + eps * abs(hi0)) & (np.abs(p_cand) < np.abs(p))
        lambdas = np.where(ok, cand, lambdas)

    lambdas = np.sort(lambdas)
    phi = _twisted_eigenvectors(J, lambdas)
    rhos = np.sum(phi**2, axis=0)
    return SpectralData(lambdas=lambdas, rhos=rhos, phi_matrix=phi, jacobi=J)


def _twisted_eigenvectors(J: JacobiMatrix, lambdas: np.ndarray) -> np.ndarray:
    """Columns phi(lambda_k) normalised to phi_1 = 1.

    The forward recurrence alone loses accuracy in components where the
    eigenvector decays, so it is spliced with the backward recurrence from
    the last row at the index with the smallest residual.
    """
    n = J.n
    fwd = eval_polynomials(J, lambdas)[:n]
    if n == 1:
        return fwd
    a = J.a
    bwd = np.empty((n, lambdas.size))
    bwd[n - 1] = 1.0
    bwd[n - 2] = (lambdas - J.b[n - 1]) / a[n - 2]
    for i in range(n - 2, 0, -1):
        # a_{i-1} psi_{i-1} = (lam - b_i) psi_i - a_i psi_{i+1}   (0-based)
        bwd[i - 1] = ((lambdas - J.b[i]) * bwd[i] - a[i] * bwd[i + 1]) / a[i - 1]
    fwd = fwd / np.max(np.abs(fwd), axis=0)
    bwd = bwd / np.max(np.abs(bwd), axis=0)

    dense = J.dense()
    best = None
    best_res = np.full(lambdas.size, np.inf)
    for r in range(n):
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = fwd[r] / bwd[r]
        z = np.where(np.arange(n)[:, None] <= r, fwd, bwd * scale)
        res = np.linalg.norm(dense @ z - z * lambdas, axis=0) / np.linalg.norm(z, axis=0)
        res = np.where(np.isfinite(res), res, np.inf)
        take = res < best_res
        best = z if best is None else np.where(take, z, best)
        best_res = np.where(take, res, best_res)
    return best / best[0]


def apply_matrix(J: JacobiMatrix, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != J.n:
        raise ValueError(f"vector of length {v.shape[0]} does not match matrix size {J.n}")
    out = J.b * v
    out[:-1] = out[:-1] + J.a * v[1:]
    out[1:] = out[1:] + J.a * v[:-1]
    return out


def eval_spectral_function(sd: SpectralData, lam: float) -> float:
    """rho(lam) = sum of 1/rho_k over eigenvalues strictly below lam."""
    return float(np.sum(sd.weights[sd.lambdas < lam]))


def random_jacobi(n: int, rng: np.random.Generator, b_range=(-2.0, 2.0), a_range=(0.5, 2.0)) -> JacobiMatrix:
    """Jacobi matrix with uniformly drawn entries."""
    if n < 1:
        raise ValueError("matrix size must be positive")
    lo, hi = a_range
    if lo < 0 or hi <= 0:
        raise ValueError("a_range must lie in the positive half-line")
    b = rng.uniform(*b_range, size=n)
    a = rng.uniform(lo, hi, size=n - 1)
    # uniform(0, hi) can return exactly 0
    a = np.where(a > 0, a, hi * 1e-3)
    return JacobiMatrix(a=a, b=b)
