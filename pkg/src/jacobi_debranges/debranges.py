"""The space B_N of Fourier images of reachable states, as a de Branges space.

Elements are polynomials of degree <= N-1 stored by their coefficients in the
basis phi_1..phi_N.  The norm comes from the atomic spectral measure with
atoms 1/rho_k at lambda_k.  All inner products are conjugate-linear in the
second argument, so the reproducing property reads (G, J_z) = G(z).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .connecting import GramMatrix
from .jacobi_core import SpectralData, eval_polynomial_derivatives, eval_polynomials
from .krein import solve_special_control_problem
from .wave_dynamics import control_operator

__all__ = [
    "BElement",
    "HermiteBiehlerFn",
    "fourier_image",
    "project_PN",
    "bn_inner",
    "bn_norm",
    "reproducing_kernel",
    "hermite_biehler_E",
    "verify_hb",
    "count_upper_zeros",
    "repr_ker_from_E",
    "be_inner",
    "multiply_by_lambda",
    "divide_by_linear",
    "verify_axioms",
]


@dataclass(frozen=True, eq=False)
class BElement:
    """G(lam) = sum_m coeffs[m] phi_{m+1}(lam)."""

    sd: SpectralData
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.sd.n,):
            raise ValueError(f"expected {self.sd.n} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, z):
        phi = eval_polynomials(_jacobi(self.sd), np.asarray(z, dtype=complex))[: self.sd.n]
        return np.tensordot(self.coeffs, phi, axes=(0, 0))

    def derivative(self, z):
        dphi = eval_polynomial_derivatives(_jacobi(self.sd), np.asarray(z, dtype=complex))[: self.sd.n]
        return np.tensordot(self.coeffs, dphi, axes=(0, 0))

    def at_eigenvalues(self) -> np.ndarray:
        return self.sd.phi_matrix.T @ self.coeffs

    def conjugate(self) -> "BElement":
        """G#(z) = conj(G(conj z)); the phi_m have real coefficients."""
        return BElement(self.sd, np.conj(self.coeffs))

    def __add__(self, other):
        _same_space(self, other)
        return BElement(self.sd, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_space(self, other)
        return BElement(self.sd, self.coeffs - other.coeffs)

    def __mul__(self, alpha):
        return BElement(self.sd, alpha * self.coeffs)

    __rmul__ = __mul__


def _jacobi(sd: SpectralData):
    if sd.jacobi is None:
        raise ValueError("spectral data carry no Jacobi matrix")
    return sd.jacobi


def _same_space(F: BElement, G: BElement) -> None:
    if F.sd is not G.sd and not (
        np.array_equal(F.sd.lambdas, G.sd.lambdas) and np.array_equal(F.sd.rhos, G.sd.rhos)
    ):
        raise ValueError("elements belong to different spaces")


def fourier_image(sd: SpectralData, u) -> BElement:
    """(F u)(lam) = sum_k u_k phi_k(lam)."""
    u = np.asarray(u)
    if u.shape != (sd.n,):
        raise ValueError(f"state of length {u.shape} does not match N = {sd.n}")
    return BElement(sd, u)


def project_PN(sd: SpectralData, a) -> BElement:
    """Orthogonal projection of ``a`` onto span{phi_1..phi_N} in L2(d rho).

    The measure is atomic, so only the values a(lambda_k) matter.
    """
    vals = np.asarray([a(x) for x in sd.lambdas], dtype=complex)
    return BElement(sd, sd.phi_matrix @ (vals * sd.weights))


def bn_inner(H: BElement, G: BElement) -> complex:
    """sum_k H(lambda_k) conj(G(lambda_k)) / rho_k."""
    _same_space(H, G)
    return complex(np.sum(H.at_eigenvalues() * np.conj(G.at_eigenvalues()) * H.sd.weights))


def bn_norm(G: BElement) -> float:
    return float(np.sqrt(max(bn_inner(G, G).real, 0.0)))


def reproducing_kernel(sd: SpectralData, z: complex, route: str = "direct", gram: GramMatrix | None = None) -> BElement:
    """J_z with coefficients conj(phi_m(z)).

    ``route="control"`` builds it instead as the Fourier image of the state
    reached by the special control j_z, which needs ``gram``.
    """
    if route == "direct":
        phi = eval_polynomials(_jacobi(sd), complex(z))[: sd.n]
        return BElement(sd, np.conj(phi))
    if route == "control":
        if gram is None:
            raise ValueError("the control route needs the Gram matrix")
        jz = solve_special_control_problem(sd, gram, z)
        return fourier_image(sd, control_operator(sd, jz))
    raise ValueError(f"unknown route {route!r}")


@dataclass(frozen=True, eq=False)
class HermiteBiehlerFn:
    """E(z) = sqrt(pi) (1 - iz) J_i(z) / ||J_i||."""

    kernel_i: BElement
    norm: float

    @property
    def sd(self) -> SpectralData:
        return self.kernel_i.sd

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.sqrt(np.pi) * (1 - 1j * z) * self.kernel_i(z) / self.norm

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return np.sqrt(np.pi) * (-1j * self.kernel_i(z) + (1 - 1j * z) * self.kernel_i.derivative(z)) / self.norm

    def monomial_coefficients(self) -> np.ndarray:
        """Coefficients of E in powers of z (lowest first)."""
        J = _jacobi(self.sd)
        a = J._a_ext()
        polys = [Polynomial([1.0])]
        prev = Polynomial([0.0])
        for m in range(1, self.sd.n):
            nxt = ((Polynomial([-J.b[m - 1], 1.0]) * polys[-1]) - a[m - 1] * prev) / a[m]
            prev = polys[-1]
            polys.append(nxt)
        kernel = Polynomial([0.0 + 0j])
        for c, p in zip(self.kernel_i.coeffs, polys):
            kernel = kernel + c * p
        full = Polynomial([1.0, -1j]) * kernel * (np.sqrt(np.pi) / self.norm)
        return full.coef

    def zeros(self) -> np.ndarray:
        """Zeros of E: eigenvalues of J with b_N shifted by a_N phi_{N+1}(-i)/phi_N(-i).

        By Christoffel-Darboux, (z + i) J_i(z) is proportional to
        phi_{N+1}(z) phi_N(-i) - phi_N(z) phi_{N+1}(-i), and (1 - iz) vanishes at -i too.
        """
        J = _jacobi(self.sd)
        phi = eval_polynomials(J, -1j)
        M = J.dense().astype(complex)
        M[-1, -1] += J._a_ext()[-1] * phi[-1] / phi[-2]
        return np.linalg.eigvals(M)

    def sharp(self, z):
        """E#(z) = conj(E(conj z))."""
        return np.conj(self(np.conj(np.asarray(z, dtype=complex))))


def hermite_biehler_E(sd: SpectralData) -> HermiteBiehlerFn:
    Ji = reproducing_kernel(sd, 1j)
    # ||J_i||^2 = (J_i, J_i) = J_i(i) by the reproducing property
    return HermiteBiehlerFn(kernel_i=Ji, norm=bn_norm(Ji))


@dataclass
class HBReport:
    passed: bool
    min_margin: float
    n_samples: int


def verify_hb(E: HermiteBiehlerFn, samples) -> HBReport:
    """Check |E(z)| > |E(conj z)| at sample points of the open upper half-plane."""
    z = np.asarray(samples, dtype=complex).ravel()
    if np.any(z.imag <= 0):
        raise ValueError("Hermite-Biehler samples must lie in the open upper half-plane")
    margin = np.abs(E(z)) - np.abs(E(np.conj(z)))
    return HBReport(passed=bool(np.all(margin > 0)), min_margin=float(np.min(margin)), n_samples=z.size)


def hb_margin(E: HermiteBiehlerFn, z):
    z = np.asarray(z, dtype=complex)
    return np.abs(E(z)) - np.abs(E(np.conj(z)))


def count_upper_zeros(
    E: HermiteBiehlerFn, radius: float | None = None, n_points: int = 4000, lift: float = 1e-9
) -> int:
    """Zeros of E above the line Im z = lift * R, by the argument principle.

    The contour is the segment [-R, R] + i lift R closed by the upper half
    circle.  Zeros of E may sit within rounding distance of the real axis,
    where the phase along the axis itself cannot be resolved in double
    precision; the small lift keeps them off the contour.  Midpoints are
    inserted wherever a phase step exceeds pi/8.
    """
    if radius is None:
        radius = 2.0 * (1.0 + np.max(np.abs(E.zeros())))
    h = lift * radius
    theta0 = np.arcsin(min(lift, 1.0))

    def contour(u):
        # u in [0, 1] runs along the lifted segment, u in [1, 2] along the arc
        seg = radius * np.cos(theta0) * (2 * u - 1) + 1j * h
        arc = radius * np.exp(1j * (theta0 + (np.pi - 2 * theta0) * (u - 1)))
        return np.where(u <= 1, seg, arc)

    u = np.linspace(0.0, 2.0, 2 * n_points + 1)
    vals = E(contour(u))
    for _ in range(60):
        if np.any(vals == 0):
            raise ValueError("E vanishes on the contour")
        steps = np.angle(vals[1:] / vals[:-1])
        bad = np.flatnonzero(np.abs(steps) >= np.pi / 8)
        if bad.size == 0:
            return int(round((np.sum(steps) + np.angle(vals[0] / vals[-1])) / (2 * np.pi)))
        mids = 0.5 * (u[bad] + u[bad + 1])
        if np.min(np.diff(u)[bad]) < 1e-15:
            break
        u = np.insert(u, bad + 1, mids)
        vals = np.insert(vals, bad + 1, E(contour(mids)))
    raise RuntimeError("argument-principle sampling did not resolve the phase")


def repr_ker_from_E(E: HermiteBiehlerFn, z: complex, xi: complex, tol: float = 1e-8) -> complex:
    """(conj E(z) E(xi) - E(conj z) conj E(conj xi)) / (2i (conj z - xi)).

    Within ``tol`` of the removable singularity xi = conj z the derivative
    form of the quotient is used.
    """
    z = complex(z)
    xi = complex(xi)
    zc = z.conjugate()
    if abs(zc - xi) < tol:
        num = np.conj(E(z)) * E.derivative(zc) - E(zc) * np.conj(E.derivative(z))
        return complex(num / (-2j))
    num = np.conj(E(z)) * E(xi) - E(zc) * np.conj(E(np.conj(xi)))
    return complex(num / (2j * (zc - xi)))


def be_inner(F: BElement, G: BElement, E: HermiteBiehlerFn, tol: float = 1e-8, panels: int = 8, order: int = 64) -> complex:
    """(1/pi) int F conj(G) / |E|^2 over the real line.

    Substitutes lam = tan(theta) and integrates with composite Gauss-Legendre
    panels, doubling the panel count until two successive values agree.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    # E has zeros close to the real axis; grade the panels geometrically
    # around each of them so the peaks of 1/|E|^2 are resolved
    edges = [np.linspace(-np.pi / 2, np.pi / 2, panels + 1)]
    for zeta in E.zeros():
        width = max(abs(zeta.imag), 1e-14)
        offsets = width * 2.0 ** np.arange(-3, 60)
        offsets = offsets[offsets < 1e8]
        edges.append(np.arctan(zeta.real + np.concatenate(([0.0], offsets, -offsets))))
    edges = np.unique(np.concatenate(edges))

    def integrate(e):
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[:-1] + e[1:])
        theta = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        lam = np.tan(theta)
        e = E(lam)
        # deg F, deg G < deg E, so both ratios stay bounded as |lam| grows
        integrand = (F(lam) / e) * np.conj(G(lam) / e) * (1 + lam**2)
        return complex(np.sum(weights * integrand) / np.pi)

    prev = integrate(edges)
    for _ in range(6):
        edges = np.sort(np.concatenate((edges, 0.5 * (edges[:-1] + edges[1:]))))
        cur = integrate(edges)
        change = abs(cur - prev)
        if change < tol:
            return cur
        prev = cur
    raise RuntimeError(f"quadrature did not converge: last change {change:.3e} > {tol:.1e}")


def multiply_by_lambda(H: BElement) -> BElement:
    """lam * H(lam) for deg H <= N-2, through the three-term recurrence."""
    sd = H.sd
    J = _jacobi(sd)
    h = H.coeffs
    if sd.n >= 1 and abs(h[-1]) > 0:
        raise ValueError("multiplying by lambda would leave the space (deg H = N - 1)")
    a = J.a
    g = J.b * h
    # lam phi_m = a_{m-1} phi_{m-1} + b_m phi_m + a_m phi_{m+1}
    g[1:] += a * h[:-1]
    g[:-1] += a * h[1:]
    return BElement(sd, g)


def divide_by_linear(G: BElement, omega: complex) -> tuple[BElement, complex]:
    """Synthetic division G(lam) = (lam - omega) H(lam) + remainder, in the phi-basis."""
    sd = G.sd
    J = _jacobi(sd)
    n = sd.n
    g = G.coeffs
    a = J.a
    h = np.zeros(n, dtype=complex)
    if n == 1:
        return BElement(sd, h), complex(g[0])
    # top coefficient: g_N = a_{N-1} h_{N-1}
    h[n - 2] = g[n - 1] / a[n - 2]
    for m in range(n - 2, 0, -1):
        # g_m = a_{m-1} h_{m-1} + (b_m - omega) h_m + a_m h_{m+1}   (0-based m)
        nxt = h[m + 1] if m + 1 < n else 0.0
        h[m - 1] = (g[m] - (J.b[m] - omega) * h[m] - a[m] * nxt) / a[m - 1]
    nxt = h[1] if n > 1 else 0.0
    remainder = g[0] - (J.b[0] - omega) * h[0] - a[0] * nxt
    return BElement(sd, h), complex(remainder)


@dataclass
class AxiomReport:
    point_evaluation: bool
    conjugation: bool
    blaschke: bool | None
    max_point_ratio: float
    conjugation_error: float
    blaschke_error: float | None

    @property
    def passed(self) -> bool:
        return self.point_evaluation and self.conjugation and self.blaschke is not False


def verify_axioms(sd: SpectralData, rng: np.random.Generator, trials: int = 20, tol: float = 1e-10) -> AxiomReport:
    """Check the three de Branges axioms on random elements of B_N."""
    n = sd.n
    ratios, conj_err, blaschke_err = [], [], []
    for _ in range(trials):
        G = BElement(sd, rng.standard_normal(n) + 1j * rng.standard_normal(n))
        z = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        Jz = reproducing_kernel(sd, z)
        bound = np.sqrt(Jz(z).real) * bn_norm(G)
        ratios.append(abs(G(z)) / bound)

        nG = bn_norm(G)
        conj_err.append(abs(bn_norm(G.conjugate()) - nG) / nG)

        if n >= 2:
            omega = complex(rng.uniform(-3, 3), rng.uniform(0.1, 3))
            hc = np.zeros(n, dtype=complex)
            hc[: n - 1] = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
            H = BElement(sd, hc)
            Gw = multiply_by_lambda(H) - omega * H
            H2, rem = divide_by_linear(Gw, omega)
            if abs(rem) > 1e-8 * max(1.0, np.max(np.abs(Gw.coeffs))) or abs(Gw(omega)) > 1e-8 * bn_norm(Gw):
                blaschke_err.append(np.inf)
                continue
            B = multiply_by_lambda(H2) - np.conj(omega) * H2
            blaschke_err.append(abs(bn_norm(B) - bn_norm(Gw)) / bn_norm(Gw))

    max_ratio = float(np.max(ratios))
    cerr = float(np.max(conj_err))
    berr = float(np.max(blaschke_err)) if blaschke_err else None
    return AxiomReport(
        point_evaluation=max_ratio <= 1 + tol,
        conjugation=cerr <= tol,
        blaschke=None if berr is None else berr <= tol,
        max_point_ratio=max_ratio,
        conjugation_error=cerr,
        blaschke_error=berr,
    )
