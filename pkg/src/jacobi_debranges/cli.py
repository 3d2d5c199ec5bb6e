"""Command-line driver.

Subcommands: spectra, simulate, reconstruct, debranges, verify.  Exit codes:
0 success, 1 verification or reconstruction failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import wave_dynamics
from .connecting import apply_ct, ct_kernel_dynamic, ct_kernel_spectral, gram_matrix, inner_product
from .debranges import (
    BElement,
    be_inner,
    bn_inner,
    count_upper_zeros,
    hb_margin,
    hermite_biehler_E,
    repr_ker_from_E,
    reproducing_kernel,
    verify_axioms,
    verify_hb,
)
from .jacobi_core import JacobiMatrix, SpectralData, eval_polynomials, random_jacobi, spectral_decomposition
from .krein import (
    ReconstructionError,
    read_response_csv,
    reconstruct,
    reconstruct_exact,
    response_samples,
    solve_f1,
    solve_special_controls,
    verify_krein_system,
    write_reconstruction_json,
    write_response_csv,
)
from .wave_dynamics import (
    SampledControl,
    SBasisControl,
    TimeGrid,
    apply_response,
    coordinates,
    control_operator,
    read_control_csv,
    write_control_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    jacobi: JacobiMatrix
    T: float = 1.0
    grid_m: int = 2001
    seed: int = 0
    out: Path = Path(".")
    exact_path: bool = False
    tolerances: dict = field(default_factory=dict)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


DEFAULT_GENERATOR = {"n": 3, "seed": 0, "b_range": [-2.0, 2.0], "a_range": [0.5, 2.0]}


def _generate(gen: dict, seed_override: int | None) -> tuple[JacobiMatrix, int]:
    spec = {**DEFAULT_GENERATOR, **gen}
    seed = int(spec["seed"] if seed_override is None else seed_override)
    rng = np.random.default_rng(seed)
    J = random_jacobi(int(spec["n"]), rng, tuple(spec["b_range"]), tuple(spec["a_range"]))
    return J, seed


def load_config(args) -> RunConfig:
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")

    try:
        if "a" in data or "b" in data:
            J = JacobiMatrix(a=np.asarray(data.get("a", []), dtype=float), b=np.asarray(data["b"], dtype=float))
            seed = int(data.get("seed", 0) if args.seed is None else args.seed)
        else:
            gen = dict(data.get("generator", {}))
            if getattr(args, "n", None) is not None:
                gen["n"] = args.n
            J, seed = _generate(gen, args.seed)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid matrix specification: {exc}") from exc

    T = float(args.T if args.T is not None else data.get("T", 1.0))
    if not T > 0:
        raise UsageError("T must be positive")
    m = int(args.grid if args.grid is not None else data.get("grid", 2001))
    if m % 2 == 0:
        m += 1
    if m < 201:
        raise UsageError("grid must have at least 201 points")
    out = Path(args.out if args.out is not None else data.get("out", "."))
    return RunConfig(
        jacobi=J,
        T=T,
        grid_m=m,
        seed=seed,
        out=out,
        exact_path=bool(getattr(args, "exact_path", False)),
        tolerances=dict(data.get("tolerances", {})),
    )


def _out_dir(cfg: RunConfig) -> Path:
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory: {exc}") from exc
    return cfg.out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])


# ---------------------------------------------------------------- subcommands


def cmd_spectra(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    J = cfg.jacobi
    sd = spectral_decomposition(J)
    _write_json(
        out / "spectra.json",
        {
            "a": [float(x) for x in J.a],
            "b": [float(x) for x in J.b],
            "lambdas": [float(x) for x in sd.lambdas],
            "rhos": [float(x) for x in sd.rhos],
        },
    )
    pad = 1.0 + 0.1 * (sd.lambdas[-1] - sd.lambdas[0])
    lam = np.linspace(sd.lambdas[0] - pad, sd.lambdas[-1] + pad, 401)
    phi = eval_polynomials(J, lam)
    _write_csv(
        out / "polynomials.csv",
        ["lambda"] + [f"phi_{m + 1}" for m in range(J.n + 1)],
        np.column_stack([lam, phi.T]),
    )
    tau, r = response_samples(sd, cfg.T, cfg.grid_m)
    write_response_csv(out / "response_function.csv", tau, r)
    return EXIT_OK


def _load_control(path, sd: SpectralData, cfg: RunConfig):
    if path is None:
        grid = TimeGrid(cfg.T, cfg.grid_m)
        return SampledControl(grid, np.ones(grid.m))
    p = Path(path)
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(p.read_text())
            re = np.asarray(data["re"], dtype=float)
            im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
            return SBasisControl(sd, float(data.get("T", cfg.T)), re + 1j * im)
        return read_control_csv(p)
    except OSError as exc:
        raise UsageError(f"cannot read control: {exc}") from exc
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid control file: {exc}") from exc


def cmd_simulate(cfg: RunConfig, control_path=None) -> int:
    out = _out_dir(cfg)
    sd = spectral_decomposition(cfg.jacobi)
    f = _load_control(control_path, sd, cfg)
    grid = f.grid if isinstance(f, SampledControl) else TimeGrid(f.T, cfg.grid_m)
    traj = np.array([sd.phi_matrix @ coordinates(sd, f, t) for t in grid.t])
    header = ["t"] + [f"u_{k + 1}" for k in range(sd.n)]
    cols = [grid.t] + [traj[:, k].real for k in range(sd.n)]
    if np.any(traj.imag != 0):
        # complex controls: imaginary parts follow the real columns
        header += [f"u_{k + 1}_im" for k in range(sd.n)]
        cols += [traj[:, k].imag for k in range(sd.n)]
    _write_csv(out / "trajectory.csv", header, np.column_stack(cols))
    resp = apply_response(sd, f, grid)
    write_control_csv(out / "response.csv", SampledControl(grid, resp))
    return EXIT_OK


def cmd_reconstruct(cfg: RunConfig, r_path=None, n: int | None = None) -> int:
    out = _out_dir(cfg)
    truth = cfg.jacobi
    sd = spectral_decomposition(truth)
    extra: dict = {}
    if cfg.exact_path:
        rec = reconstruct_exact(sd.lambdas, sd.weights, cfg.T)
    else:
        if r_path is not None:
            try:
                tau, r = read_response_csv(r_path)
            except OSError as exc:
                raise UsageError(f"cannot read response samples: {exc}") from exc
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            if tau.size % 2 == 0:
                raise UsageError("response samples must cover [0, 2T] with an odd count")
            T = tau[-1] / 2
        else:
            tau, r = response_samples(sd, cfg.T, cfg.grid_m)
            T = cfg.T
        n_target = truth.n if n is None else int(n)
        try:
            rec = reconstruct(r, T, n_target, seed=cfg.seed)
        except ReconstructionError as exc:
            print(f"reconstruction failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
    if rec.a.shape == truth.a.shape and rec.b.shape == truth.b.shape:
        scale = max(1.0, float(np.max(np.abs(np.concatenate([truth.a, truth.b])))))
        err = float(np.max(np.abs(np.concatenate([rec.a - truth.a, rec.b - truth.b]))))
        extra["max_error"] = err
        extra["max_relative_error"] = err / scale
    write_reconstruction_json(out / "reconstruction.json", rec, extra)
    return EXIT_OK


def _kappas(sd: SpectralData, E, rng: np.random.Generator, samples: int = 6) -> dict:
    n = sd.n
    ke, kb = [], []
    for _ in range(samples):
        z, xi = rng.normal(size=2) + 1j * rng.normal(size=2)
        jz = reproducing_kernel(sd, z)(xi)
        if abs(jz) > 1e-8:
            ke.append(repr_ker_from_E(E, z, xi) / jz)
        F = BElement(sd, rng.normal(size=n) + 1j * rng.normal(size=n))
        G = BElement(sd, rng.normal(size=n) + 1j * rng.normal(size=n))
        ip = bn_inner(F, G)
        if abs(ip) > 1e-8:
            kb.append(be_inner(F, G, E) / ip)
    ke, kb = np.array(ke), np.array(kb)
    mean_e, mean_b = complex(np.mean(ke)), complex(np.mean(kb))
    return {
        "kappa_E": [mean_e.real, mean_e.imag],
        "kappa_B": [mean_b.real, mean_b.imag],
        "kappa_E_spread": float(np.max(np.abs(ke - mean_e)) / abs(mean_e)),
        "kappa_B_spread": float(np.max(np.abs(kb - mean_b)) / abs(mean_b)),
        "product_error": float(abs(mean_e * mean_b - 1)),
    }


def cmd_debranges(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    sd = spectral_decomposition(cfg.jacobi)
    E = hermite_biehler_E(sd)
    rng = np.random.default_rng(cfg.seed)
    L = 2.0 * (1.0 + float(np.max(np.abs(sd.lambdas))))

    lam = np.linspace(-L, L, 401)
    e = E(lam)
    _write_csv(out / "E_samples.csv", ["lambda", "re", "im", "abs2"], np.column_stack([lam, e.real, e.imag, np.abs(e) ** 2]))

    x = np.linspace(-L, L, 41)
    y = np.linspace(L / 20, L, 20)
    X, Y = np.meshgrid(x, y, indexing="ij")
    margin = hb_margin(E, X + 1j * Y)
    _write_csv(out / "hb_margin.csv", ["x", "y", "margin"], np.column_stack([X.ravel(), Y.ravel(), margin.ravel()]))

    _write_json(out / "kappa.json", _kappas(sd, E, rng))
    ax = verify_axioms(sd, rng)
    _write_json(out / "axioms.json", ax.__dict__)
    return EXIT_OK


# ------------------------------------------------------------------- verify


def _check(name: str, value: float, tol: float, results: list) -> None:
    ok = bool(np.isfinite(value) and value <= tol)
    results.append((name, ok, float(value), tol))


def run_checks(cfg: RunConfig) -> list:
    """Named invariant checks: (name, passed, measured, tolerance)."""
    results: list = []
    J = cfg.jacobi
    n, T = J.n, cfg.T
    rng = np.random.default_rng(cfg.seed)
    sd = spectral_decomposition(J)

    # jacobi_core
    oracle = np.linalg.eigvalsh(J.dense())
    _check("spectral.eigenvalues_vs_dense", np.max(np.abs(sd.lambdas - oracle)), cfg.tol("eigen", 1e-10), results)
    _check("spectral.parseval", abs(np.sum(sd.weights) - 1), cfg.tol("parseval", 1e-12), results)
    rows = (sd.phi_matrix * sd.weights) @ sd.phi_matrix.T
    _check("spectral.row_orthonormality", np.max(np.abs(rows - np.eye(n))), cfg.tol("orth", 1e-10), results)

    # wave_dynamics: the kernel must solve S'' = -lam S with S(0) = 0, S'(0) = 1
    S = wave_dynamics.s_kernel
    h = 1e-3
    tt = np.linspace(0.1, T, 7)[:, None]
    lam = sd.lambdas[None, :]
    second = (S(tt + h, lam) - 2 * S(tt, lam) + S(tt - h, lam)) / h**2
    scale = 1.0 + np.max(np.abs(lam * S(tt, lam)))
    _check("wave.kernel_ode", np.max(np.abs(second + lam * S(tt, lam))) / scale, 1e-4, results)
    slope = (S(h, sd.lambdas) - S(-h, sd.lambdas)) / (2 * h)
    _check("wave.kernel_initial", max(np.max(np.abs(S(0.0, sd.lambdas))), np.max(np.abs(slope - 1))), 1e-5, results)
    tau = np.linspace(0, 2 * T, 9)
    r_direct = np.sum(S(tau[:, None], sd.lambdas) * sd.weights, axis=1)
    r_module = wave_dynamics.response_function(sd, tau)
    _check("wave.response_function", np.max(np.abs(r_direct - r_module)), 1e-12, results)
    grid = TimeGrid(T, cfg.grid_m)
    cvec = rng.normal(size=n)
    f = SBasisControl(sd, T, cvec)
    fs = SampledControl(grid, np.sum(cvec * S(T - grid.t[:, None], sd.lambdas), axis=1))
    u_exact = control_operator(sd, f)
    u_grid = control_operator(sd, fs)
    _check("wave.sbasis_vs_sampled", np.max(np.abs(u_exact - u_grid)) / (1 + np.max(np.abs(u_exact))), 1e-7, results)

    # connecting
    ts = np.linspace(0, T, 50)
    kd = ct_kernel_dynamic(sd, T, ts[:, None], ts[None, :])
    ks = np.sum(S(T - ts[:, None, None], sd.lambdas) * S(T - ts[None, :, None], sd.lambdas) * sd.weights, axis=-1)
    _check("connecting.kernel_identity", np.max(np.abs(kd - ks)), cfg.tol("kernels", 1e-10), results)
    ks_mod = ct_kernel_spectral(sd, T, ts[:, None], ts[None, :])
    _check("connecting.spectral_kernel", np.max(np.abs(ks - ks_mod)), 1e-12, results)
    G = gram_matrix(sd, T)
    _check("connecting.gram_positive", 0.0 if G.is_positive_definite() else 1.0, 0.0, results)
    g = SBasisControl(sd, T, rng.normal(size=n) + 1j * rng.normal(size=n))
    lhs = inner_product(G, apply_ct(sd, G, f), g)
    rhs = np.vdot(control_operator(sd, g), control_operator(sd, f))
    _check("connecting.ct_identity", abs(lhs - rhs) / (1 + abs(rhs)), 1e-10, results)

    # krein
    f1 = solve_f1(sd, G)
    d1 = np.zeros(n)
    d1[0] = 1
    _check("krein.f1_round_trip", np.linalg.norm(control_operator(sd, f1) - d1), cfg.tol("krein", 1e-9), results)
    fc = solve_special_controls(sd, G)
    _check("krein.special_gram", np.max(np.abs(fc.gram_test_matrix(G) - np.eye(n))), 1e-8, results)
    _check("krein.system_residual", verify_krein_system(J, sd, fc, G), cfg.tol("krein", 1e-9), results)
    rec = reconstruct_exact(sd.lambdas, sd.weights, T)
    err = np.max(np.abs(np.concatenate([rec.a - J.a, rec.b - J.b])))
    _check("krein.reconstruct_exact", err, 1e-8, results)
    tau, r = response_samples(sd, T, cfg.grid_m)
    try:
        recg = reconstruct(r, T, n, seed=cfg.seed)
        scale = max(1.0, float(np.max(np.abs(np.concatenate([J.a, J.b])))))
        errg = np.max(np.abs(np.concatenate([recg.a - J.a, recg.b - J.b]))) / scale
    except ReconstructionError:
        errg = np.inf
    _check("krein.reconstruct_grid", errg, cfg.tol("grid", 1e-3), results)

    # debranges
    worst = 0.0
    for _ in range(10):
        Gz = BElement(sd, rng.normal(size=n) + 1j * rng.normal(size=n))
        z = complex(*rng.normal(size=2))
        worst = max(worst, abs(bn_inner(Gz, reproducing_kernel(sd, z)) - Gz(z)))
    _check("debranges.reproducing", worst, 1e-10, results)
    z = complex(*rng.normal(size=2))
    route = np.max(np.abs(reproducing_kernel(sd, z).coeffs - reproducing_kernel(sd, z, "control", G).coeffs))
    _check("debranges.control_route", route, 1e-9, results)
    E = hermite_biehler_E(sd)
    pts = rng.uniform(-5, 5, 200) + 1j * rng.uniform(0.01, 5, 200)
    hb = verify_hb(E, pts)
    _check("debranges.hermite_biehler", 0.0 if hb.passed else 1.0, 0.0, results)
    _check("debranges.upper_zeros", float(count_upper_zeros(E)), 0.0, results)
    k = _kappas(sd, E, rng)
    _check("debranges.kappa_E_constant", k["kappa_E_spread"], 1e-6, results)
    _check("debranges.kappa_B_constant", k["kappa_B_spread"], 1e-6, results)
    _check("debranges.kappa_product", k["product_error"], 1e-6, results)
    ax = verify_axioms(sd, rng)
    _check("debranges.axiom_point_evaluation", max(ax.max_point_ratio - 1, 0.0), 1e-10, results)
    _check("debranges.axiom_conjugation", ax.conjugation_error, 1e-10, results)
    if ax.blaschke is not None:
        _check("debranges.axiom_blaschke", ax.blaschke_error, 1e-10, results)
    return results


def cmd_verify(cfg: RunConfig) -> int:
    results = run_checks(cfg)
    width = max(len(r[0]) for r in results)
    for name, ok, value, tol in results:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {value:.3e}  (tol {tol:.1e})")
    failed = [r[0] for r in results if not r[1]]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ----------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: current)")
    common.add_argument("--T", type=float, help="final time (default 1)")
    common.add_argument("--grid", type=int, help="time-grid points, forced odd, >= 201 (default 2001)")
    common.add_argument("--seed", type=int, help="seed for the generator and random checks")
    common.add_argument("--n", type=int, help="matrix size for the generator")

    parser = argparse.ArgumentParser(prog="jacobi-debranges", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectra", parents=[common], help="spectral data, polynomials and response function")
    p = sub.add_parser("simulate", parents=[common], help="forward problem for a boundary control")
    p.add_argument("--control", help="control file: CSV t,re,im or JSON S-basis coefficients")
    p = sub.add_parser("reconstruct", parents=[common], help="recover the matrix from response data")
    p.add_argument("--r-file", help="CSV t,r of response samples on [0, 2T]")
    p.add_argument("--exact-path", action="store_true", help="use the exact S-basis path")
    p.add_argument("--target-n", type=int, help="matrix size to reconstruct (default: size of the config matrix)")
    sub.add_parser("debranges", parents=[common], help="Hermite-Biehler function and de Branges checks")
    sub.add_parser("verify", parents=[common], help="run every invariant check")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "spectra":
            return cmd_spectra(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.control)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, args.r_file, args.target_n)
        if args.command == "debranges":
            return cmd_debranges(cfg)
        return cmd_verify(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
