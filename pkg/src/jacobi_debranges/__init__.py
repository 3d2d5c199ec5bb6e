"""Boundary control of finite Jacobi matrices and the associated de Branges space."""
from .connecting import GramMatrix, apply_ct, apply_ct_grid, ct_kernel_dynamic, ct_kernel_spectral, gram_matrix, inner_product
from .debranges import (
    BElement,
    HermiteBiehlerFn,
    be_inner,
    bn_inner,
    bn_norm,
    count_upper_zeros,
    divide_by_linear,
    fourier_image,
    hermite_biehler_E,
    multiply_by_lambda,
    project_PN,
    repr_ker_from_E,
    reproducing_kernel,
    verify_axioms,
    verify_hb,
)
from .jacobi_core import (
    JacobiMatrix,
    SpectralData,
    apply_matrix,
    eval_polynomials,
    eval_spectral_function,
    random_jacobi,
    spectral_decomposition,
)
from .krein import (
    Reconstruction,
    ReconstructionError,
    SpecialControls,
    reconstruct,
    reconstruct_exact,
    solve_f1,
    solve_special_control_problem,
    solve_special_controls,
    verify_krein_system,
)
from .wave_dynamics import (
    SampledControl,
    SBasisControl,
    TimeGrid,
    apply_response,
    control_operator,
    response_function,
    s_kernel,
    solve_forward,
)

__all__ = [
    "GramMatrix",
    "apply_ct",
    "apply_ct_grid",
    "ct_kernel_dynamic",
    "ct_kernel_spectral",
    "gram_matrix",
    "inner_product",
    "BElement",
    "HermiteBiehlerFn",
    "be_inner",
    "bn_inner",
    "bn_norm",
    "count_upper_zeros",
    "divide_by_linear",
    "fourier_image",
    "hermite_biehler_E",
    "multiply_by_lambda",
    "project_PN",
    "repr_ker_from_E",
    "reproducing_kernel",
    "verify_axioms",
    "verify_hb",
    "JacobiMatrix",
    "SpectralData",
    "apply_matrix",
    "eval_polynomials",
    "eval_spectral_function",
    "random_jacobi",
    "spectral_decomposition",
    "Reconstruction",
    "ReconstructionError",
    "SpecialControls",
    "reconstruct",
    "reconstruct_exact",
    "solve_f1",
    "solve_special_control_problem",
    "solve_special_controls",
    "verify_krein_system",
    "SampledControl",
    "SBasisControl",
    "TimeGrid",
    "apply_response",
    "control_operator",
    "response_function",
    "s_kernel",
    "solve_forward",
]

__version__ = "0.1.0"
