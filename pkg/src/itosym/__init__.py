"""Symmetry classification and exact pathwise integration of scalar Ito
SDEs with constant or power-law (s * x^k) noise."""

from .model import (CaseParams, ClassificationResult, DriftSpec, NoiseSpec,
                    SdeProblem, SolutionPath, Symmetry, WienerPath,
                    make_problem, problem_from_json, problem_to_json, validate)
from .classifier import (build_symmetry, build_w_symmetry, classify,
                         construct_drift)
from .determining import (first_order_residual, ito_laplacian, probe_points,
                          remark16_criterion, residuals, w_obstruction)
from .transforms import (GMap, kozlov_map, reduced_coefficients, standard_form,
                         transform_sde, transform_symmetry,
                         transformed_drift_at)
from .integrate import (convergence_study, euler_maruyama, exact_case_a,
                        exact_case_b, exact_case_c, exact_simple_noise,
                        exact_solver, milstein, refine, wiener_path, zero_path)

__version__ = "0.1.0"

__all__ = [
    "CaseParams", "ClassificationResult", "DriftSpec", "NoiseSpec",
    "SdeProblem", "SolutionPath", "Symmetry", "WienerPath",
    "make_problem", "problem_from_json", "problem_to_json", "validate",
    "build_symmetry", "build_w_symmetry", "classify", "construct_drift",
    "first_order_residual", "ito_laplacian", "probe_points",
    "remark16_criterion", "residuals", "w_obstruction",
    "GMap", "kozlov_map", "reduced_coefficients", "standard_form",
    "transform_sde", "transform_symmetry", "transformed_drift_at",
    "convergence_study", "euler_maruyama", "exact_case_a", "exact_case_b",
    "exact_case_c", "exact_simple_noise", "exact_solver", "milstein",
    "refine", "wiener_path", "zero_path",
]
